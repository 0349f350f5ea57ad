//! Correlation decay λ(A ∩ T^{-(n+l)}B) − λ(A)μ(B) for three maps.
use jointnormal::mixing::{mixing_correlation, MixingOptions};
use jointnormal::MapSpec;
use rug::Rational;

fn main() -> jointnormal::Result<()> {
    let b = (Rational::new(), Rational::from((1, 2)));
    let ns: Vec<usize> = (1..=12).collect();
    for (text, a) in [("timesb:2", vec![0]), ("beta:golden", vec![0]), ("gauss", vec![1])] {
        let map = MapSpec::parse(text)?;
        let rep = mixing_correlation(&map, &a, b.clone(), &ns, &MixingOptions::default())?;
        let head: Vec<String> = rep.series.iter().take(5).map(|p| format!("{:.2e}", p.signed)).collect();
        println!("{text:>12} via {:?}: {} ... fit {:?}", rep.route, head.join(" "), rep.fit);
    }
    Ok(())
}
