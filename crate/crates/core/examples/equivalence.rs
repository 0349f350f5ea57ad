//! The six equivalent normality forms agree on a random point and on 1/3.
use jointnormal::measures::MeasureSpec;
use jointnormal::normality::{equivalence_suite, SuiteConfig};
use jointnormal::{make_enclosure, sample, MapSpec, PrecisionConfig};

fn main() -> jointnormal::Result<()> {
    let map = MapSpec::times_b(2)?;
    let n = 20_000;
    let cfg = PrecisionConfig::auto(std::slice::from_ref(&map), n, 2f64.powi(-20))?;
    let suite = SuiteConfig::default();
    for (label, x) in [("seed 4", sample(4, cfg.bits)), ("1/3", make_enclosure("1/3", &cfg)?)] {
        let rep = equivalence_suite(x, &map, &MeasureSpec::Lebesgue, n, &cfg, &suite)?;
        let verdicts: Vec<String> = rep.forms.iter().map(|f| format!("{}={}", f.form.label(), f.pass)).collect();
        println!("{label}: {} agree={}", verdicts.join(" "), rep.agree);
    }
    Ok(())
}
