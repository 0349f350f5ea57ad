//! Box counts of (T_2^n x, T_3^n x) on an 8 x 8 grid.
use jointnormal::jointergo::{entropy_distinct_check, equidist_test};
use jointnormal::measures::MeasureSpec;
use jointnormal::{sample, MapSpec, PrecisionConfig};

fn main() -> jointnormal::Result<()> {
    let maps = [MapSpec::times_b(2)?, MapSpec::times_b(3)?];
    let n = 20_000;
    let cfg = PrecisionConfig::auto(&maps, n, 2f64.powi(-20))?;
    let measures = [MeasureSpec::Lebesgue, MeasureSpec::Lebesgue];
    let rep = equidist_test(&sample(11, cfg.bits), &maps, &measures, n, 8, &cfg)?;
    println!(
        "sup deviation {:.5}, 3-sigma threshold {:.5}, excluded {}",
        rep.sup_deviation,
        rep.sup_threshold(3.0),
        rep.excluded
    );
    let check = entropy_distinct_check(&[maps[0].clone(), maps[1].clone(), MapSpec::Gauss]);
    println!("{:?}", check.verdict);
    Ok(())
}
