//! Sliding pattern frequencies of a random point and of 1/3 in base 2.
use jointnormal::measures::MeasureSpec;
use jointnormal::normality::{normality_report, Gate};
use jointnormal::{make_enclosure, orbit_digits, sample, MapSpec, PrecisionConfig};

fn main() -> jointnormal::Result<()> {
    let map = MapSpec::times_b(2)?;
    let n = 20_000;
    let cfg = PrecisionConfig::auto(std::slice::from_ref(&map), n, 2f64.powi(-20))?;
    let gate = Gate::default();
    for (label, x) in [("seed 1", sample(1, cfg.bits)), ("1/3", make_enclosure("1/3", &cfg)?)] {
        let d = orbit_digits(&map, x, n, &cfg);
        let rep = normality_report(&d, &MeasureSpec::Lebesgue, 3, None, &gate)?;
        for level in &rep.levels {
            println!(
                "{label}: k={} max|z|={:.2} pass={}",
                level.k, level.verdict.max_abs_z, level.verdict.pass
            );
        }
    }
    Ok(())
}
