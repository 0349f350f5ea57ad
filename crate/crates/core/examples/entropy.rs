//! Shannon–McMillan–Breiman estimates for base 10, golden mean and Gauss.
use jointnormal::entropy::smb_estimate;
use jointnormal::measures::MeasureSpec;
use jointnormal::{sample, MapSpec, PrecisionConfig};

fn main() -> jointnormal::Result<()> {
    let n = 2000;
    for text in ["timesb:10", "beta:golden", "gauss"] {
        let map = MapSpec::parse(text)?;
        let cfg = PrecisionConfig::auto(std::slice::from_ref(&map), n, 2f64.powi(-20))?;
        let mu = MeasureSpec::natural(&map)?;
        let rep = smb_estimate(sample(5, cfg.bits), &map, &mu, n, &cfg)?;
        println!(
            "{text:>12}: estimate {:.6}, {} = {:.6}, relative error {:.2e}",
            rep.final_estimate, rep.formula, rep.closed_form, rep.relative_error
        );
    }
    Ok(())
}
