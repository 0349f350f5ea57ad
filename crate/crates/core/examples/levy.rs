//! Growth of continued-fraction denominators for a random point and for the
//! golden ratio, which converges to log φ instead.
use jointnormal::entropy::{levy_estimate, levy_from_digits};
use jointnormal::{sample, MapSpec, PrecisionConfig};

fn main() -> jointnormal::Result<()> {
    let n = 5000;
    let cfg = PrecisionConfig::auto(&[MapSpec::Gauss], n, 2f64.powi(-20))?;
    let rep = levy_estimate(sample(2, cfg.bits), n, &cfg)?;
    for p in &rep.series {
        println!("n = {:>5}: (1/n) log q_n = {:.6}", p.n, p.value);
    }
    println!("{} = {:.6}, Fibonacci bound holds: {}", rep.formula, rep.reference, rep.fibonacci_bound);

    let golden = levy_from_digits(&vec![1; n]);
    let log_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    println!("golden ratio: {:.6}, log φ = {log_phi:.6}", golden.final_value);
    Ok(())
}
