//! Good-atom mass: exact for base 2 and the golden mean, sampled for Gauss.
use jointnormal::entropy::{property_e_mass, property_e_sampled, DEFAULT_CYLINDER_CAP};
use jointnormal::measures::MeasureSpec;
use jointnormal::{MapSpec, PrecisionConfig};

fn main() -> jointnormal::Result<()> {
    let ns: Vec<usize> = (1..=12).collect();
    let base2 = property_e_mass(&MapSpec::times_b(2)?, &MeasureSpec::Lebesgue, 0.05, &ns, 256, DEFAULT_CYLINDER_CAP)?;
    println!("base 2: c0 = {}", base2.c0);

    let golden = MapSpec::golden();
    let mu = MeasureSpec::natural(&golden)?;
    let rep = property_e_mass(&golden, &mu, 0.05, &ns, 256, DEFAULT_CYLINDER_CAP)?;
    for r in &rep.rows {
        println!(
            "golden n={:>2}: good mass {:.4}, out of band {:.4}, envelope {:.4}",
            r.n,
            r.good_mass,
            r.lebesgue_out_of_band.unwrap_or(f64::NAN),
            r.envelope.unwrap_or(f64::NAN)
        );
    }

    let cfg = PrecisionConfig::auto(&[MapSpec::Gauss], 200, 2f64.powi(-20))?;
    let gauss = property_e_sampled(0.2, &[50, 100, 200], 200, 1, &cfg)?;
    for r in &gauss.rows {
        println!("gauss n={:>3}: good mass {:.3} from {} samples", r.n, r.good_mass, r.atoms);
    }
    Ok(())
}
