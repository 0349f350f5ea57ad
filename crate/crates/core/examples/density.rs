//! Transfer-operator fixed point for the golden-mean β-map.
use jointnormal::measures::{invariant_density, renyi_bounds};
use jointnormal::MapSpec;

fn main() -> jointnormal::Result<()> {
    let map = MapSpec::golden();
    let d = invariant_density(&map, 1000, 1e-12, 10_000)?;
    let (lo, hi) = renyi_bounds(&map).unwrap();
    println!("iterations {}, residual {:.2e}", d.iterations, d.residual);
    println!("density range [{:.6}, {:.6}], Rényi bounds [{lo:.6}, {hi:.6}]", d.bounds.0, d.bounds.1);
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    // Parry's closed form on [0, 1/φ) is constant.
    let parry = phi * phi / (1.0 + phi * phi) * (1.0 + 1.0 / phi);
    println!("h(0.1) = {:.6}, Parry value {parry:.6}", d.value_at(0.1));
    Ok(())
}
