//! Cylinder intervals, emptiness, and the golden-mean cylinder count.
use jointnormal::cylinders::{cf_cylinder_length, cylinder_interval, cylinder_measure, enumerate_cylinders};
use jointnormal::measures::MeasureSpec;
use jointnormal::MapSpec;

fn main() -> jointnormal::Result<()> {
    let gauss = MapSpec::Gauss;
    let c = cylinder_interval(&gauss, &[2, 1, 3], 256)?;
    println!(
        "CF cylinder (2,1,3): [{:.6}, {:.6}], length {} = {}",
        c.lo_f64(),
        c.hi_f64(),
        c.lebesgue_exact().unwrap(),
        cf_cylinder_length(&[2, 1, 3])?
    );
    println!("Gauss measure: {:.6}", cylinder_measure(&c, &MeasureSpec::GaussMeasure));

    let three_halves = MapSpec::parse("beta:3/2")?;
    let c = cylinder_interval(&three_halves, &[1, 1], 256)?;
    println!("beta:3/2 cylinder (1,1) empty: {}", c.is_empty());

    let golden = MapSpec::golden();
    for n in 1..=10 {
        let count = enumerate_cylinders(&golden, n, 256, 1 << 20)?.len();
        println!("golden rank {n:>2}: {count} cylinders");
    }
    Ok(())
}
