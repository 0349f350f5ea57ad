//! Joint normality of the binary and continued-fraction digits of one point,
//! plus the zero-entropy rotation companion.
use jointnormal::jointergo::{joint_average, Observable, ObservableSpec};
use jointnormal::measures::MeasureSpec;
use jointnormal::normality::{joint_report, Gate};
use jointnormal::{orbit_digits, sample, MapSpec, PrecisionConfig};

fn main() -> jointnormal::Result<()> {
    let maps = [MapSpec::times_b(2)?, MapSpec::Gauss];
    let n = 5000;
    let cfg = PrecisionConfig::auto(&maps, n + 1, 2f64.powi(-20))?;
    let x = sample(3, cfg.bits);
    let streams: Vec<_> = maps.iter().map(|m| orbit_digits(m, x.clone(), n, &cfg)).collect();
    let refs: Vec<_> = streams.iter().collect();
    let measures = [MeasureSpec::Lebesgue, MeasureSpec::GaussMeasure];
    let rep = joint_report(&refs, &measures, &[vec![vec![0], vec![1]]], n, &Gate::default())?;
    let row = &rep.rows[0];
    println!("binary 0 and CF 1: freq {:.5} target {:.5} z {:.2}", row.freq, row.target, row.z);

    let rot = MapSpec::parse("rotation:sqrt2m1")?;
    let half = Observable::parse("[0,1/2)")?;
    let specs = [
        ObservableSpec::natural(rot, half.clone())?,
        ObservableSpec::natural(maps[0].clone(), half)?,
    ];
    let avg = joint_average(&[x], &specs, n, &cfg)?;
    println!("rotation x doubling: {:.5} vs {} ({}), z {:.2}", avg.final_value, avg.target, avg.target_formula, avg.z);
    Ok(())
}
