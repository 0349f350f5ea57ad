//! Certified digits of one point under several maps.
use jointnormal::{make_enclosure, orbit_digits, sample, MapSpec, PrecisionConfig};

fn main() -> jointnormal::Result<()> {
    let maps: Vec<MapSpec> = ["timesb:2", "timesb:10", "beta:golden", "gauss"]
        .iter()
        .map(|s| MapSpec::parse(s))
        .collect::<Result<_, _>>()?;
    let cfg = PrecisionConfig::auto(&maps, 40, 2f64.powi(-20))?;

    let third = make_enclosure("1/3", &cfg)?;
    let d = orbit_digits(&maps[0], third, 16, &cfg);
    println!("1/3 in base 2: {:?}", d.symbols);

    let x = sample(7, cfg.bits);
    for map in &maps {
        let d = orbit_digits(map, x.clone(), 40, &cfg);
        println!("{map:>12}: {:?} (stop: {:?})", d.symbols, d.stop);
    }
    Ok(())
}
