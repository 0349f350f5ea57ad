//! Runs a JSON manifest through the batch runner and prints the CSV.
use jointnormal::cli::{run, ExperimentManifest, OutputFormat};

const MANIFEST: &str = r#"{
  "command": "entropy",
  "maps": ["gauss"],
  "seeds": 4,
  "n_max": 1000,
  "precision": "auto",
  "gates": { "tolerance": 0.05 }
}"#;

fn main() -> jointnormal::Result<()> {
    let m = ExperimentManifest::from_json(MANIFEST)?;
    let record = run(&m)?;
    record.write(OutputFormat::Csv, std::io::stdout().lock())?;
    let a = &record.payload.aggregate;
    println!(
        "mean {:.5} vs {} = {:.5}: {:?} (exit code {})",
        a.mean_estimate.unwrap_or(f64::NAN),
        a.formula.as_deref().unwrap_or("?"),
        a.reference.unwrap_or(f64::NAN),
        a.verdict,
        record.exit_code()
    );
    Ok(())
}
