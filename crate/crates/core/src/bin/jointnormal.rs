use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use jointnormal::cli::{
    parse_index_list, parse_symbols, run, Command, ExperimentManifest, OutputFormat, Precision, Seeds,
};
use jointnormal::normality::Form;
use jointnormal::Result;

#[derive(Parser)]
#[command(name = "jointnormal", version, about = "Certified digit expansions and normality experiments")]
struct Cli {
    /// Run a JSON manifest instead of a subcommand.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output format; overrides the manifest.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Working precision in bits, or `auto`; overrides the manifest.
    #[arg(long, global = true)]
    precision_bits: Option<Precision>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(clap::Subcommand)]
enum Sub {
    Expand(Opts),
    Cylinder(Opts),
    Measure(Opts),
    Density(Opts),
    Normality(Opts),
    Joint(Opts),
    Equidist(Opts),
    Entropy(Opts),
    Levy(Opts),
    Prope(Opts),
    Mixing(Opts),
    Equivalence(Opts),
}

#[derive(Args, Clone)]
struct Opts {
    /// Map grammar string; repeat for several maps.
    #[arg(long = "map", short = 'm')]
    maps: Vec<String>,
    /// Run seeds 1..=k.
    #[arg(long)]
    seeds: Option<u64>,
    /// Explicit seed; repeatable.
    #[arg(long = "seed")]
    seed: Vec<u64>,
    /// Explicit start value such as 1/3 or golden; repeatable.
    #[arg(long)]
    x: Vec<String>,
    /// Orbit length (n_max for entropy).
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    max_k: Option<usize>,
    #[arg(long)]
    symbol_cap: Option<u64>,
    /// One pattern per map, e.g. `--pattern 0 --pattern 1`.
    #[arg(long = "pattern")]
    patterns: Vec<String>,
    /// Observable per map: `[0,1/2)`, `cyl:0,1` or `pw:...`.
    #[arg(long = "observable")]
    observables: Vec<String>,
    #[arg(long)]
    independent: bool,
    #[arg(long)]
    grid: Option<usize>,
    /// Cylinder digits, comma-separated.
    #[arg(long)]
    symbols: Option<String>,
    /// Interval endpoints `a,b`.
    #[arg(long)]
    interval: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Ranks or lags: `1..20` or `1,2,5`.
    #[arg(long)]
    ns: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    /// Forms for the equivalence suite, e.g. `i,iii,v`.
    #[arg(long)]
    forms: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    pass_fraction: Option<f64>,
    #[arg(long)]
    bit_cap: Option<u64>,
}

fn manifest_from(command: Command, o: Opts) -> Result<ExperimentManifest> {
    let mut m = ExperimentManifest::new(command, &[]);
    m.maps = o.maps;
    m.seeds = match (o.seeds, o.seed.is_empty()) {
        (Some(k), _) => Seeds::Count(k),
        (None, false) => Seeds::List(o.seed.into_iter().map(jointnormal::cli::PointSpec::Seed).collect()),
        (None, true) => Seeds::default(),
    };
    m.x = o.x;
    m.n = o.n;
    let p = &mut m.params;
    if let Some(k) = o.max_k {
        p.max_k = k;
    }
    p.symbol_cap = o.symbol_cap;
    if !o.patterns.is_empty() {
        p.patterns = Some(o.patterns.iter().map(|s| parse_symbols(s)).collect::<Result<_>>()?);
    }
    if !o.observables.is_empty() {
        p.observables = Some(o.observables);
    }
    p.independent = o.independent;
    p.grid = o.grid;
    if let Some(s) = o.symbols {
        p.symbols = parse_symbols(&s)?;
    }
    if let Some(iv) = o.interval {
        let (a, b) = iv.split_once(',').ok_or_else(|| jointnormal::Error::Parse {
            what: "interval",
            input: iv.clone(),
        })?;
        p.interval = Some([a.trim().into(), b.trim().into()]);
    }
    if let Some(e) = o.epsilon {
        p.epsilon = e;
    }
    if let Some(ns) = o.ns {
        p.ns = Some(parse_index_list(&ns)?);
    }
    if let Some(s) = o.samples {
        p.samples = s;
    }
    if let Some(f) = o.forms {
        p.forms = Some(f.split(',').map(|s| Form::parse(s.trim())).collect::<Result<_>>()?);
    }
    let g = &mut m.gates;
    if let Some(s) = o.sigma {
        g.sigma = s;
        g.outlier_sigma = g.outlier_sigma.min(s);
    }
    g.tolerance = o.tolerance;
    if let Some(f) = o.pass_fraction {
        g.pass_fraction = f;
    }
    if let Some(c) = o.bit_cap {
        g.bit_cap = c;
    }
    Ok(m)
}

fn build(cli: Cli) -> Result<ExperimentManifest> {
    let mut m = match (cli.manifest, cli.command) {
        (Some(path), None) => ExperimentManifest::from_json(&std::fs::read_to_string(path)?)?,
        (None, Some(sub)) => {
            let (c, o) = match sub {
                Sub::Expand(o) => (Command::Expand, o),
                Sub::Cylinder(o) => (Command::Cylinder, o),
                Sub::Measure(o) => (Command::Measure, o),
                Sub::Density(o) => (Command::Density, o),
                Sub::Normality(o) => (Command::Normality, o),
                Sub::Joint(o) => (Command::Joint, o),
                Sub::Equidist(o) => (Command::Equidist, o),
                Sub::Entropy(o) => (Command::Entropy, o),
                Sub::Levy(o) => (Command::Levy, o),
                Sub::Prope(o) => (Command::Prope, o),
                Sub::Mixing(o) => (Command::Mixing, o),
                Sub::Equivalence(o) => (Command::Equivalence, o),
            };
            manifest_from(c, o)?
        }
        (Some(_), Some(_)) => {
            return Err(jointnormal::Error::InvalidManifest(
                "give either --manifest or a subcommand".into(),
            ))
        }
        (None, None) => {
            return Err(jointnormal::Error::InvalidManifest(
                "no subcommand; see --help".into(),
            ))
        }
    };
    if let Some(f) = cli.format {
        m.output = f;
    }
    if let Some(p) = cli.precision_bits {
        m.precision = p;
    }
    Ok(m)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = build(cli).and_then(|m| {
        let record = run(&m)?;
        record.write(m.output, io::stdout().lock())?;
        Ok(record.exit_code())
    });
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
