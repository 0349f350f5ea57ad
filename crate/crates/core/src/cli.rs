//! Experiment manifests and the batch runner behind the `jointnormal` binary.
//!
//! A manifest names a command, the maps, the start points and the gates. Each
//! start point runs independently on the rayon pool; results are folded in
//! manifest order, so the serialized payload depends on nothing but the
//! manifest.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use rug::Rational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cylinders::{cylinder_interval, cylinder_measure};
use crate::entropy::{
    levy_estimate, property_e_mass, property_e_sampled, smb_estimate, DEFAULT_CYLINDER_CAP,
};
use crate::error::{Error, Result};
use crate::interval::{parse_rational, required_bits, sample, EnclosedReal, PrecisionConfig};
use crate::jointergo::{
    entropy_distinct_check, equidist_test, joint_average, Observable, ObservableSpec,
};
use crate::maps::{levy_constant, orbit_digits, MapSpec, RealParam, StopReason, Symbol};
use crate::measures::{
    gauss_measure, invariant_density, preimage_measure, renyi_bounds, MeasureSpec,
    DEFAULT_MAX_ITERS,
};
use crate::mixing::{mixing_correlation, MixingOptions};
use crate::normality::{
    all_patterns, equivalence_suite, joint_report, normality_report, Form, Gate, Pattern,
    SuiteConfig,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Default ceiling on the working precision of any orbit.
pub const DEFAULT_BIT_CAP: u64 = 1_000_000;
/// Branches of the Gauss map kept when pulling back intervals.
const GAUSS_PULLBACK_BRANCHES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Expand,
    Cylinder,
    Measure,
    Density,
    Normality,
    Joint,
    Equidist,
    Entropy,
    Levy,
    Prope,
    Mixing,
    Equivalence,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::Expand,
        Command::Cylinder,
        Command::Measure,
        Command::Density,
        Command::Normality,
        Command::Joint,
        Command::Equidist,
        Command::Entropy,
        Command::Levy,
        Command::Prope,
        Command::Mixing,
        Command::Equivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Expand => "expand",
            Command::Cylinder => "cylinder",
            Command::Measure => "measure",
            Command::Density => "density",
            Command::Normality => "normality",
            Command::Joint => "joint",
            Command::Equidist => "equidist",
            Command::Entropy => "entropy",
            Command::Levy => "levy",
            Command::Prope => "prope",
            Command::Mixing => "mixing",
            Command::Equivalence => "equivalence",
        }
    }

    /// Commands that consume start points; the rest run once.
    pub fn uses_points(self) -> bool {
        !matches!(
            self,
            Command::Cylinder | Command::Measure | Command::Density | Command::Mixing | Command::Prope
        )
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse {
                what: "command",
                input: s.into(),
            })
    }
}

/// A start point: a seed for [`sample`] or an explicit value.
///
/// Explicit values are rationals (`"1/3"`, `"0.25"`) or the names `golden`
/// for `(√5 − 1)/2` and `sqrt2m1` for `√2 − 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Seed(u64),
    Value(String),
}

impl PointSpec {
    pub fn enclose(&self, bits: u32) -> Result<EnclosedReal> {
        match self {
            PointSpec::Seed(s) => Ok(sample(*s, bits)),
            PointSpec::Value(text) => parse_point(text, bits),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PointSpec::Seed(s) => s.to_string(),
            PointSpec::Value(v) => v.clone(),
        }
    }

    fn seed(&self) -> u64 {
        match self {
            PointSpec::Seed(s) => *s,
            PointSpec::Value(v) => v.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
                (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
            }),
        }
    }
}

/// Parses an explicit start value in `[0, 1]`.
pub fn parse_point(text: &str, bits: u32) -> Result<EnclosedReal> {
    let work = bits + 16;
    match text.trim() {
        "golden" => Ok(RealParam::Golden.enclose(work).sub_integer(1, bits)),
        "sqrt2m1" => Ok(RealParam::Sqrt2Minus1.enclose(bits)),
        other => {
            let q = parse_rational(other)?;
            if q < 0 || q > 1 {
                return Err(Error::OutOfRange(q.to_string()));
            }
            Ok(EnclosedReal::from_rational(&q, bits))
        }
    }
}

/// Either a count `k` (seeds `1..=k`) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<PointSpec>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::List(Vec::new())
    }
}

impl Seeds {
    pub fn points(&self) -> Vec<PointSpec> {
        match self {
            Seeds::Count(k) => (1..=*k).map(PointSpec::Seed).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

/// `"auto"` or an explicit mantissa width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Auto,
    Bits(u32),
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Precision::Auto),
            n => n.parse().map(Precision::Bits).map_err(|_| Error::Parse {
                what: "precision",
                input: s.into(),
            }),
        }
    }
}

impl Serialize for Precision {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Precision::Auto => s.serialize_str("auto"),
            Precision::Bits(b) => s.serialize_u32(*b),
        }
    }
}

impl<'de> Deserialize<'de> for Precision {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Bits(u32),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Bits(b) => Ok(Precision::Bits(b)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::Parse {
                what: "output format",
                input: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    /// Hard |z| bound.
    pub sigma: f64,
    /// Bound inside which a limited number of outliers is tolerated.
    pub outlier_sigma: f64,
    /// Outliers tolerated per hundred rows.
    pub outliers_per_hundred: usize,
    /// Multiplier on the largest cell σ for the equidistribution sup gate.
    pub sup_sigma: f64,
    /// Relative tolerance for entropy and Lévy means, absolute for
    /// invariance checks. Each command has its own default.
    pub tolerance: Option<f64>,
    /// Fraction of runs that must pass.
    pub pass_fraction: f64,
    /// Property E: required good-atom mass on the last row.
    pub min_good_mass: Option<f64>,
    /// Ceiling on working precision.
    pub bit_cap: u64,
}

impl Default for Gates {
    fn default() -> Self {
        let g = Gate::default();
        Self {
            sigma: g.sigma,
            outlier_sigma: g.outlier_sigma,
            outliers_per_hundred: g.outliers_per_hundred,
            sup_sigma: 3.0,
            tolerance: None,
            pass_fraction: 0.8,
            min_good_mass: None,
            bit_cap: DEFAULT_BIT_CAP,
        }
    }
}

impl Gates {
    pub fn gate(&self) -> Gate {
        Gate {
            sigma: self.sigma,
            outlier_sigma: self.outlier_sigma,
            outliers_per_hundred: self.outliers_per_hundred,
        }
    }
}

/// Command-specific parameters; unused fields are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Longest pattern for `normality` and the automatic `joint` rows.
    pub max_k: usize,
    /// Largest partial quotient kept separately; larger ones share a tail row.
    pub symbol_cap: Option<Symbol>,
    /// One pattern per map: a single `joint` row.
    pub patterns: Option<Vec<Pattern>>,
    /// Several `joint` rows.
    pub rows: Option<Vec<Vec<Pattern>>>,
    /// Observable grammar strings, one per map, for `joint` averages.
    pub observables: Option<Vec<String>>,
    /// Separate start points per map instead of the diagonal.
    pub independent: bool,
    /// Cells per axis for `equidist`, grid size for `density`.
    pub grid: Option<usize>,
    /// Digits of a cylinder, or the cylinder `A` for `mixing`.
    pub symbols: Vec<Symbol>,
    /// Endpoints `[a, b]` for `measure` and the set `B` for `mixing`.
    pub interval: Option<[String; 2]>,
    pub epsilon: f64,
    /// Ranks for `prope`, lags for `mixing`.
    pub ns: Option<Vec<usize>>,
    /// Sample points for the Gauss `prope` estimator.
    pub samples: usize,
    /// Forms for `equivalence`.
    pub forms: Option<Vec<Form>>,
    /// `log2` of the widest enclosure from which a digit is read.
    pub resolve_log2: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            max_k: 2,
            symbol_cap: None,
            patterns: None,
            rows: None,
            observables: None,
            independent: false,
            grid: None,
            symbols: Vec::new(),
            interval: None,
            epsilon: 0.05,
            ns: None,
            samples: 1000,
            forms: None,
            resolve_log2: -20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub command: Command,
    #[serde(default)]
    pub maps: Vec<String>,
    #[serde(default)]
    pub seeds: Seeds,
    /// Explicit start points, run after `seeds`.
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default, alias = "N", alias = "n_max")]
    pub n: Option<usize>,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub output: OutputFormat,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentManifest {
    pub fn new(command: Command, maps: &[&str]) -> Self {
        Self {
            command,
            maps: maps.iter().map(|m| m.to_string()).collect(),
            seeds: Seeds::default(),
            x: Vec::new(),
            n: None,
            precision: Precision::Auto,
            output: OutputFormat::Json,
            gates: Gates::default(),
            params: Params::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn points(&self) -> Vec<PointSpec> {
        let mut pts = self.seeds.points();
        pts.extend(self.x.iter().cloned().map(PointSpec::Value));
        pts
    }

    fn resolve_width(&self) -> f64 {
        self.params.resolve_log2.exp2()
    }

    /// Orbit steps the command needs, or `None` when it runs no orbit.
    fn steps(&self) -> Option<usize> {
        let n = self.n?;
        Some(match self.command {
            Command::Joint => {
                let longest = self
                    .joint_rows_hint()
                    .map_or(1, |l| l.max(1));
                n + longest
            }
            Command::Prope => return self.params.ns.as_ref()?.iter().copied().max(),
            c if c.uses_points() => n,
            _ => return None,
        })
    }

    fn joint_rows_hint(&self) -> Option<usize> {
        let from_rows = self.params.rows.as_ref().map(|r| r.iter().flatten().map(Vec::len).max().unwrap_or(1));
        let from_pats = self.params.patterns.as_ref().map(|p| p.iter().map(Vec::len).max().unwrap_or(1));
        from_rows.or(from_pats)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub point: Option<PointSpec>,
    pub pass: Option<bool>,
    /// Certified length actually used.
    pub certified_n: Option<usize>,
    pub straddles: usize,
    pub excluded: u64,
    pub error: Option<String>,
    pub report: Option<Value>,
    #[serde(skip)]
    pub estimate: Option<f64>,
    #[serde(skip)]
    pub csv: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AggregateVerdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub pass_rate: f64,
    pub required_rate: f64,
    /// Mean of the per-run estimates (entropy and Lévy).
    pub mean_estimate: Option<f64>,
    pub reference: Option<f64>,
    pub formula: Option<String>,
    pub relative_error: Option<f64>,
    pub tolerance: Option<f64>,
    pub straddles: usize,
    pub excluded: u64,
    pub verdict: AggregateVerdict,
}

/// The deterministic part of a run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPayload {
    pub schema_version: u32,
    pub manifest_hash: String,
    pub command: Command,
    pub maps: Vec<String>,
    pub precision_bits: u32,
    pub results: Vec<SeedResult>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_ms: f64,
    pub per_run_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub payload: RunPayload,
    pub timing: Timing,
}

impl RunRecord {
    /// Canonical bytes of the payload, which exclude timing.
    pub fn payload_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.payload).expect("payload serializes")
    }

    pub fn passed(&self) -> bool {
        self.payload.aggregate.verdict == AggregateVerdict::Pass
    }

    /// 0 on pass, 2 on gate failure, 1 when every run errored.
    pub fn exit_code(&self) -> i32 {
        let a = &self.payload.aggregate;
        if a.runs > 0 && a.errors == a.runs {
            1
        } else if self.passed() {
            0
        } else {
            2
        }
    }

    pub fn csv_header(&self) -> &'static [&'static str] {
        csv_header(self.payload.command)
    }

    pub fn write<W: Write>(&self, format: OutputFormat, mut w: W) -> Result<()> {
        match format {
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut w, self)?;
                writeln!(w)?;
            }
            OutputFormat::Csv => {
                let mut out = csv::Writer::from_writer(w);
                out.write_record(self.csv_header())?;
                for r in &self.payload.results {
                    for row in &r.csv {
                        out.write_record(row)?;
                    }
                }
                out.flush()?;
            }
        }
        Ok(())
    }
}

fn csv_header(c: Command) -> &'static [&'static str] {
    match c {
        Command::Expand => &["point", "map", "requested", "certified", "digits", "stop"],
        Command::Cylinder => &["map", "symbols", "lo", "hi", "empty", "lebesgue", "mu"],
        Command::Measure => &["map", "a", "b", "mu", "mu_preimage", "tolerance"],
        Command::Density => &["bin_lo", "bin_hi", "density"],
        Command::Normality => &["point", "k", "pattern", "count", "freq", "target", "z"],
        Command::Joint => &["point", "row", "count_or_n", "freq", "target", "z"],
        Command::Equidist => &["point", "cell", "count", "freq", "target"],
        Command::Entropy => &["point", "n", "estimate", "closed_form"],
        Command::Levy => &["point", "n", "value", "reference"],
        Command::Prope => &["n", "atoms", "good_mass", "lebesgue_out_of_band", "envelope", "skipped"],
        Command::Mixing => &["n", "signed", "value", "masked", "exact"],
        Command::Equivalence => &["point", "form", "table", "rows", "max_abs_z", "outliers", "pass"],
    }
}

/// Everything a run needs, resolved once before any orbit.
struct Context<'a> {
    manifest: &'a ExperimentManifest,
    maps: Vec<MapSpec>,
    measures: Vec<MeasureSpec>,
    cfg: PrecisionConfig,
    gate: Gate,
}

/// Largest `n` whose budget fits under `cap`.
fn suggest_n(maps: &[MapSpec], n: usize, resolve: f64, cap: u64) -> usize {
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if u64::from(required_bits(maps, mid, resolve)) <= cap {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

fn validate(m: &ExperimentManifest) -> Result<Vec<MapSpec>> {
    let maps = m
        .maps
        .iter()
        .map(|s| MapSpec::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let bad = |msg: String| Err(Error::InvalidManifest(msg));
    if maps.is_empty() && m.command != Command::Levy {
        return bad(format!("{} needs at least one map", m.command));
    }
    let single = matches!(
        m.command,
        Command::Cylinder
            | Command::Measure
            | Command::Density
            | Command::Normality
            | Command::Entropy
            | Command::Prope
            | Command::Mixing
            | Command::Equivalence
    );
    if single && maps.len() != 1 {
        return bad(format!("{} takes exactly one map", m.command));
    }
    if m.command == Command::Levy && maps.iter().any(|mp| *mp != MapSpec::Gauss) {
        return bad("levy runs on the Gauss map".into());
    }
    if m.command.uses_points() {
        if m.n.unwrap_or(0) == 0 {
            return bad(format!("{} needs n > 0", m.command));
        }
        if m.points().is_empty() {
            return bad(format!("{} needs seeds or explicit x values", m.command));
        }
    }
    if !(m.gates.pass_fraction >= 0.0 && m.gates.pass_fraction <= 1.0) {
        return bad(format!("pass_fraction {} outside [0, 1]", m.gates.pass_fraction));
    }
    if !(m.gates.sigma > 0.0 && m.gates.outlier_sigma > 0.0 && m.gates.outlier_sigma <= m.gates.sigma) {
        return bad("need 0 < outlier_sigma <= sigma".into());
    }
    if !(m.params.resolve_log2 < 0.0) {
        return bad("resolve_log2 must be negative".into());
    }
    match m.command {
        Command::Cylinder if m.params.symbols.is_empty() => bad("cylinder needs symbols".into()),
        Command::Measure if m.params.interval.is_none() => bad("measure needs an interval".into()),
        Command::Mixing if m.params.symbols.is_empty() || m.params.interval.is_none() => {
            bad("mixing needs symbols (A) and an interval (B)".into())
        }
        Command::Prope if m.params.ns.as_ref().map_or(true, Vec::is_empty) => bad("prope needs ns".into()),
        Command::Joint => {
            if let Some(obs) = &m.params.observables {
                if obs.len() != maps.len() {
                    return bad("one observable per map".into());
                }
            }
            Ok(maps)
        }
        _ => Ok(maps),
    }
}

fn resolve_precision(m: &ExperimentManifest, maps: &[MapSpec]) -> Result<u32> {
    let resolve = m.resolve_width();
    let steps = m.steps();
    let rate_maps: Vec<MapSpec> = if m.command == Command::Levy || m.command == Command::Prope && maps[0] == MapSpec::Gauss {
        vec![MapSpec::Gauss]
    } else {
        maps.to_vec()
    };
    let bits = match (m.precision, steps) {
        (Precision::Bits(b), _) => b,
        (Precision::Auto, Some(s)) => required_bits(&rate_maps, s, resolve),
        (Precision::Auto, None) => 256,
    };
    if u64::from(bits) > m.gates.bit_cap {
        let suggested_n = steps.map_or(0, |s| {
            let n = m.n.unwrap_or(s);
            let slack = s.saturating_sub(n);
            suggest_n(&rate_maps, s, resolve, m.gates.bit_cap).saturating_sub(slack)
        });
        return Err(Error::BudgetInfeasible {
            needed: u64::from(bits),
            cap: m.gates.bit_cap,
            suggested_n,
        });
    }
    Ok(bits)
}

/// Validates `manifest`, fans the start points out to the worker pool and
/// folds the results in manifest order.
pub fn run(manifest: &ExperimentManifest) -> Result<RunRecord> {
    let start = Instant::now();
    let maps = validate(manifest)?;
    let bits = resolve_precision(manifest, &maps)?;
    let needs_measure = !matches!(manifest.command, Command::Expand | Command::Levy | Command::Density);
    let measures = if needs_measure {
        maps.iter().map(MeasureSpec::natural).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let cfg = PrecisionConfig::new(bits, manifest.steps().unwrap_or(0), manifest.resolve_width())?;
    let ctx = Context {
        manifest,
        maps,
        measures,
        cfg,
        gate: manifest.gates.gate(),
    };
    let points: Vec<Option<PointSpec>> = if manifest.command.uses_points() {
        manifest.points().into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let timed: Vec<(SeedResult, f64)> = points
        .par_iter()
        .map(|p| {
            let t = Instant::now();
            let r = run_one(&ctx, p.as_ref());
            (r, t.elapsed().as_secs_f64() * 1e3)
        })
        .collect();
    let (results, per_run_ms): (Vec<SeedResult>, Vec<f64>) = timed.into_iter().unzip();
    let aggregate = aggregate(&ctx, &results);
    Ok(RunRecord {
        payload: RunPayload {
            schema_version: SCHEMA_VERSION,
            manifest_hash: manifest.hash(),
            command: manifest.command,
            maps: ctx.maps.iter().map(MapSpec::to_string).collect(),
            precision_bits: bits,
            results,
            aggregate,
        },
        timing: Timing {
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            per_run_ms,
        },
    })
}

fn reference(ctx: &Context) -> Option<(f64, String, f64)> {
    let tol = ctx.manifest.gates.tolerance;
    match ctx.manifest.command {
        Command::Entropy => Some((
            ctx.maps[0].entropy(),
            ctx.maps[0].entropy_formula().to_string(),
            tol.unwrap_or(0.02),
        )),
        Command::Levy => Some((levy_constant(), "pi^2/(12 log 2)".into(), tol.unwrap_or(0.01))),
        _ => None,
    }
}

fn aggregate(ctx: &Context, results: &[SeedResult]) -> Aggregate {
    let runs = results.len();
    let errors = results.iter().filter(|r| r.error.is_some()).count();
    let passed = results.iter().filter(|r| r.pass == Some(true)).count();
    let pass_rate = if runs == 0 { 0.0 } else { passed as f64 / runs as f64 };
    let required_rate = ctx.manifest.gates.pass_fraction;
    let estimates: Vec<f64> = results.iter().filter_map(|r| r.estimate).collect();
    let mean_estimate = (!estimates.is_empty()).then(|| estimates.iter().sum::<f64>() / estimates.len() as f64);
    let refs = reference(ctx);
    let relative_error = match (&refs, mean_estimate) {
        (Some((h, _, _)), Some(m)) => Some(((m - h) / h).abs()),
        _ => None,
    };
    let pass = match (&refs, relative_error) {
        (Some((_, _, tol)), Some(e)) => e <= *tol,
        (Some(_), None) => false,
        _ => runs > 0 && pass_rate >= required_rate,
    };
    Aggregate {
        runs,
        passed,
        failed: runs - passed,
        errors,
        pass_rate,
        required_rate,
        mean_estimate,
        reference: refs.as_ref().map(|r| r.0),
        formula: refs.as_ref().map(|r| r.1.clone()),
        relative_error,
        tolerance: refs.as_ref().map(|r| r.2),
        straddles: results.iter().map(|r| r.straddles).sum(),
        excluded: results.iter().map(|r| r.excluded).sum(),
        verdict: if pass { AggregateVerdict::Pass } else { AggregateVerdict::Fail },
    }
}

#[derive(Default)]
struct Outcome {
    report: Value,
    pass: Option<bool>,
    certified_n: Option<usize>,
    straddles: usize,
    excluded: u64,
    estimate: Option<f64>,
    csv: Vec<Vec<String>>,
}

fn run_one(ctx: &Context, point: Option<&PointSpec>) -> SeedResult {
    let outcome = match point {
        Some(p) => p
            .enclose(ctx.cfg.bits)
            .and_then(|x| dispatch_point(ctx, p, x)),
        None => dispatch_once(ctx),
    };
    match outcome {
        Ok(o) => SeedResult {
            point: point.cloned(),
            // informational commands have no gate
            pass: Some(o.pass.unwrap_or(true)),
            certified_n: o.certified_n,
            straddles: o.straddles,
            excluded: o.excluded,
            error: None,
            report: Some(o.report),
            estimate: o.estimate,
            csv: o.csv,
        },
        Err(e) => SeedResult {
            point: point.cloned(),
            pass: Some(false),
            certified_n: None,
            straddles: usize::from(matches!(e, Error::Straddle { .. })),
            excluded: 0,
            error: Some(e.to_string()),
            report: None,
            estimate: None,
            csv: Vec::new(),
        },
    }
}

fn is_straddle(s: &Option<StopReason>) -> bool {
    matches!(s, Some(StopReason::Straddle { .. }))
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report serializes")
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

/// Digits as a string; comma-separated when a symbol exceeds 9.
pub fn format_digits(symbols: &[Symbol]) -> String {
    if symbols.iter().all(|&s| s < 10) {
        symbols.iter().map(|s| s.to_string()).collect()
    } else {
        symbols.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn parse_interval(pair: &[String; 2]) -> Result<(Rational, Rational)> {
    let a = parse_rational(&pair[0])?;
    let b = parse_rational(&pair[1])?;
    if a < 0 || b > 1 || a >= b {
        return Err(Error::OutOfRange(format!("[{a}, {b}]")));
    }
    Ok((a, b))
}

fn dispatch_point(ctx: &Context, p: &PointSpec, x: EnclosedReal) -> Result<Outcome> {
    let m = ctx.manifest;
    let n = m.n.expect("validated");
    let label = p.label();
    match m.command {
        Command::Expand => {
            let mut o = Outcome::default();
            let mut reports = Vec::new();
            let mut complete = true;
            for map in &ctx.maps {
                let d = orbit_digits(map, x.clone(), n, &ctx.cfg);
                complete &= d.is_complete();
                o.straddles += usize::from(is_straddle(&d.stop));
                let digits = format_digits(&d.symbols);
                o.csv.push(vec![
                    label.clone(),
                    map.to_string(),
                    n.to_string(),
                    d.valid_len().to_string(),
                    digits.clone(),
                    d.stop.as_ref().map(|s| to_value(s).to_string()).unwrap_or_default(),
                ]);
                o.certified_n = Some(o.certified_n.map_or(d.valid_len(), |c: usize| c.min(d.valid_len())));
                reports.push(json!({
                    "map": map.to_string(),
                    "requested": n,
                    "certified": d.valid_len(),
                    "digits": digits,
                    "stop": d.stop,
                }));
            }
            o.report = json!({ "expansions": reports });
            o.pass = Some(complete);
            Ok(o)
        }
        Command::Normality => {
            let d = orbit_digits(&ctx.maps[0], x, n, &ctx.cfg);
            let straddles = usize::from(is_straddle(&d.stop));
            let rep = normality_report(&d, &ctx.measures[0], m.params.max_k, m.params.symbol_cap, &ctx.gate)?;
            let mut csv = Vec::new();
            for level in &rep.levels {
                for r in &level.rows {
                    let pat = if r.tail { format!("{}+", join(&r.pattern)) } else { join(&r.pattern) };
                    csv.push(vec![
                        label.clone(),
                        level.k.to_string(),
                        pat,
                        r.count.to_string(),
                        r.freq.to_string(),
                        r.target.to_string(),
                        r.z.to_string(),
                    ]);
                }
            }
            Ok(Outcome {
                pass: Some(rep.pass),
                certified_n: Some(rep.n),
                straddles,
                csv,
                report: to_value(&rep),
                ..Outcome::default()
            })
        }
        Command::Joint => match &m.params.observables {
            Some(obs) => joint_observables(ctx, p, x, obs, n),
            None => joint_patterns(ctx, &label, x, n),
        },
        Command::Equidist => {
            let g = m.params.grid.unwrap_or(8);
            let rep = equidist_test(&x, &ctx.maps, &ctx.measures, n, g, &ctx.cfg)?;
            let threshold = rep.sup_threshold(m.gates.sup_sigma);
            let pass = rep.valid && rep.sup_deviation <= threshold;
            let csv = rep
                .grid
                .counts
                .iter()
                .zip(&rep.targets)
                .enumerate()
                .map(|(i, (&c, &t))| {
                    vec![
                        label.clone(),
                        join(&rep.grid.cell(i)),
                        c.to_string(),
                        (c as f64 / n as f64).to_string(),
                        t.to_string(),
                    ]
                })
                .collect();
            let straddles = rep.stops.iter().filter(|s| is_straddle(s)).count();
            let excluded = rep.excluded;
            let certified = rep.recorded as usize;
            let mut report = to_value(&rep);
            report["sup_threshold"] = json!(threshold);
            report["sup_sigma"] = json!(m.gates.sup_sigma);
            report["entropy_check"] = to_value(&entropy_distinct_check(&ctx.maps));
            report["pass"] = json!(pass);
            Ok(Outcome {
                report,
                pass: Some(pass),
                certified_n: Some(certified),
                straddles,
                excluded,
                estimate: None,
                csv,
            })
        }
        Command::Entropy => {
            let rep = smb_estimate(x, &ctx.maps[0], &ctx.measures[0], n, &ctx.cfg)?;
            let tol = m.gates.tolerance.unwrap_or(0.02);
            let csv = rep
                .smb_series
                .iter()
                .map(|s| vec![label.clone(), s.n.to_string(), s.value.to_string(), rep.closed_form.to_string()])
                .collect();
            Ok(Outcome {
                pass: Some(rep.relative_error <= tol),
                certified_n: Some(n),
                estimate: Some(rep.final_estimate),
                csv,
                report: to_value(&rep),
                ..Outcome::default()
            })
        }
        Command::Levy => {
            let rep = levy_estimate(x, n, &ctx.cfg)?;
            let tol = m.gates.tolerance.unwrap_or(0.01);
            let rel = ((rep.final_value - rep.reference) / rep.reference).abs();
            let csv = rep
                .series
                .iter()
                .map(|s| vec![label.clone(), s.n.to_string(), s.value.to_string(), rep.reference.to_string()])
                .collect();
            Ok(Outcome {
                pass: Some(rel <= tol && rep.fibonacci_bound),
                certified_n: Some(rep.requested),
                estimate: Some(rep.final_value),
                csv,
                report: to_value(&rep),
                ..Outcome::default()
            })
        }
        Command::Equivalence => {
            let suite = SuiteConfig {
                forms: m.params.forms.clone().unwrap_or_else(|| Form::ALL.to_vec()),
                symbol_cap: m.params.symbol_cap,
                gate: ctx.gate.clone(),
                ..SuiteConfig::default()
            };
            let rep = equivalence_suite(x, &ctx.maps[0], &ctx.measures[0], n, &ctx.cfg, &suite)?;
            let csv = rep
                .forms
                .iter()
                .flat_map(|f| {
                    let label = label.clone();
                    f.tables.iter().map(move |t| {
                        vec![
                            label.clone(),
                            f.form.label().to_string(),
                            t.label.clone(),
                            t.verdict.rows.to_string(),
                            t.verdict.max_abs_z.to_string(),
                            t.verdict.outliers.to_string(),
                            t.verdict.pass.to_string(),
                        ]
                    })
                })
                .collect();
            Ok(Outcome {
                pass: Some(rep.agree),
                certified_n: Some(rep.n),
                csv,
                report: to_value(&rep),
                ..Outcome::default()
            })
        }
        _ => unreachable!("{} runs once", m.command),
    }
}

fn joint_patterns(ctx: &Context, label: &str, x: EnclosedReal, n: usize) -> Result<Outcome> {
    let m = ctx.manifest;
    let rows: Vec<Vec<Pattern>> = match (&m.params.rows, &m.params.patterns) {
        (Some(r), _) => r.clone(),
        (None, Some(p)) => vec![p.clone()],
        (None, None) => {
            // every tuple of rank-1 cylinders, partial quotients capped
            let cap = m.params.symbol_cap.or(Some(4));
            let mut acc: Vec<Vec<Pattern>> = vec![Vec::new()];
            for map in &ctx.maps {
                let pats = all_patterns(map, 1, cap)?;
                acc = acc
                    .into_iter()
                    .flat_map(|t| {
                        pats.iter().map(move |p| {
                            let mut t = t.clone();
                            t.push(p.clone());
                            t
                        })
                    })
                    .collect();
            }
            acc
        }
    };
    if rows.iter().any(|r| r.len() != ctx.maps.len()) {
        return Err(Error::InvalidManifest("each joint row needs one pattern per map".into()));
    }
    let longest = rows.iter().flatten().map(Vec::len).max().unwrap_or(1);
    let streams: Vec<_> = ctx
        .maps
        .iter()
        .map(|map| orbit_digits(map, x.clone(), n + longest - 1, &ctx.cfg))
        .collect();
    let straddles = streams.iter().filter(|d| is_straddle(&d.stop)).count();
    let refs: Vec<_> = streams.iter().collect();
    let rep = joint_report(&refs, &ctx.measures, &rows, n, &ctx.gate)?;
    let csv = rep
        .rows
        .iter()
        .map(|r| {
            let pats: Vec<String> = r.patterns.iter().map(|p| join(p)).collect();
            vec![
                label.to_string(),
                pats.join(" | "),
                r.count.to_string(),
                r.freq.to_string(),
                r.target.to_string(),
                r.z.to_string(),
            ]
        })
        .collect();
    let mut report = to_value(&rep);
    report["target_formula"] = json!(ctx
        .maps
        .iter()
        .map(|mp| format!("mu_{mp}(C(S))"))
        .collect::<Vec<_>>()
        .join(" * "));
    report["entropy_check"] = to_value(&entropy_distinct_check(&ctx.maps));
    Ok(Outcome {
        pass: Some(rep.verdict.pass && rep.n == n),
        certified_n: Some(rep.n),
        straddles,
        excluded: (n - rep.n) as u64,
        csv,
        report,
        estimate: None,
    })
}

fn joint_observables(ctx: &Context, p: &PointSpec, x: EnclosedReal, obs: &[String], n: usize) -> Result<Outcome> {
    let m = ctx.manifest;
    let specs = obs
        .iter()
        .zip(ctx.maps.iter().zip(&ctx.measures))
        .map(|(o, (map, mu))| Ok(ObservableSpec::new(map.clone(), Observable::parse(o)?, mu.clone())))
        .collect::<Result<Vec<_>>>()?;
    let starts: Vec<EnclosedReal> = if m.params.independent {
        (0..specs.len() as u64)
            .map(|i| match i {
                0 => Ok(x.clone()),
                _ => Ok(sample(p.seed().wrapping_add(i.wrapping_mul(0x9e37_79b9_7f4a_7c15)), ctx.cfg.bits)),
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![x]
    };
    let rep = joint_average(&starts, &specs, n, &ctx.cfg)?;
    let label = p.label();
    let csv = rep
        .checkpoints
        .iter()
        .map(|c| {
            vec![
                label.clone(),
                "checkpoint".into(),
                c.n.to_string(),
                c.average.to_string(),
                rep.target.to_string(),
                String::new(),
            ]
        })
        .chain(std::iter::once(vec![
            label.clone(),
            "final".into(),
            rep.n.to_string(),
            rep.final_value.to_string(),
            rep.target.to_string(),
            rep.z.to_string(),
        ]))
        .collect();
    let pass = rep.n == n && rep.z.abs() <= m.gates.sigma;
    let mut report = to_value(&rep);
    report["entropy_check"] = to_value(&entropy_distinct_check(&ctx.maps));
    Ok(Outcome {
        pass: Some(pass),
        certified_n: Some(rep.n),
        straddles: usize::from(is_straddle(&rep.stop)),
        excluded: (n - rep.n) as u64,
        csv,
        report,
        estimate: None,
    })
}

fn dispatch_once(ctx: &Context) -> Result<Outcome> {
    let m = ctx.manifest;
    let map = &ctx.maps[0];
    match m.command {
        Command::Cylinder => {
            let c = cylinder_interval(map, &m.params.symbols, ctx.cfg.bits)?;
            let mu = cylinder_measure(&c, &ctx.measures[0]);
            let exact = c.lebesgue_exact().map(|q| q.to_string());
            let report = json!({
                "map": map.to_string(),
                "symbols": m.params.symbols,
                "lo": c.lo_f64(),
                "hi": c.hi_f64(),
                "empty": c.is_empty(),
                "null": c.is_null(),
                "admissibility": c.admissibility,
                "lebesgue": c.lebesgue(),
                "lebesgue_exact": exact,
                "mu": mu,
            });
            Ok(Outcome {
                csv: vec![vec![
                    map.to_string(),
                    join(&m.params.symbols),
                    c.lo_f64().to_string(),
                    c.hi_f64().to_string(),
                    c.is_empty().to_string(),
                    c.lebesgue().to_string(),
                    mu.to_string(),
                ]],
                report,
                ..Outcome::default()
            })
        }
        Command::Measure => {
            let (a, b) = parse_interval(m.params.interval.as_ref().expect("validated"))?;
            let (af, bf) = (a.to_f64(), b.to_f64());
            let mu = &ctx.measures[0];
            let value = mu.measure(af, bf);
            let pre = preimage_measure(mu, map, af, bf, GAUSS_PULLBACK_BRANCHES)?;
            let dropped = if *map == MapSpec::Gauss {
                gauss_measure(0.0, 1.0 / (GAUSS_PULLBACK_BRANCHES as f64 + 1.0))
            } else {
                0.0
            };
            let tol = m.gates.tolerance.unwrap_or(1e-9) + 4.0 * mu.quadrature_error() + dropped;
            let pass = (pre - value).abs() <= tol;
            let kind = match mu {
                MeasureSpec::Lebesgue => "lebesgue",
                MeasureSpec::GaussMeasure => "gauss",
                MeasureSpec::NumericInvariant { .. } => "numeric_invariant",
            };
            let formula = match mu {
                MeasureSpec::Lebesgue => "b - a",
                MeasureSpec::GaussMeasure => "log((1+b)/(1+a))/log 2",
                MeasureSpec::NumericInvariant { .. } => "integral of the transfer-operator fixed point",
            };
            Ok(Outcome {
                report: json!({
                    "map": map.to_string(),
                    "measure": kind,
                    "formula": formula,
                    "a": a.to_string(),
                    "b": b.to_string(),
                    "mu": value,
                    "mu_preimage": pre,
                    "quadrature_error": mu.quadrature_error(),
                    "tolerance": tol,
                    "invariant": pass,
                }),
                pass: Some(pass),
                csv: vec![vec![
                    map.to_string(),
                    a.to_string(),
                    b.to_string(),
                    value.to_string(),
                    pre.to_string(),
                    tol.to_string(),
                ]],
                ..Outcome::default()
            })
        }
        Command::Density => {
            let grid = m.params.grid.unwrap_or(1000);
            let tol = m.gates.tolerance.unwrap_or(1e-12);
            let d = invariant_density(map, grid, tol, DEFAULT_MAX_ITERS)?;
            let renyi = renyi_bounds(map);
            let slack = 1e-9;
            let within = renyi.map(|(lo, hi)| d.bounds.0 >= lo - slack && d.bounds.1 <= hi + slack);
            let w = d.bin_width();
            let csv = d
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| vec![(i as f64 * w).to_string(), ((i + 1) as f64 * w).to_string(), v.to_string()])
                .collect();
            Ok(Outcome {
                report: json!({
                    "map": map.to_string(),
                    "grid": d.grid_size,
                    "residual": d.residual,
                    "iterations": d.iterations,
                    "bounds": d.bounds,
                    "renyi_bounds": renyi,
                    "renyi_formula": renyi.map(|_| "1 - 1/beta <= h <= 1/(1 - 1/beta)"),
                    "within_renyi": within,
                    "values": d.values,
                }),
                pass: Some(d.residual < tol && within.unwrap_or(true)),
                csv,
                ..Outcome::default()
            })
        }
        Command::Prope => {
            let ns = m.params.ns.clone().expect("validated");
            let rep = if map.max_symbol().is_some() {
                property_e_mass(map, &ctx.measures[0], m.params.epsilon, &ns, ctx.cfg.bits, DEFAULT_CYLINDER_CAP)?
            } else {
                let seed0 = match m.seeds.points().first() {
                    Some(PointSpec::Seed(s)) => *s,
                    _ => 1,
                };
                property_e_sampled(m.params.epsilon, &ns, m.params.samples, seed0, &ctx.cfg)?
            };
            let envelope_ok = rep.rows.iter().all(|r| r.within_envelope != Some(false));
            let mass_ok = match (m.gates.min_good_mass, rep.rows.last()) {
                (Some(g), Some(r)) => r.good_mass >= g,
                _ => true,
            };
            let csv = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.atoms.to_string(),
                        r.good_mass.to_string(),
                        r.lebesgue_out_of_band.map(|v| v.to_string()).unwrap_or_default(),
                        r.envelope.map(|v| v.to_string()).unwrap_or_default(),
                        r.skipped.to_string(),
                    ]
                })
                .collect();
            let mut report = to_value(&rep);
            report["entropy_formula"] = json!(map.entropy_formula());
            report["envelope_formula"] = json!("beta/(beta-1) * exp(-epsilon n)");
            Ok(Outcome {
                pass: Some(envelope_ok && mass_ok),
                csv,
                report,
                ..Outcome::default()
            })
        }
        Command::Mixing => {
            let b = parse_interval(m.params.interval.as_ref().expect("validated"))?;
            let ns = m.params.ns.clone().unwrap_or_else(|| (1..=20).collect());
            let rep = mixing_correlation(map, &m.params.symbols, b, &ns, &MixingOptions::default())?;
            let csv = rep
                .series
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    vec![
                        p.n.to_string(),
                        p.signed.to_string(),
                        p.value.to_string(),
                        p.masked.to_string(),
                        rep.exact.as_ref().map(|e| e[i].clone()).unwrap_or_default(),
                    ]
                })
                .collect();
            let mut report = to_value(&rep);
            report["formula"] = json!("lambda(A ∩ T^{-(n+l)} B) - lambda(A) mu(B)");
            Ok(Outcome {
                pass: Some(rep.summable),
                csv,
                report,
                ..Outcome::default()
            })
        }
        _ => unreachable!("{} runs per point", m.command),
    }
}

/// Parses `"1..20"` (inclusive) or `"1,2,5"`.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parse {
        what: "index list",
        input: text.into(),
    };
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

/// Parses `"0,1,1"` into symbols.
pub fn parse_symbols(text: &str) -> Result<Vec<Symbol>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| Error::Parse {
                what: "symbol",
                input: s.into(),
            })
        })
        .collect()
}
