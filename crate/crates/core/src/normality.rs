//! Pattern statistics on digit streams.
//!
//! Counts come in three shapes: sliding windows (every start position),
//! blocks (starts at multiples of `m`, length `m`) and strided windows
//! (starts at multiples of `m`, any length), the last being sliding
//! patterns of the power map's block digits. Frequencies are compared with
//! cylinder measures through z-scores `(freq − p)·√N/√(p(1−p))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cylinders::{cylinder_interval, cylinder_measure};
use crate::error::{Error, Result};
use crate::interval::{EnclosedReal, PrecisionConfig};
use crate::jointergo::{interval_equidistribution, EquidistReport};
use crate::maps::{trace_orbit, DigitString, MapSpec, Symbol};
use crate::measures::MeasureSpec;

pub type Pattern = Vec<Symbol>;

/// Working precision for pattern cylinders.
const PATTERN_BITS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CountMode {
    Sliding,
    Block { m: usize },
    Strided { stride: usize },
}

/// Window counts of a fixed pattern length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub length: usize,
    pub mode: CountMode,
    /// Digits scanned.
    pub digits: u64,
    /// Windows counted, including the tail bucket.
    pub windows: u64,
    pub counts: BTreeMap<Pattern, u64>,
    /// Windows containing a symbol at or above the cap.
    pub tail: u64,
    pub symbol_cap: Option<Symbol>,
}

impl FrequencyTable {
    pub fn empty(length: usize, mode: CountMode, symbol_cap: Option<Symbol>) -> Self {
        Self {
            length,
            mode,
            digits: 0,
            windows: 0,
            counts: BTreeMap::new(),
            tail: 0,
            symbol_cap,
        }
    }

    pub fn count(&self, pattern: &[Symbol]) -> u64 {
        self.counts.get(pattern).copied().unwrap_or(0)
    }

    pub fn frequency(&self, pattern: &[Symbol]) -> f64 {
        if self.windows == 0 {
            return 0.0;
        }
        self.count(pattern) as f64 / self.windows as f64
    }

    /// Adds the counts of another segment. Windows across the seam are not
    /// recovered, so for sliding tables the result can fall short of the
    /// concatenation's table by up to `length − 1` windows.
    pub fn merge(&mut self, other: &FrequencyTable) {
        assert_eq!(
            (self.length, self.mode, self.symbol_cap),
            (other.length, other.mode, other.symbol_cap),
            "merging incompatible tables"
        );
        self.digits += other.digits;
        self.windows += other.windows;
        self.tail += other.tail;
        for (p, c) in &other.counts {
            *self.counts.entry(p.clone()).or_insert(0) += c;
        }
    }
}

/// Sliding occurrences of `pattern` among the certified digits.
pub fn count_pattern(d: &DigitString, pattern: &[Symbol]) -> Result<u64> {
    if pattern.len() > d.valid_len() {
        return Err(Error::PatternTooLong {
            pattern: pattern.len(),
            certified: d.valid_len(),
        });
    }
    if pattern.is_empty() {
        return Ok(d.valid_len() as u64 + 1);
    }
    Ok(d.symbols.windows(pattern.len()).filter(|w| *w == pattern).count() as u64)
}

/// Windows of `length` digits starting at `offset + j·stride`.
pub fn strided_counts(
    symbols: &[Symbol],
    length: usize,
    stride: usize,
    offset: usize,
    symbol_cap: Option<Symbol>,
    mode: CountMode,
) -> FrequencyTable {
    assert!(length >= 1 && stride >= 1);
    let mut t = FrequencyTable::empty(length, mode, symbol_cap);
    t.digits = symbols.len() as u64;
    let mut start = offset;
    while start + length <= symbols.len() {
        let w = &symbols[start..start + length];
        t.windows += 1;
        match symbol_cap {
            Some(cap) if w.iter().any(|&s| s >= cap) => t.tail += 1,
            _ => *t.counts.entry(w.to_vec()).or_insert(0) += 1,
        }
        start += stride;
    }
    t
}

pub fn sliding_counts(symbols: &[Symbol], k: usize, symbol_cap: Option<Symbol>) -> FrequencyTable {
    strided_counts(symbols, k, 1, 0, symbol_cap, CountMode::Sliding)
}

/// Non-overlapping length-`m` blocks at positions `1, m+1, 2m+1, …`; a
/// trailing partial block is dropped.
pub fn block_counts(d: &DigitString, m: usize) -> FrequencyTable {
    strided_counts(&d.symbols, m, m, 0, None, CountMode::Block { m })
}

/// Statistical gate: every row within `sigma`, and at most
/// `ceil(rows/100)·outliers_per_hundred` rows beyond `outlier_sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub sigma: f64,
    pub outlier_sigma: f64,
    pub outliers_per_hundred: usize,
}

impl Default for Gate {
    fn default() -> Self {
        Self {
            sigma: 5.0,
            outlier_sigma: 4.0,
            outliers_per_hundred: 1,
        }
    }
}

impl Gate {
    pub fn allowed_outliers(&self, rows: usize) -> usize {
        rows.div_ceil(100) * self.outliers_per_hundred
    }

    pub fn judge<'a>(&self, zs: impl IntoIterator<Item = &'a f64>) -> Verdict {
        let mut rows = 0;
        let mut max_abs_z: f64 = 0.0;
        let mut outliers = 0;
        for &z in zs {
            rows += 1;
            let a = z.abs();
            if a.is_nan() || a > max_abs_z {
                max_abs_z = if a.is_nan() { f64::INFINITY } else { a };
            }
            if !(a <= self.outlier_sigma) {
                outliers += 1;
            }
        }
        let pass = max_abs_z <= self.sigma && outliers <= self.allowed_outliers(rows);
        Verdict {
            rows,
            max_abs_z,
            outliers,
            pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub rows: usize,
    pub max_abs_z: f64,
    pub outliers: usize,
    pub pass: bool,
}

/// `(freq − p)·√N/√(p(1−p))`; degenerate targets give 0 on an exact match
/// and infinity otherwise.
pub fn z_score(freq: f64, target: f64, n: u64) -> f64 {
    let var = target * (1.0 - target);
    if var <= 0.0 {
        return if (freq - target).abs() == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (freq - target) * (n as f64).sqrt() / var.sqrt()
}

/// `μ(C(S))` for one pattern.
pub fn pattern_target(map: &MapSpec, measure: &MeasureSpec, pattern: &[Symbol]) -> Result<f64> {
    let c = cylinder_interval(map, pattern, PATTERN_BITS)?;
    Ok(cylinder_measure(&c, measure))
}

/// All patterns of `length` over the tracked alphabet.
pub fn all_patterns(map: &MapSpec, length: usize, symbol_cap: Option<Symbol>) -> Result<Vec<Pattern>> {
    let (lo, hi) = match (map.max_symbol(), symbol_cap) {
        (Some(max), _) => (map.min_symbol(), max),
        (None, Some(cap)) if cap > map.min_symbol() => (map.min_symbol(), cap - 1),
        _ => {
            return Err(Error::Unsupported(format!(
                "pattern tables for {map} without a symbol cap"
            )))
        }
    };
    let mut out: Vec<Pattern> = vec![Vec::new()];
    for _ in 0..length {
        out = out
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub pattern: Pattern,
    /// Aggregate of every window containing a capped symbol.
    pub tail: bool,
    pub count: u64,
    pub freq: f64,
    pub target: f64,
    pub z: f64,
}

/// Compares a table with its cylinder targets.
pub fn table_rows(table: &FrequencyTable, map: &MapSpec, measure: &MeasureSpec) -> Result<Vec<PatternRow>> {
    let n = table.windows;
    let mut rows = Vec::new();
    let mut tracked = 0.0;
    for p in all_patterns(map, table.length, table.symbol_cap)? {
        let target = pattern_target(map, measure, &p)?;
        tracked += target;
        let count = table.count(&p);
        let freq = if n == 0 { 0.0 } else { count as f64 / n as f64 };
        rows.push(PatternRow {
            z: z_score(freq, target, n),
            pattern: p,
            tail: false,
            count,
            freq,
            target,
        });
    }
    if table.symbol_cap.is_some() && map.max_symbol().is_none() {
        let target = (1.0 - tracked).max(0.0);
        let freq = if n == 0 { 0.0 } else { table.tail as f64 / n as f64 };
        rows.push(PatternRow {
            pattern: Vec::new(),
            tail: true,
            count: table.tail,
            freq,
            target,
            z: z_score(freq, target, n),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub k: usize,
    pub windows: u64,
    pub rows: Vec<PatternRow>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub map: MapSpec,
    /// Certified digits used.
    pub n: usize,
    pub max_k: usize,
    pub symbol_cap: Option<Symbol>,
    pub levels: Vec<LevelReport>,
    pub pass: bool,
}

impl NormalityReport {
    pub fn level(&self, k: usize) -> &LevelReport {
        &self.levels[k - 1]
    }
}

/// Sliding frequencies of every pattern of length `1..=max_k` against
/// `μ(C(S))`.
pub fn normality_report(
    d: &DigitString,
    measure: &MeasureSpec,
    max_k: usize,
    symbol_cap: Option<Symbol>,
    gate: &Gate,
) -> Result<NormalityReport> {
    if !d.is_complete() {
        return Err(Error::PrecisionExhausted {
            achieved: d.valid_len(),
            requested: d.requested,
        });
    }
    let levels = (1..=max_k)
        .map(|k| {
            let table = sliding_counts(&d.symbols, k, symbol_cap);
            let rows = table_rows(&table, &d.map, measure)?;
            let verdict = gate.judge(rows.iter().map(|r| &r.z));
            Ok(LevelReport {
                k,
                windows: table.windows,
                rows,
                verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalityReport {
        map: d.map.clone(),
        n: d.valid_len(),
        max_k,
        symbol_cap,
        pass: levels.iter().all(|l| l.verdict.pass),
        levels,
    })
}

/// One simultaneous-occurrence row: a pattern per stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRow {
    pub patterns: Vec<Pattern>,
    pub count: u64,
    pub freq: f64,
    pub target: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub maps: Vec<MapSpec>,
    /// Start positions examined.
    pub n: usize,
    pub rows: Vec<JointRow>,
    pub verdict: Verdict,
}

/// Counts start positions `n` at which every stream shows its pattern and
/// compares with the product of cylinder measures. `n` is lowered to what
/// every stream certifies.
pub fn joint_report(
    streams: &[&DigitString],
    measures: &[MeasureSpec],
    rows: &[Vec<Pattern>],
    n: usize,
    gate: &Gate,
) -> Result<JointReport> {
    assert_eq!(streams.len(), measures.len());
    let longest = rows.iter().flatten().map(Vec::len).max().unwrap_or(1);
    let certified = streams.iter().map(|d| d.valid_len()).min().unwrap_or(0);
    if certified < longest {
        return Err(Error::PatternTooLong {
            pattern: longest,
            certified,
        });
    }
    let n = n.min(certified + 1 - longest);
    let out = rows
        .iter()
        .map(|pats| {
            assert_eq!(pats.len(), streams.len(), "one pattern per stream");
            let target = pats
                .iter()
                .zip(streams.iter().zip(measures))
                .map(|(p, (d, m))| pattern_target(&d.map, m, p))
                .product::<Result<f64>>()?;
            let count = (0..n)
                .filter(|&i| {
                    pats.iter()
                        .zip(streams)
                        .all(|(p, d)| d.symbols[i..i + p.len()] == p[..])
                })
                .count() as u64;
            let freq = if n == 0 { 0.0 } else { count as f64 / n as f64 };
            Ok(JointRow {
                patterns: pats.clone(),
                count,
                freq,
                target,
                z: z_score(freq, target, n as u64),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = gate.judge(out.iter().map(|r| &r.z));
    Ok(JointReport {
        maps: streams.iter().map(|d| d.map.clone()).collect(),
        n,
        rows: out,
        verdict,
    })
}

/// The six characterizations of normality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Sliding patterns up to a length.
    I,
    /// Equidistribution of the orbit.
    II,
    /// Sliding patterns of the power map's digits.
    III,
    /// Simple block normality of shifted points `T^k x`.
    IV,
    /// Simple block normality for every block length in a range.
    V,
    /// Simple block normality along an increasing sequence of lengths.
    VI,
}

impl Form {
    pub const ALL: [Form; 6] = [Form::I, Form::II, Form::III, Form::IV, Form::V, Form::VI];

    pub fn label(self) -> &'static str {
        match self {
            Form::I => "i",
            Form::II => "ii",
            Form::III => "iii",
            Form::IV => "iv",
            Form::V => "v",
            Form::VI => "vi",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Form::ALL
            .into_iter()
            .find(|f| f.label() == s.trim())
            .ok_or_else(|| Error::Parse {
                what: "equivalence form",
                input: s.to_string(),
            })
    }
}

/// Ranges used by each form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub forms: Vec<Form>,
    /// (i): pattern lengths `1..=max_k`.
    pub max_k: usize,
    /// (ii): number of equal-width bins.
    pub bins: usize,
    /// (iii): power-map exponents, with block-pattern lengths `1..=iii_max_k`.
    pub powers: Vec<usize>,
    pub iii_max_k: usize,
    /// (iv): shifts `0..=max_shift` for block lengths `1..=iv_max_m`.
    pub max_shift: usize,
    pub iv_max_m: usize,
    /// (v): block lengths `1..=v_max_m`.
    pub v_max_m: usize,
    /// (vi): an increasing sequence of block lengths.
    pub sequence: Vec<usize>,
    pub symbol_cap: Option<Symbol>,
    pub gate: Gate,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            forms: Form::ALL.to_vec(),
            max_k: 3,
            bins: 20,
            powers: vec![2, 3],
            iii_max_k: 2,
            max_shift: 3,
            iv_max_m: 3,
            v_max_m: 4,
            sequence: vec![1, 2, 4, 8],
            symbol_cap: None,
            gate: Gate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub label: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormVerdict {
    pub form: Form,
    pub tables: Vec<TableSummary>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub map: MapSpec,
    pub n: usize,
    pub forms: Vec<FormVerdict>,
    /// Every form reached the same verdict.
    pub agree: bool,
}

impl EquivalenceReport {
    pub fn form(&self, f: Form) -> Option<&FormVerdict> {
        self.forms.iter().find(|v| v.form == f)
    }
}

fn summarize(
    label: String,
    table: &FrequencyTable,
    map: &MapSpec,
    measure: &MeasureSpec,
    gate: &Gate,
) -> Result<TableSummary> {
    let rows = table_rows(table, map, measure)?;
    Ok(TableSummary {
        label,
        verdict: gate.judge(rows.iter().map(|r| &r.z)),
    })
}

/// Runs the selected forms on the orbit of `x`.
pub fn equivalence_suite(
    x: EnclosedReal,
    map: &MapSpec,
    measure: &MeasureSpec,
    n: usize,
    cfg: &PrecisionConfig,
    suite: &SuiteConfig,
) -> Result<EquivalenceReport> {
    let trace = trace_orbit(map, x, n, cfg);
    if !trace.digits.is_complete() {
        return Err(Error::PrecisionExhausted {
            achieved: trace.digits.valid_len(),
            requested: n,
        });
    }
    let s = &trace.digits.symbols;
    let cap = suite.symbol_cap;
    let gate = &suite.gate;
    let mut forms = Vec::new();
    for &form in &suite.forms {
        let tables: Vec<TableSummary> = match form {
            Form::I => (1..=suite.max_k)
                .map(|k| summarize(format!("k={k}"), &sliding_counts(s, k, cap), map, measure, gate))
                .collect::<Result<_>>()?,
            Form::II => {
                let eq: EquidistReport = interval_equidistribution(&trace, measure, suite.bins);
                vec![TableSummary {
                    label: format!("bins={}", suite.bins),
                    verdict: eq.verdict(gate),
                }]
            }
            Form::III => {
                let mut out = Vec::new();
                for &m in &suite.powers {
                    for j in 1..=suite.iii_max_k {
                        let t = strided_counts(s, j * m, m, 0, cap, CountMode::Strided { stride: m });
                        out.push(summarize(format!("m={m},k={j}"), &t, map, measure, gate)?);
                    }
                }
                out
            }
            Form::IV => {
                let mut out = Vec::new();
                for k in 0..=suite.max_shift {
                    for m in 1..=suite.iv_max_m {
                        let t = strided_counts(s, m, m, k, cap, CountMode::Block { m });
                        out.push(summarize(format!("shift={k},m={m}"), &t, map, measure, gate)?);
                    }
                }
                out
            }
            Form::V => (1..=suite.v_max_m)
                .map(|m| {
                    let t = strided_counts(s, m, m, 0, cap, CountMode::Block { m });
                    summarize(format!("m={m}"), &t, map, measure, gate)
                })
                .collect::<Result<_>>()?,
            Form::VI => suite
                .sequence
                .iter()
                .map(|&m| {
                    let t = strided_counts(s, m, m, 0, cap, CountMode::Block { m });
                    summarize(format!("m={m}"), &t, map, measure, gate)
                })
                .collect::<Result<_>>()?,
        };
        let pass = tables.iter().all(|t| t.verdict.pass);
        forms.push(FormVerdict { form, tables, pass });
    }
    let agree = forms.windows(2).all(|w| w[0].pass == w[1].pass);
    Ok(EquivalenceReport {
        map: map.clone(),
        n: trace.digits.valid_len(),
        forms,
        agree,
    })
}

/// Joint analogue: forms (i) and (iv)/(v) on several expansions of one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEquivalenceReport {
    pub maps: Vec<MapSpec>,
    pub n: usize,
    /// Joint sliding patterns of length `1..=max_k` in every stream.
    pub sliding: Vec<TableSummary>,
    /// Joint simple block normality for `m = 1..=max_m`.
    pub blocks: Vec<TableSummary>,
    pub agree: bool,
}

pub fn joint_equivalence_suite(
    streams: &[&DigitString],
    measures: &[MeasureSpec],
    max_k: usize,
    max_m: usize,
    gate: &Gate,
) -> Result<JointEquivalenceReport> {
    let n = streams.iter().map(|d| d.valid_len()).min().unwrap_or(0);
    let tuples = |k: usize| -> Result<Vec<Vec<Pattern>>> {
        let mut acc: Vec<Vec<Pattern>> = vec![Vec::new()];
        for d in streams {
            let pats = all_patterns(&d.map, k, None)?;
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
        Ok(acc)
    };
    let sliding = (1..=max_k)
        .map(|k| {
            let r = joint_report(streams, measures, &tuples(k)?, n, gate)?;
            Ok(TableSummary {
                label: format!("k={k}"),
                verdict: r.verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let blocks = (1..=max_m)
        .map(|m| {
            let rows = tuples(m)?;
            let nb = n / m;
            let targets = rows
                .iter()
                .map(|pats| {
                    pats.iter()
                        .zip(streams.iter().zip(measures))
                        .map(|(p, (d, mu))| pattern_target(&d.map, mu, p))
                        .product::<Result<f64>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let zs: Vec<f64> = rows
                .iter()
                .zip(&targets)
                .map(|(pats, &t)| {
                    let c = (0..nb)
                        .filter(|&b| {
                            pats.iter()
                                .zip(streams)
                                .all(|(p, d)| d.symbols[b * m..(b + 1) * m] == p[..])
                        })
                        .count();
                    z_score(c as f64 / nb as f64, t, nb as u64)
                })
                .collect();
            Ok(TableSummary {
                label: format!("m={m}"),
                verdict: gate.judge(&zs),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<bool> = sliding.iter().chain(&blocks).map(|t| t.verdict.pass).collect();
    let agree = all.windows(2).all(|w| w[0] == w[1]);
    Ok(JointEquivalenceReport {
        maps: streams.iter().map(|d| d.map.clone()).collect(),
        n,
        sliding,
        blocks,
        agree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::{make_enclosure, sample};
    use rug::Rational;

    fn ds(map: MapSpec, s: &[Symbol]) -> DigitString {
        DigitString::new(map, s.to_vec())
    }

    #[test]
    fn count_examples() {
        let d = ds(MapSpec::TimesB(2), &[0, 1, 0, 1, 0, 1]);
        assert_eq!(count_pattern(&d, &[0, 1]).unwrap(), 3);
        let d = ds(MapSpec::TimesB(2), &[1, 1, 1, 1]);
        assert_eq!(count_pattern(&d, &[1, 1]).unwrap(), 3);
        assert!(matches!(
            count_pattern(&d, &[1; 5]),
            Err(Error::PatternTooLong { pattern: 5, certified: 4 })
        ));
    }

    #[test]
    fn block_examples() {
        let t = block_counts(&ds(MapSpec::TimesB(2), &[0, 1, 0, 1]), 2);
        assert_eq!(t.counts, BTreeMap::from([(vec![0, 1], 2)]));
        let t = block_counts(&ds(MapSpec::TimesB(2), &[0, 1, 1, 0, 1]), 2);
        assert_eq!(t.counts, BTreeMap::from([(vec![0, 1], 1), (vec![1, 0], 1)]));
        assert_eq!(t.windows, 2);
    }

    #[test]
    fn gate_allowance() {
        let g = Gate::default();
        assert_eq!(g.allowed_outliers(6), 1);
        assert_eq!(g.allowed_outliers(110), 2);
        assert!(g.judge(&[4.5, 0.1]).pass);
        assert!(!g.judge(&[4.5, 4.2]).pass);
        assert!(!g.judge(&[5.1]).pass);
        assert!(!g.judge(&[f64::NAN]).pass);
    }

    #[test]
    fn binary_digits_of_a_sample_are_balanced() {
        let n = 100_000;
        let cfg = PrecisionConfig::auto(&[MapSpec::TimesB(2)], n, 2f64.powi(-30)).unwrap();
        let d = crate::maps::orbit_digits(&MapSpec::TimesB(2), sample(1, cfg.bits), n, &cfg);
        let zeros = count_pattern(&d, &[0]).unwrap() as f64;
        assert!((zeros - 0.5 * n as f64).abs() <= 5.0 * (n as f64 * 0.25).sqrt());
    }

    #[test]
    fn one_third_passes_k1_fails_k2() {
        let n = 10_000;
        let cfg = PrecisionConfig::auto(&[MapSpec::TimesB(2)], n, 2f64.powi(-30)).unwrap();
        let x = make_enclosure(Rational::from((1, 3)), &cfg).unwrap();
        let d = crate::maps::orbit_digits(&MapSpec::TimesB(2), x, n, &cfg);
        let r = normality_report(&d, &MeasureSpec::Lebesgue, 2, None, &Gate::default()).unwrap();
        assert!(r.level(1).verdict.pass);
        assert!(r.level(1).rows.iter().all(|row| row.freq == 0.5));
        assert!(!r.level(2).verdict.pass);
        let zz = r.level(2).rows.iter().find(|row| row.pattern == [0, 0]).unwrap();
        assert_eq!((zz.freq, zz.target), (0.0, 0.25));
        assert!(!r.pass);
    }

    #[test]
    fn gauss_tail_bucket() {
        let n = 10_000;
        let cfg = PrecisionConfig::auto(&[MapSpec::Gauss], n, 2f64.powi(-30)).unwrap();
        let d = crate::maps::orbit_digits(&MapSpec::Gauss, sample(4, cfg.bits), n, &cfg);
        let r = normality_report(&d, &MeasureSpec::GaussMeasure, 1, Some(5), &Gate::default()).unwrap();
        let rows = &r.level(1).rows;
        assert_eq!(rows.len(), 5);
        assert!((rows[0].target - 0.415037).abs() < 1e-6);
        assert!((rows[1].target - 0.169925).abs() < 1e-6);
        let total: f64 = rows.iter().map(|r| r.target).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(rows.iter().map(|r| r.count).sum::<u64>(), n as u64);
        assert!(r.pass, "{:?}", r.level(1).verdict);
    }

    #[test]
    fn joint_degenerate_and_product_targets() {
        let d = ds(MapSpec::TimesB(2), &[0, 1, 1, 0, 1, 0, 0, 1]);
        let lam = MeasureSpec::Lebesgue;
        let r = joint_report(&[&d, &d], &[lam.clone(), lam.clone()], &[vec![vec![0], vec![1]]], 8, &Gate::default())
            .unwrap();
        assert_eq!(r.rows[0].count, 0);
        assert_eq!(r.rows[0].target, 0.25);
        let d3 = ds(MapSpec::TimesB(3), &[0, 2, 1, 0, 0, 1, 2, 2]);
        let r = joint_report(&[&d, &d3], &[lam.clone(), lam], &[vec![vec![0], vec![0]]], 8, &Gate::default()).unwrap();
        assert!((r.rows[0].target - 1.0 / 6.0).abs() < 1e-15);
        // positions 0, 3, 6 -> base-2 digit 0 at 0,3,5,6 and base-3 digit 0 at 0,3,4
        assert_eq!(r.rows[0].count, 2);
    }

    #[test]
    fn merge_monoid() {
        let a = sliding_counts(&[0, 1, 1, 0], 2, None);
        let b = sliding_counts(&[1, 1, 0], 2, None);
        let e = FrequencyTable::empty(2, CountMode::Sliding, None);
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab, ba);
        let mut ae = a.clone();
        ae.merge(&e);
        assert_eq!(ae, a);
        let whole = sliding_counts(&[0, 1, 1, 0, 1, 1, 0], 2, None);
        assert_eq!(whole.windows - ab.windows, 1);
    }

    #[test]
    fn forms_parse() {
        for f in Form::ALL {
            assert_eq!(Form::parse(f.label()).unwrap(), f);
        }
        assert!(Form::parse("vii").is_err());
    }
}
