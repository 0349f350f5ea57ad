//! Product averages along several orbits of one point, box-count
//! equidistribution in `[0,1]^k`, and the entropy-distinctness check.

use std::fmt;
use std::str::FromStr;

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::cylinders::{cylinder_interval, cylinder_measure};
use crate::error::{Error, Result};
use crate::interval::{parse_rational, EnclosedReal, PrecisionConfig};
use crate::maps::{gauss_entropy, orbit_digits, trace_orbit, MapSpec, Orbit, OrbitTrace, StopReason, Symbol};
use crate::measures::{measure_of_interval, MeasureSpec};
use crate::normality::{z_score, Gate, Verdict};

/// A bounded function on `[0, 1]`.
///
/// Text forms: `[a,b)` (any bracket combination) for interval indicators,
/// `cyl:s1,s2,…` for cylinder indicators and `pw:t1,…;v0,v1,…` for the
/// step function taking `v_i` on `[t_i, t_{i+1})` with `t_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Observable {
    Interval {
        lo: Rational,
        hi: Rational,
        lo_closed: bool,
        hi_closed: bool,
    },
    Cylinder(Vec<Symbol>),
    Piecewise {
        breaks: Vec<Rational>,
        values: Vec<f64>,
    },
}

fn bad(input: &str) -> Error {
    Error::Parse {
        what: "observable",
        input: input.to_string(),
    }
}

impl Observable {
    pub fn interval(lo: Rational, hi: Rational, lo_closed: bool, hi_closed: bool) -> Self {
        Observable::Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    /// `1_{[lo, hi)}`.
    pub fn half_open(lo: Rational, hi: Rational) -> Self {
        Self::interval(lo, hi, true, false)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(rest) = t.strip_prefix("cyl:") {
            let symbols = rest
                .split(',')
                .map(|s| s.trim().parse::<Symbol>().map_err(|_| bad(text)))
                .collect::<Result<Vec<_>>>()?;
            if symbols.is_empty() {
                return Err(bad(text));
            }
            return Ok(Observable::Cylinder(symbols));
        }
        if let Some(rest) = t.strip_prefix("pw:") {
            let (b, v) = rest.split_once(';').ok_or_else(|| bad(text))?;
            let breaks = if b.trim().is_empty() {
                Vec::new()
            } else {
                b.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?
            };
            let values = v
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad(text)))
                .collect::<Result<Vec<_>>>()?;
            let increasing = breaks.windows(2).all(|w| w[0] < w[1]);
            let inside = breaks.iter().all(|t| *t > 0 && *t < 1);
            if values.len() != breaks.len() + 1 || !increasing || !inside || values.iter().any(|v| !v.is_finite()) {
                return Err(bad(text));
            }
            return Ok(Observable::Piecewise { breaks, values });
        }
        let lo_closed = match t.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad(text)),
        };
        let hi_closed = match t.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad(text)),
        };
        let (a, b) = t[1..t.len() - 1].split_once(',').ok_or_else(|| bad(text))?;
        let (lo, hi) = (parse_rational(a)?, parse_rational(b)?);
        if lo < 0 || hi > 1 || lo > hi {
            return Err(Error::OutOfRange(format!("{text} is not a subinterval of [0, 1]")));
        }
        Ok(Self::interval(lo, hi, lo_closed, hi_closed))
    }

    /// Value on an enclosure, or the breakpoint the enclosure meets.
    fn eval_point(&self, x: &EnclosedReal) -> std::result::Result<f64, f64> {
        match self {
            Observable::Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            } => {
                let above = |f: &Float| if *lo_closed { *f >= *lo } else { *f > *lo };
                let below = |f: &Float| if *hi_closed { *f <= *hi } else { *f < *hi };
                let (a, b) = (x.lo(), x.hi());
                if above(a) && below(b) {
                    return Ok(1.0);
                }
                let out_left = if *lo_closed { *b < *lo } else { *b <= *lo };
                let out_right = if *hi_closed { *a > *hi } else { *a >= *hi };
                if out_left || out_right {
                    return Ok(0.0);
                }
                let edge = if above(a) == above(b) { hi } else { lo };
                Err(edge.to_f64())
            }
            Observable::Piecewise { breaks, values } => {
                let idx = |f: &Float| breaks.iter().filter(|t| *f >= **t).count();
                let (i, j) = (idx(x.lo()), idx(x.hi()));
                if i == j {
                    Ok(values[i])
                } else {
                    Err(breaks[i].to_f64())
                }
            }
            Observable::Cylinder(_) => unreachable!("cylinder observables read digits"),
        }
    }

    /// `∫ f dμ` and `∫ f² dμ`.
    pub fn moments(&self, map: &MapSpec, m: &MeasureSpec) -> Result<(f64, f64)> {
        Ok(match self {
            Observable::Interval { lo, hi, .. } => {
                let p = measure_of_interval(m, lo.to_f64(), hi.to_f64());
                (p, p)
            }
            Observable::Cylinder(s) => {
                let p = cylinder_measure(&cylinder_interval(map, s, 256)?, m);
                (p, p)
            }
            Observable::Piecewise { breaks, values } => {
                let mut edges = vec![0.0];
                edges.extend(breaks.iter().map(Rational::to_f64));
                edges.push(1.0);
                let mut first = 0.0;
                let mut second = 0.0;
                for (w, v) in edges.windows(2).zip(values) {
                    let p = measure_of_interval(m, w[0], w[1]);
                    first += v * p;
                    second += v * v * p;
                }
                (first, second)
            }
        })
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            } => write!(
                f,
                "{}{lo},{hi}{}",
                if *lo_closed { '[' } else { '(' },
                if *hi_closed { ']' } else { ')' }
            ),
            Observable::Cylinder(s) => {
                let parts: Vec<String> = s.iter().map(u64::to_string).collect();
                write!(f, "cyl:{}", parts.join(","))
            }
            Observable::Piecewise { breaks, values } => {
                let b: Vec<String> = breaks.iter().map(Rational::to_string).collect();
                let v: Vec<String> = values.iter().map(f64::to_string).collect();
                write!(f, "pw:{};{}", b.join(","), v.join(","))
            }
        }
    }
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Observable::parse(s)
    }
}

impl TryFrom<String> for Observable {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Observable::parse(&s)
    }
}

impl From<Observable> for String {
    fn from(o: Observable) -> String {
        o.to_string()
    }
}

/// `f` composed with the orbit of `map`, integrated against `measure`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub map: MapSpec,
    pub f: Observable,
    pub measure: MeasureSpec,
}

impl ObservableSpec {
    pub fn new(map: MapSpec, f: Observable, measure: MeasureSpec) -> Self {
        Self { map, f, measure }
    }

    /// Uses the natural invariant measure of `map`.
    pub fn natural(map: MapSpec, f: Observable) -> Result<Self> {
        let measure = MeasureSpec::natural(&map)?;
        Ok(Self { map, f, measure })
    }

    /// `f(T^n x)` for `n = 0, 1, …` until `n` values or the first
    /// undecidable value.
    pub fn values(&self, x: &EnclosedReal, n: usize, cfg: &PrecisionConfig) -> (Vec<f64>, Option<StopReason>) {
        if let Observable::Cylinder(s) = &self.f {
            let l = s.len();
            let d = orbit_digits(&self.map, x.clone(), n + l - 1, cfg);
            let vals: Vec<f64> = d
                .symbols
                .windows(l)
                .take(n)
                .map(|w| if w == &s[..] { 1.0 } else { 0.0 })
                .collect();
            let stop = if vals.len() < n { d.stop } else { None };
            return (vals, stop);
        }
        let mut orbit = Orbit::new(&self.map, x.clone(), cfg);
        let mut vals = Vec::with_capacity(n);
        while vals.len() < n {
            match self.f.eval_point(orbit.point()) {
                Ok(v) => vals.push(v),
                Err(boundary) => {
                    return (
                        vals,
                        Some(StopReason::Straddle {
                            step: orbit.steps(),
                            boundary,
                        }),
                    )
                }
            }
            if vals.len() < n && orbit.advance().is_none() {
                return (vals, orbit.stop_reason().cloned());
            }
        }
        (vals, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: usize,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAverage {
    pub maps: Vec<MapSpec>,
    pub observables: Vec<Observable>,
    /// One start point for every map, or the same point for all.
    pub diagonal: bool,
    pub requested: usize,
    /// Terms actually averaged.
    pub n: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub final_value: f64,
    pub target: f64,
    /// Target written as a product of per-map integrals.
    pub target_formula: String,
    pub z: f64,
    pub stop: Option<StopReason>,
}

/// `(1/N) Σ_{n<N} Π f_i(T_i^n x_i)` with checkpoints at `N/10, 2N/10, …, N`.
///
/// `starts` holds one point (the diagonal case, fed to every map) or one
/// point per observable.
pub fn joint_average(
    starts: &[EnclosedReal],
    observables: &[ObservableSpec],
    n: usize,
    cfg: &PrecisionConfig,
) -> Result<JointAverage> {
    if observables.is_empty() {
        return Err(Error::InvalidManifest("no observables".into()));
    }
    let diagonal = match starts.len() {
        1 => true,
        k if k == observables.len() => false,
        k => {
            return Err(Error::InvalidManifest(format!(
                "{k} start points for {} observables",
                observables.len()
            )))
        }
    };
    let mut series: Vec<Vec<f64>> = Vec::with_capacity(observables.len());
    let mut stop = None;
    let mut achieved = n;
    for (i, obs) in observables.iter().enumerate() {
        let x = if diagonal { &starts[0] } else { &starts[i] };
        let (vals, s) = obs.values(x, n, cfg);
        if vals.len() < achieved {
            achieved = vals.len();
            stop = s;
        }
        series.push(vals);
    }
    let mut mean = 1.0;
    let mut second = 1.0;
    let mut formula = Vec::new();
    for obs in observables {
        let (m1, m2) = obs.f.moments(&obs.map, &obs.measure)?;
        mean *= m1;
        second *= m2;
        formula.push(format!("∫{} d{}", obs.f, measure_name(&obs.measure)));
    }
    let marks: Vec<usize> = (1..=10).map(|j| j * n / 10).filter(|&m| m >= 1 && m <= achieved).collect();
    let mut checkpoints = Vec::new();
    let mut sum = 0.0;
    let mut next = marks.iter().peekable();
    for t in 0..achieved {
        sum += series.iter().map(|s| s[t]).product::<f64>();
        while next.peek().is_some_and(|&&m| m == t + 1) {
            checkpoints.push(Checkpoint {
                n: t + 1,
                average: sum / (t + 1) as f64,
            });
            next.next();
        }
    }
    let final_value = if achieved == 0 { 0.0 } else { sum / achieved as f64 };
    let var = second - mean * mean;
    let z = if var > 0.0 {
        (final_value - mean) * (achieved as f64).sqrt() / var.sqrt()
    } else {
        z_score(final_value, mean, achieved as u64)
    };
    Ok(JointAverage {
        maps: observables.iter().map(|o| o.map.clone()).collect(),
        observables: observables.iter().map(|o| o.f.clone()).collect(),
        diagonal,
        requested: n,
        n: achieved,
        checkpoints,
        final_value,
        target: mean,
        target_formula: formula.join(" · "),
        z,
        stop,
    })
}

fn measure_name(m: &MeasureSpec) -> &'static str {
    match m {
        MeasureSpec::Lebesgue => "λ",
        MeasureSpec::GaussMeasure => "μ_G",
        MeasureSpec::NumericInvariant { .. } => "μ",
    }
}

/// Counts of orbit tuples in a uniform `g^k` grid; cell `(c_1, …, c_k)`
/// sits at index `Σ c_i g^{i−1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub k: usize,
    pub g: usize,
    pub counts: Vec<u64>,
}

impl BoxGrid {
    pub fn new(k: usize, g: usize) -> Result<Self> {
        let cells = (g as u128).checked_pow(k as u32).filter(|&c| c <= 1 << 26);
        match cells {
            Some(c) if g >= 1 && k >= 1 => Ok(Self {
                k,
                g,
                counts: vec![0; c as usize],
            }),
            _ => Err(Error::OutOfRange(format!("grid {g}^{k} does not fit"))),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn index(&self, cell: &[usize]) -> usize {
        cell.iter().rev().fold(0, |acc, &c| acc * self.g + c)
    }

    pub fn cell(&self, mut index: usize) -> Vec<usize> {
        (0..self.k)
            .map(|_| {
                let c = index % self.g;
                index /= self.g;
                c
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistReport {
    pub maps: Vec<MapSpec>,
    pub requested: usize,
    pub recorded: u64,
    /// Tuples whose enclosure was wider than a cell, or which the orbit
    /// never reached.
    pub excluded: u64,
    pub grid: BoxGrid,
    /// `Π μ_i(cell_i)` in grid order.
    pub targets: Vec<f64>,
    /// `max |count/N − target|`.
    pub sup_deviation: f64,
    /// Excluded fraction at most 1%.
    pub valid: bool,
    pub stops: Vec<Option<StopReason>>,
}

impl EquidistReport {
    /// `mult · max_cell √(p(1−p)/N)`.
    pub fn sup_threshold(&self, mult: f64) -> f64 {
        let n = self.requested as f64;
        mult * self
            .targets
            .iter()
            .map(|&p| (p * (1.0 - p) / n).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn z_scores(&self) -> Vec<f64> {
        let n = self.requested as u64;
        self.grid
            .counts
            .iter()
            .zip(&self.targets)
            .map(|(&c, &p)| z_score(c as f64 / n as f64, p, n))
            .collect()
    }

    /// Per-cell z gate; an invalid run never passes.
    pub fn verdict(&self, gate: &Gate) -> Verdict {
        let mut v = gate.judge(&self.z_scores());
        v.pass &= self.valid;
        v
    }
}

/// Box counts built from existing traces; every trace shares the start point
/// index `n`.
pub fn equidist_from_traces(traces: &[&OrbitTrace], measures: &[MeasureSpec], n: usize, g: usize) -> Result<EquidistReport> {
    assert_eq!(traces.len(), measures.len());
    let k = traces.len();
    let mut grid = BoxGrid::new(k, g)?;
    let cell_log2 = -(g as f64).log2();
    let mut recorded = 0;
    let mut cell = vec![0usize; k];
    for t in 0..n {
        let mut ok = true;
        for (i, tr) in traces.iter().enumerate() {
            if t >= tr.len() || tr.width_log2[t] > cell_log2 {
                ok = false;
                break;
            }
            cell[i] = ((tr.points[t] * g as f64).floor() as usize).min(g - 1);
        }
        if ok {
            let idx = grid.index(&cell);
            grid.counts[idx] += 1;
            recorded += 1;
        }
    }
    let edges: Vec<Vec<f64>> = measures
        .iter()
        .map(|m| (0..g).map(|c| measure_of_interval(m, c as f64 / g as f64, (c + 1) as f64 / g as f64)).collect())
        .collect();
    let targets: Vec<f64> = (0..grid.counts.len())
        .map(|idx| grid.cell(idx).iter().enumerate().map(|(i, &c)| edges[i][c]).product())
        .collect();
    let sup_deviation = grid
        .counts
        .iter()
        .zip(&targets)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .fold(0.0, f64::max);
    let excluded = n as u64 - recorded;
    Ok(EquidistReport {
        maps: traces.iter().map(|t| t.digits.map.clone()).collect(),
        requested: n,
        recorded,
        excluded,
        grid,
        targets,
        sup_deviation,
        valid: excluded as f64 <= 0.01 * n as f64,
        stops: traces.iter().map(|t| t.digits.stop.clone()).collect(),
    })
}

/// One-dimensional box counts of a single trace.
pub fn interval_equidistribution(trace: &OrbitTrace, measure: &MeasureSpec, bins: usize) -> EquidistReport {
    equidist_from_traces(&[trace], std::slice::from_ref(measure), trace.digits.requested, bins)
        .expect("one-dimensional grid")
}

/// Records `(T_1^n x, …, T_k^n x)` for `n < N` in a `g^k` grid.
pub fn equidist_test(
    x: &EnclosedReal,
    maps: &[MapSpec],
    measures: &[MeasureSpec],
    n: usize,
    g: usize,
    cfg: &PrecisionConfig,
) -> Result<EquidistReport> {
    if maps.is_empty() || maps.len() != measures.len() {
        return Err(Error::InvalidManifest("one measure per map".into()));
    }
    BoxGrid::new(maps.len(), g)?;
    let traces: Vec<OrbitTrace> = maps.iter().map(|m| trace_orbit(m, x.clone(), n, cfg)).collect();
    let refs: Vec<&OrbitTrace> = traces.iter().collect();
    equidist_from_traces(&refs, measures, n, g)
}

/// Entropies closer than this are a collision.
pub const COLLISION_TOL: f64 = 1e-12;
/// Window around `π²/(6 log 2)` for `log β` where the joint limit is open.
pub const UNKNOWN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntropyVerdict {
    Distinct,
    Collision { first: usize, second: usize },
    /// `log β` equals the Gauss entropy: joint behavior is not known.
    WarnUnknown { beta: usize, gauss: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEntry {
    pub map: MapSpec,
    pub entropy: f64,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub first: usize,
    pub second: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCheck {
    pub entries: Vec<EntropyEntry>,
    pub pairs: Vec<PairGap>,
    pub verdict: EntropyVerdict,
}

pub fn entropy_distinct_check(maps: &[MapSpec]) -> EntropyCheck {
    let entries: Vec<EntropyEntry> = maps
        .iter()
        .map(|m| EntropyEntry {
            map: m.clone(),
            entropy: m.entropy(),
            formula: m.entropy_formula().to_string(),
        })
        .collect();
    let is_beta = |m: &MapSpec| matches!(m, MapSpec::Beta(_) | MapSpec::LinearMod1 { .. });
    let h_gauss = gauss_entropy();
    let mut pairs = Vec::new();
    let mut collision = None;
    let mut unknown = None;
    for i in 0..maps.len() {
        for j in i + 1..maps.len() {
            let gap = (entries[i].entropy - entries[j].entropy).abs();
            pairs.push(PairGap { first: i, second: j, gap });
            let warn = [(i, j), (j, i)].into_iter().find(|&(b, g)| {
                is_beta(&maps[b]) && maps[g] == MapSpec::Gauss && (entries[b].entropy - h_gauss).abs() <= UNKNOWN_TOL
            });
            if let Some((b, g)) = warn {
                unknown.get_or_insert(EntropyVerdict::WarnUnknown { beta: b, gauss: g });
            } else if gap <= COLLISION_TOL {
                collision.get_or_insert(EntropyVerdict::Collision { first: i, second: j });
            }
        }
    }
    EntropyCheck {
        entries,
        pairs,
        verdict: collision.or(unknown).unwrap_or(EntropyVerdict::Distinct),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::sample;
    use crate::normality::{count_pattern, sliding_counts};

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn cfg(maps: &[MapSpec], n: usize) -> PrecisionConfig {
        PrecisionConfig::auto(maps, n + 8, 2f64.powi(-30)).unwrap()
    }

    #[test]
    fn observable_grammar() {
        for t in ["[0,1/2)", "(1/2,1]", "cyl:0,1", "pw:1/4,1/2;1,0,2.5", "pw:;3"] {
            assert_eq!(Observable::parse(t).unwrap().to_string(), t);
        }
        for t in ["[0,1/2", "[1/2,0)", "[0,2)", "pw:1/2;1", "pw:1/2,1/4;1,2,3", "cyl:", "x"] {
            assert!(Observable::parse(t).is_err(), "{t}");
        }
    }

    #[test]
    fn interval_evaluation_is_certified() {
        let f = Observable::half_open(q(0, 1), q(1, 2));
        let at = |v: Rational| EnclosedReal::from_rational(&v, 64);
        assert_eq!(f.eval_point(&at(q(1, 4))), Ok(1.0));
        assert_eq!(f.eval_point(&at(q(3, 4))), Ok(0.0));
        assert_eq!(f.eval_point(&EnclosedReal::exact(Float::with_val(64, 0.5))), Ok(0.0));
        assert_eq!(f.eval_point(&at(q(1, 3)).hull(&at(q(2, 3)))), Err(0.5));
    }

    #[test]
    fn k1_average_equals_pattern_frequency() {
        let n = 20_000;
        let map = MapSpec::TimesB(2);
        let c = cfg(&[map.clone()], n);
        let x = sample(9, c.bits);
        let d = orbit_digits(&map, x.clone(), n, &c);
        let zeros = count_pattern(&d, &[0]).unwrap() as f64 / n as f64;
        for f in ["[0,1/2)", "cyl:0"] {
            let obs = ObservableSpec::natural(map.clone(), Observable::parse(f).unwrap()).unwrap();
            let r = joint_average(&[x.clone()], &[obs], n, &c).unwrap();
            assert_eq!(r.final_value, zeros, "{f}");
            assert_eq!(r.checkpoints.len(), 10);
            assert_eq!(r.target, 0.5);
        }
        let obs = ObservableSpec::natural(map.clone(), Observable::parse("cyl:0,1").unwrap()).unwrap();
        let r = joint_average(&[x], &[obs], n - 1, &c).unwrap();
        let t = sliding_counts(&d.symbols, 2, None);
        assert_eq!(r.final_value, t.frequency(&[0, 1]));
    }

    #[test]
    fn disjoint_indicators_on_one_map_average_zero() {
        let map = MapSpec::TimesB(2);
        let c = cfg(&[map.clone()], 5000);
        let a = ObservableSpec::natural(map.clone(), Observable::parse("[0,1/2)").unwrap()).unwrap();
        let b = ObservableSpec::natural(map, Observable::parse("[1/2,1)").unwrap()).unwrap();
        let r = joint_average(&[sample(3, c.bits)], &[a, b], 5000, &c).unwrap();
        assert_eq!(r.final_value, 0.0);
        assert!(r.checkpoints.iter().all(|p| p.average == 0.0));
        assert_eq!(r.target, 0.25);
    }

    #[test]
    fn independent_starts() {
        let map = MapSpec::TimesB(2);
        let n = 10_000;
        let c = cfg(&[map.clone()], n);
        let a = ObservableSpec::natural(map.clone(), Observable::parse("[0,1/2)").unwrap()).unwrap();
        let b = ObservableSpec::natural(map, Observable::parse("[1/2,1)").unwrap()).unwrap();
        let r = joint_average(&[sample(3, c.bits), sample(4, c.bits)], &[a, b], n, &c).unwrap();
        assert!(!r.diagonal);
        assert!(r.z.abs() < 5.0, "{r:?}");
    }

    #[test]
    fn grid_accounting() {
        let maps = [MapSpec::TimesB(2), MapSpec::Gauss];
        let n = 5000;
        let c = cfg(&maps, n);
        let ms = [MeasureSpec::Lebesgue, MeasureSpec::GaussMeasure];
        let r = equidist_test(&sample(5, c.bits), &maps, &ms, n, 8, &c).unwrap();
        assert_eq!(r.recorded + r.excluded, n as u64);
        assert_eq!(r.grid.total(), r.recorded);
        assert!((r.targets.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r.targets[0] - gauss_cell(0) / 8.0).abs() < 1e-15);
        assert!(r.valid);

        let short = PrecisionConfig::new(200, n, 2f64.powi(-30)).unwrap();
        let r = equidist_test(&sample(5, short.bits), &maps[..1], &ms[..1], n, 8, &short).unwrap();
        assert_eq!(r.recorded + r.excluded, n as u64);
        assert!(!r.valid);
    }

    fn gauss_cell(c: usize) -> f64 {
        crate::measures::gauss_measure(c as f64 / 8.0, (c + 1) as f64 / 8.0)
    }

    #[test]
    fn box_index_round_trip() {
        let g = BoxGrid::new(3, 5).unwrap();
        for i in 0..125 {
            assert_eq!(g.index(&g.cell(i)), i);
        }
        assert!(BoxGrid::new(10, 100).is_err());
    }

    #[test]
    fn entropy_verdicts() {
        let m = |s: &str| MapSpec::parse(s).unwrap();
        let r = entropy_distinct_check(&[m("timesb:2"), m("timesb:3"), m("gauss")]);
        assert_eq!(r.verdict, EntropyVerdict::Distinct);
        assert_eq!(r.pairs.len(), 3);
        assert_eq!(
            entropy_distinct_check(&[m("beta:golden"), m("timesb:2")]).verdict,
            EntropyVerdict::Distinct
        );
        assert_eq!(
            entropy_distinct_check(&[m("timesb:4"), m("linmod1:4,0")]).verdict,
            EntropyVerdict::Collision { first: 0, second: 1 }
        );
        // β* = exp(π²/(6 ln 2)); the shortest f64 decimal is within 1e-15
        let star = gauss_entropy().exp();
        let beta = m(&format!("beta:{star}"));
        assert!((beta.entropy() - gauss_entropy()).abs() < 1e-12);
        assert_eq!(
            entropy_distinct_check(&[m("gauss"), beta]).verdict,
            EntropyVerdict::WarnUnknown { beta: 1, gauss: 0 }
        );
    }
}
