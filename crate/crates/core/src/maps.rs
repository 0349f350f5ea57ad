//! Interval maps with their generating partitions.
//!
//! Supported families: `T_b x = bx mod 1`, `T_β x = βx mod 1`,
//! `T_{β,γ} x = βx + γ mod 1`, the Gauss map `x ↦ {1/x}` and the rotation
//! `x ↦ x + α mod 1`. The first three are handled uniformly as affine
//! branches of slope β and shift γ.
//!
//! Cell conventions: `[·,·)` for every affine family and `(1/(n+1), 1/n]`
//! for Gauss. A digit is emitted only when the full enclosure lies inside a
//! single cell; otherwise the orbit reports a straddle.

use std::fmt;
use std::str::FromStr;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{
    parse_rational, EnclosedReal, ExpansionRate, PrecisionConfig, MIN_BITS, ORBIT_GUARD_BITS,
};

pub type Symbol = u64;

/// Entropy of the Gauss map, `π²/(6 log 2)`.
pub fn gauss_entropy() -> f64 {
    let pi = Float::with_val(128, Constant::Pi);
    let ln2 = Float::with_val(128, Constant::Log2);
    (Float::with_val(128, pi.square_ref()) / (ln2 * 6u32)).to_f64()
}

/// Lévy's constant, `π²/(12 log 2)`: a.e. growth rate of `log q_n / n`.
pub fn levy_constant() -> f64 {
    let pi = Float::with_val(128, Constant::Pi);
    let ln2 = Float::with_val(128, Constant::Log2);
    (Float::with_val(128, pi.square_ref()) / (ln2 * 12u32)).to_f64()
}

/// A real parameter: an exact rational or a named quadratic irrational.
#[derive(Debug, Clone, PartialEq)]
pub enum RealParam {
    Rational { value: Rational, text: String },
    /// `(1 + √5)/2`
    Golden,
    /// `√2 − 1`
    Sqrt2Minus1,
}

impl RealParam {
    pub fn rational(value: Rational) -> Self {
        let text = if value.is_integer() {
            value.numer().to_string()
        } else {
            value.to_string()
        };
        RealParam::Rational { value, text }
    }

    pub fn integer(k: u64) -> Self {
        RealParam::Rational {
            value: Rational::from(k),
            text: k.to_string(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "golden" => Ok(RealParam::Golden),
            "sqrt2m1" => Ok(RealParam::Sqrt2Minus1),
            other => Ok(RealParam::Rational {
                value: parse_rational(other)?,
                text: other.to_string(),
            }),
        }
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            RealParam::Rational { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_rational().map_or(false, |q| *q == 0)
    }

    pub fn enclose(&self, bits: u32) -> EnclosedReal {
        let work = bits + 16;
        match self {
            RealParam::Rational { value, .. } => EnclosedReal::from_rational(value, bits),
            RealParam::Golden => EnclosedReal::from_integer(5, work)
                .sqrt(work)
                .expect("sqrt of 5")
                .add_integer(1, work)
                .div_integer(2, bits),
            RealParam::Sqrt2Minus1 => EnclosedReal::from_integer(2, work)
                .sqrt(work)
                .expect("sqrt of 2")
                .sub_integer(1, bits),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            RealParam::Rational { value, .. } => value.to_f64(),
            other => other.enclose(128).midpoint_f64(),
        }
    }

    /// Floor of the parameter; exact for all variants.
    pub fn floor(&self) -> u64 {
        match self {
            RealParam::Rational { value, .. } => {
                let f = value.clone().floor();
                f.numer().to_u64().unwrap_or(u64::MAX)
            }
            RealParam::Golden => 1,
            RealParam::Sqrt2Minus1 => 0,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.as_rational().map_or(false, Rational::is_integer)
    }

    pub fn log(&self) -> f64 {
        self.enclose(192).lo().clone().ln().to_f64()
    }
}

impl fmt::Display for RealParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealParam::Rational { text, .. } => f.write_str(text),
            RealParam::Golden => f.write_str("golden"),
            RealParam::Sqrt2Minus1 => f.write_str("sqrt2m1"),
        }
    }
}

/// One of the supported map families. Parameters are validated on
/// construction; build through [`MapSpec::parse`] or the named constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MapSpec {
    TimesB(u32),
    Beta(RealParam),
    LinearMod1 { beta: RealParam, gamma: RealParam },
    Gauss,
    Rotation(RealParam),
}

impl MapSpec {
    pub fn times_b(b: u32) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidMap(format!("timesb needs b >= 2, got {b}")));
        }
        Ok(MapSpec::TimesB(b))
    }

    pub fn beta(beta: RealParam) -> Result<Self> {
        if beta.is_integer() {
            return Err(Error::InvalidMap(format!(
                "beta:{beta} is an integer; use timesb"
            )));
        }
        if beta.to_f64() <= 1.0 {
            return Err(Error::InvalidMap(format!("beta:{beta} must exceed 1")));
        }
        Ok(MapSpec::Beta(beta))
    }

    pub fn golden() -> Self {
        MapSpec::Beta(RealParam::Golden)
    }

    pub fn linear_mod1(beta: RealParam, gamma: RealParam) -> Result<Self> {
        let b = beta.to_f64();
        let g = gamma.to_f64();
        if !(0.0..1.0).contains(&g) {
            return Err(Error::InvalidMap(format!("gamma {gamma} must lie in [0, 1)")));
        }
        if b <= 1.0 {
            return Err(Error::InvalidMap(format!("linmod1 needs beta > 1, got {beta}")));
        }
        if b < 2.0 && !gamma.is_zero() {
            return Err(Error::InvalidMap(format!(
                "linmod1:{beta},{gamma}: for 1 < beta < 2 only gamma = 0 carries an invariant measure equivalent to Lebesgue"
            )));
        }
        Ok(MapSpec::LinearMod1 { beta, gamma })
    }

    pub fn rotation(alpha: RealParam) -> Result<Self> {
        let a = alpha.to_f64();
        if !(0.0..1.0).contains(&a) || alpha.is_zero() {
            return Err(Error::InvalidMap(format!("rotation angle {alpha} must lie in (0, 1)")));
        }
        Ok(MapSpec::Rotation(alpha))
    }

    /// Parses the map grammar: `timesb:<b>`, `beta:<decimal|golden>`,
    /// `linmod1:<beta>,<gamma>`, `gauss`, `rotation:<decimal|sqrt2m1|golden>`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::Parse {
            what: "map",
            input: text.to_string(),
        };
        let (head, arg) = match text.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (text, None),
        };
        match (head, arg) {
            ("gauss", None) => Ok(MapSpec::Gauss),
            ("timesb", Some(a)) => MapSpec::times_b(a.trim().parse().map_err(|_| bad())?),
            ("beta", Some(a)) => MapSpec::beta(RealParam::parse(a)?),
            ("linmod1", Some(a)) => {
                let (b, g) = a.split_once(',').ok_or_else(bad)?;
                MapSpec::linear_mod1(RealParam::parse(b)?, RealParam::parse(g)?)
            }
            ("rotation", Some(a)) => match RealParam::parse(a)? {
                // rotation by φ is rotation by φ − 1
                RealParam::Golden => Ok(MapSpec::Rotation(RealParam::Golden)),
                other => MapSpec::rotation(other),
            },
            _ => Err(bad()),
        }
    }

    /// `(slope, shift)` for the affine families.
    pub fn affine(&self) -> Option<(RealParam, Option<RealParam>)> {
        match self {
            MapSpec::TimesB(b) => Some((RealParam::integer(u64::from(*b)), None)),
            MapSpec::Beta(beta) => Some((beta.clone(), None)),
            MapSpec::LinearMod1 { beta, gamma } => Some((
                beta.clone(),
                if gamma.is_zero() { None } else { Some(gamma.clone()) },
            )),
            _ => None,
        }
    }

    /// Exact rational slope and shift, when both are rational.
    pub fn affine_exact(&self) -> Option<(Rational, Rational)> {
        let (slope, shift) = self.affine()?;
        let slope = slope.as_rational()?.clone();
        let shift = match shift {
            None => Rational::new(),
            Some(g) => g.as_rational()?.clone(),
        };
        Some((slope, shift))
    }

    pub fn is_affine(&self) -> bool {
        self.affine().is_some()
    }

    /// Largest digit of the finite alphabet `{0, …, max}`; `None` for Gauss
    /// (countable) and rotation (no generating partition).
    pub fn max_symbol(&self) -> Option<Symbol> {
        match self {
            MapSpec::TimesB(b) => Some(u64::from(*b) - 1),
            MapSpec::Beta(beta) => Some(beta.floor()),
            MapSpec::LinearMod1 { beta, gamma } => {
                if let (Some(b), Some(g)) = (beta.as_rational(), gamma.as_rational()) {
                    let s = Rational::from(b + g);
                    let f = s.clone().floor();
                    let f64_ = f.numer().to_u64().unwrap_or(u64::MAX);
                    Some(if s.is_integer() { f64_ - 1 } else { f64_ })
                } else {
                    let s = beta.enclose(128).add(&gamma.enclose(128), 128);
                    let (lo, hi) = s.floor_bounds().expect("finite parameters");
                    assert_eq!(lo, hi, "irrational beta + gamma is never an integer");
                    Some(lo)
                }
            }
            MapSpec::Gauss | MapSpec::Rotation(_) => None,
        }
    }

    /// Smallest valid digit.
    pub fn min_symbol(&self) -> Symbol {
        match self {
            MapSpec::Gauss => 1,
            _ => 0,
        }
    }

    pub fn is_valid_symbol(&self, s: Symbol) -> bool {
        match self {
            MapSpec::Gauss => s >= 1,
            MapSpec::Rotation(_) => s == 0,
            _ => s <= self.max_symbol().expect("finite alphabet"),
        }
    }

    pub fn has_generating_partition(&self) -> bool {
        !matches!(self, MapSpec::Rotation(_))
    }

    /// Kolmogorov–Sinai entropy in nats.
    pub fn entropy(&self) -> f64 {
        match self {
            MapSpec::TimesB(b) => Float::with_val(256, *b).ln().to_f64(),
            MapSpec::Beta(beta) | MapSpec::LinearMod1 { beta, .. } => beta.log(),
            MapSpec::Gauss => gauss_entropy(),
            MapSpec::Rotation(_) => 0.0,
        }
    }

    pub fn entropy_formula(&self) -> &'static str {
        match self {
            MapSpec::TimesB(_) => "log b",
            MapSpec::Beta(_) | MapSpec::LinearMod1 { .. } => "log beta",
            MapSpec::Gauss => "pi^2/(6 log 2)",
            MapSpec::Rotation(_) => "0",
        }
    }

    pub fn prepare(&self, bits: u32) -> PreparedMap {
        PreparedMap::new(self, bits)
    }
}

impl ExpansionRate for MapSpec {
    fn bits_per_step(&self) -> f64 {
        match self {
            MapSpec::TimesB(b) => f64::from(*b).log2(),
            MapSpec::Beta(beta) | MapSpec::LinearMod1 { beta, .. } => beta.to_f64().log2(),
            // |T'(x)| = 1/x², whose log-average is twice Lévy's constant
            MapSpec::Gauss => 2.0 * levy_constant() / std::f64::consts::LN_2,
            MapSpec::Rotation(_) => 0.0,
        }
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSpec::TimesB(b) => write!(f, "timesb:{b}"),
            MapSpec::Beta(beta) => write!(f, "beta:{beta}"),
            MapSpec::LinearMod1 { beta, gamma } => write!(f, "linmod1:{beta},{gamma}"),
            MapSpec::Gauss => f.write_str("gauss"),
            MapSpec::Rotation(a) => write!(f, "rotation:{a}"),
        }
    }
}

impl FromStr for MapSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MapSpec::parse(s)
    }
}

impl TryFrom<String> for MapSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        MapSpec::parse(&s)
    }
}

impl From<MapSpec> for String {
    fn from(m: MapSpec) -> String {
        m.to_string()
    }
}

/// Cell endpoint: exact where the parameters are rational, enclosed
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Exact(Rational),
    Enclosed(EnclosedReal),
}

impl Endpoint {
    pub fn to_f64(&self) -> f64 {
        match self {
            Endpoint::Exact(q) => q.to_f64(),
            Endpoint::Enclosed(e) => e.midpoint_f64(),
        }
    }

    pub fn enclose(&self, bits: u32) -> EnclosedReal {
        match self {
            Endpoint::Exact(q) => EnclosedReal::from_rational(q, bits),
            Endpoint::Enclosed(e) => e.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCell {
    pub symbol: Symbol,
    pub lo: Endpoint,
    pub hi: Endpoint,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub cells: Vec<PartitionCell>,
    /// False for rotations, which only carry the trivial cell.
    pub generating: bool,
}

/// The generating partition, cells in increasing symbol order. `limit` caps
/// the number of Gauss cells and is ignored for finite partitions.
pub fn partition_cells(map: &MapSpec, limit: Option<usize>, bits: u32) -> Result<Partition> {
    match map {
        MapSpec::Gauss => {
            let limit = limit.ok_or_else(|| {
                Error::Unsupported("an unbounded Gauss partition (pass a limit)".into())
            })?;
            let cells = (1..=limit as u64)
                .map(|n| PartitionCell {
                    symbol: n,
                    lo: Endpoint::Exact(Rational::from((1, n + 1))),
                    hi: Endpoint::Exact(Rational::from((1, n))),
                    lo_closed: false,
                    hi_closed: true,
                })
                .collect();
            Ok(Partition {
                cells,
                generating: true,
            })
        }
        MapSpec::Rotation(_) => Ok(Partition {
            cells: vec![PartitionCell {
                symbol: 0,
                lo: Endpoint::Exact(Rational::new()),
                hi: Endpoint::Exact(Rational::from(1)),
                lo_closed: true,
                hi_closed: false,
            }],
            generating: false,
        }),
        _ => {
            let max = map.max_symbol().expect("finite alphabet");
            let cells = (0..=max)
                .map(|j| {
                    let (lo, hi) = affine_cell(map, j, bits);
                    PartitionCell {
                        symbol: j,
                        lo,
                        hi,
                        lo_closed: true,
                        hi_closed: false,
                    }
                })
                .collect();
            Ok(Partition {
                cells,
                generating: true,
            })
        }
    }
}

/// Endpoints `max(0, (j−γ)/β)` and `min(1, (j+1−γ)/β)` of affine cell `j`.
pub(crate) fn affine_cell(map: &MapSpec, j: Symbol, bits: u32) -> (Endpoint, Endpoint) {
    if let Some((beta, gamma)) = map.affine_exact() {
        let zero = Rational::new();
        let one = Rational::from(1);
        let lo = Rational::from(&(Rational::from(j) - &gamma) / &beta);
        let hi = Rational::from(&(Rational::from(j + 1) - &gamma) / &beta);
        let lo = if lo < zero { zero } else { lo };
        let hi = if hi > one { one } else { hi };
        return (Endpoint::Exact(lo), Endpoint::Exact(hi));
    }
    let (slope, shift) = map.affine().expect("affine map");
    let beta = slope.enclose(bits + 16);
    let gamma = shift.map(|g| g.enclose(bits + 16));
    let at = |k: u64| {
        let num = EnclosedReal::from_integer(k, bits + 16);
        let num = match &gamma {
            Some(g) => num.sub(g, bits + 16),
            None => num,
        };
        num.div(&beta, bits).expect("beta > 0").clamp_unit()
    };
    (Endpoint::Enclosed(at(j)), Endpoint::Enclosed(at(j + 1)))
}

/// A map with its parameters enclosed at a fixed working precision.
#[derive(Debug, Clone)]
pub struct PreparedMap {
    pub spec: MapSpec,
    bits: u32,
    kind: PreparedKind,
}

#[derive(Debug, Clone)]
enum PreparedKind {
    Affine {
        slope: EnclosedReal,
        shift: Option<EnclosedReal>,
        integer_slope: Option<u64>,
        max_symbol: Symbol,
    },
    Gauss,
    Rotation {
        alpha: EnclosedReal,
    },
}

impl PreparedMap {
    pub fn new(spec: &MapSpec, bits: u32) -> Self {
        let pbits = bits + 64;
        let kind = match spec {
            MapSpec::Gauss => PreparedKind::Gauss,
            MapSpec::Rotation(a) => PreparedKind::Rotation {
                alpha: a.enclose(pbits),
            },
            _ => {
                let (slope, shift) = spec.affine().expect("affine map");
                let integer_slope = match spec {
                    MapSpec::TimesB(b) => Some(u64::from(*b)),
                    _ if slope.is_integer() => slope.floor().into(),
                    _ => None,
                };
                PreparedKind::Affine {
                    slope: slope.enclose(pbits),
                    shift: shift.map(|g| g.enclose(pbits)),
                    integer_slope,
                    max_symbol: spec.max_symbol().expect("finite alphabet"),
                }
            }
        };
        Self {
            spec: spec.clone(),
            bits,
            kind,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

/// Result of one map application.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub value: EnclosedReal,
    /// The input met more than one cell; `value` is the hull of the
    /// branch images.
    pub straddled: bool,
}

#[derive(Debug, Clone)]
pub(crate) enum Branch {
    Resolved { symbol: Symbol, image: EnclosedReal },
    Straddle { boundary: f64 },
}

#[derive(Clone, Copy)]
struct BranchParams<'a> {
    kind: &'a PreparedKind,
    slope: Option<&'a EnclosedReal>,
}

fn branch(params: BranchParams<'_>, x: &EnclosedReal, prec: u32) -> Result<Branch> {
    match params.kind {
        PreparedKind::Affine {
            slope,
            shift,
            integer_slope,
            max_symbol,
        } => {
            let slope = params.slope.unwrap_or(slope);
            let z = match integer_slope {
                Some(k) => x.mul_integer(*k, prec),
                None => x.mul(slope, prec),
            };
            let z = match shift {
                Some(g) => z.add(g, prec),
                None => z,
            };
            let (flo, fhi) = z.floor_bounds().ok_or_else(|| {
                Error::OutOfRange(format!("{:?} is not a point of [0, 1]", x))
            })?;
            if flo > *max_symbol {
                return Err(Error::OutOfRange(format!("{:?} lies at or above 1", x)));
            }
            if flo != fhi {
                let boundary = boundary_f64(slope, shift.as_ref(), flo + 1);
                return Ok(Branch::Straddle { boundary });
            }
            let image = z.sub_integer(flo, prec).clamp_unit();
            Ok(Branch::Resolved {
                symbol: flo,
                image,
            })
        }
        PreparedKind::Gauss => {
            if x.lo() <= &0 {
                return Err(Error::GaussAtZero);
            }
            let z = x.recip(prec).expect("positive enclosure");
            let (flo, fhi) = z
                .floor_bounds()
                .ok_or_else(|| Error::Unsupported("partial quotient beyond 2^64".into()))?;
            if flo != fhi {
                return Ok(Branch::Straddle {
                    boundary: 1.0 / fhi as f64,
                });
            }
            Ok(Branch::Resolved {
                symbol: flo,
                image: z.sub_integer(flo, prec).clamp_unit(),
            })
        }
        PreparedKind::Rotation { alpha } => {
            let z = x.add(alpha, prec);
            let (flo, fhi) = z.floor_bounds().expect("finite sum");
            if flo != fhi {
                return Ok(Branch::Straddle { boundary: 0.0 });
            }
            Ok(Branch::Resolved {
                symbol: 0,
                image: z.sub_integer(flo, prec).clamp_unit(),
            })
        }
    }
}

fn boundary_f64(slope: &EnclosedReal, shift: Option<&EnclosedReal>, k: u64) -> f64 {
    let g = shift.map_or(0.0, EnclosedReal::midpoint_f64);
    (k as f64 - g) / slope.midpoint_f64()
}

fn unit_hull(prec: u32) -> EnclosedReal {
    EnclosedReal::from_bounds(Float::with_val(prec, 0), Float::with_val(prec, 1))
        .expect("0 <= 1")
}

/// One application of the map. A straddling input yields the hull of the
/// branch images (the unit interval for every supported family), flagged.
pub fn apply(map: &PreparedMap, x: &EnclosedReal) -> Result<Image> {
    let prec = map.bits.max(x.prec());
    let params = BranchParams {
        kind: &map.kind,
        slope: None,
    };
    match branch(params, x, prec)? {
        Branch::Resolved { image, .. } => Ok(Image {
            value: image,
            straddled: false,
        }),
        Branch::Straddle { .. } => Ok(Image {
            value: unit_hull(prec),
            straddled: true,
        }),
    }
}

/// The symbol of the unique cell containing the whole enclosure.
pub fn digit(map: &PreparedMap, x: &EnclosedReal) -> Result<Symbol> {
    let prec = map.bits.max(x.prec());
    let params = BranchParams {
        kind: &map.kind,
        slope: None,
    };
    match branch(params, x, prec)? {
        Branch::Resolved { symbol, .. } => Ok(symbol),
        Branch::Straddle { boundary } => Err(Error::Straddle { boundary }),
    }
}

/// Why an orbit stopped before the requested length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    /// The enclosure met two cells at this step.
    Straddle { step: usize, boundary: f64 },
    /// The enclosure grew past the resolve width.
    PrecisionExhausted { step: usize, width_log2: f64 },
    /// The point reached 0 exactly (rational input under Gauss).
    Terminated { step: usize },
    /// Digit or point outside what the engine can represent.
    Unrepresentable { step: usize, detail: String },
}

impl StopReason {
    pub fn step(&self) -> usize {
        match self {
            StopReason::Straddle { step, .. }
            | StopReason::PrecisionExhausted { step, .. }
            | StopReason::Terminated { step }
            | StopReason::Unrepresentable { step, .. } => *step,
        }
    }
}

/// Iterates a map on an enclosure, yielding certified digits.
///
/// `point()` is always the enclosure of `T^steps x`. The walker tightens both
/// the point and its private copy of the slope as the width grows, so the
/// cost per step falls as the orbit consumes its precision budget.
#[derive(Debug, Clone)]
pub struct Orbit {
    map: PreparedMap,
    slope: Option<EnclosedReal>,
    point: EnclosedReal,
    resolve_log2: f64,
    steps: usize,
    stop: Option<StopReason>,
}

impl Orbit {
    pub fn new(map: &MapSpec, x: EnclosedReal, cfg: &PrecisionConfig) -> Self {
        let prepared = PreparedMap::new(map, cfg.bits.max(x.prec()));
        Self::from_prepared(prepared, x, cfg.resolve_log2())
    }

    pub fn from_prepared(map: PreparedMap, x: EnclosedReal, resolve_log2: f64) -> Self {
        let slope = match &map.kind {
            PreparedKind::Affine {
                slope,
                integer_slope: None,
                ..
            } => Some(slope.clone()),
            _ => None,
        };
        Self {
            map,
            slope,
            point: x,
            resolve_log2,
            steps: 0,
            stop: None,
        }
    }

    pub fn map(&self) -> &MapSpec {
        &self.map.spec
    }

    pub fn point(&self) -> &EnclosedReal {
        &self.point
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stop_reason(&self) -> Option<&StopReason> {
        self.stop.as_ref()
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.is_some()
    }

    /// Digit of the current point; moves the point to its image.
    pub fn advance(&mut self) -> Option<Symbol> {
        if self.stop.is_some() {
            return None;
        }
        let width = self.point.width_log2();
        if width > self.resolve_log2 {
            self.stop = Some(StopReason::PrecisionExhausted {
                step: self.steps,
                width_log2: width,
            });
            return None;
        }
        if matches!(self.map.kind, PreparedKind::Gauss) && self.point.is_point() && self.point.hi().is_zero() {
            self.stop = Some(StopReason::Terminated { step: self.steps });
            return None;
        }
        let prec = self.point.prec().max(MIN_BITS);
        if let Some(s) = self.slope.as_mut() {
            if s.prec() > 2 * (prec + 64) {
                s.tighten_to(prec + 64);
            }
        }
        let params = BranchParams {
            kind: &self.map.kind,
            slope: self.slope.as_ref(),
        };
        match branch(params, &self.point, prec + 8) {
            Ok(Branch::Resolved { symbol, image }) => {
                self.point = image;
                self.point.tighten(ORBIT_GUARD_BITS);
                self.steps += 1;
                Some(symbol)
            }
            Ok(Branch::Straddle { boundary }) => {
                self.stop = Some(StopReason::Straddle {
                    step: self.steps,
                    boundary,
                });
                None
            }
            Err(Error::GaussAtZero) => {
                self.stop = Some(StopReason::Terminated { step: self.steps });
                None
            }
            Err(e) => {
                self.stop = Some(StopReason::Unrepresentable {
                    step: self.steps,
                    detail: e.to_string(),
                });
                None
            }
        }
    }
}

impl Iterator for Orbit {
    type Item = Symbol;
    fn next(&mut self) -> Option<Symbol> {
        self.advance()
    }
}

/// Certified prefix of the symbolic itinerary `r_1 r_2 …` of a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitString {
    pub map: MapSpec,
    pub symbols: Vec<Symbol>,
    pub requested: usize,
    pub stop: Option<StopReason>,
}

impl DigitString {
    pub fn new(map: MapSpec, symbols: Vec<Symbol>) -> Self {
        let requested = symbols.len();
        Self {
            map,
            symbols,
            requested,
            stop: None,
        }
    }

    pub fn valid_len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_complete(&self) -> bool {
        self.symbols.len() >= self.requested
    }
}

/// Up to `n` certified digits of `x`.
pub fn orbit_digits(map: &MapSpec, x: EnclosedReal, n: usize, cfg: &PrecisionConfig) -> DigitString {
    if let MapSpec::TimesB(b) = map {
        if let Some(t) = times_b_exact(*b, &x, n, cfg.resolve_log2(), false) {
            return t.digits;
        }
    }
    let mut orbit = Orbit::new(map, x, cfg);
    let symbols: Vec<Symbol> = orbit.by_ref().take(n).collect();
    DigitString {
        map: map.clone(),
        symbols,
        requested: n,
        stop: orbit.stop_reason().cloned(),
    }
}

/// Certified digits together with the orbit points they were read from.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    pub digits: DigitString,
    /// Midpoint of `T^i x` for every certified step `i`.
    pub points: Vec<f64>,
    /// `log2` of the enclosure width of `T^i x`.
    pub width_log2: Vec<f64>,
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn trace_orbit(map: &MapSpec, x: EnclosedReal, n: usize, cfg: &PrecisionConfig) -> OrbitTrace {
    if let MapSpec::TimesB(b) = map {
        if let Some(t) = times_b_exact(*b, &x, n, cfg.resolve_log2(), true) {
            return t;
        }
    }
    let mut orbit = Orbit::new(map, x, cfg);
    let mut symbols = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    let mut width_log2 = Vec::with_capacity(n);
    while symbols.len() < n {
        let mid = orbit.point().midpoint_f64();
        let w = orbit.point().width_log2();
        match orbit.advance() {
            Some(s) => {
                symbols.push(s);
                points.push(mid);
                width_log2.push(w);
            }
            None => break,
        }
    }
    OrbitTrace {
        digits: DigitString {
            map: map.clone(),
            symbols,
            requested: n,
            stop: orbit.stop_reason().cloned(),
        },
        points,
        width_log2,
    }
}

/// First `m` base-`b` digits of the dyadic `v ∈ [0, 1]`; `None` when
/// `⌊bᵐv⌋ ≥ bᵐ`, i.e. `v = 1`.
fn dyadic_digits(b: u32, v: &Float, m: usize) -> Option<Vec<u8>> {
    if v.is_zero() {
        return Some(vec![0; m]);
    }
    let (mant, exp) = v.to_integer_exp()?;
    let bm = Integer::from(b).pow(m as u32);
    let mut d = mant * &bm;
    if exp >= 0 {
        d <<= exp as u32;
    } else {
        d >>= exp.unsigned_abs();
    }
    if d >= bm {
        return None;
    }
    if d == 0 {
        return Some(vec![0; m]);
    }
    let text = d.to_string_radix(b as i32);
    let mut out = vec![0u8; m - text.len()];
    out.extend(text.bytes().map(|c| (c as char).to_digit(b).expect("radix digit") as u8));
    Some(out)
}

/// `T_b` orbit read off exact integer arithmetic on the endpoints, which are
/// dyadic rationals. The first `k` digits are certified exactly when
/// `⌊bᵏ lo⌋ = ⌊bᵏ hi⌋`, and the width after `k` steps is `bᵏ(hi − lo)`, so
/// the stop rules of [`Orbit`] carry over. `None` for bases above 36.
fn times_b_exact(b: u32, x: &EnclosedReal, n: usize, resolve_log2: f64, with_points: bool) -> Option<OrbitTrace> {
    if b > 36 || x.lo().is_sign_negative() && !x.lo().is_zero() {
        return None;
    }
    let lb = f64::from(b).log2();
    let w0 = x.width_log2();
    let m = if w0 == f64::NEG_INFINITY {
        n
    } else if w0 > resolve_log2 {
        0
    } else {
        n.min(((resolve_log2 - w0) / lb).floor() as usize + 1)
    };
    let lo = dyadic_digits(b, x.lo(), m)?;
    let hi = dyadic_digits(b, x.hi(), m);
    let k = match &hi {
        Some(hi) => lo.iter().zip(hi).take_while(|(a, c)| a == c).count(),
        None => 0,
    };
    let stop = if k < m {
        Some(StopReason::Straddle {
            step: k,
            boundary: f64::from(lo[k] + 1) / f64::from(b),
        })
    } else if m < n {
        Some(StopReason::PrecisionExhausted {
            step: m,
            width_log2: w0 + m as f64 * lb,
        })
    } else {
        None
    };
    let symbols: Vec<Symbol> = lo[..k].iter().map(|&d| Symbol::from(d)).collect();
    let (mut points, mut width_log2) = (Vec::new(), Vec::new());
    if with_points && k > 0 {
        // enough trailing digits for a 60-bit fraction
        let tail = (60.0 / lb).ceil() as usize;
        let mid = Float::with_val(x.prec() + 1, x.lo() + x.hi()) / 2u32;
        let md = dyadic_digits(b, &mid, k + tail).expect("midpoint below 1");
        points = (0..k)
            .map(|i| md[i..i + tail].iter().rev().fold(0.0, |acc, &d| (acc + f64::from(d)) / f64::from(b)))
            .collect();
        width_log2 = (0..k).map(|i| w0 + i as f64 * lb).collect();
    }
    Some(OrbitTrace {
        digits: DigitString {
            map: MapSpec::TimesB(b),
            symbols,
            requested: n,
            stop,
        },
        points,
        width_log2,
    })
}

impl EnclosedReal {
    /// Outward re-rounding to exactly `prec` bits (never increases precision).
    pub(crate) fn tighten_to(&mut self, prec: u32) {
        let prec = prec.max(MIN_BITS);
        if prec < self.lo().prec() || prec < self.hi().prec() {
            let mut lo = self.lo().clone();
            let mut hi = self.hi().clone();
            if prec < lo.prec() {
                lo.set_prec_round(prec, rug::float::Round::Down);
            }
            if prec < hi.prec() {
                hi.set_prec_round(prec, rug::float::Round::Up);
            }
            *self = EnclosedReal::from_bounds(lo, hi).expect("outward rounding keeps order");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::make_enclosure;

    /// Digits and stops of the step-by-step engine.
    fn engine(map: &MapSpec, x: EnclosedReal, n: usize, cfg: &PrecisionConfig) -> OrbitTrace {
        let mut orbit = Orbit::new(map, x, cfg);
        let (mut symbols, mut points, mut width_log2) = (Vec::new(), Vec::new(), Vec::new());
        while symbols.len() < n {
            let (mid, w) = (orbit.point().midpoint_f64(), orbit.point().width_log2());
            match orbit.advance() {
                Some(s) => {
                    symbols.push(s);
                    points.push(mid);
                    width_log2.push(w);
                }
                None => break,
            }
        }
        OrbitTrace {
            digits: DigitString {
                map: map.clone(),
                symbols,
                requested: n,
                stop: orbit.stop_reason().cloned(),
            },
            points,
            width_log2,
        }
    }

    #[test]
    fn exact_base_b_path_matches_engine() {
        for b in [2u32, 3, 10] {
            let map = MapSpec::times_b(b).unwrap();
            for bits in [64u32, 200] {
                let cfg = PrecisionConfig::new(bits, 400, 2f64.powi(-20)).unwrap();
                let mut starts: Vec<EnclosedReal> = (1..=20).map(|s| crate::interval::sample(s, bits)).collect();
                for q in ["1/3", "1/2", "0", "7/10", "1/4"] {
                    starts.push(make_enclosure(q, &cfg).unwrap());
                }
                for x in starts {
                    let fast = times_b_exact(b, &x, 400, cfg.resolve_log2(), true).unwrap();
                    let slow = engine(&map, x, 400, &cfg);
                    assert_eq!(fast.digits.symbols, slow.digits.symbols, "b={b} bits={bits}");
                    match (&fast.digits.stop, &slow.digits.stop) {
                        (Some(f), Some(s)) => assert_eq!(f.step(), s.step()),
                        (f, s) => assert_eq!(f, s),
                    }
                    for (p, q) in fast.points.iter().zip(&slow.points) {
                        assert!((p - q).abs() < 1e-12);
                    }
                    for (p, q) in fast.width_log2.iter().zip(&slow.width_log2) {
                        assert!(p == q || (p - q).abs() < 1e-6, "{p} {q}");
                    }
                }
            }
        }
    }

    #[test]
    fn exact_base_b_path_at_one() {
        let cfg = PrecisionConfig::new(64, 10, 2f64.powi(-20)).unwrap();
        let x = EnclosedReal::from_bounds(Float::with_val(64, 1.0 - 2f64.powi(-40)), Float::with_val(64, 1)).unwrap();
        let t = times_b_exact(2, &x, 10, cfg.resolve_log2(), false).unwrap();
        assert!(t.digits.symbols.is_empty());
        assert!(matches!(t.digits.stop, Some(StopReason::Straddle { step: 0, .. })));
        let slow = engine(&MapSpec::TimesB(2), x, 10, &cfg);
        assert!(matches!(slow.digits.stop, Some(StopReason::Straddle { step: 0, .. })));
    }

    fn cfg(bits: u32) -> PrecisionConfig {
        PrecisionConfig::new(bits, 100, 2f64.powi(-20)).unwrap()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn grammar_round_trips() {
        for s in [
            "timesb:2",
            "timesb:10",
            "beta:golden",
            "beta:1.9",
            "beta:3/2",
            "linmod1:2.5,0.25",
            "linmod1:1.5,0",
            "gauss",
            "rotation:sqrt2m1",
            "rotation:0.3",
        ] {
            let m = MapSpec::parse(s).unwrap();
            assert_eq!(m.to_string(), s);
            assert_eq!(MapSpec::parse(&m.to_string()).unwrap(), m);
        }
    }

    #[test]
    fn grammar_rejections() {
        assert!(MapSpec::parse("timesb:1").is_err());
        assert!(MapSpec::parse("beta:2").is_err());
        assert!(MapSpec::parse("beta:2.0").is_err());
        assert!(MapSpec::parse("beta:0.9").is_err());
        assert!(MapSpec::parse("linmod1:1.5,0.2").is_err());
        assert!(MapSpec::parse("linmod1:2.5,1").is_err());
        assert!(MapSpec::parse("tent").is_err());
        assert!(MapSpec::parse("gauss:3").is_err());
        assert!(MapSpec::parse("rotation:0").is_err());
    }

    #[test]
    fn partitions() {
        let p = partition_cells(&MapSpec::TimesB(2), None, 128).unwrap();
        assert_eq!(p.cells.len(), 2);
        assert_eq!(p.cells[0].lo, Endpoint::Exact(q(0, 1)));
        assert_eq!(p.cells[0].hi, Endpoint::Exact(q(1, 2)));
        assert_eq!(p.cells[1].hi, Endpoint::Exact(q(1, 1)));
        assert!(p.cells[0].lo_closed && !p.cells[0].hi_closed);

        let g = partition_cells(&MapSpec::Gauss, Some(3), 128).unwrap();
        let ends: Vec<_> = g
            .cells
            .iter()
            .map(|c| (c.symbol, c.lo.clone(), c.hi.clone(), c.lo_closed, c.hi_closed))
            .collect();
        assert_eq!(
            ends,
            vec![
                (1, Endpoint::Exact(q(1, 2)), Endpoint::Exact(q(1, 1)), false, true),
                (2, Endpoint::Exact(q(1, 3)), Endpoint::Exact(q(1, 2)), false, true),
                (3, Endpoint::Exact(q(1, 4)), Endpoint::Exact(q(1, 3)), false, true),
            ]
        );
        assert!(partition_cells(&MapSpec::Gauss, None, 128).is_err());

        let b = partition_cells(&MapSpec::golden(), None, 128).unwrap();
        assert_eq!(b.cells.len(), 2);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        assert!((b.cells[0].hi.to_f64() - inv_phi).abs() < 1e-15);
        assert_eq!(b.cells[1].hi.to_f64(), 1.0);

        let r = partition_cells(&MapSpec::parse("rotation:sqrt2m1").unwrap(), None, 128).unwrap();
        assert!(!r.generating);
        assert_eq!(r.cells.len(), 1);

        let lm = partition_cells(&MapSpec::parse("linmod1:2.5,0.25").unwrap(), None, 128).unwrap();
        // floor(2.75) = 2 -> cells 0,1,2 with ends (1-γ)/β = 0.3, (2-γ)/β = 0.7
        assert_eq!(lm.cells.len(), 3);
        assert_eq!(lm.cells[0].hi, Endpoint::Exact(q(3, 10)));
        assert_eq!(lm.cells[1].hi, Endpoint::Exact(q(7, 10)));
    }

    #[test]
    fn alphabet_sizes() {
        assert_eq!(MapSpec::TimesB(10).max_symbol(), Some(9));
        assert_eq!(MapSpec::golden().max_symbol(), Some(1));
        assert_eq!(MapSpec::parse("beta:1.9").unwrap().max_symbol(), Some(1));
        assert_eq!(MapSpec::parse("beta:2.5").unwrap().max_symbol(), Some(2));
        assert_eq!(MapSpec::parse("linmod1:3,0").unwrap().max_symbol(), Some(2));
        assert_eq!(MapSpec::parse("linmod1:2.5,0.5").unwrap().max_symbol(), Some(2));
        assert_eq!(MapSpec::Gauss.max_symbol(), None);
    }

    #[test]
    fn apply_examples() {
        let c = cfg(128);
        let x = make_enclosure(q(1, 3), &c).unwrap();
        let t2 = MapSpec::TimesB(2).prepare(128);
        let y = apply(&t2, &x).unwrap();
        assert!(!y.straddled);
        assert!(y.value.contains_rational(&q(2, 3)));

        // √2−1 is fixed by the Gauss map
        let s = RealParam::Sqrt2Minus1.enclose(256);
        let g = MapSpec::Gauss.prepare(256);
        let gy = apply(&g, &s).unwrap();
        assert!(gy.value.hull(&s).width_log2() < -240.0);
        let lhs = gy.value.midpoint_f64();
        assert!((lhs - 1.0 / (2.0 + lhs)).abs() < 1e-15);

        let rot = MapSpec::parse("rotation:sqrt2m1").unwrap().prepare(128);
        let r = apply(&rot, &x).unwrap();
        let expect = 1.0 / 3.0 + 2f64.sqrt() - 1.0;
        assert!((r.value.midpoint_f64() - expect).abs() < 1e-15);
        assert!(r.value.width_log2() <= x.width_log2() + 1.01);
    }

    #[test]
    fn apply_gauss_at_zero_and_straddle() {
        let g = MapSpec::Gauss.prepare(64);
        let z = make_enclosure("0", &cfg(64)).unwrap();
        assert_eq!(apply(&g, &z), Err(Error::GaussAtZero));
        let near_half = EnclosedReal::from_bounds(
            Float::with_val(64, 0.5) - Float::with_val(64, 2f64.powi(-65)),
            Float::with_val(64, 0.5) + Float::with_val(64, 2f64.powi(-65)),
        )
        .unwrap();
        let t2 = MapSpec::TimesB(2).prepare(64);
        assert!(apply(&t2, &near_half).unwrap().straddled);
        assert!(matches!(digit(&t2, &near_half), Err(Error::Straddle { .. })));
    }

    #[test]
    fn digit_examples() {
        let c = cfg(128);
        let third = make_enclosure(q(1, 3), &c).unwrap();
        assert_eq!(digit(&MapSpec::TimesB(2).prepare(128), &third).unwrap(), 0);
        let seven = make_enclosure("0.7", &c).unwrap();
        assert_eq!(digit(&MapSpec::Gauss.prepare(128), &seven).unwrap(), 1);
        // exact boundary points follow the half-open conventions
        let half = make_enclosure("0.5", &c).unwrap();
        assert_eq!(digit(&MapSpec::TimesB(2).prepare(128), &half).unwrap(), 1);
        assert_eq!(digit(&MapSpec::Gauss.prepare(128), &half).unwrap(), 2);
        let one = make_enclosure("1", &c).unwrap();
        assert_eq!(digit(&MapSpec::Gauss.prepare(128), &one).unwrap(), 1);
    }

    #[test]
    fn orbit_digit_examples() {
        let c = cfg(256);
        let third = make_enclosure(q(1, 3), &c).unwrap();
        let d = orbit_digits(&MapSpec::TimesB(2), third, 8, &c);
        assert_eq!(d.symbols, vec![0, 1, 0, 1, 0, 1, 0, 1]);
        assert!(d.is_complete());

        let golden_conj = RealParam::Golden.enclose(512).sub_integer(1, 512);
        let d = orbit_digits(&MapSpec::Gauss, golden_conj, 6, &c);
        assert_eq!(d.symbols, vec![1; 6]);

        let silver = RealParam::Sqrt2Minus1.enclose(512);
        let d = orbit_digits(&MapSpec::Gauss, silver, 5, &c);
        assert_eq!(d.symbols, vec![2; 5]);
    }

    #[test]
    fn orbit_stops_honestly() {
        let c = PrecisionConfig::new(64, 1000, 2f64.powi(-10)).unwrap();
        let x = crate::interval::sample(3, 64);
        let d = orbit_digits(&MapSpec::TimesB(2), x, 1000, &c);
        assert!(d.valid_len() >= 50 && d.valid_len() <= 64, "{}", d.valid_len());
        assert!(matches!(
            d.stop,
            Some(StopReason::PrecisionExhausted { .. }) | Some(StopReason::Straddle { .. })
        ));

        // rational input: the CF terminates
        let r = make_enclosure(q(1, 2), &cfg(128)).unwrap();
        let d = orbit_digits(&MapSpec::Gauss, r, 10, &cfg(128));
        assert_eq!(d.symbols, vec![2]);
        assert!(matches!(d.stop, Some(StopReason::Terminated { step: 1 })));

        // 3/7 = [0; 2, 3]: the inexact image of 1/3 meets the boundary at 1/3
        let r = make_enclosure(q(3, 7), &cfg(128)).unwrap();
        let d = orbit_digits(&MapSpec::Gauss, r, 10, &cfg(128));
        assert_eq!(d.symbols, vec![2]);
        assert!(matches!(d.stop, Some(StopReason::Straddle { step: 1, .. })));
    }

    #[test]
    fn beta_digits_follow_the_greedy_rule() {
        // d_n = floor(β T^{n-1} x), checked in f64 along a short certified orbit
        let c = cfg(512);
        let map = MapSpec::parse("beta:1.9").unwrap();
        let x = crate::interval::sample(11, 512);
        let mut orbit = Orbit::new(&map, x, &c);
        for _ in 0..40 {
            let before = orbit.point().midpoint_f64();
            let d = orbit.advance().unwrap();
            assert_eq!(d, (1.9 * before).floor() as u64);
            assert!(d <= 1);
        }
    }

    #[test]
    fn golden_digits_never_contain_adjacent_ones() {
        let c = cfg(2048);
        let x = crate::interval::sample(5, 2048);
        let d = orbit_digits(&MapSpec::golden(), x, 2000, &c);
        assert!(d.valid_len() > 1500);
        assert!(d.symbols.windows(2).all(|w| w != [1, 1]));
    }

    #[test]
    fn entropies() {
        assert!((MapSpec::TimesB(2).entropy() - std::f64::consts::LN_2).abs() < 1e-16);
        assert!((gauss_entropy() - 2.373138220831251).abs() < 1e-14);
        assert!((levy_constant() - 1.1865691104156255).abs() < 1e-14);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((MapSpec::golden().entropy() - phi.ln()).abs() < 1e-15);
    }
}
