//! Directed-rounding enclosures of points of the unit interval.
//!
//! Every orbit in this crate runs on [`EnclosedReal`]: a pair of MPFR floats
//! `lo <= x <= hi`, where lower endpoints are always rounded toward −∞ and
//! upper endpoints toward +∞. A digit is only ever read off an enclosure that
//! lies entirely inside one partition cell, so every emitted digit is a
//! digit of every real the enclosure contains.

use std::cmp::Ordering;
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::float::Round;
use rug::integer::Order;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest working precision accepted anywhere in the crate.
pub const MIN_BITS: u32 = 64;

/// Bits kept below the enclosure width when [`EnclosedReal::tighten`] drops
/// precision. Rounding then inflates the width by at most a factor
/// `1 + 2^-(ORBIT_GUARD_BITS-1)` per step.
pub const ORBIT_GUARD_BITS: u32 = 32;

/// Multiplicative safety margin applied by [`required_bits`].
pub const BUDGET_MARGIN: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    /// Working mantissa precision of a fresh enclosure.
    pub bits: u32,
    /// Requested orbit length.
    pub max_steps: usize,
    /// Widest enclosure from which a digit is still accepted.
    pub resolve_width: f64,
}

impl PrecisionConfig {
    pub fn new(bits: u32, max_steps: usize, resolve_width: f64) -> Result<Self> {
        if bits < MIN_BITS {
            return Err(Error::InvalidManifest(format!(
                "precision of {bits} bits is below the minimum of {MIN_BITS}"
            )));
        }
        if !(resolve_width > 0.0 && resolve_width < 1.0) {
            return Err(Error::InvalidManifest(format!(
                "resolve width {resolve_width} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            bits,
            max_steps,
            resolve_width,
        })
    }

    /// Budget sized by [`required_bits`] for `max_steps` steps of the worst map.
    pub fn auto<M: ExpansionRate>(maps: &[M], max_steps: usize, resolve_width: f64) -> Result<Self> {
        Self::new(required_bits(maps, max_steps, resolve_width), max_steps, resolve_width)
    }

    pub fn resolve_log2(&self) -> f64 {
        self.resolve_width.log2()
    }
}

/// Per-step growth of enclosure width, in bits, used for precision budgets.
pub trait ExpansionRate {
    fn bits_per_step(&self) -> f64;
}

/// Precision such that after `n_steps` of the fastest-expanding map the
/// enclosure width is still below `resolve_width`, with a 25% margin.
pub fn required_bits<M: ExpansionRate>(maps: &[M], n_steps: usize, resolve_width: f64) -> u32 {
    let rate = maps
        .iter()
        .map(ExpansionRate::bits_per_step)
        .fold(0.0_f64, f64::max);
    let resolve_bits = (-resolve_width.log2()).max(0.0);
    let base = rate * n_steps as f64 + resolve_bits;
    let bits = (BUDGET_MARGIN * base).ceil();
    (bits as u32).max(MIN_BITS)
}

/// A closed interval `[lo, hi]` with outward-rounded MPFR endpoints.
#[derive(Clone, PartialEq)]
pub struct EnclosedReal {
    lo: Float,
    hi: Float,
}

impl fmt::Debug for EnclosedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "EnclosedReal[{:.17e}, {:.17e}; 2^{:.1}, {} bits]",
            self.lo.to_f64(),
            self.hi.to_f64(),
            self.width_log2(),
            self.prec()
        )
    }
}

impl EnclosedReal {
    /// Builds an enclosure from endpoints that are already outward rounded.
    pub fn from_bounds(lo: Float, hi: Float) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::OutOfRange(format!(
                "[{}, {}]",
                lo.to_f64(),
                hi.to_f64()
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Degenerate enclosure of an exactly representable float.
    pub fn exact(value: Float) -> Self {
        Self {
            lo: value.clone(),
            hi: value,
        }
    }

    /// Tightest `bits`-bit enclosure of an exact rational.
    pub fn from_rational(value: &Rational, bits: u32) -> Self {
        let (lo, _) = Float::with_val_round(bits, value, Round::Down);
        let (hi, _) = Float::with_val_round(bits, value, Round::Up);
        Self { lo, hi }
    }

    pub fn from_integer(value: u64, bits: u32) -> Self {
        let (lo, _) = Float::with_val_round(bits, value, Round::Down);
        let (hi, _) = Float::with_val_round(bits, value, Round::Up);
        Self { lo, hi }
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Upper bound on `hi - lo`.
    pub fn width(&self) -> Float {
        let prec = self.prec().max(MIN_BITS);
        Float::with_val_round(prec, &self.hi - &self.lo, Round::Up).0
    }

    /// `log2` of the width; `-inf` for a point.
    pub fn width_log2(&self) -> f64 {
        if self.is_point() {
            return f64::NEG_INFINITY;
        }
        let w = Float::with_val_round(64, &self.hi - &self.lo, Round::Up).0;
        w.log2().to_f64()
    }

    /// Midpoint rounded to `f64`.
    pub fn midpoint_f64(&self) -> f64 {
        let prec = self.prec() + 1;
        let mid = Float::with_val(prec, &self.lo + &self.hi) / 2u32;
        mid.to_f64()
    }

    pub fn contains_rational(&self, value: &Rational) -> bool {
        self.lo.partial_cmp(value).map_or(false, Ordering::is_le)
            && self.hi.partial_cmp(value).map_or(false, Ordering::is_ge)
    }

    pub fn contains(&self, other: &EnclosedReal) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &EnclosedReal) -> EnclosedReal {
        let lo = if self.lo <= other.lo { &self.lo } else { &other.lo };
        let hi = if self.hi >= other.hi { &self.hi } else { &other.hi };
        EnclosedReal {
            lo: lo.clone(),
            hi: hi.clone(),
        }
    }

    /// Certainly `self < other` for every pair of enclosed reals.
    pub fn certainly_lt(&self, other: &EnclosedReal) -> bool {
        self.hi < other.lo
    }

    /// Certainly `self <= other`.
    pub fn certainly_le(&self, other: &EnclosedReal) -> bool {
        self.hi <= other.lo
    }

    pub fn add(&self, other: &EnclosedReal, prec: u32) -> EnclosedReal {
        EnclosedReal {
            lo: Float::with_val_round(prec, &self.lo + &other.lo, Round::Down).0,
            hi: Float::with_val_round(prec, &self.hi + &other.hi, Round::Up).0,
        }
    }

    pub fn sub(&self, other: &EnclosedReal, prec: u32) -> EnclosedReal {
        EnclosedReal {
            lo: Float::with_val_round(prec, &self.lo - &other.hi, Round::Down).0,
            hi: Float::with_val_round(prec, &self.hi - &other.lo, Round::Up).0,
        }
    }

    pub fn add_integer(&self, k: u64, prec: u32) -> EnclosedReal {
        EnclosedReal {
            lo: Float::with_val_round(prec, &self.lo + k, Round::Down).0,
            hi: Float::with_val_round(prec, &self.hi + k, Round::Up).0,
        }
    }

    pub fn sub_integer(&self, k: u64, prec: u32) -> EnclosedReal {
        EnclosedReal {
            lo: Float::with_val_round(prec, &self.lo - k, Round::Down).0,
            hi: Float::with_val_round(prec, &self.hi - k, Round::Up).0,
        }
    }

    pub fn mul_integer(&self, k: u64, prec: u32) -> EnclosedReal {
        EnclosedReal {
            lo: Float::with_val_round(prec, &self.lo * k, Round::Down).0,
            hi: Float::with_val_round(prec, &self.hi * k, Round::Up).0,
        }
    }

    pub fn div_integer(&self, k: u64, prec: u32) -> EnclosedReal {
        assert!(k > 0, "division by zero");
        EnclosedReal {
            lo: Float::with_val_round(prec, &self.lo / k, Round::Down).0,
            hi: Float::with_val_round(prec, &self.hi / k, Round::Up).0,
        }
    }

    /// Interval product; handles every sign combination.
    pub fn mul(&self, other: &EnclosedReal, prec: u32) -> EnclosedReal {
        if self.lo.is_sign_positive() && other.lo.is_sign_positive() {
            return EnclosedReal {
                lo: Float::with_val_round(prec, &self.lo * &other.lo, Round::Down).0,
                hi: Float::with_val_round(prec, &self.hi * &other.hi, Round::Up).0,
            };
        }
        let pairs = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let d = Float::with_val_round(prec, a * b, Round::Down).0;
            let u = Float::with_val_round(prec, a * b, Round::Up).0;
            if lo.as_ref().map_or(true, |l| d < *l) {
                lo = Some(d);
            }
            if hi.as_ref().map_or(true, |h| u > *h) {
                hi = Some(u);
            }
        }
        EnclosedReal {
            lo: lo.expect("four products"),
            hi: hi.expect("four products"),
        }
    }

    /// `1/x` for an enclosure strictly above zero.
    pub fn recip(&self, prec: u32) -> Option<EnclosedReal> {
        if self.lo <= 0 {
            return None;
        }
        Some(EnclosedReal {
            lo: Float::with_val_round(prec, 1u32 / &self.hi, Round::Down).0,
            hi: Float::with_val_round(prec, 1u32 / &self.lo, Round::Up).0,
        })
    }

    pub fn div(&self, other: &EnclosedReal, prec: u32) -> Option<EnclosedReal> {
        let r = other.recip(prec + 16)?;
        Some(self.mul(&r, prec))
    }

    /// Enclosure of the real square root, for nonnegative enclosures.
    pub fn sqrt(&self, prec: u32) -> Option<EnclosedReal> {
        if self.lo.is_sign_negative() && !self.lo.is_zero() {
            return None;
        }
        Some(EnclosedReal {
            lo: Float::with_val_round(prec, self.lo.sqrt_ref(), Round::Down).0,
            hi: Float::with_val_round(prec, self.hi.sqrt_ref(), Round::Up).0,
        })
    }

    /// Floors of the two endpoints, when both fit in `u64`.
    pub fn floor_bounds(&self) -> Option<(u64, u64)> {
        let lo = floor_u64(&self.lo)?;
        let hi = floor_u64(&self.hi)?;
        Some((lo, hi))
    }

    /// Componentwise max of two enclosures.
    pub fn max(&self, other: &EnclosedReal) -> EnclosedReal {
        EnclosedReal {
            lo: if self.lo >= other.lo { self.lo.clone() } else { other.lo.clone() },
            hi: if self.hi >= other.hi { self.hi.clone() } else { other.hi.clone() },
        }
    }

    /// Componentwise min of two enclosures.
    pub fn min(&self, other: &EnclosedReal) -> EnclosedReal {
        EnclosedReal {
            lo: if self.lo <= other.lo { self.lo.clone() } else { other.lo.clone() },
            hi: if self.hi <= other.hi { self.hi.clone() } else { other.hi.clone() },
        }
    }

    /// Clamp both endpoints into `[0, 1]`: an enclosure of `min(1, max(0, x))`.
    pub fn clamp_unit(mut self) -> EnclosedReal {
        if self.lo.is_sign_negative() {
            self.lo = Float::with_val(self.lo.prec(), 0);
        }
        if self.hi.is_sign_negative() {
            self.hi = Float::with_val(self.hi.prec(), 0);
        }
        if self.hi > 1 {
            self.hi = Float::with_val(self.hi.prec(), 1);
        }
        if self.lo > 1 {
            self.lo = Float::with_val(self.lo.prec(), 1);
        }
        self
    }

    /// Drops mantissa bits that sit far below the current width. Endpoints
    /// are re-rounded outward, so containment is preserved.
    pub fn tighten(&mut self, guard: u32) {
        if self.is_point() || self.hi.is_zero() {
            return;
        }
        let w = Float::with_val_round(64, &self.hi - &self.lo, Round::Up).0;
        let (Some(wexp), Some(hexp)) = (w.get_exp(), self.hi.get_exp()) else {
            return;
        };
        let needed = (i64::from(hexp) - i64::from(wexp) + i64::from(guard)).max(i64::from(MIN_BITS));
        let needed = u32::try_from(needed).unwrap_or(u32::MAX);
        if needed < self.lo.prec() {
            self.lo.set_prec_round(needed, Round::Down);
        }
        if needed < self.hi.prec() {
            self.hi.set_prec_round(needed, Round::Up);
        }
    }
}

fn floor_u64(x: &Float) -> Option<u64> {
    if x.is_sign_negative() && !x.is_zero() {
        return None;
    }
    if x.is_zero() {
        return Some(0);
    }
    if *x < (1u64 << 53) as f64 {
        return Some(x.to_f64_round(Round::Down).floor() as u64);
    }
    let (int, _) = x.to_integer_round(Round::Down)?;
    int.to_u64()
}

/// Parses `"p/q"`, a decimal such as `"0.125"`, or an integer into an exact
/// rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let err = || Error::Parse {
        what: "rational",
        input: text.to_string(),
    };
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_decimal(num.trim()).ok_or_else(err)?;
        let den = parse_decimal(den.trim()).ok_or_else(err)?;
        if den == 0 {
            return Err(err());
        }
        return Ok(num / den);
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = Integer::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10).ok()?;
    let denom = Integer::from(Integer::u_pow_u(10, frac_part.len() as u32));
    let mut q = Rational::from((numer, denom));
    if neg {
        q = -q;
    }
    Some(q)
}

/// Exact value to enclose: a rational or a decimal/fraction string.
#[derive(Debug, Clone)]
pub enum ExactValue {
    Rational(Rational),
    Text(String),
}

impl From<Rational> for ExactValue {
    fn from(q: Rational) -> Self {
        ExactValue::Rational(q)
    }
}

impl From<&str> for ExactValue {
    fn from(s: &str) -> Self {
        ExactValue::Text(s.to_string())
    }
}

/// Enclosure of an exact value in `[0, 1]` at `cfg.bits` bits.
pub fn make_enclosure(value: impl Into<ExactValue>, cfg: &PrecisionConfig) -> Result<EnclosedReal> {
    let q = match value.into() {
        ExactValue::Rational(q) => q,
        ExactValue::Text(s) => parse_rational(&s)?,
    };
    if q < 0 || q > 1 {
        return Err(Error::OutOfRange(q.to_string()));
    }
    Ok(EnclosedReal::from_rational(&q, cfg.bits))
}

/// Seeded pseudo-random point of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleSpec {
    pub seed: u64,
    pub bits: u32,
}

impl SampleSpec {
    pub fn new(seed: u64, bits: u32) -> Self {
        Self { seed, bits }
    }
}

/// A `bits`-bit random dyadic `v` read as the enclosure
/// `[v - 2^-bits, v + 2^-bits] ∩ [0, 1]`.
pub fn sample_point(spec: SampleSpec) -> EnclosedReal {
    let bits = spec.bits.max(MIN_BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let words = bits.div_ceil(64) as usize;
    let mut limbs = vec![0u64; words];
    for limb in limbs.iter_mut() {
        *limb = rng.next_u64();
    }
    let spare = words as u32 * 64 - bits;
    if spare > 0 {
        let last = limbs.last_mut().expect("at least one limb");
        *last >>= spare;
    }
    let m = Integer::from_digits(&limbs, Order::Lsf);
    let prec = bits + 2;
    let lo_int = if m == 0 { Integer::new() } else { Integer::from(&m - 1u32) };
    let hi_int = Integer::from(&m + 1u32);
    let lo = Float::with_val(prec, lo_int) >> bits;
    let mut hi = Float::with_val(prec, hi_int) >> bits;
    if hi > 1 {
        hi = Float::with_val(prec, 1);
    }
    EnclosedReal { lo, hi }
}

/// Draws the sample for `seed` at `bits` bits; shorthand for
/// `sample_point(SampleSpec::new(seed, bits))`.
pub fn sample(seed: u64, bits: u32) -> EnclosedReal {
    sample_point(SampleSpec::new(seed, bits))
}
