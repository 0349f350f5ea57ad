//! Cylinder sets `C(S) = {x : r_1(x) … r_k(x) = S}`.
//!
//! Affine cylinders come from backward preimage refinement
//! `J ← v_d(J ∩ T(A_d))`, exact in rationals when β and γ are rational and
//! with enclosures otherwise. Gauss cylinders are read off the convergents.
//! [`enumerate_cylinders`] instead walks forward, refining the partition
//! cell by cell, which gives an independent route to the same intervals.

use rug::float::{Constant, Special};
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::EnclosedReal;
use crate::maps::{affine_cell, Endpoint, MapSpec, Symbol};
use crate::measures::{gauss_measure, MeasureSpec};

/// Cylinders whose enclosure cannot rule out a point interval but whose
/// width is below `2^(-bits/2)` are treated as Lebesgue-null.
pub fn null_width_log2(bits: u32) -> f64 {
    -f64::from(bits) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum CylinderBounds {
    /// Exact endpoints with closure flags.
    Exact {
        lo: Rational,
        hi: Rational,
        lo_closed: bool,
        hi_closed: bool,
    },
    Enclosed {
        lo: EnclosedReal,
        hi: EnclosedReal,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    NonEmpty,
    Empty,
    /// The enclosures cannot decide; the cylinder is at most this wide.
    Ambiguous { width_upper_log2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub map: MapSpec,
    pub symbols: Vec<Symbol>,
    pub bounds: CylinderBounds,
    pub admissibility: Admissibility,
    pub bits: u32,
}

impl Cylinder {
    pub fn rank(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.admissibility == Admissibility::Empty
    }

    /// Empty, or ambiguous and narrower than [`null_width_log2`].
    pub fn is_null(&self) -> bool {
        match self.admissibility {
            Admissibility::NonEmpty => false,
            Admissibility::Empty => true,
            Admissibility::Ambiguous { width_upper_log2 } => {
                width_upper_log2 < null_width_log2(self.bits)
            }
        }
    }

    pub fn lo_f64(&self) -> f64 {
        match &self.bounds {
            CylinderBounds::Exact { lo, .. } => lo.to_f64(),
            CylinderBounds::Enclosed { lo, .. } => lo.midpoint_f64(),
        }
    }

    pub fn hi_f64(&self) -> f64 {
        match &self.bounds {
            CylinderBounds::Exact { hi, .. } => hi.to_f64(),
            CylinderBounds::Enclosed { hi, .. } => hi.midpoint_f64(),
        }
    }

    pub fn lebesgue_exact(&self) -> Option<Rational> {
        match &self.bounds {
            CylinderBounds::Exact { lo, hi, .. } if !self.is_empty() => Some(Rational::from(hi - lo)),
            CylinderBounds::Exact { .. } => Some(Rational::new()),
            CylinderBounds::Enclosed { .. } => None,
        }
    }

    /// Enclosure of the length, clamped at 0.
    pub fn length_enclosure(&self) -> EnclosedReal {
        if self.is_empty() {
            return EnclosedReal::from_integer(0, self.bits);
        }
        match &self.bounds {
            CylinderBounds::Exact { lo, hi, .. } => {
                EnclosedReal::from_rational(&Rational::from(hi - lo), self.bits)
            }
            CylinderBounds::Enclosed { lo, hi } => {
                let w = hi.sub(lo, self.bits);
                w.max(&EnclosedReal::from_integer(0, self.bits))
            }
        }
    }

    pub fn lebesgue(&self) -> f64 {
        if self.is_null() {
            return 0.0;
        }
        match self.lebesgue_exact() {
            Some(q) => q.to_f64(),
            None => self.length_enclosure().midpoint_f64(),
        }
    }

    /// `ln λ(C)` without underflow.
    pub fn log_lebesgue(&self) -> f64 {
        if self.is_null() {
            return f64::NEG_INFINITY;
        }
        match self.lebesgue_exact() {
            Some(q) => rational_ln(&q),
            None => {
                let w = self.length_enclosure();
                let prec = w.prec();
                let mid = Float::with_val(prec, w.lo() + w.hi()) / 2u32;
                mid.ln().to_f64()
            }
        }
    }

    /// The enclosure `x` meets this cylinder's closure.
    pub fn meets(&self, x: &EnclosedReal) -> bool {
        match &self.bounds {
            CylinderBounds::Exact { lo, hi, .. } => x.hi() >= lo && x.lo() <= hi,
            CylinderBounds::Enclosed { lo, hi } => x.hi() >= lo.lo() && x.lo() <= hi.hi(),
        }
    }
}

/// `ln q` for a positive rational of any size.
pub fn rational_ln(q: &Rational) -> f64 {
    let prec = 128;
    let n = Float::with_val(prec, q.numer()).ln();
    let d = Float::with_val(prec, q.denom()).ln();
    (n - d).to_f64()
}

/// The `n`-th convergent `p_n/q_n` of `[0; c_1, c_2, …]` with its
/// predecessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvergentPair {
    pub n: usize,
    pub p: Integer,
    pub q: Integer,
    pub p_prev: Integer,
    pub q_prev: Integer,
}

impl ConvergentPair {
    /// `n = 0`: `p_0/q_0 = 0/1`, predecessor `1/0`.
    pub fn seed() -> Self {
        Self {
            n: 0,
            p: Integer::new(),
            q: Integer::from(1),
            p_prev: Integer::from(1),
            q_prev: Integer::new(),
        }
    }

    pub fn push(&mut self, c: Symbol) {
        let p = Integer::from(&self.p * c) + &self.p_prev;
        let q = Integer::from(&self.q * c) + &self.q_prev;
        self.p_prev = std::mem::replace(&mut self.p, p);
        self.q_prev = std::mem::replace(&mut self.q, q);
        self.n += 1;
    }

    pub fn value(&self) -> Rational {
        Rational::from((self.p.clone(), self.q.clone()))
    }
}

/// Convergents after each digit.
pub fn convergents(digits: &[Symbol]) -> impl Iterator<Item = ConvergentPair> + '_ {
    let mut c = ConvergentPair::seed();
    digits.iter().map(move |&d| {
        c.push(d);
        c.clone()
    })
}

fn last_convergent(digits: &[Symbol]) -> ConvergentPair {
    let mut c = ConvergentPair::seed();
    for &d in digits {
        c.push(d);
    }
    c
}

/// `1/(q_n (q_n + q_{n−1}))`.
pub fn cf_cylinder_length(symbols: &[Symbol]) -> Result<Rational> {
    if symbols.is_empty() || symbols.contains(&0) {
        return Err(Error::InvalidSymbol {
            symbol: 0,
            map: "gauss".into(),
        });
    }
    let c = last_convergent(symbols);
    let den = Integer::from(&c.q + &c.q_prev) * &c.q;
    Ok(Rational::from((Integer::from(1), den)))
}

fn validate(map: &MapSpec, symbols: &[Symbol]) -> Result<()> {
    if let MapSpec::Rotation(_) = map {
        return Err(Error::Unsupported("cylinders of a rotation".into()));
    }
    match symbols.iter().find(|&&s| !map.is_valid_symbol(s)) {
        Some(&s) => Err(Error::InvalidSymbol {
            symbol: s,
            map: map.to_string(),
        }),
        None => Ok(()),
    }
}

/// The cylinder of `symbols`, with `bits` of working precision for maps with
/// irrational parameters. Inadmissible β-strings give an empty cylinder.
pub fn cylinder_interval(map: &MapSpec, symbols: &[Symbol], bits: u32) -> Result<Cylinder> {
    validate(map, symbols)?;
    let (bounds, admissibility) = match map {
        MapSpec::Gauss => gauss_bounds(symbols),
        _ => match map.affine_exact() {
            Some((beta, gamma)) => exact_affine_bounds(map, &beta, &gamma, symbols),
            None => enclosed_affine_bounds(map, symbols, bits),
        },
    };
    Ok(Cylinder {
        map: map.clone(),
        symbols: symbols.to_vec(),
        bounds,
        admissibility,
        bits,
    })
}

fn gauss_bounds(symbols: &[Symbol]) -> (CylinderBounds, Admissibility) {
    if symbols.is_empty() {
        return (
            CylinderBounds::Exact {
                lo: Rational::new(),
                hi: Rational::from(1),
                lo_closed: true,
                hi_closed: true,
            },
            Admissibility::NonEmpty,
        );
    }
    let c = last_convergent(symbols);
    // x = [0; c_1, …, c_k + t], t ∈ [0, 1): t = 0 gives p_k/q_k (included)
    let at_zero = c.value();
    let at_one = Rational::from((
        Integer::from(&c.p + &c.p_prev),
        Integer::from(&c.q + &c.q_prev),
    ));
    let bounds = if symbols.len() % 2 == 0 {
        CylinderBounds::Exact {
            lo: at_zero,
            hi: at_one,
            lo_closed: true,
            hi_closed: false,
        }
    } else {
        CylinderBounds::Exact {
            lo: at_one,
            hi: at_zero,
            lo_closed: false,
            hi_closed: true,
        }
    };
    (bounds, Admissibility::NonEmpty)
}

/// Image `T(A_d)` of an affine cell, exact.
fn exact_image(beta: &Rational, gamma: &Rational, lo: &Rational, hi: &Rational, d: Symbol) -> (Rational, Rational) {
    let f = |x: &Rational| Rational::from(beta * x) + gamma - Rational::from(d);
    (f(lo), f(hi))
}

fn exact_affine_bounds(
    map: &MapSpec,
    beta: &Rational,
    gamma: &Rational,
    symbols: &[Symbol],
) -> (CylinderBounds, Admissibility) {
    let mut lo = Rational::new();
    let mut hi = Rational::from(1);
    for &d in symbols.iter().rev() {
        let (Endpoint::Exact(a), Endpoint::Exact(b)) = affine_cell(map, d, 64) else {
            unreachable!("rational parameters give exact cells");
        };
        let (ia, ib) = exact_image(beta, gamma, &a, &b, d);
        if ia > lo {
            lo = ia;
        }
        if ib < hi {
            hi = ib;
        }
        if lo >= hi {
            return (
                CylinderBounds::Exact {
                    lo: lo.clone(),
                    hi: lo,
                    lo_closed: true,
                    hi_closed: false,
                },
                Admissibility::Empty,
            );
        }
        let v = |y: &Rational| Rational::from(y + Rational::from(d) - gamma) / beta;
        lo = v(&lo);
        hi = v(&hi);
    }
    (
        CylinderBounds::Exact {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        },
        Admissibility::NonEmpty,
    )
}

struct EnclosedAffine {
    beta: EnclosedReal,
    gamma: EnclosedReal,
    prec: u32,
}

impl EnclosedAffine {
    fn new(map: &MapSpec, bits: u32) -> Self {
        let prec = bits + 32;
        let (beta, gamma) = map.affine().expect("affine map");
        Self {
            beta: beta.enclose(prec),
            gamma: gamma.map_or_else(|| EnclosedReal::from_integer(0, prec), |g| g.enclose(prec)),
            prec,
        }
    }

    fn forward(&self, x: &EnclosedReal, d: Symbol) -> EnclosedReal {
        x.mul(&self.beta, self.prec)
            .add(&self.gamma, self.prec)
            .sub_integer(d, self.prec)
    }

    fn inverse(&self, y: &EnclosedReal, d: Symbol) -> EnclosedReal {
        y.add_integer(d, self.prec)
            .sub(&self.gamma, self.prec)
            .div(&self.beta, self.prec)
            .expect("beta > 0")
    }

    fn cell(&self, map: &MapSpec, d: Symbol) -> (EnclosedReal, EnclosedReal) {
        let (a, b) = affine_cell(map, d, self.prec);
        (a.enclose(self.prec), b.enclose(self.prec))
    }

    fn image(&self, map: &MapSpec, d: Symbol) -> (EnclosedReal, EnclosedReal) {
        let (a, b) = self.cell(map, d);
        (self.forward(&a, d).clamp_unit(), self.forward(&b, d).clamp_unit())
    }
}

fn classify(lo: &EnclosedReal, hi: &EnclosedReal) -> Admissibility {
    if hi.hi() <= lo.lo() {
        Admissibility::Empty
    } else if lo.hi() < hi.lo() {
        Admissibility::NonEmpty
    } else {
        let w = Float::with_val(64, hi.hi() - lo.lo());
        Admissibility::Ambiguous {
            width_upper_log2: w.log2().to_f64(),
        }
    }
}

fn enclosed_affine_bounds(map: &MapSpec, symbols: &[Symbol], bits: u32) -> (CylinderBounds, Admissibility) {
    let ctx = EnclosedAffine::new(map, bits);
    let mut lo = EnclosedReal::from_integer(0, ctx.prec);
    let mut hi = EnclosedReal::from_integer(1, ctx.prec);
    let mut worst = Admissibility::NonEmpty;
    for &d in symbols.iter().rev() {
        let (ia, ib) = ctx.image(map, d);
        lo = lo.max(&ia);
        hi = hi.min(&ib);
        match classify(&lo, &hi) {
            Admissibility::Empty => {
                return (CylinderBounds::Enclosed { lo: lo.clone(), hi: lo }, Admissibility::Empty)
            }
            a @ Admissibility::Ambiguous { .. } => worst = a,
            Admissibility::NonEmpty => {}
        }
        lo = ctx.inverse(&lo, d);
        hi = ctx.inverse(&hi, d);
    }
    let adm = match (classify(&lo, &hi), worst) {
        (Admissibility::NonEmpty, Admissibility::Ambiguous { .. }) => {
            // an earlier ambiguous step bounds the width through the contraction
            classify_ambiguous(&lo, &hi)
        }
        (a, _) => a,
    };
    (CylinderBounds::Enclosed { lo, hi }, adm)
}

fn classify_ambiguous(lo: &EnclosedReal, hi: &EnclosedReal) -> Admissibility {
    let w = Float::with_val(64, hi.hi() - lo.lo());
    Admissibility::Ambiguous {
        width_upper_log2: w.log2().to_f64(),
    }
}

/// All non-null rank-`n` cylinders of a finite-partition map, in increasing
/// order. Fails once more than `cap` cylinders would be produced.
pub fn enumerate_cylinders(map: &MapSpec, n: usize, bits: u32, cap: usize) -> Result<Vec<Cylinder>> {
    if map.max_symbol().is_none() {
        return Err(Error::Unsupported(format!(
            "exhaustive enumeration for {map} (countable or trivial partition)"
        )));
    }
    let out = match map.affine_exact() {
        Some((beta, gamma)) => enumerate_exact(map, &beta, &gamma, n, cap)?,
        None => enumerate_enclosed(map, n, bits, cap)?,
    };
    Ok(out
        .into_iter()
        .map(|(symbols, bounds, admissibility)| Cylinder {
            map: map.clone(),
            symbols,
            bounds,
            admissibility,
            bits,
        })
        .collect())
}

type Raw = (Vec<Symbol>, CylinderBounds, Admissibility);

fn enumerate_exact(map: &MapSpec, beta: &Rational, gamma: &Rational, n: usize, cap: usize) -> Result<Vec<Raw>> {
    let max = map.max_symbol().expect("finite alphabet");
    let cells: Vec<(Rational, Rational)> = (0..=max)
        .map(|d| match affine_cell(map, d, 64) {
            (Endpoint::Exact(a), Endpoint::Exact(b)) => (a, b),
            _ => unreachable!("rational parameters give exact cells"),
        })
        .collect();
    // (symbols, cylinder lo, image lo, image hi, slope β^k)
    let mut frontier = vec![(Vec::new(), Rational::new(), Rational::new(), Rational::from(1), Rational::from(1))];
    for _ in 0..n {
        let mut next = Vec::new();
        for (syms, jlo, ilo, ihi, scale) in frontier {
            for (d, (a, b)) in cells.iter().enumerate() {
                let plo = if *a > ilo { a.clone() } else { ilo.clone() };
                let phi = if *b < ihi { b.clone() } else { ihi.clone() };
                if plo >= phi {
                    continue;
                }
                let d = d as Symbol;
                let new_lo = Rational::from(&jlo + Rational::from(&plo - &ilo) / &scale);
                let (nlo, nhi) = exact_image(beta, gamma, &plo, &phi, d);
                let mut s = syms.clone();
                s.push(d);
                next.push((s, new_lo, nlo, nhi, Rational::from(&scale * beta)));
                if next.len() > cap {
                    return Err(Error::EnumerationGuard {
                        count: next.len() as u128,
                        cap: cap as u128,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(frontier
        .into_iter()
        .map(|(s, jlo, ilo, ihi, scale)| {
            let hi = Rational::from(&jlo + Rational::from(&ihi - &ilo) / &scale);
            (
                s,
                CylinderBounds::Exact {
                    lo: jlo,
                    hi,
                    lo_closed: true,
                    hi_closed: false,
                },
                Admissibility::NonEmpty,
            )
        })
        .collect())
}

fn enumerate_enclosed(map: &MapSpec, n: usize, bits: u32, cap: usize) -> Result<Vec<Raw>> {
    let ctx = EnclosedAffine::new(map, bits);
    let p = ctx.prec;
    let max = map.max_symbol().expect("finite alphabet");
    let cells: Vec<_> = (0..=max).map(|d| ctx.cell(map, d)).collect();
    let zero = EnclosedReal::from_integer(0, p);
    let one = EnclosedReal::from_integer(1, p);
    // (symbols, cylinder lo, image lo, image hi, β^k, ambiguous width)
    let mut frontier = vec![(Vec::new(), zero.clone(), zero, one.clone(), one, None::<f64>)];
    let null = null_width_log2(bits);
    for _ in 0..n {
        let mut next = Vec::new();
        for (syms, jlo, ilo, ihi, scale, amb) in frontier {
            for (d, (a, b)) in cells.iter().enumerate() {
                let plo = a.max(&ilo);
                let phi = b.min(&ihi);
                let mut amb = amb;
                match classify(&plo, &phi) {
                    Admissibility::Empty => continue,
                    Admissibility::Ambiguous { width_upper_log2 } => {
                        // width in x-space is the image width over β^k
                        let w = width_upper_log2 - scale.lo().clone().log2().to_f64();
                        if w < null {
                            continue;
                        }
                        amb = Some(w);
                    }
                    Admissibility::NonEmpty => {}
                }
                let d = d as Symbol;
                let off = plo.sub(&ilo, p).div(&scale, p).expect("positive scale");
                let new_lo = jlo.add(&off, p);
                let mut s = syms.clone();
                s.push(d);
                next.push((
                    s,
                    new_lo,
                    ctx.forward(&plo, d).clamp_unit(),
                    ctx.forward(&phi, d).clamp_unit(),
                    scale.mul(&ctx.beta, p),
                    amb,
                ));
                if next.len() > cap {
                    return Err(Error::EnumerationGuard {
                        count: next.len() as u128,
                        cap: cap as u128,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(frontier
        .into_iter()
        .map(|(s, jlo, ilo, ihi, scale, amb)| {
            let w = ihi.sub(&ilo, p).div(&scale, p).expect("positive scale");
            let hi = jlo.add(&w, p);
            let adm = match amb {
                Some(w) => Admissibility::Ambiguous { width_upper_log2: w },
                None => Admissibility::NonEmpty,
            };
            (s, CylinderBounds::Enclosed { lo: jlo, hi }, adm)
        })
        .collect())
}

/// `μ(C)`; exact closed forms for Lebesgue and Gauss, density quadrature for
/// numeric invariants.
pub fn cylinder_measure(c: &Cylinder, m: &MeasureSpec) -> f64 {
    if c.is_null() {
        return 0.0;
    }
    match m {
        MeasureSpec::Lebesgue => c.lebesgue(),
        MeasureSpec::GaussMeasure => cylinder_log_measure(c, m).exp(),
        MeasureSpec::NumericInvariant { density, .. } => {
            let (a, b) = (c.lo_f64(), c.hi_f64());
            if b - a > 1e-9 {
                density.integral(a, b)
            } else {
                c.lebesgue() * density.value_at(0.5 * (a + b))
            }
        }
    }
}

/// `ln μ(C)` without underflow, for cylinders of any rank.
pub fn cylinder_log_measure(c: &Cylinder, m: &MeasureSpec) -> f64 {
    if c.is_null() {
        return f64::NEG_INFINITY;
    }
    match m {
        MeasureSpec::Lebesgue => c.log_lebesgue(),
        MeasureSpec::GaussMeasure => match &c.bounds {
            CylinderBounds::Exact { lo, hi, .. } => gauss_log_measure(lo, hi),
            CylinderBounds::Enclosed { .. } => gauss_measure(c.lo_f64(), c.hi_f64()).ln(),
        },
        MeasureSpec::NumericInvariant { density, .. } => {
            c.log_lebesgue() + density.value_at(0.5 * (c.lo_f64() + c.hi_f64())).ln()
        }
    }
}

/// `ln μ_G([a, b]) = ln(ln(1 + (b−a)/(1+a)) / ln 2)`, with the ratio exact.
pub fn gauss_log_measure(a: &Rational, b: &Rational) -> f64 {
    gauss_log_measure_float(a, b, 192).to_f64()
}

fn gauss_log_measure_float(a: &Rational, b: &Rational, prec: u32) -> Float {
    let r = Rational::from(b - a) / (Rational::from(1) + a);
    if r == 0 {
        return Float::with_val(prec, Special::NegInfinity);
    }
    let n = Float::with_val(prec, r.numer());
    let d = Float::with_val(prec, r.denom());
    let l = (n / d).ln_1p();
    let ln2 = Float::with_val(prec, Constant::Log2);
    (l / ln2).ln()
}

/// `ln μ(C)` at `prec` bits. Exact endpoints keep the full precision, so
/// `−ln λ(C)/n` for a base-b cylinder rounds to `ln b` itself.
pub fn cylinder_log_measure_float(c: &Cylinder, m: &MeasureSpec, prec: u32) -> Float {
    if c.is_null() {
        return Float::with_val(prec, Special::NegInfinity);
    }
    let log_len = || match c.lebesgue_exact() {
        Some(q) => Float::with_val(prec, q.numer()).ln() - Float::with_val(prec, q.denom()).ln(),
        None => {
            let w = c.length_enclosure();
            (Float::with_val(prec, w.lo() + w.hi()) / 2u32).ln()
        }
    };
    match m {
        MeasureSpec::Lebesgue => log_len(),
        MeasureSpec::GaussMeasure => match &c.bounds {
            CylinderBounds::Exact { lo, hi, .. } => gauss_log_measure_float(lo, hi, prec),
            CylinderBounds::Enclosed { .. } => Float::with_val(prec, gauss_measure(c.lo_f64(), c.hi_f64()).ln()),
        },
        MeasureSpec::NumericInvariant { density, .. } => {
            log_len() + density.value_at(0.5 * (c.lo_f64() + c.hi_f64())).ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn exact(c: &Cylinder) -> (Rational, Rational) {
        match &c.bounds {
            CylinderBounds::Exact { lo, hi, .. } => (lo.clone(), hi.clone()),
            _ => panic!("expected exact bounds"),
        }
    }

    #[test]
    fn binary_cylinder() {
        let c = cylinder_interval(&MapSpec::TimesB(2), &[0, 1], 64).unwrap();
        assert_eq!(exact(&c), (q(1, 4), q(1, 2)));
        assert_eq!(c.lebesgue_exact().unwrap(), q(1, 4));
        assert!(matches!(c.bounds, CylinderBounds::Exact { lo_closed: true, hi_closed: false, .. }));
    }

    #[test]
    fn inadmissible_beta_string() {
        let c = cylinder_interval(&MapSpec::parse("beta:1.5").unwrap(), &[1, 1], 64).unwrap();
        assert!(c.is_empty());
        let c = cylinder_interval(&MapSpec::parse("beta:1.5").unwrap(), &[1, 0], 64).unwrap();
        assert_eq!(exact(&c), (q(2, 3), q(1, 1)));
        let c = cylinder_interval(&MapSpec::golden(), &[1, 1], 256).unwrap();
        assert!(c.is_null() && !matches!(c.admissibility, Admissibility::NonEmpty));
        assert!(cylinder_interval(&MapSpec::golden(), &[2], 64).is_err());
    }

    #[test]
    fn gauss_rank_one() {
        let c = cylinder_interval(&MapSpec::Gauss, &[1], 64).unwrap();
        assert_eq!(exact(&c), (q(1, 2), q(1, 1)));
        assert!(matches!(c.bounds, CylinderBounds::Exact { lo_closed: false, hi_closed: true, .. }));
        let mu = cylinder_measure(&c, &MeasureSpec::GaussMeasure);
        assert!((mu - (4.0f64 / 3.0).ln() / 2f64.ln()).abs() < 1e-15);
        assert!(cylinder_interval(&MapSpec::Gauss, &[0], 64).is_err());
    }

    #[test]
    fn cf_length_examples() {
        assert_eq!(cf_cylinder_length(&[1]).unwrap(), q(1, 2));
        assert_eq!(cf_cylinder_length(&[2, 3]).unwrap(), q(1, 63));
        let c = convergents(&[2, 3]).last().unwrap();
        assert_eq!(c.value(), q(3, 7));
        assert_eq!(c.q_prev, 2);
    }

    /// Endpoints of `x ↦ 1/(c_1 + 1/(c_2 + … + t))` at `t = 0` and `t = 1`.
    fn compose_inverse_branches(s: &[Symbol]) -> (Rational, Rational) {
        let at = |t: Rational| {
            s.iter()
                .rev()
                .fold(t, |acc, &c| Rational::from(1) / (acc + Rational::from(c)))
        };
        let (a, b) = (at(Rational::new()), at(Rational::from(1)));
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    #[test]
    fn cf_length_matches_inverse_branches_exhaustively() {
        let mut stack: Vec<Vec<Symbol>> = (1..=4).map(|c| vec![c]).collect();
        let mut checked = 0;
        while let Some(s) = stack.pop() {
            let (a, b) = compose_inverse_branches(&s);
            assert_eq!(cf_cylinder_length(&s).unwrap(), Rational::from(&b - &a), "{s:?}");
            let c = cylinder_interval(&MapSpec::Gauss, &s, 64).unwrap();
            assert_eq!(exact(&c), (a, b));
            checked += 1;
            if s.len() < 6 {
                for d in 1..=4 {
                    let mut t = s.clone();
                    t.push(d);
                    stack.push(t);
                }
            }
        }
        assert_eq!(checked, 4 + 16 + 64 + 256 + 1024 + 4096);
    }

    #[test]
    fn convergent_recurrence() {
        let digits = [1, 2, 3, 4, 5, 1, 1, 7];
        let mut prev_q = Integer::from(0);
        for c in convergents(&digits) {
            assert!(c.q > prev_q);
            assert_eq!(c.p.clone().gcd(&c.q), 1);
            prev_q = c.q.clone();
        }
        // golden ratio conjugate: q_n are Fibonacci numbers
        let qs: Vec<_> = convergents(&[1; 10]).map(|c| c.q.to_u64().unwrap()).collect();
        assert_eq!(qs, vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
    }

    #[test]
    fn binary_enumeration() {
        let cs = enumerate_cylinders(&MapSpec::TimesB(2), 3, 64, 1000).unwrap();
        assert_eq!(cs.len(), 8);
        for (i, c) in cs.iter().enumerate() {
            assert_eq!(exact(c), (q(i as i64, 8), q(i as i64 + 1, 8)));
        }
        assert!(enumerate_cylinders(&MapSpec::Gauss, 2, 64, 100).is_err());
        assert!(matches!(
            enumerate_cylinders(&MapSpec::TimesB(10), 3, 64, 500),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn golden_counts_are_fibonacci() {
        let mut fib = vec![1u64, 1];
        for i in 2..20 {
            fib.push(fib[i - 1] + fib[i - 2]);
        }
        let beta = (1.0 + 5f64.sqrt()) / 2.0;
        for n in 1..=12 {
            let cs = enumerate_cylinders(&MapSpec::golden(), n, 256, 1 << 20).unwrap();
            assert_eq!(cs.len() as u64, fib[n + 1], "rank {n}");
            assert!((cs.len() as f64) <= beta / (beta - 1.0) * beta.powi(n as i32));
            let total: f64 = cs.iter().map(Cylinder::lebesgue).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_agrees_with_backward_refinement() {
        for name in ["beta:1.9", "linmod1:2.5,0.25", "beta:golden", "linmod1:2.5,sqrt2m1"] {
            let map = MapSpec::parse(name).unwrap();
            let cs = enumerate_cylinders(&map, 5, 256, 1 << 16).unwrap();
            let mut total = 0.0;
            for c in &cs {
                let back = cylinder_interval(&map, &c.symbols, 256).unwrap();
                assert!(!back.is_null(), "{name} {:?}", c.symbols);
                assert!((back.lo_f64() - c.lo_f64()).abs() < 1e-15, "{name} {:?}", c.symbols);
                assert!((back.hi_f64() - c.hi_f64()).abs() < 1e-15, "{name} {:?}", c.symbols);
                total += c.lebesgue();
            }
            assert!((total - 1.0).abs() < 1e-12, "{name}: {total}");
            // consecutive cylinders tile [0,1]
            for w in cs.windows(2) {
                assert!((w[0].hi_f64() - w[1].lo_f64()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn beta_enumeration_bound() {
        let cs = enumerate_cylinders(&MapSpec::parse("beta:1.9").unwrap(), 5, 64, 1000).unwrap();
        assert!(cs.len() <= 52, "{}", cs.len());
    }

    #[test]
    fn refinement_nesting() {
        let map = MapSpec::parse("beta:1.9").unwrap();
        let r4 = enumerate_cylinders(&map, 4, 64, 1000).unwrap();
        let r5 = enumerate_cylinders(&map, 5, 64, 1000).unwrap();
        for c in &r5 {
            let parents: Vec<_> = r4.iter().filter(|p| p.symbols[..] == c.symbols[..4]).collect();
            assert_eq!(parents.len(), 1);
            let (plo, phi) = exact(parents[0]);
            let (lo, hi) = exact(c);
            assert!(plo <= lo && hi <= phi);
        }
    }

    #[test]
    fn measures_of_cylinders() {
        let c = cylinder_interval(&MapSpec::TimesB(2), &[0], 64).unwrap();
        assert_eq!(cylinder_measure(&c, &MeasureSpec::Lebesgue), 0.5);
        let map = MapSpec::golden();
        let mu = MeasureSpec::natural(&map).unwrap();
        let c0 = cylinder_interval(&map, &[0], 256).unwrap();
        let m = cylinder_measure(&c0, &mu);
        let beta = (1.0 + 5f64.sqrt()) / 2.0;
        let r = 1.0 - 1.0 / beta;
        assert!(m >= r / beta - 1e-9 && m <= 1.0 / (r * beta) + 1e-9, "{m}");
        // long Gauss cylinders: log measure stays finite and matches the length
        let s: Vec<Symbol> = (0..2000).map(|i| 1 + (i * 7 % 5) as u64).collect();
        let c = cylinder_interval(&MapSpec::Gauss, &s, 64).unwrap();
        let lg = cylinder_log_measure(&c, &MeasureSpec::GaussMeasure);
        let ll = c.log_lebesgue();
        assert!(lg.is_finite() && ll.is_finite());
        // density is between 1/(2 ln 2) and 1/ln 2
        assert!(lg - ll > (0.5 / 2f64.ln()).ln() - 1e-9 && lg - ll < (1.0 / 2f64.ln()).ln() + 1e-9);
    }
}
