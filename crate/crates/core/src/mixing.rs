//! Correlation decay `c(n) = λ(A ∩ T^{−(n+l)}B) − λ(A)μ(B)` for a rank-l
//! cylinder `A` and an interval `B`.
//!
//! Routes:
//! - base b: closed-form count of full branches, exact rationals;
//! - rational linear mod 1: the images of `A` under `T^m` kept as a multiset
//!   of rational intervals, exact;
//! - affine maps with irrational parameters: the same image multiset with
//!   enclosed endpoints, which is `T̂ᵐ 1_A` exactly;
//! - any affine map, as a cross-check: `∫_B T̂^{n+l} 1_A` on the density
//!   grid;
//! - Gauss: `T̂^l 1_A = 1/(q_l + t q_{l−1})²` iterated in a Chebyshev basis,
//!   with the branches `j > J` summed through Hurwitz zeta values of a Taylor
//!   expansion at 0.

use std::collections::BTreeMap;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::cylinders::{cylinder_interval, Cylinder, CylinderBounds};
use crate::error::{Error, Result};
use crate::interval::EnclosedReal;
use crate::maps::{MapSpec, Symbol};
use crate::measures::{
    gauss_measure, invariant_density, transfer_apply, DensityTable, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum MixingRoute {
    ExactTimesB,
    ExactAffine,
    EnclosedImages,
    Grid { grid: usize },
    GaussSpectral { degree: usize, branches: usize },
}

impl MixingRoute {
    pub fn auto(map: &MapSpec) -> Result<Self> {
        Ok(match map {
            MapSpec::TimesB(_) => MixingRoute::ExactTimesB,
            MapSpec::LinearMod1 { .. } if map.affine_exact().is_some() => MixingRoute::ExactAffine,
            MapSpec::Beta(_) | MapSpec::LinearMod1 { .. } => MixingRoute::EnclosedImages,
            MapSpec::Gauss => MixingRoute::GaussSpectral {
                degree: 48,
                branches: 1000,
            },
            MapSpec::Rotation(_) => return Err(Error::Unsupported(format!("mixing for {map}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingPoint {
    pub n: usize,
    pub signed: f64,
    /// `|c(n)|`.
    pub value: f64,
    /// Below ten times the noise floor.
    pub masked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecayFit {
    /// `|c(n)| ≈ e^{a} rⁿ` by least squares on `ln |c(n)|`.
    Exponential {
        rate: f64,
        log_amplitude: f64,
        r_squared: f64,
        points: usize,
    },
    /// Fewer than four usable points.
    InsufficientDecayRange { usable: usize },
    /// Every value is exactly zero.
    IdenticallyZero,
}

impl DecayFit {
    pub fn rate(&self) -> Option<f64> {
        match self {
            DecayFit::Exponential { rate, .. } => Some(*rate),
            _ => None,
        }
    }
}

/// Fits the initial run of unmasked points.
pub fn fit_decay(series: &[MixingPoint]) -> DecayFit {
    if series.iter().all(|p| p.value == 0.0) {
        return DecayFit::IdenticallyZero;
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .take_while(|p| !p.masked)
        .map(|p| (p.n as f64, p.value.ln()))
        .collect();
    if pts.len() < 4 {
        return DecayFit::InsufficientDecayRange { usable: pts.len() };
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    DecayFit::Exponential {
        rate: slope.exp(),
        log_amplitude: icpt,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        points: pts.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub map: MapSpec,
    pub a: Vec<Symbol>,
    pub l: usize,
    pub b: (f64, f64),
    pub lambda_a: f64,
    pub mu_b: f64,
    pub route: MixingRoute,
    pub noise_floor: f64,
    pub series: Vec<MixingPoint>,
    /// `c(n)` as exact rationals when the route is exact.
    pub exact: Option<Vec<String>>,
    /// Gauss only: `sup g · Σ_{j>J} 1/j²`, the mass of the dropped branches
    /// before the tail expansion.
    pub crude_tail_bound: Option<f64>,
    pub fit: DecayFit,
    pub partial_sums: Vec<f64>,
    /// An exponential fit with `r < 1`, or an identically zero series.
    pub summable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingOptions {
    pub route: Option<MixingRoute>,
    /// Cap on distinct image intervals for the exact affine route.
    pub piece_cap: usize,
}

impl Default for MixingOptions {
    fn default() -> Self {
        Self {
            route: None,
            piece_cap: 1 << 16,
        }
    }
}

/// `λ(B ∩ [0, t))` for `B = [lo, hi)`.
fn below(b: &(Rational, Rational), t: &Rational) -> Rational {
    let hi = if *t < b.1 { t } else { &b.1 };
    if *hi <= b.0 {
        Rational::new()
    } else {
        Rational::from(hi - &b.0)
    }
}

/// `λ([0, t) ∩ T_b^{−m} B)`: `⌊bᵐt⌋` full branches plus one partial branch.
fn times_b_cumulative(base: u32, m: usize, b: &(Rational, Rational), t: &Rational) -> Rational {
    let bm = Integer::from(base).pow(m as u32);
    let s = Rational::from(t * &bm);
    let k = s.clone().floor();
    let frac = Rational::from(&s - &k);
    let len_b = Rational::from(&b.1 - &b.0);
    (Rational::from(&len_b * &k) + below(b, &frac)) / bm
}

/// Exact `λ(A ∩ T_b^{−m}B)` for `A = [a_lo, a_hi)`.
pub fn times_b_preimage_mass(base: u32, m: usize, a: &(Rational, Rational), b: &(Rational, Rational)) -> Rational {
    times_b_cumulative(base, m, b, &a.1) - times_b_cumulative(base, m, b, &a.0)
}

/// Images of an interval under iterates of `βx + γ mod 1`, as a multiset.
pub struct ImageMultiset {
    beta: Rational,
    gamma: Rational,
    pieces: BTreeMap<(Rational, Rational), Integer>,
    steps: usize,
}

impl ImageMultiset {
    pub fn new(beta: Rational, gamma: Rational, lo: Rational, hi: Rational) -> Self {
        let pieces = BTreeMap::from([((lo, hi), Integer::from(1))]);
        Self {
            beta,
            gamma,
            pieces,
            steps: 0,
        }
    }

    pub fn distinct(&self) -> usize {
        self.pieces.len()
    }

    pub fn step(&mut self, cap: usize) -> Result<()> {
        let mut next: BTreeMap<(Rational, Rational), Integer> = BTreeMap::new();
        for ((lo, hi), mult) in &self.pieces {
            let z0 = Rational::from(&self.beta * lo) + &self.gamma;
            let z1 = Rational::from(&self.beta * hi) + &self.gamma;
            let k0 = z0.clone().floor();
            let k1 = z1.clone().ceil();
            let mut k = k0;
            while k < k1 {
                let kq = Rational::from(k.clone());
                let kq1 = Rational::from(&kq + 1u32);
                let a = if z0 > kq { z0.clone() } else { kq.clone() };
                let b = if z1 < kq1 { z1.clone() } else { kq1 };
                if a < b {
                    let key = (a - &kq, b - &kq);
                    *next.entry(key).or_insert_with(Integer::new) += mult;
                }
                k += 1u32;
            }
        }
        if next.len() > cap {
            return Err(Error::EnumerationGuard {
                count: next.len() as u128,
                cap: cap as u128,
            });
        }
        self.pieces = next;
        self.steps += 1;
        Ok(())
    }

    /// `λ(A ∩ T^{−steps} B)`.
    pub fn preimage_mass(&self, b: &(Rational, Rational)) -> Rational {
        let mut acc = Rational::new();
        for ((lo, hi), mult) in &self.pieces {
            let l = Rational::from(below(b, hi) - below(b, lo));
            acc += l * mult;
        }
        acc / Rational::from(self.beta.clone().pow(self.steps as i32))
    }
}

fn exact_bounds(c: &Cylinder) -> Option<(Rational, Rational)> {
    match &c.bounds {
        CylinderBounds::Exact { lo, hi, .. } => Some((lo.clone(), hi.clone())),
        CylinderBounds::Enclosed { .. } => None,
    }
}

/// Images of an interval under iterates of an affine map, with enclosed
/// endpoints. Images whose endpoint enclosures overlap are merged, so a
/// β-map keeps at most `m + 1` distinct images after `m` steps.
pub struct EnclosedImages {
    beta: EnclosedReal,
    gamma: Option<EnclosedReal>,
    prec: u32,
    /// `βᵐ`, rounded to nearest.
    scale: Float,
    pieces: Vec<(EnclosedReal, EnclosedReal, Integer)>,
    steps: usize,
}

impl EnclosedImages {
    pub fn new(map: &MapSpec, lo: EnclosedReal, hi: EnclosedReal, prec: u32) -> Result<Self> {
        let (beta, gamma) = map
            .affine()
            .ok_or_else(|| Error::Unsupported(format!("affine images for {map}")))?;
        Ok(Self {
            beta: beta.enclose(prec),
            gamma: gamma.filter(|g| !g.is_zero()).map(|g| g.enclose(prec)),
            prec,
            scale: Float::with_val(prec, 1),
            pieces: vec![(lo, hi, Integer::from(1))],
            steps: 0,
        })
    }

    pub fn distinct(&self) -> usize {
        self.pieces.len()
    }

    /// Largest endpoint enclosure width, as `log2`.
    pub fn width_log2(&self) -> f64 {
        self.pieces
            .iter()
            .map(|(a, b, _)| a.width_log2().max(b.width_log2()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn step(&mut self, cap: usize) -> Result<()> {
        let p = self.prec;
        let null = -(p as f64) / 2.0;
        let mut next: Vec<(EnclosedReal, EnclosedReal, Integer)> = Vec::new();
        for (lo, hi, mult) in &self.pieces {
            let lift = |x: &EnclosedReal| {
                let y = self.beta.mul(x, p);
                match &self.gamma {
                    Some(g) => y.add(g, p),
                    None => y,
                }
            };
            let (z0, z1) = (lift(lo), lift(hi));
            let k0 = z0.lo().to_f64().floor().max(0.0) as u64;
            let k1 = z1.hi().to_f64().floor().max(0.0) as u64;
            for k in k0..=k1 {
                let kk = EnclosedReal::from_integer(k, p);
                let k1e = EnclosedReal::from_integer(k + 1, p);
                let a = z0.max(&kk).sub_integer(k, p);
                let b = z1.min(&k1e).sub_integer(k, p);
                if b.certainly_le(&a) {
                    continue;
                }
                let w = b.sub(&a, p);
                if !a.certainly_lt(&b) && w.width_log2() < null {
                    continue;
                }
                next.push((a.clamp_unit(), b.clamp_unit(), mult.clone()));
            }
        }
        next.sort_by(|x, y| {
            x.0.midpoint_f64()
                .total_cmp(&y.0.midpoint_f64())
                .then(x.1.midpoint_f64().total_cmp(&y.1.midpoint_f64()))
        });
        let mut merged: Vec<(EnclosedReal, EnclosedReal, Integer)> = Vec::with_capacity(next.len());
        for (a, b, m) in next {
            match merged.iter_mut().rev().take(4).find(|(a2, b2, _)| overlaps(a2, &a) && overlaps(b2, &b)) {
                Some((a2, b2, m2)) => {
                    *a2 = a2.hull(&a);
                    *b2 = b2.hull(&b);
                    *m2 += m;
                }
                None => merged.push((a, b, m)),
            }
        }
        if merged.len() > cap {
            return Err(Error::EnumerationGuard {
                count: merged.len() as u128,
                cap: cap as u128,
            });
        }
        self.pieces = merged;
        self.scale *= Float::with_val(p, self.beta.lo() + self.beta.hi()) / 2u32;
        self.steps += 1;
        Ok(())
    }

    /// `λ(A ∩ T^{−steps} B)` at the working precision.
    pub fn preimage_mass(&self, b: &(Rational, Rational)) -> Float {
        let p = self.prec;
        let (b0, b1) = (Float::with_val(p, &b.0), Float::with_val(p, &b.1));
        let mut acc = Float::new(p);
        for (lo, hi, mult) in &self.pieces {
            let l = Float::with_val(p, lo.lo() + lo.hi()) / 2u32;
            let h = Float::with_val(p, hi.lo() + hi.hi()) / 2u32;
            let u = if l > b0 { l } else { b0.clone() };
            let v = if h < b1 { h } else { b1.clone() };
            if v > u {
                acc += Float::with_val(p, &v - &u) * mult;
            }
        }
        acc / &self.scale
    }
}

fn overlaps(x: &EnclosedReal, y: &EnclosedReal) -> bool {
    x.lo() <= y.hi() && y.lo() <= x.hi()
}

/// `μ(B) = lim λ(T^{−M} B)` and the size of the last change.
pub fn invariant_mass_by_images(map: &MapSpec, b: &(Rational, Rational), prec: u32, max_steps: usize) -> Result<(f64, f64)> {
    let mut imgs = EnclosedImages::new(map, EnclosedReal::from_integer(0, prec), EnclosedReal::from_integer(1, prec), prec)?;
    let mut prev = imgs.preimage_mass(b);
    let mut quiet = 0;
    for _ in 0..max_steps {
        imgs.step(1 << 16)?;
        let cur = imgs.preimage_mass(b);
        let delta = Float::with_val(prec, &cur - &prev).abs().to_f64();
        prev = cur;
        quiet = if delta < 1e-30 { quiet + 1 } else { 0 };
        if quiet >= 8 {
            break;
        }
        if imgs.width_log2() > -(prec as f64) / 2.0 {
            break;
        }
    }
    let mut last = imgs.preimage_mass(b);
    imgs.step(1 << 16)?;
    let next = imgs.preimage_mass(b);
    last -= &next;
    Ok((next.to_f64(), last.abs().to_f64().max(1e-30)))
}

/// Precision for `steps` iterations of an expansion by `beta`.
fn images_prec(beta: f64, steps: usize) -> u32 {
    160 + (steps as f64 * beta.log2() * 1.2) as u32
}

/// Correlation series for `n` in `ns`.
pub fn mixing_correlation(
    map: &MapSpec,
    a: &[Symbol],
    b: (Rational, Rational),
    ns: &[usize],
    opts: &MixingOptions,
) -> Result<MixingReport> {
    if b.0 < 0 || b.1 > 1 || b.0 >= b.1 {
        return Err(Error::OutOfRange(format!("B = [{}, {})", b.0, b.1)));
    }
    let route = match opts.route {
        Some(r) => r,
        None => MixingRoute::auto(map)?,
    };
    let cyl = cylinder_interval(map, a, 256)?;
    if cyl.is_null() || a.is_empty() {
        return Err(Error::OutOfRange(format!("cylinder {a:?} of {map} is empty")));
    }
    let l = a.len();
    let mut crude_tail_bound = None;
    let mut exact = None;
    let (lambda_a, mu_b, floor, signed): (f64, f64, f64, Vec<f64>) = match route {
        MixingRoute::ExactTimesB => {
            let MapSpec::TimesB(base) = map else {
                return Err(Error::Unsupported(format!("the base-b route for {map}")));
            };
            let ab = exact_bounds(&cyl).expect("rational cylinder");
            let la = Rational::from(&ab.1 - &ab.0);
            let lb = Rational::from(&b.1 - &b.0);
            let vals: Vec<Rational> = ns
                .iter()
                .map(|&n| times_b_preimage_mass(*base, n + l, &ab, &b) - Rational::from(&la * &lb))
                .collect();
            exact = Some(vals.iter().map(Rational::to_string).collect());
            (la.to_f64(), lb.to_f64(), 0.0, vals.iter().map(Rational::to_f64).collect())
        }
        MixingRoute::ExactAffine => {
            let (beta, gamma) = map
                .affine_exact()
                .ok_or_else(|| Error::Unsupported(format!("the exact route for {map}")))?;
            let ab = exact_bounds(&cyl).expect("rational cylinder");
            let la = Rational::from(&ab.1 - &ab.0);
            let lebesgue_invariant = beta.is_integer() && gamma == 0;
            let (mu_b, q_err) = if lebesgue_invariant {
                (Rational::from(&b.1 - &b.0).to_f64(), 0.0)
            } else {
                let steps = 600;
                invariant_mass_by_images(map, &b, images_prec(beta.to_f64(), steps), steps)?
            };
            let mut imgs = ImageMultiset::new(beta, gamma, ab.0.clone(), ab.1.clone());
            let mut out = Vec::new();
            let mut exact_vals = Vec::new();
            let n_max = ns.iter().copied().max().unwrap_or(0);
            for m in 1..=n_max + l {
                imgs.step(opts.piece_cap)?;
                if m >= l && ns.contains(&(m - l)) {
                    let mass = imgs.preimage_mass(&b);
                    if lebesgue_invariant {
                        let c = mass - Rational::from(&la * Rational::from(&b.1 - &b.0));
                        out.push(c.to_f64());
                        exact_vals.push(c.to_string());
                    } else {
                        out.push(mass.to_f64() - la.to_f64() * mu_b);
                    }
                }
            }
            // ns may repeat or be unordered; restore the requested order
            let sorted: Vec<usize> = {
                let mut s: Vec<usize> = ns.to_vec();
                s.sort_unstable();
                s.dedup();
                s
            };
            let pick = |n: usize| sorted.iter().position(|&x| x == n).expect("present");
            let signed = ns.iter().map(|&n| out[pick(n)]).collect();
            if lebesgue_invariant {
                exact = Some(ns.iter().map(|&n| exact_vals[pick(n)].clone()).collect());
            }
            let floor = if lebesgue_invariant { 0.0 } else { q_err.max(1e-15) };
            (la.to_f64(), mu_b, floor, signed)
        }
        MixingRoute::EnclosedImages => enclosed_route(map, &cyl, &b, ns, opts.piece_cap)?,
        MixingRoute::Grid { grid } => grid_route(map, &cyl, &b, ns, grid)?,
        MixingRoute::GaussSpectral { degree, branches } => {
            if *map != MapSpec::Gauss {
                return Err(Error::Unsupported(format!("the spectral route for {map}")));
            }
            let r = gauss_route(a, &b, ns, degree, branches);
            crude_tail_bound = Some(r.crude_tail);
            (r.lambda_a, r.mu_b, r.floor, r.signed)
        }
    };
    let series: Vec<MixingPoint> = ns
        .iter()
        .zip(&signed)
        .map(|(&n, &s)| MixingPoint {
            n,
            signed: s,
            value: s.abs(),
            masked: s.abs() <= 10.0 * floor,
        })
        .collect();
    let fit = fit_decay(&series);
    let partial_sums = series
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.value;
            Some(*acc)
        })
        .collect();
    let summable = match &fit {
        DecayFit::IdenticallyZero => true,
        DecayFit::Exponential { rate, .. } => *rate < 1.0,
        DecayFit::InsufficientDecayRange { .. } => false,
    };
    Ok(MixingReport {
        map: map.clone(),
        a: a.to_vec(),
        l,
        b: (b.0.to_f64(), b.1.to_f64()),
        lambda_a,
        mu_b,
        route,
        noise_floor: floor,
        series,
        exact,
        crude_tail_bound,
        fit,
        partial_sums,
        summable,
    })
}

fn enclosed_route(
    map: &MapSpec,
    cyl: &Cylinder,
    b: &(Rational, Rational),
    ns: &[usize],
    cap: usize,
) -> Result<(f64, f64, f64, Vec<f64>)> {
    let beta = map.affine().map(|(b, _)| b.to_f64()).ok_or_else(|| Error::Unsupported(format!("{map}")))?;
    let l = cyl.rank();
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let limit_steps = 600;
    let prec = images_prec(beta, limit_steps.max(n_max + l));
    let (mu_b, delta) = invariant_mass_by_images(map, b, prec, limit_steps)?;
    let (lo, hi) = match &cyl.bounds {
        CylinderBounds::Exact { lo, hi, .. } => (EnclosedReal::from_rational(lo, prec), EnclosedReal::from_rational(hi, prec)),
        CylinderBounds::Enclosed { lo, hi } => (lo.clone(), hi.clone()),
    };
    let len = hi.sub(&lo, prec);
    let lambda_a = Float::with_val(prec, len.lo() + len.hi()) / 2u32;
    let mut imgs = EnclosedImages::new(map, lo, hi, prec)?;
    let mut by_n = BTreeMap::new();
    let mu = Float::with_val(prec, mu_b);
    for m in 1..=n_max + l {
        imgs.step(cap)?;
        if m >= l {
            let c = imgs.preimage_mass(b) - Float::with_val(prec, &lambda_a * &mu);
            by_n.insert(m - l, c.to_f64());
        }
    }
    let floor = delta.max(2f64.powf(imgs.width_log2()));
    Ok((lambda_a.to_f64(), mu_b, floor, ns.iter().map(|n| by_n[n]).collect()))
}

/// `1_{[lo, hi)}` on a grid, with exact partial-bin weights.
fn indicator_table(grid: usize, lo: f64, hi: f64) -> DensityTable {
    let h = 1.0 / grid as f64;
    DensityTable::from_values(
        (0..grid)
            .map(|i| {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                (b.min(hi) - a.max(lo)).max(0.0) / h
            })
            .collect(),
    )
}

fn grid_route(
    map: &MapSpec,
    cyl: &Cylinder,
    b: &(Rational, Rational),
    ns: &[usize],
    grid: usize,
) -> Result<(f64, f64, f64, Vec<f64>)> {
    let (blo, bhi) = (b.0.to_f64(), b.1.to_f64());
    let (alo, ahi) = (cyl.lo_f64(), cyl.hi_f64());
    let density = invariant_density(map, grid, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
    let mu_b = density.integral(blo, bhi);
    let mut f = indicator_table(grid, alo, ahi);
    let lambda_a = f.total_mass();
    let l = cyl.rank();
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let mut by_n = BTreeMap::new();
    for m in 1..=n_max + l {
        f = transfer_apply(map, &f)?;
        if m >= l {
            by_n.insert(m - l, f.integral(blo, bhi) - lambda_a * mu_b);
        }
    }
    // power-iteration error of the fixed point, up to the contraction factor
    let floor = 3.0 * density.residual.max(1e-14);
    Ok((lambda_a, mu_b, floor, ns.iter().map(|n| by_n[n]).collect()))
}

/// Chebyshev interpolant on `[0, 1]`.
#[derive(Debug, Clone)]
struct Cheb {
    c: Vec<f64>,
}

impl Cheb {
    fn nodes(n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| 0.5 * (1.0 + (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()))
            .collect()
    }

    fn fit(values: &[f64]) -> Self {
        let n = values.len();
        let c = (0..n)
            .map(|j| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                if j == 0 {
                    s / n as f64
                } else {
                    2.0 * s / n as f64
                }
            })
            .collect();
        Self { c }
    }

    fn eval(&self, t: f64) -> f64 {
        let s = 2.0 * t - 1.0;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &cj in self.c.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + cj;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + self.c[0]
    }

    /// Taylor coefficients at `t = 0` up to order `k`.
    fn taylor_at_zero(&self, k: usize) -> Vec<f64> {
        let mut fact = 1.0;
        (0..=k)
            .map(|r| {
                if r > 0 {
                    fact *= r as f64;
                }
                let d: f64 = self
                    .c
                    .iter()
                    .enumerate()
                    .map(|(j, cj)| {
                        let jj = (j * j) as f64;
                        let prod: f64 = (0..r).map(|i| (jj - (i * i) as f64) / (2 * i + 1) as f64).product();
                        let sign = if (j + r) % 2 == 0 { 1.0 } else { -1.0 };
                        cj * sign * prod
                    })
                    .sum();
                d * 2f64.powi(r as i32) / fact
            })
            .collect()
    }

    /// `∫_a^b` of the interpolant.
    fn integral(&self, a: f64, b: f64) -> f64 {
        let n = self.c.len();
        // antiderivative in s, coefficients of T_0..T_n
        let mut d = vec![0.0; n + 1];
        for j in 0..n {
            let cj = self.c[j];
            match j {
                0 => d[1] += cj,
                1 => d[2] += cj / 4.0,
                _ => {
                    d[j + 1] += cj / (2.0 * (j + 1) as f64);
                    d[j - 1] -= cj / (2.0 * (j - 1) as f64);
                }
            }
        }
        let anti = Cheb { c: d };
        0.5 * (anti.eval(b) - anti.eval(a))
    }

    fn sup_abs(&self) -> f64 {
        (0..=200).map(|i| self.eval(i as f64 / 200.0).abs()).fold(0.0, f64::max)
    }

    fn truncation(&self) -> f64 {
        self.c.iter().rev().take(2).map(|v| v.abs()).sum()
    }
}

/// Hurwitz `ζ(s, a)` for `a ≥ 100` by Euler–Maclaurin.
fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    let mut out = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    let bern = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0];
    let mut fact = 1.0;
    let mut rising = 1.0;
    for (k, bk) in bern.iter().enumerate() {
        let kk = 2 * (k + 1);
        fact *= ((kk - 1) * kk) as f64;
        rising *= if k == 0 { s } else { (s + kk as f64 - 3.0) * (s + kk as f64 - 2.0) };
        out += bk / fact * rising * a.powf(-s - kk as f64 + 1.0);
    }
    out
}

struct GaussRoute {
    lambda_a: f64,
    mu_b: f64,
    floor: f64,
    crude_tail: f64,
    signed: Vec<f64>,
}

/// One application of the Gauss transfer operator to an interpolant.
fn gauss_transfer(g: &Cheb, nodes: &[f64], branches: usize) -> (Cheb, f64) {
    const TAYLOR: usize = 3;
    let a = g.taylor_at_zero(TAYLOR + 1);
    let values: Vec<f64> = nodes
        .iter()
        .map(|&t| {
            let head: f64 = (1..=branches)
                .map(|j| {
                    let d = j as f64 + t;
                    g.eval(1.0 / d) / (d * d)
                })
                .sum();
            let tail: f64 = (0..=TAYLOR)
                .map(|r| a[r] * hurwitz_zeta(r as f64 + 2.0, branches as f64 + 1.0 + t))
                .sum();
            head + tail
        })
        .collect();
    let remainder = a[TAYLOR + 1].abs() * 2.0 * hurwitz_zeta(TAYLOR as f64 + 3.0, branches as f64 + 1.0);
    (Cheb::fit(&values), remainder)
}

fn gauss_route(a: &[Symbol], b: &(Rational, Rational), ns: &[usize], degree: usize, branches: usize) -> GaussRoute {
    let (mut q, mut q_prev) = (1.0f64, 0.0f64);
    for &c in a {
        let next = c as f64 * q + q_prev;
        q_prev = q;
        q = next;
    }
    let nodes = Cheb::nodes(degree);
    let mut g = Cheb::fit(&nodes.iter().map(|&t| (q + t * q_prev).powi(-2)).collect::<Vec<_>>());
    let lambda_a = g.integral(0.0, 1.0);
    let (blo, bhi) = (b.0.to_f64(), b.1.to_f64());
    let mu_b = gauss_measure(blo, bhi);
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let mut by_n = BTreeMap::new();
    let mut err = g.truncation();
    let mut crude: f64 = 0.0;
    let basel_tail = crate::measures::basel_tail(branches);
    for n in 1..=n_max {
        crude = crude.max(g.sup_abs() * basel_tail);
        let (next, rem) = gauss_transfer(&g, &nodes, branches);
        g = next;
        err += rem + g.truncation();
        by_n.insert(n, g.integral(blo, bhi) - lambda_a * mu_b);
    }
    GaussRoute {
        lambda_a,
        mu_b,
        floor: err.max(1e-15),
        crude_tail: crude,
        signed: ns.iter().map(|n| by_n[n]).collect(),
    }
}
