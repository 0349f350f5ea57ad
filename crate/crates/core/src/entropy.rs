//! Entropy estimators: Shannon–McMillan–Breiman along an orbit, Lévy's
//! constant from convergent denominators, and the good-atom mass of
//! property E.

use rayon::prelude::*;
use rug::float::Round;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::cylinders::{
    convergents, cylinder_interval, cylinder_log_measure, cylinder_log_measure_float, cylinder_measure,
    enumerate_cylinders,
};
use crate::error::{Error, Result};
use crate::interval::{sample, EnclosedReal, PrecisionConfig};
use crate::maps::{levy_constant, orbit_digits, DigitString, MapSpec};
use crate::measures::MeasureSpec;

/// Working precision for log-measures.
const LOG_BITS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub value: f64,
}

/// `10, 100, …` below `n_max`, then `n_max`.
pub fn decade_checkpoints(n_max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(10usize), |&n| n.checked_mul(10))
        .take_while(|&n| n < n_max)
        .collect();
    if n_max > 0 {
        out.push(n_max);
    }
    out
}

fn certified(d: &DigitString) -> Result<()> {
    if d.is_complete() {
        Ok(())
    } else {
        Err(Error::PrecisionExhausted {
            achieved: d.valid_len(),
            requested: d.requested,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub map: MapSpec,
    pub closed_form: f64,
    pub formula: String,
    /// `(n, −(1/n) ln μ(Aⁿ(x)))`.
    pub smb_series: Vec<SeriesPoint>,
    pub final_estimate: f64,
    pub relative_error: f64,
}

/// `−(1/n) ln μ(Aⁿ(x))` at decade checkpoints up to `n_max`.
pub fn smb_estimate(
    x: EnclosedReal,
    map: &MapSpec,
    measure: &MeasureSpec,
    n_max: usize,
    cfg: &PrecisionConfig,
) -> Result<EntropyReport> {
    if !map.has_generating_partition() {
        return Err(Error::Unsupported(format!("entropy estimation for {map}")));
    }
    let d = orbit_digits(map, x, n_max, cfg);
    certified(&d)?;
    let bits = cfg.bits + 64;
    let smb_series = decade_checkpoints(n_max)
        .into_iter()
        .map(|n| {
            let c = cylinder_interval(map, &d.symbols[..n], bits)?;
            let lm = cylinder_log_measure_float(&c, measure, LOG_BITS);
            let est = Float::with_val(LOG_BITS, -lm) / n as u64;
            Ok(SeriesPoint { n, value: est.to_f64() })
        })
        .collect::<Result<Vec<_>>>()?;
    let h = map.entropy();
    let final_estimate = smb_series.last().map_or(f64::NAN, |p| p.value);
    Ok(EntropyReport {
        map: map.clone(),
        closed_form: h,
        formula: map.entropy_formula().into(),
        smb_series,
        final_estimate,
        relative_error: ((final_estimate - h) / h).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyReport {
    pub requested: usize,
    /// `(n, (1/n) ln q_n)`.
    pub series: Vec<SeriesPoint>,
    pub final_value: f64,
    pub reference: f64,
    pub formula: String,
    /// `q_n ≥ q_{n−1} + q_{n−2}` and `q_n ≥ F_{n+1}` at every `n`.
    pub fibonacci_bound: bool,
}

/// `(1/n) ln q_n` along the continued fraction of `x`.
pub fn levy_estimate(x: EnclosedReal, n_max: usize, cfg: &PrecisionConfig) -> Result<LevyReport> {
    let d = orbit_digits(&MapSpec::Gauss, x, n_max, cfg);
    certified(&d)?;
    Ok(levy_from_digits(&d.symbols))
}

/// Lévy series of an explicit partial-quotient string.
pub fn levy_from_digits(digits: &[u64]) -> LevyReport {
    let marks = decade_checkpoints(digits.len());
    let mut next = marks.iter().peekable();
    let mut series = Vec::new();
    // F_1 = F_2 = 1; q_n is compared with F_{n+1}.
    let (mut f_prev, mut f) = (Integer::from(1), Integer::from(1));
    let mut q_prev2 = Integer::new();
    let mut ok = true;
    for c in convergents(digits) {
        let f_next = Integer::from(&f + &f_prev);
        f_prev = std::mem::replace(&mut f, f_next);
        let recurrence = c.n < 2 || c.q >= Integer::from(&c.q_prev + &q_prev2);
        ok &= recurrence && c.q >= f_prev;
        q_prev2 = c.q_prev.clone();
        if next.peek() == Some(&&c.n) {
            let l = Float::with_val(LOG_BITS, &c.q).ln() / c.n as u64;
            series.push(SeriesPoint { n: c.n, value: l.to_f64() });
            next.next();
        }
    }
    LevyReport {
        requested: digits.len(),
        final_value: series.last().map_or(f64::NAN, |p| p.value),
        series,
        reference: levy_constant(),
        formula: "pi^2/(12 log 2)".into(),
        fibonacci_bound: ok,
    }
}

/// Point drawn from the Gauss measure by inverting its distribution
/// function: `x = 2^u − 1` for the uniform sample `u` of `seed`.
pub fn sample_gauss_measure(seed: u64, bits: u32) -> EnclosedReal {
    let u = sample(seed, bits);
    let prec = u.prec() + 8;
    let lo = Float::with_val_round(prec, u.lo().exp2_ref(), Round::Down).0;
    let hi = Float::with_val_round(prec, u.hi().exp2_ref(), Round::Up).0;
    let lo = Float::with_val_round(prec, lo - 1u32, Round::Down).0;
    let hi = Float::with_val_round(prec, hi - 1u32, Round::Up).0;
    EnclosedReal::from_bounds(lo.max(&Float::new(prec)), hi.min(&Float::with_val(prec, 1)))
        .expect("ordered bounds")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PropertyEMethod {
    Exact,
    Sampled { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyERow {
    pub n: usize,
    /// Cylinders enumerated, or sample points used.
    pub atoms: usize,
    /// μ-mass of rank-n cylinders with `e^{−n(h+ε)} ≤ μ(A) ≤ e^{−n(h−ε)}`.
    pub good_mass: f64,
    /// λ-mass of `{x : |−ln λ(Iₙ(x))/n − h| > ε}`.
    pub lebesgue_out_of_band: Option<f64>,
    /// `(β/(β−1)) e^{−εn}` for β-maps.
    pub envelope: Option<f64>,
    pub within_envelope: Option<bool>,
    /// Samples whose orbit stopped before rank n.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyEReport {
    pub map: MapSpec,
    pub epsilon: f64,
    pub entropy: f64,
    pub method: PropertyEMethod,
    pub rows: Vec<PropertyERow>,
    /// Smallest `c₀ ≥ 0` with `g(n) ≥ 1 − c₀/n` on the rows.
    pub c0: f64,
}

fn fit_c0(rows: &[PropertyERow], exact_bad: &[Option<Rational>]) -> f64 {
    rows.iter()
        .zip(exact_bad)
        .map(|(r, bad)| match bad {
            Some(b) => Rational::from(b * r.n as u64).to_f64(),
            None => r.n as f64 * (1.0 - r.good_mass),
        })
        .fold(0.0, f64::max)
}

/// Enumeration cap on rank-n cylinders.
pub const DEFAULT_CYLINDER_CAP: usize = 1 << 20;

/// Good-atom mass for finite-alphabet maps by exact enumeration.
///
/// With Lebesgue measure and rational parameters the bad mass is summed as
/// an exact rational, so an empty bad class gives `g(n) = 1` and `c₀ = 0`
/// with no rounding.
pub fn property_e_mass(
    map: &MapSpec,
    measure: &MeasureSpec,
    epsilon: f64,
    ns: &[usize],
    bits: u32,
    cap: usize,
) -> Result<PropertyEReport> {
    if map.max_symbol().is_none() {
        return Err(Error::Unsupported(format!(
            "exact enumeration for {map}; use the sampled estimator"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange(format!("epsilon {epsilon}")));
    }
    let h = map.entropy();
    let beta = map.affine().map(|(b, _)| b.to_f64());
    let is_beta_map = matches!(map, MapSpec::Beta(_) | MapSpec::TimesB(_));
    let mut rows = Vec::new();
    let mut exact_bad = Vec::new();
    for &n in ns {
        let cyl = enumerate_cylinders(map, n, bits, cap)?;
        let (lo, hi) = (-(n as f64) * (h + epsilon), -(n as f64) * (h - epsilon));
        let mut good = 0.0;
        let mut total = 0.0;
        let mut bad_q = Some(Rational::new());
        let mut out_of_band = 0.0;
        for c in &cyl {
            let exact = match measure {
                MeasureSpec::Lebesgue => c.lebesgue_exact(),
                _ => None,
            };
            let lm = cylinder_log_measure(c, measure);
            let mass = cylinder_measure(c, measure);
            total += mass;
            if lo <= lm && lm <= hi {
                good += mass;
            } else {
                match (&mut bad_q, exact) {
                    (Some(acc), Some(q)) => *acc += q,
                    _ => bad_q = None,
                }
            }
            let ll = c.log_lebesgue();
            if (-ll / n as f64 - h).abs() > epsilon {
                out_of_band += c.lebesgue();
            }
        }
        let exact_q = match (measure, &bad_q) {
            (MeasureSpec::Lebesgue, Some(_)) if map.affine_exact().is_some() => bad_q,
            _ => None,
        };
        let good_mass = match &exact_q {
            Some(b) => Rational::from(1 - b).to_f64(),
            None if total > 0.0 => good / total,
            None => 0.0,
        };
        let envelope = beta.filter(|_| is_beta_map).map(|b| b / (b - 1.0) * (-epsilon * n as f64).exp());
        rows.push(PropertyERow {
            n,
            atoms: cyl.len(),
            good_mass,
            lebesgue_out_of_band: Some(out_of_band),
            within_envelope: envelope.map(|e| out_of_band <= e + 1e-12),
            envelope,
            skipped: 0,
        });
        exact_bad.push(exact_q);
    }
    Ok(PropertyEReport {
        map: map.clone(),
        epsilon,
        entropy: h,
        method: PropertyEMethod::Exact,
        c0: fit_c0(&rows, &exact_bad),
        rows,
    })
}

/// Good-atom mass for the Gauss map, estimated from `samples` points drawn
/// from the Gauss measure (seeds `seed0, seed0 + 1, …`).
pub fn property_e_sampled(
    epsilon: f64,
    ns: &[usize],
    samples: usize,
    seed0: u64,
    cfg: &PrecisionConfig,
) -> Result<PropertyEReport> {
    let map = MapSpec::Gauss;
    let h = map.entropy();
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let per_sample: Vec<Vec<Option<bool>>> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let x = sample_gauss_measure(seed0 + k, cfg.bits);
            let d = orbit_digits(&map, x, n_max, cfg);
            ns.iter()
                .map(|&n| {
                    (d.valid_len() >= n).then(|| {
                        let c = cylinder_interval(&map, &d.symbols[..n], cfg.bits).expect("valid digits");
                        let lm = cylinder_log_measure(&c, &MeasureSpec::GaussMeasure);
                        (-lm / n as f64 - h).abs() <= epsilon
                    })
                })
                .collect()
        })
        .collect();
    let rows: Vec<PropertyERow> = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let used: Vec<bool> = per_sample.iter().filter_map(|s| s[i]).collect();
            let good = used.iter().filter(|&&g| g).count();
            PropertyERow {
                n,
                atoms: used.len(),
                good_mass: if used.is_empty() { 0.0 } else { good as f64 / used.len() as f64 },
                lebesgue_out_of_band: None,
                envelope: None,
                within_envelope: None,
                skipped: samples - used.len(),
            }
        })
        .collect();
    let none = vec![None; rows.len()];
    Ok(PropertyEReport {
        map,
        epsilon,
        entropy: h,
        method: PropertyEMethod::Sampled { samples },
        c0: fit_c0(&rows, &none),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{gauss_entropy, RealParam};

    fn cfg(map: &MapSpec, n: usize) -> PrecisionConfig {
        PrecisionConfig::auto(&[map.clone()], n + 8, 2f64.powi(-30)).unwrap()
    }

    #[test]
    fn checkpoints() {
        assert_eq!(decade_checkpoints(5000), vec![10, 100, 1000, 5000]);
        assert_eq!(decade_checkpoints(1000), vec![10, 100, 1000]);
        assert_eq!(decade_checkpoints(7), vec![7]);
    }

    #[test]
    fn smb_base_b_is_exact() {
        for b in [2u32, 3, 10] {
            let map = MapSpec::TimesB(b);
            let c = cfg(&map, 2000);
            let r = smb_estimate(sample(b as u64, c.bits), &map, &MeasureSpec::Lebesgue, 2000, &c).unwrap();
            assert!(r.smb_series.iter().all(|p| p.value == (b as f64).ln()), "{r:?}");
            assert_eq!(r.relative_error, 0.0);
        }
    }

    #[test]
    fn smb_gauss_single_seed() {
        let map = MapSpec::Gauss;
        let c = cfg(&map, 2000);
        let r = smb_estimate(sample(1, c.bits), &map, &MeasureSpec::GaussMeasure, 2000, &c).unwrap();
        assert!(r.relative_error < 0.06, "{r:?}");
    }

    #[test]
    fn levy_special_points() {
        let c = cfg(&MapSpec::Gauss, 600);
        let golden = RealParam::Golden.enclose(c.bits + 16).sub_integer(1, c.bits + 16);
        let r = levy_estimate(golden, 500, &c).unwrap();
        let log_phi = RealParam::Golden.log();
        assert!((r.final_value - log_phi).abs() < 2e-3, "{r:?}");
        assert!(r.fibonacci_bound);
        let r = levy_estimate(RealParam::Sqrt2Minus1.enclose(c.bits + 16), 500, &c).unwrap();
        assert!((r.final_value - (1.0 + 2f64.sqrt()).ln()).abs() < 2e-3, "{r:?}");
    }

    #[test]
    fn levy_golden_digits_are_fibonacci() {
        let r = levy_from_digits(&[1; 100]);
        assert!(r.fibonacci_bound);
        let q100 = convergents(&[1; 100]).last().unwrap().q;
        // q_n = F_{n+1}
        let mut f = (Integer::from(1), Integer::from(1));
        for _ in 0..99 {
            f = (f.1.clone(), Integer::from(&f.0 + &f.1));
        }
        assert_eq!(q100, f.1);
    }

    #[test]
    fn property_e_base_b() {
        let r = property_e_mass(&MapSpec::TimesB(3), &MeasureSpec::Lebesgue, 0.01, &[1, 4, 8], 128, 1 << 16).unwrap();
        assert!(r.rows.iter().all(|row| row.good_mass == 1.0));
        assert_eq!(r.c0, 0.0);
    }

    #[test]
    fn property_e_golden_envelope() {
        let map = MapSpec::golden();
        let mu = MeasureSpec::natural(&map).unwrap();
        let ns: Vec<usize> = (1..=12).collect();
        let r = property_e_mass(&map, &mu, 0.05, &ns, 256, 1 << 16).unwrap();
        for row in &r.rows {
            assert!(row.within_envelope.unwrap(), "{row:?}");
            assert!((0.0..=1.0).contains(&row.good_mass));
        }
        // φ^{-(n+1)} cylinders leave the band only while ln φ / n > ε
        let r12 = r.rows.last().unwrap();
        assert_eq!(r12.lebesgue_out_of_band, Some(0.0));
    }

    #[test]
    fn gauss_measure_sampler() {
        let bits = 128;
        let n = 4000;
        let below_half = (0..n)
            .filter(|&s| sample_gauss_measure(s, bits).hi().to_f64() < 0.5)
            .count() as f64
            / n as f64;
        let target = (1.5f64).log2();
        assert!((below_half - target).abs() < 5.0 * (target * (1.0 - target) / n as f64).sqrt());
    }

    #[test]
    fn property_e_gauss_sampled() {
        let c = cfg(&MapSpec::Gauss, 200);
        let r = property_e_sampled(0.4, &[50, 200], 200, 1, &c).unwrap();
        assert!(r.rows.iter().all(|row| row.skipped == 0));
        assert!(r.rows[1].good_mass >= 0.95, "{r:?}");
        assert!((r.entropy - gauss_entropy()).abs() == 0.0);
    }
}
