//! Deterministic checks of the growth and continuity conditions on a kernel
//! family: exponential type, the weighted series bound, and the modulus of
//! continuity profile over site pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::KernelFamily;
use crate::kernel::{factorial, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialType {
    /// `max_{n >= 1, z} (n! ||f_n^z||)^{1/n}`.
    #[serde(with = "crate::serde_ext")]
    pub delta_fit: f64,
    pub pass: bool,
}

pub fn check_exponential_type(fam: &KernelFamily) -> ExponentialType {
    let mut delta: f64 = 0.0;
    for z in 0..fam.site_count() {
        for (n, k) in fam.orders(z).iter().enumerate().skip(1) {
            let norm = k.norm();
            if norm > 0.0 || !norm.is_finite() {
                delta = delta.max((factorial(n) * norm).powf(1.0 / n as f64));
            }
        }
    }
    ExponentialType {
        delta_fit: delta,
        pass: delta.is_finite(),
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `sum_{n > n_max} x^n / sqrt(n!)`, summed until the terms fall below
/// double precision and closed with a geometric bound.
pub fn factorial_tail(x: f64, n_max: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut n = n_max + 1;
    let mut term = (n as f64 * x.ln() - 0.5 * ln_factorial(n)).exp();
    let mut sum = 0.0;
    loop {
        sum += term;
        let ratio = x / ((n + 1) as f64).sqrt();
        if ratio < 0.5 && term <= 1e-18 * sum.max(f64::MIN_POSITIVE) {
            return sum + term * ratio / (1.0 - ratio);
        }
        if !sum.is_finite() {
            return f64::INFINITY;
        }
        term *= ratio;
        n += 1;
    }
}

/// Per-site partial sums `sum_{n <= n_max} sqrt(n!) kappa^n ||f_n^z||`.
pub fn weighted_partial_sums(fam: &KernelFamily, kappa: f64) -> Vec<f64> {
    (0..fam.site_count())
        .map(|z| {
            fam.orders(z)
                .iter()
                .enumerate()
                .map(|(n, k)| factorial(n).sqrt() * kappa.powi(n as i32) * k.norm())
                .sum()
        })
        .collect()
}

/// Supremum over sites of the weighted series, with a factorial-ratio tail
/// estimate from the fitted exponential-type constant. Returns `+inf` when
/// the family is not of exponential type and its terms are still growing at
/// the truncation order.
pub fn series_bound(fam: &KernelFamily, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::config(format!("kappa must be positive, got {kappa}")));
    }
    let et = check_exponential_type(fam);
    let partial = weighted_partial_sums(fam, kappa)
        .into_iter()
        .fold(0.0_f64, f64::max);
    if !et.pass {
        let n = fam.n_max();
        let growing = (0..fam.site_count()).any(|z| {
            n >= 1 && {
                let t = |k: usize| factorial(k).sqrt() * kappa.powi(k as i32) * fam.kernel(z, k).norm();
                t(n) > t(n - 1)
            }
        });
        return Ok(if growing { f64::INFINITY } else { partial });
    }
    Ok(partial + factorial_tail(kappa * et.delta_fit, fam.n_max()))
}

/// `omega(s) = c * s^gamma`, with an exponent `alpha0 < gamma` for the
/// integrability condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusSpec {
    pub c: f64,
    pub gamma: f64,
    pub alpha0: f64,
}

impl ModulusSpec {
    pub fn new(c: f64, gamma: f64, alpha0: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::config(format!("modulus constant must be positive, got {c}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("modulus exponent must lie in (0, 1), got {gamma}")));
        }
        if !(alpha0 > 0.0 && alpha0 < gamma) {
            return Err(Error::config(format!(
                "alpha0 must lie in (0, gamma = {gamma}), got {alpha0}"
            )));
        }
        Ok(ModulusSpec { c, gamma, alpha0 })
    }

    pub fn omega(&self, s: f64) -> f64 {
        self.c * s.powf(self.gamma)
    }
}

/// Norm used for kernel differences in the continuity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusNorm {
    /// `||f_n^z - f_n^y||` in `L^2`.
    L2,
    /// For product-form families: `||f_n||_{L^q} * ||1_{A_z}^n - 1_{A_y}^n||_{L^{2q/(q-2)}}`.
    HolderSplit { q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub y: usize,
    pub z: usize,
    pub distance: f64,
    #[serde(with = "crate::serde_ext")]
    pub series: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusProfile {
    pub kappa: f64,
    pub rows: Vec<PairRow>,
    /// `min over pairs of omega - L`; negative when some pair violates the bound.
    #[serde(with = "crate::serde_ext")]
    pub worst_margin: f64,
    /// Log-log regression slope of `L` against the site distance.
    pub fitted_exponent: Option<f64>,
    pub pass: bool,
}

pub fn modulus_profile(
    fam: &KernelFamily,
    kappa: f64,
    spec: &ModulusSpec,
    norm: ModulusNorm,
) -> Result<ModulusProfile> {
    if fam.site_count() < 2 {
        return Err(Error::config("modulus profile needs at least two sites"));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::config(format!("kappa must be positive, got {kappa}")));
    }
    let weights: Vec<f64> = (0..=fam.n_max())
        .map(|n| factorial(n).sqrt() * kappa.powi(n as i32))
        .collect();
    let split = match norm {
        ModulusNorm::L2 => None,
        ModulusNorm::HolderSplit { q } => {
            if q <= 2.0 {
                return Err(Error::config(format!("Hoelder exponent q must exceed 2, got {q}")));
            }
            let form = fam
                .product_form()
                .ok_or_else(|| Error::config("Hoelder split needs a product-form family"))?;
            let base_norms = form
                .base
                .iter()
                .map(|k| k.lp_norm(q))
                .collect::<Result<Vec<_>>>()?;
            Some((q, form, base_norms))
        }
    };

    let mut rows = Vec::new();
    for y in 0..fam.site_count() {
        for z in (y + 1)..fam.site_count() {
            let distance = fam.sites().distance(y, z);
            let series = match &split {
                None => (0..=fam.n_max())
                    .map(|n| {
                        let diff = fam.kernel(z, n).sub(fam.kernel(y, n))?;
                        Ok(weights[n] * diff.norm())
                    })
                    .sum::<Result<f64>>()?,
                Some((q, form, base_norms)) => {
                    let p = 2.0 * q / (q - 2.0);
                    let (ma, mb, mab) = box_measures(fam, &form.boxes[y], &form.boxes[z]);
                    let f0 = (fam.f0(z) - fam.f0(y)).abs();
                    f0 + (1..=fam.n_max())
                        .map(|n| {
                            let k = n as i32;
                            let integral = (ma.powi(k) + mb.powi(k) - 2.0 * mab.powi(k)).max(0.0);
                            weights[n] * base_norms[n] * integral.powf(1.0 / p)
                        })
                        .sum::<f64>()
                }
            };
            rows.push(PairRow {
                y,
                z,
                distance,
                series,
                omega: spec.omega(distance),
            });
        }
    }

    let worst_margin = rows
        .iter()
        .map(|r| r.omega - r.series)
        .fold(f64::INFINITY, f64::min);
    let pass = rows
        .iter()
        .all(|r| r.series <= r.omega * (1.0 + 1e-12) + 1e-15);
    let fitted_exponent = loglog_slope(
        rows.iter()
            .filter(|r| r.series > 0.0 && r.distance > 0.0)
            .map(|r| (r.distance.ln(), r.series.ln())),
    );
    Ok(ModulusProfile {
        kappa,
        rows,
        worst_margin,
        fitted_exponent,
        pass,
    })
}

/// Reference measures of two boxes and of their intersection.
fn box_measures(
    fam: &KernelFamily,
    a: &(Vec<f64>, Vec<f64>),
    b: &(Vec<f64>, Vec<f64>),
) -> (f64, f64, f64) {
    let grid = fam.grid();
    let lo: Vec<f64> = a.0.iter().zip(&b.0).map(|(x, y)| x.max(*y)).collect();
    let hi: Vec<f64> = a.1.iter().zip(&b.1).map(|(x, y)| x.min(*y)).collect();
    let measure = |lower: &[f64], upper: &[f64]| -> f64 {
        (0..grid.len())
            .map(|c| grid.measure(c) * grid.overlap_fraction(c, lower, upper))
            .sum()
    };
    (measure(&a.0, &a.1), measure(&b.0, &b.1), measure(&lo, &hi))
}

/// Least-squares slope of `y` on `x`.
pub fn loglog_slope(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Differences between two kernels of a family, for reporting.
pub fn kernel_distance(a: &Kernel, b: &Kernel) -> Result<f64> {
    a.distance(b)
}
