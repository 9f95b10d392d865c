//! Truncated chaos processes over a site set: the noisy process `X^eps`,
//! the controlled process `X^{eps,u}` and the skeleton `X^u`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chaos::Contraction;
use crate::checks::{check_exponential_type, factorial_tail, ExponentialType};
use crate::error::{Error, Result};
use crate::family::KernelFamily;
use crate::grid::{ensure_same, SiteSet};
use crate::noise::{Control, NoisePath};

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

/// Family of kernels `f_n^{eps,z}` for a given `eps`.
pub type EpsRule = Arc<dyn Fn(f64) -> Result<KernelFamily> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    ExponentialType(ExponentialType),
    /// A user-supplied finite value of the weighted series bound.
    SeriesBound(f64),
}

/// A kernel family with its growth certificate and truncation settings.
#[derive(Clone)]
pub struct ChaosSpec {
    family: KernelFamily,
    certificate: Certificate,
    eps_rule: Option<EpsRule>,
    tail_tolerance: f64,
}

impl fmt::Debug for ChaosSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChaosSpec")
            .field("sites", &self.family.site_count())
            .field("n_max", &self.family.n_max())
            .field("certificate", &self.certificate)
            .field("eps_rule", &self.eps_rule.is_some())
            .field("tail_tolerance", &self.tail_tolerance)
            .finish()
    }
}

impl ChaosSpec {
    /// Certify the family as exponential type.
    pub fn new(family: KernelFamily) -> Result<Self> {
        let et = check_exponential_type(&family);
        if !et.pass {
            return Err(Error::NoCertificate);
        }
        Ok(ChaosSpec {
            family,
            certificate: Certificate::ExponentialType(et),
            eps_rule: None,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        })
    }

    /// Accept the family on an explicit finite series bound.
    pub fn with_series_bound(family: KernelFamily, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::NoCertificate);
        }
        Ok(ChaosSpec {
            family,
            certificate: Certificate::SeriesBound(bound),
            eps_rule: None,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        })
    }

    /// Kernels that depend on `eps`. The base family stays the limit used by
    /// the skeleton.
    pub fn with_eps_rule(mut self, rule: EpsRule) -> Self {
        self.eps_rule = Some(rule);
        self
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    /// Truncate (or zero-pad) to order `n`.
    pub fn with_n_max(mut self, n: usize) -> Self {
        self.family = self.family.with_n_max(n);
        self
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn n_max(&self) -> usize {
        self.family.n_max()
    }

    pub fn sites(&self) -> &SiteSet {
        self.family.sites()
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    fn delta(&self) -> Option<f64> {
        match self.certificate {
            Certificate::ExponentialType(et) => Some(et.delta_fit),
            Certificate::SeriesBound(_) => None,
        }
    }

    /// Kernels in force at `eps`.
    pub fn family_at(&self, eps: f64) -> Result<std::borrow::Cow<'_, KernelFamily>> {
        match &self.eps_rule {
            None => Ok(std::borrow::Cow::Borrowed(&self.family)),
            Some(rule) => {
                let fam = rule(eps)?;
                ensure_same(fam.grid(), self.family.grid())?;
                if fam.site_count() != self.family.site_count() {
                    return Err(Error::Dimension {
                        expected: self.family.site_count(),
                        found: fam.site_count(),
                    });
                }
                Ok(std::borrow::Cow::Owned(fam))
            }
        }
    }

    fn tail_at(&self, kappa: f64) -> f64 {
        self.delta()
            .map_or(0.0, |d| factorial_tail(kappa * d, self.n_max()))
    }
}

/// One value per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathValue {
    pub sites: SiteSet,
    pub values: Vec<f64>,
    /// Estimated size of the dropped orders.
    pub tail_estimate: f64,
    /// Set when `tail_estimate` exceeds the spec's tolerance.
    pub tail_warning: bool,
}

impl PathValue {
    fn new(spec: &ChaosSpec, values: Vec<f64>, tail: f64) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("process value at site {i}")));
        }
        Ok(PathValue {
            sites: spec.sites().clone(),
            values,
            tail_estimate: tail,
            tail_warning: tail > spec.tail_tolerance,
        })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("noise scale must be finite and nonnegative, got {eps}")));
    }
    Ok(())
}

/// `f_0^z + sum_n eps^n I_n(f_n^z)` per site.
pub fn assemble_xeps(spec: &ChaosSpec, path: &NoisePath, eps: f64) -> Result<PathValue> {
    check_eps(eps)?;
    let fam = spec.family_at(eps)?;
    ensure_same(fam.grid(), path.grid())?;
    let mut c = Contraction::new(path.grid(), path.increments(), None)?;
    let values = evaluate(&fam, &mut c, |n| eps.powi(n as i32))?;
    PathValue::new(spec, values, spec.tail_at(eps))
}

/// `sum_n I_n^{eps,u}(f_n^z)` per site.
pub fn assemble_controlled(spec: &ChaosSpec, path: &NoisePath, u: &Control, eps: f64) -> Result<PathValue> {
    check_eps(eps)?;
    ensure_same(path.grid(), u.grid())?;
    if u.u().values().iter().all(|&v| v == 0.0) {
        return assemble_xeps(spec, path, eps);
    }
    let fam = spec.family_at(eps)?;
    ensure_same(fam.grid(), path.grid())?;
    let x: Vec<f64> = path.increments().iter().map(|w| eps * w).collect();
    let d = u.cell_masses();
    let mut c = Contraction::new(path.grid(), &x, Some(&d))?;
    let values = evaluate(&fam, &mut c, |_| 1.0)?;
    PathValue::new(spec, values, spec.tail_at(eps + u.norm()))
}

/// `sum_n J_n^u(f_n^z)` per site, with the limit kernels.
pub fn skeleton(spec: &ChaosSpec, u: &Control) -> Result<PathValue> {
    let fam = spec.family();
    ensure_same(fam.grid(), u.grid())?;
    let d = u.cell_masses();
    let x = vec![0.0; d.len()];
    let mut c = Contraction::new(u.grid(), &x, Some(&d))?;
    let values = evaluate(fam, &mut c, |_| 1.0)?;
    PathValue::new(spec, values, spec.tail_at(u.norm()))
}

fn evaluate(fam: &KernelFamily, c: &mut Contraction<'_>, weight: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    (0..fam.site_count())
        .map(|z| {
            let mut total = 0.0;
            for (n, k) in fam.orders(z).iter().enumerate() {
                let w = weight(n);
                if w == 0.0 || k.is_zero() {
                    continue;
                }
                total += w * c.eval(k)?;
            }
            Ok(total)
        })
        .collect()
}

/// `sum_{n > N} (kappa Delta)^n / sqrt(n!)`.
pub fn truncation_tail(spec: &ChaosSpec, kappa: f64) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(Error::config(format!("kappa must be nonnegative, got {kappa}")));
    }
    let delta = spec.delta().ok_or(Error::NoCertificate)?;
    Ok(factorial_tail(kappa * delta, spec.n_max()))
}
