//! Run configuration: a single JSON document.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::applications::{adapted_kernels, exponential_functional_kernels, skorohod_equation_kernels, SkorohodCoefficient};
use crate::checks::{ModulusNorm, ModulusSpec};
use crate::error::{Error, Result};
use crate::family::KernelFamily;
use crate::grid::{Axis, Grid, GridFn, MeasureSpec, SiteSet};
use crate::kernel::{Kernel, SeparableTerm};
use crate::kernel_io::{read_dense_binary, read_dense_csv};
use crate::ldp::{EventSpec, Speed, MIN_SAMPLES};
use crate::noise::Control;
use crate::process::ChaosSpec;
use crate::rate::RateConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub family: FamilyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<ChecksConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rate_queries: Vec<RateQuery>,
    #[serde(default)]
    pub rate_solver: RateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ldp_scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Not echoed: it does not change any output.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Not echoed: outputs do not depend on the worker count.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub time: Axis,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub space: Vec<Axis>,
    #[serde(default)]
    pub measure: MeasureSpec,
}

/// A grid function given by a rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionConfig {
    Constant { value: f64 },
    /// Indicator of the box `[lower, upper]` in grid coordinates.
    Indicator { lower: Vec<f64>, upper: Vec<f64> },
    /// One value per cell.
    Values { values: Vec<f64> },
    /// `sum_k c_k t^k` in the time coordinate.
    Polynomial { coefficients: Vec<f64> },
}

impl FunctionConfig {
    pub fn build(&self, grid: &Arc<Grid>) -> Result<GridFn> {
        match self {
            FunctionConfig::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::config("constant function value must be finite"));
                }
                Ok(GridFn::constant(grid, *value))
            }
            FunctionConfig::Indicator { lower, upper } => GridFn::indicator_box(grid, lower, upper),
            FunctionConfig::Values { values } => GridFn::new(grid, values.clone()),
            FunctionConfig::Polynomial { coefficients } => GridFn::from_fn(grid, |p| {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * p[0] + c)
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFileFormat {
    Csv,
    Binary,
}

/// One chaos term at a single site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermConfig {
    /// `coeff * g^{(x) order}`.
    RankOne { order: usize, coeff: f64, g: FunctionConfig },
    /// `coeff * Sym(g_1 (x) ... (x) g_n)`.
    Product { coeff: f64, factors: Vec<FunctionConfig> },
    /// Dense symmetric kernel read from a file.
    Dense {
        order: usize,
        path: PathBuf,
        format: KernelFileFormat,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SitesConfig {
    /// `n` equispaced sites `1/n, ..., 1`.
    Uniform(usize),
    List(Vec<Vec<f64>>),
}

impl SitesConfig {
    fn build(&self) -> Result<SiteSet> {
        match self {
            SitesConfig::Uniform(n) => SiteSet::uniform_1d(*n),
            SitesConfig::List(v) => SiteSet::new(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Constant { value: f64 },
    Separable { alpha: FunctionConfig, beta: FunctionConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// `f0 + I_1(f)` at one site.
    FirstChaos {
        #[serde(default)]
        f0: f64,
        f: FunctionConfig,
    },
    /// Sum of terms at one site; `n_max` defaults to the highest order given.
    Chaos {
        #[serde(default)]
        f0: f64,
        terms: Vec<TermConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_max: Option<usize>,
    },
    /// `f_n = h^{(x) n} / n!`.
    ExponentialFunctional {
        h: FunctionConfig,
        #[serde(default = "default_n_max")]
        n_max: usize,
    },
    /// A one-site base family restricted to `[0, z]` per site.
    Adapted { base: Box<FamilyConfig>, sites: SitesConfig },
    /// Linear Skorohod equation `X_t = x0(t) + int a^t(s) X_s dW_s`.
    Skorohod {
        coefficient: CoefficientConfig,
        x0: FunctionConfig,
        sites: SitesConfig,
        #[serde(default = "default_n_max")]
        n_max: usize,
    },
}

fn default_n_max() -> usize {
    12
}

impl FamilyConfig {
    pub fn build(&self, grid: &Arc<Grid>) -> Result<KernelFamily> {
        match self {
            FamilyConfig::FirstChaos { f0, f } => KernelFamily::first_chaos(*f0, &f.build(grid)?),
            FamilyConfig::Chaos { f0, terms, n_max } => build_chaos(grid, *f0, terms, *n_max),
            FamilyConfig::ExponentialFunctional { h, n_max } => exponential_functional_kernels(&h.build(grid)?, *n_max),
            FamilyConfig::Adapted { base, sites } => {
                let base = base.build(grid)?;
                if base.site_count() != 1 {
                    return Err(Error::config("the base of an adapted family must have a single site"));
                }
                adapted_kernels(base.orders(0), &sites.build()?)
            }
            FamilyConfig::Skorohod {
                coefficient,
                x0,
                sites,
                n_max,
            } => {
                let a = match coefficient {
                    CoefficientConfig::Constant { value } => SkorohodCoefficient::Constant(*value),
                    CoefficientConfig::Separable { alpha, beta } => SkorohodCoefficient::Separable {
                        alpha: alpha.build(grid)?,
                        beta: beta.build(grid)?,
                    },
                };
                skorohod_equation_kernels(&a, &x0.build(grid)?, &sites.build()?, *n_max)
            }
        }
    }

    /// Resolve relative kernel-file paths against the config's directory.
    fn resolve_paths(&mut self, base_dir: &Path) {
        match self {
            FamilyConfig::Chaos { terms, .. } => {
                for t in terms {
                    if let TermConfig::Dense { path, .. } = t {
                        if path.is_relative() {
                            *path = base_dir.join(&*path);
                        }
                    }
                }
            }
            FamilyConfig::Adapted { base, .. } => base.resolve_paths(base_dir),
            _ => {}
        }
    }
}

fn build_chaos(
    grid: &Arc<Grid>,
    f0: f64,
    terms: &[TermConfig],
    n_max: Option<usize>,
) -> Result<KernelFamily> {
    let kernels = terms
        .iter()
        .map(|t| match t {
            TermConfig::RankOne { order, coeff, g } => Kernel::rank_one(&g.build(grid)?, *order, *coeff),
            TermConfig::Product { coeff, factors } => {
                let fs = factors.iter().map(|f| f.build(grid)).collect::<Result<Vec<_>>>()?;
                Kernel::separable(grid, fs.len(), vec![SeparableTerm::new(*coeff, fs)])
            }
            TermConfig::Dense { order, path, format } => match format {
                KernelFileFormat::Csv => read_dense_csv(grid, *order, path),
                KernelFileFormat::Binary => read_dense_binary(grid, *order, path),
            },
        })
        .collect::<Result<Vec<_>>>()?;
    let top = kernels.iter().map(Kernel::order).max().unwrap_or(0);
    let n_max = n_max.unwrap_or(top);
    if top > n_max {
        return Err(Error::config(format!("a term of order {top} exceeds n_max = {n_max}")));
    }
    let mut orders: Vec<Kernel> = (0..=n_max).map(|n| Kernel::zero(grid, n)).collect();
    orders[0] = Kernel::scalar(grid, f0)?;
    for k in kernels {
        let n = k.order();
        orders[n] = if orders[n].is_zero() { k } else { orders[n].add(&k)? };
    }
    KernelFamily::single_site(grid, orders)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusCheck {
    pub c: f64,
    pub gamma: f64,
    pub alpha0: f64,
    pub kappa: f64,
    #[serde(default = "default_norm")]
    pub norm: ModulusNorm,
}

fn default_norm() -> ModulusNorm {
    ModulusNorm::L2
}

fn default_kappa() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Weights `kappa` for the series bound and the truncation tail.
    #[serde(default = "default_kappa")]
    pub kappa: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<ModulusCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateQuery {
    /// `Lambda_R(level)` at site index `site`.
    Pointwise { site: usize, level: f64 },
    /// `Lambda(psi)` for a path given by one value per site.
    Path { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TiltConfig {
    /// Optimal control(s) from the rate solver.
    Auto,
    None,
    /// Equal-weight mixture of the given controls.
    Controls { controls: Vec<FunctionConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub event: EventSpec,
    pub epsilons: Vec<f64>,
    pub samples: usize,
    #[serde(default)]
    pub speed: Speed,
    #[serde(default = "default_tilt")]
    pub tilt: TiltConfig,
    #[serde(default = "default_min_ess")]
    pub min_ess: f64,
}

fn default_tilt() -> TiltConfig {
    TiltConfig::Auto
}

fn default_min_ess() -> f64 {
    crate::ldp::DEFAULT_MIN_ESS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub control: FunctionConfig,
    pub epsilons: Vec<f64>,
    pub samples: usize,
}

/// Everything the stages need, built and cross-checked.
#[derive(Debug)]
pub struct Built {
    pub grid: Arc<Grid>,
    pub spec: ChaosSpec,
    pub modulus: Option<(ModulusSpec, f64, ModulusNorm)>,
    pub tilt: Option<Vec<Control>>,
    pub probe_control: Option<Control>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::from_json(&text, dir).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Parse a config document; relative kernel paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        cfg.family.resolve_paths(&std::path::absolute(base_dir)?);
        Ok(cfg)
    }

    /// Build the grid, family and controls and check every cross-reference.
    pub fn build(&self) -> Result<Built> {
        let g = &self.grid;
        let grid = Grid::build(g.time, g.space.clone(), &g.measure)?;
        let family = self.family.build(&grid)?;
        let spec = ChaosSpec::new(family)?;
        let sites = spec.sites().len();

        let mut modulus = None;
        if let Some(c) = &self.checks {
            if c.kappa.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
                return Err(Error::config("check weights kappa must be positive and finite"));
            }
            if let Some(m) = &c.modulus {
                modulus = Some((ModulusSpec::new(m.c, m.gamma, m.alpha0)?, m.kappa, m.norm));
            }
        }
        for q in &self.rate_queries {
            match q {
                RateQuery::Pointwise { site, level } => {
                    if *site >= sites {
                        return Err(Error::config(format!("rate query site {site} out of range for {sites} sites")));
                    }
                    if !level.is_finite() {
                        return Err(Error::config("rate query level must be finite"));
                    }
                }
                RateQuery::Path { values } => {
                    if values.len() != sites {
                        return Err(Error::Dimension {
                            expected: sites,
                            found: values.len(),
                        });
                    }
                }
            }
        }
        crate::rate::RateSolver::new(self.rate_solver.clone())?;

        let mut tilt = None;
        if let Some(s) = &self.ldp_scan {
            s.event.validate(&spec)?;
            check_eps_list(&s.epsilons, true)?;
            check_samples(s.samples)?;
            if !(s.min_ess > 0.0) {
                return Err(Error::config("min_ess must be positive"));
            }
            if let TiltConfig::Controls { controls } = &s.tilt {
                if controls.is_empty() {
                    return Err(Error::config("tilt needs at least one control"));
                }
                tilt = Some(
                    controls
                        .iter()
                        .map(|f| Ok(Control::new(f.build(&grid)?)))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
        }
        let mut probe_control = None;
        if let Some(p) = &self.probe {
            check_eps_list(&p.epsilons, false)?;
            if p.samples < 2 {
                return Err(Error::config("the probe needs at least two samples"));
            }
            probe_control = Some(Control::new(p.control.build(&grid)?));
        }
        Ok(Built {
            grid,
            spec,
            modulus,
            tilt,
            probe_control,
        })
    }
}

fn check_eps_list(eps: &[f64], decreasing: bool) -> Result<()> {
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::config("epsilons must be positive and finite"));
    }
    if decreasing && eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("scan epsilons must be strictly decreasing"));
    }
    Ok(())
}

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::config(format!("at least {MIN_SAMPLES} samples are required, got {n}")));
    }
    Ok(())
}
