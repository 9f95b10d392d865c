//! Rate function `Lambda(psi) = inf { |u|^2 / 2 : X^u = psi }` by
//! minimum-norm constrained optimization over grid controls.
//!
//! Controls are optimized in the coordinates `v_i = u_i sqrt(m_i)`, so that
//! `|u|^2 = |v|^2`, with an augmented Lagrangian and L-BFGS inner solves.

use std::sync::Arc;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::KernelFamily;
use crate::grid::{ensure_same, Grid, GridFn};
use crate::kernel::{orbit_size, sorted_indices, Kernel, KernelRepr};
use crate::noise::{stream_rng, Control};
use crate::process::{ChaosSpec, PathValue};

/// Largest grid for which order-2 kernels are tested for definiteness.
const DEFINITENESS_MAX_CELLS: usize = 1024;

/// Relative value gap under which another optimum counts as an alternate.
const ALTERNATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub starts: usize,
    pub stages: usize,
    pub initial_penalty: f64,
    pub penalty_factor: f64,
    /// Inner L-BFGS tolerance on the gradient norm.
    pub grad_tol: f64,
    /// Constraint violation accepted as feasible.
    pub residual_tol: f64,
    pub max_inner_iters: u64,
    /// Multiplier updates allowed at the final penalty.
    pub extra_rounds: usize,
    pub seed: u64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            starts: 8,
            stages: 6,
            initial_penalty: 1.0,
            penalty_factor: 10.0,
            grad_tol: 1e-8,
            residual_tol: 1e-8,
            max_inner_iters: 1000,
            extra_rounds: 40,
            seed: 0,
        }
    }
}

impl RateConfig {
    fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.stages == 0 {
            return Err(Error::config("rate solver needs at least one start and one stage"));
        }
        let pos = [self.initial_penalty, self.grad_tol, self.residual_tol];
        if pos.iter().any(|x| !(x.is_finite() && *x > 0.0)) || !(self.penalty_factor >= 1.0) {
            return Err(Error::config("rate solver penalties and tolerances must be positive"));
        }
        Ok(())
    }
}

/// Why a target cannot be reached by any control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Infeasibility {
    /// Every chaos term at `site` is nonnegative, so `X^u >= bound`.
    BelowRange { site: usize, bound: f64, target: f64 },
    /// Every chaos term at `site` is nonpositive, so `X^u <= bound`.
    AboveRange { site: usize, bound: f64, target: f64 },
    /// The skeleton at `site` does not depend on the control.
    Constant { site: usize, value: f64, target: f64 },
    /// Linear constraints with no solution; `residual` is the least-squares misfit.
    InconsistentLinear { residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub lambda: f64,
    pub residual: f64,
    pub iterations: u64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RateResult {
    /// `+inf` exactly when `infeasible` is set.
    pub lambda: f64,
    pub u_star: Option<Control>,
    pub residual: f64,
    pub iterations: u64,
    pub converged: bool,
    pub infeasible: Option<Infeasibility>,
    /// One entry per start of the iterative solver; empty for closed forms.
    pub starts: Vec<StartSummary>,
    /// Other converged controls, distinct from `u_star`, with the same value
    /// up to the solver tolerance.
    pub alternates: Vec<Control>,
}

impl RateResult {
    fn infinite(cert: Infeasibility) -> Self {
        RateResult {
            lambda: f64::INFINITY,
            u_star: None,
            residual: f64::INFINITY,
            iterations: 0,
            converged: true,
            infeasible: Some(cert),
            starts: Vec::new(),
            alternates: Vec::new(),
        }
    }

    fn exact(u: Control, residual: f64) -> Self {
        RateResult {
            lambda: 0.5 * u.norm_sq(),
            u_star: Some(u),
            residual,
            iterations: 0,
            converged: true,
            infeasible: None,
            starts: Vec::new(),
            alternates: Vec::new(),
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.infeasible.is_some()
    }
}

/// `Lambda_R(r) = inf { |u|^2 / 2 : X^u(z) = r }` at site index `z`.
pub fn rate_pointwise(spec: &ChaosSpec, z: usize, r: f64) -> Result<RateResult> {
    RateSolver::default().pointwise(spec, z, r)
}

/// `Lambda(psi)` with the constraint imposed at every site.
pub fn rate_path(spec: &ChaosSpec, psi: &PathValue) -> Result<RateResult> {
    RateSolver::default().path(spec, psi)
}

#[derive(Debug, Clone, Default)]
pub struct RateSolver {
    pub config: RateConfig,
}

impl RateSolver {
    pub fn new(config: RateConfig) -> Result<Self> {
        config.validate()?;
        Ok(RateSolver { config })
    }

    pub fn pointwise(&self, spec: &ChaosSpec, z: usize, r: f64) -> Result<RateResult> {
        check_site(spec, z)?;
        if !r.is_finite() {
            return Err(Error::NonFinite("rate target".into()));
        }
        let fam = spec.family();
        if fam.is_first_chaos_only() {
            return Ok(first_chaos_pointwise(fam, z, r));
        }
        self.solve(spec, &[(z, r)])
    }

    pub fn path(&self, spec: &ChaosSpec, psi: &PathValue) -> Result<RateResult> {
        if psi.sites != *spec.sites() {
            return Err(Error::config("target path is not on the spec's sites"));
        }
        if let Some(i) = psi.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("target path at site {i}")));
        }
        let targets: Vec<(usize, f64)> = psi.values.iter().copied().enumerate().collect();
        if spec.family().is_first_chaos_only() {
            return first_chaos_path(spec.family(), &targets, self.config.residual_tol);
        }
        self.solve(spec, &targets)
    }

    /// Augmented-Lagrangian solve for the targets `(site, value)`, skipping
    /// any closed form.
    pub fn solve(&self, spec: &ChaosSpec, targets: &[(usize, f64)]) -> Result<RateResult> {
        self.config.validate()?;
        for &(z, r) in targets {
            check_site(spec, z)?;
            if let Some(cert) = certify_infeasible(spec.family(), z, r) {
                return Ok(RateResult::infinite(cert));
            }
        }
        let eval = Evaluator::new(spec.family(), targets);
        let cfg = &self.config;
        let m = eval.dim();
        let runs: Vec<Result<Candidate>> = (0..cfg.starts)
            .into_par_iter()
            .map(|k| {
                let v0 = start_point(cfg.seed, k, m);
                augmented_lagrangian(&eval, v0, cfg)
            })
            .collect();
        let runs: Vec<Candidate> = runs.into_iter().collect::<Result<_>>()?;
        let starts: Vec<StartSummary> = runs
            .iter()
            .map(|c| StartSummary {
                lambda: 0.5 * c.v.iter().map(|x| x * x).sum::<f64>(),
                residual: c.residual,
                iterations: c.iterations,
                converged: c.converged,
            })
            .collect();
        let best = (0..runs.len())
            .min_by(|&a, &b| {
                let (sa, sb) = (&starts[a], &starts[b]);
                sb.converged
                    .cmp(&sa.converged)
                    .then_with(|| {
                        if sa.converged {
                            sa.lambda.total_cmp(&sb.lambda)
                        } else {
                            sa.residual.total_cmp(&sb.residual).then(sa.lambda.total_cmp(&sb.lambda))
                        }
                    })
                    .then(a.cmp(&b))
            })
            .expect("at least one start");
        let u = eval.control(&runs[best].v)?;
        let alternates = if starts[best].converged {
            let level = starts[best].lambda;
            let mut kept: Vec<&[f64]> = vec![&runs[best].v];
            for (c, s) in runs.iter().zip(&starts) {
                let close = (s.lambda - level).abs() <= ALTERNATE_TOL * (1.0 + level);
                let fresh = kept.iter().all(|k| distance(k, &c.v) > ALTERNATE_TOL.sqrt() * (1.0 + norm(k)));
                if s.converged && close && fresh {
                    kept.push(&c.v);
                }
            }
            kept[1..].iter().map(|v| eval.control(v)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(RateResult {
            lambda: 0.5 * u.norm_sq(),
            u_star: Some(u),
            residual: starts[best].residual,
            iterations: starts.iter().map(|s| s.iterations).sum(),
            converged: starts[best].converged,
            infeasible: None,
            starts,
            alternates,
        })
    }
}

fn check_site(spec: &ChaosSpec, z: usize) -> Result<()> {
    if z >= spec.sites().len() {
        return Err(Error::config(format!(
            "site index {z} out of range for {} sites",
            spec.sites().len()
        )));
    }
    Ok(())
}

fn order_one(fam: &KernelFamily, z: usize) -> Option<GridFn> {
    let k = fam.orders(z).get(1)?;
    let g = fam.grid();
    let values = (0..g.len()).map(|c| k.value(&[c])).collect();
    GridFn::new(g, values).ok()
}

fn first_chaos_pointwise(fam: &KernelFamily, z: usize, r: f64) -> RateResult {
    let f0 = fam.f0(z);
    let grid = fam.grid();
    let f = order_one(fam, z).unwrap_or_else(|| GridFn::zeros(grid));
    let nsq = f.norm_sq();
    if nsq == 0.0 {
        if r == f0 {
            return RateResult::exact(Control::zero(grid), 0.0);
        }
        return RateResult::infinite(Infeasibility::Constant { site: z, value: f0, target: r });
    }
    RateResult::exact(Control::new(f.scale((r - f0) / nsq)), 0.0)
}

/// Least-norm solution of `<f_z, u> = r_z - f0_z`.
fn first_chaos_path(fam: &KernelFamily, targets: &[(usize, f64)], tol: f64) -> Result<RateResult> {
    let grid = fam.grid();
    let fs: Vec<GridFn> = targets
        .iter()
        .map(|&(z, _)| order_one(fam, z).unwrap_or_else(|| GridFn::zeros(grid)))
        .collect();
    let b = DVector::from_iterator(targets.len(), targets.iter().map(|&(z, r)| r - fam.f0(z)));
    let k = fs.len();
    let gram = DMatrix::from_fn(k, k, |i, j| fs[i].inner_unchecked(&fs[j]));
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let alpha = gram
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12 * scale)
        .map_err(|e| Error::Numerical(format!("least-norm solve: {e}")))?;
    let mut u = vec![0.0; grid.len()];
    for (a, f) in alpha.iter().zip(&fs) {
        for (ui, fi) in u.iter_mut().zip(f.values()) {
            *ui += a * fi;
        }
    }
    let u = Control::new(GridFn::new(grid, u)?);
    let residual = fs
        .iter()
        .zip(b.iter())
        .map(|(f, bi)| (f.inner_unchecked(u.u()) - bi).powi(2))
        .sum::<f64>()
        .sqrt();
    let level = tol * (1.0 + b.amax());
    if residual > level {
        return Ok(RateResult::infinite(Infeasibility::InconsistentLinear { residual }));
    }
    Ok(RateResult::exact(u, residual))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sign {
    Zero,
    NonNeg,
    NonPos,
    Unknown,
}

fn kernel_sign(k: &Kernel) -> Sign {
    if k.order() == 0 || k.is_zero() {
        return Sign::Zero;
    }
    if let KernelRepr::SeparableSum(terms) = k.repr() {
        if k.order().is_multiple_of(2) && terms.iter().all(|t| t.is_rank_one()) {
            if terms.iter().all(|t| t.coeff() >= 0.0) {
                return Sign::NonNeg;
            }
            if terms.iter().all(|t| t.coeff() <= 0.0) {
                return Sign::NonPos;
            }
        }
    }
    let m = k.grid().len();
    if k.order() == 2 && m <= DEFINITENESS_MAX_CELLS {
        let f = DMatrix::from_fn(m, m, |i, j| k.value(&[i, j]));
        let eig = SymmetricEigen::new(f).eigenvalues;
        let tol = 1e-12 * eig.amax();
        if eig.iter().all(|&e| e >= -tol) {
            return Sign::NonNeg;
        }
        if eig.iter().all(|&e| e <= tol) {
            return Sign::NonPos;
        }
    }
    Sign::Unknown
}

/// Certificate that `X^u(z) = r` has no solution, when the skeleton at `z`
/// is a sum of sign-definite forms.
fn certify_infeasible(fam: &KernelFamily, z: usize, r: f64) -> Option<Infeasibility> {
    let f0 = fam.f0(z);
    let signs: Vec<Sign> = fam.orders(z).iter().skip(1).map(kernel_sign).collect();
    if signs.contains(&Sign::Unknown) {
        return None;
    }
    let lower = signs.iter().all(|s| matches!(s, Sign::Zero | Sign::NonNeg));
    let upper = signs.iter().all(|s| matches!(s, Sign::Zero | Sign::NonPos));
    match (lower, upper) {
        (true, true) if r != f0 => Some(Infeasibility::Constant { site: z, value: f0, target: r }),
        (true, false) if r < f0 => Some(Infeasibility::BelowRange { site: z, bound: f0, target: r }),
        (false, true) if r > f0 => Some(Infeasibility::AboveRange { site: z, bound: f0, target: r }),
        _ => None,
    }
}

/// Adds `w * dJ/dd` into `grad` and returns `J(d) = sum f(i_1..i_n) d_{i_1} .. d_{i_n}`.
fn accumulate(k: &Kernel, d: &[f64], w: f64, grad: &mut [f64]) -> f64 {
    if k.order() == 0 {
        return k.as_scalar().unwrap_or(0.0);
    }
    match k.repr() {
        KernelRepr::SeparableSum(terms) => {
            let mut total = 0.0;
            for t in terms {
                let c = t.coeff();
                if c == 0.0 {
                    continue;
                }
                let a: Vec<f64> = t.factors().iter().map(|g| dot(g.values(), d)).collect();
                let n = a.len();
                total += c * a.iter().product::<f64>();
                if w == 0.0 {
                    continue;
                }
                if t.is_rank_one() {
                    let s = w * c * n as f64 * a[0].powi(n as i32 - 1);
                    for (gi, fi) in grad.iter_mut().zip(t.factors()[0].values()) {
                        *gi += s * fi;
                    }
                    continue;
                }
                // products over all factors but one
                let mut prefix = vec![1.0; n + 1];
                for j in 0..n {
                    prefix[j + 1] = prefix[j] * a[j];
                }
                let mut suffix = 1.0;
                for j in (0..n).rev() {
                    let s = w * c * prefix[j] * suffix;
                    for (gi, fi) in grad.iter_mut().zip(t.factors()[j].values()) {
                        *gi += s * fi;
                    }
                    suffix *= a[j];
                }
            }
            total
        }
        KernelRepr::DenseSym(v) => {
            let mut total = 0.0;
            let mut groups: Vec<(usize, usize)> = Vec::with_capacity(k.order());
            for (idx, &val) in sorted_indices(d.len(), k.order()).zip(v) {
                if val == 0.0 {
                    continue;
                }
                groups.clear();
                for &c in &idx {
                    match groups.last_mut() {
                        Some((cell, r)) if *cell == c => *r += 1,
                        _ => groups.push((c, 1)),
                    }
                }
                let coef = val * orbit_size(&idx);
                let pw: Vec<f64> = groups.iter().map(|&(c, r)| d[c].powi(r as i32)).collect();
                total += coef * pw.iter().product::<f64>();
                if w == 0.0 {
                    continue;
                }
                for (g, &(c, r)) in groups.iter().enumerate() {
                    let rest: f64 = pw
                        .iter()
                        .enumerate()
                        .filter(|&(h, _)| h != g)
                        .map(|(_, p)| p)
                        .product();
                    grad[c] += w * coef * r as f64 * d[c].powi(r as i32 - 1) * rest;
                }
            }
            total
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient of `X^u(z)` in `u` under the `L^2(mu)` inner product.
pub fn skeleton_gradient(spec: &ChaosSpec, u: &Control, z: usize) -> Result<GridFn> {
    check_site(spec, z)?;
    let fam = spec.family();
    ensure_same(fam.grid(), u.grid())?;
    let d = u.cell_masses();
    let mut grad = vec![0.0; d.len()];
    for k in fam.orders(z) {
        accumulate(k, &d, 1.0, &mut grad);
    }
    GridFn::new(fam.grid(), grad)
}

struct Evaluator<'a> {
    fam: &'a KernelFamily,
    grid: Arc<Grid>,
    targets: Vec<(usize, f64)>,
    sqrt_m: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(fam: &'a KernelFamily, targets: &[(usize, f64)]) -> Self {
        let grid = fam.grid().clone();
        let sqrt_m = grid.measures().iter().map(|m| m.sqrt()).collect();
        Evaluator {
            fam,
            grid,
            targets: targets.to_vec(),
            sqrt_m,
        }
    }

    fn dim(&self) -> usize {
        self.sqrt_m.len()
    }

    fn masses(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.sqrt_m).map(|(v, s)| v * s).collect()
    }

    fn control(&self, v: &[f64]) -> Result<Control> {
        let u = v.iter().zip(&self.sqrt_m).map(|(v, s)| v / s).collect();
        Ok(Control::new(GridFn::new(&self.grid, u)?))
    }

    /// Constraint values `X^u(z) - r`.
    fn residuals(&self, v: &[f64]) -> Vec<f64> {
        let d = self.masses(v);
        let mut scratch = [];
        self.targets
            .iter()
            .map(|&(z, r)| {
                let s: f64 = self
                    .fam
                    .orders(z)
                    .iter()
                    .map(|k| if k.is_zero() { 0.0 } else { accumulate(k, &d, 0.0, &mut scratch) })
                    .sum();
                s - r
            })
            .collect()
    }

    /// `sum_z w_z * grad_v c_z`, with `w = weights(c)`, and the residuals.
    fn weighted_gradient(&self, v: &[f64], weights: impl Fn(usize, f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.masses(v);
        let mut total = vec![0.0; d.len()];
        let mut res = Vec::with_capacity(self.targets.len());
        let mut grad = vec![0.0; d.len()];
        for (i, &(z, r)) in self.targets.iter().enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut s = 0.0;
            for k in self.fam.orders(z) {
                if !k.is_zero() {
                    s += accumulate(k, &d, 1.0, &mut grad);
                }
            }
            let c = s - r;
            let w = weights(i, c);
            for ((t, g), sm) in total.iter_mut().zip(&grad).zip(&self.sqrt_m) {
                *t += w * g * sm;
            }
            res.push(c);
        }
        (total, res)
    }
}

struct Lagrangian<'e, 'a> {
    eval: &'e Evaluator<'a>,
    lambda: Vec<f64>,
    mu: f64,
}

impl CostFunction for Lagrangian<'_, '_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, v: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let c = self.eval.residuals(v);
        let obj = 0.5 * dot(v, v)
            + c.iter()
                .zip(&self.lambda)
                .map(|(c, l)| -l * c + 0.5 * self.mu * c * c)
                .sum::<f64>();
        if !obj.is_finite() {
            return Err(argmin::core::Error::msg("non-finite augmented Lagrangian"));
        }
        Ok(obj)
    }
}

impl Gradient for Lagrangian<'_, '_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, v: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let (mut g, _) = self.eval.weighted_gradient(v, |i, c| self.mu * c - self.lambda[i]);
        for (gi, vi) in g.iter_mut().zip(v) {
            *gi += vi;
        }
        Ok(g)
    }
}

struct Candidate {
    v: Vec<f64>,
    residual: f64,
    iterations: u64,
    converged: bool,
}

/// Start 0 is the zero control; the rest come in antithetic pairs of random
/// directions with norms spread over `[0.25, 2]`.
fn start_point(seed: u64, k: usize, m: usize) -> Vec<f64> {
    if k == 0 {
        return vec![0.0; m];
    }
    let pair = k.div_ceil(2);
    let mut rng = stream_rng(seed, pair as u64);
    let mut v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = dot(&v, &v).sqrt().max(f64::MIN_POSITIVE);
    let sign = if k.is_multiple_of(2) { -1.0 } else { 1.0 };
    let target = sign * 0.25 * 2f64.powf((k - 1) as f64 / 2.0);
    v.iter_mut().for_each(|x| *x *= target / norm);
    v
}

fn inner_solve(problem: Lagrangian<'_, '_>, v0: Vec<f64>, cfg: &RateConfig) -> Option<(Vec<f64>, u64)> {
    let linesearch = MoreThuenteLineSearch::new();
    let solver = LBFGS::new(linesearch, 10).with_tolerance_grad(cfg.grad_tol).ok()?.with_tolerance_cost(0.0).ok()?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.param(v0).max_iters(cfg.max_inner_iters))
        .run()
        .ok()?;
    let state = res.state();
    let v = state.get_best_param().or(state.get_param())?.clone();
    Some((v, state.get_iter()))
}

fn augmented_lagrangian(eval: &Evaluator<'_>, v0: Vec<f64>, cfg: &RateConfig) -> Result<Candidate> {
    let k = eval.targets.len();
    let mut lambda = vec![0.0; k];
    let mut mu = cfg.initial_penalty;
    let mut v = v0;
    let mut iterations = 0;
    let mut stage = 0;
    let mut residual = norm(&eval.residuals(&v));
    while stage < cfg.stages + cfg.extra_rounds {
        let problem = Lagrangian {
            eval,
            lambda: lambda.clone(),
            mu,
        };
        if let Some((next, it)) = inner_solve(problem, v.clone(), cfg) {
            v = next;
            iterations += it;
        }
        let c = eval.residuals(&v);
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("skeleton during rate optimization".into()));
        }
        residual = norm(&c);
        for (l, ci) in lambda.iter_mut().zip(&c) {
            *l -= mu * ci;
        }
        if residual <= cfg.residual_tol && stationary(eval, &v, &lambda, cfg) {
            break;
        }
        if stage + 1 < cfg.stages {
            mu *= cfg.penalty_factor;
        }
        stage += 1;
    }
    let converged = residual <= cfg.residual_tol && stationary(eval, &v, &lambda, cfg);
    Ok(Candidate {
        v,
        residual,
        iterations,
        converged,
    })
}

/// First-order optimality `v = sum lambda_z grad c_z` up to a relative tolerance.
fn stationary(eval: &Evaluator<'_>, v: &[f64], lambda: &[f64], cfg: &RateConfig) -> bool {
    let (g, _) = eval.weighted_gradient(v, |i, _| lambda[i]);
    let gap: f64 = v.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    gap <= cfg.grad_tol.sqrt() * (1.0 + norm(v))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
