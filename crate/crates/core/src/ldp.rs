//! Rare-event probabilities of `X^eps` by plain and exponentially tilted
//! Monte Carlo, empirical rates across `eps`, and the skeleton-convergence
//! probe.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::loglog_slope;
use crate::error::{Error, Result};
use crate::grid::ensure_same;
use crate::noise::{fill_white_noise, sample_white_noise_stream, stream_rng, Control, NoisePath};
use crate::process::{assemble_controlled, assemble_xeps, skeleton, ChaosSpec, PathValue};
use crate::rate::{RateConfig, RateResult, RateSolver};

pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_MIN_ESS: f64 = 50.0;
/// Samples per work unit; fixed so results do not depend on the worker count.
const CHUNK: usize = 1024;
/// Below this many hits the standard error is flagged as unreliable.
const RELIABLE_HITS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Above,
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// `X(z) >= level` or `X(z) <= level` at site index `site`.
    SiteThreshold {
        site: usize,
        level: f64,
        direction: Direction,
    },
    /// `max_z |X(z) - center(z)| < radius`; an infinite radius is the whole space.
    SupBall {
        center: Vec<f64>,
        #[serde(with = "crate::serde_ext")]
        radius: f64,
    },
}

impl EventSpec {
    pub fn whole_space(sites: usize) -> Self {
        EventSpec::SupBall {
            center: vec![0.0; sites],
            radius: f64::INFINITY,
        }
    }

    pub fn validate(&self, spec: &ChaosSpec) -> Result<()> {
        let n = spec.sites().len();
        match self {
            EventSpec::SiteThreshold { site, level, .. } => {
                if *site >= n {
                    return Err(Error::config(format!("event site {site} out of range for {n} sites")));
                }
                if !level.is_finite() {
                    return Err(Error::config("event level must be finite"));
                }
            }
            EventSpec::SupBall { center, radius } => {
                if center.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        found: center.len(),
                    });
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config("ball center must be finite"));
                }
                if !(*radius > 0.0) {
                    return Err(Error::config(format!("ball radius must be positive, got {radius}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, EventSpec::SupBall { radius, .. } if radius.is_infinite())
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        match self {
            EventSpec::SiteThreshold {
                site,
                level,
                direction,
            } => match direction {
                Direction::Above => values[*site] >= *level,
                Direction::Below => values[*site] <= *level,
            },
            EventSpec::SupBall { center, radius } => {
                radius.is_infinite()
                    || values
                        .iter()
                        .zip(center)
                        .map(|(x, c)| (x - c).abs())
                        .fold(0.0, f64::max)
                        < *radius
            }
        }
    }
}

/// Importance-sampling proposal: an equal-weight mixture of Gaussian shifts
/// of the noise by `u_j / eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tilt {
    controls: Vec<Control>,
}

impl Tilt {
    pub fn new(controls: Vec<Control>) -> Result<Self> {
        let first = controls.first().ok_or_else(|| Error::config("tilt needs at least one control"))?;
        for c in &controls[1..] {
            ensure_same(first.grid(), c.grid())?;
        }
        Ok(Tilt { controls })
    }

    pub fn single(u: Control) -> Self {
        Tilt { controls: vec![u] }
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    /// Norm of the leading control.
    pub fn norm(&self) -> f64 {
        self.controls[0].norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    /// `log(estimate)`, kept separately so that tiny probabilities survive.
    pub log_estimate: f64,
    /// `(sum w)^2 / sum w^2` over the samples in the event.
    pub ess: f64,
    pub hits: usize,
    pub samples: usize,
    /// False when too few samples hit the event for the standard error to mean much.
    pub reliable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateOptions {
    pub min_ess: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            min_ess: DEFAULT_MIN_ESS,
        }
    }
}

/// Log-scaled running sums of the weights `w` and `w^2` over hits.
#[derive(Debug, Clone, Copy)]
struct Acc {
    shift: f64,
    s1: f64,
    s2: f64,
    hits: usize,
}

impl Acc {
    const EMPTY: Acc = Acc {
        shift: f64::NEG_INFINITY,
        s1: 0.0,
        s2: 0.0,
        hits: 0,
    };

    fn push(&mut self, logw: f64) {
        self.merge(Acc {
            shift: logw,
            s1: 1.0,
            s2: 1.0,
            hits: 1,
        });
    }

    fn merge(&mut self, o: Acc) {
        if o.hits == 0 {
            return;
        }
        if self.hits == 0 {
            *self = o;
            return;
        }
        let shift = self.shift.max(o.shift);
        let (a, b) = ((self.shift - shift).exp(), (o.shift - shift).exp());
        self.s1 = self.s1 * a + o.s1 * b;
        self.s2 = self.s2 * a * a + o.s2 * b * b;
        self.shift = shift;
        self.hits += o.hits;
    }
}

/// Probability that `X^eps` lies in `event`, with `n` samples from `seed`.
/// With a tilt, samples are drawn from the shifted noise and reweighted by
/// the Gaussian likelihood ratio.
pub fn estimate_prob(
    spec: &ChaosSpec,
    event: &EventSpec,
    eps: f64,
    n: usize,
    seed: u64,
    tilt: Option<&Tilt>,
) -> Result<Estimate> {
    estimate_prob_with(spec, event, eps, n, seed, tilt, &EstimateOptions::default())
}

pub fn estimate_prob_with(
    spec: &ChaosSpec,
    event: &EventSpec,
    eps: f64,
    n: usize,
    seed: u64,
    tilt: Option<&Tilt>,
    opts: &EstimateOptions,
) -> Result<Estimate> {
    if n < MIN_SAMPLES {
        return Err(Error::config(format!("at least {MIN_SAMPLES} samples are required, got {n}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("noise scale must be positive, got {eps}")));
    }
    event.validate(spec)?;
    if let Some(t) = tilt {
        ensure_same(t.controls[0].grid(), spec.family().grid())?;
    }
    if event.is_whole_space() {
        return Ok(Estimate {
            estimate: 1.0,
            stderr: 0.0,
            log_estimate: 0.0,
            ess: n as f64,
            hits: n,
            samples: n,
            reliable: true,
        });
    }
    let sampler = Sampler::new(spec, eps, tilt);
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Result<Acc>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Acc::EMPTY;
            let mut buf = vec![0.0; spec.family().grid().len()];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                if let Some(logw) = sampler.draw(event, seed, i as u64, &mut buf)? {
                    acc.push(logw);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut acc = Acc::EMPTY;
    for p in partial {
        acc.merge(p?);
    }
    summarize(acc, n, tilt.is_some(), opts)
}

fn summarize(acc: Acc, n: usize, tilted: bool, opts: &EstimateOptions) -> Result<Estimate> {
    let nf = n as f64;
    if acc.hits == 0 {
        if tilted {
            return Err(Error::EffectiveSampleSize {
                ess: 0.0,
                min: opts.min_ess,
                hits: 0,
                samples: n,
            });
        }
        return Ok(Estimate {
            estimate: 0.0,
            stderr: 0.0,
            log_estimate: f64::NEG_INFINITY,
            ess: 0.0,
            hits: 0,
            samples: n,
            reliable: false,
        });
    }
    let ess = acc.s1 * acc.s1 / acc.s2;
    if tilted && ess < opts.min_ess {
        return Err(Error::EffectiveSampleSize {
            ess,
            min: opts.min_ess,
            hits: acc.hits,
            samples: n,
        });
    }
    let log_estimate = acc.shift + acc.s1.ln() - nf.ln();
    let mean = acc.s1 / nf;
    let second = acc.s2 / nf;
    // variance of the weighted indicator, in units of exp(2 shift)
    let var = (second - mean * mean).max(0.0) * nf / (nf - 1.0);
    let scale = acc.shift.exp();
    Ok(Estimate {
        estimate: mean * scale,
        stderr: (var / nf).sqrt() * scale,
        log_estimate,
        ess,
        hits: acc.hits,
        samples: n,
        reliable: acc.hits >= RELIABLE_HITS,
    })
}

struct Sampler<'a> {
    spec: &'a ChaosSpec,
    eps: f64,
    /// Per component, the cell shifts `u m / eps` and `|u|^2 / (2 eps^2)`.
    shifts: Vec<(Vec<f64>, f64)>,
    /// Per component, `u / eps`.
    slopes: Vec<Vec<f64>>,
}

impl<'a> Sampler<'a> {
    fn new(spec: &'a ChaosSpec, eps: f64, tilt: Option<&Tilt>) -> Self {
        let controls = tilt.map_or(&[][..], |t| t.controls());
        Sampler {
            spec,
            eps,
            shifts: controls
                .iter()
                .map(|u| {
                    let a = u.cell_masses().iter().map(|x| x / eps).collect();
                    (a, u.norm_sq() / (2.0 * eps * eps))
                })
                .collect(),
            slopes: controls
                .iter()
                .map(|u| u.u().values().iter().map(|x| x / eps).collect())
                .collect(),
        }
    }

    /// Log likelihood ratio of sample `i` when it lies in the event.
    fn draw(&self, event: &EventSpec, seed: u64, i: u64, buf: &mut [f64]) -> Result<Option<f64>> {
        let grid = self.spec.family().grid();
        let mut rng = stream_rng(seed, i);
        let comp = match self.shifts.len() {
            0 => None,
            1 => Some(0),
            k => Some(rng.random_range(0..k)),
        };
        fill_white_noise(&mut rng, grid, buf);
        if let Some(j) = comp {
            for (y, a) in buf.iter_mut().zip(&self.shifts[j].0) {
                *y += a;
            }
        }
        let path = NoisePath::from_increments(grid, buf.to_vec())?;
        let x = assemble_xeps(self.spec, &path, self.eps)?;
        if !event.contains(&x.values) {
            return Ok(None);
        }
        if comp.is_none() {
            return Ok(Some(0.0));
        }
        // log dP/dQ = log K - log sum_j exp(<u_j, y> / eps - |u_j|^2 / (2 eps^2))
        let exps: Vec<f64> = self
            .slopes
            .iter()
            .zip(&self.shifts)
            .map(|(s, (_, half))| s.iter().zip(buf.iter()).map(|(a, b)| a * b).sum::<f64>() - half)
            .collect();
        let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + exps.iter().map(|e| (e - top).exp()).sum::<f64>().ln();
        Ok(Some((exps.len() as f64).ln() - lse))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speed {
    /// `s(eps) = eps`
    Eps,
    /// `s(eps) = eps^2`
    #[default]
    Eps2,
}

impl Speed {
    pub fn at(self, eps: f64) -> f64 {
        match self {
            Speed::Eps => eps,
            Speed::Eps2 => eps * eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpRow {
    pub epsilon: f64,
    pub estimate: f64,
    pub stderr: f64,
    #[serde(with = "crate::serde_ext")]
    pub log_estimate: f64,
    #[serde(with = "crate::serde_ext")]
    pub empirical_rate: f64,
    pub tilt_norm: f64,
    pub ess: f64,
    pub hits: usize,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpReport {
    pub rows: Vec<LdpRow>,
    /// Rate-function infimum over the event; `+inf` when unreachable.
    #[serde(with = "crate::serde_ext")]
    pub theory_rate: f64,
    pub speed: Speed,
    pub samples: usize,
    pub seed: u64,
}

/// Dominating point of the event and the tilt built from it.
#[derive(Debug, Clone)]
pub struct DominatingPoint {
    pub theory_rate: f64,
    pub tilt: Option<Tilt>,
    pub rate: Option<RateResult>,
}

/// Rate infimum over the event and the optimal controls, by the
/// dominating-point approximation.
pub fn dominating_point(spec: &ChaosSpec, event: &EventSpec, solver: &RateSolver) -> Result<DominatingPoint> {
    event.validate(spec)?;
    let zero = Control::zero(spec.family().grid());
    let base = skeleton(spec, &zero)?;
    if event.contains(&base.values) {
        return Ok(DominatingPoint {
            theory_rate: 0.0,
            tilt: None,
            rate: None,
        });
    }
    let rate = match event {
        EventSpec::SiteThreshold { site, level, .. } => solver.pointwise(spec, *site, *level)?,
        EventSpec::SupBall { center, .. } => {
            let psi = PathValue {
                sites: spec.sites().clone(),
                values: center.clone(),
                tail_estimate: 0.0,
                tail_warning: false,
            };
            solver.path(spec, &psi)?
        }
    };
    let tilt = match &rate.u_star {
        Some(u) if !rate.is_infinite() => Some(Tilt::new(mixture_controls(spec, u, &rate.alternates)?)?),
        _ => None,
    };
    Ok(DominatingPoint {
        theory_rate: rate.lambda,
        tilt,
        rate: Some(rate),
    })
}

/// `u_star`, the solver's alternates, and `-u` for each of them when it
/// reaches the same skeleton value.
fn mixture_controls(spec: &ChaosSpec, u: &Control, alternates: &[Control]) -> Result<Vec<Control>> {
    let mut out: Vec<Control> = std::iter::once(u).chain(alternates).cloned().collect();
    let target = skeleton(spec, u)?.values;
    let scale = 1.0 + target.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for c in out.clone() {
        let neg = c.scale(-1.0);
        let reached = skeleton(spec, &neg)?.values;
        let same = reached.iter().zip(&target).all(|(a, b)| (a - b).abs() <= 1e-9 * scale);
        let gap = |o: &Control| {
            o.u().values()
                .iter()
                .zip(neg.u().values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let tol = 1e-3 * (1.0 + neg.u().sup_norm());
        if same && out.iter().all(|o| gap(o) > tol) {
            out.push(neg);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    pub estimate: EstimateOptions,
    pub rate: RateConfig,
    /// Skip the tilt even when a dominating point exists.
    pub untilted: bool,
}

/// Tilted estimates and empirical rates `-s(eps) log p` for decreasing `eps`.
pub fn ldp_scan(
    spec: &ChaosSpec,
    event: &EventSpec,
    eps_list: &[f64],
    speed: Speed,
    n: usize,
    seed: u64,
) -> Result<LdpReport> {
    ldp_scan_with(spec, event, eps_list, speed, n, seed, None, &ScanOptions::default())
}

/// As [`ldp_scan`], with an optional tilt override.
#[allow(clippy::too_many_arguments)]
pub fn ldp_scan_with(
    spec: &ChaosSpec,
    event: &EventSpec,
    eps_list: &[f64],
    speed: Speed,
    n: usize,
    seed: u64,
    tilt_override: Option<&Tilt>,
    opts: &ScanOptions,
) -> Result<LdpReport> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("epsilon list must be strictly decreasing"));
    }
    let dom = dominating_point(spec, event, &RateSolver::new(opts.rate.clone())?)?;
    let tilt = if opts.untilted {
        None
    } else {
        tilt_override.or(dom.tilt.as_ref())
    };
    let rows = eps_list
        .iter()
        .enumerate()
        .map(|(j, &eps)| {
            let est = estimate_prob_with(spec, event, eps, n, row_seed(seed, j), tilt, &opts.estimate)?;
            Ok(LdpRow {
                epsilon: eps,
                estimate: est.estimate,
                stderr: est.stderr,
                log_estimate: est.log_estimate,
                empirical_rate: -speed.at(eps) * est.log_estimate,
                tilt_norm: tilt.map_or(0.0, Tilt::norm),
                ess: est.ess,
                hits: est.hits,
                reliable: est.reliable,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LdpReport {
        rows,
        theory_rate: dom.theory_rate,
        speed,
        samples: n,
        seed,
    })
}

fn row_seed(seed: u64, row: usize) -> u64 {
    seed.wrapping_add((row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub epsilon: f64,
    pub rms: f64,
    /// Delta-method standard error of `rms`.
    pub stderr: f64,
}

/// RMS over `n` paths and all sites of `X^{eps,u} - X^u`.
pub fn convergence_probe(spec: &ChaosSpec, u: &Control, eps_list: &[f64], n: usize, seed: u64) -> Result<Vec<ProbeRow>> {
    if n < 2 {
        return Err(Error::config("the convergence probe needs at least two paths"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::config("probe epsilons must be positive"));
    }
    let limit = skeleton(spec, u)?.values;
    let grid = spec.family().grid();
    let sites = limit.len() as f64;
    eps_list
        .iter()
        .map(|&eps| {
            let sq: Vec<f64> = (0..n as u64)
                .into_par_iter()
                .map(|i| {
                    let path = sample_white_noise_stream(grid, seed, i);
                    let x = assemble_controlled(spec, &path, u, eps)?;
                    Ok(x.values.iter().zip(&limit).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / sites)
                })
                .collect::<Result<_>>()?;
            let nf = n as f64;
            let mean = sq.iter().sum::<f64>() / nf;
            let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            let rms = mean.sqrt();
            let stderr = if rms > 0.0 { (var / nf).sqrt() / (2.0 * rms) } else { 0.0 };
            Ok(ProbeRow {
                epsilon: eps,
                rms,
                stderr,
            })
        })
        .collect()
}

/// Least-squares slope of `log rms` against `log eps`.
pub fn probe_slope(rows: &[ProbeRow]) -> Option<f64> {
    loglog_slope(rows.iter().filter(|r| r.rms > 0.0).map(|r| (r.epsilon.ln(), r.rms.ln())))
}
