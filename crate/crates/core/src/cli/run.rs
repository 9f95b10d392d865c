//! The `run` command: build, checks, rate, scan, probe.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::checks::{check_exponential_type, modulus_profile, series_bound, ExponentialType, ModulusProfile};
use crate::error::{Error, Result};
use crate::ldp::{convergence_probe, ldp_scan_with, probe_slope, EstimateOptions, LdpReport, ProbeRow, ScanOptions, Speed, Tilt};
use crate::process::{truncation_tail, PathValue};
use crate::rate::{Infeasibility, RateResult, RateSolver};

use super::config::{Built, RateQuery, RunConfig, TiltConfig};
use super::report::{ldp_csv, table_csv, write_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const DEFAULT_OUTPUT_DIR: &str = "chaos-ldp-out";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub speed: Option<Speed>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
}

impl ErrorReport {
    fn new(e: &Error, stage: Option<&str>) -> Self {
        ErrorReport {
            kind: e.kind().into(),
            message: e.to_string(),
            stage: stage.map(str::to_string),
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: i32,
    /// Set when any output was written.
    pub output_dir: Option<PathBuf>,
    pub error: Option<ErrorReport>,
}

#[derive(Debug, Serialize)]
struct SeriesRow {
    kappa: f64,
    #[serde(with = "crate::serde_ext")]
    series_bound: f64,
    /// Absent when the family has no exponential-type certificate.
    truncation_tail: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ChecksOut {
    exponential_type: ExponentialType,
    series: Vec<SeriesRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modulus: Option<ModulusProfile>,
}

#[derive(Debug, Serialize)]
struct RateOut {
    query: RateQuery,
    #[serde(with = "crate::serde_ext")]
    lambda: f64,
    converged: bool,
    #[serde(with = "crate::serde_ext")]
    residual: f64,
    iterations: u64,
    infeasible: Option<Infeasibility>,
    u_star: Option<Vec<f64>>,
    alternates: usize,
}

impl RateOut {
    fn new(query: &RateQuery, r: RateResult) -> Self {
        RateOut {
            query: query.clone(),
            lambda: r.lambda,
            converged: r.converged,
            residual: r.residual,
            iterations: r.iterations,
            infeasible: r.infeasible,
            u_star: r.u_star.map(|u| u.u().values().to_vec()),
            alternates: r.alternates.len(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ProbeOut {
    rows: Vec<ProbeRow>,
    slope: Option<f64>,
}

#[derive(Debug, Default, Serialize)]
struct Stages {
    #[serde(skip_serializing_if = "Option::is_none")]
    checks: Option<ChecksOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<Vec<RateOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ldp_scan: Option<LdpReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<ProbeOut>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    seed: u64,
    config: &'a RunConfig,
    results: &'a Stages,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum StageStatus {
    Ok,
    Failed,
    Skipped,
    NotRequested,
}

#[derive(Debug, Serialize)]
struct StageRecord {
    name: &'static str,
    status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorReport>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    status: i32,
    seed: u64,
    stages: Vec<StageRecord>,
    files: Vec<String>,
}

const STAGES: [&str; 4] = ["checks", "rate", "ldp_scan", "probe"];

/// Load, validate and run a config file, writing outputs under the output
/// directory. Nothing is written when the config is rejected.
pub fn run_config(path: &Path, overrides: &Overrides) -> RunOutcome {
    let mut cfg = match RunConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => return rejected(&e, None),
    };
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let (Some(speed), Some(scan)) = (overrides.speed, cfg.ldp_scan.as_mut()) {
        scan.speed = speed;
    }
    let out_dir = overrides
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let threads = overrides.threads.or(cfg.threads).unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return rejected(&Error::config(format!("cannot start worker pool: {e}")), None),
    };
    pool.install(|| execute(&cfg, &out_dir))
}

fn rejected(e: &Error, stage: Option<&str>) -> RunOutcome {
    RunOutcome {
        status: EXIT_SCHEMA,
        output_dir: None,
        error: Some(ErrorReport::new(e, stage)),
    }
}

fn execute(cfg: &RunConfig, out_dir: &Path) -> RunOutcome {
    let built = match cfg.build() {
        Ok(b) => b,
        Err(e) => return rejected(&e, Some("build")),
    };
    let mut stages = Stages::default();
    let mut records = Vec::new();
    let mut failure: Option<(Error, &'static str)> = None;
    for name in STAGES {
        let requested = match name {
            "checks" => cfg.checks.is_some(),
            "rate" => !cfg.rate_queries.is_empty(),
            "ldp_scan" => cfg.ldp_scan.is_some(),
            _ => cfg.probe.is_some(),
        };
        let status = if !requested {
            StageStatus::NotRequested
        } else if failure.is_some() {
            StageStatus::Skipped
        } else {
            match run_stage(name, cfg, &built, &mut stages) {
                Ok(()) => StageStatus::Ok,
                Err(e) if e.is_schema() => return rejected(&e, Some(name)),
                Err(e) => {
                    failure = Some((e, name));
                    StageStatus::Failed
                }
            }
        };
        let error = match (&status, &failure) {
            (StageStatus::Failed, Some((e, n))) => Some(ErrorReport::new(e, Some(n))),
            _ => None,
        };
        records.push(StageRecord { name, status, error });
    }
    let status = if failure.is_some() { EXIT_NUMERICAL } else { EXIT_OK };
    let error = failure.as_ref().map(|(e, n)| ErrorReport::new(e, Some(n)));
    match write_outputs(cfg, out_dir, &stages, records, status) {
        Ok(()) => RunOutcome {
            status,
            output_dir: Some(out_dir.to_path_buf()),
            error,
        },
        Err(e) => RunOutcome {
            status: EXIT_OUTPUT,
            output_dir: None,
            error: Some(ErrorReport::new(&e, Some("output"))),
        },
    }
}

fn run_stage(name: &str, cfg: &RunConfig, built: &Built, out: &mut Stages) -> Result<()> {
    let spec = &built.spec;
    let fam = spec.family();
    match name {
        "checks" => {
            let c = cfg.checks.as_ref().expect("requested");
            let series = c
                .kappa
                .iter()
                .map(|&kappa| {
                    let tail = match truncation_tail(spec, kappa) {
                        Ok(t) => Some(t),
                        Err(Error::NoCertificate) => None,
                        Err(e) => return Err(e),
                    };
                    Ok(SeriesRow {
                        kappa,
                        series_bound: series_bound(fam, kappa)?,
                        truncation_tail: tail,
                    })
                })
                .collect::<Result<_>>()?;
            let modulus = match &built.modulus {
                Some((m, kappa, norm)) => Some(modulus_profile(fam, *kappa, m, *norm)?),
                None => None,
            };
            out.checks = Some(ChecksOut {
                exponential_type: check_exponential_type(fam),
                series,
                modulus,
            });
        }
        "rate" => {
            let solver = RateSolver::new(cfg.rate_solver.clone())?;
            let rows = cfg
                .rate_queries
                .iter()
                .map(|q| {
                    let r = match q {
                        RateQuery::Pointwise { site, level } => solver.pointwise(spec, *site, *level)?,
                        RateQuery::Path { values } => {
                            let psi = PathValue {
                                sites: spec.sites().clone(),
                                values: values.clone(),
                                tail_estimate: 0.0,
                                tail_warning: false,
                            };
                            solver.path(spec, &psi)?
                        }
                    };
                    Ok(RateOut::new(q, r))
                })
                .collect::<Result<_>>()?;
            out.rate = Some(rows);
        }
        "ldp_scan" => {
            let s = cfg.ldp_scan.as_ref().expect("requested");
            let tilt = built.tilt.clone().map(Tilt::new).transpose()?;
            let opts = ScanOptions {
                estimate: EstimateOptions { min_ess: s.min_ess },
                rate: cfg.rate_solver.clone(),
                untilted: matches!(s.tilt, TiltConfig::None),
            };
            let report = ldp_scan_with(spec, &s.event, &s.epsilons, s.speed, s.samples, cfg.seed, tilt.as_ref(), &opts)?;
            out.ldp_scan = Some(report);
        }
        _ => {
            let p = cfg.probe.as_ref().expect("requested");
            let u = built.probe_control.as_ref().expect("built with the probe");
            let rows = convergence_probe(spec, u, &p.epsilons, p.samples, probe_seed(cfg.seed))?;
            out.probe = Some(ProbeOut {
                slope: probe_slope(&rows),
                rows,
            });
        }
    }
    Ok(())
}

fn probe_seed(seed: u64) -> u64 {
    seed ^ 0xD1B5_4A32_D192_ED03
}

fn write_outputs(cfg: &RunConfig, dir: &Path, stages: &Stages, records: Vec<StageRecord>, status: i32) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec!["summary.json".to_string()];
    write_json(
        &dir.join("summary.json"),
        &Summary {
            seed: cfg.seed,
            config: cfg,
            results: stages,
        },
    )?;
    if let Some(rep) = &stages.ldp_scan {
        std::fs::write(dir.join("ldp.csv"), ldp_csv(rep))?;
        files.push("ldp.csv".into());
    }
    if let Some(p) = &stages.probe {
        let rows = p.rows.iter().map(|r| vec![r.epsilon, r.rms, r.stderr]);
        std::fs::write(dir.join("probe.csv"), table_csv(&["epsilon", "rms", "stderr"], rows))?;
        files.push("probe.csv".into());
    }
    files.push("manifest.json".into());
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            status,
            seed: cfg.seed,
            stages: records,
            files,
        },
    )
}
