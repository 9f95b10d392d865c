//! White-noise realizations on a grid, deterministic controls, and the
//! scaled/shifted noise `eps * W + nu`.
//!
//! Every random object is drawn from a ChaCha stream addressed by
//! `(seed, stream)`. Monte Carlo loops use the sample index as the stream,
//! so results do not depend on how samples are split across workers.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same, Grid, GridFn};

/// Independent random stream `stream` derived from a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Where a path came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
    /// Set when the increments were scaled/shifted after sampling.
    pub shifted: bool,
}

/// One realization of the white-noise cell masses `W(cell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid: Arc<Grid>,
    increments: Vec<f64>,
    provenance: Option<Provenance>,
}

impl NoisePath {
    /// Path with given increments (no seed provenance).
    pub fn from_increments(grid: &Arc<Grid>, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: increments.len(),
            });
        }
        Ok(NoisePath {
            grid: grid.clone(),
            increments,
            provenance: None,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn provenance(&self) -> Option<Provenance> {
        self.provenance
    }
}

/// Fill `out` with independent `N(0, cell_measure)` draws.
pub fn fill_white_noise(rng: &mut ChaCha8Rng, grid: &Grid, out: &mut [f64]) {
    for (x, m) in out.iter_mut().zip(grid.measures()) {
        let z: f64 = StandardNormal.sample(rng);
        *x = z * m.sqrt();
    }
}

pub fn sample_white_noise(grid: &Arc<Grid>, seed: u64) -> NoisePath {
    sample_white_noise_stream(grid, seed, 0)
}

pub fn sample_white_noise_stream(grid: &Arc<Grid>, seed: u64, stream: u64) -> NoisePath {
    let mut rng = stream_rng(seed, stream);
    let mut increments = vec![0.0; grid.len()];
    fill_white_noise(&mut rng, grid, &mut increments);
    NoisePath {
        grid: grid.clone(),
        increments,
        provenance: Some(Provenance {
            seed,
            stream,
            shifted: false,
        }),
    }
}

/// Deterministic square-integrable control `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    u: GridFn,
    norm_sq: f64,
}

impl Control {
    pub fn new(u: GridFn) -> Self {
        let norm_sq = u.norm_sq();
        Control { u, norm_sq }
    }

    pub fn zero(grid: &Arc<Grid>) -> Self {
        Control::new(GridFn::zeros(grid))
    }

    pub fn u(&self) -> &GridFn {
        &self.u
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// Cell masses of the induced measure, `nu(cell) = u(cell) * measure(cell)`.
    pub fn cell_masses(&self) -> Vec<f64> {
        self.u
            .values()
            .iter()
            .zip(self.grid().measures())
            .map(|(u, m)| u * m)
            .collect()
    }

    pub fn scale(&self, c: f64) -> Control {
        Control::new(self.u.scale(c))
    }
}

/// Per-cell `eps * W(cell) + nu(cell)`.
pub fn shift_noise(path: &NoisePath, u: &Control, eps: f64) -> Result<NoisePath> {
    ensure_same(&path.grid, u.grid())?;
    let increments = path
        .increments
        .iter()
        .zip(u.u.values())
        .zip(path.grid.measures())
        .map(|((w, u), m)| eps * w + u * m)
        .collect();
    Ok(NoisePath {
        grid: path.grid.clone(),
        increments,
        provenance: path.provenance.map(|p| Provenance { shifted: true, ..p }),
    })
}

/// `W(h) = sum_cells h * W(cell)`.
pub fn isonormal(path: &NoisePath, h: &GridFn) -> Result<f64> {
    ensure_same(&path.grid, h.grid())?;
    Ok(dot(h.values(), &path.increments))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
