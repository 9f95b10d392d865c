//! Fractional Brownian motion on a finite set of times, generated from a
//! Cholesky factor of the covariance `R_H(t, s) = (t^2H + s^2H - |t - s|^2H) / 2`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::stream_rng;

/// Diagonal shift used when the bare covariance fails to factor.
pub const FBM_JITTER: f64 = 1e-12;

pub fn fbm_covariance(t: f64, s: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

#[derive(Debug, Clone)]
pub struct FbmGenerator {
    times: Vec<f64>,
    hurst: f64,
    factor: DMatrix<f64>,
}

impl FbmGenerator {
    pub fn new(times: Vec<f64>, hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::config(format!("Hurst exponent must lie in (0, 1), got {hurst}")));
        }
        validate_times(&times)?;
        let n = times.len();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(times[i], times[j], hurst));
        let factor = cov
            .clone()
            .cholesky()
            .or_else(|| {
                let mut reg = cov;
                for i in 0..n {
                    reg[(i, i)] += FBM_JITTER;
                }
                reg.cholesky()
            })
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "fBm covariance (H = {hurst}) is not positive definite after regularization"
                ))
            })?
            .unpack();
        Ok(FbmGenerator {
            times,
            hurst,
            factor,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Lower-triangular `L` with `L L^T = R_H` (plus jitter if it was needed).
    pub fn generator(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        self.sample_stream(seed, 0)
    }

    pub fn sample_stream(&self, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, stream);
        let z = DVector::from_fn(self.times.len(), |_, _| StandardNormal.sample(&mut rng));
        (&self.factor * z).iter().copied().collect()
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::config("fBm needs at least one time point"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::config("fBm times must be finite and nonnegative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("fBm times must be strictly increasing"));
    }
    Ok(())
}

/// One fBm sample path at `times`.
pub fn sample_fbm(times: &[f64], hurst: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(FbmGenerator::new(times.to_vec(), hurst)?.sample(seed))
}

/// Exact Cholesky factor of `min(t_i, t_j)`: `L[i][j] = sqrt(t_j - t_{j-1})` for `j <= i`.
pub fn brownian_generator(times: &[f64]) -> Result<DMatrix<f64>> {
    validate_times(times)?;
    let n = times.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if j > i {
            0.0
        } else {
            let prev = if j == 0 { 0.0 } else { times[j - 1] };
            (times[j] - prev).sqrt()
        }
    }))
}
