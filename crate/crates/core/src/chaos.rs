//! Multiple integrals on the discrete white noise.
//!
//! Every integral here is one contraction of a symmetric kernel against two
//! per-cell vectors: a noise mass `x` (a scaled `W(cell)`) and a drift mass
//! `d` (a control measure `nu(cell)`). Summing over ordered index tuples, a
//! cell that occurs `r` times contributes
//!
//! ```text
//! P_r(x, d) = d^r + r * d^(r-1) * x
//! ```
//!
//! that is, the expansion of `(x + d)^r` with every product of two noise
//! factors in one cell removed. Noise slots are off-diagonal, drift slots are
//! ordinary integrals. Special cases:
//!
//! * `d = 0`: the off-diagonal sum `I_n`.
//! * `x = 0`: the full contraction `J_n^u`.
//! * both: the shifted integral `I_n^{eps,u}`, which splits exactly into the
//!   `2^n` mixed integrals `m_theta`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same, Grid, GridFn};
use crate::kernel::{factorial, orbit_size, sorted_indices, Kernel, KernelRepr, SeparableTerm};
use crate::noise::{Control, NoisePath};

/// Separable products with distinct factors are contracted by a DP over
/// subsets of argument slots.
pub const SEPARABLE_DP_MAX_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Nu,
    Noise,
}

/// Assignment of each argument slot to the control measure or the noise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThetaPattern {
    slots: Vec<Slot>,
}

impl ThetaPattern {
    pub fn new(slots: Vec<Slot>) -> Self {
        ThetaPattern { slots }
    }

    pub fn all_nu(n: usize) -> Self {
        ThetaPattern::new(vec![Slot::Nu; n])
    }

    pub fn all_noise(n: usize) -> Self {
        ThetaPattern::new(vec![Slot::Noise; n])
    }

    /// Bit `j` of `bits` set means slot `j` is `Nu`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        ThetaPattern::new(
            (0..n)
                .map(|j| if bits >> j & 1 == 1 { Slot::Nu } else { Slot::Noise })
                .collect(),
        )
    }

    /// All `2^n` patterns of length `n`.
    pub fn all(n: usize) -> impl Iterator<Item = ThetaPattern> {
        (0..1u64 << n).map(move |b| ThetaPattern::from_bits(n, b))
    }

    /// The `C(n, k)` patterns with exactly `k` `Nu` slots.
    pub fn with_nu_count(n: usize, k: usize) -> Vec<ThetaPattern> {
        ThetaPattern::all(n).filter(|p| p.nu_count() == k).collect()
    }

    pub fn order(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn nu_count(&self) -> usize {
        self.slots.iter().filter(|s| **s == Slot::Nu).count()
    }
}

/// Elementary symmetric polynomials `e_0..=e_n` of `xs`.
pub fn elementary_symmetric(xs: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for x in xs {
        if x == 0.0 {
            continue;
        }
        for k in (1..=n).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite_poly(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone)]
struct RankOneSeries {
    // keeps the function alive so its address cannot be reused as a key
    _g: GridFn,
    drift: f64,
    e: Vec<f64>,
}

/// Contraction of kernels against fixed noise and drift masses. Rank-one
/// factors are cached by identity, so kernels sharing a function (as in
/// `h^{(x) n} / n!` for every `n`) reuse one symmetric-polynomial sweep.
#[derive(Debug)]
pub struct Contraction<'a> {
    grid: &'a std::sync::Arc<Grid>,
    x: &'a [f64],
    d: Option<&'a [f64]>,
    noise_free: bool,
    series: HashMap<usize, RankOneSeries>,
}

impl<'a> Contraction<'a> {
    /// `x` and `d` are per-cell masses; `d = None` means no drift.
    pub fn new(grid: &'a std::sync::Arc<Grid>, x: &'a [f64], d: Option<&'a [f64]>) -> Result<Self> {
        for v in std::iter::once(x).chain(d) {
            if v.len() != grid.len() {
                return Err(Error::Dimension {
                    expected: grid.len(),
                    found: v.len(),
                });
            }
        }
        Ok(Contraction {
            grid,
            x,
            d,
            noise_free: x.iter().all(|&v| v == 0.0),
            series: HashMap::new(),
        })
    }

    fn drift_dot(&self, g: &GridFn) -> f64 {
        self.d
            .map(|d| g.values().iter().zip(d).map(|(a, b)| a * b).sum())
            .unwrap_or(0.0)
    }

    fn series(&mut self, g: &GridFn, n: usize) -> &RankOneSeries {
        let key = g.ptr_id();
        let stale = self.series.get(&key).is_none_or(|s| s.e.len() <= n);
        if stale {
            let drift = self.drift_dot(g);
            let e = if self.noise_free {
                let mut e = vec![0.0; n + 1];
                e[0] = 1.0;
                e
            } else {
                elementary_symmetric(g.values().iter().zip(self.x).map(|(a, b)| a * b), n)
            };
            self.series.insert(
                key,
                RankOneSeries {
                    _g: g.clone(),
                    drift,
                    e,
                },
            );
        }
        &self.series[&key]
    }

    /// The full contraction of `f` (sum of all `m_theta`).
    pub fn eval(&mut self, f: &Kernel) -> Result<f64> {
        ensure_same(self.grid, f.grid())?;
        let n = f.order();
        match f.repr() {
            KernelRepr::DenseSym(v) => {
                if n == 0 {
                    return Ok(v[0]);
                }
                Ok(self.dense_contract(v, n))
            }
            KernelRepr::SeparableSum(terms) => {
                if n == 0 {
                    return Ok(terms.iter().map(SeparableTerm::coeff).sum());
                }
                let mut total = 0.0;
                for t in terms {
                    if t.coeff() == 0.0 {
                        continue;
                    }
                    let v = if t.is_rank_one() {
                        let s = self.series(&t.factors()[0], n);
                        rank_one_full(s.drift, &s.e, n)
                    } else {
                        self.general_full(t, n)?
                    };
                    total += t.coeff() * v;
                }
                Ok(total)
            }
        }
    }

    /// `m_theta` for one pattern.
    pub fn eval_pattern(&mut self, f: &Kernel, theta: &ThetaPattern) -> Result<f64> {
        ensure_same(self.grid, f.grid())?;
        let n = f.order();
        if theta.order() != n {
            return Err(Error::OrderMismatch {
                expected: n,
                found: theta.order(),
            });
        }
        let k = theta.nu_count();
        match f.repr() {
            KernelRepr::DenseSym(v) => {
                if n == 0 {
                    return Ok(v[0]);
                }
                Ok(self.dense_pattern(v, theta))
            }
            KernelRepr::SeparableSum(terms) => {
                if n == 0 {
                    return Ok(terms.iter().map(SeparableTerm::coeff).sum());
                }
                let mut total = 0.0;
                for t in terms {
                    if t.coeff() == 0.0 {
                        continue;
                    }
                    let v = if t.is_rank_one() {
                        let s = self.series(&t.factors()[0], n);
                        s.drift.powi(k as i32) * factorial(n - k) * s.e[n - k]
                    } else {
                        let (a, dp) = self.general_tables(t, n)?;
                        let mut acc = 0.0;
                        for (mask, &od) in dp.iter().enumerate() {
                            if od != 0.0 && (mask as u64).count_ones() as usize == n - k {
                                acc += od * complement_product(&a, mask);
                            }
                        }
                        acc / binomial_f(n, k)
                    };
                    total += t.coeff() * v;
                }
                Ok(total)
            }
        }
    }

    fn p_r(&self, cell: usize, r: usize) -> f64 {
        let x = self.x[cell];
        let d = self.d.map_or(0.0, |d| d[cell]);
        if r == 1 {
            d + x
        } else {
            d.powi(r as i32) + r as f64 * d.powi(r as i32 - 1) * x
        }
    }

    /// Dense contraction with the orbit sum written out per order; the
    /// canonical rank of `i <= j <= k` is `i + C(j+1, 2) + C(k+2, 3)`.
    fn dense_contract(&self, v: &[f64], n: usize) -> f64 {
        let m = self.grid.len();
        let p: Vec<[f64; 3]> = (0..m)
            .map(|c| [self.p_r(c, 1), self.p_r(c, 2), self.p_r(c, 3)])
            .collect();
        match n {
            1 => v.iter().zip(&p).map(|(x, p)| x * p[0]).sum(),
            2 => {
                let mut total = 0.0;
                for j in 0..m {
                    let row = &v[j * (j + 1) / 2..];
                    let mut acc = 0.0;
                    for i in 0..j {
                        acc += row[i] * p[i][0];
                    }
                    total += 2.0 * acc * p[j][0] + row[j] * p[j][1];
                }
                total
            }
            3 => {
                let mut total = 0.0;
                for k in 0..m {
                    let base_k = k * (k + 1) * (k + 2) / 6;
                    let (pk1, pk2, pk3) = (p[k][0], p[k][1], p[k][2]);
                    for j in 0..=k {
                        let row = &v[base_k + j * (j + 1) / 2..];
                        let mut distinct = 0.0;
                        for i in 0..j {
                            distinct += row[i] * p[i][0];
                        }
                        let pj = p[j][0];
                        total += if j < k {
                            // i < j < k and i = j < k
                            6.0 * distinct * pj * pk1 + 3.0 * row[j] * p[j][1] * pk1
                        } else {
                            // i < j = k and i = j = k
                            3.0 * distinct * pk2 + row[j] * pk3
                        };
                    }
                }
                total
            }
            _ => sorted_indices(m, n)
                .zip(v)
                .map(|(idx, &val)| {
                    let mut w = orbit_size(&idx);
                    let mut start = 0;
                    while start < n {
                        let mut end = start + 1;
                        while end < n && idx[end] == idx[start] {
                            end += 1;
                        }
                        w *= self.p_r(idx[start], end - start);
                        start = end;
                    }
                    val * w
                })
                .sum(),
        }
    }

    fn dense_pattern(&self, v: &[f64], theta: &ThetaPattern) -> f64 {
        let m = self.grid.len();
        let n = theta.order();
        let d = self.d;
        let mut total = 0.0;
        let mut perms: Vec<Vec<usize>> = Vec::with_capacity(6);
        for (idx, &val) in sorted_indices(m, n).zip(v) {
            if val == 0.0 {
                continue;
            }
            distinct_permutations(&idx, &mut perms);
            let mut acc = 0.0;
            for p in &perms {
                let mut prod = 1.0;
                for (j, &c) in p.iter().enumerate() {
                    prod *= match theta.slots[j] {
                        Slot::Nu => d.map_or(0.0, |d| d[c]),
                        Slot::Noise => {
                            let clash = p
                                .iter()
                                .enumerate()
                                .any(|(l, &c2)| l < j && c2 == c && theta.slots[l] == Slot::Noise);
                            if clash {
                                0.0
                            } else {
                                self.x[c]
                            }
                        }
                    };
                    if prod == 0.0 {
                        break;
                    }
                }
                acc += prod;
            }
            total += val * acc;
        }
        total
    }

    /// Drift inner products `a_j` and, for every subset `T` of slots, the
    /// off-diagonal noise sum of the factors in `T` over distinct cells.
    fn general_tables(&self, t: &SeparableTerm, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if n > SEPARABLE_DP_MAX_ORDER {
            return Err(Error::TooLarge(format!(
                "separable terms with distinct factors are limited to order {SEPARABLE_DP_MAX_ORDER}, got {n}"
            )));
        }
        let a: Vec<f64> = t.factors().iter().map(|g| self.drift_dot(g)).collect();
        let mut dp = vec![0.0; 1 << n];
        dp[0] = 1.0;
        if !self.noise_free {
            let mut w = vec![0.0; n];
            for (c, &x) in self.x.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (wj, g) in w.iter_mut().zip(t.factors()) {
                    *wj = g.value(c) * x;
                }
                for mask in (0..(1usize << n)).rev() {
                    let base = dp[mask];
                    if base == 0.0 {
                        continue;
                    }
                    for (j, &wj) in w.iter().enumerate() {
                        if mask >> j & 1 == 0 {
                            dp[mask | 1 << j] += base * wj;
                        }
                    }
                }
            }
        }
        Ok((a, dp))
    }

    fn general_full(&self, t: &SeparableTerm, n: usize) -> Result<f64> {
        if self.noise_free {
            return Ok(t.factors().iter().map(|g| self.drift_dot(g)).product());
        }
        let (a, dp) = self.general_tables(t, n)?;
        Ok(dp
            .iter()
            .enumerate()
            .filter(|(_, &od)| od != 0.0)
            .map(|(mask, &od)| od * complement_product(&a, mask))
            .sum())
    }
}

/// `n! * sum_k A^k / k! * e_{n-k}` for a rank-one factor with drift `A`.
fn rank_one_full(drift: f64, e: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    let mut pow = 1.0;
    let mut kfact = 1.0;
    for k in 0..=n {
        if k > 0 {
            pow *= drift;
            kfact *= k as f64;
        }
        total += pow / kfact * e[n - k];
        if drift == 0.0 {
            break;
        }
    }
    factorial(n) * total
}

fn complement_product(a: &[f64], mask: usize) -> f64 {
    a.iter()
        .enumerate()
        .filter(|(j, _)| mask >> j & 1 == 0)
        .map(|(_, v)| v)
        .product()
}

fn binomial_f(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Distinct orderings of a sorted multi-index (at most `n!`).
fn distinct_permutations(sorted: &[usize], out: &mut Vec<Vec<usize>>) {
    out.clear();
    let mut cur = sorted.to_vec();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let n = cur.len();
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

fn drift_masses(u: &Control) -> Vec<f64> {
    u.cell_masses()
}

fn scaled_noise(path: &NoisePath, eps: f64) -> Vec<f64> {
    path.increments().iter().map(|w| eps * w).collect()
}

/// `I_n(f)`: off-diagonal sum of `f` against the path increments.
pub fn multiple_integral(f: &Kernel, path: &NoisePath) -> Result<f64> {
    ensure_same(f.grid(), path.grid())?;
    Contraction::new(path.grid(), path.increments(), None)?.eval(f)
}

/// `||g||^n * He_n(W(g) / ||g||)`, the Gaussian-space value of `I_n(g^{(x) n})`.
pub fn hermite_value(n: usize, g: &GridFn, path: &NoisePath) -> Result<f64> {
    ensure_same(g.grid(), path.grid())?;
    if n == 0 {
        return Ok(1.0);
    }
    let norm = g.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let w = crate::noise::isonormal(path, g)?;
    Ok(norm.powi(n as i32) * hermite_poly(n, w / norm))
}

/// `m_theta`: `nu = u * measure` in `Nu` slots, `eps * W` in `Noise` slots.
pub fn mixed_integral(
    f: &Kernel,
    theta: &ThetaPattern,
    path: &NoisePath,
    u: &Control,
    eps: f64,
) -> Result<f64> {
    ensure_same(f.grid(), path.grid())?;
    ensure_same(f.grid(), u.grid())?;
    let x = scaled_noise(path, eps);
    let d = drift_masses(u);
    Contraction::new(path.grid(), &x, Some(&d))?.eval_pattern(f, theta)
}

/// `I_n^{eps,u}(f)`, evaluated on the shifted increments `eps * W + nu`.
pub fn shifted_multiple_integral(f: &Kernel, path: &NoisePath, u: &Control, eps: f64) -> Result<f64> {
    ensure_same(f.grid(), path.grid())?;
    ensure_same(f.grid(), u.grid())?;
    let x = scaled_noise(path, eps);
    let d = drift_masses(u);
    Contraction::new(path.grid(), &x, Some(&d))?.eval(f)
}

/// `J_n^u(f)`: full contraction against `nu`, diagonals included.
pub fn deterministic_integral(f: &Kernel, u: &Control) -> Result<f64> {
    ensure_same(f.grid(), u.grid())?;
    let d = drift_masses(u);
    let x = vec![0.0; d.len()];
    Contraction::new(u.grid(), &x, Some(&d))?.eval(f)
}

/// Which `m_theta` terms a moment bound covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundScope {
    /// All patterns with exactly `k` `Nu` slots.
    NuCount(usize),
    /// The whole shifted integral.
    All,
}

/// `L^p` bound on `m_theta` (fixed `k`) or on `I_n^{1,u}` (all patterns) for
/// controls with `||u||^2 <= budget`.
pub fn theoretical_bound(n: usize, scope: BoundScope, budget: f64, p: f64, norm: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::config(format!("moment order must be at least 2, got {p}")));
    }
    if !(budget >= 0.0) {
        return Err(Error::config(format!("control budget must be nonnegative, got {budget}")));
    }
    let nf = n as f64;
    Ok(match scope {
        BoundScope::NuCount(k) => {
            if k > n {
                return Err(Error::config(format!("nu count {k} exceeds order {n}")));
            }
            let j = (n - k) as f64;
            factorial(n - k).sqrt() * budget.powf(k as f64 / 2.0) * (p - 1.0).powf(j / 2.0) * norm
        }
        BoundScope::All => factorial(n).sqrt() * (4.0 * (budget + 1.0) * (p - 1.0)).powf(nf / 2.0) * norm,
    })
}

/// The fixed-`k` bound with `eps * W` in the noise slots.
pub fn theoretical_bound_eps(n: usize, k: usize, budget: f64, p: f64, norm: f64, eps: f64) -> Result<f64> {
    Ok(eps.abs().powi((n - k.min(n)) as i32) * theoretical_bound(n, BoundScope::NuCount(k), budget, p, norm)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernel::{symmetrize, CellIndexed};
    use crate::noise::{sample_white_noise, sample_white_noise_stream};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    /// Brute force over all ordered tuples: noise slots must sit in
    /// pairwise distinct cells, drift slots are unrestricted.
    fn brute_pattern(f: &Kernel, theta: &ThetaPattern, x: &[f64], d: &[f64]) -> f64 {
        let n = f.order();
        let m = x.len();
        let mut idx = vec![0usize; n];
        let mut total = 0.0;
        loop {
            let mut ok = true;
            let mut prod = f.value(&idx);
            for j in 0..n {
                match theta.slots()[j] {
                    Slot::Nu => prod *= d[idx[j]],
                    Slot::Noise => {
                        if (0..j).any(|l| theta.slots()[l] == Slot::Noise && idx[l] == idx[j]) {
                            ok = false;
                        }
                        prod *= x[idx[j]];
                    }
                }
            }
            if ok {
                total += prod;
            }
            let mut k = 0;
            loop {
                if k == n {
                    return total;
                }
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn rand_fn(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> GridFn {
        GridFn::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn rand_kernel(g: &Arc<Grid>, n: usize, kind: usize, rng: &mut ChaCha8Rng) -> Kernel {
        match kind {
            0 => Kernel::dense_from_fn(g, n, |_| rng.random_range(-1.0..1.0)).unwrap(),
            1 => Kernel::rank_one(&rand_fn(g, rng), n, rng.random_range(0.5..2.0)).unwrap(),
            _ => {
                let terms = (0..2)
                    .map(|_| SeparableTerm::new(rng.random_range(-1.0..1.0), (0..n).map(|_| rand_fn(g, rng)).collect()))
                    .collect();
                Kernel::separable(g, n, terms).unwrap()
            }
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn pattern_enumeration() {
        assert_eq!(ThetaPattern::all(3).count(), 8);
        for k in 0..=3 {
            let ps = ThetaPattern::with_nu_count(3, k);
            assert_eq!(ps.len(), [1, 3, 3, 1][k]);
            assert!(ps.iter().all(|p| p.nu_count() == k));
        }
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_poly(0, 0.7), 1.0);
        assert_eq!(hermite_poly(2, 1.5), 1.5 * 1.5 - 1.0);
        assert!((hermite_poly(3, 1.5) - (1.5f64.powi(3) - 4.5)).abs() < 1e-14);
        let g = Grid::unit_interval(8).unwrap();
        let one = GridFn::constant(&g, 1.0);
        let p = sample_white_noise(&g, 2);
        let w = crate::noise::isonormal(&p, &one).unwrap();
        assert!((hermite_value(2, &one, &p).unwrap() - (w * w - 1.0)).abs() < 1e-14);
        assert_eq!(hermite_value(0, &one, &p).unwrap(), 1.0);
        assert_eq!(hermite_value(3, &GridFn::zeros(&g), &p).unwrap(), 0.0);
    }

    #[test]
    fn first_order_is_isonormal() {
        let g = Grid::unit_interval(16).unwrap();
        let one = GridFn::constant(&g, 1.0);
        let p = sample_white_noise(&g, 5);
        let f = Kernel::rank_one(&one, 1, 1.0).unwrap();
        let i1 = multiple_integral(&f, &p).unwrap();
        assert!((i1 - crate::noise::isonormal(&p, &one).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn matches_brute_force_off_diagonal() {
        let g = Grid::unit_interval(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            for kind in 0..3 {
                let f = rand_kernel(&g, n, kind, &mut rng);
                let p = sample_white_noise_stream(&g, 3, (n * 3 + kind) as u64);
                let zero = vec![0.0; 6];
                let b = brute_pattern(&f, &ThetaPattern::all_noise(n), p.increments(), &zero);
                let v = multiple_integral(&f, &p).unwrap();
                assert!(rel(v, b) < 1e-11, "n={n} kind={kind}: {v} vs {b}");
            }
        }
    }

    #[test]
    fn disjoint_product_factorizes() {
        let g = Grid::unit_interval(8).unwrap();
        let a = GridFn::indicator_time(&g, 0.0, 0.5).unwrap().scale(1.3);
        let b = GridFn::new(&g, (0..8).map(|i| if i >= 4 { (i as f64).sin() } else { 0.0 }).collect()).unwrap();
        let f = Kernel::separable(&g, 2, vec![SeparableTerm::new(1.0, vec![a.clone(), b.clone()])]).unwrap();
        let p = sample_white_noise(&g, 9);
        let i1 = |h: &GridFn| multiple_integral(&Kernel::rank_one(h, 1, 1.0).unwrap(), &p).unwrap();
        let v = multiple_integral(&f, &p).unwrap();
        assert!(rel(v, i1(&a) * i1(&b)) < 1e-13);
        // same kernel through the symmetrization of a (x) b
        let indexed = CellIndexed::from_fn(&g, |c| Kernel::rank_one(&a, 1, b.value(c))).unwrap();
        let sym = symmetrize(&indexed).unwrap();
        assert!(rel(multiple_integral(&sym, &p).unwrap(), v) < 1e-12);
    }

    #[test]
    fn mixed_integral_matches_brute_force() {
        let g = Grid::unit_interval(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=3 {
            for kind in 0..3 {
                let f = rand_kernel(&g, n, kind, &mut rng);
                let u = Control::new(rand_fn(&g, &mut rng));
                let p = sample_white_noise_stream(&g, 4, (10 * n + kind) as u64);
                let eps = rng.random_range(0.1..1.0);
                let x: Vec<f64> = p.increments().iter().map(|w| eps * w).collect();
                let d = u.cell_masses();
                for theta in ThetaPattern::all(n) {
                    let v = mixed_integral(&f, &theta, &p, &u, eps).unwrap();
                    let b = brute_pattern(&f, &theta, &x, &d);
                    assert!((v - b).abs() <= 1e-10 * b.abs().max(1e-3), "n={n} kind={kind} {theta:?}: {v} vs {b}");
                }
            }
        }
    }

    #[test]
    fn mixed_pair_example() {
        // f = Sym(g (x) h), theta = (Nu, Noise): no exclusion between a
        // drift slot and a noise slot.
        let g = Grid::unit_interval(6).unwrap();
        let a = GridFn::new(&g, vec![1.0, 0.5, -0.3, 0.2, 0.9, -1.1]).unwrap();
        let b = GridFn::new(&g, vec![0.4, -0.7, 1.2, 0.0, 0.3, 0.8]).unwrap();
        let u = Control::new(GridFn::new(&g, vec![0.2, 1.0, -0.5, 0.7, 0.1, 0.4]).unwrap());
        let f = Kernel::separable(&g, 2, vec![SeparableTerm::new(1.0, vec![a.clone(), b.clone()])]).unwrap();
        let p = sample_white_noise(&g, 1);
        let theta = ThetaPattern::new(vec![Slot::Nu, Slot::Noise]);
        let v = mixed_integral(&f, &theta, &p, &u, 1.0).unwrap();
        let i1 = |h: &GridFn| crate::noise::isonormal(&p, h).unwrap();
        let expect = 0.5 * (a.inner(u.u()).unwrap() * i1(&b) + b.inner(u.u()).unwrap() * i1(&a));
        assert!(rel(v, expect) < 1e-12);
    }

    #[test]
    fn decomposition_identity() {
        let g = Grid::unit_interval(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for inst in 0..20 {
            for n in 1..=3 {
                let f = rand_kernel(&g, n, inst % 3, &mut rng);
                let u = Control::new(rand_fn(&g, &mut rng));
                let eps = rng.random_range(0.05..1.5);
                let p = sample_white_noise_stream(&g, 8, inst as u64);
                let a = shifted_multiple_integral(&f, &p, &u, eps).unwrap();
                let b: f64 = ThetaPattern::all(n)
                    .map(|t| mixed_integral(&f, &t, &p, &u, eps).unwrap())
                    .sum();
                assert!(rel(a, b) <= 1e-10, "inst {inst} n {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn all_nu_equals_deterministic() {
        let g = Grid::unit_interval(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for inst in 0..20 {
            let n = 1 + inst % 3;
            let f = rand_kernel(&g, n, inst % 3, &mut rng);
            let u = Control::new(rand_fn(&g, &mut rng));
            let p = sample_white_noise_stream(&g, 2, inst as u64);
            let m = mixed_integral(&f, &ThetaPattern::all_nu(n), &p, &u, 0.7).unwrap();
            let j = deterministic_integral(&f, &u).unwrap();
            assert!((m - j).abs() <= 1e-12 * j.abs().max(1.0), "{m} vs {j}");
        }
    }

    #[test]
    fn all_noise_equals_multiple_integral() {
        let g = Grid::unit_interval(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for kind in 0..3 {
            let f = rand_kernel(&g, 3, kind, &mut rng);
            let u = Control::new(rand_fn(&g, &mut rng));
            let p = sample_white_noise(&g, 12);
            let m = mixed_integral(&f, &ThetaPattern::all_noise(3), &p, &u, 1.0).unwrap();
            assert!(rel(m, multiple_integral(&f, &p).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn shifted_examples() {
        let g = Grid::unit_interval(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = rand_fn(&g, &mut rng);
        let u = Control::new(rand_fn(&g, &mut rng));
        let p = sample_white_noise(&g, 6);
        let f1 = Kernel::rank_one(&h, 1, 1.0).unwrap();
        let v = shifted_multiple_integral(&f1, &p, &u, 0.3).unwrap();
        let expect = 0.3 * multiple_integral(&f1, &p).unwrap() + h.inner(u.u()).unwrap();
        assert!((v - expect).abs() < 1e-13);
        for kind in 0..3 {
            let f = rand_kernel(&g, 3, kind, &mut rng);
            let s = shifted_multiple_integral(&f, &p, &u, 0.0).unwrap();
            assert!(rel(s, deterministic_integral(&f, &u).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn deterministic_examples() {
        let g = Grid::unit_interval(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let uf = rand_fn(&g, &mut rng);
        let u = Control::new(uf.clone());
        let f1 = Kernel::dense(&g, 1, uf.values().to_vec()).unwrap();
        assert!(rel(deterministic_integral(&f1, &u).unwrap(), uf.norm_sq()) < 1e-14);
        let h = rand_fn(&g, &mut rng);
        let f2 = Kernel::rank_one(&h, 2, 1.0).unwrap();
        assert!(rel(deterministic_integral(&f2, &u).unwrap(), h.inner(&uf).unwrap().powi(2)) < 1e-14);

        let f3 = rand_kernel(&g, 3, 0, &mut rng);
        let nu = u.cell_masses();
        let mut brute = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    brute += f3.value(&[i, j, k]) * nu[i] * nu[j] * nu[k];
                }
            }
        }
        let v = deterministic_integral(&f3, &u).unwrap();
        assert!((v - brute).abs() <= 1e-12 * brute.abs().max(1.0), "{v} vs {brute}");
    }

    #[test]
    fn separable_and_dense_agree() {
        let g = Grid::unit_interval(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = rand_kernel(&g, 3, 2, &mut rng);
        let d = f.to_dense().unwrap();
        let u = Control::new(rand_fn(&g, &mut rng));
        let p = sample_white_noise(&g, 7);
        for t in ThetaPattern::all(3) {
            let a = mixed_integral(&f, &t, &p, &u, 0.4).unwrap();
            let b = mixed_integral(&d, &t, &p, &u, 0.4).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn higher_orders_match_brute_force() {
        let g = Grid::unit_interval(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = Control::new(rand_fn(&g, &mut rng));
        let p = sample_white_noise(&g, 3);
        let eps = 0.6;
        let x: Vec<f64> = p.increments().iter().map(|w| eps * w).collect();
        let d = u.cell_masses();
        for (n, kind) in [(4, 1), (4, 2), (5, 1), (5, 2)] {
            let f = rand_kernel(&g, n, kind, &mut rng);
            let mut sum = 0.0;
            for t in ThetaPattern::all(n) {
                let v = mixed_integral(&f, &t, &p, &u, eps).unwrap();
                let b = brute_pattern(&f, &t, &x, &d);
                assert!((v - b).abs() <= 1e-10 * b.abs().max(1e-3), "n={n} kind={kind} {t:?}: {v} vs {b}");
                sum += v;
            }
            assert!(rel(shifted_multiple_integral(&f, &p, &u, eps).unwrap(), sum) < 1e-10);
        }
    }

    #[test]
    fn bound_examples() {
        let b = theoretical_bound(1, BoundScope::All, 0.0, 2.0, 1.0).unwrap();
        assert!((b - 2.0).abs() < 1e-15);
        let b = theoretical_bound(2, BoundScope::All, 1.0, 4.0, 1.0).unwrap();
        assert!((b - 2f64.sqrt() * 24.0).abs() < 1e-12);
        assert!((b - 33.94).abs() < 5e-3);
        let b = theoretical_bound(3, BoundScope::NuCount(0), 5.0, 2.0, 0.5).unwrap();
        assert!((b - 6f64.sqrt() * 0.5).abs() < 1e-15);
        assert!(theoretical_bound(2, BoundScope::All, 1.0, 1.5, 1.0).is_err());
        let e = theoretical_bound_eps(3, 1, 1.0, 2.0, 1.0, 0.1).unwrap();
        assert!((e - 0.01 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = Grid::unit_interval(4).unwrap();
        let h = Grid::unit_interval(5).unwrap();
        let f = Kernel::rank_one(&GridFn::constant(&g, 1.0), 2, 1.0).unwrap();
        assert!(multiple_integral(&f, &sample_white_noise(&h, 1)).is_err());
    }
}
