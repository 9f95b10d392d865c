//! Symmetric kernels on `T^n` discretized on a [`Grid`].
//!
//! Two storage forms are supported:
//!
//! * [`KernelRepr::DenseSym`]: one value per sorted multi-index
//!   `i_1 <= ... <= i_n`, i.e. one representative per permutation orbit.
//!   Limited to `n <= 3`.
//! * [`KernelRepr::SeparableSum`]: `sum_t c_t * Sym(g_1 (x) ... (x) g_n)`.
//!   Each product is read with symmetric semantics, so the kernel is
//!   symmetric whatever the factors are.
//!
//! Order-0 kernels are plain constants.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ensure_same, Grid, GridFn};

/// Highest order stored densely.
pub const DENSE_MAX_ORDER: usize = 3;
/// Hard limit on `m^n` for anything that walks the full index space.
pub const DENSE_MAX_TERMS: usize = 10_000_000;
/// Separable products with distinct factors go through permanents, which
/// are exponential in the order.
pub const GENERAL_TERM_MAX_ORDER: usize = 20;

/// One product `coeff * Sym(g_1 (x) ... (x) g_n)`.
#[derive(Debug, Clone)]
pub struct SeparableTerm {
    coeff: f64,
    factors: Vec<GridFn>,
    rank_one: bool,
}

impl SeparableTerm {
    pub fn new(coeff: f64, factors: Vec<GridFn>) -> Self {
        let rank_one = factors.windows(2).all(|w| {
            w[0].ptr_id() == w[1].ptr_id() || w[0].values() == w[1].values()
        });
        SeparableTerm {
            coeff,
            factors,
            rank_one,
        }
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn factors(&self) -> &[GridFn] {
        &self.factors
    }

    /// All factors are the same function, so the term is `c * g^{(x) n}`.
    pub fn is_rank_one(&self) -> bool {
        self.rank_one
    }

    fn scaled(&self, c: f64) -> SeparableTerm {
        SeparableTerm {
            coeff: self.coeff * c,
            factors: self.factors.clone(),
            rank_one: self.rank_one,
        }
    }
}

#[derive(Debug, Clone)]
pub enum KernelRepr {
    DenseSym(Vec<f64>),
    SeparableSum(Vec<SeparableTerm>),
}

#[derive(Debug, Clone)]
pub struct Kernel {
    order: usize,
    grid: Arc<Grid>,
    repr: KernelRepr,
}

impl Kernel {
    /// Order-0 kernel.
    pub fn scalar(grid: &Arc<Grid>, value: f64) -> Result<Kernel> {
        if !value.is_finite() {
            return Err(Error::NonFinite("order-0 kernel".into()));
        }
        Ok(Kernel {
            order: 0,
            grid: grid.clone(),
            repr: KernelRepr::DenseSym(vec![value]),
        })
    }

    pub fn zero(grid: &Arc<Grid>, order: usize) -> Kernel {
        let repr = if order == 0 {
            KernelRepr::DenseSym(vec![0.0])
        } else {
            KernelRepr::SeparableSum(Vec::new())
        };
        Kernel {
            order,
            grid: grid.clone(),
            repr,
        }
    }

    /// Dense kernel from values listed in canonical sorted-multi-index order
    /// (see [`sorted_indices`]).
    pub fn dense(grid: &Arc<Grid>, order: usize, values: Vec<f64>) -> Result<Kernel> {
        check_dense_size(grid.len(), order)?;
        let expected = multiset_count(grid.len(), order);
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense kernel values".into()));
        }
        Ok(Kernel {
            order,
            grid: grid.clone(),
            repr: KernelRepr::DenseSym(values),
        })
    }

    /// Dense kernel from a function of sorted cell multi-indices.
    pub fn dense_from_fn(
        grid: &Arc<Grid>,
        order: usize,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> Result<Kernel> {
        check_dense_size(grid.len(), order)?;
        let values = sorted_indices(grid.len(), order).map(|idx| f(&idx)).collect();
        Kernel::dense(grid, order, values)
    }

    pub fn separable(grid: &Arc<Grid>, order: usize, terms: Vec<SeparableTerm>) -> Result<Kernel> {
        if order == 0 {
            let value = terms.iter().map(|t| t.coeff).sum();
            return Kernel::scalar(grid, value);
        }
        for t in &terms {
            if t.factors.len() != order {
                return Err(Error::OrderMismatch {
                    expected: order,
                    found: t.factors.len(),
                });
            }
            if !t.coeff.is_finite() {
                return Err(Error::NonFinite("separable coefficient".into()));
            }
            for g in &t.factors {
                ensure_same(grid, g.grid())?;
            }
            if !t.rank_one && order > GENERAL_TERM_MAX_ORDER {
                return Err(Error::TooLarge(format!(
                    "separable products with distinct factors are limited to order {GENERAL_TERM_MAX_ORDER}"
                )));
            }
        }
        Ok(Kernel {
            order,
            grid: grid.clone(),
            repr: KernelRepr::SeparableSum(terms),
        })
    }

    /// `coeff * g^{(x) n}`.
    pub fn rank_one(g: &GridFn, order: usize, coeff: f64) -> Result<Kernel> {
        if order == 0 {
            return Kernel::scalar(g.grid(), coeff);
        }
        let term = SeparableTerm::new(coeff, vec![g.clone(); order]);
        Kernel::separable(g.grid(), order, vec![term])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn repr(&self) -> &KernelRepr {
        &self.repr
    }

    /// Value of an order-0 kernel; `None` for higher orders.
    pub fn as_scalar(&self) -> Option<f64> {
        match (&self.repr, self.order) {
            (KernelRepr::DenseSym(v), 0) => Some(v[0]),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            KernelRepr::DenseSym(v) => v.iter().all(|&x| x == 0.0),
            KernelRepr::SeparableSum(t) => t.iter().all(|t| t.coeff == 0.0),
        }
    }

    /// Value at a cell multi-index, in any argument order.
    pub fn value(&self, cells: &[usize]) -> f64 {
        debug_assert_eq!(cells.len(), self.order);
        match &self.repr {
            KernelRepr::DenseSym(v) => {
                let mut idx = cells.to_vec();
                idx.sort_unstable();
                v[multiset_rank(&idx)]
            }
            KernelRepr::SeparableSum(terms) => {
                let n = self.order;
                let fact = factorial(n);
                terms
                    .iter()
                    .map(|t| {
                        if t.rank_one {
                            t.coeff * cells.iter().map(|&c| t.factors[0].value(c)).product::<f64>()
                        } else {
                            let a: Vec<f64> = t
                                .factors
                                .iter()
                                .flat_map(|g| cells.iter().map(move |&c| g.value(c)))
                                .collect();
                            t.coeff * permanent(&a, n) / fact
                        }
                    })
                    .sum()
            }
        }
    }

    /// `L^2(T^n)` inner product.
    pub fn inner(&self, other: &Kernel) -> Result<f64> {
        ensure_same(&self.grid, &other.grid)?;
        if self.order != other.order {
            return Err(Error::OrderMismatch {
                expected: self.order,
                found: other.order,
            });
        }
        if self.order == 0 {
            return Ok(self.as_scalar().unwrap_or(0.0) * other.as_scalar().unwrap_or(0.0));
        }
        Ok(match (&self.repr, &other.repr) {
            (KernelRepr::DenseSym(a), KernelRepr::DenseSym(b)) => {
                let m = self.grid.measures();
                sorted_indices(self.grid.len(), self.order)
                    .zip(a.iter().zip(b))
                    .map(|(idx, (x, y))| x * y * orbit_weight(&idx, m))
                    .sum()
            }
            (KernelRepr::SeparableSum(a), KernelRepr::SeparableSum(b)) => {
                separable_inner(a, b, self.order)
            }
            (KernelRepr::DenseSym(_), KernelRepr::SeparableSum(terms))
            | (KernelRepr::SeparableSum(terms), KernelRepr::DenseSym(_)) => {
                let dense = if matches!(self.repr, KernelRepr::DenseSym(_)) {
                    self
                } else {
                    other
                };
                dense_separable_inner(dense, terms)
            }
        })
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(|s| s.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// `L^p(T^n)` norm. Rank-one single products factorize; everything else
    /// is summed over the full index space.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if self.order == 0 {
            return Ok(self.as_scalar().unwrap_or(0.0).abs());
        }
        if let KernelRepr::SeparableSum(terms) = &self.repr {
            match terms.as_slice() {
                [] => return Ok(0.0),
                [t] if t.rank_one => {
                    return Ok(t.coeff.abs() * t.factors[0].lp_norm(p).powi(self.order as i32))
                }
                _ => {}
            }
        }
        let m = self.grid.measures();
        if let KernelRepr::DenseSym(v) = &self.repr {
            let s: f64 = sorted_indices(self.grid.len(), self.order)
                .zip(v)
                .map(|(idx, x)| x.abs().powf(p) * orbit_weight(&idx, m))
                .sum();
            return Ok(s.powf(1.0 / p));
        }
        check_full_size(self.grid.len(), self.order)?;
        let s: f64 = sorted_indices(self.grid.len(), self.order)
            .map(|idx| self.value(&idx).abs().powf(p) * orbit_weight(&idx, m))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    pub fn scale(&self, c: f64) -> Kernel {
        let repr = match &self.repr {
            KernelRepr::DenseSym(v) => KernelRepr::DenseSym(v.iter().map(|x| c * x).collect()),
            KernelRepr::SeparableSum(t) => {
                KernelRepr::SeparableSum(t.iter().map(|t| t.scaled(c)).collect())
            }
        };
        Kernel {
            order: self.order,
            grid: self.grid.clone(),
            repr,
        }
    }

    pub fn add(&self, other: &Kernel) -> Result<Kernel> {
        ensure_same(&self.grid, &other.grid)?;
        if self.order != other.order {
            return Err(Error::OrderMismatch {
                expected: self.order,
                found: other.order,
            });
        }
        let repr = match (&self.repr, &other.repr) {
            (KernelRepr::DenseSym(a), KernelRepr::DenseSym(b)) => {
                KernelRepr::DenseSym(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            // mixed sums stay dense so differences do not cancel in the norm
            (KernelRepr::DenseSym(_), _) | (_, KernelRepr::DenseSym(_)) if self.order > 0 => {
                return self.to_dense()?.add(&other.to_dense()?);
            }
            _ => {
                let mut terms = self.separable_terms()?;
                terms.extend(other.separable_terms()?);
                KernelRepr::SeparableSum(terms)
            }
        };
        Ok(Kernel {
            order: self.order,
            grid: self.grid.clone(),
            repr,
        })
    }

    pub fn sub(&self, other: &Kernel) -> Result<Kernel> {
        self.add(&other.scale(-1.0))
    }

    /// Dense copy; only for `n <= 3` and `m^n` within limits.
    /// `||self - other||`. On grids small enough to enumerate, the squared
    /// difference is summed pointwise; Gram-based norms of separable
    /// differences lose about half the digits to cancellation.
    pub fn distance(&self, other: &Kernel) -> Result<f64> {
        let diff = self.sub(other)?;
        if !matches!(diff.repr, KernelRepr::SeparableSum(_)) || check_full_size(self.grid.len(), self.order).is_err() {
            return Ok(diff.norm());
        }
        let measure = self.grid.measures();
        let sq: f64 = sorted_indices(self.grid.len(), self.order)
            .map(|idx| orbit_weight(&idx, measure) * (self.value(&idx) - other.value(&idx)).powi(2))
            .sum();
        Ok(sq.sqrt())
    }

    pub fn to_dense(&self) -> Result<Kernel> {
        match &self.repr {
            KernelRepr::DenseSym(_) => Ok(self.clone()),
            KernelRepr::SeparableSum(_) => {
                Kernel::dense_from_fn(&self.grid, self.order, |idx| self.value(idx))
            }
        }
    }

    /// Separable terms of this kernel. Dense kernels expand into one product
    /// of cell indicators per stored orbit representative.
    pub fn separable_terms(&self) -> Result<Vec<SeparableTerm>> {
        match &self.repr {
            KernelRepr::SeparableSum(t) => Ok(t.clone()),
            KernelRepr::DenseSym(v) => {
                if self.order == 0 {
                    return Ok(vec![SeparableTerm::new(v[0], Vec::new())]);
                }
                let indicators: Vec<GridFn> = (0..self.grid.len())
                    .map(|c| cell_indicator(&self.grid, c))
                    .collect();
                let fact = factorial(self.order);
                Ok(sorted_indices(self.grid.len(), self.order)
                    .zip(v)
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(idx, &x)| {
                        // Sym(e_i1 (x) ... (x) e_in) equals prod(r!)/n! on the orbit.
                        let coeff = x * fact / multiplicity_factorials(&idx);
                        SeparableTerm::new(coeff, idx.iter().map(|&c| indicators[c].clone()).collect())
                    })
                    .collect())
            }
        }
    }

    pub fn to_separable(&self) -> Result<Kernel> {
        Ok(Kernel {
            order: self.order,
            grid: self.grid.clone(),
            repr: KernelRepr::SeparableSum(self.separable_terms()?),
        })
    }

    /// `(c, g)` when the kernel is a single rank-one product `c * g^{(x) n}`.
    pub fn as_rank_one(&self) -> Option<(f64, &GridFn)> {
        match &self.repr {
            KernelRepr::SeparableSum(t) if t.len() == 1 && t[0].rank_one && self.order > 0 => {
                Some((t[0].coeff, &t[0].factors[0]))
            }
            _ => None,
        }
    }

    /// Multiply every argument slot by `w`, i.e. `f(t_1..t_n) * prod w(t_i)`.
    pub fn restrict(&self, w: &GridFn) -> Result<Kernel> {
        ensure_same(&self.grid, w.grid())?;
        let repr = match &self.repr {
            KernelRepr::DenseSym(v) => KernelRepr::DenseSym(
                sorted_indices(self.grid.len(), self.order)
                    .zip(v)
                    .map(|(idx, x)| x * idx.iter().map(|&c| w.value(c)).product::<f64>())
                    .collect(),
            ),
            KernelRepr::SeparableSum(terms) => KernelRepr::SeparableSum(
                terms
                    .iter()
                    .map(|t| {
                        let factors = t
                            .factors
                            .iter()
                            .map(|g| g.mul(w))
                            .collect::<Result<Vec<_>>>()?;
                        let mut out = SeparableTerm::new(t.coeff, factors);
                        out.rank_one = t.rank_one;
                        Ok(out)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(Kernel {
            order: self.order,
            grid: self.grid.clone(),
            repr,
        })
    }
}

/// L2 norm of a kernel.
pub fn kernel_norm(k: &Kernel) -> f64 {
    k.norm()
}

/// Indicator of a single cell (value 1 there, 0 elsewhere).
pub fn cell_indicator(grid: &Arc<Grid>, cell: usize) -> GridFn {
    let mut v = vec![0.0; grid.len()];
    v[cell] = 1.0;
    GridFn::new(grid, v).expect("indicator has the grid's length")
}

fn check_dense_size(m: usize, order: usize) -> Result<()> {
    if order > DENSE_MAX_ORDER {
        return Err(Error::TooLarge(format!(
            "dense kernels are limited to order {DENSE_MAX_ORDER}, requested {order}"
        )));
    }
    check_full_size(m, order)
}

pub(crate) fn check_full_size(m: usize, order: usize) -> Result<()> {
    let terms = (m as f64).powi(order as i32);
    if terms > DENSE_MAX_TERMS as f64 {
        return Err(Error::TooLarge(format!(
            "{m}^{order} index tuples exceed the limit of {DENSE_MAX_TERMS}"
        )));
    }
    Ok(())
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of sorted multi-indices of length `n` over `m` cells.
pub fn multiset_count(m: usize, n: usize) -> usize {
    if n == 0 {
        1
    } else {
        binomial(m + n - 1, n)
    }
}

/// Position of a sorted multi-index in canonical order.
pub fn multiset_rank(sorted: &[usize]) -> usize {
    sorted
        .iter()
        .enumerate()
        .map(|(k, &i)| binomial(i + k, k + 1))
        .sum()
}

/// Sorted multi-indices `i_1 <= ... <= i_n` over `m` cells in canonical
/// (colexicographic) order, matching [`multiset_rank`].
pub fn sorted_indices(m: usize, n: usize) -> SortedIndices {
    SortedIndices {
        m,
        cur: if m == 0 && n > 0 { None } else { Some(vec![0; n]) },
    }
}

pub struct SortedIndices {
    m: usize,
    cur: Option<Vec<usize>>,
}

impl Iterator for SortedIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let cur = self.cur.as_mut().unwrap();
        let n = cur.len();
        let mut k = 0;
        loop {
            if k == n {
                self.cur = None;
                break;
            }
            let cap = if k + 1 < n { cur[k + 1] } else { self.m - 1 };
            if cur[k] < cap {
                cur[k] += 1;
                for c in cur.iter_mut().take(k) {
                    *c = 0;
                }
                break;
            }
            k += 1;
        }
        Some(out)
    }
}

/// `prod_k r_k!` over the multiplicities of a sorted multi-index.
pub(crate) fn multiplicity_factorials(sorted: &[usize]) -> f64 {
    let mut out = 1.0;
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            out *= run as f64;
        } else {
            run = 1;
        }
    }
    out
}

/// Number of ordered tuples in the orbit of a sorted multi-index.
pub(crate) fn orbit_size(sorted: &[usize]) -> f64 {
    factorial(sorted.len()) / multiplicity_factorials(sorted)
}

/// Orbit size times the product of cell measures.
fn orbit_weight(sorted: &[usize], measure: &[f64]) -> f64 {
    orbit_size(sorted) * sorted.iter().map(|&c| measure[c]).product::<f64>()
}

/// Permanent of an `n x n` row-major matrix (Ryser with Gray-code updates).
pub(crate) fn permanent(a: &[f64], n: usize) -> f64 {
    match n {
        0 => return 1.0,
        1 => return a[0],
        2 => return a[0] * a[3] + a[1] * a[2],
        _ => {}
    }
    let mut row_sums = vec![0.0; n];
    let mut total = 0.0;
    let mut gray: u64 = 0;
    for k in 1..(1u64 << n) {
        let next = k ^ (k >> 1);
        let flipped = (gray ^ next).trailing_zeros() as usize;
        let sign = if next & (1 << flipped) != 0 { 1.0 } else { -1.0 };
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s += sign * a[i * n + flipped];
        }
        gray = next;
        let prod: f64 = row_sums.iter().product();
        if next.count_ones() % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

fn separable_inner(a: &[SeparableTerm], b: &[SeparableTerm], n: usize) -> f64 {
    let fact = factorial(n);
    let mut total = 0.0;
    for s in a {
        for t in b {
            if s.coeff == 0.0 || t.coeff == 0.0 {
                continue;
            }
            let v = if s.rank_one && t.rank_one {
                s.factors[0].inner_unchecked(&t.factors[0]).powi(n as i32)
            } else {
                let gram: Vec<f64> = s
                    .factors
                    .iter()
                    .flat_map(|g| t.factors.iter().map(move |h| g.inner_unchecked(h)))
                    .collect();
                permanent(&gram, n) / fact
            };
            total += s.coeff * t.coeff * v;
        }
    }
    total
}

fn dense_separable_inner(dense: &Kernel, terms: &[SeparableTerm]) -> f64 {
    let KernelRepr::DenseSym(v) = &dense.repr else {
        unreachable!()
    };
    let sep = Kernel {
        order: dense.order,
        grid: dense.grid.clone(),
        repr: KernelRepr::SeparableSum(terms.to_vec()),
    };
    let m = dense.grid.measures();
    sorted_indices(dense.grid.len(), dense.order)
        .zip(v)
        .filter(|(_, &x)| x != 0.0)
        .map(|(idx, x)| x * sep.value(&idx) * orbit_weight(&idx, m))
        .sum()
}

/// Kernels of order `n` indexed by one extra grid argument, one per cell.
#[derive(Debug, Clone)]
pub struct CellIndexed {
    grid: Arc<Grid>,
    order: usize,
    kernels: Vec<Kernel>,
}

impl CellIndexed {
    pub fn new(grid: &Arc<Grid>, kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: kernels.len(),
            });
        }
        let order = kernels[0].order();
        for k in &kernels {
            ensure_same(grid, k.grid())?;
            if k.order() != order {
                return Err(Error::OrderMismatch {
                    expected: order,
                    found: k.order(),
                });
            }
        }
        Ok(CellIndexed {
            grid: grid.clone(),
            order,
            kernels,
        })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(usize) -> Result<Kernel>) -> Result<Self> {
        let kernels = (0..grid.len()).map(f).collect::<Result<Vec<_>>>()?;
        CellIndexed::new(grid, kernels)
    }

    /// Kernels given at sites of a site set, read piecewise-constantly: each
    /// cell takes the kernel of the site nearest to its midpoint (first
    /// `sites.dim()` coordinates).
    pub fn from_sites(
        grid: &Arc<Grid>,
        sites: &crate::grid::SiteSet,
        kernels: &[Kernel],
    ) -> Result<Self> {
        if kernels.len() != sites.len() {
            return Err(Error::Dimension {
                expected: sites.len(),
                found: kernels.len(),
            });
        }
        CellIndexed::from_fn(grid, |c| {
            let mid = grid.midpoint(c);
            let d = sites.dim().min(mid.len());
            Ok(kernels[sites.nearest(&mid[..d])].clone())
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kernel(&self, cell: usize) -> &Kernel {
        &self.kernels[cell]
    }
}

/// Symmetrization of a cell-indexed kernel `t -> f_n^t` into the order-`n+1`
/// kernel
///
/// ```text
/// f~(t_1..t_n, t) = 1/(n+1) * ( f^t(t_1..t_n) + sum_i f^{t_i}(.., t in slot i, ..) )
/// ```
///
/// Dense when the result has order <= 3; otherwise separable, with the
/// extra argument carried by cell indicators.
pub fn symmetrize(indexed: &CellIndexed) -> Result<Kernel> {
    let n = indexed.order;
    let grid = &indexed.grid;
    let out_order = n + 1;
    if out_order <= DENSE_MAX_ORDER && check_full_size(grid.len(), out_order).is_ok() {
        let mut rest = vec![0; n];
        return Kernel::dense_from_fn(grid, out_order, |idx| {
            let mut acc = 0.0;
            for slot in 0..out_order {
                let mut k = 0;
                for (j, &c) in idx.iter().enumerate() {
                    if j != slot {
                        rest[k] = c;
                        k += 1;
                    }
                }
                acc += indexed.kernels[idx[slot]].value(&rest);
            }
            acc / out_order as f64
        });
    }
    let mut terms = Vec::new();
    for (c, k) in indexed.kernels.iter().enumerate() {
        if k.is_zero() {
            continue;
        }
        let e = cell_indicator(grid, c);
        for t in k.separable_terms()? {
            let mut factors = t.factors.clone();
            factors.push(e.clone());
            terms.push(SeparableTerm::new(t.coeff, factors));
        }
    }
    Kernel::separable(grid, out_order, terms)
}
