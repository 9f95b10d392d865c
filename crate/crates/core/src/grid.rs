//! Discretization of the parameter space `[0, T_max] x E` into axis-aligned
//! boxes carrying the product measure, and square-integrable grid functions.
//!
//! Cells are numbered time-major: the time index is the slowest-moving
//! coordinate, followed by the space axes in row-major order.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of space dimensions supported by [`Grid`].
pub const MAX_SPACE_DIMS: usize = 2;

/// One coordinate axis `[lower, upper]` split into `cells` equal pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, cells: usize) -> Self {
        Axis { lower, upper, cells }
    }

    pub fn unit(cells: usize) -> Self {
        Axis::new(0.0, 1.0, cells)
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn width(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        let lo = self.lower + w * i as f64;
        let hi = if i + 1 == self.cells {
            self.upper
        } else {
            self.lower + w * (i + 1) as f64
        };
        (lo, hi)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.cells == 0 {
            return Err(Error::config(format!("{name} axis needs at least one cell")));
        }
        if !(self.lower.is_finite() && self.upper.is_finite()) || self.upper <= self.lower {
            return Err(Error::config(format!(
                "{name} axis bounds [{}, {}] are not an increasing finite interval",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Weight rule for the reference measure. The weight multiplies the
/// Lebesgue volume of each cell, so a piecewise-constant density is
/// expressed cell by cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Uniform { scale: f64 },
    PerCell { weights: Vec<f64> },
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec::Uniform { scale: 1.0 }
    }
}

/// Box partition of the truncated parameter space with per-cell measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    time: Axis,
    space: Vec<Axis>,
    weights: Vec<f64>,
    measure: Vec<f64>,
}

impl Grid {
    pub fn build(time: Axis, space: Vec<Axis>, spec: &MeasureSpec) -> Result<Arc<Grid>> {
        time.validate("time")?;
        if space.len() > MAX_SPACE_DIMS {
            return Err(Error::config(format!(
                "at most {MAX_SPACE_DIMS} space dimensions are supported, got {}",
                space.len()
            )));
        }
        for ax in &space {
            ax.validate("space")?;
        }
        let count = time.cells * space.iter().map(|a| a.cells).product::<usize>();
        let weights = match spec {
            MeasureSpec::Uniform { scale } => vec![*scale; count],
            MeasureSpec::PerCell { weights } => {
                if weights.len() != count {
                    return Err(Error::config(format!(
                        "per-cell weights: expected {count} values, got {}",
                        weights.len()
                    )));
                }
                weights.clone()
            }
        };
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::config(format!("measure weights must be positive, got {w}")));
        }
        let mut grid = Grid {
            time,
            space,
            weights,
            measure: Vec::new(),
        };
        grid.measure = (0..count).map(|i| grid.volume(i) * grid.weights[i]).collect();
        Ok(Arc::new(grid))
    }

    /// Uniform Lebesgue grid on `[0, 1]` with `cells` time cells and no space.
    pub fn unit_interval(cells: usize) -> Result<Arc<Grid>> {
        Grid::build(Axis::unit(cells), Vec::new(), &MeasureSpec::default())
    }

    pub fn time_axis(&self) -> &Axis {
        &self.time
    }

    pub fn space_axes(&self) -> &[Axis] {
        &self.space
    }

    /// Number of coordinates of a point of the parameter space.
    pub fn dim(&self) -> usize {
        1 + self.space.len()
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn measure(&self, cell: usize) -> f64 {
        self.measure[cell]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    fn axes(&self) -> impl Iterator<Item = &Axis> {
        std::iter::once(&self.time).chain(self.space.iter())
    }

    /// Per-axis cell indices of a flat cell index.
    pub fn axis_indices(&self, cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        let mut rest = cell;
        for (k, ax) in self.axes().enumerate().collect::<Vec<_>>().into_iter().rev() {
            out[k] = rest % ax.cells;
            rest /= ax.cells;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        self.axes()
            .zip(idx)
            .fold(0, |acc, (ax, &i)| acc * ax.cells + i)
    }

    pub fn cell_box(&self, cell: usize) -> Vec<(f64, f64)> {
        self.axes()
            .zip(self.axis_indices(cell))
            .map(|(ax, i)| ax.cell_bounds(i))
            .collect()
    }

    pub fn midpoint(&self, cell: usize) -> Vec<f64> {
        self.cell_box(cell)
            .into_iter()
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    fn volume(&self, cell: usize) -> f64 {
        self.cell_box(cell).iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Cell containing `point`; points on the upper boundary belong to the last cell.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim() {
            return None;
        }
        let mut idx = Vec::with_capacity(self.dim());
        for (ax, &x) in self.axes().zip(point) {
            if !(ax.lower..=ax.upper).contains(&x) {
                return None;
            }
            let i = ((x - ax.lower) / ax.width()).floor() as usize;
            idx.push(i.min(ax.cells - 1));
        }
        Some(self.flat_index(&idx))
    }

    /// Fraction of the cell lying inside the box `prod_k [lower_k, upper_k]`.
    pub fn overlap_fraction(&self, cell: usize, lower: &[f64], upper: &[f64]) -> f64 {
        self.cell_box(cell)
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(&(lo, hi), (&a, &b))| {
                let len = (hi.min(b) - lo.max(a)).max(0.0);
                len / (hi - lo)
            })
            .product()
    }

    /// Split every time cell into `time_factor` and every space cell into
    /// `space_factor` pieces. Weights are inherited by the children.
    pub fn refine(&self, time_factor: usize, space_factor: usize) -> Result<Arc<Grid>> {
        if time_factor == 0 || space_factor == 0 {
            return Err(Error::config("refinement factors must be positive"));
        }
        let time = Axis::new(self.time.lower, self.time.upper, self.time.cells * time_factor);
        let space: Vec<Axis> = self
            .space
            .iter()
            .map(|a| Axis::new(a.lower, a.upper, a.cells * space_factor))
            .collect();
        let fine = Grid {
            time,
            space,
            weights: Vec::new(),
            measure: Vec::new(),
        };
        let weights: Vec<f64> = (0..fine.count())
            .map(|c| self.weights[self.parent_of(&fine, c, time_factor, space_factor)])
            .collect();
        Grid::build(fine.time, fine.space, &MeasureSpec::PerCell { weights })
    }

    fn count(&self) -> usize {
        self.axes().map(|a| a.cells).product()
    }

    fn parent_of(&self, fine: &Grid, cell: usize, tf: usize, sf: usize) -> usize {
        let mut idx = fine.axis_indices(cell);
        idx[0] /= tf;
        for i in idx.iter_mut().skip(1) {
            *i /= sf;
        }
        self.flat_index(&idx)
    }

    /// Parent cell on `self` of every cell of `fine`, when `fine` is a refinement.
    pub fn parent_map(&self, fine: &Grid) -> Result<Vec<usize>> {
        if fine.space.len() != self.space.len()
            || fine.time.lower != self.time.lower
            || fine.time.upper != self.time.upper
            || !fine.time.cells.is_multiple_of(self.time.cells)
        {
            return Err(Error::GridMismatch);
        }
        let tf = fine.time.cells / self.time.cells;
        let mut sf = None;
        for (f, c) in fine.space.iter().zip(&self.space) {
            if f.lower != c.lower || f.upper != c.upper || f.cells % c.cells != 0 {
                return Err(Error::GridMismatch);
            }
            let r = f.cells / c.cells;
            if *sf.get_or_insert(r) != r {
                return Err(Error::GridMismatch);
            }
        }
        let sf = sf.unwrap_or(1);
        Ok((0..fine.len()).map(|c| self.parent_of(fine, c, tf, sf)).collect())
    }
}

/// True when both handles describe the same partition and measure.
pub fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Piecewise-constant function on a [`Grid`]: one value per cell.
#[derive(Clone, PartialEq)]
pub struct GridFn {
    grid: Arc<Grid>,
    values: Arc<[f64]>,
}

impl fmt::Debug for GridFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFn")
            .field("cells", &self.values.len())
            .field("values", &&self.values[..self.values.len().min(8)])
            .finish()
    }
}

impl GridFn {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function values".into()));
        }
        Ok(GridFn {
            grid: grid.clone(),
            values: values.into(),
        })
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        GridFn {
            grid: grid.clone(),
            values: vec![c; grid.len()].into(),
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridFn::constant(grid, 0.0)
    }

    /// Samples `f` at cell midpoints.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|c| f(&grid.midpoint(c))).collect();
        GridFn::new(grid, values)
    }

    /// L2 projection of the indicator of the box `prod [lower_k, upper_k]`:
    /// each cell carries the fraction of its volume inside the box.
    pub fn indicator_box(grid: &Arc<Grid>, lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != grid.dim() || upper.len() != grid.dim() {
            return Err(Error::Dimension {
                expected: grid.dim(),
                found: lower.len().max(upper.len()),
            });
        }
        let values = (0..grid.len())
            .map(|c| grid.overlap_fraction(c, lower, upper))
            .collect();
        GridFn::new(grid, values)
    }

    /// Indicator of the time interval `[a, b]` (all of space).
    pub fn indicator_time(grid: &Arc<Grid>, a: f64, b: f64) -> Result<Self> {
        let mut lower = vec![f64::NEG_INFINITY; grid.dim()];
        let mut upper = vec![f64::INFINITY; grid.dim()];
        lower[0] = a;
        upper[0] = b;
        GridFn::indicator_box(grid, &lower, &upper)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn ptr_id(&self) -> usize {
        self.values.as_ptr() as *const u8 as usize
    }

    pub fn inner(&self, other: &GridFn) -> Result<f64> {
        ensure_same(&self.grid, &other.grid)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &GridFn) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .zip(self.grid.measures())
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner_unchecked(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `L^p` norm for `p >= 1`; `p = inf` gives the sup norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.measures())
            .map(|(v, m)| v.abs().powf(p) * m)
            .sum();
        s.powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> GridFn {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFn, f: impl Fn(f64, f64) -> f64) -> Result<GridFn> {
        ensure_same(&self.grid, &other.grid)?;
        Ok(GridFn {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &GridFn) -> Result<GridFn> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFn) -> Result<GridFn> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFn) -> Result<GridFn> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Same function expressed on a refinement of its grid.
    pub fn prolong(&self, fine: &Arc<Grid>) -> Result<GridFn> {
        let parents = self.grid.parent_map(fine)?;
        GridFn::new(fine, parents.iter().map(|&p| self.values[p]).collect())
    }
}

/// `sum_cells a * b * cell_measure`.
pub fn l2_inner(a: &GridFn, b: &GridFn) -> Result<f64> {
    a.inner(b)
}

pub fn l2_norm(a: &GridFn) -> f64 {
    a.norm()
}

/// Finite set of distinct points of `K = [0, 1]^d`, `d` in {1, 2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SiteSet {
    dim: usize,
    sites: Vec<Vec<f64>>,
}

impl SiteSet {
    pub fn new(sites: Vec<Vec<f64>>) -> Result<Self> {
        let dim = sites
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::config("site set is empty"))?;
        if !(1..=2).contains(&dim) {
            return Err(Error::config(format!("site dimension must be 1 or 2, got {dim}")));
        }
        for s in &sites {
            if s.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: s.len(),
                });
            }
            if s.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::config(format!("site {s:?} lies outside [0, 1]^{dim}")));
            }
        }
        for (i, a) in sites.iter().enumerate() {
            if sites[..i].contains(a) {
                return Err(Error::config(format!("duplicate site {a:?}")));
            }
        }
        Ok(SiteSet { dim, sites })
    }

    /// A single site, for processes that are just random variables.
    pub fn single() -> Self {
        SiteSet {
            dim: 1,
            sites: vec![vec![1.0]],
        }
    }

    /// `n` equispaced one-dimensional sites `1/n, 2/n, ..., 1`.
    pub fn uniform_1d(n: usize) -> Result<Self> {
        SiteSet::new((1..=n).map(|k| vec![k as f64 / n as f64]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.sites[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.sites.iter().map(Vec::as_slice)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.sites[i]
            .iter()
            .zip(&self.sites[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Index of the site closest to `point`; ties go to the lower index.
    pub fn nearest(&self, point: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, s) in self.sites.iter().enumerate() {
            let d: f64 = s.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for SiteSet {
    type Error = Error;

    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        SiteSet::new(v)
    }
}

impl From<SiteSet> for Vec<Vec<f64>> {
    fn from(s: SiteSet) -> Self {
        s.sites
    }
}
