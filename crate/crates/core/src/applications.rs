//! Built-in kernel families: divergence (Skorohod) integrals, linear
//! Skorohod equations, Wick-Ito integrals against a basis pair, adapted
//! martingale kernels and the exponential functional.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::family::{KernelFamily, ProductForm};
use crate::grid::{Axis, Grid, GridFn, SiteSet};
use crate::kernel::{
    check_full_size, factorial, symmetrize, CellIndexed, Kernel, SeparableTerm, DENSE_MAX_ORDER,
};

/// Tolerance on the Gram matrix of a basis.
pub const BASIS_GRAM_TOL: f64 = 1e-8;

fn axes(grid: &Grid) -> Vec<Axis> {
    std::iter::once(*grid.time_axis())
        .chain(grid.space_axes().iter().cloned())
        .collect()
}

/// Map a site in `[0, 1]^d` onto the first `d` grid axes.
fn site_point(grid: &Grid, site: &[f64]) -> Vec<f64> {
    axes(grid)
        .iter()
        .zip(site)
        .map(|(ax, &z)| ax.lower + z * ax.length())
        .collect()
}

fn site_cell(grid: &Grid, site: &[f64]) -> Result<usize> {
    if site.len() != grid.dim() {
        return Err(Error::Dimension {
            expected: grid.dim(),
            found: site.len(),
        });
    }
    grid.locate(&site_point(grid, site))
        .ok_or_else(|| Error::config("site lies outside the grid"))
}

/// `f_0 = 1`, `f_n = h^{(x) n} / n!`: the chaos kernels of
/// `exp(W(h) - ||h||^2 / 2)`.
pub fn exponential_functional_kernels(h: &GridFn, n_max: usize) -> Result<KernelFamily> {
    if h.norm() <= 0.0 {
        return Err(Error::config("exponential functional needs a nonzero h"));
    }
    let grid = h.grid();
    let mut kernels = vec![Kernel::scalar(grid, 1.0)?];
    for n in 1..=n_max {
        kernels.push(Kernel::rank_one(h, n, 1.0 / factorial(n))?);
    }
    KernelFamily::single_site(grid, kernels)
}

/// `f_n^z = f_n * 1_{[0,z]}^{(x) n}`, the kernels of the martingale
/// `E[F | F_z]` for `F` with kernels `f_n`. Sites are read in `[0, 1]^d` and
/// mapped onto the first `d` grid axes.
pub fn adapted_kernels(base: &[Kernel], sites: &SiteSet) -> Result<KernelFamily> {
    let grid = base
        .first()
        .ok_or_else(|| Error::config("adapted kernels need at least the order-0 term"))?
        .grid()
        .clone();
    if sites.dim() > grid.dim() {
        return Err(Error::Dimension {
            expected: grid.dim(),
            found: sites.dim(),
        });
    }
    let mut kernels = Vec::with_capacity(sites.len());
    let mut boxes = Vec::with_capacity(sites.len());
    for z in sites.iter() {
        let lower = vec![f64::NEG_INFINITY; grid.dim()];
        let mut upper = vec![f64::INFINITY; grid.dim()];
        upper[..z.len()].copy_from_slice(&site_point(&grid, z));
        let w = GridFn::indicator_box(&grid, &lower, &upper)?;
        kernels.push(base.iter().map(|k| k.restrict(&w)).collect::<Result<Vec<_>>>()?);
        boxes.push((lower, upper));
    }
    KernelFamily::new(&grid, sites.clone(), kernels)?.with_product_form(ProductForm {
        base: base.to_vec(),
        boxes,
    })
}

/// Coefficient `a^t(s)` of the linear Skorohod equation
/// `X_t = x_0^t + int a^t(s) X_s dW_s` on a time grid.
#[derive(Debug, Clone)]
pub enum SkorohodCoefficient {
    Constant(f64),
    /// `a^t(s) = alpha(t) * beta(s)`.
    Separable { alpha: GridFn, beta: GridFn },
    /// `a^t` for every cell `t`.
    General(Vec<GridFn>),
}

impl SkorohodCoefficient {
    /// General coefficient sampled at cell midpoints, `f(t, s)`.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let rows = (0..grid.len())
            .map(|t| {
                let tm = grid.midpoint(t)[0];
                GridFn::from_fn(grid, |s| f(tm, s[0]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SkorohodCoefficient::General(rows))
    }

    pub fn value(&self, t: usize, s: usize) -> f64 {
        match self {
            SkorohodCoefficient::Constant(a) => *a,
            SkorohodCoefficient::Separable { alpha, beta } => alpha.value(t) * beta.value(s),
            SkorohodCoefficient::General(rows) => rows[t].value(s),
        }
    }

    fn check(&self, grid: &Arc<Grid>) -> Result<()> {
        match self {
            SkorohodCoefficient::Constant(a) if !a.is_finite() => Err(Error::NonFinite("Skorohod coefficient".into())),
            SkorohodCoefficient::Constant(_) => Ok(()),
            SkorohodCoefficient::Separable { alpha, beta } => {
                crate::grid::ensure_same(grid, alpha.grid())?;
                crate::grid::ensure_same(grid, beta.grid())
            }
            SkorohodCoefficient::General(rows) => {
                if rows.len() != grid.len() {
                    return Err(Error::Dimension {
                        expected: grid.len(),
                        found: rows.len(),
                    });
                }
                rows.iter().try_for_each(|r| crate::grid::ensure_same(grid, r.grid()))
            }
        }
    }
}

/// Unsymmetrized kernel `a^t(t_n) a^{t_n}(t_{n-1}) ... a^{t_2}(t_1) x_0^{t_1}`
/// at cells `(t_1, ..., t_n)`.
pub fn skorohod_chain(a: &SkorohodCoefficient, x0: &GridFn, t: usize, cells: &[usize]) -> f64 {
    match cells.split_last() {
        None => x0.value(t),
        Some((&last, rest)) => a.value(t, last) * skorohod_chain(a, x0, last, rest),
    }
}

/// Symmetrized chaos kernels of the linear Skorohod equation at each site.
/// A general coefficient is stored densely and limited to order 3; constant
/// and separable coefficients give one separable term per order.
pub fn skorohod_equation_kernels(
    a: &SkorohodCoefficient,
    x0: &GridFn,
    sites: &SiteSet,
    n_max: usize,
) -> Result<KernelFamily> {
    let grid = x0.grid();
    if grid.dim() != 1 || sites.dim() != 1 {
        return Err(Error::config("the Skorohod equation is posed on a time-only grid with time sites"));
    }
    a.check(grid)?;
    let site_cells = sites
        .iter()
        .map(|z| site_cell(grid, z))
        .collect::<Result<Vec<_>>>()?;
    let separable = match a {
        SkorohodCoefficient::Constant(c) => Some((GridFn::constant(grid, *c), GridFn::constant(grid, 1.0))),
        SkorohodCoefficient::Separable { alpha, beta } => Some((alpha.clone(), beta.clone())),
        SkorohodCoefficient::General(_) => None,
    };
    let kernels = match separable {
        Some((alpha, beta)) => {
            let gamma = alpha.mul(&beta)?;
            let first = beta.mul(x0)?;
            // first = lambda * gamma lets every order collapse to rank one
            let lambda = proportionality(&first, &gamma);
            site_cells
                .iter()
                .map(|&t| {
                    let mut ks = vec![Kernel::scalar(grid, x0.value(t))?];
                    for n in 1..=n_max {
                        let c = alpha.value(t);
                        ks.push(match lambda {
                            Some(l) => Kernel::rank_one(&gamma, n, c * l)?,
                            None => {
                                let mut factors = vec![first.clone()];
                                factors.extend(std::iter::repeat_n(gamma.clone(), n - 1));
                                Kernel::separable(grid, n, vec![SeparableTerm::new(c, factors)])?
                            }
                        });
                    }
                    Ok(ks)
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            if n_max > DENSE_MAX_ORDER {
                return Err(Error::TooLarge(format!(
                    "a general Skorohod coefficient is limited to order {DENSE_MAX_ORDER}, requested {n_max}"
                )));
            }
            site_cells
                .iter()
                .map(|&t| {
                    let mut ks = vec![Kernel::scalar(grid, x0.value(t))?];
                    for n in 1..=n_max {
                        let mut perm = vec![0; n];
                        ks.push(Kernel::dense_from_fn(grid, n, |idx| {
                            let mut acc = 0.0;
                            for_each_permutation(idx, &mut perm, |p| acc += skorohod_chain(a, x0, t, p));
                            acc / factorial(n)
                        })?);
                    }
                    Ok(ks)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    KernelFamily::new(grid, sites.clone(), kernels)
}

/// `Some(l)` when `a = l * b` up to rounding.
fn proportionality(a: &GridFn, b: &GridFn) -> Option<f64> {
    let bb = b.norm_sq();
    if bb == 0.0 {
        return (a.norm_sq() == 0.0).then_some(0.0);
    }
    let l = a.inner(b).ok()? / bb;
    let scale = a.sup_norm().max(b.sup_norm() * l.abs());
    a.values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| (x - l * y).abs() <= 1e-14 * scale)
        .then_some(l)
}

/// Calls `f` on all `n!` orderings of `idx` (repeats included).
fn for_each_permutation(idx: &[usize], buf: &mut [usize], mut f: impl FnMut(&[usize])) {
    let n = idx.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Heap's algorithm
    let mut c = vec![0; n];
    let emit = |order: &[usize], buf: &mut [usize], f: &mut dyn FnMut(&[usize])| {
        for (b, &o) in buf.iter_mut().zip(order) {
            *b = idx[o];
        }
        f(buf);
    };
    emit(&order, buf, &mut f);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            emit(&order, buf, &mut f);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Kernels of the iterated divergence `delta^k(Y)`. The integrand's sites
/// index its `k` extra arguments: with `k = 1` a site is a point of the grid
/// (cells take the nearest site); with `k = 2` a 2-d site `(s_1, s_2)` is a
/// pair of times on a time-only grid. Output order `n + k` is the `k`-fold
/// symmetrization of the order-`n` integrand kernels; orders below `k` vanish.
pub fn divergence_kernels(y: &KernelFamily, k: usize) -> Result<KernelFamily> {
    let grid = y.grid();
    if k == 0 {
        return Err(Error::config("divergence needs k >= 1"));
    }
    if k > y.sites().dim() || (k == 2 && grid.dim() != 1) {
        return Err(Error::config(format!(
            "k = {k} needs {k}-dimensional integrand sites{}",
            if k == 2 { " on a time-only grid" } else { "" }
        )));
    }
    let n_max = y.n_max();
    let mut out = vec![Kernel::zero(grid, 0)];
    for j in 1..k {
        out.push(Kernel::zero(grid, j));
    }
    for n in 0..=n_max {
        let per_site: Vec<Kernel> = (0..y.site_count()).map(|z| y.kernel(z, n).clone()).collect();
        let kernel = if k == 1 {
            symmetrize(&CellIndexed::from_sites(grid, y.sites(), &per_site)?)?
        } else {
            check_full_size(grid.len(), 2)?;
            let m = grid.len();
            // inner symmetrization over s_2 for every s_1, then over s_1
            let inner = (0..m)
                .map(|s1| {
                    let t1 = grid.midpoint(s1)[0];
                    symmetrize(&CellIndexed::from_fn(grid, |s2| {
                        let t2 = grid.midpoint(s2)[0];
                        Ok(per_site[y.sites().nearest(&[t1, t2])].clone())
                    })?)
                })
                .collect::<Result<Vec<_>>>()?;
            symmetrize(&CellIndexed::new(grid, inner)?)?
        };
        out.push(kernel);
    }
    KernelFamily::single_site(grid, out)
}

/// Orthonormal functions `xi_k` on the grid with their images `M xi_k`.
#[derive(Debug, Clone)]
pub struct BasisPair {
    xi: Vec<GridFn>,
    images: Vec<GridFn>,
}

impl BasisPair {
    pub fn new(xi: Vec<GridFn>, images: Vec<GridFn>) -> Result<Self> {
        if xi.is_empty() {
            return Err(Error::config("basis is empty"));
        }
        if xi.len() != images.len() {
            return Err(Error::Dimension {
                expected: xi.len(),
                found: images.len(),
            });
        }
        for i in 0..xi.len() {
            crate::grid::ensure_same(xi[0].grid(), xi[i].grid())?;
            crate::grid::ensure_same(xi[0].grid(), images[i].grid())?;
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                let g = xi[i].inner(&xi[j])?;
                if (g - target).abs() > BASIS_GRAM_TOL {
                    return Err(Error::config(format!(
                        "basis is not orthonormal: <xi_{i}, xi_{j}> = {g}"
                    )));
                }
            }
        }
        Ok(BasisPair { xi, images })
    }

    /// Normalized cell indicators with identity images.
    pub fn cell_indicators(grid: &Arc<Grid>) -> Result<Self> {
        let xi = (0..grid.len())
            .map(|c| {
                let mut v = vec![0.0; grid.len()];
                v[c] = 1.0 / grid.measure(c).sqrt();
                GridFn::new(grid, v)
            })
            .collect::<Result<Vec<_>>>()?;
        BasisPair::new(xi.clone(), xi)
    }

    /// First `count` Hermite functions of the rescaled time coordinate
    /// (the time axis mapped onto `[-3, 3]`), Gram-Schmidt orthonormalized on
    /// the grid, with identity images.
    pub fn hermite(grid: &Arc<Grid>, count: usize) -> Result<Self> {
        let ax = grid.time_axis();
        let mid = 0.5 * (ax.lower + ax.upper);
        let scale = 6.0 / ax.length();
        let raw = (0..count)
            .map(|k| GridFn::from_fn(grid, |p| hermite_function(k, (p[0] - mid) * scale)))
            .collect::<Result<Vec<_>>>()?;
        let xi = gram_schmidt(raw)?;
        BasisPair::new(xi.clone(), xi)
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn xi(&self) -> &[GridFn] {
        &self.xi
    }

    pub fn images(&self) -> &[GridFn] {
        &self.images
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.xi[0].grid()
    }

    /// The first `k` pairs.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("basis is empty"));
        }
        Ok(BasisPair {
            xi: self.xi[..k.min(self.xi.len())].to_vec(),
            images: self.images[..k.min(self.images.len())].to_vec(),
        })
    }

    /// `phi_s(t) = sum_k M xi_k(s) xi_k(t)` for every cell `s`.
    fn phi(&self, s: usize) -> Vec<f64> {
        let m = self.grid().len();
        let mut out = vec![0.0; m];
        for (xi, img) in self.xi.iter().zip(&self.images) {
            let w = img.value(s);
            if w != 0.0 {
                for (o, v) in out.iter_mut().zip(xi.values()) {
                    *o += w * v;
                }
            }
        }
        out
    }
}

/// Orthonormal Hermite function `psi_k(x)`.
pub fn hermite_function(k: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for j in 0..k {
        let next = (2.0 / (j + 1) as f64).sqrt() * x * cur - (j as f64 / (j + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn gram_schmidt(raw: Vec<GridFn>) -> Result<Vec<GridFn>> {
    let mut out: Vec<GridFn> = Vec::with_capacity(raw.len());
    for f in raw {
        let mut v = f.clone();
        // two passes for stability
        for _ in 0..2 {
            for e in &out {
                let c = v.inner(e)?;
                v = v.sub(&e.scale(c))?;
            }
        }
        let n = v.norm();
        if n <= 1e-10 * f.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical("basis functions are linearly dependent on this grid".into()));
        }
        out.push(v.scale(1.0 / n));
    }
    Ok(out)
}

/// Kernels of `int f_s dW_s` in the Wick-Ito sense:
/// `g_n = Sym( sum_s mu(s) f_{n-1}^s (x) phi_s )` with
/// `phi_s = sum_k M xi_k(s) xi_k`. The integrand sites are read
/// piecewise-constantly over cells, as for [`divergence_kernels`].
pub fn wick_kernels(f: &KernelFamily, basis: &BasisPair) -> Result<KernelFamily> {
    let grid = f.grid();
    crate::grid::ensure_same(grid, basis.grid())?;
    let m = grid.len();
    let owner: Vec<usize> = (0..m)
        .map(|c| {
            let mid = grid.midpoint(c);
            let d = f.sites().dim().min(mid.len());
            f.sites().nearest(&mid[..d])
        })
        .collect();
    // psi_z = sum over cells s owned by site z of mu(s) phi_s
    let mut psi = vec![vec![0.0; m]; f.site_count()];
    for s in 0..m {
        let phi = basis.phi(s);
        let mu = grid.measure(s);
        for (p, v) in psi[owner[s]].iter_mut().zip(phi) {
            *p += mu * v;
        }
    }
    let psi = psi
        .into_iter()
        .map(|v| GridFn::new(grid, v))
        .collect::<Result<Vec<_>>>()?;

    let mut out = vec![Kernel::zero(grid, 0)];
    for n in 0..=f.n_max() {
        let order = n + 1;
        let kernel = if order <= DENSE_MAX_ORDER && check_full_size(grid.len(), order).is_ok() {
            // t -> sum_z psi_z(t) f_n^z, then the dense symmetrization
            let indexed = CellIndexed::from_fn(grid, |t| {
                let mut acc = Kernel::zero(grid, n).to_dense()?;
                for (z, p) in psi.iter().enumerate() {
                    let w = p.value(t);
                    if w != 0.0 {
                        acc = acc.add(&f.kernel(z, n).to_dense()?.scale(w))?;
                    }
                }
                Ok(acc)
            })?;
            symmetrize(&indexed)?
        } else {
            let mut terms = Vec::new();
            for (z, p) in psi.iter().enumerate() {
                if p.norm_sq() == 0.0 {
                    continue;
                }
                for t in f.kernel(z, n).separable_terms()? {
                    let mut factors = t.factors().to_vec();
                    factors.push(p.clone());
                    terms.push(SeparableTerm::new(t.coeff(), factors));
                }
            }
            Kernel::separable(grid, order, terms)?
        };
        out.push(kernel);
    }
    KernelFamily::single_site(grid, out)
}

/// `L^2` distance between two single-site families, summed over orders with
/// the chaos weights `sqrt(n!)`.
pub fn assembly_error(a: &KernelFamily, b: &KernelFamily) -> Result<f64> {
    let n = a.n_max().max(b.n_max());
    let (a, b) = (a.with_n_max(n), b.with_n_max(n));
    let mut total = 0.0;
    for z in 0..a.site_count().min(b.site_count()) {
        for k in 0..=n {
            total += factorial(k) * a.kernel(z, k).distance(b.kernel(z, k))?.powi(2);
        }
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::{check_exponential_type, series_bound};
    use crate::chaos::multiple_integral;
    use crate::noise::sample_white_noise_stream;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(m: usize) -> Arc<Grid> {
        Grid::unit_interval(m).unwrap()
    }

    #[test]
    fn exponential_functional_examples() {
        let g = unit(16);
        let h = GridFn::constant(&g, 1.0);
        let fam = exponential_functional_kernels(&h, 12).unwrap();
        for n in 1..=12 {
            assert!((fam.kernel(0, n).norm() - 1.0 / factorial(n)).abs() < 1e-12 / factorial(n));
        }
        let et = check_exponential_type(&fam);
        assert!((et.delta_fit - 1.0).abs() < 1e-9);
        assert!(series_bound(&fam, 1.0).unwrap().is_finite());
        assert!(exponential_functional_kernels(&GridFn::zeros(&g), 3).is_err());
    }

    #[test]
    fn exponential_functional_is_a_martingale() {
        let g = unit(32);
        let h = GridFn::from_fn(&g, |t| (2.0f64).sqrt() * (std::f64::consts::PI * t[0]).sin()).unwrap();
        let spec = crate::process::ChaosSpec::new(exponential_functional_kernels(&h, 12).unwrap()).unwrap();
        let n = 40_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| crate::process::assemble_xeps(&spec, &sample_white_noise_stream(&g, 99, i), 0.3).unwrap().values[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "{mean}");
    }

    #[test]
    fn adapted_examples() {
        let g = unit(16);
        let ones = Kernel::rank_one(&GridFn::constant(&g, 1.0), 2, 1.0).unwrap();
        let base = vec![Kernel::scalar(&g, 0.0).unwrap(), Kernel::zero(&g, 1), ones.clone()];
        let sites = SiteSet::new(vec![vec![0.5], vec![1.0]]).unwrap();
        let fam = adapted_kernels(&base, &sites).unwrap();
        assert!((fam.kernel(0, 2).norm() - 0.5).abs() < 1e-14);
        assert!(fam.kernel(1, 2).sub(&ones).unwrap().norm() < 1e-14);
        assert!(fam.product_form().is_some());
    }

    #[test]
    fn adapted_holder_exponent() {
        use crate::checks::{modulus_profile, ModulusNorm, ModulusSpec};
        let g = unit(64);
        let one = GridFn::constant(&g, 1.0);
        let base: Vec<Kernel> = (0..=6)
            .map(|n| {
                if n == 0 {
                    Kernel::scalar(&g, 1.0).unwrap()
                } else {
                    Kernel::rank_one(&one, n, 1.0 / factorial(n)).unwrap()
                }
            })
            .collect();
        let sites = SiteSet::uniform_1d(8).unwrap();
        let fam = adapted_kernels(&base, &sites).unwrap();
        let spec = ModulusSpec::new(20.0, 0.25, 0.1).unwrap();
        let prof = modulus_profile(&fam, 1.0, &spec, ModulusNorm::HolderSplit { q: 4.0 }).unwrap();
        let slope = prof.fitted_exponent.unwrap();
        assert!((slope - 0.25).abs() <= 0.05, "slope {slope}");
        assert!(prof.pass);
    }

    #[test]
    fn skorohod_constant_coefficient() {
        let g = unit(8);
        let x0 = GridFn::constant(&g, 1.5);
        let sites = SiteSet::new(vec![vec![0.3], vec![1.0]]).unwrap();
        let fam = skorohod_equation_kernels(&SkorohodCoefficient::Constant(0.7), &x0, &sites, 5).unwrap();
        for z in 0..2 {
            assert_eq!(fam.f0(z), 1.5);
            for n in 1..=5 {
                let k = fam.kernel(z, n);
                let idx: Vec<usize> = (0..n).map(|j| (3 * j + z) % 8).collect();
                assert!((k.value(&idx) - 0.7f64.powi(n as i32) * 1.5).abs() < 1e-14);
            }
        }
        // the general path agrees
        let general = SkorohodCoefficient::from_fn(&g, |_, _| 0.7).unwrap();
        let fam2 = skorohod_equation_kernels(&general, &x0, &sites, 3).unwrap();
        for n in 1..=3 {
            assert!(fam2.kernel(1, n).sub(fam.kernel(1, n)).unwrap().norm() < 1e-13);
        }
    }

    #[test]
    fn skorohod_indicator_example() {
        let g = unit(10);
        let a = SkorohodCoefficient::from_fn(&g, |t, s| if s <= t { 1.0 } else { 0.0 }).unwrap();
        let sites = SiteSet::new(vec![vec![1.0]]).unwrap();
        let fam = skorohod_equation_kernels(&a, &GridFn::constant(&g, 1.0), &sites, 2).unwrap();
        let c = |t: f64| g.locate(&[t]).unwrap();
        assert!((fam.kernel(0, 2).value(&[c(0.3), c(0.7)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn skorohod_separable_matches_general_and_recursion() {
        let g = unit(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rf = |rng: &mut ChaCha8Rng| GridFn::new(&g, (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let (alpha, beta, x0) = (rf(&mut rng), rf(&mut rng), rf(&mut rng));
        let sep = SkorohodCoefficient::Separable {
            alpha: alpha.clone(),
            beta: beta.clone(),
        };
        let gen = SkorohodCoefficient::General(
            (0..6).map(|t| beta.scale(alpha.value(t))).collect(),
        );
        let sites = SiteSet::new(vec![vec![0.1], vec![0.6], vec![0.95]]).unwrap();
        let a = skorohod_equation_kernels(&sep, &x0, &sites, 3).unwrap();
        let b = skorohod_equation_kernels(&gen, &x0, &sites, 3).unwrap();
        for z in 0..3 {
            for n in 0..=3 {
                let d = a.kernel(z, n).sub(b.kernel(z, n)).unwrap().norm();
                assert!(d < 1e-13, "z {z} n {n}: {d}");
            }
        }
        // recursion re-check on the unsymmetrized chain
        for _ in 0..50 {
            let t = rng.random_range(0..6);
            let cells: Vec<usize> = (0..4).map(|_| rng.random_range(0..6)).collect();
            let lhs = skorohod_chain(&gen, &x0, t, &cells);
            let rhs = gen.value(t, cells[3]) * skorohod_chain(&gen, &x0, cells[3], &cells[..3]);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn skorohod_norms_are_exponential_type() {
        let g = unit(8);
        let alpha = GridFn::from_fn(&g, |t| 1.0 + t[0]).unwrap();
        let beta = GridFn::from_fn(&g, |t| (3.0 * t[0]).cos()).unwrap();
        let x0 = GridFn::constant(&g, 1.0);
        let sites = SiteSet::uniform_1d(4).unwrap();
        let fam = skorohod_equation_kernels(&SkorohodCoefficient::Separable { alpha: alpha.clone(), beta: beta.clone() }, &x0, &sites, 8).unwrap();
        let sup = alpha.sup_norm() * beta.sup_norm();
        for z in 0..sites.len() {
            for n in 1..=8 {
                assert!(fam.kernel(z, n).norm() <= sup.powi(n as i32) * 1.0 + 1e-12);
            }
        }
        assert!(check_exponential_type(&fam).pass);
        assert!(series_bound(&fam, 1.0).unwrap().is_finite());
    }

    fn first_order_family(g: &Arc<Grid>, f: impl Fn(f64) -> Kernel) -> KernelFamily {
        let sites = SiteSet::new((0..g.len()).map(|c| vec![g.midpoint(c)[0]]).collect()).unwrap();
        let ks = (0..g.len()).map(|c| vec![Kernel::scalar(g, 0.0).unwrap(), f(g.midpoint(c)[0])]).collect();
        KernelFamily::new(g, sites, ks).unwrap()
    }

    #[test]
    fn divergence_examples() {
        let g = unit(8);
        // deterministic integrand Y_t = g(t)
        let gf = GridFn::from_fn(&g, |t| t[0] * t[0]).unwrap();
        let sites = SiteSet::new((0..8).map(|c| vec![g.midpoint(c)[0]]).collect()).unwrap();
        let y = KernelFamily::new(&g, sites.clone(), (0..8).map(|c| vec![Kernel::scalar(&g, gf.value(c)).unwrap()]).collect()).unwrap();
        let d = divergence_kernels(&y, 1).unwrap();
        assert_eq!(d.n_max(), 1);
        assert!(d.kernel(0, 0).is_zero());
        for c in 0..8 {
            assert!((d.kernel(0, 1).value(&[c]) - gf.value(c)).abs() < 1e-15);
        }
        // Y_t = I_1(f^t)
        let y1 = first_order_family(&g, |t| Kernel::dense_from_fn(&g, 1, |i| t + i[0] as f64).unwrap());
        let d1 = divergence_kernels(&y1, 1).unwrap();
        let direct = symmetrize(&CellIndexed::from_fn(&g, |c| Ok(y1.kernel(c, 1).clone())).unwrap()).unwrap();
        assert!(d1.kernel(0, 2).sub(&direct).unwrap().norm() < 1e-15);
        assert!(divergence_kernels(&y1, 0).is_err());
        assert!(divergence_kernels(&y1, 2).is_err());
    }

    #[test]
    fn divergence_twice_on_deterministic() {
        let g = unit(6);
        let gfun = |a: f64, b: f64| a * a + 3.0 * b;
        let mids: Vec<f64> = (0..6).map(|c| g.midpoint(c)[0]).collect();
        let mut sites = Vec::new();
        let mut ks = Vec::new();
        for &a in &mids {
            for &b in &mids {
                sites.push(vec![a, b]);
                ks.push(vec![Kernel::scalar(&g, gfun(a, b)).unwrap()]);
            }
        }
        let y = KernelFamily::new(&g, SiteSet::new(sites).unwrap(), ks).unwrap();
        let d = divergence_kernels(&y, 2).unwrap();
        assert_eq!(d.n_max(), 2);
        for i in 0..6 {
            for j in 0..6 {
                let expect = 0.5 * (gfun(mids[i], mids[j]) + gfun(mids[j], mids[i]));
                assert!((d.kernel(0, 2).value(&[i, j]) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn basis_validation() {
        let g = unit(8);
        assert!(BasisPair::cell_indicators(&g).is_ok());
        let h = BasisPair::hermite(&g, 5).unwrap();
        assert_eq!(h.len(), 5);
        let bad = GridFn::constant(&g, 2.0);
        assert!(BasisPair::new(vec![bad.clone()], vec![bad]).is_err());
        assert!(BasisPair::new(vec![], vec![]).is_err());
        assert!(BasisPair::hermite(&g, 9).is_err());
    }

    #[test]
    fn hermite_functions_orthonormal_on_the_line() {
        let dx = 1e-3;
        for (j, k) in [(0, 0), (1, 1), (3, 3), (0, 2), (1, 4)] {
            let s: f64 = (-12000..12000)
                .map(|i| {
                    let x = i as f64 * dx;
                    hermite_function(j, x) * hermite_function(k, x) * dx
                })
                .sum();
            let target = if j == k { 1.0 } else { 0.0 };
            assert!((s - target).abs() < 1e-8, "({j},{k}): {s}");
        }
    }

    #[test]
    fn wick_first_order_examples() {
        let g = unit(32);
        let basis = BasisPair::hermite(&g, 6).unwrap();
        let xi1 = basis.xi()[0].clone();
        let fam = |phi: &GridFn| {
            let sites = SiteSet::new((0..32).map(|c| vec![g.midpoint(c)[0]]).collect()).unwrap();
            KernelFamily::new(&g, sites, (0..32).map(|c| vec![Kernel::scalar(&g, phi.value(c)).unwrap()]).collect()).unwrap()
        };
        for k in 1..=6 {
            let w = wick_kernels(&fam(&xi1), &basis.truncate(k).unwrap()).unwrap();
            let g1 = Kernel::dense(&g, 1, xi1.values().to_vec()).unwrap();
            assert!(w.kernel(0, 1).sub(&g1).unwrap().norm() < 1e-10);
        }
        let phi = basis.xi()[1].scale(0.4).add(&basis.xi()[3].scale(-1.2)).unwrap();
        let w = wick_kernels(&fam(&phi), &basis).unwrap();
        let target = Kernel::dense(&g, 1, phi.values().to_vec()).unwrap();
        assert!(w.kernel(0, 1).sub(&target).unwrap().norm() < 1e-10);
    }

    #[test]
    fn wick_projection_error_decreases() {
        let g = unit(32);
        let basis = BasisPair::hermite(&g, 12).unwrap();
        let phi = GridFn::from_fn(&g, |t| t[0] * t[0] + (5.0 * t[0]).sin()).unwrap();
        let sites = SiteSet::new((0..32).map(|c| vec![g.midpoint(c)[0]]).collect()).unwrap();
        let fam = KernelFamily::new(&g, sites, (0..32).map(|c| vec![Kernel::scalar(&g, phi.value(c)).unwrap()]).collect()).unwrap();
        let target = Kernel::dense(&g, 1, phi.values().to_vec()).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=12 {
            let w = wick_kernels(&fam, &basis.truncate(k).unwrap()).unwrap();
            let err = w.kernel(0, 1).sub(&target).unwrap().norm();
            assert!(err < last, "k {k}: {err} !< {last}");
            last = err;
        }
    }

    #[test]
    fn wick_with_full_indicator_basis_is_divergence() {
        let g = unit(8);
        let sites = SiteSet::new((0..8).map(|c| vec![g.midpoint(c)[0]]).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ks: Vec<Vec<Kernel>> = (0..8)
            .map(|_| {
                vec![
                    Kernel::scalar(&g, rng.random_range(-1.0..1.0)).unwrap(),
                    Kernel::dense_from_fn(&g, 1, |_| rng.random_range(-1.0..1.0)).unwrap(),
                    Kernel::dense_from_fn(&g, 2, |_| rng.random_range(-1.0..1.0)).unwrap(),
                    Kernel::rank_one(&GridFn::new(&g, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap(), 3, 0.5).unwrap(),
                ]
            })
            .collect();
        let fam = KernelFamily::new(&g, sites, ks).unwrap();
        let w = wick_kernels(&fam, &BasisPair::cell_indicators(&g).unwrap()).unwrap();
        let d = divergence_kernels(&fam, 1).unwrap();
        assert!(assembly_error(&w, &d).unwrap() < 1e-8);
    }

    fn variance_with_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sq: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = sq.iter().sum::<f64>() / (n - 1.0);
        let se = (sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (n * (n - 1.0))).sqrt();
        (var, se)
    }

    #[test]
    fn wick_product_isometry() {
        // Sym(g^{(x) n} (x) g) = g^{(x) n+1}, whose variance is
        // (n+1)! ||g||^{2(n+1)} in the continuum and
        // (n+1)!^2 e_{n+1}(g^2 mu) in the discrete model.
        for (cells, n, samples) in [(64, 1, 50_000u64), (32, 2, 50_000)] {
            let g = unit(cells);
            let gf = GridFn::from_fn(&g, |t| 1.0 + t[0]).unwrap();
            let indexed = CellIndexed::from_fn(&g, |c| Kernel::rank_one(&gf, n, gf.value(c))).unwrap();
            let k = symmetrize(&indexed).unwrap();
            let xs: Vec<f64> = (0..samples)
                .map(|i| multiple_integral(&k, &sample_white_noise_stream(&g, 5, i)).unwrap())
                .collect();
            let (var, se) = variance_with_se(&xs);
            let x2 = gf.values().iter().zip(g.measures()).map(|(v, mu)| v * v * mu);
            let e = crate::chaos::elementary_symmetric(x2, n + 1);
            let exact = factorial(n + 1).powi(2) * e[n + 1];
            assert!((var - exact).abs() < 5.0 * se, "n {n}: {var} vs {exact} (se {se})");
            if n == 1 {
                let continuum = factorial(n + 1) * gf.norm().powi(2 * (n as i32 + 1));
                assert!((var - continuum).abs() < 5.0 * se, "{var} vs {continuum} (se {se})");
            }
        }
    }
}
