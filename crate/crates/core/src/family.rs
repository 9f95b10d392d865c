use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ensure_same, Grid, GridFn, SiteSet};
use crate::kernel::Kernel;

/// Kernels of the form `f_n * 1_{A_z}^{(x) n}`: a site-independent base
/// kernel times a tensor power of a box indicator. Kept alongside the
/// assembled kernels so the continuity check can split the two factors
/// with Hoelder's inequality.
#[derive(Debug, Clone)]
pub struct ProductForm {
    pub base: Vec<Kernel>,
    /// Per site, the box `[lower, upper]` in grid coordinates.
    pub boxes: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Per-site chaos kernels `f_n^z`, orders `0..=n_max`, on one grid.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    grid: Arc<Grid>,
    sites: SiteSet,
    kernels: Vec<Vec<Kernel>>,
    product_form: Option<ProductForm>,
}

impl KernelFamily {
    pub fn new(grid: &Arc<Grid>, sites: SiteSet, kernels: Vec<Vec<Kernel>>) -> Result<Self> {
        if kernels.len() != sites.len() {
            return Err(Error::Dimension {
                expected: sites.len(),
                found: kernels.len(),
            });
        }
        let n_max = kernels
            .first()
            .map(|k| k.len())
            .filter(|&l| l > 0)
            .ok_or_else(|| Error::config("kernel family needs at least the order-0 term"))?
            - 1;
        for site in &kernels {
            if site.len() != n_max + 1 {
                return Err(Error::config("every site must carry the same number of orders"));
            }
            for (n, k) in site.iter().enumerate() {
                if k.order() != n {
                    return Err(Error::OrderMismatch {
                        expected: n,
                        found: k.order(),
                    });
                }
                ensure_same(grid, k.grid())?;
            }
        }
        Ok(KernelFamily {
            grid: grid.clone(),
            sites,
            kernels,
            product_form: None,
        })
    }

    /// One-site family (a single random variable).
    pub fn single_site(grid: &Arc<Grid>, kernels: Vec<Kernel>) -> Result<Self> {
        KernelFamily::new(grid, SiteSet::single(), vec![kernels])
    }

    /// `f_0 + I_1(f)` at one site.
    pub fn first_chaos(f0: f64, f: &GridFn) -> Result<Self> {
        let grid = f.grid();
        let k1 = Kernel::dense(grid, 1, f.values().to_vec())?;
        KernelFamily::single_site(grid, vec![Kernel::scalar(grid, f0)?, k1])
    }

    pub fn with_product_form(mut self, form: ProductForm) -> Result<Self> {
        if form.boxes.len() != self.sites.len() || form.base.len() != self.n_max() + 1 {
            return Err(Error::config("product form does not match the family shape"));
        }
        self.product_form = Some(form);
        Ok(self)
    }

    pub fn product_form(&self) -> Option<&ProductForm> {
        self.product_form.as_ref()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn n_max(&self) -> usize {
        self.kernels[0].len() - 1
    }

    pub fn kernel(&self, site: usize, order: usize) -> &Kernel {
        &self.kernels[site][order]
    }

    pub fn orders(&self, site: usize) -> &[Kernel] {
        &self.kernels[site]
    }

    pub fn f0(&self, site: usize) -> f64 {
        self.kernels[site][0].as_scalar().unwrap_or(0.0)
    }

    /// True when every kernel of order >= 2 vanishes.
    pub fn is_first_chaos_only(&self) -> bool {
        self.kernels
            .iter()
            .all(|site| site.iter().skip(2).all(Kernel::is_zero))
    }

    /// Drop orders above `n`, or pad with zero kernels up to `n`.
    pub fn with_n_max(&self, n: usize) -> KernelFamily {
        let kernels = self
            .kernels
            .iter()
            .map(|site| {
                (0..=n)
                    .map(|k| site.get(k).cloned().unwrap_or_else(|| Kernel::zero(&self.grid, k)))
                    .collect()
            })
            .collect();
        let product_form = self.product_form.as_ref().map(|pf| ProductForm {
            base: (0..=n)
                .map(|k| pf.base.get(k).cloned().unwrap_or_else(|| Kernel::zero(&self.grid, k)))
                .collect(),
            boxes: pf.boxes.clone(),
        });
        KernelFamily {
            grid: self.grid.clone(),
            sites: self.sites.clone(),
            kernels,
            product_form,
        }
    }
}
