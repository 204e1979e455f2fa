//! Scale parameters and covariations of linear combinations of field values.
//!
//! Kernel models are handled on the discretized measure: every integral
//! becomes a volume-weighted sum over grid cells with the kernel evaluated at
//! cell centers. Sub-Gaussian models use the covariance matrix of the
//! Gaussian part instead.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::field::{CovarianceModel, DiscreteMeasureGrid, FieldModel, ModelKind};
use crate::linalg::{singular_values, Matrix};
use crate::point::Point;
use crate::scalar::Scalar;
use crate::stable::{moment_constant, spow};

/// Singular-value ratio below which site kernels count as linearly dependent.
pub const FULL_DIMENSION_THRESHOLD: f64 = 1.0e-10;

/// Kernel values of the observation sites on every grid cell, with cells
/// grouped by identical rows so that sums over cells can be compressed.
#[derive(Debug)]
pub(crate) struct KernelTable<T> {
    n: usize,
    /// `values[k * n + i] = f_{t_i}(c_k)`
    values: Vec<T>,
    /// `powered[k * n + i] = f_{t_i}(c_k)^{<alpha - 1>}`
    powered: Vec<T>,
    volumes: Vec<T>,
    group_of: Vec<u32>,
    /// First cell of each group, used as the group's representative row.
    representatives: Vec<usize>,
}

impl<T: Scalar> KernelTable<T> {
    fn build(model: &FieldModel<T>, grid: &DiscreteMeasureGrid<T>, sites: &[Point<T>]) -> Self {
        let n = sites.len();
        let alpha = model.alpha();
        let cells = grid.len();
        let mut values = Vec::with_capacity(cells * n);
        for c in grid.centers() {
            values.extend(sites.iter().map(|t| model.kernel_unchecked(t, c)));
        }
        let powered = values.iter().map(|&f| spow(f, alpha - T::one())).collect();
        let mut ids: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut group_of = Vec::with_capacity(cells);
        let mut representatives = Vec::new();
        for k in 0..cells {
            let key: Vec<u64> = values[k * n..(k + 1) * n]
                .iter()
                .map(|v| v.as_f64().to_bits())
                .collect();
            let next = representatives.len() as u32;
            let id = *ids.entry(key).or_insert_with(|| {
                representatives.push(k);
                next
            });
            group_of.push(id);
        }
        Self {
            n,
            values,
            powered,
            volumes: grid.volumes().to_vec(),
            group_of,
            representatives,
        }
    }

    fn cells(&self) -> usize {
        self.volumes.len()
    }

    fn row(&self, k: usize) -> &[T] {
        &self.values[k * self.n..(k + 1) * self.n]
    }

    fn powered_row(&self, k: usize) -> &[T] {
        &self.powered[k * self.n..(k + 1) * self.n]
    }

    fn combine(&self, k: usize, weights: &[T]) -> T {
        self.row(k)
            .iter()
            .zip(weights)
            .fold(T::zero(), |acc, (&f, &w)| acc + f * w)
    }
}

#[derive(Clone, Debug)]
enum Repr<T> {
    Kernel {
        grid: Arc<DiscreteMeasureGrid<T>>,
        table: Arc<KernelTable<T>>,
        /// `f_{t_0}(c_k)` per cell.
        target: Arc<Vec<T>>,
    },
    Elliptic {
        cov: CovarianceModel<T>,
        /// `[C(t_i - t_j)]` over the observation sites.
        omega: Arc<Matrix<T>>,
        /// `C(t_0 - t_i)`.
        omega0: Vec<T>,
    },
}

/// A field model with observation sites `t_1..t_n` and a target `t_0`.
///
/// Kernel models carry the integration grid; sub-Gaussian models carry their
/// covariance. Site-dependent tables are shared between systems created with
/// [`SiteSystem::with_target`].
#[derive(Clone, Debug)]
pub struct SiteSystem<T> {
    model: FieldModel<T>,
    sites: Arc<Vec<Point<T>>>,
    target: Point<T>,
    repr: Repr<T>,
}

impl<T: Scalar> SiteSystem<T> {
    /// `grid` is required for kernel models and ignored for sub-Gaussian ones.
    /// Repeated sites are accepted here and reported by
    /// [`full_dimensionality_check`].
    pub fn new(
        model: &FieldModel<T>,
        grid: Option<&DiscreteMeasureGrid<T>>,
        sites: &[Point<T>],
        target: Point<T>,
    ) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Domain("at least one observation site is needed".into()));
        }
        let dim = target.dim();
        for s in sites.iter().chain(std::iter::once(&target)) {
            if s.dim() != dim {
                return Err(Error::Domain(format!(
                    "site {s} has dimension {}, expected {dim}",
                    s.dim()
                )));
            }
            model.check_point(s)?;
        }
        let repr = match model.kind() {
            ModelKind::SubGaussian(cov) => {
                let n = sites.len();
                let omega = Matrix::from_fn(n, n, |i, j| cov.between(&sites[i], &sites[j]));
                let omega0 = sites.iter().map(|s| cov.between(&target, s)).collect();
                Repr::Elliptic {
                    cov: *cov,
                    omega: Arc::new(omega),
                    omega0,
                }
            }
            _ => {
                let grid = grid.ok_or_else(|| {
                    Error::Domain("kernel models need an integration grid".into())
                })?;
                if grid.dim() != dim {
                    return Err(Error::Domain(format!(
                        "sites are {dim}-dimensional but the grid is {}-dimensional",
                        grid.dim()
                    )));
                }
                let table = KernelTable::build(model, grid, sites);
                let target = target_column(model, grid, &target);
                Repr::Kernel {
                    grid: Arc::new(grid.clone()),
                    table: Arc::new(table),
                    target: Arc::new(target),
                }
            }
        };
        Ok(Self {
            model: model.clone(),
            sites: Arc::new(sites.to_vec()),
            target,
            repr,
        })
    }

    /// Same sites and model, different target.
    pub fn with_target(&self, target: Point<T>) -> Result<Self> {
        if target.dim() != self.target.dim() {
            return Err(Error::Domain(format!(
                "target {target} does not match the site dimension {}",
                self.target.dim()
            )));
        }
        self.model.check_point(&target)?;
        let repr = match &self.repr {
            Repr::Kernel { grid, table, .. } => Repr::Kernel {
                grid: Arc::clone(grid),
                table: Arc::clone(table),
                target: Arc::new(target_column(&self.model, grid, &target)),
            },
            Repr::Elliptic { cov, omega, .. } => Repr::Elliptic {
                cov: *cov,
                omega: Arc::clone(omega),
                omega0: self.sites.iter().map(|s| cov.between(&target, s)).collect(),
            },
        };
        Ok(Self {
            model: self.model.clone(),
            sites: Arc::clone(&self.sites),
            target,
            repr,
        })
    }

    pub fn model(&self) -> &FieldModel<T> {
        &self.model
    }

    pub fn alpha(&self) -> T {
        self.model.alpha()
    }

    pub fn sites(&self) -> &[Point<T>] {
        &self.sites
    }

    pub fn target(&self) -> Point<T> {
        self.target
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn is_kernel(&self) -> bool {
        matches!(self.repr, Repr::Kernel { .. })
    }

    pub fn grid(&self) -> Option<&DiscreteMeasureGrid<T>> {
        match &self.repr {
            Repr::Kernel { grid, .. } => Some(grid),
            Repr::Elliptic { .. } => None,
        }
    }

    pub fn covariance(&self) -> Option<&CovarianceModel<T>> {
        match &self.repr {
            Repr::Elliptic { cov, .. } => Some(cov),
            Repr::Kernel { .. } => None,
        }
    }

    /// Covariance matrix of the Gaussian part over the sites, `C(t_0 - t_i)`
    /// and `C(0)`; `None` for kernel models.
    pub(crate) fn gaussian_parts(&self) -> Option<(&Matrix<T>, &[T], T)> {
        match &self.repr {
            Repr::Elliptic { cov, omega, omega0 } => Some((omega, omega0, cov.sill())),
            Repr::Kernel { .. } => None,
        }
    }

    /// `sigma^alpha` of `X(t_0)`.
    pub fn target_scale_alpha(&self) -> T {
        match &self.repr {
            Repr::Kernel { grid, target, .. } => {
                let alpha = self.alpha();
                target
                    .iter()
                    .zip(grid.volumes())
                    .fold(T::zero(), |acc, (&f, &v)| acc + f.abs().powf(alpha) * v)
            }
            Repr::Elliptic { cov, .. } => (cov.sill() / T::lit(2.0)).powf(self.alpha() / T::lit(2.0)),
        }
    }

    /// Cells merged by identical `(f_{t_1..t_n}(c), f_{t_0}(c))`: returns rows
    /// `a_k`, targets `r_k` and summed volumes `w_k`, so that
    /// `sigma^alpha(sum lambda_i X(t_i) - X(t_0)) = sum_k w_k |a_k . lambda - r_k|^alpha`.
    pub(crate) fn compressed_residual_rows(&self) -> Option<(Matrix<T>, Vec<T>, Vec<T>)> {
        let Repr::Kernel { table, target, .. } = &self.repr else {
            return None;
        };
        let mut index: HashMap<(u32, u64), usize> = HashMap::new();
        let mut cells = Vec::new();
        let mut r = Vec::new();
        let mut w = Vec::new();
        for k in 0..table.cells() {
            let f0 = target[k];
            let g = table.group_of[k];
            let row_zero = table.row(table.representatives[g as usize]).iter().all(|v| *v == T::zero());
            if row_zero && f0 == T::zero() {
                continue;
            }
            let slot = *index.entry((g, f0.as_f64().to_bits())).or_insert_with(|| {
                cells.push(k);
                r.push(f0);
                w.push(T::zero());
                w.len() - 1
            });
            w[slot] = w[slot] + table.volumes[k];
        }
        let n = self.n();
        let a = Matrix::from_fn(cells.len(), n, |m, i| table.row(cells[m])[i]);
        Some((a, r, w))
    }

    /// Cells merged by identical site rows: `sigma^alpha(sum lambda_i X(t_i))
    /// = sum_k w_k |a_k . lambda|^alpha`.
    pub(crate) fn compressed_site_rows(&self) -> Option<(Matrix<T>, Vec<T>)> {
        let Repr::Kernel { table, .. } = &self.repr else {
            return None;
        };
        let groups = table.representatives.len();
        let mut w = vec![T::zero(); groups];
        for k in 0..table.cells() {
            let g = table.group_of[k] as usize;
            w[g] = w[g] + table.volumes[k];
        }
        let keep: Vec<usize> = (0..groups)
            .filter(|&g| table.row(table.representatives[g]).iter().any(|v| *v != T::zero()))
            .collect();
        let a = Matrix::from_fn(keep.len(), self.n(), |m, i| {
            table.row(table.representatives[keep[m]])[i]
        });
        Some((a, keep.iter().map(|&g| w[g]).collect()))
    }
}

fn target_column<T: Scalar>(
    model: &FieldModel<T>,
    grid: &DiscreteMeasureGrid<T>,
    target: &Point<T>,
) -> Vec<T> {
    grid.centers()
        .iter()
        .map(|c| model.kernel_unchecked(target, c))
        .collect()
}

/// `K[j][i] = [X(t_i), X(t_j)]_alpha` and `b[j] = [X(t_0), X(t_j)]_alpha`.
#[derive(Clone, Debug)]
pub struct CovariationSystem<T> {
    pub k: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> CovariationSystem<T> {
    pub fn assemble(sys: &SiteSystem<T>) -> Self {
        Self {
            k: covariation_matrix(sys),
            b: covariation_vector(sys),
        }
    }
}

/// `K[j][i] = [X(t_i), X(t_j)]_alpha` over the observation sites.
pub fn covariation_matrix<T: Scalar>(sys: &SiteSystem<T>) -> Matrix<T> {
    let n = sys.n();
    let alpha = sys.alpha();
    match &sys.repr {
        Repr::Kernel { table, .. } => {
            let mut k = Matrix::zeros(n, n);
            for c in 0..table.cells() {
                let vol = table.volumes[c];
                let f = table.row(c);
                let g = table.powered_row(c);
                for j in 0..n {
                    if g[j] == T::zero() {
                        continue;
                    }
                    let gv = g[j] * vol;
                    for i in 0..n {
                        k[(j, i)] = k[(j, i)] + f[i] * gv;
                    }
                }
            }
            k
        }
        Repr::Elliptic { cov, omega, .. } => {
            let factor = subgaussian_factor(alpha, cov.sill());
            Matrix::from_fn(n, n, |j, i| omega[(j, i)] * factor)
        }
    }
}

/// `b[j] = [X(t_0), X(t_j)]_alpha`.
pub fn covariation_vector<T: Scalar>(sys: &SiteSystem<T>) -> Vec<T> {
    let n = sys.n();
    match &sys.repr {
        Repr::Kernel { table, target, .. } => {
            let mut b = vec![T::zero(); n];
            for c in 0..table.cells() {
                let f0 = target[c];
                if f0 == T::zero() {
                    continue;
                }
                let fv = f0 * table.volumes[c];
                for (bj, &g) in b.iter_mut().zip(table.powered_row(c)) {
                    *bj = *bj + fv * g;
                }
            }
            b
        }
        Repr::Elliptic { cov, omega0, .. } => {
            let factor = subgaussian_factor(sys.alpha(), cov.sill());
            omega0.iter().map(|&c| c * factor).collect()
        }
    }
}

fn subgaussian_factor<T: Scalar>(alpha: T, sill: T) -> T {
    let two = T::lit(2.0);
    two.powf(-alpha / two) * sill.powf((alpha - two) / two)
}

/// Scale of `lambda_0 X(t_0) + sum_i lambda_i X(t_i)`; `weights` has the
/// target weight first, then one weight per site.
pub fn scale_of_combination<T: Scalar>(sys: &SiteSystem<T>, weights: &[T]) -> Result<T> {
    let n = sys.n();
    if weights.len() != n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            found: weights.len(),
        });
    }
    let alpha = sys.alpha();
    let (w0, w) = (weights[0], &weights[1..]);
    match &sys.repr {
        Repr::Kernel { table, target, .. } => {
            let mut acc = T::zero();
            for c in 0..table.cells() {
                let g = w0 * target[c] + table.combine(c, w);
                if g != T::zero() {
                    acc = acc + g.abs().powf(alpha) * table.volumes[c];
                }
            }
            Ok(acc.powf(T::one() / alpha))
        }
        Repr::Elliptic { cov, omega, omega0 } => {
            let ow = omega.mul_vec(w);
            let quad = w0 * w0 * cov.sill()
                + T::lit(2.0) * w0 * crate::scalar::dot(omega0, w)
                + crate::scalar::dot(w, &ow);
            Ok((quad.max(T::zero()) / T::lit(2.0)).sqrt())
        }
    }
}

/// `[X(s), X(t)]_alpha = sum_k f_s(c_k) f_t(c_k)^{<alpha-1>} vol_k` for a
/// kernel model on `grid`.
pub fn covariation_kernel<T: Scalar>(
    model: &FieldModel<T>,
    grid: &DiscreteMeasureGrid<T>,
    s: &Point<T>,
    t: &Point<T>,
) -> Result<T> {
    if !model.is_kernel() {
        return Err(Error::UnsupportedModel(
            "kernel covariation needs a kernel-represented model".into(),
        ));
    }
    model.check_point(s)?;
    model.check_point(t)?;
    let p = model.alpha() - T::one();
    Ok(grid
        .centers()
        .iter()
        .zip(grid.volumes())
        .fold(T::zero(), |acc, (c, &v)| {
            let fs = model.kernel_unchecked(s, c);
            if fs == T::zero() {
                return acc;
            }
            acc + fs * spow(model.kernel_unchecked(t, c), p) * v
        }))
}

/// `[X(s), X(t)]_alpha = 2^{-alpha/2} C(s - t) C(0)^{(alpha-2)/2}`; equals
/// `C(s - t) / 2` at `alpha = 2`.
pub fn covariation_subgaussian<T: Scalar>(
    cov: &CovarianceModel<T>,
    alpha: T,
    s: &Point<T>,
    t: &Point<T>,
) -> Result<T> {
    if !(alpha > T::one() && alpha <= T::lit(2.0)) {
        return Err(invalid("alpha", alpha.as_f64(), "a value in (1, 2]"));
    }
    Ok(cov.between(s, t) * subgaussian_factor(alpha, cov.sill()))
}

/// Gradient of `sigma^alpha(sum_i lambda_i X(t_i) - X(t_0))` in `lambda`.
pub fn gradient_scale_alpha<T: Scalar>(sys: &SiteSystem<T>, lambda: &[T]) -> Result<Vec<T>> {
    let n = sys.n();
    if lambda.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: lambda.len(),
        });
    }
    let alpha = sys.alpha();
    match &sys.repr {
        Repr::Kernel { table, target, .. } => {
            let mut grad = vec![T::zero(); n];
            for c in 0..table.cells() {
                let e = table.combine(c, lambda) - target[c];
                if e == T::zero() {
                    continue;
                }
                let s = spow(e, alpha - T::one()) * table.volumes[c] * alpha;
                for (g, &f) in grad.iter_mut().zip(table.row(c)) {
                    *g = *g + f * s;
                }
            }
            Ok(grad)
        }
        Repr::Elliptic { cov, omega, omega0 } => {
            let ol = omega.mul_vec(lambda);
            let dq: Vec<T> = ol.iter().zip(omega0).map(|(&a, &b)| a - b).collect();
            let q = (crate::scalar::dot(lambda, &ol)
                - T::lit(2.0) * crate::scalar::dot(lambda, omega0)
                + cov.sill())
                / T::lit(2.0);
            if q <= T::zero() {
                return Ok(vec![T::zero(); n]);
            }
            let s = alpha / T::lit(2.0) * q.powf(alpha / T::lit(2.0) - T::one());
            Ok(dq.into_iter().map(|d| d * s).collect())
        }
    }
}

/// Outcome of [`full_dimensionality_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct FullDimensionality<T> {
    pub full: bool,
    /// Smallest over largest singular value.
    pub ratio: T,
    pub threshold: T,
    pub singular_values: Vec<T>,
}

/// Linear independence of the site kernels `f_{t_i} vol^{1/alpha}` on the
/// grid. For sub-Gaussian models the square root of the covariance matrix
/// plays the role of the kernel vectors.
pub fn full_dimensionality_check<T: Scalar>(sys: &SiteSystem<T>) -> FullDimensionality<T> {
    let threshold = T::lit(FULL_DIMENSION_THRESHOLD);
    let sv = match &sys.repr {
        Repr::Kernel { table, .. } => {
            let inv_alpha = T::one() / sys.alpha();
            let cells: Vec<usize> = (0..table.cells())
                .filter(|&c| table.row(c).iter().any(|v| *v != T::zero()))
                .collect();
            let m = Matrix::from_fn(cells.len().max(1), sys.n(), |r, i| match cells.get(r) {
                Some(&c) => table.row(c)[i] * table.volumes[c].powf(inv_alpha),
                None => T::zero(),
            });
            singular_values(&m)
        }
        Repr::Elliptic { omega, .. } => singular_values(omega.as_ref())
            .into_iter()
            .map(|s| s.sqrt())
            .collect(),
    };
    let largest = sv.first().copied().unwrap_or(T::zero());
    let smallest = sv.last().copied().unwrap_or(T::zero());
    let ratio = if largest > T::zero() {
        smallest / largest
    } else {
        T::zero()
    };
    FullDimensionality {
        full: ratio > threshold,
        ratio,
        threshold,
        singular_values: sv,
    }
}

/// Skewness of `sum_i lambda_i X(t_i)` under the grid's per-cell skewness.
pub fn skewness_of_combination<T: Scalar>(sys: &SiteSystem<T>, lambda: &[T]) -> Result<T> {
    let Repr::Kernel { grid, table, .. } = &sys.repr else {
        return Err(Error::UnsupportedModel(
            "skewness is defined through the kernel representation".into(),
        ));
    };
    if lambda.len() != sys.n() {
        return Err(Error::LengthMismatch {
            expected: sys.n(),
            found: lambda.len(),
        });
    }
    let alpha = sys.alpha();
    let (mut num, mut den) = (T::zero(), T::zero());
    for (c, &beta) in grid.skewness().iter().enumerate() {
        let g = table.combine(c, lambda);
        if g == T::zero() {
            continue;
        }
        let m = g.abs().powf(alpha) * table.volumes[c];
        den = den + m;
        num = num + m.copysign(g) * beta;
    }
    if den == T::zero() {
        return Err(Error::Degenerate(
            "the combination has zero scale, so its skewness is undefined".into(),
        ));
    }
    Ok(num / den)
}

fn mean<T: Scalar>(it: impl Iterator<Item = T>, n: usize) -> T {
    it.fold(T::zero(), |a, b| a + b) / T::from_usize(n).unwrap()
}

/// Fractional lower-order moment estimate of `[X, Y]_alpha` for symmetric
/// pairs: `E(X Y^{<p-1>}) / E|Y|^p * sigma_Y^alpha`.
pub fn estimate_covariation_flom<T: Scalar>(
    x: &[T],
    y: &[T],
    alpha: T,
    p: T,
    sigma_y: T,
) -> Result<T> {
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if !(alpha > T::one() && alpha <= T::lit(2.0)) {
        return Err(invalid("alpha", alpha.as_f64(), "a value in (1, 2]"));
    }
    if !(p >= T::one() && p < alpha) {
        return Err(invalid("p", p.as_f64(), "an order in [1, alpha)"));
    }
    if !(sigma_y >= T::zero()) {
        return Err(invalid("sigma_y", sigma_y.as_f64(), "a nonnegative scale"));
    }
    let n = x.len();
    let cross = mean(x.iter().zip(y).map(|(&a, &b)| a * spow(b, p - T::one())), n);
    let moment = mean(y.iter().map(|b| b.abs().powf(p)), n);
    if moment == T::zero() {
        return Err(Error::Degenerate("all Y samples are zero".into()));
    }
    Ok(cross / moment * sigma_y.powf(alpha))
}

/// Scale estimate `(mean |X|^p)^{1/p} / c_alpha(p)` for symmetric samples.
pub fn sigma_from_flom<T: Scalar>(samples: &[T], alpha: T, p: T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let c = moment_constant(alpha, p)?;
    let m = mean(samples.iter().map(|v| v.abs().powf(p)), samples.len());
    Ok(m.powf(T::one() / p) / c)
}
