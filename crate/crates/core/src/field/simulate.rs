use crate::error::{Error, Result};
use crate::field::grid::DiscreteMeasureGrid;
use crate::field::model::{CovarianceModel, FieldModel, ModelKind};
use crate::linalg::{Cholesky, Matrix};
use crate::point::Point;
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::stable::{sample_stable, sample_subgaussian_a, StableParams};

/// Default nugget added to covariance diagonals, relative to `C(0)`.
pub const DEFAULT_JITTER: f64 = 1.0e-10;

/// Relative kernel mass outside the grid above which simulation warns.
pub const COVERAGE_TOLERANCE: f64 = 1.0e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub model: String,
    pub alpha: f64,
    pub seed: u64,
    pub stream: u64,
    pub grid: Option<String>,
}

/// Simulated values at a list of sites, plus the random inputs needed to
/// reuse the realization (per-cell measure draws, mixing variable).
#[derive(Clone, Debug)]
pub struct FieldRealization<T> {
    pub sites: Vec<Point<T>>,
    pub values: Vec<T>,
    pub provenance: Provenance,
    pub measure: Option<Vec<T>>,
    pub mixing: Option<T>,
    /// Largest relative kernel mass missed by the integration grid.
    pub coverage_deficit: Option<T>,
}

/// Independent per-cell draws `M_k ~ S_alpha(vol_k^{1/alpha}, beta_k, 0)`.
pub fn simulate_measure<T: Scalar>(
    grid: &DiscreteMeasureGrid<T>,
    alpha: T,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    let inv_alpha = T::one() / alpha;
    grid.volumes()
        .iter()
        .zip(grid.skewness())
        .map(|(&v, &b)| {
            let p = StableParams::new(alpha, v.powf(inv_alpha), b, T::zero())?;
            Ok(sample_stable(&p, rng))
        })
        .collect()
}

enum Plan {
    /// Lévy sheet on a regular grid: rectangle sums of prefix-summed draws.
    /// Per site: half-open axis index ranges of cells inside `[0, t]`.
    LevyPrefix(Vec<[(usize, usize); 2]>),
    Dense,
}

/// Discretized stochastic integral `X(t) = sum_k f_t(c_k) M_k` for a fixed
/// model, grid and site list.
pub struct KernelFieldSimulator<T> {
    model: FieldModel<T>,
    grid: DiscreteMeasureGrid<T>,
    sites: Vec<Point<T>>,
    plan: Plan,
    coverage_deficit: T,
}

impl<T: Scalar> KernelFieldSimulator<T> {
    pub fn new(
        model: &FieldModel<T>,
        grid: &DiscreteMeasureGrid<T>,
        sites: &[Point<T>],
    ) -> Result<Self> {
        if !model.is_kernel() {
            return Err(Error::UnsupportedModel(
                "kernel simulation needs a kernel-represented model".into(),
            ));
        }
        for s in sites {
            if s.dim() != grid.dim() {
                return Err(Error::Domain(format!(
                    "site {s} does not match the {}-dimensional grid",
                    grid.dim()
                )));
            }
            model.check_point(s)?;
        }
        let plan = match model.kind() {
            ModelKind::LevySheet => Plan::LevyPrefix(
                sites
                    .iter()
                    .map(|s| {
                        let mut r = [(0, 1); 2];
                        for (a, range) in r.iter_mut().enumerate().take(grid.dim()) {
                            let c = grid.axis_centers(a);
                            let t = s.coords()[a];
                            let lo = c.partition_point(|&x| x < T::zero());
                            let hi = c.partition_point(|&x| x <= t).max(lo);
                            *range = (lo, hi);
                        }
                        r
                    })
                    .collect(),
            ),
            _ => Plan::Dense,
        };
        let coverage_deficit = coverage_deficit(model, grid, sites)?;
        if coverage_deficit > T::lit(COVERAGE_TOLERANCE) {
            log::warn!(
                "integration grid misses {:.3e} of the kernel mass (model {}, grid {})",
                coverage_deficit.as_f64(),
                model.name(),
                grid.describe()
            );
        }
        Ok(Self {
            model: model.clone(),
            grid: grid.clone(),
            sites: sites.to_vec(),
            plan,
            coverage_deficit,
        })
    }

    pub fn coverage_deficit(&self) -> T {
        self.coverage_deficit
    }

    pub fn sites(&self) -> &[Point<T>] {
        &self.sites
    }

    /// Values at the sites for given per-cell measure draws.
    pub fn integrate(&self, measure: &[T]) -> Vec<T> {
        assert_eq!(measure.len(), self.grid.len());
        match &self.plan {
            Plan::LevyPrefix(ranges) => {
                let shape = self.grid.shape();
                let nx = shape[0];
                let ny = if shape.len() == 2 { shape[1] } else { 1 };
                // prefix[(i, j)] = sum of cells with ix < i and iy < j.
                let mut prefix = vec![T::zero(); (nx + 1) * (ny + 1)];
                for i in 0..nx {
                    let mut row = T::zero();
                    for j in 0..ny {
                        row = row + measure[i * ny + j];
                        prefix[(i + 1) * (ny + 1) + j + 1] = prefix[i * (ny + 1) + j + 1] + row;
                    }
                }
                let at = |i: usize, j: usize| prefix[i * (ny + 1) + j];
                ranges
                    .iter()
                    .map(|[(x0, x1), (y0, y1)]| {
                        at(*x1, *y1) - at(*x0, *y1) - at(*x1, *y0) + at(*x0, *y0)
                    })
                    .collect()
            }
            Plan::Dense => self
                .sites
                .iter()
                .map(|t| {
                    self.grid
                        .centers()
                        .iter()
                        .zip(measure)
                        .fold(T::zero(), |acc, (c, &m)| {
                            let f = self.model.kernel_unchecked(t, c);
                            if f == T::zero() {
                                acc
                            } else {
                                acc + f * m
                            }
                        })
                })
                .collect(),
        }
    }

    pub fn simulate(&self, rng: &mut RngStream) -> Result<FieldRealization<T>> {
        let (seed, stream) = (rng.seed(), rng.stream());
        let measure = simulate_measure(&self.grid, self.model.alpha(), rng)?;
        let values = self.integrate(&measure);
        Ok(FieldRealization {
            sites: self.sites.clone(),
            values,
            provenance: Provenance {
                model: self.model.name(),
                alpha: self.model.alpha().as_f64(),
                seed,
                stream,
                grid: Some(self.grid.describe()),
            },
            measure: Some(measure),
            mixing: None,
            coverage_deficit: Some(self.coverage_deficit),
        })
    }
}

/// Largest over sites of the fraction of `int |f_t|^alpha` that lies outside
/// the grid, judged against the same integral over the grid extended to at
/// least twice its extent.
fn coverage_deficit<T: Scalar>(
    model: &FieldModel<T>,
    grid: &DiscreteMeasureGrid<T>,
    sites: &[Point<T>],
) -> Result<T> {
    let doubled = grid.doubled()?;
    let alpha = model.alpha();
    let mass = |g: &DiscreteMeasureGrid<T>, t: &Point<T>| {
        g.centers()
            .iter()
            .zip(g.volumes())
            .fold(T::zero(), |acc, (c, &v)| {
                let f = model.kernel_unchecked(t, c);
                if f == T::zero() {
                    acc
                } else {
                    acc + f.abs().powf(alpha) * v
                }
            })
    };
    let mut worst = T::zero();
    for t in sites {
        let outer = mass(&doubled, t);
        if outer > T::zero() {
            let inner = mass(grid, t);
            worst = worst.max(T::one() - inner / outer);
        }
    }
    Ok(worst.max(T::zero()))
}

/// Kernel-field realization at `sites`: `X(t) = sum_k f_t(c_k) M_k`.
pub fn simulate_field<T: Scalar>(
    model: &FieldModel<T>,
    sites: &[Point<T>],
    grid: &DiscreteMeasureGrid<T>,
    rng: &mut RngStream,
) -> Result<FieldRealization<T>> {
    KernelFieldSimulator::new(model, grid, sites)?.simulate(rng)
}

/// Zero-mean Gaussian vector with covariance `[C(t_i - t_j)]`, drawn as
/// `L z` from the Cholesky factor of the (jittered) covariance matrix.
pub struct GaussianFieldSimulator<T> {
    cov: CovarianceModel<T>,
    sites: Vec<Point<T>>,
    chol: Cholesky<T>,
}

impl<T: Scalar> GaussianFieldSimulator<T> {
    /// `jitter` is relative to `C(0)`.
    pub fn new(cov: &CovarianceModel<T>, sites: &[Point<T>], jitter: T) -> Result<Self> {
        let n = sites.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = cov.between(&sites[i], &sites[j]);
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        let chol = Cholesky::new(&m, jitter * cov.sill())?;
        Ok(Self {
            cov: *cov,
            sites: sites.to_vec(),
            chol,
        })
    }

    pub fn sites(&self) -> &[Point<T>] {
        &self.sites
    }

    pub fn covariance(&self) -> &CovarianceModel<T> {
        &self.cov
    }

    pub fn draw(&self, rng: &mut RngStream) -> Vec<T> {
        let z: Vec<T> = (0..self.sites.len())
            .map(|_| T::lit(rng.standard_normal()))
            .collect();
        self.chol.lower_mul(&z)
    }

    fn provenance(&self, alpha: f64, rng: &RngStream, prefix: &str) -> Provenance {
        let fam = match self.cov.family() {
            crate::field::CovarianceFamily::Gaussian => "gaussian",
            crate::field::CovarianceFamily::Exponential => "exponential",
        };
        Provenance {
            model: format!(
                "{prefix}({fam},sill={},range={})",
                self.cov.sill(),
                self.cov.range()
            ),
            alpha,
            seed: rng.seed(),
            stream: rng.stream(),
            grid: None,
        }
    }

    pub fn simulate(&self, rng: &mut RngStream) -> FieldRealization<T> {
        let provenance = self.provenance(2.0, rng, "gaussian-field");
        FieldRealization {
            sites: self.sites.clone(),
            values: self.draw(rng),
            provenance,
            measure: None,
            mixing: None,
            coverage_deficit: None,
        }
    }
}

pub fn simulate_gaussian_field<T: Scalar>(
    cov: &CovarianceModel<T>,
    sites: &[Point<T>],
    rng: &mut RngStream,
    jitter: T,
) -> Result<FieldRealization<T>> {
    Ok(GaussianFieldSimulator::new(cov, sites, jitter)?.simulate(rng))
}

/// `A^{1/2} G(t)`: one mixing draw and one Gaussian field draw per realization.
pub struct SubGaussianFieldSimulator<T> {
    alpha: T,
    gaussian: GaussianFieldSimulator<T>,
}

impl<T: Scalar> SubGaussianFieldSimulator<T> {
    pub fn new(cov: &CovarianceModel<T>, alpha: T, sites: &[Point<T>], jitter: T) -> Result<Self> {
        crate::stable::subgaussian_a_params(alpha)?;
        Ok(Self {
            alpha,
            gaussian: GaussianFieldSimulator::new(cov, sites, jitter)?,
        })
    }

    pub fn from_gaussian(gaussian: GaussianFieldSimulator<T>, alpha: T) -> Result<Self> {
        crate::stable::subgaussian_a_params(alpha)?;
        Ok(Self { alpha, gaussian })
    }

    pub fn gaussian(&self) -> &GaussianFieldSimulator<T> {
        &self.gaussian
    }

    pub fn simulate(&self, rng: &mut RngStream) -> Result<FieldRealization<T>> {
        let provenance = self
            .gaussian
            .provenance(self.alpha.as_f64(), rng, "sub-gaussian");
        let a = sample_subgaussian_a(self.alpha, rng)?;
        let root = a.sqrt();
        let values = self.gaussian.draw(rng).into_iter().map(|g| root * g).collect();
        Ok(FieldRealization {
            sites: self.gaussian.sites.clone(),
            values,
            provenance,
            measure: None,
            mixing: Some(a),
            coverage_deficit: None,
        })
    }
}

pub fn simulate_subgaussian_field<T: Scalar>(
    cov: &CovarianceModel<T>,
    alpha: T,
    sites: &[Point<T>],
    rng: &mut RngStream,
    jitter: T,
) -> Result<FieldRealization<T>> {
    SubGaussianFieldSimulator::new(cov, alpha, sites, jitter)?.simulate(rng)
}

/// Dispatches on the model: kernel fields need a grid, sub-Gaussian fields at
/// `alpha = 2` are simulated as Gaussian fields.
pub fn simulate<T: Scalar>(
    model: &FieldModel<T>,
    sites: &[Point<T>],
    grid: Option<&DiscreteMeasureGrid<T>>,
    rng: &mut RngStream,
    jitter: T,
) -> Result<FieldRealization<T>> {
    match model.kind() {
        ModelKind::SubGaussian(cov) if model.alpha() == T::lit(2.0) => {
            simulate_gaussian_field(cov, sites, rng, jitter)
        }
        ModelKind::SubGaussian(cov) => {
            simulate_subgaussian_field(cov, model.alpha(), sites, rng, jitter)
        }
        _ => {
            let grid = grid.ok_or_else(|| {
                Error::Domain("kernel models need an integration grid".into())
            })?;
            simulate_field(model, sites, grid, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::MaKernel;
    use approx::assert_relative_eq;

    #[test]
    fn levy_sheet_at_origin_is_zero() {
        let m = FieldModel::levy_sheet(1.5).unwrap();
        let g = DiscreteMeasureGrid::unit(2, 8).unwrap();
        let sites = [Point::new2(0.0, 0.0), Point::new2(1.0, 1.0)];
        let mut rng = RngStream::new(3, 0);
        let r = simulate_field(&m, &sites, &g, &mut rng).unwrap();
        assert_eq!(r.values[0], 0.0);
        let total: f64 = r.measure.as_ref().unwrap().iter().sum();
        assert_relative_eq!(r.values[1], total, epsilon = 1e-12);
    }

    #[test]
    fn prefix_plan_matches_dense_sum() {
        let m = FieldModel::levy_sheet(1.3).unwrap();
        let g = DiscreteMeasureGrid::unit(2, 6).unwrap();
        let sites: Vec<_> = [(0.3, 0.7), (0.51, 0.2), (1.0, 0.05), (0.9, 0.9)]
            .iter()
            .map(|&(x, y)| Point::new2(x, y))
            .collect();
        let sim = KernelFieldSimulator::new(&m, &g, &sites).unwrap();
        let mut rng = RngStream::new(5, 1);
        let r = sim.simulate(&mut rng).unwrap();
        let meas = r.measure.unwrap();
        for (t, v) in sites.iter().zip(&r.values) {
            let dense: f64 = g
                .centers()
                .iter()
                .zip(&meas)
                .map(|(c, mk)| m.kernel_unchecked(t, c) * mk)
                .sum();
            assert_relative_eq!(*v, dense, epsilon = 1e-12);
        }
    }

    #[test]
    fn truncated_ou_grid_reports_deficit() {
        let m = FieldModel::ornstein_uhlenbeck(1.5, 0.5).unwrap();
        let g = DiscreteMeasureGrid::regular(Point::new1(0.0), Point::new1(1.0), &[50]).unwrap();
        let sim = KernelFieldSimulator::new(&m, &g, &[Point::new1(1.0)]).unwrap();
        assert!(sim.coverage_deficit() > COVERAGE_TOLERANCE);
        let wide =
            DiscreteMeasureGrid::regular(Point::new1(-60.0), Point::new1(1.0), &[3050]).unwrap();
        let sim = KernelFieldSimulator::new(&m, &wide, &[Point::new1(1.0)]).unwrap();
        assert!(sim.coverage_deficit() < 1e-9);
    }

    #[test]
    fn moving_average_inside_grid_has_no_deficit() {
        let k = MaKernel::triangle(0.2).unwrap();
        let m = FieldModel::moving_average(1.7, k).unwrap();
        let g = DiscreteMeasureGrid::regular(Point::new1(-0.5), Point::new1(1.5), &[200]).unwrap();
        let sim = KernelFieldSimulator::new(&m, &g, &[Point::new1(0.0), Point::new1(1.0)]).unwrap();
        assert!(sim.coverage_deficit() < 1e-12);
    }

    #[test]
    fn subgaussian_retains_positive_mixing() {
        let c = CovarianceModel::gaussian(7.0, 0.1).unwrap();
        let sites = [Point::new2(0.2, 0.2), Point::new2(0.3, 0.2)];
        let mut rng = RngStream::new(11, 0);
        let r = simulate_subgaussian_field(&c, 1.5, &sites, &mut rng, DEFAULT_JITTER).unwrap();
        assert!(r.mixing.unwrap() > 0.0);
        assert_eq!(r.values.len(), 2);
        assert!(simulate_subgaussian_field(&c, 2.0, &sites, &mut rng, DEFAULT_JITTER).is_err());
    }

    #[test]
    fn duplicate_sites_fail_without_jitter() {
        let c = CovarianceModel::gaussian(1.0, 0.3).unwrap();
        let sites = [Point::new1(0.5), Point::new1(0.5)];
        assert!(matches!(
            GaussianFieldSimulator::new(&c, &sites, 0.0),
            Err(Error::Factorization { .. })
        ));
        assert!(GaussianFieldSimulator::new(&c, &sites, 1e-8).is_ok());
    }
}
