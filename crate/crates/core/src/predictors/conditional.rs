use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{
    FieldModel, FieldRealization, GaussianFieldSimulator, ModelKind, Observations, Provenance,
};
use crate::linalg::{Cholesky, Matrix};
use crate::point::{find_coincident, Point};
use crate::rng::RngStream;
use crate::scalar::{dot, Scalar};
use crate::stable::sample_subgaussian_a;

/// Conditional simulation of a sub-Gaussian field `A^{1/2} G` given values at
/// conditioning sites. The Gaussian part is conditioned by adding the simple
/// kriging interpolation of the residuals to an unconditional draw.
pub struct ConditionalSimulator<T> {
    alpha: T,
    gaussian: Arc<GaussianFieldSimulator<T>>,
    /// Output sites are the first `outputs` sites of the simulator.
    outputs: usize,
    /// Index of each conditioning site within the simulator's sites.
    cond_index: Vec<usize>,
    /// `kriging[s][i]`: weight of conditioning site `i` at output site `s`.
    kriging: Matrix<T>,
    /// Conditioning site that each output site coincides with, if any.
    coincident: Vec<Option<usize>>,
}

const SNAP_TOL: f64 = 1e-12;

impl<T: Scalar> ConditionalSimulator<T> {
    /// Builds an unconditional simulator over the output sites plus any
    /// conditioning site not already among them.
    pub fn new(
        model: &FieldModel<T>,
        cond_sites: &[Point<T>],
        out_sites: &[Point<T>],
        jitter: T,
    ) -> Result<Self> {
        let ModelKind::SubGaussian(cov) = model.kind() else {
            return Err(Error::UnsupportedModel(
                "conditional simulation needs a sub-Gaussian model".into(),
            ));
        };
        let mut all = out_sites.to_vec();
        for s in cond_sites {
            if find_coincident(&all, s, T::lit(SNAP_TOL)).is_none() {
                all.push(*s);
            }
        }
        let gaussian = GaussianFieldSimulator::new(cov, &all, jitter)?;
        Self::with_simulator(Arc::new(gaussian), out_sites.len(), model.alpha(), cond_sites, jitter)
    }

    /// Reuses an existing Gaussian simulator whose first `outputs` sites are
    /// the output sites and which contains every conditioning site.
    pub fn with_simulator(
        gaussian: Arc<GaussianFieldSimulator<T>>,
        outputs: usize,
        alpha: T,
        cond_sites: &[Point<T>],
        jitter: T,
    ) -> Result<Self> {
        if !(alpha > T::one() && alpha <= T::lit(2.0)) {
            return Err(crate::error::invalid("alpha", alpha.as_f64(), "a value in (1, 2]"));
        }
        let sites = gaussian.sites();
        if outputs > sites.len() {
            return Err(Error::LengthMismatch {
                expected: sites.len(),
                found: outputs,
            });
        }
        let cond_index = cond_sites
            .iter()
            .map(|s| {
                find_coincident(sites, s, T::lit(SNAP_TOL)).ok_or_else(|| {
                    Error::Domain(format!("conditioning site {s} is not simulated"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cov = *gaussian.covariance();
        let n = cond_sites.len();
        let kriging = if n == 0 {
            Matrix::zeros(outputs, 0)
        } else {
            let omega = Matrix::from_fn(n, n, |i, j| cov.between(&cond_sites[i], &cond_sites[j]));
            let chol = match Cholesky::new(&omega, T::zero()) {
                Ok(c) => c,
                Err(_) => Cholesky::new(&omega, jitter * cov.sill())?,
            };
            let mut k = Matrix::zeros(outputs, n);
            for (s, site) in sites[..outputs].iter().enumerate() {
                let c: Vec<T> = cond_sites.iter().map(|t| cov.between(site, t)).collect();
                k.row_mut(s).copy_from_slice(&chol.solve(&c));
            }
            k
        };
        let coincident = sites[..outputs]
            .iter()
            .map(|s| find_coincident(cond_sites, s, T::lit(SNAP_TOL)))
            .collect();
        Ok(Self {
            alpha,
            gaussian,
            outputs,
            cond_index,
            kriging,
            coincident,
        })
    }

    pub fn output_sites(&self) -> &[Point<T>] {
        &self.gaussian.sites()[..self.outputs]
    }

    /// One conditional realization. `mixing` supplies `A` (for instance the
    /// value retained from an unconditional realization); otherwise a fresh
    /// `A` is drawn. At `alpha = 2` the field is Gaussian and `A = 1`.
    pub fn simulate(
        &self,
        observed: &[T],
        mixing: Option<T>,
        rng: &mut RngStream,
    ) -> Result<FieldRealization<T>> {
        if observed.len() != self.cond_index.len() {
            return Err(Error::LengthMismatch {
                expected: self.cond_index.len(),
                found: observed.len(),
            });
        }
        let (seed, stream) = (rng.seed(), rng.stream());
        let a = match mixing {
            Some(a) if a > T::zero() => a,
            Some(a) => return Err(crate::error::invalid("mixing", a.as_f64(), "a positive value")),
            None if self.alpha == T::lit(2.0) => T::one(),
            None => sample_subgaussian_a(self.alpha, rng)?,
        };
        let root = a.sqrt();
        let g = self.gaussian.draw(rng);
        let residual: Vec<T> = observed
            .iter()
            .zip(&self.cond_index)
            .map(|(&x, &i)| x / root - g[i])
            .collect();
        let values = (0..self.outputs)
            .map(|s| match self.coincident[s] {
                Some(i) => observed[i],
                None => root * (g[s] + dot(self.kriging.row(s), &residual)),
            })
            .collect();
        let cov = self.gaussian.covariance();
        Ok(FieldRealization {
            sites: self.output_sites().to_vec(),
            values,
            provenance: Provenance {
                model: format!(
                    "conditional-sub-gaussian(sill={},range={},conditions={})",
                    cov.sill(),
                    cov.range(),
                    observed.len()
                ),
                alpha: self.alpha.as_f64(),
                seed,
                stream,
                grid: None,
            },
            measure: None,
            mixing: Some(a),
            coverage_deficit: None,
        })
    }
}

/// One conditional realization over `out_sites` given `observations`; an
/// empty observation set yields an unconditional draw.
pub fn conditional_simulate_subgaussian<T: Scalar>(
    model: &FieldModel<T>,
    observations: &Observations<T>,
    out_sites: &[Point<T>],
    rng: &mut RngStream,
    jitter: T,
) -> Result<FieldRealization<T>> {
    ConditionalSimulator::new(model, &observations.sites, out_sites, jitter)?.simulate(
        &observations.values,
        None,
        rng,
    )
}
