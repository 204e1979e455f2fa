//! Linear predictors `X^(t_0) = sum_i lambda_i X(t_i)` and conditional
//! simulation.
//!
//! * LSL minimizes the scale of the prediction error.
//! * COL makes the error covariation-orthogonal to every observation.
//! * MCL maximizes the covariation with the target at the target's scale.
//! * ML is the maximum-likelihood predictor of sub-Gaussian fields.

mod conditional;
mod solver;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;

pub use conditional::{conditional_simulate_subgaussian, ConditionalSimulator};

use crate::covariation::{
    covariation_matrix, covariation_vector, full_dimensionality_check, gradient_scale_alpha,
    scale_of_combination, FullDimensionality, SiteSystem,
};
use crate::error::{Error, Result};
use crate::field::{DiscreteMeasureGrid, FieldModel};
use crate::linalg::{lower_triangular_inverse, orthogonal_complement, Cholesky, Lu, Matrix};
use crate::point::{find_coincident, Point};
use crate::scalar::{dot, norm2, Scalar};
use solver::{minimize, EllipticObjective, LpObjective, NewtonSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Lsl,
    Col,
    Mcl,
    Ml,
    /// Conditional simulation; yields realizations rather than weights.
    Cs,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Lsl, Method::Col, Method::Mcl, Method::Ml, Method::Cs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lsl => "lsl",
            Method::Col => "col",
            Method::Mcl => "mcl",
            Method::Ml => "ml",
            Method::Cs => "cs",
        }
    }

    /// Methods that only make sense for (sub-)Gaussian fields.
    pub fn needs_subgaussian(self) -> bool {
        matches!(self, Method::Ml | Method::Cs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}` (expected lsl, col, mcl, ml or cs)")))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics<T> {
    /// Scale of `X^(t_0) - X(t_0)` at the returned weights.
    pub error_scale: Option<T>,
    /// First-order residual: gradient norm (LSL), `|K lambda - b|` (COL),
    /// relative scale-constraint violation (MCL), zero for ML.
    pub residual: T,
    /// Relative violation of the MCL scale constraint.
    pub constraint_residual: Option<T>,
    pub iterations: usize,
    /// The target coincided with a site and the basis vector was returned.
    pub snapped: bool,
    /// Reciprocal condition estimate of the COL system.
    pub rcond: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorWeights<T> {
    pub target: Point<T>,
    pub lambda: Vec<T>,
    pub method: Method,
    pub diagnostics: Diagnostics<T>,
}

impl<T: Scalar> PredictorWeights<T> {
    pub fn predict(&self, observed: &[T]) -> Result<T> {
        predict(self, observed)
    }
}

/// `sum_i lambda_i x(t_i)`.
pub fn predict<T: Scalar>(weights: &PredictorWeights<T>, observed: &[T]) -> Result<T> {
    if weights.lambda.len() != observed.len() {
        return Err(Error::LengthMismatch {
            expected: weights.lambda.len(),
            found: observed.len(),
        });
    }
    Ok(dot(&weights.lambda, observed))
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions<T> {
    /// LSL stops once the gradient norm is at most `tol * (1 + objective)`.
    pub gradient_tol: T,
    pub max_iterations: usize,
    /// Start LSL from the previous target in [`Extrapolator::weight_field`]
    /// (or from COL for single targets), and MCL from COL.
    pub warm_start: bool,
    /// Coordinate distance under which a target snaps to a site.
    pub snap_tol: T,
    /// COL refuses systems with a smaller reciprocal condition estimate.
    pub min_rcond: T,
    /// Diagonal jitter relative to `C(0)` used by ML when the plain
    /// factorization fails.
    pub jitter: T,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            gradient_tol: T::lit(1e-9),
            max_iterations: 500,
            warm_start: true,
            snap_tol: T::lit(1e-12),
            min_rcond: T::lit(1e-14),
            jitter: T::lit(crate::field::DEFAULT_JITTER),
        }
    }
}

/// The observation sites `t_1..t_n` with everything that does not depend on
/// the target: the site kernel table, the factored COL matrix and the
/// full-dimensionality diagnosis.
pub struct Extrapolator<T> {
    base: SiteSystem<T>,
    options: SolverOptions<T>,
    dimensionality: FullDimensionality<T>,
    col: OnceLock<std::result::Result<(Matrix<T>, Lu<T>), f64>>,
}

impl<T: Scalar> Extrapolator<T> {
    pub fn new(
        model: &FieldModel<T>,
        grid: Option<&DiscreteMeasureGrid<T>>,
        sites: &[Point<T>],
        options: SolverOptions<T>,
    ) -> Result<Self> {
        let first = *sites
            .first()
            .ok_or_else(|| Error::Domain("at least one observation site is needed".into()))?;
        Ok(Self::from_system(SiteSystem::new(model, grid, sites, first)?, options))
    }

    pub fn from_system(sys: SiteSystem<T>, options: SolverOptions<T>) -> Self {
        let dimensionality = full_dimensionality_check(&sys);
        Self {
            base: sys,
            options,
            dimensionality,
            col: OnceLock::new(),
        }
    }

    pub fn system(&self) -> &SiteSystem<T> {
        &self.base
    }

    pub fn options(&self) -> &SolverOptions<T> {
        &self.options
    }

    pub fn dimensionality(&self) -> &FullDimensionality<T> {
        &self.dimensionality
    }

    fn require_full_dimension(&self, method: Method) -> Result<()> {
        if self.dimensionality.full {
            Ok(())
        } else {
            Err(Error::Degenerate(format!(
                "{method}: site kernels are linearly dependent (singular value ratio {:e} <= {:e})",
                self.dimensionality.ratio.as_f64(),
                self.dimensionality.threshold.as_f64()
            )))
        }
    }

    fn col_factor(&self) -> Result<&(Matrix<T>, Lu<T>)> {
        let cached = self.col.get_or_init(|| {
            let k = covariation_matrix(&self.base);
            match Lu::new(&k, self.options.min_rcond) {
                Ok(lu) => Ok((k, lu)),
                Err(Error::SingularSystem { rcond }) => Err(rcond),
                Err(_) => Err(0.0),
            }
        });
        cached
            .as_ref()
            .map_err(|&rcond| Error::SingularSystem { rcond })
    }

    pub fn weights(&self, target: Point<T>, method: Method) -> Result<PredictorWeights<T>> {
        self.weights_from(target, method, None)
    }

    /// Like [`weights`](Self::weights) with an explicit LSL starting point.
    pub fn weights_from(
        &self,
        target: Point<T>,
        method: Method,
        start: Option<&[T]>,
    ) -> Result<PredictorWeights<T>> {
        let n = self.base.n();
        if method.needs_subgaussian() && self.base.is_kernel() {
            return Err(Error::UnsupportedModel(format!(
                "{method} needs a sub-Gaussian model, got {}",
                self.base.model().name()
            )));
        }
        if method == Method::Cs {
            return Err(Error::UnsupportedModel(
                "conditional simulation produces realizations, not weights".into(),
            ));
        }
        if let Some(i) = find_coincident(self.base.sites(), &target, self.options.snap_tol) {
            let mut lambda = vec![T::zero(); n];
            lambda[i] = T::one();
            return Ok(PredictorWeights {
                target,
                lambda,
                method,
                diagnostics: Diagnostics {
                    error_scale: Some(T::zero()),
                    residual: T::zero(),
                    constraint_residual: (method == Method::Mcl).then(T::zero),
                    iterations: 0,
                    snapped: true,
                    rcond: None,
                },
            });
        }
        let sys = self.base.with_target(target)?;
        match method {
            Method::Col => self.col(&sys),
            Method::Lsl => self.lsl(&sys, start),
            Method::Mcl => self.mcl(&sys),
            Method::Ml => self.ml(&sys),
            Method::Cs => unreachable!(),
        }
    }

    fn col(&self, sys: &SiteSystem<T>) -> Result<PredictorWeights<T>> {
        let (k, lu) = self.col_factor()?;
        let b = covariation_vector(sys);
        let lambda = lu.solve(&b);
        let kl = k.mul_vec(&lambda);
        let residual = norm2(&kl.iter().zip(&b).map(|(&a, &c)| a - c).collect::<Vec<_>>());
        Ok(PredictorWeights {
            target: sys.target(),
            diagnostics: Diagnostics {
                error_scale: Some(error_scale(sys, &lambda)?),
                residual,
                constraint_residual: None,
                iterations: 0,
                snapped: false,
                rcond: Some(lu.rcond()),
            },
            lambda,
            method: Method::Col,
        })
    }

    fn settings(&self) -> NewtonSettings<T> {
        NewtonSettings {
            gradient_tol: self.options.gradient_tol,
            max_iterations: self.options.max_iterations,
        }
    }

    fn lsl(&self, sys: &SiteSystem<T>, start: Option<&[T]>) -> Result<PredictorWeights<T>> {
        self.require_full_dimension(Method::Lsl)?;
        let n = sys.n();
        let alpha = sys.alpha();
        let start = match start {
            Some(s) if self.options.warm_start && s.len() == n => s.to_vec(),
            _ if self.options.warm_start => self
                .col(sys)
                .map(|w| w.lambda)
                .unwrap_or_else(|_| vec![T::zero(); n]),
            _ => vec![T::zero(); n],
        };
        let min = match sys.gaussian_parts() {
            Some((omega, omega0, c0)) => {
                let obj = EllipticObjective {
                    g: omega.clone(),
                    h: omega0.iter().map(|&v| -v).collect(),
                    c: c0,
                    alpha,
                };
                minimize(&obj, start, self.settings())?
            }
            None => {
                let (a, r, w) = sys
                    .compressed_residual_rows()
                    .expect("kernel systems have residual rows");
                let obj = LpObjective { a, r, w, alpha };
                minimize(&obj, start, self.settings())?
            }
        };
        let grad = gradient_scale_alpha(sys, &min.y)?;
        Ok(PredictorWeights {
            target: sys.target(),
            diagnostics: Diagnostics {
                error_scale: Some(min.value.max(T::zero()).powf(T::one() / alpha)),
                residual: norm2(&grad),
                constraint_residual: None,
                iterations: min.iterations,
                snapped: false,
                rcond: None,
            },
            lambda: min.y,
            method: Method::Lsl,
        })
    }

    /// Minimum scale on the hyperplane `<lambda, b> = 1`, parametrized as
    /// `lambda_p + Z y`, then rescaled to the target scale.
    fn mcl(&self, sys: &SiteSystem<T>) -> Result<PredictorWeights<T>> {
        self.require_full_dimension(Method::Mcl)?;
        let n = sys.n();
        let alpha = sys.alpha();
        let b = covariation_vector(sys);
        let bb = dot(&b, &b);
        let bmax = b.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let kmax = self.col_factor().map(|(k, _)| k.max_abs()).unwrap_or(T::one());
        if bb == T::zero() || bmax <= T::epsilon() * kmax {
            return Err(Error::NonUnique(
                "mcl: the target has zero covariation with every site".into(),
            ));
        }
        let lambda_p: Vec<T> = b.iter().map(|&v| v / bb).collect();
        let mut iterations = 0;
        let lambda = if n == 1 {
            lambda_p
        } else {
            let z = orthogonal_complement(&b);
            let start = if self.options.warm_start {
                self.col(sys)
                    .ok()
                    .and_then(|w| {
                        let s = dot(&w.lambda, &b);
                        (s > T::zero()).then(|| {
                            let l: Vec<T> = w.lambda.iter().map(|&v| v / s).collect();
                            let d: Vec<T> = l.iter().zip(&lambda_p).map(|(&a, &c)| a - c).collect();
                            z.tr_mul_vec(&d)
                        })
                    })
                    .unwrap_or_else(|| vec![T::zero(); n - 1])
            } else {
                vec![T::zero(); n - 1]
            };
            let min = match sys.gaussian_parts() {
                Some((omega, _, _)) => {
                    let oz = omega.mul(&z);
                    let op = omega.mul_vec(&lambda_p);
                    let obj = EllipticObjective {
                        g: z.transpose().mul(&oz),
                        h: z.tr_mul_vec(&op),
                        c: dot(&lambda_p, &op),
                        alpha,
                    };
                    minimize(&obj, start, self.settings())?
                }
                None => {
                    let (a, w) = sys.compressed_site_rows().expect("kernel systems have site rows");
                    let r: Vec<T> = a.mul_vec(&lambda_p).into_iter().map(|v| -v).collect();
                    let obj = LpObjective {
                        a: a.mul(&z),
                        r,
                        w,
                        alpha,
                    };
                    minimize(&obj, start, self.settings())?
                }
            };
            iterations = min.iterations;
            let zy = z.mul_vec(&min.y);
            lambda_p.iter().zip(&zy).map(|(&p, &q)| p + q).collect()
        };
        let mut weights0 = vec![T::zero()];
        weights0.extend_from_slice(&lambda);
        let scale = scale_of_combination(sys, &weights0)?;
        if scale == T::zero() {
            return Err(Error::Degenerate("mcl: combination with zero scale".into()));
        }
        let target_scale = sys.target_scale_alpha().powf(T::one() / alpha);
        let lambda: Vec<T> = lambda.iter().map(|&v| v * target_scale / scale).collect();
        weights0[1..].copy_from_slice(&lambda);
        let achieved = scale_of_combination(sys, &weights0)?;
        let rel = if target_scale > T::zero() {
            (achieved - target_scale).abs() / target_scale
        } else {
            achieved
        };
        Ok(PredictorWeights {
            target: sys.target(),
            diagnostics: Diagnostics {
                error_scale: Some(error_scale(sys, &lambda)?),
                residual: rel,
                constraint_residual: Some(rel),
                iterations,
                snapped: false,
                rcond: None,
            },
            lambda,
            method: Method::Mcl,
        })
    }

    /// Triangular factor of `Omega = 2 B B'` over `(t_1..t_n, t_0)`; with
    /// `A = B^{-1}` the weights are `-a_{n+1,i} / a_{n+1,n+1}`.
    fn ml(&self, sys: &SiteSystem<T>) -> Result<PredictorWeights<T>> {
        let (omega, omega0, c0) = sys
            .gaussian_parts()
            .ok_or_else(|| Error::UnsupportedModel("ml needs a sub-Gaussian model".into()))?;
        let n = sys.n();
        let full = Matrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => omega[(i, j)],
            (true, false) => omega0[i],
            (false, true) => omega0[j],
            (false, false) => c0,
        });
        let chol = match Cholesky::new(&full, T::zero()) {
            Ok(c) => c,
            Err(_) => Cholesky::new(&full, self.options.jitter * c0)?,
        };
        let root_two = T::lit(2.0).sqrt();
        let b = Matrix::from_fn(n + 1, n + 1, |i, j| chol.l()[(i, j)] / root_two);
        let a = lower_triangular_inverse(&b);
        let last = a[(n, n)];
        let lambda: Vec<T> = (0..n).map(|i| -a[(n, i)] / last).collect();
        Ok(PredictorWeights {
            target: sys.target(),
            diagnostics: Diagnostics {
                error_scale: Some(error_scale(sys, &lambda)?),
                residual: T::zero(),
                constraint_residual: None,
                iterations: 0,
                snapped: false,
                rcond: None,
            },
            lambda,
            method: Method::Ml,
        })
    }

    /// Weights at every target. Targets are processed in fixed-size chunks in
    /// parallel; within a chunk LSL starts from the previous target's weights.
    pub fn weight_field(
        &self,
        targets: &[Point<T>],
        method: Method,
    ) -> Result<Vec<PredictorWeights<T>>> {
        const CHUNK: usize = 50;
        if method == Method::Col {
            self.col_factor()?;
        }
        let chunks: Vec<Result<Vec<PredictorWeights<T>>>> = targets
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut out: Vec<PredictorWeights<T>> = Vec::with_capacity(chunk.len());
                for &t in chunk {
                    let prev = out
                        .last()
                        .filter(|w| !w.diagnostics.snapped)
                        .map(|w| w.lambda.clone());
                    out.push(self.weights_from(t, method, prev.as_deref())?);
                }
                Ok(out)
            })
            .collect();
        let mut all = Vec::with_capacity(targets.len());
        for c in chunks {
            all.extend(c?);
        }
        Ok(all)
    }
}

fn error_scale<T: Scalar>(sys: &SiteSystem<T>, lambda: &[T]) -> Result<T> {
    let mut w = Vec::with_capacity(lambda.len() + 1);
    w.push(-T::one());
    w.extend_from_slice(lambda);
    scale_of_combination(sys, &w)
}

/// Sites, target and observed values.
#[derive(Clone, Debug)]
pub struct PredictionProblem<T> {
    pub sys: SiteSystem<T>,
    pub observed: Vec<T>,
}

impl<T: Scalar> PredictionProblem<T> {
    pub fn new(sys: SiteSystem<T>, observed: Vec<T>) -> Result<Self> {
        if observed.len() != sys.n() {
            return Err(Error::LengthMismatch {
                expected: sys.n(),
                found: observed.len(),
            });
        }
        Ok(Self { sys, observed })
    }

    pub fn weights(&self, method: Method, options: SolverOptions<T>) -> Result<PredictorWeights<T>> {
        Extrapolator::from_system(self.sys.clone(), options).weights(self.sys.target(), method)
    }

    pub fn predict(&self, method: Method) -> Result<T> {
        predict(&self.weights(method, SolverOptions::default())?, &self.observed)
    }
}

pub fn col_weights<T: Scalar>(problem: &PredictionProblem<T>) -> Result<PredictorWeights<T>> {
    problem.weights(Method::Col, SolverOptions::default())
}

pub fn lsl_weights<T: Scalar>(problem: &PredictionProblem<T>) -> Result<PredictorWeights<T>> {
    problem.weights(Method::Lsl, SolverOptions::default())
}

pub fn mcl_weights<T: Scalar>(problem: &PredictionProblem<T>) -> Result<PredictorWeights<T>> {
    problem.weights(Method::Mcl, SolverOptions::default())
}

pub fn ml_weights_subgaussian<T: Scalar>(
    problem: &PredictionProblem<T>,
) -> Result<PredictorWeights<T>> {
    problem.weights(Method::Ml, SolverOptions::default())
}

/// `target_x[,target_y],lambda_1..lambda_n,method,residual`.
pub fn write_weights_csv<T: Scalar, W: Write>(weights: &[PredictorWeights<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = weights.first() else {
        w.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> = if first.target.dim() == 1 {
        vec!["target_x".into()]
    } else {
        vec!["target_x".into(), "target_y".into()]
    };
    header.extend((1..=first.lambda.len()).map(|i| format!("lambda_{i}")));
    header.push("method".into());
    header.push("residual".into());
    w.write_record(&header)?;
    for pw in weights {
        let mut rec: Vec<String> = pw.target.coords().iter().map(|c| c.to_string()).collect();
        rec.extend(pw.lambda.iter().map(|l| l.to_string()));
        rec.push(pw.method.to_string());
        rec.push(pw.diagnostics.residual.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::CovarianceModel;
    use approx::assert_relative_eq;

    fn levy_motion(alpha: f64) -> Extrapolator<f64> {
        let m = FieldModel::levy_sheet(alpha).unwrap();
        let g = DiscreteMeasureGrid::regular(Point::new1(0.0), Point::new1(1.0), &[4]).unwrap();
        Extrapolator::new(&m, Some(&g), &[Point::new1(1.0)], SolverOptions::default()).unwrap()
    }

    #[test]
    fn levy_motion_example() {
        let ex = levy_motion(1.5);
        let t0 = Point::new1(0.75);
        let col = ex.weights(t0, Method::Col).unwrap();
        assert_relative_eq!(col.lambda[0], 0.75, epsilon = 1e-12);
        let lsl = ex.weights(t0, Method::Lsl).unwrap();
        assert_relative_eq!(lsl.lambda[0], 0.9, epsilon = 1e-9);
        let mcl = ex.weights(t0, Method::Mcl).unwrap();
        assert_relative_eq!(mcl.lambda[0], 0.75f64.powf(2.0 / 3.0), epsilon = 1e-12);
        assert!(ex.weights(t0, Method::Ml).is_err());
    }

    #[test]
    fn snapping_returns_basis_vectors() {
        let c = CovarianceModel::gaussian(7.0, 0.1).unwrap();
        let m = FieldModel::sub_gaussian(1.5, c).unwrap();
        let sites = [Point::new2(0.2, 0.2), Point::new2(0.5, 0.5)];
        let ex = Extrapolator::new(&m, None, &sites, SolverOptions::default()).unwrap();
        for method in [Method::Lsl, Method::Col, Method::Mcl, Method::Ml] {
            let w = ex.weights(sites[1], method).unwrap();
            assert_eq!(w.lambda, vec![0.0, 1.0]);
            assert!(w.diagnostics.snapped);
        }
        assert!(ex.weights(sites[1], Method::Cs).is_err());
    }

    #[test]
    fn predict_checks_lengths() {
        let w = PredictorWeights {
            target: Point::new1(0.5),
            lambda: vec![0.75],
            method: Method::Col,
            diagnostics: Diagnostics::default(),
        };
        assert_eq!(predict(&w, &[2.0]).unwrap(), 1.5);
        assert!(predict(&w, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("kriging".parse::<Method>().is_err());
    }

    #[test]
    fn weights_csv_layout() {
        let ex = levy_motion(1.5);
        let w = ex.weight_field(&[Point::new1(0.75)], Method::Col).unwrap();
        let mut buf = Vec::new();
        write_weights_csv(&w, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("target_x,lambda_1,method,residual\n0.75,0.75,col,"));
    }
}
