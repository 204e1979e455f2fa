use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::point::Point;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceFamily {
    /// `c * exp(-(h/r)^2)`
    Gaussian,
    /// `c * exp(-h/r)`
    Exponential,
}

/// Isotropic stationary covariance `C(h)` with sill `c = C(0)` and range `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceModel<T> {
    family: CovarianceFamily,
    sill: T,
    range: T,
}

impl<T: Scalar> CovarianceModel<T> {
    pub fn new(family: CovarianceFamily, sill: T, range: T) -> Result<Self> {
        if !(sill > T::zero()) || !sill.is_finite() {
            return Err(invalid("sill", sill.as_f64(), "a positive finite value"));
        }
        if !(range > T::zero()) || !range.is_finite() {
            return Err(invalid("range", range.as_f64(), "a positive finite value"));
        }
        Ok(Self {
            family,
            sill,
            range,
        })
    }

    pub fn gaussian(sill: T, range: T) -> Result<Self> {
        Self::new(CovarianceFamily::Gaussian, sill, range)
    }

    pub fn exponential(sill: T, range: T) -> Result<Self> {
        Self::new(CovarianceFamily::Exponential, sill, range)
    }

    pub fn family(&self) -> CovarianceFamily {
        self.family
    }

    pub fn sill(&self) -> T {
        self.sill
    }

    pub fn range(&self) -> T {
        self.range
    }

    /// `C(h)` at lag length `h >= 0`.
    #[inline]
    pub fn at_distance(&self, h: T) -> T {
        let u = h / self.range;
        match self.family {
            CovarianceFamily::Gaussian => self.sill * (-(u * u)).exp(),
            CovarianceFamily::Exponential => self.sill * (-u).exp(),
        }
    }

    #[inline]
    pub fn between(&self, s: &Point<T>, t: &Point<T>) -> T {
        self.at_distance(s.distance(t))
    }
}

#[derive(Clone)]
enum KernelShape<T> {
    /// `(1 - |h|/r)_+`
    Triangle,
    /// `(1 - (|h|/r)^2)_+`
    Epanechnikov,
    /// `1{|h| <= r}`
    Box,
    Custom(Arc<dyn Fn(&Point<T>) -> T + Send + Sync>),
}

/// Moving-average kernel `f` with a declared support radius; evaluates to 0
/// outside the radius.
#[derive(Clone)]
pub struct MaKernel<T> {
    name: String,
    radius: T,
    shape: KernelShape<T>,
}

impl<T: Scalar> MaKernel<T> {
    fn with_shape(name: &str, radius: T, shape: KernelShape<T>) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(invalid("radius", radius.as_f64(), "a positive finite support radius"));
        }
        Ok(Self {
            name: name.to_string(),
            radius,
            shape,
        })
    }

    pub fn triangle(radius: T) -> Result<Self> {
        Self::with_shape("triangle", radius, KernelShape::Triangle)
    }

    pub fn epanechnikov(radius: T) -> Result<Self> {
        Self::with_shape("epanechnikov", radius, KernelShape::Epanechnikov)
    }

    pub fn boxcar(radius: T) -> Result<Self> {
        Self::with_shape("box", radius, KernelShape::Box)
    }

    pub fn custom(
        name: &str,
        radius: T,
        f: impl Fn(&Point<T>) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::with_shape(name, radius, KernelShape::Custom(Arc::new(f)))
    }

    pub fn by_name(name: &str, radius: T) -> Result<Self> {
        match name {
            "triangle" => Self::triangle(radius),
            "epanechnikov" => Self::epanechnikov(radius),
            "box" => Self::boxcar(radius),
            other => Err(Error::Parse(format!(
                "unknown kernel `{other}` (expected triangle, epanechnikov or box)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    #[inline]
    pub fn eval(&self, h: &Point<T>) -> T {
        let d = h.norm();
        if d > self.radius {
            return T::zero();
        }
        let u = d / self.radius;
        match &self.shape {
            KernelShape::Triangle => T::one() - u,
            KernelShape::Epanechnikov => T::one() - u * u,
            KernelShape::Box => T::one(),
            KernelShape::Custom(f) => f(h),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for MaKernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaKernel")
            .field("name", &self.name)
            .field("radius", &self.radius)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum ModelKind<T> {
    /// `f_t(x) = 1{0 <= x <= t}` coordinatewise, on `[0, inf)^d`.
    LevySheet,
    /// `f_t(x) = f(t - x)`.
    MovingAverage(MaKernel<T>),
    /// `f_t(x) = exp(-rate (t - x)) 1{t - x >= 0}` on the real line.
    OrnsteinUhlenbeck { rate: T },
    /// `A^{1/2} G` with `G` Gaussian with the given covariance; no kernel form.
    SubGaussian(CovarianceModel<T>),
}

/// A stable random field family together with its stability index.
#[derive(Clone, Debug)]
pub struct FieldModel<T> {
    alpha: T,
    kind: ModelKind<T>,
}

impl<T: Scalar> FieldModel<T> {
    pub fn new(alpha: T, kind: ModelKind<T>) -> Result<Self> {
        if !(alpha > T::one() && alpha <= T::lit(2.0)) {
            return Err(invalid("alpha", alpha.as_f64(), "a value in (1, 2]"));
        }
        if let ModelKind::OrnsteinUhlenbeck { rate } = &kind {
            if !(*rate > T::zero()) || !rate.is_finite() {
                return Err(invalid("rate", rate.as_f64(), "a positive finite value"));
            }
        }
        Ok(Self { alpha, kind })
    }

    pub fn levy_sheet(alpha: T) -> Result<Self> {
        Self::new(alpha, ModelKind::LevySheet)
    }

    pub fn moving_average(alpha: T, kernel: MaKernel<T>) -> Result<Self> {
        Self::new(alpha, ModelKind::MovingAverage(kernel))
    }

    pub fn ornstein_uhlenbeck(alpha: T, rate: T) -> Result<Self> {
        Self::new(alpha, ModelKind::OrnsteinUhlenbeck { rate })
    }

    /// Sub-Gaussian field; at `alpha = 2` this is the Gaussian field itself.
    pub fn sub_gaussian(alpha: T, cov: CovarianceModel<T>) -> Result<Self> {
        Self::new(alpha, ModelKind::SubGaussian(cov))
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    pub fn is_kernel(&self) -> bool {
        !matches!(self.kind, ModelKind::SubGaussian(_))
    }

    pub fn covariance(&self) -> Option<&CovarianceModel<T>> {
        match &self.kind {
            ModelKind::SubGaussian(c) => Some(c),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ModelKind::LevySheet => "levy-sheet".into(),
            ModelKind::MovingAverage(k) => format!("moving-average({},r={})", k.name(), k.radius()),
            ModelKind::OrnsteinUhlenbeck { rate } => format!("ornstein-uhlenbeck(rate={rate})"),
            ModelKind::SubGaussian(c) => {
                let fam = match c.family() {
                    CovarianceFamily::Gaussian => "gaussian",
                    CovarianceFamily::Exponential => "exponential",
                };
                let base = if self.alpha == T::lit(2.0) {
                    "gaussian-field"
                } else {
                    "sub-gaussian"
                };
                format!("{base}({fam},sill={},range={})", c.sill(), c.range())
            }
        }
    }

    /// Kernel value `f_t(x)` without dimension checks.
    #[inline]
    pub(crate) fn kernel_unchecked(&self, t: &Point<T>, x: &Point<T>) -> T {
        match &self.kind {
            ModelKind::LevySheet => {
                let inside = t
                    .coords()
                    .iter()
                    .zip(x.coords())
                    .all(|(&ti, &xi)| xi >= T::zero() && xi <= ti);
                if inside {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ModelKind::MovingAverage(k) => k.eval(&t.sub(x)),
            ModelKind::OrnsteinUhlenbeck { rate } => {
                let lag = t.x() - x.x();
                if lag >= T::zero() {
                    (-*rate * lag).exp()
                } else {
                    T::zero()
                }
            }
            ModelKind::SubGaussian(_) => T::nan(),
        }
    }

    pub(crate) fn check_point(&self, p: &Point<T>) -> Result<()> {
        if let ModelKind::OrnsteinUhlenbeck { .. } = self.kind {
            if p.dim() != 1 {
                return Err(Error::Domain(
                    "the Ornstein-Uhlenbeck process lives on the real line".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `f_t(x)` for kernel-represented models.
pub fn eval_kernel<T: Scalar>(model: &FieldModel<T>, t: &Point<T>, x: &Point<T>) -> Result<T> {
    if !model.is_kernel() {
        return Err(Error::UnsupportedModel(
            "sub-Gaussian fields have no kernel representation here".into(),
        ));
    }
    if t.dim() != x.dim() {
        return Err(Error::Domain(format!(
            "kernel arguments differ in dimension ({} vs {})",
            t.dim(),
            x.dim()
        )));
    }
    model.check_point(t)?;
    Ok(model.kernel_unchecked(t, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn levy_sheet_indicator() {
        let m = FieldModel::levy_sheet(1.5).unwrap();
        let t = Point::new2(0.5, 0.5);
        assert_eq!(eval_kernel(&m, &t, &Point::new2(0.2, 0.2)).unwrap(), 1.0);
        assert_eq!(eval_kernel(&m, &t, &Point::new2(0.6, 0.2)).unwrap(), 0.0);
        assert_eq!(eval_kernel(&m, &t, &Point::new2(-0.1, 0.2)).unwrap(), 0.0);
    }

    #[test]
    fn ou_kernel() {
        let m = FieldModel::ornstein_uhlenbeck(1.5, 2.0).unwrap();
        let v = eval_kernel(&m, &Point::new1(1.0), &Point::new1(0.5)).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(eval_kernel(&m, &Point::new1(0.5), &Point::new1(1.0)).unwrap(), 0.0);
        assert!(eval_kernel(&m, &Point::new2(0.5, 0.0), &Point::new2(1.0, 0.0)).is_err());
    }

    #[test]
    fn moving_average_support() {
        let k = MaKernel::triangle(0.5).unwrap();
        let m = FieldModel::moving_average(1.5, k).unwrap();
        let v = eval_kernel(&m, &Point::new1(1.0), &Point::new1(0.75)).unwrap();
        assert_relative_eq!(v, 0.5);
        assert_eq!(eval_kernel(&m, &Point::new1(1.0), &Point::new1(0.4)).unwrap(), 0.0);
    }

    #[test]
    fn sub_gaussian_has_no_kernel() {
        let c = CovarianceModel::gaussian(7.0, 0.1).unwrap();
        let m = FieldModel::sub_gaussian(1.5, c).unwrap();
        assert!(matches!(
            eval_kernel(&m, &Point::new1(0.0), &Point::new1(0.0)),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn covariance_families() {
        let g = CovarianceModel::gaussian(7.0, 0.1).unwrap();
        assert_relative_eq!(g.at_distance(0.0), 7.0);
        assert_relative_eq!(g.at_distance(0.1), 7.0 * (-1.0f64).exp());
        let e = CovarianceModel::exponential(2.0, 0.5).unwrap();
        assert_relative_eq!(e.at_distance(0.5), 2.0 * (-1.0f64).exp());
        assert!(CovarianceModel::gaussian(0.0, 1.0).is_err());
        assert!(CovarianceModel::gaussian(1.0, -1.0).is_err());
    }

    #[test]
    fn alpha_range_enforced() {
        assert!(FieldModel::levy_sheet(1.0).is_err());
        assert!(FieldModel::levy_sheet(2.5).is_err());
        assert!(FieldModel::levy_sheet(2.0).is_ok());
    }
}
