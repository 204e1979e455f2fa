//! Univariate stable laws: parameters, signed powers, Chambers–Mallows–Stuck
//! sampling and absolute-moment constants.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{LazyLock, Mutex};

use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Distance from 1 below which the stability index is treated as exactly 1.
pub const ALPHA_ONE_SNAP: f64 = 1.0e-10;

/// Parameters of the law S_alpha(sigma, beta, mu).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableParams<T> {
    alpha: T,
    sigma: T,
    beta: T,
    mu: T,
}

impl<T: Scalar> StableParams<T> {
    pub fn new(alpha: T, sigma: T, beta: T, mu: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha <= T::lit(2.0)) {
            return Err(invalid("alpha", alpha.as_f64(), "a value in (0, 2]"));
        }
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(invalid("sigma", sigma.as_f64(), "a finite value >= 0"));
        }
        if !(beta >= -T::one() && beta <= T::one()) {
            return Err(invalid("beta", beta.as_f64(), "a value in [-1, 1]"));
        }
        if !mu.is_finite() {
            return Err(invalid("mu", mu.as_f64(), "a finite value"));
        }
        Ok(Self {
            alpha,
            sigma,
            beta,
            mu,
        })
    }

    /// Symmetric law S_alpha(sigma, 0, 0).
    pub fn symmetric(alpha: T, sigma: T) -> Result<Self> {
        Self::new(alpha, sigma, T::zero(), T::zero())
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn sigma(&self) -> T {
        self.sigma
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn mu(&self) -> T {
        self.mu
    }
}

/// `|a|^p * sign(a)`. Rejects `a = 0` with a negative exponent.
pub fn signed_power<T: Scalar>(a: T, p: T) -> Result<T> {
    if a == T::zero() {
        if p < T::zero() {
            return Err(Error::Domain(format!(
                "signed power of zero with negative exponent {p}"
            )));
        }
        return Ok(T::zero());
    }
    Ok(spow(a, p))
}

/// Unchecked signed power for `p > 0`, used on hot paths.
#[inline]
pub(crate) fn spow<T: Scalar>(a: T, p: T) -> T {
    if a == T::zero() {
        T::zero()
    } else if p == T::one() {
        a
    } else {
        a.abs().powf(p).copysign(a)
    }
}

/// One draw from S_alpha(sigma, beta, mu) by the Chambers–Mallows–Stuck
/// transform of a uniform angle and a unit exponential.
pub fn sample_stable<T: Scalar>(params: &StableParams<T>, rng: &mut RngStream) -> T {
    let sigma = params.sigma.as_f64();
    let mu = params.mu.as_f64();
    if sigma == 0.0 {
        return params.mu;
    }
    let x = standard_cms(params.alpha.as_f64(), params.beta.as_f64(), rng);
    let alpha = params.alpha.as_f64();
    let value = if (alpha - 1.0).abs() < ALPHA_ONE_SNAP {
        sigma * x + 2.0 / PI * params.beta.as_f64() * sigma * sigma.ln() + mu
    } else {
        sigma * x + mu
    };
    T::lit(value)
}

/// Draw from S_alpha(1, beta, 0); consumes exactly one uniform and one exponential.
pub(crate) fn standard_cms(alpha: f64, beta: f64, rng: &mut RngStream) -> f64 {
    let v = PI * (rng.open01() - 0.5);
    let w = rng.exp1();
    if (alpha - 1.0).abs() < ALPHA_ONE_SNAP {
        let shifted = FRAC_PI_2 + beta * v;
        return 2.0 / PI * (shifted * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / shifted).ln());
    }
    let zeta = beta * (PI * alpha / 2.0).tan();
    let b = zeta.atan() / alpha;
    let s = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));
    let arg = alpha * (v + b);
    s * arg.sin() / v.cos().powf(1.0 / alpha)
        * ((v - arg).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Law of the positive mixing variable of a sub-Gaussian vector:
/// S_{alpha/2}((cos(pi*alpha/4))^{2/alpha}, 1, 0).
pub fn subgaussian_a_params<T: Scalar>(alpha: T) -> Result<StableParams<T>> {
    if !(alpha > T::one() && alpha < T::lit(2.0)) {
        return Err(invalid("alpha", alpha.as_f64(), "a value in (1, 2)"));
    }
    let a = alpha.as_f64();
    let scale = (PI * a / 4.0).cos().powf(2.0 / a);
    StableParams::new(alpha / T::lit(2.0), T::lit(scale), T::one(), T::zero())
}

/// One draw of the totally skewed positive mixing variable A.
pub fn sample_subgaussian_a<T: Scalar>(alpha: T, rng: &mut RngStream) -> Result<T> {
    let params = subgaussian_a_params(alpha)?;
    Ok(sample_stable(&params, rng))
}

static MOMENT_CACHE: LazyLock<Mutex<HashMap<(u64, u64), f64>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// `c_{alpha,0}(p) = (E|xi|^p)^{1/p}` for `xi ~ S_alpha(1, 0, 0)`, `0 < p < alpha`.
///
/// Evaluated by integrating the Chambers–Mallows–Stuck representation: the
/// exponential factor contributes `Gamma(1 + p(alpha-1)/alpha)` in closed form
/// and the angular factor is a one-dimensional integral with an integrable
/// endpoint singularity, handled by tanh-sinh quadrature. Results are cached.
pub fn moment_constant<T: Scalar>(alpha: T, p: T) -> Result<T> {
    let a = alpha.as_f64();
    let p = p.as_f64();
    if !(a > 0.0 && a <= 2.0) {
        return Err(invalid("alpha", a, "a value in (0, 2]"));
    }
    if !(p > 0.0) {
        return Err(invalid("p", p, "a positive moment order"));
    }
    if a < 2.0 && p >= a {
        return Err(Error::Domain(format!(
            "E|X|^p is infinite for p = {p} >= alpha = {a}"
        )));
    }
    let key = (a.to_bits(), p.to_bits());
    if let Some(&c) = MOMENT_CACHE.lock().expect("moment cache").get(&key) {
        return Ok(T::lit(c));
    }
    let c = absolute_moment(a, p).powf(1.0 / p);
    MOMENT_CACHE.lock().expect("moment cache").insert(key, c);
    Ok(T::lit(c))
}

fn absolute_moment(alpha: f64, p: f64) -> f64 {
    // V = pi/2 - u; the integrand is even in V so only [0, pi/2] is needed.
    let angular = |u: f64| {
        let v = FRAC_PI_2 - u;
        (alpha * v).sin().abs().powf(p)
            * u.sin().powf(-p / alpha)
            * ((1.0 - alpha) * v).cos().powf(p * (1.0 - alpha) / alpha)
    };
    let integral = tanh_sinh(angular, FRAC_PI_2, 1.0e-14);
    gamma(1.0 + p * (alpha - 1.0) / alpha) * 2.0 / PI * integral
}

/// Tanh-sinh quadrature of `f` over `[0, len]`, tolerant of an integrable
/// singularity at the left endpoint. Abscissas near 0 are formed directly so
/// they keep full relative precision.
fn tanh_sinh(f: impl Fn(f64) -> f64, len: f64, rel_tol: f64) -> f64 {
    const T_MAX: f64 = 4.5;
    let node = |t: f64| -> Option<(f64, f64)> {
        let s = FRAC_PI_2 * t.sinh();
        let cosh_s = s.cosh();
        if !cosh_s.is_finite() {
            return None;
        }
        // 1 + tanh(s) and its derivative, computed without cancellation.
        let one_plus_x = 2.0 / (1.0 + (-2.0 * s).exp());
        let u = 0.5 * len * one_plus_x;
        let weight = 0.5 * len * FRAC_PI_2 * t.cosh() / (cosh_s * cosh_s);
        if u <= 0.0 || u >= len || weight == 0.0 {
            return None;
        }
        Some((u, weight))
    };
    let eval = |t: f64| node(t).map_or(0.0, |(u, w)| w * f(u));

    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= T_MAX {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..12 {
        h *= 0.5;
        // Only the odd multiples of the new step are new nodes.
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h;
        if (next - estimate).abs() <= rel_tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}
