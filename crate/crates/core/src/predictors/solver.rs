//! Damped Newton minimization of the convex scale objectives.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::{dot, norm2, Scalar};
use crate::stable::spow;

pub(crate) trait Objective<T: Scalar> {
    fn dim(&self) -> usize;
    /// `phi(y + t d) - phi(y)`, summed so that tiny changes are not lost
    /// against the size of `phi`.
    fn change(&self, y: &[T], d: &[T], t: T) -> T;
    /// Value, gradient and a positive semidefinite Hessian approximation.
    fn derivatives(&self, y: &[T]) -> (T, Vec<T>, Matrix<T>);
}

/// `phi(y) = sum_k w_k |a_k . y - r_k|^alpha`.
pub(crate) struct LpObjective<T> {
    pub a: Matrix<T>,
    pub r: Vec<T>,
    pub w: Vec<T>,
    pub alpha: T,
}

impl<T: Scalar> LpObjective<T> {
    fn residual(&self, k: usize, y: &[T]) -> T {
        dot(self.a.row(k), y) - self.r[k]
    }
}

impl<T: Scalar> Objective<T> for LpObjective<T> {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn change(&self, y: &[T], d: &[T], t: T) -> T {
        (0..self.a.rows()).fold(T::zero(), |acc, k| {
            let e = self.residual(k, y);
            let step = t * dot(self.a.row(k), d);
            acc + self.w[k] * power_change(e, step, self.alpha)
        })
    }

    fn derivatives(&self, y: &[T]) -> (T, Vec<T>, Matrix<T>) {
        let n = self.dim();
        let alpha = self.alpha;
        // |e|^{alpha-2} is unbounded at e = 0; the floor keeps the Hessian
        // finite without affecting value or gradient.
        let floor = T::lit(1e-30).max(T::min_positive_value().sqrt())
            * self.r.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let mut phi = T::zero();
        let mut g = vec![T::zero(); n];
        let mut h = Matrix::zeros(n, n);
        for k in 0..self.a.rows() {
            let e = self.residual(k, y);
            let ae = e.abs();
            let row = self.a.row(k);
            if ae > T::zero() {
                phi = phi + self.w[k] * ae.powf(alpha);
                let s = alpha * self.w[k] * spow(e, alpha - T::one());
                for (gi, &ai) in g.iter_mut().zip(row) {
                    *gi = *gi + s * ai;
                }
            }
            let c = alpha * (alpha - T::one()) * self.w[k] * ae.max(floor).powf(alpha - T::lit(2.0));
            for i in 0..n {
                if row[i] == T::zero() {
                    continue;
                }
                let ci = c * row[i];
                for j in 0..=i {
                    h[(i, j)] = h[(i, j)] + ci * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        (phi, g, h)
    }
}

/// `phi(y) = Q(y)^{alpha/2}` with `Q(y) = (y'Gy + 2h'y + c) / 2`.
pub(crate) struct EllipticObjective<T> {
    pub g: Matrix<T>,
    pub h: Vec<T>,
    pub c: T,
    pub alpha: T,
}

impl<T: Scalar> EllipticObjective<T> {
    fn q_and_grad(&self, y: &[T]) -> (T, Vec<T>) {
        let gy = self.g.mul_vec(y);
        let q = (dot(y, &gy) + T::lit(2.0) * dot(&self.h, y) + self.c) / T::lit(2.0);
        let dq = gy.iter().zip(&self.h).map(|(&a, &b)| a + b).collect();
        (q.max(T::zero()), dq)
    }
}

impl<T: Scalar> Objective<T> for EllipticObjective<T> {
    fn dim(&self) -> usize {
        self.h.len()
    }

    fn change(&self, y: &[T], d: &[T], t: T) -> T {
        let (q, dq) = self.q_and_grad(y);
        let gd = self.g.mul_vec(d);
        let dq_change = t * dot(&dq, d) + t * t * dot(d, &gd) / T::lit(2.0);
        let half = self.alpha / T::lit(2.0);
        if q > T::zero() && (q + dq_change) > T::zero() {
            q.powf(half) * (half * (dq_change / q).ln_1p()).exp_m1()
        } else {
            (q + dq_change).max(T::zero()).powf(half) - q.powf(half)
        }
    }

    fn derivatives(&self, y: &[T]) -> (T, Vec<T>, Matrix<T>) {
        let n = self.dim();
        let half = self.alpha / T::lit(2.0);
        let (q, dq) = self.q_and_grad(y);
        let q = q.max(T::min_positive_value());
        let s = half * q.powf(half - T::one());
        let g = dq.iter().map(|&d| s * d).collect();
        let t = half * (half - T::one()) * q.powf(half - T::lit(2.0));
        let h = Matrix::from_fn(n, n, |i, j| s * self.g[(i, j)] + t * dq[i] * dq[j]);
        (q.powf(half), g, h)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct NewtonSettings<T> {
    /// Gradient tolerance relative to `1 + phi`.
    pub gradient_tol: T,
    pub max_iterations: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Minimum<T> {
    pub y: Vec<T>,
    pub value: T,
    pub iterations: usize,
}

/// Newton steps on a regularized Hessian with Armijo backtracking. Stops
/// when the gradient meets the tolerance and the step has become negligible,
/// or when no further decrease is possible with an already small gradient.
pub(crate) fn minimize<T: Scalar>(
    obj: &impl Objective<T>,
    start: Vec<T>,
    settings: NewtonSettings<T>,
) -> Result<Minimum<T>> {
    let mut y = start;
    let mut last_step = T::infinity();
    let step_tol = T::lit(1e-12).max(T::tolerance_floor());
    let loose = T::lit(1e-6).max(settings.gradient_tol);
    for it in 0..settings.max_iterations {
        let (phi, g, h) = obj.derivatives(&y);
        let gnorm = norm2(&g);
        let ynorm = norm2(&y);
        let tight = gnorm <= settings.gradient_tol * (T::one() + phi);
        let stalled = last_step <= step_tol * (T::one() + ynorm);
        // At the floating-point floor the gradient of near-zero residual
        // terms cannot shrink further; a stalled iterate with a small
        // gradient is accepted and its gradient reported.
        if stalled && (tight || gnorm <= loose * (T::one() + phi)) {
            return Ok(Minimum {
                y,
                value: phi,
                iterations: it,
            });
        }
        if gnorm == T::zero() {
            return Ok(Minimum {
                y,
                value: phi,
                iterations: it,
            });
        }
        let d = newton_direction(&h, &g);
        let slope = dot(&g, &d);
        let (d, slope) = if slope < T::zero() {
            (d, slope)
        } else {
            let d: Vec<T> = g.iter().map(|&v| -v).collect();
            (d, -gnorm * gnorm)
        };
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let delta = obj.change(&y, &d, t);
            if delta <= T::lit(1e-4) * t * slope && delta < T::zero() {
                accepted = Some(y.iter().zip(&d).map(|(&a, &b)| a + t * b).collect());
                break;
            }
            t = t / T::lit(2.0);
        }
        match accepted {
            Some(next) => {
                last_step = t * norm2(&d);
                y = next;
            }
            None => {
                // No representable decrease along the direction: at the
                // floating-point floor of the objective.
                if gnorm <= loose * (T::one() + phi) || tight {
                    return Ok(Minimum {
                        y,
                        value: phi,
                        iterations: it,
                    });
                }
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: gnorm.as_f64(),
                });
            }
        }
    }
    let (phi, g, _) = obj.derivatives(&y);
    let gnorm = norm2(&g);
    if gnorm <= settings.gradient_tol * (T::one() + phi) {
        return Ok(Minimum {
            y,
            value: phi,
            iterations: settings.max_iterations,
        });
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iterations,
        residual: gnorm.as_f64(),
    })
}

/// `|e + s|^alpha - |e|^alpha` without cancellation when `s` is small
/// relative to `e`.
fn power_change<T: Scalar>(e: T, s: T, alpha: T) -> T {
    if s == T::zero() {
        return T::zero();
    }
    let ratio = s / e;
    if e != T::zero() && ratio > -T::one() {
        e.abs().powf(alpha) * (alpha * ratio.ln_1p()).exp_m1()
    } else {
        (e + s).abs().powf(alpha) - e.abs().powf(alpha)
    }
}

fn newton_direction<T: Scalar>(h: &Matrix<T>, g: &[T]) -> Vec<T> {
    let n = g.len();
    let scale = (0..n).fold(T::zero(), |m, i| m.max(h[(i, i)].abs()));
    let mut mu = T::zero();
    for _ in 0..30 {
        if let Ok(c) = Cholesky::new(h, mu) {
            let d = c.solve(g);
            if d.iter().all(|v| v.is_finite()) {
                return d.into_iter().map(|v| -v).collect();
            }
        }
        mu = if mu == T::zero() {
            T::epsilon() * scale.max(T::one()) * T::lit(16.0)
        } else {
            mu * T::lit(16.0)
        };
    }
    g.iter().map(|&v| -v).collect()
}
