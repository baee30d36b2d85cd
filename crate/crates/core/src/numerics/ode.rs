//! Dormand–Prince 5(4) integrator for small real or complex systems.

use num_complex::Complex;

use crate::real::{count, lit, Real};

/// State vector the integrator can operate on.
pub trait OdeState<T: Real>: Copy {
    /// `self + h * k`.
    fn axpy(self, h: T, k: &Self) -> Self;
    /// Scaled RMS norm of `err` relative to the magnitude of `y0`, `y1`.
    fn error_norm(err: &Self, y0: &Self, y1: &Self, atol: T, rtol: T) -> T;
    fn max_abs(&self) -> T;
    fn is_finite(&self) -> bool;
}

impl<T: Real, const N: usize> OdeState<T> for [T; N] {
    fn axpy(mut self, h: T, k: &Self) -> Self {
        for (s, ki) in self.iter_mut().zip(k) {
            *s = *s + h * *ki;
        }
        self
    }

    fn error_norm(err: &Self, y0: &Self, y1: &Self, atol: T, rtol: T) -> T {
        let mut acc = T::zero();
        for i in 0..N {
            let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
            let r = err[i] / sc;
            acc = acc + r * r;
        }
        (acc / count(N)).sqrt()
    }

    fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl<T: Real, const N: usize> OdeState<T> for [Complex<T>; N] {
    fn axpy(mut self, h: T, k: &Self) -> Self {
        for (s, ki) in self.iter_mut().zip(k) {
            *s = *s + *ki * h;
        }
        self
    }

    fn error_norm(err: &Self, y0: &Self, y1: &Self, atol: T, rtol: T) -> T {
        let mut acc = T::zero();
        for i in 0..N {
            let sc = atol + rtol * y0[i].norm().max(y1[i].norm());
            let r = err[i].norm() / sc;
            acc = acc + r * r;
        }
        (acc / count(N)).sqrt()
    }

    fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Initial step; `None` lets the solver pick `|t1 - t0| / 100`.
    pub h_init: Option<T>,
    pub h_min: T,
    pub max_steps: usize,
    /// Any state component exceeding this magnitude aborts with [`OdeError::Blowup`].
    pub ceiling: T,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self {
            rtol: lit(1e-10),
            atol: lit(1e-12),
            h_init: None,
            h_min: lit(1e-14),
            max_steps: 200_000,
            ceiling: lit(1e8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("solution exceeded the ceiling at t = {t}")]
    Blowup { t: f64 },
    #[error("solution left the admissible domain at t = {t}")]
    Domain { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOutcome<T, S> {
    pub y: S,
    pub accepted: usize,
    pub rejected: usize,
    /// Sum of the accepted local error estimates (unscaled max-norm).
    pub est_error: T,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combine<T: Real, S: OdeState<T>>(y: S, h: T, coef: &[f64], k: &[S]) -> S {
    let mut out = y;
    for (c, ki) in coef.iter().zip(k) {
        if *c != 0.0 {
            out = out.axpy(h * lit(*c), ki);
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`.
///
/// `f` returns `None` when `y` lies outside the domain of the vector field and
/// `valid` rejects candidate states; both shrink the step. If the step cannot
/// be shrunk further the error is [`OdeError::Domain`].
pub fn integrate<T, S, F, V>(
    mut f: F,
    valid: V,
    t0: T,
    y0: S,
    t1: T,
    opts: &OdeOptions<T>,
) -> Result<OdeOutcome<T, S>, OdeError>
where
    T: Real,
    S: OdeState<T>,
    F: FnMut(T, &S) -> Option<S>,
    V: Fn(&S) -> bool,
{
    let span = t1 - t0;
    let mut out = OdeOutcome { y: y0, accepted: 0, rejected: 0, est_error: T::zero() };
    if span <= T::zero() {
        return Ok(out);
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h_init.unwrap_or(span / lit(100.0)).min(span);
    let h_min = opts.h_min * span.max(T::one());
    let mut k1 = f(t, &y).ok_or(OdeError::Domain { t: t.as_f64() })?;
    let mut domain_hit = false;
    let fifth = lit::<T>(0.2);
    while t < t1 {
        if out.accepted + out.rejected >= opts.max_steps {
            return Err(OdeError::MaxSteps { t: t.as_f64() });
        }
        if h < h_min {
            return Err(if domain_hit {
                OdeError::Domain { t: t.as_f64() }
            } else {
                OdeError::StepUnderflow { t: t.as_f64() }
            });
        }
        let last = t + h >= t1;
        let h_step = if last { t1 - t } else { h };
        let attempt = (|| {
            let k2 = f(t + lit::<T>(C[1]) * h_step, &combine(y, h_step, &A2, &[k1]))?;
            let k3 = f(t + lit::<T>(C[2]) * h_step, &combine(y, h_step, &A3, &[k1, k2]))?;
            let k4 = f(t + lit::<T>(C[3]) * h_step, &combine(y, h_step, &A4, &[k1, k2, k3]))?;
            let k5 = f(t + lit::<T>(C[4]) * h_step, &combine(y, h_step, &A5, &[k1, k2, k3, k4]))?;
            let k6 = f(t + h_step, &combine(y, h_step, &A6, &[k1, k2, k3, k4, k5]))?;
            let y_new = combine(y, h_step, &B, &[k1, k2, k3, k4, k5, k6]);
            if !y_new.is_finite() || !valid(&y_new) {
                return None;
            }
            let k7 = f(t + h_step, &y_new)?;
            Some((y_new, k7, [k1, k2, k3, k4, k5, k6, k7]))
        })();
        let Some((y_new, k7, ks)) = attempt else {
            domain_hit = true;
            out.rejected += 1;
            h = h_step * lit(0.25);
            continue;
        };
        let err_vec = combine(y_new.axpy(-T::one(), &y_new), h_step, &E, &ks);
        let err = S::error_norm(&err_vec, &y, &y_new, opts.atol, opts.rtol);
        if err <= T::one() {
            t = if last { t1 } else { t + h_step };
            y = y_new;
            k1 = k7;
            out.accepted += 1;
            out.est_error = out.est_error + err_vec.max_abs();
            domain_hit = false;
            if y.max_abs() > opts.ceiling {
                return Err(OdeError::Blowup { t: t.as_f64() });
            }
            let fac = if err == T::zero() { lit(5.0) } else { lit::<T>(0.9) * err.powf(-fifth) };
            h = h_step * fac.min(lit(5.0)).max(lit(0.2));
        } else {
            out.rejected += 1;
            let fac = lit::<T>(0.9) * err.powf(-fifth);
            h = h_step * fac.max(lit(0.1));
        }
    }
    out.y = y;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let r = integrate(|_, y: &[f64; 1]| Some([-2.0 * y[0]]), |_| true, 0.0, [1.0], 3.0, &OdeOptions::default())
            .unwrap();
        assert!((r.y[0] - (-6.0_f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn complex_rotation() {
        let i = Complex::new(0.0, 1.0);
        let r = integrate(
            |_, y: &[Complex<f64>; 1]| Some([i * y[0]]),
            |_| true,
            0.0,
            [Complex::new(1.0, 0.0)],
            std::f64::consts::PI,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((r.y[0] - Complex::new(-1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn riccati_blowup_is_reported() {
        // y' = 1 + y², y(0) = 0 ⇒ tan(t), explodes at π/2
        let e = integrate(|_, y: &[f64; 1]| Some([1.0 + y[0] * y[0]]), |_| true, 0.0, [0.0], 2.0, &OdeOptions::default())
            .unwrap_err();
        match e {
            OdeError::Blowup { t } => assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn domain_exit_is_reported() {
        let e = integrate(|_, _y: &[f64; 1]| Some([1.0]), |y| y[0] <= 0.5, 0.0, [0.0], 1.0, &OdeOptions::default())
            .unwrap_err();
        assert!(matches!(e, OdeError::Domain { .. }));
    }
}
