//! Bracketed scalar root finding.

use crate::real::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("no sign change on [{a}, {b}]")]
    NotBracketed { a: f64, b: f64 },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T, max_iter: usize) -> Result<T, RootError> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(RootError::NotBracketed { a: a.as_f64(), b: b.as_f64() });
    }
    let two = lit::<T>(2.0);
    let half = lit::<T>(0.5);
    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + half * tol;
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = lit::<T>(3.0) * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol1 { b + d } else { b + tol1.copysign(xm) };
        fb = f(b);
    }
    Err(RootError::NoConvergence { iterations: max_iter })
}

/// Grows `[lo, hi]` geometrically away from `lo` until `f` changes sign.
/// Returns the bracket, or `None` after `max_doublings`.
pub fn expand_upward<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, max_doublings: usize) -> Option<(T, T)> {
    let f_lo = f(lo);
    let mut a = lo;
    let mut b = hi;
    for _ in 0..max_doublings {
        let fb = f(b);
        if (fb > T::zero()) != (f_lo > T::zero()) || fb == T::zero() {
            return Some((a, b));
        }
        a = b;
        b = b + (b - lo) * lit(2.0);
    }
    None
}
