//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite and
//! semi-infinite intervals.

use crate::real::{lit, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits of the adaptive rule.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self { abs_tol: lit(1e-10), rel_tol: lit(1e-8), max_intervals: 2000 }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn new(abs_tol: T, rel_tol: T) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

/// Integral value with the summed Kronrod error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    /// `false` when the interval budget ran out before the tolerance was met.
    pub converged: bool,
}

fn kronrod<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center);
    let mut res_k = fc * lit(WGK[7]);
    let mut res_g = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = h * lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        res_k = res_k + lit::<T>(WGK[j]) * pair;
        if j % 2 == 1 {
            res_g = res_g + lit::<T>(WG[j / 2]) * pair;
        }
    }
    (res_k * h, ((res_k - res_g) * h).abs())
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, opts: QuadOptions<T>) -> QuadResult<T> {
    if a == b {
        return QuadResult { value: T::zero(), error: T::zero(), converged: true };
    }
    let (v0, e0) = kronrod(&mut f, a, b);
    let mut parts = vec![(a, b, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    let half = lit::<T>(0.5);
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= tol {
            return QuadResult { value: total, error: err, converged: true };
        }
        if parts.len() >= opts.max_intervals || !total.is_finite() {
            return QuadResult { value: total, error: err, converged: false };
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].3.partial_cmp(&parts[j].3).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(0);
        let (lo, hi, v, e) = parts.swap_remove(worst);
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval cannot be split further in this precision
            parts.push((lo, hi, v, e));
            return QuadResult { value: total, error: err, converged: false };
        }
        let (vl, el) = kronrod(&mut f, lo, mid);
        let (vr, er) = kronrod(&mut f, mid, hi);
        total = total - v + vl + vr;
        err = err - e + el + er;
        parts.push((lo, mid, vl, el));
        parts.push((mid, hi, vr, er));
        if err < T::zero() {
            err = parts.iter().map(|p| p.3).sum();
        }
    }
}

/// Integral of `f` over `[a, ∞)` for integrands with at most power-law decay.
///
/// The range is mapped by `x = a e^w` (or split at 1 when `a = 0`) and
/// integrated in consecutive `w`-chunks until a chunk becomes negligible.
pub fn integrate_to_infinity<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, opts: QuadOptions<T>) -> QuadResult<T> {
    if a <= T::zero() {
        let head = integrate(&mut f, a, T::one(), opts);
        let tail = integrate_to_infinity(f, T::one(), opts);
        return QuadResult {
            value: head.value + tail.value,
            error: head.error + tail.error,
            converged: head.converged && tail.converged,
        };
    }
    let width = lit::<T>(4.0);
    let w_max = T::max_value().ln() - a.ln().max(T::zero()) - lit(2.0);
    let mut total = T::zero();
    let mut err = T::zero();
    let mut converged = true;
    let mut w0 = T::zero();
    let mut quiet_chunks = 0;
    let chunk_opts = QuadOptions { abs_tol: opts.abs_tol * lit(0.01), ..opts };
    while w0 < w_max {
        let w1 = (w0 + width).min(w_max);
        let chunk = integrate(
            |w: T| {
                let x = a * w.exp();
                let y = f(x) * x;
                if y.is_finite() { y } else { T::zero() }
            },
            w0,
            w1,
            chunk_opts,
        );
        total = total + chunk.value;
        err = err + chunk.error;
        converged &= chunk.converged;
        let small = chunk.value.abs() <= lit::<T>(1e-3) * opts.abs_tol.max(opts.rel_tol * total.abs());
        quiet_chunks = if small { quiet_chunks + 1 } else { 0 };
        if quiet_chunks >= 2 {
            return QuadResult { value: total, error: err, converged };
        }
        w0 = w1;
    }
    QuadResult { value: total, error: err, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| 3.0 * x * x, 0.0, 2.0, QuadOptions::default());
        assert!((r.value - 8.0).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, QuadOptions::new(1e-12, 1e-10));
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn slow_power_tail() {
        // ∫_1^∞ x^{-1.26} dx = 1/0.26
        let r = integrate_to_infinity(|x: f64| x.powf(-1.26), 1.0, QuadOptions::new(1e-12, 1e-10));
        assert!(((r.value - 1.0 / 0.26) * 0.26).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn from_zero_to_infinity() {
        let r = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, QuadOptions::new(1e-13, 1e-11));
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_precision() {
        let r = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, QuadOptions::new(1e-6, 1e-5));
        assert!((r.value - 2.0).abs() < 1e-5);
    }
}
