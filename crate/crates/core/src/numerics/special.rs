//! Gamma-family special functions in working precision.

use crate::real::{lit, Real};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum<T: Real>(x: T) -> T {
    let mut acc = lit::<T>(LANCZOS_COEF[0]);
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + lit::<T>(*c) / (x + lit(i as f64));
    }
    acc
}

/// Euler's Gamma function on the real line (poles return infinities or NaN).
pub fn gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        let pi = T::PI();
        pi / ((pi * x).sin() * gamma(T::one() - x))
    } else {
        let x = x - T::one();
        let t = x + lit(LANCZOS_G) + half;
        let sqrt_two_pi = (lit::<T>(2.0) * T::PI()).sqrt();
        sqrt_two_pi * t.powf(x + half) * (-t).exp() * lanczos_sum(x)
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        let pi = T::PI();
        (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x)
    } else {
        let x = x - T::one();
        let t = x + lit(LANCZOS_G) + half;
        half * (lit::<T>(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + lanczos_sum(x).ln()
    }
}

/// Upper incomplete gamma `Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt` for `s > 0`, `x ≥ 0`.
pub fn upper_gamma<T: Real>(s: T, x: T) -> T {
    debug_assert!(s > T::zero());
    if x <= T::zero() {
        return gamma(s);
    }
    let eps = T::epsilon();
    if x < s + T::one() {
        // series for the lower function
        let mut term = T::one() / s;
        let mut sum = term;
        let mut n = T::one();
        for _ in 0..10_000 {
            term = term * x / (s + n);
            sum = sum + term;
            if term.abs() < sum.abs() * eps {
                break;
            }
            n = n + T::one();
        }
        let lower = sum * (s * x.ln() - x).exp();
        gamma(s) - lower
    } else {
        // modified Lentz continued fraction
        let tiny = T::min_positive_value() / eps;
        let two = lit::<T>(2.0);
        let mut b = x + T::one() - s;
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        let mut i = T::one();
        for _ in 0..10_000 {
            let an = -i * (i - s);
            b = b + two;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = T::one() / d;
            let del = d * c;
            h = h * del;
            if (del - T::one()).abs() < eps {
                break;
            }
            i = i + T::one();
        }
        (s * x.ln() - x).exp() * h
    }
}

/// `Γ(s, x)` for `s ∈ (-1, 0)` and `x > 0`, through the recurrence
/// `Γ(s, x) = (Γ(s + 1, x) - x^s e^{-x}) / s`.
pub fn upper_gamma_negative<T: Real>(s: T, x: T) -> T {
    debug_assert!(s < T::zero() && s > -T::one() && x > T::zero());
    (upper_gamma(s + T::one(), x) - (s * x.ln() - x).exp()) / s
}
