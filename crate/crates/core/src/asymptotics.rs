//! Closed-form asymptotics: power-law tails of `V_t` and `-log S_t`,
//! small-ball probabilities of `V_t`, and implied volatility wing shapes.
//!
//! Every function returns the asymptotic equivalent (the right-hand side of a
//! `∼` relation), never an exact probability.

use crate::error::{domain, Error, Result};
use crate::levy::{self, psi_jump_part, StabilityIndex};
use crate::numerics::quadrature::{integrate, integrate_to_infinity, QuadOptions};
use crate::numerics::special::ln_gamma;
use crate::real::{lit, Real};
use crate::riccati::vbar;
use crate::sde::ModelParams;

/// `p_α(t) = (e^{-at} - e^{-αat}) / (a(α - 1))`.
pub fn p_alpha<T: Real>(t: T, a: T, alpha: StabilityIndex<T>) -> T {
    let al = alpha.value();
    if a == T::zero() {
        return t;
    }
    // e^{-at} (1 - e^{-(α-1)at}), written with expm1 to stay accurate for small t
    -(-a * t).exp() * (-(al - T::one()) * a * t).exp_m1() / (a * (al - T::one()))
}

/// `q_α(t) = b((1 - e^{-αat})/(αa) - p_α(t))`.
pub fn q_alpha<T: Real>(t: T, a: T, b: T, alpha: StabilityIndex<T>) -> T {
    let al = alpha.value();
    if a == T::zero() {
        return T::zero();
    }
    let first = -(-al * a * t).exp_m1() / (al * a);
    (b * (first - p_alpha(t, a, alpha))).max(T::zero())
}

fn jump_tail_constant<T: Real>(alpha: StabilityIndex<T>) -> Result<T> {
    if alpha.is_gaussian() {
        return Err(domain("power-law tails need alpha < 2"));
    }
    // -1 / (α Γ(-α) cos(πα/2)) = ν_α((1, ∞))
    levy::levy_tail_mass(alpha, T::one())
}

/// `P_x(V_t > u) ∼ -σ_N^α/(αΓ(-α)cos(πα/2)) (q_α(t) + p_α(t) x) u^{-α}`.
pub fn tail_v<T: Real>(u: T, t: T, x: T, p: &ModelParams<T>) -> Result<T> {
    let c = jump_tail_constant(p.alpha)?;
    if !(u > T::zero()) {
        return Err(domain("tail needs u > 0"));
    }
    let al = p.alpha.value();
    let weight = q_alpha(t, p.a, p.b, p.alpha) + p_alpha(t, p.a, p.alpha) * x;
    Ok(c * p.sigma_n.powf(al) * weight * u.powf(-al))
}

/// Correction integral `∫_{v}^∞ (z/Ψ(z) - 2/(σ²z)) dz` in the cancellation-free
/// form `-2(az + J(z)) / (σ² z Ψ(z))`, with `J` the jump part of `Ψ`.
fn small_ball_correction<T: Real>(v: T, sigma2: T, p: &ModelParams<T>) -> T {
    let jump_on = !p.alpha.is_gaussian() && p.sigma_n > T::zero();
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let f = |z: T| {
        let j = if jump_on { psi_jump_part(z, p.sigma_n, p.alpha) } else { T::zero() };
        let psi = p.a * z + half * sigma2 * z * z + j;
        -two * (p.a * z + j) / (sigma2 * z * psi)
    };
    integrate_to_infinity(f, v, QuadOptions::new(lit(1e-12), lit(1e-10))).value
}

/// Effective Brownian variance coefficient: `σ²`, or `σ² + 2σ_N²` at `α = 2`.
fn effective_sigma2<T: Real>(p: &ModelParams<T>) -> T {
    if p.alpha.is_gaussian() {
        p.sigma * p.sigma + lit::<T>(2.0) * p.sigma_n * p.sigma_n
    } else {
        p.sigma * p.sigma
    }
}

/// Natural log of the small-ball equivalent
/// `u^β v̄_t^β / Γ(1+β) exp(-x v̄_t - ab ∫_{v̄_t}^∞ (z/Ψ - 2/(σ²z)) dz)`, `β = 2ab/σ²`.
///
/// Works in logs because `u^β` underflows for the large `β` typical of
/// Feller-satisfying parameters.
pub fn log_small_ball_v_sigma_pos<T: Real>(u: T, t: T, x: T, p: &ModelParams<T>) -> Result<T> {
    if !(p.sigma > T::zero()) {
        return Err(domain("small-ball formula with Brownian part needs sigma > 0; use the sigma = 0 branch"));
    }
    if !(u > T::zero()) {
        return Err(domain("small ball needs u > 0"));
    }
    let s2 = effective_sigma2(p);
    let beta = lit::<T>(2.0) * p.a * p.b / s2;
    let vb = vbar(t, p)?;
    let corr = small_ball_correction(vb, s2, p);
    Ok(beta * (u * vb).ln() - ln_gamma(T::one() + beta) - x * vb - p.a * p.b * corr)
}

/// Small-ball equivalent of `P_x(V_t ≤ u)` for `σ > 0` (may underflow to 0;
/// see [`log_small_ball_v_sigma_pos`]).
pub fn small_ball_v_sigma_pos<T: Real>(u: T, t: T, x: T, p: &ModelParams<T>) -> Result<T> {
    log_small_ball_v_sigma_pos(u, t, x, p).map(|l| l.exp())
}

/// `log P_x(V_t ≤ u) ∼ -((α-1)/(2-α)) (-ab cos(πα/2))^{1/(α-1)} σ_N^{-α/(α-1)} u^{-(2-α)/(α-1)}`
/// for `σ = 0`; independent of `t` and `x`.
pub fn log_small_ball_v_sigma_zero<T: Real>(u: T, p: &ModelParams<T>) -> Result<T> {
    if p.sigma != T::zero() {
        return Err(domain("this small-ball branch needs sigma = 0"));
    }
    if p.alpha.is_gaussian() {
        return Err(domain("this small-ball branch needs alpha < 2"));
    }
    if !(u > T::zero()) {
        return Err(domain("small ball needs u > 0"));
    }
    let al = p.alpha.value();
    let one = T::one();
    let two = lit::<T>(2.0);
    let base = -p.a * p.b * (T::FRAC_PI_2() * al).cos();
    Ok(-((al - one) / (two - al))
        * base.powf(one / (al - one))
        * p.sigma_n.powf(-al / (al - one))
        * u.powf(-(two - al) / (al - one)))
}

/// `ι_α(t) = ∫_0^t (b(1 - e^{-as}) + x e^{-as}) (1 - e^{-a(t-s)})^α ds`.
pub fn iota_alpha<T: Real>(t: T, x: T, p: &ModelParams<T>) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(domain("iota needs t >= 0"));
    }
    let al = p.alpha.value();
    let f = |s: T| {
        let mean = -p.b * (-p.a * s).exp_m1() + x * (-p.a * s).exp();
        mean * (-(-p.a * (t - s)).exp_m1()).powf(al)
    };
    Ok(integrate(f, T::zero(), t, QuadOptions::new(lit(1e-12), lit(1e-12))).value)
}

/// `P_x(-log S_t > u) ∼ -(σ_N/(2a))^α ι_α(t)/(α cos(πα/2) Γ(-α)) u^{-α}`.
pub fn tail_log_s<T: Real>(u: T, t: T, x: T, p: &ModelParams<T>) -> Result<T> {
    let c = jump_tail_constant(p.alpha)?;
    if !(p.a > T::zero()) {
        return Err(domain("tail of -log S needs a > 0"));
    }
    if !(u > T::zero()) {
        return Err(domain("tail needs u > 0"));
    }
    let al = p.alpha.value();
    let scale = (p.sigma_n / (lit::<T>(2.0) * p.a)).powf(al);
    Ok(scale * iota_alpha(t, x, p)? * c * u.powf(-al))
}

/// `ψ(q) = 2 - 4(√(q² + q) - q)`, evaluated as `2 - 4q/(√(q²+q) + q)`.
pub fn lee_psi<T: Real>(q: T) -> Result<T> {
    if !(q >= T::zero()) {
        return Err(domain("Lee function needs q >= 0"));
    }
    if q.is_infinite() {
        return Ok(T::zero());
    }
    let four = lit::<T>(4.0);
    let d = (q * q + q).sqrt() + q;
    Ok(if d == T::zero() { lit(2.0) } else { lit::<T>(2.0) - four * q / d })
}

/// `2/T`, the maximal asset wing slope of `Σ²` against `|k|`.
pub fn asset_wing_slope<T: Real>(t: T) -> T {
    lit::<T>(2.0) / t
}

/// Two explicit terms of the asset left wing,
/// `Σ_S = √(2/T) (√(-k + L) - √L)` with `L = α log(-k) - ½ log log(-k)`.
pub fn asset_left_wing<T: Real>(k: T, t: T, alpha: StabilityIndex<T>) -> Result<T> {
    if !(k < -T::E()) {
        return Err(domain("asset left wing needs k < -e"));
    }
    let m = -k;
    let l = alpha.value() * m.ln() - lit::<T>(0.5) * m.ln().ln();
    Ok((lit::<T>(2.0) / t).sqrt() * ((m + l).sqrt() - l.sqrt()))
}

/// `Σ_V(T, k) ∼ √(ψ(α) k / T)` as `k → ∞`.
pub fn variance_right_wing<T: Real>(k: T, t: T, alpha: StabilityIndex<T>) -> Result<T> {
    if !(k > T::zero()) {
        return Err(domain("variance right wing needs k > 0"));
    }
    Ok((lee_psi(alpha.value())? * k / t).sqrt())
}

/// Variance left wing: `√(ψ(2ab/σ²)(-k)/T)` for `σ > 0`, and
/// `(-k) (log(e^k / P(e^k)))^{1/2} / √(2T)` for `σ = 0`, which needs the put
/// price `P(e^k) = E[(e^k - V_T)⁺]`.
pub fn variance_left_wing<T: Real>(k: T, t: T, p: &ModelParams<T>, put_price: Option<T>) -> Result<T> {
    if !(k < T::zero()) {
        return Err(domain("variance left wing needs k < 0"));
    }
    if p.sigma > T::zero() {
        let q = lit::<T>(2.0) * p.a * p.b / (p.sigma * p.sigma);
        return Ok((lee_psi(q)? * (-k) / t).sqrt());
    }
    let put = put_price.ok_or(Error::Missing("put price for the sigma = 0 left wing"))?;
    if !(put > T::zero() && put < k.exp()) {
        return Err(domain(format!("put price {put} must lie in (0, e^k)")));
    }
    Ok(-k * (k - put.ln()).sqrt() / (lit::<T>(2.0) * t).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params() -> ModelParams<f64> {
        ModelParams {
            r: 0.0,
            a: 5.0,
            b: 0.14,
            sigma: 0.08,
            sigma_n: 1.0,
            alpha: StabilityIndex::new(1.26).unwrap(),
            rho: 0.0,
            s0: 1.0,
            v0: 0.03,
        }
    }

    fn al(a: f64) -> StabilityIndex<f64> {
        StabilityIndex::new(a).unwrap()
    }

    #[test]
    fn coefficient_functions_at_origin_and_infinity() {
        let a = al(1.26);
        assert_eq!(p_alpha(0.0, 5.0, a), 0.0);
        assert_eq!(q_alpha(0.0, 5.0, 0.14, a), 0.0);
        assert!(p_alpha(50.0, 5.0, a) < 1e-100);
        assert!((q_alpha(50.0, 5.0, 0.14, a) - 0.14 / (1.26 * 5.0)).abs() < 1e-15);
        assert_eq!(q_alpha(3.0, 5.0, 0.0, a), 0.0);
        assert_eq!(iota_alpha(0.0, 0.3, &base_params()).unwrap(), 0.0);
        assert_eq!(iota_alpha(1.0, 0.0, &ModelParams { b: 0.0, ..base_params() }).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_match_definitions() {
        let (t, a, alpha): (f64, f64, f64) = (0.7, 5.0, 1.26);
        let p = ((-a * t).exp() - (-alpha * a * t).exp()) / (a * (alpha - 1.0));
        assert!((p_alpha(t, a, al(alpha)) - p).abs() < 1e-15);
        let q = 0.14 * ((1.0 - (-alpha * a * t).exp()) / (alpha * a) - p);
        assert!((q_alpha(t, a, 0.14, al(alpha)) - q).abs() < 1e-15);
    }

    #[test]
    fn continuity_towards_two() {
        let (t, a) = (1.0, 5.0);
        assert!((p_alpha(t, a, al(1.9999)) - p_alpha(t, a, al(2.0))).abs() < 1e-4);
        assert!((q_alpha(t, a, 0.14, al(1.9999)) - q_alpha(t, a, 0.14, al(2.0))).abs() < 1e-4);
        let p1 = ModelParams { alpha: al(1.9999), ..base_params() };
        let p2 = ModelParams { alpha: al(2.0), ..base_params() };
        assert!((iota_alpha(1.0, 0.03, &p1).unwrap() - iota_alpha(1.0, 0.03, &p2).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn tails_are_power_laws() {
        let p = base_params();
        let r = tail_v(2.0, 1.0, 0.03, &p).unwrap() / tail_v(1.0, 1.0, 0.03, &p).unwrap();
        assert!((r - 2f64.powf(-1.26)).abs() < 1e-14);
        let r = tail_log_s(6.0, 1.0, 0.03, &p).unwrap() / tail_log_s(3.0, 1.0, 0.03, &p).unwrap();
        assert!((r - 2f64.powf(-1.26)).abs() < 1e-14);
        assert!(tail_v(1.0, 1.0, 0.03, &ModelParams { alpha: al(2.0), ..p }).is_err());
        let expect = levy::levy_tail_mass(p.alpha, 1.0).unwrap()
            * (q_alpha(1.0, 5.0, 0.14, p.alpha) + p_alpha(1.0, 5.0, p.alpha) * 0.03);
        assert!((tail_v(1.0, 1.0, 0.03, &p).unwrap() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn iota_matches_written_form() {
        let p = base_params();
        let (t, x) = (1.0, 0.03);
        let f = |s: f64| (p.b * (1.0 - (-p.a * s).exp()) + x * (-p.a * s).exp()) * ((p.a * t).exp() - (p.a * s).exp()).powf(1.26);
        let raw = integrate(f, 0.0, t, QuadOptions::new(1e-14, 1e-13)).value * (-1.26 * p.a * t).exp();
        assert!((iota_alpha(t, x, &p).unwrap() - raw).abs() < 1e-12);
    }

    #[test]
    fn cir_small_ball_correction_closed_form() {
        // pure CIR: ∫_{v̄}^∞ (z/Ψ - 2/(σ²z)) dz = -(2/σ²) log(1 + 2a/(σ² v̄))
        let p = ModelParams { sigma_n: 0.0, sigma: 0.3, ..base_params() };
        let vb = vbar(0.8, &p).unwrap();
        let c = small_ball_correction(vb, 0.09, &p);
        let exact = -(2.0 / 0.09) * (1.0 + 2.0 * p.a / (0.09 * vb)).ln();
        assert!((c - exact).abs() < 1e-8 * exact.abs());
        // and the full CIR small-ball constant reduces to the gamma-law one
        let beta = 2.0 * p.a * p.b / 0.09;
        let t = 0.8;
        let ct = 0.09 * (1.0 - (-p.a * t).exp()) / (4.0 * p.a);
        let x = 0.05;
        let lam = x * (-p.a * t).exp() / ct;
        // P(V_t ≤ u) ~ (u/(2c))^{β} e^{-λ/2} / Γ(1+β) for the scaled noncentral chi-square law
        let log_exact = beta * (1.0 / (2.0 * ct)).ln() - lam / 2.0 - ln_gamma(1.0 + beta);
        let got = log_small_ball_v_sigma_pos(1.0, t, x, &p).unwrap();
        assert!((got - log_exact).abs() < 1e-7, "{got} vs {log_exact}");
    }

    #[test]
    fn small_ball_exponent() {
        let p = base_params();
        let l1 = log_small_ball_v_sigma_pos(1e-3, 1.0, 0.03, &p).unwrap();
        let l2 = log_small_ball_v_sigma_pos(1e-4, 1.0, 0.03, &p).unwrap();
        assert!(((l1 - l2) / 10f64.ln() - 218.75).abs() < 1e-9);
        assert!(small_ball_v_sigma_pos(0.5, 1.0, 0.03, &ModelParams { sigma: 0.0, ..p }).is_err());
    }

    #[test]
    fn sigma_zero_branch() {
        let p = ModelParams { sigma: 0.0, alpha: al(1.5), ..base_params() };
        let u = 0.01;
        let expect = -(p.a * p.b).powi(2) / (2.0 * p.sigma_n.powi(3) * u);
        assert!((log_small_ball_v_sigma_zero(u, &p).unwrap() - expect).abs() < 1e-12 * expect.abs());
        assert!(log_small_ball_v_sigma_zero(u, &base_params()).is_err());
        let q = ModelParams { sigma: 0.0, ..base_params() };
        let r = log_small_ball_v_sigma_zero(0.001, &q).unwrap() / log_small_ball_v_sigma_zero(0.01, &q).unwrap();
        assert!((r - 10f64.powf(0.74 / 0.26)).abs() < 1e-9 * r);
    }

    #[test]
    fn lee_function_shape() {
        assert_eq!(lee_psi(0.0).unwrap(), 2.0);
        assert!(lee_psi(1e12).unwrap() < 1e-11);
        assert!(lee_psi(-0.1).is_err());
        let mut prev = 2.0;
        for i in 1..=100 {
            let v = lee_psi(i as f64 * 0.37).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        assert!(lee_psi(1.26).unwrap() > lee_psi(218.75).unwrap());
    }

    #[test]
    fn wing_formulas() {
        assert_eq!(asset_wing_slope(1.0), 2.0);
        assert_eq!(asset_wing_slope(2.0), 1.0);
        let k = -1e8;
        let s = asset_left_wing(k, 1.0, al(1.26)).unwrap();
        assert!((s * s / -k - 2.0).abs() < 0.01);
        assert!(asset_left_wing(-10.0, 1.0, al(1.8)).unwrap() < asset_left_wing(-10.0, 1.0, al(1.2)).unwrap());
        assert!(asset_left_wing(-2.0, 1.0, al(1.5)).is_err());
        let v = variance_right_wing(4.0, 1.0, al(1.26)).unwrap();
        assert!((v - 2.0 * lee_psi(1.26f64).unwrap().sqrt()).abs() < 1e-15);
        assert!(variance_right_wing(4.0, 1.0, al(1.2)).unwrap() > v);
        let p = base_params();
        let l = variance_left_wing(-4.0, 1.0, &p, None).unwrap();
        assert!((l - (lee_psi(218.75f64).unwrap() * 4.0).sqrt()).abs() < 1e-15);
        let flat = ModelParams { sigma: 1e-6, ..p };
        assert!(variance_left_wing(-4.0, 1.0, &flat, None).unwrap() < 1e-5);
        let zero = ModelParams { sigma: 0.0, ..p };
        assert!(matches!(variance_left_wing(-4.0, 1.0, &zero, None), Err(Error::Missing(_))));
        assert!(variance_left_wing(-4.0, 1.0, &zero, Some(1e-5)).unwrap() > 0.0);
    }
}
