//! Esscher-type change from the pricing measure to a physical measure.
//!
//! The Brownian drivers are shifted by `η V`, `η̄ V` and the Lévy measure is
//! tempered by `e^{-θζ}`. The result stays in the same CBI class with new
//! `(a, b)`; volatility parameters are unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::levy::{levy_density, StabilityIndex};
use crate::real::Real;
use crate::sde::{simulate_v_path, ModelParams, SimGrid, VPath};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsscherParams<T> {
    pub eta: T,
    pub eta_bar: T,
    /// Tempering rate of the jump measure, `θ ≥ 0`.
    pub theta: T,
}

impl<T: Real> EsscherParams<T> {
    pub fn new(eta: T, eta_bar: T, theta: T) -> Result<Self> {
        if !(theta >= T::zero()) || !eta.is_finite() || !eta_bar.is_finite() || !theta.is_finite() {
            return Err(domain(format!("need finite eta, eta_bar and theta >= 0, got ({eta}, {eta_bar}, {theta})")));
        }
        Ok(EsscherParams { eta, eta_bar, theta })
    }

    pub fn identity() -> Self {
        EsscherParams { eta: T::zero(), eta_bar: T::zero(), theta: T::zero() }
    }
}

/// Physical-measure model: CBI parameters plus the tempering rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalModel<T> {
    pub params: ModelParams<T>,
    pub tempering: T,
    /// `(μ⁰, μ¹)` with price drift `μ^P_t = μ⁰ + μ¹ V_t`.
    pub drift: (T, T),
}

impl<T: Real> PhysicalModel<T> {
    /// Simulates `V` under the physical measure. Only the untempered case is
    /// supported: tempered-stable jumps are not sampled.
    pub fn simulate_v_path<R: rand::Rng + ?Sized>(&self, g: &SimGrid<T>, rng: &mut R) -> Result<VPath<T>> {
        if self.tempering > T::zero() {
            return Err(Error::NotSupported("simulation under a tempered jump measure"));
        }
        simulate_v_path(&self.params, g, rng)
    }
}

/// `ση + ασ_N θ^{α-1}/cos(πα/2)`; the jump term vanishes at `α = 2` or `θ = 0`.
fn premium_coefficient<T: Real>(q: &ModelParams<T>, e: &EsscherParams<T>) -> T {
    let al = q.alpha.value();
    let jump = if q.alpha.is_gaussian() || e.theta == T::zero() {
        T::zero()
    } else {
        al * q.sigma_n * e.theta.powf(al - T::one()) / (T::FRAC_PI_2() * al).cos()
    };
    q.sigma * e.eta + jump
}

/// Maps pricing-measure parameters to physical ones:
/// `a^P = a - ση - ασ_N θ^{α-1}/cos(πα/2)`, `b^P = ab/a^P`.
pub fn to_physical<T: Real>(q: &ModelParams<T>, e: &EsscherParams<T>) -> Result<PhysicalModel<T>> {
    q.validate()?;
    EsscherParams::new(e.eta, e.eta_bar, e.theta)?;
    let a_p = q.a - premium_coefficient(q, e);
    if !(a_p > T::zero()) {
        return Err(domain(format!("change of measure gives a_P = {a_p}, must be > 0")));
    }
    let rho_bar = (T::one() - q.rho * q.rho).sqrt();
    let params = ModelParams { a: a_p, b: q.a * q.b / a_p, ..*q };
    Ok(PhysicalModel { params, tempering: e.theta, drift: (q.r, -(q.rho * e.eta + rho_bar * e.eta_bar)) })
}

/// `(λ_S, λ_V) = (-(ρη + √(1-ρ²)η̄) v, -(ση + ασ_Nθ^{α-1}/cos(πα/2)) v)`.
pub fn risk_premiums<T: Real>(v: T, q: &ModelParams<T>, e: &EsscherParams<T>) -> Result<(T, T)> {
    if !(v >= T::zero()) {
        return Err(domain("risk premiums need v >= 0"));
    }
    let rho_bar = (T::one() - q.rho * q.rho).sqrt();
    Ok((-(q.rho * e.eta + rho_bar * e.eta_bar) * v, -premium_coefficient(q, e) * v))
}

/// `e^{-θζ} ν_α(dζ)/dζ`.
pub fn tempered_density<T: Real>(zeta: T, alpha: StabilityIndex<T>, theta: T) -> Result<T> {
    if !(zeta > T::zero()) {
        return Err(domain("tempered density needs zeta > 0"));
    }
    if !(theta >= T::zero()) {
        return Err(domain("tempering needs theta >= 0"));
    }
    Ok((-theta * zeta).exp() * levy_density(alpha, zeta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::{integrate_to_infinity, QuadOptions};
    use crate::rng::RandomStream;

    fn q() -> ModelParams<f64> {
        ModelParams {
            r: 0.01,
            a: 5.0,
            b: 0.14,
            sigma: 0.08,
            sigma_n: 1.0,
            alpha: StabilityIndex::new(1.26).unwrap(),
            rho: -0.5,
            s0: 1.0,
            v0: 0.03,
        }
    }

    #[test]
    fn identity_tilt() {
        let m = to_physical(&q(), &EsscherParams::identity()).unwrap();
        assert_eq!(m.params, q());
        assert_eq!(m.tempering, 0.0);
        assert_eq!(risk_premiums(0.2, &q(), &EsscherParams::identity()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn tempering_raises_mean_reversion() {
        let e = EsscherParams::new(0.0, 0.0, 0.1).unwrap();
        let m = to_physical(&q(), &e).unwrap();
        assert!(m.params.a > 5.0);
        let expect = 5.0 - 1.26 * 0.1f64.powf(0.26) / (std::f64::consts::FRAC_PI_2 * 1.26).cos();
        assert!((m.params.a - expect).abs() < 1e-14);
    }

    #[test]
    fn product_and_vol_invariance() {
        let e = EsscherParams::new(-0.5, 0.2, 0.1).unwrap();
        let m = to_physical(&q(), &e).unwrap();
        assert!((m.params.a * m.params.b - 5.0 * 0.14).abs() < 1e-14);
        assert_eq!(m.params.sigma, 0.08);
        assert_eq!(m.params.sigma_n, 1.0);
        assert!(m.params.validate().is_ok());
        let (_, lv) = risk_premiums(1.0, &q(), &e).unwrap();
        assert!((m.params.a - 5.0 - lv).abs() < 1e-14);
        let (ls, _) = risk_premiums(1.0, &q(), &e).unwrap();
        assert!((m.drift.1 - ls).abs() < 1e-15);
    }

    #[test]
    fn invalid_tilt_rejected() {
        let e = EsscherParams::new(100.0, 0.0, 0.0).unwrap();
        assert!(to_physical(&q(), &e).is_err());
        assert!(EsscherParams::new(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn premiums_linear_and_signed() {
        let e = EsscherParams::new(-0.7, 0.3, 0.0).unwrap();
        let (s1, v1) = risk_premiums(0.1, &q(), &e).unwrap();
        let (s2, v2) = risk_premiums(0.2, &q(), &e).unwrap();
        assert_eq!((2.0 * s1, 2.0 * v1), (s2, v2));
        assert!((v1 - 0.08 * 0.7 * 0.1).abs() < 1e-15);
        assert!(v1 > 0.0);
        for eta in [-1.0, -0.1, 0.1, 1.0] {
            for theta in [0.0, 0.01, 0.5] {
                let e = EsscherParams::new(eta, 0.0, theta).unwrap();
                let c = premium_coefficient(&q(), &e);
                let (_, lv) = risk_premiums(1.0, &q(), &e).unwrap();
                assert_eq!(lv.signum(), -c.signum());
            }
        }
    }

    #[test]
    fn tempered_density_ratio() {
        let al = StabilityIndex::new(1.26).unwrap();
        for z in [0.01f64, 0.5, 3.0] {
            assert_eq!(tempered_density(z, al, 0.0).unwrap(), levy_density(al, z).unwrap());
            let r = tempered_density(z, al, 0.4).unwrap() / levy_density(al, z).unwrap();
            assert!((r - (-0.4 * z).exp()).abs() < 1e-15);
        }
        assert!(tempered_density(0.0, al, 0.1).is_err());
        // ζ ν^P(dζ) is not integrable at 0 for α > 1; the second moment is
        // finite only thanks to the tempering: K Γ(2-α) θ^{α-2}
        let theta = 0.3f64;
        let m = integrate_to_infinity(|z| z * z * tempered_density(z, al, theta).unwrap(), 0.0, QuadOptions::new(1e-12, 1e-10));
        let k = crate::levy::levy_constant(al).unwrap();
        let exact = k * crate::numerics::special::gamma(2.0 - 1.26) * theta.powf(1.26 - 2.0);
        assert!((m.value - exact).abs() < 1e-6 * exact, "{} {}", m.value, exact);
        let big = integrate_to_infinity(|z| z * tempered_density(z, al, theta).unwrap(), 1.0, QuadOptions::new(1e-12, 1e-10));
        assert!(big.converged && big.value.is_finite() && big.value > 0.0);
    }

    #[test]
    fn tempered_simulation_not_supported() {
        let g = SimGrid::new(1.0, 100, 1e-2).unwrap();
        let mut rng = RandomStream::new(1);
        let m = to_physical(&q(), &EsscherParams::new(0.0, 0.0, 0.1).unwrap()).unwrap();
        assert!(matches!(m.simulate_v_path(&g, &mut rng), Err(Error::NotSupported(_))));
        let m = to_physical(&q(), &EsscherParams::new(-0.2, 0.0, 0.0).unwrap()).unwrap();
        m.simulate_v_path(&g, &mut rng).unwrap();
    }
}
