//! Affine transform layer: generalized Riccati equations for the joint
//! Laplace transform of `(log S_T, V_T, ∫_0^T V ds)`, the branching ODE for
//! the Laplace transform of `V_t`, the minimal solution `v̄_t` and moment
//! domains.
//!
//! The joint transform is
//! `E[exp(ξ₁ log S_T + ξ₂ V_T + ξ₃ ∫V)] = exp(ξ₁ log S₀ + ψ(T) V₀ + φ(T))`
//! with `∂_t ψ = R(ξ₁, ψ, ξ₃)`, `∂_t φ = F(ξ₁, ψ)`, `ψ(0) = ξ₂`, `φ(0) = 0`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::levy::psi_unchecked;
use crate::numerics::ode::{self, OdeOptions};
use crate::numerics::quadrature::{integrate_to_infinity, QuadOptions};
use crate::numerics::roots::brent;
use crate::real::{lit, Real};
use crate::sde::ModelParams;

/// Frequencies for log-price, variance and integrated variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqTriple<T> {
    pub xi1: Complex<T>,
    pub xi2: Complex<T>,
    pub xi3: Complex<T>,
}

impl<T: Real> FreqTriple<T> {
    pub fn new(xi1: Complex<T>, xi2: Complex<T>, xi3: Complex<T>) -> Self {
        Self { xi1, xi2, xi3 }
    }

    /// All three frequencies real.
    pub fn real(xi1: T, xi2: T, xi3: T) -> Self {
        Self::new(Complex::new(xi1, T::zero()), Complex::new(xi2, T::zero()), Complex::new(xi3, T::zero()))
    }

    fn is_real(&self) -> bool {
        self.xi1.im == T::zero() && self.xi2.im == T::zero() && self.xi3.im == T::zero()
    }

    /// `ξ₁ ∈ iℝ` or `ξ₁ ∈ [0, 1]`, and `Re ξ₂, Re ξ₃ ≤ 0`.
    pub fn is_admissible(&self) -> bool {
        let xi1_ok = self.xi1.re == T::zero()
            || (self.xi1.im == T::zero() && self.xi1.re >= T::zero() && self.xi1.re <= T::one());
        xi1_ok && self.xi2.re <= T::zero() && self.xi3.re <= T::zero()
    }
}

/// `(ψ(T), φ(T))` with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSolution<T> {
    pub psi_t: Complex<T>,
    pub phi_t: Complex<T>,
    pub n_steps_used: usize,
    pub est_error: T,
}

impl<T: Real> RiccatiSolution<T> {
    /// `exp(ξ₁ log S₀ + ψ V₀ + φ)`.
    pub fn transform(&self, xi1: Complex<T>, log_s0: T, v0: T) -> Complex<T> {
        (xi1 * log_s0 + self.psi_t * v0 + self.phi_t).exp()
    }
}

fn has_jump_power<T: Real>(p: &ModelParams<T>) -> bool {
    !p.alpha.is_gaussian() && p.sigma_n > T::zero()
}

#[inline]
fn principal_pow<T: Real>(z: Complex<T>, a: T) -> Complex<T> {
    if z.re == T::zero() && z.im == T::zero() {
        Complex::new(T::zero(), T::zero())
    } else {
        z.powf(a)
    }
}

pub(crate) fn r_unchecked<T: Real>(xi1: Complex<T>, psi: Complex<T>, xi3: Complex<T>, p: &ModelParams<T>) -> Complex<T> {
    let half = lit::<T>(0.5);
    let mut r = (xi1 * xi1 - xi1) * half + xi1 * psi * (p.rho * p.sigma) + psi * psi * (half * p.sigma * p.sigma)
        - psi * p.a
        + xi3;
    if p.sigma_n > T::zero() {
        if p.alpha.is_gaussian() {
            r = r + psi * psi * (p.sigma_n * p.sigma_n);
        } else {
            let a = p.alpha.value();
            let c = -p.sigma_n.powf(a) / (T::FRAC_PI_2() * a).cos();
            r = r + principal_pow(-psi, a) * c;
        }
    }
    r
}

/// `R(ξ₁, ψ, ξ₃) = ½(ξ₁² - ξ₁) + ρσξ₁ψ + ½σ²ψ² - aψ - σ_N^α(-ψ)^α/cos(πα/2) + ξ₃`.
pub fn r_op<T: Real>(xi: &FreqTriple<T>, psi: Complex<T>, p: &ModelParams<T>) -> Result<Complex<T>> {
    if psi.re > T::zero() {
        return Err(domain(format!("R needs Re(psi) <= 0, got {}", psi.re)));
    }
    Ok(r_unchecked(xi.xi1, psi, xi.xi3, p))
}

/// `F(ξ₁, ψ) = r ξ₁ + a b ψ`.
pub fn f_op<T: Real>(xi: &FreqTriple<T>, psi: Complex<T>, p: &ModelParams<T>) -> Complex<T> {
    xi.xi1 * p.r + psi * (p.a * p.b)
}

/// Magnitude of `ψ` treated as moment explosion.
pub const BLOWUP_CEILING: f64 = 1e8;

/// Integrates the generalized Riccati system to `t_end` with local error
/// tolerance `tol`.
///
/// For real frequencies with an active stable jump part, leaving `ψ ≤ 0`
/// means the transform is infinite from that time on (heavy right tail of the
/// jumps), and is reported as [`Error::BlowUp`]. Complex solutions leaving the
/// half plane are reported as [`Error::Domain`].
pub fn solve_riccati<T: Real>(xi: &FreqTriple<T>, t_end: T, p: &ModelParams<T>, tol: T) -> Result<RiccatiSolution<T>> {
    if !(t_end > T::zero()) {
        return Err(domain("maturity must be positive"));
    }
    if !(tol > T::zero()) {
        return Err(domain("tolerance must be positive"));
    }
    if xi.xi2.re > T::zero() || xi.xi3.re > T::zero() {
        return Err(domain("Re(xi2) and Re(xi3) must be nonpositive"));
    }
    let real_regime = xi.is_real();
    if !real_regime && xi.xi1.re != T::zero() {
        return Err(domain("xi1 must be purely imaginary or real"));
    }
    let jumps = has_jump_power(p);
    let slack = T::epsilon() * lit(16.0);
    // ψ > 0 is only meaningful when R is polynomial (no α-power term)
    let restrict = jumps || !real_regime;
    let valid = |y: &[Complex<T>; 2]| !restrict || y[0].re <= slack * (T::one() + y[0].norm());
    let rhs = |_t: T, y: &[Complex<T>; 2]| {
        let psi = y[0];
        if restrict && psi.re > slack * (T::one() + psi.norm()) {
            return None;
        }
        let psi_c = if restrict && psi.re > T::zero() { Complex::new(T::zero(), psi.im) } else { psi };
        Some([r_unchecked(xi.xi1, psi_c, xi.xi3, p), f_op(xi, psi_c, p)])
    };
    let opts = OdeOptions { rtol: tol, atol: tol * lit(1e-2), ceiling: lit(BLOWUP_CEILING), ..OdeOptions::default() };
    let zero = Complex::new(T::zero(), T::zero());
    match ode::integrate(rhs, valid, T::zero(), [xi.xi2, zero], t_end, &opts) {
        Ok(out) => Ok(RiccatiSolution {
            psi_t: out.y[0],
            phi_t: out.y[1],
            n_steps_used: out.accepted,
            est_error: out.est_error,
        }),
        Err(crate::numerics::OdeError::Domain { t }) if real_regime => Err(Error::BlowUp { t }),
        Err(e) => Err(e.into()),
    }
}

/// `E_x[e^{-λ V_t}] = exp(-x v_t(λ) - ab ∫_0^t v_s(λ) ds)` with
/// `∂_t v = -Ψ_α(v)`, `v_0 = λ`.
pub fn laplace_v<T: Real>(lambda: T, t: T, x: T, p: &ModelParams<T>) -> Result<T> {
    let (v, iv) = branching_flow(lambda, t, p)?;
    Ok((-x * v - p.a * p.b * iv).exp())
}

/// `(v_t(λ), ∫_0^t v_s(λ) ds)`.
pub fn branching_flow<T: Real>(lambda: T, t: T, p: &ModelParams<T>) -> Result<(T, T)> {
    if !(lambda >= T::zero()) {
        return Err(domain("lambda must be nonnegative"));
    }
    if !(t >= T::zero()) {
        return Err(domain("t must be nonnegative"));
    }
    if lambda == T::zero() {
        return Ok((T::zero(), T::zero()));
    }
    let bp = p.branching();
    let rhs = |_t: T, y: &[T; 2]| {
        if y[0] < T::zero() {
            None
        } else {
            Some([-psi_unchecked(y[0], &bp), y[0]])
        }
    };
    let opts = OdeOptions {
        rtol: lit(1e-12),
        atol: lit(1e-14),
        h_init: Some((t * lit(1e-6)).min(T::one() / (psi_unchecked(lambda, &bp) / lambda + T::one()) * lit(0.01))),
        ceiling: T::max_value(),
        max_steps: 2_000_000,
        ..OdeOptions::default()
    };
    let out = ode::integrate(rhs, |y: &[T; 2]| y[0] >= T::zero(), T::zero(), [lambda, T::zero()], t, &opts)?;
    Ok((out.y[0], out.y[1]))
}

fn grey_check<T: Real>(p: &ModelParams<T>) -> Result<()> {
    if p.sigma == T::zero() && p.sigma_n == T::zero() {
        Err(Error::Divergence("Grey's condition fails: the integral of 1/Psi diverges at infinity".into()))
    } else {
        Ok(())
    }
}

/// `∫_v^∞ dz / Ψ_α(z)`.
pub fn inverse_psi_integral<T: Real>(v: T, p: &ModelParams<T>) -> Result<T> {
    grey_check(p)?;
    let bp = p.branching();
    let r = integrate_to_infinity(|z| T::one() / psi_unchecked(z, &bp), v, QuadOptions::new(lit(1e-15), lit(1e-13)));
    Ok(r.value)
}

/// Minimal solution `v̄_t` of `∂_t v = -Ψ_α(v)` with `v̄_{0+} = ∞`, found by
/// solving `t = ∫_{v̄_t}^∞ dz / Ψ_α(z)` for `v̄_t`.
pub fn vbar<T: Real>(t: T, p: &ModelParams<T>) -> Result<T> {
    if !(t > T::zero()) {
        return Err(domain("vbar needs t > 0"));
    }
    grey_check(p)?;
    let g = |w: T| inverse_psi_integral(w.exp(), p).map(|x| x - t).unwrap_or(T::nan());
    // G is decreasing in w = log v; walk outwards from w = 0 until the sign flips
    let step = lit::<T>(2.0);
    let (mut lo, mut hi) = (T::zero(), T::zero());
    let g0 = g(T::zero());
    if g0 > T::zero() {
        for _ in 0..200 {
            lo = hi;
            hi = hi + step;
            if g(hi) <= T::zero() {
                break;
            }
        }
    } else {
        for _ in 0..200 {
            hi = lo;
            lo = lo - step;
            if g(lo) >= T::zero() {
                break;
            }
        }
    }
    let w = brent(g, lo, hi, lit(1e-14), 200)?;
    Ok(w.exp())
}

/// Maximal moment domain of `S_T`, with the interior equilibria `w(ξ₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentDomainS<T> {
    pub lo: T,
    pub hi: T,
}

/// `{q : E[S_T^q] < ∞} = [0, 1]` for every `T > 0`; needs `a > σρ`.
pub fn moment_domain_s<T: Real>(p: &ModelParams<T>) -> Result<MomentDomainS<T>> {
    if !(p.a > p.sigma * p.rho) {
        return Err(Error::Domain(format!("moment domain needs a > sigma*rho ({} <= {})", p.a, p.sigma * p.rho)));
    }
    Ok(MomentDomainS { lo: T::zero(), hi: T::one() })
}

/// Nonpositive root `w` of `R(ξ₁, w) = 0` for real `ξ₁ ∈ [0, 1]`.
pub fn equilibrium_w<T: Real>(xi1: T, p: &ModelParams<T>) -> Result<T> {
    moment_domain_s(p)?;
    if !(xi1 >= T::zero() && xi1 <= T::one()) {
        return Err(domain("w(xi1) is defined for xi1 in [0, 1]"));
    }
    let r = |w: T| r_unchecked(Complex::new(xi1, T::zero()), Complex::new(w, T::zero()), Complex::new(T::zero(), T::zero()), p).re;
    if r(T::zero()) >= T::zero() {
        return Ok(T::zero());
    }
    let mut lo = -T::one();
    for _ in 0..200 {
        if r(lo) > T::zero() {
            break;
        }
        lo = lo * lit(2.0);
    }
    Ok(brent(r, lo, T::zero(), lit(1e-15), 200)?)
}

/// `(-2ab/σ², α)`, the moment domain of `V_t`; `-∞` on the left when `σ = 0`.
pub fn moment_domain_v<T: Real>(p: &ModelParams<T>) -> (T, T) {
    let lo = if p.sigma == T::zero() {
        T::neg_infinity()
    } else {
        -lit::<T>(2.0) * p.a * p.b / (p.sigma * p.sigma)
    };
    (lo, p.alpha.value())
}
