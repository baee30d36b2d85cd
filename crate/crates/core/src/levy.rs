//! Spectrally positive α-stable ingredients: Lévy measure, tail integrals,
//! branching mechanism and increment sampling.
//!
//! The Lévy measure is `ν_α(dζ) = K_α ζ^{-1-α} dζ` on `ζ > 0` with
//! `K_α = -1 / (cos(πα/2) Γ(-α)) > 0` for `α ∈ (1, 2)`. At `α = 2` the jump
//! part degenerates into a Brownian term and every function here takes an
//! explicit Gaussian branch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::special::gamma;
use crate::real::{lit, Real};

/// Stability index `α ∈ (1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StabilityIndex<T>(T);

impl<T: Real> StabilityIndex<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha > T::one() && alpha <= lit(2.0) {
            Ok(Self(alpha))
        } else {
            Err(domain(format!("stability index must lie in (1, 2], got {alpha}")))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// `α = 2`: the Gaussian limit.
    #[inline]
    pub fn is_gaussian(self) -> bool {
        self.0 == lit(2.0)
    }

    /// Re-checks the range; useful after deserialization.
    pub fn validate(self) -> Result<Self> {
        Self::new(self.0)
    }
}

/// Coefficients of the branching mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingParams<T> {
    pub a: T,
    pub sigma: T,
    pub sigma_n: T,
    pub alpha: StabilityIndex<T>,
}

/// Jump threshold in variance units (`y`) and in driver units (`ȳ = y/σ_N`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpThreshold<T> {
    pub y: T,
    pub y_bar: T,
}

impl<T: Real> JumpThreshold<T> {
    pub fn new(y: T, sigma_n: T) -> Result<Self> {
        if !(y > T::zero()) || !(sigma_n > T::zero()) {
            return Err(domain("jump threshold needs y > 0 and sigma_N > 0"));
        }
        Ok(Self { y, y_bar: y / sigma_n })
    }
}

fn stable_only<T: Real>(alpha: StabilityIndex<T>, what: &str) -> Result<T> {
    if alpha.is_gaussian() {
        Err(domain(format!("{what} is undefined at alpha = 2 (no jump part)")))
    } else {
        Ok(alpha.value())
    }
}

/// `K_α = -1 / (cos(πα/2) Γ(-α))`, the Lévy measure constant.
pub fn levy_constant<T: Real>(alpha: StabilityIndex<T>) -> Result<T> {
    let a = stable_only(alpha, "Levy measure")?;
    Ok(-T::one() / ((T::FRAC_PI_2() * a).cos() * gamma(-a)))
}

/// Density of `ν_α` at `ζ > 0`.
pub fn levy_density<T: Real>(alpha: StabilityIndex<T>, zeta: T) -> Result<T> {
    let k = levy_constant(alpha)?;
    if !(zeta > T::zero()) {
        return Err(domain("Levy density needs zeta > 0"));
    }
    Ok(k * zeta.powf(-T::one() - alpha.value()))
}

/// `ν_α((ȳ, ∞)) = K_α ȳ^{-α} / α`.
pub fn levy_tail_mass<T: Real>(alpha: StabilityIndex<T>, y_bar: T) -> Result<T> {
    let k = levy_constant(alpha)?;
    if !(y_bar > T::zero()) {
        return Err(domain("tail mass needs y_bar > 0"));
    }
    let a = alpha.value();
    Ok(k * y_bar.powf(-a) / a)
}

/// `Θ(α, ȳ) = ∫_ȳ^∞ ζ ν_α(dζ) = (2/π) α Γ(α-1) sin(πα/2) ȳ^{1-α}`.
///
/// Returns 0 at `α = 2`, where the jump part is absent.
pub fn theta_compensator<T: Real>(alpha: StabilityIndex<T>, y_bar: T) -> Result<T> {
    if !(y_bar > T::zero()) {
        return Err(domain("compensator needs y_bar > 0"));
    }
    if alpha.is_gaussian() {
        return Ok(T::zero());
    }
    let a = alpha.value();
    Ok(lit::<T>(2.0) / T::PI() * a * gamma(a - T::one()) * (T::FRAC_PI_2() * a).sin() * y_bar.powf(T::one() - a))
}

/// `∫_0^ε̄ ζ² ν_α(dζ) = K_α ε̄^{2-α} / (2-α)`, the small-jump variance per unit time.
pub fn small_jump_second_moment<T: Real>(alpha: StabilityIndex<T>, eps_bar: T) -> Result<T> {
    let k = levy_constant(alpha)?;
    if !(eps_bar > T::zero()) {
        return Err(domain("small-jump moment needs eps_bar > 0"));
    }
    let a = alpha.value();
    Ok(k * eps_bar.powf(lit::<T>(2.0) - a) / (lit::<T>(2.0) - a))
}

/// Jump part of the branching mechanism, `-σ_N^α q^α / cos(πα/2)`
/// (`σ_N² q²` at `α = 2`).
pub fn psi_jump_part<T: Real>(q: T, sigma_n: T, alpha: StabilityIndex<T>) -> T {
    if alpha.is_gaussian() {
        sigma_n * sigma_n * q * q
    } else {
        let a = alpha.value();
        -(sigma_n * q).powf(a) / (T::FRAC_PI_2() * a).cos()
    }
}

/// Branching mechanism `Ψ_α(q) = a q + σ² q²/2 - σ_N^α q^α / cos(πα/2)`.
pub fn psi_alpha<T: Real>(q: T, p: &BranchingParams<T>) -> Result<T> {
    if q < T::zero() || q.is_nan() {
        return Err(domain(format!("branching mechanism needs q >= 0, got {q}")));
    }
    Ok(psi_unchecked(q, p))
}

#[inline]
pub(crate) fn psi_unchecked<T: Real>(q: T, p: &BranchingParams<T>) -> T {
    p.a * q + lit::<T>(0.5) * p.sigma * p.sigma * q * q + psi_jump_part(q, p.sigma_n, p.alpha)
}

/// Increment of the driver `Z` over `dt`: a totally skewed α-stable variate
/// with `E[e^{-qZ}] = exp(-dt q^α / cos(πα/2))` and zero mean.
///
/// In the Samorodnitsky–Taqqu parametrisation this is `S_α(dt^{1/α}, 1, 0)`,
/// drawn with the Chambers–Mallows–Stuck transform. At `α = 2` the result is
/// `√2 · N(0, dt)`.
pub fn sample_stable_increment<T: Real, R: Rng + ?Sized>(alpha: StabilityIndex<T>, dt: T, rng: &mut R) -> T {
    let two = lit::<T>(2.0);
    if alpha.is_gaussian() {
        return (two * dt).sqrt() * T::standard_normal(rng);
    }
    let a = alpha.value();
    let tan = (T::FRAC_PI_2() * a).tan();
    let b = tan.atan() / a;
    let s = (T::one() + tan * tan).powf(T::one() / (two * a));
    let v = T::PI() * (T::open01(rng) - lit(0.5));
    let w = T::standard_exp(rng);
    let x = s * (a * (v + b)).sin() / v.cos().powf(T::one() / a)
        * ((v - a * (v + b)).cos() / w).powf((T::one() - a) / a);
    dt.powf(T::one() / a) * x
}

/// `(ã, b̃) = (a + σ_N Θ(α, ȳ), ab / ã)`.
pub fn effective_params<T: Real>(a: T, b: T, sigma_n: T, alpha: StabilityIndex<T>, y_bar: T) -> Result<(T, T)> {
    let theta = theta_compensator(alpha, y_bar)?;
    let a_tilde = a + sigma_n * theta;
    let b_tilde = if a_tilde > T::zero() { a * b / a_tilde } else { b };
    Ok((a_tilde, b_tilde))
}

/// Feller-type inaccessibility of 0: `2ab ≥ σ²` for `α < 2`,
/// `2ab ≥ σ² + 2σ_N²` at `α = 2`.
pub fn feller_check<T: Real>(a: T, b: T, sigma: T, sigma_n: T, alpha: StabilityIndex<T>) -> bool {
    let two = lit::<T>(2.0);
    let diffusion = if alpha.is_gaussian() { sigma * sigma + two * sigma_n * sigma_n } else { sigma * sigma };
    two * a * b >= diffusion
}
