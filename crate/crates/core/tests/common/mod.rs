//! Shared oracles for the integration and acceptance tests.
#![allow(dead_code)]

use alpha_heston::numerics::quadrature::{integrate, QuadOptions};
use alpha_heston::riccati::{solve_riccati, FreqTriple};
use alpha_heston::sde::ModelParams;
use alpha_heston::StabilityIndexF64;
use num_complex::Complex64 as C;

pub fn alpha(a: f64) -> StabilityIndexF64 {
    StabilityIndexF64::new(a).unwrap()
}

/// a = 5, b = 0.14, σ = 0.08, σ_N = 1, α = 1.26, V₀ = 0.03, ρ = 0, r = 0.
pub fn base_params() -> ModelParams<f64> {
    ModelParams { r: 0.0, a: 5.0, b: 0.14, sigma: 0.08, sigma_n: 1.0, alpha: alpha(1.26), rho: 0.0, s0: 1.0, v0: 0.03 }
}

/// Closed-form `(ψ(t), φ(t))` of the classical Heston Riccati system
/// `ψ' = ½(ξ₁² - ξ₁) + ξ₃ + (ρσξ₁ - a)ψ + ½σ_eff²ψ²`, `ψ(0) = ξ₂`,
/// `φ = rξ₁t + ab ∫ψ`, with the correlation term built from `sigma`.
pub fn heston_riccati(xi1: C, xi2: C, xi3: C, t: f64, p: &ModelParams<f64>, sigma_eff2: f64) -> (C, C) {
    let c0 = 0.5 * (xi1 * xi1 - xi1) + xi3;
    let c1 = p.rho * p.sigma * xi1 - p.a;
    let c2 = 0.5 * sigma_eff2;
    let mut d = (c1 * c1 - 4.0 * c0 * c2).sqrt();
    if d.re < 0.0 {
        d = -d;
    }
    let rm = (-c1 - d) / (2.0 * c2);
    let rp = (-c1 + d) / (2.0 * c2);
    let g = (xi2 - rm) / (xi2 - rp);
    let e = (-d * t).exp();
    let psi = (rm - rp * g * e) / (1.0 - g * e);
    let int_psi = rm * t - ((1.0 - g * e) / (1.0 - g)).ln() / c2;
    (psi, p.r * xi1 * t + p.a * p.b * int_psi)
}

/// `P(X > u) = ½ + (1/π) ∫_0^∞ Im(e^{-iωu} φ(ω))/ω dω` for a characteristic
/// function `φ`, truncated once `|φ(ω)|/ω` stays below `cut`.
pub fn gil_pelaez_tail(cf: impl Fn(f64) -> C, u: f64, cut: f64) -> f64 {
    let f = |w: f64| if w == 0.0 { 0.0 } else { (C::new(0.0, -w * u).exp() * cf(w)).im / w };
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 2000 };
    let (mut total, mut a, mut h) = (0.0, 0.0, 0.5);
    loop {
        total += integrate(f, a, a + h, opts).value;
        a += h;
        if cf(a).norm() / a < cut {
            break;
        }
        h = (h * 1.25).min(5.0);
    }
    0.5 + total / std::f64::consts::PI
}

/// Characteristic function of `V_t` under `V₀ = p.v0` via the Riccati solver.
pub fn cf_v(p: &ModelParams<f64>, t: f64) -> impl Fn(f64) -> C + '_ {
    move |w| {
        let xi = FreqTriple::new(C::new(0.0, 0.0), C::new(0.0, w), C::new(0.0, 0.0));
        solve_riccati(&xi, t, p, 1e-11).unwrap().transform(xi.xi1, 0.0, p.v0)
    }
}

/// Characteristic function of `-log(S_t/S₀)`.
pub fn cf_neg_log_s(p: &ModelParams<f64>, t: f64) -> impl Fn(f64) -> C + '_ {
    move |w| {
        let xi = FreqTriple::new(C::new(0.0, -w), C::new(0.0, 0.0), C::new(0.0, 0.0));
        solve_riccati(&xi, t, p, 1e-11).unwrap().transform(xi.xi1, 0.0, p.v0)
    }
}

/// `|x - y| ≤ rel · |y|`.
pub fn close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * y.abs()
}
