//! Cluster decomposition of the variance process.
//!
//! Above a threshold `y` the variance splits into a truncated fundamental
//! process `V^(y)` (jumps capped at `y`, effective `(ã, b̃)`), mother jumps
//! arriving with intensity `ν_α((ȳ, ∞)) V^(y)` and Pareto(α, y) sizes, and one
//! independent branching (CB) cluster per mother jump started at its size:
//! `V_t = V^(y)_t + Σ_n u^(n)_{t - T_n}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::levy::{levy_tail_mass, psi_unchecked, JumpThreshold, StabilityIndex};
use crate::mc::par_map;
use crate::numerics::quadrature::{integrate_to_infinity, QuadOptions};
use crate::numerics::special::upper_gamma_negative;
use crate::real::{count, lit, Real};
use crate::rng::RandomStream;
use crate::sde::{simulate_branching_from, simulate_with_kernel, Jump, Kernel, ModelParams, SimGrid, VPath};
use crate::stats::{chi_square_gof, TestResult};

/// Cluster paths are stepped at most this many mean-reversion times.
pub const CLUSTER_HORIZON_RATES: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig<T> {
    pub threshold: JumpThreshold<T>,
    pub grid: SimGrid<T>,
}

impl<T: Real> ClusterConfig<T> {
    pub fn new(y: T, sigma_n: T, grid: SimGrid<T>) -> Result<Self> {
        let c = ClusterConfig { threshold: JumpThreshold::new(y, sigma_n)?, grid };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.threshold.y > self.grid.small_jump_cutoff) {
            return Err(Error::Config(format!(
                "threshold y = {} must exceed the small-jump cutoff {}",
                self.threshold.y, self.grid.small_jump_cutoff
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotherJump<T> {
    pub time: T,
    pub size: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord<T> {
    pub mother: MotherJump<T>,
    /// CB path from `mother.time` on a grid aligned with the fundamental's.
    pub path: VPath<T>,
    /// Time from the mother jump to absorption; `None` if the path was capped.
    pub duration: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition<T> {
    pub fundamental: VPath<T>,
    pub clusters: Vec<ClusterRecord<T>>,
    pub composed: VPath<T>,
}

impl<T: Real> Decomposition<T> {
    /// Value of cluster `c` at grid index `i` (0 before its start and after
    /// absorption).
    pub fn cluster_value_at(c: &ClusterRecord<T>, i: usize, dt: T) -> T {
        let Some(first) = first_index(&c.path, dt) else {
            return T::zero();
        };
        if i < first {
            return T::zero();
        }
        c.path.values.get(i - first + 1).copied().unwrap_or(T::zero())
    }

    /// Clusters that were stepped to the horizon without absorbing.
    pub fn capped(&self) -> usize {
        self.clusters.iter().filter(|c| c.duration.is_none()).count()
    }
}

/// Grid index of the second stored time of a cluster path.
fn first_index<T: Real>(path: &VPath<T>, dt: T) -> Option<usize> {
    path.times.get(1).and_then(|t| (*t / dt).round().to_usize())
}

fn check_kernel<T: Real>(p: &ModelParams<T>, c: &ClusterConfig<T>, k: &Kernel<T>) -> Result<()> {
    p.validate()?;
    c.validate()?;
    k.check_step(c.grid.dt())
}

/// Simulates the truncated process `V^(y)` on the configured grid.
pub fn simulate_fundamental<T: Real, R: rand::Rng + ?Sized>(
    p: &ModelParams<T>,
    c: &ClusterConfig<T>,
    rng: &mut R,
) -> Result<VPath<T>> {
    let kernel = Kernel::truncated(p, c.grid.small_jump_cutoff, c.threshold.y)?;
    check_kernel(p, c, &kernel)?;
    Ok(simulate_with_kernel(kernel, p.v0, &c.grid, rng))
}

/// Pareto(α, y) variate `y U^{-1/α}`.
pub fn sample_jump_size<T: Real, R: rand::Rng + ?Sized>(alpha: StabilityIndex<T>, y: T, rng: &mut R) -> T {
    y * T::open01(rng).powf(-T::one() / alpha.value())
}

/// Mother-jump arrival times by thinning a homogeneous process of rate
/// `ν((ȳ, ∞)) max V^(y)` against the left-endpoint value of each grid step.
fn sample_arrivals<T: Real, R: rand::Rng + ?Sized>(fundamental: &VPath<T>, tail: T, rng: &mut R) -> Vec<T> {
    let n = fundamental.values.len().saturating_sub(1);
    if n == 0 || !(tail > T::zero()) {
        return Vec::new();
    }
    let t0 = fundamental.times[0];
    let t_end = fundamental.times[n];
    let dt = (t_end - t0) / count(n);
    let vmax = fundamental.values[..n].iter().fold(T::zero(), |m, &v| m.max(v));
    if !(vmax > T::zero()) {
        return Vec::new();
    }
    let rate = tail * vmax;
    let mut out = Vec::new();
    let mut t = t0;
    loop {
        t = t + T::standard_exp(rng) / rate;
        if t >= t_end {
            break;
        }
        let i = ((t - t0) / dt).floor().to_usize().unwrap_or(0).min(n - 1);
        if T::open01(rng) * vmax < fundamental.values[i] {
            out.push(t);
        }
    }
    out
}

/// Mother jumps on `[0, T]` given the fundamental path. Arrival times use
/// `rng`; Pareto sizes use `marks`.
pub fn sample_mother_jumps<T: Real, R: rand::Rng + ?Sized, M: rand::Rng + ?Sized>(
    fundamental: &VPath<T>,
    c: &ClusterConfig<T>,
    alpha: StabilityIndex<T>,
    rng: &mut R,
    marks: &mut M,
) -> Result<Vec<MotherJump<T>>> {
    if alpha.is_gaussian() {
        return Ok(Vec::new());
    }
    let tail = levy_tail_mass(alpha, c.threshold.y_bar)?;
    Ok(sample_arrivals(fundamental, tail, rng)
        .into_iter()
        .map(|time| MotherJump { time, size: sample_jump_size(alpha, c.threshold.y, marks) })
        .collect())
}

/// CB cluster started at the mother jump, stepped until absorption or
/// `max(T_n + 50/a, horizon)`.
pub fn simulate_cluster<T: Real, R: rand::Rng + ?Sized>(
    p: &ModelParams<T>,
    c: &ClusterConfig<T>,
    mother: MotherJump<T>,
    horizon: T,
    rng: &mut R,
) -> Result<ClusterRecord<T>> {
    let kernel = Kernel::branching(p, c.grid.small_jump_cutoff)?;
    check_kernel(p, c, &kernel)?;
    let cap = if p.a > T::zero() { mother.time + lit::<T>(CLUSTER_HORIZON_RATES) / p.a } else { horizon };
    let path = simulate_branching_from(kernel, mother.size, mother.time, c.grid.dt(), cap.max(horizon), rng);
    let duration = path.absorbed_at.map(|t| t - mother.time);
    Ok(ClusterRecord { mother, path, duration })
}

/// Fundamental, mother jumps and clusters on disjoint streams derived from
/// `rng`, and their pointwise sum on the grid.
pub fn build_decomposition<T: Real>(p: &ModelParams<T>, c: &ClusterConfig<T>, rng: &RandomStream) -> Result<Decomposition<T>> {
    let fundamental = simulate_fundamental(p, c, &mut rng.derive_named("fundamental"))?;
    let mothers = sample_mother_jumps(
        &fundamental,
        c,
        p.alpha,
        &mut rng.derive_named("arrivals"),
        &mut rng.derive_named("marks"),
    )?;
    let cluster_root = rng.derive_named("clusters");
    let clusters = mothers
        .into_iter()
        .enumerate()
        .map(|(n, m)| simulate_cluster(p, c, m, c.grid.t_end, &mut cluster_root.derive(n as u64)))
        .collect::<Result<Vec<_>>>()?;

    let dt = c.grid.dt();
    let mut values = fundamental.values.clone();
    for cl in &clusters {
        let Some(first) = first_index(&cl.path, dt) else { continue };
        for (j, &u) in cl.path.values.iter().skip(1).enumerate() {
            match values.get_mut(first + j) {
                Some(v) => *v = *v + u,
                None => break,
            }
        }
    }
    let mut jumps = fundamental.jumps.clone();
    for cl in &clusters {
        jumps.push(Jump { time: cl.mother.time, size: cl.mother.size });
        jumps.extend(cl.path.jumps.iter().filter(|j| j.time <= c.grid.t_end));
    }
    jumps.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap_or(std::cmp::Ordering::Equal));
    let clamp_events = fundamental.clamp_events + clusters.iter().map(|cl| cl.path.clamp_events).sum::<usize>();
    let composed = VPath { times: fundamental.times.clone(), values, jumps, clamp_events, absorbed_at: None };
    Ok(Decomposition { fundamental, clusters, composed })
}

/// `E[J^(y)_t] = ν_α((ȳ, ∞)) (b̃t + (V₀ - b̃)(1 - e^{-ãt})/ã)`.
pub fn expected_cluster_count<T: Real>(t: T, p: &ModelParams<T>, c: &ClusterConfig<T>) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(domain("expected cluster count needs t >= 0"));
    }
    if p.alpha.is_gaussian() {
        return Ok(T::zero());
    }
    let k = Kernel::truncated(p, c.grid.small_jump_cutoff, c.threshold.y)?;
    let (at, bt) = (k.decay_rate, k.level);
    let integral = if at > T::zero() { bt * t - (p.v0 - bt) * (-at * t).exp_m1() / at } else { p.v0 * t };
    Ok(levy_tail_mass(p.alpha, c.threshold.y_bar)? * integral)
}

/// `∫_y^∞ (1 - e^{-ζz}) ζ^{-1-α} dζ = (1 - e^{-yz}) y^{-α}/α + z^α Γ(1-α, yz)/α`.
fn duration_inner<T: Real>(z: T, y: T, alpha: T) -> T {
    if z == T::zero() {
        return T::zero();
    }
    let yz = y * z;
    (-(-yz).exp_m1() * y.powf(-alpha) + z.powf(alpha) * upper_gamma_negative(T::one() - alpha, yz)) / alpha
}

/// `E[θ_n] = αy^α ∫_0^∞ dz/Ψ_α(z) ∫_y^∞ (1 - e^{-ζz}) ζ^{-1-α} dζ`, the
/// expected time from a mother jump to the extinction of its cluster.
pub fn expected_cluster_duration<T: Real>(p: &ModelParams<T>, c: &ClusterConfig<T>) -> Result<T> {
    if p.alpha.is_gaussian() {
        return Err(domain("no mother jumps at alpha = 2"));
    }
    if !(p.sigma > T::zero() || p.sigma_n > T::zero()) {
        return Err(Error::Divergence("∫^∞ dz/Ψ diverges without a diffusion or jump part".into()));
    }
    let al = p.alpha.value();
    let y = c.threshold.y;
    let bp = p.branching();
    let r = integrate_to_infinity(
        |z| if z == T::zero() { T::zero() } else { duration_inner(z, y, al) / psi_unchecked(z, &bp) },
        T::zero(),
        QuadOptions::new(lit(1e-13), lit(1e-10)),
    );
    if !r.converged || !r.value.is_finite() {
        return Err(Error::Divergence("duration integral did not converge".into()));
    }
    Ok(al * y.powf(al) * r.value)
}

/// `(αy/(α-1)) q₁ e^{-a(t-1)}` for `t > 1`, an upper bound on `P(θ_n > t)`.
pub fn duration_tail_bound<T: Real>(t: T, p: &ModelParams<T>, c: &ClusterConfig<T>, q1: T) -> Result<T> {
    if !(t > T::one()) || !(q1 > T::zero()) {
        return Err(domain("tail bound needs t > 1 and q1 > 0"));
    }
    let al = p.alpha.value();
    Ok(al * c.threshold.y / (al - T::one()) * q1 * (-p.a * (t - T::one())).exp())
}

/// `λ = -σ_N^α b / (α cos(πα/2) Γ(-α) c^α) = b ν_α((c/σ_N, ∞))`.
pub fn poisson_limit_rate<T: Real>(c_scale: T, p: &ModelParams<T>) -> Result<T> {
    if !(c_scale > T::zero()) || !(p.sigma_n > T::zero()) {
        return Err(domain("Poisson limit needs c > 0 and sigma_N > 0"));
    }
    Ok(p.b * levy_tail_mass(p.alpha, c_scale / p.sigma_n)?)
}

/// Outcome of the Poisson-limit experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonLimitReport {
    pub n: usize,
    pub y_n: f64,
    pub lambda: f64,
    /// `λ t`, the limiting mean.
    pub target_mean: f64,
    pub empirical_mean: f64,
    pub counts: Vec<u64>,
    pub empirical_pmf: Vec<f64>,
    /// Poisson(λt) probabilities of `0..K-1`, then of `≥ K-1` in the last bin.
    pub target_pmf: Vec<f64>,
    pub chi_square: TestResult,
}

/// Numerical setup of the Poisson-limit experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonLimitSetup {
    pub n: usize,
    pub c_scale: f64,
    pub t: f64,
    pub n_reps: usize,
    pub steps_per_unit: usize,
    pub small_jump_cutoff: f64,
}

/// Counts `J^{(y_n)}_{nt}` with `y_n = c n^{1/α}` over independent replicates
/// and compares them with Poisson(λt).
pub fn poisson_limit_experiment(s: &PoissonLimitSetup, p: &ModelParams<f64>, rng: &RandomStream) -> Result<PoissonLimitReport> {
    if s.n < 10 || s.n_reps < 1000 {
        return Err(domain("Poisson limit needs n >= 10 and at least 1000 replicates"));
    }
    let lambda = poisson_limit_rate(s.c_scale, p)?;
    let horizon = s.n as f64 * s.t;
    let y_n = s.c_scale * (s.n as f64).powf(1.0 / p.alpha.value());
    let grid = SimGrid::new(horizon, (horizon * s.steps_per_unit as f64).ceil() as usize, s.small_jump_cutoff)?;
    let c = ClusterConfig::new(y_n, p.sigma_n, grid)?;
    let tail = levy_tail_mass(p.alpha, c.threshold.y_bar)?;
    let counts: Vec<usize> = par_map(s.n_reps, rng, |_, r| {
        let f = simulate_fundamental(p, &c, &mut r.derive_named("fundamental"))?;
        Ok(sample_arrivals(&f, tail, &mut r.derive_named("arrivals")).len())
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let max = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; max + 1];
    for &k in &counts {
        hist[k] += 1;
    }
    let mu = lambda * s.t;
    let mut target = Vec::with_capacity(max + 1);
    let mut term = (-mu).exp();
    for k in 0..max {
        target.push(term);
        term *= mu / (k + 1) as f64;
    }
    target.push((1.0 - target.iter().sum::<f64>()).max(0.0));
    let nr = s.n_reps as f64;
    Ok(PoissonLimitReport {
        n: s.n,
        y_n,
        lambda,
        target_mean: mu,
        empirical_mean: counts.iter().sum::<usize>() as f64 / nr,
        empirical_pmf: hist.iter().map(|&h| h as f64 / nr).collect(),
        chi_square: chi_square_gof(&hist, &target),
        counts: hist,
        target_pmf: target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::levy_constant;
    use crate::numerics::quadrature::integrate;
    use crate::numerics::special::gamma;
    use crate::sde::tests::base_params;

    fn config(y: f64, t: f64, n: usize) -> ClusterConfig<f64> {
        ClusterConfig::new(y, 1.0, SimGrid::new(t, n, 1e-2).unwrap()).unwrap()
    }

    #[test]
    fn threshold_must_exceed_cutoff() {
        assert!(ClusterConfig::new(1e-3, 1.0, SimGrid::new(1.0, 10, 1e-2).unwrap()).is_err());
    }

    #[test]
    fn pareto_support_and_median() {
        let al = StabilityIndex::new(1.5).unwrap();
        let mut rng = RandomStream::new(9);
        let mut xs: Vec<f64> = (0..20_001).map(|_| sample_jump_size(al, 0.3, &mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.3));
        xs.sort_by(|a, b| a.total_cmp(b));
        let med = xs[10_000];
        assert!((med / (0.3 * 2f64.powf(1.0 / 1.5)) - 1.0).abs() < 0.01 * 3.0);
    }

    #[test]
    fn zero_fundamental_has_no_mothers() {
        let f = VPath { times: vec![0.0, 0.5, 1.0], values: vec![0.0; 3], jumps: vec![], clamp_events: 0, absorbed_at: None };
        let c = config(0.5, 1.0, 2);
        let mut rng = RandomStream::new(1);
        let m = sample_mother_jumps(&f, &c, StabilityIndex::new(1.26).unwrap(), &mut rng, &mut RandomStream::new(2)).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn count_formula_factorizes() {
        let p = base_params();
        let c = config(0.5, 14.0, 1400);
        let k = Kernel::truncated(&p, 1e-2, 0.5).unwrap();
        let (at, bt) = (k.decay_rate, k.level);
        let mean_int = integrate(|s: f64| bt + (p.v0 - bt) * (-at * s).exp(), 0.0, 14.0, QuadOptions::new(1e-14, 1e-14)).value;
        let got = expected_cluster_count(14.0, &p, &c).unwrap();
        let tail = levy_tail_mass(p.alpha, 0.5).unwrap();
        assert!((got - tail * mean_int).abs() < 1e-12 * got);
        // written with (1-α)/Γ(2-α) instead of -1/(αΓ(-α))
        let al = 1.26;
        let pref = (1.0 - al) / ((std::f64::consts::FRAC_PI_2 * al).cos() * gamma(2.0 - al) * 0.5f64.powf(al));
        assert!((got - pref * mean_int).abs() < 1e-12 * got);
        assert_eq!(expected_cluster_count(0.0, &p, &c).unwrap(), 0.0);
        assert!(expected_cluster_count(14.0, &p, &config(1.0, 14.0, 1400)).unwrap() < got);
    }

    #[test]
    fn duration_inner_matches_quadrature() {
        for (z, y, al) in [(0.01f64, 0.5, 1.26), (3.0, 0.5, 1.26), (40.0, 0.2, 1.8), (1.0, 1.0, 1.5)] {
            let f = |zeta: f64| -(-zeta * z).exp_m1() * zeta.powf(-1.0 - al);
            let q = integrate_to_infinity(f, y, QuadOptions::new(1e-15, 1e-12)).value;
            assert!((duration_inner(z, y, al) - q).abs() < 1e-9 * q, "{z} {y} {al}");
        }
    }

    #[test]
    fn duration_increases_with_threshold() {
        let p = base_params();
        let d1 = expected_cluster_duration(&p, &config(0.2, 1.0, 100)).unwrap();
        let d2 = expected_cluster_duration(&p, &config(0.5, 1.0, 100)).unwrap();
        let d3 = expected_cluster_duration(&p, &config(1.0, 1.0, 100)).unwrap();
        assert!(d1 < d2 && d2 < d3 && d1 > 0.0);
        let bare = ModelParams { sigma: 0.0, sigma_n: 0.0, ..p };
        let c = ClusterConfig { threshold: JumpThreshold { y: 0.5, y_bar: 0.5 }, grid: SimGrid::new(1.0, 10, 1e-2).unwrap() };
        assert!(matches!(expected_cluster_duration(&bare, &c), Err(Error::Divergence(_))));
    }

    #[test]
    fn tail_bound_structure() {
        let p = base_params();
        let c = config(0.5, 1.0, 100);
        let b2 = duration_tail_bound(2.0, &p, &c, 0.12).unwrap();
        let b3 = duration_tail_bound(3.0, &p, &c, 0.12).unwrap();
        assert!((b3 / b2 - (-5.0f64).exp()).abs() < 1e-15);
        assert!(duration_tail_bound(2.0, &p, &config(1.0, 1.0, 100), 0.12).unwrap() > b2);
        assert!(duration_tail_bound(0.5, &p, &c, 0.12).is_err());
    }

    #[test]
    fn poisson_rate_closed_form() {
        let p = base_params();
        let al = 1.26;
        let closed = -p.b / (al * (std::f64::consts::FRAC_PI_2 * al).cos() * gamma(-al));
        assert!((poisson_limit_rate(1.0, &p).unwrap() - closed).abs() < 1e-14);
        assert!((levy_constant(p.alpha).unwrap() / al * p.b - closed).abs() < 1e-14);
    }

    #[test]
    fn decomposition_sums_exactly() {
        let p = ModelParams { v0: 0.14, ..base_params() };
        let c = config(0.3, 2.0, 200);
        let mut seen = 0;
        for seed in 0..20 {
            let d = build_decomposition(&p, &c, &RandomStream::new(seed)).unwrap();
            seen += d.clusters.len();
            assert!(d.fundamental.jumps.iter().all(|j| j.size <= 0.3));
            assert!(d.clusters.iter().all(|cl| cl.mother.size > 0.3 && cl.path.values[0] == cl.mother.size));
            for i in 0..=200 {
                let mut s = d.fundamental.values[i];
                for cl in &d.clusters {
                    s += Decomposition::cluster_value_at(cl, i, c.grid.dt());
                }
                assert_eq!(s, d.composed.values[i]);
                assert!(d.composed.values[i] >= d.fundamental.values[i]);
            }
            if d.clusters.is_empty() {
                assert_eq!(d.composed.values, d.fundamental.values);
            }
        }
        assert!(seen > 0);
    }
}
