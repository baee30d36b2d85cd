//! Path simulation of the variance process and of the joint
//! (log S, V, ∫V ds) system.
//!
//! The scheme is a jump-adapted Euler step with three pieces:
//!
//! * the linear drift is integrated exactly, `V ↦ level + (V - level) e^{-a dt}`;
//! * jumps of `V` larger than the cutoff `ε` arrive with intensity
//!   `V⁺ ν((ε/σ_N, ∞))` (an exponential clock on the integrated intensity) and
//!   have Pareto sizes; their mean is removed by the compensator drift `-κ V⁺ dt`;
//! * jumps below `ε` are replaced by a Gaussian of matched variance
//!   `s² V⁺ dt` with `s² = σ_N² ∫_0^{ε/σ_N} ζ² ν(dζ)`.
//!
//! With this split the conditional mean of one step is exactly the affine one,
//! so `E[V_t]` is reproduced up to the effect of clamping negative proposals.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{self, BranchingParams, StabilityIndex};
use crate::real::{count, lit, Real};

/// Risk-neutral parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams<T> {
    pub r: T,
    pub a: T,
    pub b: T,
    pub sigma: T,
    pub sigma_n: T,
    pub alpha: StabilityIndex<T>,
    pub rho: T,
    pub s0: T,
    pub v0: T,
}

impl<T: Real> ModelParams<T> {
    /// Every violated precondition, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.alpha.validate().is_err() {
            v.push(format!("alpha = {} must lie in (1, 2]", self.alpha.value()));
        }
        for (name, x) in [("a", self.a), ("b", self.b), ("sigma", self.sigma), ("sigma_N", self.sigma_n), ("V0", self.v0)] {
            if !(x >= T::zero()) || !x.is_finite() {
                v.push(format!("{name} = {x} must be finite and nonnegative"));
            }
        }
        if !(self.rho > -T::one() && self.rho < T::one()) {
            v.push(format!("rho = {} must lie strictly inside (-1, 1)", self.rho));
        }
        if !(self.s0 > T::zero()) || !self.s0.is_finite() {
            v.push(format!("S0 = {} must be positive", self.s0));
        }
        if !self.r.is_finite() {
            v.push(format!("r = {} must be finite", self.r));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn branching(&self) -> BranchingParams<T> {
        BranchingParams { a: self.a, sigma: self.sigma, sigma_n: self.sigma_n, alpha: self.alpha }
    }

    pub fn feller(&self) -> bool {
        levy::feller_check(self.a, self.b, self.sigma, self.sigma_n, self.alpha)
    }

    /// `E[V_t] = V₀ e^{-at} + b(1 - e^{-at})`.
    pub fn mean_v(&self, t: T) -> T {
        let e = (-self.a * t).exp();
        self.v0 * e + self.b * (T::one() - e)
    }

    /// Same parameters with `V₀` replaced.
    pub fn with_v0(mut self, v0: T) -> Self {
        self.v0 = v0;
        self
    }
}

/// Uniform time grid and the small/large jump split level `ε` (variance units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimGrid<T> {
    pub t_end: T,
    pub n_steps: usize,
    pub small_jump_cutoff: T,
}

impl<T: Real> SimGrid<T> {
    pub fn new(t_end: T, n_steps: usize, small_jump_cutoff: T) -> Result<Self> {
        let g = Self { t_end, n_steps, small_jump_cutoff };
        g.validate()?;
        Ok(g)
    }

    /// Grid with the default cutoff `ε = 1e-4 σ_N`.
    pub fn with_default_cutoff(t_end: T, n_steps: usize, sigma_n: T) -> Result<Self> {
        let eps = if sigma_n > T::zero() { lit::<T>(1e-4) * sigma_n } else { lit(1e-4) };
        Self::new(t_end, n_steps, eps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > T::zero()) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end = {} must be positive", self.t_end)));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        if !(self.small_jump_cutoff > T::zero()) || !self.small_jump_cutoff.is_finite() {
            return Err(Error::Config(format!("small_jump_cutoff = {} must be positive", self.small_jump_cutoff)));
        }
        Ok(())
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.t_end / count(self.n_steps)
    }

    #[inline]
    pub fn time(&self, i: usize) -> T {
        count::<T>(i) * self.dt()
    }
}

/// One simulated jump of `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump<T> {
    pub time: T,
    pub size: T,
}

/// Variance path on a grid with its jump ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VPath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    /// Every jump above the cutoff, in time order.
    pub jumps: Vec<Jump<T>>,
    /// Number of steps whose proposal was negative and clamped to 0.
    pub clamp_events: usize,
    /// For branching (no immigration) paths: first grid time at or below the
    /// absorption floor. Storage stops there.
    pub absorbed_at: Option<T>,
}

impl<T: Real> VPath<T> {
    /// Last stored value (0 for an absorbed branching path).
    pub fn terminal(&self) -> T {
        *self.values.last().unwrap_or(&T::zero())
    }
}

/// `(log S, V, ∫V)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPath<T> {
    pub vpath: VPath<T>,
    pub log_s: Vec<T>,
    pub int_v: Vec<T>,
}

impl<T: Real> JointPath<T> {
    /// CSV with header `t,V,logS,intV`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "V", "logS", "intV"])?;
        for i in 0..self.vpath.times.len() {
            wr.write_record([
                self.vpath.times[i].to_string(),
                self.vpath.values[i].to_string(),
                self.log_s[i].to_string(),
                self.int_v[i].to_string(),
            ])?;
        }
        wr.flush()
    }
}

/// Jump ledger as CSV with header `t,size`.
pub fn write_jumps_csv<T: Real, W: Write>(jumps: &[Jump<T>], w: W) -> std::io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "size"])?;
    for j in jumps {
        wr.write_record([j.time.to_string(), j.size.to_string()])?;
    }
    wr.flush()
}

/// Terminal values of one joint path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTerminal<T> {
    pub log_s: T,
    pub v: T,
    pub int_v: T,
}

/// Absorption floor for branching paths.
pub const ABSORPTION_FLOOR: f64 = 1e-12;

/// Per-step coefficients of one variance dynamics: mean reversion towards
/// `level` at rate `decay_rate`, with large jumps restricted to the band
/// `(lo, hi)` in variance units.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel<T> {
    pub decay_rate: T,
    pub level: T,
    sigma: T,
    /// small-jump Gaussian variance per unit V per unit time
    small_var: T,
    /// compensator drift per unit V
    kappa: T,
    /// large-jump rate per unit V
    jump_rate: T,
    lo: T,
    /// `(lo / hi)^α`; 0 for an unbounded band
    band_ratio: T,
    alpha: T,
}

impl<T: Real> Kernel<T> {
    fn build(p: &ModelParams<T>, decay_rate: T, level: T, eps: T, hi: Option<T>) -> Result<Self> {
        let mut k = Kernel {
            decay_rate,
            level,
            sigma: p.sigma,
            small_var: T::zero(),
            kappa: T::zero(),
            jump_rate: T::zero(),
            lo: eps,
            band_ratio: T::zero(),
            alpha: p.alpha.value(),
        };
        if p.sigma_n > T::zero() {
            if p.alpha.is_gaussian() {
                k.small_var = lit::<T>(2.0) * p.sigma_n * p.sigma_n;
            } else {
                let eb = eps / p.sigma_n;
                k.small_var = p.sigma_n * p.sigma_n * levy::small_jump_second_moment(p.alpha, eb)?;
                let (theta_hi, mass_hi) = match hi {
                    Some(y) => {
                        if !(y > eps) {
                            return Err(Error::Config(format!("jump band upper edge {y} must exceed the cutoff {eps}")));
                        }
                        k.band_ratio = (eps / y).powf(k.alpha);
                        (levy::theta_compensator(p.alpha, y / p.sigma_n)?, levy::levy_tail_mass(p.alpha, y / p.sigma_n)?)
                    }
                    None => (T::zero(), T::zero()),
                };
                k.kappa = p.sigma_n * (levy::theta_compensator(p.alpha, eb)? - theta_hi);
                k.jump_rate = levy::levy_tail_mass(p.alpha, eb)? - mass_hi;
            }
        }
        for (name, x) in [("compensator", k.kappa), ("jump rate", k.jump_rate), ("small-jump variance", k.small_var)] {
            if !x.is_finite() {
                return Err(Error::Config(format!("{name} is not finite for cutoff {eps}")));
            }
        }
        Ok(k)
    }

    /// Dynamics of `V` itself.
    pub fn full(p: &ModelParams<T>, eps: T) -> Result<Self> {
        Self::build(p, p.a, p.b, eps, None)
    }

    /// Truncated process with jumps capped at `y` and effective `(ã, b̃)`.
    pub fn truncated(p: &ModelParams<T>, eps: T, y: T) -> Result<Self> {
        let (at, bt) = if p.sigma_n > T::zero() {
            levy::effective_params(p.a, p.b, p.sigma_n, p.alpha, y / p.sigma_n)?
        } else {
            (p.a, p.b)
        };
        Self::build(p, at, bt, eps, Some(y))
    }

    /// Branching process without immigration.
    pub fn branching(p: &ModelParams<T>, eps: T) -> Result<Self> {
        Self::build(p, p.a, T::zero(), eps, None)
    }

    pub fn check_step(&self, dt: T) -> Result<()> {
        if !(self.decay_rate * dt < T::one()) {
            return Err(Error::Config(format!("a*dt = {} must be below 1", self.decay_rate * dt)));
        }
        if !(self.kappa * dt < (-self.decay_rate * dt).exp()) {
            return Err(Error::Config(format!(
                "compensator step kappa*dt = {} too large; refine the grid or raise the cutoff",
                self.kappa * dt
            )));
        }
        Ok(())
    }

    #[inline]
    fn jump_size<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u = T::open01(rng);
        self.lo * (T::one() - u * (T::one() - self.band_ratio)).powf(-T::one() / self.alpha)
    }
}

/// Mutable per-path stepping state.
pub(crate) struct Stepper<T> {
    pub kernel: Kernel<T>,
    dt: T,
    decay: T,
    clock: T,
    pub clamp_events: usize,
}

/// Brownian input of a step: either drawn internally (variance only) or
/// supplied so that the asset can share it.
#[derive(Clone, Copy)]
pub(crate) enum Noise<T> {
    Internal,
    Shared(T),
}

impl<T: Real> Stepper<T> {
    pub fn new<R: rand::Rng + ?Sized>(kernel: Kernel<T>, dt: T, rng: &mut R) -> Self {
        Self { kernel, dt, decay: (-kernel.decay_rate * dt).exp(), clock: T::standard_exp(rng), clamp_events: 0 }
    }

    /// Advances `v` from `t` over `h` (normally the grid step). Jumps are
    /// appended to `ledger` and returns the new nonnegative value.
    pub fn advance<R: rand::Rng + ?Sized>(
        &mut self,
        v: T,
        t: T,
        h: T,
        noise: Noise<T>,
        rng: &mut R,
        ledger: Option<&mut Vec<Jump<T>>>,
    ) -> T {
        let k = &self.kernel;
        let vp = v.max(T::zero());
        let decay = if h == self.dt { self.decay } else { (-k.decay_rate * h).exp() };
        let mut x = k.level + (vp - k.level) * decay - k.kappa * vp * h;
        if vp > T::zero() {
            let sd = (vp * h).sqrt();
            x = x + match noise {
                Noise::Internal => {
                    let var = k.sigma * k.sigma + k.small_var;
                    if var > T::zero() {
                        sd * var.sqrt() * T::standard_normal(rng)
                    } else {
                        T::zero()
                    }
                }
                Noise::Shared(zw) => {
                    let g = if k.small_var > T::zero() { k.small_var.sqrt() * T::standard_normal(rng) } else { T::zero() };
                    sd * (k.sigma * zw + g)
                }
            };
        }
        let lambda = k.jump_rate * vp * h;
        if lambda > T::zero() {
            let mut ledger = ledger;
            let mut used = T::zero();
            while self.clock <= lambda - used {
                used = used + self.clock;
                let size = k.jump_size(rng);
                x = x + size;
                if let Some(l) = ledger.as_deref_mut() {
                    l.push(Jump { time: t + h * used / lambda, size });
                }
                self.clock = T::standard_exp(rng);
            }
            self.clock = self.clock - (lambda - used);
        }
        if x < T::zero() {
            self.clamp_events += 1;
            T::zero()
        } else {
            x
        }
    }
}

fn prepare<T: Real>(p: &ModelParams<T>, g: &SimGrid<T>, kernel: &Kernel<T>) -> Result<()> {
    p.validate()?;
    g.validate()?;
    kernel.check_step(g.dt())
}

pub(crate) fn simulate_with_kernel<T: Real, R: rand::Rng + ?Sized>(
    kernel: Kernel<T>,
    v0: T,
    g: &SimGrid<T>,
    rng: &mut R,
) -> VPath<T> {
    let dt = g.dt();
    let mut st = Stepper::new(kernel, dt, rng);
    let mut times = Vec::with_capacity(g.n_steps + 1);
    let mut values = Vec::with_capacity(g.n_steps + 1);
    let mut jumps = Vec::new();
    let mut v = v0;
    times.push(T::zero());
    values.push(v);
    for i in 0..g.n_steps {
        v = st.advance(v, g.time(i), dt, Noise::Internal, rng, Some(&mut jumps));
        times.push(g.time(i + 1));
        values.push(v);
    }
    VPath { times, values, jumps, clamp_events: st.clamp_events, absorbed_at: None }
}

/// Simulates `V` on the grid.
pub fn simulate_v_path<T: Real, R: rand::Rng + ?Sized>(p: &ModelParams<T>, g: &SimGrid<T>, rng: &mut R) -> Result<VPath<T>> {
    let kernel = Kernel::full(p, g.small_jump_cutoff)?;
    prepare(p, g, &kernel)?;
    Ok(simulate_with_kernel(kernel, p.v0, g, rng))
}

/// `V_T` only, without storing the path.
pub fn simulate_v_terminal<T: Real, R: rand::Rng + ?Sized>(p: &ModelParams<T>, g: &SimGrid<T>, rng: &mut R) -> Result<T> {
    let kernel = Kernel::full(p, g.small_jump_cutoff)?;
    prepare(p, g, &kernel)?;
    let dt = g.dt();
    let mut st = Stepper::new(kernel, dt, rng);
    let mut v = p.v0;
    for i in 0..g.n_steps {
        v = st.advance(v, g.time(i), dt, Noise::Internal, rng, None);
    }
    Ok(v)
}

fn joint_step<T: Real, R: rand::Rng + ?Sized>(
    st: &mut Stepper<T>,
    p: &ModelParams<T>,
    v: T,
    t: T,
    dt: T,
    rng: &mut R,
    ledger: Option<&mut Vec<Jump<T>>>,
) -> (T, T) {
    let zw = T::standard_normal(rng);
    let zb = T::standard_normal(rng);
    let vp = v.max(T::zero());
    let rho_bar = (T::one() - p.rho * p.rho).sqrt();
    let dlog = (p.r - lit::<T>(0.5) * vp) * dt + (vp * dt).sqrt() * (p.rho * zw + rho_bar * zb);
    let v_new = st.advance(v, t, dt, Noise::Shared(zw), rng, ledger);
    (v_new, dlog)
}

/// Simulates `(log S, V, ∫V ds)` with `B = ρW + √(1-ρ²) W̄`.
pub fn simulate_joint_path<T: Real, R: rand::Rng + ?Sized>(
    p: &ModelParams<T>,
    g: &SimGrid<T>,
    rng: &mut R,
) -> Result<JointPath<T>> {
    let kernel = Kernel::full(p, g.small_jump_cutoff)?;
    prepare(p, g, &kernel)?;
    let dt = g.dt();
    let half = lit::<T>(0.5);
    let mut st = Stepper::new(kernel, dt, rng);
    let n = g.n_steps + 1;
    let (mut times, mut values, mut log_s, mut int_v) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut jumps = Vec::new();
    let (mut v, mut ls, mut iv) = (p.v0, p.s0.ln(), T::zero());
    times.push(T::zero());
    values.push(v);
    log_s.push(ls);
    int_v.push(iv);
    for i in 0..g.n_steps {
        let (v_new, dlog) = joint_step(&mut st, p, v, g.time(i), dt, rng, Some(&mut jumps));
        ls = ls + dlog;
        iv = iv + half * (v + v_new) * dt;
        v = v_new;
        times.push(g.time(i + 1));
        values.push(v);
        log_s.push(ls);
        int_v.push(iv);
    }
    Ok(JointPath {
        vpath: VPath { times, values, jumps, clamp_events: st.clamp_events, absorbed_at: None },
        log_s,
        int_v,
    })
}

/// Terminal `(log S_T, V_T, ∫_0^T V ds)` without storing the path.
pub fn simulate_joint_terminal<T: Real, R: rand::Rng + ?Sized>(
    p: &ModelParams<T>,
    g: &SimGrid<T>,
    rng: &mut R,
) -> Result<JointTerminal<T>> {
    let kernel = Kernel::full(p, g.small_jump_cutoff)?;
    prepare(p, g, &kernel)?;
    let dt = g.dt();
    let half = lit::<T>(0.5);
    let mut st = Stepper::new(kernel, dt, rng);
    let (mut v, mut ls, mut iv) = (p.v0, p.s0.ln(), T::zero());
    for i in 0..g.n_steps {
        let (v_new, dlog) = joint_step(&mut st, p, v, g.time(i), dt, rng, None);
        ls = ls + dlog;
        iv = iv + half * (v + v_new) * dt;
        v = v_new;
    }
    Ok(JointTerminal { log_s: ls, v, int_v: iv })
}

/// Branching path started at `u0` at time `start`, stepped onto the grid
/// `k·dt` (first step partial) until absorption or `horizon`.
pub(crate) fn simulate_branching_from<T: Real, R: rand::Rng + ?Sized>(
    kernel: Kernel<T>,
    u0: T,
    start: T,
    dt: T,
    horizon: T,
    rng: &mut R,
) -> VPath<T> {
    let floor = lit::<T>(ABSORPTION_FLOOR);
    let mut st = Stepper::new(kernel, dt, rng);
    let mut times = vec![start];
    let mut values = vec![u0];
    let mut jumps = Vec::new();
    let mut absorbed_at = None;
    let mut idx = (start / dt).floor().to_usize().unwrap_or(0) + 1;
    let mut t = start;
    let mut u = u0;
    if u <= floor {
        absorbed_at = Some(start);
    }
    while absorbed_at.is_none() {
        let next = count::<T>(idx) * dt;
        if next > horizon + dt * lit(1e-9) {
            break;
        }
        let h = next - t;
        if h <= T::zero() {
            idx += 1;
            continue;
        }
        u = st.advance(u, t, h, Noise::Internal, rng, Some(&mut jumps));
        if u <= floor {
            u = T::zero();
            absorbed_at = Some(next);
        }
        t = next;
        times.push(t);
        values.push(u);
        idx += 1;
    }
    VPath { times, values, jumps, clamp_events: st.clamp_events, absorbed_at }
}

/// Branching (`b = 0`) path started at `u0 > 0`; absorbed at 0 once it falls
/// below [`ABSORPTION_FLOOR`], after which nothing more is stored.
pub fn simulate_cb_path<T: Real, R: rand::Rng + ?Sized>(
    u0: T,
    p: &ModelParams<T>,
    g: &SimGrid<T>,
    rng: &mut R,
) -> Result<VPath<T>> {
    if !(u0 > T::zero()) {
        return Err(Error::Domain(format!("branching path needs u0 > 0, got {u0}")));
    }
    let kernel = Kernel::branching(p, g.small_jump_cutoff)?;
    prepare(p, g, &kernel)?;
    Ok(simulate_branching_from(kernel, u0, T::zero(), g.dt(), g.t_end, rng))
}
