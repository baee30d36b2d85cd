//! Monte Carlo prices of European asset and variance options, Black implied
//! volatilities, smiles and wing regressions.
//!
//! Asset options are discounted at `r`; variance options pay on `V_T` with no
//! discounting. A smile reuses one set of terminal draws for every strike.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mc::par_map;
use crate::real::Real;
use crate::rng::RandomStream;
use crate::sde::{simulate_joint_terminal, ModelParams, SimGrid};
use crate::stats::{linear_fit, normal_cdf, LinearFit, Welford};

/// Smallest accepted number of paths for a price.
pub const MIN_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Underlying {
    Asset,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WingSide {
    Left,
    Right,
}

/// European option with strike `K = e^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub underlying: Underlying,
    pub kind: OptionKind,
    pub strike_log: f64,
    pub maturity: f64,
}

impl OptionSpec {
    pub fn new(underlying: Underlying, kind: OptionKind, strike_log: f64, maturity: f64) -> Result<Self> {
        if !(maturity > 0.0) || !strike_log.is_finite() {
            return Err(domain(format!("option needs maturity > 0 and finite k, got T = {maturity}, k = {strike_log}")));
        }
        Ok(OptionSpec { underlying, kind, strike_log, maturity })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_paths: usize,
}

/// Terminal `(log S_T, V_T)` draws shared by all strikes at one maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSample {
    pub maturity: f64,
    pub rate: f64,
    pub s0: f64,
    pub log_s: Vec<f64>,
    pub v: Vec<f64>,
}

impl TerminalSample {
    /// Simulates `n_paths` joint terminals with stream `i` for path `i`.
    pub fn simulate<T: Real>(p: &ModelParams<T>, g: &SimGrid<T>, n_paths: usize, rng: &RandomStream) -> Result<Self> {
        if n_paths < MIN_PATHS {
            return Err(domain(format!("need at least {MIN_PATHS} paths, got {n_paths}")));
        }
        let draws = par_map(n_paths, rng, |_, s| simulate_joint_terminal(p, g, s));
        let mut log_s = Vec::with_capacity(n_paths);
        let mut v = Vec::with_capacity(n_paths);
        for d in draws {
            let d = d?;
            log_s.push(d.log_s.as_f64());
            v.push(d.v.as_f64());
        }
        Ok(TerminalSample { maturity: g.t_end.as_f64(), rate: p.r.as_f64(), s0: p.s0.as_f64(), log_s, v })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// `S_0 e^{rT}` for the asset; MC mean of `V_T` for the variance.
    pub fn forward(&self, underlying: Underlying) -> f64 {
        match underlying {
            Underlying::Asset => self.s0 * (self.rate * self.maturity).exp(),
            Underlying::Variance => self.v.iter().copied().collect::<Welford>().mean(),
        }
    }

    fn terminal(&self, underlying: Underlying, i: usize) -> f64 {
        match underlying {
            Underlying::Asset => self.log_s[i].exp(),
            Underlying::Variance => self.v[i],
        }
    }

    /// Undiscounted payoff mean and standard error.
    fn payoff_moments(&self, underlying: Underlying, kind: OptionKind, strike: f64) -> Result<Welford> {
        let mut w = Welford::new();
        for i in 0..self.len() {
            let x = self.terminal(underlying, i);
            let pay = match kind {
                OptionKind::Call => (x - strike).max(0.0),
                OptionKind::Put => (strike - x).max(0.0),
            };
            if !pay.is_finite() {
                return Err(Error::Numerical(format!("non-finite payoff on path {i}")));
            }
            w.push(pay);
        }
        Ok(w)
    }

    /// Price of `spec` on this sample; discounted for the asset only.
    pub fn price(&self, spec: &OptionSpec) -> Result<PriceEstimate> {
        if (spec.maturity - self.maturity).abs() > 1e-12 * self.maturity.max(1.0) {
            return Err(domain("option maturity differs from the simulated horizon"));
        }
        let w = self.payoff_moments(spec.underlying, spec.kind, spec.strike_log.exp())?;
        let disc = match spec.underlying {
            Underlying::Asset => (-self.rate * self.maturity).exp(),
            Underlying::Variance => 1.0,
        };
        Ok(PriceEstimate { value: disc * w.mean(), std_err: disc * w.std_err(), n_paths: self.len() })
    }
}

/// MC price of one option; the grid horizon must equal the maturity.
pub fn mc_price<T: Real>(
    spec: &OptionSpec,
    p: &ModelParams<T>,
    n_paths: usize,
    g: &SimGrid<T>,
    rng: &RandomStream,
) -> Result<PriceEstimate> {
    TerminalSample::simulate(p, g, n_paths, rng)?.price(spec)
}

/// Undiscounted Black price.
pub fn black_price(kind: OptionKind, forward: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    let s = vol * maturity.sqrt();
    let intrinsic = match kind {
        OptionKind::Call => (forward - strike).max(0.0),
        OptionKind::Put => (strike - forward).max(0.0),
    };
    if s <= 0.0 {
        return intrinsic;
    }
    let d1 = (forward / strike).ln() / s + 0.5 * s;
    let d2 = d1 - s;
    match kind {
        OptionKind::Call => forward * normal_cdf(d1) - strike * normal_cdf(d2),
        OptionKind::Put => strike * normal_cdf(-d2) - forward * normal_cdf(-d1),
    }
}

/// `∂ price / ∂ vol` of the Black price.
pub fn black_vega(forward: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    let s = vol * maturity.sqrt();
    if s <= 0.0 {
        return 0.0;
    }
    let d1 = (forward / strike).ln() / s + 0.5 * s;
    forward * (-0.5 * d1 * d1).exp() / (2.0 * std::f64::consts::PI).sqrt() * maturity.sqrt()
}

/// Implied volatility of an undiscounted call price.
pub fn implied_vol(price: f64, forward: f64, strike: f64, maturity: f64) -> Result<f64> {
    implied_vol_of(OptionKind::Call, price, forward, strike, maturity)
}

/// Black volatility reproducing `price`: bisection to `1e-10` then one
/// Newton step, kept only if it stays inside the bracket.
pub fn implied_vol_of(kind: OptionKind, price: f64, forward: f64, strike: f64, maturity: f64) -> Result<f64> {
    if !(forward > 0.0 && strike > 0.0 && maturity > 0.0) {
        return Err(domain("implied vol needs positive forward, strike and maturity"));
    }
    let (intrinsic, cap) = match kind {
        OptionKind::Call => ((forward - strike).max(0.0), forward),
        OptionKind::Put => ((strike - forward).max(0.0), strike),
    };
    if !price.is_finite() || price < intrinsic {
        return Err(Error::OutOfBand { price, bound: "below intrinsic value" });
    }
    if price >= cap {
        return Err(Error::OutOfBand { price, bound: "at or above the zero-strike bound" });
    }
    if price == intrinsic {
        return Ok(0.0);
    }
    let f = |v: f64| black_price(kind, forward, strike, maturity, v) - price;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical(format!("implied vol bracket failed for price {price}")));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let vega = black_vega(forward, strike, maturity, mid);
    if vega > 0.0 {
        let polished = mid - f(mid) / vega;
        if polished >= lo && polished <= hi {
            return Ok(polished);
        }
    }
    Ok(mid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    pub k: f64,
    /// Undiscounted OTM price used for inversion.
    pub price: f64,
    pub price_se: f64,
    pub implied_vol: f64,
    /// Price standard error mapped through the vega.
    pub vol_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileCurve {
    pub maturity: f64,
    pub underlying: Underlying,
    pub forward: f64,
    /// Sorted by `k`.
    pub points: Vec<SmilePoint>,
    /// Strikes whose price was within 2 SE of intrinsic or out of band.
    pub excluded: Vec<f64>,
}

/// Default grid: 25 equally spaced log-strikes over `center ± 4 sd`.
pub fn default_strike_grid(center: f64, sd: f64) -> Vec<f64> {
    let n = 25;
    (0..n).map(|i| center - 4.0 * sd + 8.0 * sd * i as f64 / (n - 1) as f64).collect()
}

/// Builds a smile from shared terminal draws, inverting the OTM side.
pub fn smile_from_sample(sample: &TerminalSample, k_grid: &[f64], underlying: Underlying) -> Result<SmileCurve> {
    if k_grid.is_empty() {
        return Err(domain("empty strike grid"));
    }
    let mut ks = k_grid.to_vec();
    ks.sort_by(|a, b| a.total_cmp(b));
    let forward = sample.forward(underlying);
    let t = sample.maturity;
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for k in ks {
        let strike = k.exp();
        let kind = if strike >= forward { OptionKind::Call } else { OptionKind::Put };
        let w = sample.payoff_moments(underlying, kind, strike)?;
        let (price, se) = (w.mean(), w.std_err());
        if price < 2.0 * se || price <= 0.0 {
            excluded.push(k);
            continue;
        }
        match implied_vol_of(kind, price, forward, strike, t) {
            Ok(iv) => {
                let vega = black_vega(forward, strike, t, iv);
                let vol_se = if vega > 0.0 { se / vega } else { f64::INFINITY };
                points.push(SmilePoint { k, price, price_se: se, implied_vol: iv, vol_se });
            }
            Err(Error::OutOfBand { .. }) => excluded.push(k),
            Err(e) => return Err(e),
        }
    }
    Ok(SmileCurve { maturity: t, underlying, forward, points, excluded })
}

/// Simulates terminal draws on `g` and builds the smile at `g.t_end`.
pub fn smile<T: Real>(
    p: &ModelParams<T>,
    g: &SimGrid<T>,
    k_grid: &[f64],
    underlying: Underlying,
    n_paths: usize,
    rng: &RandomStream,
) -> Result<SmileCurve> {
    let sample = TerminalSample::simulate(p, g, n_paths, rng)?;
    smile_from_sample(&sample, k_grid, underlying)
}

/// Least-squares wing slope over the outermost `n_tail_points` on one side of
/// the forward, in log-moneyness `x = k - log F`: `Σ²` against `|x|` for the
/// asset, `Σ` against `√|x|` for the variance.
pub fn wing_regression(curve: &SmileCurve, side: WingSide, n_tail_points: usize) -> Result<LinearFit> {
    let needed = n_tail_points.max(4);
    let lf = curve.forward.ln();
    let mut pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (p.k - lf, p.implied_vol))
        .filter(|(x, _)| match side {
            WingSide::Left => *x < 0.0,
            WingSide::Right => *x > 0.0,
        })
        .collect();
    if pts.len() < needed {
        return Err(Error::InsufficientPoints { needed, got: pts.len() });
    }
    pts.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    pts.truncate(needed);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .map(|&(x, iv)| match curve.underlying {
            Underlying::Asset => (x.abs(), iv * iv),
            Underlying::Variance => (x.abs().sqrt(), iv),
        })
        .unzip();
    Ok(linear_fit(&xs, &ys))
}
