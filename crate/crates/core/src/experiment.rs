//! Reproducible experiment runner: configuration, validation, dispatch,
//! atomic CSV/JSON output and run manifests.
//!
//! Outputs depend only on the configuration (including the seed), never on
//! the number of worker threads.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{tail_log_s, tail_v};
use crate::clusters::{
    build_decomposition, expected_cluster_count, expected_cluster_duration, poisson_limit_experiment, ClusterConfig,
    PoissonLimitSetup,
};
use crate::error::Error;
use crate::levy::StabilityIndex;
use crate::mc::par_map;
use crate::measure::{risk_premiums, to_physical, EsscherParams};
use crate::pricing::{default_strike_grid, smile_from_sample, wing_regression, TerminalSample, Underlying, WingSide};
use crate::riccati::{solve_riccati, FreqTriple};
use crate::rng::RandomStream;
use crate::sde::{simulate_joint_path, write_jumps_csv, Kernel, ModelParams, SimGrid};
use crate::stats::{linear_fit, LinearFit, Welford};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Smile,
    Tails,
    Clusters,
    Riccati,
    Measure,
    PoissonLimit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Smile => "smile",
            Experiment::Tails => "tails",
            Experiment::Clusters => "clusters",
            Experiment::Riccati => "riccati",
            Experiment::Measure => "measure",
            Experiment::PoissonLimit => "poisson-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmileOptions {
    pub underlying: Underlying,
    pub n_paths: usize,
    /// Log-strikes; empty means 25 points over `log F ± 4 sd`.
    pub k_grid: Vec<f64>,
    pub wing_points: usize,
}

impl Default for SmileOptions {
    fn default() -> Self {
        SmileOptions { underlying: Underlying::Asset, n_paths: 100_000, k_grid: Vec::new(), wing_points: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsOptions {
    pub n_paths: usize,
    pub u_grid: Vec<f64>,
}

impl Default for TailsOptions {
    fn default() -> Self {
        TailsOptions { n_paths: 100_000, u_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClustersOptions {
    pub y_grid: Vec<f64>,
    pub alphas: Vec<f64>,
    pub n_reps: usize,
    pub t: f64,
    pub steps_per_unit: usize,
}

impl Default for ClustersOptions {
    fn default() -> Self {
        ClustersOptions {
            y_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            alphas: vec![1.2, 1.5, 1.8],
            n_reps: 1000,
            t: 14.0,
            steps_per_unit: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiccatiOptions {
    pub maturity: f64,
    pub tol: f64,
    /// Each point is `[Re ξ₁, Im ξ₁, Re ξ₂, Im ξ₂, Re ξ₃, Im ξ₃]`.
    pub points: Vec<[f64; 6]>,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        let mut points = Vec::new();
        for x in [0.0, 0.5, 1.0, 1.2] {
            points.push([x, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        for w in [1.0, 5.0, 20.0] {
            points.push([0.0, w, 0.0, 0.0, 0.0, 0.0]);
        }
        for l in [0.5, 2.0, 10.0] {
            points.push([0.0, 0.0, -l, 0.0, 0.0, 0.0]);
        }
        RiccatiOptions { maturity: 1.0, tol: 1e-10, points }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureOptions {
    pub eta: f64,
    pub eta_bar: f64,
    pub theta: f64,
    /// Variance level for the premiums; defaults to `V₀`.
    pub v: Option<f64>,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions { eta: -0.5, eta_bar: 0.2, theta: 0.1, v: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonLimitOptions {
    pub n: usize,
    pub c: f64,
    pub t: f64,
    pub n_reps: usize,
    pub steps_per_unit: usize,
}

impl Default for PoissonLimitOptions {
    fn default() -> Self {
        PoissonLimitOptions { n: 100, c: 1.0, t: 1.0, n_reps: 1000, steps_per_unit: 100 }
    }
}

/// Everything a run needs. Missing sections take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelParams<f64>,
    pub grid: SimGrid<f64>,
    pub smile: SmileOptions,
    pub tails: TailsOptions,
    pub clusters: ClustersOptions,
    pub riccati: RiccatiOptions,
    pub measure: MeasureOptions,
    pub poisson_limit: PoissonLimitOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            model: ModelParams {
                r: 0.0,
                a: 5.0,
                b: 0.14,
                sigma: 0.08,
                sigma_n: 1.0,
                alpha: StabilityIndex::new(1.26).expect("valid default"),
                rho: -0.5,
                s0: 1.0,
                v0: 0.03,
            },
            grid: SimGrid { t_end: 1.0, n_steps: 200, small_jump_cutoff: 1e-2 },
            smile: SmileOptions::default(),
            tails: TailsOptions::default(),
            clusters: ClustersOptions::default(),
            riccati: RiccatiOptions::default(),
            measure: MeasureOptions::default(),
            poisson_limit: PoissonLimitOptions::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config; every key, including those inside `[model]` and
    /// `[grid]`, falls back to its default when absent.
    pub fn from_toml_str(s: &str) -> Result<Self, RunError> {
        let invalid = |e: &dyn std::fmt::Display| RunError::Invalid(vec![format!("config parse error: {e}")]);
        let given: toml::Table = toml::from_str(s).map_err(|e| invalid(&e))?;
        let mut merged = toml::Table::try_from(ExperimentConfig::default()).expect("config serializes");
        overlay(&mut merged, given);
        merged.try_into().map_err(|e| invalid(&e))
    }

    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::Invalid(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn overlay(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => overlay(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Outcome of [`validate`]: errors block a run, warnings do not.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

fn grid_violations(g: &SimGrid<f64>, p: &ModelParams<f64>, errors: &mut Vec<String>) {
    if let Err(e) = g.validate() {
        errors.push(e.to_string());
        return;
    }
    if !p.violations().is_empty() {
        return;
    }
    match Kernel::full(p, g.small_jump_cutoff).and_then(|k| k.check_step(g.dt())) {
        Ok(()) => {}
        Err(e) => errors.push(e.to_string()),
    }
}

/// Every violated precondition of `experiment` under `cfg`. When
/// `experiment` is `None` only the shared model and grid are checked.
pub fn validate(cfg: &ExperimentConfig, experiment: Option<Experiment>) -> Validation {
    let mut errors = cfg.model.violations();
    let mut warnings = Vec::new();
    if errors.is_empty() && !cfg.model.feller() {
        warnings.push(format!(
            "Feller condition violated: 2ab = {} < sigma^2 = {}; zero is attainable",
            2.0 * cfg.model.a * cfg.model.b,
            cfg.model.sigma * cfg.model.sigma
        ));
    }
    match experiment {
        None | Some(Experiment::Simulate) | Some(Experiment::Tails) | Some(Experiment::Smile) => {
            grid_violations(&cfg.grid, &cfg.model, &mut errors)
        }
        _ => {}
    }
    let min = crate::pricing::MIN_PATHS;
    match experiment {
        Some(Experiment::Smile) => {
            let o = &cfg.smile;
            if o.n_paths < min {
                errors.push(format!("smile.n_paths = {} must be at least {min}", o.n_paths));
            }
            if o.wing_points < 4 {
                errors.push("smile.wing_points must be at least 4".into());
            }
            if o.k_grid.iter().any(|k| !k.is_finite()) {
                errors.push("smile.k_grid must be finite".into());
            }
        }
        Some(Experiment::Tails) => {
            let o = &cfg.tails;
            if o.n_paths < min {
                errors.push(format!("tails.n_paths = {} must be at least {min}", o.n_paths));
            }
            if o.u_grid.is_empty() || o.u_grid.iter().any(|u| !(*u > 0.0)) {
                errors.push("tails.u_grid must be nonempty and positive".into());
            }
        }
        Some(Experiment::Clusters) => {
            let o = &cfg.clusters;
            if o.n_reps == 0 || o.steps_per_unit == 0 || !(o.t > 0.0) {
                errors.push("clusters needs n_reps > 0, steps_per_unit > 0 and t > 0".into());
            }
            if o.y_grid.is_empty() || o.alphas.is_empty() {
                errors.push("clusters.y_grid and clusters.alphas must be nonempty".into());
            }
            for &al in &o.alphas {
                if !(al > 1.0 && al < 2.0) {
                    errors.push(format!("clusters alpha = {al} must lie in (1, 2)"));
                }
            }
            for &y in &o.y_grid {
                if !(y > cfg.grid.small_jump_cutoff) {
                    errors.push(format!("cluster threshold y = {y} must exceed the cutoff {}", cfg.grid.small_jump_cutoff));
                }
            }
            if !(cfg.model.sigma_n > 0.0) {
                errors.push("clusters need sigma_N > 0".into());
            }
            if errors.is_empty() && o.t > 0.0 && o.steps_per_unit > 0 {
                let n = (o.t * o.steps_per_unit as f64).ceil() as usize;
                for al in o.alphas.iter().filter_map(|&al| StabilityIndex::new(al).ok()) {
                    let p = ModelParams { alpha: al, ..cfg.model };
                    let g = SimGrid { t_end: o.t, n_steps: n, small_jump_cutoff: cfg.grid.small_jump_cutoff };
                    grid_violations(&g, &p, &mut errors);
                }
            }
        }
        Some(Experiment::Riccati) => {
            let o = &cfg.riccati;
            if !(o.maturity > 0.0) || !(o.tol > 0.0) {
                errors.push("riccati needs maturity > 0 and tol > 0".into());
            }
            if o.points.is_empty() {
                errors.push("riccati.points must be nonempty".into());
            }
        }
        Some(Experiment::Measure) => {
            let o = &cfg.measure;
            if let Err(e) = EsscherParams::new(o.eta, o.eta_bar, o.theta) {
                errors.push(e.to_string());
            } else if errors.is_empty() {
                if let Err(e) = to_physical(&cfg.model, &EsscherParams { eta: o.eta, eta_bar: o.eta_bar, theta: o.theta }) {
                    errors.push(e.to_string());
                }
            }
            if o.v.is_some_and(|v| !(v >= 0.0)) {
                errors.push("measure.v must be nonnegative".into());
            }
        }
        Some(Experiment::PoissonLimit) => {
            let o = &cfg.poisson_limit;
            if o.n < 10 || o.n_reps < 1000 {
                errors.push("poisson_limit needs n >= 10 and n_reps >= 1000".into());
            }
            if !(o.c > 0.0) || !(o.t > 0.0) || o.steps_per_unit == 0 {
                errors.push("poisson_limit needs c > 0, t > 0 and steps_per_unit > 0".into());
            }
            if errors.is_empty() && !(cfg.model.sigma_n > 0.0) {
                errors.push("poisson_limit needs sigma_N > 0".into());
            }
        }
        _ => {}
    }
    Validation { errors, warnings }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("{context}: {source}")]
    Failed { context: &'static str, source: Error },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 2 for validation failures, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 2,
            _ => 3,
        }
    }
}

fn ctx(context: &'static str) -> impl Fn(Error) -> RunError {
    move |source| RunError::Failed { context, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub threads: usize,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputRecord>,
}

/// Collects output files and writes each one atomically.
struct Sink {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl Sink {
    fn new(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Sink { dir: dir.to_path_buf(), records: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(name))?;
        self.records.push(OutputRecord {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn json<S: Serialize>(&mut self, name: &str, value: &S) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        self.write(name, &bytes)
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

/// Validates, runs `experiment` and writes its outputs into `out`.
pub fn run(cfg: &ExperimentConfig, experiment: Experiment, out: &Path) -> Result<RunManifest, RunError> {
    let v = validate(cfg, Some(experiment));
    if !v.is_ok() {
        return Err(RunError::Invalid(v.errors));
    }
    let start = Instant::now();
    let mut sink = Sink::new(out)?;
    let root = RandomStream::new(cfg.seed);
    match experiment {
        Experiment::Simulate => run_simulate(cfg, &root, &mut sink)?,
        Experiment::Smile => run_smile(cfg, &root, &mut sink)?,
        Experiment::Tails => run_tails(cfg, &root, &mut sink)?,
        Experiment::Clusters => run_clusters(cfg, &root, &mut sink)?,
        Experiment::Riccati => run_riccati(cfg, &mut sink)?,
        Experiment::Measure => run_measure(cfg, &mut sink)?,
        Experiment::PoissonLimit => run_poisson(cfg, &root, &mut sink)?,
    }
    Ok(RunManifest {
        experiment: experiment.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        warnings: v.warnings,
        outputs: sink.records,
    })
}

fn run_simulate(cfg: &ExperimentConfig, root: &RandomStream, sink: &mut Sink) -> Result<(), RunError> {
    let path = simulate_joint_path(&cfg.model, &cfg.grid, &mut root.derive_named("path")).map_err(ctx("simulate"))?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    sink.write("path.csv", &buf)?;
    let mut buf = Vec::new();
    write_jumps_csv(&path.vpath.jumps, &mut buf)?;
    sink.write("jumps.csv", &buf)?;
    #[derive(Serialize)]
    struct Summary {
        n_steps: usize,
        n_jumps: usize,
        clamp_events: usize,
        terminal_v: f64,
        terminal_log_s: f64,
        max_v: f64,
    }
    let max_v = path.vpath.values.iter().copied().fold(0.0, f64::max);
    sink.json(
        "summary.json",
        &Summary {
            n_steps: cfg.grid.n_steps,
            n_jumps: path.vpath.jumps.len(),
            clamp_events: path.vpath.clamp_events,
            terminal_v: path.vpath.terminal(),
            terminal_log_s: *path.log_s.last().unwrap_or(&0.0),
            max_v,
        },
    )?;
    Ok(())
}

fn log_sd(xs: impl Iterator<Item = f64>) -> f64 {
    let w: Welford = xs.filter(|x| x.is_finite()).collect();
    w.variance().sqrt()
}

fn run_smile(cfg: &ExperimentConfig, root: &RandomStream, sink: &mut Sink) -> Result<(), RunError> {
    let o = &cfg.smile;
    let sample = TerminalSample::simulate(&cfg.model, &cfg.grid, o.n_paths, &root.derive_named("smile")).map_err(ctx("smile"))?;
    let k_grid = if o.k_grid.is_empty() {
        let f = sample.forward(o.underlying).ln();
        let sd = match o.underlying {
            Underlying::Asset => log_sd(sample.log_s.iter().copied()),
            Underlying::Variance => log_sd(sample.v.iter().filter(|v| **v > 0.0).map(|v| v.ln())),
        };
        default_strike_grid(f, sd)
    } else {
        o.k_grid.clone()
    };
    let curve = smile_from_sample(&sample, &k_grid, o.underlying).map_err(ctx("smile"))?;
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| vec![fmt(p.k), fmt(p.price), fmt(p.price_se), fmt(p.implied_vol), fmt(p.vol_se)])
        .collect();
    sink.csv("smile.csv", &["k", "price", "std_err", "implied_vol", "vol_std_err"], &rows)?;
    #[derive(Serialize)]
    struct Summary {
        underlying: Underlying,
        maturity: f64,
        forward: f64,
        n_paths: usize,
        excluded_strikes: Vec<f64>,
        left_wing: Option<LinearFit>,
        right_wing: Option<LinearFit>,
    }
    sink.json(
        "summary.json",
        &Summary {
            underlying: o.underlying,
            maturity: curve.maturity,
            forward: curve.forward,
            n_paths: o.n_paths,
            excluded_strikes: curve.excluded.clone(),
            left_wing: wing_regression(&curve, WingSide::Left, o.wing_points).ok(),
            right_wing: wing_regression(&curve, WingSide::Right, o.wing_points).ok(),
        },
    )?;
    Ok(())
}

fn run_tails(cfg: &ExperimentConfig, root: &RandomStream, sink: &mut Sink) -> Result<(), RunError> {
    let o = &cfg.tails;
    let p = &cfg.model;
    let t = cfg.grid.t_end;
    let sample = TerminalSample::simulate(p, &cfg.grid, o.n_paths, &root.derive_named("tails")).map_err(ctx("tails"))?;
    let n = sample.len() as f64;
    let freq = |c: usize| {
        let q = c as f64 / n;
        (q, (q * (1.0 - q) / n).sqrt())
    };
    let mut rows = Vec::new();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for &u in &o.u_grid {
        let (pv, sv) = freq(sample.v.iter().filter(|&&v| v > u).count());
        let (ps, ss) = freq(sample.log_s.iter().filter(|&&l| -l > u).count());
        let av = tail_v(u, t, p.v0, p).ok();
        let as_ = tail_log_s(u, t, p.v0, p).ok();
        if pv > 0.0 {
            lx.push(u.ln());
            ly.push(pv.ln());
        }
        let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
        rows.push(vec![fmt(u), fmt(pv), fmt(sv), opt(av), fmt(ps), fmt(ss), opt(as_)]);
    }
    sink.csv(
        "tails.csv",
        &["u", "p_v", "p_v_std_err", "p_v_asymptotic", "p_neg_log_s", "p_neg_log_s_std_err", "p_neg_log_s_asymptotic"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Summary {
        maturity: f64,
        n_paths: usize,
        alpha: f64,
        v_tail_fit: Option<LinearFit>,
    }
    let fit = (lx.len() >= 2).then(|| linear_fit(&lx, &ly));
    sink.json("summary.json", &Summary { maturity: t, n_paths: o.n_paths, alpha: p.alpha.value(), v_tail_fit: fit })?;
    Ok(())
}

fn run_clusters(cfg: &ExperimentConfig, root: &RandomStream, sink: &mut Sink) -> Result<(), RunError> {
    let o = &cfg.clusters;
    let n_steps = (o.t * o.steps_per_unit as f64).ceil() as usize;
    let grid = SimGrid::new(o.t, n_steps, cfg.grid.small_jump_cutoff).map_err(ctx("clusters"))?;
    let mut count_rows = Vec::new();
    let mut duration_rows = Vec::new();
    let mut table = Vec::new();
    for (ia, &al) in o.alphas.iter().enumerate() {
        let p = ModelParams { alpha: StabilityIndex::new(al).map_err(ctx("clusters"))?, ..cfg.model };
        for (iy, &y) in o.y_grid.iter().enumerate() {
            let c = ClusterConfig::new(y, p.sigma_n, grid).map_err(ctx("clusters"))?;
            let cell = root.derive_named("clusters").derive((ia * o.y_grid.len() + iy) as u64);
            let reps = par_map(o.n_reps, &cell, |_, s| {
                build_decomposition(&p, &c, s).map(|d| {
                    let durations: Vec<Option<f64>> = d.clusters.iter().map(|cl| cl.duration).collect();
                    durations
                })
            });
            let mut counts = Welford::new();
            let mut durations = Welford::new();
            let mut capped = 0usize;
            for (r, rep) in reps.into_iter().enumerate() {
                let ds = rep.map_err(ctx("clusters"))?;
                counts.push(ds.len() as f64);
                count_rows.push(vec![fmt(al), fmt(y), r.to_string(), ds.len().to_string()]);
                for (j, d) in ds.into_iter().enumerate() {
                    match d {
                        Some(d) => {
                            durations.push(d);
                            duration_rows.push(vec![fmt(al), fmt(y), r.to_string(), j.to_string(), fmt(d)]);
                        }
                        None => capped += 1,
                    }
                }
            }
            let ec = expected_cluster_count(o.t, &p, &c).map_err(ctx("clusters"))?;
            let ed = expected_cluster_duration(&p, &c).map_err(ctx("clusters"))?;
            table.push(vec![
                fmt(al),
                fmt(y),
                fmt(ec),
                fmt(counts.mean()),
                fmt(counts.std_err()),
                fmt(ed),
                fmt(durations.mean()),
                fmt(durations.std_err()),
                durations.count().to_string(),
                capped.to_string(),
            ]);
        }
    }
    sink.csv("counts.csv", &["alpha", "y", "replicate", "count"], &count_rows)?;
    sink.csv("durations.csv", &["alpha", "y", "replicate", "cluster", "duration"], &duration_rows)?;
    sink.csv(
        "table.csv",
        &[
            "alpha",
            "y",
            "expected_count",
            "mc_count",
            "mc_count_std_err",
            "expected_duration",
            "mc_duration",
            "mc_duration_std_err",
            "n_clusters",
            "capped",
        ],
        &table,
    )?;
    Ok(())
}

fn run_riccati(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    #[derive(Serialize)]
    struct Entry {
        xi: [f64; 6],
        status: String,
        psi_t: Option<[f64; 2]>,
        phi_t: Option<[f64; 2]>,
        transform: Option<[f64; 2]>,
        blowup_time: Option<f64>,
    }
    let o = &cfg.riccati;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for pt in &o.points {
        let xi = FreqTriple::new(Complex::new(pt[0], pt[1]), Complex::new(pt[2], pt[3]), Complex::new(pt[4], pt[5]));
        let mut row: Vec<String> = pt.iter().map(|x| fmt(*x)).collect();
        match solve_riccati(&xi, o.maturity, &cfg.model, o.tol) {
            Ok(s) => {
                let tr = s.transform(xi.xi1, cfg.model.s0.ln(), cfg.model.v0);
                entries.push(Entry {
                    xi: *pt,
                    status: "ok".into(),
                    psi_t: Some([s.psi_t.re, s.psi_t.im]),
                    phi_t: Some([s.phi_t.re, s.phi_t.im]),
                    transform: Some([tr.re, tr.im]),
                    blowup_time: None,
                });
                row.extend(["ok".to_string(), fmt(s.psi_t.re), fmt(s.psi_t.im), fmt(s.phi_t.re), fmt(s.phi_t.im)]);
                row.extend([fmt(tr.re), fmt(tr.im), String::new()]);
            }
            Err(Error::BlowUp { t }) => {
                entries.push(Entry { xi: *pt, status: "blowup".into(), psi_t: None, phi_t: None, transform: None, blowup_time: Some(t) });
                row.extend(["blowup".to_string()]);
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(fmt(t));
            }
            Err(e) => {
                entries.push(Entry { xi: *pt, status: format!("error: {e}"), psi_t: None, phi_t: None, transform: None, blowup_time: None });
                row.push(format!("error: {e}"));
                row.extend(std::iter::repeat_n(String::new(), 7));
            }
        }
        rows.push(row);
    }
    sink.csv(
        "riccati.csv",
        &[
            "xi1_re", "xi1_im", "xi2_re", "xi2_im", "xi3_re", "xi3_im", "status", "psi_re", "psi_im", "phi_re", "phi_im",
            "transform_re", "transform_im", "blowup_time",
        ],
        &rows,
    )?;
    sink.json("riccati.json", &entries)?;
    Ok(())
}

fn run_measure(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let o = &cfg.measure;
    let e = EsscherParams::new(o.eta, o.eta_bar, o.theta).map_err(ctx("measure"))?;
    let m = to_physical(&cfg.model, &e).map_err(ctx("measure"))?;
    let v = o.v.unwrap_or(cfg.model.v0);
    let (ls, lv) = risk_premiums(v, &cfg.model, &e).map_err(ctx("measure"))?;
    let (cs, cv) = risk_premiums(1.0, &cfg.model, &e).map_err(ctx("measure"))?;
    #[derive(Serialize)]
    struct Report {
        valid: bool,
        params_p: ModelParams<f64>,
        tempering: f64,
        drift_p: (f64, f64),
        premium_coefficients: (f64, f64),
        v: f64,
        lambda_s: f64,
        lambda_v: f64,
    }
    sink.json(
        "measure.json",
        &Report {
            valid: true,
            params_p: m.params,
            tempering: m.tempering,
            drift_p: m.drift,
            premium_coefficients: (cs, cv),
            v,
            lambda_s: ls,
            lambda_v: lv,
        },
    )?;
    Ok(())
}

fn run_poisson(cfg: &ExperimentConfig, root: &RandomStream, sink: &mut Sink) -> Result<(), RunError> {
    let o = &cfg.poisson_limit;
    let setup = PoissonLimitSetup {
        n: o.n,
        c_scale: o.c,
        t: o.t,
        n_reps: o.n_reps,
        steps_per_unit: o.steps_per_unit,
        small_jump_cutoff: cfg.grid.small_jump_cutoff,
    };
    let report = poisson_limit_experiment(&setup, &cfg.model, &root.derive_named("poisson")).map_err(ctx("poisson-limit"))?;
    let rows: Vec<Vec<String>> = (0..report.counts.len())
        .map(|k| vec![k.to_string(), report.counts[k].to_string(), fmt(report.empirical_pmf[k]), fmt(report.target_pmf[k])])
        .collect();
    sink.csv("pmf.csv", &["k", "observed", "empirical_pmf", "target_pmf"], &rows)?;
    sink.json("poisson.json", &report)?;
    Ok(())
}
