mod common;

use alpha_heston::clusters::{
    build_decomposition, duration_tail_bound, sample_jump_size, sample_mother_jumps, simulate_cluster, simulate_fundamental,
    ClusterConfig, MotherJump,
};
use alpha_heston::levy::levy_tail_mass;
use alpha_heston::riccati::vbar;
use alpha_heston::sde::SimGrid;
use alpha_heston::stats::{ks_one_sample, Welford};
use alpha_heston::RandomStream;
use common::*;

fn config(y: f64, t: f64, steps: usize) -> ClusterConfig<f64> {
    ClusterConfig::new(y, 1.0, SimGrid::new(t, steps, 1e-2).unwrap()).unwrap()
}

#[test]
fn jumps_split_at_the_threshold() {
    let p = base_params();
    let c = config(0.1, 14.0, 1400);
    for seed in 0..20 {
        let d = build_decomposition(&p, &c, &RandomStream::new(70 + seed)).unwrap();
        assert!(d.fundamental.jumps.iter().all(|j| j.size <= c.threshold.y));
        assert!(d.clusters.iter().all(|cl| cl.mother.size > c.threshold.y));
        assert!(d.composed.values.iter().all(|v| *v >= 0.0));
        assert!(d.composed.values.iter().zip(&d.fundamental.values).all(|(v, f)| v >= f));
    }
}

#[test]
fn arrivals_given_the_fundamental_are_a_time_changed_poisson_process() {
    let p = base_params();
    let c = config(0.05, 5.0, 500);
    let f = simulate_fundamental(&p, &c, &mut RandomStream::new(80)).unwrap();
    let tail = levy_tail_mass(p.alpha, c.threshold.y_bar).unwrap();
    let dt = c.grid.dt();
    // left-endpoint compensator Λ(t_i) on the grid
    let mut lam = vec![0.0];
    for v in &f.values[..f.values.len() - 1] {
        lam.push(lam.last().unwrap() + tail * v * dt);
    }
    let total = *lam.last().unwrap();
    let at = |t: f64| {
        let i = ((t / dt).floor() as usize).min(lam.len() - 2);
        lam[i] + tail * f.values[i] * (t - i as f64 * dt)
    };

    let root = RandomStream::new(81);
    let mut counts = Welford::new();
    let mut fractions = Vec::new();
    for rep in 0..4000u64 {
        let m = sample_mother_jumps(&f, &c, p.alpha, &mut root.derive(2 * rep), &mut root.derive(2 * rep + 1)).unwrap();
        counts.push(m.len() as f64);
        fractions.extend(m.iter().map(|j| at(j.time) / total));
    }
    let z = (counts.mean() - total) / counts.std_err();
    assert!(z.abs() < 3.5, "mean count {} vs {total}", counts.mean());
    assert!((counts.variance() / total - 1.0).abs() < 0.1, "dispersion {}", counts.variance() / total);
    let ks = ks_one_sample(&fractions, |u| u.clamp(0.0, 1.0));
    assert!(ks.p_value > 1e-3, "KS p = {}", ks.p_value);
}

#[test]
fn cluster_durations_respect_the_tail_bound() {
    let p = base_params();
    let c = ClusterConfig::new(0.1, 1.0, SimGrid::new(14.0, 14_000, 1e-3).unwrap()).unwrap();
    let marks = RandomStream::new(90);
    let root = RandomStream::new(91);
    let durations: Vec<f64> = (0..2000u64)
        .map(|n| {
            let size = sample_jump_size(p.alpha, c.threshold.y, &mut marks.derive(n));
            let cl = simulate_cluster(&p, &c, MotherJump { time: 0.0, size }, 14.0, &mut root.derive(n)).unwrap();
            cl.duration.expect("cluster absorbed before the cap")
        })
        .collect();
    let q1 = vbar(1.0, &p).unwrap();
    for t in [1.2, 1.5, 2.0] {
        let emp = durations.iter().filter(|d| **d > t).count() as f64 / durations.len() as f64;
        let bound = duration_tail_bound(t, &p, &c, q1).unwrap();
        let se = (emp * (1.0 - emp) / durations.len() as f64).sqrt();
        assert!(emp <= bound + 3.0 * se, "P(theta > {t}) = {emp} above bound {bound}");
    }
}
