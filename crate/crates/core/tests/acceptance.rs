//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (bypassing output capture) and then asserts.
//!
//! Tests take a shared lock so that runtime budgets are measured without
//! competing work.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustbf::bladrbf::{consensus_gap, run_bladrbf, CommGraph, Schedule, ScheduleMode};
use robustbf::blrbf::{
    has_converged, manage_cuts_logged, primal_dual_step, restart_seeds, run_blrbf, run_blrbf_multistart, IterRecord,
    SolverConfig, SolverState,
};
use robustbf::cutting_planes::{CutOrigin, CuttingPlane};
use robustbf::evaluator::{wmmse_multistart, worst_case_wsr, WorstCaseSettings};
use robustbf::experiment::{cmd_run, harvest_cuts, parse_config};
use robustbf::lower_solver::{g_value, phi, AlmConfig, AlmState};
use robustbf::model::*;

static LOCK: Mutex<()> = Mutex::new(());

fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("[acceptance] {name}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn snr_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Uniform direction, each BS at a uniform fraction of its budget.
fn feasible_v(net: &NetworkConfig, rng: &mut ChaCha8Rng) -> BeamformerVec {
    let l = net.layout();
    let half = l.v_complex_len();
    let mut v: Vec<f64> = (0..l.v_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    for m in 0..net.cells {
        let s = (net.power[m] * rng.random_range(0.0..1.0) / l.bs_power(&v, m)).sqrt();
        for i in l.bs_range(m) {
            v[i] *= s;
            v[half + i] *= s;
        }
    }
    BeamformerVec(v)
}

fn in_ball_delta(net: &NetworkConfig, eps: f64, rng: &mut ChaCha8Rng) -> ErrorVec {
    let l = net.layout();
    let mut d: Vec<f64> = (0..l.delta_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    for b in 0..l.num_blocks() {
        let s = eps * rng.random_range(0.0..1.0) / l.delta_block_norm(&d, b);
        l.scale_delta_block(&mut d, b, s);
    }
    ErrorVec(d)
}

#[test]
fn criterion_1_perfect_csi_parity() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let restarts = 16;
    let mut worst = 0.0f64;
    let mut fails = Vec::new();
    for snr in [0.0, 10.0, 20.0] {
        let net = NetworkConfig::uniform(2, 2, 2, snr_power(snr));
        for r in 0..10u64 {
            let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.0), 1000 + r).unwrap();
            let b = run_blrbf_multistart(&net, &ch, &cfg, &restart_seeds(r, restarts)).unwrap();
            let w = wmmse_multistart(&net, &ch, 500, 1e-8, &restart_seeds(r, restarts)).unwrap();
            let rel = (b.objective - w.wsr) / w.wsr;
            worst = worst.max(rel.abs());
            if rel.abs() > 0.05 {
                fails.push(format!("{snr}dB r{r} blrbf {:.4} wmmse {:.4} ({rel:+.3})", b.objective, w.wsr));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = fails.is_empty() && secs < 60.0;
    report(
        "criterion 1 (perfect-CSI parity with WMMSE)",
        pass,
        &format!("max |rel diff| {worst:.4} (tol 0.05), {secs:.1}s (budget 60s) {fails:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_uncertainty_monotonicity() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = SolverConfig::default();
    let eps = [0.0, 0.05, 0.1];
    let mut ok = true;
    let mut detail = String::new();
    for snr in [0.0, 10.0, 20.0] {
        let net = NetworkConfig::uniform(2, 2, 2, snr_power(snr));
        let mut med = Vec::new();
        for &e in &eps {
            let vals: Vec<f64> = (0..10u64)
                .map(|r| {
                    let base = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.1), 1000 + r).unwrap();
                    run_blrbf(&net, &base.with_uniform_radius(e), &cfg, r).unwrap().objective
                })
                .collect();
            med.push(median(&vals));
        }
        ok &= med.windows(2).all(|w| w[1] <= w[0] + 1e-6);
        detail += &format!("{snr}dB medians {med:.4?}; ");
    }
    report("criterion 2 (worst-case WSR nonincreasing in ε)", ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_3_high_snr_saturation() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = SolverConfig {
        max_iters: 3000,
        ..SolverConfig::default()
    };
    let mut med = Vec::new();
    for snr in [0.0, 10.0, 30.0, 40.0] {
        let net = NetworkConfig::uniform(3, 4, 3, snr_power(snr));
        let vals: Vec<f64> = (0..10u64)
            .map(|r| {
                let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.1), 2000 + r).unwrap();
                run_blrbf(&net, &ch, &cfg, r).unwrap().objective
            })
            .collect();
        med.push(median(&vals));
    }
    let secs = start.elapsed().as_secs_f64();
    let ratio = (med[3] - med[2]) / (med[1] - med[0]);
    let pass = ratio <= 0.25 && secs < 600.0;
    report(
        "criterion 3 (high-SNR saturation)",
        pass,
        &format!("medians at 0/10/30/40 dB {med:.3?}, gain ratio {ratio:.3} (max 0.25), {secs:.0}s (budget 600s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_convexity_of_g() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let net = NetworkConfig::uniform(2, 2, 1, 1.0);
    let eps = 0.1;
    let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, eps), 41).unwrap();
    let l = net.layout();
    let alm = AlmConfig::high_accuracy(1000);
    let init = AlmState::initial(&l, &ch.radii, None);
    let g = |v: &BeamformerVec, d: &ErrorVec| g_value(d, &phi(v, &alm, &init, &ch, &net).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut violations, mut worst) = (0, f64::NEG_INFINITY);
    for _ in 0..100 {
        let (v1, d1) = (feasible_v(&net, &mut rng), in_ball_delta(&net, eps, &mut rng));
        let (v2, d2) = (feasible_v(&net, &mut rng), in_ball_delta(&net, eps, &mut rng));
        let (g1, g2) = (g(&v1, &d1), g(&v2, &d2));
        for t in [0.25, 0.5, 0.75] {
            let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect::<Vec<_>>();
            let gm = g(&BeamformerVec(mix(&v1, &v2)), &ErrorVec(mix(&d1, &d2)));
            let excess = gm - t * g1 - (1.0 - t) * g2;
            worst = worst.max(excess);
            if excess > 1e-4 {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    report(
        "criterion 4 (convexity probe of g, K=1)",
        pass,
        &format!("{violations}/300 violations, worst excess {worst:.3e} (tol 1e-4, K_inner 1000)"),
    );
    assert!(pass);
}

/// Constraint of the independent cut-polytope solve, on `x = (V, Δ)`.
enum Set {
    Half(Vec<f64>, f64),
    /// Indices and squared radius.
    Ball(Vec<usize>, f64),
}

impl Set {
    fn project(&self, x: &mut [f64]) {
        match self {
            Set::Half(w, k) => {
                let r: f64 = w.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() + k;
                let nn: f64 = w.iter().map(|a| a * a).sum();
                if r > 0.0 && nn > 0.0 {
                    x.iter_mut().zip(w).for_each(|(xi, wi)| *xi -= r / nn * wi);
                }
            }
            Set::Ball(idx, r2) => {
                let n2: f64 = idx.iter().map(|&i| x[i] * x[i]).sum();
                if n2 > *r2 {
                    let s = (r2 / n2).sqrt();
                    idx.iter().for_each(|&i| x[i] *= s);
                }
            }
        }
    }

    fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Set::Half(w, k) => w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + k,
            Set::Ball(idx, r2) => idx.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt() - r2.sqrt(),
        }
    }
}

/// Euclidean projection onto an intersection by Dykstra's method.
fn dykstra(sets: &[Set], x0: &[f64]) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut inc = vec![vec![0.0; x.len()]; sets.len()];
    for _ in 0..5_000 {
        let prev = x.clone();
        for (s, p) in sets.iter().zip(inc.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
            let mut z = y.clone();
            s.project(&mut z);
            for i in 0..x.len() {
                p[i] = y[i] - z[i];
            }
            x = z;
        }
        let ch: f64 = x.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if ch < 1e-13 {
            break;
        }
    }
    x
}

/// Projected gradient ascent of `f` over the cuts intersected with the power
/// and error balls, by an Armijo search along the projection arc.
fn polytope_optimum(net: &NetworkConfig, ch: &ChannelSet, sets: &[Set], starts: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let nv = net.layout().v_len();
    let f = |x: &[f64]| wsr(net, ch, &BeamformerVec(x[..nv].to_vec()), &ErrorVec(x[nv..].to_vec())).unwrap();
    let grad = |x: &[f64]| {
        let (v, d) = (BeamformerVec(x[..nv].to_vec()), ErrorVec(x[nv..].to_vec()));
        let mut g = grad_wsr_v(net, ch, &v, &d).unwrap();
        g.extend(grad_wsr_delta(net, ch, &v, &d).unwrap());
        g
    };
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for s0 in starts {
        let mut x = dykstra(sets, s0);
        let mut fx = f(&x);
        let mut step = 1.0;
        for _ in 0..1000 {
            let g = grad(&x);
            let mut gain = 0.0;
            while step > 1e-14 {
                let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                let y = dykstra(sets, &y);
                let fy = f(&y);
                let d2: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                if fy >= fx + 1e-4 * d2 / step {
                    gain = fy - fx;
                    x = y;
                    fx = fy;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if gain < 1e-12 {
                break;
            }
        }
        if fx > best.0 {
            best = (fx, x);
        }
    }
    best
}

#[test]
fn criterion_5_cut_polytope_optimum_monotone() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let net = NetworkConfig::uniform(2, 2, 1, 1.0);
    let eps = 0.05;
    let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, eps), 7).unwrap();
    let cfg = SolverConfig {
        max_iters: 400,
        ..SolverConfig::default()
    };
    let l = net.layout();
    let nv = l.v_len();
    let half_v = l.v_complex_len();
    let half_d = l.delta_complex_len();
    let mut balls: Vec<Set> = (0..net.cells)
        .map(|m| Set::Ball(l.bs_range(m).flat_map(|i| [i, half_v + i]).collect(), net.power[m]))
        .collect();
    for b in 0..l.num_blocks() {
        let off = b * l.antennas;
        let idx = (off..off + l.antennas).flat_map(|j| [nv + j, nv + half_d + j]).collect();
        balls.push(Set::Ball(idx, eps * eps));
    }
    let to_set = |c: &CuttingPlane| {
        let mut w = c.a.clone();
        w.extend(if c.b.is_empty() { vec![0.0; l.delta_len()] } else { c.b.clone() });
        Set::Half(w, c.kappa)
    };
    let mut st = SolverState::initial(&net, 3, 0, None).unwrap();
    let mut values: Vec<f64> = Vec::new();
    let mut prev_opt: Option<Vec<f64>> = None;
    let mut worst_violation = 0.0f64;
    while st.t < cfg.max_iters {
        st = primal_dual_step(&st, &cfg, &net, &ch).unwrap();
        if !(st.t - 1).is_multiple_of(cfg.k_pre) {
            continue;
        }
        st = manage_cuts_logged(&st, &cfg, &net, &ch).unwrap().0;
        let mut sets: Vec<Set> = st.cuts.cuts().map(to_set).collect();
        sets.extend(balls.iter().map(|b| match b {
            Set::Ball(i, r) => Set::Ball(i.clone(), *r),
            Set::Half(w, k) => Set::Half(w.clone(), *k),
        }));
        let mut here = st.v.0.clone();
        here.extend(&st.delta.0);
        let mut starts = vec![here, vec![0.0; nv + l.delta_len()]];
        starts.extend(prev_opt.clone());
        let (fx, x) = polytope_optimum(&net, &ch, &sets, &starts);
        worst_violation = sets.iter().map(|s| s.violation(&x)).fold(worst_violation, f64::max);
        values.push(-fx);
        prev_opt = Some(x);
        if has_converged(&st, &cfg) {
            break;
        }
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= -1e-6);
    let tail = diffs.iter().rev().take(3).all(|d| d.abs() < 1e-4);
    let pass = values.len() >= 10 && monotone && tail;
    let worst_drop = diffs.iter().copied().fold(0.0, f64::min);
    report(
        "criterion 5 (cut-polytope optimum monotone and settling)",
        pass,
        &format!(
            "{} events, worst decrease {worst_drop:.3e} (tol 1e-6), last diffs {:?}, largest constraint violation of a solve {worst_violation:.1e}",
            values.len(),
            diffs[diffs.len().saturating_sub(3)..].iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_cut_validity() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let net = NetworkConfig::uniform(2, 2, 1, 1.0);
    let eps = 0.05;
    let radii = uniform_radii(&net, eps);
    let cfg = SolverConfig {
        max_iters: 400,
        ..SolverConfig::default()
    };
    let alm = AlmConfig::high_accuracy(1000);
    let init = AlmState::initial(&net.layout(), &radii, None);
    let (mut cuts, mut no_sep, mut excluding, mut worst) = (0, 0, 0, f64::NEG_INFINITY);
    let (mut power_cuts, mut power_excluding) = (0, 0);
    let mut seed = 0u64;
    while cuts < 50 {
        let ch = generate_rayleigh_channels(&net, &radii, 60 + seed).unwrap();
        let harvested = harvest_cuts(&net, &ch, &cfg, seed).unwrap();
        // truly feasible: budgets met and Δ at the worst case
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let samples: Vec<(BeamformerVec, ErrorVec)> = (0..1000)
            .map(|_| {
                let v = feasible_v(&net, &mut rng);
                let d = phi(&v, &alm, &init, &ch, &net).unwrap();
                (v, d)
            })
            .collect();
        for h in &harvested {
            cuts += 1;
            if h.cut.evaluate(&h.v, &h.delta).unwrap() <= 0.0 {
                no_sep += 1;
            }
            let r = samples
                .iter()
                .map(|(v, d)| h.cut.evaluate(v, d).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(r);
            let is_power = matches!(h.cut.origin, CutOrigin::Power(_));
            power_cuts += usize::from(is_power);
            if r > 1e-9 {
                excluding += 1;
                power_excluding += usize::from(is_power);
            }
        }
        seed += 1;
    }
    let pass = no_sep == 0 && excluding == 0;
    report(
        "criterion 6 (cuts separate their query and keep feasible points)",
        pass,
        &format!(
            "{cuts} cuts over {seed} runs: {no_sep} fail to separate, {excluding} exclude sampled feasible points ({power_excluding} of {power_cuts} power cuts, {} of {} g cuts; worst residual {worst:.3e}, tol 1e-9)",
            excluding - power_excluding,
            cuts - power_cuts
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_consensus() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let net = NetworkConfig::uniform(3, 2, 1, 0.1);
    let cfg = SolverConfig {
        max_iters: 10_000,
        ..SolverConfig::default()
    };
    let graphs = [
        ("ring", CommGraph::ring(3).unwrap()),
        ("complete", CommGraph::complete(3).unwrap()),
        ("random", CommGraph::random_strongly_connected(3, 0.3, 11).unwrap()),
    ];
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    let mut runs = 0;
    for (name, g) in &graphs {
        for mode in [ScheduleMode::RoundRobin, ScheduleMode::Randomized, ScheduleMode::AdversarialLag] {
            for seed in 0..3u64 {
                let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.05), 500 + seed).unwrap();
                let run = run_bladrbf(&net, &ch, g, &Schedule::new(mode, seed), &cfg, seed).unwrap();
                let gap = consensus_gap(&run.results);
                runs += 1;
                worst = worst.max(gap);
                if gap > 1e-3 || run.budget_exhausted {
                    bad.push(format!("{name}/{mode:?}/{seed}: {gap:.2e}"));
                }
            }
        }
    }
    let pass = bad.is_empty();
    report(
        "criterion 7 (consensus across graphs and schedules)",
        pass,
        &format!("{runs} runs, worst gap {worst:.2e} (tol 1e-3) {bad:?}"),
    );
    assert!(pass);
}

/// First iteration at which the objective is within 1% of its final value.
fn iters_to_one_percent(h: &[IterRecord]) -> u64 {
    let Some(last) = h.last() else { return 0 };
    h.iter().find(|r| (r.f - last.f).abs() <= 0.01 * last.f.abs()).map_or(last.t, |r| r.t)
}

/// First iteration after which the objective stays within 1% of its final value.
fn iters_to_stay_within_one_percent(h: &[IterRecord]) -> u64 {
    let Some(last) = h.last() else { return 0 };
    let mut t = last.t;
    for r in h.iter().rev() {
        if (r.f - last.f).abs() > 0.01 * last.f.abs() {
            break;
        }
        t = r.t;
    }
    t
}

#[test]
fn criterion_8_distributed_converges_faster() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let net = NetworkConfig::uniform(3, 4, 3, 10.0);
    let cfg = SolverConfig {
        max_iters: 2000,
        ..SolverConfig::default()
    };
    let graph = CommGraph::ring(3).unwrap();
    let (mut central, mut dist) = (Vec::new(), Vec::new());
    let (mut central_stay, mut dist_stay) = (Vec::new(), Vec::new());
    for seed in 0..10u64 {
        let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.1), 3000 + seed).unwrap();
        let c = run_blrbf(&net, &ch, &cfg, seed).unwrap();
        central.push(iters_to_one_percent(&c.history) as f64);
        central_stay.push(iters_to_stay_within_one_percent(&c.history) as f64);
        let run = run_bladrbf(&net, &ch, &graph, &Schedule::new(ScheduleMode::Randomized, seed), &cfg, seed).unwrap();
        let node = |m: fn(&[IterRecord]) -> u64| median(&run.results.iter().map(|r| m(&r.history) as f64).collect::<Vec<_>>());
        dist.push(node(iters_to_one_percent));
        dist_stay.push(node(iters_to_stay_within_one_percent));
    }
    let (mc, md) = (median(&central), median(&dist));
    let pass = md <= mc;
    report(
        "criterion 8 (distributed node reaches 1% of final no later)",
        pass,
        &format!(
            "median first iteration within 1%: BLADRBF node {md:.0}, BLRBF {mc:.0}; staying within 1% from then on: {:.0} vs {:.0} (cap {})",
            median(&dist_stay),
            median(&central_stay),
            cfg.max_iters
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_numerical_hygiene() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    // analytic gradients against central differences
    let mut worst_grad = 0.0f64;
    for i in 0..20u64 {
        let (m, n, k) = (1 + i as usize % 3, 1 + (i as usize / 2) % 3, 1 + (i as usize / 5) % 2);
        let net = NetworkConfig::uniform(m, n, k, 0.5 + i as f64);
        let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.1), 90 + i).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let v = feasible_v(&net, &mut rng);
        let d = in_ball_delta(&net, 0.1, &mut rng);
        let mut x = v.0.clone();
        x.extend(&d.0);
        let nv = v.len();
        let f = |x: &[f64]| wsr(&net, &ch, &BeamformerVec(x[..nv].to_vec()), &ErrorVec(x[nv..].to_vec())).unwrap();
        let mut analytic = grad_wsr_v(&net, &ch, &v, &d).unwrap();
        analytic.extend(grad_wsr_delta(&net, &ch, &v, &d).unwrap());
        let h = 1e-6;
        let numeric: Vec<f64> = (0..x.len())
            .map(|j| {
                let (mut p, mut q) = (x.clone(), x.clone());
                p[j] += h;
                q[j] -= h;
                (f(&p) - f(&q)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst_grad = worst_grad.max(diff / norm.max(1e-12));
    }
    let grad_ok = worst_grad <= 1e-5;

    // oracle dominance
    let settings = WorstCaseSettings::default();
    let mut worst_dom = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let (m, k) = (1 + i as usize % 3, 1 + (i as usize / 3) % 2);
        let net = NetworkConfig::uniform(m, 2, k, snr_power([0.0, 10.0, 20.0, 30.0, 40.0][i as usize % 5]));
        let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.1), 700 + i).unwrap();
        let v = feasible_v(&net, &mut ChaCha8Rng::seed_from_u64(i));
        let rep = worst_case_wsr(&net, &ch, &v, settings.starts, settings.samples, &settings.inner, i).unwrap();
        worst_dom = worst_dom.max(rep.wsr_alm - rep.wsr_sampling);
    }
    let dom_ok = worst_dom <= 1e-9;

    // determinism of every written CSV
    let cfg = parse_config(
        "[network]\ncells = 3\nantennas = 2\nusers = 1\nsnr_db = [0, 10]\n\
         [uncertainty]\nepsilon = [0.0, 0.05]\n\
         [algorithm]\nkind = [\"blrbf\", \"bladrbf\", \"wmmse\"]\n\
         [algorithm.solver]\nmax_iters = 200\n\
         [algorithm.distributed]\nschedule = \"randomized\"\n\
         [run]\nseeds = [5]\nrealizations = 2\n",
    )
    .unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (mut ea, mut eb) = (Vec::new(), Vec::new());
    let oa = cmd_run(&cfg, a.path(), &mut ea).unwrap();
    cmd_run(&cfg, b.path(), &mut eb).unwrap();
    let mut identical = 0;
    let mut differing = Vec::new();
    for p in &oa.artifacts {
        let rel = p.strip_prefix(a.path()).unwrap();
        if std::fs::read(p).unwrap() == std::fs::read(b.path().join(rel)).unwrap() {
            identical += 1;
        } else {
            differing.push(rel.display().to_string());
        }
    }
    let det_ok = differing.is_empty() && identical > 0;

    let pass = grad_ok && dom_ok && det_ok;
    report(
        "criterion 9 (gradients, oracle dominance, determinism)",
        pass,
        &format!(
            "max grad rel err {worst_grad:.2e} (tol 1e-5), max wsr_alm - wsr_sampling {worst_dom:.2e} (tol 1e-9), {identical} identical files, differing {differing:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn smoke_large_instance() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let net = NetworkConfig::uniform(4, 16, 4, 10.0);
    let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.05), 77).unwrap();
    let cfg = SolverConfig {
        max_iters: 1000,
        ..SolverConfig::default()
    };
    let res = run_blrbf(&net, &ch, &cfg, 0);
    let secs = start.elapsed().as_secs_f64();
    let detail = match &res {
        Ok(r) => format!("worst-case WSR {:.3} after {} iterations, {secs:.0}s (budget 900s)", r.objective, r.iterations),
        Err(e) => format!("{e}"),
    };
    let pass = res.as_ref().is_ok_and(|r| r.objective.is_finite()) && secs < 900.0;
    report("smoke (M=4, K=4, N=16)", pass, &detail);
    assert!(pass);
}
