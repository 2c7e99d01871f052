//! Self-check batteries behind `check <suite>`, reported as JSON lines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::bladrbf::{consensus_gap, run_bladrbf, validate_graph, CommGraph, Schedule, ScheduleMode};
use crate::blrbf::{has_converged, manage_cuts_logged, primal_dual_step, SolverConfig, SolverState};
use crate::cutting_planes::CuttingPlane;
use crate::error::{Error, Result};
use crate::evaluator::{convexity_probe, finite_diff_grad};
use crate::lower_solver::{g_value, phi, AlmConfig, AlmState};
use crate::model::{
    generate_rayleigh_channels, grad_wsr_delta, grad_wsr_v, sample_error, uniform_radii, wsr, BeamformerVec,
    ChannelSet, ErrorVec, NetworkConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    Convexity,
    Cuts,
    Consensus,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradients" => Ok(Suite::Gradients),
            "convexity" => Ok(Suite::Convexity),
            "cuts" => Ok(Suite::Cuts),
            "consensus" => Ok(Suite::Consensus),
            other => Err(Error::Config(format!(
                "unknown suite '{other}' (expected gradients, convexity, cuts or consensus)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    /// Negative control: probe `-g` instead of `g` in the convexity suite.
    pub inject_fault: bool,
    /// Communication graph for the consensus suite; a ring by default.
    pub graph: Option<CommGraph>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub passed: bool,
    pub lines: Vec<Value>,
}

impl CheckReport {
    pub fn to_json_lines(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

pub fn run_check(suite: Suite, opts: &CheckOptions) -> Result<CheckReport> {
    match suite {
        Suite::Gradients => check_gradients(opts),
        Suite::Convexity => check_convexity(opts),
        Suite::Cuts => check_cuts(opts),
        Suite::Consensus => check_consensus(opts),
    }
}

fn finish(suite: &str, mut lines: Vec<Value>, extra: Value) -> CheckReport {
    let passed = lines.iter().all(|l| l["pass"].as_bool().unwrap_or(false));
    let mut s = json!({"suite": suite, "summary": true, "cases": lines.len(), "pass": passed});
    if let (Value::Object(s), Value::Object(e)) = (&mut s, extra) {
        s.extend(e);
    }
    lines.push(s);
    CheckReport { passed, lines }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(1e-12)
}

/// Point uniform in direction with each BS at a random fraction of its budget.
pub fn random_beamformer(network: &NetworkConfig, rng: &mut ChaCha8Rng) -> BeamformerVec {
    let layout = network.layout();
    let half = layout.v_complex_len();
    let mut v: Vec<f64> = (0..layout.v_len()).map(|_| rng.sample(StandardNormal)).collect();
    for m in 0..network.cells {
        let cur = layout.bs_power(&v, m);
        let target = network.power[m] * rng.random_range(0.0..=1.0f64);
        let s = (target / cur.max(1e-300)).sqrt();
        for i in layout.bs_range(m) {
            v[i] *= s;
            v[half + i] *= s;
        }
    }
    BeamformerVec(v)
}

const GRAD_TOL: f64 = 1e-5;

fn check_gradients(opts: &CheckOptions) -> Result<CheckReport> {
    let mut lines = Vec::new();
    for i in 0..20u64 {
        let seed = opts.seed.wrapping_add(i);
        let (m, n, k) = (1 + i as usize % 3, 1 + (i as usize / 3) % 3, 1 + (i as usize / 2) % 2);
        let net = NetworkConfig::uniform(m, n, k, 1.0 + i as f64);
        let radii = uniform_radii(&net, 0.1);
        let ch = generate_rayleigh_channels(&net, &radii, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_beamformer(&net, &mut rng);
        let d = sample_error(&net.layout(), &radii, seed)?;
        let gv = grad_wsr_v(&net, &ch, &v, &d)?;
        let gd = grad_wsr_delta(&net, &ch, &v, &d)?;
        let fv = finite_diff_grad(|x| wsr(&net, &ch, &BeamformerVec(x.to_vec()), &d).unwrap_or(f64::NAN), &v, 1e-6)?;
        let fd = finite_diff_grad(|x| wsr(&net, &ch, &v, &ErrorVec(x.to_vec())).unwrap_or(f64::NAN), &d, 1e-6)?;
        let (ev, ed) = (rel_err(&gv, &fv), rel_err(&gd, &fd));
        lines.push(json!({
            "suite": "gradients", "case": i, "dims": [m, n, k],
            "rel_err_v": ev, "rel_err_delta": ed,
            "pass": ev <= GRAD_TOL && ed <= GRAD_TOL,
        }));
    }
    Ok(finish("gradients", lines, json!({"tol": GRAD_TOL})))
}

/// Pairs of `(V, Δ)` points of a single-user-per-cell instance.
pub fn convexity_pairs(net: &NetworkConfig, radii: &[f64], count: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = net.layout();
    let point = |rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        let mut x = random_beamformer(net, rng).0;
        x.extend(sample_error(&layout, radii, rng.random())?.0);
        Ok(x)
    };
    (0..count).map(|_| Ok((point(&mut rng)?, point(&mut rng)?))).collect()
}

fn check_convexity(opts: &CheckOptions) -> Result<CheckReport> {
    let tol = 1e-4;
    let ts = [0.25, 0.5, 0.75];
    let mut lines = Vec::new();
    for inst in 0..2u64 {
        let seed = opts.seed.wrapping_add(inst);
        let net = NetworkConfig::uniform(2, 2, 1, 1.0);
        let radii = uniform_radii(&net, 0.1);
        let ch = generate_rayleigh_channels(&net, &radii, seed)?;
        let layout = net.layout();
        let alm = AlmConfig::high_accuracy(1000);
        let init = AlmState::initial(&layout, &radii, None);
        let nv = layout.v_len();
        let sign = if opts.inject_fault { -1.0 } else { 1.0 };
        let g = |x: &[f64]| -> Result<f64> {
            let v = BeamformerVec(x[..nv].to_vec());
            let d = ErrorVec(x[nv..].to_vec());
            Ok(sign * g_value(&d, &phi(&v, &alm, &init, &ch, &net)?)?)
        };
        let pairs = convexity_pairs(&net, &radii, 50, seed)?;
        let rep = convexity_probe(g, &pairs, &ts, tol)?;
        let worst = rep.worst.as_ref();
        lines.push(json!({
            "suite": "convexity", "case": inst, "checks": rep.checks, "violations": rep.violations,
            "worst_pair": worst.map(|w| w.pair), "worst_t": worst.map(|w| w.t),
            "worst_excess": worst.map(|w| w.excess), "fault_injected": opts.inject_fault,
            "pass": rep.passed(),
        }));
    }
    Ok(finish("convexity", lines, json!({"tol": tol, "k_inner": 1000})))
}

/// A generated cut and the iterate it was generated at.
#[derive(Debug, Clone)]
pub struct HarvestedCut {
    pub cut: CuttingPlane,
    pub v: BeamformerVec,
    pub delta: ErrorVec,
}

/// Runs the centralised iteration step by step and keeps every cut it adds
/// together with its query point.
pub fn harvest_cuts(
    network: &NetworkConfig,
    channels: &ChannelSet,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Vec<HarvestedCut>> {
    let mut st = SolverState::initial(network, seed, 0, None)?;
    let mut out = Vec::new();
    while st.t < cfg.max_iters {
        st = primal_dual_step(&st, cfg, network, channels)?;
        if (st.t - 1) % cfg.k_pre == 0 {
            let (next, rep) = manage_cuts_logged(&st, cfg, network, channels)?;
            let ids: Vec<u64> = rep.added_power.iter().map(|(_, id)| *id).chain(rep.added_g).collect();
            for e in next.cuts.iter().filter(|e| ids.contains(&e.cut.id)) {
                out.push(HarvestedCut {
                    cut: e.cut.clone(),
                    v: st.v.clone(),
                    delta: st.delta.clone(),
                });
            }
            st = next;
        }
        if has_converged(&st, cfg) {
            break;
        }
    }
    Ok(out)
}

fn check_cuts(opts: &CheckOptions) -> Result<CheckReport> {
    let net = NetworkConfig::uniform(2, 2, 1, 1.0);
    let radii = uniform_radii(&net, 0.05);
    let cfg = SolverConfig {
        max_iters: 400,
        ..SolverConfig::default()
    };
    let mut cuts = Vec::new();
    let mut runs = 0u64;
    while cuts.len() < 20 && runs < 20 {
        let ch = generate_rayleigh_channels(&net, &radii, opts.seed.wrapping_add(runs))?;
        for h in harvest_cuts(&net, &ch, &cfg, opts.seed.wrapping_add(runs))? {
            cuts.push((runs, ch.clone(), h));
        }
        runs += 1;
    }
    // feasible points: budgets met and Δ = φ(V)
    let samples = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xC075);
    let layout = net.layout();
    let init = AlmState::initial(&layout, &radii, None);
    let mut lines = Vec::new();
    let mut feasible: Vec<(u64, BeamformerVec, ErrorVec)> = Vec::new();
    for run in 0..runs {
        let ch = generate_rayleigh_channels(&net, &radii, opts.seed.wrapping_add(run))?;
        for _ in 0..samples {
            let v = random_beamformer(&net, &mut rng);
            let d = phi(&v, &AlmConfig::high_accuracy(1000), &init, &ch, &net)?;
            feasible.push((run, v, d));
        }
    }
    for (i, (run, _, h)) in cuts.iter().enumerate() {
        let at_query = h.cut.evaluate(&h.v, &h.delta)?;
        let worst = feasible
            .iter()
            .filter(|(r, _, _)| r == run)
            .map(|(_, v, d)| h.cut.eval_unchecked(v, d))
            .fold(f64::NEG_INFINITY, f64::max);
        lines.push(json!({
            "suite": "cuts", "case": i, "run": run, "origin": format!("{:?}", h.cut.origin),
            "residual_at_query": at_query, "max_feasible_residual": worst,
            "pass": at_query > 0.0 && worst <= 1e-9,
        }));
    }
    Ok(finish("cuts", lines, json!({"feasible_samples_per_run": samples})))
}

fn check_consensus(opts: &CheckOptions) -> Result<CheckReport> {
    let net = NetworkConfig::uniform(3, 2, 1, 0.1);
    let graph = match &opts.graph {
        Some(g) => g.clone(),
        None => CommGraph::ring(3)?,
    };
    let cert = validate_graph(&graph);
    if !cert.strongly_connected {
        let line = json!({
            "suite": "consensus", "summary": true, "rejected": true,
            "reason": "graph is not strongly connected",
            "unreachable": cert.unreachable, "pass": false,
        });
        return Ok(CheckReport {
            passed: false,
            lines: vec![line],
        });
    }
    if graph.nodes() != net.cells {
        return Err(Error::dim("communication graph nodes", net.cells, graph.nodes()));
    }
    let cfg = SolverConfig {
        max_iters: 10_000,
        ..SolverConfig::default()
    };
    let tol = 1e-3;
    let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, 0.05), 500 + opts.seed)?;
    let mut lines = Vec::new();
    for mode in [ScheduleMode::RoundRobin, ScheduleMode::Randomized, ScheduleMode::AdversarialLag] {
        let run = run_bladrbf(&net, &ch, &graph, &Schedule::new(mode, opts.seed), &cfg, opts.seed)?;
        let gap = consensus_gap(&run.results);
        let objectives: Vec<f64> = run.results.iter().map(|r| r.objective).collect();
        lines.push(json!({
            "suite": "consensus", "schedule": format!("{mode:?}"), "gap": gap,
            "objectives": objectives, "logical_time": run.logical_time,
            "pass": gap <= tol && !run.budget_exhausted,
        }));
    }
    Ok(finish("consensus", lines, json!({"tol": tol})))
}
