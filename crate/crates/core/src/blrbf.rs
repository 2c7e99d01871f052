//! Centralised robust beamforming by primal-dual iterations on a growing set
//! of cutting planes.
//!
//! The single-level relaxation maximises `f(V, Δ)` subject to the power
//! budgets and `g(V, Δ) <= ε`. Both constraint families are replaced by
//! linear cuts generated at query points every `k_pre` iterations; between
//! refreshes the solver runs simultaneous gradient steps on
//! `L = -f + Σ λ_i (a_iᵀV + b_iᵀΔ + κ_i)`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cutting_planes::{g_cut, power_cut, CutIdGen, CutOrigin, CutSet, DUAL_ZERO_TOL};
use crate::error::{Divergence, Error, Result};
use crate::evaluator::{worst_case_wsr, WorstCaseReport, WorstCaseSettings};
use crate::lower_solver::{delta_block_scale, g_value, grad_g, phi, AlmConfig, AlmState};
use crate::model::{BeamformerVec, ChannelSet, ErrorVec, NetworkConfig, Received};

/// How the dual step of each cut is sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualStep {
    /// `η_λ` for every cut.
    Uniform,
    /// `η_λ / ||(a_i, b_i)||^2`, which makes the iteration invariant to the
    /// scaling of a cut's coefficients.
    #[default]
    Normalized,
}

/// Multiplier applied to `η_V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VStepScale {
    Unit,
    /// `sqrt(max_m P_m)`.
    #[default]
    SqrtPower,
    /// `max_m P_m`.
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eta_v: f64,
    pub eta_delta: f64,
    pub eta_lambda: f64,
    pub k_pre: u64,
    pub eps_tol: f64,
    pub max_iters: u64,
    pub conv_tol: f64,
    pub conv_window: usize,
    pub inner: AlmConfig,
    pub v_step_scale: VStepScale,
    /// Relaxation of the projection sweep run after every primal step: each
    /// violated cut in turn has this fraction of its violation removed.
    /// Feasible points are left alone; `0` gives the plain primal-dual step.
    pub cut_penalty: f64,
    /// Scale the `Δ` step per block as the inner solver does.
    pub precondition_delta: bool,
    pub dual_step: DualStep,
    /// Move `Δ` onto the refreshed `φ(V)` after every cut-management event.
    pub reset_delta: bool,
    /// Imported cuts survive inactivity pruning for this many multiples of
    /// `k_pre` local iterations unless they have been active.
    pub import_grace: u64,
    /// Drop `g` cuts that exclude the current `(V, φ(V))`.
    pub refute_cuts: bool,
    pub report: WorstCaseSettings,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eta_v: 1e-2,
            eta_delta: 1e-2,
            eta_lambda: 1e-1,
            k_pre: 20,
            eps_tol: 1e-4,
            max_iters: 5000,
            conv_tol: 1e-6,
            conv_window: 50,
            inner: AlmConfig::default(),
            v_step_scale: VStepScale::SqrtPower,
            cut_penalty: 0.5,
            precondition_delta: true,
            dual_step: DualStep::Normalized,
            reset_delta: false,
            import_grace: 5,
            refute_cuts: true,
            report: WorstCaseSettings::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let step = |x: f64| x.is_finite() && x >= 0.0;
        if !(step(self.eta_v) && step(self.eta_delta) && step(self.eta_lambda) && step(self.cut_penalty)) {
            return Err(Error::Config("step sizes must be finite and >= 0".into()));
        }
        if self.k_pre == 0 {
            return Err(Error::Config("k_pre must be >= 1".into()));
        }
        if !(self.eps_tol.is_finite() && self.eps_tol >= 0.0) {
            return Err(Error::Config("eps_tol must be finite and >= 0".into()));
        }
        if !(self.conv_tol.is_finite() && self.conv_tol >= 0.0) || self.conv_window == 0 {
            return Err(Error::Config("convergence window must be >= 1 with a finite tolerance".into()));
        }
        self.inner.validate()?;
        self.report.inner.validate()
    }
}

/// One row of the iteration history, taken at the incoming state of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub t: u64,
    pub f: f64,
    pub lagrangian: f64,
    pub max_power_violation: f64,
    /// `||Δ - φ||^2` against the cached `φ`.
    pub g: f64,
    pub num_cuts: usize,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub v: BeamformerVec,
    pub delta: ErrorVec,
    pub cuts: CutSet,
    pub t: u64,
    pub phi_cache: ErrorVec,
    pub history: Vec<IterRecord>,
    /// Restricts power cuts to one BS; `None` cuts every violated budget.
    pub power_owner: Option<usize>,
    /// Iteration of the most recent cut insertion.
    pub last_cut_added: Option<u64>,
    pub(crate) ids: CutIdGen,
}

/// Seeded start: entries uniform in `[-1, 1]`, rescaled so that
/// `||V̂_m||_F^2 = P_m / 2` for every BS.
pub fn initial_beamformer(network: &NetworkConfig, seed: u64) -> Result<BeamformerVec> {
    network.validate()?;
    let layout = network.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = BeamformerVec((0..layout.v_len()).map(|_| rng.random_range(-1.0..=1.0)).collect());
    let half = layout.v_complex_len();
    for (m, p) in network.power.iter().enumerate() {
        let cur = layout.bs_power(&v, m);
        let s = if cur > 0.0 { (0.5 * p / cur).sqrt() } else { 0.0 };
        for i in layout.bs_range(m) {
            v[i] *= s;
            v[half + i] *= s;
        }
    }
    Ok(v)
}

impl SolverState {
    /// [`initial_beamformer`] with `Δ = 0` and no cuts.
    pub fn initial(network: &NetworkConfig, seed: u64, owner: usize, power_owner: Option<usize>) -> Result<Self> {
        let layout = network.layout();
        let v = initial_beamformer(network, seed)?;
        Ok(SolverState {
            v,
            delta: ErrorVec::zeros(layout.delta_len()),
            cuts: CutSet::new(),
            t: 0,
            phi_cache: ErrorVec::zeros(layout.delta_len()),
            history: Vec::new(),
            power_owner,
            last_cut_added: None,
            ids: CutIdGen::new(owner),
        })
    }

    fn check(&self, network: &NetworkConfig) -> Result<()> {
        let layout = network.layout();
        self.v.check(&layout)?;
        self.delta.check(&layout)?;
        self.phi_cache.check(&layout)?;
        for cp in self.cuts.cuts() {
            if cp.a.len() != layout.v_len() {
                return Err(Error::dim("cut a-coefficients", layout.v_len(), cp.a.len()));
            }
            if !cp.b.is_empty() && cp.b.len() != layout.delta_len() {
                return Err(Error::dim("cut b-coefficients", layout.delta_len(), cp.b.len()));
            }
        }
        if let Some(m) = self.power_owner {
            if m >= network.cells {
                return Err(Error::Domain(format!("power owner {m} out of range")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Last iterate scaled onto the power budgets where it exceeds them.
    pub v_final: BeamformerVec,
    /// Last iterate as produced by the iteration.
    pub v_iterate: BeamformerVec,
    pub delta_final: ErrorVec,
    /// Worst-case sum-rate at `v_final`.
    pub objective: f64,
    /// `f(V_final, Δ_final)`.
    pub nominal_wsr: f64,
    pub report: WorstCaseReport,
    pub history: Vec<IterRecord>,
    pub cuts: CutSet,
    pub iterations: u64,
    pub termination: Termination,
}

/// Cuts touched by one cut-management event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManageReport {
    /// Every cut removed, inactive or refuted.
    pub dropped: Vec<u64>,
    /// `g` cuts violated at the feasible point `(V, φ(V))`.
    pub refuted: Vec<u64>,
    pub added_power: Vec<(usize, u64)>,
    pub added_g: Option<u64>,
    /// `g` at the query, against the refreshed `φ`.
    pub g: f64,
}

fn max_violation(network: &NetworkConfig, v: &BeamformerVec) -> f64 {
    let layout = network.layout();
    (0..network.cells)
        .map(|m| layout.bs_power(v, m) - network.power[m])
        .fold(0.0, f64::max)
}

fn residuals(state: &SolverState) -> Vec<f64> {
    state
        .cuts
        .cuts()
        .map(|c| c.eval_unchecked(&state.v, &state.delta))
        .collect()
}

/// `L(V, Δ, λ) = -f(V, Δ) + Σ λ_i (a_iᵀV + b_iᵀΔ + κ_i)`.
pub fn lagrangian(state: &SolverState, network: &NetworkConfig, channels: &ChannelSet) -> Result<f64> {
    state.check(network)?;
    let f = Received::new(network, channels, &state.v, &state.delta)?.wsr();
    let pen: f64 = residuals(state)
        .iter()
        .zip(state.cuts.iter())
        .map(|(r, e)| e.lambda * r)
        .sum();
    Ok(pen - f)
}

fn diverged(state: &SolverState, iteration: u64) -> Error {
    Error::Diverged(Box::new(Divergence {
        iteration: iteration as usize,
        node: None,
        logical_time: None,
        history: state.history.clone(),
    }))
}

/// One simultaneous primal-descent / dual-ascent step on `L`.
pub fn primal_dual_step(
    state: &SolverState,
    cfg: &SolverConfig,
    network: &NetworkConfig,
    channels: &ChannelSet,
) -> Result<SolverState> {
    state.check(network)?;
    channels.check_against(network)?;
    let layout = network.layout();
    let rec = Received::new(network, channels, &state.v, &state.delta)?;
    let f = rec.wsr();
    let mut gv: Vec<f64> = rec.grad_v().iter().map(|x| -x).collect();
    let mut gd: Vec<f64> = rec.grad_delta().iter().map(|x| -x).collect();
    let eta_v = cfg.eta_v
        * match cfg.v_step_scale {
            VStepScale::Unit => 1.0,
            VStepScale::SqrtPower => network.max_power().sqrt(),
            VStepScale::Power => network.max_power(),
        };
    let res = residuals(state);
    let mut lag = -f;
    for (e, r) in state.cuts.iter().zip(&res) {
        lag += e.lambda * r;
        let w = e.lambda;
        if w != 0.0 {
            for (g, a) in gv.iter_mut().zip(&e.cut.a) {
                *g += w * a;
            }
            for (g, b) in gd.iter_mut().zip(&e.cut.b) {
                *g += w * b;
            }
        }
    }
    let mut next = state.clone();
    next.history.push(IterRecord {
        t: state.t,
        f,
        lagrangian: lag,
        max_power_violation: max_violation(network, &state.v),
        g: g_value(&state.delta, &state.phi_cache)?,
        num_cuts: state.cuts.len(),
    });

    for (x, g) in next.v.iter_mut().zip(&gv) {
        *x -= eta_v * g;
    }
    if cfg.precondition_delta {
        let scale = delta_block_scale(network, &state.v, rec.interference());
        let (half, n) = (layout.delta_complex_len(), layout.antennas);
        for (b, s) in scale.iter().enumerate() {
            for i in (b * n..(b + 1) * n).chain(half + b * n..half + (b + 1) * n) {
                next.delta[i] -= cfg.eta_delta * s * gd[i];
            }
        }
    } else {
        for (x, g) in next.delta.iter_mut().zip(&gd) {
            *x -= cfg.eta_delta * g;
        }
    }
    if cfg.cut_penalty > 0.0 {
        // one sweep of relaxed projections onto the violated cuts
        let SolverState { v, delta, cuts, .. } = &mut next;
        for e in cuts.iter() {
            let r = e.cut.eval_unchecked(v, delta);
            if r > 0.0 {
                let s = cfg.cut_penalty * r / e.cut.normal_norm().powi(2);
                for (x, a) in v.iter_mut().zip(&e.cut.a) {
                    *x -= s * a;
                }
                for (x, b) in delta.iter_mut().zip(&e.cut.b) {
                    *x -= s * b;
                }
            }
        }
    }
    for (e, r) in next.cuts.entries_mut().iter_mut().zip(&res) {
        let eta = match cfg.dual_step {
            DualStep::Uniform => cfg.eta_lambda,
            DualStep::Normalized => cfg.eta_lambda / e.cut.normal_norm().powi(2),
        };
        e.lambda = (e.lambda + eta * r).max(0.0);
        e.ever_active |= e.lambda > DUAL_ZERO_TOL;
    }
    next.t += 1;
    let finite = next.v.is_finite() && next.delta.is_finite() && next.cuts.iter().all(|e| e.lambda.is_finite());
    if !finite || !lag.is_finite() {
        return Err(diverged(&next, state.t));
    }
    Ok(next)
}

fn inner_for(cfg: &SolverConfig) -> AlmConfig {
    let mut inner = cfg.inner.clone();
    inner.taylor_point = None;
    inner
}

/// Cut management with a record of what changed; see [`manage_cuts`].
pub fn manage_cuts_logged(
    state: &SolverState,
    cfg: &SolverConfig,
    network: &NetworkConfig,
    channels: &ChannelSet,
) -> Result<(SolverState, ManageReport)> {
    state.check(network)?;
    if state.t == 0 || !(state.t - 1).is_multiple_of(cfg.k_pre) {
        return Err(Error::Contract(format!(
            "cut management requested at iteration {} outside the k_pre = {} grid",
            state.t, cfg.k_pre
        )));
    }
    let layout = network.layout();
    let mut next = state.clone();
    let mut rep = ManageReport::default();

    let t = state.t;
    let grace = cfg.import_grace.saturating_mul(cfg.k_pre);
    next.cuts.retain(|e| {
        let keep = e.lambda > DUAL_ZERO_TOL
            || (matches!(e.cut.origin, CutOrigin::Received(_)) && !e.ever_active && t < e.added_at + grace);
        if !keep {
            rep.dropped.push(e.cut.id);
        }
        keep
    });

    let inner = inner_for(cfg);
    let init = AlmState::initial(&layout, &channels.radii, Some(&state.phi_cache));
    next.phi_cache = phi(&state.v, &inner, &init, channels, network)?;
    if cfg.refute_cuts {
        // (V, φ(V)) has g = 0, so a g cut that excludes it is not valid
        let (v, ph) = (&state.v, &next.phi_cache);
        next.cuts.retain(|e| {
            let keep = e.cut.b.is_empty() || e.cut.eval_unchecked(v, ph) <= 0.0;
            if !keep {
                rep.refuted.push(e.cut.id);
                rep.dropped.push(e.cut.id);
            }
            keep
        });
    }

    let owned: Vec<usize> = match state.power_owner {
        Some(m) => vec![m],
        None => (0..network.cells).collect(),
    };
    for m in owned {
        if layout.bs_power(&state.v, m) > network.power[m] {
            let id = next.ids.next_id();
            let cp = power_cut(network, &state.v, &state.delta, m, id)?;
            next.cuts.push(cp, 0.0, t)?;
            rep.added_power.push((m, id));
        }
    }

    rep.g = g_value(&state.delta, &next.phi_cache)?;
    if rep.g > cfg.eps_tol {
        let grad = grad_g(&state.v, &state.delta, &next.phi_cache, &inner, &init, channels, network)?;
        let id = next.ids.next_id();
        let cp = g_cut(&state.v, &state.delta, rep.g, (&grad.0, &grad.1), cfg.eps_tol, id)?;
        if !cp.is_degenerate() {
            next.cuts.push(cp, 0.0, t)?;
            rep.added_g = Some(id);
        }
    }
    if !rep.added_power.is_empty() || rep.added_g.is_some() {
        next.last_cut_added = Some(t);
    }
    if cfg.reset_delta {
        next.delta = next.phi_cache.clone();
    }
    Ok((next, rep))
}

/// Prunes inactive cuts, refreshes `φ(V)` and adds a power cut per violated
/// budget plus one `g` cut when `g > eps_tol`. New cuts start with `λ = 0`.
///
/// Must be called right after the step that left iteration `t` with
/// `t mod k_pre == 0`, i.e. when `state.t - 1` is a multiple of `k_pre`.
pub fn manage_cuts(
    state: &SolverState,
    cfg: &SolverConfig,
    network: &NetworkConfig,
    channels: &ChannelSet,
) -> Result<SolverState> {
    manage_cuts_logged(state, cfg, network, channels).map(|(s, _)| s)
}

/// Whether the trailing window of Lagrangian values has settled and no cut
/// has entered during it.
pub fn has_converged(state: &SolverState, cfg: &SolverConfig) -> bool {
    let h = &state.history;
    let w = cfg.conv_window;
    if h.len() <= w {
        return false;
    }
    if let Some(t) = state.last_cut_added {
        if state.t < t + w as u64 {
            return false;
        }
    }
    let tv: f64 = h[h.len() - w - 1..]
        .windows(2)
        .map(|p| (p[1].lagrangian - p[0].lagrangian).abs())
        .sum();
    tv < cfg.conv_tol
}

/// A step followed by cut management when due.
pub(crate) fn advance(
    state: &SolverState,
    cfg: &SolverConfig,
    network: &NetworkConfig,
    channels: &ChannelSet,
) -> Result<(SolverState, Option<ManageReport>)> {
    let next = primal_dual_step(state, cfg, network, channels)?;
    if (next.t - 1) % cfg.k_pre == 0 {
        let (next, rep) = manage_cuts_logged(&next, cfg, network, channels)?;
        Ok((next, Some(rep)))
    } else {
        Ok((next, None))
    }
}

/// `v` with every over-budget BS scaled onto its budget.
pub fn power_feasible(network: &NetworkConfig, v: &BeamformerVec) -> BeamformerVec {
    let layout = network.layout();
    let half = layout.v_complex_len();
    let mut out = v.clone();
    for (m, p) in network.power.iter().enumerate() {
        let cur = layout.bs_power(v, m);
        if cur > *p {
            let s = (p / cur).sqrt();
            for i in layout.bs_range(m) {
                out[i] *= s;
                out[half + i] *= s;
            }
        }
    }
    out
}

pub(crate) fn finish(
    state: SolverState,
    termination: Termination,
    cfg: &SolverConfig,
    network: &NetworkConfig,
    channels: &ChannelSet,
    seed: u64,
) -> Result<SolveResult> {
    let vf = power_feasible(network, &state.v);
    let report = worst_case_wsr(
        network,
        channels,
        &vf,
        cfg.report.starts,
        cfg.report.samples,
        &cfg.report.inner,
        seed ^ 0x0BAD_5EED_0000_0000,
    )?;
    let nominal_wsr = Received::new(network, channels, &state.v, &state.delta)?.wsr();
    Ok(SolveResult {
        v_final: vf,
        v_iterate: state.v,
        delta_final: state.delta,
        objective: report.wsr_alm,
        nominal_wsr,
        report,
        history: state.history,
        cuts: state.cuts,
        iterations: state.t,
        termination,
    })
}

/// Runs the centralised solver from a seeded start until convergence or
/// `max_iters`.
pub fn run_blrbf(network: &NetworkConfig, channels: &ChannelSet, cfg: &SolverConfig, seed: u64) -> Result<SolveResult> {
    cfg.validate()?;
    channels.check_against(network)?;
    let mut state = SolverState::initial(network, seed, 0, None)?;
    let termination = loop {
        if state.t >= cfg.max_iters {
            break Termination::MaxIters;
        }
        state = advance(&state, cfg, network, channels)?.0;
        if has_converged(&state, cfg) {
            break Termination::Converged;
        }
    };
    finish(state, termination, cfg, network, channels, seed)
}

/// Runs [`run_blrbf`] from each seed and keeps the run with the highest
/// reported objective (first one on ties).
pub fn run_blrbf_multistart(
    network: &NetworkConfig,
    channels: &ChannelSet,
    cfg: &SolverConfig,
    seeds: &[u64],
) -> Result<SolveResult> {
    let mut best: Option<SolveResult> = None;
    for &s in seeds {
        let r = run_blrbf(network, channels, cfg, s)?;
        if best.as_ref().is_none_or(|b| r.objective > b.objective) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Config("multistart needs at least one seed".into()))
}

/// Seeds used for restart `r` of a run seeded with `seed`; restart 0 is
/// `seed` itself.
pub fn restart_seeds(seed: u64, restarts: usize) -> Vec<u64> {
    (0..restarts.max(1) as u64)
        .map(|r| seed.wrapping_add(r.wrapping_mul(0xD1B5_4A32_D192_ED03)))
        .collect()
}

/// History as CSV with header `t,f,lagrangian,max_power_violation,g,num_cuts`.
pub fn history_csv(history: &[IterRecord]) -> String {
    let mut s = String::from("t,f,lagrangian,max_power_violation,g,num_cuts\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            r.t, r.f, r.lagrangian, r.max_power_violation, r.g, r.num_cuts
        );
    }
    s
}
