//! Worst-case channel error by an augmented Lagrangian method.
//!
//! The lower-level problem minimises the sum-rate over the error balls
//! `||Δ'_{k_m n}||_2 + s_{k_m n}^2 = ε_{k_m n}` on a first-order Taylor
//! surrogate of `f` in the beamformers. [`phi`] runs a fixed number of
//! simultaneous primal-descent / multiplier-ascent steps and projects the
//! result back onto the balls.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BeamformerVec, ChannelSet, ErrorVec, NetworkConfig, PackingLayout, Received};

/// Step-size policy for the inner iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StepSchedule {
    #[default]
    Constant,
    /// Step `η / (1 + decay * k)` at inner iteration `k`.
    Diminishing { decay: f64 },
}

impl StepSchedule {
    fn factor(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant => 1.0,
            StepSchedule::Diminishing { decay } => 1.0 / (1.0 + decay * k as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmConfig {
    pub rho: f64,
    pub eta_delta: f64,
    pub eta_s: f64,
    pub eta_mu: f64,
    pub k_inner: usize,
    /// Expansion point of the surrogate; `None` expands at the queried `V`
    /// itself, which makes the surrogate exact.
    pub taylor_point: Option<BeamformerVec>,
    pub schedule: StepSchedule,
    /// Scale the `Δ'` step of block `(m, n, k)` by
    /// `1 / max(1, ||V̂_n||_F^2 / I_{k_m})` at the Taylor point, `I` being
    /// the current interference-plus-noise power.
    pub precondition: bool,
}

impl Default for AlmConfig {
    fn default() -> Self {
        AlmConfig {
            rho: 10.0,
            eta_delta: 1e-2,
            eta_s: 1e-2,
            eta_mu: 1e-2,
            k_inner: 100,
            taylor_point: None,
            schedule: StepSchedule::Constant,
            precondition: true,
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Config("ALM penalty rho must be > 0".into()));
        }
        if !(ok(self.eta_delta) && ok(self.eta_s) && ok(self.eta_mu)) {
            return Err(Error::Config("ALM step sizes must be finite and >= 0".into()));
        }
        if self.k_inner == 0 {
            return Err(Error::Config("ALM inner iteration count must be >= 1".into()));
        }
        if let StepSchedule::Diminishing { decay } = self.schedule {
            if !(decay.is_finite() && decay >= 0.0) {
                return Err(Error::Config("step decay must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    /// Accurate setting used for certification and property checks.
    pub fn high_accuracy(k_inner: usize) -> Self {
        AlmConfig {
            k_inner,
            eta_mu: 0.1,
            ..AlmConfig::default()
        }
    }
}

/// Iterate of the inner method: error, slacks and multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmState {
    pub delta_prime: ErrorVec,
    /// One slack per `(m, n, k)` block.
    pub slacks: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl AlmState {
    /// Warm start at `delta` (zero when `None`) with slacks
    /// `sqrt(max(ε - ||Δ'_b||, 0))` and zero multipliers.
    pub fn initial(layout: &PackingLayout, radii: &[f64], delta: Option<&ErrorVec>) -> Self {
        let delta_prime = delta
            .cloned()
            .unwrap_or_else(|| ErrorVec::zeros(layout.delta_len()));
        let slacks = radii
            .iter()
            .enumerate()
            .map(|(b, eps)| (eps - layout.delta_block_norm(&delta_prime, b)).max(0.0).sqrt())
            .collect();
        AlmState {
            delta_prime,
            slacks,
            multipliers: vec![0.0; radii.len()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.delta_prime.is_finite()
            && self.slacks.iter().all(|x| x.is_finite())
            && self.multipliers.iter().all(|x| x.is_finite())
    }
}

/// Per-block curvature normaliser `1 / max(1, ||V̂_n||_F^2 / I_{k_m})` for
/// the error block `(m, n, k)`, with `I` the interference-plus-noise power
/// of each user.
pub fn delta_block_scale(cfg: &NetworkConfig, v: &[f64], interference: &[f64]) -> Vec<f64> {
    let layout = cfg.layout();
    (0..layout.num_blocks())
        .map(|b| {
            let (m, n, k) = layout.block_coords(b);
            let p = layout.bs_power(v, n) / interference[m * layout.users + k];
            1.0 / p.max(1.0)
        })
        .collect()
}

/// First-order surrogate `f(Ṽ, Δ') + ∇_V f(Ṽ, Δ')ᵀ (V - Ṽ)`.
struct Surrogate<'a> {
    cfg: &'a NetworkConfig,
    channels: &'a ChannelSet,
    v_tilde: Vec<Complex64>,
    /// `V - Ṽ`; `None` when the surrogate is exact.
    shift: Option<(Vec<Complex64>, Vec<f64>)>,
    /// Packed Taylor point, kept when the `Δ'` step is preconditioned.
    precondition: Option<Vec<f64>>,
}

impl<'a> Surrogate<'a> {
    fn new(
        cfg: &'a NetworkConfig,
        channels: &'a ChannelSet,
        v: &BeamformerVec,
        taylor_point: Option<&BeamformerVec>,
        precondition: bool,
    ) -> Result<Self> {
        let layout = cfg.layout();
        channels.check_against(cfg)?;
        v.check(&layout)?;
        let vt = taylor_point.unwrap_or(v);
        vt.check(&layout)?;
        let shift = if vt == v {
            None
        } else {
            let packed: Vec<f64> = v.iter().zip(vt.iter()).map(|(a, b)| a - b).collect();
            Some((layout.unpack_v(&packed)?, packed))
        };
        Ok(Surrogate {
            cfg,
            channels,
            v_tilde: layout.unpack_v(vt)?,
            shift,
            precondition: precondition.then(|| vt.to_vec()),
        })
    }

    fn received(&self, delta_prime: &[f64]) -> Result<Received<'a>> {
        let layout = self.cfg.layout();
        let d = layout.unpack_delta(delta_prime)?;
        let h = self.channels.h_est.iter().zip(&d).map(|(a, b)| a + b).collect();
        Ok(Received::from_complex(self.cfg, h, self.v_tilde.clone()))
    }

    fn value(&self, delta_prime: &[f64]) -> Result<f64> {
        let r = self.received(delta_prime)?;
        let mut val = r.wsr();
        if let Some((_, packed)) = &self.shift {
            val += r.grad_v().iter().zip(packed).map(|(g, d)| g * d).sum::<f64>();
        }
        Ok(val)
    }

    /// Gradient in `Δ'` and the per-block step scale.
    fn grad_delta(&self, delta_prime: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = self.received(delta_prime)?;
        let scale = match &self.precondition {
            Some(vt) => delta_block_scale(self.cfg, vt, r.interference()),
            None => vec![1.0; self.cfg.layout().num_blocks()],
        };
        let g = match &self.shift {
            None => r.grad_delta(),
            Some((dv, _)) => {
                let (mut g, dg) = r.grad_delta_with_directional(dv);
                for (a, b) in g.iter_mut().zip(dg) {
                    *a += b;
                }
                g
            }
        };
        Ok((g, scale))
    }
}

/// Surrogate value `f̃(V, Δ')` expanded at `taylor_point`.
pub fn taylor_f(
    cfg: &NetworkConfig,
    channels: &ChannelSet,
    v: &BeamformerVec,
    delta_prime: &ErrorVec,
    taylor_point: &BeamformerVec,
) -> Result<f64> {
    delta_prime.check(&cfg.layout())?;
    Surrogate::new(cfg, channels, v, Some(taylor_point), false)?.value(delta_prime)
}

/// Per-block residuals `||Δ'_b|| + s_b^2 - ε_b`.
pub fn constraint_residuals(layout: &PackingLayout, state: &AlmState, radii: &[f64]) -> Vec<f64> {
    radii
        .iter()
        .enumerate()
        .map(|(b, eps)| layout.delta_block_norm(&state.delta_prime, b) + state.slacks[b].powi(2) - eps)
        .collect()
}

fn check_state(layout: &PackingLayout, state: &AlmState) -> Result<()> {
    state.delta_prime.check(layout)?;
    if state.slacks.len() != layout.num_blocks() {
        return Err(Error::dim("ALM slacks", layout.num_blocks(), state.slacks.len()));
    }
    if state.multipliers.len() != layout.num_blocks() {
        return Err(Error::dim("ALM multipliers", layout.num_blocks(), state.multipliers.len()));
    }
    Ok(())
}

/// Augmented Lagrangian of the lower-level problem.
pub fn alm_value(
    v: &BeamformerVec,
    state: &AlmState,
    cfg: &AlmConfig,
    channels: &ChannelSet,
    network: &NetworkConfig,
) -> Result<f64> {
    let layout = network.layout();
    check_state(&layout, state)?;
    let sur = Surrogate::new(network, channels, v, cfg.taylor_point.as_ref(), cfg.precondition)?;
    let res = constraint_residuals(&layout, state, &channels.radii);
    let pen: f64 = res
        .iter()
        .zip(&state.multipliers)
        .map(|(c, mu)| mu * c + 0.5 * cfg.rho * c * c)
        .sum();
    Ok(sur.value(&state.delta_prime)? + pen)
}

fn step_with(
    sur: &Surrogate<'_>,
    layout: &PackingLayout,
    radii: &[f64],
    state: &AlmState,
    cfg: &AlmConfig,
    iter: usize,
) -> Result<AlmState> {
    let res = constraint_residuals(layout, state, radii);
    let (mut grad, scale) = sur.grad_delta(&state.delta_prime)?;
    let half = layout.delta_complex_len();
    let n = layout.antennas;
    for (b, c) in res.iter().enumerate() {
        let nrm = layout.delta_block_norm(&state.delta_prime, b);
        // subgradient 0 at the origin
        if nrm > 0.0 {
            let w = (state.multipliers[b] + cfg.rho * c) / nrm;
            let off = b * n;
            for j in 0..n {
                grad[off + j] += w * state.delta_prime[off + j];
                grad[half + off + j] += w * state.delta_prime[half + off + j];
            }
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical {
            context: "ALM step gradient".into(),
            iteration: iter,
        });
    }
    let f = cfg.schedule.factor(iter);
    let (ed, es, em) = (cfg.eta_delta * f, cfg.eta_s * f, cfg.eta_mu * f);
    let mut delta_prime = state.delta_prime.clone();
    for (b, sc) in scale.iter().enumerate() {
        let off = b * n;
        for i in (off..off + n).chain(half + off..half + off + n) {
            delta_prime[i] -= ed * sc * grad[i];
        }
    }
    let slacks = state
        .slacks
        .iter()
        .zip(&res)
        .zip(&state.multipliers)
        .map(|((s, c), mu)| s - es * 2.0 * s * (mu + cfg.rho * c))
        .collect();
    let multipliers = state
        .multipliers
        .iter()
        .zip(&res)
        .map(|(mu, c)| mu + em * c)
        .collect();
    let next = AlmState {
        delta_prime,
        slacks,
        multipliers,
    };
    if !next.is_finite() {
        return Err(Error::Numerical {
            context: "ALM iterate".into(),
            iteration: iter,
        });
    }
    Ok(next)
}

/// One simultaneous ALM step: `Δ'` and `s` descend, `μ` ascends, all
/// gradients taken at the incoming state.
pub fn alm_step(
    v: &BeamformerVec,
    state: &AlmState,
    cfg: &AlmConfig,
    channels: &ChannelSet,
    network: &NetworkConfig,
) -> Result<AlmState> {
    let layout = network.layout();
    check_state(&layout, state)?;
    let sur = Surrogate::new(network, channels, v, cfg.taylor_point.as_ref(), cfg.precondition)?;
    step_with(&sur, &layout, &channels.radii, state, cfg, 0)
}

/// Projects every block of `delta` onto its error ball.
pub fn project_to_balls(layout: &PackingLayout, radii: &[f64], delta: &mut ErrorVec) {
    for (b, &eps) in radii.iter().enumerate() {
        let nrm = layout.delta_block_norm(delta, b);
        if nrm > eps {
            let s = if nrm > 0.0 { eps / nrm } else { 0.0 };
            layout.scale_delta_block(delta, b, s);
        }
    }
}

/// Runs `k_inner` ALM steps from `init` and returns the final iterate
/// (before projection).
pub fn run_alm(
    v: &BeamformerVec,
    cfg: &AlmConfig,
    init: &AlmState,
    channels: &ChannelSet,
    network: &NetworkConfig,
) -> Result<AlmState> {
    cfg.validate()?;
    let layout = network.layout();
    check_state(&layout, init)?;
    let sur = Surrogate::new(network, channels, v, cfg.taylor_point.as_ref(), cfg.precondition)?;
    let mut state = init.clone();
    for it in 0..cfg.k_inner {
        state = step_with(&sur, &layout, &channels.radii, &state, cfg, it)?;
    }
    Ok(state)
}

/// Approximate worst-case error `φ(V)`: `k_inner` ALM steps, then a
/// projection of each block onto its ball.
pub fn phi(
    v: &BeamformerVec,
    cfg: &AlmConfig,
    init: &AlmState,
    channels: &ChannelSet,
    network: &NetworkConfig,
) -> Result<ErrorVec> {
    let layout = network.layout();
    if channels.all_radii_zero() {
        cfg.validate()?;
        v.check(&layout)?;
        return Ok(ErrorVec::zeros(layout.delta_len()));
    }
    let mut d = run_alm(v, cfg, init, channels, network)?.delta_prime;
    project_to_balls(&layout, &channels.radii, &mut d);
    Ok(d)
}

/// `g(V, Δ) = ||Δ - φ(V)||_2^2`.
pub fn g_value(delta: &ErrorVec, phi_of_v: &ErrorVec) -> Result<f64> {
    if delta.len() != phi_of_v.len() {
        return Err(Error::dim("g arguments", delta.len(), phi_of_v.len()));
    }
    Ok(delta.iter().zip(phi_of_v.iter()).map(|(a, b)| (a - b).powi(2)).sum())
}

/// Default central-difference step for a point `x`.
pub fn fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

/// Gradient of `g` at `(V, Δ)`.
///
/// The `Δ` part is `2 (Δ - φ(V))`. The `V` part is a forward difference of
/// `g(·, Δ)` through full `φ` evaluations that share `init` and keep the
/// Taylor point at `V` (or at `cfg.taylor_point` when set).
pub fn grad_g(
    v: &BeamformerVec,
    delta: &ErrorVec,
    phi_of_v: &ErrorVec,
    cfg: &AlmConfig,
    init: &AlmState,
    channels: &ChannelSet,
    network: &NetworkConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let layout = network.layout();
    v.check(&layout)?;
    delta.check(&layout)?;
    phi_of_v.check(&layout)?;
    let d_delta: Vec<f64> = delta.iter().zip(phi_of_v.iter()).map(|(a, b)| 2.0 * (a - b)).collect();
    if channels.all_radii_zero() {
        return Ok((vec![0.0; layout.v_len()], d_delta));
    }
    let mut fd_cfg = cfg.clone();
    if fd_cfg.taylor_point.is_none() {
        fd_cfg.taylor_point = Some(v.clone());
    }
    let h = fd_step(v);
    let g0 = g_value(delta, &phi(v, &fd_cfg, init, channels, network)?)?;
    let d_v = (0..layout.v_len())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut vp = v.clone();
            vp[i] += h;
            let gp = g_value(delta, &phi(&vp, &fd_cfg, init, channels, network)?)?;
            Ok((gp - g0) / h)
        })
        .collect::<Result<Vec<f64>>>()?;
    if d_v.iter().chain(&d_delta).any(|x| !x.is_finite()) {
        return Err(Error::Numerical {
            context: "gradient of g".into(),
            iteration: 0,
        });
    }
    Ok((d_v, d_delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::wsr;

    fn scalar() -> (NetworkConfig, ChannelSet) {
        let cfg = NetworkConfig::uniform(1, 1, 1, 1.0);
        let ch = ChannelSet::new(cfg.layout(), vec![Complex64::new(1.0, 0.0)], vec![0.3], None).unwrap();
        (cfg, ch)
    }

    #[test]
    fn zero_steps_leave_state() {
        let (net, ch) = scalar();
        let v = BeamformerVec(vec![1.0, 0.0]);
        let st = AlmState {
            delta_prime: ErrorVec(vec![0.1, -0.05]),
            slacks: vec![0.2],
            multipliers: vec![0.4],
        };
        let cfg = AlmConfig {
            eta_delta: 0.0,
            eta_s: 0.0,
            eta_mu: 0.0,
            ..AlmConfig::default()
        };
        assert_eq!(alm_step(&v, &st, &cfg, &ch, &net).unwrap(), st);
    }

    #[test]
    fn multiplier_moves_by_residual() {
        let (net, ch) = scalar();
        let v = BeamformerVec(vec![1.0, 0.0]);
        let st = AlmState {
            delta_prime: ErrorVec(vec![0.1, 0.0]),
            slacks: vec![0.5],
            multipliers: vec![0.0],
        };
        let cfg = AlmConfig {
            eta_mu: 1.0,
            ..AlmConfig::default()
        };
        let next = alm_step(&v, &st, &cfg, &ch, &net).unwrap();
        let res = 0.1 + 0.25 - 0.3;
        assert!((next.multipliers[0] - res).abs() < 1e-15);
    }

    #[test]
    fn feasible_zero_multipliers_value_is_surrogate() {
        let (net, ch) = scalar();
        let v = BeamformerVec(vec![0.7, 0.2]);
        let st = AlmState::initial(&net.layout(), &ch.radii, None);
        assert!((st.slacks[0] - 0.3f64.sqrt()).abs() < 1e-15);
        let val = alm_value(&v, &st, &AlmConfig::default(), &ch, &net).unwrap();
        let f0 = wsr(&net, &ch, &v, &ErrorVec::zeros(2)).unwrap();
        assert!((val - f0).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_gives_zero_phi() {
        let (net, ch) = scalar();
        let ch = ch.with_uniform_radius(0.0);
        let v = BeamformerVec(vec![1.0, 0.0]);
        let init = AlmState::initial(&net.layout(), &ch.radii, Some(&ErrorVec(vec![0.2, 0.1])));
        let p = phi(&v, &AlmConfig::default(), &init, &ch, &net).unwrap();
        assert!(p.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn g_value_basics() {
        let a = ErrorVec(vec![0.1, 0.2, -0.3, 0.4]);
        assert_eq!(g_value(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[2] += 1.0;
        assert!((g_value(&b, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(g_value(&a, &ErrorVec::zeros(2)).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = AlmConfig {
            k_inner: 0,
            ..AlmConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = AlmConfig {
            rho: 0.0,
            ..AlmConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
