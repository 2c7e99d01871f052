use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::lower_solver::{phi, AlmConfig, AlmState};
use crate::model::{sample_error, BeamformerVec, ChannelSet, ErrorVec, NetworkConfig, Received};

/// Worst-case sum-rate estimates for one beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseReport {
    /// Minimum of `f(V, φ)` over the multi-start inner solves.
    pub wsr_alm: f64,
    /// Minimum of `f(V, Δ)` over uniform in-ball samples (`+inf` when none).
    pub wsr_sampling: f64,
    pub delta_argmin: ErrorVec,
    pub starts: usize,
    pub samples: usize,
}

/// Knobs of the headline worst-case evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseSettings {
    pub starts: usize,
    pub samples: usize,
    pub inner: AlmConfig,
}

impl Default for WorstCaseSettings {
    fn default() -> Self {
        WorstCaseSettings {
            starts: 8,
            samples: 64,
            inner: AlmConfig::high_accuracy(500),
        }
    }
}

fn sub_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Multi-start estimate of `min_Δ f(V, Δ)` over the error balls, cross-checked
/// by Monte-Carlo sampling of the balls.
///
/// Start 0 is the nominal channel (`Δ' = 0`), start 1 the best Monte-Carlo
/// sample and the rest independent in-ball draws.
pub fn worst_case_wsr(
    network: &NetworkConfig,
    channels: &ChannelSet,
    v: &BeamformerVec,
    starts: usize,
    samples: usize,
    inner: &AlmConfig,
    seed: u64,
) -> Result<WorstCaseReport> {
    let layout = network.layout();
    channels.check_against(network)?;
    v.check(&layout)?;
    let zero = ErrorVec::zeros(layout.delta_len());
    if channels.all_radii_zero() {
        let f = Received::new(network, channels, v, &zero)?.wsr();
        return Ok(WorstCaseReport {
            wsr_alm: f,
            wsr_sampling: f,
            delta_argmin: zero,
            starts,
            samples,
        });
    }
    // samples first: the best one seeds an inner solve
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, usize::MAX - 1));
    let mut wsr_sampling = f64::INFINITY;
    let mut best_sample = None;
    for _ in 0..samples {
        let d = crate::model::sample_error_with(&layout, &channels.radii, &mut rng)?;
        let f = Received::new(network, channels, v, &d)?.wsr();
        if f < wsr_sampling {
            wsr_sampling = f;
            best_sample = Some(d);
        }
    }

    let mut cfg = inner.clone();
    cfg.taylor_point = None;
    let solves = (0..starts.max(1))
        .into_par_iter()
        .map(|i| -> Result<(f64, ErrorVec)> {
            let start = match (i, &best_sample) {
                (0, _) => zero.clone(),
                (1, Some(d)) => d.clone(),
                _ => sample_error(&layout, &channels.radii, sub_seed(seed, i))?,
            };
            let init = AlmState::initial(&layout, &channels.radii, Some(&start));
            let d = phi(v, &cfg, &init, channels, network)?;
            let f = Received::new(network, channels, v, &d)?.wsr();
            Ok((f, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let (wsr_alm, delta_argmin) = solves
        .into_iter()
        .fold((f64::INFINITY, zero.clone()), |best, cur| if cur.0 < best.0 { cur } else { best });
    Ok(WorstCaseReport {
        wsr_alm,
        wsr_sampling,
        delta_argmin,
        starts: starts.max(1),
        samples,
    })
}
