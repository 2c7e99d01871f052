use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ChannelSet, ErrorVec, NetworkConfig, PackingLayout};
use crate::error::{Error, Result};

/// Stream separator so channel draws and error draws never share a seed.
const ERROR_STREAM: u64 = 0x5EED_E440_0000_0001;

pub fn uniform_radii(cfg: &NetworkConfig, eps: f64) -> Vec<f64> {
    vec![eps; cfg.layout().num_blocks()]
}

/// Draws true Rayleigh channels (`Re, Im ~ N(0, 1/2)` per coefficient) and
/// derives the estimates `h_est = h_true - Δ` from an error sampled
/// uniformly in each `radii` ball, so that `h_true = h_est + Δ` with
/// `||Δ_{k_m n}|| <= ε_{k_m n}`.
///
/// The error draw does not depend on the radii values, so sweeping a uniform
/// `ε` with a fixed seed scales the same error direction.
pub fn generate_rayleigh_channels(cfg: &NetworkConfig, radii: &[f64], seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let layout = cfg.layout();
    if radii.len() != layout.num_blocks() {
        return Err(Error::dim("uncertainty radii", layout.num_blocks(), radii.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let h_true: Vec<Complex64> = (0..layout.delta_complex_len())
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    let err = sample_error(&layout, radii, seed ^ ERROR_STREAM)?;
    let err = layout.unpack_delta(&err)?;
    let h_est = h_true.iter().zip(&err).map(|(h, e)| h - e).collect();
    ChannelSet::new(layout, h_est, radii.to_vec(), Some(h_true))
}

/// Uniform sample from the product of per-block error balls.
///
/// Each block is drawn as a Gaussian direction scaled by `ε U^{1/d}` with
/// `d = 2N` real dimensions.
pub fn sample_error(layout: &PackingLayout, radii: &[f64], seed: u64) -> Result<ErrorVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_error_with(layout, radii, &mut rng)
}

pub(crate) fn sample_error_with<R: Rng>(layout: &PackingLayout, radii: &[f64], rng: &mut R) -> Result<ErrorVec> {
    if radii.len() != layout.num_blocks() {
        return Err(Error::dim("uncertainty radii", layout.num_blocks(), radii.len()));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::Domain(format!("negative or non-finite radius {r}")));
    }
    let n = layout.antennas;
    let half = layout.delta_complex_len();
    let dim = (2 * n) as f64;
    let mut out = ErrorVec::zeros(layout.delta_len());
    let mut dir = vec![0.0; 2 * n];
    for (b, &eps) in radii.iter().enumerate() {
        let norm = loop {
            for x in dir.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let s = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if s > 1e-300 {
                break s;
            }
        };
        let u: f64 = rng.random();
        let r = eps * u.powf(1.0 / dim) / norm;
        let off = b * n;
        for j in 0..n {
            out[off + j] = dir[2 * j] * r;
            out[half + off + j] = dir[2 * j + 1] * r;
        }
    }
    Ok(out)
}
