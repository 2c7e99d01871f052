//! Network description, channel data and the weighted sum-rate objective.
//!
//! Beamformers and channel errors travel through the solvers as packed real
//! vectors (see [`PackingLayout`]); the objective itself is evaluated on the
//! complex representation.

mod channels;
mod dump;
mod objective;
mod packing;

pub use channels::{generate_rayleigh_channels, sample_error, uniform_radii};
pub(crate) use channels::sample_error_with;
pub use dump::{parse_channel_dump, read_channel_dump, write_channel_dump};
pub use objective::{
    grad_wsr_delta, grad_wsr_v, power_violation, sinr, wsr, Received,
};
pub use packing::PackingLayout;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions, budgets, weights and noise of a multi-cell MISO downlink.
///
/// Per-user vectors (`alpha`, `sigma2`) are indexed by `m * users + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub cells: usize,
    pub antennas: usize,
    pub users: usize,
    /// Per-BS power budgets, length `cells`.
    pub power: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Base of the rate logarithm; 2 gives bits.
    pub log_base: f64,
}

impl NetworkConfig {
    /// Equal budgets, unit weights and unit noise, rates in bits.
    pub fn uniform(cells: usize, antennas: usize, users: usize, power: f64) -> Self {
        NetworkConfig {
            cells,
            antennas,
            users,
            power: vec![power; cells],
            alpha: vec![1.0; cells * users],
            sigma2: vec![1.0; cells * users],
            log_base: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells == 0 || self.antennas == 0 || self.users == 0 {
            return Err(Error::Config(format!(
                "dimensions must be positive (M={}, N={}, K={})",
                self.cells, self.antennas, self.users
            )));
        }
        if self.power.len() != self.cells {
            return Err(Error::dim("power budgets", self.cells, self.power.len()));
        }
        let mk = self.cells * self.users;
        if self.alpha.len() != mk {
            return Err(Error::dim("user weights", mk, self.alpha.len()));
        }
        if self.sigma2.len() != mk {
            return Err(Error::dim("noise powers", mk, self.sigma2.len()));
        }
        let positive = |xs: &[f64]| xs.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&self.power) {
            return Err(Error::Config("power budgets must be finite and > 0".into()));
        }
        if !positive(&self.alpha) {
            return Err(Error::Config("user weights must be finite and > 0".into()));
        }
        if !positive(&self.sigma2) {
            return Err(Error::Config("noise powers must be finite and > 0".into()));
        }
        if !(self.log_base.is_finite() && self.log_base > 0.0 && self.log_base != 1.0) {
            return Err(Error::Config(format!("invalid log base {}", self.log_base)));
        }
        Ok(())
    }

    pub fn layout(&self) -> PackingLayout {
        PackingLayout::new(self.cells, self.antennas, self.users)
    }

    pub fn num_users(&self) -> usize {
        self.cells * self.users
    }

    pub fn max_power(&self) -> f64 {
        self.power.iter().copied().fold(0.0, f64::max)
    }

    /// `1 / ln(log_base)`, the factor every natural-log rate is scaled by.
    pub(crate) fn log_scale(&self) -> f64 {
        1.0 / self.log_base.ln()
    }
}

/// Estimated channels, uncertainty radii and (optionally) the true channels.
///
/// Channel coefficients use the error layout: block `(m, n, k)` holds the
/// row vector from BS `n` to user `k` of cell `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub layout: PackingLayout,
    pub h_est: Vec<Complex64>,
    /// One radius per `(m, n, k)` block.
    pub radii: Vec<f64>,
    pub h_true: Option<Vec<Complex64>>,
}

impl ChannelSet {
    pub fn new(
        layout: PackingLayout,
        h_est: Vec<Complex64>,
        radii: Vec<f64>,
        h_true: Option<Vec<Complex64>>,
    ) -> Result<Self> {
        let cs = ChannelSet {
            layout,
            h_est,
            radii,
            h_true,
        };
        cs.validate()?;
        Ok(cs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layout.delta_complex_len();
        if self.h_est.len() != n {
            return Err(Error::dim("estimated channels", n, self.h_est.len()));
        }
        if self.radii.len() != self.layout.num_blocks() {
            return Err(Error::dim(
                "uncertainty radii",
                self.layout.num_blocks(),
                self.radii.len(),
            ));
        }
        if let Some(t) = &self.h_true {
            if t.len() != n {
                return Err(Error::dim("true channels", n, t.len()));
            }
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Domain("uncertainty radii must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn check_against(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.layout != cfg.layout() {
            return Err(Error::Config(format!(
                "channel set dimensions {:?} do not match network {:?}",
                self.layout,
                cfg.layout()
            )));
        }
        Ok(())
    }

    /// Same channels, every radius replaced by `eps`.
    pub fn with_uniform_radius(&self, eps: f64) -> Self {
        ChannelSet {
            radii: vec![eps; self.radii.len()],
            ..self.clone()
        }
    }

    /// Perfect-CSI view: the true channels (or the estimates when absent)
    /// with zero radii.
    pub fn perfect(&self) -> Self {
        ChannelSet {
            layout: self.layout,
            h_est: self.h_true.clone().unwrap_or_else(|| self.h_est.clone()),
            radii: vec![0.0; self.radii.len()],
            h_true: self.h_true.clone(),
        }
    }

    pub fn all_radii_zero(&self) -> bool {
        self.radii.iter().all(|r| *r == 0.0)
    }
}

macro_rules! real_vec {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                $name(vec![0.0; len])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }

            pub fn norm_inf(&self) -> f64 {
                self.0.iter().fold(0.0, |a, x| a.max(x.abs()))
            }
        }

        impl std::ops::Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl std::ops::DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }
    };
}

real_vec!(
    /// Packed beamformers, length `2 M N K`.
    BeamformerVec
);
real_vec!(
    /// Packed channel errors, length `2 M^2 N K`.
    ErrorVec
);

impl BeamformerVec {
    pub fn check(&self, layout: &PackingLayout) -> Result<()> {
        if self.len() != layout.v_len() {
            return Err(Error::dim("beamformer vector", layout.v_len(), self.len()));
        }
        Ok(())
    }
}

impl ErrorVec {
    pub fn check(&self, layout: &PackingLayout) -> Result<()> {
        if self.len() != layout.delta_len() {
            return Err(Error::dim("error vector", layout.delta_len(), self.len()));
        }
        Ok(())
    }
}
