use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat ordering of beamformers and channel errors as real vectors.
///
/// All real parts come first, then all imaginary parts. Inside each half:
///
/// * beamformers are ordered BS `m`, user `k`, antenna `j`
///   (each `N x K` matrix `V_m` stored column-major);
/// * errors and channels are ordered receiver cell `m`, transmitter cell `n`,
///   user `k`, antenna `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PackingLayout {
    pub cells: usize,
    pub antennas: usize,
    pub users: usize,
}

impl PackingLayout {
    pub fn new(cells: usize, antennas: usize, users: usize) -> Self {
        PackingLayout {
            cells,
            antennas,
            users,
        }
    }

    /// Number of complex beamformer entries, `M N K`.
    pub fn v_complex_len(&self) -> usize {
        self.cells * self.antennas * self.users
    }

    pub fn v_len(&self) -> usize {
        2 * self.v_complex_len()
    }

    /// Number of complex channel entries, `M^2 N K`.
    pub fn delta_complex_len(&self) -> usize {
        self.cells * self.cells * self.antennas * self.users
    }

    pub fn delta_len(&self) -> usize {
        2 * self.delta_complex_len()
    }

    /// Number of `(m, n, k)` channel blocks, `M^2 K`.
    pub fn num_blocks(&self) -> usize {
        self.cells * self.cells * self.users
    }

    /// Complex offset of beamformer `v_{k_m}`.
    #[inline]
    pub fn v_offset(&self, m: usize, k: usize) -> usize {
        (m * self.users + k) * self.antennas
    }

    /// Block index of channel `h_{k_m n}`.
    #[inline]
    pub fn block(&self, m: usize, n: usize, k: usize) -> usize {
        (m * self.cells + n) * self.users + k
    }

    /// Inverse of [`block`](Self::block): `(m, n, k)`.
    pub fn block_coords(&self, b: usize) -> (usize, usize, usize) {
        let k = b % self.users;
        let mn = b / self.users;
        (mn / self.cells, mn % self.cells, k)
    }

    /// Complex offset of channel block `h_{k_m n}`.
    #[inline]
    pub fn channel_offset(&self, m: usize, n: usize, k: usize) -> usize {
        self.block(m, n, k) * self.antennas
    }

    /// Real index of `Re(v_{k_m})[j]`; the imaginary part sits `M N K` later.
    pub fn v_index(&self, m: usize, k: usize, j: usize) -> usize {
        self.v_offset(m, k) + j
    }

    /// Real index of `Re(Δ_{k_m n})[j]`; the imaginary part sits `M^2 N K` later.
    pub fn delta_index(&self, m: usize, n: usize, k: usize, j: usize) -> usize {
        self.channel_offset(m, n, k) + j
    }

    /// Range of complex beamformer entries belonging to BS `m`.
    pub fn bs_range(&self, m: usize) -> std::ops::Range<usize> {
        let w = self.users * self.antennas;
        m * w..(m + 1) * w
    }

    pub fn pack(x: &[Complex64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * x.len());
        out.extend(x.iter().map(|c| c.re));
        out.extend(x.iter().map(|c| c.im));
        out
    }

    pub fn unpack(x: &[f64]) -> Result<Vec<Complex64>> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::dim("packed vector (must be even)", x.len() + 1, x.len()));
        }
        let h = x.len() / 2;
        Ok((0..h).map(|i| Complex64::new(x[i], x[h + i])).collect())
    }

    pub fn pack_v(&self, v: &[Complex64]) -> Result<Vec<f64>> {
        if v.len() != self.v_complex_len() {
            return Err(Error::dim("beamformers", self.v_complex_len(), v.len()));
        }
        Ok(Self::pack(v))
    }

    pub fn unpack_v(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() != self.v_len() {
            return Err(Error::dim("packed beamformers", self.v_len(), x.len()));
        }
        Self::unpack(x)
    }

    pub fn pack_delta(&self, d: &[Complex64]) -> Result<Vec<f64>> {
        if d.len() != self.delta_complex_len() {
            return Err(Error::dim("channel errors", self.delta_complex_len(), d.len()));
        }
        Ok(Self::pack(d))
    }

    pub fn unpack_delta(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() != self.delta_len() {
            return Err(Error::dim("packed channel errors", self.delta_len(), x.len()));
        }
        Self::unpack(x)
    }

    /// Euclidean norm of block `b` of a packed error vector.
    pub fn delta_block_norm(&self, x: &[f64], b: usize) -> f64 {
        let half = self.delta_complex_len();
        let off = b * self.antennas;
        (0..self.antennas)
            .map(|j| x[off + j].powi(2) + x[half + off + j].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Scales block `b` of a packed error vector in place.
    pub fn scale_delta_block(&self, x: &mut [f64], b: usize, s: f64) {
        let half = self.delta_complex_len();
        let off = b * self.antennas;
        for j in 0..self.antennas {
            x[off + j] *= s;
            x[half + off + j] *= s;
        }
    }

    /// `||V_m||_F^2` from a packed beamformer vector.
    pub fn bs_power(&self, x: &[f64], m: usize) -> f64 {
        let half = self.v_complex_len();
        self.bs_range(m)
            .map(|i| x[i] * x[i] + x[half + i] * x[half + i])
            .sum()
    }
}
