use num_complex::Complex64;

use super::{BeamformerVec, ChannelSet, ErrorVec, NetworkConfig, PackingLayout};
use crate::error::{Error, Result};

/// Received-signal amplitudes for every (user, transmitting cell, stream).
///
/// Each user's rate is `log(total / interference)` where `total` counts every
/// stream plus noise and `interference` drops the user's own stream; all
/// gradients below follow from that form.
#[derive(Debug, Clone)]
pub struct Received<'a> {
    cfg: &'a NetworkConfig,
    layout: PackingLayout,
    h: Vec<Complex64>,
    v: Vec<Complex64>,
    /// `z[(u*M + n)*K + l] = h_{u n} v_{l_n}`, `u = m*K + k`.
    z: Vec<Complex64>,
    total: Vec<f64>,
    interference: Vec<f64>,
}

impl<'a> Received<'a> {
    pub fn new(
        cfg: &'a NetworkConfig,
        channels: &ChannelSet,
        v: &BeamformerVec,
        delta: &ErrorVec,
    ) -> Result<Self> {
        let layout = cfg.layout();
        channels.check_against(cfg)?;
        v.check(&layout)?;
        delta.check(&layout)?;
        let vc = layout.unpack_v(v)?;
        let dc = layout.unpack_delta(delta)?;
        let h = channels
            .h_est
            .iter()
            .zip(&dc)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self::from_complex(cfg, h, vc))
    }

    /// Builds from effective channels `h = h_est + Δ` and complex beamformers.
    pub(crate) fn from_complex(cfg: &'a NetworkConfig, h: Vec<Complex64>, v: Vec<Complex64>) -> Self {
        let layout = cfg.layout();
        let (mm, kk, nn) = (layout.cells, layout.users, layout.antennas);
        let mut z = vec![Complex64::new(0.0, 0.0); mm * kk * mm * kk];
        let mut total = vec![0.0; mm * kk];
        let mut interference = vec![0.0; mm * kk];
        for m in 0..mm {
            for k in 0..kk {
                let u = m * kk + k;
                let mut own = 0.0;
                let mut rest = 0.0;
                for n in 0..mm {
                    let hb = &h[layout.channel_offset(m, n, k)..][..nn];
                    for l in 0..kk {
                        let vb = &v[layout.v_offset(n, l)..][..nn];
                        let zz: Complex64 = hb.iter().zip(vb).map(|(a, b)| a * b).sum();
                        z[(u * mm + n) * kk + l] = zz;
                        if n == m && l == k {
                            own = zz.norm_sqr();
                        } else {
                            rest += zz.norm_sqr();
                        }
                    }
                }
                interference[u] = rest + cfg.sigma2[u];
                total[u] = interference[u] + own;
            }
        }
        Received {
            cfg,
            layout,
            h,
            v,
            z,
            total,
            interference,
        }
    }

    #[inline]
    fn zi(&self, u: usize, n: usize, l: usize) -> usize {
        (u * self.layout.cells + n) * self.layout.users + l
    }

    /// Interference-plus-noise power per user, `u = m*K + k`.
    pub fn interference(&self) -> &[f64] {
        &self.interference
    }

    pub fn sinr(&self, m: usize, k: usize) -> f64 {
        let u = m * self.layout.users + k;
        self.z[self.zi(u, m, k)].norm_sqr() / self.interference[u]
    }

    pub fn wsr(&self) -> f64 {
        let scale = self.cfg.log_scale();
        (0..self.layout.cells)
            .flat_map(|m| (0..self.layout.users).map(move |k| (m, k)))
            .map(|(m, k)| {
                let u = m * self.layout.users + k;
                self.cfg.alpha[u] * self.sinr(m, k).ln_1p()
            })
            .sum::<f64>()
            * scale
    }

    /// Weight of stream `(n, l)` in the rate derivative of user `u`.
    #[inline]
    fn stream_weight(&self, u: usize, m: usize, k: usize, n: usize, l: usize) -> f64 {
        let own = n == m && l == k;
        let w = 1.0 / self.total[u] - if own { 0.0 } else { 1.0 / self.interference[u] };
        self.cfg.alpha[u] * self.cfg.log_scale() * w
    }

    /// Gradient with respect to the packed beamformers.
    pub fn grad_v(&self) -> Vec<f64> {
        let l = self.layout;
        let (mm, kk, nn) = (l.cells, l.users, l.antennas);
        let mut g = vec![Complex64::new(0.0, 0.0); l.v_complex_len()];
        for m in 0..mm {
            for k in 0..kk {
                let u = m * kk + k;
                for n in 0..mm {
                    let hb = &self.h[l.channel_offset(m, n, k)..][..nn];
                    for s in 0..kk {
                        let c = self.stream_weight(u, m, k, n, s) * self.z[self.zi(u, n, s)];
                        let gb = &mut g[l.v_offset(n, s)..][..nn];
                        for (gj, hj) in gb.iter_mut().zip(hb) {
                            *gj += hj.conj() * c;
                        }
                    }
                }
            }
        }
        pack_wirtinger(&g)
    }

    /// Gradient with respect to the packed channel errors.
    pub fn grad_delta(&self) -> Vec<f64> {
        let mut g = vec![Complex64::new(0.0, 0.0); self.layout.delta_complex_len()];
        self.accumulate_grad_delta(&mut g, None);
        pack_wirtinger(&g)
    }

    /// Gradient with respect to the channel errors together with its
    /// directional derivative along a beamformer displacement `dv`
    /// (complex, beamformer layout).
    pub fn grad_delta_with_directional(&self, dv: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut g = vec![Complex64::new(0.0, 0.0); self.layout.delta_complex_len()];
        let mut dg = g.clone();
        self.accumulate_grad_delta(&mut g, Some((dv, &mut dg)));
        (pack_wirtinger(&g), pack_wirtinger(&dg))
    }

    fn accumulate_grad_delta(
        &self,
        g: &mut [Complex64],
        mut dir: Option<(&[Complex64], &mut [Complex64])>,
    ) {
        let l = self.layout;
        let (mm, kk, nn) = (l.cells, l.users, l.antennas);
        let scale = self.cfg.log_scale();
        let mut dz = vec![Complex64::new(0.0, 0.0); mm * kk];
        for m in 0..mm {
            for k in 0..kk {
                let u = m * kk + k;
                let (t, i) = (self.total[u], self.interference[u]);
                let ca = self.cfg.alpha[u] * scale;

                // Directional derivatives of z, total and interference.
                let (mut dt, mut di) = (0.0, 0.0);
                if let Some((dv, _)) = dir.as_ref() {
                    for n in 0..mm {
                        let hb = &self.h[l.channel_offset(m, n, k)..][..nn];
                        for s in 0..kk {
                            let db = &dv[l.v_offset(n, s)..][..nn];
                            let d: Complex64 = hb.iter().zip(db).map(|(a, b)| a * b).sum();
                            dz[n * kk + s] = d;
                            let contrib = 2.0 * (self.z[self.zi(u, n, s)].conj() * d).re;
                            dt += contrib;
                            if !(n == m && s == k) {
                                di += contrib;
                            }
                        }
                    }
                }

                let (inv_t, inv_i) = (1.0 / t, 1.0 / i);
                for n in 0..mm {
                    let off = l.channel_offset(m, n, k);
                    for s in 0..kk {
                        let own = n == m && s == k;
                        let w = ca * (inv_t - if own { 0.0 } else { inv_i });
                        let zz = self.z[self.zi(u, n, s)];
                        let c = w * zz;
                        let vb = &self.v[l.v_offset(n, s)..][..nn];
                        for (gj, vj) in g[off..off + nn].iter_mut().zip(vb) {
                            *gj += c * vj.conj();
                        }
                        if let Some((dv, dg)) = dir.as_mut() {
                            let dw = ca * (-dt * inv_t * inv_t + if own { 0.0 } else { di * inv_i * inv_i });
                            let cv = dw * zz + w * dz[n * kk + s];
                            let db = &dv[l.v_offset(n, s)..][..nn];
                            for ((gj, vj), dj) in dg[off..off + nn].iter_mut().zip(vb).zip(db) {
                                *gj += cv * vj.conj() + c * dj.conj();
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Converts `∂f/∂conj(x)` into the packed real gradient `(2 Re, 2 Im)`.
fn pack_wirtinger(g: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * g.len());
    out.extend(g.iter().map(|c| 2.0 * c.re));
    out.extend(g.iter().map(|c| 2.0 * c.im));
    out
}

/// SINR of user `k` in cell `m` on the channel `h_est + Δ`.
pub fn sinr(
    cfg: &NetworkConfig,
    channels: &ChannelSet,
    v: &BeamformerVec,
    delta: &ErrorVec,
    k: usize,
    m: usize,
) -> Result<f64> {
    if m >= cfg.cells || k >= cfg.users {
        return Err(Error::Domain(format!(
            "user index (k={k}, m={m}) out of range for K={}, M={}",
            cfg.users, cfg.cells
        )));
    }
    Ok(Received::new(cfg, channels, v, delta)?.sinr(m, k))
}

/// Weighted sum-rate `f(V, Δ)`.
pub fn wsr(cfg: &NetworkConfig, channels: &ChannelSet, v: &BeamformerVec, delta: &ErrorVec) -> Result<f64> {
    Ok(Received::new(cfg, channels, v, delta)?.wsr())
}

pub fn grad_wsr_v(
    cfg: &NetworkConfig,
    channels: &ChannelSet,
    v: &BeamformerVec,
    delta: &ErrorVec,
) -> Result<Vec<f64>> {
    Ok(Received::new(cfg, channels, v, delta)?.grad_v())
}

pub fn grad_wsr_delta(
    cfg: &NetworkConfig,
    channels: &ChannelSet,
    v: &BeamformerVec,
    delta: &ErrorVec,
) -> Result<Vec<f64>> {
    Ok(Received::new(cfg, channels, v, delta)?.grad_delta())
}

/// `||V_m||_F^2 - P_m` for every BS; positive entries are violated budgets.
pub fn power_violation(cfg: &NetworkConfig, v: &BeamformerVec) -> Vec<f64> {
    let l = cfg.layout();
    (0..cfg.cells).map(|m| l.bs_power(v, m) - cfg.power[m]).collect()
}
