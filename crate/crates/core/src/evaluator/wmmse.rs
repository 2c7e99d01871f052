//! Weighted-MMSE block coordinate ascent for the multi-cell MISO downlink
//! with scalar receivers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use crate::blrbf::initial_beamformer;
use crate::error::{Error, Result};
use crate::model::{BeamformerVec, ChannelSet, NetworkConfig, Received};

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseReport {
    /// Best (highest sum-rate) iterate seen; always power feasible.
    pub v: BeamformerVec,
    pub wsr: f64,
    /// Sum-rate after initialisation and after every sweep.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn scale_to_budget(v: &mut [Complex64], layout: &crate::model::PackingLayout, power: &[f64]) {
    let nk = layout.users * layout.antennas;
    for (m, p) in power.iter().enumerate() {
        let blk = &mut v[m * nk..(m + 1) * nk];
        let cur: f64 = blk.iter().map(|z| z.norm_sqr()).sum();
        if cur > *p {
            let s = (p / cur).sqrt();
            blk.iter_mut().for_each(|z| *z *= s);
        }
    }
}

/// Power of `(A + μI)^{-1} B` given the eigen-projections of `B`.
fn power_at(lams: &[f64], proj: &[f64], mu: f64) -> f64 {
    lams.iter().zip(proj).map(|(l, p)| p / (l + mu).powi(2)).sum()
}

/// Runs WMMSE on the perfect channels of `channels` (true channels when
/// known, otherwise the estimates) from the same seeded start as the
/// cutting-plane solver.
pub fn wmmse_baseline(
    network: &NetworkConfig,
    channels: &ChannelSet,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<WmmseReport> {
    network.validate()?;
    channels.check_against(network)?;
    let layout = network.layout();
    let (mm, kk, nn) = (layout.cells, layout.users, layout.antennas);
    let h = channels.perfect().h_est;

    let mut v = layout.unpack_v(&initial_beamformer(network, seed)?)?;

    let eval = |v: &[Complex64]| Received::from_complex(network, h.clone(), v.to_vec()).wsr();
    let mut cur = eval(&v);
    let mut history = vec![cur];
    let mut best = (cur, v.clone());
    let mut converged = false;
    let mut iterations = 0;
    let row = |m: usize, n: usize, k: usize| &h[layout.channel_offset(m, n, k)..][..nn];

    while iterations < max_iters {
        iterations += 1;
        // receivers and weights
        let mut rx = vec![Complex64::new(0.0, 0.0); mm * kk];
        let mut wt = vec![0.0; mm * kk];
        for m in 0..mm {
            for k in 0..kk {
                let u = m * kk + k;
                let mut total = network.sigma2[u];
                let mut own = Complex64::new(0.0, 0.0);
                for n in 0..mm {
                    for l in 0..kk {
                        let z: Complex64 = row(m, n, k).iter().zip(&v[layout.v_offset(n, l)..][..nn]).map(|(a, b)| a * b).sum();
                        total += z.norm_sqr();
                        if n == m && l == k {
                            own = z;
                        }
                    }
                }
                let interf = total - own.norm_sqr();
                rx[u] = own / total;
                wt[u] = if interf > 0.0 { total / interf } else { 0.0 };
            }
        }
        // transmitters, one BS at a time
        let mut next = vec![Complex64::new(0.0, 0.0); v.len()];
        for n in 0..mm {
            let mut a = DMatrix::<Complex64>::zeros(nn, nn);
            for m in 0..mm {
                for k in 0..kk {
                    let u = m * kk + k;
                    let c = network.alpha[u] * wt[u] * rx[u].norm_sqr();
                    let hr = row(m, n, k);
                    for i in 0..nn {
                        for j in 0..nn {
                            a[(i, j)] += hr[i].conj() * hr[j] * c;
                        }
                    }
                }
            }
            let mut b = DMatrix::<Complex64>::zeros(nn, kk);
            for l in 0..kk {
                let u = n * kk + l;
                let c = rx[u] * network.alpha[u] * wt[u];
                for (i, hv) in row(n, n, l).iter().enumerate() {
                    b[(i, l)] = hv.conj() * c;
                }
            }
            let eig = a.symmetric_eigen();
            let lams: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0)).collect();
            let ub = eig.eigenvectors.adjoint() * &b;
            let proj: Vec<f64> = (0..nn).map(|i| ub.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
            let budget = network.power[n];
            let lmax = lams.iter().cloned().fold(0.0, f64::max);
            let singular = lams
                .iter()
                .zip(&proj)
                .any(|(l, p)| *l <= 1e-12 * lmax.max(1e-300) && *p > 0.0);
            let mu = if !singular && power_at(&lams, &proj, 0.0) <= budget {
                0.0
            } else {
                let total: f64 = proj.iter().sum();
                let (mut lo, mut hi) = (0.0, (total / budget).sqrt().max(1e-300));
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if power_at(&lams, &proj, mid) > budget {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                hi
            };
            let inv = DVector::from_iterator(
                nn,
                lams.iter().zip(&proj).map(|(l, p)| {
                    if *p > 0.0 {
                        Complex64::new(1.0 / (l + mu), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }),
            );
            let vs = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * ub;
            for l in 0..kk {
                for i in 0..nn {
                    next[layout.v_offset(n, l) + i] = vs[(i, l)];
                }
            }
        }
        scale_to_budget(&mut next, &layout, &network.power);
        if next.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical {
                context: "WMMSE beamformer update".into(),
                iteration: iterations,
            });
        }
        v = next;
        let prev = cur;
        cur = eval(&v);
        history.push(cur);
        if cur > best.0 {
            best = (cur, v.clone());
        }
        if (cur - prev).abs() <= tol * prev.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let packed = BeamformerVec(layout.pack_v(&best.1)?);
    Ok(WmmseReport {
        v: packed,
        wsr: best.0,
        history,
        iterations,
        converged,
    })
}

/// Best of [`wmmse_baseline`] over several seeded starts.
pub fn wmmse_multistart(
    network: &NetworkConfig,
    channels: &ChannelSet,
    max_iters: usize,
    tol: f64,
    seeds: &[u64],
) -> Result<WmmseReport> {
    let mut best: Option<WmmseReport> = None;
    for &s in seeds {
        let r = wmmse_baseline(network, channels, max_iters, tol, s)?;
        if best.as_ref().is_none_or(|b| r.wsr > b.wsr) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Config("multistart needs at least one seed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_rayleigh_channels;

    #[test]
    fn single_user_matched_filter() {
        let net = NetworkConfig::uniform(1, 3, 1, 2.0);
        let ch = generate_rayleigh_channels(&net, &[0.0], 4).unwrap();
        let rep = wmmse_baseline(&net, &ch, 200, 1e-12, 1).unwrap();
        let hn: f64 = ch.h_est.iter().map(|z| z.norm_sqr()).sum();
        let expect = (1.0 + 2.0 * hn).log2();
        assert!((rep.wsr - expect).abs() < 1e-8, "{} vs {expect}", rep.wsr);
        let p: f64 = rep.v.iter().map(|x| x * x).sum();
        assert!((p - 2.0).abs() < 1e-8);
        // v ∝ conj(h)
        let vc = net.layout().unpack_v(&rep.v).unwrap();
        let ip: Complex64 = ch.h_est.iter().zip(&vc).map(|(a, b)| a * b).sum();
        assert!((ip.norm() - (2.0 * hn).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn monotone_and_feasible() {
        for seed in 0..5 {
            let net = NetworkConfig::uniform(2, 2, 2, 10.0);
            let ch = generate_rayleigh_channels(&net, &[0.0; 8], seed).unwrap();
            let rep = wmmse_baseline(&net, &ch, 300, 1e-10, seed).unwrap();
            for w in rep.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{:?}", w);
            }
            for m in 0..2 {
                assert!(net.layout().bs_power(&rep.v, m) <= 10.0 + 1e-9);
            }
        }
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let net = NetworkConfig::uniform(2, 2, 2, 10.0);
        let ch = generate_rayleigh_channels(&net, &[0.0; 8], 3).unwrap();
        let rep = wmmse_baseline(&net, &ch, 1, 0.0, 3).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
    }
}
