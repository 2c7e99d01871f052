use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{AlgorithmKind, ExperimentConfig};
use crate::bladrbf::{event_log_csv, node_seed, run_bladrbf};
use crate::blrbf::{history_csv, restart_seeds, run_blrbf_multistart};
use crate::cutting_planes::write_cuts;
use crate::error::{Error, Result};
use crate::evaluator::{wmmse_multistart, worst_case_wsr};
use crate::model::{generate_rayleigh_channels, uniform_radii, write_channel_dump, ChannelSet};

pub const SUMMARY_HEADER: &str = "snr_db,epsilon,algorithm,seed,realization,worst_case_wsr,iters,wallclock_s";
pub const PLOT_HEADER: &str = "snr_db,median_wsr,mean_wsr,min_wsr,max_wsr";

/// Channel seed of realization `r` under run seed `seed`.
pub fn realization_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        .wrapping_add((r as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub snr_db: f64,
    pub epsilon: f64,
    pub algorithm: AlgorithmKind,
    pub seed: u64,
    pub realization: usize,
    /// `NaN` for a cell whose solver diverged.
    pub worst_case_wsr: f64,
    pub iters: u64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutcome {
    pub rows: Vec<SummaryRow>,
    pub diverged: usize,
    pub artifacts: Vec<PathBuf>,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.3}",
            r.snr_db,
            r.epsilon,
            r.algorithm.name(),
            r.seed,
            r.realization,
            r.worst_case_wsr,
            r.iters,
            r.wallclock_s
        );
    }
    s
}

/// Median, mean, min and max of the finite values; `None` if there are none.
pub fn aggregate(values: &[f64]) -> Option<(f64, f64, f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    let mean = v.iter().sum::<f64>() / n as f64;
    Some((median, mean, v[0], v[n - 1]))
}

fn rate_unit(log_base: f64) -> String {
    if log_base == 2.0 {
        "bits/s/Hz".into()
    } else if (log_base - std::f64::consts::E).abs() < 1e-12 {
        "nats/s/Hz".into()
    } else {
        format!("log{log_base} units/s/Hz")
    }
}

/// Writes `text` to `path`, echoing the path.
pub(crate) struct Artifacts<'a> {
    out: &'a mut dyn Write,
    written: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    pub(crate) fn new(out: &'a mut dyn Write) -> Self {
        Artifacts {
            out,
            written: Vec::new(),
        }
    }

    pub(crate) fn write(&mut self, path: &Path, text: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, text)?;
        if !self.written.iter().any(|p| p == path) {
            writeln!(self.out, "{}", path.display())?;
            self.written.push(path.to_path_buf());
        }
        Ok(())
    }
}

fn diverged_in_cell(e: &Error) -> bool {
    matches!(e, Error::Diverged(_) | Error::Numerical { .. })
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    power: f64,
    channels: ChannelSet,
    seed: u64,
}

impl Cell<'_> {
    /// Solves one cell; returns the worst-case WSR and iteration count.
    fn solve(&self, alg: AlgorithmKind, art: &mut Artifacts) -> Result<(f64, u64)> {
        let net = self.cfg.network_at(self.power);
        let solver = self.cfg.solver_config();
        let seeds = restart_seeds(self.seed, self.cfg.algorithm.restarts);
        match alg {
            AlgorithmKind::Blrbf => {
                let r = run_blrbf_multistart(&net, &self.channels, &solver, &seeds)?;
                art.write(&self.dir.join("history.csv"), &history_csv(&r.history))?;
                art.write(&self.dir.join("cuts.txt"), &write_cuts(r.cuts.cuts()))?;
                Ok((r.objective, r.iterations))
            }
            AlgorithmKind::Bladrbf => {
                let graph = self.cfg.graph()?;
                let sched = self.cfg.schedule(self.seed);
                let mut best: Option<crate::bladrbf::BladrbfRun> = None;
                let score = |run: &crate::bladrbf::BladrbfRun| {
                    run.results.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min)
                };
                for &s in &seeds {
                    let run = run_bladrbf(&net, &self.channels, &graph, &sched, &solver, s)?;
                    if best.as_ref().is_none_or(|b| score(&run) > score(b)) {
                        best = Some(run);
                    }
                }
                let run = best.ok_or_else(|| Error::Config("no restarts".into()))?;
                for (l, r) in run.results.iter().enumerate() {
                    art.write(&self.dir.join(format!("history_node{l}.csv")), &history_csv(&r.history))?;
                }
                art.write(&self.dir.join("events.csv"), &event_log_csv(&run.events))?;
                let iters = run.results.iter().map(|r| r.iterations).max().unwrap_or(0);
                Ok((score(&run), iters))
            }
            AlgorithmKind::Wmmse => {
                // designed on the estimate, judged on the ball around it
                let nominal = ChannelSet {
                    h_true: None,
                    ..self.channels.with_uniform_radius(0.0)
                };
                let w = &self.cfg.algorithm.wmmse;
                let rep = wmmse_multistart(&net, &nominal, w.max_iters, w.tol, &seeds)?;
                let mut h = String::from("iteration,wsr\n");
                for (i, x) in rep.history.iter().enumerate() {
                    let _ = writeln!(h, "{i},{x:.17e}");
                }
                art.write(&self.dir.join("history.csv"), &h)?;
                let report = &solver.report;
                let wc = worst_case_wsr(
                    &net,
                    &self.channels,
                    &rep.v,
                    report.starts,
                    report.samples,
                    &report.inner,
                    node_seed(self.seed, 0) ^ 0x0BAD_5EED_0000_0000,
                )?;
                Ok((wc.wsr_alm, rep.iterations as u64))
            }
        }
    }
}

/// Runs every `(seed, realization, SNR, ε, algorithm)` cell of `cfg` and
/// writes per-cell histories, the summary and a metadata file under
/// `out_dir`. Every written path is echoed to `out` once.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path, out: &mut dyn Write) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut art = Artifacts::new(out);
    let mut outcome = RunOutcome::default();
    let snrs = cfg.snr_db();
    let powers = cfg.powers();
    let eps = cfg.epsilons();
    let eps_max = eps.iter().copied().fold(0.0, f64::max);
    for &seed in &cfg.run.seeds {
        for r in 0..cfg.run.realizations {
            let Some(&p0) = powers.first() else { continue };
            let net0 = cfg.network_at(p0);
            // truth inside the largest ball; smaller balls share the estimate
            let base = generate_rayleigh_channels(&net0, &uniform_radii(&net0, eps_max), realization_seed(seed, r))?;
            for (&snr, &power) in snrs.iter().zip(&powers) {
                for &e in &eps {
                    for alg in cfg.algorithms() {
                        let dir = out_dir
                            .join("cells")
                            .join(format!("snr{snr}_eps{e}_{}_s{seed}_r{r}", alg.name()));
                        let cell = Cell {
                            cfg,
                            dir,
                            power,
                            channels: base.with_uniform_radius(e),
                            seed: realization_seed(seed, r),
                        };
                        let start = Instant::now();
                        let (wsr, iters) = match cell.solve(alg, &mut art) {
                            Ok(x) => x,
                            Err(err) if diverged_in_cell(&err) => {
                                outcome.diverged += 1;
                                eprintln!("cell snr={snr} eps={e} {} seed={seed} r={r}: {err}", alg.name());
                                if let Error::Diverged(d) = &err {
                                    art.write(&cell.dir.join("history.csv"), &history_csv(&d.history))?;
                                }
                                (f64::NAN, 0)
                            }
                            Err(err) => return Err(err),
                        };
                        let wall = if cfg.run.record_wallclock {
                            start.elapsed().as_secs_f64()
                        } else {
                            0.0
                        };
                        outcome.rows.push(SummaryRow {
                            snr_db: snr,
                            epsilon: e,
                            algorithm: alg,
                            seed,
                            realization: r,
                            worst_case_wsr: wsr,
                            iters,
                            wallclock_s: wall,
                        });
                    }
                }
            }
        }
    }
    art.write(&out_dir.join("summary.csv"), &summary_csv(&outcome.rows))?;
    let meta = serde_json::json!({
        "rate_unit": rate_unit(cfg.network.log_base),
        "log_base": cfg.network.log_base,
        "snr_mapping": "P_m = 10^(snr_db / 10) * sigma2 for every BS",
        "sigma2": cfg.network.sigma2,
        "headline": "median over seeds and realizations",
    });
    art.write(&out_dir.join("run_meta.json"), &format!("{meta:#}\n"))?;
    outcome.artifacts = art.written;
    Ok(outcome)
}

/// Per-SNR aggregates of one `(ε, algorithm)` slice, as plot data.
pub fn plot_csv(rows: &[SummaryRow], epsilon: f64, alg: AlgorithmKind, snrs: &[f64]) -> String {
    let mut s = format!("{PLOT_HEADER}\n");
    for &snr in snrs {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.snr_db == snr && r.epsilon == epsilon && r.algorithm == alg)
            .map(|r| r.worst_case_wsr)
            .collect();
        let (md, mean, lo, hi) = aggregate(&vals).unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
        let _ = writeln!(s, "{snr},{md},{mean},{lo},{hi}");
    }
    s
}

/// [`cmd_run`] over the given SNR axis, then one `wsr_vs_snr_<ε>.csv` per
/// uncertainty level (suffixed with the algorithm when several are run).
pub fn cmd_sweep_snr(cfg: &ExperimentConfig, snrs: &[f64], out_dir: &Path, out: &mut dyn Write) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    cfg.network.power = None;
    cfg.network.snr_db = Some(super::config::OneOrMany::Many(snrs.to_vec()));
    let mut outcome = cmd_run(&cfg, out_dir, out)?;
    let mut art = Artifacts::new(out);
    art.written = std::mem::take(&mut outcome.artifacts);
    let algs = cfg.algorithms();
    for e in cfg.epsilons() {
        for &alg in &algs {
            let name = if algs.len() == 1 {
                format!("wsr_vs_snr_{e}.csv")
            } else {
                format!("wsr_vs_snr_{e}_{}.csv", alg.name())
            };
            art.write(&out_dir.join(name), &plot_csv(&outcome.rows, e, alg, snrs))?;
        }
    }
    outcome.artifacts = art.written;
    Ok(outcome)
}

/// Writes the estimate and truth dumps of every realization under `seed`.
pub fn cmd_dump_channels(cfg: &ExperimentConfig, seed: u64, out_dir: &Path, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut art = Artifacts::new(out);
    let eps_max = cfg.epsilons().iter().copied().fold(0.0, f64::max);
    let Some(&p0) = cfg.powers().first() else {
        return Ok(Vec::new());
    };
    let net = cfg.network_at(p0);
    for r in 0..cfg.run.realizations {
        let ch = generate_rayleigh_channels(&net, &uniform_radii(&net, eps_max), realization_seed(seed, r))?;
        let (est, truth) = write_channel_dump(&ch);
        art.write(&out_dir.join(format!("channels_s{seed}_r{r}.txt")), &est)?;
        if let Some(t) = truth {
            art.write(&out_dir.join(format!("channels_s{seed}_r{r}_true.txt")), &t)?;
        }
    }
    Ok(art.written)
}
