//! Experiment description in TOML.
//!
//! ```toml
//! [network]
//! cells = 2
//! antennas = 2
//! users = 2
//! snr_db = [0, 10, 20]   # or: power = 10.0
//! alpha = 1.0            # scalar or one weight per user
//! sigma2 = 1.0
//! log_base = 2.0
//!
//! [uncertainty]
//! epsilon = [0.0, 0.05, 0.1]
//!
//! [algorithm]
//! kind = ["blrbf", "wmmse"]
//! restarts = 1
//!
//! [algorithm.solver]
//! max_iters = 5000
//!
//! [algorithm.distributed]
//! graph = "ring"          # ring | complete | random | path to an edge list
//! schedule = "randomized"
//!
//! [run]
//! seeds = [0]
//! realizations = 10
//! out_dir = "out"
//! ```
//!
//! Every table is closed: an unknown key is an error naming its full path.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bladrbf::{CommGraph, Schedule, ScheduleMode};
use crate::blrbf::SolverConfig;
use crate::error::{Error, Result};
use crate::evaluator::WorstCaseSettings;
use crate::lower_solver::AlmConfig;
use crate::model::NetworkConfig;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Blrbf,
    Bladrbf,
    Wmmse,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Blrbf => "blrbf",
            AlgorithmKind::Bladrbf => "bladrbf",
            AlgorithmKind::Wmmse => "wmmse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub cells: usize,
    pub antennas: usize,
    pub users: usize,
    pub power: Option<f64>,
    pub snr_db: Option<OneOrMany<f64>>,
    #[serde(default = "one")]
    pub alpha: OneOrMany<f64>,
    #[serde(default = "unit")]
    pub sigma2: f64,
    #[serde(default = "two")]
    pub log_base: f64,
}

fn one() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}

fn unit() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySection {
    pub epsilon: OneOrMany<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eta_v: Option<f64>,
    pub eta_delta: Option<f64>,
    pub eta_lambda: Option<f64>,
    pub k_pre: Option<u64>,
    pub eps_tol: Option<f64>,
    pub max_iters: Option<u64>,
    pub conv_tol: Option<f64>,
    pub conv_window: Option<usize>,
    pub cut_penalty: Option<f64>,
    pub precondition_delta: Option<bool>,
    pub reset_delta: Option<bool>,
    pub refute_cuts: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlmSection {
    pub rho: Option<f64>,
    pub eta_delta: Option<f64>,
    pub eta_s: Option<f64>,
    pub eta_mu: Option<f64>,
    pub k_inner: Option<usize>,
    pub precondition: Option<bool>,
}

impl AlmSection {
    fn apply(&self, base: AlmConfig) -> AlmConfig {
        AlmConfig {
            rho: self.rho.unwrap_or(base.rho),
            eta_delta: self.eta_delta.unwrap_or(base.eta_delta),
            eta_s: self.eta_s.unwrap_or(base.eta_s),
            eta_mu: self.eta_mu.unwrap_or(base.eta_mu),
            k_inner: self.k_inner.unwrap_or(base.k_inner),
            precondition: self.precondition.unwrap_or(base.precondition),
            ..base
        }
    }
}

/// Settings of the worst-case evaluation reported for every cell.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub starts: Option<usize>,
    pub samples: Option<usize>,
    pub alm: AlmSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WmmseSection {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for WmmseSection {
    fn default() -> Self {
        WmmseSection {
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistributedSection {
    pub graph: String,
    /// Extra-edge probability and seed of the `random` graph.
    pub edge_prob: f64,
    pub graph_seed: u64,
    pub schedule: ScheduleMode,
    pub max_delay: u64,
    pub lag_node: usize,
    pub lag_factor: f64,
    pub loss_until: u64,
    pub event_budget: u64,
}

impl Default for DistributedSection {
    fn default() -> Self {
        let s = Schedule::new(ScheduleMode::default(), 0);
        DistributedSection {
            graph: "ring".into(),
            edge_prob: 0.3,
            graph_seed: 0,
            schedule: s.mode,
            max_delay: s.max_delay,
            lag_node: s.lag_node,
            lag_factor: s.lag_factor,
            loss_until: s.loss_until,
            event_budget: s.event_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub kind: OneOrMany<AlgorithmKind>,
    /// Seeded starts per cell; the best reported objective is kept.
    #[serde(default = "one_usize")]
    pub restarts: usize,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub alm: AlmSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub wmmse: WmmseSection,
    #[serde(default)]
    pub distributed: DistributedSection,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub realizations: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Wall-clock seconds in the summary; off by default so that summaries
    /// are reproducible byte for byte.
    #[serde(default)]
    pub record_wallclock: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    pub uncertainty: UncertaintySection,
    pub algorithm: AlgorithmSection,
    pub run: RunSection,
    /// Directory relative paths in the config resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parses and validates a configuration; errors carry the offending key path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().message().trim_end().to_string();
        Error::Config(format!("at `{path}`: {inner}"))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

fn bad(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("at `{path}`: {msg}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        match (&n.power, &n.snr_db) {
            (Some(_), Some(_)) => return Err(bad("network", "set either `power` or `snr_db`, not both")),
            (None, None) => return Err(bad("network", "one of `power` or `snr_db` is required")),
            _ => {}
        }
        if let Some(p) = n.power {
            if !(p.is_finite() && p > 0.0) {
                return Err(bad("network.power", "must be finite and > 0"));
            }
        }
        if self.snr_db().iter().any(|s| !s.is_finite()) {
            return Err(bad("network.snr_db", "values must be finite"));
        }
        if !(n.sigma2.is_finite() && n.sigma2 > 0.0) {
            return Err(bad("network.sigma2", "must be finite and > 0"));
        }
        let users = n.cells * n.users;
        if let OneOrMany::Many(a) = &n.alpha {
            if a.len() != users {
                return Err(bad("network.alpha", format!("expected {users} weights, got {}", a.len())));
            }
        }
        for p in self.powers() {
            self.network_at(p).validate().map_err(|e| bad("network", e))?;
        }
        if self.epsilons().iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(bad("uncertainty.epsilon", "values must be finite and >= 0"));
        }
        if self.algorithms().is_empty() {
            return Err(bad("algorithm.kind", "at least one algorithm is required"));
        }
        if self.algorithm.restarts == 0 {
            return Err(bad("algorithm.restarts", "must be >= 1"));
        }
        self.solver_config().validate().map_err(|e| bad("algorithm", e))?;
        let w = &self.algorithm.wmmse;
        if w.max_iters == 0 || !(w.tol.is_finite() && w.tol >= 0.0) {
            return Err(bad("algorithm.wmmse", "max_iters must be >= 1 and tol finite and >= 0"));
        }
        if self.algorithms().contains(&AlgorithmKind::Bladrbf) {
            self.schedule(0).validate(n.cells).map_err(|e| bad("algorithm.distributed", e))?;
            let g = &self.algorithm.distributed;
            if !(0.0..=1.0).contains(&g.edge_prob) {
                return Err(bad("algorithm.distributed.edge_prob", "must lie in [0, 1]"));
            }
        }
        let mut seen = self.run.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.run.seeds.len() {
            return Err(bad("run.seeds", "seeds must be distinct"));
        }
        Ok(())
    }

    /// SNR axis in dB; a fixed `power` maps to `10 log10(P / σ²)`.
    pub fn snr_db(&self) -> Vec<f64> {
        match (&self.network.snr_db, self.network.power) {
            (Some(s), _) => s.to_vec(),
            (None, Some(p)) => vec![10.0 * (p / self.network.sigma2).log10()],
            (None, None) => Vec::new(),
        }
    }

    /// Per-BS budget for each SNR point: `P = 10^(SNR/10) σ²`.
    pub fn powers(&self) -> Vec<f64> {
        match self.network.power {
            Some(p) => vec![p],
            None => self
                .snr_db()
                .iter()
                .map(|s| 10f64.powf(s / 10.0) * self.network.sigma2)
                .collect(),
        }
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.uncertainty.epsilon.to_vec()
    }

    pub fn algorithms(&self) -> Vec<AlgorithmKind> {
        let mut a = self.algorithm.kind.to_vec();
        a.dedup();
        a
    }

    /// Network with every budget set to `power`.
    pub fn network_at(&self, power: f64) -> NetworkConfig {
        let n = &self.network;
        let mut cfg = NetworkConfig::uniform(n.cells, n.antennas, n.users, power);
        cfg.alpha = match &n.alpha {
            OneOrMany::One(a) => vec![*a; n.cells * n.users],
            OneOrMany::Many(a) => a.clone(),
        };
        cfg.sigma2 = vec![n.sigma2; n.cells * n.users];
        cfg.log_base = n.log_base;
        cfg
    }

    pub fn solver_config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        let s = &self.algorithm.solver;
        let r = &self.algorithm.report;
        SolverConfig {
            eta_v: s.eta_v.unwrap_or(d.eta_v),
            eta_delta: s.eta_delta.unwrap_or(d.eta_delta),
            eta_lambda: s.eta_lambda.unwrap_or(d.eta_lambda),
            k_pre: s.k_pre.unwrap_or(d.k_pre),
            eps_tol: s.eps_tol.unwrap_or(d.eps_tol),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            conv_tol: s.conv_tol.unwrap_or(d.conv_tol),
            conv_window: s.conv_window.unwrap_or(d.conv_window),
            cut_penalty: s.cut_penalty.unwrap_or(d.cut_penalty),
            precondition_delta: s.precondition_delta.unwrap_or(d.precondition_delta),
            reset_delta: s.reset_delta.unwrap_or(d.reset_delta),
            refute_cuts: s.refute_cuts.unwrap_or(d.refute_cuts),
            inner: self.algorithm.alm.apply(d.inner.clone()),
            report: WorstCaseSettings {
                starts: r.starts.unwrap_or(d.report.starts),
                samples: r.samples.unwrap_or(d.report.samples),
                inner: r.alm.apply(d.report.inner.clone()),
            },
            ..d
        }
    }

    pub fn schedule(&self, seed: u64) -> Schedule {
        let g = &self.algorithm.distributed;
        Schedule {
            max_delay: g.max_delay,
            lag_node: g.lag_node,
            lag_factor: g.lag_factor,
            loss_until: g.loss_until,
            event_budget: g.event_budget,
            ..Schedule::new(g.schedule, seed)
        }
    }

    /// Communication graph among the BSs.
    pub fn graph(&self) -> Result<CommGraph> {
        let g = &self.algorithm.distributed;
        let m = self.network.cells;
        let graph = match g.graph.as_str() {
            "ring" => CommGraph::ring(m)?,
            "complete" => CommGraph::complete(m)?,
            "random" => CommGraph::random_strongly_connected(m, g.edge_prob, g.graph_seed)?,
            file => {
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| bad("algorithm.distributed.graph", format!("{}: {e}", path.display())))?;
                CommGraph::parse(&text)?
            }
        };
        if graph.nodes() != m {
            return Err(bad(
                "algorithm.distributed.graph",
                format!("graph has {} nodes, network has {m} cells", graph.nodes()),
            ));
        }
        Ok(graph)
    }
}
