use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// Nodes step in turn, messages arrive one tick after sending.
    #[default]
    RoundRobin,
    /// Weighted random node choice and random delays.
    Randomized,
    /// One slow node, random delays, and every message sent before
    /// `loss_until` is lost.
    AdversarialLag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub mode: ScheduleMode,
    /// Relative step rates; empty means seeded rates in `[0.5, 2]` for
    /// randomized mode and equal rates otherwise.
    pub speeds: Vec<f64>,
    /// Delays are drawn uniformly from `1..=max_delay` ticks.
    pub max_delay: u64,
    pub seed: u64,
    pub lag_node: usize,
    /// The lagging node steps this many times less often.
    pub lag_factor: f64,
    pub loss_until: u64,
    /// Hard cap on logical ticks.
    pub event_budget: u64,
}

impl Schedule {
    pub fn new(mode: ScheduleMode, seed: u64) -> Self {
        Schedule {
            mode,
            speeds: Vec::new(),
            max_delay: 5,
            seed,
            lag_node: 0,
            lag_factor: 10.0,
            loss_until: 500,
            event_budget: 50_000_000,
        }
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        if !self.speeds.is_empty() {
            if self.speeds.len() != nodes {
                return Err(Error::dim("schedule speeds", nodes, self.speeds.len()));
            }
            if self.speeds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::Config("schedule speeds must be finite and > 0".into()));
            }
        }
        if self.max_delay == 0 {
            return Err(Error::Config("max_delay must be >= 1".into()));
        }
        if self.mode == ScheduleMode::AdversarialLag {
            if self.lag_node >= nodes {
                return Err(Error::Config(format!("lag node {} out of range", self.lag_node)));
            }
            if !(self.lag_factor.is_finite() && self.lag_factor >= 1.0) {
                return Err(Error::Config("lag_factor must be >= 1".into()));
            }
        }
        if self.event_budget == 0 {
            return Err(Error::Config("event budget must be >= 1".into()));
        }
        Ok(())
    }
}

/// Running scheduler: node choice, delays and losses.
pub(crate) struct Scheduler {
    sched: Schedule,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
    cursor: usize,
}

impl Scheduler {
    pub(crate) fn new(sched: &Schedule, nodes: usize) -> Result<Self> {
        sched.validate(nodes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
        let weights = if !sched.speeds.is_empty() {
            sched.speeds.clone()
        } else {
            match sched.mode {
                ScheduleMode::RoundRobin => vec![1.0; nodes],
                ScheduleMode::Randomized => (0..nodes).map(|_| rng.random_range(0.5..=2.0)).collect(),
                ScheduleMode::AdversarialLag => (0..nodes)
                    .map(|i| if i == sched.lag_node { 1.0 / sched.lag_factor } else { 1.0 })
                    .collect(),
            }
        };
        Ok(Scheduler {
            sched: sched.clone(),
            rng,
            weights,
            cursor: 0,
        })
    }

    /// Next node to run among those flagged `ready`; `None` if none is.
    pub(crate) fn pick(&mut self, ready: &[bool]) -> Option<usize> {
        let n = ready.len();
        if !ready.iter().any(|r| *r) {
            return None;
        }
        match self.sched.mode {
            ScheduleMode::RoundRobin if self.sched.speeds.is_empty() => {
                for _ in 0..n {
                    let i = self.cursor % n;
                    self.cursor += 1;
                    if ready[i] {
                        return Some(i);
                    }
                }
                None
            }
            _ => {
                let total: f64 = (0..n).filter(|i| ready[*i]).map(|i| self.weights[i]).sum();
                let mut x = self.rng.random_range(0.0..total);
                let mut last = None;
                for i in (0..n).filter(|i| ready[*i]) {
                    last = Some(i);
                    if x < self.weights[i] {
                        return Some(i);
                    }
                    x -= self.weights[i];
                }
                last
            }
        }
    }

    pub(crate) fn delay(&mut self) -> u64 {
        match self.sched.mode {
            ScheduleMode::RoundRobin => 1,
            _ => self.rng.random_range(1..=self.sched.max_delay),
        }
    }

    pub(crate) fn lost(&self, sent_at: u64) -> bool {
        self.sched.mode == ScheduleMode::AdversarialLag && sent_at < self.sched.loss_until
    }
}
