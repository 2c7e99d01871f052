//! Asynchronous distributed solver, simulated in logical time.
//!
//! Every BS runs the centralised iteration on its own copy of `(V, Δ, λ)`.
//! Power cuts are valid for everyone, so each node cuts any violated budget
//! rather than waiting for the owner's cut to arrive. At each cut-management
//! event a node merges the cut sets received from its in-neighbours and sends its
//! current set to its out-neighbours. Node steps and message deliveries are
//! interleaved by a seeded [`Schedule`], so a run is a pure function of its
//! inputs.

mod graph;
mod schedule;

pub use graph::{validate_graph, CommGraph, GraphCheck};
pub use schedule::{Schedule, ScheduleMode};

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::blrbf::{advance, finish, has_converged, ManageReport, SolveResult, SolverConfig, SolverState, Termination};
use crate::cutting_planes::{CutOrigin, CuttingPlane};
use crate::error::{Error, Result};
use crate::model::{ChannelSet, NetworkConfig};
use schedule::Scheduler;

/// Seed of node `l` for a run seeded with `seed`; node 0 uses `seed`.
pub fn node_seed(seed: u64, l: usize) -> u64 {
    seed.wrapping_add((l as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Immutable snapshot of a node's cuts (no duals).
#[derive(Debug, Clone, PartialEq)]
pub struct CutMessage {
    pub sender: usize,
    pub cuts: Arc<Vec<CuttingPlane>>,
    pub timestamp: u64,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub solver: SolverState,
    pub inbox: Vec<CutMessage>,
    pub converged: bool,
    /// Ids this node pruned itself; they are not imported again.
    pruned: HashSet<u64>,
}

impl NodeState {
    pub fn new(network: &NetworkConfig, id: usize, seed: u64) -> Result<Self> {
        if id >= network.cells {
            return Err(Error::Domain(format!("node {id} has no BS in a {}-cell network", network.cells)));
        }
        Ok(NodeState {
            id,
            solver: SolverState::initial(network, node_seed(seed, id), id, None)?,
            inbox: Vec::new(),
            converged: false,
            pruned: HashSet::new(),
        })
    }
}

/// One local iteration: a primal-dual step and, when due, cut management.
/// The inbox is left untouched.
pub fn node_local_step(
    node: &NodeState,
    cfg: &SolverConfig,
    network: &NetworkConfig,
    channels: &ChannelSet,
) -> Result<(NodeState, Option<ManageReport>)> {
    let (solver, rep) = advance(&node.solver, cfg, network, channels)?;
    let mut next = NodeState {
        solver,
        ..node.clone()
    };
    if let Some(r) = &rep {
        next.pruned.extend(r.dropped.iter().copied());
    }
    Ok((next, rep))
}

/// Cuts a node took from its inbox.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExchangeReport {
    /// `(sender, cuts in message, cuts imported)` per message.
    pub received: Vec<(usize, usize, usize)>,
    /// Whether an imported cut is violated at the node's iterate.
    pub violated: bool,
}

/// Drains the inbox into the cut set (deduplicated, imported with `λ = 0`
/// and origin `Received(sender)`) and returns the snapshot for the
/// out-neighbours.
pub fn exchange(
    node: &NodeState,
    graph: &CommGraph,
    logical_time: u64,
) -> Result<(NodeState, CutMessage, ExchangeReport)> {
    let mut next = node.clone();
    let mut rep = ExchangeReport::default();
    let inbox = std::mem::take(&mut next.inbox);
    for msg in &inbox {
        if !graph.in_neighbors(node.id).contains(&msg.sender) {
            return Err(Error::Protocol(format!(
                "node {} received cuts from {}, which is not an in-neighbour",
                node.id, msg.sender
            )));
        }
        let mut imported = 0;
        for cp in msg.cuts.iter() {
            if next.pruned.contains(&cp.id) || next.solver.cuts.contains_equivalent(cp) {
                continue;
            }
            if cp.eval_unchecked(&next.solver.v, &next.solver.delta) > 0.0 {
                rep.violated = true;
            }
            let t = next.solver.t;
            next.solver
                .cuts
                .push(cp.relabeled(CutOrigin::Received(msg.sender)), 0.0, t)?;
            imported += 1;
        }
        if imported > 0 {
            next.solver.last_cut_added = Some(next.solver.t);
        }
        rep.received.push((msg.sender, msg.cuts.len(), imported));
    }
    let out = CutMessage {
        sender: node.id,
        cuts: Arc::new(next.solver.cuts.snapshot()),
        timestamp: logical_time,
    };
    Ok((next, out, rep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Step,
    Send,
    Recv,
    Drop,
    AddPower,
    AddG,
    Converged,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Step => "step",
            EventKind::Send => "send",
            EventKind::Recv => "recv",
            EventKind::Drop => "drop",
            EventKind::AddPower => "add_power",
            EventKind::AddG => "add_g",
            EventKind::Converged => "converged",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: u64,
    pub node: usize,
    pub kind: EventKind,
    pub detail: String,
}

/// Event log as CSV with header `logical_time,node,event,detail`.
pub fn event_log_csv(events: &[Event]) -> String {
    let mut s = String::from("logical_time,node,event,detail\n");
    for e in events {
        let _ = writeln!(s, "{},{},{},{}", e.time, e.node, e.kind, e.detail);
    }
    s
}

#[derive(Debug, Clone)]
pub struct BladrbfRun {
    pub results: Vec<SolveResult>,
    pub events: Vec<Event>,
    pub logical_time: u64,
    /// The event budget ran out before every node finished.
    pub budget_exhausted: bool,
}

fn node_error(e: Error, node: usize, time: u64) -> Error {
    match e {
        Error::Diverged(mut d) => {
            d.node = Some(node);
            d.logical_time = Some(time);
            Error::Diverged(d)
        }
        Error::Numerical { context, iteration } => Error::Numerical {
            context: format!("{context} (node {node}, logical time {time})"),
            iteration,
        },
        other => other,
    }
}

struct Sim<'a> {
    graph: &'a CommGraph,
    nodes: Vec<NodeState>,
    in_flight: BTreeMap<(u64, u64), (usize, CutMessage)>,
    seq: u64,
    events: Vec<Event>,
    sched: Scheduler,
}

impl Sim<'_> {
    fn log(&mut self, time: u64, node: usize, kind: EventKind, detail: String) {
        self.events.push(Event {
            time,
            node,
            kind,
            detail,
        });
    }

    fn broadcast(&mut self, now: u64, msg: CutMessage) {
        let from = msg.sender;
        for &to in self.graph.out_neighbors(from) {
            if self.sched.lost(now) {
                self.log(now, from, EventKind::Drop, format!("message to {to} lost"));
                continue;
            }
            let at = now + self.sched.delay();
            self.log(now, from, EventKind::Send, format!("to {to} cuts {}", msg.cuts.len()));
            self.in_flight.insert((at, self.seq), (to, msg.clone()));
            self.seq += 1;
        }
    }

    fn deliver(&mut self, now: u64) {
        while let Some(entry) = self.in_flight.first_entry() {
            if entry.key().0 > now {
                break;
            }
            let (to, msg) = entry.remove();
            self.nodes[to].inbox.push(msg);
        }
    }

    fn absorb(&mut self, l: usize, now: u64) -> Result<bool> {
        let before = self.nodes[l].solver.cuts.len();
        let (next, out, rep) = exchange(&self.nodes[l], self.graph, now)?;
        for (from, n, new) in &rep.received {
            self.log(now, l, EventKind::Recv, format!("from {from} cuts {n} new {new}"));
        }
        let grew = next.solver.cuts.len() > before;
        self.nodes[l] = next;
        if grew {
            self.broadcast(now, out);
        }
        Ok(rep.violated)
    }
}

/// Runs the distributed solver until every node has converged (or hit
/// `max_iters`) with no messages pending, or the event budget is spent.
///
/// A converged node still takes deliveries: it forwards its set when the set
/// grew and resumes stepping if an imported cut is violated at its iterate.
pub fn run_bladrbf(
    network: &NetworkConfig,
    channels: &ChannelSet,
    graph: &CommGraph,
    schedule: &Schedule,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<BladrbfRun> {
    cfg.validate()?;
    channels.check_against(network)?;
    if graph.nodes() != network.cells {
        return Err(Error::dim("communication graph nodes", network.cells, graph.nodes()));
    }
    let check = validate_graph(graph);
    if !check.strongly_connected {
        let (i, j) = check.unreachable.unwrap_or((0, 0));
        return Err(Error::Domain(format!(
            "communication graph is not strongly connected: no path from {i} to {j}"
        )));
    }
    let nodes = (0..network.cells)
        .map(|l| NodeState::new(network, l, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut sim = Sim {
        graph,
        nodes,
        in_flight: BTreeMap::new(),
        seq: 0,
        events: Vec::new(),
        sched: Scheduler::new(schedule, network.cells)?,
    };
    let done = |n: &NodeState| n.converged || n.solver.t >= cfg.max_iters;
    let mut now = 0u64;
    let mut exhausted = false;
    loop {
        sim.deliver(now);
        let ready: Vec<bool> = sim.nodes.iter().map(|n| !done(n) || !n.inbox.is_empty()).collect();
        let Some(l) = sim.sched.pick(&ready) else {
            match sim.in_flight.keys().next() {
                Some(&(at, _)) => {
                    now = at.max(now + 1);
                    continue;
                }
                None => break,
            }
        };
        if now >= schedule.event_budget {
            exhausted = true;
            break;
        }
        if done(&sim.nodes[l]) {
            // idle node woken by mail
            if sim.absorb(l, now).map_err(|e| node_error(e, l, now))? && sim.nodes[l].converged {
                sim.nodes[l].converged = false;
            }
        } else {
            let (next, rep) = node_local_step(&sim.nodes[l], cfg, network, channels).map_err(|e| node_error(e, l, now))?;
            sim.nodes[l] = next;
            let t = sim.nodes[l].solver.t;
            sim.log(now, l, EventKind::Step, format!("t {t}"));
            if let Some(rep) = rep {
                for id in &rep.dropped {
                    sim.log(now, l, EventKind::Drop, format!("cut {id} inactive"));
                }
                for (m, id) in &rep.added_power {
                    sim.log(now, l, EventKind::AddPower, format!("cut {id} bs {m}"));
                }
                if let Some(id) = rep.added_g {
                    sim.log(now, l, EventKind::AddG, format!("cut {id} g {:e}", rep.g));
                }
                let (next, out, xr) = exchange(&sim.nodes[l], graph, now).map_err(|e| node_error(e, l, now))?;
                for (from, n, new) in &xr.received {
                    sim.log(now, l, EventKind::Recv, format!("from {from} cuts {n} new {new}"));
                }
                sim.nodes[l] = next;
                sim.broadcast(now, out);
            }
            if has_converged(&sim.nodes[l].solver, cfg) {
                sim.nodes[l].converged = true;
                sim.log(now, l, EventKind::Converged, format!("t {t}"));
            } else if t >= cfg.max_iters {
                sim.log(now, l, EventKind::Converged, format!("t {t} iteration cap"));
            }
        }
        now += 1;
    }
    let results = sim
        .nodes
        .into_iter()
        .map(|n| {
            let term = if n.converged {
                Termination::Converged
            } else {
                Termination::MaxIters
            };
            let s = node_seed(seed, n.id);
            finish(n.solver, term, cfg, network, channels, s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BladrbfRun {
        results,
        events: sim.events,
        logical_time: now,
        budget_exhausted: exhausted,
    })
}

/// `max_{i,j} |F̄_i - F̄_j| / max(1, |F̄_1|)`; zero for fewer than two values.
pub fn consensus_gap_values(values: &[f64]) -> f64 {
    let Some(first) = values.first() else {
        return 0.0;
    };
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / first.abs().max(1.0)
}

/// [`consensus_gap_values`] over the reported objectives.
pub fn consensus_gap(results: &[SolveResult]) -> f64 {
    let v: Vec<f64> = results.iter().map(|r| r.objective).collect();
    consensus_gap_values(&v)
}
