//! Affine cuts `aᵀV + bᵀΔ + κ <= 0` and the sets of them the solvers carry.

mod wire;

pub use wire::{format_cut, parse_cut, parse_cuts, write_cuts};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BeamformerVec, ErrorVec, NetworkConfig};

/// Duals at or below this magnitude mark a cut as inactive.
pub const DUAL_ZERO_TOL: f64 = 1e-12;

/// Two cuts whose normalised coefficients differ by at most this much
/// (infinity norm) are the same cut.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CutOrigin {
    /// Linearised power budget of BS `m`.
    Power(usize),
    /// Linearised coupling constraint `g <= ε`.
    G,
    /// Imported from another node's snapshot.
    Received(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuttingPlane {
    pub id: u64,
    pub origin: CutOrigin,
    pub a: Vec<f64>,
    /// Empty means an all-zero `Δ` block.
    pub b: Vec<f64>,
    pub kappa: f64,
}

impl CuttingPlane {
    pub fn new(id: u64, origin: CutOrigin, a: Vec<f64>, b: Vec<f64>, kappa: f64) -> Result<Self> {
        let cp = CuttingPlane {
            id,
            origin,
            a,
            b,
            kappa,
        };
        if !cp.is_finite() {
            return Err(Error::Domain(format!("cut {id} has non-finite coefficients")));
        }
        if cp.is_degenerate() {
            return Err(Error::Domain(format!("cut {id} has an all-zero normal")));
        }
        Ok(cp)
    }

    pub fn is_finite(&self) -> bool {
        self.kappa.is_finite() && self.a.iter().chain(&self.b).all(|x| x.is_finite())
    }

    /// True when `(a, b)` is identically zero.
    pub fn is_degenerate(&self) -> bool {
        self.a.iter().chain(&self.b).all(|x| *x == 0.0)
    }

    pub fn normal_norm(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Residual `aᵀV + bᵀΔ + κ`; non-positive means satisfied.
    pub fn evaluate(&self, v: &[f64], delta: &[f64]) -> Result<f64> {
        if v.len() != self.a.len() {
            return Err(Error::dim("cut a-block", self.a.len(), v.len()));
        }
        if !self.b.is_empty() && delta.len() != self.b.len() {
            return Err(Error::dim("cut b-block", self.b.len(), delta.len()));
        }
        Ok(self.eval_unchecked(v, delta))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, v: &[f64], delta: &[f64]) -> f64 {
        let av: f64 = self.a.iter().zip(v).map(|(a, x)| a * x).sum();
        let bd: f64 = self.b.iter().zip(delta).map(|(b, x)| b * x).sum();
        av + bd + self.kappa
    }

    /// Same cut with the origin replaced.
    pub fn relabeled(&self, origin: CutOrigin) -> Self {
        CuttingPlane {
            origin,
            ..self.clone()
        }
    }

    /// Equality of the half-spaces up to positive scaling, within [`DEDUP_TOL`].
    pub fn same_halfspace(&self, other: &CuttingPlane) -> bool {
        if self.a.len() != other.a.len() {
            return false;
        }
        let (na, nb) = (self.normal_norm(), other.normal_norm());
        if na == 0.0 || nb == 0.0 {
            return false;
        }
        let close = |x: f64, y: f64| (x / na - y / nb).abs() <= DEDUP_TOL;
        if !close(self.kappa, other.kappa) {
            return false;
        }
        if !self.a.iter().zip(&other.a).all(|(x, y)| close(*x, *y)) {
            return false;
        }
        let blen = self.b.len().max(other.b.len());
        (0..blen).all(|i| {
            let x = self.b.get(i).copied().unwrap_or(0.0);
            let y = other.b.get(i).copied().unwrap_or(0.0);
            close(x, y)
        })
    }
}

/// Residual of `cp` at `(V, Δ)`.
pub fn evaluate_cut(cp: &CuttingPlane, v: &BeamformerVec, delta: &ErrorVec) -> Result<f64> {
    cp.evaluate(v, delta)
}

/// A cut together with its dual and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CutEntry {
    pub cut: CuttingPlane,
    pub lambda: f64,
    /// Local iteration at which the cut entered this set.
    pub added_at: u64,
    /// Whether the dual has ever been strictly positive.
    pub ever_active: bool,
}

/// Ordered cuts with paired duals `λ_i >= 0` and unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CutSet {
    entries: Vec<CutEntry>,
}

impl CutSet {
    pub fn new() -> Self {
        CutSet::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CutEntry] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [CutEntry] {
        &mut self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &CutEntry> {
        self.entries.iter()
    }

    pub fn cuts(&self) -> impl Iterator<Item = &CuttingPlane> {
        self.entries.iter().map(|e| &e.cut)
    }

    pub fn duals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.cut.id).collect()
    }

    pub fn contains_id(&self, id: u64) -> bool {
        self.entries.iter().any(|e| e.cut.id == id)
    }

    /// True when an equal half-space (or the same id) is already present.
    pub fn contains_equivalent(&self, cut: &CuttingPlane) -> bool {
        self.entries
            .iter()
            .any(|e| e.cut.id == cut.id || e.cut.same_halfspace(cut))
    }

    /// Appends a cut with dual `lambda`.
    pub fn push(&mut self, cut: CuttingPlane, lambda: f64, added_at: u64) -> Result<()> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain(format!("dual {lambda} must be finite and >= 0")));
        }
        if self.contains_id(cut.id) {
            return Err(Error::Contract(format!("duplicate cut id {}", cut.id)));
        }
        self.entries.push(CutEntry {
            cut,
            lambda,
            added_at,
            ever_active: lambda > DUAL_ZERO_TOL,
        });
        Ok(())
    }

    /// Keeps the entries for which `keep` holds, preserving order.
    pub fn retain(&mut self, keep: impl FnMut(&CutEntry) -> bool) {
        self.entries.retain(keep);
    }

    /// Sets the duals from a slice in set order.
    pub fn set_duals(&mut self, duals: &[f64]) -> Result<()> {
        if duals.len() != self.entries.len() {
            return Err(Error::dim("duals", self.entries.len(), duals.len()));
        }
        for (e, l) in self.entries.iter_mut().zip(duals) {
            if !(l.is_finite() && *l >= 0.0) {
                return Err(Error::Domain(format!("dual {l} must be finite and >= 0")));
            }
            e.lambda = *l;
            e.ever_active |= *l > DUAL_ZERO_TOL;
        }
        Ok(())
    }

    /// Snapshot of the cuts without duals.
    pub fn snapshot(&self) -> Vec<CuttingPlane> {
        self.cuts().cloned().collect()
    }
}

/// Removes every cut whose dual is zero (within [`DUAL_ZERO_TOL`]).
pub fn drop_inactive(cuts: &CutSet) -> CutSet {
    let mut out = cuts.clone();
    out.retain(|e| e.lambda.abs() > DUAL_ZERO_TOL);
    out
}

/// Hands out cut ids that are unique across nodes: the owner index sits in
/// the high bits.
#[derive(Debug, Clone)]
pub struct CutIdGen {
    owner: u64,
    next: u64,
}

impl CutIdGen {
    pub fn new(owner: usize) -> Self {
        CutIdGen {
            owner: owner as u64,
            next: 0,
        }
    }

    pub fn next_id(&mut self) -> u64 {
        let id = (self.owner << 40) | self.next;
        self.next += 1;
        id
    }
}

/// Linearisation of `||V_m||_F^2 - P_m` at a query that violates it.
///
/// `a` is `2 V_m` on BS `m`'s coordinates, `b = 0`, and `κ` makes the cut
/// evaluate to the violation at the query.
pub fn power_cut(
    network: &NetworkConfig,
    v_query: &BeamformerVec,
    _delta_query: &ErrorVec,
    m: usize,
    id: u64,
) -> Result<CuttingPlane> {
    let layout = network.layout();
    v_query.check(&layout)?;
    if m >= network.cells {
        return Err(Error::Domain(format!("BS index {m} out of range")));
    }
    let viol = layout.bs_power(v_query, m) - network.power[m];
    if viol <= 0.0 {
        return Err(Error::Contract(format!(
            "power cut requested for satisfied budget of BS {m} (violation {viol})"
        )));
    }
    let half = layout.v_complex_len();
    let mut a = vec![0.0; layout.v_len()];
    for i in layout.bs_range(m) {
        a[i] = 2.0 * v_query[i];
        a[half + i] = 2.0 * v_query[half + i];
    }
    let av: f64 = a.iter().zip(v_query.iter()).map(|(x, y)| x * y).sum();
    CuttingPlane::new(id, CutOrigin::Power(m), a, Vec::new(), viol - av)
}

/// Linearisation of `g <= eps_tol` at a violating query:
/// `g_q + ∇gᵀ([V; Δ] - [V_q; Δ_q]) - eps_tol <= 0`.
///
/// A zero gradient yields a degenerate cut (empty feasible set); check
/// [`CuttingPlane::is_degenerate`] before using it.
pub fn g_cut(
    v_query: &BeamformerVec,
    delta_query: &ErrorVec,
    g_val: f64,
    grad: (&[f64], &[f64]),
    eps_tol: f64,
    id: u64,
) -> Result<CuttingPlane> {
    let (gv, gd) = grad;
    if gv.len() != v_query.len() {
        return Err(Error::dim("g gradient (V part)", v_query.len(), gv.len()));
    }
    if gd.len() != delta_query.len() {
        return Err(Error::dim("g gradient (Δ part)", delta_query.len(), gd.len()));
    }
    if !(g_val > eps_tol) {
        return Err(Error::Contract(format!(
            "g cut requested at a point with g = {g_val} <= {eps_tol}"
        )));
    }
    let dot: f64 = gv.iter().zip(v_query.iter()).map(|(a, x)| a * x).sum::<f64>()
        + gd.iter().zip(delta_query.iter()).map(|(b, x)| b * x).sum::<f64>();
    let cp = CuttingPlane {
        id,
        origin: CutOrigin::G,
        a: gv.to_vec(),
        b: gd.to_vec(),
        kappa: g_val - eps_tol - dot,
    };
    if !cp.is_finite() {
        return Err(Error::Numerical {
            context: "g cut coefficients".into(),
            iteration: 0,
        });
    }
    Ok(cp)
}
