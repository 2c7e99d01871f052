//! Measurement tools that sit outside the solvers: the worst-case sum-rate
//! oracle, the perfect-CSI WMMSE baseline, finite differences and the
//! convexity probe.

mod probes;
mod wmmse;
mod worst_case;

pub use probes::{convexity_probe, finite_diff_grad, ConvexityReport, ConvexityViolation};
pub use wmmse::{wmmse_baseline, wmmse_multistart, WmmseReport};
pub use worst_case::{worst_case_wsr, WorstCaseReport, WorstCaseSettings};
