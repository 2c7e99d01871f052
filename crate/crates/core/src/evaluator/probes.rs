use crate::error::{Error, Result};

/// Central differences `(F(x + h e_i) - F(x - h e_i)) / 2h` for every
/// coordinate.
pub fn finite_diff_grad<F>(field: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("finite-difference step {h} must be > 0")));
    }
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let x0 = x[i];
        x[i] = x0 + h;
        let fp = field(&x);
        x[i] = x0 - h;
        let fm = field(&x);
        x[i] = x0;
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::Numerical {
                context: format!("finite difference along coordinate {i}"),
                iteration: 0,
            });
        }
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityViolation {
    pub pair: usize,
    pub t: f64,
    /// `g(t x + (1-t) y) - t g(x) - (1-t) g(y)`.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexityReport {
    pub checks: usize,
    pub violations: usize,
    /// Largest excess over all checks, violating or not.
    pub worst: Option<ConvexityViolation>,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `g(t x + (1-t) y) <= t g(x) + (1-t) g(y) + tol` for every pair and
/// interpolation weight.
pub fn convexity_probe<G>(g: G, pairs: &[(Vec<f64>, Vec<f64>)], ts: &[f64], tol: f64) -> Result<ConvexityReport>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    let mut rep = ConvexityReport::default();
    for (p, (x, y)) in pairs.iter().enumerate() {
        if x.len() != y.len() {
            return Err(Error::dim("convexity probe pair", x.len(), y.len()));
        }
        let gx = g(x)?;
        let gy = g(y)?;
        for &t in ts {
            let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let excess = g(&z)? - t * gx - (1.0 - t) * gy;
            rep.checks += 1;
            if excess > tol {
                rep.violations += 1;
            }
            if rep.worst.as_ref().is_none_or(|w| excess > w.excess) {
                rep.worst = Some(ConvexityViolation { pair: p, t, excess });
            }
        }
    }
    Ok(rep)
}
