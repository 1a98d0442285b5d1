//! Independent reference solvers used to check the closed forms.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sinr::PowerVector;

/// Iterates `p <- F p + v` from zero until `‖Δp‖ <= tol ‖p‖`.
///
/// Iterates are nondecreasing for nonnegative `F`, `v`. Divergence is
/// declared when the iterate norm keeps growing geometrically over a
/// 1000-step window.
pub fn lp_fixed_point_oracle(f: &DMatrix<f64>, v: &[f64], tol: f64) -> Result<PowerVector> {
    const MAX_ITER: usize = 10_000_000;
    const WINDOW: usize = 1000;
    let n = v.len();
    if f.nrows() != n || f.ncols() != n {
        return Err(Error::Dimension(format!(
            "{}x{} matrix for {n} unknowns",
            f.nrows(),
            f.ncols()
        )));
    }
    if f.iter().chain(v).any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter("fixed point needs finite nonnegative data".into()));
    }
    let mut p = vec![0.0; n];
    let mut mark = 0.0;
    for it in 1..=MAX_ITER {
        let next: Vec<f64> = (0..n)
            .map(|r| v[r] + (0..n).map(|c| f[(r, c)] * p[c]).sum::<f64>())
            .collect();
        let step = next.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        p = next;
        if !norm.is_finite() {
            break;
        }
        if step <= tol * norm {
            return Ok(PowerVector(p));
        }
        if it % WINDOW == 0 {
            if mark > 0.0 && norm > 2.0 * mark && step > 0.5 * (norm - mark) / WINDOW as f64 {
                return Err(Error::Numerical(format!(
                    "fixed-point iterates diverge (norm {norm:e} after {it} steps)"
                )));
            }
            mark = norm;
        }
    }
    Err(Error::Numerical("fixed-point iterates diverge".into()))
}

/// Per-MU analytic minimum of the macro problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub p: PowerVector,
    /// MUs whose minimum power breaks the cap (power set to the cap).
    pub cap_bound: Vec<bool>,
    /// MUs with `γΔ >= 1`: no finite power reaches the target.
    pub unreachable: Vec<bool>,
}

/// `p_n = ∇_n / (1/γ_n - Δ_n)`, clipped and flagged at `caps[n]`.
pub fn macro_kkt_oracle(delta: &[f64], nabla: &[f64], gamma: &[f64], caps: &[f64]) -> KktSolution {
    let n = delta.len();
    let mut p = vec![0.0; n];
    let mut cap_bound = vec![false; n];
    let mut unreachable = vec![false; n];
    for k in 0..n {
        if gamma[k] * delta[k] >= 1.0 {
            unreachable[k] = true;
            p[k] = caps[k];
            continue;
        }
        let x = nabla[k] / (1.0 / gamma[k] - delta[k]);
        if x > caps[k] {
            cap_bound[k] = true;
            p[k] = caps[k];
        } else {
            p[k] = x;
        }
    }
    KktSolution {
        p: PowerVector(p),
        cap_bound,
        unreachable,
    }
}
