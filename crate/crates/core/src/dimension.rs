//! Dimension-constrained transport: generative PCA.
//!
//! With a linear encoder of output dimension `K`, the best plan keeps the
//! first `K ∧ L` canonical components, rescales each by `√(λ̂ℓ/λℓ)`, and
//! synthesizes the remaining reconstruction components independently from
//! `N(0, λ̂ℓ)`. Fractional budgets `Γ` (time sharing over long blocks)
//! interpolate linearly between the integer plans.

use serde::{Deserialize, Serialize};

use crate::{CanonicalProblem, Error, Result};

/// Select-scale-generate plan for a dimension budget `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimReductionPlan {
    /// Number of retained components, `min(K, L)`.
    pub keep: usize,
    /// Gains `√(λ̂ℓ/λℓ)` applied to the retained components.
    pub gains: Vec<f64>,
    /// Variances `λ̂ℓ` of the components generated from scratch.
    pub generated_variances: Vec<f64>,
    pub distortion: f64,
}

fn matched_cost(p: &CanonicalProblem, l: usize) -> f64 {
    (p.lambda()[l].sqrt() - p.lambda_hat()[l].sqrt()).powi(2)
}

fn independent_cost(p: &CanonicalProblem, l: usize) -> f64 {
    p.lambda()[l] + p.lambda_hat()[l]
}

/// The optimal plan under an integer dimension budget.
pub fn one_shot_plan(p: &CanonicalProblem, k: usize) -> DimReductionPlan {
    let l = p.dim();
    let keep = k.min(l);
    let distortion = (0..keep).map(|i| matched_cost(p, i)).sum::<f64>()
        + (keep..l).map(|i| independent_cost(p, i)).sum::<f64>()
        + p.mean_offset_sq();
    DimReductionPlan {
        keep,
        gains: (0..keep)
            .map(|i| (p.lambda_hat()[i] / p.lambda()[i]).sqrt())
            .collect(),
        generated_variances: p.lambda_hat()[keep..].to_vec(),
        distortion,
    }
}

/// Asymptotic distortion `D_d(Γ)` under a normalized dimension budget `Γ`.
///
/// Piecewise linear between integer knots, constant for `Γ ≥ L`.
pub fn dim_curve(p: &CanonicalProblem, gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::NegativeDimension(gamma));
    }
    let l = p.dim();
    if gamma >= l as f64 {
        return Ok(one_shot_plan(p, l).distortion);
    }
    let floor = gamma.floor();
    let whole = floor as usize;
    if gamma == floor {
        return Ok(one_shot_plan(p, whole).distortion);
    }
    // Component `whole` (0-based) is the partially retained one.
    let frac = gamma - floor;
    let ceil_gap = (floor + 1.0) - gamma;
    let head: f64 = (0..whole).map(|i| matched_cost(p, i)).sum();
    let tail: f64 = (whole + 1..l).map(|i| independent_cost(p, i)).sum();
    Ok(head
        + frac * matched_cost(p, whole)
        + ceil_gap * independent_cost(p, whole)
        + tail
        + p.mean_offset_sq())
}
