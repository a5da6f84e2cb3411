//! Unconstrained Gaussian transport: `W₂²`, the optimal affine map and the
//! two distortion envelopes `D_min` and `D_max`.

use nalgebra::{DMatrix, DVector};

use crate::CanonicalProblem;

/// Squared Wasserstein-2 distance between the two Gaussians.
///
/// `‖μ − μ̂‖² + Σℓ (√λℓ − √λ̂ℓ)²`.
pub fn w2sq(p: &CanonicalProblem) -> f64 {
    let spread: f64 = p
        .lambda()
        .iter()
        .zip(p.lambda_hat())
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    p.mean_offset_sq() + spread
}

/// Distortion of unconstrained optimal transport. Same value as [`w2sq`].
pub fn d_min(p: &CanonicalProblem) -> f64 {
    w2sq(p)
}

/// Distortion of generating the reconstruction independently of the source.
pub fn d_max(p: &CanonicalProblem) -> f64 {
    p.total_variance() + p.mean_offset_sq()
}

/// The optimal plan `Ŝ = Θ diag(scale) Θᵀ (S − μ) + μ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    /// Per-component gains `√(λ̂ℓ/λℓ)` in canonical coordinates.
    pub scale: Vec<f64>,
    pub basis: DMatrix<f64>,
    pub input_shift: DVector<f64>,
    pub output_shift: DVector<f64>,
}

impl AffineMap {
    /// The full linear part `Θ diag(scale) Θᵀ`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.scale));
        &self.basis * d * self.basis.transpose()
    }

    pub fn apply(&self, s: &DVector<f64>) -> DVector<f64> {
        self.matrix() * (s - &self.input_shift) + &self.output_shift
    }
}

pub fn optimal_map(p: &CanonicalProblem) -> AffineMap {
    AffineMap {
        scale: p
            .lambda()
            .iter()
            .zip(p.lambda_hat())
            .map(|(a, b)| (b / a).sqrt())
            .collect(),
        basis: p.basis().clone(),
        input_shift: p.source_mean().clone(),
        output_shift: p.target_mean().clone(),
    }
}
