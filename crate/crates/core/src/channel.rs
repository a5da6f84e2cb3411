//! Channel-constrained transport through a unit-variance AWGN channel with
//! input power `P`.
//!
//! Four quantities are provided:
//!
//! - [`d_lower_envelope`]: with common randomness separation is optimal, so
//!   the distortion is the common-randomness rate curve at capacity
//!   `½ log(1 + P)`;
//! - [`d_separation`]: capacity-achieving codes followed by the
//!   no-common-randomness rate allocation;
//! - [`d_uncoded`]: analog transmission of the first canonical component,
//!   the best linear scheme;
//! - [`d_hybrid`]: superposition of the analog first component (power
//!   fraction `1 − δ`) and a digital layer carrying components `2..L`
//!   (fraction `δ`), optimized over `δ`.
//!
//! [`hybrid_threshold`] gives the power `P*` up to which the optimal hybrid
//! scheme is purely analog.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::waterfill::{self, water_level};
use crate::{transport, CanonicalProblem, Error, Result};

/// Stopping width of the golden-section search in `δ`.
pub const DELTA_TOL: f64 = 1e-10;

/// Interior points of the coarse scan that seeds each golden-section search.
const COARSE_POINTS: usize = 32;

fn check_power(power: f64) -> Result<()> {
    if power.is_finite() && power >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativePower(power))
    }
}

/// Capacity of AWGN(1) at input power `power`, in bits per channel use.
pub fn capacity(power: f64) -> f64 {
    0.5 * power.ln_1p() / LN_2
}

/// Minimum distortion with common randomness.
pub fn d_lower_envelope(p: &CanonicalProblem, power: f64) -> Result<f64> {
    check_power(power)?;
    Ok(waterfill::rate_cr(p, capacity(power))?.distortion)
}

/// Minimum distortion of the separation-based scheme without common randomness.
pub fn d_separation(p: &CanonicalProblem, power: f64) -> Result<f64> {
    check_power(power)?;
    Ok(waterfill::rate_no_cr(p, capacity(power))?.distortion)
}

/// `−2√(u/(u+1) · λ₁λ̂₁)`: gain of sending the first component with analog power `u`.
fn analog_gain(top_product: f64, analog_power: f64) -> f64 {
    -2.0 * (analog_power / (analog_power + 1.0) * top_product).sqrt()
}

/// Distortion of the uncoded scheme.
pub fn d_uncoded(p: &CanonicalProblem, power: f64) -> Result<f64> {
    check_power(power)?;
    Ok(analog_gain(p.products()[0], power) + p.total_variance() + p.mean_offset_sq())
}

/// Optimized hybrid analog/digital scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSolution {
    /// Fraction of the power given to the digital layer.
    pub delta_star: f64,
    /// Digital water level `β(δ*)`; `None` when there are no digital components.
    pub beta_at_delta: Option<f64>,
    /// Analog contribution `−2√((1−δ)P/((1−δ)P+1) · λ₁λ̂₁)`.
    pub analog_distortion: f64,
    /// Digital contribution `−2 Σ_{ℓ≥2} (√(λℓλ̂ℓ) − β)₊`.
    pub digital_distortion: f64,
    /// `analog + digital + Σℓ(λℓ + λ̂ℓ) + ‖μ − μ̂‖²`.
    pub total: f64,
    /// Number of active digital components, `#{ℓ ≥ 2 : √(λℓλ̂ℓ) > β(δ*)}`.
    pub kappa: usize,
}

/// The hybrid objective for one problem and power.
struct HybridObjective {
    power: f64,
    top_product: f64,
    digital: Vec<f64>,
    base: f64,
}

impl HybridObjective {
    fn new(p: &CanonicalProblem, power: f64) -> Self {
        let weights = p.geometric_means();
        Self {
            power,
            top_product: p.products()[0],
            digital: weights[1..].to_vec(),
            base: p.total_variance() + p.mean_offset_sq(),
        }
    }

    /// Rate available to the digital layer, `½ log((P+1)/((1−δ)P+1))`.
    fn digital_rate(&self, delta: f64) -> f64 {
        0.5 * (self.power.ln_1p() - ((1.0 - delta) * self.power).ln_1p()).max(0.0) / LN_2
    }

    fn evaluate(&self, delta: f64) -> Result<HybridSolution> {
        let analog = analog_gain(self.top_product, (1.0 - delta) * self.power);
        let (beta, digital, kappa) = if self.digital.is_empty() {
            (None, 0.0, 0)
        } else {
            let (beta, _) = water_level(&self.digital, self.digital_rate(delta))?;
            let digital = -2.0
                * self
                    .digital
                    .iter()
                    .map(|w| (w - beta).max(0.0))
                    .sum::<f64>();
            let kappa = self.digital.iter().filter(|&&w| w > beta).count();
            (Some(beta), digital, kappa)
        };
        Ok(HybridSolution {
            delta_star: delta,
            beta_at_delta: beta,
            analog_distortion: analog,
            digital_distortion: digital,
            total: analog + digital + self.base,
            kappa,
        })
    }

    fn value(&self, delta: f64) -> f64 {
        self.evaluate(delta)
            .map(|s| s.total)
            .unwrap_or(f64::INFINITY)
    }

    /// Values of `δ ∈ (0, 1)` at which another digital component switches on.
    ///
    /// Component `j` of the digital layer activates once
    /// `Π_{i<j} wᵢ/wⱼ = (P+1)/((1−δ)P+1)`.
    fn breakpoints(&self) -> Vec<f64> {
        let mut points = vec![0.0, 1.0];
        if self.power > 0.0 {
            for j in 1..self.digital.len() {
                let log_ratio: f64 = self.digital[..j]
                    .iter()
                    .map(|w| (w / self.digital[j]).ln())
                    .sum();
                let delta = 1.0 - ((self.power.ln_1p() - log_ratio).exp_m1()) / self.power;
                if delta > 0.0 && delta < 1.0 {
                    points.push(delta);
                }
            }
        }
        points.sort_by(|a, b| a.total_cmp(b));
        points.dedup();
        points
    }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Returns `(x, f(x))` for the best point seen.
pub fn golden_section_minimize<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes the hybrid objective over the power split `δ ∈ [0, 1]`.
///
/// The interval is cut at the breakpoints where the number of active digital
/// components changes. Inside each piece a coarse scan brackets the best
/// point and golden-section search refines it to [`DELTA_TOL`]. Ties go to
/// the smaller `δ`, so a purely analog optimum reports `δ* = 0` exactly.
pub fn d_hybrid(p: &CanonicalProblem, power: f64) -> Result<HybridSolution> {
    check_power(power)?;
    let objective = HybridObjective::new(p, power);
    if objective.digital.is_empty() || power == 0.0 {
        return objective.evaluate(0.0);
    }

    let mut best_delta = 0.0;
    let mut best_value = objective.value(0.0);
    let mut consider = |delta: f64, value: f64| {
        if value < best_value || (value == best_value && delta < best_delta) {
            best_delta = delta;
            best_value = value;
        }
    };

    let points = objective.breakpoints();
    for piece in points.windows(2) {
        let (lo, hi) = (piece[0], piece[1]);
        let step = (hi - lo) / (COARSE_POINTS + 1) as f64;
        let grid: Vec<(f64, f64)> = (0..=COARSE_POINTS + 1)
            .map(|i| {
                let d = if i == COARSE_POINTS + 1 {
                    hi
                } else {
                    lo + step * i as f64
                };
                (d, objective.value(d))
            })
            .collect();
        let idx = grid
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        for &(d, v) in &grid {
            consider(d, v);
        }
        let a = grid[idx.saturating_sub(1)].0;
        let b = grid[(idx + 1).min(grid.len() - 1)].0;
        if b > a {
            let (d, v) = golden_section_minimize(|d| objective.value(d), a, b, DELTA_TOL);
            consider(d, v);
        }
    }
    objective.evaluate(best_delta)
}

/// Evaluates the hybrid scheme at a fixed power split.
pub fn hybrid_at(p: &CanonicalProblem, power: f64, delta: f64) -> Result<HybridSolution> {
    check_power(power)?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidRange(format!(
            "power split {delta} outside [0, 1]"
        )));
    }
    HybridObjective::new(p, power).evaluate(delta)
}

/// Power below which the optimal hybrid scheme is purely analog:
/// `P* = (√(1 + λ₁λ̂₁/(λ₂λ̂₂)) − 1) / 2`.
pub fn hybrid_threshold(p: &CanonicalProblem) -> Result<f64> {
    if p.dim() < 2 {
        return Err(Error::RequiresAtLeastTwoComponents(p.dim()));
    }
    let q = p.products();
    let ratio = q[0] / q[1];
    // (√(1+r) − 1)/2 written as r / (2(√(1+r) + 1)) to avoid cancellation.
    Ok(ratio / (2.0 * ((1.0 + ratio).sqrt() + 1.0)))
}

/// Upper bound on the slope of the analog-plus-digital gain at `δ = 0`:
/// `−½√(P/(P+1)³ · λ₁λ̂₁) + P/(P+1) · √(λ₂λ̂₂)`.
///
/// Negative below [`hybrid_threshold`], zero at it, positive above.
pub fn hybrid_slope_at_zero(p: &CanonicalProblem, power: f64) -> Result<f64> {
    check_power(power)?;
    if p.dim() < 2 {
        return Err(Error::RequiresAtLeastTwoComponents(p.dim()));
    }
    let q = p.products();
    let s = power + 1.0;
    Ok(-0.5 * (power / (s * s * s) * q[0]).sqrt() + power / s * q[1].sqrt())
}

/// The distortion at zero power, shared by every channel scheme.
pub fn zero_power_distortion(p: &CanonicalProblem) -> f64 {
    transport::d_max(p)
}
