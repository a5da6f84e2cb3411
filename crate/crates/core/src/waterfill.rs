//! Rate allocation for rate-constrained transport.
//!
//! Three allocation rules live here, all solved by bisection on a scalar
//! multiplier:
//!
//! - [`rate_cr`]: with unlimited common randomness, rates
//!   `½ log((1 + √(1 + α λℓλ̂ℓ)) / 2)` for the unique `α ≥ 0` meeting the budget;
//! - [`rate_no_cr`]: without common randomness, reverse waterfilling on the
//!   weights `√(λℓλ̂ℓ)` with water level `β`;
//! - [`rate_greedy`]: independent classical reverse waterfilling on `λ` and on
//!   `λ̂` ([`classical_reverse_waterfill`]), an upper bound on the no-common-
//!   randomness distortion.
//!
//! Rates are in bits per symbol.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::{transport, CanonicalProblem, Error, Result};

/// Residual tolerance on the rate-sum equation.
pub const ROOT_TOL: f64 = 1e-12;
/// Relative bracket width at which bisection stops.
pub const WIDTH_TOL: f64 = 4.0 * f64::EPSILON;
/// Tolerance on `Σ rates = total_rate` for a returned allocation.
pub const RATE_TOL: f64 = 1e-9;

const MAX_BISECTIONS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Unlimited common randomness.
    #[serde(rename = "CR")]
    CommonRandomness,
    /// No common randomness.
    #[serde(rename = "NoCR")]
    NoCommonRandomness,
    /// Separate reverse waterfilling on source and reconstruction.
    Greedy,
    /// Classical reverse waterfilling on a single spectrum.
    Classical,
}

/// Per-component rates together with the multiplier that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub scheme: Scheme,
    pub rates: Vec<f64>,
    /// `α` for [`Scheme::CommonRandomness`], the water level otherwise
    /// (`β` for no common randomness, `ϱ` for classical and greedy).
    pub multiplier: f64,
    pub total_rate: f64,
    pub distortion: f64,
    /// Reconstruction-side rates `R̂′ℓ` of the greedy scheme.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paired_rates: Option<Vec<f64>>,
    /// Reconstruction-side water level `ϱ̂` of the greedy scheme.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paired_multiplier: Option<f64>,
}

/// Finds `x` in `[lo, hi]` with `f(x) ≈ target` for monotone `f`.
///
/// Works for increasing and decreasing `f`. Stops once the residual drops to
/// [`ROOT_TOL`] or the bracket has shrunk to [`WIDTH_TOL`] relative width,
/// returning the endpoint with the smaller residual in the latter case.
pub fn solve_monotone_root<F>(f: F, target: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut r_lo = f(lo) - target;
    let mut r_hi = f(hi) - target;
    if !(r_lo.is_finite() && r_hi.is_finite()) {
        return Err(Error::BracketDoesNotStraddle { lo, hi, target });
    }
    if r_lo.abs() <= ROOT_TOL {
        return Ok(lo);
    }
    if r_hi.abs() <= ROOT_TOL {
        return Ok(hi);
    }
    if r_lo.signum() == r_hi.signum() {
        return Err(Error::BracketDoesNotStraddle { lo, hi, target });
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let r_mid = f(mid) - target;
        if r_mid.abs() <= ROOT_TOL {
            return Ok(mid);
        }
        if r_mid.signum() == r_lo.signum() {
            lo = mid;
            r_lo = r_mid;
        } else {
            hi = mid;
            r_hi = r_mid;
        }
        if hi - lo <= WIDTH_TOL * lo.abs().max(hi.abs()) {
            break;
        }
    }
    Ok(if r_lo.abs() <= r_hi.abs() { lo } else { hi })
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeRate(rate))
    }
}

/// `1 − 2^(−2r)`, accurate for small `r`.
pub(crate) fn retained_fraction(rate: f64) -> f64 {
    -(-2.0 * rate * LN_2).exp_m1()
}

/// `½ log((1 + √(1 + x)) / 2)` without cancellation for small `x`.
fn cr_component_rate(x: f64) -> f64 {
    let shift = x / (2.0 * (1.0 + (1.0 + x).sqrt()));
    0.5 * shift.ln_1p() / LN_2
}

/// Distortion of independent per-component couplings with common randomness.
pub fn cr_distortion(p: &CanonicalProblem, rates: &[f64]) -> f64 {
    let body: f64 = p
        .lambda()
        .iter()
        .zip(p.lambda_hat())
        .zip(rates)
        .map(|((a, b), &r)| a + b - 2.0 * (retained_fraction(r) * a * b).sqrt())
        .sum();
    body + p.mean_offset_sq()
}

/// Distortion of the quantize/transport/dequantize chain without common randomness.
pub fn ncr_distortion(p: &CanonicalProblem, rates: &[f64]) -> f64 {
    let body: f64 = p
        .lambda()
        .iter()
        .zip(p.lambda_hat())
        .zip(rates)
        .map(|((a, b), &r)| a + b - 2.0 * retained_fraction(r) * (a * b).sqrt())
        .sum();
    body + p.mean_offset_sq()
}

/// Distortion when source and reconstruction are quantized at different rates.
pub fn greedy_distortion(p: &CanonicalProblem, rates: &[f64], paired_rates: &[f64]) -> f64 {
    let body: f64 = p
        .lambda()
        .iter()
        .zip(p.lambda_hat())
        .zip(rates.iter().zip(paired_rates))
        .map(|((a, b), (&r, &rh))| {
            a + b - 2.0 * (retained_fraction(r) * retained_fraction(rh) * a * b).sqrt()
        })
        .sum();
    body + p.mean_offset_sq()
}

/// Marginal distortion decrease per bit, `(2 ln 2) 2^(−2Rℓ) √(λℓλ̂ℓ) / √(1 − 2^(−2Rℓ))`.
///
/// At an interior optimum of the common-randomness allocation these are
/// equal across components.
pub fn cr_marginal_gains(p: &CanonicalProblem, rates: &[f64]) -> Vec<f64> {
    p.geometric_means()
        .iter()
        .zip(rates)
        .map(|(g, &r)| {
            let kept = retained_fraction(r);
            2.0 * LN_2 * (1.0 - kept) * g / kept.sqrt()
        })
        .collect()
}

/// Common-randomness allocation for a total budget of `rate` bits.
pub fn rate_cr(p: &CanonicalProblem, rate: f64) -> Result<RateAllocation> {
    check_rate(rate)?;
    let products = p.products();
    let rate_sum = |alpha: f64| {
        products
            .iter()
            .map(|&q| cr_component_rate(alpha * q))
            .sum::<f64>()
    };

    let alpha = if rate == 0.0 {
        0.0
    } else {
        let mut hi = 1.0_f64;
        while rate_sum(hi) < rate {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::BracketDoesNotStraddle {
                    lo: 0.0,
                    hi,
                    target: rate,
                });
            }
        }
        solve_monotone_root(rate_sum, rate, 0.0, hi)?
    };

    let rates: Vec<f64> = products
        .iter()
        .map(|&q| cr_component_rate(alpha * q))
        .collect();
    let distortion = if rate == 0.0 {
        transport::d_max(p)
    } else {
        cr_distortion(p, &rates)
    };
    Ok(RateAllocation {
        scheme: Scheme::CommonRandomness,
        rates,
        multiplier: alpha,
        total_rate: rate,
        distortion,
        paired_rates: None,
        paired_multiplier: None,
    })
}

/// Reverse waterfilling: returns the level `θ ∈ (0, max w]` solving
/// `½ Σℓ log⁺(wℓ / θ) = rate`, together with the per-component rates.
///
/// The search runs on `log₂ θ` over `[log₂ max w − 2·rate − 4, log₂ max w]`,
/// where the rate sum is piecewise linear.
pub fn water_level(weights: &[f64], rate: f64) -> Result<(f64, Vec<f64>)> {
    check_rate(rate)?;
    if weights.is_empty() {
        return Err(Error::EmptyProblem);
    }
    if let Some(&bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: bad,
        });
    }
    let logs: Vec<f64> = weights.iter().map(|w| w.log2()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rate_sum = |x: f64| 0.5 * logs.iter().map(|&lw| (lw - x).max(0.0)).sum::<f64>();

    let mut x = if rate == 0.0 {
        top
    } else {
        solve_monotone_root(rate_sum, rate, top - 2.0 * rate - 4.0, top)?
    };
    if rate > 0.0 {
        // Closed form on the active set found by bisection.
        let (active, idle): (Vec<f64>, Vec<f64>) = logs.iter().partition(|&&lw| lw > x);
        let exact = (active.iter().sum::<f64>() - 2.0 * rate) / active.len() as f64;
        let idle_top = idle.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if active.iter().all(|&lw| lw > exact) && idle_top <= exact {
            x = exact;
        }
    }
    let rates = logs.iter().map(|&lw| 0.5 * (lw - x).max(0.0)).collect();
    Ok((x.exp2(), rates))
}

/// Allocation without common randomness.
pub fn rate_no_cr(p: &CanonicalProblem, rate: f64) -> Result<RateAllocation> {
    check_rate(rate)?;
    let (beta, rates) = water_level(&p.geometric_means(), rate)?;
    let distortion = if rate == 0.0 {
        transport::d_max(p)
    } else {
        ncr_distortion(p, &rates)
    };
    Ok(RateAllocation {
        scheme: Scheme::NoCommonRandomness,
        rates,
        multiplier: beta,
        total_rate: rate,
        distortion,
        paired_rates: None,
        paired_multiplier: None,
    })
}

/// Classical reverse waterfilling on a single spectrum.
///
/// Component `ℓ` is described at rate `½ log⁺(eigsℓ / ϱ)` with distortion
/// `2^(−2Rℓ) eigsℓ`; the reported distortion is their sum.
pub fn classical_reverse_waterfill(eigs: &[f64], rate: f64) -> Result<RateAllocation> {
    let (level, rates) = water_level(eigs, rate)?;
    let distortion = classical_component_distortions(eigs, &rates).iter().sum();
    Ok(RateAllocation {
        scheme: Scheme::Classical,
        rates,
        multiplier: level,
        total_rate: rate,
        distortion,
        paired_rates: None,
        paired_multiplier: None,
    })
}

/// Per-component distortions `2^(−2Rℓ) eigsℓ` of a classical allocation.
pub fn classical_component_distortions(eigs: &[f64], rates: &[f64]) -> Vec<f64> {
    eigs.iter()
        .zip(rates)
        .map(|(e, r)| (1.0 - retained_fraction(*r)) * e)
        .collect()
}

/// Greedy allocation: classical waterfilling applied separately to `λ` and `λ̂`.
pub fn rate_greedy(p: &CanonicalProblem, rate: f64) -> Result<RateAllocation> {
    let source = classical_reverse_waterfill(p.lambda(), rate)?;
    let target = classical_reverse_waterfill(p.lambda_hat(), rate)?;
    let distortion = greedy_distortion(p, &source.rates, &target.rates);
    Ok(RateAllocation {
        scheme: Scheme::Greedy,
        rates: source.rates,
        multiplier: source.multiplier,
        total_rate: rate,
        distortion,
        paired_rates: Some(target.rates),
        paired_multiplier: Some(target.multiplier),
    })
}
