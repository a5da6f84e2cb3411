//! Monte Carlo checks of the achieving schemes.
//!
//! Every simulator draws `n` i.i.d. source vectors in canonical coordinates,
//! builds the reconstruction symbol by symbol, and compares the empirical mean
//! squared error and reconstruction covariance against the closed forms.
//!
//! Samples are generated in fixed-size chunks. Chunk `c` uses a ChaCha8
//! stream seeded with the master seed and stream id `c`, and chunk statistics
//! are combined in chunk order, so results are bit-identical whether the
//! chunks run serially or on a thread pool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::waterfill::{retained_fraction, RateAllocation};
use crate::{channel, dimension, CanonicalProblem, Error, Result};

pub const MIN_SAMPLES: usize = 1000;
/// Allowed distance between empirical and closed-form distortion, in standard errors.
pub const CI_MULTIPLIER: f64 = 3.0;
/// Allowed deviation of reconstruction covariance entries, in sampling standard deviations.
pub const MARGINAL_SIGMAS: f64 = 5.0;
const CHUNK: usize = 1 << 15;

/// Correlation of an achieving pair carrying `rate` bits: `√(1 − 2^(−2R))`.
pub fn rate_to_correlation(rate: f64) -> f64 {
    retained_fraction(rate).sqrt()
}

/// Mutual information of a bivariate Gaussian with correlation `rho`, in bits.
pub fn correlation_to_rate(rho: f64) -> f64 {
    -0.5 * (-rho * rho).ln_1p() / std::f64::consts::LN_2
}

/// Independent per-component bivariate Gaussian couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub rho: Vec<f64>,
    pub source_var: Vec<f64>,
    pub recon_var: Vec<f64>,
}

impl CouplingSpec {
    pub fn new(rho: Vec<f64>, source_var: Vec<f64>, recon_var: Vec<f64>) -> Result<Self> {
        let l = rho.len();
        if l == 0 {
            return Err(Error::EmptyProblem);
        }
        for len in [source_var.len(), recon_var.len()] {
            if len != l {
                return Err(Error::DimensionMismatch {
                    expected: l,
                    found: len,
                });
            }
        }
        if let Some(&r) = rho.iter().find(|r| !(r.abs() <= 1.0)) {
            return Err(Error::InvalidCorrelation(r));
        }
        if let Some(&v) = source_var
            .iter()
            .chain(&recon_var)
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: v });
        }
        Ok(Self {
            rho,
            source_var,
            recon_var,
        })
    }

    /// The coupling that realizes a common-randomness allocation.
    pub fn from_allocation(p: &CanonicalProblem, alloc: &RateAllocation) -> Result<Self> {
        Self::new(
            alloc
                .rates
                .iter()
                .map(|&r| rate_to_correlation(r))
                .collect(),
            p.lambda().to_vec(),
            p.lambda_hat().to_vec(),
        )
    }

    /// `Σℓ (λℓ + λ̂ℓ − 2ρℓ√(λℓλ̂ℓ))`.
    pub fn distortion(&self) -> f64 {
        self.rho
            .iter()
            .zip(self.source_var.iter().zip(&self.recon_var))
            .map(|(r, (a, b))| a + b - 2.0 * r * (a * b).sqrt())
            .sum()
    }
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub samples: usize,
    pub empirical_distortion: f64,
    pub theoretical_distortion: f64,
    /// Standard error of the empirical distortion.
    pub stderr: f64,
    /// Sample covariance of the reconstruction, canonical coordinates.
    pub empirical_recon_cov: Vec<Vec<f64>>,
    pub target_recon_var: Vec<f64>,
    /// Largest entrywise deviation of `empirical_recon_cov` from `diag(target_recon_var)`.
    pub max_marginal_deviation: f64,
    pub seed: u64,
    pub distortion_pass: bool,
    pub marginal_pass: bool,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.distortion_pass && self.marginal_pass
    }

    /// Distance between empirical and closed-form distortion in standard errors.
    pub fn z_score(&self) -> f64 {
        let gap = (self.empirical_distortion - self.theoretical_distortion).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.stderr
        }
    }
}

#[derive(Clone)]
struct ChunkStats {
    count: usize,
    sum: f64,
    sum_sq: f64,
    recon_sum: Vec<f64>,
    recon_outer: Vec<f64>,
}

impl ChunkStats {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
            recon_sum: vec![0.0; dim],
            recon_outer: vec![0.0; dim * dim],
        }
    }

    fn merge(&mut self, other: &ChunkStats) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.recon_sum
            .iter_mut()
            .zip(&other.recon_sum)
            .for_each(|(a, b)| *a += b);
        self.recon_outer
            .iter_mut()
            .zip(&other.recon_outer)
            .for_each(|(a, b)| *a += b);
    }
}

/// Runs `n` draws of `sample`, which fills one `(source, reconstruction)` pair.
fn run<F>(n: usize, seed: u64, theoretical: f64, recon_var: &[f64], sample: F) -> Result<SimReport>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64], &mut [f64]) + Sync,
{
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            min: MIN_SAMPLES,
            got: n,
        });
    }
    let dim = recon_var.len();
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<ChunkStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut stats = ChunkStats::new(dim);
            let mut s = vec![0.0; dim];
            let mut s_hat = vec![0.0; dim];
            for _ in 0..count {
                sample(&mut rng, &mut s, &mut s_hat);
                let d: f64 = s.iter().zip(&s_hat).map(|(a, b)| (a - b) * (a - b)).sum();
                stats.sum += d;
                stats.sum_sq += d * d;
                for i in 0..dim {
                    stats.recon_sum[i] += s_hat[i];
                    for j in 0..dim {
                        stats.recon_outer[i * dim + j] += s_hat[i] * s_hat[j];
                    }
                }
            }
            stats.count = count;
            stats
        })
        .collect();

    let mut total = ChunkStats::new(dim);
    for part in &partials {
        total.merge(part);
    }

    let nf = n as f64;
    let mean = total.sum / nf;
    let var = ((total.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let stderr = (var / nf).sqrt();

    let centre: Vec<f64> = total.recon_sum.iter().map(|s| s / nf).collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    let mut max_dev = 0.0_f64;
    let mut marginal_pass = true;
    for i in 0..dim {
        for j in 0..dim {
            let c = (total.recon_outer[i * dim + j] - nf * centre[i] * centre[j]) / (nf - 1.0);
            cov[i][j] = c;
            let (target, sd) = if i == j {
                (recon_var[i], recon_var[i] * (2.0 / nf).sqrt())
            } else {
                (0.0, (recon_var[i] * recon_var[j] / nf).sqrt())
            };
            let dev = (c - target).abs();
            max_dev = max_dev.max(dev);
            if dev > MARGINAL_SIGMAS * sd {
                marginal_pass = false;
            }
        }
    }

    Ok(SimReport {
        samples: n,
        empirical_distortion: mean,
        theoretical_distortion: theoretical,
        stderr,
        empirical_recon_cov: cov,
        target_recon_var: recon_var.to_vec(),
        max_marginal_deviation: max_dev,
        seed,
        distortion_pass: (mean - theoretical).abs() <= CI_MULTIPLIER * stderr,
        marginal_pass,
    })
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Samples `Ŝℓ = ρℓ√(λ̂ℓ/λℓ) Sℓ + √(λ̂ℓ(1−ρℓ²)) Zℓ` independently per component.
pub fn simulate_coupling(spec: &CouplingSpec, n: usize, seed: u64) -> Result<SimReport> {
    let src_sd: Vec<f64> = spec.source_var.iter().map(|v| v.sqrt()).collect();
    let gain: Vec<f64> = spec
        .rho
        .iter()
        .zip(spec.source_var.iter().zip(&spec.recon_var))
        .map(|(r, (a, b))| r * (b / a).sqrt())
        .collect();
    let noise: Vec<f64> = spec
        .rho
        .iter()
        .zip(&spec.recon_var)
        .map(|(r, b)| (b * (1.0 - r * r)).sqrt())
        .collect();

    run(
        n,
        seed,
        spec.distortion(),
        &spec.recon_var,
        |rng, s, s_hat| {
            for l in 0..s.len() {
                s[l] = src_sd[l] * normal(rng);
                s_hat[l] = gain[l] * s[l] + noise[l] * normal(rng);
            }
        },
    )
}

/// Simulates the uncoded scheme over AWGN(1) at input power `power`.
///
/// The encoder sends `X = √(P/λ₁) S₁`, the decoder outputs
/// `Ŝ₁ = √(λ̂₁/(P+1)) (X + N)` and draws `Ŝℓ ~ N(0, λ̂ℓ)` for `ℓ ≥ 2`.
pub fn simulate_uncoded(
    p: &CanonicalProblem,
    power: f64,
    n: usize,
    seed: u64,
) -> Result<SimReport> {
    let theoretical = channel::d_uncoded(p, power)?;
    let src_sd: Vec<f64> = p.lambda().iter().map(|v| v.sqrt()).collect();
    let rec_sd: Vec<f64> = p.lambda_hat().iter().map(|v| v.sqrt()).collect();
    let offset = p.mean_offset_canonical();
    let tx_gain = (power / p.lambda()[0]).sqrt();
    let rx_gain = (p.lambda_hat()[0] / (power + 1.0)).sqrt();

    run(n, seed, theoretical, p.lambda_hat(), |rng, s, s_hat| {
        for l in 0..s.len() {
            s[l] = src_sd[l] * normal(rng);
        }
        let y = tx_gain * s[0] + normal(rng);
        s_hat[0] = rx_gain * y + offset[0];
        for l in 1..s.len() {
            s_hat[l] = rec_sd[l] * normal(rng) + offset[l];
        }
    })
}

/// Simulates the select-scale-generate plan with dimension budget `k`.
pub fn simulate_dim_plan(p: &CanonicalProblem, k: usize, n: usize, seed: u64) -> Result<SimReport> {
    let plan = dimension::one_shot_plan(p, k);
    let src_sd: Vec<f64> = p.lambda().iter().map(|v| v.sqrt()).collect();
    let rec_sd: Vec<f64> = p.lambda_hat().iter().map(|v| v.sqrt()).collect();
    let offset = p.mean_offset_canonical();

    run(n, seed, plan.distortion, p.lambda_hat(), |rng, s, s_hat| {
        for l in 0..s.len() {
            s[l] = src_sd[l] * normal(rng);
        }
        for l in 0..s.len() {
            let base = if l < plan.keep {
                plan.gains[l] * s[l]
            } else {
                rec_sd[l] * normal(rng)
            };
            s_hat[l] = base + offset[l];
        }
    })
}
