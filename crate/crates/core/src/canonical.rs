//! Validation of Gaussian source/reconstruction pairs and reduction to the
//! canonical diagonal form consumed by every solver.
//!
//! Two commuting symmetric positive-definite matrices share an orthonormal
//! eigenbasis `Θ`, so `Σ = Θ Λ Θᵀ` and `Σ̂ = Θ Λ̂ Θᵀ`. [`canonicalize`] builds
//! such a `Θ` (re-diagonalizing `Σ̂` inside each repeated eigenspace of `Σ`)
//! and orders the joint eigenpairs by the product `λℓλ̂ℓ`, largest first.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Numerical tolerances used by validation and canonicalization.
pub mod tol {
    /// Relative symmetry tolerance, scaled by the largest absolute entry.
    pub const SYM: f64 = 1e-10;
    /// Absolute lower bound on eigenvalues of a positive-definite matrix.
    pub const PD: f64 = 1e-12;
    /// Normalized commutator tolerance.
    pub const COMMUTE: f64 = 1e-9;
    /// Orthonormality tolerance for the recovered basis.
    pub const ORTHO: f64 = 1e-9;
    /// Reconstruction tolerance for `Θ diag(λ) Θᵀ`.
    pub const RECONSTRUCT: f64 = 1e-9;
    /// Relative spacing under which eigenvalues of `Σ` form one eigenspace.
    pub const EIG_CLUSTER: f64 = 1e-8;
}

/// A Gaussian law `N(mean, cov)` with a validated covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianSpec {
    /// Validates and wraps a mean vector and covariance matrix.
    ///
    /// The covariance must be square, symmetric within [`tol::SYM`] relative
    /// to its largest entry, and positive definite (all eigenvalues above
    /// [`tol::PD`]). The stored covariance is the exact symmetrization.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let l = mean.len();
        if l == 0 {
            return Err(Error::EmptyProblem);
        }
        if cov.nrows() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: cov.nrows(),
            });
        }
        if cov.ncols() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: cov.ncols(),
            });
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        if cov.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }

        let scale = cov.amax();
        let asymmetry = (&cov - cov.transpose()).amax();
        if asymmetry > tol::SYM * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let cov = (&cov + cov.transpose()) * 0.5;

        let min_eigenvalue = SymmetricEigen::new(cov.clone()).eigenvalues.min();
        if !(min_eigenvalue > tol::PD) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(Self { mean, cov })
    }

    /// Builds a spec from row-major nested vectors, as found in JSON configs.
    pub fn from_rows(mean: &[f64], rows: &[Vec<f64>]) -> Result<Self> {
        let l = mean.len();
        if rows.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != l) {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: bad.len(),
            });
        }
        let cov = DMatrix::from_fn(l, l, |i, j| rows[i][j]);
        Self::new(DVector::from_column_slice(mean), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// Outcome of [`check_commuting`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommuteCheck {
    pub commute: bool,
    /// `‖ΣΣ̂ − Σ̂Σ‖_F / (‖Σ‖_F ‖Σ̂‖_F)`.
    pub residual: f64,
}

/// Tests whether the two covariances commute within [`tol::COMMUTE`].
pub fn check_commuting(a: &GaussianSpec, b: &GaussianSpec) -> Result<CommuteCheck> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (sa, sb) = (&a.cov, &b.cov);
    let commutator = sa * sb - sb * sa;
    let residual = commutator.norm() / (sa.norm() * sb.norm());
    Ok(CommuteCheck {
        commute: residual <= tol::COMMUTE,
        residual,
    })
}

/// A source/reconstruction pair in joint-eigenbasis coordinates.
///
/// Component `k` of the canonical problem is the direction `basis.column(k)`,
/// along which the source has variance `lambda[k]` and the reconstruction
/// variance `lambda_hat[k]`. Components are sorted by `lambda[k] * lambda_hat[k]`
/// in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalProblem {
    lambda: Vec<f64>,
    lambda_hat: Vec<f64>,
    basis: DMatrix<f64>,
    permutation: Vec<usize>,
    source_mean: DVector<f64>,
    target_mean: DVector<f64>,
    mean_offset_sq: f64,
}

/// A joint eigenpair before the product sort.
struct JointPair {
    lambda: f64,
    lambda_hat: f64,
    vector: DVector<f64>,
    original: usize,
}

/// Product order, ties broken by larger `λ` and then by smaller original index.
fn canonical_order(a: &JointPair, b: &JointPair) -> Ordering {
    let pa = a.lambda * a.lambda_hat;
    let pb = b.lambda * b.lambda_hat;
    pb.partial_cmp(&pa)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.lambda.partial_cmp(&a.lambda).unwrap_or(Ordering::Equal))
        .then_with(|| a.original.cmp(&b.original))
}

impl CanonicalProblem {
    /// Builds a problem from already-diagonal covariances with zero means.
    ///
    /// Inputs need not be product-sorted; the basis becomes the permutation
    /// matrix that maps canonical components back to the given coordinates.
    pub fn from_diagonal(lambda: &[f64], lambda_hat: &[f64]) -> Result<Self> {
        let l = lambda.len();
        if l == 0 {
            return Err(Error::EmptyProblem);
        }
        if lambda_hat.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: lambda_hat.len(),
            });
        }
        if lambda.iter().chain(lambda_hat).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("eigenvalues"));
        }
        let min_eigenvalue = lambda
            .iter()
            .chain(lambda_hat)
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(min_eigenvalue > tol::PD) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        let pairs = (0..l)
            .map(|i| JointPair {
                lambda: lambda[i],
                lambda_hat: lambda_hat[i],
                vector: DVector::from_fn(l, |r, _| if r == i { 1.0 } else { 0.0 }),
                original: i,
            })
            .collect();
        Ok(Self::assemble(pairs, DVector::zeros(l), DVector::zeros(l)))
    }

    fn assemble(
        mut pairs: Vec<JointPair>,
        source_mean: DVector<f64>,
        target_mean: DVector<f64>,
    ) -> Self {
        pairs.sort_by(canonical_order);
        let l = pairs.len();
        let mut basis = DMatrix::zeros(l, l);
        for (k, pair) in pairs.iter().enumerate() {
            basis.set_column(k, &pair.vector);
        }
        let mean_offset_sq = (&source_mean - &target_mean).norm_squared();
        Self {
            lambda: pairs.iter().map(|p| p.lambda).collect(),
            lambda_hat: pairs.iter().map(|p| p.lambda_hat).collect(),
            permutation: pairs.iter().map(|p| p.original).collect(),
            basis,
            source_mean,
            target_mean,
            mean_offset_sq,
        }
    }

    /// Number of components `L`.
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Source eigenvalues `λℓ` in canonical order.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Reconstruction eigenvalues `λ̂ℓ` in canonical order.
    pub fn lambda_hat(&self) -> &[f64] {
        &self.lambda_hat
    }

    /// Orthonormal basis whose columns are the canonical directions.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `permutation[k]` is the original eigen-order index of canonical component `k`.
    ///
    /// The original order lists joint eigenvectors by their dominant
    /// coordinate, so for diagonal inputs it is the input coordinate order.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn source_mean(&self) -> &DVector<f64> {
        &self.source_mean
    }

    pub fn target_mean(&self) -> &DVector<f64> {
        &self.target_mean
    }

    /// `‖μ − μ̂‖²`.
    pub fn mean_offset_sq(&self) -> f64 {
        self.mean_offset_sq
    }

    /// `μ̂ − μ` expressed in canonical coordinates.
    pub fn mean_offset_canonical(&self) -> DVector<f64> {
        self.basis.transpose() * (&self.target_mean - &self.source_mean)
    }

    /// Products `λℓλ̂ℓ`.
    pub fn products(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(&self.lambda_hat)
            .map(|(a, b)| a * b)
            .collect()
    }

    /// Geometric means `√(λℓλ̂ℓ)`, the significance weights of the components.
    pub fn geometric_means(&self) -> Vec<f64> {
        self.products().into_iter().map(f64::sqrt).collect()
    }

    /// `Σℓ (λℓ + λ̂ℓ)`, without the mean term.
    pub fn total_variance(&self) -> f64 {
        self.lambda
            .iter()
            .zip(&self.lambda_hat)
            .map(|(a, b)| a + b)
            .sum()
    }

    /// `basis · diag(lambda) · basisᵀ`.
    pub fn source_cov(&self) -> DMatrix<f64> {
        rebuild(&self.basis, &self.lambda)
    }

    /// `basis · diag(lambda_hat) · basisᵀ`.
    pub fn target_cov(&self) -> DMatrix<f64> {
        rebuild(&self.basis, &self.lambda_hat)
    }
}

fn rebuild(basis: &DMatrix<f64>, diag: &[f64]) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
    basis * d * basis.transpose()
}

/// Eigendecomposition with eigenpairs sorted by eigenvalue, descending.
fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Index of the largest-magnitude entry (first one on ties).
fn dominant_index(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Reduces a commuting pair to its canonical diagonal form.
pub fn canonicalize(a: &GaussianSpec, b: &GaussianSpec) -> Result<CanonicalProblem> {
    let check = check_commuting(a, b)?;
    if !check.commute {
        return Err(Error::NotCommuting {
            residual: check.residual,
        });
    }
    let l = a.dim();
    let (values, vectors) = sorted_eigen(&a.cov);

    // Group eigenvalues of Σ into eigenspaces and diagonalize Σ̂ inside each.
    let mut joint: Vec<DVector<f64>> = Vec::with_capacity(l);
    let mut start = 0;
    while start < l {
        let mut end = start + 1;
        while end < l && values[end - 1] - values[end] <= tol::EIG_CLUSTER * values[end - 1].abs() {
            end += 1;
        }
        let block = vectors.columns(start, end - start).into_owned();
        if end - start == 1 {
            joint.push(block.column(0).into_owned());
        } else {
            let restricted = block.transpose() * &b.cov * &block;
            let restricted = (&restricted + restricted.transpose()) * 0.5;
            let (_, rotation) = sorted_eigen(&restricted);
            let rotated = block * rotation;
            joint.extend(rotated.column_iter().map(|c| c.into_owned()));
        }
        start = end;
    }

    let mut pairs: Vec<JointPair> = joint
        .into_iter()
        .map(|mut v| {
            v /= v.norm();
            let d = dominant_index(&v);
            if v[d] < 0.0 {
                v = -v;
            }
            JointPair {
                lambda: a.cov.dot(&(&v * v.transpose())),
                lambda_hat: b.cov.dot(&(&v * v.transpose())),
                vector: v,
                original: 0,
            }
        })
        .collect();

    pairs.sort_by_key(|p| dominant_index(&p.vector));
    for (i, p) in pairs.iter_mut().enumerate() {
        p.original = i;
    }

    if let Some(min) = pairs
        .iter()
        .map(|p| p.lambda.min(p.lambda_hat))
        .reduce(f64::min)
    {
        if !(min > tol::PD) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
    }

    Ok(CanonicalProblem::assemble(
        pairs,
        a.mean.clone(),
        b.mean.clone(),
    ))
}

/// A source in a JSON problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceJson {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// Problem instance as read from JSON.
///
/// Accepted shapes:
///
/// ```json
/// {"lambda": [2, 3, 1], "lambdaHat": [3, 1, 1]}
/// {"meanA": [0, 0], "covA": [[2, 1], [1, 2]], "meanB": [0, 0], "covB": [[3, 0], [0, 3]]}
/// {"source": {"mean": [0], "cov": [[1]]}, "reconstruction": {"mean": [0], "cov": [[2]]}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemConfig {
    Diagonal {
        lambda: Vec<f64>,
        #[serde(rename = "lambdaHat")]
        lambda_hat: Vec<f64>,
    },
    Split {
        #[serde(rename = "meanA")]
        mean_a: Vec<f64>,
        #[serde(rename = "covA")]
        cov_a: Vec<Vec<f64>>,
        #[serde(rename = "meanB")]
        mean_b: Vec<f64>,
        #[serde(rename = "covB")]
        cov_b: Vec<Vec<f64>>,
    },
    Pair {
        source: SourceJson,
        reconstruction: SourceJson,
    },
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Validates the instance and reduces it to canonical form.
    pub fn to_problem(&self) -> Result<CanonicalProblem> {
        match self {
            ProblemConfig::Diagonal { lambda, lambda_hat } => {
                CanonicalProblem::from_diagonal(lambda, lambda_hat)
            }
            ProblemConfig::Split {
                mean_a,
                cov_a,
                mean_b,
                cov_b,
            } => {
                let a = GaussianSpec::from_rows(mean_a, cov_a)?;
                let b = GaussianSpec::from_rows(mean_b, cov_b)?;
                canonicalize(&a, &b)
            }
            ProblemConfig::Pair {
                source,
                reconstruction,
            } => {
                let a = GaussianSpec::from_rows(&source.mean, &source.cov)?;
                let b = GaussianSpec::from_rows(&reconstruction.mean, &reconstruction.cov)?;
                canonicalize(&a, &b)
            }
        }
    }
}
