//! Quadratic Wasserstein distance between Gaussians, the optimal linear
//! transport map, and the distance metrics built on them.
//!
//! For `P₁ = N(μ₁, V₁)` and `P₂ = N(μ₂, V₂)`:
//!
//! ```text
//! WD₂² = ||μ₂ − μ₁||² + Tr(V₁ + V₂ − 2 (V₁^{1/2} V₂ V₁^{1/2})^{1/2})
//! ```
//!
//! With the point mass `N(0, 0)` as source the trace term reduces to `Tr(V₂)`,
//! giving the total distance `TD = sqrt(||α̃||² + Σ σ̃ᵢ²)`.

use nalgebra::{DMatrix, DVector};

use crate::bayes::GaussianDist;
use crate::error::{Error, Result};
use crate::linalg::{spd_inv_sqrt, spd_sqrt, SymMatrix};

fn check_dims(p1: &GaussianDist, p2: &GaussianDist) -> Result<()> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimMismatch {
            expected: p1.dim(),
            got: p2.dim(),
        });
    }
    Ok(())
}

/// Squared Bures term `Tr(V₁ + V₂ − 2 (V₁^{1/2} V₂ V₁^{1/2})^{1/2})`, clamped at zero.
pub fn covariance_distance_sq(v1: &SymMatrix, v2: &SymMatrix) -> Result<f64> {
    if v1 == v2 {
        return Ok(0.0);
    }
    let cross = if v1.is_zero() || v2.is_zero() {
        0.0
    } else {
        let r1 = spd_sqrt(v1)?;
        let inner = SymMatrix::symmetrize(r1.as_matrix() * v2.as_matrix() * r1.as_matrix());
        spd_sqrt(&inner)?.trace()
    };
    Ok((v1.trace() + v2.trace() - 2.0 * cross).max(0.0))
}

/// Quadratic Wasserstein distance between two Gaussians.
pub fn wd2_gaussian(p1: &GaussianDist, p2: &GaussianDist) -> Result<f64> {
    check_dims(p1, p2)?;
    let mean_sq = (&p2.mean - &p1.mean).norm_squared();
    Ok((mean_sq + covariance_distance_sq(&p1.cov, &p2.cov)?).sqrt())
}

/// Optimal map `T = V₁^{-1/2} (V₁^{1/2} V₂ V₁^{1/2})^{1/2} V₁^{-1/2}` pushing
/// the centred `N(0, V₁)` onto `N(0, V₂)`.
pub fn transport_map(p1: &GaussianDist, p2: &GaussianDist) -> Result<DMatrix<f64>> {
    check_dims(p1, p2)?;
    let inv_root = spd_inv_sqrt(&p1.cov).map_err(|_| Error::SingularSource)?;
    let root = spd_sqrt(&p1.cov)?;
    let inner = SymMatrix::symmetrize(root.as_matrix() * p2.cov.as_matrix() * root.as_matrix());
    let mid = spd_sqrt(&inner)?;
    Ok(inv_root.as_matrix() * mid.as_matrix() * inv_root.as_matrix())
}

/// Distance from the dogmatic point mass to a target posterior, with its
/// per-asset decomposition. Units are percent per month.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBreakdown {
    pub td: f64,
    pub ad: f64,
    pub rmse_alpha: f64,
    pub rmse_sigma: f64,
    /// Per-asset `dᵢ = sqrt(α̃ᵢ² + σ̃ᵢ²)`.
    pub marginal: DVector<f64>,
    /// `Σ σ̃ᵢ² / Σ α̃ᵢ²`; `+∞` when all alphas are zero but variances are not.
    pub ratio_var: f64,
}

pub fn distance_breakdown(posterior: &GaussianDist) -> DistanceBreakdown {
    let n = posterior.dim() as f64;
    let alpha_sq = posterior.mean.map(|a| a * a);
    let var = posterior.cov.diagonal().map(|v| v.max(0.0));
    let sum_a = alpha_sq.sum();
    let sum_v = var.sum();
    let td = (sum_a + sum_v).sqrt();
    let ratio_var = if sum_a > 0.0 {
        sum_v / sum_a
    } else if sum_v > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    DistanceBreakdown {
        td,
        ad: td / n.sqrt(),
        rmse_alpha: (sum_a / n).sqrt(),
        rmse_sigma: (sum_v / n).sqrt(),
        marginal: (alpha_sq + var).map(f64::sqrt),
        ratio_var,
    }
}

/// `(TD, AD)` between two posteriors of the same model.
pub fn wd2_between_posteriors(pa: &GaussianDist, pb: &GaussianDist, n: usize) -> Result<(f64, f64)> {
    if pa.dim() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: pa.dim(),
        });
    }
    let td = wd2_gaussian(pa, pb)?;
    Ok((td, td / (n as f64).sqrt()))
}
