//! Multivariate time-series OLS of excess portfolio returns on factors and
//! the finite-sample GRS test.

use nalgebra::{DMatrix, DVector};

use crate::dataio::{CrossSection, Dataset, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::{f_cdf_upper, Cholesky, SymMatrix, CHOL_PIVOT_TOL};

/// Pivot threshold for rank detection in `XᵀX`.
const RANK_TOL: f64 = 1e-10;

/// OLS estimates for one model on one cross section. All return quantities
/// are in percent per month; covariances use the divisor `T`.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub model: ModelSpec,
    pub cross_section: CrossSection,
    pub t: usize,
    pub n: usize,
    pub k: usize,
    pub alpha_hat: DVector<f64>,
    /// `n x k` factor loadings.
    pub beta_hat: DMatrix<f64>,
    /// Residual covariance `S / T`.
    pub sigma_mle: SymMatrix,
    pub factor_mean: DVector<f64>,
    pub factor_cov_mle: SymMatrix,
    /// Sampling covariance of `alpha_hat`, `(1 + F̄ᵀΩ̂⁻¹F̄) Σ̂ / T`.
    pub valpha_hat: SymMatrix,
    pub r2: DVector<f64>,
    pub asset_mean: DVector<f64>,
    /// `XᵀX` for `X = [1 F]`.
    pub xtx: SymMatrix,
    /// `XᵀR`, `(k+1) x n`.
    pub xtr: DMatrix<f64>,
    /// Residual cross-product matrix `S = ÛᵀÛ`.
    pub resid_ssp: SymMatrix,
}

impl RegressionFit {
    /// `(k+1) x n` coefficient matrix with alphas in the first row.
    pub fn b_hat(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.k + 1, self.n);
        b.row_mut(0).copy_from(&self.alpha_hat.transpose());
        b.rows_mut(1, self.k).copy_from(&self.beta_hat.transpose());
        b
    }

    /// Frequentist t-statistics `α̂ᵢ / sqrt(V̂_α,ii)`.
    pub fn alpha_t_stats(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            self.alpha_hat[i] / self.valpha_hat[(i, i)].sqrt()
        })
    }
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let t = m.nrows() as f64;
    DVector::from_fn(m.ncols(), |j, _| m.column(j).sum() / t)
}

/// Fits `R = 1αᵀ + Fβᵀ + U` by least squares.
pub fn fit_ols(dataset: &Dataset, model: &ModelSpec) -> Result<RegressionFit> {
    let factors = dataset
        .factors
        .select_columns(&model.factor_names)
        .ok_or_else(|| {
            let missing = model
                .factor_names
                .iter()
                .find(|f| dataset.factors.column_index(f).is_none())
                .cloned()
                .unwrap_or_default();
            Error::UnknownFactor {
                model: model.name.clone(),
                factor: missing,
            }
        })?;
    let r = dataset.portfolios.values();
    fit_matrices(model, dataset.cross_section(), r, &factors)
}

/// Core of [`fit_ols`] on raw `T x n` returns and `T x k` factors.
pub fn fit_matrices(
    model: &ModelSpec,
    cross_section: CrossSection,
    r: &DMatrix<f64>,
    f: &DMatrix<f64>,
) -> Result<RegressionFit> {
    let (t, n) = r.shape();
    let k = f.ncols();
    if f.nrows() != t {
        return Err(Error::DimMismatch {
            expected: t,
            got: f.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if t < k + 2 {
        return Err(Error::InsufficientSample { t, required: k + 2 });
    }

    let mut x = DMatrix::from_element(t, k + 1, 1.0);
    x.columns_mut(1, k).copy_from(f);
    let xtx = SymMatrix::symmetrize(x.transpose() * &x);
    let xtr = x.transpose() * r;
    let chol = Cholesky::factor(&xtx, RANK_TOL)
        .map_err(|_| Error::RankDeficient(model.name.clone()))?;
    let b_hat = chol.solve(&xtr);

    let resid = r - &x * &b_hat;
    let resid_ssp = SymMatrix::symmetrize(resid.transpose() * &resid);
    let tf = t as f64;
    let sigma_mle = resid_ssp.scaled(1.0 / tf);

    let alpha_hat = DVector::from_iterator(n, b_hat.row(0).iter().copied());
    let beta_hat = b_hat.rows(1, k).transpose();

    let factor_mean = column_means(f);
    let asset_mean = column_means(r);
    let fc = DMatrix::from_fn(t, k, |i, j| f[(i, j)] - factor_mean[j]);
    let factor_cov_mle = SymMatrix::symmetrize(fc.transpose() * &fc / tf);

    let sh2 = sharpe_sq_from(&factor_mean, &factor_cov_mle)?;
    let valpha_hat = sigma_mle.scaled((1.0 + sh2) / tf);

    let r2 = DVector::from_fn(n, |i, _| {
        let ssr = resid.column(i).norm_squared();
        let sst: f64 = r.column(i).iter().map(|v| (v - asset_mean[i]).powi(2)).sum();
        if sst > 0.0 {
            1.0 - ssr / sst
        } else if ssr == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    });

    Ok(RegressionFit {
        model: model.clone(),
        cross_section,
        t,
        n,
        k,
        alpha_hat,
        beta_hat,
        sigma_mle,
        factor_mean,
        factor_cov_mle,
        valpha_hat,
        r2,
        asset_mean,
        xtx,
        xtr,
        resid_ssp,
    })
}

fn sharpe_sq_from(mean: &DVector<f64>, cov: &SymMatrix) -> Result<f64> {
    let chol = Cholesky::factor(cov, CHOL_PIVOT_TOL).map_err(|_| Error::SingularFactorCov)?;
    Ok(chol.quad_form_inv(mean))
}

/// Squared maximum Sharpe ratio of the factors, `F̄ᵀΩ̂⁻¹F̄`.
pub fn sharpe_sq(fit: &RegressionFit) -> Result<f64> {
    sharpe_sq_from(&fit.factor_mean, &fit.factor_cov_mle)
}

/// GRS statistic and its `F(n, T-n-k)` upper-tail p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrsResult {
    pub statistic: f64,
    pub pvalue: f64,
}

pub fn grs_test(fit: &RegressionFit) -> Result<GrsResult> {
    let dof = fit.t as i64 - fit.n as i64 - fit.k as i64;
    if dof < 1 {
        return Err(Error::DegenerateDoF(dof));
    }
    let sh2 = sharpe_sq(fit)?;
    let chol =
        Cholesky::factor(&fit.sigma_mle, CHOL_PIVOT_TOL).map_err(|_| Error::SingularResidualCov)?;
    let quad = chol.quad_form_inv(&fit.alpha_hat);
    let statistic = (dof as f64 / fit.n as f64) * quad / (1.0 + sh2);
    let pvalue = f_cdf_upper(statistic, fit.n as u64, dof as u64)?;
    Ok(GrsResult { statistic, pvalue })
}
