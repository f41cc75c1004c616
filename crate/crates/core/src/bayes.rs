//! Conjugate normal/inverted-Wishart posterior of the alpha vector under a
//! zero-centred alpha prior with standard deviation `σ_α`.
//!
//! The prior on `B = [α β]ᵀ` is `N(0, Σ ⊗ V₀)` with `V₀⁻¹ = diag(s²/σ_α², 0, ..., 0)`,
//! i.e. an informative prior on alpha and a flat prior on the loadings, and
//! `Σ ~ IW(H₀, ν₀)` with `H₀ = s² I` and `ν₀ = n + 2`. `s²` is the average
//! residual variance of the model being evaluated.
//!
//! `σ_α` is supplied annualized (percent per year) and converted to a monthly
//! value by dividing by 12.

use nalgebra::{DMatrix, DVector};

use crate::dataio::{Dataset, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SymMatrix, CHOL_PIVOT_TOL};
use crate::regression::{fit_ols, sharpe_sq, RegressionFit};

/// Relative tolerance for round-off negatives in the posterior scale matrix.
const PSD_TOL: f64 = 1e-10;

/// Gaussian distribution `N(mean, cov)`; a zero covariance is a point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimMismatch {
                expected: mean.len(),
                got: cov.dim(),
            });
        }
        Ok(GaussianDist { mean, cov })
    }

    /// Point mass at the origin.
    pub fn point_mass(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(GaussianDist {
            mean: DVector::zeros(n),
            cov: SymMatrix::zeros(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Prior hyperparameters for one model on one cross section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    /// Prior alpha standard deviation, percent per year; may be `+∞`.
    pub sigma_alpha_annual: f64,
    /// Average diagonal of the residual covariance `Σ̂`.
    pub s2: f64,
    pub nu0: usize,
    pub h0_scale: f64,
}

impl PriorSpec {
    pub fn new(sigma_alpha_annual: f64, s2: f64, n: usize) -> Result<Self> {
        if !(sigma_alpha_annual >= 0.0) {
            return Err(Error::InvalidPrior(format!(
                "sigma_alpha must be non-negative, got {sigma_alpha_annual}"
            )));
        }
        if !(s2 > 0.0 && s2.is_finite()) {
            return Err(Error::InvalidPrior(format!("s2 must be positive, got {s2}")));
        }
        Ok(PriorSpec {
            sigma_alpha_annual,
            s2,
            nu0: n + 2,
            h0_scale: s2,
        })
    }

    /// Prior for `fit`, with `s²` taken from its residual covariance.
    pub fn for_fit(fit: &RegressionFit, sigma_alpha_annual: f64) -> Result<Self> {
        Self::new(sigma_alpha_annual, average_residual_variance(fit), fit.n)
    }

    pub fn sigma_alpha_monthly(&self) -> f64 {
        sigma_annual_to_monthly(self.sigma_alpha_annual)
    }
}

/// Average diagonal element of `Σ̂ = S / T`.
pub fn average_residual_variance(fit: &RegressionFit) -> f64 {
    fit.sigma_mle.trace() / fit.n as f64
}

/// Converts an annualized alpha standard deviation to monthly units.
pub fn sigma_annual_to_monthly(sigma_alpha_annual: f64) -> f64 {
    sigma_alpha_annual / 12.0
}

/// Posterior alpha distribution for `model` fitted on `dataset`.
pub fn posterior_alpha(dataset: &Dataset, model: &ModelSpec, prior: &PriorSpec) -> Result<GaussianDist> {
    let fit = fit_ols(dataset, model)?;
    posterior_from_fit(&fit, prior)
}

/// Posterior alpha distribution from an existing fit. `σ_α = 0` yields the
/// point mass and `σ_α = ∞` the fully skeptical posterior.
pub fn posterior_from_fit(fit: &RegressionFit, prior: &PriorSpec) -> Result<GaussianDist> {
    let sigma = prior.sigma_alpha_monthly();
    if sigma == 0.0 {
        return posterior_alpha_dogmatic(fit.n);
    }
    if sigma.is_infinite() {
        return posterior_alpha_skeptic_with(fit, prior.h0_scale);
    }
    if prior.nu0 != fit.n + 2 {
        return Err(Error::InvalidPrior(format!(
            "nu0 = {} but n + 2 = {}",
            prior.nu0,
            fit.n + 2
        )));
    }

    let p = fit.k + 1;
    let mut precision = fit.xtx.as_matrix().clone();
    precision[(0, 0)] += prior.s2 / (sigma * sigma);

    // Jacobi-equilibrate before factoring: for tiny σ_α the (1,1) entry dwarfs
    // the rest, which would trip the trace-relative pivot test.
    let scale = DVector::from_fn(p, |i, _| 1.0 / precision[(i, i)].sqrt());
    let scaled = SymMatrix::symmetrize(DMatrix::from_fn(p, p, |i, j| {
        precision[(i, j)] * scale[i] * scale[j]
    }));
    let chol = Cholesky::factor(&scaled, CHOL_PIVOT_TOL)?;
    let scaled_rhs = DMatrix::from_fn(p, fit.n, |i, j| fit.xtr[(i, j)] * scale[i]);
    let y = chol.solve(&scaled_rhs);
    let b_tilde = DMatrix::from_fn(p, fit.n, |i, j| y[(i, j)] * scale[i]);
    let v_tilde_11 = chol.inverse()[(0, 0)] * scale[0] * scale[0];

    // H̃ = H₀ + S + B̂ᵀXᵀXB̂ − B̃ᵀṼ⁻¹B̃; with a zero prior mean Ṽ⁻¹B̃ = XᵀR = XᵀXB̂,
    // so the last two terms collapse to (B̂ − B̃)ᵀXᵀR.
    let diff = fit.b_hat() - &b_tilde;
    let mut h = fit.resid_ssp.as_matrix() + diff.transpose() * &fit.xtr;
    for i in 0..fit.n {
        h[(i, i)] += prior.h0_scale;
    }
    let h_tilde = SymMatrix::symmetrize(h);
    check_psd(&h_tilde)?;
    let sigma_tilde = h_tilde.scaled(1.0 / (fit.t as f64 + 1.0));

    let mean = DVector::from_iterator(fit.n, b_tilde.row(0).iter().copied());
    GaussianDist::new(mean, sigma_tilde.scaled(v_tilde_11))
}

fn check_psd(m: &SymMatrix) -> Result<()> {
    let ev = m.eigenvalues();
    let min = ev[0];
    let norm = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if min < -PSD_TOL * norm {
        return Err(Error::NonPdPosterior(min));
    }
    Ok(())
}

/// Posterior under dogmatic belief in the model: the point mass `N(0, 0)`.
pub fn posterior_alpha_dogmatic(n: usize) -> Result<GaussianDist> {
    GaussianDist::point_mass(n)
}

/// Posterior under complete skepticism,
/// `N(α̂, (1 + Sh²) / T · (H₀ + S) / (T + 1))`.
pub fn posterior_alpha_skeptic(fit: &RegressionFit) -> Result<GaussianDist> {
    posterior_alpha_skeptic_with(fit, average_residual_variance(fit))
}

fn posterior_alpha_skeptic_with(fit: &RegressionFit, h0_scale: f64) -> Result<GaussianDist> {
    let sh2 = sharpe_sq(fit)?;
    let t = fit.t as f64;
    let mut h = fit.resid_ssp.as_matrix().clone();
    for i in 0..fit.n {
        h[(i, i)] += h0_scale;
    }
    let cov = SymMatrix::symmetrize(h * ((1.0 + sh2) / (t * (t + 1.0))));
    GaussianDist::new(fit.alpha_hat.clone(), cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::ReturnsPanel;
    use crate::synth::{generate, SynthConfig};

    fn tiny_dataset() -> Dataset {
        let x = [0.3, -1.2, 0.8, 2.1, -0.4];
        let y = [1.1, -0.5, 0.2, 1.9, 0.6];
        let dates = vec![200001, 200002, 200003, 200004, 200005];
        Dataset::new(
            ReturnsPanel::new(dates.clone(), vec!["P".into()], DMatrix::from_column_slice(5, 1, &y)).unwrap(),
            ReturnsPanel::new(dates, vec!["MKT".into()], DMatrix::from_column_slice(5, 1, &x)).unwrap(),
        )
        .unwrap()
    }

    fn capm() -> ModelSpec {
        ModelSpec::new("CAPM", ["MKT"]).unwrap()
    }

    fn synthetic(n: usize, t: usize, alpha: f64, seed: u64) -> RegressionFit {
        let cfg = SynthConfig::simple(t, n, 1, alpha, seed);
        let ds = generate(&cfg).unwrap();
        fit_ols(&ds, &ModelSpec::new("M", ["F1"]).unwrap()).unwrap()
    }

    #[test]
    fn annual_to_monthly() {
        assert_eq!(sigma_annual_to_monthly(0.0), 0.0);
        assert!((sigma_annual_to_monthly(2.0) - 0.166_666_666_666_666_7).abs() < 1e-15);
        assert_eq!(sigma_annual_to_monthly(12.0), 1.0);
    }

    #[test]
    fn hand_solved_scalar_posterior() {
        let x = [0.3, -1.2, 0.8, 2.1, -0.4];
        let y = [1.1, -0.5, 0.2, 1.9, 0.6];
        // OLS residual variance for s².
        let t = 5.0;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = t * sxx - sx * sx;
        let a = (sxx * sy - sx * sxy) / det;
        let b = (t * sxy - sx * sy) / det;
        let ssr: f64 = x.iter().zip(&y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
        let s2 = ssr / t;
        // σ_α,monthly = 1 → V₀⁻¹₁₁ = s²; invert [[T+s², Σx],[Σx, Σx²]] by hand.
        let m11 = t + s2;
        let det2 = m11 * sxx - sx * sx;
        let alpha_tilde = (sxx * sy - sx * sxy) / det2;
        let v11 = sxx / det2;
        let beta_tilde = (m11 * sxy - sx * sy) / det2;
        // H̃ = s² + S + B̂ᵀXᵀXB̂ − B̃ᵀ(V₀⁻¹+XᵀX)B̃
        let quad = |al: f64, be: f64, extra: f64| {
            (t + extra) * al * al + 2.0 * sx * al * be + sxx * be * be
        };
        let h = s2 + ssr + quad(a, b, 0.0) - quad(alpha_tilde, beta_tilde, s2);
        let var = v11 * h / (t + 1.0);

        let prior = PriorSpec::new(12.0, s2, 1).unwrap();
        let post = posterior_alpha(&tiny_dataset(), &capm(), &prior).unwrap();
        assert!((post.mean[0] - alpha_tilde).abs() < 1e-12, "{} vs {alpha_tilde}", post.mean[0]);
        assert!((post.cov[(0, 0)] - var).abs() < 1e-12);
    }

    #[test]
    fn dogmatic_point_mass() {
        let p = posterior_alpha_dogmatic(3).unwrap();
        assert_eq!(p.mean.as_slice(), &[0.0; 3]);
        assert!(p.cov.is_zero() && p.cov.dim() == 3);
        assert_eq!(posterior_alpha_dogmatic(1).unwrap().dim(), 1);
        assert!(matches!(posterior_alpha_dogmatic(0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn sentinels_dispatch() {
        let fit = synthetic(3, 120, 0.3, 5);
        let zero = posterior_from_fit(&fit, &PriorSpec::for_fit(&fit, 0.0).unwrap()).unwrap();
        assert!(zero.cov.is_zero() && zero.mean.iter().all(|&v| v == 0.0));
        let inf = posterior_from_fit(&fit, &PriorSpec::for_fit(&fit, f64::INFINITY).unwrap()).unwrap();
        assert_eq!(inf, posterior_alpha_skeptic(&fit).unwrap());
        assert!(PriorSpec::new(-1.0, 1.0, 2).is_err());
        assert!(PriorSpec::new(1.0, 0.0, 2).is_err());
    }

    #[test]
    fn limits_match_endpoints() {
        let fit = synthetic(4, 240, 0.25, 17);
        let skeptic = posterior_alpha_skeptic(&fit).unwrap();
        assert_eq!(skeptic.mean, fit.alpha_hat);

        let wide = posterior_from_fit(&fit, &PriorSpec::for_fit(&fit, 1e6).unwrap()).unwrap();
        assert!((&wide.mean - &fit.alpha_hat).amax() <= 1e-6 * fit.alpha_hat.amax());
        assert!((wide.cov.as_matrix() - skeptic.cov.as_matrix()).amax() <= 1e-6 * skeptic.cov.as_matrix().amax());

        let tight = posterior_from_fit(&fit, &PriorSpec::for_fit(&fit, 1e-8).unwrap()).unwrap();
        assert!(tight.mean.norm() <= 1e-6 * fit.alpha_hat.norm());
    }

    #[test]
    fn closed_form_shrinkage_matches_matrix_route() {
        // With V₀⁻¹ = d·e₁e₁ᵀ and G = (XᵀX)⁻¹: α̃ = α̂/(1 + d G₁₁),
        // Ṽ₁₁ = G₁₁/(1 + d G₁₁), H̃ = H₀ + S + d/(1 + d G₁₁)·α̂α̂ᵀ.
        let fit = synthetic(5, 300, 0.4, 23);
        let g11 = Cholesky::factor(&fit.xtx, 1e-14).unwrap().inverse()[(0, 0)];
        for sigma_annual in [0.5, 2.0, 6.0, 30.0] {
            let prior = PriorSpec::for_fit(&fit, sigma_annual).unwrap();
            let sm = prior.sigma_alpha_monthly();
            let d = prior.s2 / (sm * sm);
            let shrink = 1.0 / (1.0 + d * g11);
            let post = posterior_from_fit(&fit, &prior).unwrap();
            let mean = &fit.alpha_hat * shrink;
            assert!((&post.mean - &mean).amax() < 1e-12);
            let mut h = fit.resid_ssp.as_matrix() + &fit.alpha_hat * fit.alpha_hat.transpose() * (d * shrink);
            for i in 0..fit.n {
                h[(i, i)] += prior.s2;
            }
            let cov = h * (g11 * shrink / (fit.t as f64 + 1.0));
            let rel = (post.cov.as_matrix() - &cov).amax() / cov.amax();
            assert!(rel < 1e-10, "rel {rel}");
        }
    }

    #[test]
    fn shrinkage_is_monotone_in_sigma() {
        let fit = synthetic(1, 60, 0.8, 3);
        let ols = fit.alpha_hat[0];
        let mut prev = 0.0f64;
        for s in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0] {
            let a = posterior_from_fit(&fit, &PriorSpec::for_fit(&fit, s).unwrap()).unwrap().mean[0];
            assert!(a.abs() >= prev.abs() && a.abs() <= ols.abs());
            assert!(a * ols >= 0.0);
            prev = a;
        }
    }

    #[test]
    fn posterior_scale_is_psd_across_grid() {
        let fit = synthetic(6, 120, 0.2, 41);
        for s in [0.01, 0.3, 2.0, 10.0, 100.0] {
            let post = posterior_from_fit(&fit, &PriorSpec::for_fit(&fit, s).unwrap()).unwrap();
            assert!(post.cov.eigenvalues()[0] >= -1e-14);
        }
    }

    #[test]
    fn skeptic_exact_fit_asset_has_h0_floor() {
        let t = 50;
        let f = DMatrix::from_fn(t, 1, |i, _| ((i * 13 % 7) as f64 - 3.0) * 0.9 + 0.4);
        let r = DMatrix::from_fn(t, 2, |i, j| {
            if j == 0 {
                0.5 + 1.2 * f[(i, 0)]
            } else {
                0.1 + f[(i, 0)] + ((i * 29 % 11) as f64 - 5.0) * 0.5
            }
        });
        let dates: Vec<u32> = (0..t as u32).map(|i| 200001 + (i / 12) * 100 + i % 12).collect();
        let ds = Dataset::new(
            ReturnsPanel::new(dates.clone(), vec!["A".into(), "B".into()], r).unwrap(),
            ReturnsPanel::new(dates, vec!["MKT".into()], f).unwrap(),
        )
        .unwrap();
        let fit = fit_ols(&ds, &capm()).unwrap();
        let s2 = average_residual_variance(&fit);
        let sh2 = sharpe_sq(&fit).unwrap();
        let post = posterior_alpha_skeptic(&fit).unwrap();
        let tf = t as f64;
        let expected = s2 * (1.0 + sh2) / (tf * (tf + 1.0));
        assert!((post.cov[(0, 0)] - expected).abs() < 1e-12 * expected.max(1.0));
        assert!(post.cov[(0, 0)] > 0.0);
    }

    #[test]
    fn skeptic_close_to_frequentist_at_large_t() {
        let fit = synthetic(5, 600, 0.2, 99);
        let post = posterior_alpha_skeptic(&fit).unwrap();
        let rel = (post.cov.as_matrix() - fit.valpha_hat.as_matrix()).norm() / fit.valpha_hat.as_matrix().norm();
        assert!(rel < 0.01, "rel {rel}");
    }
}
