//! Synthetic factor and portfolio returns with known parameters.
//!
//! Draws come from ChaCha20 (`rand_chacha`) seeded with a 64-bit integer and
//! `rand_distr`'s standard normal sampler. Per month, the `k` factor shocks
//! are drawn before the `n` residual shocks, so datasets sharing a seed share
//! their underlying normals.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataio::{Dataset, ReturnsPanel};
use crate::error::{Error, Result};
use crate::linalg::{spd_sqrt, SymMatrix};

/// Name and version of the generator, for output metadata.
pub const GENERATOR: &str = "ChaCha20/rand_chacha-0.9+StandardNormal/rand_distr-0.5";

/// First month of every synthetic panel.
pub const START_DATE: u32 = 196701;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub t: usize,
    pub n: usize,
    pub k: usize,
    pub true_alpha: DVector<f64>,
    /// `n x k`.
    pub true_beta: DMatrix<f64>,
    pub factor_mean: DVector<f64>,
    pub factor_cov: SymMatrix,
    pub resid_cov: SymMatrix,
    pub seed: u64,
}

impl SynthConfig {
    /// A market-like configuration: the first factor has mean 0.5 and
    /// volatility 4.5 (percent per month), further factors mean 0.25 and
    /// volatility 3; loadings near one on the first factor; independent
    /// residuals with volatility 1.5 to 2.5. Alphas spread linearly around
    /// `alpha_level` (between 0.5× and 1.5×).
    pub fn simple(t: usize, n: usize, k: usize, alpha_level: f64, seed: u64) -> Self {
        let true_alpha = DVector::from_fn(n, |i, _| {
            let pos = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
            alpha_level * (0.5 + pos)
        });
        let true_beta = DMatrix::from_fn(n, k, |i, j| {
            if j == 0 {
                0.8 + 0.4 * (i as f64 / n.max(1) as f64)
            } else {
                0.5 * (((i + j) % 3) as f64 - 1.0)
            }
        });
        let factor_mean = DVector::from_fn(k, |j, _| if j == 0 { 0.5 } else { 0.25 });
        let factor_sd: Vec<f64> = (0..k).map(|j| if j == 0 { 4.5 } else { 3.0 }).collect();
        let factor_cov =
            SymMatrix::from_diagonal(&factor_sd.iter().map(|s| s * s).collect::<Vec<_>>());
        let resid_var: Vec<f64> = (0..n)
            .map(|i| {
                let sd = 1.5 + if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                sd * sd
            })
            .collect();
        SynthConfig {
            t,
            n,
            k,
            true_alpha,
            true_beta,
            factor_mean,
            factor_cov,
            resid_cov: SymMatrix::from_diagonal(&resid_var),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if self.t == 0 || self.n == 0 || self.k == 0 {
            return bad(format!("T, n, k must be positive (got {}, {}, {})", self.t, self.n, self.k));
        }
        if self.true_alpha.len() != self.n {
            return bad(format!("alpha has length {}, expected {}", self.true_alpha.len(), self.n));
        }
        if self.true_beta.shape() != (self.n, self.k) {
            return bad(format!("beta has shape {:?}, expected ({}, {})", self.true_beta.shape(), self.n, self.k));
        }
        if self.factor_mean.len() != self.k || self.factor_cov.dim() != self.k {
            return bad("factor moments do not match k".into());
        }
        if self.resid_cov.dim() != self.n {
            return bad("residual covariance does not match n".into());
        }
        Ok(())
    }

    /// Non-fatal issues with the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.t < self.n + self.k + 2 {
            w.push(format!(
                "T = {} is below n + k + 2 = {}; GRS is undefined on this sample",
                self.t,
                self.n + self.k + 2
            ));
        }
        w
    }
}

fn psd_root(m: &SymMatrix, what: &str) -> Result<DMatrix<f64>> {
    spd_sqrt(m)
        .map(SymMatrix::into_inner)
        .map_err(|e| Error::BadConfig(format!("{what}: {e}")))
}

fn monthly_dates(t: usize) -> Vec<u32> {
    (0..t as u32)
        .map(|i| {
            let months = (START_DATE / 100) * 12 + (START_DATE % 100 - 1) + i;
            (months / 12) * 100 + months % 12 + 1
        })
        .collect()
}

/// Draws `R = 1αᵀ + Fβᵀ + U` with Gaussian factors and residuals.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let SynthConfig { t, n, k, .. } = *config;
    let factor_root = psd_root(&config.factor_cov, "factor covariance")?;
    let resid_root = psd_root(&config.resid_cov, "residual covariance")?;

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut f = DMatrix::zeros(t, k);
    let mut r = DMatrix::zeros(t, n);
    let mut zf = DVector::zeros(k);
    let mut zu = DVector::zeros(n);
    for row in 0..t {
        for z in zf.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
        for z in zu.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
        let ft = &config.factor_mean + &factor_root * &zf;
        let ut = &resid_root * &zu;
        let rt = &config.true_alpha + &config.true_beta * &ft + ut;
        f.row_mut(row).copy_from(&ft.transpose());
        r.row_mut(row).copy_from(&rt.transpose());
    }

    let dates = monthly_dates(t);
    let pnames = (1..=n).map(|i| format!("P{i}")).collect();
    let fnames = (1..=k).map(|j| format!("F{j}")).collect();
    Dataset::new(
        ReturnsPanel::new(dates.clone(), pnames, r)?,
        ReturnsPanel::new(dates, fnames, f)?,
    )
}

/// One dataset per scale `c`, with the residual covariance multiplied by `c`
/// and the seed shared across scales.
pub fn power_scenario(base: &SynthConfig, scales: &[f64]) -> Result<Vec<(f64, Dataset)>> {
    scales
        .iter()
        .map(|&c| {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::BadConfig(format!("scale must be positive, got {c}")));
            }
            let cfg = SynthConfig {
                resid_cov: base.resid_cov.scaled(c),
                ..base.clone()
            };
            Ok((c, generate(&cfg)?))
        })
        .collect()
}
