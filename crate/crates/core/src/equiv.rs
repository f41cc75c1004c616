//! Average distance as a function of prior mispricing uncertainty, and the
//! distance-equivalence solver.
//!
//! For a model and a prior standard deviation `σ_α`, AD is the Wasserstein
//! distance between the model's posterior at `σ_α` and its fully skeptical
//! (data-based) posterior, divided by `sqrt(n)`. At `σ_α = 0` this is the
//! model's dogmatic AD; it falls monotonically to zero as `σ_α` grows.
//!
//! The component columns split `AD²` into the squared mean difference and the
//! covariance (Bures) term: `RMSE_alpha = ||Δμ|| / sqrt(n)` and
//! `RMSE_sigma = sqrt(trace term / n)`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bayes::{posterior_alpha_skeptic, posterior_from_fit, PriorSpec};
use crate::dataio::{Dataset, ModelSpec};
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::regression::{fit_ols, RegressionFit};
use crate::transport::covariance_distance_sq;

/// Default annualized prior grid, percent.
pub const DEFAULT_GRID: [f64; 6] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
/// Default upper end of the bisection bracket, percent per year.
pub const DEFAULT_BRACKET_HI: f64 = 100.0;
pub const AD_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 200;
/// Bracket width (percent per year) at which bisection stops.
const SIGMA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma_alpha_annual: f64,
    pub ad: f64,
    pub rmse_alpha: f64,
    pub rmse_sigma: f64,
    pub ratio_var: f64,
}

/// AD of `fit` at one prior value, with its components.
pub fn ad_at(fit: &RegressionFit, sigma_alpha_annual: f64) -> Result<SweepRow> {
    let skeptic = posterior_alpha_skeptic(fit)?;
    ad_against(fit, &skeptic, sigma_alpha_annual)
}

fn ad_against(
    fit: &RegressionFit,
    skeptic: &crate::bayes::GaussianDist,
    sigma_alpha_annual: f64,
) -> Result<SweepRow> {
    let prior = PriorSpec::for_fit(fit, sigma_alpha_annual)?;
    let post = posterior_from_fit(fit, &prior)?;
    let n = fit.n as f64;
    let mean_sq = (&post.mean - &skeptic.mean).norm_squared();
    let cov_sq = covariance_distance_sq(&post.cov, &skeptic.cov)?;
    let ratio_var = if mean_sq > 0.0 {
        cov_sq / mean_sq
    } else if cov_sq > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(SweepRow {
        sigma_alpha_annual,
        ad: ((mean_sq + cov_sq) / n).sqrt(),
        rmse_alpha: (mean_sq / n).sqrt(),
        rmse_sigma: (cov_sq / n).sqrt(),
        ratio_var,
    })
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty".into()));
    }
    if grid.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidGrid("values must be non-negative".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("values must be sorted".into()));
    }
    Ok(())
}

/// AD over a sorted grid of annualized `σ_α` values.
pub fn sweep_fit(fit: &RegressionFit, grid: &[f64]) -> Result<Vec<SweepRow>> {
    validate_grid(grid)?;
    let skeptic = posterior_alpha_skeptic(fit)?;
    let rows = grid
        .par_iter()
        .map(|&s| ad_against(fit, &skeptic, s))
        .collect::<Result<Vec<_>>>()?;
    for w in rows.windows(2) {
        if w[1].ad > w[0].ad * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::InvalidGrid(format!(
                "AD increased from {} at sigma {} to {} at sigma {} for `{}`",
                w[0].ad, w[0].sigma_alpha_annual, w[1].ad, w[1].sigma_alpha_annual, fit.model.name
            )));
        }
    }
    Ok(rows)
}

pub fn sweep(dataset: &Dataset, model: &ModelSpec, grid: &[f64]) -> Result<Vec<SweepRow>> {
    sweep_fit(&fit_ols(dataset, model)?, grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivResult {
    pub alt_model: String,
    pub benchmark_model: String,
    pub benchmark_ad: f64,
    pub sigma_star_annual: f64,
    pub ad_at_star: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Finds `σ*` (percent per year) with `AD(alt, σ*) = benchmark_ad` by
/// bisection on `[0, bracket_hi]`.
pub fn solve_equiv_fit(
    fit: &RegressionFit,
    benchmark_model: &str,
    benchmark_ad: f64,
    bracket_hi: f64,
) -> Result<EquivResult> {
    if !(bracket_hi > 0.0 && bracket_hi.is_finite()) {
        return Err(Error::InvalidGrid(format!("bracket upper end must be positive, got {bracket_hi}")));
    }
    let skeptic = posterior_alpha_skeptic(fit)?;
    let ad = |s: f64| ad_against(fit, &skeptic, s).map(|r| r.ad);
    let result = |sigma: f64, ad_star: f64, iterations: usize| EquivResult {
        alt_model: fit.model.name.clone(),
        benchmark_model: benchmark_model.to_string(),
        benchmark_ad,
        sigma_star_annual: sigma,
        ad_at_star: ad_star,
        iterations,
        converged: (ad_star - benchmark_ad).abs() <= AD_TOL,
    };

    let ad_lo = ad(0.0)?;
    if (ad_lo - benchmark_ad).abs() <= 1e-12 * ad_lo.max(1.0) {
        return Ok(result(0.0, ad_lo, 0));
    }
    let ad_hi = ad(bracket_hi)?;
    if benchmark_ad > ad_lo || benchmark_ad < ad_hi {
        return Err(Error::NotBracketed {
            target: benchmark_ad,
            ad_lo,
            ad_hi,
        });
    }

    let (mut lo, mut hi) = (0.0, bracket_hi);
    for iter in 1..=MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let ad_mid = ad(mid)?;
        if ad_mid == benchmark_ad || hi - lo <= SIGMA_TOL {
            return Ok(result(mid, ad_mid, iter));
        }
        // AD decreases in σ: too high means σ* lies above mid.
        if ad_mid > benchmark_ad {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let ad_mid = ad(mid)?;
    if (ad_mid - benchmark_ad).abs() <= AD_TOL {
        Ok(result(mid, ad_mid, MAX_ITER))
    } else {
        Err(Error::NoConvergence(MAX_ITER))
    }
}

pub fn solve_equiv(
    dataset: &Dataset,
    alt: &ModelSpec,
    benchmark_model: &str,
    benchmark_ad: f64,
    bracket_hi: f64,
) -> Result<EquivResult> {
    solve_equiv_fit(&fit_ols(dataset, alt)?, benchmark_model, benchmark_ad, bracket_hi)
}

pub const SWEEP_HEADER: &str = "model,sigma_alpha_annual,AD,RMSE_alpha,RMSE_sigma,ratio";

/// Sweep CSV for several models, rows in the given order.
pub fn sweep_csv<'a>(sweeps: impl IntoIterator<Item = (&'a str, &'a [SweepRow])>, metadata: &str) -> String {
    let mut out = format!("# {metadata}\n{SWEEP_HEADER}\n");
    for (model, rows) in sweeps {
        for r in rows {
            let _ = writeln!(
                out,
                "{model},{},{},{},{},{}",
                sig6(r.sigma_alpha_annual),
                sig6(r.ad),
                sig6(r.rmse_alpha),
                sig6(r.rmse_sigma),
                sig6(r.ratio_var)
            );
        }
    }
    out
}

pub const EQUIV_HEADER: &str =
    "alt_model,benchmark_model,benchmark_AD,sigma_star_annual,AD_at_star,iterations,converged,status";

/// One equivalence outcome per alternative. Failed solves are written with
/// empty numeric fields and the failure in `status`.
pub fn equiv_csv<'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a str, f64, &'a Result<EquivResult>)>,
    metadata: &str,
) -> String {
    let mut out = format!("# {metadata}\n{EQUIV_HEADER}\n");
    for (alt, bench, bench_ad, res) in rows {
        match res {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},ok",
                    r.alt_model,
                    r.benchmark_model,
                    sig6(r.benchmark_ad),
                    sig6(r.sigma_star_annual),
                    sig6(r.ad_at_star),
                    r.iterations,
                    r.converged
                );
            }
            Err(e) => {
                let status = match e {
                    Error::NotBracketed { .. } => "not_bracketed".to_string(),
                    other => format!("error: {}", other.to_string().replace(',', ";")),
                };
                let _ = writeln!(out, "{alt},{bench},{},,,,false,{status}", sig6(bench_ad));
            }
        }
    }
    out
}
