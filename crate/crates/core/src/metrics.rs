//! Per-model metric rows, ranking by average distance, and transport-cost
//! savings between models.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DVector;

use crate::bayes::GaussianDist;
use crate::dataio::CrossSection;
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::regression::{GrsResult, RegressionFit};
use crate::transport::DistanceBreakdown;

/// Alpha-based statistics of a posterior mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStats {
    /// Mean absolute alpha.
    pub mae: f64,
    /// MAE relative to the mean absolute deviation of average returns from
    /// their cross-sectional mean; `+∞` for a flat cross section.
    pub mae_over_ar: f64,
    pub mean_r2: f64,
}

fn alpha_stats_for(alpha: &DVector<f64>, fit: &RegressionFit) -> AlphaStats {
    let n = alpha.len() as f64;
    let mae = alpha.iter().map(|a| a.abs()).sum::<f64>() / n;
    let grand = fit.asset_mean.mean();
    let ar = fit.asset_mean.iter().map(|r| (r - grand).abs()).sum::<f64>() / n;
    let mae_over_ar = if ar > 0.0 { mae / ar } else { f64::INFINITY };
    AlphaStats {
        mae,
        mae_over_ar,
        mean_r2: fit.r2.mean(),
    }
}

pub fn alpha_stats(fit: &RegressionFit, posterior: &GaussianDist) -> Result<AlphaStats> {
    if posterior.dim() != fit.n {
        return Err(Error::DimMismatch {
            expected: fit.n,
            got: posterior.dim(),
        });
    }
    Ok(alpha_stats_for(&posterior.mean, fit))
}

/// One row of the model comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub model_name: String,
    pub cross_section: CrossSection,
    pub n: usize,
    pub t: usize,
    pub k: usize,
    pub td: f64,
    pub ad: f64,
    pub rmse_alpha: f64,
    pub rmse_sigma: f64,
    pub ratio_var: f64,
    pub grs: f64,
    pub grs_pvalue: f64,
    pub mae: f64,
    pub mae_over_ar: f64,
    pub mean_r2: f64,
    pub marginal: DVector<f64>,
}

/// Assembles a report from a fit, the distance breakdown of its data-based
/// posterior (whose mean is `fit.alpha_hat`) and its GRS test.
pub fn build_report(fit: &RegressionFit, breakdown: &DistanceBreakdown, grs: GrsResult) -> Result<MetricsReport> {
    if breakdown.marginal.len() != fit.n {
        return Err(Error::InconsistentInputs(format!(
            "breakdown covers {} assets, fit has {}",
            breakdown.marginal.len(),
            fit.n
        )));
    }
    let stats = alpha_stats_for(&fit.alpha_hat, fit);
    if stats.mae > breakdown.rmse_alpha + 1e-12 {
        return Err(Error::InconsistentInputs(format!(
            "MAE {} exceeds RMSE(alpha) {}; breakdown is not from this fit",
            stats.mae, breakdown.rmse_alpha
        )));
    }
    Ok(MetricsReport {
        model_name: fit.model.name.clone(),
        cross_section: fit.cross_section,
        n: fit.n,
        t: fit.t,
        k: fit.k,
        td: breakdown.td,
        ad: breakdown.ad,
        rmse_alpha: breakdown.rmse_alpha,
        rmse_sigma: breakdown.rmse_sigma,
        ratio_var: breakdown.ratio_var,
        grs: grs.statistic,
        grs_pvalue: grs.pvalue,
        mae: stats.mae,
        mae_over_ar: stats.mae_over_ar,
        mean_r2: stats.mean_r2,
        marginal: breakdown.marginal.clone(),
    })
}

/// Reports ordered by ascending AD, then TD, then model name.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub rows: Vec<MetricsReport>,
    /// `order[r]` is the index in `rows` of the model ranked `r` (0 = best).
    pub order: Vec<usize>,
}

impl RankTable {
    pub fn ranked(&self) -> impl Iterator<Item = &MetricsReport> {
        self.order.iter().map(move |&i| &self.rows[i])
    }

    pub fn best(&self) -> &MetricsReport {
        &self.rows[self.order[0]]
    }
}

fn rank_cmp(a: &MetricsReport, b: &MetricsReport) -> Ordering {
    a.ad
        .total_cmp(&b.ad)
        .then(a.td.total_cmp(&b.td))
        .then_with(|| a.model_name.cmp(&b.model_name))
}

pub fn rank_models(reports: Vec<MetricsReport>) -> Result<RankTable> {
    let first = reports.first().ok_or(Error::EmptyReports)?;
    if reports.iter().any(|r| r.cross_section != first.cross_section) {
        return Err(Error::MixedCrossSections);
    }
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&i, &j| rank_cmp(&reports[i], &reports[j]));
    Ok(RankTable {
        rows: reports,
        order,
    })
}

/// `(TD_a − TD_b) × 12`, percent per year.
pub fn annual_savings(report_a: &MetricsReport, report_b: &MetricsReport) -> Result<f64> {
    if report_a.cross_section != report_b.cross_section {
        return Err(Error::MixedCrossSections);
    }
    Ok((report_a.td - report_b.td) * 12.0)
}

pub const REPORT_HEADER: &str =
    "model,n,T,k,TD,AD,RMSE_alpha,RMSE_sigma,ratio,GRS,GRS_pvalue,MAE,MAE_over_AR,mean_R2";

/// Report CSV, one row per model in the given order.
pub fn report_csv<'a>(rows: impl IntoIterator<Item = &'a MetricsReport>, metadata: &str) -> String {
    let mut out = format!("# {metadata}\n{REPORT_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.model_name,
            r.n,
            r.t,
            r.k,
            sig6(r.td),
            sig6(r.ad),
            sig6(r.rmse_alpha),
            sig6(r.rmse_sigma),
            sig6(r.ratio_var),
            sig6(r.grs),
            sig6(r.grs_pvalue),
            sig6(r.mae),
            sig6(r.mae_over_ar),
            sig6(r.mean_r2),
        );
    }
    out
}

/// Per-asset diagnostics for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRow {
    pub asset: String,
    pub alpha: f64,
    pub sigma_alpha: f64,
    pub d: f64,
    pub t_stat: f64,
}

pub fn marginal_rows(
    asset_names: &[String],
    fit: &RegressionFit,
    posterior: &GaussianDist,
    breakdown: &DistanceBreakdown,
) -> Result<Vec<MarginalRow>> {
    let n = fit.n;
    if asset_names.len() != n || posterior.dim() != n || breakdown.marginal.len() != n {
        return Err(Error::InconsistentInputs("marginal inputs differ in length".into()));
    }
    let t = fit.alpha_t_stats();
    Ok((0..n)
        .map(|i| MarginalRow {
            asset: asset_names[i].clone(),
            alpha: posterior.mean[i],
            sigma_alpha: posterior.cov[(i, i)].max(0.0).sqrt(),
            d: breakdown.marginal[i],
            t_stat: t[i],
        })
        .collect())
}

pub fn marginal_csv(rows: &[MarginalRow], metadata: &str) -> String {
    let mut out = format!("# {metadata}\nasset,alpha,sigma_alpha,d,t_alpha\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.asset,
            sig6(r.alpha),
            sig6(r.sigma_alpha),
            sig6(r.d),
            sig6(r.t_stat)
        );
    }
    out
}
