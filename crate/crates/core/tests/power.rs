use assetdist::bayes::posterior_alpha_skeptic;
use assetdist::regression::fit_ols;
use assetdist::synth::{power_scenario, SynthConfig};
use assetdist::transport::distance_breakdown;
use assetdist::ModelSpec;

#[test]
fn variance_ratio_scales_with_residual_covariance() {
    let base = SynthConfig::simple(600, 25, 3, 0.6, 2024);
    let model = ModelSpec::new("K3", ["F1", "F2", "F3"]).unwrap();
    let ratios: Vec<f64> = power_scenario(&base, &[1.0, 4.0])
        .unwrap()
        .into_iter()
        .map(|(_, ds)| {
            let fit = fit_ols(&ds, &model).unwrap();
            distance_breakdown(&posterior_alpha_skeptic(&fit).unwrap()).ratio_var
        })
        .collect();
    let rel = ratios[1] / ratios[0];
    assert!((rel - 4.0).abs() <= 0.3 * 4.0, "ratio grew by {rel}");
}

#[test]
fn unit_scale_reproduces_base() {
    let base = SynthConfig::simple(120, 4, 2, 0.2, 8);
    let scen = power_scenario(&base, &[1.0]).unwrap();
    let direct = assetdist::synth::generate(&base).unwrap();
    assert_eq!(scen[0].1.portfolios.values(), direct.portfolios.values());
}
