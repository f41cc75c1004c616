use std::fs;
use std::path::{Path, PathBuf};

use assetdist::bayes::posterior_alpha_skeptic;
use assetdist::dataio::{build_dataset, concat_columns, load_models, load_panel, ModelSpec, ReturnsPanel};
use assetdist::equiv::{self, solve_equiv_fit, sweep_fit, SweepRow};
use assetdist::format::sig6;
use assetdist::metrics::{self, build_report, marginal_rows, rank_models, MetricsReport};
use assetdist::regression::{fit_ols, grs_test, RegressionFit};
use assetdist::synth::{self, SynthConfig};
use assetdist::transport::distance_breakdown;
use assetdist::{Dataset, Error};
use clap::Args;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Usage(String),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    /// 1 for user or data errors, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub portfolio_paths: Vec<PathBuf>,
    pub factor_path: PathBuf,
    pub model_path: PathBuf,
    pub riskfree_name: String,
    pub missing_codes: Vec<f64>,
    /// Annualized sigma_alpha grid, percent.
    pub sigma_grid: Vec<f64>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub jobs: usize,
}

struct Loaded {
    dataset: Dataset,
    models: Vec<ModelSpec>,
}

fn check_exists(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

fn load(config: &RunConfig) -> Result<Loaded, CliError> {
    for p in config.portfolio_paths.iter().chain([&config.factor_path, &config.model_path]) {
        check_exists(p)?;
    }
    let factors = load_panel(&config.factor_path, &config.missing_codes)?;
    let panels = config
        .portfolio_paths
        .iter()
        .map(|p| load_panel(p, &config.missing_codes))
        .collect::<Result<Vec<ReturnsPanel>, _>>()?;
    let portfolios = if panels.len() == 1 {
        panels.into_iter().next().expect("one panel")
    } else {
        concat_columns(&panels)?
    };
    let dataset = build_dataset(&portfolios, &factors, &config.riskfree_name)?;
    let models = load_models(&config.model_path)?;
    if models.is_empty() {
        return Err(CliError::Usage(format!("{}: no models defined", config.model_path.display())));
    }
    for m in &models {
        if let Some(f) = m.factor_names.iter().find(|f| dataset.factors.column_index(f).is_none()) {
            return Err(Error::UnknownFactor {
                model: m.name.clone(),
                factor: f.clone(),
            }
            .into());
        }
    }
    Ok(Loaded { dataset, models })
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn file_label(path: &Path) -> Result<String, CliError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(format!("{name}:sha256={}", file_digest(path)?))
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| sig6(x)).collect::<Vec<_>>().join("|")
}

/// Metadata comment line: tool version, input hashes and parameters.
fn metadata(command: &str, config: &RunConfig, extra: &[(&str, String)]) -> Result<String, CliError> {
    let mut parts = vec![
        format!("assetdist {}", env!("CARGO_PKG_VERSION")),
        format!("command={command}"),
    ];
    for p in &config.portfolio_paths {
        parts.push(format!("portfolios={}", file_label(p)?));
    }
    parts.push(format!("factors={}", file_label(&config.factor_path)?));
    parts.push(format!("models={}", file_label(&config.model_path)?));
    parts.push(format!("rf={}", config.riskfree_name));
    parts.push(format!("missing={}", join_f64(&config.missing_codes)));
    if let Some(seed) = config.seed {
        parts.push(format!("seed={seed}"));
    }
    for (k, v) in extra {
        parts.push(format!("{k}={v}"));
    }
    Ok(parts.join("; "))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Writes all files or none: on failure, files already written are removed.
fn write_outputs(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, content) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(CliError::Io(path, e));
        }
        written.push(path);
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn fit_all(pool: &rayon::ThreadPool, loaded: &Loaded) -> Result<Vec<RegressionFit>, CliError> {
    let fits = pool.install(|| {
        loaded
            .models
            .par_iter()
            .map(|m| fit_ols(&loaded.dataset, m))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(fits)
}

pub fn cmd_rank(config: &RunConfig) -> Result<(), CliError> {
    let loaded = load(config)?;
    let pool = pool(config.jobs)?;
    let fits = fit_all(&pool, &loaded)?;
    let names = loaded.dataset.portfolios.names();
    let rows = pool.install(|| {
        fits.par_iter()
            .map(|fit| {
                let post = posterior_alpha_skeptic(fit)?;
                let b = distance_breakdown(&post);
                let report = build_report(fit, &b, grs_test(fit)?)?;
                let marginal = marginal_rows(names, fit, &post, &b)?;
                Ok((report, marginal))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;

    let meta = metadata("rank", config, &[])?;
    let mut files = Vec::new();
    for (report, marginal) in &rows {
        files.push((
            format!("marginal_{}.csv", sanitize(&report.model_name)),
            metrics::marginal_csv(marginal, &format!("{meta}; model={}", report.model_name)),
        ));
    }
    let reports: Vec<MetricsReport> = rows.into_iter().map(|(r, _)| r).collect();
    let table = rank_models(reports)?;
    files.insert(0, ("report.csv".into(), metrics::report_csv(table.ranked(), &meta)));
    write_outputs(&config.output_dir, &files)
}

pub fn cmd_sweep(config: &RunConfig) -> Result<(), CliError> {
    if config.sigma_grid.is_empty() {
        return Err(Error::InvalidGrid("empty".into()).into());
    }
    let loaded = load(config)?;
    let pool = pool(config.jobs)?;
    let fits = fit_all(&pool, &loaded)?;
    let sweeps: Vec<Vec<SweepRow>> = pool.install(|| {
        fits.par_iter()
            .map(|f| sweep_fit(f, &config.sigma_grid))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let meta = metadata("sweep", config, &[("grid", join_f64(&config.sigma_grid))])?;
    let csv = equiv::sweep_csv(
        fits.iter().zip(&sweeps).map(|(f, s)| (f.model.name.as_str(), s.as_slice())),
        &meta,
    );
    write_outputs(&config.output_dir, &[("sweep.csv".into(), csv)])
}

pub fn cmd_equiv(
    config: &RunConfig,
    benchmark: &str,
    alternatives: &[String],
    bracket_hi: f64,
) -> Result<(), CliError> {
    let loaded = load(config)?;
    let find = |name: &str| {
        loaded
            .models
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| CliError::Usage(format!("unknown model `{name}`")))
    };
    let bench_idx = find(benchmark)?;
    let alt_idx: Vec<usize> = if alternatives.is_empty() {
        (0..loaded.models.len()).filter(|&i| i != bench_idx).collect()
    } else {
        alternatives.iter().map(|a| find(a)).collect::<Result<_, _>>()?
    };
    let pool = pool(config.jobs)?;
    let fits = fit_all(&pool, &loaded)?;
    let bench_ad = equiv::ad_at(&fits[bench_idx], 0.0)?.ad;
    let mut results: Vec<Result<equiv::EquivResult, Error>> = pool.install(|| {
        alt_idx
            .par_iter()
            .map(|&i| solve_equiv_fit(&fits[i], benchmark, bench_ad, bracket_hi))
            .collect()
    });
    // Bracketing failures are reported per row; anything else aborts.
    if let Some(pos) = results
        .iter()
        .position(|r| matches!(r, Err(e) if !matches!(e, Error::NotBracketed { .. })))
    {
        return Err(results.swap_remove(pos).unwrap_err().into());
    }
    let meta = metadata(
        "equiv",
        config,
        &[("benchmark", benchmark.to_string()), ("bracket_hi", sig6(bracket_hi))],
    )?;
    let csv = equiv::equiv_csv(
        alt_idx
            .iter()
            .zip(&results)
            .map(|(&i, r)| (loaded.models[i].name.as_str(), benchmark, bench_ad, r)),
        &meta,
    );
    write_outputs(&config.output_dir, &[("equiv.csv".into(), csv)])
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of months.
    #[arg(long = "t", default_value_t = 600)]
    pub t: usize,
    /// Number of portfolios.
    #[arg(long = "n", default_value_t = 25)]
    pub n: usize,
    /// Number of factors.
    #[arg(long = "k", default_value_t = 3)]
    pub k: usize,
    /// Average true alpha, percent per month.
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Multiplier on the residual covariance.
    #[arg(long, default_value_t = 1.0)]
    pub resid_scale: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut cfg = SynthConfig::simple(args.t, args.n, args.k, args.alpha, args.seed);
    if !(args.resid_scale > 0.0) {
        return Err(Error::BadConfig(format!("resid-scale must be positive, got {}", args.resid_scale)).into());
    }
    cfg.resid_cov = cfg.resid_cov.scaled(args.resid_scale);
    for w in cfg.warnings() {
        eprintln!("assetdist: warning: {w}");
    }
    let ds = synth::generate(&cfg)?;
    let meta = format!(
        "assetdist {}; command=synth; generator={}; seed={}; T={}; n={}; k={}; alpha={}; resid_scale={}",
        env!("CARGO_PKG_VERSION"),
        synth::GENERATOR,
        args.seed,
        args.t,
        args.n,
        args.k,
        sig6(args.alpha),
        sig6(args.resid_scale)
    );
    // Portfolio returns are already excess; a zero RF column lets the files go
    // through the standard ingestion path unchanged.
    let f = &ds.factors;
    let mut names = f.names().to_vec();
    names.push("RF".into());
    let values = f.values().clone().insert_column(f.n_cols(), 0.0);
    let factors = ReturnsPanel::new(f.dates().to_vec(), names, values)?;

    let mut models = format!("# {meta}\n");
    for j in 1..=args.k {
        let list: Vec<String> = (1..=j).map(|i| format!("F{i}")).collect();
        models.push_str(&format!("K{j} = {}\n", list.join(",")));
    }
    write_outputs(
        &args.out,
        &[
            ("portfolios.csv".into(), ds.portfolios.to_csv_string(Some(&meta))),
            ("factors.csv".into(), factors.to_csv_string(Some(&meta))),
            ("models.txt".into(), models),
        ],
    )
}
