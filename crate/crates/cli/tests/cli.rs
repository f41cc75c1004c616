use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_assetdist"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn assetdist")
}

fn synth(dir: &Path, seed: &str) -> PathBuf {
    let data = dir.join("data");
    let out = run(&[
        "synth", "--out", data.to_str().unwrap(), "--t", "240", "--n", "6", "--k", "3", "--alpha", "0.25",
        "--seed", seed,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

fn data_args(data: &Path, models: &Path, out: &Path) -> Vec<String> {
    vec![
        "--portfolios".into(),
        data.join("portfolios.csv").display().to_string(),
        "--factors".into(),
        data.join("factors.csv").display().to_string(),
        "--models".into(),
        models.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ]
}

fn run_cmd(cmd: &str, args: &[String], extra: &[&str]) -> Output {
    let mut c = bin();
    c.arg(cmd).args(args).args(extra);
    c.output().expect("spawn assetdist")
}

/// Data rows of a CSV output, skipping the metadata comment.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn synth_then_rank_single_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "3");
    let models = tmp.path().join("capm.txt");
    fs::write(&models, "CAPM = F1\n").unwrap();
    let out = tmp.path().join("out");
    let res = run_cmd("rank", &data_args(&data, &models, &out), &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap();
    assert!(meta.starts_with("# assetdist "));
    assert!(meta.contains("sha256="));
    assert_eq!(
        lines.next().unwrap(),
        "model,n,T,k,TD,AD,RMSE_alpha,RMSE_sigma,ratio,GRS,GRS_pvalue,MAE,MAE_over_AR,mean_R2"
    );
    let r = rows(&out.join("report.csv"));
    assert_eq!(r.len(), 1);
    assert_eq!(&r[0][..4], ["CAPM", "6", "240", "1"]);
    let td: f64 = r[0][4].parse().unwrap();
    let ad: f64 = r[0][5].parse().unwrap();
    assert!((ad - td / 6f64.sqrt()).abs() < 1e-5);
    assert_eq!(rows(&out.join("marginal_CAPM.csv")).len(), 6);
}

#[test]
fn outputs_are_deterministic_and_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "11");
    let models = data.join("models.txt");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    for (dir, jobs) in [(&a, "1"), (&b, "1"), (&c, "4")] {
        let res = run_cmd("sweep", &data_args(&data, &models, dir), &["--jobs", jobs]);
        assert!(res.status.success());
        let res = run_cmd("rank", &data_args(&data, &models, dir), &["--jobs", jobs]);
        assert!(res.status.success());
    }
    for f in ["report.csv", "sweep.csv", "marginal_K1.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} rerun");
        assert_eq!(x, fs::read(c.join(f)).unwrap(), "{f} jobs");
    }

    // The synthetic generator itself is reproducible.
    let again = tempfile::tempdir().unwrap();
    let data2 = synth(again.path(), "11");
    for f in ["portfolios.csv", "factors.csv", "models.txt"] {
        assert_eq!(fs::read(data.join(f)).unwrap(), fs::read(data2.join(f)).unwrap());
    }
}

#[test]
fn unknown_factor_is_user_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "5");
    let models = tmp.path().join("bad.txt");
    fs::write(&models, "GOOD = F1\nBAD = F1,UMD\n").unwrap();
    let out = tmp.path().join("out");
    let res = run_cmd("rank", &data_args(&data, &models, &out), &[]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("UMD"), "{err}");
    assert!(!out.join("report.csv").exists());
}

#[test]
fn missing_input_file_is_user_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "5");
    let res = run_cmd(
        "rank",
        &data_args(&data, &tmp.path().join("nope.txt"), &tmp.path().join("out")),
        &[],
    );
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn zero_grid_sweep_matches_rank() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "9");
    let models = data.join("models.txt");
    let out = tmp.path().join("out");
    assert!(run_cmd("rank", &data_args(&data, &models, &out), &[]).status.success());
    assert!(run_cmd("sweep", &data_args(&data, &models, &out), &["--grid", "0"]).status.success());

    let report = rows(&out.join("report.csv"));
    let sweep = rows(&out.join("sweep.csv"));
    assert_eq!(sweep.len(), report.len());
    for s in &sweep {
        assert_eq!(s[1], "0");
        let r = report.iter().find(|r| r[0] == s[0]).unwrap();
        assert_eq!(s[2], r[5], "AD for {}", s[0]);
    }
}

#[test]
fn empty_grid_is_user_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "9");
    let models = data.join("models.txt");
    let out = tmp.path().join("out");
    let res = run_cmd("sweep", &data_args(&data, &models, &out), &["--grid="]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn equiv_against_itself_and_unbracketed() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "13");
    let models = data.join("models.txt");
    let out = tmp.path().join("out");
    let res = run_cmd("equiv", &data_args(&data, &models, &out), &["--benchmark", "K3", "--alt", "K3"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let r = rows(&out.join("equiv.csv"));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(r[0][6], "true");

    // A bracket too narrow to reach the benchmark's AD is flagged, not fatal.
    let res = run_cmd(
        "equiv",
        &data_args(&data, &models, &out),
        &["--benchmark", "K1", "--alt", "K3", "--bracket-hi", "0.000001"],
    );
    let r = rows(&out.join("equiv.csv"));
    if res.status.success() && r[0][7] == "ok" {
        // K3 already at or below K1's AD at sigma = 0; nothing to flag.
        assert!(r[0][3].parse::<f64>().unwrap() <= 1e-6);
    } else {
        assert!(res.status.success());
        assert_eq!(r[0][7], "not_bracketed");
        assert_eq!(r[0][6], "false");
    }
}

#[test]
fn help_exits_zero() {
    assert!(run(&["--help"]).status.success());
    assert_eq!(run(&["rank"]).status.code(), Some(1));
}
