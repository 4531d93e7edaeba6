use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sgpca::theory::{
    iteration_thresholds, lemma1_bounds, resolved_thresholds, theorem1_rate, SparsityModel,
};
use sgpca_cli::{read_matrix, RunManifest};
use tempfile::TempDir;

fn sgpca(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgpca"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = sgpca(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_sim(dir: &Path) {
    ok(
        dir,
        &[
            "simulate",
            "--G",
            "20",
            "--T",
            "5",
            "--spikes",
            "8",
            "--active-frac",
            "0.1",
            "--within-frac",
            "0.6",
            "--n",
            "60",
            "--seed",
            "3",
            "--out",
            "sim",
        ],
    );
}

#[test]
fn simulate_preset_dimensions() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate", "--preset", "2ii", "--n", "100", "--seed", "1", "--out", "s",
        ],
    );
    let x = read_matrix(dir.path().join("s/X.csv"), false).unwrap();
    assert_eq!(x.values.dim(), (100, 3000));
    let truth = read_matrix(dir.path().join("s/truth_loadings.csv"), true).unwrap();
    assert_eq!(truth.values.dim(), (3000, 1));
    let nonzero = truth.values.iter().filter(|&&v| v != 0.0).count();
    assert_eq!(nonzero, 24);
    let m = RunManifest::read(&dir.path().join("s/manifest.json")).unwrap();
    assert_eq!(m.seed, Some(1));
    assert_eq!(m.params["preset"], "2ii");
}

#[test]
fn theory_table_matches_library() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        dir.path(),
        &[
            "theory",
            "--r",
            "1",
            "--mG",
            "1",
            "--lambda2",
            "5",
            "--G",
            "300",
            "--T",
            "10",
            "--n",
            "100",
            "--out",
            "theory.csv",
        ],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "alpha_n",
        "beta_n",
        "eta_n",
        "tau_n",
        "bound_groups",
        "bound_support",
        "rate_total",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
    let rows: Vec<(String, f64)> = fs::read_to_string(dir.path().join("theory.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect();
    let get = |k: &str| rows.iter().find(|r| r.0 == k).unwrap().1;

    let model = SparsityModel::new(1.0, 1.0, 5.0, 300.0, 10.0, 100.0).unwrap();
    let (a, b, card) = resolved_thresholds(&model).unwrap();
    let (e, t) = iteration_thresholds(&model, a, b);
    let (bg, bs) = lemma1_bounds(&model, a, b, card).unwrap();
    let rate = theorem1_rate(&model).unwrap();
    assert_eq!(get("alpha_n"), a);
    assert_eq!(get("beta_n"), b);
    assert_eq!(get("eta_n"), e);
    assert_eq!(get("tau_n"), t);
    assert_eq!(get("bound_groups"), bg);
    assert_eq!(get("bound_support"), bs);
    assert_eq!(get("rate_total"), rate.total());

    // independent evaluation of the closed forms
    let h = 25.0 / 6.0;
    let alpha = (300f64.ln() / (100.0 * h)).sqrt();
    assert!((get("alpha_n") - alpha).abs() < 1e-12);
    assert_eq!(get("card_groups"), (1.0 / alpha).floor());
    let beta = ((10.0 * (1.0 / alpha).floor()).ln() / (100.0 * h)).sqrt();
    assert!((get("beta_n") - beta).abs() < 1e-12);
    assert!((get("eta_n") - alpha / 10f64.sqrt()).abs() < 1e-12);
}

#[test]
fn tune_rerun_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    small_sim(dir.path());
    let args = |out: &'static str| {
        vec![
            "tune",
            "--input",
            "sim/X.csv",
            "--groups",
            "sim/groups.csv",
            "--J",
            "1",
            "--etas",
            "0,0.05,0.1",
            "--taus",
            "0,0.02,0.05",
            "--rho",
            "0.5",
            "--B",
            "20",
            "--seed",
            "7",
            "--pi",
            "1",
            "--omega",
            "0.5",
            "--out",
            out,
        ]
    };
    ok(dir.path(), &args("a"));
    ok(dir.path(), &args("b"));
    for name in [
        "loadings.csv",
        "scores.csv",
        "support.csv",
        "alignment_report.csv",
        "alignment_pc1.svg",
        "alignment_pc1.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let report = fs::read_to_string(dir.path().join("a/alignment_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 9);
    let m = RunManifest::read(&dir.path().join("a/manifest.json")).unwrap();
    assert_eq!(m.tuning, "tuned");
    assert_eq!(m.inputs.len(), 2);
    assert!(m.inputs.values().all(|d| d.len() == 64));
}

#[test]
fn fit_then_eval() {
    let dir = TempDir::new().unwrap();
    small_sim(dir.path());
    ok(
        dir.path(),
        &[
            "fit",
            "--input",
            "sim/X.csv",
            "--groups",
            "sim/groups.csv",
            "--eta",
            "0.2",
            "--tau",
            "0.1",
            "--pi",
            "1",
            "--omega",
            "0.5",
            "--out",
            "fit",
        ],
    );
    let m = RunManifest::read(&dir.path().join("fit/manifest.json")).unwrap();
    assert_eq!(m.tuning, "untuned");
    assert!(!dir.path().join("fit/alignment_report.csv").exists());
    let scores = read_matrix(dir.path().join("fit/scores.csv"), true).unwrap();
    assert_eq!(scores.values.dim(), (60, 1));

    ok(
        dir.path(),
        &[
            "eval",
            "--estimates",
            "fit/loadings.csv",
            "--truth",
            "sim/truth_loadings.csv",
            "--out",
            "fit/eval.csv",
        ],
    );
    let eval = fs::read_to_string(dir.path().join("fit/eval.csv")).unwrap();
    let lines: Vec<&str> = eval.lines().collect();
    assert_eq!(lines[0], "component,alignment,type1,type2,distance");
    assert_eq!(lines.len(), 3);
    let align: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(align > 0.8, "alignment {align}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(sgpca(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        sgpca(dir.path(), &["simulate", "--preset", "9z"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(sgpca(dir.path(), &["--help"]).status.code(), Some(0));

    fs::write(dir.path().join("bad.csv"), "1,2\n3\n").unwrap();
    fs::write(dir.path().join("g.csv"), "0,a\n1,a\n").unwrap();
    let out = sgpca(
        dir.path(),
        &[
            "fit", "--input", "bad.csv", "--groups", "g.csv", "--eta", "0", "--tau", "0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv"));

    // thresholds that zero every iterate
    small_sim(dir.path());
    let out = sgpca(
        dir.path(),
        &[
            "fit",
            "--input",
            "sim/X.csv",
            "--groups",
            "sim/groups.csv",
            "--eta",
            "100",
            "--tau",
            "100",
            "--pi",
            "1",
            "--omega",
            "0.5",
            "--out",
            "f",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold-too-large"));
}
