//! End-to-end behaviour of the experiment runner and the check helpers.

use std::path::Path;
use std::process::Command;

use convlab::checks::{
    compare_runs, dominance_report, mc_hjb_case, mc_hjb_model, oracle_deviations, ORACLE_GROWTH_TOL, ORACLE_WEIGHT_TOL,
};
use convlab::config::{Experiment, ExperimentConfig};
use convlab::experiments::{linspace, run_experiment};
use convlab_core::model::{presets, Model};

fn convlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_convlab"))
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

#[test]
fn corrupted_growth_constant_fails_the_oracle_check() {
    let clean = oracle_deviations(200, 5, None).unwrap();
    assert!(clean.weights < ORACLE_WEIGHT_TOL && clean.growth < ORACLE_GROWTH_TOL);
    let bad = oracle_deviations(200, 5, Some(|c| c.theta1[0] *= 1.01)).unwrap();
    assert!(bad.growth > ORACLE_GROWTH_TOL, "{bad:?}");
}

#[test]
fn full_information_consistency_holds_across_seeds() {
    let model = mc_hjb_model().unwrap();
    for seed in [11, 12, 13, 14, 15] {
        let case = mc_hjb_case(&model, seed, 0.5, 0, 20_000).unwrap();
        assert!(case.z().abs() <= 3.0, "seed {seed}: {case:?}");
    }
}

#[test]
fn value_gaps_grow_with_positive_spread_and_horizon() {
    let model = Model::new(presets::fig2()).unwrap();
    let taus: Vec<f64> = (1..=50).map(|k| 2.0 * k as f64 / 50.0).collect();
    let rep = dominance_report(&model, &linspace(0.0, 1.0, 50), &taus).unwrap();
    assert_eq!(rep.switching_below_averaged, 0);
    assert_eq!(rep.unrestricted_below_beta, 0);
    for (name, right, _) in &rep.x_monotonicity {
        assert_eq!(*right, 0, "{name}");
    }
    for (name, n) in &rep.tau_monotonicity {
        assert_eq!(*n, 0, "{name}");
    }
}

#[test]
fn value_gap_vertex_sits_left_of_zero() {
    // The constant spread drift shifts the vertex of each gap off x = 0.
    let model = Model::new(presets::fig2()).unwrap();
    let rep = dominance_report(&model, &linspace(-0.2, 0.2, 401), &[2.0]).unwrap();
    assert!(rep.gap_minimiser < -0.01, "{}", rep.gap_minimiser);
}

#[test]
fn fig2_columns_dominate_pointwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::named(Experiment::Fig2).unwrap();
    let run = run_experiment(&cfg, dir.path()).unwrap();
    for file in ["value_vs_x.csv", "value_vs_time_to_go.csv"] {
        let (header, rows) = read_csv(&run.dir.join(file));
        assert_eq!(
            header[1..],
            [
                "switching_unrestricted",
                "averaged_unrestricted",
                "switching_beta_neutral",
                "averaged_beta_neutral"
            ]
        );
        assert_eq!(rows.len(), 50);
        for r in &rows {
            assert!(
                r[1] >= r[2] && r[3] >= r[4],
                "switching below averaged in {file}: {r:?}"
            );
            assert!(
                r[1] >= r[3] && r[2] >= r[4],
                "unrestricted below beta-neutral in {file}: {r:?}"
            );
        }
    }
}

#[test]
fn fig4_loss_surface_is_nonnegative_with_interior_peak() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::named(Experiment::Fig4).unwrap();
    let run = run_experiment(&cfg, dir.path()).unwrap();
    let (header, rows) = read_csv(&run.dir.join("loss.csv"));
    assert_eq!(header, ["t", "p", "x", "l"]);
    assert_eq!(rows.len(), 101 * 101);
    assert!(rows.iter().all(|r| r[3] >= -1e-4));
    let first: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] == 0.0).collect();
    let peak = first.iter().fold(first[0], |a, r| if r[3] > a[3] { r } else { a });
    assert!(peak[1] > 0.0 && peak[1] < 1.0, "peak at p = {}", peak[1]);
    let (header, _) = read_csv(&run.dir.join("partial_value.csv"));
    assert_eq!(header, ["t", "p", "mbar", "nbar", "ubar"]);
}

#[test]
fn fig1_and_fig3_write_weight_series() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_experiment(&ExperimentConfig::named(Experiment::Fig1).unwrap(), dir.path()).unwrap();
    let (header, rows) = read_csv(&run.dir.join("weights.csv"));
    assert_eq!(
        header[..7],
        [
            "t",
            "state",
            "X",
            "h1_unrestricted",
            "h2_unrestricted",
            "hm_unrestricted",
            "cash_unrestricted"
        ]
    );
    assert_eq!(rows.len(), 1001);
    let (_, path) = read_csv(&run.dir.join("path.csv"));
    for (a, b) in rows.iter().zip(&path) {
        assert_eq!(a[2], b[6], "weights and path disagree on X");
    }

    let run = run_experiment(&ExperimentConfig::named(Experiment::Fig3).unwrap(), dir.path()).unwrap();
    let (header, rows) = read_csv(&run.dir.join("information_weights.csv"));
    assert_eq!(header[3], "pi_1");
    // The filter starts at the known initial regime, so both rules agree.
    for c in 4..8 {
        assert!((rows[0][c] - rows[0][c + 4]).abs() < 1e-12);
    }
    assert!(rows.iter().any(|r| (r[4] - r[8]).abs() > 1e-6));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let status = convlab()
            .args(["run", "fig1", "--seed", "7", "--out"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap()
            .status;
        assert!(status.success());
    }
    let files: Vec<String> = ["path.csv", "weights.csv", "config.toml", "meta.json"]
        .map(String::from)
        .to_vec();
    let a = dir.path().join("a/fig1");
    assert!(compare_runs(&a, &dir.path().join("b/fig1"), &files).unwrap().is_empty());

    // A different seed changes the path but not the layout.
    let status = convlab()
        .args(["run", "fig1", "--seed", "8", "--out"])
        .arg(dir.path().join("c"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let differing = compare_runs(&a, &dir.path().join("c/fig1"), &files).unwrap();
    assert!(differing.contains(&"path.csv".to_string()));

    // Replaying the emitted config reproduces the run.
    let status = convlab()
        .args(["run", "fig1", "--config"])
        .arg(a.join("config.toml"))
        .arg("--out")
        .arg(dir.path().join("d"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(compare_runs(&a, &dir.path().join("d/fig1"), &files).unwrap().is_empty());
}

#[test]
fn metadata_records_seed_fingerprint_and_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::named(Experiment::Fig3).unwrap();
    cfg.seed = 42;
    let run = run_experiment(&cfg, dir.path()).unwrap();
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["fingerprint"], cfg.params.fingerprint());
    assert!(meta["rng"].as_str().unwrap().contains("ChaCha8"));
    assert!(meta["assumptions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a.as_str().unwrap().contains("b1 = 0.3")));
    let files: Vec<&str> = meta["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    for f in &files {
        assert!(run.dir.join(f).exists(), "{f}");
    }
}

#[test]
fn custom_experiment_uses_config_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("custom.toml");
    let text = ExperimentConfig::named(Experiment::Fig4)
        .unwrap()
        .to_toml_string()
        .unwrap();
    std::fs::write(&cfg_path, text.replace("n_paths = 20000", "n_paths = 100")).unwrap();
    let out = convlab()
        .args(["run", "custom", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "path.csv",
        "weights.csv",
        "full_value_unrestricted.csv",
        "filter.csv",
        "loss.csv",
        "meta.json",
    ] {
        assert!(dir.path().join("custom").join(f).exists(), "{f}");
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[run]\nn_p = 3\n").unwrap();
    let out = convlab().args(["run", "fig1", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.n_p"));

    let out = convlab().args(["run", "fig9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = convlab()
        .args(["run", "custom", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = convlab().args(["weights", "--x-grid", "1:2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn weights_command_prints_csv() {
    let out = convlab()
        .args([
            "weights",
            "--x-grid",
            "-1:1:5",
            "--experiment",
            "fig3",
            "--p-grid",
            "0:1:3",
            "--strategy",
            "beta-neutral",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "information,state,x,h1,h2,hm,cash");
    assert_eq!(lines.len(), 1 + 2 * 5 + 3 * 5);
    // Beta-neutral rows carry no market exposure through the stock legs.
    let p = presets::fig3();
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').skip(3).map(|s| s.parse().unwrap()).collect();
        assert!((p.beta1 * v[0] + p.beta2 * v[1]).abs() < 1e-12);
    }
}
