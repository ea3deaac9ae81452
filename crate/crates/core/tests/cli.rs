use std::path::Path;
use std::process::{Command, Output};

use spectest::harness::CSV_HEADER;
use spectest::TimeSeriesPanel;

fn spectest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectest"))
        .args(args)
        .env_remove("SPECTEST_SEED")
        .output()
        .expect("binary runs")
}

fn json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&output.stdout)))
}

fn write_rows(path: &Path, rows: impl Iterator<Item = Vec<f64>>) {
    let text: String = rows
        .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(path, format!("a,b\n{text}")).unwrap();
}

#[test]
fn simulate_then_test() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("panel.csv");
    let csv_str = csv.to_str().unwrap();
    let out = spectest(&["simulate", "--model", "AR3", "--innovation", "logistic", "--n", "120", "--seed", "7", "--out", csv_str]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let panel = TimeSeriesPanel::read_csv_path(&csv, 1, 2).unwrap();
    assert_eq!(panel.n(), 120);

    let again = dir.path().join("again.csv");
    spectest(&["simulate", "--model", "AR3", "--innovation", "logistic", "--n", "120", "--seed", "7", "--out", again.to_str().unwrap()]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&again).unwrap());

    let out = spectest(&["test", "--input", csv_str, "--p", "1", "--q", "2", "--kind", "studentized", "--B", "99", "--seed", "42", "--cv"]);
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 10, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    for key in ["statistic", "mu_hat", "tau_hat_sq", "decision", "alpha", "h", "n", "p", "q", "seed", "B", "p_value"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["B"], 99);
    assert_eq!(report["seed"], 42);
    assert_eq!(report["n"], 120);
    assert_eq!(report["kind"], "rand-studentized");
    assert_eq!(code == 10, report["decision"] == "reject");
}

#[test]
fn exit_codes_follow_the_decision() {
    let dir = tempfile::tempdir().unwrap();
    let twins = dir.path().join("twins.csv");
    write_rows(&twins, (0..64).map(|t| {
        let x = ((t * 37 % 11) as f64 - 5.0) / 3.0;
        vec![x, x]
    }));
    let out = spectest(&["test", "--input", twins.to_str().unwrap(), "--p", "1", "--q", "2", "--kind", "uncentered", "--B", "19", "--bandwidth", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["p_value"], 1.0);

    let skewed = dir.path().join("skewed.csv");
    let sim = dir.path().join("noise.csv");
    spectest(&["simulate", "--model", "AR1", "--n", "200", "--seed", "3", "--out", sim.to_str().unwrap()]);
    let noise = TimeSeriesPanel::read_csv_path(&sim, 1, 2).unwrap();
    write_rows(&skewed, (0..200).map(|t| vec![noise.data()[(t, 0)], 6.0 * noise.data()[(t, 1)]]));
    let out = spectest(&["test", "--input", skewed.to_str().unwrap(), "--p", "1", "--q", "2", "--kind", "uncentered", "--B", "99", "--bandwidth", "0.4"]);
    assert_eq!(out.status.code(), Some(10), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["decision"], "reject");

    let out = spectest(&["test", "--input", skewed.to_str().unwrap(), "--p", "1", "--q", "2", "--kind", "asymptotic", "--bandwidth", "0.4"]);
    assert_eq!(out.status.code(), Some(10));
    assert!(json(&out)["critical_value"].as_f64().unwrap() > 1.64);
}

#[test]
fn errors_exit_nonzero() {
    let out = spectest(&["test", "--input", "/no/such/file.csv", "--p", "1", "--q", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.csv"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n5,6\n7,8\n").unwrap();
    let out = spectest(&["test", "--input", bad.to_str().unwrap(), "--p", "1", "--q", "2", "--bandwidth", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 2") && stderr.contains("column 2"), "{stderr}");

    let out = spectest(&["simulate", "--model", "AR9", "--n", "50"]);
    assert_eq!(out.status.code(), Some(1));
    let out = spectest(&["test", "--input", bad.to_str().unwrap(), "--p", "1", "--q", "2", "--bandwidth", "0.5", "--cv"]);
    assert!(!out.status.success());
}

#[test]
fn experiment_honours_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    std::fs::write(
        &config,
        "[experiment]\nmodels = MA1\nsample_sizes = 40\nalphas = 0.1\nreplications = 50\ndraws = 19\nseed = 5\ntests = phi_n, phi_n_star\n",
    )
    .unwrap();
    let run = |name: &str, seed: Option<&str>| -> String {
        let out_path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_spectest"));
        cmd.args(["experiment", "--config", config.to_str().unwrap(), "--out", out_path.to_str().unwrap(), "--workers", "2"]);
        match seed {
            Some(s) => cmd.env("SPECTEST_SEED", s),
            None => cmd.env_remove("SPECTEST_SEED"),
        };
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_path).unwrap()
    };
    let plain = run("a.csv", None);
    let overridden = run("b.csv", Some("99"));
    assert!(plain.starts_with(CSV_HEADER));
    assert_eq!(plain.lines().count(), 3);
    assert!(plain.lines().nth(1).unwrap().contains(",5,"));
    assert!(overridden.lines().nth(1).unwrap().contains(",99,"));
    assert_eq!(run("c.csv", Some("99")), overridden);
}
