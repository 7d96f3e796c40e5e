//! End-to-end runs of the csids binary on a synthetic traffic fixture.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_csids");
const FEATURE_COUNT: usize = 41;

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    fn unit(&mut self) -> f64 {
        (self.next() % 1_000_000) as f64 / 1_000_000.0
    }
}

/// One synthetic connection line. Field 0 and field 4 carry a class signal;
/// the rest is low-amplitude noise.
fn record_line(rng: &mut Lcg, attack: &str, class_index: usize) -> String {
    let mut fields: Vec<String> = Vec::with_capacity(FEATURE_COUNT + 1);
    for f in 0..FEATURE_COUNT {
        match f {
            0 => fields.push(format!("{:.4}", class_index as f64 * 3.0 + rng.unit())),
            1 => fields.push(["tcp", "udp", "icmp"][(rng.next() % 3) as usize].to_string()),
            2 => fields.push(["http", "smtp", "ftp"][(rng.next() % 3) as usize].to_string()),
            3 => fields.push(["SF", "REJ"][(rng.next() % 2) as usize].to_string()),
            4 => fields.push(format!(
                "{:.4}",
                (class_index * class_index) as f64 + rng.unit()
            )),
            _ => fields.push(format!("{:.4}", rng.unit())),
        }
    }
    fields.push(format!("{attack}."));
    fields.join(",")
}

/// Training mix covering all five categories with builtin attack names.
const TRAIN_MIX: &[(&str, usize, usize)] = &[
    ("normal", 0, 120),
    ("ipsweep", 1, 40),
    ("smurf", 2, 60),
    ("buffer_overflow", 3, 12),
    ("guess_passwd", 4, 20),
];

/// Test mix adds two attack names absent from training (apache2, mscan).
const TEST_MIX: &[(&str, usize, usize)] = &[
    ("normal", 0, 60),
    ("ipsweep", 1, 20),
    ("smurf", 2, 30),
    ("buffer_overflow", 3, 6),
    ("guess_passwd", 4, 10),
    ("apache2", 2, 8),
    ("mscan", 1, 5),
];

fn write_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut rng = Lcg(0x5eed);
    let mut train = String::new();
    for &(attack, class, count) in TRAIN_MIX {
        for _ in 0..count {
            train.push_str(&record_line(&mut rng, attack, class));
            train.push('\n');
        }
    }
    let mut test = String::new();
    for &(attack, class, count) in TEST_MIX {
        for _ in 0..count {
            test.push_str(&record_line(&mut rng, attack, class));
            test.push('\n');
        }
    }
    let train_path = dir.join("train.csv");
    let test_path = dir.join("test.csv");
    std::fs::write(&train_path, train).unwrap();
    std::fs::write(&test_path, test).unwrap();
    (train_path, test_path)
}

fn write_config(dir: &Path, out_name: &str, family: &str, extra: &str) -> PathBuf {
    let config = format!(
        r#"{{
  "seed": 42,
  "paths": {{
    "train": "{}",
    "test": "{}",
    "output_dir": "{}"
  }},
  "model": {{ "family": "{family}", "epochs": 40, "em_iterations": 50 }},
  "bootstrap": {{ "resamples": 200 }}{extra}
}}"#,
        dir.join("train.csv").display(),
        dir.join("test.csv").display(),
        dir.join(out_name).display(),
    );
    let path = dir.join(format!("config-{out_name}.json"));
    std::fs::write(&path, config).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn config_arg(path: &Path) -> String {
    path.display().to_string()
}

#[test]
fn full_pipeline_produces_reports() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let config = write_config(dir.path(), "out", "gmm", "");
    let c = config_arg(&config);

    run_ok(&["prepare", "--config", &c]);
    let out = dir.path().join("out");
    for name in [
        "encoder.json",
        "train.csidc",
        "test1.csidc",
        "test2.csidc",
        "counts.json",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    assert!(out.join("manifest-prepare.json").exists());
    assert!(!out.join(".csids.lock").exists(), "lock not released");

    let counts: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("counts.json")).unwrap()).unwrap();
    let datasets = counts["datasets"].as_array().unwrap();
    assert_eq!(datasets[0]["name"], "train");
    assert_eq!(datasets[0]["total_normal"], 120);
    assert_eq!(datasets[0]["total_attacks"], 132);
    // test-1 holds everything; test-2 drops the two novel attack names.
    assert_eq!(datasets[1]["name"], "test-1");
    assert_eq!(datasets[1]["dos"], 38);
    assert_eq!(datasets[2]["name"], "test-2");
    assert_eq!(datasets[2]["dos"], 30);
    assert_eq!(datasets[2]["probe"], 20);

    run_ok(&["train", "--config", &c]);
    assert!(out.join("model.json").exists());

    run_ok(&["evaluate", "--config", &c]);
    for name in [
        "evaluate-test1.csv",
        "evaluate-test1.json",
        "evaluate-test2.csv",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let csv = std::fs::read_to_string(out.join("evaluate-test2.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "alpha,mode,mu,ci_low,ci_high,dr,fa,dr_probe,dr_dos,dr_u2r,dr_r2l"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with(",weighted,"));
    assert!(lines[2].starts_with(",unweighted,"));

    run_ok(&["sweep-alpha", "--config", &c]);
    let sweep = std::fs::read_to_string(out.join("sweep-test2.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 11); // header + 10 alphas
    let first_row = sweep.lines().nth(1).unwrap();
    assert!(first_row.starts_with("1,weighted,"));
}

#[test]
fn prepare_and_train_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let config_a = write_config(dir.path(), "a", "gmm", "");
    let config_b = write_config(dir.path(), "b", "gmm", "");

    for c in [&config_a, &config_b] {
        run_ok(&["prepare", "--config", &config_arg(c)]);
        run_ok(&["train", "--config", &config_arg(c)]);
        run_ok(&["evaluate", "--config", &config_arg(c)]);
    }
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for name in [
        "train.csidc",
        "test1.csidc",
        "test2.csidc",
        "encoder.json",
        "model.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    // Reports are reproducible too (manifests differ only in timing).
    assert_eq!(
        std::fs::read(a.join("evaluate-test2.csv")).unwrap(),
        std::fs::read(b.join("evaluate-test2.csv")).unwrap()
    );
}

#[test]
fn model_files_record_the_family_structure() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    for (family, key, expected) in [
        ("linear", "hidden_units", 0u64),
        ("naive-bayes", "components", 1u64),
    ] {
        let config = write_config(dir.path(), family, family, "");
        let c = config_arg(&config);
        run_ok(&["prepare", "--config", &c]);
        run_ok(&["train", "--config", &c]);
        let doc: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(family).join("model.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(doc["family"], family);
        let section = if family == "linear" { "mlp" } else { "gmm" };
        assert_eq!(doc["hyper"][section][key], expected);
    }
}

#[test]
fn sweep_single_alpha_matches_evaluate_under_the_same_matrix() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let config = write_config(dir.path(), "single", "gmm", "");
    let c = config_arg(&config);
    run_ok(&["prepare", "--config", &c]);
    run_ok(&["train", "--config", &c]);
    run_ok(&[
        "sweep-alpha",
        "--config",
        &c,
        "--alpha-min",
        "3",
        "--alpha-max",
        "3",
    ]);

    // Evaluate against the same α=3 matrix loaded from a file.
    let out = dir.path().join("single");
    let matrix = "# cost-matrix rows=prediction cols=truth\n\
                  0,3,3,3,3\n1,0,0,0,0\n1,0,0,0,0\n1,0,0,0,0\n1,0,0,0,0\n";
    let matrix_path = dir.path().join("alpha3.csv");
    std::fs::write(&matrix_path, matrix).unwrap();
    let config2 = dir.path().join("config-single2.json");
    let text = std::fs::read_to_string(&config).unwrap().replace(
        "\"paths\": {",
        &format!(
            "\"paths\": {{\n    \"cost_matrix\": \"{}\",",
            matrix_path.display()
        ),
    );
    std::fs::write(&config2, text).unwrap();
    run_ok(&["evaluate", "--config", &config_arg(&config2)]);

    let sweep = std::fs::read_to_string(out.join("sweep-test1.csv")).unwrap();
    let eval = std::fs::read_to_string(out.join("evaluate-test1.csv")).unwrap();
    let sweep_row: Vec<&str> = sweep.lines().nth(1).unwrap().split(',').collect();
    let eval_row: Vec<&str> = eval.lines().nth(1).unwrap().split(',').collect();
    // Same mu, dr, fa and per-class columns; only the alpha cell differs.
    assert_eq!(sweep_row[1..], eval_row[1..]);
}

#[test]
fn crossval_writes_reports_and_winners() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let config = write_config(
        dir.path(),
        "cv",
        "naive-bayes",
        ",\n  \"crossval\": { \"folds\": 3 }",
    );
    let c = config_arg(&config);
    run_ok(&["prepare", "--config", &c]);
    run_ok(&["crossval", "--config", &c, "--subsample", "150"]);

    let out = dir.path().join("cv");
    let report = std::fs::read_to_string(out.join("cv-report.csv")).unwrap();
    assert!(report.starts_with("stage,candidate,fold,score\n"));
    // Two stages (θ, T) with 4 candidates each over 3 folds.
    assert_eq!(report.lines().count(), 1 + 2 * 4 * 3);

    let winners: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("cv-winners.json")).unwrap())
            .unwrap();
    assert_eq!(winners["model"]["family"], "naive-bayes");
    assert_eq!(winners["model"]["components"], 1);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("cv-summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["outcome"]["stages"].as_array().unwrap().len(), 2);

    // Determinism of the selection.
    let rerun_dir = dir.path().join("cv2");
    let text = std::fs::read_to_string(&config).unwrap().replace(
        &dir.path().join("cv").display().to_string(),
        &rerun_dir.display().to_string(),
    );
    let config2 = dir.path().join("config-cv2.json");
    std::fs::write(&config2, text).unwrap();
    run_ok(&[
        "crossval",
        "--config",
        &config_arg(&config2),
        "--subsample",
        "150",
    ]);
    assert_eq!(
        std::fs::read(out.join("cv-winners.json")).unwrap(),
        std::fs::read(rerun_dir.join("cv-winners.json")).unwrap()
    );
}

#[test]
fn error_paths_use_the_exit_code_contract() {
    let dir = tempfile::tempdir().unwrap();
    let (train_path, _) = write_fixture(dir.path());
    let config = write_config(dir.path(), "err", "gmm", "");
    let c = config_arg(&config);

    // Unknown config key: usage error (1).
    let bad_config = dir.path().join("bad.json");
    std::fs::write(
        &bad_config,
        std::fs::read_to_string(&config)
            .unwrap()
            .replace("\"seed\": 42,", "\"seed\": 42, \"sede\": 1,"),
    )
    .unwrap();
    let out = run(&["prepare", "--config", &config_arg(&bad_config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sede"));

    // Unmapped attack name: data error (2) naming the attack.
    let original = std::fs::read_to_string(&train_path).unwrap();
    let mut text = original.clone();
    text.push_str(&text.lines().next().unwrap().replace("normal.", "zzz_evil."));
    text.push('\n');
    std::fs::write(&train_path, &text).unwrap();
    let out = run(&["prepare", "--config", &c]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zzz_evil"));

    // Malformed line: data error (2) citing the line number.
    let line_count = original.lines().count();
    let mut text = original.clone();
    text.push_str("1,2,3\n");
    std::fs::write(&train_path, &text).unwrap();
    let out = run(&["prepare", "--config", &c]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("line {}", line_count + 1)));

    // Train without prepared caches: data error (2).
    let fresh = write_config(dir.path(), "fresh", "gmm", "");
    let out = run(&["train", "--config", &config_arg(&fresh)]);
    assert_eq!(out.status.code(), Some(2));

    // Missing subcommand: usage (1).
    let out = run(&["--config", &c]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn concurrent_runs_on_one_output_directory_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let config = write_config(dir.path(), "locked", "gmm", "");
    let out_dir = dir.path().join("locked");
    std::fs::create_dir_all(&out_dir).unwrap();
    std::fs::write(out_dir.join(".csids.lock"), "").unwrap();
    let out = run(&["prepare", "--config", &config_arg(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
}

#[test]
fn manifest_records_inputs_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let config = write_config(dir.path(), "mani", "gmm", "");
    let c = config_arg(&config);
    run_ok(&["prepare", "--config", &c]);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("mani").join("manifest-prepare.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["format"], "csids-manifest");
    assert_eq!(manifest["command"], "prepare");
    assert_eq!(manifest["config"]["seed"], 42);
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert_eq!(inputs[0]["records"], 252);
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(outputs.contains(&"train.csidc"));
    assert!(outputs.contains(&"counts.json"));
}
