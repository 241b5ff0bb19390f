use std::path::Path;
use std::process::{Command, Output};

fn adastep(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adastep"))
        .args(args)
        .current_dir(dir)
        .env_remove("ADASTEP_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"
schema_version = 1
seed = 0

[budget]
epochs = 5

[problem]
kind = "quadratic_file"
path = "q.json"

[algorithm]
name = "adasps"
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = adastep(
        dir.path(),
        &[
            "generate",
            "quadratic",
            "--regime",
            "strongly-convex",
            "--n",
            "10",
            "--d",
            "8",
            "--out",
            "q.json",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(dir.path().join("cfg.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn run_is_reproducible() {
    let dir = setup();
    for out in ["a.jsonl", "b.jsonl"] {
        let o = adastep(
            dir.path(),
            &["run", "--config", "cfg.toml", "--seed", "1", "--out", out],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("adasps seed=1 "));
    }
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.jsonl")).unwrap());
}

#[test]
fn output_directory_override() {
    let dir = setup();
    let outdir = dir.path().join("elsewhere");
    let o = Command::new(env!("CARGO_BIN_EXE_adastep"))
        .args(["run", "--config", "cfg.toml", "--out", "t.jsonl"])
        .current_dir(dir.path())
        .env("ADASTEP_OUTPUT_DIR", &outdir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(outdir.join("t.jsonl").exists());
    assert!(!dir.path().join("t.jsonl").exists());
}

#[test]
fn verify_prints_pass_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = adastep(dir.path(), &["verify"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("PASS sps counterexample"))
            .count(),
        3
    );
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("PASS mismatched quantity"))
            .count(),
        3
    );
    assert!(!text.contains("FAIL"));
}

#[test]
fn sweep_enumerates_eight_decades() {
    let dir = setup();
    std::fs::write(
        dir.path().join("svrg.toml"),
        CONFIG.replace("name = \"adasps\"", "name = \"svrg\"\neta = 1.0"),
    )
    .unwrap();
    let o = adastep(
        dir.path(),
        &[
            "sweep",
            "--config",
            "svrg.toml",
            "--grid",
            "eta=1e-4..1e3",
            "--out-dir",
            "sweep",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("eta=")).count(), 8);
    assert!(text.contains("best (final suboptimality): row"));
    assert_eq!(std::fs::read_dir(dir.path().join("sweep")).unwrap().count(), 8);
}

#[test]
fn diagnose_and_export() {
    let dir = setup();
    for seed in ["0", "1", "2"] {
        let out = format!("s{seed}.jsonl");
        assert!(adastep(
            dir.path(),
            &["run", "--config", "cfg.toml", "--seed", seed, "--out", &out]
        )
        .status
        .success());
    }
    let o = adastep(dir.path(), &["diagnose", "--trace", "s0.jsonl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["sigma_fb"].as_f64().unwrap() > 0.0);
    assert!(report["tau"].as_f64().unwrap() > 0.0);

    let o = adastep(
        dir.path(),
        &[
            "export-plot",
            "s0.jsonl",
            "s1.jsonl",
            "s2.jsonl",
            "--aggregate",
            "mean-std",
            "--out",
            "m.csv",
        ],
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(csv.starts_with("algorithm,runs,t,epoch,mean_suboptimality"));
    assert_eq!(csv.lines().count(), 7);

    let o = adastep(dir.path(), &["export-plot", "s0.jsonl"]);
    assert_eq!(stdout(&o).lines().count(), 7);
}

#[test]
fn errors_exit_nonzero() {
    let dir = setup();
    let cases: [&[&str]; 6] = [
        &["run", "--config", "missing.toml"],
        &["run", "--config", "cfg.toml", "--bogus"],
        &["sweep", "--config", "cfg.toml", "--grid", "c_p_scale=abc"],
        &["diagnose", "--trace", "cfg.toml"],
        &["export-plot", "nothing.jsonl"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = adastep(dir.path(), args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    std::fs::write(
        dir.path().join("bad.toml"),
        CONFIG.replace("seed = 0", "seed = 0\nsede = 1"),
    )
    .unwrap();
    let o = adastep(dir.path(), &["run", "--config", "bad.toml"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sede"));
}

#[test]
fn mismatched_cadence_fails_export() {
    let dir = setup();
    assert!(
        adastep(dir.path(), &["run", "--config", "cfg.toml", "--out", "a.jsonl"])
            .status
            .success()
    );
    std::fs::write(dir.path().join("long.toml"), CONFIG.replace("epochs = 5", "epochs = 7")).unwrap();
    assert!(
        adastep(dir.path(), &["run", "--config", "long.toml", "--out", "b.jsonl"])
            .status
            .success()
    );
    let o = adastep(
        dir.path(),
        &["export-plot", "a.jsonl", "b.jsonl", "--aggregate", "mean-std"],
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("alignment"));
}

#[test]
fn generate_classification_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = adastep(
        dir.path(),
        &[
            "generate",
            "classification",
            "--rows",
            "30",
            "--dim",
            "6",
            "--seed",
            "2",
            "--out",
            "c.libsvm",
        ],
    );
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("c.libsvm")).unwrap();
    assert_eq!(text.lines().count(), 30);
    assert!(text.lines().all(|l| l.starts_with("+1") || l.starts_with("-1")));
}
