use std::path::Path;
use std::process::Command;

fn run(dir: &Path, config: &str, args: &[&str]) -> (i32, String) {
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_conical-lab"))
        .arg(args[0])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(&args[1..])
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn body(csv: &str) -> String {
    csv.lines().filter(|l| !l.starts_with("# generated")).collect::<Vec<_>>().join("\n")
}

#[test]
fn passing_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), "seed = 1\n", &["sharpness"]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("sharpness.csv")).unwrap();
    assert!(csv.starts_with("# generated unix="));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn injected_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), "seed = 1\ntol = 1e-6\n", &["sharpness"]);
    assert_eq!(code, 1, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("sharpness.csv")).unwrap();
    assert!(csv.contains("\"fail\""));
}

#[test]
fn malformed_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for (config, args) in [
        ("seed = 1\nbogus = 3\n", vec!["sharpness"]),
        ("p = 2\n", vec!["sharpness"]),
        ("seed = 1\n", vec!["nonsense"]),
        ("seed = 1\n", vec!["sharpness", "--set", "p"]),
    ] {
        let (code, err) = run(dir.path(), config, &args);
        assert_eq!(code, 2, "{config:?} {args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn overrides_take_precedence_over_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), "seed = 1\ntol = 1e-6\n", &["sharpness", "--set", "tol=0.1"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn same_seed_gives_identical_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let config = "seed = 5\nsamples = 8\n";
    for d in [&a, &b] {
        let (code, err) = run(d.path(), config, &["comparisons"]);
        assert_eq!(code, 0, "{err}");
    }
    let read = |d: &tempfile::TempDir| std::fs::read_to_string(d.path().join("comparisons.csv")).unwrap();
    assert_eq!(body(&read(&a)), body(&read(&b)));
    let (code, _) = run(b.path(), "seed = 6\nsamples = 8\n", &["comparisons"]);
    assert_eq!(code, 0);
    assert_ne!(body(&read(&a)), body(&read(&b)));
}
