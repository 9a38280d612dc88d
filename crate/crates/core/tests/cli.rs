use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mwion");

const POINT_F0: &str = "[point]\nn0 = 5\nomega0 = 1.5\nt_cycles = 10\n";
const POINT: &str = "[point]\nn0 = 5\nomega0 = 1.5\nf0 = 0.03\nt_cycles = 10\n";
const SCAN: &str = "[scan]\nn0_values = [5]\nomega0 = 2.0\nt_cycles = 20\n";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env_remove("MWION_WORKERS")
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

/// Data rows of a CSV file with `#` comment lines and a header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn comment(text: &str, key: &str) -> f64 {
    let prefix = format!("# {key} = ");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().parse().unwrap()
}

#[test]
fn field_free_spectrum_is_the_photon_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), POINT_F0, &["spectrum"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(dir.path(), "spectrum.csv");
    assert!(text.starts_with("# mwion "));
    let e0 = -0.5 / 25.0;
    let omega = 1.5 / 125.0;
    let table = rows(&text);
    assert!(!table.is_empty());
    for r in &table {
        let residual: f64 = r[3].parse().unwrap();
        assert!(residual <= 1e-10);
    }
    // every real quasi-energy is a hydrogenic level shifted by whole photons
    let on_ladder = |re: f64| {
        (1..=30).any(|n: i32| (-8..=8).any(|k: i32| (re - (-0.5 / (n * n) as f64 - k as f64 * omega)).abs() < 1e-8))
    };
    let mut real = 0;
    for r in &table {
        let re: f64 = r[0].parse().unwrap();
        let im: f64 = r[1].parse().unwrap();
        if im.abs() < 1e-10 {
            assert!(on_ladder(re), "{re} is not a field-free replica");
            real += 1;
        }
    }
    assert!(real >= 5);
    assert!(table.iter().any(|r| (r[0].parse::<f64>().unwrap() - e0).abs() < 1e-10));

    let again = tempfile::tempdir().unwrap();
    assert!(run(again.path(), POINT_F0, &["spectrum"]).status.success());
    assert_eq!(text, read(again.path(), "spectrum.csv"));
}

#[test]
fn pion_weights_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), POINT, &["pion"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(dir.path(), "pion.csv");
    let sum: f64 = rows(&text).iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((sum - 1.0).abs() <= 1e-9, "{sum}");
    assert!(comment(&text, "captured_weight") >= 0.99);
    let p: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(p, comment(&text, "p_ion"));
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn single_point_scan_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SCAN, &["scan"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scan = read(dir.path(), "scan.csv");
    let table = rows(&scan);
    assert_eq!(table.len(), 1);
    let r = &table[0];
    let xi: f64 = r[5].parse().unwrap();
    let n: f64 = r[4].parse().unwrap();
    let ratio: f64 = r[6].parse().unwrap();
    assert_eq!(ratio, xi / n);
    for name in ["threshold_vs_omega0.csv", "xi_over_n_vs_omega0.csv", "shannon_vs_omega0.csv"] {
        assert_eq!(rows(&read(dir.path(), name)).len(), 1, "{name}");
    }

    // rerun on the finished journal does no work and writes the same files
    let journal = std::fs::read(dir.path().join("out/scan.journal.jsonl")).unwrap();
    let out = run(dir.path(), SCAN, &["scan"]);
    assert!(out.status.success());
    assert_eq!(read(dir.path(), "scan.csv"), scan);
    assert_eq!(std::fs::read(dir.path().join("out/scan.journal.jsonl")).unwrap(), journal);
}

#[test]
fn overrides_change_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), POINT, &["validate-config"]);
    let b = run(dir.path(), POINT, &["--set", "point.f0=0.04", "validate-config"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // unknown key
    let out = run(dir.path(), "[point]\nn0 = 5\nomega0 = 1.5\nt_cycles = 10\nbogus = 1\n", &["pion"]);
    assert_eq!(out.status.code(), Some(1));
    // domain error: negative time
    let out = run(dir.path(), "[point]\nn0 = 5\nomega0 = 1.5\nt_cycles = -1\n", &["pion"]);
    assert_eq!(out.status.code(), Some(1));
    // missing config file
    let out = Command::new(BIN).args(["--config", "/nonexistent/x.toml", "pion"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    // bad flag value
    let out = run(dir.path(), POINT, &["--seedless=yes", "validate-config"]);
    assert_eq!(out.status.code(), Some(1));
    // threshold beyond the search range is a numerical failure
    let out = run(dir.path(), POINT, &["--set", "search.f0_max=0.002", "threshold"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn seedless_flag_changes_nothing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(a.path(), POINT, &["pion"]).status.success());
    assert!(run(b.path(), POINT, &["--seedless", "pion"]).status.success());
    assert_eq!(read(a.path(), "pion.csv"), read(b.path(), "pion.csv"));
}
