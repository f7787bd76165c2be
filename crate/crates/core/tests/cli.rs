use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modelspace"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn hs_crosscheck_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let status = bin()
            .args(["hs-crosscheck", "--config"])
            .arg(config("hs_crosscheck.cfg"))
            .arg("--out")
            .arg(&out)
            .args(["--seed", "11"])
            .status()
            .unwrap();
        assert!(status.success());
        runs.push(out.join("hs-crosscheck"));
    }
    let s = summary(&runs[0]);
    assert_eq!(s["all_agree"], true);
    assert_eq!(s["params"]["run.seed"], "11");
    for name in ["agreement.csv", "spectrum.csv", "stanton_shells.csv", "bounds_upper.csv", "bounds_lower.csv"] {
        assert!(runs[0].join(name).exists(), "{name}");
    }
    assert_eq!(read_all(&runs[0]), read_all(&runs[1]));
}

#[test]
fn seed_changes_random_theta() {
    let tmp = tempfile::tempdir().unwrap();
    let value = |seed: &str| {
        let out = tmp.path().join(seed);
        let ok = bin()
            .args(["hs-crosscheck", "--config"])
            .arg(config("hs_crosscheck.cfg"))
            .arg("--out")
            .arg(&out)
            .args(["--seed", seed])
            .status()
            .unwrap()
            .success();
        assert!(ok);
        summary(&out.join("hs-crosscheck"))["routes"][0]["value"].as_f64().unwrap()
    };
    assert_ne!(value("1"), value("2"));
}

#[test]
fn bad_configs_are_rejected_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    for text in ["run.alpha = 1/2\nrun.bogus = 3\n", "run.alpha = 2\n", "run.p_list = 1, -2\n", "experiment = hs-crosscheck\n", "run.alpha\n"] {
        std::fs::write(&cfg, text).unwrap();
        let out = tmp.path().join("out");
        let o = bin().args(["pw-corner", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(!o.status.success(), "{text}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("config error"), "{text}");
        assert!(!out.join("pw-corner").exists());
    }
}

#[test]
fn counterexample_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["counterexample53", "--config"])
        .arg(config("counterexample53.cfg"))
        .arg("--out")
        .arg(tmp.path())
        .args(["--tol", "1e-7"])
        .status()
        .unwrap();
    assert!(status.success());
    let dir = tmp.path().join("counterexample53");
    let s = summary(&dir);
    assert_eq!(s["terms_bounded_below"], true);
    assert_eq!(s["lower_test_converging"], true);
    let mut rd = csv::Reader::from_path(dir.join("series_terms.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let rel: f64 = r[6].parse().unwrap();
        assert!(rel < 1e-8);
    }
}
