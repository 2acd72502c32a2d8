use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heislab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heislab")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, suite: &str, config: Option<&str>) -> Output {
    let out = dir.join("out");
    let mut args = vec![suite.to_string(), "--out".into(), out.display().to_string()];
    if let Some(text) = config {
        let p = dir.join("run.toml");
        fs::write(&p, text).unwrap();
        args.extend(["--config".into(), p.display().to_string()]);
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    heislab(&refs)
}

#[test]
fn regions_emits_the_n2_apex() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "regions", Some("[regions]\nn = 2\n"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("out/regions.csv")).unwrap();
    assert!(table.contains("S',2,") && table.contains("7/10,3/10"), "{table}");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["assertions_failed"], 0);
}

#[test]
fn invalid_configs_exit_with_2() {
    for bad in [
        "[dyadic]\ndelta = 0.02\n",
        "[general]\nbogus = 1\n",
        "[general]\nn = 3\n",
        "[sparse]\ndelta = 0.5\n",
        "not toml at all [",
    ] {
        let dir = tempfile::tempdir().unwrap();
        let suite = if bad.contains("sparse") { "sparse-verify" } else { "grid-build" };
        let o = run_in(dir.path(), suite, Some(bad));
        assert_eq!(o.status.code(), Some(2), "{bad:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!dir.path().join("out").exists());
    }
}

#[test]
fn unknown_suite_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), "everything", None).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    for (suite, cfg) in [("regions", "[regions]\nn = 3\n"), ("laguerre-verify", "[general]\nn = 2\n")] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert!(run_in(a.path(), suite, Some(cfg)).status.success(), "{suite}");
        assert!(run_in(b.path(), suite, Some(cfg)).status.success(), "{suite}");
        let mut names: Vec<_> = fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() > 3);
        for name in names {
            let x = fs::read(a.path().join("out").join(&name)).unwrap();
            let y = fs::read(b.path().join("out").join(&name)).unwrap();
            assert!(x == y, "{suite}: {name:?} differs");
        }
    }
}

#[test]
fn laguerre_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "laguerre-verify", None);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("PASS beta identity without factor 2"));
    assert!(!stdout.contains("FAIL"));
    for f in ["psi0.csv", "envelopes.csv", "uniform_scan.csv", "ident.csv", "kernels.csv", "config.toml", "summary.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn failing_assertions_exit_with_1() {
    // an unreachable continuity slope makes the suite fail, not the config
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[continuity]\nn = 1\nmin_slope = 5.0\nj_min = 1\nj_max = 3\n[continuity.grid]\nlz = 3.5\nlt = 4.0\ncz = 8\nct = 10\n";
    let o = run_in(dir.path(), "continuity", Some(cfg));
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL continuity slope"));
}
