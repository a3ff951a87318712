use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn gridprice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridprice")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stage_commands_match_pipeline() {
    let cfg = example("example1.cfg");
    let cfg = cfg.to_str().unwrap();
    let (whole, split) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = gridprice(&["pipeline", "--config", cfg, "--out", whole.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("identify: 64 rules"));
    assert!(stdout.contains("ACE"));

    for cmd in ["identify", "synthesize", "verify", "simulate", "compare"] {
        let o = gridprice(&[cmd, "--config", cfg, "--out", split.path().to_str().unwrap()]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    for f in ["model.txt", "gains.txt", "verification.txt", "comparison.csv", "trajectories/fuzzy_seed0.csv"] {
        assert_eq!(fs::read(whole.path().join(f)).unwrap(), fs::read(split.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_model_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridprice(&["simulate", "--config", example("example1.cfg").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("gains.txt") || err.contains("model.txt"), "{err}");
}

#[test]
fn bad_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example("example1.cfg")).unwrap().replace("tau_g = 0.2", "tau_g = -0.2");
    let line = text.lines().position(|l| l.starts_with("tau_g")).unwrap() + 1;
    let path = dir.path().join("bad.cfg");
    fs::write(&path, text).unwrap();
    let o = gridprice(&["identify", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains(&format!(":{line}")) || err.contains(&format!("line {line}")), "{err}");
    assert!(err.contains("tau_g"), "{err}");
}

#[test]
fn stage_flag_is_pipeline_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("example1.cfg");
    let o = gridprice(&["identify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--stage", "identify"]);
    assert!(!o.status.success());
    let o = gridprice(&["pipeline", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--stage", "identify"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("model.txt").exists());
    assert!(!dir.path().join("gains.txt").exists());
}

#[test]
fn seed_override_changes_the_fit() {
    let cfg = example("example1.cfg");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, seed) in [(&a, "0"), (&b, "7")] {
        let o = gridprice(&["identify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed-override", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ma, mb) = (fs::read(a.path().join("model.txt")).unwrap(), fs::read(b.path().join("model.txt")).unwrap());
    assert_ne!(ma, mb);
}
