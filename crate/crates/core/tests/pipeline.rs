use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gridprice::pipeline::Stage;
use gridprice::{parse_config, run_pipeline, Error, ScenarioConfig};

fn example(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    parse_config(&path).unwrap()
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = example("example1.cfg");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(&cfg, &Stage::ALL, a.path()).unwrap();
    run_pipeline(&cfg, &Stage::ALL, b.path()).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(sa.len() > 8);
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{} differs", k.display());
    }
}

#[test]
fn later_stages_only_need_the_files() {
    let cfg = example("example1.cfg");
    let full = tempfile::tempdir().unwrap();
    run_pipeline(&cfg, &Stage::ALL, full.path()).unwrap();

    let split = tempfile::tempdir().unwrap();
    for f in ["model.txt", "gains.txt"] {
        fs::copy(full.path().join(f), split.path().join(f)).unwrap();
    }
    run_pipeline(&cfg, &[Stage::Verify, Stage::Simulate, Stage::Compare], split.path()).unwrap();
    let (a, b) = (snapshot(full.path()), snapshot(split.path()));
    for (k, v) in &b {
        assert!(v == &a[k], "{} differs", k.display());
    }
    assert_eq!(a.len(), b.len() + 1, "only synthesis.txt should be missing");
}

#[test]
fn missing_input_is_a_dependency_error() {
    let cfg = example("example1.cfg");
    let dir = tempfile::tempdir().unwrap();
    for stage in [Stage::Synthesize, Stage::Verify, Stage::Simulate, Stage::Compare] {
        match run_pipeline(&cfg, &[stage], dir.path()) {
            Err(Error::Dependency { stage: s, .. }) => assert_eq!(s, stage.name()),
            other => panic!("{stage}: {other:?}"),
        }
    }
}

#[test]
fn plot_data_has_one_row_per_sample() {
    let cfg = example("example1.cfg");
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&cfg, &Stage::ALL, dir.path()).unwrap();
    let plots = dir.path().join("plots");
    let mut seen = 0;
    for run in fs::read_dir(&plots).unwrap() {
        let run = run.unwrap().path();
        for name in ["p_g.csv", "p_d.csv", "e.csv", "lambda.csv"] {
            let text = fs::read_to_string(run.join(name)).unwrap();
            // header plus 5001 samples over [0, 50] at dt 0.01
            assert_eq!(text.lines().count(), 5002, "{}", run.join(name).display());
        }
        assert!(run.join("metrics.txt").exists());
        seen += 1;
    }
    assert_eq!(seen, 2);
}
