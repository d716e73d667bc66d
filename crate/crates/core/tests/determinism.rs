use std::fs;
use std::path::{Path, PathBuf};

use sense_core::harness::run_scenario;
use sense_core::scenario::Scenario;

fn scenario(name: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect();
    Scenario::load(&path).unwrap()
}

fn outputs(s: &Scenario, dir: &Path) -> Vec<(String, Vec<u8>)> {
    run_scenario(s, Some(dir)).unwrap();
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_gives_identical_files() {
    let mut s = scenario("fault_tolerance.toml");
    s.duration = sense_core::time::Duration::from_secs(100);
    s.output.trace = true;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = outputs(&s, a.path());
    let fb = outputs(&s, b.path());
    let names: Vec<_> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["events.tsv", "reads.csv", "summary.toml", "truth.csv", "tuples.csv"]);
    assert_eq!(fa, fb);
}

#[test]
fn different_seeds_differ() {
    let mut s = scenario("soundness.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = outputs(&s, a.path());
    s.seed += 1;
    let fb = outputs(&s, b.path());
    let tuples = |f: &[(String, Vec<u8>)]| f.iter().find(|x| x.0 == "tuples.csv").unwrap().1.clone();
    assert_ne!(tuples(&fa), tuples(&fb));
}
