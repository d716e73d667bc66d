//! Compiles a C program against the generated header and links it with the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "sense.h"

int main(void) {
    int64_t cg = 0;
    if (sense_coherence_guarantee(0, 100, 10, 40, &cg) != SENSE_STATUS_OK || cg != 130) return 1;
    if (sense_coherence_estimate(5, 1, &cg) != SENSE_STATUS_INVALID_ARGUMENT) return 2;
    if (sense_last_error() == NULL) return 3;
    SenseScenario *s = NULL;
    const char *toml =
        "node_count = 4\nduration = \"5s\"\nrequest_period = \"500ms\"\nc_gmax = \"1s\"\n"
        "[network]\npreset = \"lan\"\n[scheduler]\nkind = \"ad-hoc\"\n";
    if (sense_scenario_from_toml(toml, &s) != SENSE_STATUS_OK) return 4;
    SenseRun *run = NULL;
    if (sense_run(s, &run) != SENSE_STATUS_OK) return 5;
    SenseSummary sum;
    if (sense_run_summary(run, &sum) != SENSE_STATUS_OK || sum.tuples == 0) return 6;
    printf("%llu\n", (unsigned long long)sum.tuples);
    sense_run_free(run);
    sense_scenario_free(s);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // the test binary lives in <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn cc() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().map(|_| cc)
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    for lang in ["c", "c++"] {
        let out = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(include.join("sense.h"))
            .output()
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let lib = target_dir().join("libsense_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let tuples: u64 = String::from_utf8(run.stdout).unwrap().trim().parse().unwrap();
    assert!(tuples > 0);
}
