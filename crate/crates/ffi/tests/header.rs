use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "qrex.h"

int main(void) {
    QrexConfig *cfg = NULL;
    if (qrex_config_parse("experiment = \"gridworld\"\nK = 2\nB = 40\nseeds = 2", &cfg) != QREX_STATUS_OK) {
        fprintf(stderr, "%s\n", qrex_last_error());
        return 1;
    }
    QrexResult *res = NULL;
    if (qrex_run(cfg, 1, &res) != QREX_STATUS_OK) {
        fprintf(stderr, "%s\n", qrex_last_error());
        return 2;
    }
    double mean = 0.0;
    if (qrex_result_final_mean(res, "sup_error", &mean) != QREX_STATUS_OK) {
        return 3;
    }
    if (qrex_config_parse(NULL, &cfg) != QREX_STATUS_NULL_ARGUMENT || strlen(qrex_last_error()) == 0) {
        return 4;
    }
    printf("%zu %.6f\n", qrex_result_num_seeds(res), mean);
    qrex_result_free(res);
    qrex_config_free(cfg);
    return 0;
}
"#;

fn include_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

/// Directory holding the built static library, next to the test binary.
fn lib_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_is_valid_c_and_cpp() {
    let header = include_dir().join("qrex.h");
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status()
            .unwrap();
        assert!(status.success(), "{compiler} rejected the header");
    }
}

#[test]
fn c_program_links_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let lib = lib_dir().join("libqrex_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let status = Command::new("cc")
        .arg("-I")
        .arg(include_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields[0], "2");
    assert!(fields[1].parse::<f64>().unwrap() > 0.0);
}
