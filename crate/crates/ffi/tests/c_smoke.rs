use std::path::PathBuf;
use std::process::Command;

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "rankfilter.h"

int main(void) {
    RfBox a = {1.0, 1.0, 2.0, 2.0};
    RfBox b = {2.0, 2.0, 2.0, 2.0};
    if (fabs(rf_iou(a, b) - 1.0 / 7.0) > 1e-12) return 1;

    double cost[4] = {1.0, 2.0, 2.0, 4.0};
    int64_t cols[2];
    double total = 0.0;
    if (rf_hungarian(cost, 2, 2, cols, &total) != RF_STATUS_OK) return 2;
    if (cols[0] != 1 || cols[1] != 0 || total != 4.0) return 3;

    RfDetection dets[2] = {
        {{0.3, 0.3, 0.2, 0.2}, 0.9, 0},
        {{0.31, 0.3, 0.2, 0.2}, 0.8, 0},
    };
    size_t kept[2];
    size_t n = 0;
    if (rf_nms(dets, 2, 0.5, kept, &n) != RF_STATUS_OK || n != 1 || kept[0] != 0) return 4;

    RfFilterModel *model = NULL;
    if (rf_filter_load("/nonexistent/model.ckpt", &model) != RF_STATUS_IO) return 5;
    if (model != NULL || rf_last_error_message() == NULL) return 6;
    printf("ok %s\n", rf_last_error_message());
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let target = target_dir();
    let lib = target.join("librankfilter_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("smoke");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
