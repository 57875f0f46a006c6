//! The generated header must compile as C and as C++.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include "covrecon.h"
int main(void) {
    CovreconSpace *space = 0;
    CovreconPlan plan;
    CovreconStatus st = covrecon_space_new(1, 8, false, &space);
    st = covrecon_plan_brownian(0.1, 2, &plan);
    covrecon_space_free(space);
    return st == COVRECON_STATUS_OK ? 0 : 1;
}
"#;

fn check(compiler: &str, ext: &str) {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join(format!("main.{ext}"));
    std::fs::write(&src, PROGRAM).unwrap();
    let out = match Command::new(compiler)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
    {
        Ok(o) => o,
        Err(_) => {
            eprintln!("{compiler} not available; skipping");
            return;
        }
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn header_compiles_as_c() {
    check("cc", "c");
}

#[test]
fn header_compiles_as_cpp() {
    check("c++", "cpp");
}
