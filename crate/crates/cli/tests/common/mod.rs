#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn pse_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pse"))
}

pub fn run(args: &[&str]) -> Output {
    pse_bin().args(args).output().expect("spawn pse")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}
