//! A private copy of the fixture tree and a way to run the binary in it.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const CORE_FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures");

pub struct Sandbox {
    pub dir: tempfile::TempDir,
}

impl Sandbox {
    /// Copies `pipeline/`, `projects/` and `cli/` so relative project paths
    /// in the benchmark file still resolve.
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for sub in ["pipeline", "projects", "cli"] {
            copy_dir(&Path::new(CORE_FIXTURES).join(sub), &dir.path().join(sub));
        }
        Self { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn command(&self, args: &[&str]) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_fuzzgate"));
        c.args(args).current_dir(self.path("pipeline")).env_remove("FUZZGATE_API_KEY");
        c
    }

    pub fn run(&self, args: &[&str]) -> Output {
        self.command(args).output().unwrap()
    }
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        if e.file_name() == ".fuzzgate" {
            continue;
        }
        let dst = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &dst);
        } else {
            std::fs::copy(e.path(), dst).unwrap();
        }
    }
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}
