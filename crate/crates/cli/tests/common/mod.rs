//! Helpers for driving the `dgpaint` binary from tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_dgpaint");

/// Settings small enough that every subcommand finishes in seconds.
pub const TINY_CONFIG: &str = "\
# tiny run
data.train_count = 8
data.test_count = 3
data.image_size = 16
ddpm.timesteps = 10
ddpm.steps = 3
ddpm.batch = 4
gan.steps = 3
gan.batch = 4
eval.families = box,half
eval.batch = 2
";

pub fn dgpaint(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawning dgpaint")
}

/// Runs `args` in `dir` and panics with the captured streams on failure.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = dgpaint(dir, args);
    assert!(
        out.status.success(),
        "dgpaint {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("reading {}: {e}", path.as_ref().display()))
}

/// Every file under `dir` with its bytes, in path order.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), read(&p)));
            }
        }
    }
    out.sort();
    out
}

/// Column `name` of every CSV row whose `method` column equals `method`.
pub fn csv_column(csv: &str, method: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    let m = header.iter().position(|h| *h == "method").unwrap();
    lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[m] == method)
        .map(|f| f[col].to_string())
        .collect()
}
