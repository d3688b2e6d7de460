//! End-to-end runs of every `dgpaint` subcommand on a tiny configuration.

mod common;

use common::{csv_column, dgpaint, ok, read, snapshot, TINY_CONFIG};
use inpaint_core::data::{save_mask, Mask};
use std::path::Path;

/// Writes the tiny config, a dataset and both checkpoints into `dir`.
fn prepare(dir: &Path) {
    std::fs::write(dir.join("tiny.cfg"), TINY_CONFIG).unwrap();
    ok(dir, &["gen-data", "--config", "tiny.cfg", "--out", "data"]);
    ok(dir, &["train-ddpm", "--config", "tiny.cfg", "--data", "data/train", "--out", "e.ckpt"]);
    ok(dir, &["train-gan", "--config", "tiny.cfg", "--data", "data/train", "--out", "g.ckpt", "--disc-out", "d.ckpt"]);
    ok(dir, &["gen-mask", "--config", "tiny.cfg", "--family", "box", "--out", "m.pgm"]);
}

fn inpaint_args<'a>(out: &'a str, montage: &'a str) -> Vec<&'a str> {
    vec![
        "inpaint", "--config", "tiny.cfg", "--image", "data/test/00000.ppm", "--mask", "m.pgm", "--gan", "g.ckpt",
        "--T", "100", "--mode", "stabilized", "--seed", "1", "--out", out, "--montage", montage,
    ]
}

#[test]
fn every_command_repeats_byte_for_byte() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        prepare(dir);
        ok(dir, &inpaint_args("y.ppm", "mt.ppm"));
        ok(dir, &[
            "baseline-inpaint", "--config", "tiny.cfg", "--image", "data/test/00001.ppm", "--mask", "m.pgm",
            "--ddpm", "e.ckpt", "--out", "b.ppm",
        ]);
        ok(dir, &[
            "eval", "--config", "tiny.cfg", "--data", "data/test", "--gan", "g.ckpt", "--ddpm", "e.ckpt", "--out",
            "report.csv",
        ]);
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.len(), sb.len());
    for ((pa, ba), (pb, bb)) in sa.iter().zip(&sb) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{} differs between runs", pa.display());
    }
    // A second run in the same directory also overwrites with identical bytes.
    let dir = a.path();
    ok(dir, &inpaint_args("y2.ppm", "mt2.ppm"));
    assert_eq!(read(dir.join("y.ppm")), read(dir.join("y2.ppm")));
    assert_eq!(read(dir.join("mt.ppm")), read(dir.join("mt2.ppm")));
}

#[test]
fn zero_mask_returns_the_input_file() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    prepare(dir);
    save_mask(&Mask::zeros(16, 16).unwrap(), dir.join("zero.pgm")).unwrap();
    ok(dir, &[
        "inpaint", "--config", "tiny.cfg", "--image", "data/test/00002.ppm", "--mask", "zero.pgm", "--gan",
        "g.ckpt", "--out", "y.ppm",
    ]);
    assert_eq!(read(dir.join("y.ppm")), read(dir.join("data/test/00002.ppm")));
}

#[test]
fn report_counts_generator_and_epsilon_passes() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    prepare(dir);
    ok(dir, &[
        "eval", "--config", "tiny.cfg", "--data", "data/test", "--gan", "g.ckpt", "--ddpm", "e.ckpt", "--out",
        "r.csv", "--families", "half",
    ]);
    let csv = String::from_utf8(read(dir.join("r.csv"))).unwrap();
    assert!(csv.starts_with("sample_id,mask_family,method,masked_mse,psnr,generator_evals,epsilon_net_evals,wall_ms\n"));
    let g = csv_column(&csv, "diffganpaint", "generator_evals");
    assert_eq!(g, vec!["101"; 3]);
    assert_eq!(csv_column(&csv, "diffganpaint", "epsilon_net_evals"), vec!["0"; 3]);
    assert_eq!(csv_column(&csv, "ddpm_baseline", "epsilon_net_evals"), vec!["10"; 3]);
    assert_eq!(csv_column(&csv, "mean_fill", "wall_ms"), vec!["0.000"; 3]);
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn epsilon_wiring_needs_and_uses_the_ddpm_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    prepare(dir);
    let base = [
        "inpaint", "--config", "tiny.cfg", "--image", "data/test/00000.ppm", "--mask", "m.pgm", "--gan", "g.ckpt",
        "--out", "y.ppm", "--drift-model", "epsilon_net", "--T", "7",
    ];
    let missing = dgpaint(dir, &base);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--ddpm"));
    let mut with = base.to_vec();
    with.extend(["--ddpm", "e.ckpt"]);
    let out = ok(dir, &with);
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 generator and 7 epsilon-net evaluations"));
}

fn fails_with(dir: &Path, args: &[&str], needle: &str) {
    let out = dgpaint(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(needle), "{args:?}: stderr {err:?} lacks {needle:?}");
}

#[test]
fn bad_input_exits_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    prepare(dir);
    fails_with(dir, &["gen-data", "--out", "x", "--bogus"], "--bogus");
    fails_with(dir, &["inpaint", "--image", "nope.ppm", "--mask", "m.pgm", "--gan", "g.ckpt", "--out", "y.ppm"], "nope.ppm");

    std::fs::write(dir.join("bad.cfg"), "data.train_count = 4\nno equals sign here\n").unwrap();
    fails_with(dir, &["gen-data", "--config", "bad.cfg", "--out", "x"], "line 2");
    std::fs::write(dir.join("unknown.cfg"), "gan.stepz = 4\n").unwrap();
    fails_with(dir, &["gen-data", "--config", "unknown.cfg", "--out", "x"], "gan.stepz");

    let mut ckpt = read(dir.join("g.ckpt"));
    let mid = ckpt.len() / 2;
    ckpt[mid] ^= 0x40;
    std::fs::write(dir.join("broken.ckpt"), ckpt).unwrap();
    fails_with(dir, &[
        "inpaint", "--config", "tiny.cfg", "--image", "data/test/00000.ppm", "--mask", "m.pgm", "--gan",
        "broken.ckpt", "--out", "y.ppm",
    ], "CRC");
    // A generator checkpoint is not an epsilon net.
    fails_with(dir, &[
        "baseline-inpaint", "--config", "tiny.cfg", "--image", "data/test/00000.ppm", "--mask", "m.pgm",
        "--ddpm", "g.ckpt", "--out", "y.ppm",
    ], "g.ckpt");
    assert!(!dir.join("y.ppm").exists());
}
