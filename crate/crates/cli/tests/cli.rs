//! End-to-end checks of the command-line interface: exit codes,
//! determinism of emitted artifacts, and the full pipeline chaining.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_embryoforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn embryoforge")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_ok(&run(&[
            "synth", "--out", out.to_str().unwrap(),
            "--embryos", "1", "--stacks", "2", "--size", "32", "--slices", "2", "--seed", "9",
        ]));
    }
    assert_eq!(read(&a.join("manifest.jsonl")), read(&b.join("manifest.jsonl")));
    assert_eq!(read(&a.join("e00_t001_z01.pgm")), read(&b.join("e00_t001_z01.pgm")));
}

#[test]
fn preprocess_counts_and_corrupt_input_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    assert_ok(&run(&[
        "synth", "--out", raw.to_str().unwrap(),
        "--embryos", "2", "--stacks", "2", "--size", "48", "--slices", "3", "--seed", "4",
    ]));
    let patches = dir.path().join("patches");
    assert_ok(&run(&[
        "preprocess",
        "--input", raw.to_str().unwrap(),
        "--manifest", raw.join("manifest.jsonl").to_str().unwrap(),
        "--out", patches.to_str().unwrap(),
        "--patch", "16", "--slices", "0:2", "--per-slice", "2", "--seed", "3",
    ]));
    // 2 embryos x 2 stacks x 3 slices x 2 per slice
    let n = std::fs::read_dir(&patches)
        .unwrap()
        .filter(|e| {
            e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm")
        })
        .count();
    assert_eq!(n, 24);
    assert!(patches.join("resolved-config.toml").is_file());

    // corrupt one slice: that stack fails by name, others proceed, exit 1
    std::fs::write(raw.join("e01_t000_z01.pgm"), b"P5\n9 9\n255\nxx").unwrap();
    let out = run(&[
        "preprocess",
        "--input", raw.to_str().unwrap(),
        "--manifest", raw.join("manifest.jsonl").to_str().unwrap(),
        "--out", dir.path().join("p2").to_str().unwrap(),
        "--patch", "16", "--slices", "0:2", "--seed", "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("e01_t000_z01.pgm"), "stderr: {stderr}");
}

#[test]
fn rerunning_preprocess_reproduces_patch_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    assert_ok(&run(&[
        "synth", "--out", raw.to_str().unwrap(),
        "--embryos", "1", "--stacks", "1", "--size", "32", "--slices", "2", "--seed", "8",
    ]));
    let manifest = raw.join("manifest.jsonl");
    let common = [
        "preprocess",
        "--input", raw.to_str().unwrap(),
        "--manifest", manifest.to_str().unwrap(),
        "--patch", "16", "--slices", "0:1", "--seed", "5",
    ];
    let p1 = dir.path().join("p1");
    let p2 = dir.path().join("p2");
    assert_ok(&bin().args(common).args(["--out", p1.to_str().unwrap()]).output().unwrap());
    assert_ok(&bin().args(common).args(["--out", p2.to_str().unwrap()]).output().unwrap());
    let name = "patch_e00_t000_z01_1.pgm";
    assert_eq!(read(&p1.join(name)), read(&p2.join(name)));
}

#[test]
fn train_gan_then_generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let lab = dir.path().join("lab");
    assert_ok(&run(&[
        "synth", "--out", lab.to_str().unwrap(),
        "--labeled", "24", "--patch-size", "16", "--seed", "2",
    ]));
    let gan = dir.path().join("gan");
    assert_ok(&run(&[
        "train-gan",
        "--data", lab.join("manifest.jsonl").to_str().unwrap(),
        "--out", gan.to_str().unwrap(),
        "--iterations", "2", "--batch-size", "4", "--n-critic", "1",
        "--base-filters", "2", "--latent-dim", "8", "--sample-every", "0",
        "--dtype", "f64",
    ]));
    assert!(gan.join("trace.csv").is_file());
    assert!(gan.join("resolved-config.toml").is_file());

    let g1 = dir.path().join("g1");
    let g2 = dir.path().join("g2");
    for out in [&g1, &g2] {
        assert_ok(&run(&[
            "generate",
            "--checkpoint", gan.join("gen.ck").to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--n", "6", "--seed", "7", "--dtype", "f64",
        ]));
    }
    assert_eq!(read(&g1.join("montage.pgm")), read(&g2.join("montage.pgm")));
    assert_eq!(read(&g1.join("sample_0003.pgm")), read(&g2.join("sample_0003.pgm")));
}

#[test]
fn gradcheck_exits_zero_and_lists_ops() {
    let out = run(&["gradcheck", "--cases", "2"]);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    for op in ["conv2d", "matmul", "batch_norm", "dropout", "sigmoid"] {
        assert_eq!(
            stdout.matches(&format!("{op} ")).count(),
            1,
            "op {op} should appear exactly once:\n{stdout}"
        );
    }
}

#[test]
fn usage_errors_exit_with_code_1() {
    assert_eq!(run(&["train-gan", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["not-a-command"]).status.code(), Some(1));
    let out = run(&[
        "train-gan", "--data", "/nonexistent/m.jsonl", "--out", "/tmp/x-embryoforge-test",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thread_cap_env_var_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    assert_ok(&run(&[
        "synth", "--out", raw.to_str().unwrap(),
        "--embryos", "1", "--stacks", "2", "--size", "32", "--slices", "2", "--seed", "1",
    ]));
    let out = bin()
        .env("EMBRYOFORGE_THREADS", "1")
        .args([
            "preprocess",
            "--input", raw.to_str().unwrap(),
            "--manifest", raw.join("manifest.jsonl").to_str().unwrap(),
            "--out", dir.path().join("p").to_str().unwrap(),
            "--patch", "16", "--slices", "0:1", "--seed", "0",
        ])
        .output()
        .unwrap();
    assert_ok(&out);
}
