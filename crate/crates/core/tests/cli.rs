use std::path::Path;
use std::process::{Command, Output};

use kscdl::io::load_series;

fn kscdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kscdl"))
        .args(args)
        .env("KSCDL_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kscdl(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_synth(dir: &Path, dim: &str) {
    ok(&[
        "gen-synth", "--out", p(dir), "--classes", "2", "--per-class", "4", "--landmarks", "6", "--dim", dim,
        "--min-length", "6", "--max-length", "9", "--seed", "5",
    ]);
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn gen_synth_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    small_synth(&a, "3");
    small_synth(&b, "3");
    let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
    assert_eq!(fa.len(), 8 + 3);
    assert_eq!(fa, fb);
}

#[test]
fn kernel_check_on_planar_data() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path(), "2");
    let report = tmp.path().join("kernel.json");
    let text = ok(&[
        "kernel-check", "--manifest", p(&tmp.path().join("all.txt")), "--sigma", "0.5", "--report", p(&report),
    ]);
    assert_eq!(text.lines().count(), 2);
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rows[0]["sigma"], 0.5);
    assert!(rows[0]["min_eigenvalue"].as_f64().unwrap() >= -1e-8);
    assert_eq!(rows[0]["is_psd"], true);
}

#[test]
fn train_encode_classify_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_synth(&data, "3");
    let train = data.join("train.txt");
    let test = data.join("test.txt");
    let model = tmp.path().join("model.json");
    let common = ["--mode", "intrinsic", "--sigma", "0.5", "--ftp-levels", "3", "--seed", "1"];

    let mut args = vec!["train", "--manifest", p(&train), "--out", p(&model)];
    args.extend(common);
    ok(&args);
    let first = std::fs::read(&model).unwrap();
    ok(&args);
    assert_eq!(first, std::fs::read(&model).unwrap());

    let eval_json = tmp.path().join("eval.json");
    let text = ok(&["eval", "--model", p(&model), "--manifest", p(&test), "--report", p(&eval_json)]);
    assert!(text.starts_with("accuracy: "));
    assert!(text.contains("actual"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&eval_json).unwrap()).unwrap();
    let confusion: u64 = report["confusion"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|v| v.as_u64().unwrap()))
        .sum();
    assert_eq!(confusion, 4);

    let input = data.join("c0_t000.seq");
    let codes = tmp.path().join("codes.seq");
    ok(&["encode", "--model", p(&model), "--input", p(&input), "--out", p(&codes)]);
    let series = load_series(&codes).unwrap();
    assert_eq!(series.blocks.len(), 2);
    assert!(series.block_sums().iter().all(|s| (s - 1.0).abs() < 1e-6));

    let text = ok(&["classify", "--model", p(&model), "--manifest", p(&test)]);
    assert_eq!(text.lines().count(), 4);
    let text = ok(&["classify", "--model", p(&model), "--input", p(&input)]);
    assert!(text.trim_end().ends_with("c0") || text.trim_end().ends_with("c1"));
}

#[test]
fn stored_dictionaries_give_the_same_model() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path(), "2");
    let train = tmp.path().join("train.txt");
    let (dicts, a, b) = (tmp.path().join("d.json"), tmp.path().join("a.json"), tmp.path().join("b.json"));
    let flags = ["--mode", "extrinsic", "--sigma", "0.5", "--ftp-levels", "2"];
    let run = |extra: Vec<&str>| {
        let mut args = extra;
        args.extend(flags);
        ok(&args)
    };
    run(vec!["train-dict", "--manifest", p(&train), "--out", p(&dicts)]);
    run(vec!["train", "--manifest", p(&train), "--out", p(&a), "--dicts", p(&dicts)]);
    run(vec!["train", "--manifest", p(&train), "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn cluster_reports_every_class() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path(), "2");
    let text = ok(&["cluster", "--manifest", p(&tmp.path().join("all.txt")), "--sigma", "0.5"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("c0: ") && lines[1].starts_with("c1: "));
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path(), "2");
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, "sigma = 0.05\nftp_levels = 2\n").unwrap();
    let text = ok(&["kernel-check", "--manifest", p(&tmp.path().join("all.txt")), "--config", p(&config)]);
    assert!(text.lines().nth(1).unwrap().trim_start().starts_with("0.05 "));
    let text = ok(&[
        "kernel-check", "--manifest", p(&tmp.path().join("all.txt")), "--config", p(&config), "--sigma", "0.2",
    ]);
    assert!(text.lines().nth(1).unwrap().trim_start().starts_with("0.2 "));
}

fn single_error_line(out: &Output, kind: &str, code: i32) {
    assert_eq!(out.status.code(), Some(code));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    assert!(lines[0].starts_with(&format!("error[{kind}]: ")), "{stderr}");
}

#[test]
fn failures_are_one_machine_readable_line() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.txt");
    single_error_line(&kscdl(&["kernel-check", "--manifest", p(&missing)]), "io", 1);
    single_error_line(&kscdl(&["train", "--manifest"]), "usage", 2);
    single_error_line(&kscdl(&["frobnicate"]), "usage", 2);
    single_error_line(&kscdl(&["gen-synth", "--out", p(tmp.path()), "--dim", "4"]), "unsupported_dim", 1);

    let bad = tmp.path().join("bad.seq");
    std::fs::write(&bad, "{\"n\":3,\"m\":2,\"L\":1}\n0 0 1 x 0 1\n").unwrap();
    let manifest = tmp.path().join("m.txt");
    std::fs::write(&manifest, "bad.seq a g\n").unwrap();
    let out = kscdl(&["kernel-check", "--manifest", p(&manifest)]);
    single_error_line(&out, "parse", 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.seq:2:7"));

    let config = tmp.path().join("c.toml");
    std::fs::write(&config, "lamda = 1\n").unwrap();
    single_error_line(&kscdl(&["kernel-check", "--manifest", p(&manifest), "--config", p(&config)]), "invalid_input", 1);
}

#[test]
fn help_and_version_exit_cleanly() {
    assert!(kscdl(&["--help"]).status.success());
    assert!(kscdl(&["--version"]).status.success());
}
