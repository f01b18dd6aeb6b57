use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
schema_version = 1
seed = 5
snr_db = [1.0, 7.0]
frames = 3
blocks = 5
memory = 2
window = 4

[codebook]
lattice = "z3"
alpha = 1.22
samples = 20000

[code]
kind = "repetition"
n = 2
blocks = 30
"#;

fn pbmst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbmst")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn design_quantizer_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("z3.txt");
    let text = stdout(&pbmst(&[
        "design-quantizer",
        "--lattice",
        "z3",
        "--seed",
        "1",
        "--optimize",
        "--samples",
        "200000",
        "--output",
        file.to_str().unwrap(),
    ]));
    assert!((value(&text, "alpha") - 1.22).abs() < 0.03);
    assert!((value(&text, "distortion") - 0.19).abs() < 0.003);
    assert_eq!(std::fs::read_to_string(&file).unwrap(), text);

    let fixed = stdout(&pbmst(&["design-quantizer", "--lattice", "a2", "--seed", "2", "--alpha", "2.26", "--shift", "-0.15,-0.087", "--samples", "100000"]));
    assert_eq!(value(&fixed, "order"), 9.0);
    assert!(fixed.lines().any(|l| l.starts_with("0 o ")));
}

#[test]
fn design_quantizer_needs_seed_and_scale() {
    assert!(!pbmst(&["design-quantizer", "--lattice", "z3", "--optimize"]).status.success());
    assert!(!pbmst(&["design-quantizer", "--lattice", "z3", "--seed", "1"]).status.success());
    let bad = pbmst(&["design-quantizer", "--lattice", "q7", "--seed", "1", "--alpha", "1"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error: "));
}

#[test]
fn limits_subcommand() {
    let text = stdout(&pbmst(&["limits", "--entropy", "1.53", "--distortion", "0.19"]));
    assert!((value(&text, "constrained_snr_db") - 2.76).abs() < 0.01);
    assert!((value(&text, "opta_rate_bits") - 1.198).abs() < 0.001);
    assert!((value(&text, "opta_snr_db") - 1.12).abs() < 0.01);
    let flat = stdout(&pbmst(&["limits", "--distortion", "1"]));
    assert!(flat.contains("opta_snr_db = -inf (no coding needed)"));
    let a2 = stdout(&pbmst(&["limits", "--entropy", "2.75", "--dim", "2"]));
    assert!((value(&a2, "constrained_snr_db") - 2.02).abs() < 0.01);
    assert!(!pbmst(&["limits"]).status.success());
}

#[test]
fn simulate_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut curves = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("out{threads}"));
        let printed = stdout(&pbmst(&["simulate", "--config", &cfg, "--threads", threads, "--output", out.to_str().unwrap()]));
        let curve = std::fs::read_to_string(out.join("curve.csv")).unwrap();
        assert_eq!(printed, curve);
        let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
        assert!(report.contains("[config]") && report.contains("[limits]") && report.contains("master_seed = 5"));
        curves.push((curve, report));
    }
    assert_eq!(curves[0], curves[1]);
    let points = pbmst::sim::parse_curve_csv(&curves[0].0).unwrap();
    assert_eq!(points.len(), 2);
    assert!(points.iter().all(|p| p.frames == 3));

    let other = dir.path().join("seed6");
    stdout(&pbmst(&["simulate", "--config", &cfg, "--seed", "6", "--snr", "1.0,7.0", "--output", other.to_str().unwrap()]));
    assert_ne!(std::fs::read_to_string(other.join("curve.csv")).unwrap(), curves[0].0);
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let no_seed = write_config(dir.path(), &CONFIG.replace("seed = 5\n", ""));
    let r = pbmst(&["simulate", "--config", &no_seed, "--output", out.to_str().unwrap()]);
    assert!(!r.status.success());
    assert!(!out.exists());

    let cfg = write_config(dir.path(), CONFIG);
    assert!(!pbmst(&["simulate", "--config", &cfg]).status.success(), "no output directory");
    let missing = dir.path().join("absent.toml");
    assert!(!pbmst(&["simulate", "--config", missing.to_str().unwrap(), "--output", out.to_str().unwrap()]).status.success());
}

#[test]
fn trace_decode_lists_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let text = stdout(&pbmst(&["trace-decode", "--config", &cfg, "--snr", "7.0", "--frame", "1"]));
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("layer=0 iter=1 h="));
    assert!(lines.iter().all(|l| l.contains(" errors=")));
    let layers: std::collections::BTreeSet<&str> = lines.iter().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(layers.len(), 5);
    let again = stdout(&pbmst(&["trace-decode", "--config", &cfg, "--snr", "7.0", "--frame", "1"]));
    assert_eq!(text, again);
}
