use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_midicoth"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("midicoth-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn sample() -> Vec<u8> {
    b"It was the best of times, it was the worst of times, it was the age of wisdom.\n".repeat(40)
}

fn piped(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn file_roundtrip() {
    let (src, packed, out) = (tmp("in.txt"), tmp("in.mdc"), tmp("out.txt"));
    std::fs::write(&src, sample()).unwrap();
    let c = bin().args(["c"]).arg(&src).arg(&packed).output().unwrap();
    assert!(c.status.success());
    let report = String::from_utf8(c.stderr).unwrap();
    assert!(
        report.contains("bpb") && report.contains("ratio"),
        "{report}"
    );
    assert!(c.stdout.is_empty());
    let d = bin().args(["d"]).arg(&packed).arg(&out).output().unwrap();
    assert!(d.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), sample());
}

#[test]
fn stdin_stdout_pipeline() {
    let c = piped(&["c"], &sample());
    assert!(c.status.success());
    assert_eq!(&c.stdout[..4], b"MDCT");
    let d = piped(&["d"], &c.stdout);
    assert!(d.status.success());
    assert_eq!(d.stdout, sample());
}

#[test]
fn layer_flags_reach_the_header() {
    let c = piped(
        &[
            "c",
            "--no-tweedie",
            "--no-match",
            "--no-word",
            "--no-highctx",
        ],
        &sample(),
    );
    assert!(c.status.success());
    // Flags byte: no layers, three steps.
    assert_eq!(c.stdout[5], 0b0010_0000);
    let c = piped(&["c", "--no-word", "--steps", "2"], &sample());
    assert_eq!(c.stdout[5], 0b0001_1101);
    let d = piped(&["d"], &c.stdout);
    assert_eq!(d.stdout, sample());
}

#[test]
fn bad_steps_rejected() {
    let c = piped(&["c", "--steps", "5"], b"x");
    assert!(!c.status.success());
}

#[test]
fn corrupt_input_fails_cleanly() {
    let d = piped(&["d"], b"not a container at all");
    assert!(!d.status.success());
    assert!(d.stdout.is_empty());
    assert!(String::from_utf8(d.stderr)
        .unwrap()
        .starts_with("midicoth:"));
}

#[test]
fn stats_writes_diagnostics() {
    let (src, tsv) = (tmp("stats.txt"), tmp("stats.tsv"));
    std::fs::write(&src, sample()).unwrap();
    let out = bin()
        .args(["stats"])
        .arg(&src)
        .arg("--stats-out")
        .arg(&tsv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for layer in ["ppm", "match", "word", "highctx", "tweedie", "container"] {
        assert!(text.contains(layer), "{text}");
    }
    let file = std::fs::read_to_string(&tsv).unwrap();
    let mut lines = file.lines();
    assert_eq!(
        lines.next(),
        Some("gamma\tC_center\tstep\tmean_abs_delta\tweight")
    );
    // Eight confidence bins times three steps.
    assert_eq!(lines.count(), 24);
}

fn bench_rows(path: &PathBuf) -> Vec<Vec<String>> {
    let out = bin().arg("bench").arg(path).output().unwrap();
    assert!(out.status.success());
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("ROW\t"))
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}

#[test]
fn bench_reports_five_rows() {
    let src = tmp("bench.txt");
    std::fs::write(&src, sample()).unwrap();
    let rows = bench_rows(&src);
    let names: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(
        names,
        [
            "Base PPM",
            "+Match",
            "+M+Word",
            "+M+W+HCtx",
            "+M+W+H+Tweedie"
        ]
    );
    // The full row matches a plain compression of the same file.
    let c = bin()
        .arg("c")
        .arg(&src)
        .arg(tmp("bench.mdc"))
        .output()
        .unwrap();
    assert!(c.status.success());
    let size = std::fs::metadata(tmp("bench.mdc")).unwrap().len();
    assert_eq!(rows[4][3], size.to_string());
    // Sizes do not depend on timing.
    let again = bench_rows(&src);
    let sizes = |r: &Vec<Vec<String>>| r.iter().map(|x| x[3].clone()).collect::<Vec<_>>();
    assert_eq!(sizes(&rows), sizes(&again));
}

#[test]
fn bench_missing_file_fails() {
    let out = bin().args(["bench", "/nonexistent/file"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("missing"));
}
