use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fracgauss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracgauss"))
        .args(args)
        .output()
        .expect("spawn fracgauss")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const BASE: [&str; 12] = [
    "--alpha",
    "0.6",
    "--beta",
    "-0.9",
    "--epsilon",
    "0.55",
    "--n",
    "10",
    "--steps",
    "30",
    "--topology",
    "global",
];

fn with_base<'a>(sub: &'a str, out: &'a Path, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![sub];
    args.extend(BASE);
    args.extend(["--output-dir", out.to_str().unwrap()]);
    args.extend(extra);
    args
}

#[test]
fn run_from_flags_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracgauss(&with_base("run", tmp.path(), &["--heatmap-modulus", "3"]));
    assert!(out.status.success(), "{}", stderr(&out));
    let series = fs::read_to_string(tmp.path().join("series.csv")).unwrap();
    assert_eq!(series.lines().count(), 32);
    let pgm = fs::read(tmp.path().join("heatmap.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n10 11\n255\n"));
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(summary.contains("mode=run\n") && summary.contains("heatmap_modulus=3\n"));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    fs::write(
        &cfg,
        format!(
            "alpha = 0.4\nbeta = -0.9\nepsilon = 0.55\nn = 6\nsteps = 10\ntopology = ring\noutput_dir = {}\n",
            tmp.path().join("o").display()
        ),
    )
    .unwrap();
    let out = fracgauss(&["run", "--config", cfg.to_str().unwrap(), "--alpha", "0.8"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = fs::read_to_string(tmp.path().join("o/summary.txt")).unwrap();
    assert!(summary.contains("alpha=0.8\n"), "{summary}");
}

#[test]
fn summary_regenerates_the_run_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let out = fracgauss(&with_base(
        "run",
        &first,
        &[
            "--topology",
            "small-world",
            "--rewire-p",
            "0.3",
            "--n",
            "12",
        ],
    ));
    assert!(out.status.success(), "{}", stderr(&out));

    // Feed the summary's parameter lines back in as a config file.
    let summary = fs::read_to_string(first.join("summary.txt")).unwrap();
    let second = tmp.path().join("second");
    let keys: Vec<String> = fs::read_to_string(first.join("summary.txt"))
        .unwrap()
        .lines()
        .take_while(|l| !l.starts_with("heatmap_rows=") && !l.starts_with("final_t="))
        .map(|l| l.replacen('=', " = ", 1))
        .collect();
    let cfg = tmp.path().join("again.cfg");
    fs::write(
        &cfg,
        format!("{}\noutput_dir = {}\n", keys.join("\n"), second.display()),
    )
    .unwrap();
    let out = fracgauss(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}\n{summary}", stderr(&out));
    for f in ["series.csv", "heatmap.pgm"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_errors_exit_2_and_name_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "alpha = 1.5\nbeta = -0.9\nepsilon = 0.5\nn = 10\nsteps = 10\ntopology = ring\ncolour = red\n").unwrap();
    let out = fracgauss(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.starts_with("configuration error"), "{err}");
    assert!(
        err.contains("alpha = 1.5") && err.contains("unknown key `colour`"),
        "{err}"
    );
}

#[test]
fn missing_config_file_exits_3() {
    let out = fracgauss(&["run", "--config", "/nonexistent/exp.cfg"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("/nonexistent/exp.cfg"));
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = fracgauss(&with_base("run", &blocker.join("sub"), &[]));
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn divergence_exits_4_after_writing_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracgauss(&with_base(
        "run",
        tmp.path(),
        &[
            "--beta",
            "3.0",
            "--blowup-bound",
            "1.0",
            "--init-lo",
            "0",
            "--init-hi",
            "0.4",
            "--init-seed",
            "3",
            "--topology",
            "ring",
        ],
    ));
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("divergence"));
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(
        summary.lines().any(|l| l.starts_with("diverged=t=")),
        "{summary}"
    );
}

#[test]
fn scan_writes_cartesian_product() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracgauss(&with_base(
        "scan",
        tmp.path(),
        &[
            "--scan",
            "epsilon=0.1:0.3:0.1",
            "--scan",
            "beta=-0.5,-0.9",
            "--heatmap",
            "off",
        ],
    ));
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(tmp.path().join("scan.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 6);
    for i in 0..6 {
        assert!(tmp.path().join(format!("point_{i:03}/series.csv")).exists());
    }
    assert!(!tmp.path().join("point_000/heatmap.pgm").exists());
}

#[test]
fn scan_without_axes_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracgauss(&with_base("scan", tmp.path(), &[]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sync_scaling_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracgauss(&[
        "sync-scaling",
        "--alpha",
        "1",
        "--beta",
        "-0.9",
        "--epsilon",
        "1",
        "--steps",
        "200",
        "--topology",
        "global",
        "--sizes",
        "4,8,16",
        "--ensemble-size",
        "3",
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(tmp.path().join("scaling.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("N,mean_T_N,stderr,count"));
    assert_eq!(lines.count(), 3);
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(summary.contains("ensemble_size=3\n") && summary.contains("censored_n16="));
}
