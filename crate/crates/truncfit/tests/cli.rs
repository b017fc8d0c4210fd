//! End-to-end checks of the installed binary: flag surface, ingest
//! contract, exit codes, and output stability.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

static COUNTER: AtomicU32 = AtomicU32::new(0);

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_truncfit"))
}

fn temp_path(stem: &str) -> PathBuf {
    let id = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("truncfit-e2e-{stem}-{}-{id}", std::process::id()))
}

fn write_temp(stem: &str, content: &str) -> PathBuf {
    let path = temp_path(stem);
    fs::write(&path, content).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["fit", "--help"][..], &["--version"][..]] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {out:?}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["fit"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    // Zero draws is a usage error caught at parse time.
    let out = run(&[
        "synth",
        "--alpha",
        "0",
        "--psi",
        "0",
        "--lo",
        "0",
        "--hi",
        "1",
        "-n",
        "0",
        "--seed",
        "1",
        "--out",
        "/tmp/unused.dat",
    ]);
    assert_eq!(out.status.code(), Some(1));
    // --lo without --hi is rejected.
    let data = write_temp("pair", "0.1\n0.2\n0.9\n");
    let out = run(&["fit", "--input", data.to_str().unwrap(), "--lo", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_and_malformed_inputs_exit_one_with_diagnostics() {
    let out = run(&["fit", "--input", "/tmp/truncfit-definitely-missing.dat"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("not found"), "{out:?}");

    let bad = write_temp("bad", "1.0\nnot-a-number\n2.0\n");
    let out = run(&["fit", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("line 2"), "{out:?}");

    let empty = write_temp("empty", "# nothing but comments\n\n");
    let out = run(&["fit", "--input", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("no data"), "{out:?}");
}

#[test]
fn synth_writes_deterministic_files_in_ingest_format() {
    let a = temp_path("synth-a");
    let b = temp_path("synth-b");
    for out_path in [&a, &b] {
        let out = run(&[
            "synth",
            "--alpha",
            "1",
            "--psi",
            "0.25",
            "--lo",
            "-2",
            "--hi",
            "2",
            "-n",
            "100",
            "--seed",
            "77",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    let bytes_a = fs::read(&a).unwrap();
    assert_eq!(bytes_a, fs::read(&b).unwrap());
    let text = String::from_utf8(bytes_a).unwrap();
    let values: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 100);
    assert!(values.iter().all(|v| (-2.0..=2.0).contains(v)));
}

#[test]
fn fit_output_is_byte_stable_across_runs() {
    let data = temp_path("stable");
    run(&[
        "synth",
        "--alpha",
        "0.5",
        "--psi",
        "1",
        "--lo",
        "-2",
        "--hi",
        "2",
        "-n",
        "5000",
        "--seed",
        "9",
        "--out",
        data.to_str().unwrap(),
    ]);
    let args = [
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--lo",
        "-2",
        "--hi",
        "2",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    // Spot-check the frozen float shape: 12 significant digits.
    assert!(
        stdout_of(&first).contains("\"y_min\": -2.00000000000e0"),
        "{}",
        stdout_of(&first)
    );
}

#[test]
fn unconverged_fit_exits_two() {
    let data = temp_path("unconverged");
    run(&[
        "synth",
        "--alpha",
        "1",
        "--psi",
        "0.5",
        "--lo",
        "-2",
        "--hi",
        "2",
        "-n",
        "1000",
        "--seed",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]);
    let out = run(&["fit", "--input", data.to_str().unwrap(), "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(stdout_of(&out).contains("\"converged\": false"));
    assert!(stdout_of(&out).contains("\"iterations\": 1"));
}

#[test]
fn exponential_flag_pins_psi_and_notes_the_power_law() {
    let data = temp_path("expfit");
    run(&[
        "synth",
        "--alpha",
        "1",
        "--psi",
        "0",
        "--lo",
        "0",
        "--hi",
        "8",
        "-n",
        "20000",
        "--seed",
        "21",
        "--out",
        data.to_str().unwrap(),
    ]);
    let out = run(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--lo",
        "0",
        "--hi",
        "8",
        "--exponential",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = stdout_of(&out);
    assert!(text.contains("\"psi\": 0.00000000000e0"));
    assert!(text.contains("\"mu\": null"));
    assert!(text.contains("\"sigma\": null"));
    assert!(text.contains("psi constrained to 0"));
}

#[test]
fn lognormal_fit_reports_x_bounds_and_rejects_nonpositive_data() {
    // x = e^y for y drawn on [-1, 1]: all x in [1/e, e].
    let ydata = temp_path("ylog");
    run(&[
        "synth",
        "--alpha",
        "0.3",
        "--psi",
        "0.8",
        "--lo",
        "-1",
        "--hi",
        "1",
        "-n",
        "5000",
        "--seed",
        "13",
        "--out",
        ydata.to_str().unwrap(),
    ]);
    let y_text = fs::read_to_string(&ydata).unwrap();
    let x_text: String = y_text
        .lines()
        .map(|l| format!("{}\n", l.parse::<f64>().unwrap().exp()))
        .collect();
    let xdata = write_temp("xlog", &x_text);
    let e = std::f64::consts::E;
    let out = run(&[
        "fit",
        "--input",
        xdata.to_str().unwrap(),
        "--lognormal",
        "--lo",
        &format!("{}", 1.0 / e),
        "--hi",
        &format!("{e}"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = stdout_of(&out);
    assert!(text.contains("\"y_min\": -1.00000000000e0"), "{text}");
    assert!(text.contains("\"y_max\": 1.00000000000e0"), "{text}");
    assert!(text.contains("\"x_min\": 3.67879441171e-1"), "{text}");
    assert!(text.contains("\"x_max\": 2.71828182846e0"), "{text}");

    let mixed = write_temp("mixed", "1.0\n0.0\n2.0\n");
    let out = run(&["fit", "--input", mixed.to_str().unwrap(), "--lognormal"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("positive"), "{out:?}");
}

#[test]
fn bounds_must_bracket_the_data() {
    let data = write_temp("bracket", "0.1\n0.5\n0.9\n1.4\n");
    let out = run(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--lo",
        "0.2",
        "--hi",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("bracket"), "{out:?}");
}

#[test]
fn text_format_renders_line_per_field() {
    let data = write_temp("textout", "0.12\n0.37\n0.55\n0.61\n0.78\n0.93\n");
    let out = run(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--lo",
        "0",
        "--hi",
        "1",
        "--format",
        "text",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = stdout_of(&out);
    assert!(!text.contains('{'));
    for needle in ["alpha", "psi", "beta", "converged", "n"] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }
}
