mod common;

use std::path::Path;
use std::process::{Command, Output};

use batchpic::deckfile::parse_deck_str;
use batchpic::vtk::read_field_dump;

fn batchpic(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_batchpic"));
    cmd.args(args).env_remove("BATCHPIC_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_small(dir: &Path) -> String {
    let path = dir.join("small.deck");
    std::fs::write(&path, common::SMALL).unwrap();
    path.display().to_string()
}

#[test]
fn help_and_version() {
    let o = batchpic(&["--help"], &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    for sub in ["run", "bench", "sweep", "compare"] {
        assert!(text.contains(sub), "{text}");
    }
    assert!(batchpic(&["--version"], &[]).status.success());
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(batchpic(&["frobnicate"], &[]).status.code(), Some(2));
    assert_eq!(
        batchpic(&["bench", "x.deck", "--cycles", "many"], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(batchpic(&["run"], &[]).status.code(), Some(2));
    assert_eq!(batchpic(&[], &[]).status.code(), Some(2));
}

#[test]
fn runtime_failures_are_categorised() {
    let dir = tempfile::tempdir().unwrap();
    let deck = write_small(dir.path());
    let o = batchpic(&["run", "/nonexistent/x.deck"], &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/x.deck"));
    let o = batchpic(&["run", &deck, "--set", "pipeline.batches=0"], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[pipeline].batches"));
    let o = batchpic(&["run", &deck, "--set", "bogus"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_then_compare_a_dump_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let deck = write_small(dir.path());
    let out = dir.path().join("out");
    let o = batchpic(
        &[
            "run",
            &deck,
            "--out",
            out.to_str().unwrap(),
            "--set",
            "output.field_every=3",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("3 cycles, 2048 particles"));
    let dump = out.join("fields_000003.vtk");
    let dump = dump.to_str().unwrap();

    let o = batchpic(&["compare", dump, dump], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 + 3 + 3);
    for row in rows {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0, "{row}");
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0, "{row}");
    }

    let first = out.join("fields_000000.vtk");
    let map = dir.path().join("err.vtk");
    let o = batchpic(
        &[
            "compare",
            first.to_str().unwrap(),
            dump,
            "--field",
            "rho_0",
            "--map",
            map.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);
    let err = read_field_dump(&map).unwrap();
    assert_eq!(err.blocks.len(), 1);
    assert!(err
        .block("rho_0")
        .unwrap()
        .component(0)
        .unwrap()
        .iter()
        .any(|&v| v > 0.0));

    let o = batchpic(
        &["compare", first.to_str().unwrap(), dump, "--field", "nope"],
        &[],
    );
    assert!(!o.status.success());
}

#[test]
fn bench_prints_mean_and_spread() {
    let dir = tempfile::tempdir().unwrap();
    let deck = write_small(dir.path());
    let o = batchpic(&["bench", &deck, "--cycles", "7", "--samples"], &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("cycle")).count(), 7);
    let last = text.lines().last().unwrap();
    assert!(
        last.starts_with("MPA/s") && last.contains('±') && last.ends_with("over 7 cycles"),
        "{last}"
    );
    assert!(!dir.path().join("batchpic_out").exists());
}

#[test]
fn sweep_reports_relative_throughput() {
    let dir = tempfile::tempdir().unwrap();
    let deck = write_small(dir.path());
    let o = batchpic(
        &["sweep", &deck, "--batches", "1,4,16", "--cycles", "2"],
        &[],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("relative"));
    assert_eq!(lines.len(), 4);
    let first: Vec<&str> = lines[1].split_whitespace().collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[3], "1.000");
}

#[test]
fn worker_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let deck = write_small(dir.path());
    let out = dir.path().join("out");
    let o = batchpic(
        &[
            "run",
            &deck,
            "--out",
            out.to_str().unwrap(),
            "--set",
            "time.cycles=1",
        ],
        &[("BATCHPIC_WORKERS", "3")],
    );
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let d = parse_deck_str(manifest["deck"].as_str().unwrap()).unwrap();
    assert_eq!(d.workers, 3);
    assert_eq!(d.cycles, 1);

    let o = batchpic(
        &[
            "run",
            &deck,
            "--out",
            out.to_str().unwrap(),
            "--set",
            "pipeline.workers=2",
        ],
        &[("BATCHPIC_WORKERS", "3")],
    );
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["deck"].as_str().unwrap().contains("workers = 2"));

    let o = batchpic(&["run", &deck], &[("BATCHPIC_WORKERS", "0")]);
    assert_eq!(o.status.code(), Some(2));
}
