//! End-to-end checks of the `dualrl` binary against its documented behaviour.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dualrl::{value_iteration, GridWorld, LookupTable};
use tempfile::TempDir;

fn dualrl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualrl"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dualrl(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = dualrl(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

const SMALL: [&str; 4] = ["--trials", "3", "--seeds", "1..2"];

#[test]
fn run_writes_data_files_and_summary_line() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(tmp.path(), &[&["run", "--out", "o"], &SMALL[..]].concat());
    assert!(stdout.starts_with("dual: 2 seeds x 3 trials"), "{stdout}");
    for file in [
        "trials.csv",
        "summary.csv",
        "config.resolved",
        "result.json",
    ] {
        assert!(!read(tmp.path().join("o").join(file)).is_empty(), "{file}");
    }
    let trials = read(tmp.path().join("o/trials.csv"));
    let mut lines = trials.lines();
    assert_eq!(
        lines.next(),
        Some("seed,trial,steps,simulated_time,mean_response_time,mb_fraction,truncated")
    );
    assert_eq!(lines.count(), 2 * 3);
    assert_eq!(
        read(tmp.path().join("o/summary.csv")).lines().count(),
        1 + 3
    );
}

#[test]
fn defaults_are_echoed() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &["run", "--out", "o", "--trials", "1", "--seeds", "1"],
    );
    let cfg: toml::Table = read(tmp.path().join("o/config.resolved")).parse().unwrap();
    assert_eq!(cfg["controller"].as_str(), Some("dual"));
    assert_eq!(cfg["factor"].as_integer(), Some(5));
    assert_eq!(cfg["chunk_size"].as_integer(), Some(4));
    assert_eq!(cfg["width"].as_integer(), Some(10));
    assert_eq!(cfg["height"].as_integer(), Some(10));
    assert_eq!(cfg["depth"].as_integer(), Some(4));
    assert_eq!(cfg["gamma"].as_float(), Some(0.9));
}

#[test]
fn greedy_pure_mf_is_labelled() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[
            "run",
            "--out",
            "o",
            "--controller",
            "pure-mf",
            "--epsilon",
            "0",
            "--trials",
            "2",
            "--seeds",
            "1",
            "--width",
            "4",
            "--height",
            "4",
        ],
    );
    let cfg: toml::Table = read(tmp.path().join("o/config.resolved")).parse().unwrap();
    assert_eq!(cfg["controller"].as_str(), Some("pure-mf"));
    assert_eq!(cfg["epsilon"].as_float(), Some(0.0));
    let result: serde_json::Value =
        serde_json::from_str(&read(tmp.path().join("o/result.json"))).unwrap();
    assert_eq!(result["metadata"]["controller"], "pure-mf");
    assert!(result["metadata"]["exploration"]
        .as_str()
        .unwrap()
        .contains("greedy"));
}

#[test]
fn invalid_inputs_exit_nonzero() {
    let tmp = TempDir::new().unwrap();
    assert!(fails(tmp.path(), &["run", "--factor", "0"]).contains("factor"));
    assert!(fails(tmp.path(), &["run", "--chunk-size", "0"]).contains("chunk"));
    assert!(fails(tmp.path(), &["run", "--gamma", "1.5"]).contains("gamma"));
    fails(tmp.path(), &["run", "--seeds", "5..2"]);
    fails(tmp.path(), &["run", "--controller", "telepathy"]);
    fails(tmp.path(), &["run", "--map", "missing.txt"]);
    fails(
        tmp.path(),
        &["dump-table", "--trials", "2", "--after-trial", "3"],
    );

    fs::write(tmp.path().join("typo.toml"), "trails = 4\n").unwrap();
    assert!(fails(tmp.path(), &["run", "--config", "typo.toml"]).contains("trails"));
    fs::write(tmp.path().join("broken.toml"), "trials = [\n").unwrap();
    fails(tmp.path(), &["run", "--config", "broken.toml"]);
    // Nothing ran, so nothing was written.
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("cfg.toml"),
        "trials = 5\ngamma = 0.8\nseeds = \"1..2\"\nwidth = 4\nheight = 3\n",
    )
    .unwrap();
    ok(
        tmp.path(),
        &["run", "--config", "cfg.toml", "--trials", "2", "--out", "o"],
    );
    let cfg: toml::Table = read(tmp.path().join("o/config.resolved")).parse().unwrap();
    assert_eq!(cfg["trials"].as_integer(), Some(2));
    assert_eq!(cfg["gamma"].as_float(), Some(0.8));
    assert_eq!(cfg["width"].as_integer(), Some(4));
    assert_eq!(cfg["alpha"].as_float(), Some(0.1));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[&["run", "--out", "a", "--slip-prob", "0.1"], &SMALL[..]].concat(),
    );
    ok(
        tmp.path(),
        &["run", "--config", "a/config.resolved", "--out", "b"],
    );
    for file in ["trials.csv", "summary.csv", "result.json"] {
        assert_eq!(
            read(tmp.path().join("a").join(file)),
            read(tmp.path().join("b").join(file)),
            "{file}"
        );
    }
}

#[test]
fn compare_layout_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &'static str| -> Vec<&'static str> {
        vec![
            "run",
            "--compare",
            "mb,mf,dual",
            "--out",
            out,
            "--trials",
            "3",
            "--seeds",
            "1..3",
            "--width",
            "5",
            "--height",
            "5",
        ]
    };
    let stdout = ok(tmp.path(), &args("a"));
    assert_eq!(stdout.lines().filter(|l| l.contains("seeds x")).count(), 3);
    ok(tmp.path(), &args("b"));
    let mut sequential = args("c");
    sequential.extend(["--parallel", "false"]);
    ok(tmp.path(), &sequential);

    let comparison = read(tmp.path().join("a/comparison.csv"));
    let header = comparison.lines().next().unwrap();
    assert!(header.starts_with("trial,mb_steps_mean"));
    assert!(header.contains("mf_steps_mean") && header.contains("dual_mean_response_time_mean"));
    assert_eq!(comparison.lines().count(), 1 + 3);

    // The echoed configs differ only in the output directory.
    let strip = |d: &str| {
        read(tmp.path().join(d).join("config.resolved")).replace(&format!("out = \"{d}\""), "")
    };
    assert_eq!(strip("a"), strip("b"));
    assert_eq!(strip("a"), strip("c"));

    let mut files = vec!["comparison.csv".to_string()];
    for label in ["mb", "mf", "dual"] {
        for f in ["trials.csv", "summary.csv", "result.json"] {
            files.push(format!("{label}/{f}"));
        }
    }
    for f in &files {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(tmp.path().join("c").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn compare_subcommand_accepts_controller_list() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[
            "compare",
            "--controllers",
            "weighted,uncertainty",
            "--out",
            "o",
            "--trials",
            "2",
            "--seeds",
            "1",
            "--width",
            "4",
            "--height",
            "4",
        ],
    );
    assert!(tmp.path().join("o/weighted/trials.csv").exists());
    assert!(tmp.path().join("o/uncertainty/trials.csv").exists());
    let result: serde_json::Value =
        serde_json::from_str(&read(tmp.path().join("o/uncertainty/result.json"))).unwrap();
    assert!(result["metadata"]["arbitration_note"]
        .as_str()
        .unwrap()
        .contains("simplified"));
}

#[test]
fn map_files_and_single_precision() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("maze.txt"), "S..#\n.#..\n...G\n").unwrap();
    let stdout = ok(
        tmp.path(),
        &[
            "run",
            "--map",
            "maze.txt",
            "--precision",
            "f32",
            "--trials",
            "4",
            "--seeds",
            "1,2",
            "--out",
            "o",
        ],
    );
    assert!(stdout.contains("2 seeds x 4 trials"));
    assert_eq!(read(tmp.path().join("o/trials.csv")).lines().count(), 1 + 8);
}

#[test]
fn dump_table_at_zero_is_the_initial_table() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[
            "dump-table",
            "--after-trial",
            "0",
            "--seed",
            "4",
            "--out",
            "o",
        ],
    );
    let dumped = read(tmp.path().join("o/table_seed4_trial0.json"));
    let world = GridWorld::<f64>::default_task();
    let init = LookupTable::init(&world, 0.9, 0.1).unwrap();
    assert_eq!(dumped, init.to_json().unwrap() + "\n");
    assert_eq!(LookupTable::<f64>::from_json(&dumped).unwrap(), init);
}

#[test]
fn dump_table_after_training_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let args = |out| ["dump-table", "--seed", "1", "--trials", "100", "--out", out];
    ok(tmp.path(), &args("a"));
    ok(tmp.path(), &args("b"));
    let a = read(tmp.path().join("a/table_seed1_trial100.json"));
    assert_eq!(a, read(tmp.path().join("b/table_seed1_trial100.json")));

    // The smoothed model keeps prior mass on non-intended successors, so the
    // learned start value sits strictly between zero and the true optimum.
    let world = GridWorld::<f64>::default_task();
    let table = LookupTable::<f64>::from_json(&a).unwrap();
    let oracle = value_iteration(&world, 0.9, 1e-10).unwrap().optimal_values[world.start().0];
    let learned = table.value(world.start());
    assert!(
        learned > 0.0 && learned <= oracle,
        "learned {learned}, oracle {oracle}"
    );
}
