//! End-to-end tests driving the `kga` binary: every subcommand, the config
//! precedence chain, output layout, determinism, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const TRAIN: &str = "a\tlikes\tb\nb\tlikes\tc\nc\tlikes\td\nd\tlikes\ta\na\tlikes\td\nb\tlikes\ta\n";
const VALID: &str = "a\tlikes\tc\n";
const TEST: &str = "b\tlikes\td\n";
const NUM_TRAIN: &str = "a\tage\t10\nb\tage\t20\nc\tage\t30\nd\tage\t40\n";
const NUM_TEST: &str = "c\tage\t35\n";

/// Tiny four-entity dataset in a fresh directory; the binary always runs
/// with that directory as its working directory so relative paths (and the
/// config hash over them) are stable across runs.
struct Setup {
    dir: TempDir,
}

impl Setup {
    fn new() -> Setup {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        std::fs::create_dir(&data).unwrap();
        for (name, text) in [
            ("train.tsv", TRAIN),
            ("valid.tsv", VALID),
            ("test.tsv", TEST),
            ("numeric_train.tsv", NUM_TRAIN),
            ("numeric_test.tsv", NUM_TEST),
        ] {
            std::fs::write(data.join(name), text).unwrap();
        }
        Setup { dir }
    }

    fn kga(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_kga"))
            .current_dir(self.dir.path())
            .env_remove("KGA_THREADS")
            .args(args)
            .output()
            .unwrap()
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn bytes(&self, rel: &str) -> Vec<u8> {
        std::fs::read(self.path(rel)).unwrap_or_else(|e| panic!("read {rel}: {e}"))
    }

    fn json(&self, rel: &str) -> Value {
        serde_json::from_slice(&self.bytes(rel)).unwrap_or_else(|e| panic!("parse {rel}: {e}"))
    }
}

fn stdout_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed ({:?})\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const DATA: &[&str] = &[
    "--train",
    "data/train.tsv",
    "--valid",
    "data/valid.tsv",
    "--test",
    "data/test.tsv",
    "--numeric-train",
    "data/numeric_train.tsv",
    "--numeric-test",
    "data/numeric_test.tsv",
];

const FAST_TRAIN: &[&str] =
    &["--dim", "8", "--epochs", "5", "--learning-rate", "0.1", "--batch-size", "4", "--seed", "7"];

fn args(groups: &[&[&str]]) -> Vec<String> {
    groups.iter().flat_map(|g| g.iter().map(|s| s.to_string())).collect()
}

fn run(s: &Setup, groups: &[&[&str]]) -> Output {
    let a = args(groups);
    s.kga(&a.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn stats_reports_dataset_counts() {
    let s = Setup::new();
    let out = run(&s, &[DATA, &["stats"]]);
    let stats: Value = serde_json::from_str(&stdout_ok(&out)).unwrap();
    assert_eq!(stats["entities"], 4);
    assert_eq!(stats["relations"], 1);
    assert_eq!(stats["entity_triples"], 8); // 6 train + 1 valid + 1 test
    assert_eq!(stats["attributes"], 1);
    assert_eq!(stats["numeric_triples"], 5);
}

#[test]
fn bin_reruns_are_byte_identical_and_structures_hold() {
    let s = Setup::new();
    stdout_ok(&run(&s, &[DATA, &["--bins", "4", "--levels", "hierarchy", "--out-dir", "h", "bin"]]));
    let first = s.bytes("h/bins/bins.json");
    stdout_ok(&run(&s, &[DATA, &["--bins", "4", "--levels", "hierarchy", "--out-dir", "h", "bin"]]));
    assert_eq!(first, s.bytes("h/bins/bins.json"), "rerun changed bins.json");

    // Depth-2 binary hierarchy over four distinct values: 1 + 2 + 4 bins.
    let dict = &s.json("h/bins/bins.json")["attributes"]["age"];
    assert_eq!(dict["bins"].as_array().unwrap().len(), 7);
    assert_eq!(dict["level_starts"], serde_json::json!([0, 1, 3]));

    stdout_ok(&run(&s, &[DATA, &["--bins", "1", "--out-dir", "one", "bin"]]));
    let dict = &s.json("one/bins/bins.json")["attributes"]["age"];
    assert_eq!(dict["bins"].as_array().unwrap().len(), 1);
    assert_eq!(dict["boundaries"][0], serde_json::json!([10.0, 40.0]));

    // manifest.json carries the config identity, nothing volatile.
    let manifest = s.json("one/manifest.json");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["tool_version"].is_string());
}

#[test]
fn augment_manifest_matches_written_triples() {
    let s = Setup::new();
    stdout_ok(&run(&s, &[DATA, &["--bins", "2", "--out-dir", "out", "augment"]]));
    let m = s.json("out/augmented/manifest.json");
    assert_eq!(m["original_entity_triples"], 6);
    assert_eq!(m["bin_entities"], 2);
    assert_eq!(m["assignment_triples"], 4);
    assert_eq!(m["chain_triples"], 1);
    assert_eq!(m["parent_triples"], 0);
    assert_eq!(m["total_entity_triples"], 11);

    let tsv = String::from_utf8(s.bytes("out/augmented/train.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 11);
    assert!(tsv.contains("a\tage\tage::L0::B0::[10,30)"));
    assert!(tsv.contains("\tkga:next\t"));
}

#[test]
fn augment_without_matching_literals_preserves_input() {
    // `age` values are plain quantities; restricting augmentation to year
    // literals leaves nothing to discretize and the graph passes through.
    let s = Setup::new();
    stdout_ok(&run(&s, &[DATA, &["--literals", "year", "--out-dir", "out", "augment"]]));
    assert_eq!(s.bytes("out/augmented/train.tsv"), TRAIN.as_bytes());
    let m = s.json("out/augmented/manifest.json");
    assert_eq!(m["bin_entities"], 0);
    assert_eq!(m["total_entity_triples"], 6);
}

#[test]
fn train_zero_epochs_checkpoints_initial_model() {
    let s = Setup::new();
    stdout_ok(&run(&s, &[DATA, &["--dim", "8", "--epochs", "0", "--seed", "7", "--out-dir", "z", "train"]]));
    assert!(s.path("z/checkpoints/epoch_0000.ckpt").is_file());
    let log = s.json("z/checkpoints/training.json");
    assert_eq!(log["best"], "epoch_0000.ckpt");
    assert_eq!(log["epochs"].as_array().unwrap().len(), 0);
}

#[test]
fn train_reruns_are_byte_identical() {
    let s = Setup::new();
    let trainer = |out: &str| {
        let dir_flag = ["--out-dir", out, "train"];
        stdout_ok(&run(&s, &[DATA, FAST_TRAIN, &dir_flag]));
    };
    trainer("runs");
    let ckpt = s.bytes("runs/checkpoints/epoch_0005.ckpt");
    let log = s.bytes("runs/checkpoints/training.json");
    std::fs::remove_dir_all(s.path("runs")).unwrap();
    trainer("runs");
    assert_eq!(ckpt, s.bytes("runs/checkpoints/epoch_0005.ckpt"));
    assert_eq!(log, s.bytes("runs/checkpoints/training.json"));
}

#[test]
fn eval_writes_reports_in_every_mode() {
    let s = Setup::new();
    stdout_ok(&run(&s, &[DATA, FAST_TRAIN, &["--out-dir", "e", "train"]]));

    // Default filtered mode, best checkpoint resolved from the training log.
    stdout_ok(&run(&s, &[DATA, FAST_TRAIN, &["--out-dir", "e", "eval"]]));
    let rep = s.json("e/reports/eval.json");
    assert_eq!(rep["mode"], "filtered");
    assert_eq!(rep["n_triples"], 1);
    let mrr = rep["mrr"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mrr), "mrr {mrr} out of range");
    // A model trained on the raw graph has no bin entities, so no numeric
    // section appears (the augmented round-trip test covers the present case).
    assert!(rep.get("numeric").is_none());
    assert!(s.path("e/reports/eval.txt").is_file());

    // Sampled mode records its pool size.
    stdout_ok(&run(
        &s,
        &[DATA, FAST_TRAIN, &["--out-dir", "e", "--eval-mode", "sampled", "--sampled-C", "2", "eval"]],
    ));
    assert_eq!(s.json("e/reports/eval.json")["C"], 2);

    // Unfiltered mode omits the sampled pool size.
    stdout_ok(
        &run(&s, &[DATA, FAST_TRAIN, &["--out-dir", "e", "--eval-mode", "unfiltered", "eval"]]),
    );
    let rep = s.json("e/reports/eval.json");
    assert_eq!(rep["mode"], "unfiltered");
    assert!(rep.get("C").is_none());
}

#[test]
fn eval_compare_writes_delta_table() {
    let s = Setup::new();
    stdout_ok(&run(&s, &[DATA, FAST_TRAIN, &["--out-dir", "a", "train"]]));
    stdout_ok(&run(&s, &[DATA, FAST_TRAIN, &["--out-dir", "a", "eval"]]));
    stdout_ok(&run(&s, &[DATA, FAST_TRAIN, &["--out-dir", "b", "train"]]));
    let out = run(
        &s,
        &[DATA, FAST_TRAIN, &["--out-dir", "b", "eval", "--compare", "a/reports/eval.json"]],
    );
    let text = stdout_ok(&out);
    assert!(text.contains("delta"), "comparison table missing from output:\n{text}");
    let table = String::from_utf8(s.bytes("b/reports/compare.txt")).unwrap();
    assert!(table.contains("mrr") && table.contains("delta"));
}

#[test]
fn augmented_train_round_trips_through_eval() {
    // bin -> augment -> train on the augmented file -> eval: the checkpoint
    // vocabulary must line up even though bin entities reload from TSV.
    let s = Setup::new();
    stdout_ok(&run(&s, &[DATA, &["--bins", "2", "--out-dir", "p", "augment"]]));
    let aug: &[&str] = &["--train", "p/augmented/train.tsv", "--augmented-train"];
    let rest: &[&str] = &[
        "--valid",
        "data/valid.tsv",
        "--test",
        "data/test.tsv",
        "--numeric-train",
        "data/numeric_train.tsv",
        "--numeric-test",
        "data/numeric_test.tsv",
        "--bins",
        "2",
        "--out-dir",
        "p",
    ];
    stdout_ok(&run(&s, &[aug, rest, FAST_TRAIN, &["train"]]));
    stdout_ok(&run(&s, &[aug, rest, FAST_TRAIN, &["eval"]]));
    let rep = s.json("p/reports/eval.json");
    // Numeric prediction works because bin entities were re-marked synthetic.
    assert!(rep["numeric"]["age"]["mae"].is_number());
}

#[test]
fn usage_errors_exit_one() {
    let s = Setup::new();
    let out = run(&s, &[&["--set", "nope=1"], DATA, &["stats"]]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("unknown config key"));

    let out = s.kga(&["stats"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("train"));

    let out = s.kga(&["--set", "bins=zero", "stats"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let s = Setup::new();
    let out = s.kga(&["--train", "data/absent.tsv", "stats"]);
    assert_eq!(out.status.code(), Some(2));

    // Checkpoint trained on the augmented graph cannot score the raw one.
    stdout_ok(&run(&s, &[DATA, &["--bins", "2", "--out-dir", "m", "augment"]]));
    stdout_ok(&run(
        &s,
        &[
            &["--train", "m/augmented/train.tsv", "--augmented-train", "--bins", "2"],
            FAST_TRAIN,
            &["--out-dir", "m", "train"],
        ],
    ));
    let out = run(
        &s,
        &[
            DATA,
            FAST_TRAIN,
            &["--out-dir", "m2", "eval", "--checkpoint", "m/checkpoints/epoch_0005.ckpt"],
        ],
    );
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("vocabulary hash mismatch"));
}

#[test]
fn divergence_exits_three() {
    let s = Setup::new();
    let out = run(
        &s,
        &[
            DATA,
            &["--model", "distmult", "--dim", "8", "--epochs", "3"],
            &["--learning-rate", "1e12", "--batch-size", "4", "--seed", "1"],
            &["--out-dir", "d", "train"],
        ],
    );
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("diverged"));
}

#[test]
fn grid_completes_and_resumes_without_recomputing() {
    let s = Setup::new();
    let grid: &[&str] = &[
        "--set",
        "grid_variants=QSC,FON",
        "--set",
        "grid_bins=2",
        "--out-dir",
        "g",
        "grid",
    ];
    stdout_ok(&run(&s, &[DATA, FAST_TRAIN, grid]));
    let rows = s.json("g/reports/grid.json");
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row["status"], "ok", "row {row}");
        assert!(row["mrr"].is_number());
    }
    let matrix = String::from_utf8(s.bytes("g/reports/grid.txt")).unwrap();
    assert!(matrix.contains("QSC") && matrix.contains("FON"));

    let ckpt = s.path("g/grid/QSC-2/checkpoints/epoch_0005.ckpt");
    let mtime = std::fs::metadata(&ckpt).unwrap().modified().unwrap();
    let first_report = s.bytes("g/reports/grid.json");

    let text = stdout_ok(&run(&s, &[DATA, FAST_TRAIN, grid]));
    assert!(text.contains("already complete"), "resume message missing:\n{text}");
    assert_eq!(std::fs::metadata(&ckpt).unwrap().modified().unwrap(), mtime, "cell was retrained");
    assert_eq!(first_report, s.bytes("g/reports/grid.json"));
}

#[test]
fn config_precedence_is_defaults_file_set_flags() {
    let s = Setup::new();
    std::fs::write(
        s.path("exp.conf"),
        "# experiment\nbins = 4\nout_dir = from_file\ntrain = data/train.tsv\nnumeric_train = data/numeric_train.tsv\n",
    )
    .unwrap();

    // File alone: bins=4, out_dir=from_file.
    stdout_ok(&s.kga(&["--config", "exp.conf", "bin"]));
    let dict = &s.json("from_file/bins/bins.json")["attributes"]["age"];
    assert_eq!(dict["bins"].as_array().unwrap().len(), 4);

    // --set overrides the file; dedicated flag overrides --set.
    stdout_ok(&s.kga(&[
        "--config",
        "exp.conf",
        "--set",
        "bins=2",
        "--bins",
        "3",
        "--out-dir",
        "flags",
        "bin",
    ]));
    let dict = &s.json("flags/bins/bins.json")["attributes"]["age"];
    assert_eq!(dict["bins"].as_array().unwrap().len(), 3);
}

#[test]
fn help_documents_config_keys_and_version_prints() {
    let s = Setup::new();
    let text = stdout_ok(&s.kga(&["--help"]));
    for key in ["learning_rate", "grid_variants", "eval_mode", "KGA_THREADS"] {
        assert!(text.contains(key), "--help missing {key}");
    }
    let v = stdout_ok(&s.kga(&["--version"]));
    assert!(v.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn thread_env_var_is_validated() {
    let s = Setup::new();
    let out = Command::new(env!("CARGO_BIN_EXE_kga"))
        .current_dir(s.dir.path())
        .env("KGA_THREADS", "zero")
        .args(args(&[DATA, FAST_TRAIN, &["--out-dir", "t", "train"]]))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("KGA_THREADS"));

    let out = Command::new(env!("CARGO_BIN_EXE_kga"))
        .current_dir(s.dir.path())
        .env("KGA_THREADS", "2")
        .args(args(&[DATA, FAST_TRAIN, &["--out-dir", "t", "train"]]))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
}

#[test]
fn stats_and_bin_paths_reject_reserved_relations() {
    // Raw data may not use the structural relation names the augmenter owns.
    let s = Setup::new();
    std::fs::write(s.path("data/bad.tsv"), "a\tkga:next\tb\n").unwrap();
    let out = s.kga(&["--train", "data/bad.tsv", "stats"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("kga:next"));
}
