use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn nerkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nerkit")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name).to_string_lossy().into_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const TINY_BILSTM: &str = r#"
seed = 3
output_dir = "runs"

[data]
train = "train.conll"

[model.embedding]
word_dim = 16
char_dim = 8
char_inner_dim = 8

[model.bilstm]
hidden_total = 32

[optimizer]
epochs = 4
batch_size = 4
peak_lr = 0.01
"#;

fn run_dir_with(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("toy_train.conll"), dir.path().join("train.conll")).unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn only_run(dir: &Path) -> PathBuf {
    let runs: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1, "{runs:?}");
    runs.into_iter().next().unwrap()
}

#[test]
fn convert_toy_pubtator_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = nerkit(&["convert", "--format", "pubtator", "--input", &fixture("toy.pubtator"), "--output", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let produced = fs::read(dir.path().join("out/corpus.conll")).unwrap();
    assert_eq!(produced, fs::read(fixture("toy_pubtator.golden.conll")).unwrap());
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["corpus"]["num_entities"], 11);
    assert_eq!(stats["corpus"]["num_documents"], 2);
}

#[test]
fn convert_empty_input_gives_empty_output_and_zero_stats() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.txt"), "").unwrap();
    let o = nerkit(&["convert", "--format", "pubtator", "--input", "empty.txt", "--output", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("out/corpus.conll")).unwrap(), b"");
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/stats.json")).unwrap()).unwrap();
    for key in ["num_types", "num_documents", "num_tokens", "num_entities"] {
        assert_eq!(stats["corpus"][key], 0, "{key}");
    }
}

#[test]
fn convert_i2b2_directory_and_report_stats() {
    let dir = tempfile::tempdir().unwrap();
    let o = nerkit(&["convert", "--format", "i2b2", "--input", &fixture("i2b2"), "--output", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let conll = fs::read_to_string(dir.path().join("out/corpus.conll")).unwrap();
    assert!(conll.contains("weaker\tB-problem\nthan\tI-problem\nusual\tI-problem\n"));
    let o = nerkit(&["stats", "--format", "conll", "--input", "out/corpus.conll"], dir.path());
    assert!(o.status.success());
    let line = stdout(&o).lines().nth(1).unwrap().split_whitespace().collect::<Vec<_>>().join(" ");
    assert_eq!(line, "corpus 1 65 7 3");
}

#[test]
fn eval_worked_example_has_no_true_positive() {
    let dir = tempfile::tempdir().unwrap();
    let o = nerkit(&["eval", &data("worked_gold.conll"), &data("worked_pred.conll"), "--out", "r"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&dir.path().join("r"));
    assert_eq!(r["micro"]["true_positives"], 0);
    assert_eq!(r["micro"]["precision"], 0.0);
    assert_eq!(r["micro"]["recall"], 0.0);
}

#[test]
fn eval_gold_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let gold = fixture("toy_train.conll");
    let o = nerkit(&["eval", &gold, &gold, "--out", "r"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&dir.path().join("r"));
    assert_eq!(r["micro"]["f1"], 1.0);
    assert_eq!(r["micro"]["true_positives"], 80);
}

#[test]
fn eval_counts_one_error_of_each_category() {
    let dir = tempfile::tempdir().unwrap();
    let o = nerkit(&["eval", &data("categories_gold.conll"), &data("categories_pred.conll"), "--out", "r"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let e = &report(&dir.path().join("r"))["errors"];
    let counts: Vec<u64> = [
        "right_span_wrong_label",
        "right_label_overlapping_span",
        "wrong_label_overlapping_span",
        "complete_false_positive",
        "complete_false_negative",
    ]
    .iter()
    .map(|k| e[k].as_u64().unwrap())
    .collect();
    assert_eq!(counts, [1, 1, 1, 1, 1]);
    assert_eq!(e["true_positive"], 0);
}

#[test]
fn misaligned_files_fail_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pred.conll"), "The\tO\npatient\tO\nhad\tB-prob\na\tI-prob\nfever\tO\n\n").unwrap();
    let o = nerkit(&["eval", &data("worked_gold.conll"), "pred.conll"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(dir.path().join("short.conll"), "The\tO\npatient\tO\n\n").unwrap();
    let o = nerkit(&["eval", &data("worked_gold.conll"), "short.conll"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line "), "{}", stderr(&o));
}

#[test]
fn compare_lists_entities_found_by_one_system() {
    let dir = tempfile::tempdir().unwrap();
    let gold = data("categories_gold.conll");
    let o = nerkit(&["compare", &gold, &gold, &data("categories_pred.conll")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("only A: 4\nonly B: 0\nboth: 0\nneither: 0\n"), "{out}");
    assert!(out.contains("treatment\tIV fluids"));
}

#[test]
fn train_writes_a_run_directory() {
    let dir = run_dir_with(TINY_BILSTM);
    let o = nerkit(&["train", "run.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = only_run(&dir.path().join("runs"));
    let name = run.file_name().unwrap().to_string_lossy().into_owned();
    assert!(name.starts_with("run-") && name.ends_with("-seed3"), "{name}");
    for f in ["checkpoint.bin", "config.toml", "train_log.jsonl", "predictions.conll", "report.json", "summary.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let log = fs::read_to_string(run.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
    let last: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    assert!(last["dev_f1"].as_f64().is_some());

    // The checkpoint alone reproduces the run's predictions.
    let o = nerkit(
        &["predict", "--checkpoint", run.join("checkpoint.bin").to_str().unwrap(), "--input", "train.conll", "--format", "conll", "--output", "again.conll"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("again.conll")).unwrap(), fs::read(run.join("predictions.conll")).unwrap());

    let text = "The patient had chest pain.\nAspirin was given.\n";
    fs::write(dir.path().join("note.txt"), text).unwrap();
    let o = nerkit(&["predict", "--checkpoint", run.join("checkpoint.bin").to_str().unwrap(), "--input", "note.txt"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let tokens: Vec<&str> = out.lines().filter(|l| !l.is_empty() && !l.starts_with("-DOCSTART-")).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(tokens.join(" "), "The patient had chest pain . Aspirin was given .");
}

#[test]
fn same_config_and_seed_train_identically() {
    let dir = run_dir_with(TINY_BILSTM);
    let a = nerkit(&["train", "run.toml", "--output-dir", "a"], dir.path());
    let b = nerkit(&["train", "run.toml", "--output-dir", "b"], dir.path());
    assert!(a.status.success() && b.status.success());
    let (ra, rb) = (only_run(&dir.path().join("a")), only_run(&dir.path().join("b")));
    assert_eq!(ra.file_name(), rb.file_name());
    for f in ["train_log.jsonl", "predictions.conll", "summary.json", "checkpoint.bin"] {
        assert_eq!(fs::read(ra.join(f)).unwrap(), fs::read(rb.join(f)).unwrap(), "{f}");
    }
    let c = nerkit(&["train", "run.toml", "--output-dir", "c", "--seed", "4"], dir.path());
    assert!(c.status.success());
    assert!(only_run(&dir.path().join("c")).to_string_lossy().ends_with("-seed4"));
}

#[test]
fn configuration_errors_exit_with_status_two() {
    let dir = run_dir_with(&TINY_BILSTM.replace("peak_lr = 0.01", "peak_lr = \"fast\""));
    let o = nerkit(&["train", "run.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("peak_lr"), "{}", stderr(&o));
    assert!(!dir.path().join("runs").exists());

    let dir = run_dir_with(&TINY_BILSTM.replace("train.conll", "missing.conll"));
    assert_eq!(nerkit(&["train", "run.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(nerkit(&["train", "nowhere.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(nerkit(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(
        nerkit(&["convert", "--format", "pubtator", "--input", "train.conll", "--output", "o", "--scheme", "custom"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn cross_validation_reports_the_chosen_point() {
    let config = TINY_BILSTM.replace("[optimizer]", "[cv]\nfolds = 2\nbatch_sizes = [8]\nlearning_rates = [0.01]\nepochs = [1, 2]\n\n[optimizer]");
    let dir = run_dir_with(&config);
    let o = nerkit(&["cv", "run.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = only_run(&dir.path().join("runs"));
    let cv: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("cv.json")).unwrap()).unwrap();
    assert_eq!(cv["scores"].as_array().unwrap().len(), 2);
    assert_eq!(cv["scores"][0]["fold_f1"].as_array().unwrap().len(), 2);
    assert_eq!(cv["chosen"]["batch_size"], 8);
    assert!(stdout(&o).contains("chosen: batch_size = 8"));
}

#[test]
fn bundled_example_configs_train() {
    let dir = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["toy_bilstm_crf.toml", "toy_encoder.toml"] {
        let cfg = configs.join(name);
        let out = dir.path().join(name);
        let o = nerkit(&["train", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(only_run(&out).join("summary.json")).unwrap()).unwrap();
        assert!(summary["best_dev_f1"].as_f64().unwrap() >= 0.9, "{name}: {summary}");
    }
}
