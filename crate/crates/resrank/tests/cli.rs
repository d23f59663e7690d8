//! The command line, driven in-process and through the built binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use resrank::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use resrank::cli::run;
use resrank::dataset::load_dataset;
use resrank_core::init_params;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Out {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let full = std::iter::once("resrank").chain(args.iter().copied());
    let code = run(full, &mut out, &mut err);
    Out {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small generated dataset: 12 groups of 9 items, d = 8.
fn small_dataset(dir: &Path) -> PathBuf {
    let path = dir.join("data.jsonl");
    let r = cli(&["generate", "--out", p(&path), "--groups", "12", "--items", "9", "--dim", "8", "--seed", "3"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    path
}

#[test]
fn generate_writes_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let r = cli(&["generate", "--out", p(&path), "--seed", "42", "--groups", "5"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("wrote 5 lists, 150 items"));
    assert!(r.stdout.contains("label oracle"));
    assert_eq!(load_dataset(&path).unwrap().len(), 5);
}

#[test]
fn usage_errors_exit_2() {
    let r = cli(&["generate"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("--out"));
    assert_eq!(cli(&["train", "--data", "x", "--out-dir", "y", "--lr", "0"]).code, 2);
    assert_eq!(cli(&["frobnicate"]).code, 2);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("d.jsonl");
    assert_eq!(cli(&["generate", "--out", p(&target)]).code, 3);
}

#[test]
fn corrupt_dataset_line_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let mut text = std::fs::read_to_string(&data).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    text = format!("{}\n{}\n{{broken\n", lines[0], lines[1]);
    std::fs::write(&data, text).unwrap();
    let r = cli(&["train", "--data", p(&data), "--out-dir", p(&dir.path().join("o"))]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains(":3:"), "{}", r.stderr);
}

#[test]
fn default_training_writes_ten_folds() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("run");
    let r = cli(&["train", "--data", p(&data), "--out-dir", p(&out), "--epochs", "1", "--heads", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let ckpts = (0..10).filter(|i| out.join(format!("fold-{i:02}.ckpt")).exists()).count();
    assert_eq!(ckpts, 10);
    assert!(r.stdout.contains("fold 9 pointwise"));
    assert!(r.stdout.contains("mean model"));
    let log = std::fs::read_to_string(out.join("fold-00.log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
}

#[test]
fn holdout_mode_trains_one_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("run");
    let r = cli(&[
        "--json", "train", "--data", p(&data), "--out-dir", p(&out), "--folds", "1", "--holdout", "0.25", "--epochs", "2",
        "--heads", "2",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["folds"].as_array().unwrap().len(), 1);
    assert_eq!(v["folds"][0]["test_groups"], 3);
    let ckpt = load_checkpoint(out.join("model.ckpt")).unwrap();
    assert_eq!(ckpt.seed, 42);
    assert_eq!(ckpt.config.unwrap().epochs, 2);
    assert_eq!(cli(&["train", "--data", p(&data), "--out-dir", p(&out), "--holdout", "0.2"]).code, 2);
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let r = cli(&[
        "train", "--data", p(&data), "--out-dir", p(&dir.path().join("o")), "--folds", "1", "--lr", "1e300", "--heads", "2",
    ]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(r.stderr.contains("non-finite"));
}

fn trained(dir: &Path) -> (PathBuf, PathBuf) {
    let data = small_dataset(dir);
    let out = dir.join("run");
    let r = cli(&[
        "train", "--data", p(&data), "--out-dir", p(&out), "--folds", "3", "--epochs", "3", "--lr", "1e-2", "--heads", "2",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    (data, out)
}

#[test]
fn eval_reports_every_size_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let (data, out) = trained(dir.path());
    let ckpt = out.join("fold-00.ckpt");
    let r = cli(&["--json", "eval", "--checkpoint", p(&ckpt), "--data", p(&data)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let reports = v["reports"].as_array().unwrap();
    let sizes: Vec<_> = reports.iter().map(|r| r["max_list_size"].clone()).collect();
    assert_eq!(sizes, [serde_json::Value::Null, 10.into(), 20.into(), 30.into(), 50.into()]);
    for rep in reports {
        for scorer in ["model", "pointwise"] {
            for (name, value) in rep[scorer]["aggregate"].as_object().unwrap() {
                let x = value.as_f64().unwrap();
                let lo = if name == "spearman" || name == "kendall" { -1.0 } else { 0.0 };
                assert!((lo..=1.0).contains(&x), "{name} = {x}");
            }
        }
    }

    let r = cli(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--max-list-size", "5"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("K=5 model") && !r.stdout.contains("K=10"));

    let split = out.join("fold-00.split.json");
    let r = cli(&["--json", "eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--split", p(&split), "--max-list-size", "50"]);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["reports"][0]["model"]["list_count"], 4);
}

#[test]
fn parallel_eval_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let (data, out) = trained(dir.path());
    let ckpt = out.join("fold-01.ckpt");
    let seq = cli(&["--json", "eval", "--checkpoint", p(&ckpt), "--data", p(&data)]);
    let par = cli(&["--json", "eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--parallel-eval"]);
    assert_eq!(seq.code, 0);
    assert_eq!(seq.stdout, par.stdout);
}

#[test]
fn dimension_mismatch_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let ckpt = dir.path().join("d16.ckpt");
    save_checkpoint(
        &Checkpoint {
            params: init_params(16, 4, 0).unwrap(),
            optimizer: None,
            seed: 0,
            config: None,
        },
        &ckpt,
    )
    .unwrap();
    for cmd in ["eval", "rank"] {
        let r = cli(&[cmd, "--checkpoint", p(&ckpt), "--data", p(&data)]);
        assert_eq!(r.code, 5, "{cmd}: {}", r.stderr);
    }
}

#[test]
fn rank_with_identity_model_follows_point_scores() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let ckpt = dir.path().join("fresh.ckpt");
    save_checkpoint(
        &Checkpoint {
            params: init_params(8, 2, 5).unwrap(),
            optimizer: None,
            seed: 5,
            config: None,
        },
        &ckpt,
    )
    .unwrap();
    let r = cli(&["rank", "--checkpoint", p(&ckpt), "--data", p(&data)]);
    assert_eq!(r.code, 0);
    let lists = load_dataset(&data).unwrap();
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines.len(), lists.iter().map(|l| l.len()).sum::<usize>());
    let mut at = 0;
    for list in &lists {
        let mut expected: Vec<(f64, &str)> = list.items.iter().map(|i| (i.point_score, i.id.as_str())).collect();
        expected.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for (rank, (score, id)) in expected.iter().enumerate() {
            let cols: Vec<&str> = lines[at].split('\t').collect();
            assert_eq!(cols[0], list.group_id);
            assert_eq!(cols[1], *id);
            assert_eq!(cols[2], (rank + 1).to_string());
            assert_eq!(cols[3].parse::<f64>().unwrap(), *score);
            assert_eq!(cols[5].parse::<f64>().unwrap(), *score);
            at += 1;
        }
    }
}

#[test]
fn rank_timing_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (data, out) = trained(dir.path());
    let tsv = dir.path().join("ranked.tsv");
    let r = cli(&[
        "rank", "--checkpoint", p(&out.join("fold-00.ckpt")), "--data", p(&data), "--out", p(&tsv), "--timing", "--repeats",
        "20", "--warmup", "5",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("mean per-list latency"));
    assert!(r.stdout.contains("20 timed runs each after 5 warm-up"));
    assert_eq!(std::fs::read_to_string(&tsv).unwrap().lines().count(), 12 * 9);
}

#[test]
fn gradcheck_exit_codes() {
    let ok = cli(&["gradcheck", "--seed", "7", "--n", "6", "--dim", "8"]);
    assert_eq!(ok.code, 0, "{}", ok.stdout);
    assert!(ok.stdout.contains("PASS"));
    assert_eq!(ok.stdout, cli(&["gradcheck", "--seed", "7", "--n", "6", "--dim", "8"]).stdout);
    let strict = cli(&["gradcheck", "--tolerance", "1e-12"]);
    assert_eq!(strict.code, 1);
    assert!(strict.stdout.contains("FAIL"));
    assert!(strict.stdout.contains(" at block0.") || strict.stdout.contains(" at mlp_") || strict.stdout.contains(" at alpha"));
}

#[test]
fn baseline_scores_bm25_when_text_exists() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("t.jsonl");
    std::fs::write(
        &data,
        concat!(
            r#"{"group_id":"p","query":"red shoes","dim":1,"items":["#,
            r#"{"id":"a","text":"red shoes","embedding":[0],"point_score":1,"label":3},"#,
            r#"{"id":"b","text":"blue hat","embedding":[0],"point_score":2,"label":0}]}"#,
            "\n"
        ),
    )
    .unwrap();
    let r = cli(&["--json", "baseline", "--data", p(&data), "--bm25"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["bm25"]["aggregate"]["ndcg@1"], 1.0);
    assert_eq!(v["pointwise"]["aggregate"]["ndcg@1"], 0.0);
}

#[test]
fn binary_honours_seed_variable_and_version() {
    let exe = env!("CARGO_BIN_EXE_resrank");
    let dir = tempfile::tempdir().unwrap();
    let gen = |out: &Path, seed: Option<&str>| {
        let mut c = Command::new(exe);
        c.args(["generate", "--groups", "3", "--out", p(out)]);
        match seed {
            Some(s) => c.env("RESRANK_SEED", s),
            None => c.env_remove("RESRANK_SEED"),
        };
        assert!(c.output().unwrap().status.success());
        std::fs::read(out).unwrap()
    };
    let from_env = gen(&dir.path().join("a"), Some("7"));
    let default = gen(&dir.path().join("b"), None);
    let r = cli(&["generate", "--groups", "3", "--seed", "7", "--out", p(&dir.path().join("c"))]);
    assert_eq!(r.code, 0);
    assert_eq!(from_env, std::fs::read(dir.path().join("c")).unwrap());
    assert_ne!(from_env, default);

    let v = Command::new(exe).arg("--version").output().unwrap();
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("resrank "));
}
