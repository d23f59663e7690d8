//! The `resrank` command line.
//!
//! Exit codes: 0 success, 1 failed check, 2 usage, 3 IO or unreadable input,
//! 4 training diverged, 5 checkpoint/dataset shape mismatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use resrank_core::bm25::Bm25;
use resrank_core::encoder::forward;
use resrank_core::eval::{EvalOptions, Pointwise};
use resrank_core::metrics::{compute_ranks, GainKind};
use resrank_core::training::{grad_check, gradcheck_instance};
use resrank_core::{CandidateList, EvalReport, TrainConfig};
use serde_json::json;

use crate::checkpoint::{check_dataset_dim, load_checkpoint};
use crate::dataset::{load_dataset, save_dataset};
use crate::pipeline::{evaluate_lists, evaluate_sizes, load_split, run_train, select_groups, write_runs, SizedReport, SplitPlan};
use crate::synthetic::{oracle_ndcg, synthetic_generate, SyntheticConfig};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_SHAPE: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "resrank", version, about = "Listwise residual re-ranking over pointwise scores")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Structured JSON reports instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset with planted redundancy and score compression.
    Generate(GenerateArgs),
    /// Train the residual head with k-fold or single-split validation.
    Train(TrainArgs),
    /// Evaluate a checkpoint against the pointwise (and optionally BM25) baseline.
    Eval(EvalArgs),
    /// Write every list re-ranked by a checkpoint.
    Rank(RankArgs),
    /// Evaluate the baselines alone.
    Baseline(BaselineArgs),
    /// Compare analytic gradients with finite differences on a random instance.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "RESRANK_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    groups: usize,
    #[arg(long, default_value_t = 30)]
    items: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 0.6)]
    decay: f64,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 8.0)]
    cap: f64,
    #[arg(long, default_value_t = 0.1)]
    jitter: f64,
    /// Do not reserve an embedding coordinate for the item utility.
    #[arg(long)]
    no_utility_channel: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum GainArg {
    Exponential,
    Linear,
}

impl From<GainArg> for GainKind {
    fn from(g: GainArg) -> Self {
        match g {
            GainArg::Exponential => GainKind::Exponential,
            GainArg::Linear => GainKind::Linear,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory for checkpoints, logs and split files.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, env = "RESRANK_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// With `--folds 1`: fraction of groups held out for validation.
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    lr: f64,
    #[arg(long, default_value_t = 0.01)]
    weight_decay: f64,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 50)]
    k_max: usize,
    /// Lists per optimiser step.
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    cutoffs: Vec<usize>,
    /// Divide each list's loss by its number of label-distinct pairs.
    #[arg(long)]
    normalize_pairs: bool,
    /// Gain used for validation NDCG.
    #[arg(long, value_enum, default_value_t = GainArg::Exponential)]
    gain: GainArg,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Only the test groups of this split file (written by `train`).
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, env = "RESRANK_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    cutoffs: Vec<usize>,
    /// List-size caps to report in addition to whole lists.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,50")]
    list_sizes: Vec<usize>,
    /// Report only this cap (seeded-shuffle truncation).
    #[arg(long)]
    max_list_size: Option<usize>,
    /// Also score the BM25 baseline (needs query and item text).
    #[arg(long)]
    bm25: bool,
    #[arg(long, value_enum, default_value_t = GainArg::Exponential)]
    gain: GainArg,
    /// Score lists concurrently.
    #[arg(long)]
    parallel_eval: bool,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report mean per-list latency of the forward pass.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, env = "RESRANK_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    cutoffs: Vec<usize>,
    #[arg(long)]
    max_list_size: Option<usize>,
    #[arg(long)]
    bm25: bool,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, env = "RESRANK_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    heads: usize,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    use resrank_core::Error as Core;
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::Validation { .. } | Error::Malformed { .. } | Error::Version { .. } => {
            EXIT_IO
        }
        Error::Shape(_) | Error::Core(Core::ShapeMismatch(_) | Core::DimensionMismatch { .. }) => EXIT_SHAPE,
        Error::Core(Core::NonFiniteLoss { .. }) => EXIT_DIVERGED,
        Error::InvalidConfig(_) | Error::Core(Core::InvalidConfig(_) | Core::TooFewGroups { .. } | Core::IndivisibleHeads { .. }) => {
            EXIT_USAGE
        }
        Error::Core(Core::MissingText(_)) => EXIT_IO,
        Error::Core(_) => EXIT_CHECK_FAILED,
    }
}

/// Parses `args` (program name first) and runs the command, writing reports
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    let result = match &cli.command {
        Command::Generate(a) => generate(a, cli.json, out),
        Command::Train(a) => train(a, cli.json, out),
        Command::Eval(a) => eval(a, cli.json, out),
        Command::Rank(a) => rank(a, cli.json, out, err),
        Command::Baseline(a) => baseline(a, cli.json, out),
        Command::Gradcheck(a) => gradcheck(a, cli.json, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

type CmdResult = Result<i32, Error>;

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Error> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn emit_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), Error> {
    emit(out, &format!("{}\n", serde_json::to_string_pretty(value).expect("json")))
}

fn ndcg_keys(cutoffs: &[usize]) -> Vec<String> {
    cutoffs.iter().map(|k| format!("ndcg@{k}")).collect()
}

/// One table row per (label, report) pair; missing metrics print as `-`.
fn table(columns: &[String], rows: &[(String, &EvalReport)]) -> String {
    let mut s = format!("{:<24}", "");
    for c in columns {
        s += &format!(" {c:>17}");
    }
    s.push('\n');
    for (label, report) in rows {
        s += &format!("{label:<24}");
        for c in columns {
            match report.mean(c) {
                Some(v) => s += &format!(" {v:>17.6}"),
                None => s += &format!(" {:>17}", "-"),
            }
        }
        s.push('\n');
    }
    s
}

fn generate(a: &GenerateArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let config = SyntheticConfig {
        groups: a.groups,
        items_per_group: a.items,
        dim: a.dim,
        clusters_per_group: a.clusters,
        redundancy_decay: a.decay,
        score_noise: a.noise,
        compression_cap: a.cap,
        jitter: a.jitter,
        utility_channel: !a.no_utility_channel,
        seed: a.seed,
    };
    let lists = synthetic_generate(&config)?;
    save_dataset(&a.out, &lists)?;
    let cutoffs = [1, 3, 10];
    let oracle = oracle_ndcg(&lists, &cutoffs)?;
    let items: usize = lists.iter().map(CandidateList::len).sum();
    if json {
        emit_json(
            out,
            &json!({
                "out": a.out,
                "groups": lists.len(),
                "items": items,
                "config": config,
                "pointwise": oracle.pointwise.aggregate,
                "oracle": oracle.oracle.aggregate,
            }),
        )?;
    } else {
        emit(out, &format!("wrote {} lists, {items} items to {}\n", lists.len(), a.out.display()))?;
        emit(
            out,
            &table(
                &ndcg_keys(&cutoffs),
                &[("pointwise".into(), &oracle.pointwise), ("label oracle".into(), &oracle.oracle)],
            ),
        )?;
    }
    Ok(EXIT_OK)
}

fn train_config(a: &TrainArgs) -> Result<(TrainConfig, SplitPlan), Error> {
    let config = TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        epochs: a.epochs,
        head_count: a.heads,
        block_count: a.blocks,
        seed: a.seed,
        k_min: a.k_min,
        k_max: a.k_max,
        lists_per_batch: a.batch,
        folds: a.folds,
        eval_cutoffs: a.cutoffs.clone(),
        normalize_by_pairs: a.normalize_pairs,
        eval_gain: a.gain.into(),
    };
    config.validate()?;
    let plan = match (a.folds, a.holdout) {
        (1, Some(f)) => SplitPlan::Holdout(f),
        (1, None) => SplitPlan::Full,
        (_, None) => SplitPlan::KFold,
        (_, Some(_)) => return Err(Error::InvalidConfig("--holdout requires --folds 1".into())),
    };
    Ok((config, plan))
}

fn train(a: &TrainArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let (config, plan) = train_config(a)?;
    let lists = load_dataset(&a.data)?;
    let runs = run_train(&lists, &config, plan)?;
    let paths = write_runs(&a.out_dir, &runs, plan)?;
    let keys = ndcg_keys(&config.eval_cutoffs);

    if json {
        let folds: Vec<_> = runs
            .iter()
            .zip(&paths)
            .map(|(r, p)| {
                json!({
                    "fold": r.fold,
                    "checkpoint": p,
                    "train_groups": r.split.train.len(),
                    "test_groups": r.split.test.len(),
                    "alpha": r.params.alpha,
                    "final_loss": r.log.epochs.last().map(|e| e.mean_loss),
                    "model": r.model.aggregate,
                    "pointwise": r.pointwise.aggregate,
                })
            })
            .collect();
        emit_json(out, &json!({ "folds": folds }))?;
        return Ok(EXIT_OK);
    }

    if plan == SplitPlan::Full {
        let r = &runs[0];
        emit(
            out,
            &format!(
                "trained on all {} lists (no held-out groups); alpha = {:.6}; checkpoint {}\n",
                lists.len(),
                r.params.alpha,
                paths[0].display()
            ),
        )?;
        return Ok(EXIT_OK);
    }
    let mut rows = Vec::new();
    for r in &runs {
        rows.push((format!("fold {} model", r.fold), &r.model));
        rows.push((format!("fold {} pointwise", r.fold), &r.pointwise));
    }
    emit(out, &table(&keys, &rows))?;
    if runs.len() > 1 {
        let mean = |pick: fn(&crate::pipeline::FoldRun) -> &EvalReport, key: &str| {
            runs.iter().filter_map(|r| pick(r).mean(key)).sum::<f64>() / runs.len() as f64
        };
        let mut line = format!("{:<24}", "mean model");
        let mut base = format!("{:<24}", "mean pointwise");
        for k in &keys {
            line += &format!(" {:>17.6}", mean(|r| &r.model, k));
            base += &format!(" {:>17.6}", mean(|r| &r.pointwise, k));
        }
        emit(out, &format!("{line}\n{base}\n"))?;
    }
    emit(out, &format!("wrote {} checkpoint(s) to {}\n", paths.len(), a.out_dir.display()))?;
    Ok(EXIT_OK)
}

fn load_for_checkpoint(ckpt: &Path, data: &Path, split: Option<&Path>) -> Result<(resrank_core::ModelParams, Vec<CandidateList>), Error> {
    let params = load_checkpoint(ckpt)?.params;
    let mut lists = load_dataset(data)?;
    if let Some(split) = split {
        lists = select_groups(&lists, &load_split(split)?.test);
    }
    check_dataset_dim(&params, &lists)?;
    Ok((params, lists))
}

fn size_label(k: Option<usize>) -> String {
    k.map_or("all".to_string(), |k| format!("K={k}"))
}

fn print_sized(out: &mut dyn Write, reports: &[SizedReport], columns: &[String], json: bool) -> Result<(), Error> {
    if json {
        return emit_json(out, &json!({ "reports": reports }));
    }
    for r in reports {
        let mut rows = vec![
            (format!("{} model", size_label(r.max_list_size)), &r.model),
            (format!("{} pointwise", size_label(r.max_list_size)), &r.pointwise),
        ];
        if let Some(b) = &r.bm25 {
            rows.push((format!("{} bm25", size_label(r.max_list_size)), b));
        }
        emit(out, &table(columns, &rows))?;
    }
    Ok(())
}

fn eval(a: &EvalArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let (params, lists) = load_for_checkpoint(&a.checkpoint, &a.data, a.split.as_deref())?;
    let opts = EvalOptions {
        cutoffs: a.cutoffs.clone(),
        gain: a.gain.into(),
        ndcg_only: false,
    };
    let sizes: Vec<Option<usize>> = match a.max_list_size {
        Some(k) => vec![Some(k)],
        None => std::iter::once(None).chain(a.list_sizes.iter().copied().map(Some)).collect(),
    };
    if sizes.contains(&Some(0)) {
        return Err(Error::InvalidConfig("list sizes must be >= 1".into()));
    }
    let bm25 = a.bm25.then(Bm25::default);
    let reports = evaluate_sizes(&lists, &sizes, &opts, &params, bm25.as_ref(), a.seed, a.parallel_eval)?;
    for r in &reports {
        r.model.check_ranges()?;
        r.pointwise.check_ranges()?;
    }
    let mut columns = ndcg_keys(&a.cutoffs);
    columns.extend(["spearman", "kendall", "pairwise_accuracy"].map(String::from));
    print_sized(out, &reports, &columns, json)?;
    Ok(EXIT_OK)
}

fn baseline(a: &BaselineArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let mut lists = load_dataset(&a.data)?;
    if let Some(k) = a.max_list_size {
        lists = crate::pipeline::truncate_lists(&lists, k, a.seed);
    }
    let opts = EvalOptions {
        cutoffs: a.cutoffs.clone(),
        ..EvalOptions::default()
    };
    let pointwise = evaluate_lists(&lists, &opts, &Pointwise, false)?;
    let bm25 = a.bm25.then(|| evaluate_lists(&lists, &opts, &Bm25::default(), false)).transpose()?;
    if json {
        emit_json(out, &json!({ "pointwise": pointwise, "bm25": bm25 }))?;
    } else {
        let mut columns = ndcg_keys(&a.cutoffs);
        columns.extend(["spearman", "kendall", "pairwise_accuracy"].map(String::from));
        let mut rows = vec![("pointwise".to_string(), &pointwise)];
        if let Some(b) = &bm25 {
            rows.push(("bm25".to_string(), b));
        }
        emit(out, &table(&columns, &rows))?;
    }
    Ok(EXIT_OK)
}

fn rank(a: &RankArgs, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (params, lists) = load_for_checkpoint(&a.checkpoint, &a.data, None)?;
    let mut body = String::new();
    for list in &lists {
        let (scores, cache) = forward(list, &params)?;
        for (pos, i) in compute_ranks(&scores)?.order().into_iter().enumerate() {
            let item = &list.items[i];
            if json {
                let row = json!({
                    "group_id": list.group_id,
                    "id": item.id,
                    "rank": pos + 1,
                    "point_score": item.point_score,
                    "delta": cache.deltas()[i],
                    "final_score": scores[i],
                });
                body += &format!("{row}\n");
            } else {
                body += &format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    list.group_id,
                    item.id,
                    pos + 1,
                    item.point_score,
                    cache.deltas()[i],
                    scores[i]
                );
            }
        }
    }
    match &a.out {
        Some(path) => std::fs::write(path, &body).map_err(|source| Error::Io { path: path.clone(), source })?,
        None => emit(out, &body)?,
    }

    if a.timing {
        if a.repeats == 0 {
            return Err(Error::InvalidConfig("--repeats must be >= 1".into()));
        }
        let mut total = 0.0;
        for list in &lists {
            for _ in 0..a.warmup {
                std::hint::black_box(forward(list, &params)?);
            }
            let start = Instant::now();
            for _ in 0..a.repeats {
                std::hint::black_box(forward(list, &params)?);
            }
            total += start.elapsed().as_secs_f64() / a.repeats as f64;
        }
        let mean_us = 1e6 * total / lists.len().max(1) as f64;
        let summary = if json {
            format!(
                "{}\n",
                json!({"lists": lists.len(), "repeats": a.repeats, "warmup": a.warmup, "mean_list_latency_us": mean_us})
            )
        } else {
            format!(
                "mean per-list latency: {mean_us:.2} us over {} lists ({} timed runs each after {} warm-up)\n",
                lists.len(),
                a.repeats,
                a.warmup
            )
        };
        // Keep the ranking stream clean when it goes to stdout.
        let sink: &mut dyn Write = if a.out.is_some() { out } else { err };
        emit(sink, &summary)?;
    }
    Ok(EXIT_OK)
}

fn gradcheck(a: &GradcheckArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let (params, list) = gradcheck_instance(a.seed, a.n, a.dim, a.heads)?;
    let report = grad_check(&params, &list, a.step, a.tolerance)?;
    let worst = report
        .worst
        .as_ref()
        .map_or("none".to_string(), |(name, i)| format!("{name}[{i}]"));
    if json {
        emit_json(out, &serde_json::to_value(&report).expect("json"))?;
    } else {
        emit(
            out,
            &format!(
                "{} coordinates, max relative error {:.3e} (tolerance {:.1e}) at {worst}: analytic {:.9e}, numeric {:.9e}\n{}\n",
                report.coordinates,
                report.max_rel_error,
                report.tolerance,
                report.worst_analytic,
                report.worst_numeric,
                if report.passed { "PASS" } else { "FAIL" }
            ),
        )?;
    }
    if report.passed {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_CHECK_FAILED)
    }
}
