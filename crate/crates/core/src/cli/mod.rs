//! The `statelab` command line: dataset generation, pretraining, OOD
//! evaluation, fine-tuning, prediction, embedding and plotting. Every
//! command writes its outputs plus a `<output>.manifest.json` recording the
//! resolved configuration and the SHA-256 of each input.

pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::analysis::{
    classification_metrics, embedding_csv, fidelity_report, r_squared, tsne_embed, EmbeddingRow, EvalReport, TaskMetric, TsneConfig,
};
use crate::datasets::{generate, task_family, Dataset, Family, GenConfig, Split, StateDatasetEntry};
use crate::error::{Error, Result};
use crate::neural::{
    finetune, predict_property, Checkpoint, EpochLog, FcnnBaseline, FinetuneConfig, LabelledExample, ModelDims, OsfmModel, TaskId,
    TrainConfig, Trainer,
};
use crate::seeds::derive_seed;
pub use config::{merge, FileConfig, RunConfig, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "statelab", version, about = "Optical state simulation and measurement-based representation learning")]
pub struct Cli {
    /// TOML file with optional [gen], [train], [finetune] and [tsne] tables
    /// plus top-level `seed` and `desk`; flags override file values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true, env = "STATELAB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of one state family.
    Gen(GenArgs),
    /// Pretrain the representation and generation networks.
    Pretrain(PretrainArgs),
    /// Score held-out query fidelity on in- and out-of-distribution datasets.
    EvalOod(EvalArgs),
    /// Fine-tune a property head (or train a baseline) on a labelled dataset.
    Finetune(FinetuneArgs),
    /// Predict a property for every state of a dataset.
    Predict(PredictArgs),
    /// Embed state representations in 2D with t-SNE.
    Embed(EmbedArgs),
    /// Render a CSV produced by another command as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub family: Family,
    /// Number of states; the train share of the preset is kept.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub train_count: Option<usize>,
    /// Comma-separated mode counts.
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the reduced desk-scale presets.
    #[arg(long)]
    pub desk: bool,
    /// Output file (default `<family>.statelab`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Pretraining dataset; its train split is used.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "pretrain.ckpt.json")]
    pub out: PathBuf,
    /// Per-epoch loss log (default: the checkpoint path with `.epochs.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from a checkpoint; the result is identical to an uninterrupted run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Save the checkpoint every this many epochs.
    #[arg(long, default_value_t = 10)]
    pub checkpoint_every: usize,
    /// Stop once this many epochs are done in total; continue later with --resume.
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// In-distribution datasets (pretrain family, held out).
    #[arg(long, num_args = 1..)]
    pub id: Vec<PathBuf>,
    /// Out-of-distribution datasets.
    #[arg(long, num_args = 1..)]
    pub ood: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "eval-ood.csv")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Fully connected network on the raw histograms.
    Fcnn,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Task name, e.g. negativity, noon-purity, cat-size, squeezed-qfi.
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub data: PathBuf,
    /// Pretrained checkpoint; not needed with --from-scratch or --baseline.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Start from a randomly initialized model instead of a checkpoint.
    #[arg(long)]
    pub from_scratch: bool,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Use only the first N training labels.
    #[arg(long)]
    pub train_count: Option<usize>,
    /// Mode count for the negativity task (default: the dataset's).
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output model (default `<task>.ckpt.json`, or `<task>.fcnn.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Test metrics CSV (default `<task>.metrics.csv`).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One or more datasets; each contributes up to --per-family states.
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub per_family: usize,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "embedding.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// A report, training log, prediction or embedding CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output SVG (default: the input with `.svg`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 2 for invalid arguments, 3 for numerical failures, 4 for
/// unreadable or malformed files.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, in which case it is kept.
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialized; --threads {n} ignored");
        }
    }
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Gen(a) => cmd_gen(&a, &file),
        Command::Pretrain(a) => cmd_pretrain(&a, &file),
        Command::EvalOod(a) => cmd_eval_ood(&a, &file),
        Command::Finetune(a) => cmd_finetune(&a, &file),
        Command::Predict(a) => cmd_predict(&a),
        Command::Embed(a) => cmd_embed(&a, &file),
        Command::Plot(a) => cmd_plot(&a),
    }
}

/// Writes through a temporary sibling so readers never see partial files.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".part");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = stem.strip_suffix(".ckpt").unwrap_or(&stem).to_string();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn finish(config: RunConfig, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    let path = RunManifest::new(config, inputs, outputs)?.write()?;
    for o in outputs {
        println!("wrote {}", o.display());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn resolve_gen(a: &GenArgs, file: &FileConfig) -> Result<GenConfig> {
    let desk = a.desk || file.desk.unwrap_or(false);
    let preset = if desk { GenConfig::desk(a.family) } else { GenConfig::for_family(a.family) };
    let mut cfg = merge(&preset, &file.gen)?;
    if let Some(seed) = a.seed.or(file.seed) {
        cfg.seed = seed;
    }
    if let Some(count) = a.count {
        let share = cfg.train_count as f64 / cfg.count.max(1) as f64;
        cfg.train_count = (share * count as f64).round() as usize;
        cfg.count = count;
    }
    if let Some(train) = a.train_count {
        cfg.train_count = train;
    }
    if let Some(modes) = &a.modes {
        cfg.modes = modes.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_gen(a: &GenArgs, file: &FileConfig) -> Result<()> {
    let cfg = resolve_gen(a, file)?;
    if cfg.family == Family::Negativity {
        println!("negativity states: phase-space generation only (m = {:?}), no Fock space is built", cfg.modes);
    }
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.statelab", cfg.family)));
    let ds = generate(&cfg)?;
    write_atomic(&out, &ds.to_bytes()?)?;
    println!("{}", ds.manifest.summary());
    let run = RunConfig { command: "gen".into(), seed: cfg.seed, gen: Some(cfg), ..RunConfig::default() };
    finish(run, &[], &[&out])
}

fn epoch_csv(history: &[EpochLog]) -> String {
    let mut out = String::from("epoch,recon,kl,triplet,lambda,total\n");
    for h in history {
        let _ = writeln!(out, "{},{:.8},{:.8},{:.8},{:.8},{:.8}", h.epoch, h.recon, h.kl, h.triplet, h.lambda, h.total);
    }
    out
}

fn cmd_pretrain(a: &PretrainArgs, file: &FileConfig) -> Result<()> {
    let ds = Dataset::load(&a.data)?;
    let data = ds.split(Split::Train).map(StateDatasetEntry::pretrain_state).collect::<Result<Vec<_>>>()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no training states", a.data.display())));
    }
    let (mut trainer, mut history) = match &a.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if a.lr.is_some() || a.seed.is_some() {
                return Err(Error::InvalidArgument("--lr and --seed cannot change when resuming".into()));
            }
            (ck.trainer, ck.history)
        }
        None => {
            let mut cfg = merge(&TrainConfig::default(), &file.train)?;
            if let Some(seed) = a.seed.or(file.seed) {
                cfg.seed = seed;
            }
            if let Some(lr) = a.lr {
                cfg.adam.lr = lr;
            }
            let model = OsfmModel::new(ModelDims::default(), derive_seed(cfg.seed, &[0]));
            (Trainer::new(model, cfg), Vec::new())
        }
    };
    if let Some(epochs) = a.epochs {
        if a.resume.is_some() && epochs != trainer.config.epochs {
            log::warn!("changing the epoch count on resume changes the triplet schedule");
        }
        trainer.config.epochs = epochs;
    }
    let log_path = a.log.clone().unwrap_or_else(|| with_suffix(&a.out, ".epochs.csv"));
    let every = a.checkpoint_every.max(1);
    let end = a.stop_after.map_or(trainer.config.epochs, |s| s.min(trainer.config.epochs));
    while trainer.epochs_done < end {
        let stop = (trainer.epochs_done + every).min(end);
        trainer.train_until(&data, stop, |log| history.push(*log))?;
        write_atomic(&a.out, Checkpoint::new(trainer.clone(), history.clone()).to_json()?.as_bytes())?;
        write_atomic(&log_path, epoch_csv(&history).as_bytes())?;
    }
    if history.is_empty() || !a.out.exists() {
        write_atomic(&a.out, Checkpoint::new(trainer.clone(), history.clone()).to_json()?.as_bytes())?;
        write_atomic(&log_path, epoch_csv(&history).as_bytes())?;
    }
    let mut options = serde_json::Map::new();
    options.insert("resume".into(), json!(a.resume));
    let run = RunConfig { command: "pretrain".into(), seed: trainer.config.seed, train: Some(trainer.config.clone()), options, ..RunConfig::default() };
    let mut inputs = vec![a.data.as_path()];
    inputs.extend(a.resume.as_deref());
    finish(run, &inputs, &[&a.out, &log_path])
}

fn cmd_eval_ood(a: &EvalArgs, file: &FileConfig) -> Result<()> {
    if a.id.is_empty() && a.ood.is_empty() {
        return Err(Error::InvalidArgument("give at least one --id or --ood dataset".into()));
    }
    let model = Checkpoint::load(&a.checkpoint)?.trainer.model;
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let loaded: Vec<(Dataset, bool)> = a
        .id
        .iter()
        .map(|p| (p, false))
        .chain(a.ood.iter().map(|p| (p, true)))
        .map(|(p, ood)| Ok((Dataset::load(p)?, ood)))
        .collect::<Result<_>>()?;
    let pairs: Vec<(&Dataset, bool)> = loaded.iter().map(|(d, o)| (d, *o)).collect();
    let report = fidelity_report(&model, &pairs, seed)?;
    for ood in [false, true] {
        for (r, f, n) in report.by_rank(ood) {
            println!("{} r={r}: fidelity {f:.4} over {n} states", if ood { "ood" } else { "id" });
        }
    }
    write_atomic(&a.out, report.to_csv().as_bytes())?;
    let run = RunConfig { command: "eval-ood".into(), seed, ..RunConfig::default() };
    let mut inputs: Vec<&Path> = vec![&a.checkpoint];
    inputs.extend(a.id.iter().chain(&a.ood).map(PathBuf::as_path));
    finish(run, &inputs, &[&a.out])
}

fn resolve_task(name: &str, modes: Option<usize>, ds: &Dataset) -> Result<TaskId> {
    let task = if name.trim().eq_ignore_ascii_case("negativity") {
        let m = modes.or_else(|| ds.manifest.config.modes.first().copied()).ok_or_else(|| Error::Missing("mode count".into()))?;
        TaskId::Negativity(m)
    } else {
        name.parse()?
    };
    if let (TaskId::Negativity(m), Some(want)) = (task, modes) {
        if m != want {
            return Err(Error::InvalidArgument(format!("task {task} conflicts with --modes {want}")));
        }
    }
    if task_family(task) != ds.manifest.family {
        return Err(Error::InvalidArgument(format!("task {task} needs a {} dataset, got {}", task_family(task), ds.manifest.family)));
    }
    Ok(task)
}

fn score(task: TaskId, pred: &[f64], test: &[LabelledExample]) -> Result<Vec<TaskMetric>> {
    let truth: Vec<f64> = test.iter().map(|e| e.target).collect();
    let name = task.to_string();
    let metric = |metric: &str, value: f64| TaskMetric { task: name.clone(), metric: metric.into(), value, count: test.len() };
    if task.is_classification() {
        let m = classification_metrics(pred, &truth, 0.5)?;
        let c = m.confusion;
        Ok(vec![
            metric("accuracy", m.accuracy),
            metric("true_pos", c.true_pos as f64),
            metric("true_neg", c.true_neg as f64),
            metric("false_pos", c.false_pos as f64),
            metric("false_neg", c.false_neg as f64),
        ])
    } else {
        Ok(vec![metric("r2", r_squared(pred, &truth)?)])
    }
}

fn predictions_csv(ids: impl Iterator<Item = u64>, truth: Option<&[f64]>, pred: &[f64]) -> String {
    let mut out = String::from(if truth.is_some() { "id,truth,prediction\n" } else { "id,prediction\n" });
    for (k, id) in ids.enumerate() {
        match truth {
            Some(t) => writeln!(out, "{id},{:.8},{:.8}", t[k], pred[k]),
            None => writeln!(out, "{id},{:.8}", pred[k]),
        }
        .expect("writing to a string");
    }
    out
}

fn cmd_finetune(a: &FinetuneArgs, file: &FileConfig) -> Result<()> {
    let ds = Dataset::load(&a.data)?;
    let task = resolve_task(&a.task, a.modes, &ds)?;
    let mut cfg = merge(&FinetuneConfig::for_task(task), &file.finetune)?;
    if let Some(seed) = a.seed.or(file.seed) {
        cfg.seed = seed;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.adam.lr = lr;
    }
    let mut train = ds.labelled_examples(task, Split::Train)?;
    if let Some(n) = a.train_count {
        if n == 0 || n > train.len() {
            return Err(Error::InvalidArgument(format!("--train-count {n} outside 1..={}", train.len())));
        }
        train.truncate(n);
    }
    let test = ds.labelled_examples(task, Split::Test)?;
    if test.is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no test split", a.data.display())));
    }
    let test_ids = ds.split(Split::Test).map(|e| e.id);
    let truth: Vec<f64> = test.iter().map(|e| e.target).collect();

    let mut inputs: Vec<&Path> = vec![&a.data];
    let (out, pred) = if a.baseline == Some(Baseline::Fcnn) {
        let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{task}.fcnn.json")));
        let fcnn = FcnnBaseline::fit(task, &train, &cfg)?;
        let pred = test.iter().map(|e| fcnn.predict(e)).collect::<Result<Vec<_>>>()?;
        write_atomic(&out, serde_json::to_string(&fcnn)?.as_bytes())?;
        (out, pred)
    } else {
        let mut trainer = if a.from_scratch {
            Trainer::new(OsfmModel::new(ModelDims::default(), derive_seed(cfg.seed, &[3])), TrainConfig::default())
        } else {
            let p = a.checkpoint.as_deref().ok_or_else(|| Error::Missing("--checkpoint (or --from-scratch)".into()))?;
            inputs.push(p);
            Checkpoint::load(p)?.trainer
        };
        let losses = finetune(&mut trainer.model, task, &train, &cfg)?;
        log::info!("fine-tuned {task} for {} epochs, final loss {:.6}", losses.len(), losses.last().copied().unwrap_or(f64::NAN));
        let pred = test
            .iter()
            .map(|e| predict_property(&trainer.model, task, &e.records, e.num_modes, &e.extra))
            .collect::<Result<Vec<_>>>()?;
        let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{task}.ckpt.json")));
        write_atomic(&out, Checkpoint::new(trainer, Vec::new()).to_json()?.as_bytes())?;
        (out, pred)
    };
    let tasks = score(task, &pred, &test)?;
    for t in &tasks {
        println!("{} {}: {:.4} over {} test states", t.task, t.metric, t.value, t.count);
    }
    let metrics = a.metrics.clone().unwrap_or_else(|| PathBuf::from(format!("{task}.metrics.csv")));
    write_atomic(&metrics, EvalReport { tasks, ..EvalReport::default() }.to_csv().as_bytes())?;
    let pred_path = with_suffix(&metrics, ".predictions.csv");
    write_atomic(&pred_path, predictions_csv(test_ids, Some(&truth), &pred).as_bytes())?;

    let mut options = serde_json::Map::new();
    options.insert("task".into(), json!(task.to_string()));
    options.insert("from_scratch".into(), json!(a.from_scratch));
    options.insert("baseline".into(), json!(a.baseline.map(|_| "fcnn")));
    options.insert("train_count".into(), json!(train.len()));
    let run = RunConfig { command: "finetune".into(), seed: cfg.seed, finetune: Some(cfg), options, ..RunConfig::default() };
    finish(run, &inputs, &[&out, &metrics, &pred_path])
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model = Checkpoint::load(&a.checkpoint)?.trainer.model;
    let ds = Dataset::load(&a.data)?;
    let task = resolve_task(&a.task, None, &ds)?;
    let pred = ds
        .entries
        .iter()
        .map(|e| predict_property(&model, task, &e.records, e.meta.num_modes, &e.task_extras(task)?))
        .collect::<Result<Vec<_>>>()?;
    let truth: Option<Vec<f64>> = ds.entries.iter().map(|e| e.label(task.label_kind()).ok()).collect();
    write_atomic(&a.out, predictions_csv(ds.entries.iter().map(|e| e.id), truth.as_deref(), &pred).as_bytes())?;
    let mut options = serde_json::Map::new();
    options.insert("task".into(), json!(task.to_string()));
    let run = RunConfig { command: "predict".into(), options, ..RunConfig::default() };
    finish(run, &[&a.checkpoint, &a.data], &[&a.out])
}

/// Lowers the perplexity below N/3 for small inputs, where t-SNE needs it.
fn clamp_perplexity(perplexity: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("embedding needs at least 4 states, got {n}")));
    }
    let cap = n as f64 / 3.0;
    if perplexity < cap {
        return Ok(perplexity);
    }
    let p = 0.9 * cap;
    log::warn!("perplexity {perplexity} too large for {n} states; using {p:.2}");
    Ok(p)
}

fn cmd_embed(a: &EmbedArgs, file: &FileConfig) -> Result<()> {
    let model = Checkpoint::load(&a.checkpoint)?.trainer.model;
    let mut cfg = merge(&TsneConfig::default(), &file.tsne)?;
    if let Some(seed) = a.seed.or(file.seed) {
        cfg.seed = seed;
    }
    if let Some(p) = a.perplexity {
        cfg.perplexity = p;
    }
    if let Some(it) = a.iterations {
        cfg.iterations = it;
    }
    let mut vectors = Vec::new();
    let mut rows = Vec::new();
    for (k, path) in a.data.iter().enumerate() {
        let ds = Dataset::load(path)?;
        let mut picked: Vec<&StateDatasetEntry> = ds.entries.iter().collect();
        picked.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[k as u64])));
        picked.truncate(a.per_family);
        for e in picked {
            vectors.push(model.encode_representation(&e.records, e.meta.num_modes)?.iter().copied().collect::<Vec<f64>>());
            rows.push(EmbeddingRow {
                x: 0.0,
                y: 0.0,
                family: e.family.to_string(),
                rank: e.meta.stellar_rank,
                modes: e.meta.num_modes,
                xi: e.meta.max_xi(),
            });
        }
    }
    cfg.perplexity = clamp_perplexity(cfg.perplexity, vectors.len())?;
    let result = tsne_embed(&vectors, &cfg)?;
    log::info!("t-SNE KL divergence {:.4} -> {:.4}", result.kl_initial, result.kl_final);
    for (row, p) in rows.iter_mut().zip(&result.points) {
        row.x = p[0];
        row.y = p[1];
    }
    write_atomic(&a.out, embedding_csv(&rows).as_bytes())?;
    let mut options = serde_json::Map::new();
    options.insert("per_family".into(), Value::from(a.per_family));
    let run = RunConfig { command: "embed".into(), seed: cfg.seed, tsne: Some(cfg), options, ..RunConfig::default() };
    let mut inputs: Vec<&Path> = vec![&a.checkpoint];
    inputs.extend(a.data.iter().map(PathBuf::as_path));
    finish(run, &inputs, &[&a.out])
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let svg = plot::plot_csv(&fs::read_to_string(&a.input)?)?;
    let out = a.out.clone().unwrap_or_else(|| a.input.with_extension("svg"));
    write_atomic(&out, svg.as_bytes())?;
    finish(RunConfig { command: "plot".into(), ..RunConfig::default() }, &[&a.input], &[&out])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_flag_keeps_the_train_share() {
        let a = GenArgs { family: Family::Cat, count: Some(50), train_count: None, modes: None, seed: Some(2), desk: false, out: None };
        let cfg = resolve_gen(&a, &FileConfig::default()).unwrap();
        assert_eq!((cfg.count, cfg.train_count, cfg.seed), (50, 20, 2));
        let file = FileConfig::parse("seed = 9\n[gen]\nmax_alpha = 1.5\n").unwrap();
        let a = GenArgs { seed: None, count: None, ..a };
        let cfg = resolve_gen(&a, &file).unwrap();
        assert_eq!((cfg.count, cfg.seed, cfg.max_alpha), (1500, 9, 1.5));
    }

    #[test]
    fn perplexity_is_clamped_for_small_sets() {
        assert_eq!(clamp_perplexity(30.0, 500).unwrap(), 30.0);
        let p = clamp_perplexity(30.0, 12).unwrap();
        assert!(p > 1.0 && p < 4.0);
        assert!(clamp_perplexity(30.0, 3).is_err());
    }

    #[test]
    fn output_names() {
        assert_eq!(with_suffix(Path::new("out/pretrain.ckpt.json"), ".epochs.csv"), PathBuf::from("out/pretrain.epochs.csv"));
        assert_eq!(with_suffix(Path::new("cat.metrics.csv"), ".predictions.csv"), PathBuf::from("cat.metrics.predictions.csv"));
    }

    #[test]
    fn bad_arguments_exit_with_validation_code() {
        assert_eq!(main_with_args(["statelab", "gen", "--family", "banana"]), 2);
        assert_eq!(main_with_args(["statelab", "gen", "--family", "cat", "--count", "0"]), 2);
        assert_eq!(main_with_args(["statelab", "frobnicate"]), 2);
        assert_eq!(main_with_args(["statelab", "plot", "--input", "/nonexistent/x.csv"]), 4);
    }
}
