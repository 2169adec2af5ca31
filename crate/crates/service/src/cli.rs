//! The `lexgaze` command line.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lexgaze_core::dataset::{from_synth, split, text_resources, SplitMode, SplitSpec, TextContext, WindowExample};
use lexgaze_core::eval::{
    calibrate, checkpoint_rows, initial_model, run_suite, Method, MetricsReport, SuiteConfig, SuiteData, SuiteReport,
};
use lexgaze_core::gaze::{read_stream, Source};
use lexgaze_core::model::ModelRow;
use lexgaze_core::session::{measure_latency, replay, LatencyReport};
use lexgaze_core::synth::{export_dataset, generate, SynthDataset};
use lexgaze_core::text::{cooccurrence_embeddings, normalize, DocumentLayout};
use lexgaze_core::train::{train, EpochLog};
use serde::Serialize;

use crate::config::Config;
use crate::dictionary::Dictionary;
use crate::protocol::{DetectionEvent, ServerMsg};
use crate::server::{ServerConfig, Service};
use crate::store;

pub const DICTIONARY_FILE: &str = "dictionary.json";

#[derive(Parser, Debug)]
#[command(name = "lexgaze", version, about = "Real-time unknown-word detection from reading gaze")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, env = "LEXGAZE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate and export a synthetic reading dataset.
    Synth(SynthArgs),
    /// Window, denoise and label a synthetic export into model samples.
    BuildDataset(BuildArgs),
    /// Train the full detector on one split and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate methods (full model, ablations, baselines) per split mode.
    Eval(EvalArgs),
    /// Recalibrate a checkpoint's decision threshold on a dev split.
    Threshold(ThresholdArgs),
    /// Serve live detection over TCP / WebSocket.
    Serve(ServeArgs),
    /// Batch-1 inference latency of a checkpoint.
    Latency(LatencyArgs),
    /// Run a recorded gaze stream through a session and print its events.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub docs: Option<usize>,
    #[arg(long)]
    pub words_per_doc: Option<usize>,
    #[arg(long)]
    pub dwell_gain: Option<f64>,
    #[arg(long)]
    pub label_noise: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SourceArg {
    Tracker,
    Webcam,
}

impl From<SourceArg> for Source {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Tracker => Source::Tracker,
            SourceArg::Webcam => Source::Webcam,
        }
    }
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Directory written by `synth`.
    #[arg(long)]
    pub synth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "tracker")]
    pub source: SourceArg,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning rate of the gaze encoder-decoder, knowledge and head.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Learning rate of the text encoder.
    #[arg(long)]
    pub lr_backbone: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory written by `build-dataset`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Checkpoint directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "mixed", value_parser = parse_mode)]
    pub mode: SplitMode,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Split mode; repeatable. Default: all three.
    #[arg(long = "mode", value_parser = parse_mode)]
    pub modes: Vec<SplitMode>,
    /// Method; repeatable. Default: all. One of full, no_text, no_gaze,
    /// no_knowledge, random_init_text, distance, fixation, logistic,
    /// ngram1..3, svm.
    #[arg(long = "method", value_parser = parse_method)]
    pub methods: Vec<Method>,
    /// Score this checkpoint as the `full` row instead of training one.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Also write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "mixed", value_parser = parse_mode)]
    pub mode: SplitMode,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory of document layouts (a dataset or synth directory works).
    #[arg(long)]
    pub layouts: PathBuf,
    /// JSON word → definition file. Default: `dictionary.json` next to
    /// the layouts, if present.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long)]
    pub addr: Option<String>,
    #[arg(long, value_enum, default_value = "tracker")]
    pub source: SourceArg,
    #[arg(long)]
    pub tick_ms: Option<u64>,
}

#[derive(Args, Debug)]
pub struct LatencyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset whose rows are fed to the model.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 50)]
    pub warmup: usize,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Layout JSON of the document being read.
    #[arg(long)]
    pub layout: PathBuf,
    /// Gaze stream (JSON Lines of `{"t_ms","x","y","src"}`).
    #[arg(long)]
    pub stream: PathBuf,
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<SplitMode, String> {
    SplitMode::parse(s).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

/// Parses `args` and runs the command; the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut out = std::io::stdout().lock();
    match run(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::defaults()),
    }
}

/// Runs a parsed command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(&cfg, a, cli.json, out),
        Command::BuildDataset(a) => cmd_build(&cfg, a, cli.json, out),
        Command::Train(a) => cmd_train(&cfg, a, cli.json, out),
        Command::Eval(a) => cmd_eval(&cfg, a, cli.json, out),
        Command::Threshold(a) => cmd_threshold(&cfg, a, cli.json, out),
        Command::Serve(a) => cmd_serve(&cfg, a, out),
        Command::Latency(a) => cmd_latency(a, cli.json, out),
        Command::Replay(a) => cmd_replay(a, cli.json, out),
    }
}

fn emit_json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Definitions for the content words of a synthetic corpus, built from
/// population frequency ranks.
pub fn synthetic_dictionary(ds: &SynthDataset) -> BTreeMap<String, String> {
    let ranks = ds.population.ranks();
    let n = ranks.len();
    let mut out = BTreeMap::new();
    for l in &ds.layouts {
        for w in &l.words {
            if w.is_function_word() {
                continue;
            }
            let key = normalize(&w.text);
            if let Some(r) = ranks.get(&key) {
                out.entry(key).or_insert_with(|| format!("(synthetic) word ranked {} of {n} by frequency", r + 1));
            }
        }
    }
    out
}

fn cmd_synth(cfg: &Config, a: &SynthArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let mut sc = cfg.synth.clone();
    if let Some(v) = a.seed {
        sc.seed = v;
    }
    if let Some(v) = a.users {
        sc.users = v;
    }
    if let Some(v) = a.docs {
        sc.corpus.n_docs = v;
    }
    if let Some(v) = a.words_per_doc {
        sc.corpus.words_per_doc = v;
    }
    if let Some(v) = a.dwell_gain {
        sc.dwell_gain = v;
    }
    if let Some(v) = a.label_noise {
        sc.label_noise = v;
    }
    let ds = generate(&sc)?;
    let manifest = export_dataset(&ds, &a.out)?;
    fs::write(a.out.join(DICTIONARY_FILE), serde_json::to_vec_pretty(&synthetic_dictionary(&ds))?)?;
    if json {
        return emit_json(out, &manifest);
    }
    let c = &manifest.counts;
    writeln!(
        out,
        "{} users × {} docs, {} words, {} unknown labels, {} streams / {} samples",
        c.users, c.docs, c.words, c.unknown_labels, c.streams, c.samples
    )?;
    writeln!(out, "manifest hash {}", manifest.hash)?;
    Ok(())
}

fn cmd_build(cfg: &Config, a: &BuildArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let ds = SynthDataset::load(&a.synth).with_context(|| format!("synthetic export in {}", a.synth.display()))?;
    let (vocab, freq) = text_resources(&ds.layouts)?;
    let model = cfg.model(vocab.len())?;
    let dataset = from_synth(&ds, a.source.into(), TextContext { vocab: &vocab, freq: &freq }, &model)?;
    let seed = a.split_seed.unwrap_or(cfg.eval.split_seed);
    let specs: Vec<SplitSpec> = SplitMode::ALL.iter().map(|&m| SplitSpec::new(m, seed)).collect();
    let manifest = dataset.save(&a.out, &specs)?;
    store::save_text(&a.out, &vocab, &freq)?;
    store::save_layouts(&a.out, &ds.layouts)?;
    let dict = a.synth.join(DICTIONARY_FILE);
    if dict.exists() {
        fs::copy(&dict, a.out.join(DICTIONARY_FILE))?;
    }
    if json {
        return emit_json(out, &manifest);
    }
    writeln!(
        out,
        "{} windows, {} word samples ({} unknown), {} tokens, imbalance {}",
        manifest.windows,
        manifest.samples,
        manifest.positives,
        manifest.tokens,
        manifest.imbalance.map_or("n/a".into(), |v| format!("{v:.2}:1"))
    )?;
    let s = &manifest.stats;
    writeln!(
        out,
        "windows: {} accepted, {} unstable, {} empty, {} without candidates",
        s.accepted, s.rejected_unstable, s.rejected_empty, s.without_candidates
    )?;
    writeln!(out, "samples hash {}", manifest.hash)?;
    Ok(())
}

fn train_config(cfg: &Config, f: &TrainFlags) -> (lexgaze_core::train::TrainConfig, u64) {
    let mut t = cfg.train.clone();
    if let Some(v) = f.epochs {
        t.epochs = v;
    }
    if let Some(v) = f.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = f.lr {
        t.lr_encoder_decoder = v;
    }
    if let Some(v) = f.lr_backbone {
        t.lr_backbone = v;
    }
    if let Some(v) = f.patience {
        t.patience = v;
    }
    if let Some(v) = f.seed {
        t.seed = v;
    }
    (t, f.split_seed.unwrap_or(cfg.eval.split_seed))
}

fn parts<'a>(windows: &'a [WindowExample], mode: SplitMode, seed: u64) -> Result<[Vec<&'a WindowExample>; 3]> {
    let s = split(windows, &SplitSpec::new(mode, seed))?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| &windows[i]).collect::<Vec<_>>();
    Ok([pick(&s.train), pick(&s.dev), pick(&s.test)])
}

#[derive(Serialize)]
struct TrainSummary {
    mode: SplitMode,
    split_seed: u64,
    best_epoch: usize,
    threshold: f64,
    dev: MetricsReport,
    log: Vec<EpochLog>,
}

fn cmd_train(cfg: &Config, a: &TrainArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let d = store::load_dataset(&a.dataset)?;
    let (tc, split_seed) = train_config(cfg, &a.flags);
    let [tr, dv, _] = parts(&d.dataset.windows, a.mode, split_seed)?;
    let mc = &d.dataset.model;
    let emb = cooccurrence_embeddings(&d.layouts, &d.vocab, mc.n_r(), cfg.eval.embedding_window, mc.seed)?;
    let model = initial_model(Method::Full, mc, Some(&emb))?;
    fs::create_dir_all(&a.out)?;
    let mut log_file = BufWriter::new(File::create(a.out.join("train_log.jsonl"))?);
    let res = train(model, &tr, &dv, &tc, Some(&mut log_file))?;
    log_file.flush()?;
    store::save_checkpoint(&a.out, &res.model, &d.vocab, &d.freq)?;
    let summary = TrainSummary {
        mode: a.mode,
        split_seed,
        best_epoch: res.best_epoch,
        threshold: res.model.threshold,
        dev: res.best_dev,
        log: res.log,
    };
    fs::write(a.out.join("train.json"), serde_json::to_vec_pretty(&summary)?)?;
    if json {
        return emit_json(out, &summary);
    }
    for l in &summary.log {
        writeln!(out, "epoch {:>2}  loss {:.5}  dev F1 {:6.2}  θ {:.2}", l.epoch, l.loss, l.dev_f1, l.threshold)?;
    }
    writeln!(
        out,
        "best epoch {} (dev F1 {:.2}, θ {:.2}); {:.1}s; saved {}",
        summary.best_epoch,
        summary.dev.f1,
        summary.threshold,
        res.seconds,
        a.out.display()
    )?;
    Ok(())
}

/// The report `eval` prints, also used by tests.
pub fn eval_report(cfg: &Config, a: &EvalArgs) -> Result<SuiteReport> {
    let d = store::load_dataset(&a.dataset)?;
    let (tc, split_seed) = train_config(cfg, &a.flags);
    let modes = if a.modes.is_empty() { SplitMode::ALL.to_vec() } else { a.modes.clone() };
    let methods = if a.methods.is_empty() { Method::ALL.to_vec() } else { a.methods.clone() };
    let checkpoint = match &a.checkpoint {
        Some(p) => {
            let det = store::load_checkpoint(p)?;
            if det.vocab.hash() != d.manifest.vocab_hash {
                bail!("checkpoint and dataset use different vocabularies");
            }
            Some(det.model)
        }
        None => None,
    };
    let trained: Vec<Method> = methods
        .iter()
        .copied()
        .filter(|m| !(checkpoint.is_some() && *m == Method::Full))
        .collect();
    let suite_cfg = SuiteConfig {
        modes: modes.clone(),
        methods: trained.clone(),
        model: d.dataset.model.clone(),
        train: tc,
        split_seed,
        embedding_window: cfg.eval.embedding_window,
    };
    let mut rows = if trained.is_empty() {
        Vec::new()
    } else {
        let data = SuiteData {
            windows: &d.dataset.windows,
            layouts: &d.layouts,
            vocab: &d.vocab,
        };
        run_suite(data, &suite_cfg)?.report.rows
    };
    if let Some(model) = &checkpoint {
        rows.extend(checkpoint_rows(&d.dataset.windows, model, &modes, split_seed)?);
    }
    // mode-major, methods in the requested order
    let rank = |r: &lexgaze_core::eval::ReportRow| {
        let mi = modes.iter().position(|m| *m == r.mode).unwrap_or(usize::MAX);
        let pi = methods.iter().position(|m| m.name() == r.method).unwrap_or(usize::MAX);
        (mi, pi)
    };
    rows.sort_by_key(rank);
    let mut config = suite_cfg;
    config.methods = methods;
    Ok(SuiteReport { config, rows })
}

fn cmd_eval(cfg: &Config, a: &EvalArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let report = eval_report(cfg, a)?;
    if let Some(p) = &a.out {
        fs::write(p, serde_json::to_vec_pretty(&report)?)?;
    }
    if json {
        return emit_json(out, &report);
    }
    write!(out, "{}", report.render())?;
    Ok(())
}

#[derive(Serialize)]
struct ThresholdReport {
    previous: f64,
    threshold: f64,
    dev: MetricsReport,
}

fn cmd_threshold(cfg: &Config, a: &ThresholdArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let mut det = store::load_checkpoint(&a.checkpoint)?;
    let d = store::load_dataset(&a.dataset)?;
    if det.vocab.hash() != d.manifest.vocab_hash {
        bail!("checkpoint and dataset use different vocabularies");
    }
    let [_, dv, _] = parts(&d.dataset.windows, a.mode, a.split_seed.unwrap_or(cfg.eval.split_seed))?;
    let (th, dev) = calibrate(&det.model, &dv)?;
    let previous = det.model.threshold;
    det.model.threshold = th;
    store::save_checkpoint(&a.checkpoint, &det.model, &det.vocab, &det.freq)?;
    let r = ThresholdReport {
        previous,
        threshold: th,
        dev,
    };
    if json {
        return emit_json(out, &r);
    }
    writeln!(
        out,
        "θ {:.2} → {:.2}  (dev P {:.2} R {:.2} F1 {:.2})",
        r.previous, r.threshold, r.dev.precision, r.dev.recall, r.dev.f1
    )?;
    Ok(())
}

fn load_dictionary(explicit: Option<&Path>, beside: &Path) -> Result<Dictionary> {
    match explicit {
        Some(p) => Dictionary::load(p),
        None => {
            let p = beside.join(DICTIONARY_FILE);
            if p.exists() {
                Dictionary::load(&p)
            } else {
                Ok(Dictionary::default())
            }
        }
    }
}

fn cmd_serve(cfg: &Config, a: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let det = store::load_checkpoint(&a.checkpoint)?;
    let layouts = store::load_layouts(&a.layouts)?;
    let dictionary = load_dictionary(a.dictionary.as_deref(), &a.layouts)?;
    let addr = a.addr.clone().unwrap_or_else(|| cfg.serve.addr.clone());
    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
    let sc = ServerConfig {
        source: a.source.into(),
        tick: Duration::from_millis(a.tick_ms.unwrap_or(cfg.serve.tick_ms).max(1)),
    };
    writeln!(
        out,
        "serving {} documents on {} (θ {:.2}, {} definitions)",
        layouts.len(),
        listener.local_addr()?,
        det.model.threshold,
        dictionary.len()
    )?;
    out.flush()?;
    Arc::new(Service::new(det, layouts, dictionary, sc)).run(listener)?;
    Ok(())
}

fn cmd_latency(a: &LatencyArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let det = store::load_checkpoint(&a.checkpoint)?;
    let d = store::load_dataset(&a.dataset)?;
    let rows: Vec<ModelRow> = d.dataset.windows.iter().flat_map(|w| w.rows.iter().cloned()).take(a.trials).collect();
    let r: LatencyReport = measure_latency(&det.model, &rows, a.trials, a.warmup)?;
    if json {
        return emit_json(out, &r);
    }
    writeln!(
        out,
        "{} trials (+{} warmup): mean {:.3} ms, p50 {:.3}, p95 {:.3}, max {:.3}; peak RSS {}",
        r.trials,
        r.warmup,
        r.mean_ms,
        r.p50_ms,
        r.p95_ms,
        r.max_ms,
        r.peak_rss_kb.map_or("n/a".into(), |k| format!("{:.1} MB", k as f64 / 1024.0))
    )?;
    Ok(())
}

fn cmd_replay(a: &ReplayArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let det = store::load_checkpoint(&a.checkpoint)?;
    let layout = DocumentLayout::load(&a.layout).with_context(|| format!("layout {}", a.layout.display()))?;
    let beside = a.layout.parent().and_then(Path::parent).unwrap_or(Path::new("."));
    let dictionary = load_dictionary(a.dictionary.as_deref(), beside)?;
    let stream = read_stream(&a.stream)?;
    let results = replay(Arc::new(layout), Arc::new(det), &stream)?;
    let mut worst: f64 = 0.0;
    for r in &results {
        worst = worst.max(r.compute_ms);
        for d in &r.detections {
            let ev = DetectionEvent::new(d, dictionary.lookup(&d.word));
            if json {
                writeln!(out, "{}", ServerMsg::Detection(ev).to_line())?;
            } else {
                writeln!(
                    out,
                    "window {:>3}  {:<16} p {:.3}  {}",
                    ev.window,
                    ev.word,
                    ev.p,
                    ev.definition.as_deref().unwrap_or("-")
                )?;
            }
        }
    }
    if !json {
        let scored = results.iter().filter(|r| !r.scores.is_empty()).count();
        writeln!(
            out,
            "{} windows ({} scored), {} detections, slowest window {:.2} ms",
            results.len(),
            scored,
            results.iter().map(|r| r.detections.len()).sum::<usize>(),
            worst
        )?;
    }
    Ok(())
}
