use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate, metrics_at, word_labels, MetricsReport};
use crate::baselines::{
    calibrate_grid, logistic_features, Direction, DocText, LogisticModel, NGramPredictor,
};
use crate::dataset::{split, SplitMode, SplitSpec, WindowExample};
use crate::error::{CoreError, Result};
use crate::model::{DetectorModel, ModelConfig};
use crate::text::{cooccurrence_embeddings, DocumentLayout, Vocabulary};
use crate::train::{train, EpochLog, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Full,
    NoText,
    NoGaze,
    NoKnowledge,
    RandomInitText,
    Distance,
    Fixation,
    Logistic,
    NGram(usize),
    /// Listed for completeness; not run.
    Svm,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::Full,
        Method::NoText,
        Method::NoGaze,
        Method::NoKnowledge,
        Method::RandomInitText,
        Method::Distance,
        Method::Fixation,
        Method::Logistic,
        Method::NGram(1),
        Method::NGram(2),
        Method::NGram(3),
        Method::Svm,
    ];

    pub const BASELINES: [Method; 6] = [
        Method::Distance,
        Method::Fixation,
        Method::Logistic,
        Method::NGram(1),
        Method::NGram(2),
        Method::NGram(3),
    ];

    pub fn name(self) -> String {
        match self {
            Method::Full => "full".into(),
            Method::NoText => "no_text".into(),
            Method::NoGaze => "no_gaze".into(),
            Method::NoKnowledge => "no_knowledge".into(),
            Method::RandomInitText => "random_init_text".into(),
            Method::Distance => "distance".into(),
            Method::Fixation => "fixation".into(),
            Method::Logistic => "logistic".into(),
            Method::NGram(n) => format!("ngram{n}"),
            Method::Svm => "svm".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CoreError::Invalid(format!("unknown method `{s}`")))
    }

    pub fn is_neural(self) -> bool {
        matches!(
            self,
            Method::Full | Method::NoText | Method::NoGaze | Method::NoKnowledge | Method::RandomInitText
        )
    }

    /// Structural ablation of `base`.
    pub fn model_config(self, base: &ModelConfig) -> ModelConfig {
        let mut c = base.clone();
        match self {
            Method::NoText => c.use_text = false,
            Method::NoGaze => c.use_gaze = false,
            Method::NoKnowledge => c.use_knowledge = false,
            _ => {}
        }
        c
    }

    /// Whether the text encoder starts from corpus co-occurrence embeddings.
    pub fn pretrained_text(self) -> bool {
        matches!(self, Method::Full | Method::NoGaze | Method::NoKnowledge)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub modes: Vec<SplitMode>,
    pub methods: Vec<Method>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split_seed: u64,
    /// Co-occurrence window for the text encoder's initial embeddings.
    pub embedding_window: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            modes: SplitMode::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split_seed: 0,
            embedding_window: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub mode: SplitMode,
    pub status: RowStatus,
    pub test: Option<MetricsReport>,
    pub dev_f1: Option<f64>,
    pub train_words: usize,
    pub test_words: usize,
    pub best_epoch: Option<usize>,
    /// Per-epoch run log of neural methods.
    pub log: Vec<EpochLog>,
    pub error: Option<String>,
}

impl ReportRow {
    fn new(method: Method, mode: SplitMode, status: RowStatus) -> Self {
        Self {
            method: method.name(),
            mode,
            status,
            test: None,
            dev_f1: None,
            train_words: 0,
            test_words: 0,
            best_epoch: None,
            log: Vec::new(),
            error: None,
        }
    }

    pub fn f1(&self) -> Option<f64> {
        self.test.as_ref().map(|m| m.f1)
    }
}

/// Machine-readable results. Contains no timing, so equal inputs give an
/// equal report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub rows: Vec<ReportRow>,
}

impl SuiteReport {
    pub fn row(&self, method: Method, mode: SplitMode) -> Option<&ReportRow> {
        let name = method.name();
        self.rows.iter().find(|r| r.method == name && r.mode == mode)
    }

    pub fn f1(&self, method: Method, mode: SplitMode) -> Option<f64> {
        self.row(method, mode).and_then(ReportRow::f1)
    }

    /// Text table: one line per (method, mode).
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<18} {:<15} {:>7} {:>7} {:>7} {:>7} {:>7}  status",
            "method", "mode", "acc", "prec", "rec", "F1", "θ"
        );
        for r in &self.rows {
            match &r.test {
                Some(m) => {
                    let _ = writeln!(
                        s,
                        "{:<18} {:<15} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.3}  ok",
                        r.method,
                        r.mode.name(),
                        m.accuracy,
                        m.precision,
                        m.recall,
                        m.f1,
                        m.threshold
                    );
                }
                None => {
                    let status = match r.status {
                        RowStatus::External => "external".to_string(),
                        _ => format!("failed: {}", r.error.as_deref().unwrap_or("")),
                    };
                    let _ = writeln!(
                        s,
                        "{:<18} {:<15} {:>7} {:>7} {:>7} {:>7} {:>7}  {status}",
                        r.method,
                        r.mode.name(),
                        "-",
                        "-",
                        "-",
                        "-",
                        "-"
                    );
                }
            }
        }
        s
    }
}

/// Corpus-level inputs shared by every run.
#[derive(Clone, Copy)]
pub struct SuiteData<'a> {
    pub windows: &'a [WindowExample],
    pub layouts: &'a [DocumentLayout],
    pub vocab: &'a Vocabulary,
}

pub struct SuiteRun {
    pub report: SuiteReport,
    /// Wall-clock seconds per (method, mode).
    pub seconds: BTreeMap<(String, SplitMode), f64>,
}

/// Trains and scores every requested (method, mode). A failing run becomes
/// a `failed` row; the rest of the suite still runs.
pub fn run_suite(data: SuiteData<'_>, cfg: &SuiteConfig) -> Result<SuiteRun> {
    let docs: BTreeMap<String, DocText> =
        data.layouts.iter().map(|l| (l.doc_id.clone(), DocText::from_layout(l))).collect();
    let embeddings = if cfg.methods.iter().any(|m| m.pretrained_text()) {
        Some(cooccurrence_embeddings(
            data.layouts,
            data.vocab,
            cfg.model.n_r(),
            cfg.embedding_window,
            cfg.model.seed,
        )?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut seconds = BTreeMap::new();
    for &mode in &cfg.modes {
        let parts = split(data.windows, &SplitSpec::new(mode, cfg.split_seed))?;
        let pick = |idx: &[usize]| -> Vec<&WindowExample> { idx.iter().map(|&i| &data.windows[i]).collect() };
        let (tr, dv, te) = (pick(&parts.train), pick(&parts.dev), pick(&parts.test));
        for &method in &cfg.methods {
            let start = Instant::now();
            let mut row = if method == Method::Svm {
                ReportRow::new(method, mode, RowStatus::External)
            } else {
                let run = Run {
                    method,
                    train: &tr,
                    dev: &dv,
                    test: &te,
                    docs: &docs,
                    embeddings: embeddings.as_deref(),
                    cfg,
                };
                match run.execute() {
                    Ok(r) => r,
                    Err(e) => {
                        log::warn!("{} / {} failed: {e}", method.name(), mode.name());
                        let mut r = ReportRow::new(method, mode, RowStatus::Failed);
                        r.error = Some(e.to_string());
                        r
                    }
                }
            };
            row.mode = mode;
            row.train_words = tr.iter().map(|w| w.samples.len()).sum();
            row.test_words = te.iter().map(|w| w.samples.len()).sum();
            seconds.insert((method.name(), mode), start.elapsed().as_secs_f64());
            rows.push(row);
        }
    }
    Ok(SuiteRun {
        report: SuiteReport {
            config: cfg.clone(),
            rows,
        },
        seconds,
    })
}

/// Fresh model for a neural `method`, with the text embeddings
/// initialized from `embeddings` when the method uses pretrained text.
pub fn initial_model(method: Method, base: &ModelConfig, embeddings: Option<&[Vec<f64>]>) -> Result<DetectorModel> {
    let mut model = DetectorModel::new(method.model_config(base))?;
    if method.pretrained_text() {
        if let Some(e) = embeddings {
            model.set_embeddings(e)?;
        }
    }
    Ok(model)
}

/// Rows for an already trained full model on the test part of each mode,
/// at its stored threshold.
pub fn checkpoint_rows(
    windows: &[WindowExample],
    model: &DetectorModel,
    modes: &[SplitMode],
    split_seed: u64,
) -> Result<Vec<ReportRow>> {
    let mut out = Vec::new();
    for &mode in modes {
        let parts = split(windows, &SplitSpec::new(mode, split_seed))?;
        let pick = |idx: &[usize]| -> Vec<&WindowExample> { idx.iter().map(|&i| &windows[i]).collect() };
        let (tr, dv, te) = (pick(&parts.train), pick(&parts.dev), pick(&parts.test));
        let mut row = ReportRow::new(Method::Full, mode, RowStatus::Ok);
        row.dev_f1 = Some(super::calibrate(model, &dv)?.1.f1);
        row.test = Some(evaluate(model, &te)?);
        row.train_words = tr.iter().map(|w| w.samples.len()).sum();
        row.test_words = te.iter().map(|w| w.samples.len()).sum();
        out.push(row);
    }
    Ok(out)
}

struct Run<'a, 'w> {
    method: Method,
    train: &'a [&'w WindowExample],
    dev: &'a [&'w WindowExample],
    test: &'a [&'w WindowExample],
    docs: &'a BTreeMap<String, DocText>,
    embeddings: Option<&'a [Vec<f64>]>,
    cfg: &'a SuiteConfig,
}

impl Run<'_, '_> {
    fn execute(&self) -> Result<ReportRow> {
        let mut row = ReportRow::new(self.method, SplitMode::Mixed, RowStatus::Ok);
        match self.method {
            m if m.is_neural() => {
                let model = initial_model(m, &self.cfg.model, self.embeddings)?;
                let out = train(model, self.train, self.dev, &self.cfg.train, None)?;
                row.test = Some(evaluate(&out.model, self.test)?);
                row.dev_f1 = Some(out.best_dev.f1);
                row.best_epoch = Some(out.best_epoch);
                row.log = out.log;
            }
            Method::Distance | Method::Fixation => {
                let (dir, feat): (Direction, fn(&crate::dataset::CandidateWord) -> f64) =
                    if self.method == Method::Distance {
                        (Direction::AtMost, |w| w.distance)
                    } else {
                        (Direction::AtLeast, |w| w.duration as f64)
                    };
                let values = |ws: &[&WindowExample]| -> Vec<f64> {
                    ws.iter().flat_map(|w| w.samples.iter().map(|s| feat(&s.word))).collect()
                };
                let g = calibrate_grid(&values(self.dev), &word_labels(self.dev), dir);
                let dev_pred: Vec<f64> = values(self.dev).iter().map(|&v| g.predict(v) as u8 as f64).collect();
                row.dev_f1 = Some(metrics_at(&dev_pred, &word_labels(self.dev), 0.5).f1);
                let pred: Vec<f64> = values(self.test).iter().map(|&v| g.predict(v) as u8 as f64).collect();
                let mut m = metrics_at(&pred, &word_labels(self.test), 0.5);
                m.threshold = g.theta;
                row.test = Some(m);
            }
            Method::Logistic => {
                let feats = |ws: &[&WindowExample]| -> Vec<_> {
                    ws.iter().flat_map(|w| w.samples.iter().map(|s| logistic_features(&s.word))).collect()
                };
                let model = LogisticModel::fit(&feats(self.train), &word_labels(self.train))?;
                let score = |ws: &[&WindowExample]| -> Vec<f64> {
                    feats(ws).iter().map(|f| model.predict_proba(f)).collect()
                };
                let dev_scores = score(self.dev);
                let dev_labels = word_labels(self.dev);
                let th = super::search_threshold(&dev_scores, &dev_labels);
                row.dev_f1 = Some(metrics_at(&dev_scores, &dev_labels, th).f1);
                row.test = Some(metrics_at(&score(self.test), &word_labels(self.test), th));
            }
            Method::NGram(n) => {
                let p = NGramPredictor::fit(
                    n,
                    self.docs,
                    self.train
                        .iter()
                        .flat_map(|w| w.samples.iter().map(|s| (w.doc_id.as_str(), s.word.word_index, s.unknown))),
                )?;
                let predict = |ws: &[&WindowExample]| -> Result<Vec<f64>> {
                    let mut out = Vec::new();
                    for w in ws {
                        let doc = self
                            .docs
                            .get(&w.doc_id)
                            .ok_or_else(|| CoreError::Invalid(format!("unknown document {}", w.doc_id)))?;
                        out.extend(w.samples.iter().map(|s| p.predict(doc, s.word.word_index) as u8 as f64));
                    }
                    Ok(out)
                };
                row.dev_f1 = Some(metrics_at(&predict(self.dev)?, &word_labels(self.dev), 0.5).f1);
                row.test = Some(metrics_at(&predict(self.test)?, &word_labels(self.test), 0.5));
            }
            _ => unreachable!("handled by the caller"),
        }
        Ok(row)
    }
}
