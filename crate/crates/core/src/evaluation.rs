//! Train/test splits, confusion matrices, metrics and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierError, ClassifierModel, LabeledDataset};
use crate::features::{parse_feature_name, FeatureVector, Stat, STATS_PER_CHANNEL};
use crate::ingest::{ChannelId, DatasetId};
use crate::llm_client::{classify_window, LlmClient, LlmError};
use crate::prompting::PromptTemplate;

pub const REPORT_FORMAT_VERSION: u32 = 1;
/// Above this share of unparseable answers an evaluation fails.
pub const MAX_UNPARSEABLE_FRACTION: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid split: {0}")]
    Split(String),
    #[error("class {label:?} has {count} sample(s); a seen split needs at least 2")]
    TooFewInClass { label: String, count: usize },
    #[error("no shared labels between {train} and {test}")]
    NoSharedLabels { train: DatasetId, test: DatasetId },
    #[error("predictions ({preds}) and truth ({truth}) differ in length")]
    Length { preds: usize, truth: usize },
    #[error("label {0:?} is not in the vocabulary")]
    UnknownLabel(String),
    #[error("confusion matrix is empty")]
    Empty,
    #[error("{unparseable} of {total} responses were unparseable (limit 20%)")]
    TooManyUnparseable { unparseable: usize, total: usize },
    #[error("feature columns: {0}")]
    Columns(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitSpec {
    /// Stratified random split within the pooled data.
    Seen { test_fraction: f64, seed: u64 },
    /// All rows of the listed subjects form the test set.
    UnseenSubject { held_out_subjects: Vec<String> },
    /// Train on one dataset, test on another over the shared labels.
    /// `label_map` renames labels on both sides before matching.
    CrossDataset {
        train_dataset: DatasetId,
        test_dataset: DatasetId,
        #[serde(default)]
        label_map: BTreeMap<String, String>,
    },
}

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

impl SplitSpec {
    pub fn seen(seed: u64) -> Self {
        SplitSpec::Seen {
            test_fraction: DEFAULT_TEST_FRACTION,
            seed,
        }
    }

    /// Parses `seen[:fraction]`, `unseen:s1,s2,...` or `cross:train:test`.
    /// `seed` is used by seen splits.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let mut parts = text.splitn(2, ':');
        let kind = parts.next().unwrap_or("");
        let rest = parts.next();
        let spec = match (kind, rest) {
            ("seen", None) => SplitSpec::seen(seed),
            ("seen", Some(f)) => SplitSpec::Seen {
                test_fraction: f
                    .parse()
                    .map_err(|_| EvalError::Split(format!("bad test fraction {f:?}")))?,
                seed,
            },
            ("unseen", Some(list)) => SplitSpec::UnseenSubject {
                held_out_subjects: list.split(',').map(|s| s.trim().to_string()).collect(),
            },
            ("cross", Some(pair)) => {
                let (a, b) = pair
                    .split_once(':')
                    .ok_or_else(|| EvalError::Split("cross needs train:test".into()))?;
                SplitSpec::CrossDataset {
                    train_dataset: a.parse().map_err(EvalError::Split)?,
                    test_dataset: b.parse().map_err(EvalError::Split)?,
                    label_map: default_cross_label_map(),
                }
            }
            _ => {
                return Err(EvalError::Split(format!(
                    "{text:?} (expected seen[:f], unseen:<subjects> or cross:<a>:<b>)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SplitSpec::Seen { test_fraction, .. }
                if !(*test_fraction > 0.0 && *test_fraction < 1.0) =>
            {
                Err(EvalError::Split(format!(
                    "test_fraction {test_fraction} not in (0, 1)"
                )))
            }
            SplitSpec::UnseenSubject { held_out_subjects }
                if held_out_subjects.iter().all(|s| s.is_empty()) =>
            {
                Err(EvalError::Split("no held-out subjects".into()))
            }
            _ => Ok(()),
        }
    }

    /// Short column label for report tables.
    pub fn short_name(&self) -> &'static str {
        match self {
            SplitSpec::Seen { .. } => "seen",
            SplitSpec::UnseenSubject { .. } => "unseen",
            SplitSpec::CrossDataset { .. } => "cross",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SplitSpec::Seen {
                test_fraction,
                seed,
            } => {
                format!("seen(test_fraction={test_fraction},seed={seed})")
            }
            SplitSpec::UnseenSubject { held_out_subjects } => {
                format!("unseen(held_out={})", held_out_subjects.join(","))
            }
            SplitSpec::CrossDataset {
                train_dataset,
                test_dataset,
                label_map,
            } => {
                let map: Vec<String> = label_map.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                format!(
                    "cross({train_dataset}->{test_dataset},map=[{}])",
                    map.join(",")
                )
            }
        }
    }
}

/// Lexicographically last ceil(fraction * subjects) subjects.
pub fn holdout_subjects(data: &LabeledDataset, fraction: f64) -> Vec<String> {
    let subjects: Vec<&String> = data
        .subjects
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = ((subjects.len() as f64 * fraction).ceil() as usize).clamp(1, subjects.len().max(1));
    subjects[subjects.len().saturating_sub(n)..]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn relabel(
    data: &LabeledDataset,
    idx: &[usize],
    map: &BTreeMap<String, String>,
    keep: &BTreeSet<String>,
) -> LabeledDataset {
    let vocab: Vec<String> = keep.iter().cloned().collect();
    let mapped = |l: usize| map_label(map, &data.label_vocabulary[l]);
    let rows: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| keep.contains(&mapped(data.labels[i])))
        .collect();
    let mut out = data.subset(&rows);
    out.labels = rows
        .iter()
        .map(|&i| vocab.binary_search(&mapped(data.labels[i])).unwrap())
        .collect();
    out.label_vocabulary = vocab;
    out
}

pub fn make_split(
    data: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    match spec {
        SplitSpec::Seen {
            test_fraction,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for class in data.observed_labels() {
                let mut idx: Vec<usize> = (0..data.len())
                    .filter(|&i| data.labels[i] == class)
                    .collect();
                if idx.len() < 2 {
                    return Err(EvalError::TooFewInClass {
                        label: data.label_vocabulary[class].clone(),
                        count: idx.len(),
                    });
                }
                idx.shuffle(&mut rng);
                let n_test =
                    ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
                test.extend_from_slice(&idx[..n_test]);
                train.extend_from_slice(&idx[n_test..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Ok((data.subset(&train), data.subset(&test)))
        }
        SplitSpec::UnseenSubject { held_out_subjects } => {
            let held: BTreeSet<&str> = held_out_subjects.iter().map(String::as_str).collect();
            let present: BTreeSet<&str> = data.subjects.iter().map(String::as_str).collect();
            if let Some(missing) = held.iter().find(|s| !present.contains(*s)) {
                return Err(EvalError::Split(format!(
                    "held-out subject {missing:?} not in data"
                )));
            }
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..data.len()).partition(|&i| held.contains(data.subjects[i].as_str()));
            if train.is_empty() {
                return Err(EvalError::Split("every subject is held out".into()));
            }
            Ok((data.subset(&train), data.subset(&test)))
        }
        SplitSpec::CrossDataset {
            train_dataset,
            test_dataset,
            label_map,
        } => {
            let mapped = |l: usize| map_label(label_map, &data.label_vocabulary[l]);
            let train_idx: Vec<usize> = (0..data.len())
                .filter(|&i| data.datasets[i] == *train_dataset)
                .collect();
            let test_idx: Vec<usize> = (0..data.len())
                .filter(|&i| data.datasets[i] == *test_dataset)
                .collect();
            let train_labels: BTreeSet<String> =
                train_idx.iter().map(|&i| mapped(data.labels[i])).collect();
            let test_labels: BTreeSet<String> =
                test_idx.iter().map(|&i| mapped(data.labels[i])).collect();
            let shared: BTreeSet<String> =
                train_labels.intersection(&test_labels).cloned().collect();
            if shared.is_empty() {
                return Err(EvalError::NoSharedLabels {
                    train: *train_dataset,
                    test: *test_dataset,
                });
            }
            let train = relabel(data, &train_idx, label_map, &train_labels);
            let mut test = relabel(data, &test_idx, label_map, &shared);
            // Test labels are indexed in the training vocabulary.
            test.labels = test
                .labels
                .iter()
                .map(|&l| {
                    train
                        .label_vocabulary
                        .binary_search(&test.label_vocabulary[l])
                        .unwrap()
                })
                .collect();
            test.label_vocabulary = train.label_vocabulary.clone();
            Ok((train, test))
        }
    }
}

/// Spelling aliases applied on both sides of a cross-dataset split. Data
/// harmonized at ingest is already canonical; this covers feature files
/// produced with raw dataset labels.
pub fn default_cross_label_map() -> BTreeMap<String, String> {
    [
        ("jogging", "running"),
        ("jog", "running"),
        ("upstairs", "walking_upstairs"),
        ("ups", "walking_upstairs"),
        ("stairsup", "walking_upstairs"),
        ("downstairs", "walking_downstairs"),
        ("dws", "walking_downstairs"),
        ("stairsdown", "walking_downstairs"),
        ("walk", "walking"),
        ("wlk", "walking"),
        ("sit", "sitting"),
        ("std", "standing"),
        ("stand", "standing"),
        ("bike", "biking"),
        ("laying", "lying"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

fn map_label(map: &BTreeMap<String, String>, raw: &str) -> String {
    map.get(raw).cloned().unwrap_or_else(|| raw.to_string())
}

/// Rows are truth, columns prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub label_vocabulary: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(label_vocabulary: Vec<String>) -> Self {
        let k = label_vocabulary.len();
        ConfusionMatrix {
            label_vocabulary,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    /// Associative, commutative accumulation of partial matrices.
    pub fn merge(mut self, other: &ConfusionMatrix) -> Self {
        assert_eq!(self.label_vocabulary, other.label_vocabulary);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.label_vocabulary
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| EvalError::UnknownLabel(label.to_string()))
    }
}

pub fn confusion(preds: &[String], truth: &[String], vocab: &[String]) -> Result<ConfusionMatrix> {
    if preds.len() != truth.len() {
        return Err(EvalError::Length {
            preds: preds.len(),
            truth: truth.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(vocab.to_vec());
    for (p, t) in preds.iter().zip(truth) {
        let (ti, pi) = (cm.index_of(t)?, cm.index_of(p)?);
        cm.add(ti, pi);
    }
    Ok(cm)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: u32,
    pub dataset: String,
    pub model: String,
    pub split: String,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    pub n_evaluated: u64,
    pub n_unparseable: u64,
    pub config_fingerprint: String,
}

/// Accuracy and one-vs-rest per-class scores; 0/0 is 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let k = cm.label_vocabulary.len();
    let mut precision = Vec::with_capacity(k);
    let mut recall = Vec::with_capacity(k);
    let mut f1 = Vec::with_capacity(k);
    for c in 0..k {
        let tp = cm.counts[c][c] as f64;
        let predicted: f64 = (0..k).map(|r| cm.counts[r][c] as f64).sum();
        let actual: f64 = cm.counts[c].iter().map(|&v| v as f64).sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        precision.push(p);
        recall.push(r);
        f1.push(ratio(2.0 * p * r, p + r));
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    Ok(MetricsReport {
        format_version: REPORT_FORMAT_VERSION,
        dataset: String::new(),
        model: String::new(),
        split: String::new(),
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        macro_f1: mean(&f1),
        precision,
        recall,
        f1,
        confusion: cm.clone(),
        n_evaluated: total,
        n_unparseable: 0,
        config_fingerprint: String::new(),
    })
}

/// Something that labels test rows. `None` marks an unparseable answer.
pub trait Predictor: Sync {
    fn predict_row(&self, data: &LabeledDataset, row: usize) -> Result<Option<String>>;
    /// Labels the predictor can emit.
    fn label_vocabulary(&self) -> Vec<String>;
    fn describe(&self) -> String;
    fn display_name(&self) -> String;
}

/// Column indices of `names` within `data`, cached per evaluation.
fn column_map(data: &LabeledDataset, names: &[String]) -> Result<Option<Vec<usize>>> {
    if data.feature_names == names {
        return Ok(None);
    }
    names
        .iter()
        .map(|n| {
            data.feature_names
                .iter()
                .position(|f| f == n)
                .ok_or_else(|| EvalError::Columns(format!("test data lacks column {n}")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

impl Predictor for ClassifierModel {
    fn predict_row(&self, data: &LabeledDataset, row: usize) -> Result<Option<String>> {
        let p = match column_map(data, &self.feature_names)? {
            None => self.predict(&data.features[row])?,
            Some(cols) => {
                let x: Vec<f64> = cols.iter().map(|&c| data.features[row][c]).collect();
                self.predict(&x)?
            }
        };
        Ok(Some(p.label))
    }

    fn label_vocabulary(&self) -> Vec<String> {
        self.label_vocabulary.clone()
    }

    fn describe(&self) -> String {
        self.hyperparameters.describe()
    }

    fn display_name(&self) -> String {
        self.kind().display_name().to_string()
    }
}

/// Rebuilds a feature vector from a dataset row. Requires all seven
/// statistics for each channel present.
pub fn row_to_feature_vector(data: &LabeledDataset, row: usize) -> Result<FeatureVector> {
    let mut channels: Vec<ChannelId> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (j, name) in data.feature_names.iter().enumerate() {
        let (ch, st) = parse_feature_name(name)
            .ok_or_else(|| EvalError::Columns(format!("unrecognized column {name}")))?;
        if !channels.contains(&ch) {
            channels.push(ch);
        }
        cells.insert((ch.index(), st.index()), data.features[row][j]);
    }
    let mut values = Vec::with_capacity(channels.len() * STATS_PER_CHANNEL);
    for ch in &channels {
        for st in Stat::ALL {
            values.push(*cells.get(&(ch.index(), st.index())).ok_or_else(|| {
                EvalError::Columns(format!("missing {}_{}", ch.short_name(), st.csv_name()))
            })?);
        }
    }
    Ok(FeatureVector {
        channel_order: channels,
        values,
        activity: data.label(row).into(),
        subject_id: data.subjects[row].as_str().into(),
        dataset_id: data.datasets[row],
        sampling_rate_hz: 0.0,
    })
}

/// Language-model classification of feature rows.
pub struct LlmPredictor<'a> {
    pub client: &'a LlmClient,
    pub template: PromptTemplate,
    pub label_set: Vec<String>,
    pub precision: usize,
}

impl Predictor for LlmPredictor<'_> {
    fn predict_row(&self, data: &LabeledDataset, row: usize) -> Result<Option<String>> {
        let fv = row_to_feature_vector(data, row)?;
        match classify_window(
            self.client,
            &self.template,
            &fv,
            &self.label_set,
            self.precision,
        ) {
            Ok(r) => Ok(r.parsed_label),
            Err(LlmError::Unparseable { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn label_vocabulary(&self) -> Vec<String> {
        self.label_set.clone()
    }

    fn describe(&self) -> String {
        format!("{},template={}", self.client.describe(), self.template.name)
    }

    fn display_name(&self) -> String {
        "LLM".into()
    }
}

/// Predicts every test row, tallies the confusion matrix over the union
/// of test and predictor vocabularies, and computes metrics.
pub fn evaluate(
    predictor: &dyn Predictor,
    test: &LabeledDataset,
    split: &SplitSpec,
) -> Result<MetricsReport> {
    test.validate()?;
    let vocab: Vec<String> = test
        .label_vocabulary
        .iter()
        .cloned()
        .chain(predictor.label_vocabulary())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let truth_idx: Vec<usize> = test
        .label_vocabulary
        .iter()
        .map(|l| vocab.binary_search(l).unwrap())
        .collect();
    let empty = || (ConfusionMatrix::new(vocab.clone()), 0u64);
    let (cm, unparseable) = (0..test.len())
        .into_par_iter()
        .map(|i| -> Result<(ConfusionMatrix, u64)> {
            let mut part = empty();
            match predictor.predict_row(test, i)? {
                Some(label) => {
                    let p = vocab
                        .binary_search(&label)
                        .map_err(|_| EvalError::UnknownLabel(label.clone()))?;
                    part.0.add(truth_idx[test.labels[i]], p);
                }
                None => part.1 += 1,
            }
            Ok(part)
        })
        .try_reduce(empty, |a, b| Ok((a.0.merge(&b.0), a.1 + b.1)))?;
    let total = test.len();
    if unparseable as f64 > MAX_UNPARSEABLE_FRACTION * total as f64 {
        return Err(EvalError::TooManyUnparseable {
            unparseable: unparseable as usize,
            total,
        });
    }
    let mut report = metrics(&cm)?;
    report.n_unparseable = unparseable;
    let datasets: BTreeSet<&str> = test.datasets.iter().map(|d| d.as_str()).collect();
    report.dataset = datasets.into_iter().collect::<Vec<_>>().join("+");
    report.model = predictor.display_name();
    report.split = split.short_name().to_string();
    report.config_fingerprint = format!("{};{}", predictor.describe(), split.describe());
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    MarkdownTable,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" | "markdown_table" => Ok(ReportFormat::MarkdownTable),
            other => Err(format!(
                "unknown report format {other:?} (json|csv|markdown)"
            )),
        }
    }
}

fn dataset_title(name: &str) -> String {
    name.split('+')
        .map(|d| match d.parse::<DatasetId>() {
            Ok(id) => id.display_name().to_string(),
            Err(_) => d.to_string(),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Renders reports in input order.
pub fn render_report(reports: &[MetricsReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record([
                "dataset",
                "model",
                "split",
                "accuracy",
                "macro_precision",
                "macro_recall",
                "macro_f1",
                "n_evaluated",
                "n_unparseable",
                "config_fingerprint",
            ])
            .expect("in-memory write");
            for r in reports {
                w.write_record([
                    r.dataset.clone(),
                    r.model.clone(),
                    r.split.clone(),
                    r.accuracy.to_string(),
                    r.macro_precision.to_string(),
                    r.macro_recall.to_string(),
                    r.macro_f1.to_string(),
                    r.n_evaluated.to_string(),
                    r.n_unparseable.to_string(),
                    r.config_fingerprint.clone(),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        ReportFormat::MarkdownTable => {
            let mut s = String::from(
                "| Dataset | Model | Accuracy | Macro Precision | Macro Recall | Macro F1 |\n\
                 |---|---|---|---|---|---|\n",
            );
            for r in reports {
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |",
                    dataset_title(&r.dataset),
                    r.model,
                    r.accuracy,
                    r.macro_precision,
                    r.macro_recall,
                    r.macro_f1
                );
            }
            s
        }
    }
}

/// Accuracy pivot: one row per model, one column per (dataset, split),
/// both in order of first appearance. Missing cells render as `-`.
pub fn render_split_table(reports: &[MetricsReport]) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut columns: Vec<(&str, &str)> = Vec::new();
    for r in reports {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
        let col = (r.dataset.as_str(), r.split.as_str());
        if !columns.contains(&col) {
            columns.push(col);
        }
    }
    let mut s = String::from("| Model |");
    for (d, sp) in &columns {
        let _ = write!(s, " {} ({}) |", dataset_title(d), sp);
    }
    s.push_str("\n|---|");
    for _ in &columns {
        s.push_str("---|");
    }
    s.push('\n');
    for m in &models {
        let _ = write!(s, "| {m} |");
        for (d, sp) in &columns {
            match reports
                .iter()
                .find(|r| r.model == *m && r.dataset == *d && r.split == *sp)
            {
                Some(r) => {
                    let _ = write!(s, " {:.4} |", r.accuracy);
                }
                None => s.push_str(" - |"),
            }
        }
        s.push('\n');
    }
    s
}
