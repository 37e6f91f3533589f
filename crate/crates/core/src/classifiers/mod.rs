//! Baseline classifiers trained on feature rows.
//!
//! Three model families share one serializable [`ClassifierModel`]: a CART
//! random forest on raw features, a one-vs-rest linear SVM and a ReLU
//! feed-forward network, the latter two on z-normalized features. Ties in
//! any argmax resolve to the earliest label in the vocabulary.

mod forest;
mod net;
mod svm;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use forest::{train_random_forest, DecisionTree, Forest, ForestParams, TreeNode};
pub use net::{train_feedforward, Gradients, Net, NetParams};
pub use svm::{train_linear_svm, LinearSvm, SvmParams};

use crate::features::FeatureVector;
use crate::ingest::DatasetId;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("dataset is empty")]
    Empty,
    #[error("training data has a single class ({0}); at least two are required")]
    SingleClass(String),
    #[error("fewer rows ({rows}) than classes ({classes})")]
    TooFewRows { rows: usize, classes: usize },
    #[error("row has {got} features, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

/// Feature matrix with labels and provenance. Labels are stored as indices
/// into `label_vocabulary`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub subjects: Vec<String>,
    pub datasets: Vec<DatasetId>,
    pub label_vocabulary: Vec<String>,
    pub feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        subjects: Vec<String>,
        datasets: Vec<DatasetId>,
        label_vocabulary: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let ds = LabeledDataset {
            features,
            labels,
            subjects,
            datasets,
            label_vocabulary,
            feature_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.len();
        if n == 0 {
            return Err(ClassifierError::Empty);
        }
        if self.labels.len() != n || self.subjects.len() != n || self.datasets.len() != n {
            return Err(ClassifierError::Inconsistent(
                "column lengths differ".into(),
            ));
        }
        let d = self.feature_names.len();
        if let Some(row) = self.features.iter().find(|r| r.len() != d) {
            return Err(ClassifierError::Dimension {
                expected: d,
                got: row.len(),
            });
        }
        if self
            .labels
            .iter()
            .any(|&l| l >= self.label_vocabulary.len())
        {
            return Err(ClassifierError::Inconsistent(
                "label index out of vocabulary".into(),
            ));
        }
        let unique: BTreeSet<&String> = self.label_vocabulary.iter().collect();
        if unique.len() != self.label_vocabulary.len() {
            return Err(ClassifierError::Inconsistent(
                "duplicate vocabulary entry".into(),
            ));
        }
        Ok(())
    }

    /// Builds a dataset from feature vectors sharing one channel order. The
    /// vocabulary is the sorted set of observed labels.
    pub fn from_feature_vectors(rows: &[FeatureVector]) -> Result<Self> {
        let first = rows.first().ok_or(ClassifierError::Empty)?;
        let feature_names = first.feature_names();
        let vocab: Vec<String> = rows
            .iter()
            .map(|r| r.activity.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut features = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        let mut subjects = Vec::with_capacity(rows.len());
        let mut datasets = Vec::with_capacity(rows.len());
        for r in rows {
            if r.channel_order != first.channel_order {
                return Err(ClassifierError::Inconsistent(format!(
                    "row {r} has a different channel set"
                )));
            }
            features.push(r.values.clone());
            labels.push(vocab.binary_search(&r.activity.to_string()).unwrap());
            subjects.push(r.subject_id.to_string());
            datasets.push(r.dataset_id);
        }
        Self::new(features, labels, subjects, datasets, vocab, feature_names)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.label_vocabulary.len()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.label_vocabulary[self.labels[i]]
    }

    /// Rows at `indices`, keeping the full vocabulary.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
            datasets: indices.iter().map(|&i| self.datasets[i]).collect(),
            label_vocabulary: self.label_vocabulary.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps only the named feature columns, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<LabeledDataset> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| ClassifierError::Inconsistent(format!("no feature column {n}")))
            })
            .collect::<Result<_>>()?;
        Ok(LabeledDataset {
            features: self
                .features
                .iter()
                .map(|r| idx.iter().map(|&i| r[i]).collect())
                .collect(),
            feature_names: names.to_vec(),
            ..self.clone()
        })
    }

    /// Concatenates datasets on their shared feature columns, merging
    /// vocabularies (sorted union).
    pub fn concat_common(parts: &[LabeledDataset]) -> Result<LabeledDataset> {
        let first = parts.first().ok_or(ClassifierError::Empty)?;
        let common: Vec<String> = first
            .feature_names
            .iter()
            .filter(|n| parts.iter().all(|p| p.feature_names.contains(n)))
            .cloned()
            .collect();
        if common.is_empty() {
            return Err(ClassifierError::Inconsistent(
                "no shared feature columns".into(),
            ));
        }
        let vocab: Vec<String> = parts
            .iter()
            .flat_map(|p| p.label_vocabulary.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut out = LabeledDataset {
            features: Vec::new(),
            labels: Vec::new(),
            subjects: Vec::new(),
            datasets: Vec::new(),
            label_vocabulary: vocab.clone(),
            feature_names: common.clone(),
        };
        for p in parts {
            let sel = p.select_features(&common)?;
            out.features.extend(sel.features);
            out.labels.extend(
                p.labels
                    .iter()
                    .map(|&l| vocab.binary_search(&p.label_vocabulary[l]).unwrap()),
            );
            out.subjects.extend(p.subjects.iter().cloned());
            out.datasets.extend(p.datasets.iter().copied());
        }
        out.validate()?;
        Ok(out)
    }

    /// Distinct labels actually present, in vocabulary order.
    pub fn observed_labels(&self) -> Vec<usize> {
        self.labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub(crate) fn check_trainable(&self) -> Result<()> {
        self.validate()?;
        let observed = self.observed_labels();
        if observed.len() < 2 {
            return Err(ClassifierError::SingleClass(
                self.label_vocabulary[observed[0]].clone(),
            ));
        }
        if self.len() < self.n_classes() {
            return Err(ClassifierError::TooFewRows {
                rows: self.len(),
                classes: self.n_classes(),
            });
        }
        Ok(())
    }
}

/// Per-feature z-normalization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    /// Zero-variance features record 1.
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Normalization { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    LinearSvm,
    FeedforwardNet,
}

impl ModelKind {
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "rf",
            ModelKind::LinearSvm => "svm",
            ModelKind::FeedforwardNet => "dnn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "RF",
            ModelKind::LinearSvm => "SVM",
            ModelKind::FeedforwardNet => "DNN",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rf" | "random_forest" | "forest" => Ok(ModelKind::RandomForest),
            "svm" | "linear_svm" => Ok(ModelKind::LinearSvm),
            "dnn" | "net" | "feedforward" | "feedforward_net" => Ok(ModelKind::FeedforwardNet),
            other => Err(format!("unknown model kind {other:?} (rf|svm|dnn)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    RandomForest(Forest),
    LinearSvm(LinearSvm),
    FeedforwardNet(Net),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparameters {
    RandomForest(ForestParams),
    LinearSvm(SvmParams),
    FeedforwardNet(NetParams),
}

impl Hyperparameters {
    /// Stable one-line description, used in report fingerprints.
    pub fn describe(&self) -> String {
        match self {
            Hyperparameters::RandomForest(p) => format!(
                "rf(n_trees={},max_depth={},seed={})",
                p.n_trees,
                p.max_depth.map_or("none".to_string(), |d| d.to_string()),
                p.seed
            ),
            Hyperparameters::LinearSvm(p) => format!(
                "svm(lambda={},epochs={},seed={})",
                p.lambda, p.epochs, p.seed
            ),
            Hyperparameters::FeedforwardNet(p) => format!(
                "dnn(hidden={:?},lr={},epochs={},batch={},seed={})",
                p.hidden, p.lr, p.epochs, p.batch_size, p.seed
            ),
        }
    }
}

/// A trained, immutable predictor plus everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format_version: u32,
    pub label_vocabulary: Vec<String>,
    pub feature_names: Vec<String>,
    /// Absent for the forest, which consumes raw features.
    pub normalization: Option<Normalization>,
    pub hyperparameters: Hyperparameters,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label_index: usize,
    pub label: String,
    /// Vote fractions (forest), margins (SVM) or softmax probabilities (net).
    pub scores: Vec<f64>,
}

/// Index of the largest value; the first wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl ClassifierModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::LinearSvm(_) => ModelKind::LinearSvm,
            ModelParams::FeedforwardNet(_) => ModelKind::FeedforwardNet,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        if row.len() != self.feature_names.len() {
            return Err(ClassifierError::Dimension {
                expected: self.feature_names.len(),
                got: row.len(),
            });
        }
        let normalized;
        let x = match &self.normalization {
            Some(n) => {
                normalized = n.apply(row);
                &normalized[..]
            }
            None => row,
        };
        let scores = match &self.params {
            ModelParams::RandomForest(f) => f.vote_fractions(x),
            ModelParams::LinearSvm(s) => s.margins(x),
            ModelParams::FeedforwardNet(n) => n.probabilities(x),
        };
        let label_index = argmax(&scores);
        Ok(Prediction {
            label_index,
            label: self.label_vocabulary[label_index].clone(),
            scores,
        })
    }

    pub fn predict_fv(&self, fv: &FeatureVector) -> Result<Prediction> {
        if fv.feature_names() != self.feature_names {
            return Err(ClassifierError::Dimension {
                expected: self.feature_names.len(),
                got: fv.values.len(),
            });
        }
        self.predict(&fv.values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ClassifierModel =
            serde_json::from_str(text).map_err(|e| ClassifierError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::Format(format!(
                "unsupported format_version {}",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Trains the requested model kind with default hyperparameters and `seed`.
pub fn train(kind: ModelKind, data: &LabeledDataset, seed: u64) -> Result<ClassifierModel> {
    match kind {
        ModelKind::RandomForest => train_random_forest(
            data,
            &ForestParams {
                seed,
                ..Default::default()
            },
        ),
        ModelKind::LinearSvm => train_linear_svm(
            data,
            &SvmParams {
                seed,
                ..Default::default()
            },
        ),
        ModelKind::FeedforwardNet => train_feedforward(
            data,
            &NetParams {
                seed,
                ..Default::default()
            },
        ),
    }
}
