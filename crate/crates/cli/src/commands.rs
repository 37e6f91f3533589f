//! Subcommand bodies. Each reads its declared inputs, writes its declared
//! outputs atomically and logs one summary line to stderr.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use har_core::analysis::{self, Histogram};
use har_core::classifiers::{self, ClassifierModel, LabeledDataset};
use har_core::evaluation::{
    self, evaluate, holdout_subjects, make_split, row_to_feature_vector, LlmPredictor,
    MetricsReport, ReportFormat, SplitSpec, DEFAULT_TEST_FRACTION,
};
use har_core::features::{self, FeatureConfig, FeatureVector};
use har_core::ingest::{self, IngestOptions, LabelMap, SampleRecord};
use har_core::llm_client::{
    answer_question, classify_window_lenient, BackendConfig, BackendKind, LlmClient, LlmResult,
    MockCentroid,
};
use har_core::prompting::{self, PromptTemplate, TokenBudgetReport};
use har_core::windowing::{self, SegmentConfig};
use har_core::ChannelId;

use crate::args::*;
use crate::fsutil::{open, read_string, write_atomic, write_string};
use crate::usage;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Segment(a) => segment(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Promptgen(a) => promptgen(a),
        Command::Tokenbudget(a) => tokenbudget(a),
        Command::LlmClassify(a) => llm_classify(a),
        Command::Qa(a) => qa(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Pipeline(a) => crate::pipeline::run(&a),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let label_map = match &a.label_map {
        Some(p) => Some(LabelMap::from_json_file(p)?),
        None => None,
    };
    let opts = IngestOptions {
        label_map,
        strict_labels: a.strict_labels,
        position: a.position.clone(),
        device: a.device.clone(),
    };
    let ing = ingest::parse_dataset(&a.root, a.dataset, &opts)?;
    write_atomic(&a.out, |w| {
        Ok(ingest::write_canonical_csv(&ing.records, w)?)
    })?;
    let dropped: usize = ing.report.dropped_labels.values().sum();
    eprintln!(
        "ingest: {} records, {} subjects, labels [{}], {} malformed, {} dropped -> {}",
        ing.records.len(),
        ing.descriptor.subject_ids.len(),
        ing.descriptor.label_vocabulary.join(", "),
        ing.report.malformed_rows,
        dropped,
        a.out.display()
    );
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    ingest::read_canonical_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_windows(path: &Path) -> Result<Vec<windowing::Window>> {
    windowing::read_windows_jsonl(BufReader::new(open(path)?))
        .with_context(|| format!("reading {}", path.display()))
}

fn read_features(path: &Path) -> Result<Vec<FeatureVector>> {
    features::read_feature_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn segment(a: SegmentArgs) -> Result<()> {
    let cfg = SegmentConfig {
        window_len: a.window,
        step: a.step,
        gap_factor: a.gap_factor,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let records = read_records(&a.input)?;
    let seg = windowing::segment(&records, &cfg)?;
    write_atomic(&a.out, |w| {
        Ok(windowing::write_windows_jsonl(&seg.windows, w)?)
    })?;
    eprintln!(
        "segment: {} windows from {} sessions ({} shorter than a window) -> {}",
        seg.windows.len(),
        seg.sessions,
        seg.short_sessions,
        a.out.display()
    );
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let cfg = FeatureConfig {
        band_split_hz: a.band_split_hz,
        taper: a.taper.into(),
    };
    let windows = read_windows(&a.input)?;
    let rows = features::extract_all(&windows, &cfg)?;
    write_atomic(&a.out, |w| Ok(features::write_feature_csv(&rows, w)?))?;
    eprintln!("features: {} rows -> {}", rows.len(), a.out.display());
    Ok(())
}

fn load_dataset(paths: &[PathBuf]) -> Result<LabeledDataset> {
    let parts = paths
        .iter()
        .map(|p| {
            let rows = read_features(p)?;
            LabeledDataset::from_feature_vectors(&rows)
                .with_context(|| format!("loading {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().unwrap());
    }
    Ok(LabeledDataset::concat_common(&parts)?)
}

/// Like [`SplitSpec::parse`], plus bare `unseen`, which holds out the
/// default fraction of subjects.
fn resolve_split(text: &str, seed: u64, data: &LabeledDataset) -> Result<SplitSpec> {
    if text == "unseen" {
        return Ok(SplitSpec::UnseenSubject {
            held_out_subjects: holdout_subjects(data, DEFAULT_TEST_FRACTION),
        });
    }
    SplitSpec::parse(text, seed).map_err(|e| usage(e.to_string()))
}

fn split_data(a: &SplitArgs) -> Result<(SplitSpec, LabeledDataset, LabeledDataset)> {
    let data = load_dataset(&a.features)?;
    let spec = resolve_split(&a.split, a.seed, &data)?;
    let (train, test) = make_split(&data, &spec)?;
    Ok((spec, train, test))
}

fn train(a: TrainArgs) -> Result<()> {
    let (spec, train, _) = split_data(&a.split)?;
    let model = classifiers::train(a.model, &train, a.split.seed)?;
    write_string(&a.out, &model.to_json())?;
    eprintln!(
        "train: {} on {} rows, {} classes, {} -> {}",
        a.model.display_name(),
        train.len(),
        train.n_classes(),
        spec.describe(),
        a.out.display()
    );
    Ok(())
}

/// Language-model evaluation config (`eval --model <file>.toml`).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LlmEvalConfig {
    #[serde(default = "default_template")]
    template: String,
    /// Defaults to the training labels.
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default = "default_precision")]
    precision: usize,
    #[serde(default)]
    backend: BackendConfig,
}

fn default_template() -> String {
    "classify".into()
}

fn default_precision() -> usize {
    prompting::DEFAULT_PRECISION
}

fn is_toml(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

fn fit_mock(data: &LabeledDataset) -> Result<MockCentroid> {
    let rows = (0..data.len())
        .map(|i| row_to_feature_vector(data, i))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(MockCentroid::fit(&rows)?)
}

fn eval(a: EvalArgs) -> Result<()> {
    let (spec, train, test) = split_data(&a.split)?;
    let report = if is_toml(&a.model) {
        let cfg: LlmEvalConfig = toml::from_str(&read_string(&a.model)?)
            .map_err(|e| usage(format!("{}: {e}", a.model.display())))?;
        let client = if cfg.backend.kind == BackendKind::MockCentroid
            && cfg.backend.mock_features.is_none()
        {
            // Without its own fit data the mock learns from the training side.
            LlmClient::with_mock(cfg.backend.clone(), fit_mock(&train)?)?
        } else {
            LlmClient::new(cfg.backend.clone())?
        };
        let label_set = if cfg.labels.is_empty() {
            train.label_vocabulary.clone()
        } else {
            cfg.labels.clone()
        };
        let predictor = LlmPredictor {
            client: &client,
            template: PromptTemplate::resolve(&cfg.template)?,
            label_set,
            precision: cfg.precision,
        };
        evaluate(&predictor, &test, &spec)?
    } else {
        let model = ClassifierModel::load(&a.model)?;
        evaluate(&model, &test, &spec)?
    };
    let text = match a.format {
        FormatArg::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
        other => render(&[report.clone()], other),
    };
    write_string(&a.out, &text)?;
    eprintln!(
        "eval: {} on {} ({}) accuracy {:.4}, macro F1 {:.4}, {} rows -> {}",
        report.model,
        report.dataset,
        report.split,
        report.accuracy,
        report.macro_f1,
        report.n_evaluated,
        a.out.display()
    );
    Ok(())
}

fn render(reports: &[MetricsReport], format: FormatArg) -> String {
    match format {
        FormatArg::Json => evaluation::render_report(reports, ReportFormat::Json),
        FormatArg::Csv => evaluation::render_report(reports, ReportFormat::Csv),
        FormatArg::Md => evaluation::render_report(reports, ReportFormat::MarkdownTable),
        FormatArg::Pivot => evaluation::render_split_table(reports),
    }
}

fn label_set_or_observed(labels: &[String], rows: &[FeatureVector]) -> Vec<String> {
    if !labels.is_empty() {
        return labels
            .iter()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
    }
    let set: std::collections::BTreeSet<String> =
        rows.iter().map(|r| r.activity.to_string()).collect();
    set.into_iter().collect()
}

fn promptgen(a: PromptgenArgs) -> Result<()> {
    let rows = read_features(&a.features)?;
    let template = PromptTemplate::resolve(&a.template)?;
    let labels = label_set_or_observed(&a.labels, &rows);
    let pairs =
        prompting::generate_instruction_pairs(&rows, &template, &labels, a.mode, a.precision)?;
    write_atomic(&a.out, |w| Ok(prompting::write_pairs_jsonl(&pairs, w)?))?;
    eprintln!(
        "promptgen: {} pairs over {} labels -> {}",
        pairs.len(),
        labels.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct TokenBudgetSummary {
    limit: usize,
    precision: usize,
    n_windows: usize,
    max_ratio: f64,
    mean_ratio: f64,
    min_raw_tokens: usize,
    max_feature_tokens: usize,
    raw_over_limit: usize,
    features_over_limit: usize,
    windows: Vec<TokenBudgetReport>,
}

fn tokenbudget(a: TokenbudgetArgs) -> Result<()> {
    let windows = read_windows(&a.windows)?;
    let cfg = FeatureConfig {
        band_split_hz: a.band_split_hz,
        ..Default::default()
    };
    let reports = windows
        .par_iter()
        .map(|w| prompting::token_budget(w, &cfg, a.limit, a.precision))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let n = reports.len();
    let summary = TokenBudgetSummary {
        limit: a.limit,
        precision: a.precision,
        n_windows: n,
        max_ratio: reports.iter().map(|r| r.ratio).fold(0.0, f64::max),
        mean_ratio: if n > 0 {
            reports.iter().map(|r| r.ratio).sum::<f64>() / n as f64
        } else {
            0.0
        },
        min_raw_tokens: reports.iter().map(|r| r.raw_tokens).min().unwrap_or(0),
        max_feature_tokens: reports.iter().map(|r| r.feature_tokens).max().unwrap_or(0),
        raw_over_limit: reports.iter().filter(|r| !r.raw_fits).count(),
        features_over_limit: reports.iter().filter(|r| !r.feature_fits).count(),
        windows: reports,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_string(&a.out, &text)?;
    eprintln!(
        "tokenbudget: {} windows, max ratio {:.4}, {} raw and {} feature prompts over {} -> {}",
        n,
        summary.max_ratio,
        summary.raw_over_limit,
        summary.features_over_limit,
        a.limit,
        a.out.display()
    );
    Ok(())
}

fn backend_config(a: &BackendArgs) -> Result<BackendConfig> {
    let mut cfg = match &a.backend_config {
        Some(p) => toml::from_str::<BackendConfig>(&read_string(p)?)
            .map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => BackendConfig::default(),
    };
    match a.backend {
        Some(BackendArg::Http) => {
            cfg.kind = BackendKind::HttpChat;
            if a.model_name.is_none() && cfg.model_name == BackendConfig::default().model_name {
                return Err(usage("--backend http needs --model"));
            }
        }
        Some(BackendArg::Mock) => cfg.kind = BackendKind::MockCentroid,
        None if a.backend_config.is_none() => {
            return Err(usage("give --backend or --backend-config"))
        }
        None => {}
    }
    if let Some(v) = &a.endpoint {
        cfg.endpoint_url = Some(v.clone());
    }
    if let Some(v) = &a.model_name {
        cfg.model_name = v.clone();
    }
    if let Some(v) = &a.api_key_env {
        cfg.api_key_env_var = v.clone();
    }
    if let Some(v) = a.timeout_s {
        cfg.timeout_s = v;
    }
    if let Some(v) = a.max_retries {
        cfg.max_retries = v;
    }
    if let Some(v) = a.requests_per_second {
        cfg.requests_per_second = Some(v);
    }
    if let Some(v) = &a.mock_features {
        cfg.mock_features = Some(v.clone());
    }
    if cfg.kind == BackendKind::MockCentroid && cfg.mock_features.is_none() {
        return Err(usage("the mock backend needs --mock-features"));
    }
    if cfg.kind == BackendKind::HttpChat && cfg.endpoint_url.is_none() {
        return Err(usage("the http backend needs --endpoint"));
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn write_results(path: &Path, results: &[LlmResult]) -> Result<()> {
    write_atomic(path, |w| {
        for r in results {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

fn take_rows(mut rows: Vec<FeatureVector>, limit: Option<usize>) -> Vec<FeatureVector> {
    if let Some(n) = limit {
        rows.truncate(n);
    }
    rows
}

fn llm_classify(a: LlmClassifyArgs) -> Result<()> {
    let client = LlmClient::new(backend_config(&a.backend)?)?;
    let template = PromptTemplate::resolve(&a.template)?;
    let rows = take_rows(read_features(&a.features)?, a.limit);
    let labels = label_set_or_observed(&a.labels, &rows);
    let results = rows
        .par_iter()
        .map(|fv| classify_window_lenient(&client, &template, fv, &labels, a.precision))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    write_results(&a.out, &results)?;
    let parsed: Vec<(&FeatureVector, &str)> = rows
        .iter()
        .zip(&results)
        .filter_map(|(fv, r)| r.parsed_label.as_deref().map(|l| (fv, l)))
        .collect();
    let correct = parsed.iter().filter(|(fv, l)| &*fv.activity == *l).count();
    eprintln!(
        "llm-classify: {} rows via {}, {} unparseable, {} of {} parsed answers match the row label -> {}",
        rows.len(),
        client.describe(),
        rows.len() - parsed.len(),
        correct,
        parsed.len(),
        a.out.display()
    );
    Ok(())
}

fn qa(a: QaArgs) -> Result<()> {
    if a.question.trim().is_empty() {
        return Err(usage("--question is empty"));
    }
    let client = LlmClient::new(backend_config(&a.backend)?)?;
    let template = PromptTemplate::resolve(&a.template)?;
    let rows = take_rows(read_features(&a.features)?, a.limit);
    let results = rows
        .par_iter()
        .map(|fv| answer_question(&client, &template, fv, &a.question, a.precision))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    write_results(&a.out, &results)?;
    eprintln!(
        "qa: {} answers via {} -> {}",
        results.len(),
        client.describe(),
        a.out.display()
    );
    Ok(())
}

/// Column table pulled from either CSV flavour.
struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl Table {
    fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.labels.len();
        (0..n)
            .map(|i| self.columns.iter().map(|c| c[i]).collect())
            .collect()
    }

    fn select(self, wanted: &[String]) -> Result<Table> {
        if wanted.is_empty() {
            return Ok(self);
        }
        let mut names = Vec::new();
        let mut columns = Vec::new();
        for w in wanted {
            let i = self
                .names
                .iter()
                .position(|n| n.eq_ignore_ascii_case(w))
                .ok_or_else(|| {
                    usage(format!("no column {w:?} (have {})", self.names.join(", ")))
                })?;
            names.push(self.names[i].clone());
            columns.push(self.columns[i].clone());
        }
        Ok(Table {
            names,
            columns,
            labels: self.labels,
        })
    }
}

fn first_line(path: &Path) -> Result<String> {
    let mut line = String::new();
    BufReader::new(open(path)?).read_line(&mut line)?;
    Ok(line)
}

fn load_table(a: &AnalyzeArgs) -> Result<Table> {
    let header = first_line(&a.input)?;
    let keep = |subject: &str, activity: &str, dataset: har_core::DatasetId| {
        a.subject.as_deref().is_none_or(|s| s == subject)
            && a.activity.as_deref().is_none_or(|s| s == activity)
            && a.dataset.is_none_or(|d| d == dataset)
    };
    let table = if header.starts_with("timestamp,") {
        let records: Vec<SampleRecord> = read_records(&a.input)?
            .into_iter()
            .filter(|r| keep(&r.subject_id, &r.activity, r.dataset_id))
            .collect();
        let (channels, columns) = analysis::record_columns(&records);
        Table {
            names: channels
                .iter()
                .map(|c| ChannelId::short_name(*c).to_string())
                .collect(),
            columns,
            labels: records.iter().map(|r| r.activity.to_string()).collect(),
        }
    } else if header.starts_with("dataset,") {
        let rows: Vec<FeatureVector> = read_features(&a.input)?
            .into_iter()
            .filter(|r| keep(&r.subject_id, &r.activity, r.dataset_id))
            .collect();
        let names = rows.first().map(|r| r.feature_names()).unwrap_or_default();
        let columns = (0..names.len())
            .map(|j| rows.iter().map(|r| r.values[j]).collect())
            .collect();
        Table {
            names,
            columns,
            labels: rows.iter().map(|r| r.activity.to_string()).collect(),
        }
    } else {
        bail!(
            "{}: neither a canonical nor a feature CSV",
            a.input.display()
        );
    };
    if table.labels.is_empty() {
        bail!("no rows left after filtering {}", a.input.display());
    }
    table.select(&a.columns)
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let table = load_table(&a)?;
    let n = table.labels.len();
    match a.kind {
        AnalysisKind::Corr => {
            let cm = analysis::correlation_matrix(&table.names, &table.columns)?;
            write_atomic(&a.out, |w| Ok(analysis::write_correlation_csv(&cm, w)?))?;
            if !cm.undefined.is_empty() {
                eprintln!("analyze: zero-variance columns {}", cm.undefined.join(", "));
            }
        }
        AnalysisKind::Pca => {
            let p = analysis::pca2(&table.names, &table.rows(), &table.labels)?;
            write_atomic(&a.out, |w| Ok(analysis::write_pca_csv(&p, w)?))?;
            eprintln!(
                "analyze: explained variance {:.4}, {:.4}",
                p.explained_variance_ratio[0], p.explained_variance_ratio[1]
            );
        }
        AnalysisKind::Hist => {
            let hs = table
                .names
                .iter()
                .zip(&table.columns)
                .map(|(name, col)| analysis::histogram(name, col, a.bins))
                .collect::<std::result::Result<Vec<Histogram>, _>>()?;
            write_atomic(&a.out, |w| Ok(analysis::write_histograms_csv(&hs, w)?))?;
        }
    }
    eprintln!(
        "analyze: {:?} over {} rows x {} columns -> {}",
        a.kind,
        n,
        table.names.len(),
        a.out.display()
    );
    Ok(())
}

/// Reads a report file holding one report object or an array of them.
pub fn read_reports(path: &Path) -> Result<Vec<MetricsReport>> {
    let text = read_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let reports = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    Ok(reports)
}

fn report(a: ReportArgs) -> Result<()> {
    let mut all = Vec::new();
    for p in &a.inputs {
        all.extend(read_reports(p)?);
    }
    write_string(&a.out, &render(&all, a.format))?;
    eprintln!("report: {} reports -> {}", all.len(), a.out.display());
    Ok(())
}
