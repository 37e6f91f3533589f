//! Prompt rendering, instruction-pair generation and token budgets.
//!
//! Feature vectors are rendered as `<channel> <stat>: <value>` lines, one
//! per statistic, channel-major. Templates are TOML documents with
//! `{features}`, `{label_set}` and `{question}` placeholders; the bundled
//! ones live in `templates/`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{
    extract, FeatureConfig, FeatureError, FeatureVector, Stat, STATS_PER_CHANNEL,
};
use crate::ingest::{ChannelId, Sensor};
use crate::numfmt::format_fixed;
use crate::windowing::Window;

pub const DEFAULT_PRECISION: usize = 3;
pub const DEFAULT_TOKEN_LIMIT: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("unresolved placeholder {{{0}}}")]
    Unresolved(String),
    #[error("unbalanced brace at byte {0} of template")]
    Brace(usize),
    #[error("template {name}: {reason}")]
    InvalidTemplate { name: String, reason: String },
    #[error("label {label:?} is not in the label set")]
    UnknownLabel { label: String },
    #[error("instruction pair line {line}: {source}")]
    Jsonl {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PromptError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerFormat {
    LabelOnly,
    LabelWithReasoning,
    Freeform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub name: String,
    pub system_text: String,
    pub body_text: String,
    pub answer_format: AnswerFormat,
}

const CLASSIFY_TOML: &str = include_str!("../templates/classify.toml");
const REASONED_TOML: &str = include_str!("../templates/reasoned.toml");
const QA_TOML: &str = include_str!("../templates/qa.toml");

impl PromptTemplate {
    pub fn from_toml(text: &str) -> Result<Self> {
        let t: PromptTemplate = toml::from_str(text).map_err(|e| PromptError::InvalidTemplate {
            name: "<toml>".into(),
            reason: e.to_string(),
        })?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?).map_err(|e| match e {
            PromptError::InvalidTemplate { reason, .. } => PromptError::InvalidTemplate {
                name: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let names = placeholders(&self.body_text)?;
        let bad = |reason: &str| {
            Err(PromptError::InvalidTemplate {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if !names.iter().any(|n| n == "features") {
            return bad("body_text must contain {features}");
        }
        if self.answer_format != AnswerFormat::Freeform && !names.iter().any(|n| n == "label_set") {
            return bad("label formats must contain {label_set}");
        }
        placeholders(&self.system_text)?;
        Ok(())
    }

    /// Label-only classification template.
    pub fn classify() -> Self {
        Self::from_toml(CLASSIFY_TOML).expect("bundled template")
    }

    /// Label plus a one-line rationale.
    pub fn reasoned() -> Self {
        Self::from_toml(REASONED_TOML).expect("bundled template")
    }

    /// Free-form question answering.
    pub fn qa() -> Self {
        Self::from_toml(QA_TOML).expect("bundled template")
    }

    /// A bundled template by name, or a template file path.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec {
            "classify" => Ok(Self::classify()),
            "reasoned" => Ok(Self::reasoned()),
            "qa" => Ok(Self::qa()),
            path => Self::load(Path::new(path)),
        }
    }
}

/// Placeholder names in order of appearance. `{{` and `}}` are literal
/// braces.
fn placeholders(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    scan(text, |name| {
        out.push(name.to_string());
        Ok(String::new())
    })?;
    Ok(out)
}

/// Single left-to-right pass; substituted text is never rescanned.
fn scan(text: &str, mut resolve: impl FnMut(&str) -> Result<String>) -> Result<String> {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut literal_start = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push_str(&text[literal_start..i + 1]);
                i += 2;
                literal_start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push_str(&text[literal_start..i + 1]);
                i += 2;
                literal_start = i;
            }
            b'{' => {
                let close = text[i + 1..].find('}').ok_or(PromptError::Brace(i))? + i + 1;
                let name = &text[i + 1..close];
                if name.is_empty() || !name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
                {
                    return Err(PromptError::Brace(i));
                }
                out.push_str(&text[literal_start..i]);
                out.push_str(&resolve(name)?);
                i = close + 1;
                literal_start = i;
            }
            b'}' => return Err(PromptError::Brace(i)),
            _ => i += 1,
        }
    }
    out.push_str(&text[literal_start..]);
    Ok(out)
}

/// Channel name used in prompt text, e.g. `Gy`.
pub fn channel_label(ch: ChannelId) -> &'static str {
    ch.prompt_name()
}

/// One `<channel> <stat>: <value>` line per statistic.
pub fn serialize_features(fv: &FeatureVector, precision: usize) -> String {
    let mut s = String::with_capacity(fv.values.len() * 24);
    for (c, ch) in fv.channel_order.iter().enumerate() {
        for (stat, v) in Stat::ALL.iter().zip(fv.channel_stats(c)) {
            let _ = writeln!(
                s,
                "{} {}: {}",
                channel_label(*ch),
                stat.prompt_name(),
                format_fixed(*v, precision)
            );
        }
    }
    if s.ends_with('\n') {
        s.pop();
    }
    s
}

/// Window as comma-separated rows. Values are right-aligned to
/// `precision + 3` characters so columns line up for typical magnitudes.
pub fn serialize_raw_window(window: &Window, precision: usize) -> String {
    let width = precision + 3;
    let c = window.channels();
    let mut s = String::with_capacity(window.samples.len() * (precision + 5));
    for r in 0..window.len() {
        for (j, v) in window.row(r).iter().enumerate() {
            let _ = write!(s, "{:>width$}", format_fixed(*v, precision));
            if j + 1 < c {
                s.push_str(", ");
            }
        }
        if r + 1 < window.len() {
            s.push('\n');
        }
    }
    s
}

/// ceil(bytes / 4): a tokenizer-free proxy for prompt length.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBudgetReport {
    pub raw_tokens: usize,
    pub feature_tokens: usize,
    /// feature_tokens / raw_tokens; 0 for an empty window.
    pub ratio: f64,
    pub limit: usize,
    pub raw_fits: bool,
    pub feature_fits: bool,
}

impl TokenBudgetReport {
    pub fn from_counts(raw_tokens: usize, feature_tokens: usize, limit: usize) -> Self {
        TokenBudgetReport {
            raw_tokens,
            feature_tokens,
            ratio: if raw_tokens > 0 {
                feature_tokens as f64 / raw_tokens as f64
            } else {
                0.0
            },
            limit,
            raw_fits: raw_tokens <= limit,
            feature_fits: feature_tokens <= limit,
        }
    }
}

/// Compares raw and feature serializations of the same window.
pub fn token_budget(
    window: &Window,
    cfg: &FeatureConfig,
    limit: usize,
    precision: usize,
) -> Result<TokenBudgetReport> {
    let fv = if window.len() >= 2 {
        extract(window, cfg)?
    } else {
        // A single sample is treated as a constant window: mean only.
        let mut values = vec![0.0; window.channels() * STATS_PER_CHANNEL];
        for (c, v) in window.samples.iter().enumerate() {
            values[c * STATS_PER_CHANNEL + Stat::Mean.index()] = *v;
        }
        FeatureVector {
            channel_order: window.channel_order.clone(),
            values,
            activity: window.activity.clone(),
            subject_id: window.subject_id.clone(),
            dataset_id: window.dataset_id,
            sampling_rate_hz: window.sampling_rate_hz,
        }
    };
    Ok(TokenBudgetReport::from_counts(
        estimate_tokens(&serialize_raw_window(window, precision)),
        estimate_tokens(&serialize_features(&fv, precision)),
        limit,
    ))
}

pub fn format_label_set(labels: &[String]) -> String {
    labels.join(", ")
}

pub fn render_with(
    template: &PromptTemplate,
    features: &str,
    label_set: &[String],
    question: Option<&str>,
) -> Result<String> {
    let labels = format_label_set(label_set);
    let body = template.body_text.trim_start_matches('\n');
    scan(body, |name| match name {
        "features" => Ok(features.to_string()),
        "label_set" => Ok(labels.clone()),
        "question" => question
            .map(str::to_string)
            .ok_or_else(|| PromptError::Unresolved(name.to_string())),
        other => Err(PromptError::Unresolved(other.to_string())),
    })
}

/// User message for `fv`. The system message is `template.system_text`.
pub fn render_prompt(
    template: &PromptTemplate,
    fv: &FeatureVector,
    label_set: &[String],
    question: Option<&str>,
    precision: usize,
) -> Result<String> {
    render_with(
        template,
        &serialize_features(fv, precision),
        label_set,
        question,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    Classify,
    Reasoned,
}

impl std::str::FromStr for PairMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "classify" => Ok(PairMode::Classify),
            "reasoned" => Ok(PairMode::Reasoned),
            other => Err(format!("unknown mode {other:?} (classify|reasoned)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionPair {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

impl InstructionPair {
    /// Label named by the output's first line.
    pub fn output_label(&self) -> &str {
        self.output.lines().next().unwrap_or("").trim()
    }
}

/// Channel index with the largest standard deviation; the first wins ties.
pub fn dominant_channel(fv: &FeatureVector) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in 0..fv.channel_order.len() {
        let sd = fv.channel_stats(c)[Stat::Std.index()];
        if best.is_none_or(|(_, b)| sd > b) {
            best = Some((c, sd));
        }
    }
    best.map(|(c, _)| c)
}

/// Ratio of the largest accelerometer std to the magnitude of the mean
/// acceleration vector (gravity). `None` without accelerometer channels.
fn motion_ratio(fv: &FeatureVector) -> Option<f64> {
    let acc: Vec<usize> = (0..fv.channel_order.len())
        .filter(|&c| fv.channel_order[c].sensor == Sensor::Accel)
        .collect();
    if acc.is_empty() {
        return None;
    }
    let max_sd = acc
        .iter()
        .map(|&c| fv.channel_stats(c)[Stat::Std.index()])
        .fold(0.0, f64::max);
    let norm = acc
        .iter()
        .map(|&c| fv.channel_stats(c)[Stat::Mean.index()].powi(2))
        .sum::<f64>()
        .sqrt();
    Some(if norm > 0.0 { max_sd / norm } else { max_sd })
}

/// Above this ratio a window is described as dynamic.
const DYNAMIC_RATIO: f64 = 0.05;

/// Rule-based rationale naming the dominant channel and the motion cue.
pub fn templated_reasoning(fv: &FeatureVector, precision: usize) -> String {
    let Some(c) = dominant_channel(fv) else {
        return "Reasoning: no channels available.".to_string();
    };
    let stats = fv.channel_stats(c);
    let ch = channel_label(fv.channel_order[c]);
    let mut s = format!(
        "Reasoning: {ch} has the largest variation (std {}), with energy centred near {} Hz",
        format_fixed(stats[Stat::Std.index()], precision),
        format_fixed(stats[Stat::MeanFreq.index()], 2),
    );
    match motion_ratio(fv) {
        Some(r) if r > DYNAMIC_RATIO => s.push_str(
            "; accelerometer variation is large relative to gravity, which points to a dynamic activity.",
        ),
        Some(_) => s.push_str(
            "; accelerometer readings stay close to gravity, which points to a static posture.",
        ),
        None => s.push('.'),
    }
    s
}

fn instruction_text(template: &PromptTemplate, label_set: &[String]) -> Result<String> {
    let body = render_with(template, "(given in the input)", label_set, None)?;
    Ok(format!("{}\n\n{}", template.system_text, body))
}

/// One pair per row, in input order. Every row's label must be in
/// `label_set`.
pub fn generate_instruction_pairs(
    rows: &[FeatureVector],
    template: &PromptTemplate,
    label_set: &[String],
    mode: PairMode,
    precision: usize,
) -> Result<Vec<InstructionPair>> {
    let instruction = instruction_text(template, label_set)?;
    rows.par_iter()
        .map(|fv| {
            let label = label_set
                .iter()
                .find(|l| l.as_str() == &*fv.activity)
                .ok_or_else(|| PromptError::UnknownLabel {
                    label: fv.activity.to_string(),
                })?;
            let output = match mode {
                PairMode::Classify => label.clone(),
                PairMode::Reasoned => format!("{label}\n{}", templated_reasoning(fv, precision)),
            };
            Ok(InstructionPair {
                instruction: instruction.clone(),
                input: serialize_features(fv, precision),
                output,
            })
        })
        .collect()
}

pub fn write_pairs_jsonl<W: Write>(pairs: &[InstructionPair], mut out: W) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut out, p).map_err(|e| PromptError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pairs_jsonl<R: BufRead>(input: R) -> Result<Vec<InstructionPair>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| PromptError::Jsonl {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

/// Number of value lines `serialize_features` emits.
pub fn feature_line_count(fv: &FeatureVector) -> usize {
    fv.channel_order.len() * STATS_PER_CHANNEL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DatasetId;
    use crate::synthetic::{generate_records, SyntheticSpec};
    use crate::windowing::{segment, SegmentConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn fv_with(values: Vec<f64>, activity: &str) -> FeatureVector {
        FeatureVector {
            channel_order: ChannelId::ALL.to_vec(),
            values,
            activity: Arc::from(activity),
            subject_id: Arc::from("1"),
            dataset_id: DatasetId::Shoaib,
            sampling_rate_hz: 50.0,
        }
    }

    fn window(rows: usize, cols: usize, f: impl FnMut(usize) -> f64) -> Window {
        Window {
            samples: (0..rows * cols).map(f).collect(),
            channel_order: ChannelId::ALL[..cols].to_vec(),
            activity: Arc::from("walking"),
            subject_id: Arc::from("1"),
            dataset_id: DatasetId::Shoaib,
            sampling_rate_hz: 50.0,
            origin_index: 0,
        }
    }

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn synthetic_windows() -> Vec<Window> {
        let recs = generate_records(&SyntheticSpec::default());
        segment(&recs, &SegmentConfig::default()).unwrap().windows
    }

    #[test]
    fn zero_vector_renders_zeros() {
        let s = serialize_features(&fv_with(vec![0.0; 63], "walking"), 3);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 63);
        assert!(lines.iter().all(|l| l.ends_with(": 0.000")));
        assert_eq!(lines[0], "Ax mean: 0.000");
        assert_eq!(lines[62], "Mz bp_high: 0.000");
    }

    #[test]
    fn raw_window_shape() {
        let w = window(1, 1, |_| 1.5);
        assert_eq!(serialize_raw_window(&w, 3).trim(), "1.500");
        let w = window(200, 9, |i| i as f64 * 0.01);
        let s = serialize_raw_window(&w, 3);
        assert_eq!(s.lines().count(), 200);
        assert_eq!(s.split([',', '\n']).count(), 1800);
    }

    #[test]
    fn raw_length_tracks_nominal_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let w = window(200, 9, |_| rng.gen_range(-10.0..10.0));
            let len = serialize_raw_window(&w, 3).len() as f64;
            let nominal = (200 * 9 * (3 + 5)) as f64;
            assert!(
                (len - nominal).abs() / nominal <= 0.02,
                "{len} vs {nominal}"
            );
        }
    }

    #[test]
    fn token_estimates() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcdefgh"), 2);
        assert_eq!(estimate_tokens("abcdefghi"), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = window(200, 9, |_| rng.gen_range(-10.0..10.0));
        let t = estimate_tokens(&serialize_raw_window(&w, 3));
        assert!(t > 2500, "{t}");
    }

    #[test]
    fn raw_window_token_regression() {
        // Fixed-content window: values i mod 17 scaled, so the byte count is stable.
        let w = window(200, 9, |i| (i % 17) as f64 * 1.25 - 10.0);
        assert_eq!(estimate_tokens(&serialize_raw_window(&w, 3)), 3577);
    }

    #[test]
    fn budget_on_synthetic_windows() {
        for w in synthetic_windows() {
            let r = token_budget(&w, &FeatureConfig::default(), DEFAULT_TOKEN_LIMIT, 3).unwrap();
            assert!(r.ratio < 0.10, "ratio {}", r.ratio);
            assert!(r.feature_fits);
            assert!(r.raw_tokens > 2500);
        }
    }

    #[test]
    fn degenerate_budgets() {
        let w = window(1, 1, |_| 1.5);
        let r = token_budget(&w, &FeatureConfig::default(), DEFAULT_TOKEN_LIMIT, 3).unwrap();
        assert!(r.ratio > 1.0);
        assert!(r.raw_fits);
        let r = token_budget(&w, &FeatureConfig::default(), 1, 3).unwrap();
        assert!(!r.raw_fits && !r.feature_fits);
    }

    #[test]
    fn identity_template() {
        let t = PromptTemplate {
            name: "id".into(),
            system_text: String::new(),
            body_text: "{features}".into(),
            answer_format: AnswerFormat::Freeform,
        };
        let fv = fv_with((0..63).map(|i| i as f64 / 7.0).collect(), "walking");
        assert_eq!(
            render_prompt(&t, &fv, &[], None, 3).unwrap(),
            serialize_features(&fv, 3)
        );
    }

    #[test]
    fn label_set_appears_once_each() {
        let fv = fv_with(vec![1.0; 63], "walking");
        let set = labels(&["running", "sitting", "walking"]);
        let p = render_prompt(&PromptTemplate::classify(), &fv, &set, None, 3).unwrap();
        for l in &set {
            assert_eq!(
                p.matches(&format!("{l},")).count() + p.matches(&format!("{l}.")).count(),
                1
            );
        }
    }

    #[test]
    fn default_template_contains_every_feature_line() {
        let w = &synthetic_windows()[0];
        let fv = extract(w, &FeatureConfig::default()).unwrap();
        let p = render_prompt(
            &PromptTemplate::classify(),
            &fv,
            &labels(&["walking"]),
            None,
            3,
        )
        .unwrap();
        let ser = serialize_features(&fv, 3);
        assert_eq!(ser.lines().count(), 63);
        for line in ser.lines() {
            assert!(p.lines().any(|l| l == line), "missing {line}");
        }
    }

    #[test]
    fn unresolved_placeholders_are_named() {
        let fv = fv_with(vec![0.0; 63], "walking");
        let err = render_prompt(&PromptTemplate::qa(), &fv, &[], None, 3).unwrap_err();
        assert_eq!(err.to_string(), "unresolved placeholder {question}");
        let t = PromptTemplate {
            name: "x".into(),
            system_text: String::new(),
            body_text: "{features} {mood}".into(),
            answer_format: AnswerFormat::Freeform,
        };
        assert!(matches!(
            render_prompt(&t, &fv, &[], None, 3),
            Err(PromptError::Unresolved(n)) if n == "mood"
        ));
    }

    #[test]
    fn substitution_is_single_pass() {
        let t = PromptTemplate {
            name: "x".into(),
            system_text: String::new(),
            body_text: "{{literal}} {features} Q: {question}".into(),
            answer_format: AnswerFormat::Freeform,
        };
        let out = render_with(&t, "F", &[], Some("{features}?")).unwrap();
        assert_eq!(out, "{literal} F Q: {features}?");
    }

    #[test]
    fn template_validation() {
        let bad = "name = \"b\"\nanswer_format = \"label_only\"\nsystem_text = \"\"\nbody_text = \"{features}\"\n";
        assert!(matches!(
            PromptTemplate::from_toml(bad),
            Err(PromptError::InvalidTemplate { .. })
        ));
        for t in [
            PromptTemplate::classify(),
            PromptTemplate::reasoned(),
            PromptTemplate::qa(),
        ] {
            t.validate().unwrap();
        }
    }

    #[test]
    fn classify_pairs_echo_gold() {
        let vocab = labels(&["running", "sitting", "walking"]);
        let rows: Vec<FeatureVector> = (0..10)
            .map(|i| fv_with(vec![i as f64; 63], &vocab[i % 3]))
            .collect();
        let pairs = generate_instruction_pairs(
            &rows,
            &PromptTemplate::classify(),
            &vocab,
            PairMode::Classify,
            3,
        )
        .unwrap();
        assert_eq!(pairs.len(), 10);
        for (p, r) in pairs.iter().zip(&rows) {
            assert_eq!(p.output, &*r.activity);
            assert_eq!(p.input, serialize_features(r, 3));
        }
        let err = generate_instruction_pairs(
            &rows,
            &PromptTemplate::classify(),
            &vocab[..2],
            PairMode::Classify,
            3,
        );
        assert!(matches!(err, Err(PromptError::UnknownLabel { .. })));
    }

    #[test]
    fn reasoning_names_max_std_channel() {
        let walking: Vec<Window> = synthetic_windows()
            .into_iter()
            .filter(|w| &*w.activity == "walking")
            .collect();
        let fv = extract(&walking[0], &FeatureConfig::default()).unwrap();
        // Independent argmax over the std column.
        let stds: Vec<f64> = ChannelId::ALL
            .iter()
            .map(|c| fv.get(*c, Stat::Std).unwrap())
            .collect();
        let mut best = 0;
        for i in 1..stds.len() {
            if stds[i] > stds[best] {
                best = i;
            }
        }
        let pairs = generate_instruction_pairs(
            std::slice::from_ref(&fv),
            &PromptTemplate::reasoned(),
            &labels(&["sitting", "walking"]),
            PairMode::Reasoned,
            3,
        )
        .unwrap();
        let out = &pairs[0].output;
        assert_eq!(pairs[0].output_label(), "walking");
        assert!(out.contains(ChannelId::ALL[best].prompt_name()), "{out}");
        assert!(out.contains("dynamic"), "{out}");
    }

    #[test]
    fn pairs_reject_extra_keys() {
        let line = r#"{"instruction":"a","input":"b","output":"c","extra":1}"#;
        assert!(read_pairs_jsonl(line.as_bytes()).is_err());
        let line = r#"{"instruction":"a","input":"b"}"#;
        assert!(read_pairs_jsonl(line.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn pairs_round_trip(instruction in ".*", input in ".*", output in ".*") {
            let p = InstructionPair { instruction, input, output };
            let mut buf = Vec::new();
            write_pairs_jsonl(std::slice::from_ref(&p), &mut buf).unwrap();
            let text = String::from_utf8(buf).unwrap();
            prop_assert_eq!(text.lines().count(), 1);
            let v: serde_json::Value = serde_json::from_str(text.trim_end()).unwrap();
            let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
            prop_assert_eq!(keys, vec!["input", "instruction", "output"]);
            prop_assert_eq!(read_pairs_jsonl(text.as_bytes()).unwrap(), vec![p]);
        }

        #[test]
        fn distinct_features_give_distinct_prompts(
            a in proptest::collection::vec(-1e4f64..1e4, 63),
            b in proptest::collection::vec(-1e4f64..1e4, 63),
        ) {
            let (fa, fb) = (fv_with(a, "walking"), fv_with(b, "walking"));
            let set = labels(&["walking"]);
            let t = PromptTemplate::classify();
            let (sa, sb) = (serialize_features(&fa, 3), serialize_features(&fb, 3));
            let (pa, pb) = (
                render_prompt(&t, &fa, &set, None, 3).unwrap(),
                render_prompt(&t, &fb, &set, None, 3).unwrap(),
            );
            prop_assert_eq!(sa == sb, pa == pb);
        }

        #[test]
        fn features_shorter_than_raw_for_large_windows(rows in 140usize..300, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = window(rows, 9, |_| rng.gen_range(-20.0..20.0));
            let r = token_budget(&w, &FeatureConfig::default(), DEFAULT_TOKEN_LIMIT, 3).unwrap();
            prop_assert!(r.feature_tokens < r.raw_tokens);
        }
    }
}
