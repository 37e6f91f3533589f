//! Fixed-length, overlapping windows over per-session record streams.
//!
//! A session is a maximal run of records sharing subject, activity, device,
//! position, dataset and channel set, further cut wherever the timestamp goes
//! backwards or jumps by more than `gap_factor` times the run's median step.
//! Windows never straddle a session boundary and trailing samples that do not
//! fill a window are discarded.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{median, ChannelId, ChannelSet, DatasetId, SampleRecord};

#[derive(Debug, thiserror::Error)]
pub enum WindowError {
    #[error("window length must be at least 2 (got {0})")]
    WindowTooShort(usize),
    #[error("step must be in 1..=window_len (got step {step}, window {window_len})")]
    BadStep { step: usize, window_len: usize },
    #[error("gap factor must be positive and finite")]
    BadGapFactor,
    #[error("windows file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConfig {
    pub window_len: usize,
    pub step: usize,
    pub gap_factor: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            window_len: 200,
            step: 20,
            gap_factor: 5.0,
        }
    }
}

impl SegmentConfig {
    pub fn new(window_len: usize, step: usize) -> Self {
        SegmentConfig {
            window_len,
            step,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.window_len < 2 {
            return Err(WindowError::WindowTooShort(self.window_len));
        }
        if self.step == 0 || self.step > self.window_len {
            return Err(WindowError::BadStep {
                step: self.step,
                window_len: self.window_len,
            });
        }
        if !(self.gap_factor.is_finite() && self.gap_factor > 0.0) {
            return Err(WindowError::BadGapFactor);
        }
        Ok(())
    }

    /// Number of windows a session of `len` samples yields.
    pub fn windows_in(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.step + 1
        }
    }
}

/// A `W × C` matrix of samples with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Row-major, `window_len × channel_order.len()`.
    pub samples: Vec<f64>,
    pub channel_order: Vec<ChannelId>,
    pub activity: Arc<str>,
    pub subject_id: Arc<str>,
    pub dataset_id: DatasetId,
    pub sampling_rate_hz: f64,
    /// Offset of the first row within its session.
    pub origin_index: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        if self.channel_order.is_empty() {
            0
        } else {
            self.samples.len() / self.channel_order.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channel_order.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.channels();
        &self.samples[r * c..(r + 1) * c]
    }

    /// Copies one channel column out of the row-major matrix.
    pub fn column(&self, c: usize) -> Vec<f64> {
        let stride = self.channels();
        self.samples
            .iter()
            .skip(c)
            .step_by(stride)
            .copied()
            .collect()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sampling_rate_hz
    }
}

#[derive(Debug, Clone, Default)]
pub struct Segmented {
    pub windows: Vec<Window>,
    pub sessions: usize,
    /// Sessions shorter than one window, skipped.
    pub short_sessions: usize,
}

fn same_session_key(a: &SampleRecord, b: &SampleRecord) -> bool {
    a.dataset_id == b.dataset_id
        && a.subject_id == b.subject_id
        && a.activity == b.activity
        && a.device == b.device
        && a.position == b.position
        && a.channels.present() == b.channels.present()
}

/// Splits an ordered record stream into session slices.
pub fn sessions<'a>(records: &'a [SampleRecord], gap_factor: f64) -> Vec<&'a [SampleRecord]> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let mut end = start + 1;
        while end < records.len() && same_session_key(&records[start], &records[end]) {
            end += 1;
        }
        split_on_gaps(&records[start..end], gap_factor, &mut out);
        start = end;
    }
    out
}

fn split_on_gaps<'a>(run: &'a [SampleRecord], gap_factor: f64, out: &mut Vec<&'a [SampleRecord]>) {
    let mut deltas: Vec<f64> = run
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .filter(|d| *d > 0.0)
        .collect();
    let limit = median(&mut deltas).map(|m| m * gap_factor);
    let mut start = 0;
    for i in 1..run.len() {
        let d = run[i].timestamp - run[i - 1].timestamp;
        let gap = d < 0.0 || limit.is_some_and(|l| d > l);
        if gap {
            out.push(&run[start..i]);
            start = i;
        }
    }
    if start < run.len() {
        out.push(&run[start..]);
    }
}

fn session_rate(session: &[SampleRecord]) -> Option<f64> {
    if let Some(r) = session[0].dataset_id.nominal_rate_hz() {
        return Some(r);
    }
    let mut deltas: Vec<f64> = session
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .filter(|d| *d > 0.0)
        .collect();
    median(&mut deltas).map(|dt| 1.0 / dt)
}

fn windows_of(session: &[SampleRecord], cfg: &SegmentConfig) -> Vec<Window> {
    let n = cfg.windows_in(session.len());
    if n == 0 {
        return Vec::new();
    }
    let Some(fs) = session_rate(session) else {
        return Vec::new();
    };
    let channel_order: Vec<ChannelId> = session[0].channels.present().to_vec();
    let c = channel_order.len();
    (0..n)
        .map(|i| {
            let origin = i * cfg.step;
            let mut samples = Vec::with_capacity(cfg.window_len * c);
            for rec in &session[origin..origin + cfg.window_len] {
                samples.extend(
                    channel_order
                        .iter()
                        .map(|ch| rec.channels.get(*ch).unwrap_or(0.0)),
                );
            }
            Window {
                samples,
                channel_order: channel_order.clone(),
                activity: session[0].activity.clone(),
                subject_id: session[0].subject_id.clone(),
                dataset_id: session[0].dataset_id,
                sampling_rate_hz: fs,
                origin_index: origin,
            }
        })
        .collect()
}

/// Cuts `records` into windows, sessions in stream order, offsets ascending.
pub fn segment(records: &[SampleRecord], cfg: &SegmentConfig) -> Result<Segmented, WindowError> {
    cfg.validate()?;
    let sessions = sessions(records, cfg.gap_factor);
    let short = sessions.iter().filter(|s| s.len() < cfg.window_len).count();
    let per_session: Vec<Vec<Window>> = sessions.par_iter().map(|s| windows_of(s, cfg)).collect();
    Ok(Segmented {
        windows: per_session.into_iter().flatten().collect(),
        sessions: sessions.len(),
        short_sessions: short,
    })
}

#[derive(Serialize, Deserialize)]
struct WindowMeta {
    activity: String,
    subject: String,
    dataset: DatasetId,
    fs: f64,
    origin_index: usize,
    channels: Vec<ChannelId>,
}

#[derive(Serialize, Deserialize)]
struct WindowLine {
    meta: WindowMeta,
    rows: Vec<Vec<f64>>,
}

/// Writes one `{"meta":{...},"rows":[[...],...]}` object per line.
pub fn write_windows_jsonl<'a, W: Write>(
    windows: impl IntoIterator<Item = &'a Window>,
    mut out: W,
) -> Result<(), WindowError> {
    for w in windows {
        let line = WindowLine {
            meta: WindowMeta {
                activity: w.activity.to_string(),
                subject: w.subject_id.to_string(),
                dataset: w.dataset_id,
                fs: w.sampling_rate_hz,
                origin_index: w.origin_index,
                channels: w.channel_order.clone(),
            },
            rows: (0..w.len()).map(|r| w.row(r).to_vec()).collect(),
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_windows_jsonl<R: BufRead>(input: R) -> Result<Vec<Window>, WindowError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| WindowError::Format { line: i + 1, msg };
        let parsed: WindowLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let c = parsed.meta.channels.len();
        if c == 0 || parsed.rows.iter().any(|r| r.len() != c) {
            return Err(bad("row width does not match channel list".into()));
        }
        if parsed.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(bad("non-finite sample".into()));
        }
        if !in_canonical_order(&parsed.meta.channels) {
            return Err(bad(
                "channels must be distinct and in canonical order".into()
            ));
        }
        out.push(Window {
            samples: parsed.rows.into_iter().flatten().collect(),
            channel_order: parsed.meta.channels,
            activity: Arc::from(parsed.meta.activity.as_str()),
            subject_id: Arc::from(parsed.meta.subject.as_str()),
            dataset_id: parsed.meta.dataset,
            sampling_rate_hz: parsed.meta.fs,
            origin_index: parsed.meta.origin_index,
        });
    }
    Ok(out)
}

fn in_canonical_order(channels: &[ChannelId]) -> bool {
    let set: ChannelSet = channels.iter().copied().collect();
    set.to_vec() == channels
}
