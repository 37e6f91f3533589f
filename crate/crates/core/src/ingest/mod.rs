//! Dataset ingestion.
//!
//! Each supported distribution is parsed from its official directory layout
//! into [`SampleRecord`]s carrying canonical activity labels. Per-dataset
//! parsers live in submodules; [`parse_dataset`] dispatches on [`DatasetId`].
//!
//! Units are preserved as shipped: accelerometer in m/s² (Shoaib, HHAR,
//! WISDM) or g (UCI HAR, MotionSense), gyroscope in rad/s, magnetometer in µT.

mod canonical;
mod hhar;
mod labels;
mod motionsense;
mod shoaib;
mod ucihar;
mod wisdm;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use canonical::{read_canonical_csv, write_canonical_csv, CANONICAL_HEADER};
pub use labels::{harmonize_labels, Harmonized, LabelMap};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing dataset file: expected {expected} under {root}")]
    MissingFile { root: PathBuf, expected: String },
    #[error("{malformed} of {total} rows malformed (more than 1%); first problem: {example}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        example: String,
    },
    #[error("unmapped activity label {0:?} (strict label mode)")]
    UnmappedLabel(String),
    #[error("no records parsed from {0}")]
    Empty(PathBuf),
    #[error("canonical CSV: {0}")]
    Canonical(String),
    #[error("label map: {0}")]
    LabelMap(String),
}

pub type Result<T> = std::result::Result<T, IngestError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Hhar,
    Motionsense,
    Shoaib,
    Ucihar,
    Wisdm,
}

impl DatasetId {
    pub const ALL: [DatasetId; 5] = [
        DatasetId::Hhar,
        DatasetId::Motionsense,
        DatasetId::Shoaib,
        DatasetId::Ucihar,
        DatasetId::Wisdm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Hhar => "hhar",
            DatasetId::Motionsense => "motionsense",
            DatasetId::Shoaib => "shoaib",
            DatasetId::Ucihar => "ucihar",
            DatasetId::Wisdm => "wisdm",
        }
    }

    /// Name for report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            DatasetId::Hhar => "HHAR",
            DatasetId::Motionsense => "MotionSense",
            DatasetId::Shoaib => "Shoaib",
            DatasetId::Ucihar => "UCI HAR",
            DatasetId::Wisdm => "WISDM",
        }
    }

    /// Published sampling rate. HHAR mixes devices with different rates and
    /// has none; its rate is estimated per session from timestamps.
    pub fn nominal_rate_hz(self) -> Option<f64> {
        match self {
            DatasetId::Hhar => None,
            DatasetId::Motionsense => Some(50.0),
            DatasetId::Shoaib => Some(50.0),
            DatasetId::Ucihar => Some(50.0),
            DatasetId::Wisdm => Some(20.0),
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "hhar" => Ok(DatasetId::Hhar),
            "motionsense" => Ok(DatasetId::Motionsense),
            "shoaib" => Ok(DatasetId::Shoaib),
            "ucihar" | "uci" => Ok(DatasetId::Ucihar),
            "wisdm" => Ok(DatasetId::Wisdm),
            _ => Err(format!("unknown dataset id {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sensor {
    Accel,
    Gyro,
    Mag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// One of the nine sensor axes. Ordering is accelerometer, gyroscope,
/// magnetometer, each x/y/z; every serializer uses this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelId {
    pub sensor: Sensor,
    pub axis: Axis,
}

impl ChannelId {
    pub const ALL: [ChannelId; 9] = [
        ChannelId::new(Sensor::Accel, Axis::X),
        ChannelId::new(Sensor::Accel, Axis::Y),
        ChannelId::new(Sensor::Accel, Axis::Z),
        ChannelId::new(Sensor::Gyro, Axis::X),
        ChannelId::new(Sensor::Gyro, Axis::Y),
        ChannelId::new(Sensor::Gyro, Axis::Z),
        ChannelId::new(Sensor::Mag, Axis::X),
        ChannelId::new(Sensor::Mag, Axis::Y),
        ChannelId::new(Sensor::Mag, Axis::Z),
    ];

    pub const fn new(sensor: Sensor, axis: Axis) -> Self {
        ChannelId { sensor, axis }
    }

    pub fn index(self) -> usize {
        let s = match self.sensor {
            Sensor::Accel => 0,
            Sensor::Gyro => 1,
            Sensor::Mag => 2,
        };
        let a = match self.axis {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        };
        s * 3 + a
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Column name in canonical CSV files (`ax` .. `mz`).
    pub fn short_name(self) -> &'static str {
        ["ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"][self.index()]
    }

    /// Name used in prompt text (`Ax` .. `Mz`).
    pub fn prompt_name(self) -> &'static str {
        ["Ax", "Ay", "Az", "Gx", "Gy", "Gz", "Mx", "My", "Mz"][self.index()]
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.short_name() == name)
    }

    pub fn from_prompt_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.prompt_name() == name)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl Serialize for ChannelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.short_name())
    }
}

impl<'de> Deserialize<'de> for ChannelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ChannelId::from_short_name(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown channel {s:?}")))
    }
}

/// Set of channels, iterated in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ChannelSet(u16);

impl ChannelSet {
    pub const ACCEL: ChannelSet = ChannelSet(0b000_000_111);
    pub const ACCEL_GYRO: ChannelSet = ChannelSet(0b000_111_111);
    pub const ALL: ChannelSet = ChannelSet(0b111_111_111);

    pub fn empty() -> Self {
        ChannelSet(0)
    }

    pub fn insert(&mut self, ch: ChannelId) {
        self.0 |= 1 << ch.index();
    }

    pub fn contains(self, ch: ChannelId) -> bool {
        self.0 & (1 << ch.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ChannelId> {
        ChannelId::ALL
            .into_iter()
            .filter(move |c| self.contains(*c))
    }

    pub fn to_vec(self) -> Vec<ChannelId> {
        self.iter().collect()
    }
}

impl FromIterator<ChannelId> for ChannelSet {
    fn from_iter<I: IntoIterator<Item = ChannelId>>(iter: I) -> Self {
        let mut set = ChannelSet::empty();
        for c in iter {
            set.insert(c);
        }
        set
    }
}

/// Per-record channel readings, indexed by [`ChannelId::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelValues([Option<f64>; 9]);

impl ChannelValues {
    pub fn get(&self, ch: ChannelId) -> Option<f64> {
        self.0[ch.index()]
    }

    pub fn set(&mut self, ch: ChannelId, v: f64) {
        self.0[ch.index()] = Some(v);
    }

    pub fn present(&self) -> ChannelSet {
        ChannelId::ALL
            .into_iter()
            .filter(|c| self.0[c.index()].is_some())
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Builds values for `set` from consecutive entries of `vals`.
    pub fn from_slice(set: ChannelSet, vals: &[f64]) -> Self {
        let mut out = ChannelValues::default();
        for (ch, v) in set.iter().zip(vals) {
            out.set(ch, *v);
        }
        out
    }
}

/// One timestamped multi-channel reading.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// Seconds; only ordering and spacing matter downstream.
    pub timestamp: f64,
    pub channels: ChannelValues,
    pub subject_id: Arc<str>,
    pub activity: Arc<str>,
    pub dataset_id: DatasetId,
    pub device: Option<Arc<str>>,
    pub position: Option<Arc<str>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub dataset_id: DatasetId,
    pub sampling_rate_hz: f64,
    pub channel_set: Vec<ChannelId>,
    pub label_vocabulary: Vec<String>,
    pub subject_ids: Vec<String>,
}

impl DatasetDescriptor {
    /// Builds a descriptor from what the record stream actually contains.
    pub fn observe(
        dataset_id: DatasetId,
        sampling_rate_hz: f64,
        channel_set: ChannelSet,
        records: &[SampleRecord],
    ) -> Self {
        let labels: BTreeSet<&str> = records.iter().map(|r| &*r.activity).collect();
        let subjects: BTreeSet<&str> = records.iter().map(|r| &*r.subject_id).collect();
        DatasetDescriptor {
            dataset_id,
            sampling_rate_hz,
            channel_set: channel_set.to_vec(),
            label_vocabulary: labels.into_iter().map(String::from).collect(),
            subject_ids: subjects.into_iter().map(String::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Replaces the dataset's built-in raw→canonical label map.
    pub label_map: Option<LabelMap>,
    pub strict_labels: bool,
    /// Shoaib body position block (default `arm`, matched against the header).
    pub position: Option<String>,
    /// Device family filter: `phone` / `watch` for HHAR and WISDM.
    pub device: Option<String>,
}

/// Counters collected while parsing.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub malformed_rows: usize,
    pub first_malformed: Option<String>,
    /// Rows the source marks as unlabeled (HHAR `null`).
    pub unlabeled_rows: usize,
    /// HHAR accelerometer rows without a gyroscope sample close enough in time.
    pub unaligned_rows: usize,
    pub dropped_labels: BTreeMap<String, usize>,
}

impl IngestReport {
    pub(crate) fn malformed(&mut self, what: impl FnOnce() -> String) {
        self.malformed_rows += 1;
        if self.first_malformed.is_none() {
            self.first_malformed = Some(what());
        }
    }

    fn check_malformed(&self) -> Result<()> {
        if self.rows_read > 0 && self.malformed_rows * 100 > self.rows_read {
            return Err(IngestError::TooManyMalformed {
                malformed: self.malformed_rows,
                total: self.rows_read,
                example: self.first_malformed.clone().unwrap_or_default(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub descriptor: DatasetDescriptor,
    pub records: Vec<SampleRecord>,
    pub report: IngestReport,
}

/// Raw parser output before label harmonization.
pub(crate) struct RawParse {
    pub records: Vec<SampleRecord>,
    pub channel_set: ChannelSet,
    pub sampling_rate_hz: f64,
    pub report: IngestReport,
}

/// Parses the distribution rooted at `root` and harmonizes its labels.
pub fn parse_dataset(root: &Path, dataset_id: DatasetId, opts: &IngestOptions) -> Result<Ingested> {
    let raw = match dataset_id {
        DatasetId::Shoaib => shoaib::parse(root, opts)?,
        DatasetId::Wisdm => wisdm::parse(root, opts)?,
        DatasetId::Motionsense => motionsense::parse(root)?,
        DatasetId::Ucihar => ucihar::parse(root)?,
        DatasetId::Hhar => hhar::parse(root, opts)?,
    };
    let RawParse {
        records,
        channel_set,
        sampling_rate_hz,
        mut report,
    } = raw;
    report.check_malformed()?;

    let default_map;
    let map = match &opts.label_map {
        Some(m) => m,
        None => {
            default_map = LabelMap::builtin(dataset_id);
            &default_map
        }
    };
    let Harmonized { records, dropped } = harmonize_labels(records, map, opts.strict_labels)?;
    report.dropped_labels = dropped;
    if records.is_empty() {
        return Err(IngestError::Empty(root.to_path_buf()));
    }
    let descriptor =
        DatasetDescriptor::observe(dataset_id, sampling_rate_hz, channel_set, &records);
    Ok(Ingested {
        descriptor,
        records,
        report,
    })
}

pub(crate) fn parse_f64(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Median of successive positive timestamp differences.
pub(crate) fn median_positive_delta(ts: impl Iterator<Item = f64>) -> Option<f64> {
    let mut prev: Option<f64> = None;
    let mut deltas = Vec::new();
    for t in ts {
        if let Some(p) = prev {
            let d = t - p;
            if d > 0.0 {
                deltas.push(d);
            }
        }
        prev = Some(t);
    }
    median(&mut deltas)
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Hands out per-subject clocks so that consecutive recordings of one subject
/// are separated by a gap large enough to read as a session boundary.
#[derive(Default)]
pub(crate) struct SubjectClock {
    next_start: BTreeMap<String, f64>,
}

impl SubjectClock {
    pub const GAP_SECONDS: f64 = 10.0;

    /// Returns the start time for a recording of `n` samples at `fs` Hz.
    pub fn allocate(&mut self, subject: &str, n: usize, fs: f64) -> f64 {
        let start = self.next_start.get(subject).copied().unwrap_or(0.0);
        let end = start + n as f64 / fs;
        self.next_start
            .insert(subject.to_string(), end + Self::GAP_SECONDS);
        start
    }
}
