//! WISDM activity data.
//!
//! Two releases are understood:
//!
//! * 2019 smartphone/smartwatch release: `raw/<phone|watch>/accel/data_<subject>_accel_<device>.txt`
//!   (optionally under `wisdm-dataset/`), lines `subject,code,timestamp_ns,x,y,z;`.
//! * v1.1 release: `WISDM_ar_v1.1_raw.txt`, lines `user,Activity,timestamp_ns,x,y,z;`.
//!
//! Only the accelerometer stream is ingested; it is sampled at 20 Hz.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{
    io_err, ChannelSet, ChannelValues, DatasetId, IngestError, IngestOptions, IngestReport,
    RawParse, Result, SampleRecord,
};

const RATE_HZ: f64 = 20.0;

fn accel_files(root: &Path, device: &str) -> Result<Vec<PathBuf>> {
    let candidates = [
        root.join("raw").join(device).join("accel"),
        root.join("wisdm-dataset")
            .join("raw")
            .join(device)
            .join("accel"),
        root.join(device).join("accel"),
        root.to_path_buf(),
    ];
    let suffix = format!("_accel_{device}.txt");
    for dir in candidates {
        let Ok(entries) = std::fs::read_dir(&dir) else {
            continue;
        };
        let mut files: Vec<PathBuf> = entries
            .flatten()
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("data_") && n.ends_with(&suffix))
            })
            .collect();
        if !files.is_empty() {
            files.sort();
            return Ok(files);
        }
    }
    for v11 in [
        "WISDM_ar_v1.1_raw.txt",
        "WISDM_ar_v1.1/WISDM_ar_v1.1_raw.txt",
    ] {
        let p = root.join(v11);
        if p.exists() {
            return Ok(vec![p]);
        }
    }
    Err(IngestError::MissingFile {
        root: root.to_path_buf(),
        expected: format!("raw/{device}/accel/data_<subject>{suffix}"),
    })
}

/// Parses one `subject,activity,timestamp,x,y,z;` line. A line may hold
/// several `;`-terminated entries in the v1.1 release.
fn parse_entry(entry: &str) -> Option<(&str, &str, f64, [f64; 3])> {
    let mut it = entry.split(',').map(str::trim);
    let subject = it.next().filter(|s| !s.is_empty())?;
    let label = it.next().filter(|s| !s.is_empty())?;
    let ts = super::parse_f64(it.next()?)?;
    let x = super::parse_f64(it.next()?)?;
    let y = super::parse_f64(it.next()?)?;
    let z = super::parse_f64(it.next()?)?;
    if it.next().is_some_and(|rest| !rest.is_empty()) {
        return None;
    }
    Some((subject, label, ts, [x, y, z]))
}

pub(super) fn parse(root: &Path, opts: &IngestOptions) -> Result<RawParse> {
    let device = opts.device.as_deref().unwrap_or("phone");
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let device_arc: Arc<str> = Arc::from(device);
    for path in accel_files(root, device)? {
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let start = records.len();
        let mut subject: Option<Arc<str>> = None;
        let mut activity: Option<Arc<str>> = None;
        for (line_no, line) in text.lines().enumerate() {
            for entry in line.split(';').map(str::trim).filter(|e| !e.is_empty()) {
                report.rows_read += 1;
                let Some((subj, label, ts, xyz)) = parse_entry(entry) else {
                    report.malformed(|| format!("{}:{}: {entry:?}", path.display(), line_no + 1));
                    continue;
                };
                let subject = match &subject {
                    Some(s) if &**s == subj => s.clone(),
                    _ => subject.insert(Arc::from(subj)).clone(),
                };
                let activity = match &activity {
                    Some(a) if &**a == label => a.clone(),
                    _ => activity.insert(Arc::from(label)).clone(),
                };
                records.push(SampleRecord {
                    timestamp: ts / 1.0e9,
                    channels: ChannelValues::from_slice(ChannelSet::ACCEL, &xyz),
                    subject_id: subject,
                    activity,
                    dataset_id: DatasetId::Wisdm,
                    device: Some(device_arc.clone()),
                    position: None,
                });
            }
        }
        sort_runs_by_time(&mut records[start..]);
    }
    Ok(RawParse {
        records,
        channel_set: ChannelSet::ACCEL,
        sampling_rate_hz: RATE_HZ,
        report,
    })
}

/// Stable-sorts each contiguous (subject, activity) run by timestamp.
pub(super) fn sort_runs_by_time(records: &mut [SampleRecord]) {
    let mut start = 0;
    while start < records.len() {
        let mut end = start + 1;
        while end < records.len()
            && records[end].subject_id == records[start].subject_id
            && records[end].activity == records[start].activity
        {
            end += 1;
        }
        records[start..end].sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        start = end;
    }
}
