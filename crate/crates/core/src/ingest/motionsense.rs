//! MotionSense (iPhone 6s, front pocket, 50 Hz).
//!
//! Layout: `A_DeviceMotion_data/<code>_<trial>/sub_<n>.csv` where `<code>` is
//! one of `dws ups wlk jog sit std`. Total acceleration (g) is
//! `gravity + userAcceleration`; `rotationRate` (rad/s) fills the gyroscope.
//! Each file is one recording; timestamps are synthesized at 50 Hz on a
//! per-subject clock with a gap between recordings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{
    io_err, ChannelSet, ChannelValues, DatasetId, IngestError, IngestReport, RawParse, Result,
    SampleRecord, SubjectClock,
};

const RATE_HZ: f64 = 50.0;
const COLUMNS: [&str; 9] = [
    "gravity.x",
    "gravity.y",
    "gravity.z",
    "userAcceleration.x",
    "userAcceleration.y",
    "userAcceleration.z",
    "rotationRate.x",
    "rotationRate.y",
    "rotationRate.z",
];

struct Trial {
    code: String,
    files: Vec<(u32, PathBuf)>,
}

fn list_trials(root: &Path) -> Result<Vec<Trial>> {
    let base = [
        "A_DeviceMotion_data",
        "A_DeviceMotion_data/A_DeviceMotion_data",
        ".",
    ]
    .iter()
    .map(|c| root.join(c))
    .find(|d| d.join("wlk_7").is_dir() || looks_like_trials(d))
    .ok_or_else(|| IngestError::MissingFile {
        root: root.to_path_buf(),
        expected: "A_DeviceMotion_data/<code>_<trial>/sub_<n>.csv".into(),
    })?;
    let mut trials = Vec::new();
    for entry in std::fs::read_dir(&base).map_err(io_err(&base))?.flatten() {
        let dir = entry.path();
        let Some(name) = dir.file_name().and_then(|n| n.to_str()).map(String::from) else {
            continue;
        };
        let Some((code, trial)) = name.split_once('_') else {
            continue;
        };
        if !dir.is_dir() || trial.parse::<u32>().is_err() {
            continue;
        }
        let mut files = Vec::new();
        for f in std::fs::read_dir(&dir).map_err(io_err(&dir))?.flatten() {
            let p = f.path();
            let n = p
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("sub_"))
                .and_then(|n| n.strip_suffix(".csv"))
                .and_then(|n| n.parse::<u32>().ok());
            if let Some(n) = n {
                files.push((n, p));
            }
        }
        files.sort();
        trials.push((trial.parse::<u32>().unwrap_or(0), code.to_string(), files));
    }
    trials.sort_by(|a, b| (&a.1, a.0).cmp(&(&b.1, b.0)));
    Ok(trials
        .into_iter()
        .map(|(_, code, files)| Trial { code, files })
        .collect())
}

fn looks_like_trials(dir: &Path) -> bool {
    std::fs::read_dir(dir)
        .map(|it| {
            it.flatten().any(|e| {
                e.path().is_dir()
                    && e.file_name().to_str().is_some_and(|n| {
                        n.split_once('_')
                            .is_some_and(|(c, t)| c.len() == 3 && t.parse::<u32>().is_ok())
                    })
            })
        })
        .unwrap_or(false)
}

pub(super) fn parse(root: &Path) -> Result<RawParse> {
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut clock = SubjectClock::default();
    let position: Arc<str> = Arc::from("front_pocket");
    for trial in list_trials(root)? {
        let activity: Arc<str> = Arc::from(trial.code.as_str());
        for (sub, path) in trial.files {
            let file = std::fs::File::open(&path).map_err(io_err(&path))?;
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
            let headers = rdr
                .headers()
                .map_err(|e| IngestError::Canonical(format!("{}: {e}", path.display())))?
                .clone();
            let mut idx = [0usize; 9];
            for (slot, col) in idx.iter_mut().zip(COLUMNS) {
                *slot = headers
                    .iter()
                    .position(|h| h.trim() == col)
                    .ok_or_else(|| IngestError::MissingFile {
                        root: root.to_path_buf(),
                        expected: format!("column {col} in {}", path.display()),
                    })?;
            }
            let subject: Arc<str> = Arc::from(sub.to_string().as_str());
            let mut rows: Vec<[f64; 6]> = Vec::new();
            for (line, row) in rdr.records().enumerate() {
                report.rows_read += 1;
                let parsed = row.ok().and_then(|r| {
                    let mut v = [0.0; 9];
                    for (slot, &i) in v.iter_mut().zip(&idx) {
                        *slot = super::parse_f64(r.get(i)?)?;
                    }
                    Some([v[0] + v[3], v[1] + v[4], v[2] + v[5], v[6], v[7], v[8]])
                });
                match parsed {
                    Some(v) => rows.push(v),
                    None => {
                        report.malformed(|| format!("{} data row {}", path.display(), line + 1))
                    }
                }
            }
            let t0 = clock.allocate(&subject, rows.len(), RATE_HZ);
            for (i, v) in rows.iter().enumerate() {
                records.push(SampleRecord {
                    timestamp: t0 + i as f64 / RATE_HZ,
                    channels: ChannelValues::from_slice(ChannelSet::ACCEL_GYRO, v),
                    subject_id: subject.clone(),
                    activity: activity.clone(),
                    dataset_id: DatasetId::Motionsense,
                    device: None,
                    position: Some(position.clone()),
                });
            }
        }
    }
    Ok(RawParse {
        records,
        channel_set: ChannelSet::ACCEL_GYRO,
        sampling_rate_hz: RATE_HZ,
        report,
    })
}
