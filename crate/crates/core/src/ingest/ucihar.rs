//! UCI HAR (Samsung Galaxy S II on the waist, 50 Hz).
//!
//! Read from the raw inertial signals, not the 561-feature table:
//! `<split>/Inertial Signals/{total_acc,body_gyro}_{x,y,z}_<split>.txt` with
//! `<split>/subject_<split>.txt` and `<split>/y_<split>.txt`, for `train` and
//! `test`. Each row is a 128-sample window overlapping its predecessor by 64
//! samples; consecutive rows of one (subject, activity) are stitched back
//! into a continuous stream by appending the trailing 64 samples of each
//! subsequent row.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{
    io_err, ChannelSet, ChannelValues, DatasetId, IngestError, IngestReport, RawParse, Result,
    SampleRecord, SubjectClock,
};

const RATE_HZ: f64 = 50.0;
const ROW_LEN: usize = 128;
const OVERLAP: usize = 64;
const SIGNALS: [&str; 6] = [
    "total_acc_x",
    "total_acc_y",
    "total_acc_z",
    "body_gyro_x",
    "body_gyro_y",
    "body_gyro_z",
];

fn dataset_dir(root: &Path) -> Result<PathBuf> {
    ["UCI HAR Dataset", "."]
        .iter()
        .map(|c| root.join(c))
        .find(|d| d.join("train").join("subject_train.txt").exists())
        .ok_or_else(|| IngestError::MissingFile {
            root: root.to_path_buf(),
            expected: "UCI HAR Dataset/train/subject_train.txt".into(),
        })
}

fn read_lines(path: &Path, root: &Path, rel: &str) -> Result<Vec<String>> {
    if !path.exists() {
        return Err(IngestError::MissingFile {
            root: root.to_path_buf(),
            expected: rel.to_string(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text.lines().map(String::from).collect())
}

/// `activity_labels.txt` maps numeric ids to names; absent, the ids are kept.
fn activity_names(dir: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(dir.join("activity_labels.txt"))
        .map(|t| {
            t.lines()
                .filter_map(|l| {
                    let mut it = l.split_whitespace();
                    Some((it.next()?.to_string(), it.next()?.to_ascii_lowercase()))
                })
                .collect()
        })
        .unwrap_or_default()
}

pub(super) fn parse(root: &Path) -> Result<RawParse> {
    let dir = dataset_dir(root)?;
    let names = activity_names(&dir);
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut clock = SubjectClock::default();
    let position: Arc<str> = Arc::from("waist");

    for split in ["train", "test"] {
        let split_dir = dir.join(split);
        if split == "test" && !split_dir.exists() {
            continue;
        }
        let subjects = read_lines(
            &split_dir.join(format!("subject_{split}.txt")),
            root,
            &format!("{split}/subject_{split}.txt"),
        )?;
        let labels = read_lines(
            &split_dir.join(format!("y_{split}.txt")),
            root,
            &format!("{split}/y_{split}.txt"),
        )?;
        let mut signals = Vec::with_capacity(SIGNALS.len());
        for s in SIGNALS {
            let rel = format!("{split}/Inertial Signals/{s}_{split}.txt");
            signals.push(read_lines(&dir.join(&rel), root, &rel)?);
        }
        let n_rows = subjects.len();

        // Stitched stream of the current run.
        let mut run: Vec<[f64; 6]> = Vec::new();
        let mut run_key: Option<(String, String)> = None;
        let mut flush = |run: &mut Vec<[f64; 6]>,
                         key: &Option<(String, String)>,
                         records: &mut Vec<SampleRecord>| {
            if let Some((subj, label)) = key {
                if !run.is_empty() {
                    let t0 = clock.allocate(subj, run.len(), RATE_HZ);
                    let subject: Arc<str> = Arc::from(subj.as_str());
                    let activity: Arc<str> = Arc::from(label.as_str());
                    for (i, v) in run.iter().enumerate() {
                        records.push(SampleRecord {
                            timestamp: t0 + i as f64 / RATE_HZ,
                            channels: ChannelValues::from_slice(ChannelSet::ACCEL_GYRO, v),
                            subject_id: subject.clone(),
                            activity: activity.clone(),
                            dataset_id: DatasetId::Ucihar,
                            device: None,
                            position: Some(position.clone()),
                        });
                    }
                }
            }
            run.clear();
        };

        for row in 0..n_rows {
            report.rows_read += 1;
            let subject = subjects[row].trim().to_string();
            let label_id = labels
                .get(row)
                .map(|l| l.trim().to_string())
                .unwrap_or_default();
            let label = names
                .iter()
                .find(|(id, _)| *id == label_id)
                .map(|(_, n)| n.clone())
                .unwrap_or(label_id);
            let parsed: Option<Vec<Vec<f64>>> = signals
                .iter()
                .map(|lines| {
                    let vals: Option<Vec<f64>> = lines
                        .get(row)?
                        .split_whitespace()
                        .map(super::parse_f64)
                        .collect();
                    vals.filter(|v| v.len() == ROW_LEN)
                })
                .collect();
            let Some(parsed) = parsed.filter(|_| !subject.is_empty() && !label.is_empty()) else {
                report.malformed(|| format!("{split} row {}", row + 1));
                flush(&mut run, &run_key, &mut records);
                run_key = None;
                continue;
            };
            let key = Some((subject, label));
            let skip = if key == run_key {
                OVERLAP
            } else {
                flush(&mut run, &run_key, &mut records);
                run_key = key;
                0
            };
            for i in skip..ROW_LEN {
                let mut v = [0.0; 6];
                for (c, sig) in parsed.iter().enumerate() {
                    v[c] = sig[i];
                }
                run.push(v);
            }
        }
        flush(&mut run, &run_key, &mut records);
    }
    Ok(RawParse {
        records,
        channel_set: ChannelSet::ACCEL_GYRO,
        sampling_rate_hz: RATE_HZ,
        report,
    })
}
