//! Shoaib et al. body-position dataset.
//!
//! Layout: `Participant_<n>.csv` files, either directly under the root or in
//! a `DataSet/` subdirectory. The first header row names the body position
//! blocks (`Left_pocket`, `Right_pocket`, `Wrist`, `Upper_arm`, `Belt`); the
//! second names the columns inside each block (`Time_Stamp`, `Ax`..`Az`,
//! `Lx`..`Lz`, `Gx`..`Gz`, `Mx`..`Mz`, and an activity column). The shipped
//! timestamps carry no documented unit, so sample times are synthesized as
//! `index / 50 Hz`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{
    io_err, ChannelId, ChannelSet, ChannelValues, DatasetId, IngestError, IngestOptions,
    IngestReport, RawParse, Result, SampleRecord,
};

const RATE_HZ: f64 = 50.0;
const DEFAULT_POSITION: &str = "arm";

fn participant_files(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let dir = ["DataSet", "Dataset", "dataset", "."]
        .iter()
        .map(|c| root.join(c))
        .find(|d| has_participants(d))
        .ok_or_else(|| IngestError::MissingFile {
            root: root.to_path_buf(),
            expected: "DataSet/Participant_1.csv".into(),
        })?;
    let mut files = Vec::new();
    for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
        let path = entry.map_err(io_err(&dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(num) = name
            .strip_prefix("Participant_")
            .and_then(|s| s.strip_suffix(".csv"))
        {
            if let Ok(n) = num.parse::<u32>() {
                files.push((n, path));
            }
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(n, p)| (n.to_string(), p)).collect())
}

fn has_participants(dir: &Path) -> bool {
    std::fs::read_dir(dir)
        .map(|it| {
            it.flatten().any(|e| {
                e.file_name()
                    .to_str()
                    .is_some_and(|n| n.starts_with("Participant_") && n.ends_with(".csv"))
            })
        })
        .unwrap_or(false)
}

struct BlockColumns {
    position: String,
    channels: [usize; 9],
    label: usize,
}

fn locate_block(positions: &[String], names: &[String], wanted: &str) -> Option<BlockColumns> {
    let wanted = wanted.to_ascii_lowercase();
    let starts: Vec<(usize, String)> = positions
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.trim().is_empty())
        .map(|(i, p)| (i, p.trim().to_string()))
        .collect();
    let pick = starts
        .iter()
        .position(|(_, p)| p.to_ascii_lowercase() == wanted)
        .or_else(|| {
            starts
                .iter()
                .position(|(_, p)| p.to_ascii_lowercase().contains(&wanted))
        })?;
    let (start, position) = starts[pick].clone();
    let end = starts.get(pick + 1).map(|s| s.0).unwrap_or(names.len());
    let find = |col: &str, lo: usize, hi: usize| {
        (lo..hi).find(|&i| names[i].trim().eq_ignore_ascii_case(col))
    };
    let mut channels = [0usize; 9];
    for ch in ChannelId::ALL {
        let col = ch.short_name();
        channels[ch.index()] = find(col, start, end)?;
    }
    let is_label = |i: &usize| names[*i].to_ascii_lowercase().contains("activity");
    let label = (start..end)
        .find(is_label)
        .or_else(|| (0..names.len()).rev().find(is_label))
        .unwrap_or(names.len() - 1);
    Some(BlockColumns {
        position: position.to_ascii_lowercase(),
        channels,
        label,
    })
}

pub(super) fn parse(root: &Path, opts: &IngestOptions) -> Result<RawParse> {
    let wanted = opts.position.as_deref().unwrap_or(DEFAULT_POSITION);
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for (subject, path) in participant_files(root)? {
        let file = std::fs::File::open(&path).map_err(io_err(&path))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(file);
        let mut rows = rdr.records();
        let mut header_row = || -> Result<Vec<String>> {
            match rows.next() {
                Some(Ok(r)) => Ok(r.iter().map(String::from).collect()),
                _ => Err(IngestError::MissingFile {
                    root: root.to_path_buf(),
                    expected: format!("two header rows in {}", path.display()),
                }),
            }
        };
        let positions = header_row()?;
        let names = header_row()?;
        let block =
            locate_block(&positions, &names, wanted).ok_or_else(|| IngestError::MissingFile {
                root: root.to_path_buf(),
                expected: format!("position block {wanted:?} in {}", path.display()),
            })?;
        let subject: Arc<str> = Arc::from(subject.as_str());
        let position: Arc<str> = Arc::from(block.position.as_str());
        let mut index = 0usize;
        for (line, row) in rows.enumerate() {
            report.rows_read += 1;
            let row = match row {
                Ok(r) => r,
                Err(e) => {
                    report.malformed(|| format!("{}: {e}", path.display()));
                    continue;
                }
            };
            let mut values = ChannelValues::default();
            let mut ok = true;
            for ch in ChannelId::ALL {
                match row
                    .get(block.channels[ch.index()])
                    .and_then(super::parse_f64)
                {
                    Some(v) => values.set(ch, v),
                    None => ok = false,
                }
            }
            let label = row.get(block.label).map(str::trim).unwrap_or("");
            if !ok || label.is_empty() {
                report.malformed(|| format!("{} data row {}", path.display(), line + 1));
                continue;
            }
            records.push(SampleRecord {
                timestamp: index as f64 / RATE_HZ,
                channels: values,
                subject_id: subject.clone(),
                activity: Arc::from(label),
                dataset_id: DatasetId::Shoaib,
                device: None,
                position: Some(position.clone()),
            });
            index += 1;
        }
    }
    Ok(RawParse {
        records,
        channel_set: ChannelSet::ALL,
        sampling_rate_hz: RATE_HZ,
        report,
    })
}
