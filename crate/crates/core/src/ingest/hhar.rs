//! Heterogeneity HAR (phones and watches, mixed rates).
//!
//! Layout: `Phones_accelerometer.csv`, `Watch_accelerometer.csv` and their
//! `*_gyroscope.csv` counterparts, optionally inside `Activity recognition exp/`.
//! Columns: `Index,Arrival_Time,Creation_Time,x,y,z,User,Model,Device,gt`.
//! `Creation_Time` is in nanoseconds. Rows labeled `null` are transitions and
//! are skipped.
//!
//! Phone and watch streams stay separate (device column). When every
//! selected family ships a gyroscope file, each accelerometer row is joined
//! with the gyroscope row of the same device nearest in time, provided it lies
//! within two median gyroscope periods; otherwise the row is dropped and
//! counted as unaligned. No resampling happens.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{
    io_err, median, median_positive_delta, ChannelSet, ChannelValues, DatasetId, IngestError,
    IngestOptions, IngestReport, RawParse, Result, SampleRecord,
};

struct Row {
    t: f64,
    xyz: [f64; 3],
    label: Arc<str>,
}

type Key = (String, String); // (user, device)

fn base_dir(root: &Path) -> PathBuf {
    let nested = root.join("Activity recognition exp");
    if nested.is_dir() {
        nested
    } else {
        root.to_path_buf()
    }
}

fn read_family(
    path: &Path,
    report: &mut IngestReport,
    labeled: bool,
) -> Result<BTreeMap<Key, Vec<Row>>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Canonical(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingFile {
                root: path.to_path_buf(),
                expected: format!("column {name}"),
            })
    };
    let (ct, x, y, z, user, device, gt) = (
        col("Creation_Time")?,
        col("x")?,
        col("y")?,
        col("z")?,
        col("User")?,
        col("Device")?,
        col("gt")?,
    );
    let mut labels: BTreeMap<String, Arc<str>> = BTreeMap::new();
    let mut out: BTreeMap<Key, Vec<Row>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        if labeled {
            report.rows_read += 1;
        }
        let Ok(rec) = rec else {
            if labeled {
                report.malformed(|| format!("{} data row {}", path.display(), line + 1));
            }
            continue;
        };
        let parsed = (|| {
            Some((
                super::parse_f64(rec.get(ct)?)?,
                [
                    super::parse_f64(rec.get(x)?)?,
                    super::parse_f64(rec.get(y)?)?,
                    super::parse_f64(rec.get(z)?)?,
                ],
                rec.get(user)?.trim(),
                rec.get(device)?.trim(),
                rec.get(gt)?.trim(),
            ))
        })();
        let Some((t, xyz, u, d, g)) = parsed.filter(|p| !p.2.is_empty() && !p.3.is_empty()) else {
            if labeled {
                report.malformed(|| format!("{} data row {}", path.display(), line + 1));
            }
            continue;
        };
        if labeled && (g.is_empty() || g.eq_ignore_ascii_case("null")) {
            report.unlabeled_rows += 1;
            continue;
        }
        let label = labels
            .entry(g.to_string())
            .or_insert_with(|| Arc::from(g))
            .clone();
        out.entry((u.to_string(), d.to_string()))
            .or_default()
            .push(Row {
                t: t / 1.0e9,
                xyz,
                label,
            });
    }
    for rows in out.values_mut() {
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    Ok(out)
}

/// Index of the row in `gyro` nearest to `t`, advancing `cursor` monotonically.
fn nearest(gyro: &[Row], cursor: &mut usize, t: f64) -> Option<usize> {
    if gyro.is_empty() {
        return None;
    }
    while *cursor + 1 < gyro.len() && gyro[*cursor + 1].t <= t {
        *cursor += 1;
    }
    let mut best = *cursor;
    if *cursor + 1 < gyro.len() && (gyro[*cursor + 1].t - t).abs() < (gyro[best].t - t).abs() {
        best = *cursor + 1;
    }
    Some(best)
}

pub(super) fn parse(root: &Path, opts: &IngestOptions) -> Result<RawParse> {
    let base = base_dir(root);
    let families: Vec<&str> = match opts.device.as_deref() {
        Some(d) if d.eq_ignore_ascii_case("phone") => vec!["Phones"],
        Some(d) if d.eq_ignore_ascii_case("watch") => vec!["Watch"],
        _ => vec!["Phones", "Watch"],
    };
    let present: Vec<&str> = families
        .iter()
        .copied()
        .filter(|f| base.join(format!("{f}_accelerometer.csv")).exists())
        .collect();
    if present.is_empty() {
        return Err(IngestError::MissingFile {
            root: root.to_path_buf(),
            expected: format!("{}_accelerometer.csv", families[0]),
        });
    }
    let with_gyro = present
        .iter()
        .all(|f| base.join(format!("{f}_gyroscope.csv")).exists());
    let channel_set = if with_gyro {
        ChannelSet::ACCEL_GYRO
    } else {
        ChannelSet::ACCEL
    };

    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut session_rates = Vec::new();
    for family in present {
        let position: Arc<str> = Arc::from(if family == "Watch" { "arm" } else { "waist" });
        let accel = read_family(
            &base.join(format!("{family}_accelerometer.csv")),
            &mut report,
            true,
        )?;
        let gyro = if with_gyro {
            read_family(
                &base.join(format!("{family}_gyroscope.csv")),
                &mut report,
                false,
            )?
        } else {
            BTreeMap::new()
        };
        for ((user, device), rows) in accel {
            if let Some(dt) = median_positive_delta(rows.iter().map(|r| r.t)) {
                session_rates.push(1.0 / dt);
            }
            let subject: Arc<str> = Arc::from(user.as_str());
            let device_arc: Arc<str> = Arc::from(device.as_str());
            let g_rows = gyro.get(&(user.clone(), device.clone()));
            let tolerance = g_rows
                .and_then(|g| median_positive_delta(g.iter().map(|r| r.t)))
                .map(|dt| 2.0 * dt);
            let mut cursor = 0usize;
            for row in rows {
                let mut values = [0.0; 6];
                values[..3].copy_from_slice(&row.xyz);
                if with_gyro {
                    let hit = g_rows.zip(tolerance).and_then(|(g, tol)| {
                        nearest(g, &mut cursor, row.t).filter(|&i| (g[i].t - row.t).abs() <= tol)
                    });
                    match hit {
                        Some(i) => values[3..].copy_from_slice(&g_rows.unwrap()[i].xyz),
                        None => {
                            report.unaligned_rows += 1;
                            continue;
                        }
                    }
                }
                records.push(SampleRecord {
                    timestamp: row.t,
                    channels: ChannelValues::from_slice(channel_set, &values),
                    subject_id: subject.clone(),
                    activity: row.label,
                    dataset_id: DatasetId::Hhar,
                    device: Some(device_arc.clone()),
                    position: Some(position.clone()),
                });
            }
        }
    }
    let sampling_rate_hz = median(&mut session_rates).unwrap_or(1.0);
    Ok(RawParse {
        records,
        channel_set,
        sampling_rate_hz,
        report,
    })
}
