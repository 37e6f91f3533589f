//! Seeded synthetic IMU streams.
//!
//! Used for fixtures and hermetic tests. Each activity has a gravity
//! orientation, a gait frequency and an oscillation amplitude; subjects
//! perturb frequency and amplitude slightly. Accelerometer values are in
//! m/s², gyroscope in rad/s, magnetometer in µT.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{ChannelId, ChannelSet, ChannelValues, DatasetId, LabelMap, SampleRecord};
use crate::numfmt::format_significant;

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityProfile {
    pub label: &'static str,
    /// Unit gravity direction in device coordinates.
    pub gravity: [f64; 3],
    /// Dominant oscillation frequency; 0 for static postures.
    pub freq_hz: f64,
    /// Oscillation amplitude of the accelerometer (m/s²).
    pub amplitude: f64,
    pub noise: f64,
}

impl ActivityProfile {
    pub fn walking() -> Self {
        ActivityProfile {
            label: "walking",
            gravity: [0.0, 1.0, 0.0],
            freq_hz: 1.9,
            amplitude: 3.0,
            noise: 0.3,
        }
    }
    pub fn running() -> Self {
        ActivityProfile {
            label: "running",
            gravity: [0.1, 0.99, 0.0],
            freq_hz: 2.8,
            amplitude: 7.0,
            noise: 0.6,
        }
    }
    pub fn sitting() -> Self {
        ActivityProfile {
            label: "sitting",
            gravity: [0.0, 0.3, 0.95],
            freq_hz: 0.0,
            amplitude: 0.0,
            noise: 0.05,
        }
    }
    pub fn standing() -> Self {
        ActivityProfile {
            label: "standing",
            gravity: [0.0, 1.0, 0.0],
            freq_hz: 0.0,
            amplitude: 0.0,
            noise: 0.04,
        }
    }
    pub fn walking_upstairs() -> Self {
        ActivityProfile {
            label: "walking_upstairs",
            gravity: [0.2, 0.97, 0.1],
            freq_hz: 1.5,
            amplitude: 2.2,
            noise: 0.3,
        }
    }
    pub fn walking_downstairs() -> Self {
        ActivityProfile {
            label: "walking_downstairs",
            gravity: [-0.2, 0.97, -0.1],
            freq_hz: 2.2,
            amplitude: 4.0,
            noise: 0.4,
        }
    }

    pub fn six() -> Vec<Self> {
        vec![
            Self::walking(),
            Self::running(),
            Self::sitting(),
            Self::standing(),
            Self::walking_upstairs(),
            Self::walking_downstairs(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub dataset_id: DatasetId,
    pub subjects: usize,
    pub activities: Vec<ActivityProfile>,
    pub samples_per_session: usize,
    pub fs: f64,
    pub channel_set: ChannelSet,
    /// Relative per-subject spread of frequency and amplitude.
    pub subject_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            dataset_id: DatasetId::Shoaib,
            subjects: 2,
            activities: ActivityProfile::six(),
            samples_per_session: 400,
            fs: 50.0,
            channel_set: ChannelSet::ALL,
            subject_spread: 0.1,
            seed: 7,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 kept away from zero.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generates one session per (subject, activity), subject-major, on a
/// per-subject clock with 10 s between sessions. Values are rounded to
/// 9 significant digits so they survive the canonical CSV unchanged.
pub fn generate_records(spec: &SyntheticSpec) -> Vec<SampleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out =
        Vec::with_capacity(spec.subjects * spec.activities.len() * spec.samples_per_session);
    let q = |v: f64| -> f64 { format_significant(v, 9).parse().unwrap() };
    for s in 0..spec.subjects {
        let subject: Arc<str> = Arc::from((s + 1).to_string().as_str());
        let f_scale = 1.0 + spec.subject_spread * (rng.gen::<f64>() * 2.0 - 1.0);
        let a_scale = 1.0 + spec.subject_spread * (rng.gen::<f64>() * 2.0 - 1.0);
        let mut clock = 0.0;
        for act in &spec.activities {
            let activity: Arc<str> = Arc::from(act.label);
            let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let f = act.freq_hz * f_scale;
            let amp = act.amplitude * a_scale;
            for i in 0..spec.samples_per_session {
                let t = i as f64 / spec.fs;
                let w = std::f64::consts::TAU * f * t + phase;
                let osc = [
                    0.35 * amp * w.sin(),
                    amp * w.sin() + 0.3 * amp * (2.0 * w).sin(),
                    0.5 * amp * w.cos(),
                ];
                let mut vals = [0.0f64; 9];
                for k in 0..3 {
                    vals[k] = 9.81 * act.gravity[k] + osc[k] + act.noise * gaussian(&mut rng);
                    vals[3 + k] = 0.4 * amp / 3.0 * (w + k as f64).cos()
                        + 0.5 * act.noise * gaussian(&mut rng);
                    vals[6 + k] = [22.0, -8.0, 35.0][k] * (1.0 + 0.02 * act.gravity[k])
                        + 0.3 * amp * (0.5 * w).sin()
                        + 0.5 * gaussian(&mut rng);
                }
                let mut channels = ChannelValues::default();
                for ch in spec.channel_set.iter() {
                    channels.set(ch, q(vals[ch.index()]));
                }
                out.push(SampleRecord {
                    timestamp: q(clock + t),
                    channels,
                    subject_id: subject.clone(),
                    activity: activity.clone(),
                    dataset_id: spec.dataset_id,
                    device: None,
                    position: None,
                });
            }
            clock += spec.samples_per_session as f64 / spec.fs + 10.0;
        }
    }
    out
}

/// Spelling the Shoaib distribution uses for a canonical label.
fn shoaib_raw_label(canonical: &str) -> &str {
    match canonical {
        "running" => "jogging",
        "walking_upstairs" => "upstairs",
        "walking_downstairs" => "downstairs",
        other => other,
    }
}

/// Writes `records` in the Shoaib layout (`DataSet/Participant_<n>.csv`),
/// one file per subject, with a `Left_pocket` and an `Upper_arm` block. The
/// pocket block carries the same readings scaled by 0.8.
pub fn write_shoaib_layout(records: &[SampleRecord], root: &Path) -> std::io::Result<()> {
    let dir = root.join("DataSet");
    std::fs::create_dir_all(&dir)?;
    let block_cols = [
        "Time_Stamp",
        "Ax",
        "Ay",
        "Az",
        "Lx",
        "Ly",
        "Lz",
        "Gx",
        "Gy",
        "Gz",
        "Mx",
        "My",
        "Mz",
        "Activity_Label",
    ];
    let mut subjects: Vec<&str> = records.iter().map(|r| &*r.subject_id).collect();
    subjects.dedup();
    subjects.sort();
    subjects.dedup();
    for subject in subjects {
        let mut f = std::io::BufWriter::new(std::fs::File::create(
            dir.join(format!("Participant_{subject}.csv")),
        )?);
        let mut positions = vec![""; 2 * block_cols.len()];
        positions[0] = "Left_pocket";
        positions[block_cols.len()] = "Upper_arm";
        writeln!(f, "{}", positions.join(","))?;
        writeln!(f, "{},{}", block_cols.join(","), block_cols.join(","))?;
        for (i, r) in records
            .iter()
            .filter(|r| &*r.subject_id == subject)
            .enumerate()
        {
            let mut cells: Vec<String> = Vec::with_capacity(2 * block_cols.len());
            for scale in [0.8, 1.0] {
                cells.push(format!("{}", 1_400_000_000_000u64 + 20 * i as u64));
                let get = |ch: ChannelId| r.channels.get(ch).unwrap_or(0.0) * scale;
                let s = |v: f64| format_significant(v, 9);
                for ch in &ChannelId::ALL[..3] {
                    cells.push(s(get(*ch)));
                }
                // Linear acceleration columns are not ingested.
                for ch in &ChannelId::ALL[..3] {
                    cells.push(s(get(*ch) * 0.5));
                }
                for ch in &ChannelId::ALL[3..] {
                    cells.push(s(get(*ch)));
                }
                cells.push(shoaib_raw_label(&r.activity).to_string());
            }
            writeln!(f, "{}", cells.join(","))?;
        }
        f.flush()?;
    }
    Ok(())
}

/// First raw spelling the dataset's built-in map sends to `canonical`, or
/// the canonical label itself.
fn raw_label(dataset: DatasetId, canonical: &str) -> String {
    LabelMap::builtin(dataset)
        .entries()
        .find(|(_, target)| *target == canonical)
        .map_or_else(|| canonical.to_string(), |(raw, _)| raw.to_string())
}

/// Subjects in order of first appearance.
fn subjects_of(records: &[SampleRecord]) -> Vec<Arc<str>> {
    let mut out: Vec<Arc<str>> = Vec::new();
    for r in records {
        if !out.contains(&r.subject_id) {
            out.push(r.subject_id.clone());
        }
    }
    out
}

/// Contiguous (subject, activity) runs.
fn runs(records: &[SampleRecord]) -> Vec<&[SampleRecord]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len()
            || records[i].subject_id != records[start].subject_id
            || records[i].activity != records[start].activity
        {
            out.push(&records[start..i]);
            start = i;
        }
    }
    out
}

fn value(r: &SampleRecord, ch: ChannelId) -> String {
    format_significant(r.channels.get(ch).unwrap_or(0.0), 9)
}

fn nanos(t: f64) -> u64 {
    (t * 1.0e9).round() as u64
}

/// Writes the 2019 WISDM layout (`raw/phone/accel/data_<s>_accel_phone.txt`),
/// accelerometer only, labels as activity codes where one exists.
pub fn write_wisdm_layout(records: &[SampleRecord], root: &Path) -> std::io::Result<()> {
    let dir = root.join("raw").join("phone").join("accel");
    std::fs::create_dir_all(&dir)?;
    for subject in subjects_of(records) {
        let mut f = std::io::BufWriter::new(std::fs::File::create(
            dir.join(format!("data_{subject}_accel_phone.txt")),
        )?);
        for r in records.iter().filter(|r| r.subject_id == subject) {
            writeln!(
                f,
                "{subject},{},{},{},{},{};",
                raw_label(DatasetId::Wisdm, &r.activity),
                nanos(r.timestamp),
                value(r, ChannelId::ALL[0]),
                value(r, ChannelId::ALL[1]),
                value(r, ChannelId::ALL[2]),
            )?;
        }
        f.flush()?;
    }
    Ok(())
}

/// Writes the MotionSense layout, one trial directory per activity run
/// (`A_DeviceMotion_data/<code>_<trial>/sub_<n>.csv`). Subjects must be
/// numeric. Acceleration goes to `userAcceleration` with zero gravity.
pub fn write_motionsense_layout(records: &[SampleRecord], root: &Path) -> std::io::Result<()> {
    let base = root.join("A_DeviceMotion_data");
    let mut trial_of: Vec<(String, String, usize)> = Vec::new();
    for run in runs(records) {
        let code = raw_label(DatasetId::Motionsense, &run[0].activity);
        let subject = run[0].subject_id.to_string();
        let trial = trial_of
            .iter()
            .filter(|(c, s, _)| *c == code && *s == subject)
            .count()
            + 1;
        trial_of.push((code.clone(), subject.clone(), trial));
        let dir = base.join(format!("{code}_{trial}"));
        std::fs::create_dir_all(&dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(
            dir.join(format!("sub_{subject}.csv")),
        )?);
        writeln!(
            f,
            ",attitude.roll,attitude.pitch,attitude.yaw,gravity.x,gravity.y,gravity.z,\
             rotationRate.x,rotationRate.y,rotationRate.z,\
             userAcceleration.x,userAcceleration.y,userAcceleration.z"
        )?;
        for (i, r) in run.iter().enumerate() {
            let v = |k: usize| value(r, ChannelId::ALL[k]);
            writeln!(
                f,
                "{i},0,0,0,0,0,0,{},{},{},{},{},{}",
                v(3),
                v(4),
                v(5),
                v(0),
                v(1),
                v(2)
            )?;
        }
        f.flush()?;
    }
    Ok(())
}

const UCI_ACTIVITIES: [(&str, &str); 6] = [
    ("1", "WALKING"),
    ("2", "WALKING_UPSTAIRS"),
    ("3", "WALKING_DOWNSTAIRS"),
    ("4", "SITTING"),
    ("5", "STANDING"),
    ("6", "LAYING"),
];

/// Writes the UCI HAR raw inertial-signal layout (`train` split only). Each
/// run is cut into 128-sample rows advancing by 64; a trailing partial row
/// is dropped. Activities without a UCI id are skipped.
pub fn write_ucihar_layout(records: &[SampleRecord], root: &Path) -> std::io::Result<()> {
    let dir = root.join("UCI HAR Dataset");
    let signals_dir = dir.join("train").join("Inertial Signals");
    std::fs::create_dir_all(&signals_dir)?;
    let mut labels_txt = String::new();
    for (id, name) in UCI_ACTIVITIES {
        labels_txt.push_str(&format!("{id} {name}\n"));
    }
    std::fs::write(dir.join("activity_labels.txt"), labels_txt)?;
    let ids = LabelMap::builtin(DatasetId::Ucihar);
    let names = [
        "total_acc_x",
        "total_acc_y",
        "total_acc_z",
        "body_gyro_x",
        "body_gyro_y",
        "body_gyro_z",
    ];
    let mut subjects = String::new();
    let mut ys = String::new();
    let mut signals = vec![String::new(); 6];
    for run in runs(records) {
        let Some(id) = UCI_ACTIVITIES
            .iter()
            .map(|(id, _)| *id)
            .find(|id| ids.lookup(id) == Some(&*run[0].activity))
        else {
            continue;
        };
        let mut start = 0;
        while start + 128 <= run.len() {
            subjects.push_str(&format!("{}\n", run[0].subject_id));
            ys.push_str(&format!("{id}\n"));
            for (k, s) in signals.iter_mut().enumerate() {
                let row: Vec<String> = run[start..start + 128]
                    .iter()
                    .map(|r| value(r, ChannelId::ALL[k]))
                    .collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
            start += 64;
        }
    }
    std::fs::write(dir.join("train").join("subject_train.txt"), subjects)?;
    std::fs::write(dir.join("train").join("y_train.txt"), ys)?;
    for (name, s) in names.iter().zip(signals) {
        std::fs::write(signals_dir.join(format!("{name}_train.txt")), s)?;
    }
    Ok(())
}

/// Writes HHAR `Phones_accelerometer.csv` and `Phones_gyroscope.csv` with
/// identical creation times, one `nexus4_1` device.
pub fn write_hhar_layout(records: &[SampleRecord], root: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(root)?;
    for (file, offset) in [("Phones_accelerometer.csv", 0), ("Phones_gyroscope.csv", 3)] {
        let mut f = std::io::BufWriter::new(std::fs::File::create(root.join(file))?);
        writeln!(
            f,
            "Index,Arrival_Time,Creation_Time,x,y,z,User,Model,Device,gt"
        )?;
        for (i, r) in records.iter().enumerate() {
            let t = nanos(r.timestamp);
            let v = |k: usize| value(r, ChannelId::ALL[offset + k]);
            writeln!(
                f,
                "{i},{},{t},{},{},{},{},nexus4,nexus4_1,{}",
                t / 1_000_000,
                v(0),
                v(1),
                v(2),
                r.subject_id,
                raw_label(DatasetId::Hhar, &r.activity),
            )?;
        }
        f.flush()?;
    }
    Ok(())
}

/// Writes `records` in the on-disk layout of `dataset`.
pub fn write_layout(
    dataset: DatasetId,
    records: &[SampleRecord],
    root: &Path,
) -> std::io::Result<()> {
    match dataset {
        DatasetId::Shoaib => write_shoaib_layout(records, root),
        DatasetId::Wisdm => write_wisdm_layout(records, root),
        DatasetId::Motionsense => write_motionsense_layout(records, root),
        DatasetId::Ucihar => write_ucihar_layout(records, root),
        DatasetId::Hhar => write_hhar_layout(records, root),
    }
}
