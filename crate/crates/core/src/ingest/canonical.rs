//! The canonical record CSV exchanged between pipeline stages.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use super::{ChannelId, ChannelValues, DatasetId, IngestError, Result, SampleRecord};
use crate::numfmt::format_significant;

pub const CANONICAL_HEADER: [&str; 15] = [
    "timestamp",
    "subject",
    "activity",
    "dataset",
    "device",
    "position",
    "ax",
    "ay",
    "az",
    "gx",
    "gy",
    "gz",
    "mx",
    "my",
    "mz",
];

const SIG_DIGITS: usize = 9;

/// Writes records with LF line endings and 9 significant digits per float.
/// Absent channels and absent device/position are empty cells.
pub fn write_canonical_csv<'a, W: Write>(
    records: impl IntoIterator<Item = &'a SampleRecord>,
    out: W,
) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CANONICAL_HEADER)?;
    let mut row: Vec<String> = Vec::with_capacity(CANONICAL_HEADER.len());
    for r in records {
        row.clear();
        row.push(format_significant(r.timestamp, SIG_DIGITS));
        row.push(r.subject_id.to_string());
        row.push(r.activity.to_string());
        row.push(r.dataset_id.as_str().to_string());
        row.push(r.device.as_deref().unwrap_or("").to_string());
        row.push(r.position.as_deref().unwrap_or("").to_string());
        for ch in ChannelId::ALL {
            row.push(
                r.channels
                    .get(ch)
                    .map(|v| format_significant(v, SIG_DIGITS))
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Default)]
struct Interner(HashMap<String, Arc<str>>);

impl Interner {
    fn get(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.0.get(s) {
            return a.clone();
        }
        let a: Arc<str> = Arc::from(s);
        self.0.insert(s.to_string(), a.clone());
        a
    }
}

/// Parses a canonical CSV produced by [`write_canonical_csv`].
pub fn read_canonical_csv<R: Read>(input: R) -> Result<Vec<SampleRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Canonical(e.to_string()))?
        .clone();
    if headers.iter().ne(CANONICAL_HEADER.iter().copied()) {
        return Err(IngestError::Canonical(format!(
            "unexpected header {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut interner = Interner::default();
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| IngestError::Canonical(e.to_string()))?;
        let bad = |what: &str| IngestError::Canonical(format!("data row {}: {what}", line + 1));
        let timestamp = super::parse_f64(&row[0]).ok_or_else(|| bad("bad timestamp"))?;
        let dataset_id: DatasetId = row[3].parse().map_err(|e: String| bad(&e))?;
        let mut channels = ChannelValues::default();
        for ch in ChannelId::ALL {
            let cell = &row[6 + ch.index()];
            if !cell.is_empty() {
                let v =
                    super::parse_f64(cell).ok_or_else(|| bad(&format!("bad value for {ch}")))?;
                channels.set(ch, v);
            }
        }
        let opt = |s: &str, i: &mut Interner| (!s.is_empty()).then(|| i.get(s));
        out.push(SampleRecord {
            timestamp,
            channels,
            subject_id: interner.get(&row[1]),
            activity: interner.get(&row[2]),
            dataset_id,
            device: opt(&row[4], &mut interner),
            position: opt(&row[5], &mut interner),
        });
    }
    Ok(out)
}
