use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{io_err, DatasetId, IngestError, Result, SampleRecord};

/// Raw → canonical activity label mapping.
///
/// Canonical labels are lower snake case (`walking_upstairs`). Lookup tries
/// the raw label verbatim first, then its trimmed lower-case form.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMap(BTreeMap<String, String>);

impl LabelMap {
    pub fn new(entries: BTreeMap<String, String>) -> Self {
        LabelMap(entries)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        LabelMap(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }

    /// Loads a JSON object of `"raw": "canonical"` entries.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| IngestError::LabelMap(format!("{}: {e}", path.display())))
    }

    pub fn lookup(&self, raw: &str) -> Option<&str> {
        if let Some(v) = self.0.get(raw) {
            return Some(v);
        }
        self.0
            .get(&raw.trim().to_ascii_lowercase())
            .map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical labels the map can produce, sorted and deduplicated.
    pub fn targets(&self) -> Vec<String> {
        let mut t: Vec<String> = self.0.values().cloned().collect();
        t.sort();
        t.dedup();
        t
    }

    /// Default mapping shipped for each dataset.
    pub fn builtin(dataset: DatasetId) -> Self {
        let pairs: &[(&str, &str)] = match dataset {
            DatasetId::Shoaib => &[
                ("walking", "walking"),
                ("running", "running"),
                ("jogging", "running"),
                ("sitting", "sitting"),
                ("standing", "standing"),
                ("biking", "biking"),
                ("upstairs", "walking_upstairs"),
                ("upsatirs", "walking_upstairs"),
                ("walking upstairs", "walking_upstairs"),
                ("downstairs", "walking_downstairs"),
                ("walking downstairs", "walking_downstairs"),
            ],
            DatasetId::Hhar => &[
                ("walk", "walking"),
                ("sit", "sitting"),
                ("stand", "standing"),
                ("bike", "biking"),
                ("stairsup", "walking_upstairs"),
                ("stairsdown", "walking_downstairs"),
            ],
            DatasetId::Motionsense => &[
                ("wlk", "walking"),
                ("jog", "running"),
                ("sit", "sitting"),
                ("std", "standing"),
                ("ups", "walking_upstairs"),
                ("dws", "walking_downstairs"),
            ],
            DatasetId::Ucihar => &[
                ("1", "walking"),
                ("2", "walking_upstairs"),
                ("3", "walking_downstairs"),
                ("4", "sitting"),
                ("5", "standing"),
                ("6", "lying"),
                ("walking", "walking"),
                ("walking_upstairs", "walking_upstairs"),
                ("walking_downstairs", "walking_downstairs"),
                ("sitting", "sitting"),
                ("standing", "standing"),
                ("laying", "lying"),
            ],
            DatasetId::Wisdm => &[
                // 2019 release activity codes.
                ("a", "walking"),
                ("b", "running"),
                ("c", "stairs"),
                ("d", "sitting"),
                ("e", "standing"),
                ("f", "typing"),
                ("g", "brushing_teeth"),
                ("h", "eating_soup"),
                ("i", "eating_chips"),
                ("j", "eating_pasta"),
                ("k", "drinking"),
                ("l", "eating_sandwich"),
                ("m", "kicking"),
                ("o", "playing_catch"),
                ("p", "dribbling"),
                ("q", "writing"),
                ("r", "clapping"),
                ("s", "folding_clothes"),
                // v1.1 release spelled-out labels.
                ("walking", "walking"),
                ("jogging", "running"),
                ("upstairs", "walking_upstairs"),
                ("downstairs", "walking_downstairs"),
                ("sitting", "sitting"),
                ("standing", "standing"),
            ],
        };
        Self::from_pairs(pairs.iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct Harmonized {
    pub records: Vec<SampleRecord>,
    /// Raw labels dropped for lack of a mapping, with counts.
    pub dropped: BTreeMap<String, usize>,
}

/// Rewrites every record's activity to its canonical label.
///
/// With `strict` set, the first unmapped raw label aborts; otherwise such
/// records are dropped and counted per raw label.
pub fn harmonize_labels(
    records: impl IntoIterator<Item = SampleRecord>,
    map: &LabelMap,
    strict: bool,
) -> Result<Harmonized> {
    let mut interned: BTreeMap<String, Arc<str>> = BTreeMap::new();
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    let mut last: Option<(Arc<str>, Arc<str>)> = None;
    for mut rec in records {
        let canonical = match &last {
            Some((raw, canon)) if Arc::ptr_eq(raw, &rec.activity) || **raw == *rec.activity => {
                Some(canon.clone())
            }
            _ => match map.lookup(&rec.activity) {
                Some(c) => {
                    let c = interned
                        .entry(c.to_string())
                        .or_insert_with(|| Arc::from(c))
                        .clone();
                    last = Some((rec.activity.clone(), c.clone()));
                    Some(c)
                }
                None => None,
            },
        };
        match canonical {
            Some(c) => {
                rec.activity = c;
                out.push(rec);
            }
            None if strict => return Err(IngestError::UnmappedLabel(rec.activity.to_string())),
            None => *dropped.entry(rec.activity.to_string()).or_default() += 1,
        }
    }
    Ok(Harmonized {
        records: out,
        dropped,
    })
}
