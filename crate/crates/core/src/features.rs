//! Per-channel window statistics.
//!
//! Each channel contributes seven values, always in this order: mean, std,
//! range, mean frequency, normalized spectral entropy, low-band power and
//! high-band power. Frequency statistics come from the one-sided power
//! spectrum of the mean-removed series, scaled so that the non-DC bins sum to
//! `W · variance`.

use std::cell::RefCell;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::ingest::{ChannelId, DatasetId};
use crate::windowing::Window;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("non-finite sample in channel {0}")]
    NonFinite(String),
    #[error("series needs at least 2 samples (got {0})")]
    TooShort(usize),
    #[error("sampling rate must be positive (got {0})")]
    BadRate(f64),
    #[error("feature CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Mean,
    Std,
    Range,
    MeanFreq,
    SpectralEntropy,
    BandPowerLow,
    BandPowerHigh,
}

impl Stat {
    pub const ALL: [Stat; 7] = [
        Stat::Mean,
        Stat::Std,
        Stat::Range,
        Stat::MeanFreq,
        Stat::SpectralEntropy,
        Stat::BandPowerLow,
        Stat::BandPowerHigh,
    ];

    pub fn index(self) -> usize {
        Stat::ALL.iter().position(|s| *s == self).unwrap()
    }

    /// Column suffix in feature CSV files.
    pub fn csv_name(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Std => "std",
            Stat::Range => "range",
            Stat::MeanFreq => "mean_freq",
            Stat::SpectralEntropy => "spectral_entropy",
            Stat::BandPowerLow => "band_power_low",
            Stat::BandPowerHigh => "band_power_high",
        }
    }

    /// Short label used in prompt text.
    pub fn prompt_name(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Std => "std",
            Stat::Range => "range",
            Stat::MeanFreq => "mean_freq",
            Stat::SpectralEntropy => "entropy",
            Stat::BandPowerLow => "bp_low",
            Stat::BandPowerHigh => "bp_high",
        }
    }

    pub fn from_csv_name(s: &str) -> Option<Stat> {
        Stat::ALL.into_iter().find(|st| st.csv_name() == s)
    }

    pub fn from_prompt_name(s: &str) -> Option<Stat> {
        Stat::ALL.into_iter().find(|st| st.prompt_name() == s)
    }
}

pub const STATS_PER_CHANNEL: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Boundary between the low and high power bands.
    pub band_split_hz: f64,
    pub taper: Taper,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            band_split_hz: 3.0,
            taper: Taper::Rectangular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures {
    pub mean: f64,
    pub std: f64,
    pub range: f64,
}

/// Compensated (Neumaier) summation.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_series(series: &[f64]) -> Result<()> {
    if series.len() < 2 {
        return Err(FeatureError::TooShort(series.len()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite("<series>".into()));
    }
    Ok(())
}

/// Mean, population standard deviation and range.
pub fn time_features(series: &[f64]) -> Result<TimeFeatures> {
    check_series(series)?;
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return Ok(TimeFeatures {
            mean: lo,
            std: 0.0,
            range: 0.0,
        });
    }
    let n = series.len() as f64;
    let mean = neumaier_sum(series.iter().copied()) / n;
    // Corrected two-pass variance.
    let dev_sum = neumaier_sum(series.iter().map(|v| v - mean));
    let sq_sum = neumaier_sum(series.iter().map(|v| (v - mean) * (v - mean)));
    let var = ((sq_sum - dev_sum * dev_sum / n) / n).max(0.0);
    Ok(TimeFeatures {
        mean,
        std: var.sqrt(),
        range: hi - lo,
    })
}

/// One-sided power spectrum over bins `0..=W/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub power: Vec<f64>,
    pub bin_width_hz: f64,
    /// Window length the spectrum was computed from.
    pub n_samples: usize,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width_hz
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.bin_width_hz * self.n_samples as f64
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Power spectrum of the mean-removed (optionally tapered) series.
///
/// Bin `k` holds `c_k · |X_k|² / W` where `X` is the DFT and `c_k` is 2 for
/// bins with a mirrored partner and 1 for DC and the Nyquist bin, so the
/// non-DC bins sum to `W ·` population variance for the rectangular taper.
pub fn power_spectrum(series: &[f64], fs: f64, taper: Taper) -> Result<Spectrum> {
    check_series(series)?;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(FeatureError::BadRate(fs));
    }
    let w = series.len();
    let half = w / 2;
    let bin_width_hz = fs / w as f64;
    let constant = series.iter().all(|v| *v == series[0]);
    if constant {
        return Ok(Spectrum {
            power: vec![0.0; half + 1],
            bin_width_hz,
            n_samples: w,
        });
    }
    let mean = neumaier_sum(series.iter().copied()) / w as f64;
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .enumerate()
        .map(|(i, v)| Complex::new((v - mean) * taper_weight(taper, i, w), 0.0))
        .collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(w).process(&mut buf));
    let power = (0..=half)
        .map(|k| {
            let mirrored = k != 0 && !(w % 2 == 0 && k == half);
            let scale = if mirrored { 2.0 } else { 1.0 };
            scale * buf[k].norm_sqr() / w as f64
        })
        .collect();
    Ok(Spectrum {
        power,
        bin_width_hz,
        n_samples: w,
    })
}

fn taper_weight(taper: Taper, i: usize, n: usize) -> f64 {
    match taper {
        Taper::Rectangular => 1.0,
        Taper::Hann => 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqFeatures {
    pub mean_freq: f64,
    pub spectral_entropy: f64,
    pub band_power_low: f64,
    pub band_power_high: f64,
}

/// Frequency statistics over the non-DC bins.
///
/// Spectral entropy is normalized by `ln(#bins)`; the low band is
/// `[bin_width, split)` and the high band `[split, fs/2]`. A spectrum with no
/// power yields all zeros.
pub fn freq_features(spectrum: &Spectrum, band_split_hz: f64) -> FreqFeatures {
    let bins = &spectrum.power[1.min(spectrum.power.len())..];
    let total = neumaier_sum(bins.iter().copied());
    if total <= 0.0 {
        return FreqFeatures {
            mean_freq: 0.0,
            spectral_entropy: 0.0,
            band_power_low: 0.0,
            band_power_high: 0.0,
        };
    }
    let freq = |i: usize| spectrum.frequency(i + 1);
    let mean_freq = neumaier_sum(bins.iter().enumerate().map(|(i, p)| freq(i) * p)) / total;
    let entropy = if bins.len() > 1 {
        let h = -neumaier_sum(bins.iter().map(|p| {
            let q = p / total;
            if q > 0.0 {
                q * q.ln()
            } else {
                0.0
            }
        }));
        (h / (bins.len() as f64).ln()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let low = neumaier_sum(
        bins.iter()
            .enumerate()
            .filter(|(i, _)| freq(*i) < band_split_hz)
            .map(|(_, p)| *p),
    );
    let high = neumaier_sum(
        bins.iter()
            .enumerate()
            .filter(|(i, _)| freq(*i) >= band_split_hz)
            .map(|(_, p)| *p),
    );
    FreqFeatures {
        mean_freq,
        spectral_entropy: entropy,
        band_power_low: low,
        band_power_high: high,
    }
}

/// Seven statistics per channel plus the window's provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub channel_order: Vec<ChannelId>,
    /// `STATS_PER_CHANNEL` values per channel, channel-major.
    pub values: Vec<f64>,
    pub activity: Arc<str>,
    pub subject_id: Arc<str>,
    pub dataset_id: DatasetId,
    pub sampling_rate_hz: f64,
}

impl FeatureVector {
    pub fn get(&self, channel: ChannelId, stat: Stat) -> Option<f64> {
        let c = self.channel_order.iter().position(|ch| *ch == channel)?;
        Some(self.values[c * STATS_PER_CHANNEL + stat.index()])
    }

    pub fn channel_stats(&self, c: usize) -> &[f64] {
        &self.values[c * STATS_PER_CHANNEL..(c + 1) * STATS_PER_CHANNEL]
    }

    pub fn feature_names(&self) -> Vec<String> {
        feature_names(&self.channel_order)
    }
}

pub fn feature_names(channels: &[ChannelId]) -> Vec<String> {
    channels
        .iter()
        .flat_map(|c| {
            Stat::ALL
                .iter()
                .map(move |s| format!("{}_{}", c.short_name(), s.csv_name()))
        })
        .collect()
}

/// Splits a `<channel>_<stat>` column name.
pub fn parse_feature_name(name: &str) -> Option<(ChannelId, Stat)> {
    let (ch, stat) = name.split_once('_')?;
    Some((ChannelId::from_short_name(ch)?, Stat::from_csv_name(stat)?))
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.dataset_id, self.subject_id, self.activity
        )
    }
}

/// Statistics for every channel of `window`.
pub fn extract(window: &Window, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(window.channels() * STATS_PER_CHANNEL);
    for (c, ch) in window.channel_order.iter().enumerate() {
        let series = window.column(c);
        let named = |e: FeatureError| match e {
            FeatureError::NonFinite(_) => FeatureError::NonFinite(ch.short_name().to_string()),
            other => other,
        };
        let t = time_features(&series).map_err(named)?;
        let spectrum =
            power_spectrum(&series, window.sampling_rate_hz, cfg.taper).map_err(named)?;
        let fq = freq_features(&spectrum, cfg.band_split_hz);
        values.extend([
            t.mean,
            t.std,
            t.range,
            fq.mean_freq,
            fq.spectral_entropy,
            fq.band_power_low,
            fq.band_power_high,
        ]);
    }
    Ok(FeatureVector {
        channel_order: window.channel_order.clone(),
        values,
        activity: window.activity.clone(),
        subject_id: window.subject_id.clone(),
        dataset_id: window.dataset_id,
        sampling_rate_hz: window.sampling_rate_hz,
    })
}

/// Extracts every window in parallel, preserving input order.
pub fn extract_all(windows: &[Window], cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    use rayon::prelude::*;
    windows.par_iter().map(|w| extract(w, cfg)).collect()
}

/// Feature CSV: `dataset,subject,activity,fs,<channel>_<stat>...`. All rows
/// must share one channel order.
pub fn write_feature_csv<W: Write>(rows: &[FeatureVector], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let channels = rows
        .first()
        .map(|r| r.channel_order.clone())
        .unwrap_or_default();
    let mut header = vec![
        "dataset".to_string(),
        "subject".into(),
        "activity".into(),
        "fs".into(),
    ];
    header.extend(feature_names(&channels));
    w.write_record(&header)
        .map_err(|e| FeatureError::Csv(e.to_string()))?;
    for r in rows {
        if r.channel_order != channels {
            return Err(FeatureError::Csv(format!(
                "row {r} has a different channel set than the first row"
            )));
        }
        let mut rec = vec![
            r.dataset_id.to_string(),
            r.subject_id.to_string(),
            r.activity.to_string(),
            r.sampling_rate_hz.to_string(),
        ];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)
            .map_err(|e| FeatureError::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| FeatureError::Csv(e.to_string()))?
        .clone();
    let fixed = ["dataset", "subject", "activity", "fs"];
    if headers.len() < 4 || headers.iter().take(4).ne(fixed.iter().copied()) {
        return Err(FeatureError::Csv(
            "header must start with dataset,subject,activity,fs".into(),
        ));
    }
    let names: Vec<&str> = headers.iter().skip(4).collect();
    if names.len() % STATS_PER_CHANNEL != 0 {
        return Err(FeatureError::Csv(
            "feature columns are not a whole number of channels".into(),
        ));
    }
    let channels: Vec<ChannelId> = names
        .chunks(STATS_PER_CHANNEL)
        .map(|chunk| {
            let (ch, _) = parse_feature_name(chunk[0])
                .ok_or_else(|| FeatureError::Csv(format!("bad column {}", chunk[0])))?;
            Ok(ch)
        })
        .collect::<Result<_>>()?;
    if feature_names(&channels) != names {
        return Err(FeatureError::Csv(
            "feature columns out of canonical order".into(),
        ));
    }
    let mut interned: std::collections::HashMap<String, Arc<str>> = Default::default();
    let mut intern = |s: &str| -> Arc<str> {
        interned
            .entry(s.to_string())
            .or_insert_with(|| Arc::from(s))
            .clone()
    };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| FeatureError::Csv(e.to_string()))?;
        let bad = |what: &str| FeatureError::Csv(format!("data row {}: {what}", i + 1));
        let dataset_id: DatasetId = rec[0].parse().map_err(|e: String| bad(&e))?;
        let fs: f64 = rec[3].parse().map_err(|_| bad("bad fs"))?;
        let values: Vec<f64> = rec
            .iter()
            .skip(4)
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| bad("bad feature value"))?;
        if values.len() != names.len() {
            return Err(bad("wrong column count"));
        }
        out.push(FeatureVector {
            channel_order: channels.clone(),
            values,
            activity: intern(&rec[2]),
            subject_id: intern(&rec[1]),
            dataset_id,
            sampling_rate_hz: fs,
        });
    }
    Ok(out)
}
