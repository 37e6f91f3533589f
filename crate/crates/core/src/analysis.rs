//! Exploratory statistics: Pearson correlation, two-component PCA and
//! empirical densities, emitted as plot-ready CSV tables.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{ChannelId, SampleRecord};

pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const EIGEN_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least {need} rows (got {got})")]
    TooFewRows { need: usize, got: usize },
    #[error("need at least 2 columns (got {0})")]
    TooFewColumns(usize),
    #[error("every column is constant")]
    AllConstant,
    #[error("no finite values")]
    NoFiniteValues,
    #[error("rows have inconsistent lengths")]
    Ragged,
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Zero-variance columns; their off-diagonal entries are 0.
    pub undefined: Vec<String>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }
}

/// Column-major view of channels present in every record.
pub fn record_columns(records: &[SampleRecord]) -> (Vec<ChannelId>, Vec<Vec<f64>>) {
    let channels: Vec<ChannelId> = ChannelId::ALL
        .iter()
        .copied()
        .filter(|c| records.iter().all(|r| r.channels.get(*c).is_some()))
        .collect();
    let cols = channels
        .iter()
        .map(|c| {
            records
                .iter()
                .map(|r| r.channels.get(*c).unwrap())
                .collect()
        })
        .collect();
    (channels, cols)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation between named columns of equal length.
pub fn correlation_matrix(names: &[String], columns: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let c = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|col| col.len() != n) || names.len() != c {
        return Err(AnalysisError::Ragged);
    }
    if n < 2 {
        return Err(AnalysisError::TooFewRows { need: 2, got: n });
    }
    let centered: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|col| {
            let m = mean(col);
            col.iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let defined: Vec<bool> = norms.iter().map(|&s| s > 0.0).collect();
    if !defined.iter().any(|&d| d) {
        return Err(AnalysisError::AllConstant);
    }
    let pairs: Vec<(usize, usize)> = (0..c)
        .flat_map(|i| (i + 1..c).map(move |j| (i, j)))
        .collect();
    let rs: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if !(defined[i] && defined[j]) {
                return 0.0;
            }
            let dot: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
        })
        .collect();
    let mut values = vec![vec![0.0; c]; c];
    for i in 0..c {
        values[i][i] = 1.0;
    }
    for (&(i, j), r) in pairs.iter().zip(rs) {
        values[i][j] = r;
        values[j][i] = r;
    }
    Ok(CorrelationMatrix {
        names: names.to_vec(),
        values,
        undefined: (0..c)
            .filter(|&i| !defined[i])
            .map(|i| names[i].clone())
            .collect(),
    })
}

pub fn correlation_of_records(records: &[SampleRecord]) -> Result<CorrelationMatrix> {
    let (channels, cols) = record_columns(records);
    let names: Vec<String> = channels
        .iter()
        .map(|c| c.prompt_name().to_string())
        .collect();
    correlation_matrix(&names, &cols)
}

/// Top `k` eigenpairs of a symmetric positive semi-definite matrix by power
/// iteration with deflation. Eigenvalues are returned in descending order.
pub fn top_eigenpairs(matrix: &[Vec<f64>], k: usize) -> Vec<(f64, Vec<f64>)> {
    let d = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
    let matvec = |m: &[Vec<f64>], v: &[f64]| -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    };
    let orthogonalize = |v: &mut Vec<f64>, basis: &[(f64, Vec<f64>)]| {
        for (_, u) in basis {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
    };
    let normalize = |v: &mut Vec<f64>| -> f64 {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        n
    };
    for _ in 0..k.min(d) {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, &found);
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..EIGEN_MAX_ITERATIONS {
            let mut w = matvec(&a, &v);
            orthogonalize(&mut w, &found);
            let norm = normalize(&mut w);
            if norm <= f64::EPSILON * 1e3 {
                // Remaining spectrum is zero; any orthogonal direction will do.
                lambda = 0.0;
                break;
            }
            let delta = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = w;
            let av = matvec(&a, &v);
            lambda = av.iter().zip(&v).map(|(a, b)| a * b).sum();
            if delta < EIGEN_TOLERANCE {
                break;
            }
        }
        // Largest-magnitude loading positive.
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..d {
            for j in 0..d {
                a[i][j] -= lambda * v[i] * v[j];
            }
        }
        found.push((lambda, v));
    }
    found
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    /// Column std used for standardization; 1 for constant columns.
    pub scale: Vec<f64>,
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
    pub explained_variance_ratio: [f64; 2],
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<String>,
}

impl PcaProjection {
    pub fn project(&self, row: &[f64]) -> [f64; 2] {
        let z: Vec<f64> = row
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        [0, 1].map(|k| z.iter().zip(&self.components[k]).map(|(a, b)| a * b).sum())
    }
}

/// Correlation PCA: columns are standardized before the covariance.
pub fn pca2(
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[String],
) -> Result<PcaProjection> {
    let n = rows.len();
    if n <= 2 {
        return Err(AnalysisError::TooFewRows { need: 3, got: n });
    }
    let d = rows[0].len();
    if d < 2 {
        return Err(AnalysisError::TooFewColumns(d));
    }
    if rows.iter().any(|r| r.len() != d) || labels.len() != n || feature_names.len() != d {
        return Err(AnalysisError::Ragged);
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1) as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - mean[j]) / scale[j]).collect())
        .collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            (0..d)
                .map(|j| z.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
    if trace <= 0.0 {
        return Err(AnalysisError::AllConstant);
    }
    let pairs = top_eigenpairs(&cov, 2);
    let eigenvalues = [pairs[0].0.max(0.0), pairs[1].0.max(0.0)];
    let mut out = PcaProjection {
        feature_names: feature_names.to_vec(),
        mean,
        scale,
        components: [pairs[0].1.clone(), pairs[1].1.clone()],
        eigenvalues,
        explained_variance_ratio: eigenvalues.map(|l| (l / trace).clamp(0.0, 1.0)),
        points: Vec::new(),
        labels: labels.to_vec(),
    };
    out.points = rows.iter().map(|r| out.project(r)).collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub feature_name: String,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub densities: Vec<f64>,
}

/// Equal-width bins over [min, max] of the finite values; the last bin is
/// closed. A constant series is widened by 0.5 on each side.
pub fn histogram(feature_name: &str, series: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(AnalysisError::NoBins);
    }
    let finite: Vec<f64> = series.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(AnalysisError::NoFiniteValues);
    }
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    edges[bins] = hi;
    let mut counts = vec![0u64; bins];
    for v in &finite {
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = finite.len() as f64;
    let densities = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / (n * (edges[i + 1] - edges[i])))
        .collect();
    Ok(Histogram {
        feature_name: feature_name.to_string(),
        bin_edges: edges,
        counts,
        densities,
    })
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_err(e: csv::Error) -> AnalysisError {
    AnalysisError::Io(e.into())
}

/// Labeled C×C grid; the corner cell is empty.
pub fn write_correlation_csv<W: Write>(cm: &CorrelationMatrix, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec![String::new()];
    header.extend(cm.names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (name, row) in cm.names.iter().zip(&cm.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `pc1,pc2,activity`.
pub fn write_pca_csv<W: Write>(p: &PcaProjection, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["pc1", "pc2", "activity"])
        .map_err(csv_err)?;
    for (pt, l) in p.points.iter().zip(&p.labels) {
        w.write_record([pt[0].to_string(), pt[1].to_string(), l.clone()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `feature,bin_start,bin_end,count,density`, one row per bin.
pub fn write_histograms_csv<W: Write>(hs: &[Histogram], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["feature", "bin_start", "bin_end", "count", "density"])
        .map_err(csv_err)?;
    for h in hs {
        for i in 0..h.counts.len() {
            w.write_record([
                h.feature_name.clone(),
                h.bin_edges[i].to_string(),
                h.bin_edges[i + 1].to_string(),
                h.counts[i].to_string(),
                h.densities[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn mass(h: &Histogram) -> f64 {
        h.densities
            .iter()
            .enumerate()
            .map(|(i, d)| d * (h.bin_edges[i + 1] - h.bin_edges[i]))
            .sum()
    }

    #[test]
    fn correlation_basics() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let flat = vec![2.0; 50];
        let cm = correlation_matrix(&names(4), &[x.clone(), x.clone(), neg, flat]).unwrap();
        assert!((cm.values[0][1] - 1.0).abs() < 1e-12);
        assert!((cm.values[0][2] + 1.0).abs() < 1e-12);
        assert_eq!(cm.values[0][3], 0.0);
        assert_eq!(cm.values[3][3], 1.0);
        assert_eq!(cm.undefined, vec!["c3".to_string()]);
        assert!(correlation_matrix(&names(1), &[vec![1.0; 5]]).is_err());
        assert!(correlation_matrix(&names(1), &[vec![1.0]]).is_err());
    }

    #[test]
    fn histogram_examples() {
        let h = histogram("x", &[3.0; 10], 50).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!((mass(&h) - 1.0).abs() < 1e-9);
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let h = histogram("u", &grid, 10).unwrap();
        for d in &h.densities {
            assert!((d - 1.0).abs() < 0.02, "{d}");
        }
        assert!(histogram("n", &[f64::NAN], 5).is_err());
        assert!(histogram("n", &[1.0], 0).is_err());
    }

    #[test]
    fn histogram_gaussian_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..100_000).map(|_| gaussian(&mut rng)).collect();
        let h = histogram("g", &xs, 50).unwrap();
        let centre = (0..50)
            .min_by(|&a, &b| {
                let ca = (h.bin_edges[a] + h.bin_edges[a + 1]).abs();
                let cb = (h.bin_edges[b] + h.bin_edges[b + 1]).abs();
                ca.total_cmp(&cb)
            })
            .unwrap();
        assert!(
            (h.densities[centre] - 0.399).abs() <= 0.02,
            "{}",
            h.densities[centre]
        );
    }

    #[test]
    fn pca_rank_one() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![i as f64, 2.0 * i as f64 + 1.0])
            .collect();
        let labels = vec!["a".to_string(); 30];
        let p = pca2(&names(2), &rows, &labels).unwrap();
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        assert!(p.explained_variance_ratio[1].abs() < 1e-9);
        let dot: f64 = p.components[0]
            .iter()
            .zip(&p.components[1])
            .map(|(a, b)| a * b)
            .sum();
        assert!(dot.abs() < 1e-9);
    }

    #[test]
    fn pca_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![gaussian(&mut rng), gaussian(&mut rng)])
            .collect();
        let labels = vec!["a".to_string(); rows.len()];
        let p = pca2(&names(2), &rows, &labels).unwrap();
        for r in p.explained_variance_ratio {
            assert!((r - 0.5).abs() <= 0.03, "{r}");
        }
        // Direct 2x2 solve on the correlation matrix: eigenvalues 1 ± |r|.
        let n = rows.len() as f64;
        let m: Vec<f64> = (0..2)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let s: Vec<f64> = (0..2)
            .map(|j| (rows.iter().map(|r| (r[j] - m[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
            .collect();
        let r = rows
            .iter()
            .map(|x| (x[0] - m[0]) * (x[1] - m[1]))
            .sum::<f64>()
            / ((n - 1.0) * s[0] * s[1]);
        assert!((p.explained_variance_ratio[0] - (1.0 + r.abs()) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn pca_errors() {
        let labels = vec!["a".to_string(); 3];
        assert!(pca2(&names(2), &[vec![1.0, 2.0], vec![1.0, 2.0]], &labels[..2]).is_err());
        assert!(matches!(
            pca2(&names(2), &vec![vec![1.0, 2.0]; 3], &labels),
            Err(AnalysisError::AllConstant)
        ));
        assert!(pca2(&names(1), &[vec![1.0], vec![2.0], vec![3.0]], &labels).is_err());
    }

    #[test]
    fn pca_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let t = gaussian(&mut rng);
                vec![t, -t + 0.3 * gaussian(&mut rng), 0.5 * gaussian(&mut rng)]
            })
            .collect();
        let p = pca2(&names(3), &rows, &vec!["a".to_string(); 200]).unwrap();
        for c in &p.components {
            let lead = c
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(lead > 0.0);
            assert!((c.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn two_by_two_matches_quadratic(a in 0.1f64..10.0, c in 0.1f64..10.0, t in -1.0f64..1.0) {
            // Off-diagonal bounded so the matrix stays positive semi-definite.
            let b = t * (a * c).sqrt();
            let m = vec![vec![a, b], vec![b, c]];
            let pairs = top_eigenpairs(&m, 2);
            let mean = (a + c) / 2.0;
            let disc = (((a - c) / 2.0).powi(2) + b * b).sqrt();
            let (l1, l2) = (mean + disc, mean - disc);
            // Near-degenerate pairs converge slowly; compare eigenvalues only.
            prop_assert!((pairs[0].0 - l1).abs() <= 1e-9 * l1.max(1.0));
            prop_assert!((pairs[1].0 - l2).abs() <= 1e-9 * l1.max(1.0));
        }

        #[test]
        fn correlation_affine_invariance(seed in 0u64..1000, scale in 0.1f64..50.0, shift in -100.0f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..100).map(|_| gaussian(&mut rng)).collect();
            let y: Vec<f64> = x.iter().map(|v| 0.6 * v + gaussian(&mut rng)).collect();
            let base = correlation_matrix(&names(2), &[x.clone(), y.clone()]).unwrap().values[0][1];
            let ys: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
            let pos = correlation_matrix(&names(2), &[x.clone(), ys]).unwrap();
            prop_assert!((pos.values[0][1] - base).abs() <= 1e-9);
            prop_assert_eq!(pos.values[0][1], pos.values[1][0]);
            let yn: Vec<f64> = y.iter().map(|v| -scale * v + shift).collect();
            let neg = correlation_matrix(&names(2), &[x, yn]).unwrap().values[0][1];
            prop_assert!((neg + base).abs() <= 1e-9);
        }

        #[test]
        fn histogram_mass(xs in proptest::collection::vec(-1e6f64..1e6, 1..400), bins in 1usize..80) {
            let h = histogram("x", &xs, bins).unwrap();
            prop_assert!((mass(&h) - 1.0).abs() <= 1e-9);
            prop_assert_eq!(h.counts.iter().sum::<u64>(), xs.len() as u64);
        }

        #[test]
        fn pca_reprojection_idempotent(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..40)
                .map(|_| (0..4).map(|j| gaussian(&mut rng) * (j + 1) as f64).collect())
                .collect();
            let p = pca2(&names(4), &rows, &vec!["a".to_string(); 40]).unwrap();
            prop_assert!(p.explained_variance_ratio[0] + p.explained_variance_ratio[1] <= 1.0 + 1e-12);
            prop_assert!(p.explained_variance_ratio[0] >= p.explained_variance_ratio[1]);
            for pt in &p.points {
                // Back to standardized space, then project again.
                let z: Vec<f64> = (0..4).map(|j| pt[0] * p.components[0][j] + pt[1] * p.components[1][j]).collect();
                let again: Vec<f64> = (0..2)
                    .map(|k| z.iter().zip(&p.components[k]).map(|(a, b)| a * b).sum())
                    .collect();
                prop_assert!((again[0] - pt[0]).abs() <= 1e-9 * pt[0].abs().max(1.0));
                prop_assert!((again[1] - pt[1]).abs() <= 1e-9 * pt[1].abs().max(1.0));
            }
        }
    }
}
