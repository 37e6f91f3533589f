//! One-vs-rest linear SVM trained with Pegasos-style stochastic subgradient
//! steps. The bias is learned as the weight of a constant feature.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ClassifierError, ClassifierModel, Hyperparameters, LabeledDataset, ModelParams, Normalization,
    Result, MODEL_FORMAT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            epochs: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// One weight vector per class, in vocabulary order.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearSvm {
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains one binary head (`positive` vs rest). Returns the average of the
/// iterates over the final epoch, with the bias as the last entry.
fn train_head(x: &[Vec<f64>], y: &[f64], lambda: f64, epochs: usize, seed: u64) -> Vec<f64> {
    let d = x[0].len();
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let radius = 1.0 / lambda.sqrt();
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = y[i] * (dot(&w[..d], &x[i]) + w[d]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wj, xj) in w[..d].iter_mut().zip(&x[i]) {
                    *wj += eta * y[i] * xj;
                }
                w[d] += eta * y[i];
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
            if epoch + 1 == epochs {
                for (a, v) in avg.iter_mut().zip(&w) {
                    *a += v;
                }
            }
        }
    }
    avg.iter_mut().for_each(|a| *a /= n as f64);
    avg
}

pub fn train_linear_svm(data: &LabeledDataset, params: &SvmParams) -> Result<ClassifierModel> {
    data.check_trainable()?;
    if !(params.lambda > 0.0) || params.epochs == 0 {
        return Err(ClassifierError::Hyperparameter(
            "lambda must be positive and epochs at least 1".into(),
        ));
    }
    let norm = Normalization::fit(&data.features);
    let x: Vec<Vec<f64>> = data.features.iter().map(|r| norm.apply(r)).collect();
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..data.n_classes()).map(|_| master.gen()).collect();
    let heads: Vec<Vec<f64>> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &s)| {
            let y: Vec<f64> = data
                .labels
                .iter()
                .map(|&l| if l == k { 1.0 } else { -1.0 })
                .collect();
            train_head(&x, &y, params.lambda, params.epochs, s)
        })
        .collect();
    let d = data.dim();
    Ok(ClassifierModel {
        format_version: MODEL_FORMAT_VERSION,
        label_vocabulary: data.label_vocabulary.clone(),
        feature_names: data.feature_names.clone(),
        normalization: Some(norm),
        hyperparameters: Hyperparameters::LinearSvm(params.clone()),
        params: ModelParams::LinearSvm(LinearSvm {
            weights: heads.iter().map(|h| h[..d].to_vec()).collect(),
            biases: heads.iter().map(|h| h[d]).collect(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DatasetId;

    fn blobs(seed: u64, per_class: usize, centers: &[[f64; 2]], spread: f64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..per_class {
                features.push(vec![
                    c[0] + rng.gen_range(-spread..spread),
                    c[1] + rng.gen_range(-spread..spread),
                ]);
                labels.push(k);
            }
        }
        let n = features.len();
        LabeledDataset::new(
            features,
            labels,
            vec!["1".into(); n],
            vec![DatasetId::Wisdm; n],
            (0..centers.len()).map(|k| format!("c{k}")).collect(),
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn svm_of(m: &ClassifierModel) -> &LinearSvm {
        match &m.params {
            ModelParams::LinearSvm(s) => s,
            _ => unreachable!(),
        }
    }

    /// lambda/2 |w|^2 + mean hinge, computed from scratch per head.
    fn objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], lambda: f64) -> f64 {
        let reg = lambda / 2.0 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| {
                let s: f64 = xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
                (1.0 - yi * s).max(0.0)
            })
            .sum::<f64>()
            / x.len() as f64;
        reg + hinge
    }

    #[test]
    fn separable_blobs() {
        let d = blobs(1, 100, &[[0.0, 0.0], [5.0, 5.0]], 1.0);
        let m = train_linear_svm(&d, &SvmParams::default()).unwrap();
        let correct = (0..d.len())
            .filter(|&i| m.predict(&d.features[i]).unwrap().label_index == d.labels[i])
            .count();
        assert!(correct as f64 / d.len() as f64 >= 0.99);
    }

    #[test]
    fn objective_not_worse_than_zero() {
        let d = blobs(2, 60, &[[0.0, 0.0], [1.5, 0.5], [0.5, 2.0]], 1.2);
        let p = SvmParams {
            lambda: 1e-2,
            epochs: 20,
            seed: 3,
        };
        let m = train_linear_svm(&d, &p).unwrap();
        let norm = m.normalization.as_ref().unwrap();
        let x: Vec<Vec<f64>> = d.features.iter().map(|r| norm.apply(r)).collect();
        let svm = svm_of(&m);
        for k in 0..3 {
            let y: Vec<f64> = d
                .labels
                .iter()
                .map(|&l| if l == k { 1.0 } else { -1.0 })
                .collect();
            let trained = objective(&svm.weights[k], svm.biases[k], &x, &y, p.lambda);
            let zero = objective(&[0.0, 0.0], 0.0, &x, &y, p.lambda);
            assert!(trained <= zero, "head {k}: {trained} > {zero}");
        }
    }

    #[test]
    fn input_scale_is_absorbed() {
        let d = blobs(4, 50, &[[0.0, 0.0], [2.0, 1.0], [1.0, 3.0]], 1.0);
        let mut scaled = d.clone();
        scaled
            .features
            .iter_mut()
            .for_each(|r| r.iter_mut().for_each(|v| *v *= 10.0));
        let p = SvmParams {
            seed: 9,
            ..Default::default()
        };
        let a = train_linear_svm(&d, &p).unwrap();
        let b = train_linear_svm(&scaled, &p).unwrap();
        for (x, xs) in d.features.iter().zip(&scaled.features) {
            assert_eq!(a.predict(x).unwrap().label, b.predict(xs).unwrap().label);
        }
    }
}
