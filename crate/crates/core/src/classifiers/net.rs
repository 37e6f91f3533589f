//! Fully connected ReLU network with a softmax output, trained on
//! mini-batches with Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ClassifierError, ClassifierModel, Hyperparameters, LabeledDataset, ModelParams, Normalization,
    Result, MODEL_FORMAT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NetParams {
    fn default() -> Self {
        NetParams {
            hidden: vec![128, 64],
            lr: 1e-3,
            epochs: 30,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// `weights[l]` is row-major `sizes[l+1] x sizes[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Same shapes as the corresponding [`Net`] fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }
}

fn flatten(w: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (wl, bl) in w.iter().zip(b) {
        out.extend_from_slice(wl);
        out.extend_from_slice(bl);
    }
    out
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

impl Net {
    /// He-uniform weights, zero biases.
    pub fn init(layer_sizes: &[usize], rng: &mut ChaCha8Rng) -> Net {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let limit = (6.0 / w[0] as f64).sqrt();
            weights.push(
                (0..w[0] * w[1])
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect(),
            );
            biases.push(vec![0.0; w[1]]);
        }
        Net {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn zeros(layer_sizes: &[usize]) -> Net {
        Net {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes
                .windows(2)
                .map(|w| vec![0.0; w[0] * w[1]])
                .collect(),
            biases: layer_sizes.windows(2).map(|w| vec![0.0; w[1]]).collect(),
        }
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Activations of every layer; the last entry holds probabilities.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let input = &acts[l];
            let mut z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + self.biases[l][o]
                })
                .collect();
            if l + 1 < self.n_layers() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            } else {
                softmax_in_place(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).pop().unwrap()
    }

    /// Mean cross-entropy over the batch and its gradient.
    pub fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[usize]) -> (f64, Gradients) {
        let mut g = Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        let n = xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let acts = self.forward(x);
            let probs = acts.last().unwrap();
            loss -= probs[y].max(f64::MIN_POSITIVE).ln();
            let mut delta: Vec<f64> = probs.clone();
            delta[y] -= 1.0;
            for l in (0..self.n_layers()).rev() {
                let n_in = self.layer_sizes[l];
                let input = &acts[l];
                for (o, d) in delta.iter().enumerate() {
                    g.biases[l][o] += d / n;
                    let row = &mut g.weights[l][o * n_in..(o + 1) * n_in];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += d * a / n;
                    }
                }
                if l > 0 {
                    let mut prev = vec![0.0; n_in];
                    for (o, d) in delta.iter().enumerate() {
                        let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += d * w;
                        }
                    }
                    // ReLU derivative, taken as 0 at the kink.
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        (loss / n, g)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for (wl, bl) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            wl.iter_mut()
                .for_each(|v| *v = it.next().expect("flat length"));
            bl.iter_mut()
                .for_each(|v| *v = it.next().expect("flat length"));
        }
        assert!(it.next().is_none(), "flat length");
    }

    /// Plain gradient descent step.
    pub fn sgd_step(&mut self, g: &Gradients, lr: f64) {
        let p: Vec<f64> = self
            .params_flat()
            .iter()
            .zip(g.flat())
            .map(|(p, g)| p - lr * g)
            .collect();
        self.set_params_flat(&p);
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

pub fn train_feedforward(data: &LabeledDataset, params: &NetParams) -> Result<ClassifierModel> {
    data.check_trainable()?;
    if params.hidden.contains(&0)
        || params.batch_size == 0
        || params.epochs == 0
        || !(params.lr > 0.0)
    {
        return Err(ClassifierError::Hyperparameter(
            "hidden sizes, batch size, epochs and lr must be positive".into(),
        ));
    }
    let norm = Normalization::fit(&data.features);
    let x: Vec<Vec<f64>> = data.features.iter().map(|r| norm.apply(r)).collect();
    let mut sizes = vec![data.dim()];
    sizes.extend(&params.hidden);
    sizes.push(data.n_classes());
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut net = Net::init(&sizes, &mut rng);
    let mut flat = net.params_flat();
    let mut adam = Adam {
        m: vec![0.0; flat.len()],
        v: vec![0.0; flat.len()],
        t: 0,
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| &x[i][..]).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let (_, g) = net.loss_and_gradient(&xs, &ys);
            adam.step(&mut flat, &g.flat(), params.lr);
            net.set_params_flat(&flat);
        }
    }
    Ok(ClassifierModel {
        format_version: MODEL_FORMAT_VERSION,
        label_vocabulary: data.label_vocabulary.clone(),
        feature_names: data.feature_names.clone(),
        normalization: Some(norm),
        hyperparameters: Hyperparameters::FeedforwardNet(params.clone()),
        params: ModelParams::FeedforwardNet(net),
    })
}
