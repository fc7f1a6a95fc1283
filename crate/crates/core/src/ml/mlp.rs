//! One-hidden-layer perceptron: tanh hidden units, logistic output, binary
//! cross-entropy loss, mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 16,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    /// `hidden x inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Mlp {
    pub fn new(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let l1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        Mlp {
            inputs,
            hidden,
            w1: (0..inputs * hidden).map(|_| rng.random_range(-l1..=l1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-l2..=l2)).collect(),
            b2: 0.0,
        }
    }

    fn forward(&self, x: &[f64], a: &mut [f64]) -> f64 {
        for (h, ah) in a.iter_mut().enumerate() {
            let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[h];
            *ah = z.tanh();
        }
        a.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut a = vec![0.0; self.hidden];
        sigmoid(self.forward(x, &mut a))
    }

    /// Mean binary cross-entropy.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[bool]) -> f64 {
        let mut a = vec![0.0; self.hidden];
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| {
                let z = self.forward(x, &mut a);
                softplus(z) - if y { z } else { 0.0 }
            })
            .sum();
        total / xs.len() as f64
    }

    /// Parameters as one vector: `w1`, `b1`, `w2`, `b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w1.clone();
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (n1, h) = (self.w1.len(), self.hidden);
        self.w1.copy_from_slice(&p[..n1]);
        self.b1.copy_from_slice(&p[n1..n1 + h]);
        self.w2.copy_from_slice(&p[n1 + h..n1 + 2 * h]);
        self.b2 = p[n1 + 2 * h];
    }

    /// Gradient of [`Mlp::loss`], laid out like [`Mlp::params`].
    pub fn gradient(&self, xs: &[Vec<f64>], ys: &[bool]) -> Vec<f64> {
        let (d, h) = (self.inputs, self.hidden);
        let mut g = vec![0.0; d * h + 2 * h + 1];
        let mut a = vec![0.0; h];
        for (x, &y) in xs.iter().zip(ys) {
            let dz2 = sigmoid(self.forward(x, &mut a)) - f64::from(u8::from(y));
            for k in 0..h {
                g[d * h + h + k] += dz2 * a[k];
                let dz1 = dz2 * self.w2[k] * (1.0 - a[k] * a[k]);
                g[d * h + k] += dz1;
                for (gj, xj) in g[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *gj += dz1 * xj;
                }
            }
            g[d * h + 2 * h] += dz2;
        }
        let n = xs.len() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        g
    }

    pub fn fit(xs: &[Vec<f64>], ys: &[bool], params: MlpParams, seed: u64) -> Self {
        Self::fit_traced(xs, ys, params, seed).0
    }

    /// Like [`Mlp::fit`], also returning the full-data loss after each epoch.
    pub fn fit_traced(xs: &[Vec<f64>], ys: &[bool], params: MlpParams, seed: u64) -> (Self, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = xs.first().map_or(0, Vec::len);
        let mut net = Mlp::new(d, params.hidden, &mut rng);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut losses = Vec::with_capacity(params.epochs);
        let batch = params.batch_size.max(1);
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| xs[i].clone()).collect();
                let by: Vec<bool> = chunk.iter().map(|&i| ys[i]).collect();
                let g = net.gradient(&bx, &by);
                let mut p = net.params();
                for (pi, gi) in p.iter_mut().zip(&g) {
                    *pi -= params.learning_rate * gi;
                }
                net.set_params(&p);
            }
            losses.push(net.loss(xs, ys));
        }
        (net, losses)
    }
}
