use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    /// Column-wise normalized exponential.
    Softmax,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dense {
    /// `out x in`
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Fully connected network with rectifiers between layers. Batches are
/// matrices with one sample per column.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: Activation,
}

pub struct MlpCache {
    inputs: Vec<DMatrix<f64>>,
    outputs: Vec<DMatrix<f64>>,
}

pub fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let max = col.max();
        col.apply(|v| *v = (*v - max).exp());
        let s = col.sum();
        col /= s;
    }
    out
}

impl Mlp {
    /// He-normal weights, zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output sizes");
        let layers = dims
            .windows(2)
            .map(|p| {
                let std = (2.0 / p[0] as f64).sqrt();
                Dense {
                    w: DMatrix::from_fn(p[1], p[0], |_, _| std * rng.sample::<f64, _>(StandardNormal)),
                    b: DVector::zeros(p[1]),
                }
            })
            .collect();
        Self { layers, output }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense { w: DMatrix::zeros(l.w.nrows(), l.w.ncols()), b: DVector::zeros(l.b.len()) })
                .collect(),
            output: self.output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.layers.windows(2) {
            if pair[0].w.nrows() != pair[1].w.ncols() {
                return Err(Error::DimensionMismatch { expected: pair[0].w.nrows(), actual: pair[1].w.ncols() });
            }
        }
        for l in &self.layers {
            if l.b.len() != l.w.nrows() {
                return Err(Error::DimensionMismatch { expected: l.w.nrows(), actual: l.b.len() });
            }
            if l.w.iter().chain(l.b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite network parameter".into()));
            }
        }
        Ok(())
    }

    /// Parameter tensors in a fixed order: each layer's weights, then bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()]).collect()
    }

    pub fn add_assign(&mut self, other: &Mlp) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w += &b.w;
            a.b += &b.b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.w *= s;
            l.b *= s;
        }
    }

    fn affine(layer: &Dense, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = &layer.w * x;
        for mut col in y.column_iter_mut() {
            col += &layer.b;
        }
        y
    }

    fn activate(&self, z: &DMatrix<f64>, last: bool) -> DMatrix<f64> {
        match (last, self.output) {
            (false, _) | (true, Activation::Relu) => relu(z),
            (true, Activation::Linear) => z.clone(),
            (true, Activation::Sigmoid) => z.map(sigmoid),
            (true, Activation::Softmax) => softmax_columns(z),
        }
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.layers.len();
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = self.activate(&Self::affine(layer, &h), i + 1 == n);
        }
        h
    }

    pub fn forward_cached(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, MlpCache) {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut outputs = Vec::with_capacity(n);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let a = self.activate(&Self::affine(layer, &h), i + 1 == n);
            inputs.push(h);
            outputs.push(a.clone());
            h = a;
        }
        (h, MlpCache { inputs, outputs })
    }

    /// Accumulates parameter gradients into `grads` and returns the
    /// gradient with respect to the input batch.
    pub fn backward(&self, cache: &MlpCache, dout: &DMatrix<f64>, grads: &mut Mlp) -> DMatrix<f64> {
        let n = self.layers.len();
        let mut delta = dout.clone();
        for i in (0..n).rev() {
            let out = &cache.outputs[i];
            // gradient with respect to the pre-activation
            let dz = match (i + 1 == n, self.output) {
                (false, _) | (true, Activation::Relu) => delta.zip_map(out, |d, o| if o > 0.0 { d } else { 0.0 }),
                (true, Activation::Linear) => delta,
                (true, Activation::Sigmoid) => delta.zip_map(out, |d, o| d * o * (1.0 - o)),
                (true, Activation::Softmax) => {
                    let mut dz = delta.clone();
                    for (j, mut col) in dz.column_iter_mut().enumerate() {
                        let dot = out.column(j).dot(&delta.column(j));
                        for k in 0..col.len() {
                            col[k] = out[(k, j)] * (delta[(k, j)] - dot);
                        }
                    }
                    dz
                }
            };
            grads.layers[i].w += &dz * cache.inputs[i].transpose();
            grads.layers[i].b += dz.column_sum();
            delta = self.layers[i].w.transpose() * dz;
        }
        delta
    }
}
