use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Swish,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Swish => "swish",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "swish" => Ok(Activation::Swish),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::InvalidArgument(format!("unknown activation '{s}'"))),
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Swish => swish(z),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Swish => swish_derivative(z),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x * sigmoid(x)`.
#[inline]
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn swish_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s + x * s * (1.0 - s)
}

/// Fully connected network. Parameters live in one flat vector, layer by
/// layer: the `n_out x n_in` weight matrix (row-major) followed by the
/// `n_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub params: Vec<f64>,
}

/// Per-sample intermediate values kept for backpropagation.
#[derive(Debug, Default, Clone)]
pub struct Trace {
    /// Pre-activations of each layer.
    z: Vec<Vec<f64>>,
    /// Layer inputs (`a[0]` is the network input).
    a: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn n_params_for(widths: &[usize]) -> usize {
        widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    pub fn zeros(widths: &[usize], hidden: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self {
            widths: widths.to_vec(),
            hidden,
            params: vec![0.0; Self::n_params_for(widths)],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(widths: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(widths, hidden)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for w in widths.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for p in &mut net.params[off..off + n_in * n_out] {
                *p = rng.random_range(-limit..limit);
            }
            off += n_out * (n_in + 1);
        }
        Ok(net)
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.widths.last().expect("nonempty widths")
    }

    /// Offset of layer `l`'s weights in the flat parameter vector.
    fn offset(&self, l: usize) -> usize {
        self.widths[..=l]
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    fn activation(&self, l: usize) -> Activation {
        if l + 1 == self.n_layers() {
            Activation::Identity
        } else {
            self.hidden
        }
    }

    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let off = self.offset(l);
        let (w, rest) = self.params[off..].split_at(n_in * n_out);
        (w, &rest[..n_out])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let off = self.offset(l);
        let (w, rest) = self.params[off..].split_at_mut(n_in * n_out);
        (w, &mut rest[..n_out])
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let n_in = self.widths[l];
            let act = self.activation(l);
            a = b
                .iter()
                .enumerate()
                .map(|(i, bi)| act.apply(bi + dot(&w[i * n_in..(i + 1) * n_in], &a)))
                .collect();
        }
        a
    }

    pub fn forward_traced(&self, x: &[f64], trace: &mut Trace) -> Vec<f64> {
        trace.z.clear();
        trace.a.clear();
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let n_in = self.widths[l];
            let act = self.activation(l);
            let z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(i, bi)| bi + dot(&w[i * n_in..(i + 1) * n_in], &a))
                .collect();
            let next = z.iter().map(|&v| act.apply(v)).collect();
            trace.a.push(std::mem::replace(&mut a, next));
            trace.z.push(z);
        }
        a
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`
    /// for the sample recorded in `trace`.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) {
        let mut delta: Vec<f64> = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let act = self.activation(l);
            for (d, &z) in delta.iter_mut().zip(&trace.z[l]) {
                *d *= act.derivative(z);
            }
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let off = self.offset(l);
            let a_prev = &trace.a[l];
            let (gw, gb) = grad[off..off + n_out * (n_in + 1)].split_at_mut(n_in * n_out);
            for i in 0..n_out {
                let di = delta[i];
                gb[i] += di;
                for (g, a) in gw[i * n_in..(i + 1) * n_in].iter_mut().zip(a_prev) {
                    *g += di * a;
                }
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut prev = vec![0.0; n_in];
                for i in 0..n_out {
                    let di = delta[i];
                    for (p, wij) in prev.iter_mut().zip(&w[i * n_in..(i + 1) * n_in]) {
                        *p += di * wij;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Output and Jacobian `d out / d x` (row-major `n_out x n_in`) by
    /// forward-mode propagation of the input directions.
    pub fn forward_with_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n0 = self.n_inputs();
        let mut a = x.to_vec();
        // tangent[i * n0 + j] = d a_i / d x_j
        let mut tangent: Vec<f64> = (0..n0 * n0)
            .map(|k| if k / n0 == k % n0 { 1.0 } else { 0.0 })
            .collect();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let act = self.activation(l);
            let mut next_a = Vec::with_capacity(n_out);
            let mut next_t = vec![0.0; n_out * n0];
            for i in 0..n_out {
                let row = &w[i * n_in..(i + 1) * n_in];
                let z = b[i] + dot(row, &a);
                let s = act.derivative(z);
                next_a.push(act.apply(z));
                for (k, wik) in row.iter().enumerate() {
                    for j in 0..n0 {
                        next_t[i * n0 + j] += wik * tangent[k * n0 + j];
                    }
                }
                for j in 0..n0 {
                    next_t[i * n0 + j] *= s;
                }
            }
            a = next_a;
            tangent = next_t;
        }
        (a, tangent)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-feature affine standardization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    /// Mean and standard deviation of each column of `rows`; features with
    /// (near) zero spread keep unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.first().map_or(0, |r| r.len());
        let count = rows.len().max(1) as f64;
        let mut mean = vec![0.0; n];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / count;
            }
        }
        let mut var = vec![0.0; n];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / count;
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let sd = v.sqrt();
                if sd > 0.0 && sd > 1e-12 * m.abs() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn denormalize(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}
