//! Fully connected networks with layer normalization, written out with
//! explicit backpropagation, plus an Adam optimizer.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Layer-norm variance floor. Small enough that scaling an input by a
/// positive constant leaves the output unchanged to ~1e-9.
pub const LN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `in × out`, applied as `x · w + b`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array1<f64>,
    pub bias: Array1<f64>,
}

/// `Linear → LayerNorm → ELU` for every hidden layer, then a final
/// linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub linears: Vec<Linear>,
    pub norms: Vec<LayerNorm>,
}

/// Activations kept from the forward pass.
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    xhat: Vec<Array2<f64>>,
    inv_std: Vec<Array1<f64>>,
    normed: Vec<Array2<f64>>,
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gain: Array1::ones(width),
            bias: Array1::zeros(width),
        }
    }

    /// Returns `(output, xhat, 1/σ per row)`.
    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let width = x.ncols() as f64;
        let mut xhat = x.clone();
        let mut inv = Array1::zeros(x.nrows());
        for (mut row, inv_r) in xhat.outer_iter_mut().zip(inv.iter_mut()) {
            let mean = row.sum() / width;
            row -= mean;
            let var = row.iter().map(|v| v * v).sum::<f64>() / width;
            *inv_r = 1.0 / (var + LN_EPS).sqrt();
            row *= *inv_r;
        }
        let out = &xhat * &self.gain + &self.bias;
        (out, xhat, inv)
    }

    fn backward(
        &self,
        xhat: &Array2<f64>,
        inv: &Array1<f64>,
        d_out: &Array2<f64>,
        grad: &mut LayerNorm,
    ) -> Array2<f64> {
        grad.gain += &(d_out * xhat).sum_axis(Axis(0));
        grad.bias += &d_out.sum_axis(Axis(0));
        let width = xhat.ncols() as f64;
        let mut d_in = d_out * &self.gain;
        for ((mut d, xh), &s) in d_in.outer_iter_mut().zip(xhat.outer_iter()).zip(inv) {
            let mean_d = d.sum() / width;
            let mean_dx = d.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / width;
            d.zip_mut_with(&xh, |dv, &x| *dv = s * (*dv - mean_d - x * mean_dx));
        }
        d_in
    }
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`; weights drawn from
    /// `N(0, 1/fan_in)`, biases zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut linears = Vec::new();
        let mut norms = Vec::new();
        for (i, w) in sizes.windows(2).enumerate() {
            let normal = Normal::new(0.0, (1.0 / w[0] as f64).sqrt()).unwrap();
            let weight = Array2::from_shape_simple_fn((w[0], w[1]), || normal.sample(rng));
            linears.push(Linear {
                weight,
                bias: Array1::zeros(w[1]),
            });
            if i + 2 < sizes.len() {
                norms.push(LayerNorm::new(w[1]));
            }
        }
        Self { linears, norms }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            linears: self
                .linears
                .iter()
                .map(|l| Linear {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| LayerNorm {
                    gain: Array1::zeros(n.gain.len()),
                    bias: Array1::zeros(n.bias.len()),
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.linears[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.linears.last().unwrap().weight.ncols()
    }

    /// Layer sizes `[input, hidden.., output]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.linears.iter().map(|l| l.weight.ncols()))
            .collect()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> (Array2<f64>, MlpCache) {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.linears.len()),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            normed: Vec::new(),
        };
        let mut h = x.to_owned();
        for (i, lin) in self.linears.iter().enumerate() {
            let pre = h.dot(&lin.weight) + &lin.bias;
            cache.inputs.push(h);
            if let Some(norm) = self.norms.get(i) {
                let (n, xhat, inv) = norm.forward(&pre);
                h = n.mapv(elu);
                cache.normed.push(n);
                cache.xhat.push(xhat);
                cache.inv_std.push(inv);
            } else {
                h = pre;
            }
        }
        (h, cache)
    }

    /// Accumulates parameter gradients into `grad` and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &Array2<f64>, grad: &mut Mlp) -> Array2<f64> {
        let mut d = d_out.clone();
        for i in (0..self.linears.len()).rev() {
            if i < self.norms.len() {
                d.zip_mut_with(&cache.normed[i], |dv, &n| *dv *= elu_grad(n));
                d = self.norms[i].backward(&cache.xhat[i], &cache.inv_std[i], &d, &mut grad.norms[i]);
            }
            let lin = &self.linears[i];
            let g = &mut grad.linears[i];
            g.weight += &cache.inputs[i].t().dot(&d);
            g.bias += &d.sum_axis(Axis(0));
            d = d.dot(&lin.weight.t());
        }
        d
    }

    /// Every parameter tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.linears {
            out.push(l.weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        for n in &self.norms {
            out.push(n.gain.as_slice().expect("standard layout"));
            out.push(n.bias.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.linears {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        for n in &mut self.norms {
            out.push(n.gain.as_slice_mut().expect("standard layout"));
            out.push(n.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn to_state(&self) -> MlpState {
        MlpState {
            layers: self
                .linears
                .iter()
                .map(|l| LinearState {
                    rows: l.weight.nrows(),
                    cols: l.weight.ncols(),
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| NormState {
                    gain: n.gain.to_vec(),
                    bias: n.bias.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_state(state: &MlpState) -> Result<Self, String> {
        let mut linears = Vec::new();
        let mut prev: Option<usize> = None;
        for (i, l) in state.layers.iter().enumerate() {
            if prev.is_some_and(|p| p != l.rows) {
                return Err(format!("layer {i} expects {} inputs, previous layer has {}", l.rows, prev.unwrap()));
            }
            if l.bias.len() != l.cols {
                return Err(format!("layer {i} bias has {} entries, expected {}", l.bias.len(), l.cols));
            }
            let weight = Array2::from_shape_vec((l.rows, l.cols), l.weight.clone())
                .map_err(|e| format!("layer {i}: {e}"))?;
            linears.push(Linear {
                weight,
                bias: Array1::from(l.bias.clone()),
            });
            prev = Some(l.cols);
        }
        if linears.is_empty() || state.norms.len() + 1 != linears.len() {
            return Err("expected one layer norm per hidden layer".into());
        }
        let norms = state
            .norms
            .iter()
            .zip(&linears)
            .enumerate()
            .map(|(i, (n, l))| {
                if n.gain.len() != l.bias.len() || n.bias.len() != l.bias.len() {
                    Err(format!("layer norm {i} has the wrong width"))
                } else {
                    Ok(LayerNorm {
                        gain: Array1::from(n.gain.clone()),
                        bias: Array1::from(n.bias.clone()),
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mlp = Self { linears, norms };
        if !mlp.is_finite() {
            return Err("non-finite weights".into());
        }
        Ok(mlp)
    }
}

/// Serialized network: row-major weights per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpState {
    pub layers: Vec<LinearState>,
    pub norms: Vec<NormState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearState {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormState {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Adaptive moment estimation over a fixed list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, shapes: &[usize]) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Horizontal concatenation `[a | b]`.
pub fn hstack(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), a.ncols() + b.ncols()));
    out.slice_mut(s![.., ..a.ncols()]).assign(&a);
    out.slice_mut(s![.., a.ncols()..]).assign(&b);
    out
}
