use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate order used for parameter blocks and serialization.
pub const GATES: [&str; 4] = ["input", "forget", "cell", "output"];

/// Number of output classes (absent, present).
pub const CLASSES: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_noise_std: f64,
    /// Whether weight noise also perturbs bias vectors.
    pub noise_on_biases: bool,
    pub epochs: usize,
    pub seed: u64,
    /// Rescale gradients whose L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            input_dim: 2048,
            hidden_units: 200,
            learning_rate: 1e-4,
            momentum: 0.9,
            weight_noise_std: 0.1,
            noise_on_biases: true,
            epochs: 50,
            seed: 0,
            clip_norm: None,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.input_dim == 0 || self.hidden_units == 0 || self.epochs == 0 {
            return bad("input_dim, hidden_units and epochs must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be >= 0", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.weight_noise_std >= 0.0 && self.weight_noise_std.is_finite()) {
            return bad(format!("weight_noise_std {} must be >= 0", self.weight_noise_std));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad(format!("clip_norm {c} must be positive"));
            }
        }
        Ok(())
    }
}

/// Single-layer LSTM with a two-way softmax read-out.
///
/// Gate blocks are stacked row-wise in [`GATES`] order: rows
/// `g*H..(g+1)*H` of `w_input`, `w_hidden` and `bias` belong to gate `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `4H x D`
    pub w_input: Array2<f64>,
    /// `4H x H`
    pub w_hidden: Array2<f64>,
    /// `4H`
    pub bias: Array1<f64>,
    /// `2 x H`
    pub w_out: Array2<f64>,
    /// `2`
    pub b_out: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            w_input: Array2::zeros((4 * hidden, input_dim)),
            w_hidden: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
            w_out: Array2::zeros((CLASSES, hidden)),
            b_out: Array1::zeros(CLASSES),
        }
    }

    /// Uniform in `[-1/sqrt(H), 1/sqrt(H)]` with forget-gate biases at 1.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut p = Self::zeros(input_dim, hidden);
        p.for_each_mut(|_, v| *v = dist.sample(rng));
        p.bias.slice_mut(ndarray::s![hidden..2 * hidden]).fill(1.0);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.ncols()
    }

    pub fn len(&self) -> usize {
        let h = self.hidden();
        4 * h * (self.input_dim() + h + 1) + CLASSES * h + CLASSES
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Visits every parameter; the flag is true for bias entries.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(bool, &mut f64)) {
        self.w_input.iter_mut().for_each(|v| f(false, v));
        self.w_hidden.iter_mut().for_each(|v| f(false, v));
        self.bias.iter_mut().for_each(|v| f(true, v));
        self.w_out.iter_mut().for_each(|v| f(false, v));
        self.b_out.iter_mut().for_each(|v| f(true, v));
    }

    /// `self += scale * other`.
    pub fn scaled_add(&mut self, scale: f64, other: &LstmParams) {
        self.w_input.scaled_add(scale, &other.w_input);
        self.w_hidden.scaled_add(scale, &other.w_hidden);
        self.bias.scaled_add(scale, &other.bias);
        self.w_out.scaled_add(scale, &other.w_out);
        self.b_out.scaled_add(scale, &other.b_out);
    }

    /// `self = momentum * self - lr * grad`.
    pub(crate) fn momentum_step(&mut self, momentum: f64, lr: f64, grad: &LstmParams) {
        fn step<D: ndarray::Dimension>(v: &mut ndarray::Array<f64, D>, g: &ndarray::Array<f64, D>, m: f64, lr: f64) {
            Zip::from(v).and(g).for_each(|v, &g| *v = m * *v - lr * g);
        }
        step(&mut self.w_input, &grad.w_input, momentum, lr);
        step(&mut self.w_hidden, &grad.w_hidden, momentum, lr);
        step(&mut self.bias, &grad.bias, momentum, lr);
        step(&mut self.w_out, &grad.w_out, momentum, lr);
        step(&mut self.b_out, &grad.b_out, momentum, lr);
    }

    pub fn scale(&mut self, s: f64) {
        self.for_each_mut(|_, v| *v *= s);
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    /// Adds i.i.d. `N(0, std^2)` noise to every weight (and bias, if asked).
    pub fn add_gaussian_noise<R: Rng + ?Sized>(&mut self, std: f64, include_biases: bool, rng: &mut R) {
        self.for_each_mut(|is_bias, v| {
            if include_biases || !is_bias {
                let z: f64 = StandardNormal.sample(rng);
                *v += std * z;
            }
        });
    }

    /// Flattens in file order: for each gate, its input-to-hidden rows
    /// (row-major), hidden-to-hidden rows, then bias; finally the output
    /// projection (row-major) and output bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let h = self.hidden();
        let mut out = Vec::with_capacity(self.len());
        for g in 0..4 {
            let rows = g * h..(g + 1) * h;
            out.extend(self.w_input.slice(ndarray::s![rows.clone(), ..]).iter());
            out.extend(self.w_hidden.slice(ndarray::s![rows.clone(), ..]).iter());
            out.extend(self.bias.slice(ndarray::s![rows]).iter());
        }
        out.extend(self.w_out.iter());
        out.extend(self.b_out.iter());
        out
    }

    pub fn from_flat(input_dim: usize, hidden: usize, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(input_dim, hidden);
        if flat.len() != p.len() {
            return Err(Error::Shape(format!(
                "{} parameters supplied, D={input_dim} H={hidden} needs {}",
                flat.len(),
                p.len()
            )));
        }
        let mut it = flat.iter().copied();
        for g in 0..4 {
            let rows = g * hidden..(g + 1) * hidden;
            for v in p.w_input.slice_mut(ndarray::s![rows.clone(), ..]).iter_mut() {
                *v = it.next().unwrap();
            }
            for v in p.w_hidden.slice_mut(ndarray::s![rows.clone(), ..]).iter_mut() {
                *v = it.next().unwrap();
            }
            for v in p.bias.slice_mut(ndarray::s![rows]).iter_mut() {
                *v = it.next().unwrap();
            }
        }
        for v in p.w_out.iter_mut().chain(p.b_out.iter_mut()) {
            *v = it.next().unwrap();
        }
        Ok(p)
    }
}
