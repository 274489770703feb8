//! Forward pass, loss and backpropagation through time.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::params::{LstmParams, CLASSES};
use crate::error::{Error, Result};

/// Smallest probability fed to the logarithm in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Recurrent state carried between frames.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub hidden: Array1<f64>,
    pub cell: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState { hidden: Array1::zeros(hidden), cell: Array1::zeros(hidden) }
    }
}

/// Activations retained for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub inputs: Array2<f64>,
    pub initial: LstmState,
    /// `T x 4H` post-activation gates in input, forget, cell, output order.
    pub gates: Array2<f64>,
    /// `T x H`
    pub cells: Array2<f64>,
    /// `T x H`, `tanh` of the cell state.
    pub cells_tanh: Array2<f64>,
    /// `T x H`
    pub hidden: Array2<f64>,
    /// `T x 2` softmax outputs; column 1 is "present".
    pub probs: Array2<f64>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.probs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.nrows() == 0
    }

    pub fn final_state(&self) -> LstmState {
        let t = self.len();
        if t == 0 {
            return self.initial.clone();
        }
        LstmState { hidden: self.hidden.row(t - 1).to_owned(), cell: self.cells.row(t - 1).to_owned() }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Runs the network from a zero state.
pub fn forward(params: &LstmParams, sequence: ArrayView2<f64>) -> Result<ForwardCache> {
    forward_from(params, sequence, &LstmState::zeros(params.hidden()))
}

/// Runs the network from `state`.
pub fn forward_from(
    params: &LstmParams,
    sequence: ArrayView2<f64>,
    state: &LstmState,
) -> Result<ForwardCache> {
    let h = params.hidden();
    let (t_len, dim) = sequence.dim();
    if dim != params.input_dim() {
        return Err(Error::Shape(format!(
            "sequence has {dim} features, network expects {}",
            params.input_dim()
        )));
    }
    if t_len == 0 {
        return Err(Error::Shape("empty sequence".into()));
    }
    if state.hidden.len() != h || state.cell.len() != h {
        return Err(Error::Shape(format!("state size does not match {h} hidden units")));
    }

    // Input contributions for all frames at once.
    let mut gates = sequence.dot(&params.w_input.t()) + &params.bias;
    let mut cells = Array2::zeros((t_len, h));
    let mut cells_tanh = Array2::zeros((t_len, h));
    let mut hidden = Array2::zeros((t_len, h));

    let mut h_prev = state.hidden.clone();
    let mut c_prev = state.cell.clone();
    for t in 0..t_len {
        let mut z = gates.row_mut(t);
        z += &params.w_hidden.dot(&h_prev);
        for k in 0..h {
            z[k] = sigmoid(z[k]);
            z[h + k] = sigmoid(z[h + k]);
            z[2 * h + k] = z[2 * h + k].tanh();
            z[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        for k in 0..h {
            let c = z[h + k] * c_prev[k] + z[k] * z[2 * h + k];
            let tc = c.tanh();
            cells[[t, k]] = c;
            cells_tanh[[t, k]] = tc;
            hidden[[t, k]] = z[3 * h + k] * tc;
        }
        h_prev = hidden.row(t).to_owned();
        c_prev = cells.row(t).to_owned();
        if !c_prev.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite cell state at frame {t}")));
        }
    }

    let logits = hidden.dot(&params.w_out.t()) + &params.b_out;
    let mut probs = Array2::zeros((t_len, CLASSES));
    for (mut p, l) in probs.rows_mut().into_iter().zip(logits.rows()) {
        let m = l[0].max(l[1]);
        let e0 = (l[0] - m).exp();
        let e1 = (l[1] - m).exp();
        p[0] = e0 / (e0 + e1);
        p[1] = e1 / (e0 + e1);
    }
    if !probs.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite output".into()));
    }

    Ok(ForwardCache {
        inputs: sequence.to_owned(),
        initial: state.clone(),
        gates,
        cells,
        cells_tanh,
        hidden,
        probs,
    })
}

/// Mean cross-entropy of the per-frame scores against binary labels.
pub fn loss(probs: ArrayView2<f64>, labels: &[bool]) -> Result<f64> {
    if probs.nrows() != labels.len() || probs.ncols() != CLASSES {
        return Err(Error::Shape(format!(
            "{}x{} scores for {} labels",
            probs.nrows(),
            probs.ncols(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Shape("no frames".into()));
    }
    let total: f64 = probs
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(p, &y)| -p[usize::from(y)].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradient of the mean cross-entropy with respect to every parameter.
pub fn backward(params: &LstmParams, cache: &ForwardCache, labels: &[bool]) -> Result<LstmParams> {
    let t_len = cache.len();
    if labels.len() != t_len {
        return Err(Error::Shape(format!("{} labels for {t_len} frames", labels.len())));
    }
    let h = params.hidden();
    let mut grad = LstmParams::zeros(params.input_dim(), h);

    let mut d_logits = cache.probs.clone();
    for (mut row, &y) in d_logits.rows_mut().into_iter().zip(labels) {
        row[usize::from(y)] -= 1.0;
    }
    d_logits /= t_len as f64;

    grad.w_out = d_logits.t().dot(&cache.hidden);
    grad.b_out = d_logits.sum_axis(Axis(0));
    let d_hidden_out = d_logits.dot(&params.w_out);

    let mut d_gates = Array2::<f64>::zeros((t_len, 4 * h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);
    for t in (0..t_len).rev() {
        let g = cache.gates.row(t);
        let tc = cache.cells_tanh.row(t);
        let c_prev: ArrayView1<f64> = if t > 0 { cache.cells.row(t - 1) } else { cache.initial.cell.view() };
        let mut dz = d_gates.row_mut(t);
        for k in 0..h {
            let (i, f, cand, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let dh = d_hidden_out[[t, k]] + dh_next[k];
            let dc = dh * o * (1.0 - tc[k] * tc[k]) + dc_next[k];
            dz[k] = dc * cand * i * (1.0 - i);
            dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - cand * cand);
            dz[3 * h + k] = dh * tc[k] * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        dh_next = params.w_hidden.t().dot(&dz);
    }

    // Hidden state feeding each step: the initial state, then h_0..h_{T-2}.
    let mut h_prev = Array2::<f64>::zeros((t_len, h));
    h_prev.row_mut(0).assign(&cache.initial.hidden);
    if t_len > 1 {
        h_prev.slice_mut(s![1.., ..]).assign(&cache.hidden.slice(s![..t_len - 1, ..]));
    }
    grad.w_input = d_gates.t().dot(&cache.inputs);
    grad.w_hidden = d_gates.t().dot(&h_prev);
    grad.bias = d_gates.sum_axis(Axis(0));
    Ok(grad)
}

/// Loss and gradient for one labelled sequence.
pub fn loss_and_gradient(
    params: &LstmParams,
    sequence: ArrayView2<f64>,
    labels: &[bool],
) -> Result<(f64, LstmParams)> {
    let cache = forward(params, sequence)?;
    let l = loss(cache.probs.view(), labels)?;
    let g = backward(params, &cache, labels)?;
    Ok((l, g))
}

/// Per-frame decisions and ensemble scores `p(present) - 0.5`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequencePrediction {
    pub present: Vec<bool>,
    pub scores: Vec<f64>,
}

fn prediction_from(cache: &ForwardCache) -> SequencePrediction {
    let scores: Vec<f64> = cache.probs.column(1).iter().map(|p| p - 0.5).collect();
    SequencePrediction { present: scores.iter().map(|&s| s >= 0.0).collect(), scores }
}

pub fn predict_sequence(params: &LstmParams, sequence: ArrayView2<f64>) -> Result<SequencePrediction> {
    Ok(prediction_from(&forward(params, sequence)?))
}

/// Predicts a chunk of a longer sequence, continuing from `state`.
pub fn predict_sequence_from(
    params: &LstmParams,
    sequence: ArrayView2<f64>,
    state: &LstmState,
) -> Result<(SequencePrediction, LstmState)> {
    let cache = forward_from(params, sequence, state)?;
    Ok((prediction_from(&cache), cache.final_state()))
}
