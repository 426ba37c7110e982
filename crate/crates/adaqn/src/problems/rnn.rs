//! Stacked vanilla RNN shared by the character-level language model and the
//! pixel-sequence classifier.
//!
//! Architecture per layer j and time step t:
//! `h_t(j) = act(W_in(j) h_t(j-1) + W_hh(j) h_{t-1}(j) + b(j))`
//! where `h_t(0)` is the embedded input symbol (a column lookup for discrete
//! inputs, a scalar broadcast for pixel inputs) and hidden states start at
//! zero for every window (windows are independent samples; no state carries
//! across batches). The readout is a softmax projection applied at every
//! step (language modeling) or at the final step (classification), with
//! row-max subtraction before exponentiation. Loss is mean cross-entropy in
//! natural log.
//!
//! Gradients are exact full-window BPTT; see the finite-difference checks in
//! the tests.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{SequenceData, SequenceDataset};
use crate::error::{OptimError, Result};
use crate::problems::StochasticObjective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Shape of the network; the input/readout flavor is fixed by the problem
/// that owns it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RnnConfig {
    pub hidden: usize,
    pub layers: usize,
    pub activation: Activation,
    /// Standard deviation of the normal initializer.
    pub init_std: f64,
}

impl Default for RnnConfig {
    fn default() -> Self {
        RnnConfig {
            hidden: 64,
            layers: 2,
            activation: Activation::Tanh,
            init_std: 0.01,
        }
    }
}

/// One named block of the flattened parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightSegment {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Canonical flattening order of all trainable parameters. The descriptor is
/// versioned and serialized next to checkpoints so stored iterates stay
/// portable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightLayout {
    pub version: u32,
    pub segments: Vec<WeightSegment>,
    pub total: usize,
}

pub const WEIGHT_LAYOUT_VERSION: u32 = 1;

impl WeightLayout {
    /// Layout order: for each layer, input weights then recurrent weights
    /// then bias; readout projection and bias last. Matrices are row-major.
    fn build(input_dim: usize, hidden: usize, layers: usize, outputs: usize) -> Self {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize, offset: &mut usize| {
            segments.push(WeightSegment {
                name,
                offset: *offset,
                rows,
                cols,
            });
            *offset += rows * cols;
        };
        for j in 0..layers {
            // Layer 0 input weights are stored transposed (input_dim x hidden)
            // so each symbol's embedding row is contiguous.
            if j == 0 {
                push(format!("layer{j}.w_in"), input_dim, hidden, &mut offset);
            } else {
                push(format!("layer{j}.w_in"), hidden, hidden, &mut offset);
            }
            push(format!("layer{j}.w_hh"), hidden, hidden, &mut offset);
            push(format!("layer{j}.bias"), 1, hidden, &mut offset);
        }
        push("readout.w".into(), outputs, hidden, &mut offset);
        push("readout.bias".into(), 1, outputs, &mut offset);
        WeightLayout {
            version: WEIGHT_LAYOUT_VERSION,
            segments,
            total: offset,
        }
    }

    pub fn segment(&self, name: &str) -> Option<&WeightSegment> {
        self.segments.iter().find(|s| s.name == name)
    }

    fn slice<'a>(&self, w: &'a [f64], index: usize) -> &'a [f64] {
        let seg = &self.segments[index];
        &w[seg.offset..seg.offset + seg.rows * seg.cols]
    }

    fn slice_mut<'a>(&self, w: &'a mut [f64], index: usize) -> &'a mut [f64] {
        let seg = &self.segments[index];
        &mut w[seg.offset..seg.offset + seg.rows * seg.cols]
    }
}

/// How raw examples enter layer 0.
#[derive(Debug, Clone)]
enum InputKind {
    /// Symbol index looked up in a (vocab x hidden) embedding table.
    Discrete { vocab: usize },
    /// One scalar per time step, multiplied into a hidden-sized column.
    Scalar,
}

/// Where the softmax readout applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReadoutKind {
    EveryStep,
    FinalStep,
}

/// Segment indices resolved once at construction.
#[derive(Debug, Clone)]
struct SegmentIndex {
    w_in: Vec<usize>,
    w_hh: Vec<usize>,
    bias: Vec<usize>,
    w_out: usize,
    b_out: usize,
}

/// The shared forward/backward core.
#[derive(Debug, Clone)]
struct RnnCore {
    cfg: RnnConfig,
    layout: WeightLayout,
    seg: SegmentIndex,
    input: InputKind,
    readout: ReadoutKind,
    outputs: usize,
    seq_len: usize,
}

/// Activations cached by the forward pass, sufficient for exact BPTT.
pub struct RnnCache {
    /// hidden[t] holds layers * batch * hidden post-activation values,
    /// layer-major.
    hidden: Vec<Vec<f64>>,
    /// Softmax probabilities: one block per readout application.
    probs: Vec<Vec<f64>>,
    batch_len: usize,
}

impl RnnCore {
    fn new(
        cfg: RnnConfig,
        input: InputKind,
        readout: ReadoutKind,
        outputs: usize,
        seq_len: usize,
    ) -> Result<Self> {
        if cfg.hidden == 0 || cfg.layers == 0 || outputs == 0 || seq_len == 0 {
            return Err(OptimError::Config("rnn: zero-sized dimension".into()));
        }
        let input_dim = match input {
            InputKind::Discrete { vocab } => vocab,
            InputKind::Scalar => 1,
        };
        let layout = WeightLayout::build(input_dim, cfg.hidden, cfg.layers, outputs);
        let mut seg = SegmentIndex {
            w_in: Vec::new(),
            w_hh: Vec::new(),
            bias: Vec::new(),
            w_out: 0,
            b_out: 0,
        };
        for j in 0..cfg.layers {
            seg.w_in.push(3 * j);
            seg.w_hh.push(3 * j + 1);
            seg.bias.push(3 * j + 2);
        }
        seg.w_out = 3 * cfg.layers;
        seg.b_out = 3 * cfg.layers + 1;
        Ok(RnnCore {
            cfg,
            layout,
            seg,
            input,
            readout,
            outputs,
            seq_len,
        })
    }

    fn dim(&self) -> usize {
        self.layout.total
    }

    fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.layout.total)
            .map(|_| {
                // Box-Muller draw scaled to the configured deviation.
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                self.cfg.init_std
                    * (-2.0 * u1.ln()).sqrt()
                    * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect()
    }

    /// Fetch the per-step input of layer 0 for batch row `b` at step `t`
    /// into `z` (added on top of whatever is there).
    #[inline]
    fn add_layer0_input(
        &self,
        w: &[f64],
        data: &SequenceData,
        example: usize,
        t: usize,
        z: &mut [f64],
    ) {
        let h = self.cfg.hidden;
        match (&self.input, data) {
            (InputKind::Discrete { .. }, SequenceData::Tokens { inputs, .. }) => {
                let sym = inputs[example][t];
                let table = self.layout.slice(w, self.seg.w_in[0]);
                let row = &table[sym * h..(sym + 1) * h];
                for i in 0..h {
                    z[i] += row[i];
                }
            }
            (InputKind::Scalar, SequenceData::Pixels { sequences, .. }) => {
                let x = sequences[example][t];
                let col = self.layout.slice(w, self.seg.w_in[0]);
                for i in 0..h {
                    z[i] += col[i] * x;
                }
            }
            _ => unreachable!("input kind and dataset kind are matched at construction"),
        }
    }

    /// Forward pass over a batch of dataset indices. Returns the mean loss
    /// and the cache needed for BPTT.
    fn forward(&self, w: &[f64], data: &SequenceData, batch: &[usize]) -> Result<(f64, RnnCache)> {
        if w.len() != self.layout.total {
            return Err(OptimError::DimensionMismatch {
                context: "rnn forward",
                expected: self.layout.total,
                actual: w.len(),
            });
        }
        if batch.is_empty() {
            return Err(OptimError::Config("rnn: empty batch".into()));
        }
        let h = self.cfg.hidden;
        let nl = self.cfg.layers;
        let bsz = batch.len();
        let t_len = self.seq_len;

        let mut hidden_prev = vec![0.0; nl * bsz * h];
        let mut cache = RnnCache {
            hidden: Vec::with_capacity(t_len),
            probs: Vec::new(),
            batch_len: bsz,
        };
        let mut loss = 0.0;
        let loss_terms = match self.readout {
            ReadoutKind::EveryStep => (bsz * t_len) as f64,
            ReadoutKind::FinalStep => bsz as f64,
        };

        for t in 0..t_len {
            let mut hidden_t = vec![0.0; nl * bsz * h];
            for j in 0..nl {
                let w_hh = self.layout.slice(w, self.seg.w_hh[j]);
                let bias = self.layout.slice(w, self.seg.bias[j]);
                let w_in = self.layout.slice(w, self.seg.w_in[j]);
                let (lower, upper) = hidden_t.split_at_mut(j * bsz * h);
                let cur = &mut upper[..bsz * h];
                let below = (j > 0).then(|| &lower[(j - 1) * bsz * h..j * bsz * h]);
                for (row, &example) in batch.iter().enumerate() {
                    let z = &mut cur[row * h..(row + 1) * h];
                    z.copy_from_slice(bias);
                    match below {
                        Some(below) => {
                            let below_h = &below[row * h..(row + 1) * h];
                            for i in 0..h {
                                z[i] += dot_unchecked(&w_in[i * h..(i + 1) * h], below_h);
                            }
                        }
                        None => self.add_layer0_input(w, data, example, t, z),
                    }
                    let prev = &hidden_prev[j * bsz * h + row * h..j * bsz * h + (row + 1) * h];
                    for i in 0..h {
                        z[i] += dot_unchecked(&w_hh[i * h..(i + 1) * h], prev);
                    }
                    for v in z.iter_mut() {
                        *v = self.cfg.activation.apply(*v);
                    }
                }
            }

            let apply_readout = match self.readout {
                ReadoutKind::EveryStep => true,
                ReadoutKind::FinalStep => t == t_len - 1,
            };
            if apply_readout {
                let w_out = self.layout.slice(w, self.seg.w_out);
                let b_out = self.layout.slice(w, self.seg.b_out);
                let v = self.outputs;
                let mut probs = vec![0.0; bsz * v];
                for (row, &example) in batch.iter().enumerate() {
                    let top = &hidden_t[(nl - 1) * bsz * h + row * h..(nl - 1) * bsz * h + row * h + h];
                    let o = &mut probs[row * v..(row + 1) * v];
                    for k in 0..v {
                        o[k] = b_out[k] + dot_unchecked(&w_out[k * h..(k + 1) * h], top);
                    }
                    let max = o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut denom = 0.0;
                    for val in o.iter_mut() {
                        *val = (*val - max).exp();
                        denom += *val;
                    }
                    for val in o.iter_mut() {
                        *val /= denom;
                    }
                    let target = self.target_of(data, example, t);
                    loss -= (o[target].max(f64::MIN_POSITIVE)).ln();
                }
                cache.probs.push(probs);
            }

            cache.hidden.push(hidden_t);
            hidden_prev.copy_from_slice(cache.hidden.last().unwrap());
        }

        let loss = loss / loss_terms;
        if !loss.is_finite() {
            return Err(OptimError::numerical("rnn forward: nonfinite loss"));
        }
        Ok((loss, cache))
    }

    fn target_of(&self, data: &SequenceData, example: usize, t: usize) -> usize {
        match data {
            SequenceData::Tokens { targets, .. } => targets[example][t],
            SequenceData::Pixels { labels, .. } => labels[example],
        }
    }

    /// Exact BPTT through the cached forward pass.
    fn backward(
        &self,
        w: &[f64],
        data: &SequenceData,
        batch: &[usize],
        cache: &RnnCache,
    ) -> Result<Vec<f64>> {
        let h = self.cfg.hidden;
        let nl = self.cfg.layers;
        let bsz = batch.len();
        let t_len = self.seq_len;
        debug_assert_eq!(cache.batch_len, bsz);

        let mut grad = vec![0.0; self.layout.total];
        // Gradient flowing into h_t(j) from step t+1 of the same layer.
        let mut dh_rec = vec![0.0; nl * bsz * h];
        let loss_terms = match self.readout {
            ReadoutKind::EveryStep => (bsz * t_len) as f64,
            ReadoutKind::FinalStep => bsz as f64,
        };
        let inv = 1.0 / loss_terms;
        let v = self.outputs;

        for t in (0..t_len).rev() {
            let hidden_t = &cache.hidden[t];
            // dh for every layer at this step; filled top-down.
            let mut dh = vec![0.0; nl * bsz * h];

            // Readout contribution into the top layer.
            let produces_output = match self.readout {
                ReadoutKind::EveryStep => true,
                ReadoutKind::FinalStep => t == t_len - 1,
            };
            if produces_output {
                let probs_idx = match self.readout {
                    ReadoutKind::EveryStep => t,
                    ReadoutKind::FinalStep => 0,
                };
                let probs = &cache.probs[probs_idx];
                let w_out = self.layout.slice(w, self.seg.w_out);
                for (row, &example) in batch.iter().enumerate() {
                    let target = self.target_of(data, example, t);
                    let top =
                        &hidden_t[(nl - 1) * bsz * h + row * h..(nl - 1) * bsz * h + row * h + h];
                    let dh_top =
                        &mut dh[(nl - 1) * bsz * h + row * h..(nl - 1) * bsz * h + row * h + h];
                    let p = &probs[row * v..(row + 1) * v];
                    for k in 0..v {
                        let mut d_o = p[k] * inv;
                        if k == target {
                            d_o -= inv;
                        }
                        if d_o == 0.0 {
                            continue;
                        }
                        // dW_out row and dh_top in one sweep.
                        for i in 0..h {
                            dh_top[i] += d_o * w_out[k * h + i];
                        }
                        let dw_row = &mut self.layout.slice_mut(&mut grad, self.seg.w_out)
                            [k * h..(k + 1) * h];
                        for i in 0..h {
                            dw_row[i] += d_o * top[i];
                        }
                        self.layout.slice_mut(&mut grad, self.seg.b_out)[k] += d_o;
                    }
                }
            }

            // Layers top to bottom.
            for j in (0..nl).rev() {
                for (row, &example) in batch.iter().enumerate() {
                    let idx = j * bsz * h + row * h;
                    let h_cur = &hidden_t[idx..idx + h];
                    // Total gradient into h_t(j): same-step (readout or layer
                    // above) plus recurrent flow from t+1.
                    let mut dz = vec![0.0; h];
                    for i in 0..h {
                        let total = dh[idx + i] + dh_rec[idx + i];
                        dz[i] = total * self.cfg.activation.derivative(h_cur[i]);
                    }

                    // Recurrent weights: dW_hh += dz (x) h_{t-1}, and the
                    // gradient into h_{t-1}(j).
                    {
                        let w_hh = self.layout.slice(w, self.seg.w_hh[j]);
                        let mut dh_prev = vec![0.0; h];
                        if t > 0 {
                            for i in 0..h {
                                let c = dz[i];
                                if c == 0.0 {
                                    continue;
                                }
                                let wrow = &w_hh[i * h..(i + 1) * h];
                                for k in 0..h {
                                    dh_prev[k] += c * wrow[k];
                                }
                            }
                            let prev = &cache.hidden[t - 1][idx..idx + h];
                            let dw_hh = self.layout.slice_mut(&mut grad, self.seg.w_hh[j]);
                            for i in 0..h {
                                let c = dz[i];
                                if c == 0.0 {
                                    continue;
                                }
                                let drow = &mut dw_hh[i * h..(i + 1) * h];
                                for k in 0..h {
                                    drow[k] += c * prev[k];
                                }
                            }
                        }
                        // Store for the next (earlier) step.
                        let dst = &mut dh_rec[idx..idx + h];
                        dst.copy_from_slice(&dh_prev);
                    }

                    // Bias.
                    {
                        let db = self.layout.slice_mut(&mut grad, self.seg.bias[j]);
                        for i in 0..h {
                            db[i] += dz[i];
                        }
                    }

                    // Input weights and gradient into the layer below.
                    if j == 0 {
                        match (&self.input, data) {
                            (InputKind::Discrete { .. }, SequenceData::Tokens { inputs, .. }) => {
                                let sym = inputs[example][t];
                                let table = self.layout.slice_mut(&mut grad, self.seg.w_in[0]);
                                let row_slice = &mut table[sym * h..(sym + 1) * h];
                                for i in 0..h {
                                    row_slice[i] += dz[i];
                                }
                            }
                            (InputKind::Scalar, SequenceData::Pixels { sequences, .. }) => {
                                let x = sequences[example][t];
                                let col = self.layout.slice_mut(&mut grad, self.seg.w_in[0]);
                                for i in 0..h {
                                    col[i] += dz[i] * x;
                                }
                            }
                            _ => unreachable!(),
                        }
                    } else {
                        let below_idx = (j - 1) * bsz * h + row * h;
                        let below = &hidden_t[below_idx..below_idx + h];
                        let w_in = self.layout.slice(w, self.seg.w_in[j]);
                        for i in 0..h {
                            let c = dz[i];
                            if c == 0.0 {
                                continue;
                            }
                            let wrow = &w_in[i * h..(i + 1) * h];
                            let dh_below = &mut dh[below_idx..below_idx + h];
                            for k in 0..h {
                                dh_below[k] += c * wrow[k];
                            }
                        }
                        let dw_in = self.layout.slice_mut(&mut grad, self.seg.w_in[j]);
                        for i in 0..h {
                            let c = dz[i];
                            if c == 0.0 {
                                continue;
                            }
                            let drow = &mut dw_in[i * h..(i + 1) * h];
                            for k in 0..h {
                                drow[k] += c * below[k];
                            }
                        }
                    }
                }
            }
        }

        if !grad.iter().all(|g| g.is_finite()) {
            return Err(OptimError::numerical("rnn backward: nonfinite gradient"));
        }
        Ok(grad)
    }
}

#[inline]
fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Character (or word) level language model over a token dataset.
#[derive(Debug, Clone)]
pub struct RnnLmProblem {
    core: RnnCore,
    data: SequenceData,
    m: usize,
}

impl RnnLmProblem {
    pub fn new(dataset: &SequenceDataset, cfg: RnnConfig) -> Result<Self> {
        match &dataset.data {
            SequenceData::Tokens { inputs, vocab, .. } => {
                if inputs.is_empty() {
                    return Err(OptimError::Config("lm: empty dataset".into()));
                }
                let t_len = inputs[0].len();
                let core = RnnCore::new(
                    cfg,
                    InputKind::Discrete { vocab: *vocab },
                    ReadoutKind::EveryStep,
                    *vocab,
                    t_len,
                )?;
                Ok(RnnLmProblem {
                    core,
                    data: dataset.data.clone(),
                    m: inputs.len(),
                })
            }
            SequenceData::Pixels { .. } => {
                Err(OptimError::Config("lm: expected a token dataset".into()))
            }
        }
    }

    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        self.core.init_params(seed)
    }

    pub fn layout(&self) -> &WeightLayout {
        &self.core.layout
    }

    pub fn vocab_size(&self) -> usize {
        self.core.outputs
    }

    pub fn forward(&self, w: &[f64], batch: &[usize]) -> Result<(f64, RnnCache)> {
        self.core.forward(w, &self.data, batch)
    }

    pub fn backward(&self, w: &[f64], batch: &[usize], cache: &RnnCache) -> Result<Vec<f64>> {
        self.core.backward(w, &self.data, batch, cache)
    }
}

impl StochasticObjective for RnnLmProblem {
    fn dim(&self) -> usize {
        self.core.dim()
    }

    fn num_examples(&self) -> usize {
        self.m
    }

    fn value(&self, w: &[f64], batch: &[usize]) -> Result<f64> {
        Ok(self.forward(w, batch)?.0)
    }

    fn value_grad(&self, w: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        let (loss, cache) = self.forward(w, batch)?;
        let grad = self.backward(w, batch, &cache)?;
        Ok((loss, grad))
    }

    fn per_example_gradient(&self, w: &[f64], index: usize) -> Result<Vec<f64>> {
        self.gradient(w, &[index])
    }
}

/// Image classification from a pixel sequence: one scalar pixel per step,
/// softmax over classes from the final hidden state.
#[derive(Debug, Clone)]
pub struct PixelSequenceProblem {
    core: RnnCore,
    data: SequenceData,
    m: usize,
}

impl PixelSequenceProblem {
    pub fn new(dataset: &SequenceDataset, cfg: RnnConfig) -> Result<Self> {
        match &dataset.data {
            SequenceData::Pixels {
                sequences, classes, ..
            } => {
                if sequences.is_empty() {
                    return Err(OptimError::Config("pixels: empty dataset".into()));
                }
                let t_len = sequences[0].len();
                let core = RnnCore::new(
                    cfg,
                    InputKind::Scalar,
                    ReadoutKind::FinalStep,
                    *classes,
                    t_len,
                )?;
                Ok(PixelSequenceProblem {
                    core,
                    data: dataset.data.clone(),
                    m: sequences.len(),
                })
            }
            SequenceData::Tokens { .. } => {
                Err(OptimError::Config("pixels: expected a pixel dataset".into()))
            }
        }
    }

    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        self.core.init_params(seed)
    }

    pub fn layout(&self) -> &WeightLayout {
        &self.core.layout
    }

    pub fn forward(&self, w: &[f64], batch: &[usize]) -> Result<(f64, RnnCache)> {
        self.core.forward(w, &self.data, batch)
    }

    pub fn backward(&self, w: &[f64], batch: &[usize], cache: &RnnCache) -> Result<Vec<f64>> {
        self.core.backward(w, &self.data, batch, cache)
    }
}

impl StochasticObjective for PixelSequenceProblem {
    fn dim(&self) -> usize {
        self.core.dim()
    }

    fn num_examples(&self) -> usize {
        self.m
    }

    fn value(&self, w: &[f64], batch: &[usize]) -> Result<f64> {
        Ok(self.forward(w, batch)?.0)
    }

    fn value_grad(&self, w: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        let (loss, cache) = self.forward(w, batch)?;
        let grad = self.backward(w, batch, &cache)?;
        Ok((loss, grad))
    }

    fn per_example_gradient(&self, w: &[f64], index: usize) -> Result<Vec<f64>> {
        self.gradient(w, &[index])
    }

    fn accuracy(&self, w: &[f64], batch: &[usize]) -> Option<f64> {
        let (_, cache) = self.forward(w, batch).ok()?;
        let probs = cache.probs.first()?;
        let classes = self.core.outputs;
        let labels = match &self.data {
            SequenceData::Pixels { labels, .. } => labels,
            _ => return None,
        };
        let mut correct = 0usize;
        for (row, &example) in batch.iter().enumerate() {
            let p = &probs[row * classes..(row + 1) * classes];
            let argmax = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, _)| k)
                .unwrap();
            if argmax == labels[example] {
                correct += 1;
            }
        }
        Some(correct as f64 / batch.len() as f64)
    }
}
