//! A small graph convolutional network with hand-rolled reverse-mode
//! gradients.
//!
//! Layer l computes `act(P(mask) . H_l . W_l + b_l)` where `P(mask)` is the
//! propagation operator under per-edge multipliers; hidden layers rectify,
//! the head is a softmax. The backward pass produces exact gradients for
//! weights, biases, and the edge multipliers themselves, which is the hook
//! the explainers optimize through.
//!
//! Two mask granularities: the public entry points take per-edge logits and
//! chain through their sigmoid; the multiplier-level engine is exposed for
//! callers that reparameterize the multipliers differently.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::datagen::Dataset;
use crate::graph::DiGraph;
use crate::preprocess::PropagationMatrix;
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    Dims(String),
    #[error("mask has {got} entries but the operator has {want} edges")]
    MaskLen { got: usize, want: usize },
    #[error("node subset is empty")]
    EmptySubset,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),
    #[error("loss became non-finite at epoch {epoch}")]
    NonFinite { epoch: usize },
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u8),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub num_classes: usize,
}

impl ModelConfig {
    /// (rows, cols) of each layer's weight matrix.
    pub fn dims(&self) -> Vec<(usize, usize)> {
        assert!(self.layers >= 1, "at least one layer");
        (0..self.layers)
            .map(|l| {
                let rows = if l == 0 { self.input_dim } else { self.hidden };
                let cols = if l + 1 == self.layers { self.num_classes } else { self.hidden };
                (rows, cols)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    config: ModelConfig,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

impl GcnModel {
    /// Glorot-uniform weights, zero biases, drawn from the model-init stream
    /// of `seed` in layer order.
    pub fn init(config: ModelConfig, seed: u64) -> GcnModel {
        use rand::Rng;
        let mut rng = stream(seed, "model-init");
        let mut weights = Vec::with_capacity(config.layers);
        let mut biases = Vec::with_capacity(config.layers);
        for (rows, cols) in config.dims() {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let w = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit));
            weights.push(w);
            biases.push(Array1::zeros(cols));
        }
        GcnModel { config, weights, biases }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }
    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }
    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Direct parameter access for in-crate tests that hand-craft models.
    #[cfg(test)]
    pub(crate) fn params_mut(&mut self) -> (&mut Vec<Array2<f64>>, &mut Vec<Array1<f64>>) {
        (&mut self.weights, &mut self.biases)
    }
}

/// Node features, or the constant-1 column for featureless graphs.
pub fn design_matrix(g: &DiGraph) -> Array2<f64> {
    if g.feature_dim() == 0 {
        Array2::ones((g.n(), 1))
    } else {
        g.features().clone()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logits_to_multipliers(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&x| sigmoid(x)).collect()
}

struct ForwardTrace {
    /// h[0] is the input; h[l+1] the activation output of layer l; the last
    /// entry holds the softmax probabilities.
    h: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

fn check_dims(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
) -> Result<(), NnError> {
    if x.nrows() != prop.n() {
        return Err(NnError::Dims(format!(
            "{} feature rows for an operator over {} nodes",
            x.nrows(),
            prop.n()
        )));
    }
    if x.ncols() != model.config.input_dim {
        return Err(NnError::Dims(format!(
            "feature dim {} but the model expects {}",
            x.ncols(),
            model.config.input_dim
        )));
    }
    // The rectifier maps NaN to 0 under f64::max, so a bad input would
    // otherwise vanish silently instead of surfacing.
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("features"));
    }
    Ok(())
}

fn check_mask(prop: &PropagationMatrix, mask: Option<&[f64]>) -> Result<(), NnError> {
    if let Some(m) = mask {
        if m.len() != prop.edge_count() {
            return Err(NnError::MaskLen { got: m.len(), want: prop.edge_count() });
        }
    }
    Ok(())
}

fn forward_trace(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
    mult: Option<&[f64]>,
) -> ForwardTrace {
    let layers = model.config.layers;
    let mut h: Vec<Array2<f64>> = Vec::with_capacity(layers + 1);
    let mut pre = Vec::with_capacity(layers);
    h.push(x.to_owned());
    for l in 0..layers {
        let agg = match mult {
            Some(m) => prop.apply_masked(m, &h[l].view()),
            None => prop.apply(&h[l].view()),
        };
        let mut p = agg.dot(&model.weights[l]);
        p += &model.biases[l];
        let out = if l + 1 == layers { softmax_rows(&p) } else { p.mapv(|v| v.max(0.0)) };
        pre.push(p);
        h.push(out);
    }
    ForwardTrace { h, pre }
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Class probabilities for every node, under optional per-edge mask logits
/// (sigmoid applied; absent mask means every multiplier is 1).
pub fn gcn_forward(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
    mask_logits: Option<&[f64]>,
) -> Result<Array2<f64>, NnError> {
    check_dims(model, prop, x)?;
    check_mask(prop, mask_logits)?;
    let mult = mask_logits.map(|l| logits_to_multipliers(l));
    let trace = forward_trace(model, prop, x, mult.as_deref());
    let probs = trace.h.into_iter().next_back().expect("at least one layer");
    if probs.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("class probabilities"));
    }
    Ok(probs)
}

/// Multiplier-level forward with no logit chain; the engine callers with
/// their own mask reparameterization drive directly.
pub fn gcn_forward_multipliers(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
    multipliers: Option<&[f64]>,
) -> Result<Array2<f64>, NnError> {
    check_dims(model, prop, x)?;
    check_mask(prop, multipliers)?;
    let trace = forward_trace(model, prop, x, multipliers);
    let probs = trace.h.into_iter().next_back().expect("at least one layer");
    if probs.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("class probabilities"));
    }
    Ok(probs)
}

/// Unmasked probability row of a single node.
pub fn predict_proba(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
    v: usize,
) -> Result<Array1<f64>, NnError> {
    let probs = gcn_forward(model, prop, x, None)?;
    Ok(probs.row(v).to_owned())
}

/// The representation fed to the final layer (the input itself for a
/// single-layer model); used as node embeddings by the amortized explainer.
pub fn embeddings(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
) -> Result<Array2<f64>, NnError> {
    check_dims(model, prop, x)?;
    let trace = forward_trace(model, prop, x, None);
    let mut h = trace.h;
    h.pop();
    Ok(h.pop().expect("trace holds input"))
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// Gradient with respect to the mask parameterization that was supplied:
    /// logits for [`loss_and_grads`], raw multipliers for
    /// [`masked_loss_and_grads`]. Absent when no mask was given.
    pub mask: Option<Vec<f64>>,
}

/// Mean cross-entropy over `subset` plus exact gradients, differentiating
/// through per-edge mask logits when present.
pub fn loss_and_grads(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
    labels: &[usize],
    subset: &[usize],
    mask_logits: Option<&[f64]>,
) -> Result<(f64, Gradients), NnError> {
    check_mask(prop, mask_logits)?;
    let mult = mask_logits.map(|l| logits_to_multipliers(l));
    let (loss, mut grads) =
        masked_loss_and_grads(model, prop, x, labels, subset, mult.as_deref())?;
    if let (Some(gm), Some(m)) = (grads.mask.as_mut(), mult.as_ref()) {
        // d sigma / d logit = sigma (1 - sigma).
        for (g, &s) in gm.iter_mut().zip(m) {
            *g *= s * (1.0 - s);
        }
    }
    Ok((loss, grads))
}

/// Same loss, but the mask gradient is taken with respect to the raw
/// multipliers.
pub fn masked_loss_and_grads(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
    labels: &[usize],
    subset: &[usize],
    multipliers: Option<&[f64]>,
) -> Result<(f64, Gradients), NnError> {
    backward_full(model, prop, x, labels, subset, multipliers, false)
        .map(|(loss, grads, _)| (loss, grads))
}

/// Multiplier-level loss that additionally backpropagates into the input
/// matrix, for callers that optimize a feature mask.
pub(crate) fn backward_full(
    model: &GcnModel,
    prop: &PropagationMatrix,
    x: &ArrayView2<f64>,
    labels: &[usize],
    subset: &[usize],
    multipliers: Option<&[f64]>,
    want_input: bool,
) -> Result<(f64, Gradients, Option<Array2<f64>>), NnError> {
    check_dims(model, prop, x)?;
    check_mask(prop, multipliers)?;
    if subset.is_empty() {
        return Err(NnError::EmptySubset);
    }
    if labels.len() != prop.n() {
        return Err(NnError::Dims(format!(
            "{} labels for {} nodes",
            labels.len(),
            prop.n()
        )));
    }
    let layers = model.config.layers;
    let trace = forward_trace(model, prop, x, multipliers);
    let probs = &trace.h[layers];

    let inv = 1.0 / subset.len() as f64;
    let mut loss = 0.0;
    for &v in subset {
        loss -= probs[[v, labels[v]]].max(f64::MIN_POSITIVE).ln();
    }
    loss *= inv;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("loss"));
    }

    // Softmax + cross-entropy collapses to (P - onehot) / |subset| on the
    // subset rows. Duplicate subset entries accumulate, matching the mean
    // over the list.
    let mut d_pre = Array2::zeros(probs.raw_dim());
    for &v in subset {
        for c in 0..model.config.num_classes {
            d_pre[[v, c]] += (probs[[v, c]] - if c == labels[v] { 1.0 } else { 0.0 }) * inv;
        }
    }

    let mut w_grads: Vec<Array2<f64>> = Vec::with_capacity(layers);
    let mut b_grads: Vec<Array1<f64>> = Vec::with_capacity(layers);
    let mut mask_grad = multipliers.map(|m| vec![0.0; m.len()]);
    let ones = vec![1.0; prop.edge_count()];
    let mult_ref = multipliers.unwrap_or(&ones);

    let mut d_input = None;
    let mut d_cur = d_pre;
    for l in (0..layers).rev() {
        let agg = match multipliers {
            Some(m) => prop.apply_masked(m, &trace.h[l].view()),
            None => prop.apply(&trace.h[l].view()),
        };
        w_grads.push(agg.t().dot(&d_cur));
        b_grads.push(d_cur.sum_axis(Axis(0)));
        let d_agg = d_cur.dot(&model.weights[l].t());
        if let Some(gm) = mask_grad.as_mut() {
            prop.accumulate_mask_grad(&d_agg.view(), &trace.h[l].view(), gm);
        }
        if l > 0 {
            let mut d_h = prop.apply_masked_transpose(mult_ref, &d_agg.view());
            // Rectifier gate of the previous layer.
            d_h.zip_mut_with(&trace.pre[l - 1], |g, &p| {
                if p <= 0.0 {
                    *g = 0.0;
                }
            });
            d_cur = d_h;
        } else if want_input {
            d_input = Some(prop.apply_masked_transpose(mult_ref, &d_agg.view()));
        }
    }
    w_grads.reverse();
    b_grads.reverse();
    Ok((loss, Gradients { weights: w_grads, biases: b_grads, mask: mask_grad }, d_input))
}

/// Fraction of `nodes` whose argmax matches the label.
pub fn accuracy(probs: &Array2<f64>, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return f64::NAN;
    }
    let hits = nodes
        .iter()
        .filter(|&&v| {
            let row = probs.row(v);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best == labels[v]
        })
        .count();
    hits as f64 / nodes.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Coupled L2 decay, applied to weight matrices only.
    pub weight_decay: f64,
    /// Epochs without validation improvement before stopping; `None` trains
    /// the full budget.
    pub patience: Option<usize>,
    /// The run seed; initialization derives from it, the loop itself is
    /// deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.01, epochs: 1000, weight_decay: 5e-4, patience: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

struct Adam {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &GcnModel) -> Adam {
        Adam {
            m_w: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut GcnModel, grads: &Gradients, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t);
        let bc2 = 1.0 - B2.powi(self.t);
        for l in 0..model.weights.len() {
            adam_update(&mut model.weights[l], &grads.weights[l], &mut self.m_w[l], &mut self.v_w[l], lr, bc1, bc2, B1, B2, EPS);
        }
        for l in 0..model.biases.len() {
            let g = &grads.biases[l];
            let m = &mut self.m_b[l];
            let v = &mut self.v_b[l];
            for i in 0..g.len() {
                m[i] = B1 * m[i] + (1.0 - B1) * g[i];
                v[i] = B2 * v[i] + (1.0 - B2) * g[i] * g[i];
                model.biases[l][i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + EPS);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    w: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
    b1: f64,
    b2: f64,
    eps: f64,
) {
    ndarray::Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
    });
}

/// Full-batch training with moment-based updates and best-snapshot selection.
///
/// The snapshot criterion is strictly-improved validation accuracy (ties keep
/// the earlier state, and the initialization itself is the first candidate);
/// with no validation nodes it falls back to strictly-decreased training
/// loss. Patience counts epochs since the last improvement.
pub fn train(
    mut model: GcnModel,
    ds: &Dataset,
    prop: &PropagationMatrix,
    cfg: &TrainConfig,
) -> Result<(GcnModel, Vec<EpochStats>), TrainError> {
    if !(cfg.lr > 0.0) {
        return Err(TrainError::BadLearningRate(cfg.lr));
    }
    let x = design_matrix(&ds.graph);
    let xv = x.view();
    let labels = ds.graph.labels();
    let train_nodes = ds.split.train_nodes();
    let val_nodes = ds.split.val_nodes();

    let eval_state = |model: &GcnModel, epoch: usize| -> Result<EpochStats, TrainError> {
        let probs = gcn_forward(model, prop, &xv, None)
            .map_err(|_| TrainError::NonFinite { epoch })?;
        let tl = mean_xent(&probs, labels, &train_nodes);
        let stats = EpochStats {
            epoch,
            train_loss: tl,
            train_acc: accuracy(&probs, labels, &train_nodes),
            val_loss: if val_nodes.is_empty() { None } else { Some(mean_xent(&probs, labels, &val_nodes)) },
            val_acc: if val_nodes.is_empty() { None } else { Some(accuracy(&probs, labels, &val_nodes)) },
        };
        if !stats.train_loss.is_finite() {
            return Err(TrainError::NonFinite { epoch });
        }
        Ok(stats)
    };

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let initial = eval_state(&model, 0)?;
    // Higher validation accuracy wins; without validation nodes, lower
    // training loss does.
    let mut best_score = score_of(&initial, val_nodes.is_empty());
    let mut best = model.clone();
    history.push(initial);

    let mut optimizer = Adam::new(&model);
    let mut since_improvement = 0usize;
    for epoch in 1..=cfg.epochs {
        let (_, mut grads) =
            masked_loss_and_grads(&model, prop, &xv, labels, &train_nodes, None)
                .map_err(|_| TrainError::NonFinite { epoch })?;
        if cfg.weight_decay != 0.0 {
            for (g, w) in grads.weights.iter_mut().zip(&model.weights) {
                g.scaled_add(cfg.weight_decay, w);
            }
        }
        optimizer.step(&mut model, &grads, cfg.lr);

        let stats = eval_state(&model, epoch)?;
        let score = score_of(&stats, val_nodes.is_empty());
        if score > best_score {
            best_score = score;
            best = model.clone();
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        history.push(stats);
        if let Some(p) = cfg.patience {
            if since_improvement >= p {
                break;
            }
        }
    }
    Ok((best, history))
}

fn score_of(stats: &EpochStats, no_val: bool) -> f64 {
    if no_val {
        -stats.train_loss
    } else {
        stats.val_acc.expect("validation metrics present")
    }
}

fn mean_xent(probs: &Array2<f64>, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return f64::NAN;
    }
    let total: f64 = nodes
        .iter()
        .map(|&v| -probs[[v, labels[v]]].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / nodes.len() as f64
}

const CHECKPOINT_MAGIC: &[u8; 7] = b"DGXGCN1";
const CHECKPOINT_VERSION: u8 = 1;

/// Writes magic, version, config hash, layer shapes, then row-major weights
/// and biases as little-endian doubles.
pub fn save_checkpoint(
    model: &GcnModel,
    config_hash: &str,
    path: &Path,
) -> Result<(), CheckpointError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.push(CHECKPOINT_VERSION);
    let hash = config_hash.as_bytes();
    buf.extend_from_slice(&(hash.len() as u32).to_le_bytes());
    buf.extend_from_slice(hash);
    let cfg = &model.config;
    for v in [cfg.input_dim, cfg.hidden, cfg.layers, cfg.num_classes] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for l in 0..cfg.layers {
        for &x in model.weights[l].iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        for &x in model.biases[l].iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a checkpoint back, returning the model and the config hash it was
/// written under.
pub fn load_checkpoint(path: &Path) -> Result<(GcnModel, String), CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, len: usize| -> Result<&[u8], CheckpointError> {
        let end = *pos + len;
        let slice = bytes
            .get(*pos..end)
            .ok_or_else(|| CheckpointError::Malformed("file too short".into()))?;
        *pos = end;
        Ok(slice)
    };
    if take(&mut pos, 7)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = take(&mut pos, 1)?[0];
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let hash_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    if hash_len > 1 << 16 {
        return Err(CheckpointError::Malformed("hash length implausible".into()));
    }
    let hash = String::from_utf8(take(&mut pos, hash_len)?.to_vec())
        .map_err(|_| CheckpointError::Malformed("hash is not utf-8".into()))?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    }
    let config = ModelConfig { input_dim: dims[0], hidden: dims[1], layers: dims[2], num_classes: dims[3] };
    if config.layers == 0 || config.layers > 64 {
        return Err(CheckpointError::Malformed(format!("{} layers", config.layers)));
    }
    let mut weights = Vec::with_capacity(config.layers);
    let mut biases = Vec::with_capacity(config.layers);
    for (rows, cols) in config.dims() {
        let mut w = Array2::zeros((rows, cols));
        for i in 0..rows {
            for j in 0..cols {
                w[[i, j]] = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
            }
        }
        let mut b = Array1::zeros(cols);
        for j in 0..cols {
            b[j] = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        }
        weights.push(w);
        biases.push(b);
    }
    if pos != bytes.len() {
        return Err(CheckpointError::Malformed("trailing bytes".into()));
    }
    Ok((GcnModel { config, weights, biases }, hash))
}
