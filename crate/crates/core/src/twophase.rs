//! Fingerprint MLPs and the pretrain / finetune protocol.
//!
//! Phase 1 fits an ignitability classifier on every synthetic record and
//! t_ig / pHRR regressors on the ignitable ones. Phase 2 restarts from the
//! phase-1 regressors on each of several random splits of the experimental
//! set; the single-phase baseline runs the same protocol from a random
//! initialization.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::chemio::{fingerprint, parse_smiles, DEFAULT_N_BITS, DEFAULT_RADIUS};
use crate::math::{exp, ln, sqrt, tanh, KahanSum};
use crate::polygen::PolymerRecord;
use crate::rng::{derive_seed, rng_from_seed, Rng};

pub const PROB_CLIP: f64 = 1e-7;
/// Fewest ignitable records accepted for regressor pretraining.
pub const MIN_IGNITABLE: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("relative error undefined: target {index} is zero")]
    ZeroTarget { index: usize },
    #[error("training diverged in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cannot featurize {smiles:?}: {message}")]
    Feature { smiles: String, message: String },
    #[error("invalid config: {0}")]
    Config(String),
}

fn shape(msg: impl Into<String>) -> TrainError {
    TrainError::ShapeMismatch(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation value `a`.
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Identity,
    Sigmoid,
}

pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        exp(z) / (1.0 + exp(z))
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Fully connected network with one scalar output.
///
/// `weights[l][i * out + o]` connects input `i` to output `o` of layer `l`.
/// Regression heads apply a fixed affine map `out_scale * z + out_shift`
/// that is set from training targets and never trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
    pub head: Head,
    pub out_scale: f64,
    pub out_shift: f64,
}

impl MlpModel {
    /// Glorot-uniform weights times `init_scale`, zero biases.
    pub fn new(
        sizes: &[usize],
        activation: Activation,
        head: Head,
        init_scale: f64,
        rng: &mut Rng,
    ) -> Result<Self, TrainError> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
            return Err(shape(alloc::format!("bad layer sizes {sizes:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (i, o) = (w[0], w[1]);
            let lim = init_scale * sqrt(6.0 / (i + o) as f64);
            weights.push(
                (0..i * o)
                    .map(|_| rng.gen_range(-1.0..=1.0) * lim)
                    .collect(),
            );
            biases.push(alloc::vec![0.0; o]);
        }
        Ok(MlpModel {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activation,
            head,
            out_scale: 1.0,
            out_shift: 0.0,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Centers and scales regression outputs on `ys`.
    pub fn fit_output_affine(&mut self, ys: &[f64]) {
        if self.head != Head::Identity || ys.is_empty() {
            return;
        }
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        let v = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / ys.len() as f64;
        self.out_shift = m;
        self.out_scale = if v > 0.0 { sqrt(v) } else { 1.0 };
    }

    /// Parameters in layer order, weights before biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params_flat(&mut self, p: &[f64]) -> Result<(), TrainError> {
        if p.len() != self.n_params() {
            return Err(shape(alloc::format!(
                "{} parameters for a {}-parameter model",
                p.len(),
                self.n_params()
            )));
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p[k..k + nw]);
            k += nw;
            b.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), TrainError> {
        if x.len() != self.n_inputs() {
            return Err(shape(alloc::format!(
                "input has {} features, model expects {}",
                x.len(),
                self.n_inputs()
            )));
        }
        Ok(())
    }

    /// Layer activations; the last entry is the raw scalar output `z`.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.weights.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
            let out = self.sizes[l + 1];
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &w[i * out..(i + 1) * out];
                for (zo, &wo) in z.iter_mut().zip(row) {
                    *zo += wo * xi;
                }
            }
            if l + 1 < n_layers {
                for v in z.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Network output before the head.
    pub fn logit(&self, x: &[f64]) -> Result<f64, TrainError> {
        self.check_input(x)?;
        Ok(self.forward_all(x).last().unwrap()[0])
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, TrainError> {
        let z = self.logit(x)?;
        Ok(self.apply_head(z))
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>, TrainError> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    fn apply_head(&self, z: f64) -> f64 {
        match self.head {
            Head::Identity => self.out_scale * z + self.out_shift,
            Head::Sigmoid => sigmoid(z),
        }
    }
}

/// Mean of squared per-sample relative errors.
pub fn relative_mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, TrainError> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(shape("relative_mse needs equal, nonzero lengths"));
    }
    let mut s = KahanSum::default();
    for (i, (&y, &p)) in y_true.iter().zip(y_pred).enumerate() {
        if y == 0.0 {
            return Err(TrainError::ZeroTarget { index: i });
        }
        let r = (p - y) / y;
        s.add(r * r);
    }
    Ok(s.value() / y_true.len() as f64)
}

/// `sum (p - y)^2 / sum y^2`.
pub fn relative_mse_sum(y_true: &[f64], y_pred: &[f64]) -> Result<f64, TrainError> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(shape("relative_mse_sum needs equal, nonzero lengths"));
    }
    let den: f64 = y_true.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Err(TrainError::ZeroTarget { index: 0 });
    }
    Ok(y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (p - y) * (p - y))
        .sum::<f64>()
        / den)
}

/// Binary cross-entropy with probabilities clipped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(labels: &[f64], probs: &[f64]) -> f64 {
    let mut s = KahanSum::default();
    for (&y, &p) in labels.iter().zip(probs) {
        let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        s.add(y * ln(p) + (1.0 - y) * ln(1.0 - p));
    }
    -s.value() / labels.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    RelativeMse,
    /// Sum-normalized relative error.
    RelativeMseSum,
    Bce,
}

pub fn loss_value(
    model: &MlpModel,
    xs: &[Vec<f64>],
    ys: &[f64],
    loss: Loss,
) -> Result<f64, TrainError> {
    let pred = model.predict_many(xs)?;
    match loss {
        Loss::RelativeMse => relative_mse(ys, &pred),
        Loss::RelativeMseSum => relative_mse_sum(ys, &pred),
        Loss::Bce => Ok(bce_loss(ys, &pred)),
    }
}

/// Loss over the rows `idx` and its gradient in `params_flat` layout.
fn batch_gradient(
    model: &MlpModel,
    xs: &[Vec<f64>],
    ys: &[f64],
    idx: &[usize],
    loss: Loss,
    grad: &mut [Vec<f64>],
    grad_b: &mut [Vec<f64>],
) -> Result<f64, TrainError> {
    for g in grad.iter_mut().chain(grad_b.iter_mut()) {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let n = idx.len() as f64;
    let sum_den = if loss == Loss::RelativeMseSum {
        let d: f64 = idx.iter().map(|&i| ys[i] * ys[i]).sum();
        if d == 0.0 {
            return Err(TrainError::ZeroTarget { index: idx[0] });
        }
        d
    } else {
        0.0
    };
    let n_layers = model.weights.len();
    let mut total = KahanSum::default();
    for &s in idx {
        let x = &xs[s];
        let y = ys[s];
        let acts = model.forward_all(x);
        let z = acts[n_layers - 1][0];
        // dL/dz for this sample
        let dz = match loss {
            Loss::RelativeMse => {
                if y == 0.0 {
                    return Err(TrainError::ZeroTarget { index: s });
                }
                let p = model.out_scale * z + model.out_shift;
                let r = (p - y) / y;
                total.add(r * r / n);
                2.0 * r / y * model.out_scale / n
            }
            Loss::RelativeMseSum => {
                let p = model.out_scale * z + model.out_shift;
                total.add((p - y) * (p - y) / sum_den);
                2.0 * (p - y) / sum_den * model.out_scale
            }
            Loss::Bce => {
                let p = sigmoid(z);
                let pc = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                total.add(-(y * ln(pc) + (1.0 - y) * ln(1.0 - pc)) / n);
                if pc != p {
                    0.0
                } else {
                    (p - y) / n
                }
            }
        };
        let mut delta = alloc::vec![dz];
        for l in (0..n_layers).rev() {
            let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
            let out = model.sizes[l + 1];
            for (gb, &d) in grad_b[l].iter_mut().zip(&delta) {
                *gb += d;
            }
            let w = &model.weights[l];
            let g = &mut grad[l];
            let mut prev = if l > 0 {
                alloc::vec![0.0; input.len()]
            } else {
                Vec::new()
            };
            for (i, &xi) in input.iter().enumerate() {
                let row = i * out..(i + 1) * out;
                if xi != 0.0 {
                    for (gw, &d) in g[row.clone()].iter_mut().zip(&delta) {
                        *gw += d * xi;
                    }
                }
                if l > 0 {
                    let s: f64 = w[row].iter().zip(&delta).map(|(a, b)| a * b).sum();
                    prev[i] = s * model.activation.slope(xi);
                }
            }
            delta = prev;
        }
    }
    Ok(total.value())
}

/// Loss over all rows and its gradient, flattened like `params_flat`.
pub fn loss_and_gradient(
    model: &MlpModel,
    xs: &[Vec<f64>],
    ys: &[f64],
    loss: Loss,
) -> Result<(f64, Vec<f64>), TrainError> {
    check_data(model, xs, ys)?;
    let (mut g, mut gb) = zero_like(model);
    let idx: Vec<usize> = (0..xs.len()).collect();
    let l = batch_gradient(model, xs, ys, &idx, loss, &mut g, &mut gb)?;
    let mut flat = Vec::with_capacity(model.n_params());
    for (w, b) in g.iter().zip(&gb) {
        flat.extend_from_slice(w);
        flat.extend_from_slice(b);
    }
    Ok((l, flat))
}

fn zero_like(model: &MlpModel) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (
        model
            .weights
            .iter()
            .map(|w| alloc::vec![0.0; w.len()])
            .collect(),
        model
            .biases
            .iter()
            .map(|b| alloc::vec![0.0; b.len()])
            .collect(),
    )
}

fn check_data(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64]) -> Result<(), TrainError> {
    if xs.len() != ys.len() {
        return Err(shape(alloc::format!(
            "{} inputs, {} targets",
            xs.len(),
            ys.len()
        )));
    }
    for x in xs {
        model.check_input(x)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub n_splits: usize,
    /// Fraction of each split held out for testing.
    pub split_fraction: f64,
    pub weight_init_scale: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Rescale each batch gradient to at most this norm.
    pub max_grad_norm: Option<f64>,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            n_splits: 5,
            split_fraction: 0.2,
            weight_init_scale: 1.0,
            hidden: alloc::vec![256, 64],
            activation: Activation::Tanh,
            max_grad_norm: None,
            loss: Loss::RelativeMse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.n_splits == 0 {
            return bad("n_splits must be at least 1");
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad("split_fraction must lie in (0, 1)");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if self.max_grad_norm.is_some_and(|g| !(g > 0.0)) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }

    pub fn layer_sizes(&self, n_inputs: usize) -> Vec<usize> {
        let mut s = alloc::vec![n_inputs];
        s.extend_from_slice(&self.hidden);
        s.push(1);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Selection loss per epoch (validation set if given, else full train set).
    pub selection_loss: Vec<f64>,
    /// Epoch of the returned parameters; 0 is the initial model.
    pub best_epoch: usize,
    pub best_loss: f64,
}

/// Mini-batch gradient descent with momentum from `init`, returning the
/// parameters with the lowest selection loss seen (the initial model
/// included).
pub fn train(
    init: &MlpModel,
    xs: &[Vec<f64>],
    ys: &[f64],
    validation: Option<(&[Vec<f64>], &[f64])>,
    cfg: &TrainConfig,
    loss: Loss,
) -> Result<(MlpModel, TrainReport), TrainError> {
    cfg.validate()?;
    check_data(init, xs, ys)?;
    if xs.is_empty() {
        return Err(TrainError::InsufficientData("empty training set".into()));
    }
    if let Some((vx, vy)) = validation {
        check_data(init, vx, vy)?;
    }
    let select = |m: &MlpModel| match validation {
        Some((vx, vy)) if !vx.is_empty() => loss_value(m, vx, vy, loss),
        _ => loss_value(m, xs, ys, loss),
    };
    let mut model = init.clone();
    let mut best = init.clone();
    let mut best_loss = select(init)?;
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(cfg.epochs),
        selection_loss: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_loss,
    };
    if cfg.epochs == 0 {
        return Ok((best, report));
    }
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x74_7261_696e));
    let (mut gw, mut gb) = zero_like(&model);
    let (mut vw, mut vb) = zero_like(&model);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = KahanSum::default();
        let mut n_batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            let l = batch_gradient(&model, xs, ys, batch, loss, &mut gw, &mut gb)?;
            if !l.is_finite() {
                return Err(TrainError::Divergence { epoch });
            }
            epoch_loss.add(l);
            n_batches += 1;
            let mut factor = 1.0;
            if let Some(max) = cfg.max_grad_norm {
                let norm = sqrt(gw.iter().chain(&gb).flatten().map(|g| g * g).sum());
                if norm > max {
                    factor = max / norm;
                }
            }
            for (params, (grads, vel)) in model
                .weights
                .iter_mut()
                .chain(model.biases.iter_mut())
                .zip(gw.iter().chain(&gb).zip(vw.iter_mut().chain(vb.iter_mut())))
            {
                for ((p, &g), v) in params.iter_mut().zip(grads).zip(vel.iter_mut()) {
                    *v = cfg.momentum * *v - cfg.learning_rate * factor * g;
                    *p += *v;
                }
            }
        }
        report
            .train_loss
            .push(epoch_loss.value() / n_batches as f64);
        let sel = select(&model)?;
        if !sel.is_finite() {
            return Err(TrainError::Divergence { epoch });
        }
        report.selection_loss.push(sel);
        if sel < best_loss {
            best_loss = sel;
            best = model.clone();
            report.best_epoch = epoch;
            report.best_loss = sel;
        }
    }
    Ok((best, report))
}

/// Log-count fingerprint features of a SMILES string.
pub fn featurize(smiles: &str, n_bits: usize, radius: u32) -> Result<Vec<f64>, TrainError> {
    let g = parse_smiles(smiles).map_err(|e| TrainError::Feature {
        smiles: smiles.into(),
        message: alloc::format!("{e}"),
    })?;
    Ok(fingerprint(&g, radius, n_bits).log_features())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoPhaseConfig {
    pub phase1: TrainConfig,
    pub phase2: TrainConfig,
    pub fingerprint_bits: usize,
    pub fingerprint_radius: u32,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        TwoPhaseConfig {
            phase1: TrainConfig::default(),
            phase2: TrainConfig {
                epochs: 500,
                ..TrainConfig::default()
            },
            fingerprint_bits: DEFAULT_N_BITS,
            fingerprint_radius: DEFAULT_RADIUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    TIg,
    Phrr,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::TIg => "t_ig",
            Target::Phrr => "phrr",
        }
    }
}

/// One row of the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub target: String,
    pub phase: String,
    pub split: usize,
    pub train_rel_mse: f64,
    pub test_rel_mse: f64,
}

/// Seeded train/test index split; the two parts are disjoint and cover `0..n`.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let n_test =
        ((n as f64 * test_fraction) as usize).clamp(usize::from(n > 1), n.saturating_sub(1));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn featurize_records(
    records: &[PolymerRecord],
    cfg: &TwoPhaseConfig,
) -> Result<Vec<Vec<f64>>, TrainError> {
    let one = |r: &PolymerRecord| {
        featurize(
            &r.canonical_smiles,
            cfg.fingerprint_bits,
            cfg.fingerprint_radius,
        )
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        records.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        records.iter().map(one).collect()
    }
}

fn target_values(records: &[PolymerRecord], target: Target) -> Result<Vec<f64>, TrainError> {
    records
        .iter()
        .map(|r| {
            let l = r.labels.ok_or_else(|| {
                TrainError::InsufficientData(alloc::format!("{} has no labels", r.canonical_smiles))
            })?;
            Ok(match target {
                Target::TIg => l.t_ig,
                Target::Phrr => l.phrr,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub n_train: usize,
    pub n_test: usize,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub test_bce: Option<f64>,
}

pub fn accuracy(labels: &[f64], probs: &[f64]) -> f64 {
    let hits = labels
        .iter()
        .zip(probs)
        .filter(|(&y, &p)| (p >= 0.5) == (y >= 0.5))
        .count();
    hits as f64 / labels.len().max(1) as f64
}

/// Ignitability classifier on every labeled record.
pub fn pretrain_classifier(
    records: &[PolymerRecord],
    cfg: &TwoPhaseConfig,
) -> Result<(MlpModel, ClassifierReport), TrainError> {
    let xs = featurize_records(records, cfg)?;
    let ys: Vec<f64> = records
        .iter()
        .map(|r| {
            r.labels
                .map(|l| if l.ignitable { 1.0 } else { 0.0 })
                .ok_or_else(|| {
                    TrainError::InsufficientData(alloc::format!(
                        "{} has no labels",
                        r.canonical_smiles
                    ))
                })
        })
        .collect::<Result<_, _>>()?;
    fit_classifier(&xs, &ys, &cfg.phase1)
}

pub fn fit_classifier(
    xs: &[Vec<f64>],
    ys: &[f64],
    tc: &TrainConfig,
) -> Result<(MlpModel, ClassifierReport), TrainError> {
    if xs.len() < 2 {
        return Err(TrainError::InsufficientData(
            "classifier needs at least 2 records".into(),
        ));
    }
    let n_in = xs[0].len();
    let (train_idx, test_idx) = split_indices(xs.len(), tc.split_fraction, derive_seed(tc.seed, 1));
    let (tx, ty) = (pick(xs, &train_idx), pick(ys, &train_idx));
    let (vx, vy) = (pick(xs, &test_idx), pick(ys, &test_idx));
    let mut rng = rng_from_seed(derive_seed(tc.seed, 2));
    let init = MlpModel::new(
        &tc.layer_sizes(n_in),
        tc.activation,
        Head::Sigmoid,
        tc.weight_init_scale,
        &mut rng,
    )?;
    let (model, _) = train(&init, &tx, &ty, Some((&vx, &vy)), tc, Loss::Bce)?;
    let train_accuracy = accuracy(&ty, &model.predict_many(&tx)?);
    let (test_accuracy, test_bce) = if vx.is_empty() {
        (None, None)
    } else {
        let p = model.predict_many(&vx)?;
        (Some(accuracy(&vy, &p)), Some(bce_loss(&vy, &p)))
    };
    Ok((
        model,
        ClassifierReport {
            n_train: tx.len(),
            n_test: vx.len(),
            train_accuracy,
            test_accuracy,
            test_bce,
        },
    ))
}

fn fit_regressor(
    xs: &[Vec<f64>],
    ys: &[f64],
    train_idx: &[usize],
    test_idx: &[usize],
    init: Option<&MlpModel>,
    tc: &TrainConfig,
    init_seed: u64,
) -> Result<(MlpModel, f64, f64), TrainError> {
    let (tx, ty) = (pick(xs, train_idx), pick(ys, train_idx));
    let (vx, vy) = (pick(xs, test_idx), pick(ys, test_idx));
    let start = match init {
        Some(m) => m.clone(),
        None => {
            let mut rng = rng_from_seed(init_seed);
            let mut m = MlpModel::new(
                &tc.layer_sizes(xs[0].len()),
                tc.activation,
                Head::Identity,
                tc.weight_init_scale,
                &mut rng,
            )?;
            m.fit_output_affine(&ty);
            m
        }
    };
    let tcfg = TrainConfig {
        seed: init_seed,
        ..tc.clone()
    };
    let (model, _) = train(&start, &tx, &ty, Some((&vx, &vy)), &tcfg, tc.loss)?;
    let train_err = relative_mse(&ty, &model.predict_many(&tx)?)?;
    let test_err = if vx.is_empty() {
        f64::NAN
    } else {
        relative_mse(&vy, &model.predict_many(&vx)?)?
    };
    Ok((model, train_err, test_err))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Models {
    pub classifier: MlpModel,
    pub t_ig: MlpModel,
    pub phrr: MlpModel,
    pub classifier_report: ClassifierReport,
    pub n_records: usize,
    pub n_ignitable: usize,
    pub metrics: Vec<MetricRow>,
}

/// t_ig and pHRR regressors on the ignitable records.
pub fn pretrain_regressors(
    records: &[PolymerRecord],
    cfg: &TwoPhaseConfig,
) -> Result<(MlpModel, MlpModel, Vec<MetricRow>, usize), TrainError> {
    let ign: Vec<PolymerRecord> = records
        .iter()
        .filter(|r| r.labels.is_some_and(|l| l.ignitable))
        .cloned()
        .collect();
    if ign.len() < MIN_IGNITABLE {
        return Err(TrainError::InsufficientData(alloc::format!(
            "{} ignitable records, need at least {MIN_IGNITABLE}",
            ign.len()
        )));
    }
    let tc = &cfg.phase1;
    let xs = featurize_records(&ign, cfg)?;
    let (train_idx, test_idx) =
        split_indices(ign.len(), tc.split_fraction, derive_seed(tc.seed, 3));
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for (k, target) in [Target::TIg, Target::Phrr].into_iter().enumerate() {
        let ys = target_values(&ign, target)?;
        let (m, tr, te) = fit_regressor(
            &xs,
            &ys,
            &train_idx,
            &test_idx,
            None,
            tc,
            derive_seed(tc.seed, 10 + k as u64),
        )?;
        rows.push(MetricRow {
            target: target.name().into(),
            phase: "pretrain".into(),
            split: 0,
            train_rel_mse: tr,
            test_rel_mse: te,
        });
        out.push(m);
    }
    let phrr = out.pop().unwrap();
    let t_ig = out.pop().unwrap();
    Ok((t_ig, phrr, rows, ign.len()))
}

pub fn pretrain_phase1(
    records: &[PolymerRecord],
    cfg: &TwoPhaseConfig,
) -> Result<Phase1Models, TrainError> {
    let (classifier, classifier_report) = pretrain_classifier(records, cfg)?;
    let (t_ig, phrr, metrics, n_ignitable) = pretrain_regressors(records, cfg)?;
    Ok(Phase1Models {
        classifier,
        t_ig,
        phrr,
        classifier_report,
        n_records: records.len(),
        n_ignitable,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub target: Target,
    pub phase: String,
    pub rows: Vec<MetricRow>,
    pub mean_train: f64,
    pub mean_test: f64,
    /// Split with the lowest test error.
    pub best_split: usize,
    pub best_model: MlpModel,
}

/// Runs the split protocol for one target. `init = None` is the baseline.
pub fn run_splits(
    records: &[PolymerRecord],
    target: Target,
    init: Option<&MlpModel>,
    cfg: &TwoPhaseConfig,
) -> Result<SplitOutcome, TrainError> {
    let tc = &cfg.phase2;
    tc.validate()?;
    let n = records.len();
    let n_test = (n as f64 * tc.split_fraction) as usize;
    if n_test < 2 || n - n_test < 2 {
        return Err(TrainError::InsufficientData(alloc::format!(
            "{n} records give fewer than 2 train or test rows per split"
        )));
    }
    let xs = featurize_records(records, cfg)?;
    let ys = target_values(records, target)?;
    let phase = if init.is_some() {
        "finetune"
    } else {
        "baseline"
    };
    let one = |s: usize| {
        let (train_idx, test_idx) =
            split_indices(n, tc.split_fraction, derive_seed(tc.seed, 100 + s as u64));
        fit_regressor(
            &xs,
            &ys,
            &train_idx,
            &test_idx,
            init,
            tc,
            derive_seed(tc.seed, 200 + s as u64),
        )
    };
    #[cfg(feature = "parallel")]
    let results: Vec<(MlpModel, f64, f64)> = {
        use rayon::prelude::*;
        (0..tc.n_splits)
            .into_par_iter()
            .map(one)
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(MlpModel, f64, f64)> = (0..tc.n_splits).map(one).collect::<Result<_, _>>()?;

    let rows: Vec<MetricRow> = results
        .iter()
        .enumerate()
        .map(|(s, (_, tr, te))| MetricRow {
            target: target.name().into(),
            phase: phase.into(),
            split: s,
            train_rel_mse: *tr,
            test_rel_mse: *te,
        })
        .collect();
    let k = rows.len() as f64;
    let mean_train = rows.iter().map(|r| r.train_rel_mse).sum::<f64>() / k;
    let mean_test = rows.iter().map(|r| r.test_rel_mse).sum::<f64>() / k;
    let best_split = (0..rows.len())
        .min_by(|&a, &b| rows[a].test_rel_mse.total_cmp(&rows[b].test_rel_mse))
        .unwrap();
    let best_model = results.into_iter().nth(best_split).unwrap().0;
    Ok(SplitOutcome {
        target,
        phase: phase.into(),
        rows,
        mean_train,
        mean_test,
        best_split,
        best_model,
    })
}

pub fn finetune_phase2(
    phase1: &Phase1Models,
    experimental: &[PolymerRecord],
    cfg: &TwoPhaseConfig,
) -> Result<[SplitOutcome; 2], TrainError> {
    Ok([
        run_splits(experimental, Target::TIg, Some(&phase1.t_ig), cfg)?,
        run_splits(experimental, Target::Phrr, Some(&phase1.phrr), cfg)?,
    ])
}

pub fn baseline_single_phase(
    experimental: &[PolymerRecord],
    cfg: &TwoPhaseConfig,
) -> Result<[SplitOutcome; 2], TrainError> {
    Ok([
        run_splits(experimental, Target::TIg, None, cfg)?,
        run_splits(experimental, Target::Phrr, None, cfg)?,
    ])
}

/// `(baseline - twophase) / baseline`.
pub fn improvement(baseline: f64, twophase: f64) -> f64 {
    (baseline - twophase) / baseline
}
