//! CART regression trees and bagged random forests.
//!
//! Splits minimize the summed squared error of the two children. Candidate
//! thresholds are midpoints between consecutive distinct sorted feature
//! values; among equal-gain splits the lowest feature index wins, then the
//! lowest threshold. Each tree gets its own RNG stream derived from the
//! forest seed, so fitting trees in parallel gives the same forest.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::math::{ceil, round, KahanSum};
use crate::reference;
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForestError {
    #[error("no training data")]
    EmptyData,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{what}: lengths {a} and {b} differ")]
    LengthMismatch {
        what: &'static str,
        a: usize,
        b: usize,
    },
    #[error("target has zero variance")]
    DegenerateTarget,
    #[error("at least two samples are required")]
    TooFewSamples,
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("schema error: {0}")]
    SchemaError(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Features tried per split; `None` tries all.
    pub mtry: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            mtry: None,
            min_samples_leaf: 1,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` means `ceil(d / 3)`.
    pub mtry: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            mtry: None,
            min_samples_leaf: 2,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// A fitted tree stored as flat node arrays. `feature[i] < 0` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub n_features: usize,
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Mean training target reaching each node.
    pub value: Vec<f64>,
}

impl RegressionTree {
    pub fn node_count(&self) -> usize {
        self.feature.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.feature.iter().filter(|&&f| f < 0).count()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return Ok(self.value[node]);
            }
            node = if x[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    fn push(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }
}

fn validate(x: &[Vec<f64>], y: &[f64]) -> Result<usize, ForestError> {
    if x.is_empty() || y.is_empty() {
        return Err(ForestError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(ForestError::LengthMismatch {
            what: "features/targets",
            a: x.len(),
            b: y.len(),
        });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(ForestError::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ForestError::NonFinite);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ForestError::NonFinite);
    }
    Ok(d)
}

/// Fits one CART tree on all rows of `x`.
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[f64],
    params: &TreeParams,
    rng: &mut Rng,
) -> Result<RegressionTree, ForestError> {
    let d = validate(x, y)?;
    let idx: Vec<usize> = (0..x.len()).collect();
    Ok(grow(x, y, d, idx, params, rng))
}

fn grow(
    x: &[Vec<f64>],
    y: &[f64],
    d: usize,
    root: Vec<usize>,
    params: &TreeParams,
    rng: &mut Rng,
) -> RegressionTree {
    let mut tree = RegressionTree {
        n_features: d,
        feature: Vec::new(),
        threshold: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        value: Vec::new(),
    };
    let min_leaf = params.min_samples_leaf.max(1);
    let mtry = params.mtry.unwrap_or(d).clamp(1, d.max(1));
    // (node, samples, depth)
    let mut stack = alloc::vec![(tree.push(mean(y, &root)), root, 0usize)];
    while let Some((node, samples, depth)) = stack.pop() {
        if samples.len() < 2 * min_leaf || params.max_depth.is_some_and(|m| depth >= m) {
            continue;
        }
        let mut features: Vec<usize> = if mtry >= d {
            (0..d).collect()
        } else {
            sample(rng, d, mtry).into_vec()
        };
        features.sort_unstable();
        let Some((feature, threshold)) = best_split(x, y, &samples, &features, min_leaf) else {
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| x[i][feature] <= threshold);
        let ln = tree.push(mean(y, &l));
        let rn = tree.push(mean(y, &r));
        tree.feature[node] = feature as i32;
        tree.threshold[node] = threshold;
        tree.left[node] = ln as u32;
        tree.right[node] = rn as u32;
        stack.push((rn, r, depth + 1));
        stack.push((ln, l, depth + 1));
    }
    tree
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    let mut s = KahanSum::default();
    for &i in idx {
        s.add(y[i]);
    }
    s.value() / idx.len() as f64
}

/// Best (feature, threshold) by SSE reduction, or `None` if no split with
/// both children of size `>= min_leaf` reduces the error.
fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    samples: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = samples.len();
    let total: f64 = samples.iter().map(|&i| y[i]).sum();
    let mu = total / n as f64;
    let sse_parent: f64 = samples.iter().map(|&i| (y[i] - mu) * (y[i] - mu)).sum();
    if sse_parent <= 0.0 {
        return None;
    }
    // centered sums keep the gain formula well conditioned
    let mut best: Option<(usize, f64)> = None;
    let mut best_gain = 1e-12 * sse_parent;
    let mut order: Vec<usize> = samples.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += y[order[k]] - mu;
            let nl = k + 1;
            let nr = n - nl;
            let (xa, xb) = (x[order[k]][f], x[order[k + 1]][f]);
            if xa == xb || nl < min_leaf || nr < min_leaf {
                continue;
            }
            // SSE reduction = S_l² / n_l + S_r² / n_r with centered sums
            let right_sum = -left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
            if gain > best_gain {
                best_gain = gain;
                let mut t = xa + (xb - xa) / 2.0;
                if t >= xb {
                    t = xa;
                }
                best = Some((f, t));
            }
        }
    }
    best
}

/// Random forest regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub params: ForestParams,
    pub n_features: usize,
    /// Training-target range; predictions never leave it.
    pub y_min: f64,
    pub y_max: f64,
}

pub fn fit_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Forest, ForestError> {
    let d = validate(x, y)?;
    let n = x.len();
    let mtry = params
        .mtry
        .unwrap_or_else(|| ceil(d as f64 / 3.0) as usize)
        .max(1);
    let tree_params = TreeParams {
        mtry: Some(mtry),
        min_samples_leaf: params.min_samples_leaf,
        max_depth: params.max_depth,
    };
    let fit_one = |t: usize| -> RegressionTree {
        let mut rng = rng_from_seed(derive_seed(params.seed, t as u64));
        let idx: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        grow(x, y, d, idx, &tree_params, &mut rng)
    };
    #[cfg(feature = "parallel")]
    let trees: Vec<RegressionTree> = {
        use rayon::prelude::*;
        (0..params.n_trees).into_par_iter().map(fit_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees: Vec<RegressionTree> = (0..params.n_trees).map(fit_one).collect();

    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Forest {
        trees,
        params: *params,
        n_features: d,
        y_min,
        y_max,
    })
}

impl Forest {
    /// Mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64, ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        if self.trees.is_empty() {
            return Err(ForestError::EmptyData);
        }
        let mut s = KahanSum::default();
        for t in &self.trees {
            s.add(t.predict(x)?);
        }
        Ok((s.value() / self.trees.len() as f64).clamp(self.y_min, self.y_max))
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>, ForestError> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

pub fn predict(forest: &Forest, x: &[f64]) -> Result<f64, ForestError> {
    forest.predict(x)
}

/// Coefficient of determination `1 - SSE/SST`.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64, ForestError> {
    if y_true.len() != y_pred.len() {
        return Err(ForestError::LengthMismatch {
            what: "r2_score",
            a: y_true.len(),
            b: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(ForestError::TooFewSamples);
    }
    let m = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|v| (v - m) * (v - m)).sum();
    if sst <= 0.0 {
        return Err(ForestError::DegenerateTarget);
    }
    let sse: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(1.0 - sse / sst)
}

/// One row of the pyrolysis kinetics dataset (J/(g·K), kJ/g, K, K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticsRow {
    pub smiles: String,
    pub eta_c: f64,
    pub h_c: f64,
    #[serde(rename = "dT")]
    pub d_t: f64,
    #[serde(rename = "T_p")]
    pub t_p: f64,
}

/// A value outside the published range of its dataset column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeWarning {
    pub row: usize,
    pub field: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn kinetics_range_warnings(rows: &[KineticsRow]) -> Vec<RangeWarning> {
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        for (range, v) in [
            (&reference::ETA_C, r.eta_c),
            (&reference::H_C, r.h_c),
            (&reference::D_T, r.d_t),
            (&reference::T_P, r.t_p),
        ] {
            if !range.contains(v) {
                out.push(RangeWarning {
                    row: i,
                    field: range.name.into(),
                    value: v,
                    lo: range.lo,
                    hi: range.hi,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub n_train: usize,
    pub n_test: usize,
    pub dt_train_r2: f64,
    pub dt_test_r2: Option<f64>,
    pub tp_train_r2: f64,
    pub tp_test_r2: Option<f64>,
}

/// The two kinetics surrogates: `(η_c, h_c) → dT` and `(η_c, h_c, dT) → T_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogates {
    pub dt_model: Forest,
    pub tp_model: Forest,
    pub report: SurrogateReport,
    pub warnings: Vec<RangeWarning>,
}

impl Surrogates {
    pub fn predict_dt(&self, eta_c: f64, h_c: f64) -> Result<f64, ForestError> {
        self.dt_model.predict(&[eta_c, h_c])
    }

    pub fn predict_tp(&self, eta_c: f64, h_c: f64, d_t: f64) -> Result<f64, ForestError> {
        self.tp_model.predict(&[eta_c, h_c, d_t])
    }
}

/// Fits both surrogates on a seeded train/test split of `rows`.
/// `test_fraction = 0` trains on everything and reports no test R².
pub fn fit_surrogates(
    rows: &[KineticsRow],
    params: &ForestParams,
    test_fraction: f64,
) -> Result<Surrogates, ForestError> {
    if rows.is_empty() {
        return Err(ForestError::EmptyData);
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(ForestError::SchemaError(alloc::format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let warnings = kinetics_range_warnings(rows);
    for w in &warnings {
        log::warn!(
            "kinetics row {} has {} = {} outside [{}, {}]",
            w.row,
            w.field,
            w.value,
            w.lo,
            w.hi
        );
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = rng_from_seed(derive_seed(params.seed, u64::MAX));
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let n_test = round(rows.len() as f64 * test_fraction) as usize;
    let (test_idx, train_idx) = order.split_at(n_test);

    let dt_x = |i: &usize| alloc::vec![rows[*i].eta_c, rows[*i].h_c];
    let tp_x = |i: &usize| alloc::vec![rows[*i].eta_c, rows[*i].h_c, rows[*i].d_t];
    let x_dt: Vec<Vec<f64>> = train_idx.iter().map(dt_x).collect();
    let x_tp: Vec<Vec<f64>> = train_idx.iter().map(tp_x).collect();
    let y_dt: Vec<f64> = train_idx.iter().map(|&i| rows[i].d_t).collect();
    let y_tp: Vec<f64> = train_idx.iter().map(|&i| rows[i].t_p).collect();

    let dt_model = fit_forest(&x_dt, &y_dt, params)?;
    let tp_params = ForestParams {
        seed: derive_seed(params.seed, 1 << 32),
        ..*params
    };
    let tp_model = fit_forest(&x_tp, &y_tp, &tp_params)?;

    let score = |m: &Forest, xs: &[Vec<f64>], ys: &[f64]| -> Result<f64, ForestError> {
        r2_score(ys, &m.predict_many(xs)?)
    };
    let dt_train_r2 = score(&dt_model, &x_dt, &y_dt)?;
    let tp_train_r2 = score(&tp_model, &x_tp, &y_tp)?;
    let (dt_test_r2, tp_test_r2) = if n_test >= 2 {
        let xt_dt: Vec<Vec<f64>> = test_idx.iter().map(dt_x).collect();
        let xt_tp: Vec<Vec<f64>> = test_idx.iter().map(tp_x).collect();
        let yt_dt: Vec<f64> = test_idx.iter().map(|&i| rows[i].d_t).collect();
        let yt_tp: Vec<f64> = test_idx.iter().map(|&i| rows[i].t_p).collect();
        (
            score(&dt_model, &xt_dt, &yt_dt).ok(),
            score(&tp_model, &xt_tp, &yt_tp).ok(),
        )
    } else {
        (None, None)
    };
    Ok(Surrogates {
        dt_model,
        tp_model,
        report: SurrogateReport {
            n_train: train_idx.len(),
            n_test,
            dt_train_r2,
            dt_test_r2,
            tp_train_r2,
            tp_test_r2,
        },
        warnings,
    })
}
