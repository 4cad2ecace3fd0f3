//! Probabilistic collocation over independent Gaussian / log-normal inputs.
//!
//! Grids live in standard-normal space. Moments are weighted sums of model
//! evaluations at the grid nodes, which equals integrating the Lagrange
//! interpolant through those nodes against the Gaussian density.
//!
//! The Smolyak construction uses Gauss-Hermite rules with `2l + 1` points at
//! level `l`. These are only weakly nested (they share the origin), so nodes
//! reached from several tensor terms are merged by exact coordinate match.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{abs, exp, ln, sqrt, KahanSum};
use crate::polygen::PolymerRecord;
use crate::rompyro::{simulate_cone, MaterialInput, SimConfig};

pub const MAX_GH_POINTS: usize = 50;
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UqError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("grid would have {nodes} nodes, budget is {budget}")]
    SizeOverflow { nodes: u128, budget: usize },
    #[error("expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model failed at node {node}: {message}")]
    ModelFailure { node: usize, message: String },
}

/// Probabilists' Gauss-Hermite rule with `n` points, weights normalized to 1.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>), UqError> {
    if !(1..=MAX_GH_POINTS).contains(&n) {
        return Err(UqError::DomainError(alloc::format!(
            "rule size {n} outside 1..={MAX_GH_POINTS}"
        )));
    }
    // Golub-Welsch: eigenvalues of the Jacobi matrix of He_k.
    let mut d = alloc::vec![0.0; n];
    let mut e: Vec<f64> = (1..=n)
        .map(|k| if k < n { sqrt(k as f64) } else { 0.0 })
        .collect();
    tql_eigenvalues(&mut d, &mut e);
    d.sort_by(f64::total_cmp);

    let mut nodes = d;
    for x in nodes.iter_mut() {
        // Newton polish on He_n
        for _ in 0..3 {
            let (p, p_prev) = hermite_pair(n, *x);
            let dp = n as f64 * p_prev;
            if dp != 0.0 {
                *x -= p / dp;
            }
        }
    }
    // exact symmetry so nodes from different rules merge bitwise
    for i in 0..n / 2 {
        let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            // 1 / sum of squared orthonormal polynomials
            let (mut p0, mut p1) = (0.0, 1.0);
            let mut s = 1.0;
            for k in 1..n {
                let p2 = (x * p1 - sqrt((k - 1) as f64) * p0) / sqrt(k as f64);
                p0 = p1;
                p1 = p2;
                s += p1 * p1;
            }
            1.0 / s
        })
        .collect();
    for i in 0..n / 2 {
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let mut total = KahanSum::default();
    for &w in &weights {
        total.add(w);
    }
    let total = total.value();
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok((nodes, weights))
}

/// (He_n(x), He_{n-1}(x)).
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = x * p1 - k as f64 * p0;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL. `d` holds
/// the diagonal and receives the eigenvalues; `e[i]` couples `i` and `i+1`.
fn tql_eigenvalues(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = abs(d[m]) + abs(d[m + 1]);
                if abs(e[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Tensor,
    Smolyak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollocationGrid {
    pub dim: usize,
    /// Points in standard-normal space.
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kind: GridKind,
    /// Smolyak level, or the largest 1D rule size for tensor grids.
    pub level: usize,
}

impl CollocationGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        let mut s = KahanSum::default();
        for &w in &self.weights {
            s.add(w);
        }
        s.value()
    }
}

/// Full tensor product of `points[i]`-point rules.
pub fn tensor_grid(points: &[usize]) -> Result<CollocationGrid, UqError> {
    tensor_grid_with_budget(points, DEFAULT_NODE_BUDGET)
}

pub fn tensor_grid_with_budget(
    points: &[usize],
    budget: usize,
) -> Result<CollocationGrid, UqError> {
    if points.is_empty() {
        return Err(UqError::DomainError(
            "tensor grid needs at least one dimension".into(),
        ));
    }
    let count = points
        .iter()
        .fold(1u128, |acc, &p| acc.saturating_mul(p as u128));
    if count > budget as u128 {
        return Err(UqError::SizeOverflow {
            nodes: count,
            budget,
        });
    }
    let rules = points
        .iter()
        .map(|&p| gauss_hermite(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut nodes = Vec::with_capacity(count as usize);
    let mut weights = Vec::with_capacity(count as usize);
    let mut idx = alloc::vec![0usize; points.len()];
    loop {
        nodes.push(idx.iter().zip(&rules).map(|(&i, r)| r.0[i]).collect());
        weights.push(idx.iter().zip(&rules).map(|(&i, r)| r.1[i]).product());
        // odometer, last dimension fastest
        let mut k = points.len();
        loop {
            if k == 0 {
                return Ok(CollocationGrid {
                    dim: points.len(),
                    nodes,
                    weights,
                    kind: GridKind::Tensor,
                    level: points.iter().copied().max().unwrap_or(0),
                });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < points[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Points in the 1D rule at Smolyak level `l`.
pub fn smolyak_rule_size(level: usize) -> usize {
    2 * level + 1
}

/// Distinct nodes in `smolyak_grid(d, level)`.
///
/// Rules at different levels share only the origin, so a node is fixed by
/// which coordinates are nonzero and the level each nonzero coordinate came
/// from (`2l` candidates at level `l`). It is present when some retained
/// tensor term contains it.
pub fn smolyak_node_count(d: usize, level: usize) -> u128 {
    let lo = (level + 1).saturating_sub(d);
    // ways[k][s]: weighted count over the first dims with k nonzero coords
    // and level sum s
    let mut ways = alloc::vec![alloc::vec![0u128; level + 1]; d + 1];
    ways[0][0] = 1;
    for _ in 0..d {
        let mut next = alloc::vec![alloc::vec![0u128; level + 1]; d + 1];
        for k in 0..=d {
            for s in 0..=level {
                let w = ways[k][s];
                if w == 0 {
                    continue;
                }
                next[k][s] += w;
                for l in 1..=level - s {
                    if k < d {
                        next[k + 1][s + l] += w * 2 * l as u128;
                    }
                }
            }
        }
        ways = next;
    }
    let mut total = 0u128;
    for (k, row) in ways.iter().enumerate() {
        for (s, &w) in row.iter().enumerate() {
            // zero coordinates can absorb extra level to reach the window
            if k < d || s >= lo {
                total += w;
            }
        }
    }
    total
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn smolyak_grid(d: usize, level: usize) -> Result<CollocationGrid, UqError> {
    smolyak_grid_with_budget(d, level, DEFAULT_NODE_BUDGET)
}

pub fn smolyak_grid_with_budget(
    d: usize,
    level: usize,
    budget: usize,
) -> Result<CollocationGrid, UqError> {
    if d == 0 {
        return Err(UqError::DomainError(
            "Smolyak grid needs at least one dimension".into(),
        ));
    }
    if smolyak_rule_size(level) > MAX_GH_POINTS {
        return Err(UqError::DomainError(alloc::format!(
            "level {level} too high"
        )));
    }
    let count = smolyak_node_count(d, level);
    if count > budget as u128 {
        return Err(UqError::SizeOverflow {
            nodes: count,
            budget,
        });
    }
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..=level)
        .map(|l| gauss_hermite(smolyak_rule_size(l)))
        .collect::<Result<_, _>>()?;
    let lo = (level + 1).saturating_sub(d);

    let mut merged: BTreeMap<Vec<u64>, (Vec<f64>, KahanSum)> = BTreeMap::new();
    let mut multi = alloc::vec![0usize; d];
    loop {
        let s: usize = multi.iter().sum();
        if s >= lo && s <= level {
            let coef = if (level - s) % 2 == 0 { 1.0 } else { -1.0 } * binomial(d - 1, level - s);
            let sizes: Vec<usize> = multi.iter().map(|&l| rules[l].0.len()).collect();
            let mut idx = alloc::vec![0usize; d];
            'tensor: loop {
                let point: Vec<f64> = (0..d).map(|k| rules[multi[k]].0[idx[k]]).collect();
                let w: f64 = (0..d).map(|k| rules[multi[k]].1[idx[k]]).product();
                let key: Vec<u64> = point.iter().map(|x| (x + 0.0).to_bits()).collect();
                merged
                    .entry(key)
                    .or_insert_with(|| (point, KahanSum::default()))
                    .1
                    .add(coef * w);
                let mut k = d;
                loop {
                    if k == 0 {
                        break 'tensor;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < sizes[k] {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        }
        // next multi-index with sum <= level
        let mut k = d;
        loop {
            if k == 0 {
                let mut pairs: Vec<(Vec<f64>, f64)> =
                    merged.into_values().map(|(p, w)| (p, w.value())).collect();
                pairs.sort_by(|a, b| {
                    a.0.iter()
                        .zip(&b.0)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(core::cmp::Ordering::Equal)
                });
                let (nodes, weights) = pairs.into_iter().unzip();
                return Ok(CollocationGrid {
                    dim: d,
                    nodes,
                    weights,
                    kind: GridKind::Smolyak,
                    level,
                });
            }
            k -= 1;
            multi[k] += 1;
            if multi.iter().sum::<usize>() <= level {
                break;
            }
            multi[k] = 0;
        }
    }
}

/// Default grid: tensor of 3-point rules for `d <= 3`, Smolyak level 2 above.
pub fn default_grid(d: usize) -> Result<CollocationGrid, UqError> {
    if d <= 3 {
        tensor_grid(&alloc::vec![3; d])
    } else {
        smolyak_grid(d, 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Normal { mean: f64, std: f64 },
    LogNormal { mean_ln: f64, std_ln: f64 },
}

impl Distribution {
    /// Maps a standard-normal coordinate to physical space.
    pub fn transform(&self, xi: f64) -> f64 {
        match *self {
            Distribution::Normal { mean, std } => mean + std * xi,
            Distribution::LogNormal { mean_ln, std_ln } => exp(mean_ln + std_ln * xi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInput {
    pub name: String,
    pub distribution: Distribution,
}

impl RandomInput {
    pub fn normal(name: &str, mean: f64, std: f64) -> Self {
        RandomInput {
            name: name.into(),
            distribution: Distribution::Normal { mean, std },
        }
    }

    pub fn log_normal(name: &str, mean_ln: f64, std_ln: f64) -> Self {
        RandomInput {
            name: name.into(),
            distribution: Distribution::LogNormal { mean_ln, std_ln },
        }
    }

    /// A zero spread is accepted and pins the input at its mean.
    pub fn validate(&self) -> Result<(), UqError> {
        let (m, s) = match self.distribution {
            Distribution::Normal { mean, std } => (mean, std),
            Distribution::LogNormal { mean_ln, std_ln } => (mean_ln, std_ln),
        };
        if !m.is_finite() || !s.is_finite() || s < 0.0 {
            return Err(UqError::DomainError(alloc::format!(
                "input {} has invalid parameters ({m}, {s})",
                self.name
            )));
        }
        Ok(())
    }
}

pub fn transform_nodes(
    grid: &CollocationGrid,
    inputs: &[RandomInput],
) -> Result<Vec<Vec<f64>>, UqError> {
    if inputs.len() != grid.dim {
        return Err(UqError::DimensionMismatch {
            expected: grid.dim,
            got: inputs.len(),
        });
    }
    for inp in inputs {
        inp.validate()?;
    }
    Ok(grid
        .nodes
        .iter()
        .map(|p| {
            p.iter()
                .zip(inputs)
                .map(|(&xi, inp)| inp.distribution.transform(xi))
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputStats {
    pub mean: f64,
    pub std: f64,
    /// mean - 2 std
    pub lo: f64,
    /// mean + 2 std
    pub hi: f64,
}

/// Where a reference value sits relative to a trust region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustCheck {
    pub inside: bool,
    /// |reference - mean| in units of std.
    pub z: f64,
}

impl OutputStats {
    pub fn from_moments(mean: f64, std: f64) -> Self {
        OutputStats {
            mean,
            std,
            lo: mean - 2.0 * std,
            hi: mean + 2.0 * std,
        }
    }

    pub fn check(&self, reference: f64) -> TrustCheck {
        let diff = abs(reference - self.mean);
        let z = if self.std > 0.0 {
            diff / self.std
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        TrustCheck {
            inside: reference >= self.lo && reference <= self.hi,
            z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqResult {
    pub outputs: Vec<OutputStats>,
    pub node_evaluations: usize,
}

/// Moments of `model` over the grid. The model maps a physical-space point to
/// a fixed-length output vector; evaluations may run in parallel but the sums
/// are always accumulated in node order.
pub fn propagate<F, E>(
    model: F,
    inputs: &[RandomInput],
    grid: &CollocationGrid,
) -> Result<UqResult, UqError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E> + Sync,
    E: core::fmt::Display,
{
    let points = transform_nodes(grid, inputs)?;
    let eval = |(k, p): (usize, &Vec<f64>)| {
        model(p).map_err(|e| UqError::ModelFailure {
            node: k,
            message: alloc::format!("{e}"),
        })
    };
    #[cfg(feature = "parallel")]
    let values: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .enumerate()
            .map(eval)
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<Vec<f64>> = points
        .iter()
        .enumerate()
        .map(eval)
        .collect::<Result<_, _>>()?;

    let n_out = values.first().map_or(0, Vec::len);
    if let Some((k, _)) = values.iter().enumerate().find(|(_, v)| v.len() != n_out) {
        return Err(UqError::ModelFailure {
            node: k,
            message: "output length changed".into(),
        });
    }
    let mut outputs = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let mut m = KahanSum::default();
        for (w, v) in grid.weights.iter().zip(&values) {
            m.add(w * v[j]);
        }
        let mean = m.value();
        let mut var = KahanSum::default();
        for (w, v) in grid.weights.iter().zip(&values) {
            let d = v[j] - mean;
            var.add(w * d * d);
        }
        let mut var = var.value();
        if var < 0.0 {
            log::warn!("output {j}: negative variance {var:e} clamped to 0");
            var = 0.0;
        }
        outputs.push(OutputStats::from_moments(mean, sqrt(var)));
    }
    Ok(UqResult {
        outputs,
        node_evaluations: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Normal,
    Lognormal,
}

/// Spread of one input. For log-normal inputs `std` is the std of the log;
/// `rel_std` is always relative to the point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputError {
    pub kind: InputKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_std: Option<f64>,
}

/// Names of the seven solver inputs, in grid order.
pub const INPUT_NAMES: [&str; 7] = ["rho", "kappa", "c_p", "h_c", "mu", "dT", "T_p"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorModel(pub BTreeMap<String, InputError>);

impl Default for ErrorModel {
    fn default() -> Self {
        let n = |rel| InputError {
            kind: InputKind::Normal,
            std: None,
            rel_std: Some(rel),
        };
        let mut m = BTreeMap::new();
        m.insert("rho".into(), n(0.05));
        m.insert("kappa".into(), n(0.10));
        m.insert("c_p".into(), n(0.07));
        m.insert("h_c".into(), n(0.05));
        m.insert(
            "mu".into(),
            InputError {
                kind: InputKind::Lognormal,
                std: Some(0.25),
                rel_std: None,
            },
        );
        m.insert("dT".into(), n(0.08));
        m.insert("T_p".into(), n(0.03));
        ErrorModel(m)
    }
}

impl ErrorModel {
    /// Same kinds, every spread replaced by an absolute `std`.
    pub fn with_uniform_std(&self, std: f64) -> Self {
        ErrorModel(
            self.0
                .iter()
                .map(|(k, e)| {
                    (
                        k.clone(),
                        InputError {
                            kind: e.kind,
                            std: Some(std),
                            rel_std: None,
                        },
                    )
                })
                .collect(),
        )
    }

    /// Random inputs centered on `mat`, in `INPUT_NAMES` order.
    pub fn inputs_for(&self, mat: &MaterialInput) -> Result<Vec<RandomInput>, UqError> {
        let means = [
            mat.rho, mat.kappa, mat.c_p, mat.h_c, mat.mu, mat.d_t, mat.t_p,
        ];
        INPUT_NAMES
            .iter()
            .zip(means)
            .map(|(&name, mean)| {
                let e = self.0.get(name).ok_or_else(|| {
                    UqError::DomainError(alloc::format!("error model lacks {name}"))
                })?;
                let inp = match e.kind {
                    InputKind::Normal => {
                        let std = match (e.std, e.rel_std) {
                            (Some(s), _) => s,
                            (None, Some(r)) => r * abs(mean),
                            (None, None) => 0.0,
                        };
                        RandomInput::normal(name, mean, std)
                    }
                    InputKind::Lognormal if mean <= 0.0 => RandomInput::normal(name, mean, 0.0),
                    InputKind::Lognormal => {
                        let std_ln = match (e.std, e.rel_std) {
                            (Some(s), _) => s,
                            (None, Some(r)) => sqrt(ln(1.0 + r * r)),
                            (None, None) => 0.0,
                        };
                        RandomInput::log_normal(name, ln(mean), std_ln)
                    }
                };
                inp.validate()?;
                Ok(inp)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolymerUq {
    pub t_ig: OutputStats,
    pub phrr: OutputStats,
    pub n_evals: usize,
}

/// Propagates the error model through the cone simulator around the record's
/// point estimates. Char fractions above 1 at a node are clamped to an inert
/// solid.
pub fn quantify_polymer(
    record: &PolymerRecord,
    errors: &ErrorModel,
    grid: &CollocationGrid,
    sim: &SimConfig,
) -> Result<PolymerUq, UqError> {
    let mat = MaterialInput::from_record(record)
        .map_err(|e| UqError::DomainError(alloc::format!("{e}")))?;
    quantify_material(&mat, errors, grid, sim)
}

pub fn quantify_material(
    mat: &MaterialInput,
    errors: &ErrorModel,
    grid: &CollocationGrid,
    sim: &SimConfig,
) -> Result<PolymerUq, UqError> {
    let inputs = errors.inputs_for(mat)?;
    let model = |x: &[f64]| {
        let m = MaterialInput {
            rho: x[0],
            kappa: x[1],
            c_p: x[2],
            h_c: x[3],
            mu: x[4].min(1.0),
            d_t: x[5],
            t_p: x[6],
        };
        simulate_cone(&m, sim).map(|r| alloc::vec![r.t_ig, r.phrr])
    };
    let res = propagate(model, &inputs, grid)?;
    Ok(PolymerUq {
        t_ig: res.outputs[0],
        phrr: res.outputs[1],
        n_evals: res.node_evaluations,
    })
}
