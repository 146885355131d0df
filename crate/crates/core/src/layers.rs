//! The three layer types: graph convolution, gPool and gUnpool.
//!
//! Layers own their parameter values as plain [`Tensor`]s. A forward pass
//! registers those values on a [`Tape`] and passes the resulting [`Var`]s
//! into the functions here, so the same layer can be replayed on a fresh
//! tape every step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{check_indices, Tape, Var};
use crate::error::{shape_err, Error, Result};
use crate::graph::{feature_mask, AdjacencyMatrix, PowerMode};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Relu,
}

/// Graph convolution `act(A_norm X W)`, no bias.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnLayer {
    pub weight: Tensor,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn new<R: Rng + ?Sized>(c_in: usize, c_out: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weight: Tensor::glorot_uniform(c_in, c_out, rng),
            activation,
        }
    }

    pub fn forward(&self, tape: &mut Tape, weight: Var, a_norm: Var, x: Var) -> Result<Var> {
        gcn_forward(tape, a_norm, x, weight, self.activation)
    }
}

/// `act(a_norm * x * weight)`. The multiplication order is chosen by cost.
pub fn gcn_forward(tape: &mut Tape, a_norm: Var, x: Var, weight: Var, activation: Activation) -> Result<Var> {
    let (ar, ac) = tape.shape(a_norm);
    let (xr, xc) = tape.shape(x);
    let (wr, wc) = tape.shape(weight);
    if ar != ac || ac != xr {
        return shape_err("gcn_forward", (ar, ac), (xr, xc));
    }
    if xc != wr {
        return shape_err("gcn_forward", (xr, xc), (wr, wc));
    }
    let h = if xc < wc {
        let ax = tape.matmul(a_norm, x)?;
        tape.matmul(ax, weight)?
    } else {
        let xw = tape.matmul(x, weight)?;
        tape.matmul(a_norm, xw)?
    };
    Ok(match activation {
        Activation::Identity => h,
        Activation::Relu => tape.relu(h),
    })
}

/// Number of nodes a pooling layer keeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Count(usize),
    Ratio(f64),
}

impl KSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KSpec::Count(0) => Err(Error::Config("absolute k must be at least 1".into())),
            KSpec::Ratio(r) if !(r > 0.0 && r <= 1.0) => {
                Err(Error::Config(format!("pooling ratio must be in (0, 1], got {r}")))
            }
            _ => Ok(()),
        }
    }
}

/// Absolute specs clamp to `n`; ratios round up and never go below one.
pub fn resolve_k(spec: KSpec, n: usize) -> usize {
    match spec {
        KSpec::Count(k) => k.min(n),
        // The small slack keeps products like 0.7 * 10 from rounding up past 7.
        KSpec::Ratio(r) => ((r * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1)),
    }
}

/// Indices of the `k` largest scores in ascending index order. Equal scores
/// prefer the lower index.
pub fn top_k_rank(y: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(y.len());
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    let mut idx = order[..k].to_vec();
    idx.sort_unstable();
    idx
}

/// Bridges a gPool layer and its paired gUnpool layer.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolRecord {
    pub idx: Vec<usize>,
    pub original_n: usize,
    pub pre_pool_adjacency: AdjacencyMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GPoolLayer {
    /// Trainable projection vector, `C x 1`.
    pub projection: Tensor,
    pub k: KSpec,
    pub augment: bool,
    pub power_mode: PowerMode,
}

impl GPoolLayer {
    pub fn new<R: Rng + ?Sized>(channels: usize, k: KSpec, augment: bool, rng: &mut R) -> Self {
        let mut projection = Tensor::glorot_uniform(channels, 1, rng);
        if projection.norm() == 0.0 && channels > 0 {
            projection.set(0, 0, 1.0);
        }
        Self {
            projection,
            k,
            augment,
            power_mode: PowerMode::Union,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        projection: Var,
        a: &AdjacencyMatrix,
        x: Var,
        selection: Option<&[usize]>,
    ) -> Result<PoolOutput> {
        let augment = self.augment.then_some(self.power_mode);
        gpool_forward(tape, a, x, projection, self.k, augment, selection)
    }
}

/// Everything a gPool forward produces.
#[derive(Debug)]
pub struct PoolOutput {
    pub adjacency: AdjacencyMatrix,
    pub features: Var,
    pub record: PoolRecord,
    /// Scalar projection of every input node, `N x 1`.
    pub scores: Var,
    /// Sigmoid gate of the kept nodes, `k x 1`.
    pub gate: Var,
}

/// Scores nodes by `x p / |p|`, keeps the top `k`, gates their features by
/// `sigmoid(score)` and restricts the (optionally augmented) adjacency to
/// them. `selection` overrides the ranking step with fixed indices; the
/// gradient checker uses it to stay on one smooth piece.
pub fn gpool_forward(
    tape: &mut Tape,
    a: &AdjacencyMatrix,
    x: Var,
    projection: Var,
    k: KSpec,
    augment: Option<PowerMode>,
    selection: Option<&[usize]>,
) -> Result<PoolOutput> {
    let (n, c) = tape.shape(x);
    if n == 0 {
        return Err(Error::Validation("cannot pool an empty graph".into()));
    }
    if a.n() != n {
        return shape_err("gpool_forward", (a.n(), a.n()), (n, c));
    }
    if tape.shape(projection) != (c, 1) {
        return shape_err("gpool_forward", (n, c), tape.shape(projection));
    }
    let norm = tape.norm_floored(projection);
    let raw = tape.matmul(x, projection)?;
    let scores = tape.div_scalar(raw, norm)?;
    let idx = match selection {
        Some(fixed) => {
            check_indices("gpool_forward", fixed, n)?;
            fixed.to_vec()
        }
        None => top_k_rank(tape.value(scores).data(), resolve_k(k, n)),
    };
    let selected = tape.gather_rows(scores, &idx)?;
    let gate = tape.sigmoid(selected);
    let kept = tape.gather_rows(x, &idx)?;
    let features = tape.scale_rows(kept, gate)?;
    let adjacency = match augment {
        Some(mode) => a.augmented(mode).sub_adjacency(&idx)?,
        None => a.sub_adjacency(&idx)?,
    };
    Ok(PoolOutput {
        adjacency,
        features,
        record: PoolRecord {
            idx,
            original_n: n,
            pre_pool_adjacency: a.clone(),
        },
        scores,
        gate,
    })
}

/// Stateless inverse of gPool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GUnpoolLayer;

impl GUnpoolLayer {
    pub fn forward(&self, tape: &mut Tape, x: Var, record: &PoolRecord) -> Result<Var> {
        gunpool_forward(tape, x, record)
    }
}

/// Places row `i` of `x` at row `record.idx[i]` of an `original_n`-row zero
/// matrix.
pub fn gunpool_forward(tape: &mut Tape, x: Var, record: &PoolRecord) -> Result<Var> {
    let (r, c) = tape.shape(x);
    if r != record.idx.len() {
        return shape_err("gunpool_forward", (r, c), (record.idx.len(), c));
    }
    tape.scatter_rows(record.original_n, x, &record.idx)
}

/// Inverted dropout on a taped feature matrix; a no-op outside training.
pub fn dropout_features_var<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    keep_rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    if !(keep_rate > 0.0 && keep_rate <= 1.0) {
        return Err(Error::Parameter(format!("keep_rate must be in (0, 1], got {keep_rate}")));
    }
    if !training || keep_rate == 1.0 {
        return Ok(x);
    }
    let (r, c) = tape.shape(x);
    let mask = tape.constant(feature_mask(r, c, keep_rate, rng));
    tape.elem_mul(x, mask)
}
