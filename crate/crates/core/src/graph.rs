//! Dense adjacency matrices and the graph algebra used by pooling:
//! degree normalisation, the 2nd graph power, and sub-graph extraction.

use rand::Rng;

use crate::autodiff::check_indices;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Symmetric, non-negative `n x n` adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<f64>,
}

/// How the pooled graph's connectivity is augmented before sub-selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Binarised union of `A` and `A^2` with zero diagonal.
    #[default]
    Union,
    /// The unmodified matrix square `A * A`, diagonal included.
    RawSquare,
}

impl AdjacencyMatrix {
    /// Validates squareness, finiteness, non-negativity and symmetry.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Validation(format!(
                "adjacency for {n} nodes needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Validation(format!("adjacency entry {v} is not a finite non-negative value")));
        }
        check_symmetric(n, &entries)?;
        Ok(Self { n, entries })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        if t.rows() != t.cols() {
            return Err(Error::Validation(format!("adjacency must be square, got {:?}", t.shape())));
        }
        Self::new(t.rows(), t.data().to_vec())
    }

    /// Unweighted undirected graph. Self-loops and duplicate edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Index {
                    op: "from_edges",
                    reason: format!("edge ({i}, {j}) out of range for {n} nodes"),
                });
            }
            if i != j {
                entries[i * n + j] = 1.0;
                entries[j * n + i] = 1.0;
            }
        }
        Ok(Self { n, entries })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(self.n, self.n, self.entries.clone()).expect("square")
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.get(i, j) != 0.0
    }

    /// Off-diagonal edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == 0.0)
    }

    /// Neighbour lists with weights, self-loops included if present.
    fn neighbours(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n)
            .map(|i| {
                self.entries[i * self.n..(i + 1) * self.n]
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(j, &w)| (j, w))
                    .collect()
            })
            .collect()
    }

    /// `D^{-1/2} (A + wI) D^{-1/2}` where `D` is the degree matrix of `A + wI`.
    pub fn normalized(&self, self_loop_weight: f64) -> Result<Tensor> {
        normalize_dense(&self.to_tensor(), self_loop_weight)
    }

    /// The matrix square `A * A`, weights and diagonal kept.
    pub fn raw_square(&self) -> AdjacencyMatrix {
        let nb = self.neighbours();
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut entries[i * n..(i + 1) * n];
            for &(j, a_ij) in &nb[i] {
                for &(l, a_jl) in &nb[j] {
                    row[l] += a_ij * a_jl;
                }
            }
        }
        AdjacencyMatrix { n, entries }
    }

    /// `A^2` binarised to {0, 1} with the diagonal zeroed: nodes joined by a
    /// walk of exactly two steps.
    pub fn graph_power_2(&self) -> AdjacencyMatrix {
        let mut sq = self.raw_square();
        binarize_zero_diag(&mut sq);
        sq
    }

    /// Binarised union of `A` and [`graph_power_2`](Self::graph_power_2):
    /// nodes within two hops.
    pub fn union_with_power(&self) -> AdjacencyMatrix {
        let mut out = self.graph_power_2();
        for (o, &a) in out.entries.iter_mut().zip(&self.entries) {
            if a != 0.0 {
                *o = 1.0;
            }
        }
        for i in 0..self.n {
            out.entries[i * self.n + i] = 0.0;
        }
        out
    }

    pub fn augmented(&self, mode: PowerMode) -> AdjacencyMatrix {
        match mode {
            PowerMode::Union => self.union_with_power(),
            PowerMode::RawSquare => self.raw_square(),
        }
    }

    /// The `k x k` sub-matrix on rows and columns `idx`.
    pub fn sub_adjacency(&self, idx: &[usize]) -> Result<AdjacencyMatrix> {
        check_indices("sub_adjacency", idx, self.n)?;
        let k = idx.len();
        let mut entries = Vec::with_capacity(k * k);
        for &i in idx {
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            entries.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(AdjacencyMatrix { n: k, entries })
    }
}

fn binarize_zero_diag(a: &mut AdjacencyMatrix) {
    for v in a.entries.iter_mut() {
        if *v != 0.0 {
            *v = 1.0;
        }
    }
    for i in 0..a.n {
        a.entries[i * a.n + i] = 0.0;
    }
}

fn check_symmetric(n: usize, entries: &[f64]) -> Result<()> {
    for i in 0..n {
        for j in i + 1..n {
            if entries[i * n + j] != entries[j * n + i] {
                return Err(Error::Validation(format!(
                    "adjacency is not symmetric at ({i}, {j}): {} vs {}",
                    entries[i * n + j],
                    entries[j * n + i]
                )));
            }
        }
    }
    Ok(())
}

/// Symmetric degree normalisation of `a + wI`. Rejects non-square or
/// non-symmetric input and non-positive `w`.
pub fn normalize_dense(a: &Tensor, self_loop_weight: f64) -> Result<Tensor> {
    if !(self_loop_weight > 0.0) {
        return Err(Error::Parameter(format!(
            "self_loop_weight must be positive, got {self_loop_weight}"
        )));
    }
    if a.rows() != a.cols() {
        return Err(Error::Validation(format!("adjacency must be square, got {:?}", a.shape())));
    }
    let n = a.rows();
    check_symmetric(n, a.data())?;
    let mut out = a.clone();
    for i in 0..n {
        let v = out.get(i, i) + self_loop_weight;
        out.set(i, i, v);
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / out.row(i).iter().sum::<f64>().sqrt())
        .collect();
    for i in 0..n {
        let di = inv_sqrt[i];
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v *= di * inv_sqrt[j];
        }
    }
    Ok(out)
}

fn check_keep(keep_rate: f64) -> Result<()> {
    if !(keep_rate > 0.0 && keep_rate <= 1.0) {
        return Err(Error::Parameter(format!("keep_rate must be in (0, 1], got {keep_rate}")));
    }
    Ok(())
}

/// Inverted dropout on the off-diagonal non-zeros of a square matrix. Entry
/// `(i, j)` and `(j, i)` share one draw; kept entries are divided by
/// `keep_rate`. The diagonal is never touched. Identity when `!training` or
/// `keep_rate == 1`.
pub fn dropout_adjacency<R: Rng + ?Sized>(
    a: &Tensor,
    keep_rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Tensor> {
    check_keep(keep_rate)?;
    if a.rows() != a.cols() {
        return Err(Error::Validation(format!("adjacency must be square, got {:?}", a.shape())));
    }
    if !training || keep_rate == 1.0 {
        return Ok(a.clone());
    }
    let n = a.rows();
    let mut out = a.clone();
    let scale = 1.0 / keep_rate;
    for i in 0..n {
        for j in i + 1..n {
            if a.get(i, j) == 0.0 && a.get(j, i) == 0.0 {
                continue;
            }
            if rng.gen::<f64>() < keep_rate {
                out.set(i, j, a.get(i, j) * scale);
                out.set(j, i, a.get(j, i) * scale);
            } else {
                out.set(i, j, 0.0);
                out.set(j, i, 0.0);
            }
        }
    }
    Ok(out)
}

/// Element-wise inverted dropout. Identity when `!training` or
/// `keep_rate == 1`.
pub fn dropout_features<R: Rng + ?Sized>(
    x: &Tensor,
    keep_rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Tensor> {
    check_keep(keep_rate)?;
    if !training || keep_rate == 1.0 {
        return Ok(x.clone());
    }
    let mask = feature_mask(x.rows(), x.cols(), keep_rate, rng);
    x.zip_with(&mask, "dropout_features", |v, m| v * m)
}

/// The 0/1 mask `dropout_features` would apply, pre-scaled by
/// `1 / keep_rate`.
pub(crate) fn feature_mask<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    keep_rate: f64,
    rng: &mut R,
) -> Tensor {
    let scale = 1.0 / keep_rate;
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < keep_rate { scale } else { 0.0 })
        .collect();
    Tensor::new(rows, cols, data).expect("sized")
}
