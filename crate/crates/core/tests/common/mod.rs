//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use gunet::{AdjacencyMatrix, Tensor};

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Step-by-step pooling: scalar projections, top-k with ties to the lower
/// index, row gather, sigmoid gate, adjacency restriction.
pub struct PoolOracle {
    pub y: Vec<f64>,
    pub idx: Vec<usize>,
    pub features: Vec<Vec<f64>>,
    pub adjacency: Vec<Vec<f64>>,
}

pub fn gpool_oracle(a: &[Vec<f64>], x: &[Vec<f64>], p: &[f64], k: usize) -> PoolOracle {
    let n = x.len();
    let mut norm_sq = 0.0;
    for v in p {
        norm_sq += v * v;
    }
    let norm = norm_sq.sqrt();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut dot = 0.0;
        for c in 0..p.len() {
            dot += x[i][c] * p[c];
        }
        y[i] = dot / norm;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| y[j].partial_cmp(&y[i]).unwrap().then(i.cmp(&j)));
    let mut idx: Vec<usize> = order[..k].to_vec();
    idx.sort_unstable();

    let mut features = Vec::with_capacity(k);
    for &i in &idx {
        let gate = sigmoid(y[i]);
        features.push(x[i].iter().map(|v| v * gate).collect());
    }
    let mut adjacency = vec![vec![0.0; k]; k];
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            adjacency[r][c] = a[i][j];
        }
    }
    PoolOracle {
        y,
        idx,
        features,
        adjacency,
    }
}

/// Adjacency of "distance 1 or 2" by breadth-first search, zero diagonal.
pub fn two_hop_bfs(a: &AdjacencyMatrix) -> Vec<Vec<f64>> {
    let n = a.n();
    let mut out = vec![vec![0.0; n]; n];
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if dist[u] == 2 {
                continue;
            }
            for v in 0..n {
                if a.get(u, v) != 0.0 && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for t in 0..n {
            if t != s && dist[t] <= 2 {
                out[s][t] = 1.0;
            }
        }
    }
    out
}

pub fn dense(a: &AdjacencyMatrix) -> Vec<Vec<f64>> {
    (0..a.n()).map(|i| (0..a.n()).map(|j| a.get(i, j)).collect()).collect()
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn restrict(m: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| idx.iter().map(|&j| m[i][j]).collect()).collect()
}
