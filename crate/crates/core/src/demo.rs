//! Small hand-built pooling walk-throughs.

use std::fmt;

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, PowerMode};
use crate::layers::{gpool_forward, gunpool_forward, KSpec};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct PoolFixture {
    pub name: &'static str,
    pub adjacency: AdjacencyMatrix,
    pub features: Tensor,
    /// `C x 1`.
    pub projection: Tensor,
    pub k: usize,
}

pub const FIXTURE_NAMES: [&str; 3] = ["fig1", "fig2", "path"];

fn fixture(name: &'static str, n: usize, edges: &[(usize, usize)], x: Vec<Vec<f64>>, p: &[f64], k: usize) -> PoolFixture {
    PoolFixture {
        name,
        adjacency: AdjacencyMatrix::from_edges(n, edges).expect("fixture edges in range"),
        features: Tensor::from_rows(&x),
        projection: Tensor::column(p),
        k,
    }
}

/// `fig1`: 4 nodes with 5 features pooled to 2. `fig2`: 7 nodes pooled
/// to 4. `path`: the 3-node path whose two kept ends are only linked
/// through the graph power.
pub fn pool_fixture(name: &str) -> Option<PoolFixture> {
    match name {
        "fig1" => Some(fixture(
            "fig1",
            4,
            &[(0, 1), (1, 2), (2, 3)],
            vec![
                vec![1.0, 0.0, 2.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0, 1.0, 0.0],
                vec![2.0, 1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0, 1.0],
            ],
            &[1.0, 0.0, 1.0, 0.0, 0.0],
            2,
        )),
        "fig2" => Some(fixture(
            "fig2",
            7,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 0), (1, 4)],
            vec![
                vec![0.2, 1.0, 0.0],
                vec![0.9, 0.1, 0.5],
                vec![0.4, 0.4, 0.4],
                vec![1.0, 0.0, 0.2],
                vec![0.1, 0.8, 0.9],
                vec![0.7, 0.3, 0.0],
                vec![0.3, 0.6, 0.8],
            ],
            &[1.0, 0.0, 0.0],
            4,
        )),
        "path" => Some(fixture(
            "path",
            3,
            &[(0, 1), (1, 2)],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
            &[1.0, 0.0],
            2,
        )),
        _ => None,
    }
}

pub fn pool_fixtures() -> Vec<PoolFixture> {
    FIXTURE_NAMES.iter().filter_map(|n| pool_fixture(n)).collect()
}

/// Every intermediate of one gPool / gUnpool round trip.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolDemo {
    pub name: String,
    pub scores: Tensor,
    pub idx: Vec<usize>,
    pub gate: Tensor,
    pub pooled_features: Tensor,
    pub pooled_plain: AdjacencyMatrix,
    pub pooled_augmented: AdjacencyMatrix,
    pub unpooled: Tensor,
}

pub fn run_pool_demo(
    name: &str,
    adjacency: &AdjacencyMatrix,
    features: &Tensor,
    projection: &Tensor,
    k: usize,
) -> Result<PoolDemo> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let mut tape = Tape::new();
    let x = tape.constant(features.clone());
    let p = tape.constant(projection.clone());
    let aug = gpool_forward(&mut tape, adjacency, x, p, KSpec::Count(k), Some(PowerMode::Union), None)?;
    let plain = adjacency.sub_adjacency(&aug.record.idx)?;
    let up = gunpool_forward(&mut tape, aug.features, &aug.record)?;
    Ok(PoolDemo {
        name: name.to_string(),
        scores: tape.value(aug.scores).clone(),
        idx: aug.record.idx.clone(),
        gate: tape.value(aug.gate).clone(),
        pooled_features: tape.value(aug.features).clone(),
        pooled_plain: plain,
        pooled_augmented: aug.adjacency,
        unpooled: tape.value(up).clone(),
    })
}

pub fn run_fixture(f: &PoolFixture) -> Result<PoolDemo> {
    run_pool_demo(f.name, &f.adjacency, &f.features, &f.projection, f.k)
}

fn write_matrix(f: &mut fmt::Formatter<'_>, title: &str, m: &Tensor) -> fmt::Result {
    writeln!(f, "{title} ({}x{}):", m.rows(), m.cols())?;
    for r in 0..m.rows() {
        let cells: Vec<String> = m.row(r).iter().map(|v| format!("{v:>8.4}")).collect();
        writeln!(f, "  [{}]", cells.join(" "))?;
    }
    Ok(())
}

impl fmt::Display for PoolDemo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== {} ==", self.name)?;
        write_matrix(f, "y = X p / |p|", &self.scores.transpose())?;
        writeln!(f, "idx = {:?}", self.idx)?;
        write_matrix(f, "gate = sigmoid(y[idx])", &self.gate.transpose())?;
        write_matrix(f, "pooled X", &self.pooled_features)?;
        write_matrix(f, "pooled A (no augmentation)", &self.pooled_plain.to_tensor())?;
        write_matrix(f, "pooled A (2nd graph power)", &self.pooled_augmented.to_tensor())?;
        write_matrix(f, "unpooled X", &self.unpooled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_shapes() {
        let d = run_fixture(&pool_fixture("fig1").unwrap()).unwrap();
        assert_eq!(d.idx, vec![0, 2]);
        assert_eq!(d.pooled_features.shape(), (2, 5));
        assert_eq!(d.pooled_augmented.n(), 2);
        assert_eq!(d.unpooled.shape(), (4, 5));
    }

    #[test]
    fn fig2_restores_seven_rows_with_three_zero() {
        let d = run_fixture(&pool_fixture("fig2").unwrap()).unwrap();
        assert_eq!(d.idx, vec![1, 2, 3, 5]);
        assert_eq!(d.unpooled.rows(), 7);
        let zero_rows = (0..7).filter(|&r| d.unpooled.row(r).iter().all(|&v| v == 0.0)).count();
        assert_eq!(zero_rows, 3);
    }

    #[test]
    fn path_pair_is_rescued() {
        let d = run_fixture(&pool_fixture("path").unwrap()).unwrap();
        assert_eq!(d.idx, vec![0, 2]);
        assert_eq!(d.pooled_plain.edge_count(), 0);
        assert_eq!(d.pooled_augmented.edge_count(), 1);
        let s = d.to_string();
        assert!(s.contains("idx = [0, 2]"));
    }

    #[test]
    fn unknown_fixture() {
        assert!(pool_fixture("fig3").is_none());
        assert_eq!(pool_fixtures().len(), 3);
    }
}
