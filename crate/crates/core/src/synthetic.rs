//! Seeded synthetic graphs for tests and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, SplitSizes};
use crate::error::Result;
use crate::graph::AdjacencyMatrix;
use crate::tensor::Tensor;

/// Erdős–Rényi graph `G(n, p)`.
pub fn random_graph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> AdjacencyMatrix {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    AdjacencyMatrix::from_edges(n, &edges).expect("in range")
}

/// Parameters of a planted-partition citation graph with bag-of-words
/// features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CitationSpec {
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub avg_degree: f64,
    /// Probability that an edge stays inside its class.
    pub homophily: f64,
    /// Words drawn per node.
    pub words: usize,
    /// Probability that a word comes from the node's class vocabulary.
    pub topical: f64,
    pub split: SplitSizes,
    pub seed: u64,
}

impl Default for CitationSpec {
    fn default() -> Self {
        Self {
            nodes: 600,
            features: 200,
            classes: 4,
            avg_degree: 4.0,
            homophily: 0.8,
            words: 12,
            topical: 0.35,
            split: SplitSizes {
                train_per_class: 20,
                val: 150,
                test: 300,
            },
            seed: 0,
        }
    }
}

/// A citation-style dataset: homophilous edges, 0/1 word features with a
/// per-class vocabulary bias, nodes in shuffled class order.
pub fn citation_like(spec: CitationSpec) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes;
    let mut labels: Vec<usize> = (0..n).map(|i| i % spec.classes).collect();
    labels.shuffle(&mut rng);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); spec.classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let target_edges = (spec.avg_degree * n as f64 / 2.0).round() as usize;
    let mut edges = Vec::with_capacity(target_edges);
    while edges.len() < target_edges {
        let i = rng.gen_range(0..n);
        let j = if rng.gen::<f64>() < spec.homophily {
            *by_class[labels[i]].choose(&mut rng).unwrap()
        } else {
            rng.gen_range(0..n)
        };
        if i != j {
            edges.push((i, j));
        }
    }
    let adjacency = AdjacencyMatrix::from_edges(n, &edges)?;

    let vocab = spec.features / spec.classes.max(1);
    let mut features = Tensor::zeros(n, spec.features);
    for (i, &y) in labels.iter().enumerate() {
        for _ in 0..spec.words {
            let w = if rng.gen::<f64>() < spec.topical && vocab > 0 {
                y * vocab + rng.gen_range(0..vocab)
            } else {
                rng.gen_range(0..spec.features)
            };
            features.set(i, w, 1.0);
        }
    }
    Dataset::from_parts(adjacency, features, labels, spec.classes, spec.split)
}

/// Twenty nodes in two classes; each class is a connected ring and its
/// features sit on one axis.
pub fn separable_two_class(seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 20;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut edges = Vec::new();
    for c in 0..2 {
        let members: Vec<usize> = (0..n).filter(|i| i % 2 == c).collect();
        for w in 0..members.len() {
            edges.push((members[w], members[(w + 1) % members.len()]));
        }
    }
    edges.push((0, 1));
    let adjacency = AdjacencyMatrix::from_edges(n, &edges)?;
    let mut features = Tensor::zeros(n, 4);
    for (i, &y) in labels.iter().enumerate() {
        features.set(i, y, 1.0);
        features.set(i, 2, rng.gen_range(-0.1..0.1));
        features.set(i, 3, rng.gen_range(-0.1..0.1));
    }
    Dataset::from_parts(
        adjacency,
        features,
        labels,
        2,
        SplitSizes {
            train_per_class: 3,
            val: 4,
            test: 10,
        },
    )
}

/// A graph with a single graph-level label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledGraph {
    pub adjacency: AdjacencyMatrix,
    pub features: Tensor,
    pub label: usize,
}

/// Cycles (label 0) and cliques (label 1) of random size in
/// `[min_n, max_n]`. Node features are `[degree / max_n, 1]`.
pub fn cycles_vs_cliques(count: usize, min_n: usize, max_n: usize, seed: u64) -> Vec<LabeledGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|g| {
            let n = rng.gen_range(min_n..=max_n);
            let label = g % 2;
            let edges: Vec<(usize, usize)> = if label == 0 {
                (0..n).map(|i| (i, (i + 1) % n)).collect()
            } else {
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
            };
            let adjacency = AdjacencyMatrix::from_edges(n, &edges).expect("in range");
            let mut features = Tensor::zeros(n, 2);
            for i in 0..n {
                let deg = (0..n).filter(|&j| adjacency.has_edge(i, j)).count();
                features.set(i, 0, deg as f64 / max_n as f64);
                features.set(i, 1, 1.0);
            }
            LabeledGraph {
                adjacency,
                features,
                label,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn citation_like_is_seeded_and_valid() {
        let a = citation_like(CitationSpec::default()).unwrap();
        let b = citation_like(CitationSpec::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_nodes(), 600);
        assert!(a.adjacency.has_zero_diagonal());
        assert_eq!(a.train_mask.iter().filter(|&&m| m).count(), 80);
        assert_eq!(a.val_mask.iter().filter(|&&m| m).count(), 150);
        assert_eq!(a.test_mask.iter().filter(|&&m| m).count(), 300);
    }

    #[test]
    fn cycles_and_cliques_alternate() {
        let gs = cycles_vs_cliques(6, 4, 9, 1);
        for (i, g) in gs.iter().enumerate() {
            assert_eq!(g.label, i % 2);
            let n = g.adjacency.n();
            let expect = if g.label == 0 { n } else { n * (n - 1) / 2 };
            assert_eq!(g.adjacency.edge_count(), expect);
        }
    }
}
