#![allow(dead_code)]

use hyperneo::{AttributeMatrix, Hypergraph, LatentParams};
use ndarray::Array2;
use rand::seq::index;
use rand::Rng;

pub fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// `m` random node sets of size 2..=max_size with weights 1..=3, over `n`
/// nodes. Every node is covered so no row of U is unconstrained.
pub fn random_hypergraph(n: usize, m: usize, max_size: usize, rng: &mut impl Rng) -> Hypergraph {
    let max_size = max_size.min(n).max(2);
    let mut edges: Vec<(Vec<usize>, u64)> = (0..n)
        .step_by(2)
        .map(|i| (vec![i, (i + 1) % n], 1))
        .collect();
    for _ in 0..m {
        let s = rng.random_range(2..=max_size);
        edges.push((index::sample(rng, n, s).into_vec(), rng.random_range(1..=3)));
    }
    Hypergraph::from_edges(labels(n), edges).unwrap()
}

pub fn random_attributes(n: usize, z: usize, rng: &mut impl Rng) -> AttributeMatrix {
    let cats = (0..z).map(|c| format!("c{c}")).collect();
    let mut assignment: Vec<usize> = (0..n).map(|_| rng.random_range(0..z)).collect();
    for (c, slot) in assignment.iter_mut().take(z).enumerate() {
        *slot = c;
    }
    AttributeMatrix::new(cats, assignment).unwrap()
}

pub fn random_params(n: usize, k: usize, z: usize, rng: &mut impl Rng) -> LatentParams {
    let u = Array2::from_shape_simple_fn((n, k), || rng.random_range(0.01..1.0));
    let mut w = Array2::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let v = rng.random_range(0.01..1.0);
            w[[a, b]] = v;
            w[[b, a]] = v;
        }
    }
    let mut beta = Array2::from_shape_simple_fn((k, z), || rng.random_range(0.01..1.0));
    for mut row in beta.rows_mut() {
        let t = row.sum();
        row /= t;
    }
    LatentParams::new(u, w, beta).unwrap()
}
