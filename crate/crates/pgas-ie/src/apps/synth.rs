//! Deterministic synthetic matrices and graphs (seeded ChaCha8).

use crate::apps::csr::CsrMatrix;
use crate::apps::graph::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Banded matrix: entries where |i - j| <= bandwidth. Values are a
/// deterministic function of (i, j) with a dominant diagonal.
pub fn banded(n: usize, bandwidth: usize) -> CsrMatrix {
    let mut triples = Vec::new();
    for i in 0..n {
        let lo = i.saturating_sub(bandwidth);
        let hi = (i + bandwidth).min(n - 1);
        for j in lo..=hi {
            let v = if i == j {
                4.0
            } else {
                -1.0 + ((i * 31 + j * 7) % 5) as f64 * 0.125
            };
            triples.push((i, j, v));
        }
    }
    CsrMatrix::from_triples(n, n, triples).expect("banded construction is always valid")
}

/// Random sparse matrix with approximately `nnz` nonzeros (duplicates
/// regenerated), deterministic under `seed`.
pub fn random_matrix(n: usize, nnz: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let cap = nnz.min(n * n);
    while seen.len() < cap {
        let r = rng.gen_range(0..n);
        let c = rng.gen_range(0..n);
        seen.insert((r, c));
    }
    let triples = seen
        .into_iter()
        .map(|(r, c)| (r, c, rng.gen_range(-1.0..1.0)))
        .collect();
    CsrMatrix::from_triples(n, n, triples).expect("random construction is always valid")
}

/// Directed graph whose out-degrees follow a discrete power law
/// P(k) ∝ k^-exponent for k in 1..=cap, deterministic under `seed`.
pub fn powerlaw_graph(n: usize, exponent: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = (n - 1).min(64).max(1);
    // inverse-CDF table for the degree distribution
    let weights: Vec<f64> = (1..=cap).map(|k| (k as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(cap);
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let mut edges = Vec::new();
    for u in 0..n {
        let x: f64 = rng.gen();
        let deg = cdf.iter().position(|&c| x <= c).unwrap_or(cap - 1) + 1;
        let mut targets = BTreeSet::new();
        while targets.len() < deg {
            let v = rng.gen_range(0..n);
            if v != u {
                targets.insert(v);
            }
        }
        edges.extend(targets.into_iter().map(|v| (u, v)));
    }
    Graph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_tridiagonal_count() {
        let m = banded(10, 1);
        assert_eq!(m.nnz(), 28); // 3n - 2
    }

    #[test]
    fn powerlaw_deterministic() {
        let a = powerlaw_graph(1000, 2.1, 7);
        let b = powerlaw_graph(1000, 2.1, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn random_matrix_valid_and_deterministic() {
        let m = random_matrix(500, 5000, 3);
        m.validate().unwrap();
        assert_eq!(m.nnz(), 5000);
        assert_eq!(m, random_matrix(500, 5000, 3));
    }
}
