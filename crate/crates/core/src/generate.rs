//! Seeded synthetic graph families for tests, demos and acceptance runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub enum GraphKind {
    Path { n: usize },
    Cycle { n: usize },
    /// Center node 0 joined to `leaves` leaves.
    Star { leaves: usize },
    Complete { n: usize },
    ErdosRenyi { n: usize, p: f64 },
    /// Planted partition: consecutive blocks of the given sizes.
    Sbm { block_sizes: Vec<usize>, p_in: f64, p_out: f64 },
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Generates a simple undirected graph. Deterministic for a fixed seed; the
/// deterministic families ignore it.
pub fn generate<T: Scalar>(kind: &GraphKind, seed: u64) -> Result<SparseGraph<T>> {
    let mut edges = Vec::new();
    let n = match *kind {
        GraphKind::Path { n } => {
            edges.extend((1..n).map(|i| (i - 1, i)));
            n
        }
        GraphKind::Cycle { n } => {
            if n < 3 {
                return Err(Error::validation("a cycle needs at least 3 nodes"));
            }
            edges.extend((0..n).map(|i| (i, (i + 1) % n)));
            n
        }
        GraphKind::Star { leaves } => {
            edges.extend((1..=leaves).map(|i| (0, i)));
            leaves + 1
        }
        GraphKind::Complete { n } => {
            for u in 0..n {
                edges.extend((u + 1..n).map(|v| (u, v)));
            }
            n
        }
        GraphKind::ErdosRenyi { n, p } => {
            check_probability("p", p)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen::<f64>() < p {
                        edges.push((u, v));
                    }
                }
            }
            n
        }
        GraphKind::Sbm {
            ref block_sizes,
            p_in,
            p_out,
        } => {
            check_probability("p_in", p_in)?;
            check_probability("p_out", p_out)?;
            if p_in < p_out {
                return Err(Error::validation(format!(
                    "planted partition needs p_in >= p_out (got {p_in} < {p_out})"
                )));
            }
            let block = block_assignment(block_sizes);
            let n = block.len();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for u in 0..n {
                for v in u + 1..n {
                    let p = if block[u] == block[v] { p_in } else { p_out };
                    if rng.gen::<f64>() < p {
                        edges.push((u, v));
                    }
                }
            }
            n
        }
    };
    SparseGraph::from_unweighted_edges(n, edges)
}

/// Block id of each node for consecutive blocks of the given sizes.
pub fn block_assignment(block_sizes: &[usize]) -> Vec<usize> {
    block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect()
}
