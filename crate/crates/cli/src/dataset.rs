//! Synthetic inputs for the `generate` subcommand.

use std::path::{Path, PathBuf};

use atp_core::generate::{block_assignment, generate, GraphKind};
use atp_core::graph::{FeatureMatrix, LabelVector};
use atp_core::io;
use atp_core::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};
use crate::manifest::sub_seed;

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureKind {
    /// Uniform values in `[0, 1)`.
    Random { dims: usize },
    /// Class indicator; a `noise` fraction of nodes get a uniformly drawn class instead.
    OneHot { noise: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub kind: GraphKind,
    pub features: FeatureKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFiles {
    pub graph: PathBuf,
    pub features: PathBuf,
    pub labels: Option<PathBuf>,
}

/// Block ids for planted partitions, `i mod 2` otherwise.
fn classes(kind: &GraphKind, n: usize) -> Vec<usize> {
    match kind {
        GraphKind::Sbm { block_sizes, .. } => block_assignment(block_sizes),
        _ => (0..n).map(|i| i % 2).collect(),
    }
}

pub fn build(spec: &DatasetSpec) -> CliResult<(Graph, FeatureMatrix<f64>, LabelVector)> {
    const S: &str = "generate";
    let g: Graph = generate(&spec.kind, sub_seed(spec.seed, "graph")).map_err(|e| CliError::from_core(S, e))?;
    let n = g.node_count();
    let y = classes(&spec.kind, n);
    let c = y.iter().max().map_or(1, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, "features"));
    let x = match spec.features {
        FeatureKind::Random { dims } => {
            FeatureMatrix::new(n, dims, (0..n * dims).map(|_| rng.gen()).collect())
        }
        FeatureKind::OneHot { noise } => {
            if !(0.0..=1.0).contains(&noise) {
                return Err(CliError::input(S, format!("noise {noise} outside [0, 1]")));
            }
            let mut x = FeatureMatrix::zeros(n, c);
            for (i, &yi) in y.iter().enumerate() {
                let class = if rng.gen::<f64>() < noise { rng.gen_range(0..c) } else { yi };
                x.row_mut(i)[class] = 1.0;
            }
            Ok(x)
        }
    }
    .map_err(|e| CliError::from_core(S, e))?;
    Ok((g, x, LabelVector::from_classes(&y)))
}

/// Writes `graph.edges`, `features.csv` and `labels.txt` into `dir`.
pub fn write(spec: &DatasetSpec, dir: &Path) -> CliResult<DatasetFiles> {
    const S: &str = "generate";
    let (g, x, labels) = build(spec)?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::input(S, format!("{}: {e}", dir.display())))?;
    let files = DatasetFiles {
        graph: dir.join("graph.edges"),
        features: dir.join("features.csv"),
        labels: Some(dir.join("labels.txt")),
    };
    let wrap = |e| CliError::from_core(S, e);
    io::save_edge_list(&g, &files.graph).map_err(wrap)?;
    io::save_features_csv(&x, &files.features).map_err(wrap)?;
    io::save_labels(&labels, files.labels.as_ref().expect("set above")).map_err(wrap)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_one_hot_matches_blocks() {
        let spec = DatasetSpec {
            kind: GraphKind::Sbm { block_sizes: vec![5, 5], p_in: 0.5, p_out: 0.1 },
            features: FeatureKind::OneHot { noise: 0.0 },
            seed: 1,
        };
        let (_, x, labels) = build(&spec).unwrap();
        for i in 0..10 {
            assert_eq!(x.get(i, labels.get(i).unwrap()), 1.0);
        }
    }

    #[test]
    fn deterministic() {
        let spec = DatasetSpec {
            kind: GraphKind::ErdosRenyi { n: 30, p: 0.2 },
            features: FeatureKind::Random { dims: 4 },
            seed: 8,
        };
        assert_eq!(build(&spec).unwrap().1, build(&spec).unwrap().1);
    }
}
