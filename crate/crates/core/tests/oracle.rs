use atp_core::correction::{apply_mask, select_nodes_epsilon, MaskParams, MaskPlan};
use atp_core::dense::{dense_eig_symmetric, dense_operator, dense_propagate, symmetrized_walk, DenseMatrix};
use atp_core::encoding::{eigenvector_encoding, EncodingConfig};
use atp_core::generate::{generate, GraphKind};
use atp_core::graph::FeatureMatrix;
use atp_core::propagation::{
    propagate, scheme_weights, KernelSpec, NodeWiseOperator, PropagationConfig, Scheme,
};
use atp_core::spectral::{node_bounds, EigenMethod};
use atp_core::{Graph, Graph32};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn er(n: usize, p: f64, seed: u64) -> Graph {
    generate(&GraphKind::ErdosRenyi { n, p }, seed).unwrap()
}

fn random_features(rng: &mut ChaCha8Rng, n: usize, f: usize) -> FeatureMatrix<f64> {
    FeatureMatrix::new(n, f, (0..n * f).map(|_| rng.gen()).collect()).unwrap()
}

#[test]
fn sparse_matches_dense_with_masked_graphs() {
    for seed in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let g = er(30 + 10 * seed as usize, 0.15, seed);
        let params = MaskParams {
            mask_token: 0.5,
            seed,
            ..MaskParams::default()
        };
        let plan = MaskPlan::resolve(&g, params).unwrap();
        let (corrected, _) = apply_mask(&g, &plan).unwrap();
        let n = g.node_count();
        let r: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let x = random_features(&mut rng, n, 4);
        let op = NodeWiseOperator::build(&corrected, &KernelSpec::PerNode(r.clone()), 1.0).unwrap();
        let m = dense_operator(op.graph(), &r).unwrap();
        for scheme in [Scheme::Sgc, Scheme::Gbp { beta: 0.15 }] {
            let cfg = PropagationConfig::new(4, scheme.clone());
            let sparse = propagate(&op, &x, &cfg).unwrap().into_sum().unwrap();
            let w = scheme_weights(&scheme, 4).unwrap();
            let dense = dense_propagate(&m, &DenseMatrix::from_features(&x), &w)
                .unwrap()
                .to_features();
            for (a, b) in sparse.as_slice().iter().zip(dense.as_slice()) {
                assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn fully_masked_node_keeps_its_features() {
    // node 0 of a star loses every edge; with token 0 its row is the self-loop only
    let g: Graph = generate(&GraphKind::Star { leaves: 5 }, 0).unwrap();
    let params = MaskParams {
        edge_mask_fraction: 1.0,
        mask_token: 0.0,
        ..MaskParams::default()
    };
    let plan = MaskPlan::with_selection(&g, params, vec![0]).unwrap();
    let (corrected, report) = apply_mask(&g, &plan).unwrap();
    assert_eq!(report.edges_masked, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_features(&mut rng, 6, 3);
    for r in [0.0, 0.3, 1.0] {
        let op = NodeWiseOperator::build(&corrected, &KernelSpec::Fixed(r), 1.0).unwrap();
        let out = propagate(&op, &x, &PropagationConfig::new(4, Scheme::Sgc))
            .unwrap()
            .into_sum()
            .unwrap();
        for u in 0..6 {
            assert_eq!(out.row(u), x.row(u));
        }
    }
}

#[test]
fn single_precision_tracks_double() {
    let g = er(80, 0.1, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_features(&mut rng, 80, 4);
    let cfg = PropagationConfig::new(3, Scheme::S2gc);
    let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(0.5), 1.0).unwrap();
    let y64 = propagate(&op, &x, &cfg).unwrap().into_sum().unwrap();

    let g32: Graph32 = g.cast();
    let x32 = FeatureMatrix::new(80, 4, x.as_slice().iter().map(|&v| v as f32).collect()).unwrap();
    let op32 = NodeWiseOperator::build(&g32, &KernelSpec::Fixed(0.5f32), 1.0).unwrap();
    let y32 = propagate(&op32, &x32, &PropagationConfig::new(3, Scheme::S2gc))
        .unwrap()
        .into_sum()
        .unwrap();
    for (a, b) in y32.as_slice().iter().zip(y64.as_slice()) {
        assert!((f64::from(*a) - b).abs() < 1e-5 * b.abs().max(1.0));
    }
}

/// Looped P_4 splits into symmetric and antisymmetric 2x2 blocks of
/// `D^-1/2 (A + I) D^-1/2` with degrees [2, 3, 3, 2]:
/// symmetric [[1/2, 1/sqrt6], [1/sqrt6, 2/3]] -> {1, 1/6},
/// antisymmetric [[1/2, 1/sqrt6], [1/sqrt6, 0]] -> (1/2 +- sqrt(11/12)) / 2.
#[test]
fn epsilon_selection_on_looped_path() {
    let lambda = (0.5 + (11.0f64 / 12.0).sqrt()) / 2.0;
    let k = 2;
    let end = (10.0f64 / 2.0).sqrt() * lambda.powi(k);
    let mid = (10.0f64 / 3.0).sqrt() * lambda.powi(k);

    let g: Graph = generate(&GraphKind::Path { n: 4 }, 0).unwrap();
    let looped = g.add_self_loops(1.0).unwrap();
    let bounds = node_bounds(&looped, k as usize, EigenMethod::Dense).unwrap();
    for (b, want) in bounds.iter().zip([end, mid, mid, end]) {
        assert!((b - want).abs() < 1e-12, "{b} vs {want}");
    }
    let eps = 0.5 * (end + mid);
    assert_eq!(select_nodes_epsilon(&g, eps, k as usize, None).unwrap(), vec![0, 3]);
    assert!(select_nodes_epsilon(&g, f64::INFINITY, 2, None).unwrap().is_empty());
    assert_eq!(select_nodes_epsilon(&g, 0.0, 2, None).unwrap(), vec![0, 1, 2, 3]);
}

#[test]
fn eigenvector_encoding_matches_dense_oracle() {
    for seed in 0..6 {
        // sparse ER graphs at this density usually split into several components
        let g = er(60 + 20 * seed as usize, 0.03, seed);
        let enc = eigenvector_encoding(&g, &EncodingConfig::default()).unwrap();
        let comps = g.connected_components();
        for nodes in comps.members() {
            if nodes.len() == 1 {
                assert_eq!(enc[nodes[0]], 0.0);
                continue;
            }
            let sub = DenseMatrix::from_fn(nodes.len(), nodes.len(), |a, b| {
                g.weight(nodes[a], nodes[b]).unwrap_or(0.0)
            });
            let (vals, vecs) = dense_eig_symmetric(&sub).unwrap();
            assert!(vals[0] > 0.0);
            let col: Vec<f64> = (0..nodes.len()).map(|a| vecs[(a, 0)].abs()).collect();
            let peak = col.iter().copied().fold(0.0, f64::max);
            for (a, &u) in nodes.iter().enumerate() {
                assert!((enc[u] - col[a] / peak).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn symmetrized_walk_is_symmetric() {
    let g = er(50, 0.1, 1).add_self_loops(1.0).unwrap();
    let s = symmetrized_walk(&g).unwrap();
    assert!(s.is_symmetric(1e-15));
}
