//! Node-wise propagation operator and k-step weighted propagation.
//!
//! The operator is `M = D^(R-1) A D^(-R)` on the corrected, self-looped
//! adjacency `A`, with `R` the per-node kernel coefficients. `r = 0` gives the
//! random-walk operator `D^-1 A`, `r = 1/2` the symmetric `D^-1/2 A D^-1/2`
//! and `r = 1` the reverse walk `A D^-1`. Only the two scale vectors
//! `d^(r-1)` and `d^(-r)` are stored; every hop is one CSR mat-vec over the
//! feature block.

use rayon::prelude::*;

use crate::encoding::KernelCoefficients;
use crate::error::{Error, Result};
use crate::graph::{DegreeVector, FeatureMatrix, SparseGraph};
use crate::scalar::{Scalar, Weight};

/// Hop-weight schedule `w_0..w_k`.
#[derive(Clone, Debug, PartialEq)]
pub enum Scheme<W> {
    /// Last hop only.
    Sgc,
    /// Uniform average over hops `0..=k`.
    S2gc,
    /// `beta * (1 - beta)^i`.
    Gbp { beta: W },
    /// `omega^i / ((i!)^rho * C)` with `C` the sum of the numerators over `0..=k`.
    Heat { omega: W, rho: W },
    /// Per-hop outputs, unweighted.
    Concat,
    /// Explicit weights, length `k + 1`.
    Custom(Vec<W>),
}

impl<W> Scheme<W> {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Sgc => "sgc",
            Scheme::S2gc => "s2gc",
            Scheme::Gbp { .. } => "gbp",
            Scheme::Heat { .. } => "heat",
            Scheme::Concat => "concat",
            Scheme::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputMode {
    #[default]
    Sum,
    /// One block per hop, `[X, MX, ..., M^k X]`.
    Concat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationConfig<T> {
    pub k: usize,
    pub scheme: Scheme<T>,
    pub mode: OutputMode,
    /// Per-node last hop `l_u <= k` that still contributes to the sum.
    pub node_depths: Option<Vec<usize>>,
}

impl<T> PropagationConfig<T> {
    pub fn new(k: usize, scheme: Scheme<T>) -> Self {
        let mode = match scheme {
            Scheme::Concat => OutputMode::Concat,
            _ => OutputMode::Sum,
        };
        Self {
            k,
            scheme,
            mode,
            node_depths: None,
        }
    }

    pub fn with_depths(mut self, depths: Vec<usize>) -> Self {
        self.node_depths = Some(depths);
        self
    }
}

/// Resolves a scheme into `k + 1` hop weights.
///
/// Works for any [`Weight`], including exact rationals: heat weights with
/// `omega = rho = 1`, `k = 2` come out as exactly `[2/5, 2/5, 1/5]`.
pub fn scheme_weights<W: Weight>(scheme: &Scheme<W>, k: usize) -> Result<Vec<W>> {
    let hops = k + 1;
    let weights = match scheme {
        Scheme::Sgc => (0..hops)
            .map(|i| if i == k { W::one() } else { W::zero() })
            .collect(),
        Scheme::Concat => vec![W::one(); hops],
        Scheme::S2gc => {
            let share = W::one() / W::from_usize(hops).expect("hop count representable");
            vec![share; hops]
        }
        Scheme::Gbp { beta } => {
            if !(beta > &W::zero() && beta < &W::one()) {
                return Err(Error::validation(format!("gbp beta {beta:?} outside (0, 1)")));
            }
            let keep = W::one() - beta.clone();
            let mut w = Vec::with_capacity(hops);
            let mut factor = beta.clone();
            for _ in 0..hops {
                w.push(factor.clone());
                factor = factor * keep.clone();
            }
            w
        }
        Scheme::Heat { omega, rho } => {
            if !(omega > &W::zero()) || !(rho > &W::zero()) {
                return Err(Error::validation(format!(
                    "heat needs omega > 0 and rho > 0 (got {omega:?}, {rho:?})"
                )));
            }
            let mut numerators = Vec::with_capacity(hops);
            let mut omega_pow = W::one();
            let mut factorial = W::one();
            for i in 0..hops {
                if i > 0 {
                    omega_pow = omega_pow * omega.clone();
                    factorial = factorial * W::from_usize(i).expect("hop index representable");
                }
                let denom = factorial.pow(rho).ok_or_else(|| {
                    Error::validation(format!("cannot raise {factorial:?} to {rho:?} exactly"))
                })?;
                numerators.push(omega_pow.clone() / denom);
            }
            let total = numerators.iter().cloned().fold(W::zero(), |a, b| a + b);
            numerators.into_iter().map(|x| x / total.clone()).collect()
        }
        Scheme::Custom(w) => {
            if w.len() != hops {
                return Err(Error::validation(format!(
                    "custom scheme has {} weights, expected {hops}",
                    w.len()
                )));
            }
            w.clone()
        }
    };
    if let Some(bad) = weights.iter().find(|w| !w.is_finite_weight()) {
        return Err(Error::validation(format!("non-finite hop weight {bad:?}")));
    }
    Ok(weights)
}

/// Kernel coefficient source: one value for every node, or one per node.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec<T> {
    Fixed(T),
    PerNode(Vec<T>),
}

impl<T: Scalar> From<&KernelCoefficients<T>> for KernelSpec<T> {
    fn from(k: &KernelCoefficients<T>) -> Self {
        KernelSpec::PerNode(k.r_tilde.clone())
    }
}

/// `M = D^(R-1) A D^(-R)` over a self-looped graph.
#[derive(Clone, Debug)]
pub struct NodeWiseOperator<T> {
    graph: SparseGraph<T>,
    d_hat: DegreeVector<T>,
    r: Vec<T>,
    left: Vec<T>,
    right: Vec<T>,
}

impl<T: Scalar> NodeWiseOperator<T> {
    /// Adds self-loops of `self_loop_weight` to the corrected graph and
    /// precomputes the two per-node scale vectors.
    pub fn build(
        corrected: &SparseGraph<T>,
        kernel: &KernelSpec<T>,
        self_loop_weight: T,
    ) -> Result<Self> {
        if corrected.has_self_loops() {
            return Err(Error::InvalidState(
                "operator expects the corrected graph before self-loops".into(),
            ));
        }
        let graph = corrected.add_self_loops(self_loop_weight)?;
        Self::from_looped(graph, kernel)
    }

    /// Uses an already self-looped graph as `A`.
    pub fn from_looped(graph: SparseGraph<T>, kernel: &KernelSpec<T>) -> Result<Self> {
        let n = graph.node_count();
        let r = match kernel {
            KernelSpec::Fixed(r) => vec![*r; n],
            KernelSpec::PerNode(r) => {
                if r.len() != n {
                    return Err(Error::validation(format!(
                        "kernel has {} entries for {n} nodes",
                        r.len()
                    )));
                }
                r.clone()
            }
        };
        if let Some(bad) = r.iter().find(|&&x| !(x >= T::zero() && x <= T::one())) {
            return Err(Error::validation(format!("kernel coefficient {bad} outside [0, 1]")));
        }
        let d_hat = graph.degrees();
        if let Some((node, &d)) = d_hat.values.iter().enumerate().find(|(_, &d)| d <= T::zero()) {
            return Err(Error::DegenerateDegree {
                node,
                degree: d.as_f64(),
            });
        }
        let left = d_hat
            .values
            .iter()
            .zip(&r)
            .map(|(&d, &r)| d.powf(r - T::one()))
            .collect();
        let right = d_hat.values.iter().zip(&r).map(|(&d, &r)| d.powf(-r)).collect();
        Ok(Self {
            graph,
            d_hat,
            r,
            left,
            right,
        })
    }

    pub fn graph(&self) -> &SparseGraph<T> {
        &self.graph
    }

    pub fn degrees(&self) -> &DegreeVector<T> {
        &self.d_hat
    }

    pub fn kernel(&self) -> &[T] {
        &self.r
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Operator entry `M[u][v]`.
    pub fn entry(&self, u: usize, v: usize) -> T {
        self.graph
            .weight(u, v)
            .map_or(T::zero(), |w| self.left[u] * w * self.right[v])
    }

    /// `out = M x`. Rows are computed in parallel; each row sums its
    /// neighbors in CSR order, so the result does not depend on thread count.
    pub fn apply(&self, x: &FeatureMatrix<T>, out: &mut FeatureMatrix<T>) -> Result<()> {
        let n = self.node_count();
        if x.rows() != n || out.rows() != n || x.cols() != out.cols() {
            return Err(Error::validation(format!(
                "feature block has {} rows for an operator over {n} nodes",
                x.rows()
            )));
        }
        let f = x.cols();
        if f == 0 {
            return Ok(());
        }
        out.as_mut_slice()
            .par_chunks_mut(f)
            .with_min_len(64)
            .enumerate()
            .for_each(|(u, row)| {
                row.fill(T::zero());
                for (v, w) in self.graph.row(u) {
                    let s = w * self.right[v];
                    for (acc, &xv) in row.iter_mut().zip(x.row(v)) {
                        *acc += s * xv;
                    }
                }
                let l = self.left[u];
                for acc in row.iter_mut() {
                    *acc *= l;
                }
            });
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PropagatedFeatures<T> {
    Sum(FeatureMatrix<T>),
    /// `k + 1` blocks, hop 0 first.
    Concat(Vec<FeatureMatrix<T>>),
}

impl<T> PropagatedFeatures<T> {
    pub fn into_sum(self) -> Option<FeatureMatrix<T>> {
        match self {
            PropagatedFeatures::Sum(x) => Some(x),
            PropagatedFeatures::Concat(_) => None,
        }
    }

    pub fn into_hops(self) -> Option<Vec<FeatureMatrix<T>>> {
        match self {
            PropagatedFeatures::Sum(_) => None,
            PropagatedFeatures::Concat(h) => Some(h),
        }
    }
}

/// Per-row weights after depth truncation. Rows that stop at `l < k` keep the
/// scheme's total weight, rescaled over hops `0..=l`; if those hops carry no
/// weight (SGC), the whole total moves to hop `l`.
fn truncated_weights<T: Scalar>(weights: &[T], depth: usize) -> Vec<T> {
    let k = weights.len() - 1;
    if depth >= k {
        return weights.to_vec();
    }
    let total: T = weights.iter().copied().sum();
    let partial: T = weights[..=depth].iter().copied().sum();
    let mut w = vec![T::zero(); k + 1];
    if partial == T::zero() {
        w[depth] = total;
    } else {
        let scale = total / partial;
        for i in 0..=depth {
            w[i] = weights[i] * scale;
        }
    }
    w
}

/// Computes `sum_i w_i M^i X` (sum mode) or `[X, MX, ..., M^k X]` (concat mode).
pub fn propagate<T: Scalar>(
    op: &NodeWiseOperator<T>,
    x: &FeatureMatrix<T>,
    cfg: &PropagationConfig<T>,
) -> Result<PropagatedFeatures<T>> {
    let n = op.node_count();
    if x.rows() != n {
        return Err(Error::validation(format!(
            "feature block has {} rows, graph has {n} nodes",
            x.rows()
        )));
    }
    let k = cfg.k;
    let concat = cfg.mode == OutputMode::Concat || matches!(cfg.scheme, Scheme::Concat);
    let weights = scheme_weights(&cfg.scheme, k)?;

    let depths = match &cfg.node_depths {
        Some(d) if d.len() != n => {
            return Err(Error::validation(format!(
                "node_depths has {} entries for {n} nodes",
                d.len()
            )))
        }
        Some(d) => {
            if let Some(bad) = d.iter().find(|&&l| l > k) {
                return Err(Error::validation(format!("node depth {bad} exceeds k = {k}")));
            }
            Some(d)
        }
        None => None,
    };
    let row_weights: Option<Vec<Vec<T>>> = depths.map(|d| {
        let mut cache: Vec<Option<Vec<T>>> = vec![None; k + 1];
        d.iter()
            .map(|&l| {
                cache[l]
                    .get_or_insert_with(|| truncated_weights(&weights, l))
                    .clone()
            })
            .collect()
    });

    let f = x.cols();
    let mut current = x.clone();
    let mut next = FeatureMatrix::zeros(n, f);
    let mut hops = Vec::new();
    let mut acc = FeatureMatrix::<T>::zeros(n, f);

    for i in 0..=k {
        if i > 0 {
            op.apply(&current, &mut next)?;
            std::mem::swap(&mut current, &mut next);
            if current.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { hop: i });
            }
        }
        if concat {
            hops.push(current.clone());
            continue;
        }
        match &row_weights {
            None => {
                let w = weights[i];
                if w != T::zero() {
                    for (a, &c) in acc.as_mut_slice().iter_mut().zip(current.as_slice()) {
                        *a += w * c;
                    }
                }
            }
            Some(rows) => {
                for u in 0..n {
                    let w = rows[u][i];
                    if w != T::zero() {
                        for (a, &c) in acc.row_mut(u).iter_mut().zip(current.row(u)) {
                            *a += w * c;
                        }
                    }
                }
            }
        }
    }
    if concat {
        Ok(PropagatedFeatures::Concat(hops))
    } else {
        if acc.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { hop: k });
        }
        Ok(PropagatedFeatures::Sum(acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{dense_operator, dense_propagate, DenseMatrix};
    use crate::generate::{generate, GraphKind};
    use crate::Rational;
    use num_bigint::BigInt;

    type G = SparseGraph<f64>;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn heat_weights_exact() {
        let w = scheme_weights(&Scheme::Heat { omega: q(1, 1), rho: q(1, 1) }, 2).unwrap();
        assert_eq!(w, vec![q(2, 5), q(2, 5), q(1, 5)]);
        let wf = scheme_weights(&Scheme::Heat { omega: 1.0f64, rho: 1.0 }, 2).unwrap();
        assert_eq!(wf, vec![0.4, 0.4, 0.2]);
        assert!(scheme_weights(&Scheme::Heat { omega: q(1, 1), rho: q(1, 2) }, 2).is_err());
    }

    #[test]
    fn scheme_examples() {
        assert_eq!(scheme_weights(&Scheme::<f64>::S2gc, 3).unwrap(), vec![0.25; 4]);
        assert_eq!(
            scheme_weights(&Scheme::Gbp { beta: 0.5f64 }, 2).unwrap(),
            vec![0.5, 0.25, 0.125]
        );
        assert_eq!(scheme_weights(&Scheme::<f64>::Sgc, 2).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(
            scheme_weights(&Scheme::Gbp { beta: q(1, 2) }, 2).unwrap(),
            vec![q(1, 2), q(1, 4), q(1, 8)]
        );
    }

    #[test]
    fn scheme_validation() {
        assert!(scheme_weights(&Scheme::Gbp { beta: 1.0f64 }, 2).is_err());
        assert!(scheme_weights(&Scheme::Heat { omega: 0.0f64, rho: 1.0 }, 2).is_err());
        assert!(scheme_weights(&Scheme::Custom(vec![1.0f64]), 2).is_err());
        assert!(scheme_weights(&Scheme::Custom(vec![1.0f64, f64::NAN]), 1).is_err());
    }

    #[test]
    fn fixed_kernel_operators() {
        let g: G = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
        let d = [2.0f64, 3.0, 2.0];
        for (r, f) in [
            (0.0, Box::new(|u: usize, _v: usize| 1.0 / d[u]) as Box<dyn Fn(usize, usize) -> f64>),
            (0.5, Box::new(|u: usize, v: usize| 1.0 / (d[u] * d[v]).sqrt())),
            (1.0, Box::new(|_u: usize, v: usize| 1.0 / d[v])),
        ] {
            let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(r), 1.0).unwrap();
            for u in 0..3 {
                for v in 0..3 {
                    let a = op.graph().weight(u, v).unwrap_or(0.0);
                    assert!((op.entry(u, v) - a * f(u, v)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn build_rejects_bad_input() {
        let g: G = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
        let looped = g.add_self_loops(1.0).unwrap();
        assert!(NodeWiseOperator::build(&looped, &KernelSpec::Fixed(0.5), 1.0).is_err());
        assert!(NodeWiseOperator::build(&g, &KernelSpec::PerNode(vec![0.5; 2]), 1.0).is_err());
        assert!(NodeWiseOperator::build(&g, &KernelSpec::Fixed(1.5), 1.0).is_err());
        let iso = G::from_unweighted_edges(2, []).unwrap();
        assert!(matches!(
            NodeWiseOperator::build(&iso, &KernelSpec::Fixed(0.5), 0.0),
            Err(Error::DegenerateDegree { node: 0, .. })
        ));
    }

    #[test]
    fn k_zero_is_identity() {
        let g: G = generate(&GraphKind::Cycle { n: 5 }, 0).unwrap();
        let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(0.3), 1.0).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0], vec![7.0, 8.0], vec![9.0, 0.0]]).unwrap();
        for scheme in [Scheme::Sgc, Scheme::S2gc, Scheme::Gbp { beta: 0.5 }] {
            let beta_total = scheme_weights(&scheme, 0).unwrap()[0];
            let out = propagate(&op, &x, &PropagationConfig::new(0, scheme)).unwrap();
            let out = out.into_sum().unwrap();
            for (a, b) in out.as_slice().iter().zip(x.as_slice()) {
                assert_eq!(*a, beta_total * b);
            }
        }
    }

    #[test]
    fn single_node_is_fixed_point() {
        let g = G::from_unweighted_edges(1, []).unwrap();
        let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(0.7), 1.0).unwrap();
        let x = FeatureMatrix::new(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let out = propagate(&op, &x, &PropagationConfig::new(3, Scheme::S2gc))
            .unwrap()
            .into_sum()
            .unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn p3_sgc_matches_dense_square() {
        let g: G = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
        let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(0.5), 1.0).unwrap();
        let x = FeatureMatrix::identity(3);
        let out = propagate(&op, &x, &PropagationConfig::new(2, Scheme::Sgc))
            .unwrap()
            .into_sum()
            .unwrap();
        let looped = g.add_self_loops(1.0).unwrap();
        let m = dense_operator(&looped, &[0.5; 3]).unwrap();
        let expect = m.matmul(&m).unwrap();
        let got = DenseMatrix::from_features(&out);
        assert!(got.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn concat_mode_returns_every_hop() {
        let g: G = generate(&GraphKind::Cycle { n: 4 }, 0).unwrap();
        let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(0.5), 1.0).unwrap();
        let x = FeatureMatrix::identity(4);
        let hops = propagate(&op, &x, &PropagationConfig::new(2, Scheme::Concat))
            .unwrap()
            .into_hops()
            .unwrap();
        assert_eq!(hops.len(), 3);
        assert_eq!(hops[0], x);
        let looped = g.add_self_loops(1.0).unwrap();
        let m = dense_operator(&looped, &[0.5; 4]).unwrap();
        let w = [0.0, 0.0, 1.0];
        let expect = dense_propagate(&m, &DenseMatrix::from_features(&x), &w).unwrap();
        assert!(DenseMatrix::from_features(&hops[2]).max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn depth_truncation() {
        let g: G = generate(&GraphKind::Path { n: 4 }, 0).unwrap();
        let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(0.5), 1.0).unwrap();
        let x = FeatureMatrix::identity(4);
        let full = propagate(&op, &x, &PropagationConfig::new(3, Scheme::S2gc)).unwrap();
        let same = propagate(
            &op,
            &x,
            &PropagationConfig::new(3, Scheme::S2gc).with_depths(vec![3; 4]),
        )
        .unwrap();
        assert_eq!(full, same);

        // node 0 stops at hop 1: average of X and MX
        let cut = propagate(
            &op,
            &x,
            &PropagationConfig::new(3, Scheme::S2gc).with_depths(vec![1, 3, 3, 3]),
        )
        .unwrap()
        .into_sum()
        .unwrap();
        let hop1 = propagate(&op, &x, &PropagationConfig::new(1, Scheme::S2gc))
            .unwrap()
            .into_sum()
            .unwrap();
        for j in 0..4 {
            assert!((cut.get(0, j) - hop1.get(0, j)).abs() < 1e-15);
        }
        let full = full.into_sum().unwrap();
        assert_eq!(cut.row(2), full.row(2));

        assert!(propagate(
            &op,
            &x,
            &PropagationConfig::new(3, Scheme::S2gc).with_depths(vec![4; 4])
        )
        .is_err());
    }

    #[test]
    fn sgc_truncation_moves_weight_to_last_hop() {
        assert_eq!(truncated_weights(&[0.0, 0.0, 1.0], 1), vec![0.0, 1.0, 0.0]);
        assert_eq!(truncated_weights(&[0.25, 0.25, 0.5], 0), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn row_count_mismatch() {
        let g: G = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
        let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(0.5), 1.0).unwrap();
        let x = FeatureMatrix::<f64>::identity(2);
        assert!(matches!(
            propagate(&op, &x, &PropagationConfig::new(1, Scheme::Sgc)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn overflow_reports_hop() {
        // r = [1, 0] leaves M[0][1] equal to the raw 1e300 edge weight
        let g = G::from_edges(2, [(0, 1, 1e300)], crate::graph::Symmetry::Reject).unwrap();
        let op = NodeWiseOperator::build(&g, &KernelSpec::PerNode(vec![1.0, 0.0]), 1.0).unwrap();
        let x = FeatureMatrix::new(2, 1, vec![1e300, 1e300]).unwrap();
        assert!(matches!(
            propagate(&op, &x, &PropagationConfig::new(3, Scheme::Sgc)),
            Err(Error::Numeric { hop: 1 })
        ));
    }

    #[test]
    fn works_in_f32() {
        let g: SparseGraph<f32> = generate(&GraphKind::Cycle { n: 6 }, 0).unwrap();
        let op = NodeWiseOperator::build(&g, &KernelSpec::Fixed(0.0f32), 1.0).unwrap();
        let x = FeatureMatrix::new(6, 1, vec![2.0f32; 6]).unwrap();
        let out = propagate(&op, &x, &PropagationConfig::new(4, Scheme::S2gc))
            .unwrap()
            .into_sum()
            .unwrap();
        assert!(out.as_slice().iter().all(|&v| (v - 2.0).abs() < 1e-5));
    }
}
