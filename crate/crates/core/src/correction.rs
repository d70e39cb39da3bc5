//! Degree-targeted edge masking.
//!
//! A node subset is chosen from the top of the degree ranking plus a seeded
//! uniform sample of the remaining nodes; a fixed fraction of each chosen
//! node's incident edges is then multiplied by the mask token (0 removes the
//! edge). Masking runs on the graph before self-loops are added.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::scalar::{robust_ceil, robust_floor, Scalar};
use crate::spectral;

const SELECTION_STREAM: u64 = 0;
const MASKING_STREAM: u64 = 1;

/// Masking configuration before resolution against a graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskParams {
    /// Fraction of nodes taken from the top of the degree ranking.
    pub theta: f64,
    /// Fraction of the remaining nodes sampled uniformly, at most 0.5.
    pub sparse_sample_ratio: f64,
    /// Fraction of each selected node's edges to mask.
    pub edge_mask_fraction: f64,
    /// Multiplier applied to masked edges; 0 removes them.
    pub mask_token: f64,
    pub seed: u64,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            theta: 0.10,
            sparse_sample_ratio: 0.2,
            edge_mask_fraction: 0.5,
            mask_token: 0.0,
            seed: 0,
        }
    }
}

impl MaskParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, hi: f64| {
            if (0.0..=hi).contains(&v) {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} = {v} outside [0, {hi}]")))
            }
        };
        check("theta", self.theta, 1.0)?;
        check("sparse_sample_ratio", self.sparse_sample_ratio, 0.5)?;
        check("edge_mask_fraction", self.edge_mask_fraction, 1.0)?;
        check("mask_token", self.mask_token, 1.0)
    }
}

/// Masking parameters together with the node and edge sets they resolve to.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPlan {
    pub params: MaskParams,
    /// Ascending node ids.
    pub selected_nodes: Vec<usize>,
    /// Undirected pairs `(lo, hi)`, in the order they were chosen.
    pub masked_edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionReport {
    /// Positive-weight undirected edges before masking.
    pub edges_before: usize,
    pub edges_masked: usize,
    /// Masked edges whose weight became zero.
    pub edges_removed: usize,
    /// `(node, weighted degree before - after)` for each selected node.
    pub degree_reduction_per_selected_node: Vec<(usize, f64)>,
}

impl CorrectionReport {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "edges_before: {}", self.edges_before);
        let _ = writeln!(s, "edges_masked: {}", self.edges_masked);
        let _ = writeln!(s, "edges_removed: {}", self.edges_removed);
        let _ = writeln!(s, "selected_nodes: {}", self.degree_reduction_per_selected_node.len());
        let reductions: Vec<String> = self
            .degree_reduction_per_selected_node
            .iter()
            .map(|(u, d)| format!("{u}:{d}"))
            .collect();
        let _ = writeln!(s, "degree_reduction: {}", reductions.join(" "));
        s
    }
}

fn require_loop_free<T: Scalar>(g: &SparseGraph<T>) -> Result<()> {
    if g.has_self_loops() {
        return Err(Error::InvalidState(
            "masking operates on the graph before self-loops are added".into(),
        ));
    }
    Ok(())
}

/// Top `ceil(theta * n)` nodes by weighted degree (ties to the smaller id),
/// plus `floor(ratio * (n - top))` of the rest sampled uniformly.
pub fn select_nodes<T: Scalar>(
    g: &SparseGraph<T>,
    theta: f64,
    sparse_sample_ratio: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    require_loop_free(g)?;
    MaskParams {
        theta,
        sparse_sample_ratio,
        ..MaskParams::default()
    }
    .validate()?;
    let n = g.node_count();
    let deg = g.degrees().values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| deg[b].partial_cmp(&deg[a]).unwrap().then(a.cmp(&b)));

    let top = robust_ceil(theta * n as f64).min(n);
    let mut selected: Vec<usize> = order[..top].to_vec();

    let mut rest: Vec<usize> = order[top..].to_vec();
    rest.sort_unstable();
    let extra = robust_floor(sparse_sample_ratio * rest.len() as f64).min(rest.len());
    if extra > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(SELECTION_STREAM);
        let picks = rand::seq::index::sample(&mut rng, rest.len(), extra);
        selected.extend(picks.iter().map(|i| rest[i]));
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Nodes whose convergence bound `sqrt(vol / d_i) * lambda^k` on the
/// self-looped graph exceeds `epsilon`.
///
/// `lambda2` overrides the decay rate; without it the rate is computed
/// densely, which is refused beyond [`spectral::DENSE_LIMIT`] nodes.
pub fn select_nodes_epsilon<T: Scalar>(
    g: &SparseGraph<T>,
    epsilon: f64,
    k: usize,
    lambda2: Option<f64>,
) -> Result<Vec<usize>> {
    require_loop_free(g)?;
    if epsilon.is_nan() {
        return Err(Error::validation("epsilon is NaN"));
    }
    let looped = g.add_self_loops(T::one())?;
    let bounds = match lambda2 {
        Some(l) => {
            let l = T::lit(l);
            (0..g.node_count())
                .map(|i| spectral::convergence_bound(&looped, i, k, l))
                .collect::<Result<Vec<T>>>()?
        }
        None => {
            if g.node_count() > spectral::DENSE_LIMIT {
                return Err(Error::Capability(format!(
                    "second eigenvalue of a {}-node graph needs an explicit override",
                    g.node_count()
                )));
            }
            spectral::node_bounds(&looped, k, spectral::EigenMethod::Dense)?
        }
    };
    Ok(bounds
        .iter()
        .enumerate()
        .filter(|(_, &b)| b.as_f64() > epsilon)
        .map(|(i, _)| i)
        .collect())
}

impl MaskPlan {
    /// Resolves node selection and the masked edge set against `g`.
    pub fn resolve<T: Scalar>(g: &SparseGraph<T>, params: MaskParams) -> Result<Self> {
        params.validate()?;
        let selected = select_nodes(g, params.theta, params.sparse_sample_ratio, params.seed)?;
        Self::with_selection(g, params, selected)
    }

    /// Resolves the masked edge set for an externally chosen node set (for
    /// instance from [`select_nodes_epsilon`]).
    ///
    /// Selected nodes are visited in ascending order. Each masks
    /// `floor(fraction * degree)` of its positive-weight edges, chosen by a
    /// seeded shuffle; an edge between two selected nodes belongs to the
    /// lower id only. The shuffle consumes the same randomness for every
    /// fraction, so a larger fraction masks a superset of edges.
    pub fn with_selection<T: Scalar>(
        g: &SparseGraph<T>,
        params: MaskParams,
        mut selected: Vec<usize>,
    ) -> Result<Self> {
        params.validate()?;
        require_loop_free(g)?;
        let n = g.node_count();
        selected.sort_unstable();
        selected.dedup();
        if let Some(&bad) = selected.iter().find(|&&u| u >= n) {
            return Err(Error::validation(format!("selected node {bad} out of range")));
        }
        let mut is_selected = vec![false; n];
        for &u in &selected {
            is_selected[u] = true;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(MASKING_STREAM);
        let mut masked_edges = Vec::new();
        for &u in &selected {
            let degree = g.structural_degree(u);
            let quota = robust_floor(params.edge_mask_fraction * degree as f64);
            let mut candidates: Vec<usize> = g
                .active_neighbors(u)
                .filter(|&v| !(is_selected[v] && v < u))
                .collect();
            candidates.shuffle(&mut rng);
            masked_edges.extend(
                candidates
                    .into_iter()
                    .take(quota)
                    .map(|v| (u.min(v), u.max(v))),
            );
        }
        Ok(Self {
            params,
            selected_nodes: selected,
            masked_edges,
        })
    }
}

/// Applies a resolved plan, multiplying every masked edge (both stored
/// directions) by the mask token.
pub fn apply_mask<T: Scalar>(
    g: &SparseGraph<T>,
    plan: &MaskPlan,
) -> Result<(SparseGraph<T>, CorrectionReport)> {
    require_loop_free(g)?;
    plan.params.validate()?;
    let n = g.node_count();
    if let Some(&bad) = plan.selected_nodes.iter().find(|&&u| u >= n) {
        return Err(Error::validation(format!("selected node {bad} out of range")));
    }
    let selected: HashSet<usize> = plan.selected_nodes.iter().copied().collect();
    let mut masked = HashSet::with_capacity(plan.masked_edges.len());
    for &(a, b) in &plan.masked_edges {
        let (u, v) = (a.min(b), a.max(b));
        if v >= n || u == v || g.weight(u, v).is_none() {
            return Err(Error::validation(format!(
                "masked edge ({a}, {b}) is not a non-loop edge of the graph"
            )));
        }
        if !selected.contains(&u) && !selected.contains(&v) {
            return Err(Error::validation(format!(
                "masked edge ({a}, {b}) is not incident to a selected node"
            )));
        }
        if !masked.insert((u, v)) {
            return Err(Error::validation(format!("edge ({a}, {b}) masked twice")));
        }
    }

    let token = T::lit(plan.params.mask_token);
    let corrected = g.with_reweighted(|u, v, w| {
        if masked.contains(&(u, v)) {
            w * token
        } else {
            w
        }
    });

    let before = g.degrees().values;
    let after = corrected.degrees().values;
    let report = CorrectionReport {
        edges_before: g.active_edge_count(),
        edges_masked: masked.len(),
        edges_removed: if token == T::zero() { masked.len() } else { 0 },
        degree_reduction_per_selected_node: plan
            .selected_nodes
            .iter()
            .map(|&u| (u, (before[u] - after[u]).as_f64()))
            .collect(),
    };
    Ok((corrected, report))
}

/// Resolves and applies in one step.
pub fn correct<T: Scalar>(
    g: &SparseGraph<T>,
    params: MaskParams,
) -> Result<(SparseGraph<T>, MaskPlan, CorrectionReport)> {
    let plan = MaskPlan::resolve(g, params)?;
    let (corrected, report) = apply_mask(g, &plan)?;
    Ok((corrected, plan, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GraphKind};

    type G = SparseGraph<f64>;

    fn star(leaves: usize) -> G {
        generate(&GraphKind::Star { leaves }, 0).unwrap()
    }

    fn params(theta: f64, ratio: f64, fraction: f64, token: f64) -> MaskParams {
        MaskParams {
            theta,
            sparse_sample_ratio: ratio,
            edge_mask_fraction: fraction,
            mask_token: token,
            seed: 11,
        }
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_nodes(&star(4), 0.2, 0.0, 1).unwrap(), vec![0]);
        let c10: G = generate(&GraphKind::Cycle { n: 10 }, 0).unwrap();
        assert_eq!(select_nodes(&c10, 0.1, 0.0, 1).unwrap(), vec![0]);
        assert!(select_nodes(&c10, 0.0, 0.0, 1).unwrap().is_empty());
        assert_eq!(select_nodes(&c10, 1.0, 0.0, 1).unwrap().len(), 10);
    }

    #[test]
    fn sparse_sample_counts() {
        let c10: G = generate(&GraphKind::Cycle { n: 10 }, 0).unwrap();
        let s = select_nodes(&c10, 0.1, 0.5, 3).unwrap();
        // 1 from the top plus floor(0.5 * 9) = 4 sampled
        assert_eq!(s.len(), 5);
        assert!(s.contains(&0));
        assert_eq!(s, select_nodes(&c10, 0.1, 0.5, 3).unwrap());
    }

    #[test]
    fn parameter_ranges() {
        let g = star(3);
        assert!(select_nodes(&g, 1.5, 0.0, 0).is_err());
        assert!(select_nodes(&g, 0.5, 0.6, 0).is_err());
        assert!(MaskPlan::resolve(&g, params(0.5, 0.0, 0.5, 1.5)).is_err());
        let looped = g.add_self_loops(1.0).unwrap();
        assert!(matches!(select_nodes(&looped, 0.1, 0.0, 0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn star_mask_removes_half() {
        let g = star(4);
        let (c, plan, report) = correct(&g, params(0.2, 0.0, 0.5, 0.0)).unwrap();
        assert_eq!(plan.selected_nodes, vec![0]);
        assert_eq!(c.degrees().values[0], 2.0);
        assert_eq!(report.edges_removed, 2);
        assert_eq!(report.edges_masked, 2);
        assert_eq!(report.edges_before, 4);
        assert_eq!(report.degree_reduction_per_selected_node, vec![(0, 2.0)]);
        c.validate().unwrap();
    }

    #[test]
    fn zero_fraction_is_identity() {
        let g = star(4);
        let (c, _, report) = correct(&g, params(0.2, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(c, g);
        assert_eq!(report.edges_masked, 0);
    }

    #[test]
    fn soft_token_halves_weight() {
        let g = G::from_unweighted_edges(2, [(0, 1)]).unwrap();
        let plan = MaskPlan::with_selection(&g, params(0.0, 0.0, 1.0, 0.5), vec![0]).unwrap();
        let (c, report) = apply_mask(&g, &plan).unwrap();
        assert_eq!(c.weight(0, 1), Some(0.5));
        assert_eq!(c.weight(1, 0), Some(0.5));
        assert_eq!(c.degrees().values, vec![0.5, 0.5]);
        assert_eq!(report.edges_removed, 0);
    }

    #[test]
    fn shared_edge_masked_once() {
        // both endpoints selected, fraction 1: node 0 owns the edge
        let g = G::from_unweighted_edges(2, [(0, 1)]).unwrap();
        let plan = MaskPlan::with_selection(&g, params(0.0, 0.0, 1.0, 0.0), vec![0, 1]).unwrap();
        assert_eq!(plan.masked_edges, vec![(0, 1)]);
    }

    #[test]
    fn plan_mismatch_rejected() {
        let g = star(2);
        let mut plan = MaskPlan::with_selection(&g, params(0.0, 0.0, 1.0, 0.0), vec![0]).unwrap();
        plan.masked_edges.push((1, 2));
        assert!(apply_mask(&g, &plan).is_err());
        plan.masked_edges = vec![(0, 7)];
        assert!(apply_mask(&g, &plan).is_err());
        plan.masked_edges.clear();
        plan.selected_nodes = vec![9];
        assert!(apply_mask(&g, &plan).is_err());
    }

    #[test]
    fn epsilon_extremes() {
        let g: G = generate(&GraphKind::Path { n: 5 }, 0).unwrap();
        assert!(select_nodes_epsilon(&g, f64::INFINITY, 2, None).unwrap().is_empty());
        assert_eq!(select_nodes_epsilon(&g, 0.0, 2, None).unwrap().len(), 5);
        assert_eq!(select_nodes_epsilon(&g, 0.0, 2, Some(0.0)).unwrap().len(), 0);
    }

    #[test]
    fn epsilon_needs_override_on_large_graphs() {
        let g: G = generate(&GraphKind::Cycle { n: spectral::DENSE_LIMIT + 1 }, 0).unwrap();
        assert!(matches!(
            select_nodes_epsilon(&g, 0.1, 2, None),
            Err(Error::Capability(_))
        ));
        assert!(select_nodes_epsilon(&g, 0.1, 2, Some(0.5)).is_ok());
    }
}
