//! Canonical undirected CSR graphs and the dense feature / label blocks that
//! ride along with them.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How to treat an input that lists `(u, v)` and `(v, u)` with different weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Symmetry {
    /// Reject: the graph is directed.
    #[default]
    Reject,
    /// Keep the larger of the two directed weights.
    Max,
}

/// Undirected graph in compressed sparse row form.
///
/// Both directions of every edge are stored, rows are sorted and free of
/// duplicates, and weights are symmetric. `edge_weights == None` means every
/// stored entry has weight one. A zero weight marks a masked edge: it stays in
/// the structure but carries no degree and does not connect its endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraph<T> {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    edge_weights: Option<Vec<T>>,
    has_self_loops: bool,
}

/// Weighted degree per node.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeVector<T> {
    pub values: Vec<T>,
}

/// Dense component labelling, ids assigned in order of each component's
/// smallest node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub ids: Vec<usize>,
    pub count: usize,
}

impl Components {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (node, &c) in self.ids.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

impl<T: Scalar> SparseGraph<T> {
    /// Builds a canonical graph from an edge listing.
    ///
    /// Repeated `(u, v)` lines sum their weights. A pair listed in both
    /// orientations is one undirected edge; if the orientations disagree on
    /// weight the input is directed and `symmetry` decides.
    pub fn from_edges<I>(n: usize, edges: I, symmetry: Symmetry) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut directed: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if !w.is_finite() || w < T::zero() {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            *directed.entry((u, v)).or_insert_with(T::zero) += w;
        }

        let mut undirected: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (&(u, v), &w) in &directed {
            if u == v {
                undirected.insert((u, u), w);
                continue;
            }
            let key = (u.min(v), u.max(v));
            if undirected.contains_key(&key) {
                continue;
            }
            let w = match directed.get(&(v, u)) {
                None => w,
                Some(&back) if back == w => w,
                Some(&back) => match symmetry {
                    Symmetry::Reject => {
                        return Err(Error::validation(format!(
                            "directed input: ({u}, {v}) has weight {w} but ({v}, {u}) has {back}"
                        )))
                    }
                    Symmetry::Max => w.max(back),
                },
            };
            undirected.insert(key, w);
        }

        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (&(u, v), &w) in &undirected {
            rows[u].push((v, w));
            if u != v {
                rows[v].push((u, w));
            }
        }
        Ok(Self::from_rows(rows))
    }

    pub fn from_unweighted_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_edges(n, edges.into_iter().map(|(u, v)| (u, v, T::one())), Symmetry::Reject)
    }

    /// Assembles CSR arrays from per-row adjacency; rows must already be symmetric.
    fn from_rows(mut rows: Vec<Vec<(usize, T)>>) -> Self {
        let n = rows.len();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut weights = Vec::new();
        let mut has_self_loops = false;
        row_offsets.push(0);
        for (u, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(v, _)| v);
            for &(v, w) in row.iter() {
                has_self_loops |= v == u;
                col_indices.push(v);
                weights.push(w);
            }
            row_offsets.push(col_indices.len());
        }
        let edge_weights = if weights.iter().all(|&w| w == T::one()) {
            None
        } else {
            Some(weights)
        };
        Self {
            n,
            row_offsets,
            col_indices,
            edge_weights,
            has_self_loops,
        }
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_csr(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        edge_weights: Option<Vec<T>>,
    ) -> Result<Self> {
        let has_self_loops = (0..n).any(|u| {
            row_offsets
                .get(u..u + 2)
                .map(|r| col_indices.get(r[0]..r[1]).is_some_and(|c| c.contains(&u)))
                .unwrap_or(false)
        });
        let g = Self {
            n,
            row_offsets,
            col_indices,
            edge_weights,
            has_self_loops,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.row_offsets.len() != self.n + 1 || self.row_offsets[0] != 0 {
            return bad("row_offsets must have length n+1 and start at 0".into());
        }
        if self.row_offsets[self.n] != self.col_indices.len() {
            return bad("row_offsets[n] must equal the number of stored entries".into());
        }
        if let Some(w) = &self.edge_weights {
            if w.len() != self.col_indices.len() {
                return bad("edge_weights length mismatch".into());
            }
            if let Some(x) = w.iter().find(|x| !x.is_finite() || **x < T::zero()) {
                return bad(format!("invalid edge weight {x}"));
            }
        }
        for u in 0..self.n {
            let (a, b) = (self.row_offsets[u], self.row_offsets[u + 1]);
            if a > b {
                return bad(format!("row_offsets decrease at row {u}"));
            }
            let cols = &self.col_indices[a..b];
            if cols.iter().any(|&v| v >= self.n) {
                return bad(format!("column index out of range in row {u}"));
            }
            if cols.windows(2).any(|p| p[0] >= p[1]) {
                return bad(format!("row {u} is not strictly increasing"));
            }
        }
        for (u, v, w) in self.entries() {
            if self.weight(v, u) != Some(w) {
                return bad(format!("asymmetric entry ({u}, {v})"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Stored CSR entries (both directions, loops once).
    #[inline]
    pub fn stored_entries(&self) -> usize {
        self.col_indices.len()
    }

    /// Undirected non-loop edges, including zero-weight (masked) ones.
    pub fn edge_count(&self) -> usize {
        let loops = self.entries().filter(|&(u, v, _)| u == v).count();
        (self.stored_entries() - loops) / 2
    }

    /// Undirected non-loop edges with positive weight.
    pub fn active_edge_count(&self) -> usize {
        self.edges()
            .filter(|&(u, v, w)| u != v && w > T::zero())
            .count()
    }

    #[inline]
    pub fn has_self_loops(&self) -> bool {
        self.has_self_loops
    }

    #[inline]
    pub fn is_weighted(&self) -> bool {
        self.edge_weights.is_some()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn edge_weights(&self) -> Option<&[T]> {
        self.edge_weights.as_deref()
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    /// `(neighbor, weight)` pairs of row `u` in storage order.
    #[inline]
    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        range.map(move |e| (self.col_indices[e], self.weight_at(e)))
    }

    #[inline]
    fn weight_at(&self, e: usize) -> T {
        match &self.edge_weights {
            Some(w) => w[e],
            None => T::one(),
        }
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<T> {
        let a = self.row_offsets[u];
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|i| self.weight_at(a + i))
    }

    /// Every stored entry `(u, v, w)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |u| self.row(u).map(move |(v, w)| (u, v, w)))
    }

    /// Every undirected edge once, as `(u, v, w)` with `u <= v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries().filter(|&(u, v, _)| u <= v)
    }

    /// Neighbors over positive-weight, non-loop edges.
    pub fn active_neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(u)
            .filter(move |&(v, w)| v != u && w > T::zero())
            .map(|(v, _)| v)
    }

    /// Number of positive-weight non-loop edges at `u`.
    pub fn structural_degree(&self, u: usize) -> usize {
        self.active_neighbors(u).count()
    }

    pub fn degrees(&self) -> DegreeVector<T> {
        let values = (0..self.n)
            .map(|u| self.row(u).map(|(_, w)| w).sum())
            .collect();
        DegreeVector { values }
    }

    /// Adds a loop of `weight` at every node.
    pub fn add_self_loops(&self, weight: T) -> Result<Self> {
        if self.has_self_loops {
            return Err(Error::InvalidState("graph already has self-loops".into()));
        }
        if !weight.is_finite() || weight < T::zero() {
            return Err(Error::validation(format!("invalid self-loop weight {weight}")));
        }
        let rows = (0..self.n)
            .map(|u| {
                let mut row: Vec<(usize, T)> = self.row(u).collect();
                row.push((u, weight));
                row
            })
            .collect();
        Ok(Self::from_rows(rows))
    }

    /// Returns a copy with every loop removed.
    pub fn without_self_loops(&self) -> Self {
        let rows = (0..self.n)
            .map(|u| self.row(u).filter(|&(v, _)| v != u).collect())
            .collect();
        Self::from_rows(rows)
    }

    /// Rebuilds the graph with every weight mapped through `f(lo, hi, w)`,
    /// where `lo <= hi` are the endpoints. Both stored directions see the same call.
    pub(crate) fn with_reweighted<F>(&self, mut f: F) -> Self
    where
        F: FnMut(usize, usize, T) -> T,
    {
        let rows = (0..self.n)
            .map(|u| {
                self.row(u)
                    .map(|(v, w)| (v, f(u.min(v), u.max(v), w)))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    /// Components over positive-weight edges.
    pub fn connected_components(&self) -> Components {
        let mut ids = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if ids[s] != usize::MAX {
                continue;
            }
            ids[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for v in self.active_neighbors(u) {
                    if ids[v] == usize::MAX {
                        ids[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        Components { ids, count }
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().count <= 1
    }

    /// Relabels nodes: node `u` becomes `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.n];
        for (u, v, w) in self.entries() {
            rows[perm[u]].push((perm[v], w));
        }
        Ok(Self::from_rows(rows))
    }

    /// Casts weights into another scalar type.
    pub fn cast<U: Scalar>(&self) -> SparseGraph<U> {
        SparseGraph {
            n: self.n,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            edge_weights: self
                .edge_weights
                .as_ref()
                .map(|w| w.iter().map(|x| U::lit(x.as_f64())).collect()),
            has_self_loops: self.has_self_loops,
        }
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::validation("permutation length mismatch"));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::validation("not a permutation"));
        }
    }
    Ok(())
}

/// Dense `n x f` row-major feature block.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    n: usize,
    f: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(n: usize, f: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * f {
            return Err(Error::validation(format!(
                "feature block of {} values does not match {n} x {f}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite feature at row {}, column {}",
                i / f.max(1),
                i % f.max(1)
            )));
        }
        Ok(Self { n, f, data })
    }

    pub fn zeros(n: usize, f: usize) -> Self {
        Self {
            n,
            f,
            data: vec![T::zero(); n * f],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let f = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != f) {
            return Err(Error::validation("ragged feature rows"));
        }
        Self::new(rows.len(), f, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.f
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.f..(i + 1) * self.f]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.f..(i + 1) * self.f]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.f + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Largest entrywise `|a - b| / max(1, |b|)`.
    pub fn max_relative_diff(&self, other: &Self) -> T {
        assert_eq!((self.n, self.f), (other.n, other.f));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs() / b.abs().max(T::one()))
            .fold(T::zero(), T::max)
    }

    /// Rows reordered so row `u` lands at `perm[u]`.
    pub fn permuted_rows(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut out = Self::zeros(self.n, self.f);
        for u in 0..self.n {
            out.row_mut(perm[u]).copy_from_slice(self.row(u));
        }
        Ok(out)
    }
}

/// Class id per node; `None` marks an unlabeled node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelVector {
    pub values: Vec<Option<usize>>,
}

impl LabelVector {
    pub fn new(values: Vec<Option<usize>>) -> Self {
        Self { values }
    }

    pub fn from_classes(classes: &[usize]) -> Self {
        Self {
            values: classes.iter().copied().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.values.get(i).copied().flatten()
    }

    /// `max label + 1`, or 0 when nothing is labeled.
    pub fn class_count(&self) -> usize {
        self.values.iter().flatten().max().map_or(0, |m| m + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = SparseGraph<f64>;

    fn path(n: usize) -> G {
        G::from_unweighted_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    fn star(leaves: usize) -> G {
        G::from_unweighted_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).unwrap()
    }

    #[test]
    fn canonical_csr() {
        let g = G::from_unweighted_edges(3, [(2, 1), (0, 1)]).unwrap();
        assert_eq!(g.row_offsets(), &[0, 1, 3, 4]);
        assert_eq!(g.col_indices(), &[1, 0, 2, 1]);
        assert!(!g.is_weighted());
        g.validate().unwrap();
    }

    #[test]
    fn reverse_orientation_is_same_edge() {
        let g = G::from_unweighted_edges(2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degrees().values, vec![1.0, 1.0]);
    }

    #[test]
    fn parallel_edges_sum() {
        let g = G::from_edges(2, [(0, 1, 0.5), (0, 1, 0.5)], Symmetry::Reject).unwrap();
        assert_eq!(g.weight(0, 1), Some(1.0));
        assert_eq!(g.weight(1, 0), Some(1.0));
    }

    #[test]
    fn directed_input_rejected_unless_symmetrized() {
        let edges = [(0, 1, 1.0), (1, 0, 2.0)];
        assert!(G::from_edges(2, edges, Symmetry::Reject).is_err());
        let g = G::from_edges(2, edges, Symmetry::Max).unwrap();
        assert_eq!(g.weight(0, 1), Some(2.0));
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(G::from_edges(2, [(0, 1, -1.0)], Symmetry::Reject).is_err());
    }

    #[test]
    fn self_loops() {
        let g = path(2).add_self_loops(1.0).unwrap();
        assert!(g.has_self_loops());
        assert_eq!(g.degrees().values, vec![2.0, 2.0]);
        assert!(matches!(g.add_self_loops(1.0), Err(Error::InvalidState(_))));

        let single = G::from_unweighted_edges(1, []).unwrap();
        assert_eq!(single.add_self_loops(1.0).unwrap().degrees().values, vec![1.0]);

        let s = star(4).add_self_loops(1.0).unwrap();
        assert_eq!(s.degrees().values[0], 5.0);
        assert_eq!(s.without_self_loops(), star(4));
    }

    #[test]
    fn degree_examples() {
        let k3 = G::from_unweighted_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(k3.degrees().values, vec![2.0; 3]);
        assert_eq!(star(4).degrees().values, vec![4.0, 1.0, 1.0, 1.0, 1.0]);
        let half = G::from_edges(2, [(0, 1, 0.5)], Symmetry::Reject).unwrap();
        assert_eq!(half.degrees().values, vec![0.5, 0.5]);
        assert_eq!(path(3).degrees().values, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn components() {
        let two = G::from_unweighted_edges(4, [(0, 1), (2, 3)]).unwrap();
        let c = two.connected_components();
        assert_eq!(c.count, 2);
        assert_eq!(c.ids, vec![0, 0, 1, 1]);

        let c5 = G::from_unweighted_edges(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap();
        assert_eq!(c5.connected_components().count, 1);

        let masked =
            G::from_edges(4, [(0, 1, 1.0), (1, 2, 0.0), (2, 3, 1.0)], Symmetry::Reject).unwrap();
        assert_eq!(masked.connected_components().count, 2);
        assert_eq!(masked.edge_count(), 3);
        assert_eq!(masked.active_edge_count(), 2);
    }

    #[test]
    fn from_csr_checks_symmetry() {
        assert!(G::from_csr(2, vec![0, 1, 1], vec![1], None).is_err());
        assert!(G::from_csr(2, vec![0, 1, 2], vec![1, 0], None).is_ok());
        assert!(G::from_csr(2, vec![0, 1, 2], vec![1, 0], Some(vec![1.0, 2.0])).is_err());
        assert!(G::from_csr(2, vec![0, 2, 2], vec![1, 1], None).is_err());
    }

    #[test]
    fn permutation_relabels() {
        let g = path(3);
        let p = g.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.degrees().values, vec![2.0, 1.0, 1.0]);
        assert!(p.weight(2, 0).is_some());
    }

    #[test]
    fn features_reject_nan() {
        assert!(FeatureMatrix::<f64>::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(FeatureMatrix::<f64>::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn label_class_count() {
        let l = LabelVector::new(vec![Some(0), None, Some(3)]);
        assert_eq!(l.class_count(), 4);
        assert_eq!(l.get(1), None);
    }
}
