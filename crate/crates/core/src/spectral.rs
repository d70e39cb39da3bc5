//! Convergence analysis of the random-walk operator `P = D^-1 A` on a
//! self-looped graph.
//!
//! Walks are row vectors: a walk started at node `i` has distribution
//! `e_i^T P^k` after `k` steps, and its limit on `i`'s component is the
//! degree-proportional distribution `d_j / vol`. The decay rate is the largest
//! non-unit eigenvalue modulus `max(|lambda_2|, |lambda_n|)`, computed on the
//! symmetric similar matrix `D^-1/2 A D^-1/2`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{dense_eig_symmetric, DenseMatrix};
use crate::error::{Error, Result};
use crate::graph::{Components, SparseGraph};
use crate::scalar::Scalar;

pub use crate::dense::DENSE_LIMIT;

const POWER_MAX_ITERS: usize = 200_000;
const POWER_RESIDUAL_TOL: f64 = 1e-10;
const BOUND_SLACK: f64 = 1e-12;

/// A self-looped graph read as the row-stochastic matrix `D^-1 A`.
#[derive(Clone, Debug)]
pub struct PropagationMatrixView<'a, T> {
    graph: &'a SparseGraph<T>,
    degrees: Vec<T>,
}

impl<'a, T: Scalar> PropagationMatrixView<'a, T> {
    pub fn new(graph: &'a SparseGraph<T>) -> Result<Self> {
        require_loops(graph)?;
        let degrees = graph.degrees().values;
        if let Some((node, d)) = degrees.iter().enumerate().find(|(_, &d)| d <= T::zero()) {
            return Err(Error::DegenerateDegree {
                node,
                degree: d.as_f64(),
            });
        }
        Ok(Self { graph, degrees })
    }

    pub fn graph(&self) -> &SparseGraph<T> {
        self.graph
    }

    pub fn degrees(&self) -> &[T] {
        &self.degrees
    }

    pub fn entry(&self, u: usize, v: usize) -> T {
        self.graph
            .weight(u, v)
            .map_or(T::zero(), |w| w / self.degrees[u])
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.graph.node_count())
            .map(|u| self.graph.row(u).map(|(_, w)| w / self.degrees[u]).sum())
            .collect()
    }

    /// `y^T = x^T P`.
    pub fn left_multiply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); x.len()];
        for u in 0..self.graph.node_count() {
            let s = x[u] / self.degrees[u];
            for (v, w) in self.graph.row(u) {
                y[v] += s * w;
            }
        }
        y
    }

    /// Components over positive-weight edges.
    pub fn components(&self) -> Components {
        self.graph.connected_components()
    }
}

fn require_loops<T: Scalar>(g: &SparseGraph<T>) -> Result<()> {
    if !g.has_self_loops() {
        return Err(Error::InvalidState(
            "spectral analysis expects a self-looped graph".into(),
        ));
    }
    Ok(())
}

/// Limit of `pi_0 P^k` from the uniform start.
///
/// On a component `B` of `n_B` nodes with volume `vol_B` the limit is
/// `(n_B / n) * d_i / vol_B`; on a connected graph this is `d_i / (2m + n)`.
pub fn stationary_distribution<T: Scalar>(p: &PropagationMatrixView<'_, T>) -> Vec<T> {
    let n = p.graph.node_count();
    let comps = p.components();
    let mut size = vec![0usize; comps.count];
    let mut vol = vec![T::zero(); comps.count];
    for (i, &c) in comps.ids.iter().enumerate() {
        size[c] += 1;
        vol[c] += p.degrees[i];
    }
    let n_t = T::from_count(n);
    (0..n)
        .map(|i| {
            let c = comps.ids[i];
            T::from_count(size[c]) / n_t * p.degrees[i] / vol[c]
        })
        .collect()
}

/// Column means of `P`, `(1/n) sum_j P[j][i]`: the uniform start after one
/// step. Equal to the stationary distribution exactly when every node has the
/// same degree.
pub fn column_mean_formula<T: Scalar>(p: &PropagationMatrixView<'_, T>) -> Vec<T> {
    let n = p.graph.node_count();
    let uniform = vec![T::one() / T::from_count(n); n];
    p.left_multiply(&uniform)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    /// Jacobi on the dense symmetric operator of each component.
    Dense,
    /// Shifted power iteration on the sparse operator, deflating the known
    /// top eigenvector `sqrt(d) / sqrt(vol)`.
    PowerDeflate,
}

/// Non-unit spectrum summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondEigenvalue<T> {
    /// Decay rate `max(|lambda_2|, |lambda_n|)`; 1 when the graph is disconnected.
    pub modulus: T,
    /// Signed second-largest eigenvalue; 1 when disconnected.
    pub lambda2: T,
    /// Smallest eigenvalue.
    pub lambda_min: T,
    /// Decay rate of each component on its own.
    pub per_component: Vec<T>,
    pub connected: bool,
}

#[derive(Clone, Copy, Debug)]
struct ComponentSpectrum<T> {
    lambda2: T,
    lambda_min: T,
}

impl<T: Scalar> ComponentSpectrum<T> {
    fn modulus(&self) -> T {
        self.lambda2.abs().max(self.lambda_min.abs())
    }
}

pub fn second_eigenvalue<T: Scalar>(
    p: &PropagationMatrixView<'_, T>,
    method: EigenMethod,
) -> Result<SecondEigenvalue<T>> {
    let comps = p.components();
    let members = comps.members();
    let spectra = members
        .iter()
        .map(|nodes| match method {
            EigenMethod::Dense => component_spectrum_dense(p, nodes),
            EigenMethod::PowerDeflate => component_spectrum_power(p, nodes),
        })
        .collect::<Result<Vec<_>>>()?;
    let per_component: Vec<T> = spectra.iter().map(ComponentSpectrum::modulus).collect();
    let lambda_min = spectra
        .iter()
        .map(|s| s.lambda_min)
        .fold(T::one(), T::min);
    let connected = comps.count <= 1;
    let (modulus, lambda2) = if connected {
        spectra
            .first()
            .map_or((T::zero(), T::zero()), |s| (s.modulus(), s.lambda2))
    } else {
        (T::one(), T::one())
    };
    Ok(SecondEigenvalue {
        modulus,
        lambda2,
        lambda_min,
        per_component,
        connected,
    })
}

fn component_spectrum_dense<T: Scalar>(
    p: &PropagationMatrixView<'_, T>,
    nodes: &[usize],
) -> Result<ComponentSpectrum<T>> {
    let m = nodes.len();
    if m > DENSE_LIMIT {
        return Err(Error::Capability(format!(
            "dense eigensolver limited to {DENSE_LIMIT} nodes (component has {m})"
        )));
    }
    if m == 1 {
        return Ok(ComponentSpectrum {
            lambda2: T::zero(),
            lambda_min: T::one(),
        });
    }
    let mut local = vec![usize::MAX; p.graph.node_count()];
    for (i, &u) in nodes.iter().enumerate() {
        local[u] = i;
    }
    let mut s = DenseMatrix::zeros(m, m);
    for (i, &u) in nodes.iter().enumerate() {
        for (v, w) in p.graph.row(u) {
            if local[v] != usize::MAX {
                s[(i, local[v])] = w / (p.degrees[u] * p.degrees[v]).sqrt();
            }
        }
    }
    let (vals, _) = dense_eig_symmetric(&s)?;
    Ok(ComponentSpectrum {
        lambda2: vals[1],
        lambda_min: vals[m - 1],
    })
}

/// Largest eigenvalue of `shift * I + sign * S` on the complement of the top
/// eigenvector, restricted to one component.
fn deflated_power<T: Scalar>(
    p: &PropagationMatrixView<'_, T>,
    nodes: &[usize],
    top: &[T],
    sign: T,
) -> Result<T> {
    let n = p.graph.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2b);
    let mut x = vec![T::zero(); n];
    for &u in nodes {
        x[u] = T::lit(rng.gen::<f64>() - 0.5);
    }
    let deflate = |x: &mut [T]| {
        let dot: T = nodes.iter().map(|&u| x[u] * top[u]).sum();
        for &u in nodes {
            x[u] -= dot * top[u];
        }
    };
    let normalize = |x: &mut [T]| -> T {
        let norm = nodes.iter().map(|&u| x[u] * x[u]).sum::<T>().sqrt();
        if norm > T::zero() {
            for &u in nodes {
                x[u] /= norm;
            }
        }
        norm
    };
    deflate(&mut x);
    if normalize(&mut x) <= T::lit(1e-300) {
        return Ok(T::zero());
    }
    let mut y = vec![T::zero(); n];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        // y = (I + sign * S) x
        for &u in nodes {
            let mut acc = T::zero();
            for (v, w) in p.graph.row(u) {
                acc += w / (p.degrees[u] * p.degrees[v]).sqrt() * x[v];
            }
            y[u] = x[u] + sign * acc;
        }
        deflate(&mut y);
        let mu: T = nodes.iter().map(|&u| x[u] * y[u]).sum();
        residual = nodes
            .iter()
            .map(|&u| {
                let r = y[u] - mu * x[u];
                r * r
            })
            .sum::<T>()
            .sqrt()
            .as_f64();
        if residual < POWER_RESIDUAL_TOL {
            return Ok(mu);
        }
        if normalize(&mut y) == T::zero() {
            return Ok(T::zero());
        }
        std::mem::swap(&mut x, &mut y);
    }
    Err(Error::Convergence {
        what: "deflated power iteration",
        iterations: POWER_MAX_ITERS,
        residual,
    })
}

fn component_spectrum_power<T: Scalar>(
    p: &PropagationMatrixView<'_, T>,
    nodes: &[usize],
) -> Result<ComponentSpectrum<T>> {
    if nodes.len() == 1 {
        return Ok(ComponentSpectrum {
            lambda2: T::zero(),
            lambda_min: T::one(),
        });
    }
    let vol: T = nodes.iter().map(|&u| p.degrees[u]).sum();
    let mut top = vec![T::zero(); p.graph.node_count()];
    for &u in nodes {
        top[u] = (p.degrees[u] / vol).sqrt();
    }
    // I + S has spectrum 1 + lambda >= 0 and I - S has 1 - lambda >= 0, so both
    // top eigenvalues are the dominant ones in modulus.
    let upper = deflated_power(p, nodes, &top, T::one())? - T::one();
    let lower = T::one() - deflated_power(p, nodes, &top, -T::one())?;
    Ok(ComponentSpectrum {
        lambda2: upper,
        lambda_min: lower,
    })
}

/// `sqrt(vol / d_i) * lambda2^k` where `vol` is the total weighted degree of
/// the self-looped graph (`2m + n` when unweighted).
pub fn convergence_bound<T: Scalar>(
    g: &SparseGraph<T>,
    node: usize,
    k: usize,
    lambda2: T,
) -> Result<T> {
    require_loops(g)?;
    if node >= g.node_count() {
        return Err(Error::validation(format!("node {node} out of range")));
    }
    let deg = g.degrees().values;
    let vol: T = deg.iter().copied().sum();
    Ok((vol / deg[node]).sqrt() * lambda2.powi(k as i32))
}

/// Per-node bounds, using each node's component volume and decay rate.
pub fn node_bounds<T: Scalar>(
    g: &SparseGraph<T>,
    k: usize,
    method: EigenMethod,
) -> Result<Vec<T>> {
    let p = PropagationMatrixView::new(g)?;
    let eig = second_eigenvalue(&p, method)?;
    let ctx = ComponentContext::new(&p);
    Ok((0..g.node_count())
        .map(|i| ctx.bound(&p, i, k, eig.per_component[ctx.comps.ids[i]]))
        .collect())
}

struct ComponentContext<T> {
    comps: Components,
    vol: Vec<T>,
}

impl<T: Scalar> ComponentContext<T> {
    fn new(p: &PropagationMatrixView<'_, T>) -> Self {
        let comps = p.components();
        let mut vol = vec![T::zero(); comps.count];
        for (i, &c) in comps.ids.iter().enumerate() {
            vol[c] += p.degrees[i];
        }
        Self { comps, vol }
    }

    fn bound(&self, p: &PropagationMatrixView<'_, T>, i: usize, k: usize, lambda: T) -> T {
        (self.vol[self.comps.ids[i]] / p.degrees[i]).sqrt() * lambda.powi(k as i32)
    }

    /// Limit of a walk started inside component `c`.
    fn limit(&self, p: &PropagationMatrixView<'_, T>, j: usize, c: usize) -> T {
        if self.comps.ids[j] == c {
            p.degrees[j] / self.vol[c]
        } else {
            T::zero()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeBound<T> {
    pub node: usize,
    pub d_tilde: T,
    pub bound: T,
    pub empirical: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport<T> {
    /// Decay rate `max(|lambda_2|, |lambda_n|)`.
    pub lambda2: T,
    pub lambda2_signed: T,
    pub lambda_min: T,
    pub spectral_gap: T,
    /// Mean non-loop weighted degree.
    pub avg_degree: T,
    /// Sum of self-looped degrees, `2m + n` when unweighted.
    pub volume: T,
    pub connected: bool,
    pub k: usize,
    pub per_node: Vec<NodeBound<T>>,
    /// Smallest `bound - empirical` over every checked `(node, k)`.
    pub worst_slack: Option<T>,
    /// Number of `(node, k)` pairs and `(node, node, k)` triples checked.
    pub checked_pairs: usize,
    pub checked_entries: usize,
}

impl<T: Scalar> ConvergenceReport<T> {
    /// `node,d_tilde,bound_k,empirical_k` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,d_tilde,bound_k,empirical_k\n");
        for row in &self.per_node {
            let emp = row
                .empirical
                .map_or(String::new(), |e| e.as_f64().to_string());
            let _ = writeln!(
                s,
                "{},{},{},{}",
                row.node,
                row.d_tilde.as_f64(),
                row.bound.as_f64(),
                emp
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lambda2: {}", self.lambda2.as_f64());
        let _ = writeln!(s, "lambda2_signed: {}", self.lambda2_signed.as_f64());
        let _ = writeln!(s, "lambda_min: {}", self.lambda_min.as_f64());
        let _ = writeln!(s, "gap: {}", self.spectral_gap.as_f64());
        let _ = writeln!(s, "avg_degree: {}", self.avg_degree.as_f64());
        let _ = writeln!(s, "2m+n: {}", self.volume.as_f64());
        let _ = writeln!(s, "connected: {}", self.connected);
        let _ = writeln!(s, "k: {}", self.k);
        if let Some(slack) = self.worst_slack {
            let _ = writeln!(s, "worst_slack: {}", slack.as_f64());
        }
        s
    }
}

fn avg_degree<T: Scalar>(g: &SparseGraph<T>) -> T {
    let n = g.node_count();
    if n == 0 {
        return T::zero();
    }
    let total: T = g.entries().filter(|&(u, v, _)| u != v).map(|(_, _, w)| w).sum();
    total / T::from_count(n)
}

/// Bounds at hop `k` without empirical values; works at any size with
/// [`EigenMethod::PowerDeflate`].
pub fn convergence_report<T: Scalar>(
    g: &SparseGraph<T>,
    k: usize,
    method: EigenMethod,
) -> Result<ConvergenceReport<T>> {
    let p = PropagationMatrixView::new(g)?;
    let eig = second_eigenvalue(&p, method)?;
    let ctx = ComponentContext::new(&p);
    let per_node = (0..g.node_count())
        .map(|i| NodeBound {
            node: i,
            d_tilde: p.degrees[i],
            bound: ctx.bound(&p, i, k, eig.per_component[ctx.comps.ids[i]]),
            empirical: None,
        })
        .collect();
    Ok(ConvergenceReport {
        lambda2: eig.modulus,
        lambda2_signed: eig.lambda2,
        lambda_min: eig.lambda_min,
        spectral_gap: T::one() - eig.modulus,
        avg_degree: avg_degree(g),
        volume: p.degrees.iter().copied().sum(),
        connected: eig.connected,
        k,
        per_node,
        worst_slack: None,
        checked_pairs: 0,
        checked_entries: 0,
    })
}

/// Checks, for every node `i` and `k <= k_max`, both
/// `||pi - e_i^T P^k||_2 <= sqrt(vol / d_i) lambda^k` and the per-entry
/// `|(e_i^T P^k)_j - pi_j| <= sqrt(d_j / d_i) lambda^k` against dense powers of
/// `P`. Disconnected graphs are checked per component.
///
/// A violation is returned as [`Error::BoundViolation`]; it can only come from
/// an arithmetic bug.
pub fn verify_bound<T: Scalar>(g: &SparseGraph<T>, k_max: usize) -> Result<ConvergenceReport<T>> {
    let n = g.node_count();
    if n > DENSE_LIMIT {
        return Err(Error::Capability(format!(
            "bound verification needs dense powers; limited to {DENSE_LIMIT} nodes (got {n})"
        )));
    }
    let p = PropagationMatrixView::new(g)?;
    let eig = second_eigenvalue(&p, EigenMethod::Dense)?;
    let ctx = ComponentContext::new(&p);
    let slack = T::lit(BOUND_SLACK);

    // rows of P^k, starting from the identity
    let mut power = DenseMatrix::<T>::identity(n);
    let mut next = DenseMatrix::<T>::zeros(n, n);
    let mut worst: Option<T> = None;
    let mut per_node = Vec::new();
    let mut checked_pairs = 0;
    let mut checked_entries = 0;

    for k in 0..=k_max {
        if k > 0 {
            for i in 0..n {
                let out = &mut next.data[i * n..(i + 1) * n];
                out.fill(T::zero());
                for (l, w) in g.row(i) {
                    let pil = w / p.degrees[i];
                    for (o, &x) in out.iter_mut().zip(power.row(l)) {
                        *o += pil * x;
                    }
                }
            }
            std::mem::swap(&mut power, &mut next);
        }
        for i in 0..n {
            let c = ctx.comps.ids[i];
            let lambda = eig.per_component[c];
            let decay = lambda.powi(k as i32);
            let row = power.row(i);
            let mut sq = T::zero();
            for j in 0..n {
                let diff = (row[j] - ctx.limit(&p, j, c)).abs();
                sq += diff * diff;
                if ctx.comps.ids[j] == c {
                    let entry_bound = (p.degrees[j] / p.degrees[i]).sqrt() * decay;
                    checked_entries += 1;
                    if diff > entry_bound + slack {
                        return Err(Error::BoundViolation {
                            node: i,
                            k,
                            empirical: diff.as_f64(),
                            bound: entry_bound.as_f64(),
                        });
                    }
                }
            }
            let empirical = sq.sqrt();
            let bound = ctx.bound(&p, i, k, lambda);
            checked_pairs += 1;
            if empirical > bound + slack {
                return Err(Error::BoundViolation {
                    node: i,
                    k,
                    empirical: empirical.as_f64(),
                    bound: bound.as_f64(),
                });
            }
            let s = bound - empirical;
            worst = Some(worst.map_or(s, |w| w.min(s)));
            if k == k_max {
                per_node.push(NodeBound {
                    node: i,
                    d_tilde: p.degrees[i],
                    bound,
                    empirical: Some(empirical),
                });
            }
        }
    }

    Ok(ConvergenceReport {
        lambda2: eig.modulus,
        lambda2_signed: eig.lambda2,
        lambda_min: eig.lambda_min,
        spectral_gap: T::one() - eig.modulus,
        avg_degree: avg_degree(g),
        volume: p.degrees.iter().copied().sum(),
        connected: eig.connected,
        k: k_max,
        per_node,
        worst_slack: worst,
        checked_pairs,
        checked_entries,
    })
}

/// `(1 - lambda2, average degree)` of a self-looped graph. Disconnected graphs
/// have decay rate 1 and so report a zero gap.
pub fn spectral_gap_report<T: Scalar>(g: &SparseGraph<T>) -> Result<(T, T)> {
    let p = PropagationMatrixView::new(g)?;
    let method = if g.node_count() <= DENSE_LIMIT {
        EigenMethod::Dense
    } else {
        EigenMethod::PowerDeflate
    };
    let eig = second_eigenvalue(&p, method)?;
    Ok((T::one() - eig.modulus, avg_degree(g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GraphKind};

    type G = SparseGraph<f64>;

    fn looped(kind: GraphKind) -> G {
        generate::<f64>(&kind, 0).unwrap().add_self_loops(1.0).unwrap()
    }

    fn two_k2() -> G {
        G::from_unweighted_edges(4, [(0, 1), (2, 3)])
            .unwrap()
            .add_self_loops(1.0)
            .unwrap()
    }

    #[test]
    fn requires_self_loops() {
        let g: G = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
        assert!(matches!(PropagationMatrixView::new(&g), Err(Error::InvalidState(_))));
    }

    #[test]
    fn rows_are_stochastic() {
        let g = looped(GraphKind::ErdosRenyi { n: 30, p: 0.2 });
        let p = PropagationMatrixView::new(&g).unwrap();
        assert!(p.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn stationary_examples() {
        let c5 = looped(GraphKind::Cycle { n: 5 });
        let pi = stationary_distribution(&PropagationMatrixView::new(&c5).unwrap());
        assert!(pi.iter().all(|x| (x - 0.2).abs() < 1e-15));

        let k2 = looped(GraphKind::Complete { n: 2 });
        let p = PropagationMatrixView::new(&k2).unwrap();
        assert_eq!(p.entry(0, 1), 0.5);
        assert_eq!(stationary_distribution(&p), vec![0.5, 0.5]);
    }

    #[test]
    fn stationary_star_matches_long_walk() {
        // S_2 with loops: degrees [3, 2, 2]; uniform start walked 200 steps
        let g = looped(GraphKind::Star { leaves: 2 });
        let p = PropagationMatrixView::new(&g).unwrap();
        let mut x = vec![1.0 / 3.0; 3];
        for _ in 0..200 {
            x = p.left_multiply(&x);
        }
        let pi = stationary_distribution(&p);
        for (a, b) in pi.iter().zip(&x) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((pi[0] - 3.0 / 7.0).abs() < 1e-15);
        // column means differ off regular graphs
        let cm = column_mean_formula(&p);
        assert!((cm[0] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn column_means_agree_on_regular_graphs() {
        let g = looped(GraphKind::Cycle { n: 7 });
        let p = PropagationMatrixView::new(&g).unwrap();
        let a = stationary_distribution(&p);
        let b = column_mean_formula(&p);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn stationary_blocks() {
        let g = G::from_unweighted_edges(5, [(0, 1), (2, 3), (3, 4)])
            .unwrap()
            .add_self_loops(1.0)
            .unwrap();
        let p = PropagationMatrixView::new(&g).unwrap();
        let pi = stationary_distribution(&p);
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let back = p.left_multiply(&pi);
        for (a, b) in pi.iter().zip(&back) {
            assert!((a - b).abs() < 1e-15);
        }
        // block {0,1} holds 2/5 of the uniform mass
        assert!((pi[0] + pi[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn k2_spectrum() {
        let g = looped(GraphKind::Complete { n: 2 });
        let p = PropagationMatrixView::new(&g).unwrap();
        for m in [EigenMethod::Dense, EigenMethod::PowerDeflate] {
            let e = second_eigenvalue(&p, m).unwrap();
            assert!(e.modulus.abs() < 1e-12, "{m:?}: {e:?}");
            assert!(e.connected);
        }
    }

    #[test]
    fn disconnected_spectrum() {
        let g = two_k2();
        let p = PropagationMatrixView::new(&g).unwrap();
        let e = second_eigenvalue(&p, EigenMethod::Dense).unwrap();
        assert!(!e.connected);
        assert_eq!(e.modulus, 1.0);
        assert_eq!(e.per_component.len(), 2);
        assert!(e.per_component.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn cycle4_spectrum() {
        // looped C_4: P = (I + A) / 3 with spectrum [1, 1/3, 1/3, -1/3]
        let g = looped(GraphKind::Cycle { n: 4 });
        let p = PropagationMatrixView::new(&g).unwrap();
        for m in [EigenMethod::Dense, EigenMethod::PowerDeflate] {
            let e = second_eigenvalue(&p, m).unwrap();
            assert!((e.modulus - 1.0 / 3.0).abs() < 1e-8, "{m:?}: {e:?}");
            assert!((e.lambda2 - 1.0 / 3.0).abs() < 1e-8);
            assert!((e.lambda_min + 1.0 / 3.0).abs() < 1e-8);
        }
        let (gap, avg) = spectral_gap_report(&g).unwrap();
        assert!((gap - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(avg, 2.0);
    }

    #[test]
    fn gap_report_k2() {
        let (gap, avg) = spectral_gap_report(&looped(GraphKind::Complete { n: 2 })).unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
        assert_eq!(avg, 1.0);
    }

    #[test]
    fn bound_arithmetic() {
        let k2 = looped(GraphKind::Complete { n: 2 });
        assert_eq!(convergence_bound(&k2, 0, 0, 0.3).unwrap(), 2f64.sqrt());
        assert_eq!(convergence_bound(&k2, 0, 3, 0.0).unwrap(), 0.0);
        let c4 = looped(GraphKind::Cycle { n: 4 });
        assert_eq!(convergence_bound(&c4, 1, 0, 0.5).unwrap(), 2.0);
        assert!(convergence_bound(&c4, 9, 0, 0.5).is_err());
    }

    #[test]
    fn verify_k2_and_c4() {
        let k2 = verify_bound(&looped(GraphKind::Complete { n: 2 }), 5).unwrap();
        for row in &k2.per_node {
            assert!(row.empirical.unwrap() < 1e-15);
            assert!(row.bound < 1e-12);
        }
        let c4 = verify_bound(&looped(GraphKind::Cycle { n: 4 }), 3).unwrap();
        let bound = (12.0f64 / 3.0).sqrt() / 27.0;
        for row in &c4.per_node {
            assert!((row.bound - bound).abs() < 1e-12);
            assert!(row.empirical.unwrap() <= row.bound);
        }
        assert!(c4.worst_slack.unwrap() >= 0.0);
    }

    #[test]
    fn verify_disconnected_per_component() {
        let g = G::from_unweighted_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5), (5, 3)])
            .unwrap()
            .add_self_loops(1.0)
            .unwrap();
        let r = verify_bound(&g, 10).unwrap();
        assert!(!r.connected);
        assert_eq!(r.checked_pairs, 6 * 11);
    }

    #[test]
    fn verify_refuses_large() {
        let g = looped(GraphKind::ErdosRenyi { n: DENSE_LIMIT + 1, p: 0.01 });
        assert!(matches!(verify_bound(&g, 1), Err(Error::Capability(_))));
        // the power method still reports bounds
        let r = convergence_report(&g, 2, EigenMethod::PowerDeflate);
        assert!(r.is_ok());
    }

    #[test]
    fn csv_shape() {
        let r = verify_bound(&looped(GraphKind::Path { n: 3 }), 2).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("node,d_tilde,bound_k,empirical_k"));
        assert!(r.summary().contains("2m+n: 7"));
    }
}
