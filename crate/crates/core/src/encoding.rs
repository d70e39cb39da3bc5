//! Weight-free local node context encodings and the kernel coefficients
//! built from them.
//!
//! All three encodings read the corrected graph before self-loops:
//!
//! - degree: `d_i / (n - 1)`;
//! - eigenvector: the principal eigenvector of each component's adjacency,
//!   scaled so the component maximum is 1;
//! - cluster: `d_i * 2 T_i / (d_i (d_i - 1))` with `T_i` the number of edges
//!   among `i`'s neighbors (the `Standard` variant drops the leading `d_i`).
//!
//! The kernel is `clamp(C * (r_dg + r_ev + r_cu), 0, 1)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClusterVariant {
    /// `d * 2T / (d (d - 1))`, i.e. `2T / (d - 1)`; can exceed 1.
    #[default]
    Literal,
    /// Local clustering coefficient `2T / (d (d - 1))`.
    Standard,
}

impl std::str::FromStr for ClusterVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(ClusterVariant::Literal),
            "standard" => Ok(ClusterVariant::Standard),
            other => Err(Error::validation(format!("unknown cluster variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingConfig<T> {
    /// Include the eigenvector encoding.
    pub use_eigen: bool,
    /// Normalization factor `C` in `(0, 1]`.
    pub c_norm: T,
    pub power_iter_tol: T,
    pub power_iter_max: usize,
    /// Number of degree-matrix applications summed into the degree and
    /// cluster encodings; 1 is the plain encoding.
    pub k_order: usize,
    pub cluster_variant: ClusterVariant,
}

impl<T: Scalar> Default for EncodingConfig<T> {
    fn default() -> Self {
        Self {
            use_eigen: true,
            c_norm: T::lit(0.3),
            power_iter_tol: T::lit(1e-10),
            power_iter_max: 10_000,
            k_order: 1,
            cluster_variant: ClusterVariant::Literal,
        }
    }
}

impl<T: Scalar> EncodingConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_norm > T::zero() && self.c_norm <= T::one()) {
            return Err(Error::validation(format!("c_norm {} outside (0, 1]", self.c_norm)));
        }
        if !(self.power_iter_tol > T::zero()) {
            return Err(Error::validation("power iteration tolerance must be positive"));
        }
        if self.k_order == 0 {
            return Err(Error::validation("k_order must be at least 1"));
        }
        Ok(())
    }
}

/// Per-node kernel coefficients and the encodings they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelCoefficients<T> {
    pub r_dg: Vec<T>,
    pub r_ev: Vec<T>,
    pub r_cu: Vec<T>,
    pub c_norm: T,
    pub r_tilde: Vec<T>,
}

impl<T: Scalar> KernelCoefficients<T> {
    pub fn len(&self) -> usize {
        self.r_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_tilde.is_empty()
    }

    /// `node_id,r_dg,r_ev,r_cu,r_tilde` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_id,r_dg,r_ev,r_cu,r_tilde\n");
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{i},{},{},{},{}",
                self.r_dg[i].as_f64(),
                self.r_ev[i].as_f64(),
                self.r_cu[i].as_f64(),
                self.r_tilde[i].as_f64()
            );
        }
        s
    }

    /// Reads the CSV written by [`to_csv`](Self::to_csv). `C` is not stored
    /// and comes back as NaN unless supplied.
    pub fn from_csv(text: &str, c_norm: Option<T>) -> Result<Self> {
        let mut k = Self {
            r_dg: Vec::new(),
            r_ev: Vec::new(),
            r_cu: Vec::new(),
            c_norm: c_norm.unwrap_or_else(T::nan),
            r_tilde: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "expected 5 columns".into(),
                });
            }
            let parse = |t: &str| -> Result<T> {
                t.trim().parse::<f64>().map(T::lit).map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("invalid number {t:?}"),
                })
            };
            let node: usize = cols[0].trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: "invalid node id".into(),
            })?;
            if node != k.r_tilde.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected node {}, got {node}", k.r_tilde.len()),
                });
            }
            k.r_dg.push(parse(cols[1])?);
            k.r_ev.push(parse(cols[2])?);
            k.r_cu.push(parse(cols[3])?);
            k.r_tilde.push(parse(cols[4])?);
        }
        Ok(k)
    }
}

fn require_loop_free<T: Scalar>(g: &SparseGraph<T>) -> Result<()> {
    if g.has_self_loops() {
        return Err(Error::InvalidState(
            "encodings read the corrected graph before self-loops".into(),
        ));
    }
    Ok(())
}

/// `sum_{j=1}^{order} d^j`.
fn degree_power_sum<T: Scalar>(d: T, order: usize) -> T {
    let mut acc = T::zero();
    let mut p = T::one();
    for _ in 0..order {
        p *= d;
        acc += p;
    }
    acc
}

/// `d_i / (n - 1)`; all zeros when `n == 1`.
pub fn degree_encoding<T: Scalar>(g: &SparseGraph<T>) -> Result<Vec<T>> {
    degree_encoding_with_order(g, 1)
}

pub fn degree_encoding_with_order<T: Scalar>(g: &SparseGraph<T>, order: usize) -> Result<Vec<T>> {
    require_loop_free(g)?;
    let n = g.node_count();
    if n <= 1 {
        return Ok(vec![T::zero(); n]);
    }
    let scale = T::from_count(n - 1);
    Ok(g.degrees()
        .values
        .into_iter()
        .map(|d| degree_power_sum(d, order) / scale)
        .collect())
}

/// Principal eigenvector per component, max-normalized.
///
/// Each component is iterated with `A + I` from the all-ones vector; the shift
/// keeps the Perron eigenvalue strictly dominant on bipartite components
/// (stars, even cycles, paths) where plain `A` would oscillate. Nodes with no
/// positive-weight edge get 0.
pub fn eigenvector_encoding<T: Scalar>(
    g: &SparseGraph<T>,
    cfg: &EncodingConfig<T>,
) -> Result<Vec<T>> {
    require_loop_free(g)?;
    cfg.validate()?;
    let n = g.node_count();
    let mut out = vec![T::zero(); n];
    let comps = g.connected_components();
    for nodes in comps.members() {
        if nodes.len() == 1 {
            continue;
        }
        let mut x: Vec<T> = vec![T::one(); n];
        let mut y = vec![T::zero(); n];
        let mut converged = false;
        let mut residual = T::infinity();
        for _ in 0..cfg.power_iter_max {
            for &u in &nodes {
                let mut acc = x[u];
                for (v, w) in g.row(u) {
                    acc += w * x[v];
                }
                y[u] = acc;
            }
            let peak = nodes.iter().map(|&u| y[u]).fold(T::zero(), T::max);
            for &u in &nodes {
                y[u] /= peak;
            }
            residual = nodes
                .iter()
                .map(|&u| (y[u] - x[u]).abs())
                .fold(T::zero(), T::max);
            std::mem::swap(&mut x, &mut y);
            if residual < cfg.power_iter_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                what: "eigenvector power iteration",
                iterations: cfg.power_iter_max,
                residual: residual.as_f64(),
            });
        }
        for &u in &nodes {
            out[u] = x[u];
        }
    }
    Ok(out)
}

/// Edges among each node's neighbors, over positive-weight edges.
pub fn neighbor_edge_counts<T: Scalar>(g: &SparseGraph<T>) -> Vec<usize> {
    let n = g.node_count();
    let adj: Vec<Vec<usize>> = (0..n).map(|u| g.active_neighbors(u).collect()).collect();
    let mut counts = vec![0usize; n];
    // each triangle u < v < w is found once from its smallest edge
    for u in 0..n {
        for &v in adj[u].iter().filter(|&&v| v > u) {
            let (a, b) = (&adj[u], &adj[v]);
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        let w = a[i];
                        if w > v {
                            counts[u] += 1;
                            counts[v] += 1;
                            counts[w] += 1;
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
    counts
}

/// Literal cluster connectivity encoding, `d * 2T / (d (d - 1))`.
pub fn cluster_encoding<T: Scalar>(g: &SparseGraph<T>) -> Result<Vec<T>> {
    cluster_encoding_with(g, ClusterVariant::Literal, 1)
}

pub fn cluster_encoding_with<T: Scalar>(
    g: &SparseGraph<T>,
    variant: ClusterVariant,
    order: usize,
) -> Result<Vec<T>> {
    require_loop_free(g)?;
    let tri = neighbor_edge_counts(g);
    let deg = g.degrees().values;
    Ok((0..g.node_count())
        .map(|i| {
            let d = deg[i];
            let denom = d * (d - T::one());
            if g.structural_degree(i) < 2 || denom <= T::zero() {
                return T::zero();
            }
            let base = T::lit(2.0) * T::from_count(tri[i]) / denom;
            match variant {
                ClusterVariant::Literal => degree_power_sum(d, order) * base,
                ClusterVariant::Standard => base,
            }
        })
        .collect())
}

/// `clamp(C * (r_dg + r_ev + r_cu), 0, 1)`; `use_eigen = false` zeroes `r_ev`.
pub fn combine<T: Scalar>(
    r_dg: Vec<T>,
    r_ev: Vec<T>,
    r_cu: Vec<T>,
    cfg: &EncodingConfig<T>,
) -> Result<KernelCoefficients<T>> {
    cfg.validate()?;
    let n = r_dg.len();
    if r_ev.len() != n || r_cu.len() != n {
        return Err(Error::validation(format!(
            "encoding lengths differ: {n}, {}, {}",
            r_ev.len(),
            r_cu.len()
        )));
    }
    let r_ev = if cfg.use_eigen { r_ev } else { vec![T::zero(); n] };
    let r_tilde = (0..n)
        .map(|i| {
            let v = cfg.c_norm * (r_dg[i] + r_ev[i] + r_cu[i]);
            v.max(T::zero()).min(T::one())
        })
        .collect();
    Ok(KernelCoefficients {
        r_dg,
        r_ev,
        r_cu,
        c_norm: cfg.c_norm,
        r_tilde,
    })
}

/// Computes all encodings on the corrected graph and combines them.
pub fn encode<T: Scalar>(
    corrected: &SparseGraph<T>,
    cfg: &EncodingConfig<T>,
) -> Result<KernelCoefficients<T>> {
    cfg.validate()?;
    let n = corrected.node_count();
    let r_dg = degree_encoding_with_order(corrected, cfg.k_order)?;
    let r_ev = if cfg.use_eigen {
        eigenvector_encoding(corrected, cfg)?
    } else {
        vec![T::zero(); n]
    };
    let r_cu = cluster_encoding_with(corrected, cfg.cluster_variant, cfg.k_order)?;
    combine(r_dg, r_ev, r_cu, cfg)
}
