//! Dense reference arithmetic for small graphs.
//!
//! Everything here materializes full matrices and is only meant for graphs up
//! to [`DENSE_LIMIT`] nodes. It is the ground truth that the sparse routines are
//! checked against, so it deliberately shares no code with them.

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, SparseGraph};
use crate::scalar::Scalar;

pub const DENSE_LIMIT: usize = 2000;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Adjacency of `g` as a dense matrix.
    pub fn adjacency(g: &SparseGraph<T>) -> Result<Self> {
        check_limit(g.node_count())?;
        let mut m = Self::zeros(g.node_count(), g.node_count());
        for (u, v, w) in g.entries() {
            m[(u, v)] = w;
        }
        Ok(m)
    }

    pub fn from_features(x: &FeatureMatrix<T>) -> Self {
        Self {
            rows: x.rows(),
            cols: x.cols(),
            data: x.as_slice().to_vec(),
        }
    }

    pub fn to_features(&self) -> FeatureMatrix<T> {
        FeatureMatrix::new(self.rows, self.cols, self.data.clone()).expect("finite dense block")
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::validation(format!(
                "shape mismatch: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(l, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn scale_add(&mut self, alpha: T, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (i + 1..self.cols).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol)
            })
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

fn check_limit(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::Capability(format!(
            "dense routines are limited to {DENSE_LIMIT} nodes (got {n})"
        )));
    }
    Ok(())
}

/// `M[u][v] = d_u^(r_u - 1) * A[u][v] * d_v^(-r_v)` on a self-looped graph.
pub fn dense_operator<T: Scalar>(g: &SparseGraph<T>, r: &[T]) -> Result<DenseMatrix<T>> {
    let n = g.node_count();
    check_limit(n)?;
    if r.len() != n {
        return Err(Error::validation("kernel length does not match node count"));
    }
    let a = DenseMatrix::adjacency(g)?;
    let d: Vec<T> = (0..n).map(|u| a.row(u).iter().copied().sum()).collect();
    Ok(DenseMatrix::from_fn(n, n, |u, v| {
        if a[(u, v)] == T::zero() {
            T::zero()
        } else {
            d[u].powf(r[u] - T::one()) * a[(u, v)] * d[v].powf(-r[v])
        }
    }))
}

/// `sum_i weights[i] * M^i * X` by repeated multiplication.
pub fn dense_propagate<T: Scalar>(
    m: &DenseMatrix<T>,
    x: &DenseMatrix<T>,
    weights: &[T],
) -> Result<DenseMatrix<T>> {
    if m.rows != m.cols || m.cols != x.rows {
        return Err(Error::validation("operator and feature shapes do not match"));
    }
    let mut power = x.clone();
    let mut out = DenseMatrix::zeros(x.rows, x.cols);
    for (i, &w) in weights.iter().enumerate() {
        if i > 0 {
            power = m.matmul(&power)?;
        }
        out.scale_add(w, &power);
    }
    Ok(out)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as the columns of the second matrix.
pub fn dense_eig_symmetric<T: Scalar>(s: &DenseMatrix<T>) -> Result<(Vec<T>, DenseMatrix<T>)> {
    let n = s.rows;
    check_limit(n)?;
    let scale = s.data.iter().fold(T::one(), |m, x| m.max(x.abs()));
    if !s.is_symmetric(T::lit(1e-12) * scale) {
        return Err(Error::validation("eigensolver input is not symmetric"));
    }
    let mut a = s.clone();
    let mut v = DenseMatrix::identity(n);
    let off = |a: &DenseMatrix<T>| -> T {
        let mut acc = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
        acc.sqrt()
    };
    let target = T::epsilon() * scale * T::from_count(n.max(1));
    let max_sweeps = 100;
    let mut sweep = 0;
    while off(&a) > target {
        sweep += 1;
        if sweep > max_sweeps {
            return Err(Error::Convergence {
                what: "jacobi eigensolver",
                iterations: max_sweeps,
                residual: off(&a).as_f64(),
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// `D^(-1/2) A D^(-1/2)`: symmetric, with the spectrum of `D^(-1) A`.
pub fn symmetrized_walk<T: Scalar>(g: &SparseGraph<T>) -> Result<DenseMatrix<T>> {
    let half = vec![T::lit(0.5); g.node_count()];
    dense_operator(g, &half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GraphKind};

    type G = SparseGraph<f64>;

    fn looped(kind: GraphKind) -> G {
        generate::<f64>(&kind, 0).unwrap().add_self_loops(1.0).unwrap()
    }

    #[test]
    fn k2_operators() {
        let g = looped(GraphKind::Complete { n: 2 });
        for r in [0.0, 0.5] {
            let m = dense_operator(&g, &[r, r]).unwrap();
            assert!(m.data.iter().all(|&x| (x - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn p3_mixed_kernel() {
        let g = looped(GraphKind::Path { n: 3 });
        let m = dense_operator(&g, &[0.0, 1.0, 0.5]).unwrap();
        let d = [2.0f64, 3.0, 2.0];
        let expect = |u: usize, v: usize, r: [f64; 3]| d[u].powf(r[u] - 1.0) * d[v].powf(-r[v]);
        assert!((m[(0, 1)] - expect(0, 1, [0.0, 1.0, 0.5])).abs() < 1e-15);
        assert_eq!(m[(0, 2)], 0.0);
        // column 1 has r=1: every entry is A[u][1] / d1 scaled by d_u^(r_u-1)
        let col1: f64 = (0..3).map(|u| m[(u, 1)] * d[u].powf(1.0 - [0.0, 1.0, 0.5][u])).sum();
        assert!((col1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn propagate_trivial() {
        let x = DenseMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let m = DenseMatrix::from_fn(3, 3, |i, j| (i + j) as f64);
        assert_eq!(dense_propagate(&m, &x, &[1.0]).unwrap(), x);
        let id = DenseMatrix::identity(3);
        assert_eq!(dense_propagate(&id, &x, &[0.0, 1.0]).unwrap(), x);
        assert!(dense_propagate(&m, &DenseMatrix::zeros(2, 2), &[1.0]).is_err());
    }

    #[test]
    fn eig_identity_and_k2() {
        let (vals, _) = dense_eig_symmetric(&DenseMatrix::<f64>::identity(3)).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
        let s = symmetrized_walk(&looped(GraphKind::Complete { n: 2 })).unwrap();
        let (vals, _) = dense_eig_symmetric(&s).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12 && vals[1].abs() < 1e-12);
    }

    #[test]
    fn eig_cycle4_closed_form() {
        // every looped degree is 3, so the spectrum is (1 + 2cos(2 pi j / 4)) / 3:
        // [1, 1/3, 1/3, -1/3]
        let s = symmetrized_walk(&looped(GraphKind::Cycle { n: 4 })).unwrap();
        let (vals, _) = dense_eig_symmetric(&s).unwrap();
        let mut expect: Vec<f64> = (0..4)
            .map(|j| (1.0 + 2.0 * (std::f64::consts::PI * j as f64 / 2.0).cos()) / 3.0)
            .collect();
        expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in vals.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{vals:?} vs {expect:?}");
        }
    }

    #[test]
    fn eig_reconstruction_and_orthonormality() {
        let g = generate::<f64>(&GraphKind::ErdosRenyi { n: 40, p: 0.2 }, 5)
            .unwrap()
            .add_self_loops(1.0)
            .unwrap();
        let s = symmetrized_walk(&g).unwrap();
        let (vals, v) = dense_eig_symmetric(&s).unwrap();
        let lambda = DenseMatrix::from_fn(40, 40, |i, j| if i == j { vals[i] } else { 0.0 });
        let rebuilt = v.matmul(&lambda).unwrap().matmul(&v.transpose()).unwrap();
        assert!(rebuilt.max_abs_diff(&s) < 1e-8);
        let gram = v.transpose().matmul(&v).unwrap();
        assert!(gram.max_abs_diff(&DenseMatrix::identity(40)) < 1e-8);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = DenseMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 1 { 1.0 } else { 0.0 });
        assert!(dense_eig_symmetric(&m).is_err());
    }

    #[test]
    fn size_limit() {
        let g: G = generate(&GraphKind::Path { n: DENSE_LIMIT + 1 }, 0).unwrap();
        assert!(matches!(DenseMatrix::adjacency(&g), Err(Error::Capability(_))));
    }
}
