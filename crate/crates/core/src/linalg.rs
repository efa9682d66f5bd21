//! Small dense linear algebra over [`Real`] scalars.
//!
//! Matrices in this crate are tiny (routes × routes, links × routes), so the
//! kernels favour accuracy and simplicity: cyclic Jacobi for symmetric
//! eigenproblems, one-sided Jacobi for singular values, and Gaussian
//! elimination with partial pivoting for linear solves.

use std::ops::{Index, IndexMut};

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
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

    /// Builds a matrix from row vectors. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<T>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec dimension");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ x`
    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len(), "tr_matvec dimension");
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// `xᵀ self y`
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        x.iter().zip(self.matvec(y)).map(|(&a, b)| a * b).sum()
    }

    /// Symmetric part `(M + Mᵀ) / 2`.
    pub fn sym(&self) -> Self {
        let half = T::lit(0.5);
        let mut s = Self::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = half * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Mat<T>,
}

/// Cyclic Jacobi eigen-decomposition. Only the symmetric part of `m` is used.
pub fn sym_eigen<T: Real>(m: &Mat<T>) -> SymEigen<T> {
    assert_eq!(m.rows(), m.cols(), "eigen of non-square matrix");
    let n = m.rows();
    let mut a = m.sym();
    let mut v = Mat::identity(n);
    let eps = T::epsilon();
    let two = T::lit(2.0);

    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = a[(i, j)] * a[(i, j)];
                total += x;
                if i != j {
                    off += x;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = if theta.abs() > T::max_value().sqrt() {
                    T::one() / (two * theta)
                } else {
                    let sign = if theta < T::zero() { -T::one() } else { T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // A <- Jᵀ A J with J the (p, q) rotation
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("NaN eigenvalue"));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    SymEigen { values, vectors }
}

/// Right singular structure of a matrix from one-sided (Hestenes) Jacobi.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// Singular values, one per column of the input, unsorted.
    pub values: Vec<T>,
    /// Column `j` is the right singular vector paired with `values[j]`.
    pub right: Mat<T>,
}

pub fn svd_right<T: Real>(m: &Mat<T>) -> Svd<T> {
    let rows = m.rows();
    let n = m.cols();
    let mut u = m.clone();
    let mut v = Mat::identity(n);
    let eps = T::epsilon();
    let two = T::lit(2.0);

    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..rows {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (two * gamma);
                let sign = if zeta < T::zero() { -T::one() } else { T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let values = (0..n)
        .map(|j| (0..rows).map(|i| u[(i, j)] * u[(i, j)]).sum::<T>().sqrt())
        .collect();
    Svd { values, right: v }
}

/// Orthonormal basis of `{x : m x = 0}`; singular values at or below
/// `rel_tol * σ_max` count as zero.
pub fn null_space<T: Real>(m: &Mat<T>, rel_tol: T) -> Vec<Vec<T>> {
    let svd = svd_right(m);
    let smax = svd.values.iter().fold(T::zero(), |a, &b| a.max(b));
    let cut = rel_tol * smax;
    let mut basis: Vec<Vec<T>> = svd
        .values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(j, _)| canonical_sign(svd.right.column(j)))
        .collect();
    if m.rows() == 0 {
        basis = (0..m.cols())
            .map(|j| {
                let mut e = vec![T::zero(); m.cols()];
                e[j] = T::one();
                e
            })
            .collect();
    }
    basis
}

/// Flips `v` so its first clearly nonzero entry is positive.
pub(crate) fn canonical_sign<T: Real>(mut v: Vec<T>) -> Vec<T> {
    let scale = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if let Some(&first) = v.iter().find(|x| x.abs() > T::lit(1e-8) * scale) {
        if first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

/// Spectral norm `‖m‖₂`.
pub fn spectral_norm<T: Real>(m: &Mat<T>) -> T {
    let svd = svd_right(m);
    svd.values.iter().fold(T::zero(), |a, &b| a.max(b))
}

/// Moore–Penrose pseudo-inverse of a symmetric positive semi-definite
/// matrix; eigenvalues at or below `rel_tol · λ_max` are dropped.
pub fn pinv_psd<T: Real>(m: &Mat<T>, rel_tol: T) -> Mat<T> {
    let e = sym_eigen(m);
    let n = m.rows();
    let top = e.values.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let mut out = Mat::zeros(n, n);
    for (k, &lam) in e.values.iter().enumerate() {
        if lam <= rel_tol * top {
            continue;
        }
        let v = e.vectors.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += v[i] * v[j] / lam;
            }
        }
    }
    out
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `rel_tol * max|a|`.
pub fn solve_linear<T: Real>(a: &Mat<T>, b: &[T], rel_tol: T) -> Option<Vec<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = m.max_abs();
    if scale == T::zero() {
        return if n == 0 { Some(Vec::new()) } else { None };
    }
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((col, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax <= rel_tol * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(piv, k)];
                m[(piv, k)] = tmp;
            }
            rhs.swap(col, piv);
        }
        for r in (col + 1)..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[(col, k)];
                m[(r, k)] -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..n {
            s -= m[(i, k)] * x[k];
        }
        x[i] = s / m[(i, i)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        let m = Mat::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = sym_eigen(&m);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let v0 = e.vectors.column(0);
        assert!((v0[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((v0[0] + v0[1]).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let m = Mat::<f64>::from_rows(&[
            vec![4.0, 1.0, -2.0, 0.5],
            vec![1.0, 3.0, 0.0, 1.0],
            vec![-2.0, 0.0, 5.0, -1.0],
            vec![0.5, 1.0, -1.0, 2.0],
        ]);
        let e = sym_eigen(&m);
        let mut diag = Mat::zeros(4, 4);
        for i in 0..4 {
            diag[(i, i)] = e.values[i];
        }
        let rec = e.vectors.matmul(&diag).matmul(&e.vectors.transpose());
        for i in 0..4 {
            for j in 0..4 {
                assert!((rec[(i, j)] - m[(i, j)]).abs() < 1e-12);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn null_space_of_dependent_columns() {
        // columns c0 - c1 - c2 + c3 = 0
        let m = Mat::<f64>::from_rows(&[
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
        ]);
        let ns = null_space(&m, 1e-9);
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        for (x, e) in v.iter().zip([0.5, -0.5, -0.5, 0.5]) {
            assert!((x - e).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn solve_and_singular_detection() {
        let a = Mat::<f64>::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x = solve_linear(&a, &[4.0, 5.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        let s = Mat::<f64>::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve_linear(&s, &[1.0, 1.0], 1e-12).is_none());
    }

    #[test]
    fn pseudo_inverse_of_singular_matrix() {
        let m = Mat::<f64>::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let p = pinv_psd(&m, 1e-12);
        let back = m.matmul(&p).matmul(&m);
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[(i, j)] - m[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_norm_of_rotation_scaled() {
        let m = Mat::<f64>::from_rows(&[vec![0.0, -3.0], vec![3.0, 0.0]]);
        assert!((spectral_norm(&m) - 3.0f64).abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let m = Mat::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = sym_eigen(&m);
        assert!((e.values[0] - 1.0).abs() < 1e-6);
    }
}
