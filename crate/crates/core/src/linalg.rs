//! Small dense linear algebra over any [`Real`] scalar.
//!
//! Pivoting decisions use the real part only, so the same elimination path
//! is followed for a value and all of its derivatives.

use crate::dual::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Real> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<S>]) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..rows {
                m.data[i * cols.len() + j] = c[i];
            }
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.at(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, o: &Matrix<S>) -> Self {
        assert_eq!(self.cols, o.rows);
        let mut m = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                for j in 0..o.cols {
                    m.data[i * o.cols + j] += a * o.at(k, j);
                }
            }
        }
        m
    }

    pub fn mat_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = S::zero();
                for j in 0..self.cols {
                    s += self.at(i, j) * v[j];
                }
                s
            })
            .collect()
    }

    /// LU factorization with partial pivoting. Returns `None` when a pivot
    /// falls below `tiny` in magnitude.
    fn lu(&self, tiny: f64) -> Option<(Matrix<S>, Vec<usize>, f64)> {
        assert_eq!(self.rows, self.cols, "LU of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.re().abs()))
            .max(1.0);
        for k in 0..n {
            let mut p = k;
            let mut best = a.at(k, k).re().abs();
            for i in k + 1..n {
                let v = a.at(i, k).re().abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny * scale {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = a.at(k, k);
            for i in k + 1..n {
                let f = a.at(i, k) / piv;
                a.set(i, k, f);
                for j in k + 1..n {
                    let v = a.at(i, j) - f * a.at(k, j);
                    a.set(i, j, v);
                }
            }
        }
        Some((a, perm, sign))
    }

    /// Solves `self · x = b`.
    pub fn solve(&self, b: &[S]) -> Option<Vec<S>> {
        let n = self.rows;
        let (lu, perm, _) = self.lu(1e-14)?;
        let mut x: Vec<S> = perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let v = x[i] - lu.at(i, j) * x[j];
                x[i] = v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = x[i] - lu.at(i, j) * x[j];
                x[i] = v;
            }
            x[i] = x[i] / lu.at(i, i);
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Matrix<S>> {
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            let mut e = vec![S::zero(); n];
            e[j] = S::one();
            let c = self.solve(&e)?;
            for i in 0..n {
                inv.set(i, j, c[i]);
            }
        }
        Some(inv)
    }

    pub fn det(&self) -> S {
        match self.lu(0.0) {
            None => S::zero(),
            Some((lu, _, sign)) => {
                let mut d = S::cst(sign);
                for i in 0..self.rows {
                    d *= lu.at(i, i);
                }
                d
            }
        }
    }

    /// Largest absolute entry of the real part.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.re().abs()))
    }
}

impl Matrix<f64> {
    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `g(u, v)` for a metric stored as a square matrix.
pub fn inner<S: Real>(g: &Matrix<S>, u: &[S], v: &[S]) -> S {
    let mut s = S::zero();
    for i in 0..u.len() {
        for j in 0..v.len() {
            s += g.at(i, j) * u[i] * v[j];
        }
    }
    s
}

pub fn dot<S: Real>(u: &[S], v: &[S]) -> S {
    let mut s = S::zero();
    for i in 0..u.len() {
        s += u[i] * v[i];
    }
    s
}

pub fn axpy<S: Real>(a: S, x: &[S], y: &mut [S]) {
    for i in 0..y.len() {
        y[i] += a * x[i];
    }
}

/// Modified Gram–Schmidt with respect to `g`, in input order. Vectors whose
/// residual norm drops below `drop_tol` (relative to their input norm) are
/// discarded.
pub fn gram_schmidt(g: &Matrix<f64>, vectors: &[Vec<f64>], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let n0 = inner(g, v, v).sqrt();
        let mut w = v.clone();
        for q in &out {
            let c = inner(g, q, &w);
            axpy(-c, q, &mut w);
        }
        let n = inner(g, &w, &w).sqrt();
        if n0 > 0.0 && n > drop_tol * n0 {
            out.push(w.iter().map(|x| x / n).collect());
        }
    }
    out
}

/// A `g`-orthonormal basis of `{y : c_a(y) = 0}` for covectors `c_a`,
/// obtained by projecting the coordinate basis and orthonormalizing.
pub fn constrained_basis(g: &Matrix<f64>, covectors: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = g.rows;
    let ginv = g.inverse()?;
    let w: Vec<Vec<f64>> = covectors.iter().map(|c| ginv.mat_vec(c)).collect();
    let k = w.len();
    // Gram matrix of the normals, M_ab = c_a(w_b)
    let mut m = Matrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            m.set(a, b, dot(&covectors[a], &w[b]));
        }
    }
    let projected: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let rhs: Vec<f64> = covectors.iter().map(|c| c[i]).collect();
            if k > 0 {
                let coef = m.solve(&rhs)?;
                for b in 0..k {
                    axpy(-coef[b], &w[b], &mut e);
                }
            }
            Some(e)
        })
        .collect::<Option<_>>()?;
    Some(gram_schmidt(g, &projected, 1e-8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Dual;

    #[test]
    fn solve_and_inverse() {
        let a = Matrix::from_vec(3, 3, vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let x = a.solve(&[1.0, 2.0, 3.0]).unwrap();
        let r = a.mat_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
        let inv = a.inverse().unwrap();
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id.at(i, j) - e).abs() < 1e-14);
            }
        }
        assert!((a.det() - 18.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(a.inverse().is_none());
        assert_eq!(a.det(), 0.0);
    }

    #[test]
    fn det_derivative_follows_jacobi_formula() {
        // d det(A + tB)/dt at 0 = det(A) tr(A^-1 B)
        let a = [3.0, 1.0, 0.5, 2.0];
        let b = [0.1, -0.4, 0.7, 0.2];
        let m = Matrix::from_vec(2, 2, (0..4).map(|i| Dual::new(a[i], b[i])).collect());
        let d = m.det();
        let ainv = Matrix::from_vec(2, 2, a.to_vec()).inverse().unwrap();
        let bm = Matrix::from_vec(2, 2, b.to_vec());
        let t = ainv.matmul(&bm);
        let expect = 5.5 * (t.at(0, 0) + t.at(1, 1));
        assert!((d.eps - expect).abs() < 1e-13);
    }

    #[test]
    fn constrained_basis_is_orthonormal_and_feasible() {
        let g = Matrix::from_vec(3, 3, vec![2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let c = vec![vec![1.0, 2.0, -1.0]];
        let basis = constrained_basis(&g, &c).unwrap();
        assert_eq!(basis.len(), 2);
        for (i, u) in basis.iter().enumerate() {
            assert!(dot(&c[0], u).abs() < 1e-12);
            for (j, v) in basis.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((inner(&g, u, v) - e).abs() < 1e-12);
            }
        }
    }
}
