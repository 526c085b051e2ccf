//! Dense symmetric matrices, Cholesky factors and triangular solves.
//!
//! Factorizations are delegated to `faer`; the triangular solves and the
//! bordering update used by the model-free predictor are written out here.

use faer::{Mat, Side};

use crate::real::Real;

/// Symmetric `n x n` matrix (both triangles stored).
#[derive(Clone, Debug)]
pub struct SymMatrix<T: Real> {
    pub(crate) data: Mat<T>,
}

impl<T: Real> SymMatrix<T> {
    /// Build from a function of `(i, j)`; only `j <= i` is queried and mirrored.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Mat::<T>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[(i, j)]
    }

    pub fn add_diagonal(&mut self, delta: T) {
        for i in 0..self.dim() {
            self.data[(i, i)] += delta;
        }
    }

    /// Lower Cholesky factor, or `None` when the matrix is not numerically positive definite.
    pub fn cholesky(&self) -> Option<LowerTriangular<T>> {
        let llt = self.data.llt(Side::Lower).ok()?;
        let l = llt.L();
        let n = self.dim();
        let mut data = Mat::<T>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                data[(i, j)] = l[(i, j)];
            }
        }
        let ok = (0..n).all(|i| data[(i, i)] > T::zero() && data[(i, i)].is_finite());
        ok.then_some(LowerTriangular { data })
    }
}

/// Lower-triangular matrix with positive diagonal (a Cholesky factor).
#[derive(Clone, Debug)]
pub struct LowerTriangular<T: Real> {
    data: Mat<T>,
}

impl<T: Real> LowerTriangular<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut data = Mat::<T>::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().take(i + 1) {
                data[(i, j)] = v;
            }
        }
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.data[(i, j)]
        }
    }

    /// Entries `0..=i` of row `i`.
    pub fn row(&self, i: usize) -> Vec<T> {
        (0..=i).map(|j| self.data[(i, j)]).collect()
    }

    /// Solve `L x = b` by column-oriented forward substitution.
    pub fn forward_solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "right-hand side length");
        let mut x = b.to_vec();
        for j in 0..n {
            let col = self.data.col(j);
            let xj = x[j] / col[j];
            x[j] = xj;
            for i in j + 1..n {
                x[i] -= col[i] * xj;
            }
        }
        x
    }

    /// `L x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length");
        let mut y = vec![T::zero(); n];
        for j in 0..n {
            let col = self.data.col(j);
            for i in j..n {
                y[i] += col[i] * x[j];
            }
        }
        y
    }

    /// Largest absolute entry of `L L^T - a`.
    pub fn reconstruction_error(&self, a: &SymMatrix<T>) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..=i {
                let s: T = (0..=j).map(|k| self.data[(i, k)] * self.data[(j, k)]).sum();
                worst = worst.max((s - a.get(i, j)).abs());
            }
        }
        worst
    }
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `tol` times the largest entry.
pub fn solve_dense<T: Real>(a: &[Vec<T>], b: &[T], tol: T) -> Option<Vec<T>> {
    let n = b.len();
    let mut m: Vec<Vec<T>> = a
        .iter()
        .zip(b)
        .map(|(r, &bi)| {
            let mut r = r.clone();
            r.push(bi);
            r
        })
        .collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() <= tol * scale {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] = m[row][k] - f * m[col][k];
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s: T = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}
