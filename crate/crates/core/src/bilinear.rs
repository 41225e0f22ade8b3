//! Dense bilinear maps `R^d × R^d → R^o` stored as order-3 coefficient tensors.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, Real};

/// Coefficients `b[o][i][j]` of `B(x, y)_o = Σ_ij b[o][i][j] x_i y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearMap<T: Real> {
    out_dim: usize,
    in_dim: usize,
    data: Vec<T>,
}

impl<T: Real> BilinearMap<T> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            out_dim,
            in_dim,
            data: vec![T::zero(); out_dim * in_dim * in_dim],
        }
    }

    pub fn from_fn(out_dim: usize, in_dim: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut b = Self::zeros(out_dim, in_dim);
        for o in 0..out_dim {
            for i in 0..in_dim {
                for j in 0..in_dim {
                    b.data[(o * in_dim + i) * in_dim + j] = f(o, i, j);
                }
            }
        }
        b
    }

    /// Builds from one `in_dim × in_dim` coefficient matrix per output.
    pub fn from_slices(slices: &[DMatrix<T>]) -> Self {
        let in_dim = slices.first().map_or(0, |m| m.nrows());
        Self::from_fn(slices.len(), in_dim, |o, i, j| slices[o][(i, j)])
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, j: usize) -> T {
        self.data[(o * self.in_dim + i) * self.in_dim + j]
    }

    #[inline]
    pub fn set(&mut self, o: usize, i: usize, j: usize, v: T) {
        self.data[(o * self.in_dim + i) * self.in_dim + j] = v;
    }

    /// Coefficient matrix of output `o`.
    pub fn slice(&self, o: usize) -> DMatrix<T> {
        let d = self.in_dim;
        DMatrix::from_fn(d, d, |i, j| self.get(o, i, j))
    }

    pub fn apply(&self, x: &DVector<T>, y: &DVector<T>) -> DVector<T> {
        let d = self.in_dim;
        let mut out = DVector::zeros(self.out_dim);
        for o in 0..self.out_dim {
            let base = o * d * d;
            let mut acc = T::zero();
            for i in 0..d {
                if x[i] == T::zero() {
                    continue;
                }
                let row = &self.data[base + i * d..base + (i + 1) * d];
                let mut s = T::zero();
                for j in 0..d {
                    s += row[j] * y[j];
                }
                acc += x[i] * s;
            }
            out[o] = acc;
        }
        out
    }

    /// Matrix of `w ↦ B(u, w) + B(w, u)`.
    pub fn derivative(&self, u: &DVector<T>) -> DMatrix<T> {
        let d = self.in_dim;
        DMatrix::from_fn(self.out_dim, d, |o, j| {
            let mut s = T::zero();
            for i in 0..d {
                s += (self.get(o, i, j) + self.get(o, j, i)) * u[i];
            }
            s
        })
    }

    /// Largest entrywise asymmetry `|b[o][i][j] - b[o][j][i]|`.
    pub fn asymmetry(&self) -> T {
        let d = self.in_dim;
        let mut worst = T::zero();
        for o in 0..self.out_dim {
            for i in 0..d {
                for j in (i + 1)..d {
                    worst = worst.max((self.get(o, i, j) - self.get(o, j, i)).abs());
                }
            }
        }
        worst
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    /// Frobenius norm of the coefficient tensor (an upper bound on the
    /// operator norm `sup |B(x,y)| / (|x||y|)`).
    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &b| a + b * b).sqrt()
    }

    /// `B'(x, y) = L · B(R x, R y)` for an output map `L` and input map `R`.
    pub fn conjugate(&self, left: &DMatrix<T>, right: &DMatrix<T>) -> Self {
        let new_in = right.ncols();
        let slices: Vec<DMatrix<T>> = (0..self.out_dim)
            .map(|o| right.transpose() * self.slice(o) * right)
            .collect();
        let mut out = Self::zeros(left.nrows(), new_in);
        for p in 0..left.nrows() {
            for o in 0..self.out_dim {
                let c = left[(p, o)];
                if c == T::zero() {
                    continue;
                }
                for i in 0..new_in {
                    for j in 0..new_in {
                        let v = out.get(p, i, j) + c * slices[o][(i, j)];
                        out.set(p, i, j, v);
                    }
                }
            }
        }
        out
    }

    /// Symmetrized copy `(b[o][i][j] + b[o][j][i]) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = lit::<T>(0.5);
        Self::from_fn(self.out_dim, self.in_dim, |o, i, j| {
            (self.get(o, i, j) + self.get(o, j, i)) * half
        })
    }

    pub fn raw(&self) -> &[T] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_polarization() {
        let b = BilinearMap::<f64>::from_fn(2, 3, |o, i, j| (o + 2 * i + 3 * j) as f64 * 0.1);
        let u = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let w = DVector::from_vec(vec![1.0, 0.5, -0.2]);
        let lhs = b.derivative(&u) * &w;
        let rhs = b.apply(&u, &w) + b.apply(&w, &u);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn conjugate_agrees_with_direct() {
        let b = BilinearMap::<f64>::from_fn(2, 2, |o, i, j| 1.0 + (o * 4 + i * 2 + j) as f64);
        let l = DMatrix::from_row_slice(1, 2, &[2.0, -1.0]);
        let r = DMatrix::from_row_slice(2, 1, &[0.5, 3.0]);
        let c = b.conjugate(&l, &r);
        let x = DVector::from_vec(vec![0.7]);
        let y = DVector::from_vec(vec![-1.3]);
        let direct = &l * b.apply(&(&r * &x), &(&r * &y));
        assert!((c.apply(&x, &y) - direct).norm() < 1e-13);
    }
}
