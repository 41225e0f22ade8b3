//! Vector-valued functions on uniform 1-D grids, finite-difference
//! derivatives and exponentially weighted norms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Samples of a `d`-vector function at `x_i = x0 + i h`, stored as an
/// `N × d` matrix (one column per component).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T: Real> {
    pub x0: T,
    pub h: T,
    pub values: DMatrix<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(x0: T, h: T, values: DMatrix<T>) -> Result<Self> {
        if !(h > T::zero()) {
            return Err(Error::Precondition("grid spacing must be positive".into()));
        }
        if values.nrows() < 2 {
            return Err(Error::Precondition("grid needs at least two nodes".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("grid function has non-finite values".into()));
        }
        Ok(Self { x0, h, values })
    }

    /// Zero function on `n` nodes spanning `[a, b]`.
    pub fn zeros(a: T, b: T, n: usize, dim: usize) -> Self {
        let h = (b - a) / from_usize::<T>(n.max(2) - 1);
        Self {
            x0: a,
            h,
            values: DMatrix::zeros(n.max(2), dim),
        }
    }

    pub fn from_fn(a: T, b: T, n: usize, dim: usize, mut f: impl FnMut(T) -> DVector<T>) -> Self {
        let mut g = Self::zeros(a, b, n, dim);
        for i in 0..g.len() {
            let v = f(g.x(i));
            g.values.set_row(i, &v.transpose());
        }
        g
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: DMatrix<T>) -> Self {
        Self {
            x0: self.x0,
            h: self.h,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn x(&self, i: usize) -> T {
        self.x0 + self.h * from_usize::<T>(i)
    }

    pub fn xs(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn x_last(&self) -> T {
        self.x(self.len() - 1)
    }

    pub fn node(&self, i: usize) -> DVector<T> {
        self.values.row(i).transpose()
    }

    pub fn set_node(&mut self, i: usize, v: &DVector<T>) {
        self.values.set_row(i, &v.transpose());
    }

    pub fn component(&self, k: usize) -> DVector<T> {
        self.values.column(k).into_owned()
    }

    /// Applies `f` to every node.
    pub fn map_nodes(&self, out_dim: usize, mut f: impl FnMut(T, &DVector<T>) -> DVector<T>) -> Self {
        let mut out = DMatrix::zeros(self.len(), out_dim);
        for i in 0..self.len() {
            let v = f(self.x(i), &self.node(i));
            out.set_row(i, &v.transpose());
        }
        self.with_values(out)
    }

    /// Applies the matrix `m` to every node.
    pub fn transform(&self, m: &DMatrix<T>) -> Self {
        self.with_values(&self.values * m.transpose())
    }

    /// Euclidean norm of each node.
    pub fn pointwise_norms(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.values.row(i).norm()).collect()
    }

    /// Largest node norm.
    pub fn sup_norm(&self) -> T {
        self.pointwise_norms().into_iter().fold(T::zero(), |a, b| a.max(b))
    }

    /// `j`-th derivative by finite differences with formal accuracy `acc`
    /// (even, ≥ 2) in the interior; boundary stencils are one-sided with at
    /// least the same order.
    pub fn derivative(&self, j: usize, acc: usize) -> Self {
        if j == 0 {
            return self.clone();
        }
        let n = self.len();
        let central = 2 * j.div_ceil(2) - 1 + acc;
        let boundary = j + acc;
        let mut out = DMatrix::zeros(n, self.dim());
        let scale = T::one() / self.h.powi(j as i32);
        let mut cache: Vec<(usize, usize, Vec<T>)> = Vec::new();
        for i in 0..n {
            let half = central / 2;
            let (start, width) = if i >= half && i + half < n {
                (i - half, central)
            } else {
                let w = boundary.min(n);
                let s = if i < half { 0 } else { n - w };
                (s, w)
            };
            let offset = i - start;
            let weights = match cache.iter().find(|(o, w, _)| *o == offset && *w == width) {
                Some((_, _, wts)) => wts.clone(),
                None => {
                    let xs: Vec<T> = (0..width).map(|k| from_usize::<T>(k)).collect();
                    let wts = fornberg_weights(from_usize::<T>(offset), &xs, j);
                    cache.push((offset, width, wts.clone()));
                    wts
                }
            };
            for c in 0..self.dim() {
                let mut acc_v = T::zero();
                for (k, w) in weights.iter().enumerate() {
                    acc_v += *w * self.values[(start + k, c)];
                }
                out[(i, c)] = acc_v * scale;
            }
        }
        self.with_values(out)
    }

    /// Trapezoid rule for `∫ φ(x) |f(x)|² dx`.
    pub fn weighted_l2_squared(&self, weight: impl Fn(T) -> T) -> T {
        let n = self.len();
        let mut s = T::zero();
        for i in 0..n {
            let mut w = weight(self.x(i)) * self.values.row(i).norm_squared();
            if i == 0 || i + 1 == n {
                w *= lit::<T>(0.5);
            }
            s += w;
        }
        s * self.h
    }

    /// Discrete `ℓ²` norm `(h Σ |f_i|²)^{1/2}`.
    pub fn l2(&self) -> T {
        (self.values.norm_squared() * self.h).sqrt()
    }
}

/// Finite-difference weights for the `m`-th derivative at `z` from nodes
/// `xs` (Fornberg's recursion).
pub fn fornberg_weights<T: Real>(z: T, xs: &[T], m: usize) -> Vec<T> {
    let n = xs.len();
    let mut c = vec![vec![T::zero(); m + 1]; n];
    let mut c1 = T::one();
    let mut c4 = xs[0] - z;
    c[0][0] = T::one();
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (from_usize::<T>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - from_usize::<T>(k) * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// `⟨x⟩ = (1 + x²)^{1/2}`.
pub fn japanese<T: Real>(x: T) -> T {
    (T::one() + x * x).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `‖e^{η⟨x⟩} f‖_{L²}`.
    L2,
    /// `(‖e^{η⟨x⟩} f‖² + ‖e^{η⟨x⟩} f'‖²)^{1/2}`.
    H1,
    /// `‖e^{-α⟨x⟩} f‖_{L²} + ‖e^{-α₂⟨x⟩} f'‖_{L²}`.
    Mixed { alpha: f64, alpha2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorm {
    pub eta: f64,
    pub kind: NormKind,
}

impl WeightedNorm {
    pub fn l2(eta: f64) -> Self {
        Self { eta, kind: NormKind::L2 }
    }

    pub fn h1(eta: f64) -> Self {
        Self { eta, kind: NormKind::H1 }
    }

    /// Mixed norm; requires `0 < α < α₂`.
    pub fn mixed(alpha: f64, alpha2: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < alpha2) {
            return Err(Error::Precondition(format!(
                "mixed norm needs 0 < alpha < alpha2 (got {alpha}, {alpha2})"
            )));
        }
        Ok(Self {
            eta: 0.0,
            kind: NormKind::Mixed { alpha, alpha2 },
        })
    }
}

/// Trapezoid quadrature of the weighted norm; derivatives by second-order
/// centered differences.
pub fn weighted_norm<T: Real>(gf: &GridFunction<T>, w: &WeightedNorm) -> T {
    let weight = |rate: f64| move |x: T| (lit::<T>(2.0 * rate) * japanese(x)).exp();
    match w.kind {
        NormKind::L2 => gf.weighted_l2_squared(weight(w.eta)).sqrt(),
        NormKind::H1 => {
            let d = gf.derivative(1, 2);
            (gf.weighted_l2_squared(weight(w.eta)) + d.weighted_l2_squared(weight(w.eta))).sqrt()
        }
        NormKind::Mixed { alpha, alpha2 } => {
            let d = gf.derivative(1, 2);
            gf.weighted_l2_squared(weight(-alpha)).sqrt() + d.weighted_l2_squared(weight(-alpha2)).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_stencils() {
        let xs = [-1.0, 0.0, 1.0];
        let w1 = fornberg_weights(0.0, &xs, 1);
        assert_eq!(w1, vec![-0.5, 0.0, 0.5]);
        let w2 = fornberg_weights(0.0, &xs, 2);
        assert_eq!(w2, vec![1.0, -2.0, 1.0]);
        let w = fornberg_weights(0.0f64, &[0.0, 1.0, 2.0], 1);
        assert!((w[0] + 1.5).abs() < 1e-15 && (w[1] - 2.0).abs() < 1e-15 && (w[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_are_exact_on_polynomials() {
        let g = GridFunction::from_fn(-1.0, 2.0, 31, 1, |x: f64| DVector::from_element(1, x.powi(3) - 2.0 * x));
        let d1 = g.derivative(1, 2);
        let d3 = g.derivative(3, 2);
        for i in 0..g.len() {
            let x = g.x(i);
            assert!((d1.values[(i, 0)] - (3.0 * x * x - 2.0)).abs() < 5e-2);
            assert!((d3.values[(i, 0)] - 6.0).abs() < 1e-7);
        }
        let d1h = g.derivative(1, 4);
        for i in 0..g.len() {
            let x = g.x(i);
            assert!((d1h.values[(i, 0)] - (3.0 * x * x - 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_convergence_order() {
        let err = |n: usize, acc: usize| {
            let g = GridFunction::from_fn(0.0, 1.0, n, 1, |x: f64| DVector::from_element(1, x.sin()));
            let d = g.derivative(1, acc);
            (0..n).map(|i| (d.values[(i, 0)] - g.x(i).cos()).abs()).fold(0.0, f64::max)
        };
        let r2 = (err(41, 2) / err(81, 2)).log2();
        let r4 = (err(41, 4) / err(81, 4)).log2();
        assert!((r2 - 2.0).abs() < 0.2, "{r2}");
        assert!((r4 - 4.0).abs() < 0.3, "{r4}");
    }

    #[test]
    fn norms() {
        let z = GridFunction::<f64>::zeros(0.0, 1.0, 11, 2);
        assert_eq!(weighted_norm(&z, &WeightedNorm::l2(1.0)), 0.0);
        let one = GridFunction::from_fn(0.0f64, 1.0, 101, 1, |_| DVector::from_element(1, 1.0));
        assert!((weighted_norm(&one, &WeightedNorm::l2(0.0)) - 1.0).abs() < 1e-12);

        // Oracle: composite Simpson on a much finer grid.
        let f = |x: f64| (-x).exp();
        let eta = 0.5;
        let integrand = |x: f64| (2.0 * eta * japanese(x)).exp() * f(x) * f(x);
        let m = 200_000;
        let hh = 10.0 / m as f64;
        let mut simpson = integrand(0.0) + integrand(10.0);
        for k in 1..m {
            simpson += integrand(k as f64 * hh) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        simpson *= hh / 3.0;
        let g = GridFunction::from_fn(0.0, 10.0, 20_001, 1, |x| DVector::from_element(1, f(x)));
        let got = weighted_norm(&g, &WeightedNorm::l2(eta));
        assert!((got * got - simpson).abs() < 1e-6, "{} vs {simpson}", got * got);
        assert!(WeightedNorm::mixed(0.2, 0.1).is_err());
    }
}
