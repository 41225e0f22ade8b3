//! Truncated multivariate vector-valued polynomials.
//!
//! Used for the Taylor expansion of the center-manifold graph. Monomials are
//! stored in graded order, so each homogeneous part is a contiguous block.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bilinear::BilinearMap;
use crate::scalar::{from_usize, Real};

/// All monomials in `nvars` variables of total degree at most `max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    nvars: usize,
    max_degree: usize,
    exps: Vec<Vec<u32>>,
    degree_start: Vec<usize>,
    /// `(parent, var)` with `x^e = x^parent · x_var`; unused for the constant.
    parent: Vec<(usize, usize)>,
    /// `product[a * len + b]`, `usize::MAX` when the degree overflows.
    product: Vec<usize>,
    /// `lower[k * nvars + v]`: index of `x^{e_k} / x_v`, `usize::MAX` if `e_k[v] = 0`.
    lower: Vec<usize>,
}

impl MonomialBasis {
    pub fn new(nvars: usize, max_degree: usize) -> Arc<Self> {
        let mut exps: Vec<Vec<u32>> = vec![vec![0; nvars]];
        let mut degree_start = vec![0];
        let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
        index.insert(vec![0; nvars], 0);
        let mut parent = vec![(0, 0)];
        let mut prev = 0..1;
        for _ in 1..=max_degree {
            degree_start.push(exps.len());
            let start = exps.len();
            for p in prev.clone() {
                // Raise only variables at or after the last nonzero one to
                // enumerate each monomial once.
                let last = exps[p].iter().rposition(|&e| e > 0).unwrap_or(0);
                for v in last..nvars {
                    let mut e = exps[p].clone();
                    e[v] += 1;
                    index.insert(e.clone(), exps.len());
                    exps.push(e);
                    parent.push((p, v));
                }
            }
            prev = start..exps.len();
        }
        degree_start.push(exps.len());
        let len = exps.len();
        let mut product = vec![usize::MAX; len * len];
        for a in 0..len {
            for b in 0..len {
                let e: Vec<u32> = exps[a].iter().zip(&exps[b]).map(|(x, y)| x + y).collect();
                if let Some(&k) = index.get(&e) {
                    product[a * len + b] = k;
                }
            }
        }
        let mut lower = vec![usize::MAX; len * nvars];
        for k in 0..len {
            for v in 0..nvars {
                if exps[k][v] > 0 {
                    let mut e = exps[k].clone();
                    e[v] -= 1;
                    lower[k * nvars + v] = index[&e];
                }
            }
        }
        Arc::new(Self {
            nvars,
            max_degree,
            exps,
            degree_start,
            parent,
            product,
            lower,
        })
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn exponents(&self, k: usize) -> &[u32] {
        &self.exps[k]
    }

    /// Index range of the monomials of total degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.degree_start[d]..self.degree_start[d + 1]
    }

    pub fn degree(&self, k: usize) -> usize {
        self.exps[k].iter().map(|&e| e as usize).sum()
    }

    #[inline]
    pub fn product(&self, a: usize, b: usize) -> Option<usize> {
        let k = self.product[a * self.len() + b];
        (k != usize::MAX).then_some(k)
    }

    /// Index of the monomial `x_var`.
    pub fn linear(&self, var: usize) -> usize {
        1 + var
    }

    /// Values of every monomial at `x`.
    pub fn values<T: Real>(&self, x: &DVector<T>) -> Vec<T> {
        let mut out = vec![T::one(); self.len()];
        for k in 1..self.len() {
            let (p, v) = self.parent[k];
            out[k] = out[p] * x[v];
        }
        out
    }
}

/// Vector-valued polynomial `Σ_k c_k x^{e_k}`, coefficients as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap<T: Real> {
    basis: Arc<MonomialBasis>,
    pub coeffs: DMatrix<T>,
}

impl<T: Real> PolyMap<T> {
    pub fn zeros(basis: &Arc<MonomialBasis>, out_dim: usize) -> Self {
        Self {
            basis: basis.clone(),
            coeffs: DMatrix::zeros(out_dim, basis.len()),
        }
    }

    /// The identity map `x ↦ x`.
    pub fn identity(basis: &Arc<MonomialBasis>) -> Self {
        let mut p = Self::zeros(basis, basis.nvars());
        for v in 0..basis.nvars() {
            p.coeffs[(v, basis.linear(v))] = T::one();
        }
        p
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn out_dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn eval(&self, x: &DVector<T>) -> DVector<T> {
        let mv = DVector::from_vec(self.basis.values(x));
        &self.coeffs * mv
    }

    /// Jacobian at `x` (`out_dim × nvars`).
    pub fn jacobian(&self, x: &DVector<T>) -> DMatrix<T> {
        let nv = self.basis.nvars();
        let mut jac = DMatrix::zeros(self.out_dim(), nv);
        for v in 0..nv {
            jac.set_column(v, &self.partial(v).eval(x));
        }
        jac
    }

    /// Homogeneous part of degree `d`.
    pub fn degree_part(&self, d: usize) -> Self {
        let mut out = Self::zeros(&self.basis, self.out_dim());
        if d <= self.basis.max_degree() {
            let r = self.basis.degree_range(d);
            out.coeffs.columns_mut(r.start, r.len()).copy_from(&self.coeffs.columns(r.start, r.len()));
        }
        out
    }

    /// Largest coefficient magnitude of the degree-`d` part.
    pub fn max_abs_degree(&self, d: usize) -> T {
        let r = self.basis.degree_range(d);
        self.coeffs.columns(r.start, r.len()).amax()
    }

    /// `M · p`.
    pub fn left_mul(&self, m: &DMatrix<T>) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: m * &self.coeffs,
        }
    }

    /// Stacks `[self; other]`.
    pub fn vstack(&self, other: &Self) -> Self {
        let (a, b) = (self.out_dim(), other.out_dim());
        let mut coeffs = DMatrix::zeros(a + b, self.basis.len());
        coeffs.rows_mut(0, a).copy_from(&self.coeffs);
        coeffs.rows_mut(a, b).copy_from(&other.coeffs);
        Self {
            basis: self.basis.clone(),
            coeffs,
        }
    }

    /// `∂p/∂x_var`.
    pub fn partial(&self, var: usize) -> Self {
        let mut out = Self::zeros(&self.basis, self.out_dim());
        for k in 1..self.basis.len() {
            let e = self.basis.exponents(k)[var];
            if e == 0 {
                continue;
            }
            let lower = self.basis.lower[k * self.basis.nvars + var];
            let mut col = out.coeffs.column_mut(lower);
            col += self.coeffs.column(k) * from_usize::<T>(e as usize);
        }
        out
    }

    /// `Dp · f`, the derivative along the polynomial vector field `f`,
    /// truncated at the basis degree.
    pub fn along(&self, field: &Self) -> Self {
        assert_eq!(field.out_dim(), self.basis.nvars());
        let mut out = Self::zeros(&self.basis, self.out_dim());
        for v in 0..self.basis.nvars() {
            let dp = self.partial(v);
            mul_accumulate(&mut out, &dp, field, v);
        }
        out
    }

    /// `B(p, p)` for a bilinear map with `in_dim = out_dim(p)`, truncated.
    pub fn bilinear(&self, b: &BilinearMap<T>) -> Self {
        let len = self.basis.len();
        let mut out = Self::zeros(&self.basis, b.out_dim());
        let nz: Vec<usize> = (0..len).filter(|&k| self.coeffs.column(k).amax() > T::zero()).collect();
        for &i in &nz {
            let ci = self.coeffs.column(i).into_owned();
            for &j in &nz {
                if let Some(k) = self.basis.product(i, j) {
                    let cj = self.coeffs.column(j).into_owned();
                    let mut col = out.coeffs.column_mut(k);
                    col += b.apply(&ci, &cj);
                }
            }
        }
        out
    }
}

impl<T: Real> std::ops::Add for &PolyMap<T> {
    type Output = PolyMap<T>;
    fn add(self, rhs: Self) -> PolyMap<T> {
        PolyMap {
            basis: self.basis.clone(),
            coeffs: &self.coeffs + &rhs.coeffs,
        }
    }
}

impl<T: Real> std::ops::Sub for &PolyMap<T> {
    type Output = PolyMap<T>;
    fn sub(self, rhs: Self) -> PolyMap<T> {
        PolyMap {
            basis: self.basis.clone(),
            coeffs: &self.coeffs - &rhs.coeffs,
        }
    }
}

impl<T: Real> std::ops::Sub<&PolyMap<T>> for PolyMap<T> {
    type Output = PolyMap<T>;
    fn sub(self, rhs: &PolyMap<T>) -> PolyMap<T> {
        &self - rhs
    }
}

impl<T: Real> std::ops::Mul<T> for PolyMap<T> {
    type Output = PolyMap<T>;
    fn mul(mut self, s: T) -> PolyMap<T> {
        self.coeffs *= s;
        self
    }
}

/// `out += p · f_row` where `f_row` is row `row` of `f` as a scalar polynomial.
fn mul_accumulate<T: Real>(out: &mut PolyMap<T>, p: &PolyMap<T>, f: &PolyMap<T>, row: usize) {
    let basis = p.basis.clone();
    for a in 0..basis.len() {
        let ca = p.coeffs.column(a);
        if ca.amax() == T::zero() {
            continue;
        }
        for b in 0..basis.len() {
            let s = f.coeffs[(row, b)];
            if s == T::zero() {
                continue;
            }
            if let Some(k) = basis.product(a, b) {
                let mut col = out.coeffs.column_mut(k);
                col += ca * s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn basis_counts_and_grading() {
        for (nv, d) in [(1, 5), (3, 4), (4, 3)] {
            let b = MonomialBasis::new(nv, d);
            assert_eq!(b.len(), binom(nv + d, d));
            for deg in 0..=d {
                for k in b.degree_range(deg) {
                    assert_eq!(b.degree(k), deg);
                }
            }
        }
        let b = MonomialBasis::new(2, 2);
        assert_eq!(b.product(b.linear(0), b.linear(1)), b.product(b.linear(1), b.linear(0)));
        assert!(b.product(3, 3).is_none());
    }

    #[test]
    fn evaluation_matches_direct_products() {
        let b = MonomialBasis::new(3, 4);
        let x = DVector::from_vec(vec![0.3f64, -1.2, 2.0]);
        let vals = b.values(&x);
        for k in 0..b.len() {
            let direct: f64 = (0..3).map(|v| x[v].powi(b.exponents(k)[v] as i32)).product();
            assert!((vals[k] - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn bilinear_of_identity_is_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = MonomialBasis::new(3, 3);
        let bm = BilinearMap::from_fn(2, 3, |o, i, j| ((o + 2 * i + 3 * j) % 5) as f64 - 2.0);
        let p = PolyMap::<f64>::identity(&basis);
        let q = p.bilinear(&bm);
        for _ in 0..5 {
            let x: DVector<f64> = random_vector(3, &mut rng);
            assert!((q.eval(&x) - bm.apply(&x, &x)).amax() < 1e-13);
        }
    }

    #[test]
    fn derivative_along_field_matches_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = MonomialBasis::new(2, 6);
        let mut p = PolyMap::<f64>::zeros(&basis, 2);
        let mut f = PolyMap::<f64>::zeros(&basis, 2);
        for k in 0..basis.len() {
            if basis.degree(k) <= 3 {
                p.coeffs.set_column(k, &random_vector(2, &mut rng));
                f.coeffs.set_column(k, &random_vector(2, &mut rng));
            }
        }
        let dpf = p.along(&f);
        let x = DVector::from_vec(vec![0.4, -0.7]);
        let expect = p.jacobian(&x) * f.eval(&x);
        assert!((dpf.eval(&x) - expect).amax() < 1e-12);
    }

    #[test]
    fn partials_of_monomial() {
        let basis = MonomialBasis::new(2, 3);
        let mut p = PolyMap::<f64>::zeros(&basis, 1);
        // x0^2 x1
        let k = (0..basis.len()).find(|&k| basis.exponents(k) == [2, 1]).unwrap();
        p.coeffs[(0, k)] = 1.0;
        let x = DVector::from_vec(vec![1.5, -2.0]);
        assert!((p.partial(0).eval(&x)[0] - 2.0 * 1.5 * -2.0).abs() < 1e-15);
        assert!((p.partial(1).eval(&x)[0] - 2.25).abs() < 1e-15);
        assert_eq!(p.degree_part(3), p);
        assert_eq!(p.degree_part(2).coeffs.amax(), 0.0);
    }
}
