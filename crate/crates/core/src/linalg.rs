//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{lit, Real};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// ascending and eigenvector signs fixed (first significant entry positive).
pub fn sym_eigen<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * lit::<T>(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut vals = DVector::zeros(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        vals[k] = eig.eigenvalues[j];
        let mut col = eig.eigenvectors.column(j).into_owned();
        fix_sign(&mut col);
        vecs.set_column(k, &col);
    }
    (vals, vecs)
}

/// Flips `v` so that its first significant component is positive.
pub fn fix_sign<T: Real>(v: &mut DVector<T>) {
    let scale = v.amax();
    if scale == T::zero() {
        return;
    }
    let thresh = scale * lit(1e-8);
    if let Some(x) = v.iter().find(|x| x.abs() > thresh) {
        if *x < T::zero() {
            v.neg_mut();
        }
    }
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |a, &b| a.max(b))
}

/// Splits the symmetric matrix `m` into an orthonormal kernel basis and an
/// orthonormal image basis, using the threshold `rel_tol * max|eig|`.
pub fn kernel_image_split<T: Real>(m: &DMatrix<T>, rel_tol: T) -> (DMatrix<T>, DMatrix<T>) {
    let n = m.nrows();
    let (vals, vecs) = sym_eigen(m);
    let scale = vals.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let thresh = rel_tol * scale;
    let ker: Vec<usize> = (0..n).filter(|&i| vals[i].abs() <= thresh).collect();
    let im: Vec<usize> = (0..n).filter(|&i| vals[i].abs() > thresh).collect();
    (select_columns(&vecs, &ker), select_columns(&vecs, &im))
}

pub fn select_columns<T: Real>(m: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    let mut out = DMatrix::zeros(m.nrows(), idx.len());
    for (k, &j) in idx.iter().enumerate() {
        out.set_column(k, &m.column(j));
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the column span of the
/// orthonormal matrix `basis`.
pub fn orthonormal_complement<T: Real>(basis: &DMatrix<T>) -> DMatrix<T> {
    let n = basis.nrows();
    let proj = DMatrix::<T>::identity(n, n) - basis * basis.transpose();
    let (vals, vecs) = sym_eigen(&proj);
    let idx: Vec<usize> = (0..n).filter(|&i| vals[i] > lit(0.5)).collect();
    select_columns(&vecs, &idx)
}

/// Sine of the largest principal angle between the spans of two orthonormal
/// matrices. Returns 1 when the dimensions differ.
pub fn max_principal_angle_sin<T: Real>(u: &DMatrix<T>, w: &DMatrix<T>) -> T {
    if u.ncols() != w.ncols() {
        return T::one();
    }
    if u.ncols() == 0 {
        return T::zero();
    }
    let resid = w - u * (u.transpose() * w);
    spectral_norm(&resid)
}

/// Gram-Schmidt (two passes) of the columns of `m`. Columns whose residual
/// falls below `tol` are dropped.
pub fn gram_schmidt<T: Real>(m: &DMatrix<T>, tol: T) -> DMatrix<T> {
    let mut cols: Vec<DVector<T>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
        }
        let nv = v.norm();
        if nv > tol {
            cols.push(v / nv);
        }
    }
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

pub fn random_matrix<T: Real, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let x: f64 = rng.sample(StandardNormal);
        lit(x)
    })
}

pub fn random_vector<T: Real, R: Rng>(n: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(n, |_, _| {
        let x: f64 = rng.sample(StandardNormal);
        lit(x)
    })
}

/// Haar-like random orthogonal matrix.
pub fn random_orthogonal<T: Real, R: Rng>(n: usize, rng: &mut R) -> DMatrix<T> {
    loop {
        let g = random_matrix::<T, R>(n, n, rng);
        let q = gram_schmidt(&g, lit(1e-6));
        if q.ncols() == n {
            return q;
        }
    }
}

/// Symmetric square root and inverse square root of a symmetric positive
/// definite matrix.
pub fn spd_sqrt_pair<T: Real>(m: &DMatrix<T>) -> Option<(DMatrix<T>, DMatrix<T>)> {
    let n = m.nrows();
    let (vals, vecs) = sym_eigen(m);
    if n > 0 && vals[0] <= T::zero() {
        return None;
    }
    let s = DMatrix::from_diagonal(&vals.map(|x| x.sqrt()));
    let si = DMatrix::from_diagonal(&vals.map(|x| T::one() / x.sqrt()));
    Some((&vecs * s * vecs.transpose(), &vecs * si * vecs.transpose()))
}

/// Eigenvalues of a general square matrix, real parts sorted ascending,
/// together with the largest imaginary part encountered.
pub fn real_spectrum<T: Real>(m: &DMatrix<T>) -> (Vec<T>, T) {
    if m.nrows() == 0 {
        return (Vec::new(), T::zero());
    }
    let ev = m.clone().complex_eigenvalues();
    let mut re: Vec<T> = ev.iter().map(|c| c.re).collect();
    let im = ev.iter().fold(T::zero(), |a, c| a.max(c.im.abs()));
    re.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    (re, im)
}

/// Unit right singular vector of the smallest singular value of `m`,
/// sign-fixed. For `m = M - λI` with `λ` a simple eigenvalue this is the
/// eigenvector.
pub fn null_vector<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let k = (0..svd.singular_values.len())
        .min_by(|&a, &b| {
            svd.singular_values[a]
                .partial_cmp(&svd.singular_values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mut v = DVector::from_fn(n, |i, _| vt[(k, i)]);
    let nv = v.norm();
    if nv > T::zero() {
        v /= nv;
    }
    fix_sign(&mut v);
    v
}

/// Frobenius-norm of `m - m^T`.
pub fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    (m - m.transpose()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_matrix::<f64, _>(6, 6, &mut rng);
        let s = &g + g.transpose();
        let (vals, vecs) = sym_eigen(&s);
        for i in 1..6 {
            assert!(vals[i - 1] <= vals[i]);
        }
        let rec = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((rec - s).norm() < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_orthogonal::<f64, _>(7, &mut rng);
        let b = q.columns(0, 3).into_owned();
        let c = orthonormal_complement(&b);
        assert_eq!(c.ncols(), 4);
        assert!((b.transpose() * &c).norm() < 1e-12);
        assert!((c.transpose() * &c - DMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn principal_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_orthogonal::<f64, _>(5, &mut rng);
        let a = q.columns(0, 2).into_owned();
        let rot = &a * DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        assert!(max_principal_angle_sin(&a, &rot) < 1e-12);
        let b = q.columns(2, 2).into_owned();
        assert!((max_principal_angle_sin(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonsymmetric_spectrum_and_eigenvector() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 1.0, 0.0, -1.0]);
        let (vals, im) = real_spectrum(&m);
        assert!(im == 0.0);
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);
        let v = null_vector(&(&m - DMatrix::identity(2, 2) * 2.0));
        assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
    }

    #[test]
    fn kernel_split_of_rank_deficient() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let (k, i) = kernel_image_split(&m, 1e-10);
        assert_eq!(k.ncols(), 1);
        assert_eq!(i.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
    }
}
