//! The degenerate equation `(Γ₀ ∂ₓ + I) w = g` on a grid, by spectral
//! decomposition of `Γ₀` into scalar problems `α u' + u = g`.
//!
//! Each scalar problem is solved by exact integration of the piecewise-linear
//! interpolant of `g` against the one-sided kernel
//! `|α|⁻¹ e^{-|x-y|/|α|} 1{sgn(x-y) = sgn α}`, with zero extension outside the
//! grid. The discrete transfer function of this recursion has modulus at most
//! one, so the scheme is an `ℓ²` contraction for every `α` and `h`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linalg::{spectral_norm, sym_eigen};
use crate::scalar::{from_usize, lit, structural_tol, to_f64, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T: Real> {
    /// Eigenvalues `α_λ`, ascending.
    pub alphas: DVector<T>,
    /// Orthonormal eigenvectors (columns).
    pub vectors: DMatrix<T>,
    /// Modes with `α > 0` (decaying forward under `Γ₀ w' = -w`).
    pub stable: Vec<usize>,
    pub unstable: Vec<usize>,
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn min_abs_alpha(&self) -> T {
        self.alphas.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b.abs()))
    }

    pub fn max_abs_alpha(&self) -> T {
        self.alphas.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    /// Default spacing `min(1e-2, min|α| / 20)`.
    pub fn default_spacing(&self) -> f64 {
        if self.dim() == 0 {
            return 1e-2;
        }
        (to_f64(self.min_abs_alpha()) / 20.0).min(1e-2)
    }

    /// Orthogonal projection onto the stable eigenspace.
    pub fn stable_projector(&self) -> DMatrix<T> {
        let mut p = DMatrix::zeros(self.dim(), self.dim());
        for &k in &self.stable {
            let e = self.vectors.column(k);
            p += e * e.transpose();
        }
        p
    }
}

pub fn spectral_decompose<T: Real>(gamma0: &DMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let (alphas, vectors) = sym_eigen(gamma0);
    let norm = spectral_norm(gamma0);
    let thresh = lit::<T>(structural_tol::<T>(1e-12)) * norm;
    if let Some(a) = alphas.iter().find(|a| a.abs() <= thresh) {
        return Err(Error::ZeroEigenvalue(to_f64(*a)));
    }
    let stable = (0..alphas.len()).filter(|&k| alphas[k] > T::zero()).collect();
    let unstable = (0..alphas.len()).filter(|&k| alphas[k] < T::zero()).collect();
    Ok(SpectralDecomposition {
        alphas,
        vectors,
        stable,
        unstable,
    })
}

/// Weights `(E, c₀, c₁)` of one step of the recursion for `τ = h/|α|`:
/// `u_{k+1} = E u_k + c₀ g_k + c₁ g_{k+1}` (forward orientation).
fn step_weights<T: Real>(tau: T) -> (T, T, T) {
    let e = (-tau).exp();
    let one_minus_e = -((-tau).exp_m1());
    // c₀ = ∫₀¹ τ t e^{-τt} dt = (1 - e(1+τ))/τ, by series when τ is small.
    let c0 = if tau < lit(0.1) {
        let mut term = tau; // (-1)^j τ^{j+1}/j!
        let mut sum = T::zero();
        for j in 0..16 {
            sum += term / from_usize::<T>(j + 2);
            term = -term * tau / from_usize::<T>(j + 1);
        }
        sum
    } else {
        (one_minus_e - tau * e) / tau
    };
    (e, c0, one_minus_e - c0)
}

/// Solves `α u' + u = g` on the grid spacing `h` (zero extension outside).
pub fn scalar_resolvent_slice<T: Real>(alpha: T, h: T, g: &[T], out: &mut [T]) {
    let n = g.len();
    debug_assert_eq!(out.len(), n);
    if n == 0 {
        return;
    }
    let (e, c0, c1) = step_weights(h / alpha.abs());
    if alpha > T::zero() {
        out[0] = T::zero();
        for k in 0..n - 1 {
            out[k + 1] = e * out[k] + c0 * g[k] + c1 * g[k + 1];
        }
    } else {
        out[n - 1] = T::zero();
        for k in (0..n - 1).rev() {
            out[k] = e * out[k + 1] + c0 * g[k + 1] + c1 * g[k];
        }
    }
}

/// Scalar resolvent on a one-component grid function.
pub fn apply_scalar_resolvent<T: Real>(alpha: T, g: &GridFunction<T>) -> Result<GridFunction<T>> {
    if alpha == T::zero() {
        return Err(Error::ZeroEigenvalue(0.0));
    }
    if g.dim() != 1 {
        return Err(Error::Dimension("scalar resolvent needs a scalar grid function".into()));
    }
    let src: Vec<T> = g.values.column(0).iter().copied().collect();
    let mut out = vec![T::zero(); src.len()];
    scalar_resolvent_slice(alpha, g.h, &src, &mut out);
    Ok(g.with_values(DMatrix::from_column_slice(out.len(), 1, &out)))
}

fn modal_apply<T: Real>(
    decomp: &SpectralDecomposition<T>,
    g: &GridFunction<T>,
    sign: T,
) -> Result<GridFunction<T>> {
    if g.dim() != decomp.dim() {
        return Err(Error::Dimension(format!(
            "grid function has {} components, Γ₀ has {}",
            g.dim(),
            decomp.dim()
        )));
    }
    let modes = &g.values * &decomp.vectors;
    let n = g.len();
    let mut out = DMatrix::zeros(n, decomp.dim());
    let mut buf = vec![T::zero(); n];
    for k in 0..decomp.dim() {
        let col: Vec<T> = modes.column(k).iter().copied().collect();
        scalar_resolvent_slice(decomp.alphas[k] * sign, g.h, &col, &mut buf);
        out.column_mut(k).copy_from_slice(&buf);
    }
    Ok(g.with_values(out * decomp.vectors.transpose()))
}

/// `(Γ₀ ∂ₓ + I)⁻¹ g`.
pub fn apply_resolvent<T: Real>(decomp: &SpectralDecomposition<T>, g: &GridFunction<T>) -> Result<GridFunction<T>> {
    modal_apply(decomp, g, T::one())
}

/// `(-Γ₀ ∂ₓ + I)⁻¹ g`, the adjoint of [`apply_resolvent`].
pub fn apply_adjoint_resolvent<T: Real>(decomp: &SpectralDecomposition<T>, g: &GridFunction<T>) -> Result<GridFunction<T>> {
    modal_apply(decomp, g, -T::one())
}

/// Operator norm of the resolvent kernel at offset `θ`:
/// `max_λ |α_λ|⁻¹ e^{-|θ|/|α_λ|}`.
pub fn kernel_norm_probe<T: Real>(decomp: &SpectralDecomposition<T>, thetas: &[f64]) -> Result<Vec<(f64, f64)>> {
    thetas
        .iter()
        .map(|&theta| {
            if theta == 0.0 {
                return Err(Error::Precondition("kernel probe needs θ != 0".into()));
            }
            let v = decomp
                .alphas
                .iter()
                .map(|&a| {
                    let a = to_f64(a).abs();
                    (-theta.abs() / a).exp() / a
                })
                .fold(0.0, f64::max);
            Ok((theta, v))
        })
        .collect()
}

/// Fourier symbol of the resolvent: rows `(ω, |𝒮(ω)|, (1+|ω|)|𝒮'(ω)|)` with
/// `𝒮(ω) = (iωΓ₀ + I)⁻¹`.
pub fn symbol_bounds<T: Real>(decomp: &SpectralDecomposition<T>, omegas: &[f64]) -> Vec<(f64, f64, f64)> {
    omegas
        .iter()
        .map(|&w| {
            let mut s = 0.0f64;
            let mut ds = 0.0f64;
            for &a in decomp.alphas.iter() {
                let a = to_f64(a);
                let d = 1.0 + w * w * a * a;
                s = s.max(1.0 / d.sqrt());
                ds = ds.max(a.abs() / d);
            }
            (w, s, ds * (1.0 + w.abs()))
        })
        .collect()
}

/// Closed-form supremum over `ω` of `(1+|ω|)|α|/(1+ω²α²)`:
/// `(|α| + (α² + 1)^{1/2}) / 2`.
pub fn symbol_derivative_sup(alpha: f64) -> f64 {
    let a = alpha.abs();
    (a + (a * a + 1.0).sqrt()) / 2.0
}

/// `T_S(x) f = Σ_{α>0} e^{-x/α} ⟨f, e_λ⟩ e_λ` for `x ≥ 0`.
pub fn semigroup_apply<T: Real>(decomp: &SpectralDecomposition<T>, x: T, f: &DVector<T>) -> Result<DVector<T>> {
    if x < T::zero() {
        return Err(Error::Precondition("semigroup needs x >= 0".into()));
    }
    let mut out = DVector::zeros(decomp.dim());
    for &k in &decomp.stable {
        let e = decomp.vectors.column(k);
        out += e * (e.dot(f) * (-x / decomp.alphas[k]).exp());
    }
    Ok(out)
}

/// `‖|Γ₀|^{-1/2} Π_S f‖`.
pub fn h1_stable_graph_norm<T: Real>(decomp: &SpectralDecomposition<T>, f: &DVector<T>) -> T {
    decomp
        .stable
        .iter()
        .map(|&k| {
            let c = decomp.vectors.column(k).dot(f);
            c * c / decomp.alphas[k]
        })
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}
