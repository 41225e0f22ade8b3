//! Reduction of `A u' = Q(u)` to the canonical form
//!
//! ```text
//! w_c' = J w_c + Q̃_c(w, w),      Γ₀ w_h' = -w_h + Q̃_h(w, w),
//! ```
//!
//! through the macro-micro split, the normalization `E = -I`, and the
//! splitting `V⊥ = ker A₁₁ ⊕ im A₁₁`. Coordinates are centered at `ū`.

use nalgebra::{DMatrix, DVector};

use crate::bilinear::BilinearMap;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linalg::{
    asymmetry, gram_schmidt, kernel_image_split, max_principal_angle_sin, orthonormal_complement, spd_sqrt_pair,
    spectral_norm, sym_eigen,
};
use crate::model::KineticModel;
use crate::scalar::{lit, structural_tol, to_f64, Real};
use crate::textio::{fmt_bilinear, fmt_matrix, fmt_vec, value_bilinear, value_matrix, value_usize, value_vec};

/// Relative singular value threshold for the kernel of `A₁₁`.
pub const KERNEL_REL_TOL: f64 = 1e-10;

/// Blocks of `A` in the `(V⊥, V)` decomposition, possibly after the change
/// of micro variables `c = (-E₀)^{1/2} v`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroMicroSplit<T: Real> {
    pub a11: DMatrix<T>,
    pub a12: DMatrix<T>,
    pub a21: DMatrix<T>,
    pub a22: DMatrix<T>,
    /// Micro linearization in the current micro variables.
    pub e: DMatrix<T>,
    /// `c = micro_fwd · v` maps original micro coordinates to current ones.
    pub micro_fwd: DMatrix<T>,
    /// Inverse of `micro_fwd`.
    pub micro_inv: DMatrix<T>,
    pub vperp_basis: DMatrix<T>,
    pub v_basis: DMatrix<T>,
}

impl<T: Real> MacroMicroSplit<T> {
    /// Reassembles `A` from the blocks in original coordinates.
    pub fn reassemble(&self) -> DMatrix<T> {
        let a12 = &self.a12 * &self.micro_fwd;
        let a21 = self.micro_fwd.transpose() * &self.a21;
        let a22 = self.micro_fwd.transpose() * &self.a22 * &self.micro_fwd;
        let p = &self.vperp_basis;
        let v = &self.v_basis;
        p * &self.a11 * p.transpose() + p * a12 * v.transpose() + v * a21 * p.transpose() + v * a22 * v.transpose()
    }

    pub fn is_normalized(&self) -> bool {
        let k = self.e.nrows();
        (&self.e + DMatrix::<T>::identity(k, k)).amax() <= lit::<T>(1e3) * T::eps()
    }
}

pub fn macro_micro_split<T: Real>(model: &KineticModel<T>) -> MacroMicroSplit<T> {
    let p = &model.vperp_basis;
    let v = &model.v_basis;
    let e = model.micro_linearization();
    let k = v.ncols();
    MacroMicroSplit {
        a11: p.transpose() * &model.a * p,
        a12: p.transpose() * &model.a * v,
        a21: v.transpose() * &model.a * p,
        a22: v.transpose() * &model.a * v,
        e: (&e + e.transpose()) * lit::<T>(0.5),
        micro_fwd: DMatrix::identity(k, k),
        micro_inv: DMatrix::identity(k, k),
        vperp_basis: p.clone(),
        v_basis: v.clone(),
    }
}

/// Substitutes `v = (-E)^{-1/2} c` and multiplies the micro equation by
/// `(-E)^{-1/2}`, so that the new micro linearization is exactly `-I`.
pub fn normalize_e<T: Real>(split: &MacroMicroSplit<T>) -> Result<MacroMicroSplit<T>> {
    let neg = -split.e.clone();
    let (sq, isq) = spd_sqrt_pair(&neg).ok_or_else(|| {
        let top = sym_eigen(&split.e).0.iter().fold(T::min_value().unwrap(), |a, &b| a.max(b));
        Error::NotNegativeDefinite(to_f64(top))
    })?;
    let k = split.e.nrows();
    let sym = |m: DMatrix<T>| (&m + m.transpose()) * lit::<T>(0.5);
    Ok(MacroMicroSplit {
        a11: split.a11.clone(),
        a12: &split.a12 * &isq,
        a21: &isq * &split.a21,
        a22: sym(&isq * &split.a22 * &isq),
        e: -DMatrix::<T>::identity(k, k),
        micro_fwd: &sq * &split.micro_fwd,
        micro_inv: &split.micro_inv * &isq,
        vperp_basis: split.vperp_basis.clone(),
        v_basis: split.v_basis.clone(),
    })
}

/// Residuals of the structural facts about `A₁₁` and `T₁₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCheck {
    /// Smallest singular value of `T₁₂*` relative to `‖A₁₂‖` (must be > 0).
    pub t12_star_min_sv: f64,
    /// Sine of the largest principal angle between `im T₁₂` and `ker A₁₁`.
    pub image_angle: f64,
    /// Smallest |eigenvalue| of `Ã₁₁` relative to `‖A₁₁‖`.
    pub atilde11_min_eig: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct A11Decomposition<T: Real> {
    /// Orthonormal `r × m` basis of `ker A₁₁`.
    pub ker_basis: DMatrix<T>,
    /// Orthonormal `r × (r-m)` basis of `im A₁₁`.
    pub im_basis: DMatrix<T>,
    /// `T₁₂ = P_{ker A₁₁} A₁₂` in kernel coordinates (`m × (n-r)`).
    pub t12: DMatrix<T>,
    /// `Ã₁₂ = P_{im A₁₁} A₁₂` in image coordinates.
    pub atilde12: DMatrix<T>,
    /// `A₁₁` restricted to its image.
    pub atilde11: DMatrix<T>,
    pub check: KernelCheck,
}

impl<T: Real> A11Decomposition<T> {
    pub fn m(&self) -> usize {
        self.ker_basis.ncols()
    }
}

/// Splits `V⊥ = ker A₁₁ ⊕ im A₁₁` and verifies that `T₁₂*` is injective,
/// `im T₁₂ = ker A₁₁`, and `Ã₁₁` is invertible.
pub fn decompose_a11<T: Real>(split: &MacroMicroSplit<T>) -> Result<A11Decomposition<T>> {
    let (k, i) = kernel_image_split(&split.a11, lit(structural_tol::<T>(KERNEL_REL_TOL)));
    let t12 = k.transpose() * &split.a12;
    let atilde12 = i.transpose() * &split.a12;
    let atilde11 = {
        let m = i.transpose() * &split.a11 * &i;
        (&m + m.transpose()) * lit::<T>(0.5)
    };
    let a12_norm = spectral_norm(&split.a12).max(lit(f64::MIN_POSITIVE));
    let a11_norm = spectral_norm(&split.a11);
    let t12_star_min_sv = if k.ncols() == 0 {
        f64::INFINITY
    } else {
        let sv = t12.clone().svd(false, false).singular_values;
        to_f64(sv.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b)) / a12_norm)
    };
    let image_angle = if k.ncols() == 0 {
        0.0
    } else {
        let lifted = &k * &t12;
        let img = gram_schmidt(&lifted, lit::<T>(structural_tol::<T>(1e-8)) * a12_norm);
        to_f64(max_principal_angle_sin(&k, &img))
    };
    let atilde11_min_eig = if i.ncols() == 0 {
        f64::INFINITY
    } else {
        let vals = sym_eigen(&atilde11).0;
        to_f64(vals.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b.abs())) / a11_norm)
    };
    let check = KernelCheck {
        t12_star_min_sv,
        image_angle,
        atilde11_min_eig,
    };
    let tol = structural_tol::<T>(KERNEL_REL_TOL);
    let mut problems = Vec::new();
    if t12_star_min_sv <= tol {
        problems.push(format!("T12* is not injective (min singular value {t12_star_min_sv:e})"));
    }
    if image_angle > structural_tol::<T>(1e-8) {
        problems.push(format!("im T12 differs from ker A11 (angle {image_angle:e})"));
    }
    if atilde11_min_eig <= tol {
        problems.push(format!("A11 is not invertible on its image ({atilde11_min_eig:e})"));
    }
    if !problems.is_empty() {
        return Err(Error::DecompositionCheck(problems.join("; ")));
    }
    Ok(A11Decomposition {
        ker_basis: k,
        im_basis: i,
        t12,
        atilde12,
        atilde11,
        check,
    })
}

/// The canonical system with its coordinate maps.
///
/// Canonical coordinates `W = (w_c1, w_c2, w_c3, w_h)` of sizes
/// `(m, m, r-m, n-r-m)`:
///
/// ```text
/// w_c1 = u₁ - Γ₁ ṽ,   w_c2 = -(T₁₂*)⁻¹ v₁,   w_c3 = ũ + Ã₁₁⁻¹Ã₁₂ v,   w_h = ṽ,
/// ```
///
/// where `u₁, ũ` are the kernel/image parts of the macro deviation and
/// `v₁, ṽ` the `im T₁₂*` / `ker T₁₂` parts of the normalized micro deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSystem<T: Real> {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub u_bar: DVector<T>,
    pub ker_basis: DMatrix<T>,
    pub im_basis: DMatrix<T>,
    /// Orthonormal basis of `im T₁₂* ⊂ V` (normalized micro coordinates).
    pub v1_basis: DMatrix<T>,
    /// Orthonormal basis of `Ṽ = ker T₁₂`.
    pub vt_basis: DMatrix<T>,
    pub t12: DMatrix<T>,
    /// `(T₁₂*)⁻¹` on `im T₁₂*`, as an `m × (n-r)` map.
    pub t12_star_inv: DMatrix<T>,
    pub atilde11_inv: DMatrix<T>,
    pub atilde12: DMatrix<T>,
    pub gamma0: DMatrix<T>,
    pub gamma1: DMatrix<T>,
    pub j: DMatrix<T>,
    /// `W = to_canonical · (state - ū)`.
    pub to_canonical: DMatrix<T>,
    /// `state = ū + from_canonical · W`.
    pub from_canonical: DMatrix<T>,
    pub qc: BilinearMap<T>,
    pub qh: BilinearMap<T>,
    /// `(-E₀)^{-1/2}`: normalized micro forcing is `micro_inv · P_V B`.
    pub micro_inv: DMatrix<T>,
    pub vperp_basis: DMatrix<T>,
    pub v_basis: DMatrix<T>,
    pub check: KernelCheck,
}

impl<T: Real> CanonicalSystem<T> {
    pub fn center_dim(&self) -> usize {
        self.m + self.r
    }

    pub fn hyper_dim(&self) -> usize {
        self.n - self.r - self.m
    }

    pub fn to_canonical(&self, state: &DVector<T>) -> DVector<T> {
        &self.to_canonical * (state - &self.u_bar)
    }

    pub fn from_canonical(&self, w: &DVector<T>) -> DVector<T> {
        &self.u_bar + &self.from_canonical * w
    }

    pub fn split_w(&self, w: &DVector<T>) -> (DVector<T>, DVector<T>) {
        let c = self.center_dim();
        (w.rows(0, c).into_owned(), w.rows(c, self.hyper_dim()).into_owned())
    }

    pub fn join_w(&self, wc: &DVector<T>, wh: &DVector<T>) -> DVector<T> {
        let mut w = DVector::zeros(self.n);
        w.rows_mut(0, wc.len()).copy_from(wc);
        w.rows_mut(wc.len(), wh.len()).copy_from(wh);
        w
    }

    /// `(J w_c + Q̃_c(w,w), -w_h + Q̃_h(w,w))`; the hyperbolic part still has
    /// to be multiplied by `Γ₀⁻¹` to obtain `w_h'`.
    pub fn fields(&self, w: &DVector<T>) -> (DVector<T>, DVector<T>) {
        let (wc, wh) = self.split_w(w);
        let fc = &self.j * &wc + self.qc.apply(w, w);
        let fh = -wh + self.qh.apply(w, w);
        (fc, fh)
    }

    /// `diag(I_{m+r}, Γ₀)`.
    pub fn leading_operator(&self) -> DMatrix<T> {
        let c = self.center_dim();
        let mut g = DMatrix::identity(self.n, self.n);
        g.view_mut((c, c), (self.hyper_dim(), self.hyper_dim())).copy_from(&self.gamma0);
        g
    }

    /// Values `(ζ, γ)` of the conserved components `(w_c2, w_c3)` on the
    /// level set `P_{V⊥} A state = q`.
    pub fn conserved_from_flux(&self, a_macro_bar: &DVector<T>, q: &DVector<T>) -> (DVector<T>, DVector<T>) {
        let dq = q - a_macro_bar;
        let m = self.m;
        let zeta = if m == 0 {
            DVector::zeros(0)
        } else {
            // K^T dq = T12 c = M^T v1 with v1 = -M w_c2.
            let mt = &self.t12 * &self.v1_basis;
            let mtm = &mt * mt.transpose();
            -mtm.lu().solve(&(self.ker_basis.transpose() * &dq)).unwrap_or_else(|| DVector::zeros(m))
        };
        let gamma = &self.atilde11_inv * (self.im_basis.transpose() * &dq);
        (zeta, gamma)
    }
}

/// Builds the canonical system from a normalized split and its `A₁₁`
/// decomposition.
pub fn build_canonical<T: Real>(
    model: &KineticModel<T>,
    split: &MacroMicroSplit<T>,
    dec: &A11Decomposition<T>,
) -> Result<CanonicalSystem<T>> {
    if !split.is_normalized() {
        return Err(Error::Precondition("build_canonical needs a split with E = -I".into()));
    }
    let n = model.n;
    let r = model.r;
    let m = dec.m();
    let nv = n - r;
    let k = &dec.ker_basis;
    let ib = &dec.im_basis;

    let (v1b, vt) = if m == 0 {
        (DMatrix::zeros(nv, 0), DMatrix::identity(nv, nv))
    } else {
        let v1b = gram_schmidt(&dec.t12.transpose(), lit::<T>(structural_tol::<T>(1e-10)));
        if v1b.ncols() != m {
            return Err(Error::DecompositionCheck("T12* lost rank".into()));
        }
        let vt = orthonormal_complement(&v1b);
        (v1b, vt)
    };
    let mmat = &v1b.transpose() * dec.t12.transpose();
    let m_inv = if m == 0 {
        DMatrix::zeros(0, 0)
    } else {
        mmat.clone().try_inverse().ok_or_else(|| Error::DecompositionCheck("M is singular".into()))?
    };
    let atilde11_inv = if ib.ncols() == 0 {
        DMatrix::zeros(0, 0)
    } else {
        dec.atilde11
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DecompositionCheck("A11 singular on its image".into()))?
    };
    let s = {
        let s = &split.a22 - dec.atilde12.transpose() * &atilde11_inv * &dec.atilde12;
        (&s + s.transpose()) * lit::<T>(0.5)
    };
    let gamma0 = {
        let g = vt.transpose() * &s * &vt;
        (&g + g.transpose()) * lit::<T>(0.5)
    };
    let g_norm = spectral_norm(&gamma0);
    let g_min = sym_eigen(&gamma0).0.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b.abs()));
    if gamma0.nrows() > 0 && g_min <= lit::<T>(structural_tol::<T>(1e-12)) * g_norm {
        return Err(Error::SingularGamma0(to_f64(g_min)));
    }
    let gamma1 = -(&m_inv * v1b.transpose() * &s * &vt);
    let t12_star_inv = &m_inv * v1b.transpose();

    let c_dim = m + r;
    let mut j = DMatrix::zeros(c_dim, c_dim);
    for a in 0..m {
        j[(a, m + a)] = T::one();
    }

    // Deviation -> (a, c): a = V⊥ᵀ w, c = fwd V_bᵀ w.
    let mut r0 = DMatrix::zeros(n, n);
    r0.rows_mut(0, r).copy_from(&split.vperp_basis.transpose());
    r0.rows_mut(r, nv).copy_from(&(&split.micro_fwd * split.v_basis.transpose()));
    // (a, c) -> W.
    let hd = nv - m;
    let mut r1 = DMatrix::zeros(n, n);
    r1.view_mut((0, 0), (m, r)).copy_from(&k.transpose());
    r1.view_mut((0, r), (m, nv)).copy_from(&(-(&gamma1 * vt.transpose())));
    r1.view_mut((m, r), (m, nv)).copy_from(&(-(&m_inv * v1b.transpose())));
    r1.view_mut((2 * m, 0), (r - m, r)).copy_from(&ib.transpose());
    r1.view_mut((2 * m, r), (r - m, nv)).copy_from(&(&atilde11_inv * &dec.atilde12));
    r1.view_mut((c_dim, r), (hd, nv)).copy_from(&vt.transpose());
    let to_c = &r1 * &r0;

    // Explicit inverse: ṽ = w_h, v₁ = -M w_c2, c = V1b v₁ + Vt ṽ,
    // u₁ = w_c1 + Γ₁ ṽ, ũ = w_c3 - Ã₁₁⁻¹Ã₁₂ c.
    let mut s1 = DMatrix::zeros(n, n); // W -> (a, c)
    let mut c_of_w = DMatrix::zeros(nv, n);
    c_of_w.view_mut((0, m), (nv, m)).copy_from(&(-(&v1b * &mmat)));
    c_of_w.view_mut((0, c_dim), (nv, hd)).copy_from(&vt);
    let mut u1_of_w = DMatrix::zeros(m, n);
    u1_of_w.view_mut((0, 0), (m, m)).copy_from(&DMatrix::identity(m, m));
    u1_of_w.view_mut((0, c_dim), (m, hd)).copy_from(&gamma1);
    let mut ut_of_w = -(&atilde11_inv * &dec.atilde12 * &c_of_w);
    for a in 0..(r - m) {
        ut_of_w[(a, 2 * m + a)] += T::one();
    }
    s1.rows_mut(0, r).copy_from(&(k * u1_of_w + ib * ut_of_w));
    s1.rows_mut(r, nv).copy_from(&c_of_w);
    let mut s0 = DMatrix::zeros(n, n); // (a, c) -> deviation
    s0.columns_mut(0, r).copy_from(&split.vperp_basis);
    s0.columns_mut(r, nv).copy_from(&(&split.v_basis * &split.micro_inv));
    let from_c = s0 * s1;

    let forcing = &split.micro_inv * split.v_basis.transpose();
    let mut lc = DMatrix::zeros(c_dim, n);
    lc.rows_mut(0, m).copy_from(&(&t12_star_inv * &forcing));
    let lh = vt.transpose() * &forcing;
    let qc = model.b.conjugate(&lc, &from_c);
    let qh = model.b.conjugate(&lh, &from_c);

    Ok(CanonicalSystem {
        n,
        r,
        m,
        u_bar: model.u_bar.clone(),
        ker_basis: k.clone(),
        im_basis: ib.clone(),
        v1_basis: v1b,
        vt_basis: vt,
        t12: dec.t12.clone(),
        t12_star_inv,
        atilde11_inv,
        atilde12: dec.atilde12.clone(),
        gamma0,
        gamma1,
        j,
        to_canonical: to_c,
        from_canonical: from_c,
        qc,
        qh,
        micro_inv: split.micro_inv.clone(),
        vperp_basis: split.vperp_basis.clone(),
        v_basis: split.v_basis.clone(),
        check: dec.check,
    })
}

/// Split, normalize, decompose and build in one call.
pub fn reduce_model<T: Real>(model: &KineticModel<T>) -> Result<CanonicalSystem<T>> {
    let split = normalize_e(&macro_micro_split(model))?;
    let dec = decompose_a11(&split)?;
    build_canonical(model, &split, &dec)
}

/// Pointwise residual `(w_c' - Jw_c - Q̃_c, Γ₀w_h' + w_h - Q̃_h)` of a state
/// trajectory, with `forcing` (the value of `A s' - Q(s)`, if the trajectory
/// solves a forced problem) carried over by `diag(I, Γ₀) C A⁻¹`.
/// Derivatives use second-order differences.
pub fn canonical_residual_field<T: Real>(
    canon: &CanonicalSystem<T>,
    a: &DMatrix<T>,
    trajectory: &GridFunction<T>,
    forcing: Option<&GridFunction<T>>,
) -> Result<GridFunction<T>> {
    if trajectory.dim() != canon.n {
        return Err(Error::Dimension("trajectory must carry full states".into()));
    }
    let ubar = canon.u_bar.clone();
    let w = trajectory.map_nodes(canon.n, |_, s| &canon.to_canonical * (s - &ubar));
    let dw = w.derivative(1, 2);
    let lead = canon.leading_operator();
    let transfer = match forcing {
        Some(f) => {
            if f.dim() != canon.n || f.len() != trajectory.len() {
                return Err(Error::Dimension("forcing must match the trajectory".into()));
            }
            let a_inv = a.clone().try_inverse().ok_or_else(|| Error::Precondition("A is singular".into()))?;
            Some(&lead * &canon.to_canonical * a_inv)
        }
        None => None,
    };
    let mut out = DMatrix::zeros(trajectory.len(), canon.n);
    for i in 0..trajectory.len() {
        let wi = w.node(i);
        let (fc, fh) = canon.fields(&wi);
        let mut res = &lead * dw.node(i);
        let c = canon.center_dim();
        for k in 0..c {
            res[k] -= fc[k];
        }
        for k in 0..canon.hyper_dim() {
            res[c + k] -= fh[k];
        }
        if let (Some(g), Some(f)) = (&transfer, forcing) {
            res -= g * f.node(i);
        }
        out.set_row(i, &res.transpose());
    }
    Ok(trajectory.with_values(out))
}

/// `max_x (|R_c(x)| + |R_h(x)|)` of [`canonical_residual_field`].
pub fn residual_canonical<T: Real>(
    canon: &CanonicalSystem<T>,
    a: &DMatrix<T>,
    trajectory: &GridFunction<T>,
    forcing: Option<&GridFunction<T>>,
) -> Result<f64> {
    let field = canonical_residual_field(canon, a, trajectory, forcing)?;
    let c = canon.center_dim();
    let mut worst = 0.0f64;
    for i in 0..field.len() {
        let row = field.node(i);
        let rc = row.rows(0, c).norm();
        let rh = row.rows(c, canon.hyper_dim()).norm();
        worst = worst.max(to_f64(rc + rh));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCheck {
    pub h: f64,
    pub residual: f64,
    /// A priori bound `√2 · h²/6 · ‖diag(I, Γ₀) C‖ · sup|s'''|` on the
    /// central difference error, in the `|R_c| + |R_h|` norm.
    pub grid_error: f64,
}

/// Canonical residual of the manufactured solution `s = ū + a·e^{-x²}·dir`
/// on `[-4, 4]` with spacing `h`, forced so that it solves the steady
/// equation exactly.
pub fn manufactured_residual_check<T: Real>(
    model: &KineticModel<T>,
    canon: &CanonicalSystem<T>,
    dir: &DVector<T>,
    amplitude: f64,
    h: f64,
) -> Result<ManufacturedCheck> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Precondition(format!("spacing must lie in (0, 1), got {h}")));
    }
    let n = (8.0 / h).round() as usize + 1;
    let a = lit::<T>(amplitude);
    let bump = |x: T| (-x * x).exp();
    let traj = GridFunction::from_fn(lit(-4.0), lit(4.0), n, model.n, |x| &model.u_bar + dir * (a * bump(x)));
    let forcing = GridFunction::from_fn(lit(-4.0), lit(4.0), n, model.n, |x| {
        let s = &model.u_bar + dir * (a * bump(x));
        &model.a * dir * (a * lit::<T>(-2.0) * x * bump(x)) - model.q(&s)
    });
    let residual = residual_canonical(canon, &model.a, &traj, Some(&forcing))?;
    // sup |(e^{-x²})'''| = sup |(12x - 8x³) e^{-x²}|, attained near x = 0.6.
    let third = (0..=4000)
        .map(|i| {
            let x = i as f64 * 1e-3;
            ((12.0 * x - 8.0 * x.powi(3)) * (-x * x).exp()).abs()
        })
        .fold(0.0, f64::max);
    let lead_c = to_f64(spectral_norm(&(canon.leading_operator() * &canon.to_canonical)));
    let grid_error = std::f64::consts::SQRT_2 * h * h / 6.0 * lead_c * amplitude * to_f64(dir.norm()) * third;
    Ok(ManufacturedCheck { h, residual, grid_error })
}

/// Pointwise residual `A s' - Q(s) - forcing` in original coordinates.
pub fn direct_residual_field<T: Real>(
    model: &KineticModel<T>,
    trajectory: &GridFunction<T>,
    forcing: Option<&GridFunction<T>>,
) -> GridFunction<T> {
    let ds = trajectory.derivative(1, 2);
    let mut out = DMatrix::zeros(trajectory.len(), model.n);
    for i in 0..trajectory.len() {
        let s = trajectory.node(i);
        let mut res = &model.a * ds.node(i) - model.q(&s);
        if let Some(f) = forcing {
            res -= f.node(i);
        }
        out.set_row(i, &res.transpose());
    }
    trajectory.with_values(out)
}

/// `max_x |P_{V⊥} A s(x) - q|`.
pub fn conservation_check<T: Real>(model: &KineticModel<T>, trajectory: &GridFunction<T>, q: &DVector<T>) -> f64 {
    let pa = model.vperp_basis.transpose() * &model.a;
    (0..trajectory.len())
        .map(|i| to_f64((&pa * trajectory.node(i) - q).norm()))
        .fold(0.0, f64::max)
}

/// Human-readable summary of a reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub gamma0_eigenvalues: Vec<f64>,
    pub gamma0_norm: f64,
    pub gamma0_asymmetry: f64,
    /// `T₁₂T₁₂*` when `m = 1`.
    pub delta: Option<f64>,
    pub check: KernelCheck,
    pub round_trip_error: f64,
    pub w_c2_convention: String,
}

pub fn reduction_report<T: Real>(canon: &CanonicalSystem<T>) -> ReductionReport {
    let (vals, _) = sym_eigen(&canon.gamma0);
    let delta = (canon.m == 1).then(|| to_f64((&canon.t12 * canon.t12.transpose())[(0, 0)]));
    let round_trip = (&canon.from_canonical * &canon.to_canonical - DMatrix::<T>::identity(canon.n, canon.n)).amax();
    ReductionReport {
        n: canon.n,
        r: canon.r,
        m: canon.m,
        gamma0_eigenvalues: vals.iter().map(|&x| to_f64(x)).collect(),
        gamma0_norm: to_f64(spectral_norm(&canon.gamma0)),
        gamma0_asymmetry: to_f64(asymmetry(&canon.gamma0)),
        delta,
        check: canon.check,
        round_trip_error: to_f64(round_trip),
        w_c2_convention: "w_c2 = -(T12*)^-1 v1".into(),
    }
}

impl ReductionReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("n = {}\nr = {}\nm = {}\n", self.n, self.r, self.m));
        s.push_str(&format!("dim w_c = {}\ndim w_h = {}\n", self.m + self.r, self.n - self.r - self.m));
        s.push_str(&format!("|Gamma0| = {:.6e}\n", self.gamma0_norm));
        s.push_str(&format!("Gamma0 asymmetry = {:.3e}\n", self.gamma0_asymmetry));
        let eig: Vec<String> = self.gamma0_eigenvalues.iter().map(|x| format!("{x:.6e}")).collect();
        s.push_str(&format!("spec Gamma0 = [{}]\n", eig.join(", ")));
        if let Some(d) = self.delta {
            s.push_str(&format!("delta = T12 T12* = {d:.12e}\n"));
        }
        s.push_str(&format!("min sv T12* / |A12| = {:.3e}\n", self.check.t12_star_min_sv));
        s.push_str(&format!("angle(im T12, ker A11) = {:.3e}\n", self.check.image_angle));
        s.push_str(&format!("min |eig A~11| / |A11| = {:.3e}\n", self.check.atilde11_min_eig));
        s.push_str(&format!("coordinate round trip = {:.3e}\n", self.round_trip_error));
        s.push_str(&format!("convention: {}\n", self.w_c2_convention));
        s
    }
}

const CANON_KEYS: [&str; 22] = [
    "n",
    "r",
    "m",
    "u_bar",
    "ker_basis",
    "im_basis",
    "v1_basis",
    "vt_basis",
    "t12",
    "t12_star_inv",
    "atilde11_inv",
    "atilde12",
    "gamma0",
    "gamma1",
    "j",
    "to_canonical",
    "from_canonical",
    "qc",
    "qh",
    "micro_inv",
    "vperp_basis",
    "v_basis",
];

/// TOML document with every matrix of the reduction (17 significant digits).
pub fn canonical_to_text<T: Real>(c: &CanonicalSystem<T>) -> String {
    let mut s = String::new();
    s.push_str(&format!("n = {}\nr = {}\nm = {}\n", c.n, c.r, c.m));
    s.push_str(&format!("u_bar = {}\n", fmt_vec(c.u_bar.iter().copied())));
    let mats: [(&str, &DMatrix<T>); 16] = [
        ("ker_basis", &c.ker_basis),
        ("im_basis", &c.im_basis),
        ("v1_basis", &c.v1_basis),
        ("vt_basis", &c.vt_basis),
        ("t12", &c.t12),
        ("t12_star_inv", &c.t12_star_inv),
        ("atilde11_inv", &c.atilde11_inv),
        ("atilde12", &c.atilde12),
        ("gamma0", &c.gamma0),
        ("gamma1", &c.gamma1),
        ("j", &c.j),
        ("to_canonical", &c.to_canonical),
        ("from_canonical", &c.from_canonical),
        ("micro_inv", &c.micro_inv),
        ("vperp_basis", &c.vperp_basis),
        ("v_basis", &c.v_basis),
    ];
    for (k, m) in mats {
        s.push_str(&format!("{k} = {}\n", fmt_matrix(m)));
    }
    s.push_str(&format!("qc = {}\n", fmt_bilinear(&c.qc)));
    s.push_str(&format!("qh = {}\n", fmt_bilinear(&c.qh)));
    s
}

/// Parses [`canonical_to_text`] output. The kernel-check residuals are not
/// stored and come back as zeros.
pub fn canonical_from_text<T: Real>(text: &str) -> Result<CanonicalSystem<T>> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    for k in doc.keys() {
        if !CANON_KEYS.contains(&k.as_str()) {
            return Err(Error::Parse(format!("unknown key `{k}`")));
        }
    }
    let get = |k: &str| doc.get(k).ok_or_else(|| Error::Parse(format!("missing key `{k}`")));
    let n = value_usize(get("n")?, "n")?;
    let r = value_usize(get("r")?, "r")?;
    let m = value_usize(get("m")?, "m")?;
    if r == 0 || r >= n || m > r || n < r + m {
        return Err(Error::Parse("inconsistent dimensions".into()));
    }
    let nv = n - r;
    let hd = nv - m;
    let mat = |k: &str, rows: usize, cols: usize| -> Result<DMatrix<T>> { value_matrix(get(k)?, k, rows, cols) };
    let u_bar: Vec<T> = value_vec(get("u_bar")?, "u_bar")?.into_iter().map(lit).collect();
    if u_bar.len() != n {
        return Err(Error::Parse("u_bar: wrong length".into()));
    }
    Ok(CanonicalSystem {
        n,
        r,
        m,
        u_bar: DVector::from_vec(u_bar),
        ker_basis: mat("ker_basis", r, m)?,
        im_basis: mat("im_basis", r, r - m)?,
        v1_basis: mat("v1_basis", nv, m)?,
        vt_basis: mat("vt_basis", nv, hd)?,
        t12: mat("t12", m, nv)?,
        t12_star_inv: mat("t12_star_inv", m, nv)?,
        atilde11_inv: mat("atilde11_inv", r - m, r - m)?,
        atilde12: mat("atilde12", r - m, nv)?,
        gamma0: mat("gamma0", hd, hd)?,
        gamma1: mat("gamma1", m, hd)?,
        j: mat("j", m + r, m + r)?,
        to_canonical: mat("to_canonical", n, n)?,
        from_canonical: mat("from_canonical", n, n)?,
        qc: value_bilinear(get("qc")?, "qc", m + r, n)?,
        qh: value_bilinear(get("qh")?, "qh", hd, n)?,
        micro_inv: mat("micro_inv", nv, nv)?,
        vperp_basis: mat("vperp_basis", n, r)?,
        v_basis: mat("v_basis", n, nv)?,
        check: KernelCheck {
            t12_star_min_sv: 0.0,
            image_angle: 0.0,
            atilde11_min_eig: 0.0,
        },
    })
}
