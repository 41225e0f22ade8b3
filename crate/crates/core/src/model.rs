//! Finite-dimensional kinetic models `A u' = Q(u)`, `Q(u) = B(u, u)`.
//!
//! The Hilbert space is `R^n` with the Euclidean inner product. `V⊥` (the
//! conserved, "macro" directions) and `V` (the dissipated, "micro" directions)
//! are carried as orthonormal bases.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bilinear::BilinearMap;
use crate::error::{Error, Result};
use crate::linalg::{
    asymmetry, gram_schmidt, kernel_image_split, max_principal_angle_sin, orthonormal_complement,
    random_matrix, random_orthogonal, random_vector, select_columns, spectral_norm, sym_eigen,
};
use crate::scalar::{lit, to_f64, Real};
use crate::textio::{fmt_bilinear, fmt_matrix, fmt_vec, value_bilinear, value_matrix, value_vec};

/// Default relative tolerance for the hypothesis checks.
pub const DEFAULT_HYPOTHESIS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct KineticModel<T: Real> {
    pub n: usize,
    pub r: usize,
    /// Symmetric transport operator.
    pub a: DMatrix<T>,
    /// Orthonormal `n × r` basis of `V⊥`.
    pub vperp_basis: DMatrix<T>,
    /// Orthonormal `n × (n-r)` basis of `V`.
    pub v_basis: DMatrix<T>,
    /// Collision bilinear form, valued in `V`.
    pub b: BilinearMap<T>,
    pub u_bar: DVector<T>,
    pub label: String,
}

impl<T: Real> KineticModel<T> {
    /// Assembles a model after dimension checks. Structural hypotheses are
    /// verified separately by [`check_hypotheses`].
    pub fn new(
        a: DMatrix<T>,
        vperp_basis: DMatrix<T>,
        v_basis: DMatrix<T>,
        b: BilinearMap<T>,
        u_bar: DVector<T>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = a.nrows();
        let r = vperp_basis.ncols();
        let bad = |what: &str| Err(Error::Dimension(what.to_string()));
        if a.ncols() != n || n == 0 {
            return bad("A must be square and nonempty");
        }
        if vperp_basis.nrows() != n || v_basis.nrows() != n || r + v_basis.ncols() != n {
            return bad("bases must partition R^n");
        }
        if r == 0 || r >= n {
            return bad("need 1 <= r < n");
        }
        if b.in_dim() != n || b.out_dim() != n {
            return bad("B must map R^n x R^n to R^n");
        }
        if u_bar.len() != n {
            return bad("u_bar must have length n");
        }
        Ok(Self {
            n,
            r,
            a,
            vperp_basis,
            v_basis,
            b,
            u_bar,
            label: label.into(),
        })
    }

    /// `Q(u) = B(u, u)`.
    pub fn q(&self, u: &DVector<T>) -> DVector<T> {
        self.b.apply(u, u)
    }

    /// `Q'(u) w = 2 B(u, w)` for symmetric `B`.
    pub fn dq(&self, u: &DVector<T>) -> DMatrix<T> {
        self.b.derivative(u)
    }

    /// Assembles a full state from macro coordinates `u` (length r) and micro
    /// coordinates `v` (length n-r).
    pub fn lift(&self, u: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        &self.vperp_basis * u + &self.v_basis * v
    }

    pub fn macro_part(&self, s: &DVector<T>) -> DVector<T> {
        self.vperp_basis.transpose() * s
    }

    pub fn micro_part(&self, s: &DVector<T>) -> DVector<T> {
        self.v_basis.transpose() * s
    }

    /// `E = Q'(ū)|_V` in the `V` basis.
    pub fn micro_linearization(&self) -> DMatrix<T> {
        self.v_basis.transpose() * self.dq(&self.u_bar) * &self.v_basis
    }

    /// Converts every entry to another scalar type.
    pub fn cast<S: Real>(&self) -> KineticModel<S> {
        let m = |x: &DMatrix<T>| x.map(|v| lit::<S>(to_f64(v)));
        KineticModel {
            n: self.n,
            r: self.r,
            a: m(&self.a),
            vperp_basis: m(&self.vperp_basis),
            v_basis: m(&self.v_basis),
            b: BilinearMap::from_fn(self.n, self.n, |o, i, j| lit::<S>(to_f64(self.b.get(o, i, j)))),
            u_bar: self.u_bar.map(|v| lit::<S>(to_f64(v))),
            label: self.label.clone(),
        }
    }

    /// Smallest |eigenvalue| of `A`.
    pub fn min_abs_eig(&self) -> T {
        let (vals, _) = sym_eigen(&self.a);
        vals.iter().fold(T::max_value().unwrap(), |m, &x| m.min(x.abs()))
    }
}

/// `Q(u)`.
pub fn evaluate_q<T: Real>(model: &KineticModel<T>, u: &DVector<T>) -> DVector<T> {
    model.q(u)
}

/// Matrix of `w ↦ 2B(u, w)`.
pub fn linearize_q<T: Real>(model: &KineticModel<T>, u: &DVector<T>) -> DMatrix<T> {
    model.dq(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    /// Violation measure; zero when the property holds exactly.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    /// δ with `Q'(ū)|_V ≤ -δ I`.
    pub spectral_gap_delta: f64,
    pub min_abs_eig_a: f64,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_A_SYMMETRIC: &str = "A symmetric";
pub const CHECK_A_ONE_TO_ONE: &str = "A one-to-one";
pub const CHECK_BASIS: &str = "basis orthonormal";
pub const CHECK_B_RANGE: &str = "B range in V";
pub const CHECK_B_SYMMETRIC: &str = "B symmetric";
pub const CHECK_EQUILIBRIUM: &str = "Q(u_bar) = 0";
pub const CHECK_DQ_SYMMETRIC: &str = "Q'(u_bar) symmetric";
pub const CHECK_KERNEL: &str = "ker Q'(u_bar) = V_perp";
pub const CHECK_GAP: &str = "Q'(u_bar)|V <= -delta I";

/// Relative shortfall of a quantity that must exceed `tol`: zero when it
/// does, otherwise in `(0, 1]`.
fn shortfall(value: f64, tol: f64) -> f64 {
    if value > tol {
        0.0
    } else {
        ((tol - value) / tol).clamp(f64::MIN_POSITIVE, 1.0)
    }
}

/// Verifies the structural hypotheses on `A`, `B` and `ū`. Residuals are relative to the
/// natural scale of each quantity.
pub fn check_hypotheses<T: Real>(model: &KineticModel<T>, tol: f64) -> HypothesisReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, residual: f64| {
        checks.push(HypothesisCheck {
            name: name.to_string(),
            passed: residual.is_finite() && residual <= tol,
            residual,
        });
    };
    let n = model.n;
    let a_norm = to_f64(spectral_norm(&model.a)).max(f64::MIN_POSITIVE);
    push(CHECK_A_SYMMETRIC, to_f64(asymmetry(&model.a)) / a_norm);

    let min_abs = to_f64(model.min_abs_eig());
    push(CHECK_A_ONE_TO_ONE, shortfall(min_abs / a_norm, tol));

    let mut w = DMatrix::zeros(n, n);
    w.columns_mut(0, model.r).copy_from(&model.vperp_basis);
    w.columns_mut(model.r, n - model.r).copy_from(&model.v_basis);
    push(CHECK_BASIS, to_f64((w.transpose() * &w - DMatrix::identity(n, n)).amax()));

    let b_scale = to_f64(model.b.max_abs()).max(f64::MIN_POSITIVE);
    let proj_perp = model.vperp_basis.transpose();
    let mut range_leak = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let col = DVector::from_fn(n, |o, _| model.b.get(o, i, j));
            range_leak = range_leak.max(to_f64((&proj_perp * col).amax()));
        }
    }
    push(CHECK_B_RANGE, range_leak / b_scale);
    push(CHECK_B_SYMMETRIC, to_f64(model.b.asymmetry()) / b_scale);

    let ub = &model.u_bar;
    let ub2 = to_f64(ub.norm_squared()).max(f64::MIN_POSITIVE);
    push(CHECK_EQUILIBRIUM, to_f64(model.q(ub).norm()) / (b_scale * ub2));

    let l = model.dq(ub);
    let l_norm = to_f64(spectral_norm(&l)).max(f64::MIN_POSITIVE);
    push(CHECK_DQ_SYMMETRIC, to_f64(asymmetry(&l)) / l_norm);

    let (ker, _) = kernel_image_split(&((&l + l.transpose()) * lit::<T>(0.5)), lit(tol.max(1e-14) * 1e3));
    push(CHECK_KERNEL, to_f64(max_principal_angle_sin(&model.vperp_basis, &ker)));

    let e = model.micro_linearization();
    let (vals, _) = sym_eigen(&e);
    let delta = if vals.is_empty() { 0.0 } else { -to_f64(vals[vals.len() - 1]) };
    push(CHECK_GAP, shortfall(delta / l_norm, tol));

    HypothesisReport {
        checks,
        spectral_gap_delta: delta,
        min_abs_eig_a: min_abs,
    }
}

/// Parameters of the synthetic model generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Target `dim ker P_{V⊥} A P_{V⊥}` (0 or 1).
    pub m: usize,
    /// Spectrum of `A` (length n, all nonzero).
    pub velocities: Vec<f64>,
    /// Indices into `velocities` whose eigenvectors span the subspace that
    /// contains `V⊥`. `None` means the whole space.
    pub macro_modes: Option<Vec<usize>>,
    /// Sign required of `A₁₁` on the complement of its kernel when `m = 1`
    /// (`-1`, `+1`, or `0` for unconstrained).
    pub complement_sign: i8,
    /// Range of the eigenvalues of `-Q'(ū)|_V`.
    pub micro_rates: (f64, f64),
    /// Scale of the curvature part `G` of `B`; zero gives a flat equilibrium
    /// manifold.
    pub curvature: f64,
    /// Rotate the eigenbasis of `A` randomly.
    pub rotate: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            m: 0,
            velocities: vec![-1.0, 0.5, 1.0],
            macro_modes: None,
            complement_sign: 0,
            micro_rates: (1.0, 2.0),
            curvature: 0.5,
            rotate: true,
            seed: 7,
        }
    }
}

/// Builds a model satisfying the structural hypotheses by construction:
/// `B(x,y) = (⟨a,x⟩Ly + ⟨a,y⟩Lx) / (2⟨a,ū⟩) + G(x̂, ŷ)` with `L ≤ 0`,
/// `ker L = V⊥`, `ū ∈ V⊥` and `x̂ = x - (⟨a,x⟩/⟨a,ū⟩) ū`.
/// Construction runs in `f64` and is then cast, so a `SyntheticSpec` names the same
/// model at every precision.
pub fn build_synthetic_model<T: Real>(r: usize, n: usize, spec: &SyntheticSpec) -> Result<KineticModel<T>> {
    Ok(build_synthetic_f64(r, n, spec)?.cast())
}

fn build_synthetic_f64(r: usize, n: usize, spec: &SyntheticSpec) -> Result<KineticModel<f64>> {
    type T = f64;
    if r == 0 || r >= n {
        return Err(Error::InvalidModel(format!("need 1 <= r < n, got r={r}, n={n}")));
    }
    if spec.velocities.len() != n {
        return Err(Error::InvalidModel(format!(
            "velocity list has length {}, expected {n}",
            spec.velocities.len()
        )));
    }
    if let Some(&v) = spec.velocities.iter().find(|v| **v == 0.0 || !v.is_finite()) {
        return Err(Error::NotOneToOne(v));
    }
    if spec.m > 1 {
        return Err(Error::InvalidModel("only m in {0, 1} is supported".into()));
    }
    if spec.m == 1 && n < r + 2 {
        return Err(Error::InvalidModel("m = 1 requires n >= r + 2".into()));
    }
    let (lo, hi) = spec.micro_rates;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidModel("micro rates must satisfy 0 < lo <= hi".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let eigvecs: DMatrix<T> = if spec.rotate {
        random_orthogonal(n, &mut rng)
    } else {
        DMatrix::identity(n, n)
    };
    let vel: Vec<T> = spec.velocities.iter().map(|&v| lit(v)).collect();
    let a = &eigvecs * DMatrix::from_diagonal(&DVector::from_vec(vel.clone())) * eigvecs.transpose();
    let a = (&a + a.transpose()) * lit::<T>(0.5);

    let modes: Vec<usize> = match &spec.macro_modes {
        Some(m) => m.clone(),
        None => (0..n).collect(),
    };
    if modes.iter().any(|&i| i >= n) {
        return Err(Error::InvalidModel("macro mode index out of range".into()));
    }
    let tol = lit::<T>(1e-8);

    let vperp = if spec.m == 0 {
        if modes.len() < r {
            return Err(Error::InvalidModel("macro span smaller than r".into()));
        }
        let span = select_columns(&eigvecs, &modes);
        let mix = random_matrix::<T, _>(modes.len(), r, &mut rng);
        gram_schmidt(&(span * mix), tol)
    } else {
        let neg = modes.iter().copied().find(|&i| spec.velocities[i] < 0.0);
        let pos = modes.iter().copied().find(|&i| spec.velocities[i] > 0.0);
        let (Some(i_neg), Some(i_pos)) = (neg, pos) else {
            return Err(Error::Infeasible(
                "m = 1 needs a sign change among the macro velocities".into(),
            ));
        };
        let av = vel[i_pos];
        let bv = -vel[i_neg];
        let e = (eigvecs.column(i_pos) * bv.sqrt() + eigvecs.column(i_neg) * av.sqrt()) / (av + bv).sqrt();
        let rest: Vec<usize> = modes
            .iter()
            .copied()
            .filter(|&i| i != i_neg && i != i_pos)
            .filter(|&i| match spec.complement_sign {
                s if s < 0 => spec.velocities[i] < 0.0,
                s if s > 0 => spec.velocities[i] > 0.0,
                _ => true,
            })
            .collect();
        if rest.len() < r - 1 {
            return Err(Error::Infeasible(format!(
                "need {} further macro modes with the requested sign, found {}",
                r - 1,
                rest.len()
            )));
        }
        let span = select_columns(&eigvecs, &rest);
        let mix = random_matrix::<T, _>(rest.len(), r - 1, &mut rng);
        let others = gram_schmidt(&(span * mix), tol);
        let mut cols = DMatrix::zeros(n, r);
        cols.set_column(0, &e);
        cols.columns_mut(1, r - 1).copy_from(&others);
        gram_schmidt(&cols, tol)
    };
    if vperp.ncols() != r {
        return Err(Error::Infeasible("could not build an r-dimensional V_perp".into()));
    }
    let v_basis = orthonormal_complement(&vperp);

    // Equilibrium in V⊥ and the weight vector a with <a, ū> != 0.
    let c = random_vector::<T, _>(r, &mut rng);
    let u_bar = &vperp * (&c / c.norm());
    let noise = random_vector::<T, _>(n, &mut rng);
    let a_vec = &u_bar + (&noise / noise.norm()) * lit::<T>(0.5);
    let a_dot_u = a_vec.dot(&u_bar);

    // L = V_b (-W diag(rates) W^T) V_b^T.
    let nv = n - r;
    let w = random_orthogonal::<T, _>(nv, &mut rng);
    let rates = DVector::from_fn(nv, |i, _| {
        let t = if nv > 1 { i as f64 / (nv - 1) as f64 } else { 0.0 };
        lit::<T>(lo + (hi - lo) * t)
    });
    let l_micro = -(&w * DMatrix::from_diagonal(&rates) * w.transpose());
    let l = &v_basis * l_micro * v_basis.transpose();

    // Curvature part G into V, applied to x̂ = P x.
    let p = DMatrix::<T>::identity(n, n) - (&u_bar * a_vec.transpose()) / a_dot_u;
    let scale = lit::<T>(spec.curvature) / lit::<T>((n as f64).sqrt());
    let g_micro: Vec<DMatrix<T>> = (0..nv)
        .map(|_| {
            let g = random_matrix::<T, _>(n, n, &mut rng);
            (&g + g.transpose()) * (scale * lit::<T>(0.5))
        })
        .collect();
    let g_hat: Vec<DMatrix<T>> = g_micro.iter().map(|g| p.transpose() * g * &p).collect();
    let two_au = a_dot_u * lit::<T>(2.0);
    let b = BilinearMap::from_fn(n, n, |o, i, j| {
        let mut val = (a_vec[i] * l[(o, j)] + a_vec[j] * l[(o, i)]) / two_au;
        for (k, gh) in g_hat.iter().enumerate() {
            val += v_basis[(o, k)] * gh[(i, j)];
        }
        val
    });

    KineticModel::new(a, vperp, v_basis, b, u_bar, format!("synthetic r={r} n={n} m={} seed={}", spec.m, spec.seed))
}

/// `dim ker P_{V⊥} A P_{V⊥}` using the singular value threshold `rel_tol·σ_max`.
pub fn macro_kernel_dim<T: Real>(model: &KineticModel<T>, rel_tol: f64) -> usize {
    let a11 = model.vperp_basis.transpose() * &model.a * &model.vperp_basis;
    let (k, _) = kernel_image_split(&a11, lit(rel_tol));
    k.ncols()
}

// ---------------------------------------------------------------------------
// Text serialization.

/// Serializes a model as a TOML document with 17 significant digits.
pub fn model_to_text<T: Real>(model: &KineticModel<T>) -> String {
    let mut s = String::new();
    s.push_str(&format!("label = {}\n", toml::Value::String(model.label.clone())));
    s.push_str(&format!("n = {}\nr = {}\n", model.n, model.r));
    s.push_str(&format!("A = {}\n", fmt_matrix(&model.a)));
    s.push_str(&format!("vperp_basis = {}\n", fmt_matrix(&model.vperp_basis)));
    s.push_str(&format!("v_basis = {}\n", fmt_matrix(&model.v_basis)));
    s.push_str(&format!("u_bar = {}\n", fmt_vec(model.u_bar.iter().copied())));
    s.push_str(&format!("B = {}\n", fmt_bilinear(&model.b)));
    s
}

/// Parses a document produced by [`model_to_text`].
pub fn model_from_text<T: Real>(text: &str) -> Result<KineticModel<T>> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let get = |k: &str| doc.get(k).ok_or_else(|| Error::Parse(format!("missing key `{k}`")));
    for k in doc.keys() {
        if !["label", "n", "r", "A", "vperp_basis", "v_basis", "u_bar", "B"].contains(&k.as_str()) {
            return Err(Error::Parse(format!("unknown key `{k}`")));
        }
    }
    let n = get("n")?.as_integer().ok_or_else(|| Error::Parse("n: expected integer".into()))? as usize;
    let r = get("r")?.as_integer().ok_or_else(|| Error::Parse("r: expected integer".into()))? as usize;
    if r == 0 || r >= n {
        return Err(Error::Parse("need 1 <= r < n".into()));
    }
    let label = get("label")?.as_str().unwrap_or_default().to_string();
    let a = value_matrix(get("A")?, "A", n, n)?;
    let vperp = value_matrix(get("vperp_basis")?, "vperp_basis", n, r)?;
    let v_basis = match doc.get("v_basis") {
        Some(v) => value_matrix(v, "v_basis", n, n - r)?,
        None => orthonormal_complement(&vperp),
    };
    let u_bar: Vec<T> = value_vec(get("u_bar")?, "u_bar")?.into_iter().map(lit).collect();
    let b = value_bilinear(get("B")?, "B", n, n)?;
    KineticModel::new(a, vperp, v_basis, b, DVector::from_vec(u_bar), label)
}
