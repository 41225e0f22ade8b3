//! Chapman-Enskog data: the equilibrium graph `v*`, the flux `f*`, the
//! diffusion `D*`, and the characteristic quantities `λ_p`, `r̄`, `Λ`, `δ`.
//!
//! Macro states are written in `V⊥` coordinates (length `r`), micro states in
//! `V` coordinates (length `n - r`).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{null_vector, real_spectrum, spectral_norm, sym_eigen};
use crate::model::KineticModel;
use crate::output::CsvTable;
use crate::scalar::{lit, to_f64, Real};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 25;
/// Eigenvalue simplicity threshold relative to the spectral radius.
pub const DEFAULT_SIMPLICITY_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ChapmanEnskogData<T: Real> {
    pub model: KineticModel<T>,
    /// `E = Q'(ū)|_V`.
    pub e: DMatrix<T>,
    /// `D* = A₁₂(-E)⁻¹A₁₂ᵀ`.
    pub d_star: DMatrix<T>,
    pub a11: DMatrix<T>,
    pub a12: DMatrix<T>,
    pub u_bar_macro: DVector<T>,
    pub v_bar_micro: DVector<T>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Largest `|u - ū|` accepted by the graph solver.
    pub basin_radius: f64,
    pub simplicity_gap: f64,
}

/// Outcome of one Newton solve for `v*(u)`.
#[derive(Debug, Clone)]
pub struct GraphSolve<T: Real> {
    pub v: DVector<T>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicData<T: Real> {
    pub u: DVector<T>,
    /// Eigenvalues of `f*'(u)`, ascending.
    pub lambdas: Vec<T>,
    pub r_bar: DVector<T>,
    pub p: usize,
    /// `r̄ · f*''(u)(r̄, r̄)`.
    pub lambda_gnl: T,
    /// `r̄ · D* r̄`.
    pub delta: T,
}

/// Operator-norm bound `(Σ_o ‖B_o‖₂²)^{1/2}` of a bilinear map.
fn bilinear_norm_bound<T: Real>(model: &KineticModel<T>) -> T {
    (0..model.n)
        .map(|o| {
            let s = spectral_norm(&model.b.slice(o));
            s * s
        })
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

impl<T: Real> ChapmanEnskogData<T> {
    pub fn new(model: KineticModel<T>) -> Result<Self> {
        let e = model.micro_linearization();
        let e = (&e + e.transpose()) * lit::<T>(0.5);
        let (vals, _) = sym_eigen(&e);
        let top = vals.iter().fold(T::min_value().unwrap(), |a, &b| a.max(b));
        if top >= T::zero() {
            return Err(Error::NotNegativeDefinite(to_f64(top)));
        }
        let a11 = model.vperp_basis.transpose() * &model.a * &model.vperp_basis;
        let a12 = model.vperp_basis.transpose() * &model.a * &model.v_basis;
        let d_star = diffusion_from_blocks(&a12, &e)?;
        let b_norm = to_f64(bilinear_norm_bound(&model)).max(f64::MIN_POSITIVE);
        let basin_radius = 0.5 * to_f64(-top) / b_norm;
        Ok(Self {
            u_bar_macro: model.macro_part(&model.u_bar),
            v_bar_micro: model.micro_part(&model.u_bar),
            model,
            e,
            d_star,
            a11,
            a12,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
            basin_radius,
            simplicity_gap: DEFAULT_SIMPLICITY_GAP,
        })
    }

    pub fn r(&self) -> usize {
        self.model.r
    }

    /// Micro residual `P_V Q(lift(u, v))`.
    pub fn micro_residual(&self, u: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        let s = self.model.lift(u, v);
        self.model.micro_part(&self.model.q(&s))
    }
}

fn diffusion_from_blocks<T: Real>(a12: &DMatrix<T>, e: &DMatrix<T>) -> Result<DMatrix<T>> {
    let neg = -e.clone();
    let chol = neg
        .cholesky()
        .ok_or_else(|| Error::NotNegativeDefinite(to_f64(sym_eigen(e).0.iter().fold(T::min_value().unwrap(), |a, &b| a.max(b)))))?;
    let x = chol.solve(&a12.transpose());
    let d = a12 * x;
    Ok((&d + d.transpose()) * lit::<T>(0.5))
}

/// Newton iteration for `P_V Q(lift(u, v)) = 0` started at `guess`.
pub fn solve_equilibrium_graph_from<T: Real>(
    ced: &ChapmanEnskogData<T>,
    u: &DVector<T>,
    guess: &DVector<T>,
) -> Result<GraphSolve<T>> {
    if u.len() != ced.r() {
        return Err(Error::Dimension(format!("macro state has length {}, expected {}", u.len(), ced.r())));
    }
    let offset = to_f64((u - &ced.u_bar_macro).norm());
    if offset > ced.basin_radius {
        return Err(Error::Precondition(format!(
            "|u - u_bar| = {offset:.3e} exceeds the Newton basin radius {:.3e}",
            ced.basin_radius
        )));
    }
    let model = &ced.model;
    let scale = to_f64(model.b.max_abs()) * to_f64(model.lift(u, guess).norm_squared()).max(1.0);
    let tol = ced.newton_tol.max(1e3 * to_f64(T::eps()) * scale);
    let mut v = guess.clone();
    let mut res = ced.micro_residual(u, &v);
    let mut res_norm = to_f64(res.norm());
    let mut it = 0;
    let mut polished = false;
    loop {
        if res_norm <= tol {
            if polished {
                break;
            }
            polished = true;
        }
        if it >= ced.newton_max_iter {
            if res_norm <= tol {
                break;
            }
            return Err(Error::NonConvergence {
                iterations: it,
                residual: res_norm,
            });
        }
        let s = model.lift(u, &v);
        let jac = &model.v_basis.transpose() * model.dq(&s) * &model.v_basis;
        let Some(step) = jac.lu().solve(&res) else {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: res_norm,
            });
        };
        let trial = &v - step;
        let trial_res = ced.micro_residual(u, &trial);
        let trial_norm = to_f64(trial_res.norm());
        it += 1;
        if polished && trial_norm >= res_norm {
            break;
        }
        v = trial;
        res = trial_res;
        res_norm = trial_norm;
    }
    Ok(GraphSolve {
        v,
        iterations: it,
        residual: res_norm,
    })
}

/// `v*(u)`: micro coordinates of the equilibrium with macro coordinates `u`.
pub fn solve_equilibrium_graph<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>) -> Result<DVector<T>> {
    solve_equilibrium_graph_from(ced, u, &ced.v_bar_micro).map(|g| g.v)
}

/// `f*(u) = P_{V⊥} A (u, v*(u))`.
pub fn compute_flux<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>) -> Result<DVector<T>> {
    let v = solve_equilibrium_graph(ced, u)?;
    Ok(flux_at(ced, u, &v))
}

/// `P_{V⊥} A (u, v)` for a given micro part.
pub fn flux_at<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>, v: &DVector<T>) -> DVector<T> {
    &ced.a11 * u + &ced.a12 * v
}

/// `h*(u) = P_{V⊥} A⁰ (u, v*(u))`.
pub fn compute_hstar<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>, a0: &DMatrix<T>) -> Result<DVector<T>> {
    let n = ced.model.n;
    if a0.nrows() != n || a0.ncols() != n {
        return Err(Error::Dimension(format!("A0 must be {n}x{n}")));
    }
    if a0.clone().cholesky().is_none() {
        return Err(Error::Precondition("A0 must be symmetric positive definite".into()));
    }
    let v = solve_equilibrium_graph(ced, u)?;
    Ok(ced.model.macro_part(&(a0 * ced.model.lift(u, &v))))
}

/// `D* = -A₁₂E⁻¹A₁₂ᵀ` (positive semidefinite).
pub fn compute_diffusion<T: Real>(ced: &ChapmanEnskogData<T>) -> Result<DMatrix<T>> {
    diffusion_from_blocks(&ced.a12, &ced.e)
}

/// `v*'(u)` from the implicit function theorem, given `v = v*(u)`.
pub fn graph_jacobian_at<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>, v: &DVector<T>) -> DMatrix<T> {
    let m = &ced.model;
    let dq = m.dq(&m.lift(u, v));
    let jv = m.v_basis.transpose() * &dq * &m.v_basis;
    let ju = m.v_basis.transpose() * &dq * &m.vperp_basis;
    jv.lu().solve(&(-ju)).unwrap_or_else(|| DMatrix::zeros(m.n - m.r, m.r))
}

/// `f*'(u) = A₁₁ + A₁₂ v*'(u)`.
pub fn flux_jacobian<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>) -> Result<DMatrix<T>> {
    let v = solve_equilibrium_graph(ced, u)?;
    Ok(flux_jacobian_at(ced, u, &v))
}

pub fn flux_jacobian_at<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>, v: &DVector<T>) -> DMatrix<T> {
    &ced.a11 + &ced.a12 * graph_jacobian_at(ced, u, v)
}

/// `r · f*''(ū)(r, r)` in closed form: at `ū`, `v*''(r, r) = -2E⁻¹P_V B(r, r)`.
pub fn gnl_coefficient_at_equilibrium<T: Real>(ced: &ChapmanEnskogData<T>, r_bar: &DVector<T>) -> T {
    let m = &ced.model;
    let x = &m.vperp_basis * r_bar;
    let rhs = m.micro_part(&m.b.apply(&x, &x)) * lit::<T>(2.0);
    let vpp = -ced.e.clone().lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(rhs.len()));
    r_bar.dot(&(&ced.a12 * vpp))
}

/// Ascending real characteristic speeds at `u` and the index checks for `p`.
fn speeds<T: Real>(ced: &ChapmanEnskogData<T>, jac: &DMatrix<T>, p: usize) -> Result<Vec<T>> {
    let r = jac.nrows();
    if p >= r {
        return Err(Error::Dimension(format!("characteristic index {p} out of range 0..{r}")));
    }
    let (vals, im) = real_spectrum(jac);
    let rho = vals.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let thresh = lit::<T>(ced.simplicity_gap) * rho.max(lit::<T>(f64::MIN_POSITIVE));
    if im > thresh {
        return Err(Error::Precondition(format!(
            "f*' has complex eigenvalues (imaginary part {:e})",
            to_f64(im)
        )));
    }
    let mut gap = T::max_value().unwrap();
    if p > 0 {
        gap = gap.min(vals[p] - vals[p - 1]);
    }
    if p + 1 < r {
        gap = gap.min(vals[p + 1] - vals[p]);
    }
    if gap <= thresh {
        return Err(Error::NonSimpleEigenvalue {
            index: p,
            gap: to_f64(gap),
            threshold: to_f64(thresh),
        });
    }
    Ok(vals)
}

/// `λ_p(u)` only.
pub fn characteristic_speed<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>, p: usize) -> Result<T> {
    let jac = flux_jacobian(ced, u)?;
    speeds(ced, &jac, p).map(|v| v[p])
}

/// `λ_p` given a precomputed micro part `v = v*(u)`.
pub fn characteristic_speed_at<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>, v: &DVector<T>, p: usize) -> Result<T> {
    let jac = flux_jacobian_at(ced, u, v);
    speeds(ced, &jac, p).map(|v| v[p])
}

/// Second central difference of `r · f*(u + t r)` with one Richardson level.
fn gnl_by_differences<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>, r_bar: &DVector<T>) -> Result<T> {
    let t0 = T::eps().powf(lit(1.0 / 6.0));
    let f0 = r_bar.dot(&compute_flux(ced, u)?);
    let second = |t: T| -> Result<T> {
        let fp = r_bar.dot(&compute_flux(ced, &(u + r_bar * t))?);
        let fm = r_bar.dot(&compute_flux(ced, &(u - r_bar * t))?);
        Ok((fp - f0 * lit::<T>(2.0) + fm) / (t * t))
    };
    let d1 = second(t0)?;
    let d2 = second(t0 * lit::<T>(0.5))?;
    Ok((d2 * lit::<T>(4.0) - d1) / lit::<T>(3.0))
}

/// Characteristic data of field `p` at `u`.
pub fn compute_characteristics<T: Real>(ced: &ChapmanEnskogData<T>, u: &DVector<T>, p: usize) -> Result<CharacteristicData<T>> {
    let jac = flux_jacobian(ced, u)?;
    let lambdas = speeds(ced, &jac, p)?;
    let shifted = &jac - DMatrix::identity(jac.nrows(), jac.nrows()) * lambdas[p];
    let r_bar = null_vector(&shifted);
    let lambda_gnl = gnl_by_differences(ced, u, &r_bar)?;
    let delta = r_bar.dot(&(&ced.d_star * &r_bar));
    Ok(CharacteristicData {
        u: u.clone(),
        lambdas,
        r_bar,
        p,
        lambda_gnl,
        delta,
    })
}

/// Characteristic data along `ū + s r̄(ū)` as a table
/// `(u1, lambda_1..lambda_r, Lambda, delta)`.
pub fn characteristic_sweep<T: Real>(ced: &ChapmanEnskogData<T>, p: usize, s_values: &[f64]) -> Result<CsvTable> {
    let base = compute_characteristics(ced, &ced.u_bar_macro, p)?;
    let r = ced.r();
    let mut header = vec!["u1".to_string()];
    header.extend((1..=r).map(|k| format!("lambda_{k}")));
    header.push("Lambda".into());
    header.push("delta".into());
    let mut table = CsvTable::new(header);
    for &s in s_values {
        let u = &ced.u_bar_macro + &base.r_bar * lit::<T>(s);
        let c = compute_characteristics(ced, &u, p)?;
        let mut row = vec![s];
        row.extend(c.lambdas.iter().map(|&x| to_f64(x)));
        row.push(to_f64(c.lambda_gnl));
        row.push(to_f64(c.delta));
        table.push(row);
    }
    Ok(table)
}

/// Hard-sphere Navier-Stokes reference coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsReference {
    pub mu: f64,
    pub kappa: f64,
    pub c: f64,
    pub lambdas: [f64; 5],
    pub gamma: f64,
    pub c_v: f64,
}

/// Viscosity, heat conductivity, sound speed and characteristic speeds of
/// the monatomic hard-sphere gas at temperature `temp`, internal energy `e`
/// and velocity `v1`.
pub fn ns_reference(temp: f64, rho: f64, e: f64, v1: f64) -> Result<NsReference> {
    let mut bad = Vec::new();
    for (name, val) in [("T", temp), ("rho", rho), ("e", e)] {
        if !(val > 0.0 && val.is_finite()) {
            bad.push(format!("{name} must be positive (got {val})"));
        }
    }
    if !v1.is_finite() {
        bad.push("v1 must be finite".into());
    }
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let gamma = 2.0 / 3.0;
    let root = (temp / std::f64::consts::PI).sqrt();
    let c = (gamma * (1.0 + gamma) * e).sqrt();
    Ok(NsReference {
        mu: 5.0 / 16.0 * root,
        kappa: 75.0 / 16.0 * root,
        c,
        lambdas: [v1 - c, v1, v1, v1, v1 + c],
        gamma,
        c_v: 0.75,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_synthetic_model, SyntheticSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn generic(r: usize, n: usize, curvature: f64) -> ChapmanEnskogData<f64> {
        let spec = SyntheticSpec {
            velocities: (0..n).map(|i| if i % 2 == 0 { -0.5 - i as f64 * 0.1 } else { 0.4 + i as f64 * 0.1 }).collect(),
            curvature,
            seed: 11,
            ..Default::default()
        };
        ChapmanEnskogData::new(build_synthetic_model(r, n, &spec).unwrap()).unwrap()
    }

    fn m1() -> ChapmanEnskogData<f64> {
        let spec = SyntheticSpec {
            m: 1,
            velocities: vec![-1.0, -0.7, 0.6, 1.2, -0.4, 0.9],
            complement_sign: -1,
            seed: 3,
            ..Default::default()
        };
        ChapmanEnskogData::new(build_synthetic_model(2, 6, &spec).unwrap()).unwrap()
    }

    fn small_offsets(r: usize, radius: f64, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let d: DVector<f64> = crate::linalg::random_vector(r, &mut rng);
                d.normalize() * radius
            })
            .collect()
    }

    #[test]
    fn graph_at_equilibrium_is_u_bar() {
        let ced = generic(2, 6, 0.5);
        let v = solve_equilibrium_graph(&ced, &ced.u_bar_macro).unwrap();
        assert!((v - &ced.v_bar_micro).norm() < 1e-14);
    }

    #[test]
    fn flat_manifold_without_curvature() {
        let ced = generic(2, 6, 0.0);
        for d in small_offsets(2, 0.5 * ced.basin_radius, 5, 1) {
            let v = solve_equilibrium_graph(&ced, &(&ced.u_bar_macro + d)).unwrap();
            assert!((v - &ced.v_bar_micro).norm() < 1e-13);
        }
    }

    #[test]
    fn newton_converges_quickly_on_curved_model() {
        let ced = generic(3, 8, 0.8);
        for d in small_offsets(3, 0.8 * ced.basin_radius, 6, 2) {
            let g = solve_equilibrium_graph_from(&ced, &(&ced.u_bar_macro + d), &ced.v_bar_micro).unwrap();
            assert!(g.residual < 1e-12, "residual {}", g.residual);
            assert!(g.iterations <= 8, "iterations {}", g.iterations);
        }
    }

    #[test]
    fn outside_basin_is_rejected() {
        let ced = generic(2, 6, 0.5);
        let u = &ced.u_bar_macro + DVector::from_element(2, ced.basin_radius);
        assert!(matches!(solve_equilibrium_graph(&ced, &u), Err(Error::Precondition(_))));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let mut ced = generic(3, 8, 0.8);
        ced.newton_max_iter = 1;
        let u = &ced.u_bar_macro + small_offsets(3, 0.8 * ced.basin_radius, 1, 9).remove(0);
        assert!(matches!(
            solve_equilibrium_graph(&ced, &u),
            Err(Error::NonConvergence { iterations: 1, .. })
        ));
    }

    fn fd_jacobian(ced: &ChapmanEnskogData<f64>, u: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let r = ced.r();
        let mut j = DMatrix::zeros(r, r);
        for k in 0..r {
            let mut e = DVector::zeros(r);
            e[k] = h;
            let col = (compute_flux(ced, &(u + &e)).unwrap() - compute_flux(ced, &(u - &e)).unwrap()) / (2.0 * h);
            j.set_column(k, &col);
        }
        j
    }

    #[test]
    fn flux_jacobian_at_equilibrium_is_a11() {
        let ced = generic(3, 8, 0.8);
        let h = f64::EPSILON.powf(1.0 / 3.0);
        let fd = fd_jacobian(&ced, &ced.u_bar_macro, h);
        assert!((&fd - &ced.a11).amax() < 1e-8);
        assert!(crate::linalg::asymmetry(&fd) < 1e-8);
    }

    #[test]
    fn graph_is_tangent_at_equilibrium() {
        let ced = generic(3, 8, 0.8);
        let h = f64::EPSILON.powf(1.0 / 3.0);
        for k in 0..3 {
            let mut e = DVector::zeros(3);
            e[k] = h;
            let vp = solve_equilibrium_graph(&ced, &(&ced.u_bar_macro + &e)).unwrap();
            let vm = solve_equilibrium_graph(&ced, &(&ced.u_bar_macro - &e)).unwrap();
            assert!(((vp - vm) / (2.0 * h)).norm() < 1e-6);
        }
    }

    #[test]
    fn analytic_flux_jacobian_matches_differences_off_equilibrium() {
        let ced = generic(3, 8, 0.8);
        let u = &ced.u_bar_macro + small_offsets(3, 0.5 * ced.basin_radius, 1, 4).remove(0);
        let fd = fd_jacobian(&ced, &u, 1e-5);
        let an = flux_jacobian(&ced, &u).unwrap();
        assert!((fd - an).amax() < 1e-8);
    }

    #[test]
    fn flat_flux_is_linear() {
        let ced = generic(2, 6, 0.0);
        let d = small_offsets(2, 0.3 * ced.basin_radius, 1, 5).remove(0);
        let f0 = compute_flux(&ced, &ced.u_bar_macro).unwrap();
        let fp = compute_flux(&ced, &(&ced.u_bar_macro + &d)).unwrap();
        let fm = compute_flux(&ced, &(&ced.u_bar_macro - &d)).unwrap();
        assert!((fp - 2.0 * f0 + fm).amax() < 1e-14);
    }

    #[test]
    fn hstar_cases() {
        let ced = generic(2, 6, 0.0);
        let d = small_offsets(2, 0.3 * ced.basin_radius, 1, 6).remove(0);
        let u = &ced.u_bar_macro + &d;
        let id = DMatrix::identity(6, 6);
        assert!((compute_hstar(&ced, &u, &id).unwrap() - &u).amax() < 1e-14);

        let curved = generic(2, 6, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g: DMatrix<f64> = crate::linalg::random_matrix(6, 6, &mut rng);
        let a0 = &g * g.transpose() + DMatrix::identity(6, 6);
        let v = solve_equilibrium_graph(&curved, &u).unwrap();
        let direct = curved.model.vperp_basis.transpose() * &a0 * curved.model.lift(&u, &v);
        assert!((compute_hstar(&curved, &u, &a0).unwrap() - direct).amax() < 1e-14);
        let at_bar = compute_hstar(&curved, &curved.u_bar_macro, &a0).unwrap();
        let expect = curved.model.vperp_basis.transpose() * &a0 * &curved.model.u_bar;
        assert!((at_bar - expect).amax() < 1e-14);
        assert!(compute_hstar(&curved, &u, &(-a0)).is_err());
    }

    #[test]
    fn diffusion_with_unit_rates_is_a12_a12t() {
        let spec = SyntheticSpec {
            velocities: vec![-1.0, 0.5, 1.0, 0.8, -0.3],
            micro_rates: (1.0, 1.0),
            ..Default::default()
        };
        let ced = ChapmanEnskogData::new(build_synthetic_model::<f64>(2, 5, &spec).unwrap()).unwrap();
        assert!((&ced.e + DMatrix::identity(3, 3)).amax() < 1e-14);
        let d = compute_diffusion(&ced).unwrap();
        assert!((d - &ced.a12 * ced.a12.transpose()).amax() < 1e-14);
    }

    #[test]
    fn diffusion_symmetric_psd() {
        let ced = generic(3, 8, 0.8);
        let d = compute_diffusion(&ced).unwrap();
        assert!(crate::linalg::asymmetry(&d) < 1e-14);
        // Oracle: -A12 E^{-1} A12^T through an LU solve.
        let x = ced.e.clone().lu().solve(&ced.a12.transpose()).unwrap();
        assert!((&d + &ced.a12 * x).amax() < 1e-13);
        assert!(sym_eigen(&d).0[0] > -1e-14);
    }

    #[test]
    fn zero_characteristic_on_m1_model() {
        let ced = m1();
        let c = compute_characteristics(&ced, &ced.u_bar_macro, 1).unwrap();
        assert!(c.lambdas[1].abs() < 1e-8, "{:?}", c.lambdas);
        assert!(c.lambdas[0] < 0.0);
        assert!(c.delta > 0.0);
        assert!((c.r_bar.norm() - 1.0).abs() < 1e-14);
        let exact = gnl_coefficient_at_equilibrium(&ced, &c.r_bar);
        assert!((c.lambda_gnl - exact).abs() < 1e-7 * exact.abs().max(1.0), "{} vs {exact}", c.lambda_gnl);
    }

    #[test]
    fn flat_model_is_not_genuinely_nonlinear() {
        let ced = generic(2, 6, 0.0);
        let c = compute_characteristics(&ced, &ced.u_bar_macro, 0).unwrap();
        assert!(c.lambda_gnl.abs() < 1e-8);
    }

    #[test]
    fn repeated_speed_is_not_simple() {
        let spec = SyntheticSpec {
            velocities: vec![1.0, 1.0, -0.5, 0.7, -0.9],
            macro_modes: Some(vec![0, 1]),
            ..Default::default()
        };
        let ced = ChapmanEnskogData::new(build_synthetic_model::<f64>(2, 5, &spec).unwrap()).unwrap();
        assert!(matches!(
            compute_characteristics(&ced, &ced.u_bar_macro, 0),
            Err(Error::NonSimpleEigenvalue { index: 0, .. })
        ));
    }

    #[test]
    fn sweep_table_shape() {
        let ced = m1();
        let t = characteristic_sweep(&ced, 1, &[-0.01, 0.0, 0.01]).unwrap();
        assert_eq!(t.header, vec!["u1", "lambda_1", "lambda_2", "Lambda", "delta"]);
        assert_eq!(t.rows.len(), 3);
        let lam = t.column("lambda_2").unwrap();
        assert!(lam[1].abs() < 1e-8);
    }

    #[test]
    fn ns_reference_values() {
        let pi = std::f64::consts::PI;
        let r = ns_reference(pi, 1.0, 0.9, 0.0).unwrap();
        assert!((r.mu - 0.3125).abs() < 1e-15);
        assert!((r.kappa - 4.6875).abs() < 1e-15);
        assert!((r.c - 1.0).abs() < 1e-15);
        assert_eq!(r.lambdas[1..4], [0.0, 0.0, 0.0]);
        assert!((r.lambdas[0] + 1.0).abs() < 1e-15 && (r.lambdas[4] - 1.0).abs() < 1e-15);
        for t in [0.1, 1.0, 7.5] {
            let r = ns_reference(t, 1.0, 1.0, 0.3).unwrap();
            assert!((r.kappa / r.mu - 15.0).abs() < 1e-13);
        }
        assert!(matches!(ns_reference(-1.0, 0.0, 1.0, 0.0), Err(Error::Validation(v)) if v.len() == 2));
    }
}
