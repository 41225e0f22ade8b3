//! Small-amplitude shock profiles.
//!
//! Near a state `ū` where one characteristic speed `λ_p` vanishes and is
//! genuinely nonlinear, the Rankine-Hugoniot relation `f*(u₊) = f*(u₋) = q`
//! has two nearby solutions, and both the relaxation profile (a trajectory
//! of the kinetic steady equation) and the viscous profile of
//! `D* u' = f*(u) - q` follow the Burgers normal form
//!
//! ```text
//! δ u₁' = Λ u₁²/2 - q₁,      η̄(x) = -ε tanh(Λεx / 2δ),
//! ```
//!
//! with `u₁ = r̄ · (u - ū)` and `q₁ = Λε²/2`, so that `u₁± ≈ ∓ε sgn Λ`.
//!
//! Both profiles are translated so that `u₁` crosses the midpoint of its
//! endstate values at `x = 0`.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};

use crate::canonical::CanonicalSystem;
use crate::chapman_enskog::{
    characteristic_speed, characteristic_speed_at, compute_characteristics, compute_flux, flux_at, flux_jacobian,
    solve_equilibrium_graph, solve_equilibrium_graph_from, ChapmanEnskogData,
};
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::grid::GridFunction;
use crate::linalg::{null_vector, real_spectrum};
use crate::manifolds::CenterGraphTaylor;
use crate::ode::{integrate, integrate_to_event, OdeOptions};
use crate::scalar::{lit, structural_tol, to_f64, Real};

/// Residual target for Rankine-Hugoniot endstates.
pub const RH_TOL: f64 = 1e-11;

// ---------------------------------------------------------------------------
// Rankine-Hugoniot.

#[derive(Debug, Clone, PartialEq)]
pub struct RhSolution<T: Real> {
    pub q: DVector<T>,
    pub u_minus: DVector<T>,
    pub u_plus: DVector<T>,
    /// `|u₊ - u₋|`.
    pub gap: f64,
    /// `λ_p(u₋) > 0 > λ_p(u₊)`.
    pub lax_type: bool,
    /// Largest `|f*(u±) - q|`.
    pub residual: f64,
}

/// Index of the characteristic speed of `f*'(ū)` closest to zero.
pub fn zero_characteristic_index<T: Real>(ced: &ChapmanEnskogData<T>) -> Result<usize> {
    let jac = flux_jacobian(ced, &ced.u_bar_macro)?;
    let (vals, _) = real_spectrum(&jac);
    Ok((0..vals.len())
        .min_by(|&a, &b| vals[a].abs().partial_cmp(&vals[b].abs()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0))
}

fn newton_rh<T: Real>(ced: &ChapmanEnskogData<T>, q: &DVector<T>, seed: &DVector<T>) -> Option<(DVector<T>, f64)> {
    let scale = to_f64(q.amax()).max(1.0);
    let mut u = seed.clone();
    let mut best = f64::INFINITY;
    for _ in 0..60 {
        let v = solve_equilibrium_graph(ced, &u).ok()?;
        let res = q - flux_at(ced, &u, &v);
        let rn = to_f64(res.norm());
        best = rn;
        if rn <= 1e-14 * scale {
            break;
        }
        let jac = crate::chapman_enskog::flux_jacobian_at(ced, &u, &v);
        let du = jac.lu().solve(&res)?;
        u += du;
        if !u.iter().all(|x| x.is_finite()) {
            return None;
        }
    }
    (best <= structural_tol::<T>(RH_TOL) * scale).then_some((u, best))
}

/// Endstate pairs with `f*(u±) = q` near `ū`, found by Newton's method from
/// seeds along `±r̄`. A single solution is returned as a trivial pair.
pub fn solve_rankine_hugoniot<T: Real>(ced: &ChapmanEnskogData<T>, q: &DVector<T>) -> Result<Vec<RhSolution<T>>> {
    let p = zero_characteristic_index(ced)?;
    let base = compute_characteristics(ced, &ced.u_bar_macro, p)?;
    let qbar = compute_flux(ced, &ced.u_bar_macro)?;
    let lam = to_f64(base.lambda_gnl).abs().max(1e-300);
    let rho = (2.0 * to_f64(base.r_bar.dot(&(q - &qbar))).abs() / lam).sqrt();
    let rho = rho.min(0.9 * ced.basin_radius);
    let mut seeds = vec![ced.u_bar_macro.clone()];
    for f in [1.0, 0.5, 1.5, 2.0] {
        for sign in [1.0, -1.0] {
            let s = sign * f * rho;
            if s.abs() < ced.basin_radius {
                seeds.push(&ced.u_bar_macro + &base.r_bar * lit::<T>(s));
            }
        }
    }
    let mut found: Vec<(DVector<T>, f64)> = Vec::new();
    for seed in &seeds {
        if let Some((u, res)) = newton_rh(ced, q, seed) {
            let dup_tol = 1e-8 * rho.max(1e-6);
            if !found.iter().any(|(w, _)| to_f64((w - &u).norm()) < dup_tol) {
                found.push((u, res));
            }
        }
    }
    if found.is_empty() {
        return Err(Error::NoSolution(format!(
            "no Newton seed converged for |q - f*(u_bar)| = {:.3e}",
            to_f64((q - &qbar).norm())
        )));
    }
    if found.len() == 1 {
        let (u, res) = found.pop().unwrap();
        return Ok(vec![RhSolution {
            q: q.clone(),
            u_minus: u.clone(),
            u_plus: u,
            gap: 0.0,
            lax_type: false,
            residual: res,
        }]);
    }
    let mut out = Vec::new();
    for i in 0..found.len() {
        for k in (i + 1)..found.len() {
            let (a, ra) = &found[i];
            let (b, rb) = &found[k];
            let la = characteristic_speed(ced, a, p)?;
            let lb = characteristic_speed(ced, b, p)?;
            let (um, up, lm, lp) = if la >= lb { (a, b, la, lb) } else { (b, a, lb, la) };
            out.push(RhSolution {
                q: q.clone(),
                u_minus: um.clone(),
                u_plus: up.clone(),
                gap: to_f64((up - um).norm()),
                lax_type: lm > T::zero() && lp < T::zero(),
                residual: ra.max(*rb),
            });
        }
    }
    out.sort_by(|a, b| a.gap.partial_cmp(&b.gap).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Burgers.

/// `η̄(x) = -ε tanh(Λεx / 2δ)`.
pub fn exact_burgers<T: Real>(eps: T, lambda: T, delta: T, xs: &[T]) -> Vec<T> {
    let k = lambda * eps / (delta * lit::<T>(2.0));
    xs.iter().map(|&x| -eps * (k * x).tanh()).collect()
}

/// `max |δη̄' - Λ(η̄² - ε²)/2|` with the closed-form derivative.
pub fn exact_burgers_residual<T: Real>(eps: T, lambda: T, delta: T, xs: &[T]) -> f64 {
    let k = lambda * eps / (delta * lit::<T>(2.0));
    let half = lit::<T>(0.5);
    xs.iter()
        .map(|&x| {
            let th = (k * x).tanh();
            let eta = -eps * th;
            let deta = -eps * k * (T::one() - th * th);
            to_f64((delta * deta - lambda * (eta * eta - eps * eps) * half).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersNormalForm<T: Real> {
    pub eps: T,
    /// `r̄ · D* r̄`.
    pub delta: T,
    /// `T₁₂ T₁₂*`, the same constant from the canonical form.
    pub delta_t12: T,
    pub lambda: T,
    pub q1: T,
    /// Flux constant `q = f*(ū) + q₁ r̄`.
    pub q: DVector<T>,
    pub r_bar: DVector<T>,
    pub p: usize,
    /// Conserved fiber values `(w_c2, w_c3) = (ζ, γ)`.
    pub zeta: DVector<T>,
    pub gamma: DVector<T>,
    /// Sampled `sup |φ - δ⁻¹(Λu₁²/2 - q₁)| / ε³` on the fiber.
    pub remainder_bound: f64,
}

impl<T: Real> BurgersNormalForm<T> {
    /// `δ / (|Λ| ε)`, the width of the Burgers profile.
    pub fn width(&self) -> f64 {
        to_f64(self.delta) / (to_f64(self.lambda).abs() * to_f64(self.eps))
    }

    /// Weight rate `μ̂ = |Λ|ε / 2δ`.
    pub fn mu_hat(&self) -> f64 {
        0.5 / self.width()
    }
}

/// Threshold on `|Λ|` below which the field counts as degenerate.
pub const GNL_TOL: f64 = 1e-8;

/// Builds the normal form for a half-gap `ε` (`ε = 0` gives the trivial
/// fiber through `ū`).
pub fn build_normal_form<T: Real>(
    canon: &CanonicalSystem<T>,
    ced: &ChapmanEnskogData<T>,
    taylor: &CenterGraphTaylor<T>,
    eps: T,
) -> Result<BurgersNormalForm<T>> {
    if canon.m != 1 {
        return Err(Error::Precondition(format!("normal form needs m = 1, got m = {}", canon.m)));
    }
    if eps < T::zero() {
        return Err(Error::Precondition("ε must be nonnegative".into()));
    }
    let p = zero_characteristic_index(ced)?;
    let ch = compute_characteristics(ced, &ced.u_bar_macro, p)?;
    if to_f64(ch.lambda_gnl).abs() < GNL_TOL {
        return Err(Error::NotGenuinelyNonlinear(to_f64(ch.lambda_gnl)));
    }
    let qbar = compute_flux(ced, &ced.u_bar_macro)?;
    let q1 = ch.lambda_gnl * eps * eps * lit::<T>(0.5);
    let q = &qbar + &ch.r_bar * q1;
    let (zeta, gamma) = canon.conserved_from_flux(&qbar, &q);
    let delta_t12 = (&canon.t12 * canon.t12.transpose())[(0, 0)];
    let mut nf = BurgersNormalForm {
        eps,
        delta: ch.delta,
        delta_t12,
        lambda: ch.lambda_gnl,
        q1,
        q,
        r_bar: ch.r_bar,
        p,
        zeta,
        gamma,
        remainder_bound: 0.0,
    };
    if eps > T::zero() {
        let fiber = Fiber::new(canon, taylor, &nf);
        let e = to_f64(eps);
        let mut worst = 0.0f64;
        for i in 0..=40 {
            let s = lit::<T>(e * (-1.5 + 3.0 * i as f64 / 40.0));
            let du = fiber.du1_ds(s);
            let u1 = fiber.u1(s);
            let nf_rhs = (nf.lambda * u1 * u1 * lit::<T>(0.5) - nf.q1) / nf.delta;
            worst = worst.max(to_f64((du * fiber.field(s) - nf_rhs).abs()));
        }
        nf.remainder_bound = worst / (e * e * e);
    }
    Ok(nf)
}

// ---------------------------------------------------------------------------
// Relaxation profile.

/// The scalar fiber flow `w_c1' = ζ + Q̃_c1(W(w_c1))` on the Taylor center
/// graph, with `W(s) = (s, ζ, γ, Ξ(s, ζ, γ))`.
struct Fiber<'a, T: Real> {
    canon: &'a CanonicalSystem<T>,
    taylor: &'a CenterGraphTaylor<T>,
    zeta: T,
    gamma: DVector<T>,
    r_bar: DVector<T>,
    u_bar_macro: DVector<T>,
}

impl<'a, T: Real> Fiber<'a, T> {
    fn new(canon: &'a CanonicalSystem<T>, taylor: &'a CenterGraphTaylor<T>, nf: &BurgersNormalForm<T>) -> Self {
        Self {
            canon,
            taylor,
            zeta: nf.zeta[0],
            gamma: nf.gamma.clone(),
            r_bar: nf.r_bar.clone(),
            u_bar_macro: canon.vperp_basis.transpose() * &canon.u_bar,
        }
    }

    fn wc(&self, s: T) -> DVector<T> {
        let mut wc = DVector::zeros(self.canon.center_dim());
        wc[0] = s;
        wc[1] = self.zeta;
        for (k, &g) in self.gamma.iter().enumerate() {
            wc[2 + k] = g;
        }
        wc
    }

    fn w(&self, s: T) -> DVector<T> {
        let wc = self.wc(s);
        let wh = self.taylor.eval(&wc);
        self.canon.join_w(&wc, &wh)
    }

    fn field(&self, s: T) -> T {
        let w = self.w(s);
        self.zeta + self.canon.qc.apply(&w, &w)[0]
    }

    /// Full kinetic state.
    fn state(&self, s: T) -> DVector<T> {
        self.canon.from_canonical(&self.w(s))
    }

    fn macro_of(&self, state: &DVector<T>) -> DVector<T> {
        self.canon.vperp_basis.transpose() * state
    }

    fn u1(&self, s: T) -> T {
        self.r_bar.dot(&(self.macro_of(&self.state(s)) - &self.u_bar_macro))
    }

    fn du1_ds(&self, s: T) -> T {
        let h = lit::<T>(1e-5) * (s.abs() + lit(1e-3));
        (self.u1(s + h) - self.u1(s - h)) / (h * lit::<T>(2.0))
    }
}

fn bisect<T: Real>(mut a: T, mut b: T, f: impl Fn(T) -> T) -> T {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = (a + b) * lit::<T>(0.5);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if (fm > T::zero()) == (fa > T::zero()) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    (a + b) * lit::<T>(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// Location of the midpoint crossing.
    pub x_center: f64,
    pub rtol: f64,
    pub atol_rel: f64,
    /// Shooting offset from the endstate, relative to `ε`.
    pub shoot_offset: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            x_center: 0.0,
            rtol: 1e-12,
            atol_rel: 1e-14,
            shoot_offset: 1e-9,
        }
    }
}

/// Uniform grid of `n` nodes on `[-X, X]` with `X = widths · δ/(|Λ|ε)`.
pub fn profile_grid<T: Real>(nf: &BurgersNormalForm<T>, widths: f64, n: usize) -> Vec<T> {
    let x = widths * nf.width();
    (0..n).map(|i| lit::<T>(-x + 2.0 * x * i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationProfile<T: Real> {
    pub xs: Vec<T>,
    /// Full kinetic states.
    pub states: GridFunction<T>,
    /// Macro part `u_REL`.
    pub u: GridFunction<T>,
    /// Micro part `v_REL`.
    pub v: GridFunction<T>,
    /// Fiber coordinate `w_c1(x)`.
    pub wc1: Vec<T>,
    /// Fiber equilibria in `w_c1`, ordered as `(x → -∞, x → +∞)`.
    pub equilibria: (T, T),
    /// Macro endstates from the fiber equilibria.
    pub u_minus: DVector<T>,
    pub u_plus: DVector<T>,
    /// Value of `w_c1` at the normalization point.
    pub wc1_center: T,
    /// Midpoint of the endstate `u₁` values.
    pub u1_mid: T,
}

fn check_uniform<T: Real>(xs: &[T]) -> Result<T> {
    if xs.len() < 8 {
        return Err(Error::Precondition("profile grids need at least 8 nodes".into()));
    }
    let h = xs[1] - xs[0];
    if h <= T::zero() {
        return Err(Error::Precondition("profile grid must be increasing".into()));
    }
    Ok(h)
}

/// Integrates `y' = f(y)` from `(x_c, y_c)` to every node, forward for
/// `x ≥ x_c` and backward for `x < x_c`.
fn integrate_both_ways<T: Real>(
    mut f: impl FnMut(T, &DVector<T>) -> DVector<T>,
    x_c: T,
    y_c: &DVector<T>,
    xs: &[T],
    opts: &OdeOptions,
) -> Result<Vec<DVector<T>>> {
    let split = xs.iter().position(|&x| x >= x_c).unwrap_or(xs.len());
    let fwd: Vec<T> = xs[split..].to_vec();
    let bwd: Vec<T> = xs[..split].iter().rev().cloned().collect();
    let mut out = vec![DVector::zeros(y_c.len()); xs.len()];
    if !fwd.is_empty() {
        let sol = integrate(&mut f, x_c, y_c, &fwd, opts)?;
        for (k, y) in sol.ys.into_iter().enumerate() {
            out[split + k] = y;
        }
    }
    if !bwd.is_empty() {
        let sol = integrate(&mut f, x_c, y_c, &bwd, opts)?;
        for (k, y) in sol.ys.into_iter().enumerate() {
            out[split - 1 - k] = y;
        }
    }
    Ok(out)
}

/// Relaxation profile on the fiber of the normal form. The fiber field is
/// scanned on `[-3ε, 3ε]` for its equilibria; the connection runs between
/// the bracketing pair closest to the origin.
pub fn compute_relaxation_profile<T: Real>(
    canon: &CanonicalSystem<T>,
    taylor: &CenterGraphTaylor<T>,
    nf: &BurgersNormalForm<T>,
    xs: &[T],
    opts: &ProfileOptions,
) -> Result<RelaxationProfile<T>> {
    if taylor.order < 3 {
        return Err(Error::Precondition("relaxation profiles need Taylor order >= 3".into()));
    }
    check_uniform(xs)?;
    let fiber = Fiber::new(canon, taylor, nf);
    let n = canon.n;
    let r = canon.r;
    if nf.eps == T::zero() {
        let s0 = fiber.state(T::zero());
        let states = GridFunction::new(xs[0], xs[1] - xs[0], DMatrix::from_fn(xs.len(), n, |_, k| s0[k]))?;
        let um = fiber.macro_of(&states.node(0));
        let vs = states.transform(&canon.v_basis.transpose());
        return Ok(RelaxationProfile {
            xs: xs.to_vec(),
            u: states.transform(&canon.vperp_basis.transpose()),
            v: vs,
            states,
            wc1: vec![T::zero(); xs.len()],
            equilibria: (T::zero(), T::zero()),
            u_minus: um.clone(),
            u_plus: um,
            wc1_center: T::zero(),
            u1_mid: T::zero(),
        });
    }
    let eps = to_f64(nf.eps);
    let scan = 3000;
    let mut roots = Vec::new();
    let mut prev_s = lit::<T>(-3.0 * eps);
    let mut prev_f = fiber.field(prev_s);
    for i in 1..=scan {
        let s = lit::<T>(eps * (-3.0 + 6.0 * i as f64 / scan as f64));
        let fs = fiber.field(s);
        if (fs > T::zero()) != (prev_f > T::zero()) || fs == T::zero() {
            roots.push(bisect(prev_s, s, |t| fiber.field(t)));
        }
        prev_s = s;
        prev_f = fs;
    }
    if roots.len() < 2 {
        return Err(Error::NoConnection(format!(
            "fiber field has {} sign change(s) on [-3ε, 3ε]",
            roots.len()
        )));
    }
    let (a, b) = roots
        .windows(2)
        .map(|w| (w[0], w[1]))
        .min_by(|x, y| {
            let cx = to_f64((x.0 + x.1).abs());
            let cy = to_f64((y.0 + y.1).abs());
            cx.partial_cmp(&cy).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    let mid_s = (a + b) * lit::<T>(0.5);
    // Flow between the roots runs from the root the field points away from.
    let increasing = fiber.field(mid_s) > T::zero();
    let equilibria = if increasing { (a, b) } else { (b, a) };
    let u1_mid = (fiber.u1(a) + fiber.u1(b)) * lit::<T>(0.5);
    let s_c = bisect(a, b, |t| fiber.u1(t) - u1_mid);
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol_rel * eps,
        ..OdeOptions::default()
    };
    let y0 = DVector::from_element(1, s_c);
    let traj = integrate_both_ways(
        |_, y: &DVector<T>| DVector::from_element(1, fiber.field(y[0])),
        lit::<T>(opts.x_center),
        &y0,
        xs,
        &ode,
    )?;
    let wc1: Vec<T> = traj.iter().map(|y| y[0]).collect();
    let mut values = DMatrix::zeros(xs.len(), n);
    for (i, &s) in wc1.iter().enumerate() {
        let st = fiber.state(s);
        for k in 0..n {
            values[(i, k)] = st[k];
        }
    }
    let states = GridFunction::new(xs[0], xs[1] - xs[0], values)?;
    let u = states.transform(&canon.vperp_basis.transpose());
    let v = states.transform(&canon.v_basis.transpose());
    let endstate = |s: T| fiber.macro_of(&fiber.state(s));
    debug_assert_eq!(u.dim(), r);
    Ok(RelaxationProfile {
        xs: xs.to_vec(),
        states,
        u,
        v,
        wc1,
        u_minus: endstate(equilibria.0),
        u_plus: endstate(equilibria.1),
        equilibria,
        wc1_center: s_c,
        u1_mid,
    })
}

// ---------------------------------------------------------------------------
// Viscous profile.

#[derive(Debug, Clone, PartialEq)]
pub struct ViscousProfile<T: Real> {
    pub xs: Vec<T>,
    /// Macro profile `u_CE`.
    pub u: GridFunction<T>,
    /// `v*(u_CE)`.
    pub v_star: GridFunction<T>,
    /// Full states `(u, v*(u) + E⁻¹A₁₂ᵀu')`, whose macro flux is exactly `q`.
    pub states: GridFunction<T>,
    /// Endstate the shooting started from, and the sign of time it ran in.
    pub shoot_from_minus: bool,
    /// Profile coordinate of the shooting start.
    pub x_start: T,
    pub u1_mid: T,
}

/// Viscous profile of `D* u' = f*(u) - q` between the endstates of a Lax
/// pair. Shoots along the slow eigenvector from the endstate whose fast
/// directions contract in the shooting direction: forward from `u₋` when
/// `D*⁻¹f*'(u₋)` has no other positive eigenvalue, otherwise backward from
/// `u₊`.
pub fn compute_viscous_profile<T: Real>(
    ced: &ChapmanEnskogData<T>,
    rh: &RhSolution<T>,
    r_bar: &DVector<T>,
    xs: &[T],
    opts: &ProfileOptions,
) -> Result<ViscousProfile<T>> {
    check_uniform(xs)?;
    if !rh.lax_type {
        return Err(Error::Precondition("viscous profiles need a Lax pair".into()));
    }
    let d_chol = ced
        .d_star
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("D* must be positive definite".into()))?;
    let d_inv = d_chol.inverse();
    let q = rh.q.clone();
    let eps = 0.5 * rh.gap;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let last_v = RefCell::new(ced.v_bar_micro.clone());
    let field = |_: T, u: &DVector<T>| -> DVector<T> {
        let guess = last_v.borrow().clone();
        match solve_equilibrium_graph_from(ced, u, &guess) {
            Ok(g) => {
                let out = &d_inv * (flux_at(ced, u, &g.v) - &q);
                *last_v.borrow_mut() = g.v;
                out
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                DVector::from_element(u.len(), lit::<T>(f64::NAN))
            }
        }
    };
    let u_bar = &ced.u_bar_macro;
    let u1 = |u: &DVector<T>| r_bar.dot(&(u - u_bar));
    let u1_mid = (u1(&rh.u_minus) + u1(&rh.u_plus)) * lit::<T>(0.5);

    // Slow eigenpair at each endstate.
    let slow = |u: &DVector<T>| -> Result<(T, DVector<T>, usize, usize)> {
        let m = &d_inv * flux_jacobian(ced, u)?;
        let (vals, _) = real_spectrum(&m);
        let k = (0..vals.len())
            .min_by(|&a, &b| vals[a].abs().partial_cmp(&vals[b].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        let vec = null_vector(&(&m - DMatrix::identity(m.nrows(), m.nrows()) * vals[k]));
        let pos = (0..vals.len()).filter(|&i| i != k && vals[i] > T::zero()).count();
        let neg = (0..vals.len()).filter(|&i| i != k && vals[i] < T::zero()).count();
        Ok((vals[k], vec, pos, neg))
    };
    let (lam_m, vec_m, pos_m, _) = slow(&rh.u_minus)?;
    let (lam_p, vec_p, _, neg_p) = slow(&rh.u_plus)?;
    let from_minus = pos_m == 0;
    if !from_minus && neg_p != 0 {
        return Err(Error::ShootingFailure(
            "fast spectrum of D*^-1 f*' has both signs at the endstates".into(),
        ));
    }
    let (start, lam_s, dir0, target, t_sign) = if from_minus {
        (&rh.u_minus, lam_m, vec_m, &rh.u_plus, T::one())
    } else {
        (&rh.u_plus, lam_p, vec_p, &rh.u_minus, -T::one())
    };
    if lam_s * t_sign <= T::zero() {
        return Err(Error::ShootingFailure("slow eigenvalue has the wrong sign".into()));
    }
    let toward = target - start;
    let dir = if dir0.dot(&toward) >= T::zero() { dir0 } else { -dir0 };
    let s = lit::<T>(opts.shoot_offset * eps);
    let y0 = start + &dir * s;
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol_rel * eps,
        ..OdeOptions::default()
    };
    // Generous time budget: the crossing is reached after about
    // log(ε/s)/|λ_slow| plus a few profile widths.
    let t_budget = lit::<T>(4.0) * (lit::<T>(eps) / s).ln() / lam_s.abs() * t_sign;
    let hit = integrate_to_event(&field, T::zero(), &y0, t_budget, |y| u1(y) - u1_mid, &ode)?;
    if let Some(e) = failure.borrow_mut().take() {
        return Err(Error::ShootingFailure(format!("left the equilibrium-graph basin: {e}")));
    }
    let (t_e, y_e) = hit.ok_or_else(|| Error::ShootingFailure("no midpoint crossing before the time budget".into()))?;
    let x_c = lit::<T>(opts.x_center);
    // Profile coordinate of the shooting start.
    let x_start = x_c - t_e;
    let h = xs[1] - xs[0];
    let mut us = vec![DVector::zeros(rh.u_minus.len()); xs.len()];
    // Side of the crossing that the shooting came from: reuse the shooting
    // trajectory (stable direction), and the linear solution before it.
    let on_start_side = |x: T| if from_minus { x < x_c } else { x >= x_c };
    let start_nodes: Vec<usize> = (0..xs.len()).filter(|&i| on_start_side(xs[i])).collect();
    let mut traj_nodes: Vec<(usize, T)> = Vec::new();
    for &i in &start_nodes {
        let t = xs[i] - x_start;
        if t * t_sign > T::zero() {
            traj_nodes.push((i, t));
        } else {
            us[i] = start + &dir * (s * (lam_s * t).exp());
        }
    }
    traj_nodes.sort_by(|a, b| (a.1 * t_sign).partial_cmp(&(b.1 * t_sign)).unwrap_or(std::cmp::Ordering::Equal));
    if !traj_nodes.is_empty() {
        let ts: Vec<T> = traj_nodes.iter().map(|&(_, t)| t).collect();
        *last_v.borrow_mut() = ced.v_bar_micro.clone();
        let sol = integrate(&field, T::zero(), &y0, &ts, &ode)?;
        for ((i, _), y) in traj_nodes.iter().zip(sol.ys) {
            us[*i] = y;
        }
    }
    // Other side: integrate away from the crossing toward the target.
    let other: Vec<usize> = (0..xs.len()).filter(|&i| !on_start_side(xs[i])).collect();
    if !other.is_empty() {
        let mut ts: Vec<T> = other.iter().map(|&i| xs[i]).collect();
        if !from_minus {
            ts.reverse();
        }
        let sol = integrate(&field, x_c, &y_e, &ts, &ode)?;
        let idx: Vec<usize> = if from_minus { other.clone() } else { other.iter().rev().cloned().collect() };
        for (i, y) in idx.into_iter().zip(sol.ys) {
            us[i] = y;
        }
    }
    if let Some(e) = failure.borrow_mut().take() {
        return Err(Error::ShootingFailure(format!("left the equilibrium-graph basin: {e}")));
    }
    let r = rh.u_minus.len();
    let nv = ced.model.n - r;
    let mut uv = DMatrix::zeros(xs.len(), r);
    let mut vv = DMatrix::zeros(xs.len(), nv);
    let mut sv = DMatrix::zeros(xs.len(), ced.model.n);
    let e_lu = ced.e.clone().lu();
    for (i, u) in us.iter().enumerate() {
        let v = solve_equilibrium_graph(ced, u)?;
        let du = &d_inv * (flux_at(ced, u, &v) - &q);
        let corr = e_lu
            .solve(&(ced.a12.transpose() * du))
            .ok_or_else(|| Error::Precondition("E is singular".into()))?;
        let st = ced.model.lift(u, &(&v + corr));
        uv.set_row(i, &u.transpose());
        vv.set_row(i, &v.transpose());
        sv.set_row(i, &st.transpose());
    }
    Ok(ViscousProfile {
        xs: xs.to_vec(),
        u: GridFunction::new(xs[0], h, uv)?,
        v_star: GridFunction::new(xs[0], h, vv)?,
        states: GridFunction::new(xs[0], h, sv)?,
        shoot_from_minus: from_minus,
        x_start,
        u1_mid,
    })
}

// ---------------------------------------------------------------------------
// Diagnostics.

/// `λ_p` at every node of a macro profile.
pub fn lambda_along<T: Real>(ced: &ChapmanEnskogData<T>, u: &GridFunction<T>, p: usize) -> Result<Vec<f64>> {
    let mut v = ced.v_bar_micro.clone();
    let mut out = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let ui = u.node(i);
        v = solve_equilibrium_graph_from(ced, &ui, &v)?.v;
        out.push(to_f64(characteristic_speed_at(ced, &ui, &v, p)?));
    }
    Ok(out)
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// `max_x |P_{V⊥} A state(x) - q|`.
pub fn flux_deviation<T: Real>(ced: &ChapmanEnskogData<T>, states: &GridFunction<T>, q: &DVector<T>) -> f64 {
    let m = &ced.model;
    (0..states.len())
        .map(|i| to_f64((m.macro_part(&(&m.a * states.node(i))) - q).norm()))
        .fold(0.0, f64::max)
}

/// `sup_x e^{μ|x - x_c|} |∂ₓʲ f(x)|` for `j = 0..=j_max`.
pub fn weighted_sup_derivatives<T: Real>(f: &GridFunction<T>, mu: f64, x_c: f64, j_max: usize) -> Vec<f64> {
    (0..=j_max)
        .map(|j| {
            let d = if j == 0 { f.clone() } else { f.derivative(j, 6) };
            (0..d.len())
                .map(|i| {
                    let x = to_f64(d.x(i));
                    (mu * (x - x_c).abs()).exp() * to_f64(d.node(i).norm())
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupCheck {
    /// `sup |H_y - (H² - 1)/2|` for `H = η/ε` on `y = Λεx/δ`.
    pub forcing_sup: f64,
    pub eps: f64,
}

/// Rescales a scalar profile `η` centered at the midpoint and measures how
/// far `H(y) = η/ε`, `y = Λεx/δ`, is from solving `H' = (H² - 1)/2`.
pub fn blowup_rescale_check(eta: &[f64], xs: &[f64], eps: f64, lambda: f64, delta: f64) -> Result<BlowupCheck> {
    if lambda.abs() < GNL_TOL {
        return Err(Error::Precondition("blow-up rescaling needs Λ ≠ 0".into()));
    }
    if eps <= 0.0 || delta <= 0.0 {
        return Err(Error::Precondition("blow-up rescaling needs ε, δ > 0".into()));
    }
    if eta.len() != xs.len() || xs.len() < 8 {
        return Err(Error::Dimension("η and x grids must match with at least 8 nodes".into()));
    }
    let h = xs[1] - xs[0];
    let g = GridFunction::new(xs[0], h, DMatrix::from_column_slice(eta.len(), 1, eta))?;
    let d = g.derivative(1, 6);
    let dy_dx = lambda * eps / delta;
    let forcing_sup = (0..eta.len())
        .map(|i| {
            let hh = eta[i] / eps;
            let hy = d.values[(i, 0)] / eps / dy_dx;
            (hy - (hh * hh - 1.0) / 2.0).abs()
        })
        .fold(0.0, f64::max);
    Ok(BlowupCheck { forcing_sup, eps })
}

// ---------------------------------------------------------------------------
// Comparison.

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileComparison {
    pub eps: f64,
    pub mu_hat: f64,
    /// `sup e^{μ̂|x|} |∂ₓʲ(u_REL - u_CE)|`, `j = 0..=k-2`.
    pub u_diff: Vec<f64>,
    /// `sup e^{μ̂|x|} |∂ₓʲ(v_REL - v*(u_CE))|`.
    pub v_diff: Vec<f64>,
    /// `sup e^{μ̂|x|} |u_REL(x) - u±|` with the endstate on the side of `x`.
    pub endstate_approach: f64,
    /// `max |u₁± - η̄±|`.
    pub endstate_gap: f64,
    /// `|u₊ - u₋|` against `2ε`, relative.
    pub gap_rel_error: f64,
    pub lambda_rel_decreasing: bool,
    pub lambda_ce_decreasing: bool,
    pub burgers_residual: f64,
    pub conservation_rel: f64,
    pub conservation_ce: f64,
    pub q_norm: f64,
    pub blowup_forcing: f64,
    pub remainder_bound: f64,
    pub delta_mismatch: f64,
}

/// Everything measured for one `ε`; the profiles are returned for output.
pub struct ProfileRun<T: Real> {
    pub nf: BurgersNormalForm<T>,
    pub rh: RhSolution<T>,
    pub rel: RelaxationProfile<T>,
    pub ce: ViscousProfile<T>,
    pub lambda_rel: Vec<f64>,
    pub lambda_ce: Vec<f64>,
    pub eta_bar: Vec<T>,
    pub comparison: ProfileComparison,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSettings {
    /// Half-width of the grid in Burgers widths `δ/(|Λ|ε)`.
    pub widths: f64,
    pub nodes: usize,
    pub options: ProfileOptions,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        Self {
            widths: 8.0,
            nodes: 801,
            options: ProfileOptions::default(),
        }
    }
}

/// Lax pair of the RH solutions closest to the fiber endstates.
fn matching_pair<T: Real>(sols: Vec<RhSolution<T>>, near: &DVector<T>) -> Result<RhSolution<T>> {
    sols.into_iter()
        .filter(|s| s.lax_type)
        .min_by(|a, b| {
            let da = to_f64((&a.u_minus - near).norm());
            let db = to_f64((&b.u_minus - near).norm());
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| Error::NoConnection("no Lax pair among the Rankine-Hugoniot solutions".into()))
}

/// Computes both profiles at half-gap `ε` and compares them.
pub fn run_profile<T: Real>(
    canon: &CanonicalSystem<T>,
    ced: &ChapmanEnskogData<T>,
    taylor: &CenterGraphTaylor<T>,
    eps: f64,
    settings: &ProfileSettings,
) -> Result<ProfileRun<T>> {
    if eps <= 0.0 {
        return Err(Error::Precondition("profile comparison needs ε > 0".into()));
    }
    let nf = build_normal_form(canon, ced, taylor, lit::<T>(eps))?;
    let xs = profile_grid(&nf, settings.widths, settings.nodes);
    let rel = compute_relaxation_profile(canon, taylor, &nf, &xs, &settings.options)?;
    let rh = matching_pair(solve_rankine_hugoniot(ced, &nf.q)?, &rel.u_minus)?;
    let ce = compute_viscous_profile(ced, &rh, &nf.r_bar, &xs, &settings.options)?;
    let k = taylor.order;
    let x_c = settings.options.x_center;
    let mu = nf.mu_hat();
    let du = rel.u.with_values(&rel.u.values - &ce.u.values);
    let dv = rel.v.with_values(&rel.v.values - &ce.v_star.values);
    let u_diff = weighted_sup_derivatives(&du, mu, x_c, k - 2);
    let v_diff = weighted_sup_derivatives(&dv, mu, x_c, k - 2);
    let mut endstate_approach = 0.0f64;
    for i in 0..xs.len() {
        let x = to_f64(xs[i]);
        let end = if x < x_c { &rh.u_minus } else { &rh.u_plus };
        let d = to_f64((rel.u.node(i) - end).norm());
        endstate_approach = endstate_approach.max((mu * (x - x_c).abs()).exp() * d);
    }
    let u_bar = &ced.u_bar_macro;
    let u1 = |u: &DVector<T>| to_f64(nf.r_bar.dot(&(u - u_bar)));
    let sgn = to_f64(nf.lambda).signum();
    let endstate_gap = (u1(&rh.u_minus) - eps * sgn).abs().max((u1(&rh.u_plus) + eps * sgn).abs());
    let lambda_rel = lambda_along(ced, &rel.u, nf.p)?;
    let lambda_ce = lambda_along(ced, &ce.u, nf.p)?;
    let xs_shift: Vec<T> = xs.iter().map(|&x| x - lit::<T>(x_c)).collect();
    let eta_bar = exact_burgers(nf.eps, nf.lambda, nf.delta, &xs_shift);
    let burgers_residual = exact_burgers_residual(nf.eps, nf.lambda, nf.delta, &xs_shift);
    let xs_f: Vec<f64> = xs.iter().map(|&x| to_f64(x)).collect();
    let eta: Vec<f64> = (0..xs.len()).map(|i| u1(&rel.u.node(i)) - to_f64(rel.u1_mid)).collect();
    let blowup = blowup_rescale_check(&eta, &xs_f, eps, to_f64(nf.lambda), to_f64(nf.delta))?;
    let comparison = ProfileComparison {
        eps,
        mu_hat: mu,
        u_diff,
        v_diff,
        endstate_approach,
        endstate_gap,
        gap_rel_error: (rh.gap / (2.0 * eps) - 1.0).abs(),
        lambda_rel_decreasing: strictly_decreasing(&lambda_rel),
        lambda_ce_decreasing: strictly_decreasing(&lambda_ce),
        burgers_residual,
        conservation_rel: flux_deviation(ced, &rel.states, &nf.q),
        conservation_ce: flux_deviation(ced, &ce.states, &nf.q),
        q_norm: to_f64(nf.q.norm()),
        blowup_forcing: blowup.forcing_sup,
        remainder_bound: nf.remainder_bound,
        delta_mismatch: to_f64((nf.delta - nf.delta_t12).abs()),
    };
    Ok(ProfileRun {
        nf,
        rh,
        rel,
        ce,
        lambda_rel,
        lambda_ce,
        eta_bar,
        comparison,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub quantity: String,
    pub j: usize,
    pub order: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockProfileReport {
    pub rows: Vec<ProfileComparison>,
    pub orders: Vec<OrderFit>,
    pub pass: bool,
}

fn order_fit(quantity: &str, j: usize, eps: &[f64], values: &[f64], threshold: f64) -> OrderFit {
    // Exactly zero differences carry no scaling information: vacuous pass.
    let (order, pass) = if values.iter().all(|&v| v == 0.0) {
        (f64::INFINITY, true)
    } else {
        match loglog_slope(eps, values) {
            Some(s) => (s, s >= threshold),
            None => (f64::NAN, false),
        }
    };
    OrderFit {
        quantity: quantity.to_string(),
        j,
        order,
        threshold,
        pass,
    }
}

/// Fits the `ε`-orders of the comparison quantities over a sweep. Passes
/// when every order reaches its nominal value minus `band`.
pub fn compare_profiles(rows: Vec<ProfileComparison>, band: f64) -> ShockProfileReport {
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let mut orders = Vec::new();
    let jn = rows.first().map_or(0, |r| r.u_diff.len());
    for j in 0..jn {
        let u: Vec<f64> = rows.iter().map(|r| r.u_diff[j]).collect();
        let v: Vec<f64> = rows.iter().map(|r| r.v_diff[j]).collect();
        orders.push(order_fit("u_rel_minus_u_ce", j, &eps, &u, (j + 2) as f64 - band));
        orders.push(order_fit("v_rel_minus_vstar_ce", j, &eps, &v, (j + 2) as f64 - band));
    }
    let ea: Vec<f64> = rows.iter().map(|r| r.endstate_approach).collect();
    orders.push(order_fit("endstate_approach", 0, &eps, &ea, 1.0 - band));
    let eg: Vec<f64> = rows.iter().map(|r| r.endstate_gap).collect();
    orders.push(order_fit("endstate_gap", 0, &eps, &eg, 2.0 - band));
    let bf: Vec<f64> = rows.iter().map(|r| r.blowup_forcing).collect();
    orders.push(order_fit("blowup_forcing", 0, &eps, &bf, 1.0 - band.max(0.2)));
    let pass = orders.iter().all(|o| o.pass)
        && rows.iter().all(|r| {
            r.lambda_rel_decreasing
                && r.lambda_ce_decreasing
                && r.burgers_residual <= 1e-12
                && r.conservation_rel < 1e-7 * r.q_norm
                && r.conservation_ce < 1e-7 * r.q_norm
        });
    ShockProfileReport { rows, orders, pass }
}
