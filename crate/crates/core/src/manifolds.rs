//! Stable and center manifolds of the canonical system
//!
//! ```text
//! w_c' = J w_c + Q̃_c(w, w),     Γ₀ w_h' = -w_h + Q̃_h(w, w).
//! ```
//!
//! The stable manifold is computed by Picard iteration of the coupled
//! fixed-point system on a half line, parametrized by the stable datum `v₀`
//! (the hyperbolic trace is shifted by `B_h(w(0), w(0))` so that the
//! homogeneous term carries `v₀` and nothing else). The center manifold is
//! computed twice: as a Taylor polynomial `w_h = Ξ(w_c)` by order-by-order
//! matching, and as the trace at zero of the truncated fixed point on
//! `[-X, X]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bilinear::BilinearMap;
use crate::canonical::CanonicalSystem;
use crate::error::{Error, Result};
use crate::fit::{exp_decay_rate, loglog_slope};
use crate::grid::{weighted_norm, GridFunction, WeightedNorm};
use crate::linalg::spectral_norm;
use crate::poly::{MonomialBasis, PolyMap};
use crate::resolvent::{apply_resolvent, semigroup_apply, spectral_decompose, SpectralDecomposition};
use crate::scalar::{lit, to_f64, Real};

/// Quintic smoothstep cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`, `C²` seams.
pub fn cutoff<T: Real>(t: T) -> T {
    if t <= T::one() {
        T::one()
    } else if t >= lit(2.0) {
        T::zero()
    } else {
        let u = t - T::one();
        let s = u * u * u * (lit::<T>(10.0) - lit::<T>(15.0) * u + lit::<T>(6.0) * u * u);
        T::one() - s
    }
}

/// Combined quadratic part `Q̃ = (Q̃_c, Q̃_h)` with a smooth cutoff at radius
/// `ε`: `N_ε(w) = ρ(|w|/ε) Q̃(w, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNonlinearity<T: Real> {
    pub qc: BilinearMap<T>,
    pub qh: BilinearMap<T>,
    pub epsilon: T,
    /// Sampled `(sup|N|/ε², sup|N'|/ε, sup|N''|)`.
    pub bounds: (f64, f64, f64),
}

impl<T: Real> TruncatedNonlinearity<T> {
    pub fn full(&self, w: &DVector<T>) -> DVector<T> {
        let c = self.qc.apply(w, w);
        let h = self.qh.apply(w, w);
        let mut out = DVector::zeros(c.len() + h.len());
        out.rows_mut(0, c.len()).copy_from(&c);
        out.rows_mut(c.len(), h.len()).copy_from(&h);
        out
    }

    pub fn eval(&self, w: &DVector<T>) -> DVector<T> {
        let rho = cutoff(w.norm() / self.epsilon);
        if rho == T::zero() {
            DVector::zeros(self.qc.out_dim() + self.qh.out_dim())
        } else {
            self.full(w) * rho
        }
    }
}

/// Wraps `Q̃` with the cutoff and measures its bound constants by sampling
/// random states at radii up to `2.5 ε`.
pub fn truncate<T: Real>(canon: &CanonicalSystem<T>, epsilon: T) -> Result<TruncatedNonlinearity<T>> {
    if epsilon <= T::zero() {
        return Err(Error::Precondition("truncation radius must be positive".into()));
    }
    let mut tn = TruncatedNonlinearity {
        qc: canon.qc.clone(),
        qh: canon.qh.clone(),
        epsilon,
        bounds: (0.0, 0.0, 0.0),
    };
    tn.bounds = sample_bounds(&tn, 400, 11);
    Ok(tn)
}

fn sample_bounds<T: Real>(tn: &TruncatedNonlinearity<T>, samples: usize, seed: u64) -> (f64, f64, f64) {
    let n = tn.qc.in_dim();
    let eps = to_f64(tn.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut c0, mut c1, mut c2) = (0.0f64, 0.0f64, 0.0f64);
    let fd = eps * 1e-4;
    let unit = |rng: &mut ChaCha8Rng| {
        let v = DVector::<f64>::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        &v / v.norm().max(1e-300)
    };
    let eval = |w: &DVector<f64>| -> DVector<f64> {
        let wt = w.map(lit::<T>);
        tn.eval(&wt).map(to_f64)
    };
    for _ in 0..samples {
        let r = rng.gen_range(0.0..2.5) * eps;
        let w = unit(&mut rng) * r;
        let d = unit(&mut rng);
        let n0 = eval(&w);
        let np = eval(&(&w + &d * fd));
        let nm = eval(&(&w - &d * fd));
        c0 = c0.max(n0.norm() / (eps * eps));
        c1 = c1.max((&np - &nm).norm() / (2.0 * fd) / eps);
        c2 = c2.max((&np - &n0 * 2.0 + &nm).norm() / (fd * fd));
    }
    (c0, c1, c2)
}

/// Pointwise residual `(w_c' - Jw_c - Q̃_c, Γ₀w_h' + w_h - Q̃_h)` of a
/// canonical trajectory, derivative by finite differences of accuracy `acc`.
pub fn canonical_steady_residual<T: Real>(canon: &CanonicalSystem<T>, w: &GridFunction<T>, acc: usize) -> GridFunction<T> {
    let dw = w.derivative(1, acc);
    let lead = canon.leading_operator();
    let c = canon.center_dim();
    let mut out = DMatrix::zeros(w.len(), canon.n);
    for i in 0..w.len() {
        let wi = w.node(i);
        let (fc, fh) = canon.fields(&wi);
        let mut res = &lead * dw.node(i);
        for k in 0..c {
            res[k] -= fc[k];
        }
        for k in 0..canon.hyper_dim() {
            res[c + k] -= fh[k];
        }
        out.set_row(i, &res.transpose());
    }
    w.with_values(out)
}

fn check_nilpotent<T: Real>(j: &DMatrix<T>) -> Result<()> {
    if j.nrows() > 0 && (j * j).amax() != T::zero() {
        return Err(Error::Precondition("J must satisfy J² = 0".into()));
    }
    Ok(())
}

/// Cumulative trapezoid integrals `∫_{x_ref}^{x_i} f` for every node and
/// column of `f`.
fn cumulative_from<T: Real>(f: &DMatrix<T>, h: T, i_ref: usize) -> DMatrix<T> {
    let n = f.nrows();
    let mut out = DMatrix::zeros(n, f.ncols());
    let half = h * lit(0.5);
    for i in (i_ref + 1)..n {
        let prev = out.row(i - 1).into_owned();
        out.set_row(i, &(prev + (f.row(i - 1) + f.row(i)) * half));
    }
    for i in (0..i_ref).rev() {
        let next = out.row(i + 1).into_owned();
        out.set_row(i, &(next - (f.row(i) + f.row(i + 1)) * half));
    }
    out
}

/// `∫_{x_ref}^{x} e^{J(x-θ)} f(θ) dθ` at every node, using `J² = 0`.
fn duhamel<T: Real>(j: &DMatrix<T>, xs: &[T], f: &DMatrix<T>, h: T, i_ref: usize) -> DMatrix<T> {
    let i0 = cumulative_from(f, h, i_ref);
    let mut xf = f.clone();
    for (i, &x) in xs.iter().enumerate() {
        let mut row = xf.row_mut(i);
        row *= x;
    }
    let i1 = cumulative_from(&xf, h, i_ref);
    let mut out = i0.clone();
    for (i, &x) in xs.iter().enumerate() {
        let tail = (i0.row(i) * x - i1.row(i)).transpose();
        let jt = j * tail;
        let mut row = out.row_mut(i);
        row += jt.transpose();
    }
    out
}

// ---------------------------------------------------------------------------
// Stable manifold.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    pub x_max: f64,
    /// Grid spacing; `0` uses the resolvent default within [`MAX_GRID_NODES`].
    pub h: f64,
    /// Requested decay rate `ν̃`.
    pub nu_tilde: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl StableParams {
    /// `ν̃ = 0.8 / |Γ₀|`, `X = 25 / ν̃`.
    pub fn defaults<T: Real>(canon: &CanonicalSystem<T>) -> Self {
        let g = to_f64(spectral_norm(&canon.gamma0)).max(1e-12);
        let nu_tilde = 0.8 / g;
        Self {
            x_max: 25.0 / nu_tilde,
            h: 0.0,
            nu_tilde,
            max_iter: 60,
            tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StableSolveResult<T: Real> {
    /// Canonical coordinates `w(x)` on `[0, X]`.
    pub trajectory: GridFunction<T>,
    pub v0: DVector<T>,
    pub iterations: usize,
    pub contraction_factor: f64,
    pub fitted_decay_rate: f64,
    /// `|Π_S(w_h(0) - B_h(w(0), w(0))) - v₀|`.
    pub consistency: f64,
    pub residual_l2: f64,
    pub residual_sup: f64,
    pub radius: f64,
}

/// Quadratic coefficient bound `(|Q̃_c|_F² + |Q̃_h|_F²)^{1/2}`.
pub fn quadratic_bound<T: Real>(canon: &CanonicalSystem<T>) -> f64 {
    let c = to_f64(canon.qc.frobenius());
    let h = to_f64(canon.qh.frobenius());
    (c * c + h * h).sqrt()
}

/// Admissible `|v₀|` for the stable iteration: `1 / (8 q K)` with `q` the
/// quadratic bound and `K = 1 + m (1/ν̃ + 1/ν̃²)` accounting for the center
/// integral.
pub fn stable_radius<T: Real>(canon: &CanonicalSystem<T>, nu_tilde: f64) -> f64 {
    let q = quadratic_bound(canon).max(1e-300);
    let k = 1.0 + canon.m as f64 * (1.0 / nu_tilde + 1.0 / (nu_tilde * nu_tilde));
    1.0 / (8.0 * q * k)
}

/// Node budget of the stable and center solvers when no spacing is given.
pub const MAX_GRID_NODES: usize = 200_001;

/// `requested` if positive, else the resolvent default spacing, coarsened
/// so that an interval of `length` needs at most [`MAX_GRID_NODES`] nodes.
fn solver_spacing<T: Real>(requested: f64, decomp: &SpectralDecomposition<T>, length: f64) -> f64 {
    if requested > 0.0 {
        return requested;
    }
    decomp.default_spacing().max(length / (MAX_GRID_NODES - 1) as f64)
}

fn stable_component<T: Real>(decomp: &SpectralDecomposition<T>, v: &DVector<T>) -> DVector<T> {
    semigroup_apply(decomp, T::zero(), v).expect("x = 0 is admissible")
}

/// Solves for the stable-manifold trajectory with stable datum `v₀`
/// (hyperbolic coordinates, in the stable eigenspace of `Γ₀`).
pub fn solve_stable<T: Real>(canon: &CanonicalSystem<T>, v0: &DVector<T>, params: &StableParams) -> Result<StableSolveResult<T>> {
    let hd = canon.hyper_dim();
    let c = canon.center_dim();
    if v0.len() != hd {
        return Err(Error::Dimension(format!("v0 has length {}, expected {hd}", v0.len())));
    }
    check_nilpotent(&canon.j)?;
    let decomp = spectral_decompose(&canon.gamma0)?;
    let ps_v0 = stable_component(&decomp, v0);
    let v0n = to_f64(v0.norm());
    if to_f64((&ps_v0 - v0).norm()) > 1e-10 * v0n.max(1e-300) {
        return Err(Error::Precondition("v0 must lie in the stable eigenspace of Γ₀".into()));
    }
    let radius = stable_radius(canon, params.nu_tilde);
    if v0n > radius * (1.0 + 1e-12) {
        return Err(Error::RadiusExceeded { norm: v0n, radius });
    }
    let h = solver_spacing(params.h, &decomp, params.x_max);
    let npts = (params.x_max / h).round() as usize + 1;
    let ht: T = lit(params.x_max / (npts - 1) as f64);
    let mut w = GridFunction::<T>::zeros(T::zero(), lit(params.x_max), npts, canon.n);
    let xs = w.xs();
    // Homogeneous part as the first iterate.
    for (i, &x) in xs.iter().enumerate() {
        let mut wi = DVector::zeros(canon.n);
        wi.rows_mut(c, hd).copy_from(&semigroup_apply(&decomp, x, v0)?);
        w.set_node(i, &wi);
    }
    let h1 = WeightedNorm::h1(0.0);
    let mut diffs: Vec<f64> = Vec::new();
    let mut iterations = 0;
    for it in 0..params.max_iter {
        iterations = it + 1;
        let mut bc = DMatrix::zeros(npts, c);
        let mut bh = DMatrix::zeros(npts, hd);
        for i in 0..npts {
            let wi = w.node(i);
            bc.set_row(i, &canon.qc.apply(&wi, &wi).transpose());
            bh.set_row(i, &canon.qh.apply(&wi, &wi).transpose());
        }
        // z(x) = -∫_x^X e^{J(x-θ)} B_c dθ, i.e. the Duhamel integral from X.
        let z = duhamel(&canon.j, &xs, &bc, ht, npts - 1);
        let w0 = w.node(0);
        let data = stable_component(&decomp, &(v0 + canon.qh.apply(&w0, &w0)));
        let forced = apply_resolvent(&decomp, &GridFunction::new(T::zero(), ht, bh)?)?;
        let mut next = DMatrix::zeros(npts, canon.n);
        for (i, &x) in xs.iter().enumerate() {
            next.view_mut((i, 0), (1, c)).copy_from(&z.row(i));
            let u = semigroup_apply(&decomp, x, &data)? + forced.node(i);
            next.view_mut((i, c), (1, hd)).copy_from(&u.transpose());
        }
        let next = w.with_values(next);
        let diff = to_f64(weighted_norm(&next.with_values(&next.values - &w.values), &h1));
        w = next;
        diffs.push(diff);
        let scale = to_f64(weighted_norm(&w, &h1)).max(1e-300);
        if diff <= params.tol * scale.max(1.0) || diff <= 1e3 * to_f64(T::eps()) * scale {
            break;
        }
        if diffs.len() >= 3 {
            let k = diffs.len();
            if diffs[k - 1] >= diffs[k - 2] && diffs[k - 2] >= diffs[k - 3] {
                // Stagnation at the roundoff floor counts as convergence.
                if diff <= 1e-12 * scale {
                    break;
                }
                return Err(Error::ContractionFailure(diffs[k - 1] / diffs[k - 2]));
            }
        }
    }
    let contraction_factor = contraction_from(&diffs);
    if contraction_factor >= 1.0 {
        return Err(Error::ContractionFailure(contraction_factor));
    }
    let norms: Vec<f64> = w.pointwise_norms().into_iter().map(to_f64).collect();
    let xs_f: Vec<f64> = xs.iter().map(|&x| to_f64(x)).collect();
    // Fit the tail of the resolved part of the trajectory.
    let floor = norms.iter().cloned().fold(0.0, f64::max) * 1e-10;
    let resolved = norms.iter().position(|&y| y <= floor).unwrap_or(npts);
    let (fx, fy): (Vec<f64>, Vec<f64>) = xs_f[resolved / 2..resolved]
        .iter()
        .zip(&norms[resolved / 2..resolved])
        .map(|(&x, &y)| (x, y))
        .unzip();
    let fitted_decay_rate = if fx.len() < 4 {
        f64::INFINITY
    } else {
        exp_decay_rate(&fx, &fy).unwrap_or(f64::INFINITY)
    };
    let w0 = w.node(0);
    let (_, wh0) = canon.split_w(&w0);
    let consistency = to_f64((stable_component(&decomp, &(&wh0 - canon.qh.apply(&w0, &w0))) - v0).norm());
    let res = canonical_steady_residual(canon, &w, 6);
    // Skip the outermost stencil on each side.
    let interior = 3..npts.saturating_sub(3);
    let mut sup = 0.0f64;
    let mut l2 = 0.0f64;
    for i in interior {
        let r = to_f64(res.node(i).norm());
        sup = sup.max(r);
        l2 += r * r * to_f64(ht);
    }
    Ok(StableSolveResult {
        trajectory: w,
        v0: v0.clone(),
        iterations,
        contraction_factor,
        fitted_decay_rate,
        consistency,
        residual_l2: l2.sqrt(),
        residual_sup: sup,
        radius,
    })
}

/// Largest successive-difference ratio before the iteration reaches the
/// roundoff floor.
fn contraction_from(diffs: &[f64]) -> f64 {
    let peak = diffs.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for w in diffs.windows(2) {
        if w[1] < 1e-10 * peak || w[0] == 0.0 {
            break;
        }
        worst = worst.max(w[1] / w[0]);
    }
    worst
}

/// Graph point `w(0)` over `v₀`.
pub fn stable_graph_eval<T: Real>(canon: &CanonicalSystem<T>, v0: &DVector<T>, params: &StableParams) -> Result<DVector<T>> {
    Ok(solve_stable(canon, v0, params)?.trajectory.node(0))
}

/// `(I - Π_S) w(0)`: the part of the graph point off the stable datum.
pub fn stable_graph_offset<T: Real>(canon: &CanonicalSystem<T>, w0: &DVector<T>) -> Result<DVector<T>> {
    let decomp = spectral_decompose(&canon.gamma0)?;
    let (wc, wh) = canon.split_w(w0);
    let off = &wh - stable_component(&decomp, &wh);
    Ok(canon.join_w(&wc, &off))
}

/// Slope of `log |(I-Π_S) w(0)|` against `log |v₀|` along `v₀ = s·dir`.
pub fn stable_tangency_slope<T: Real>(
    canon: &CanonicalSystem<T>,
    dir: &DVector<T>,
    scales: &[f64],
    params: &StableParams,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let unit = dir / dir.norm();
    let mut rows = Vec::new();
    for &s in scales {
        let v0 = &unit * lit::<T>(s);
        let w0 = stable_graph_eval(canon, &v0, params)?;
        let off = stable_graph_offset(canon, &w0)?;
        rows.push((s, to_f64(off.norm())));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().cloned().unzip();
    let slope = loglog_slope(&xs, &ys).unwrap_or(f64::NAN);
    Ok((slope, rows))
}

// ---------------------------------------------------------------------------
// Center manifold: Taylor graph.

#[derive(Debug, Clone, PartialEq)]
pub struct CenterGraphTaylor<T: Real> {
    pub order: usize,
    /// `Ξ: w_c ↦ w_h`, with zero constant and linear parts.
    pub xi: PolyMap<T>,
    /// Largest coefficient of the matching defect in each degree `2..=k`.
    pub residual_by_order: Vec<(usize, f64)>,
}

impl<T: Real> CenterGraphTaylor<T> {
    pub fn eval(&self, wc: &DVector<T>) -> DVector<T> {
        self.xi.eval(wc)
    }

    /// Largest coefficient of any constant or linear term of `Ξ`.
    pub fn linear_part_max(&self) -> T {
        self.xi.max_abs_degree(0).max(self.xi.max_abs_degree(1))
    }
}

/// `(w_c, Ξ(w_c))` as a polynomial map into the full canonical space.
fn lifted<T: Real>(xi: &PolyMap<T>) -> PolyMap<T> {
    PolyMap::identity(xi.basis()).vstack(xi)
}

/// Matching defect `Ξ + Γ₀ DΞ (J w_c + Q̃_c) - Q̃_h` as a polynomial.
fn matching_defect<T: Real>(canon: &CanonicalSystem<T>, xi: &PolyMap<T>) -> PolyMap<T> {
    let w = lifted(xi);
    let field = &PolyMap::identity(xi.basis()).left_mul(&canon.j) + &w.bilinear(&canon.qc);
    let transport = xi.along(&field).left_mul(&canon.gamma0);
    &(xi + &transport) - &w.bilinear(&canon.qh)
}

/// Solves the invariance relation for the center graph order by order up to
/// degree `k`. At each degree the unknown enters through the unipotent map
/// `Ξ_j ↦ Ξ_j + Γ₀ DΞ_j · J w_c`, inverted by a terminating Neumann series.
pub fn center_taylor<T: Real>(canon: &CanonicalSystem<T>, k: usize) -> Result<CenterGraphTaylor<T>> {
    if k < 2 {
        return Err(Error::Precondition("Taylor order must be at least 2".into()));
    }
    check_nilpotent(&canon.j)?;
    let basis = MonomialBasis::new(canon.center_dim(), k);
    let jfield = PolyMap::identity(&basis).left_mul(&canon.j);
    let mut xi = PolyMap::<T>::zeros(&basis, canon.hyper_dim());
    for deg in 2..=k {
        // Known data: minus the degree-`deg` defect with the current Ξ.
        let rhs = matching_defect(canon, &xi).degree_part(deg);
        let mut term = PolyMap::zeros(&basis, canon.hyper_dim()) - &rhs;
        let mut sol = term.clone();
        for _ in 0..=(deg * canon.center_dim()) {
            term = term.along(&jfield).left_mul(&canon.gamma0) * -T::one();
            if term.coeffs.amax() == T::zero() {
                break;
            }
            sol = &sol + &term;
        }
        xi = &xi + &sol;
    }
    let defect = matching_defect(canon, &xi);
    let residual_by_order = (2..=k).map(|d| (d, to_f64(defect.max_abs_degree(d)))).collect();
    Ok(CenterGraphTaylor {
        order: k,
        xi,
        residual_by_order,
    })
}

/// Pointwise matching defect of the Taylor graph at `w_c` (not truncated).
pub fn taylor_defect_at<T: Real>(canon: &CanonicalSystem<T>, taylor: &CenterGraphTaylor<T>, wc: &DVector<T>) -> DVector<T> {
    let wh = taylor.eval(wc);
    let w = canon.join_w(wc, &wh);
    let fc = &canon.j * wc + canon.qc.apply(&w, &w);
    let dxi = taylor.xi.jacobian(wc);
    &wh + &canon.gamma0 * (dxi * fc) - canon.qh.apply(&w, &w)
}

/// `(s, |defect(s·dir)|)` rows and the fitted log-log slope.
pub fn taylor_defect_sweep<T: Real>(
    canon: &CanonicalSystem<T>,
    taylor: &CenterGraphTaylor<T>,
    dir: &DVector<T>,
    scales: &[f64],
) -> (f64, Vec<(f64, f64)>) {
    let unit = dir / dir.norm();
    let rows: Vec<(f64, f64)> = scales
        .iter()
        .map(|&s| (s, to_f64(taylor_defect_at(canon, taylor, &(&unit * lit::<T>(s))).norm())))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().cloned().unzip();
    (loglog_slope(&xs, &ys).unwrap_or(f64::NAN), rows)
}

// ---------------------------------------------------------------------------
// Center manifold: truncated fixed point.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterParams {
    pub x_max: f64,
    pub h: f64,
    pub alpha: f64,
    pub alpha2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl CenterParams {
    /// `α = ν/10`, `α₂ = ν/2` with `ν = 1/|Γ₀|`, `X = 40/ν`.
    pub fn defaults<T: Real>(canon: &CanonicalSystem<T>) -> Self {
        let nu = 1.0 / to_f64(spectral_norm(&canon.gamma0)).max(1e-12);
        Self {
            x_max: 40.0 / nu,
            h: 0.0,
            alpha: nu / 10.0,
            alpha2: nu / 2.0,
            max_iter: 200,
            tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterSolveResult<T: Real> {
    /// Canonical trajectory on `[-X, X]`.
    pub trajectory: GridFunction<T>,
    pub iterations: usize,
    /// Per-iteration ratios of successive mixed-norm differences.
    pub ratios: Vec<f64>,
    pub contraction_factor: f64,
    /// `Π_h w(0)`.
    pub graph_value: DVector<T>,
}

pub fn solve_center_fixed_point<T: Real>(
    canon: &CanonicalSystem<T>,
    w0c: &DVector<T>,
    trunc: &TruncatedNonlinearity<T>,
    params: &CenterParams,
) -> Result<CenterSolveResult<T>> {
    let c = canon.center_dim();
    let hd = canon.hyper_dim();
    if w0c.len() != c {
        return Err(Error::Dimension(format!("w0c has length {}, expected {c}", w0c.len())));
    }
    check_nilpotent(&canon.j)?;
    let eps = to_f64(trunc.epsilon);
    if to_f64(w0c.norm()) > eps {
        return Err(Error::RadiusExceeded {
            norm: to_f64(w0c.norm()),
            radius: eps,
        });
    }
    let nu = 1.0 / to_f64(spectral_norm(&canon.gamma0)).max(1e-12);
    if !(params.alpha > 0.0 && params.alpha < params.alpha2 && params.alpha2 <= 0.5 * nu * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "weights need 0 < alpha < alpha2 <= nu/2 = {}",
            0.5 * nu
        )));
    }
    let norm = WeightedNorm::mixed(params.alpha, params.alpha2)?;
    let decomp = spectral_decompose(&canon.gamma0)?;
    let h = solver_spacing(params.h, &decomp, 2.0 * params.x_max);
    let half = (params.x_max / h).round() as usize;
    let npts = 2 * half + 1;
    let x_max: T = lit(params.x_max);
    let mut w = GridFunction::<T>::zeros(-x_max, x_max, npts, canon.n);
    let ht = w.h;
    let xs = w.xs();
    let homogeneous: Vec<DVector<T>> = xs.iter().map(|&x| w0c + &canon.j * w0c * x).collect();
    for (i, hv) in homogeneous.iter().enumerate() {
        let mut wi = DVector::zeros(canon.n);
        wi.rows_mut(0, c).copy_from(hv);
        w.set_node(i, &wi);
    }
    let mut diffs = Vec::new();
    let mut ratios = Vec::new();
    let mut iterations = 0;
    for it in 0..params.max_iter {
        iterations = it + 1;
        let mut nc = DMatrix::zeros(npts, c);
        let mut nh = DMatrix::zeros(npts, hd);
        for i in 0..npts {
            let ni = trunc.eval(&w.node(i));
            nc.set_row(i, &ni.rows(0, c).transpose());
            nh.set_row(i, &ni.rows(c, hd).transpose());
        }
        let center = duhamel(&canon.j, &xs, &nc, ht, half);
        let hyper = apply_resolvent(&decomp, &GridFunction::new(-x_max, ht, nh)?)?;
        let mut next = DMatrix::zeros(npts, canon.n);
        for i in 0..npts {
            let wc = &homogeneous[i] + center.row(i).transpose();
            next.view_mut((i, 0), (1, c)).copy_from(&wc.transpose());
            next.view_mut((i, c), (1, hd)).copy_from(&hyper.values.row(i));
        }
        let next = w.with_values(next);
        let diff = to_f64(weighted_norm(&next.with_values(&next.values - &w.values), &norm));
        w = next;
        if let Some(&prev) = diffs.last() {
            if prev > 0.0 {
                ratios.push(diff / prev);
            }
        }
        diffs.push(diff);
        if diff <= params.tol {
            break;
        }
        if diffs.len() >= 4 {
            let k = diffs.len();
            if diffs[k - 1] >= diffs[k - 2] && diffs[k - 2] >= diffs[k - 3] {
                if diff <= 1e-12 * to_f64(weighted_norm(&w, &norm)).max(1e-300) {
                    break;
                }
                return Err(Error::ContractionFailure(diff / diffs[k - 2]));
            }
        }
    }
    let contraction_factor = contraction_from(&diffs);
    if contraction_factor >= 1.0 {
        return Err(Error::ContractionFailure(contraction_factor));
    }
    let (_, wh0) = canon.split_w(&w.node(half));
    Ok(CenterSolveResult {
        trajectory: w,
        iterations,
        ratios,
        contraction_factor,
        graph_value: wh0,
    })
}

/// `(s, |Π_h w(0) - Ξ(s·dir)|)` rows and fitted slope.
pub fn center_agreement_sweep<T: Real>(
    canon: &CanonicalSystem<T>,
    taylor: &CenterGraphTaylor<T>,
    trunc: &TruncatedNonlinearity<T>,
    dir: &DVector<T>,
    scales: &[f64],
    params: &CenterParams,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let unit = dir / dir.norm();
    let mut rows = Vec::new();
    for &s in scales {
        let w0c = &unit * lit::<T>(s);
        let sol = solve_center_fixed_point(canon, &w0c, trunc, params)?;
        rows.push((s, to_f64((sol.graph_value - taylor.eval(&w0c)).norm())));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().cloned().unzip();
    Ok((loglog_slope(&xs, &ys).unwrap_or(f64::NAN), rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpApproximation {
    /// Fitted decay rate of `d(x) = |w_h - Ξ(w_c)|` on `[M, X]`
    /// (`+∞` when `d` stays at roundoff level).
    pub rate_fit: f64,
    pub nu_tilde: f64,
    pub pass: bool,
    pub max_distance: f64,
}

/// Checks that a trajectory approaches the Taylor center graph at rate
/// `ν̃` on `x ≥ m_start`, provided it stays within `radius` there.
pub fn exp_approximation_check<T: Real>(
    canon: &CanonicalSystem<T>,
    trajectory: &GridFunction<T>,
    taylor: &CenterGraphTaylor<T>,
    nu_tilde: f64,
    m_start: f64,
    radius: f64,
) -> Result<ExpApproximation> {
    let mut xs = Vec::new();
    let mut ds = Vec::new();
    let mut scale = 0.0f64;
    for i in 0..trajectory.len() {
        let x = to_f64(trajectory.x(i));
        let w = trajectory.node(i);
        scale = scale.max(to_f64(w.norm()));
        if x < m_start {
            continue;
        }
        if to_f64(w.norm()) > radius {
            return Err(Error::RadiusExceeded {
                norm: to_f64(w.norm()),
                radius,
            });
        }
        let (wc, wh) = canon.split_w(&w);
        xs.push(x);
        ds.push(to_f64((wh - taylor.eval(&wc)).norm()));
    }
    let max_distance = ds.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-13 * scale.max(1e-300);
    let (fx, fy): (Vec<f64>, Vec<f64>) = xs.iter().zip(&ds).filter(|(_, &d)| d > floor).map(|(&x, &d)| (x, d)).unzip();
    let rate_fit = if fx.len() < 4 {
        f64::INFINITY
    } else {
        exp_decay_rate(&fx, &fy).unwrap_or(f64::INFINITY)
    };
    Ok(ExpApproximation {
        rate_fit,
        nu_tilde,
        pass: rate_fit >= nu_tilde,
        max_distance,
    })
}

#[cfg(test)]
mod tests;
