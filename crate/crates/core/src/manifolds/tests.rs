use super::*;
use crate::canonical::reduce_model;
use crate::presets::preset_model;
use proptest::prelude::*;

fn canon(name: &str) -> CanonicalSystem<f64> {
    reduce_model(&preset_model::<f64>(name).unwrap()).unwrap()
}

fn stable_direction(c: &CanonicalSystem<f64>) -> DVector<f64> {
    let d = spectral_decompose(&c.gamma0).unwrap();
    let mut dir = DVector::zeros(c.hyper_dim());
    for &k in &d.stable {
        dir += d.vectors.column(k);
    }
    &dir / dir.norm()
}

#[test]
fn cutoff_shape() {
    assert_eq!(cutoff(0.0), 1.0);
    assert_eq!(cutoff(1.0), 1.0);
    assert_eq!(cutoff(2.0), 0.0);
    assert_eq!(cutoff(7.0), 0.0);
    assert!((cutoff(1.5f64) - 0.5).abs() < 1e-15);
    // C² seams: one-sided second differences vanish at the joints.
    let h = 1e-4;
    let d2 = |t: f64| (cutoff(t + h) - 2.0 * cutoff(t) + cutoff(t - h)) / (h * h);
    assert!(d2(1.0 + h).abs() < 1e-2);
    assert!(d2(2.0 - h).abs() < 1e-2);
}

proptest! {
    #[test]
    fn cutoff_monotone(a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(cutoff(hi) <= cutoff(lo));
        prop_assert!((0.0..=1.0).contains(&cutoff(a)));
    }
}

#[test]
fn truncation_exact_inside_and_zero_outside() {
    let c = canon("demo-m1");
    let t = truncate(&c, 0.1).unwrap();
    let w = DVector::from_fn(c.n, |i, _| ((i as f64) * 0.7).sin());
    let inside = &w / w.norm() * 0.09;
    assert!((t.eval(&inside) - t.full(&inside)).amax() < 1e-18);
    let outside = &w / w.norm() * 0.21;
    assert_eq!(t.eval(&outside).amax(), 0.0);
    // |N| ≤ C₀ε² needs C₀ at least the quadratic bound on the unit ball.
    assert!(t.bounds.0 > 0.0 && t.bounds.1 > 0.0 && t.bounds.2 > 0.0);
    assert!(t.bounds.0 <= 4.0 * quadratic_bound(&c));
    assert!(truncate(&c, 0.0).is_err());
}

#[test]
fn truncation_bounds_scale_invariant() {
    let c = canon("demo-m0");
    let a = truncate(&c, 0.02).unwrap().bounds;
    let b = truncate(&c, 0.05).unwrap().bounds;
    assert!((a.0 - b.0).abs() < 1e-6 * a.0);
    assert!((a.1 - b.1).abs() < 1e-3 * a.1);
}

#[test]
fn stable_zero_datum_gives_zero() {
    let c = canon("demo-m0");
    let p = StableParams::defaults(&c);
    let r = solve_stable(&c, &DVector::zeros(c.hyper_dim()), &p).unwrap();
    assert_eq!(r.trajectory.sup_norm(), 0.0);
}

#[test]
fn stable_linear_case_matches_semigroup() {
    let mut c = canon("demo-m0");
    c.qc = BilinearMap::zeros(c.qc.out_dim(), c.n);
    c.qh = BilinearMap::zeros(c.qh.out_dim(), c.n);
    let p = StableParams::defaults(&c);
    let v0 = stable_direction(&c) * 0.3;
    let r = solve_stable(&c, &v0, &p).unwrap();
    // Oracle: modal exponentials with e^{-x/α} on the positive-α modes.
    let d = spectral_decompose(&c.gamma0).unwrap();
    let coeff = d.vectors.clone().try_inverse().unwrap() * &v0;
    let mut err = 0.0f64;
    for i in (0..r.trajectory.len()).step_by(37) {
        let x = r.trajectory.x(i);
        let mut expect = DVector::zeros(c.hyper_dim());
        for &k in &d.stable {
            expect += d.vectors.column(k) * (coeff[k] * (-x / d.alphas[k]).exp());
        }
        let (wc, wh) = c.split_w(&r.trajectory.node(i));
        assert_eq!(wc.amax(), 0.0);
        err = err.max((wh - expect).amax());
    }
    assert!(err < 1e-12, "err {err}");
}

#[test]
fn stable_demo_run() {
    let c = canon("demo-m0");
    let p = StableParams::defaults(&c);
    let radius = stable_radius(&c, p.nu_tilde);
    let v0 = stable_direction(&c) * (radius * (1.0 - 1e-12));
    let r = solve_stable(&c, &v0, &p).unwrap();
    assert!(r.contraction_factor < 0.5);
    assert!(r.fitted_decay_rate >= p.nu_tilde);
    assert!(r.consistency < 1e-12);
    assert!(r.residual_l2 < 1e-6);
    assert!(r.trajectory.sup_norm() <= 2.0 * radius);
    let too_big = stable_direction(&c) * (radius * 1.5);
    assert!(matches!(solve_stable(&c, &too_big, &p), Err(Error::RadiusExceeded { .. })));
}

#[test]
fn stable_graph_is_tangent() {
    let c = canon("demo-m1");
    let p = StableParams::defaults(&c);
    let radius = stable_radius(&c, p.nu_tilde);
    let dir = stable_direction(&c);
    let scales: Vec<f64> = (0..4).map(|j| radius * 2f64.powi(-j)).collect();
    let (slope, rows) = stable_tangency_slope(&c, &dir, &scales, &p).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(slope > 1.9, "slope {slope}");
}

#[test]
fn stable_graph_lipschitz() {
    let c = canon("demo-m0");
    let p = StableParams::defaults(&c);
    let radius = stable_radius(&c, p.nu_tilde) * 0.5;
    let a = stable_direction(&c) * radius;
    let d = spectral_decompose(&c.gamma0).unwrap();
    let k = d.stable[0];
    let dv: DVector<f64> = d.vectors.column(k).into_owned();
    let b = &a + stable_component(&d, &dv) * (radius * 0.1);
    let ga = stable_graph_offset(&c, &stable_graph_eval(&c, &a, &p).unwrap()).unwrap();
    let gb = stable_graph_offset(&c, &stable_graph_eval(&c, &b, &p).unwrap()).unwrap();
    let lip = (&ga - &gb).norm() / (&a - &b).norm();
    assert!(lip < 0.1, "lip {lip}");
}

#[test]
fn taylor_on_flat_model_vanishes() {
    let mut c = canon("demo-m1");
    c.qc = BilinearMap::zeros(c.qc.out_dim(), c.n);
    c.qh = BilinearMap::zeros(c.qh.out_dim(), c.n);
    let t = center_taylor(&c, 4).unwrap();
    assert_eq!(t.xi.coeffs.amax(), 0.0);
}

#[test]
fn taylor_quadratic_term_without_jordan_block() {
    // m = 0: J = 0 and Q̃_c = 0, so Ξ₂(w_c) = Q̃_h((w_c, 0), (w_c, 0)).
    let c = canon("demo-m0");
    assert_eq!(c.j.amax(), 0.0);
    let t = center_taylor(&c, 2).unwrap();
    for s in [0.3, -0.7] {
        let wc = DVector::from_fn(c.center_dim(), |i, _| s * (1.0 + i as f64));
        let w = c.join_w(&wc, &DVector::zeros(c.hyper_dim()));
        let expect = c.qh.apply(&w, &w);
        assert!((t.eval(&wc) - expect).amax() < 1e-13);
    }
    assert!(center_taylor(&c, 1).is_err());
}

#[test]
fn taylor_defect_order() {
    for name in ["demo-m0", "demo-m1"] {
        let c = canon(name);
        let t = center_taylor(&c, 3).unwrap();
        assert_eq!(t.linear_part_max(), 0.0);
        assert!(t.residual_by_order.iter().all(|&(_, r)| r < 1e-12));
        let dir = DVector::from_element(c.center_dim(), 1.0);
        let (slope, _) = taylor_defect_sweep(&c, &t, &dir, &[0.04, 0.02, 0.01, 0.005]);
        assert!((slope - 4.0).abs() < 0.2, "{name}: slope {slope}");
    }
}

#[test]
fn center_fixed_point_zero_datum() {
    let c = canon("demo-m1");
    let trunc = truncate(&c, 0.02).unwrap();
    let p = CenterParams::defaults(&c);
    let r = solve_center_fixed_point(&c, &DVector::zeros(c.center_dim()), &trunc, &p).unwrap();
    assert_eq!(r.trajectory.sup_norm(), 0.0);
    assert_eq!(r.graph_value.amax(), 0.0);
}

#[test]
fn center_fixed_point_agrees_with_taylor() {
    let c = canon("demo-m0");
    let tay = center_taylor(&c, 3).unwrap();
    let trunc = truncate(&c, 0.02).unwrap();
    let p = CenterParams::defaults(&c);
    let dir = DVector::from_element(c.center_dim(), 1.0);
    let scales: Vec<f64> = (1..5).map(|j| 0.02 * 2f64.powi(-j)).collect();
    let (slope, rows) = center_agreement_sweep(&c, &tay, &trunc, &dir, &scales, &p).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(slope >= 3.0, "slope {slope}");
}

#[test]
fn stable_trajectory_approaches_center_graph() {
    let c = canon("demo-m1");
    let p = StableParams::defaults(&c);
    let radius = stable_radius(&c, p.nu_tilde);
    let r = solve_stable(&c, &(stable_direction(&c) * (radius * 0.5)), &p).unwrap();
    let tay = center_taylor(&c, 3).unwrap();
    let ex = exp_approximation_check(&c, &r.trajectory, &tay, p.nu_tilde, 0.0, 1.0).unwrap();
    assert!(ex.pass, "{ex:?}");
    assert!(matches!(
        exp_approximation_check(&c, &r.trajectory, &tay, p.nu_tilde, 0.0, 1e-9),
        Err(Error::RadiusExceeded { .. })
    ));
}

#[test]
fn duhamel_matches_polynomial_integral() {
    // J = [[0, 1], [0, 0]], f = (0, 1): ∫₀ˣ e^{J(x-θ)} f dθ = (x²/2, x).
    let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let h = 0.01;
    let xs: Vec<f64> = (0..201).map(|i| -1.0 + h * i as f64).collect();
    let f = DMatrix::from_fn(xs.len(), 2, |_, k| if k == 1 { 1.0 } else { 0.0 });
    let out = duhamel(&j, &xs, &f, h, 100);
    for (i, &x) in xs.iter().enumerate() {
        assert!((out[(i, 0)] - x * x / 2.0).abs() < 1e-12);
        assert!((out[(i, 1)] - x).abs() < 1e-12);
    }
    assert!(check_nilpotent(&DMatrix::<f64>::identity(2, 2)).is_err());
}

#[test]
fn stable_residual_is_second_order_with_center_coupling() {
    // m = 1 makes Q̃_c nonzero, so the center integral enters the residual.
    let c = canon("demo-m1");
    let mut p = StableParams::defaults(&c);
    let v0 = stable_direction(&c) * stable_radius(&c, p.nu_tilde);
    let mut res = Vec::new();
    for h in [0.01, 0.005] {
        p.h = h;
        res.push(solve_stable(&c, &v0, &p).unwrap().residual_l2);
    }
    assert!(res[0] < 1e-6, "{res:?}");
    assert!((res[0] / res[1]).log2() > 1.8, "{res:?}");
}
