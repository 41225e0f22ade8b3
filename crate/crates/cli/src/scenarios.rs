//! Scenario runners. Each returns verdicts and the files it wants written;
//! module errors become failed verdicts, precondition mismatches skips.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use kinshock::canonical::{canonical_to_text, manufactured_residual_check, reduce_model, reduction_report};
use kinshock::chapman_enskog::{characteristic_sweep, compute_characteristics, ChapmanEnskogData};
use kinshock::fit::loglog_slope;
use kinshock::grid::GridFunction;
use kinshock::linalg::{random_matrix, random_vector};
use kinshock::manifolds::{
    center_agreement_sweep, center_taylor, exp_approximation_check, solve_stable, stable_radius, stable_tangency_slope,
    taylor_defect_sweep, truncate, CenterParams, StableParams,
};
use kinshock::model::{check_hypotheses, model_to_text};
use kinshock::output::{fmt17, CsvTable};
use kinshock::presets::preset_model;
use kinshock::profiles::{compare_profiles, run_profile, zero_characteristic_index, ProfileOptions, ProfileSettings};
use kinshock::resolvent::{apply_resolvent, kernel_norm_probe, spectral_decompose, symbol_bounds};
use kinshock::{Canonical, CeData, Error, Model, Result, Spectrum};

use crate::config::{RunConfig, Scenario};

/// Spacings of the manufactured-solution check.
pub const MANUFACTURED_SPACINGS: [f64; 2] = [1e-2, 5e-3];
/// Largest half-gap for which the endstate gap is held to 10%.
pub const GAP_EPS_MAX: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    pub fn new(check: &str, pass: bool, detail: String) -> Self {
        Self {
            check: check.to_string(),
            status: if pass { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    pub fn skip(check: &str, detail: String) -> Self {
        Self {
            check: check.to_string(),
            status: Status::Skip,
            detail,
        }
    }

    /// A module error: preconditions skip, anything else fails.
    pub fn from_error(check: &str, e: &Error) -> Self {
        match e {
            Error::Precondition(_) => Self::skip(check, e.to_string()),
            _ => Self::new(check, false, e.to_string()),
        }
    }
}

fn upper(name: &str, value: f64, bound: f64) -> Verdict {
    Verdict::new(name, value <= bound, format!("{value:e} <= {bound:e}"))
}

fn lower(name: &str, value: f64, bound: f64) -> Verdict {
    Verdict::new(name, value >= bound, format!("{value:.6} >= {bound:.6}"))
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    /// `(file name, contents)` in emission order.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn push(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    fn record<T>(&mut self, check: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(x) => Some(x),
            Err(e) => {
                self.push(Verdict::from_error(check, &e));
                None
            }
        }
    }
}

/// A CSV with a string label column in front.
fn labelled_csv(header: &[&str], rows: &[(String, Vec<f64>)]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for (label, vals) in rows {
        s.push_str(label);
        for &v in vals {
            s.push(',');
            s.push_str(&fmt17(v));
        }
        s.push('\n');
    }
    s
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Worker count: `KINSHOCK_WORKERS` wins over the config; `0` means all cores.
pub fn worker_count(cfg: &RunConfig) -> std::result::Result<usize, String> {
    match std::env::var("KINSHOCK_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("KINSHOCK_WORKERS: expected a nonnegative integer, got '{v}'")),
        Err(_) => Ok(cfg.workers),
    }
}

pub fn run_scenario(scenario: Scenario, cfg: &RunConfig, model: &Model, workers: usize) -> Outcome {
    let mut out = Outcome::default();
    out.file("model.toml", model_to_text(model));
    match scenario {
        Scenario::CheckHypotheses => hypotheses(cfg, model, &mut out),
        Scenario::ChapmanEnskog => chapman_enskog(cfg, model, &mut out),
        Scenario::Reduce => reduce(cfg, model, &mut out),
        Scenario::ResolventProbe => resolvent_probe(cfg, model, &mut out),
        Scenario::StableManifold => stable_manifold(cfg, model, &mut out),
        Scenario::CenterTaylor => center(cfg, model, &mut out),
        Scenario::Profile => profile(cfg, model, &mut out),
        Scenario::Sweep => sweep(cfg, model, workers, &mut out),
    }
    out
}

fn hypotheses(cfg: &RunConfig, model: &Model, out: &mut Outcome) {
    let tol = cfg.tolerances.hypothesis;
    let rep = check_hypotheses(model, tol);
    let mut csv = String::from("check,passed,residual\n");
    for c in &rep.checks {
        let _ = writeln!(csv, "{},{},{}", c.name, c.passed, fmt17(c.residual));
        out.push(Verdict::new(&c.name, c.passed, format!("residual {:e}, tol {tol:e}", c.residual)));
    }
    let _ = writeln!(csv, "spectral_gap_delta,true,{}", fmt17(rep.spectral_gap_delta));
    let _ = writeln!(csv, "min_abs_eig_a,true,{}", fmt17(rep.min_abs_eig_a));
    out.file("hypotheses.csv", csv);
    if let Some(k) = model.label.strip_prefix("sing-").and_then(|s| s.parse::<i32>().ok()) {
        let target = 2f64.powi(-k);
        out.push(upper("min_abs_eig_a_matches_2^-k", (rep.min_abs_eig_a - target).abs(), 1e-12));
    }
}

fn ce_data(cfg: &RunConfig, model: &Model) -> Result<CeData> {
    let mut ced = ChapmanEnskogData::new(model.clone())?;
    ced.newton_tol = cfg.tolerances.newton;
    Ok(ced)
}

fn chapman_enskog(cfg: &RunConfig, model: &Model, out: &mut Outcome) {
    let Some(ced) = out.record("chapman_enskog_data", ce_data(cfg, model)) else {
        return;
    };
    let Some(p) = out.record("zero_characteristic", zero_characteristic_index(&ced)) else {
        return;
    };
    let mut diff = CsvTable::new((1..=ced.r()).map(|k| format!("d_{k}")));
    for i in 0..ced.r() {
        diff.push(ced.d_star.row(i).iter().copied().collect());
    }
    out.file("diffusion.csv", diff.to_csv());
    let asym = (&ced.d_star - ced.d_star.transpose()).amax();
    out.push(upper("diffusion_symmetric", asym, 1e-12 * ced.d_star.amax().max(1.0)));
    if let Some(c) = out.record("characteristics", compute_characteristics(&ced, &ced.u_bar_macro, p)) {
        out.push(Verdict::new(
            "viscosity_positive",
            c.delta > 0.0,
            format!("r·D*r = {:e} at field {p}", c.delta),
        ));
    }
    if let Some(t) = out.record("characteristic_sweep", characteristic_sweep(&ced, p, &cfg.chapman_enskog.sweep)) {
        out.push(Verdict::new("characteristic_sweep", true, format!("{} points", t.rows.len())));
        out.file("characteristics.csv", t.to_csv());
    }
}

fn reduce(cfg: &RunConfig, model: &Model, out: &mut Outcome) {
    let Some(canon) = out.record("reduce", reduce_model(model)) else {
        return;
    };
    let rep = reduction_report(&canon);
    out.file("canonical.toml", canonical_to_text(&canon));
    out.file("reduction.txt", rep.to_text());
    out.push(upper("round_trip", rep.round_trip_error, 1e-12));
    out.push(upper("gamma0_symmetric", rep.gamma0_asymmetry, 1e-12));
    let mut rng = rng_for(cfg.seed, 1);
    let dir: DVector<f64> = random_vector(model.n, &mut rng).normalize();
    let mut table = CsvTable::new(["h", "residual", "grid_error"]);
    let mut res = Vec::new();
    for &h in &MANUFACTURED_SPACINGS {
        let Some(c) = out.record("manufactured", manufactured_residual_check(model, &canon, &dir, 0.1, h)) else {
            return;
        };
        table.push(vec![c.h, c.residual, c.grid_error]);
        out.push(Verdict::new(
            &format!("manufactured_h={h}"),
            c.residual < 10.0 * c.grid_error,
            format!("residual {:e} < 10 x grid error {:e}", c.residual, c.grid_error),
        ));
        res.push(c.residual);
    }
    let order = (res[0] / res[1]).log2() / (MANUFACTURED_SPACINGS[0] / MANUFACTURED_SPACINGS[1]).log2();
    out.push(lower("manufactured_order", order, 1.8));
    out.file("manufactured.csv", table.to_csv());
}

/// `max_k ‖R g_k‖₂ / ‖g_k‖₂` over Gaussian samples on the default grid.
pub fn resolvent_l2_ratios(decomp: &Spectrum, nodes: usize, samples: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let h = decomp.default_spacing();
    let x0 = -h * (nodes / 2) as f64;
    (0..samples)
        .map(|_| {
            let g = GridFunction::new(x0, h, random_matrix(nodes, decomp.dim(), rng))?;
            let u = apply_resolvent(decomp, &g)?;
            Ok(u.l2() / g.l2())
        })
        .collect()
}

fn resolvent_probe(cfg: &RunConfig, model: &Model, out: &mut Outcome) {
    let rc = &cfg.resolvent;
    let mut models = vec![model.clone()];
    for name in &rc.family {
        if *name == model.label {
            continue;
        }
        match preset_model::<f64>(name) {
            Ok(m) => models.push(m),
            Err(e) => out.push(Verdict::from_error(name, &e)),
        }
    }
    let mut l2_rows = Vec::new();
    let mut sym_rows = Vec::new();
    let mut family_spectra = Vec::new();
    let (mut worst_l2, mut worst_s, mut worst_ds) = (0.0f64, 0.0f64, 0.0f64);
    for (idx, m) in models.iter().enumerate() {
        let decomp = reduce_model(m).and_then(|c| spectral_decompose(&c.gamma0));
        let Some(decomp) = out.record(&format!("spectrum_{}", m.label), decomp) else {
            continue;
        };
        let mut rng = rng_for(cfg.seed, 100 + idx as u64);
        let Some(ratios) = out.record(
            &format!("l2_{}", m.label),
            resolvent_l2_ratios(&decomp, rc.nodes, rc.samples, &mut rng),
        ) else {
            continue;
        };
        for (k, r) in ratios.iter().enumerate() {
            l2_rows.push((m.label.clone(), vec![k as f64, *r]));
            worst_l2 = worst_l2.max(*r);
        }
        for (w, s, ds) in symbol_bounds(&decomp, &rc.omegas) {
            sym_rows.push((m.label.clone(), vec![w, s, ds]));
            worst_s = worst_s.max(s);
            worst_ds = worst_ds.max(ds);
        }
        if idx > 0 || rc.family.contains(&m.label) {
            family_spectra.push(decomp);
        }
    }
    out.file("resolvent_l2.csv", labelled_csv(&["model", "sample", "ratio"], &l2_rows));
    out.file("symbol.csv", labelled_csv(&["model", "omega", "symbol", "weighted_derivative"], &sym_rows));
    out.push(upper("l2_contraction", worst_l2, 1.01));
    out.push(upper("symbol_sup", worst_s, 1.0 + 1e-12));
    out.push(upper("symbol_derivative_sup", worst_ds, 1.0 + 1e-6));
    if family_spectra.is_empty() {
        out.push(Verdict::skip("kernel_probe_slope", "no family configured".into()));
        return;
    }
    match pooled_kernel_probe(&family_spectra, &rc.thetas) {
        Ok((slope, rows)) => {
            let mut t = CsvTable::new(["theta", "kernel_norm"]);
            for (a, b) in rows {
                t.push(vec![a, b]);
            }
            out.file("kernel_probe.csv", t.to_csv());
            out.push(Verdict::new(
                "kernel_probe_slope",
                (-1.1..=-0.9).contains(&slope),
                format!("slope {slope:.4} in [-1.1, -0.9]"),
            ));
        }
        Err(e) => out.push(Verdict::from_error("kernel_probe_slope", &e)),
    }
}

/// Kernel probe over the union of the spectra and its log-log slope.
pub fn pooled_kernel_probe(spectra: &[Spectrum], thetas: &[f64]) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut pooled = vec![0.0f64; thetas.len()];
    for d in spectra {
        for (k, (_, v)) in kernel_norm_probe(d, thetas)?.into_iter().enumerate() {
            pooled[k] = pooled[k].max(v);
        }
    }
    let slope = loglog_slope(thetas, &pooled).unwrap_or(f64::NAN);
    Ok((slope, thetas.iter().copied().zip(pooled).collect()))
}

fn stable_params(cfg: &RunConfig, canon: &Canonical) -> StableParams {
    let mut p = StableParams::defaults(canon);
    let s = &cfg.stable;
    if s.x_max > 0.0 {
        p.x_max = s.x_max;
    }
    p.h = s.spacing;
    p.max_iter = s.max_iter;
    p.tol = s.tol;
    p
}

/// Unit vector in the stable eigenspace of `Γ₀`, drawn from the seed.
pub fn stable_direction(decomp: &Spectrum, seed: u64) -> Option<DVector<f64>> {
    if decomp.stable.is_empty() {
        return None;
    }
    let mut rng = rng_for(seed, 2);
    let v: DVector<f64> = decomp.stable_projector() * random_vector::<f64, _>(decomp.dim(), &mut rng);
    Some(v.normalize())
}

fn trajectory_csv(traj: &GridFunction<f64>) -> String {
    let mut t = CsvTable::new(std::iter::once("x".to_string()).chain((0..traj.dim()).map(|k| format!("w_{k}"))));
    for i in 0..traj.len() {
        let mut row = vec![traj.x(i)];
        row.extend(traj.node(i).iter());
        t.push(row);
    }
    t.to_csv()
}

fn stable_manifold(cfg: &RunConfig, model: &Model, out: &mut Outcome) {
    let Some(canon) = out.record("reduce", reduce_model(model)) else {
        return;
    };
    let Some(decomp) = out.record("spectrum", spectral_decompose(&canon.gamma0)) else {
        return;
    };
    let Some(dir) = stable_direction(&decomp, cfg.seed) else {
        out.push(Verdict::skip("stable_manifold", "Γ₀ has no stable modes".into()));
        return;
    };
    let p = stable_params(cfg, &canon);
    let radius = stable_radius(&canon, p.nu_tilde);
    let v0 = &dir * (radius * cfg.stable.radius_fraction);
    let Some(r) = out.record("solve_stable", solve_stable(&canon, &v0, &p)) else {
        return;
    };
    out.file("stable_trajectory.csv", trajectory_csv(&r.trajectory));
    out.push(upper("contraction_factor", r.contraction_factor, 0.5));
    out.push(lower("decay_rate", r.fitted_decay_rate, p.nu_tilde));
    out.push(upper("steady_residual_l2", r.residual_l2, 1e-6));
    out.push(upper("datum_consistency", r.consistency, 1e-10));
    let over = &dir * (radius * 1.5);
    out.push(Verdict::new(
        "radius_guard",
        matches!(solve_stable(&canon, &over, &p), Err(Error::RadiusExceeded { .. })),
        "datum at 1.5 x radius is rejected".into(),
    ));
    let scales: Vec<f64> = (0..cfg.stable.tangency_levels)
        .map(|j| radius * cfg.stable.radius_fraction * 2f64.powi(-(j as i32)))
        .collect();
    if let Some((slope, rows)) = out.record("tangency", stable_tangency_slope(&canon, &dir, &scales, &p)) {
        let mut t = CsvTable::new(["datum_norm", "graph_offset"]);
        for (a, b) in rows {
            t.push(vec![a, b]);
        }
        out.file("stable_tangency.csv", t.to_csv());
        out.push(lower("tangency_slope", slope, 1.8));
    }
}

fn center(cfg: &RunConfig, model: &Model, out: &mut Outcome) {
    let Some(canon) = out.record("reduce", reduce_model(model)) else {
        return;
    };
    let k = cfg.center.order;
    let Some(tay) = out.record("center_taylor", center_taylor(&canon, k)) else {
        return;
    };
    let worst = tay.residual_by_order.iter().map(|&(_, r)| r).fold(0.0, f64::max);
    out.push(upper("matching_equations", worst, 1e-10));
    let mut rng = rng_for(cfg.seed, 3);
    let dir: DVector<f64> = random_vector::<f64, _>(canon.center_dim(), &mut rng).normalize();
    let (slope, rows) = taylor_defect_sweep(&canon, &tay, &dir, &cfg.center.defect_scales);
    let mut t = CsvTable::new(["scale", "defect"]);
    for (a, b) in rows {
        t.push(vec![a, b]);
    }
    out.file("taylor_defect.csv", t.to_csv());
    out.push(lower("taylor_defect_slope", slope, k as f64 + 0.7));

    let params = CenterParams::defaults(&canon);
    let mut agree = CsvTable::new(["eps", "scale", "distance"]);
    for &eps in &cfg.center.eps {
        let Some(trunc) = out.record("truncate", truncate(&canon, eps)) else {
            continue;
        };
        let scales: Vec<f64> = (1..=cfg.center.levels).map(|j| eps * 2f64.powi(-(j as i32))).collect();
        let name = format!("center_agreement_slope_eps={eps}");
        if let Some((slope, rows)) = out.record(&name, center_agreement_sweep(&canon, &tay, &trunc, &dir, &scales, &params)) {
            for (s, d) in rows {
                agree.push(vec![eps, s, d]);
            }
            out.push(lower(&name, slope, k as f64 + 0.7));
        }
    }
    out.file("center_agreement.csv", agree.to_csv());

    let Some(decomp) = out.record("spectrum", spectral_decompose(&canon.gamma0)) else {
        return;
    };
    let Some(sdir) = stable_direction(&decomp, cfg.seed) else {
        out.push(Verdict::skip("exp_approximation", "Γ₀ has no stable modes".into()));
        return;
    };
    let p = stable_params(cfg, &canon);
    let radius = stable_radius(&canon, p.nu_tilde);
    let traj = solve_stable(&canon, &(&sdir * (0.5 * radius)), &p)
        .and_then(|r| exp_approximation_check(&canon, &r.trajectory, &tay, p.nu_tilde, 0.0, 2.0 * radius));
    if let Some(ex) = out.record("exp_approximation", traj) {
        out.push(Verdict::new(
            "exp_approximation",
            ex.pass,
            format!("rate {:.6} >= {:.6}", ex.rate_fit, ex.nu_tilde),
        ));
    }
}

fn profile_settings(cfg: &RunConfig) -> ProfileSettings {
    ProfileSettings {
        widths: cfg.profile.widths,
        nodes: cfg.profile.nodes,
        options: ProfileOptions {
            rtol: cfg.tolerances.ode_rtol,
            ..ProfileOptions::default()
        },
    }
}

struct ProfileInputs {
    canon: Canonical,
    ced: CeData,
    taylor: kinshock::Taylor,
}

fn profile_inputs(cfg: &RunConfig, model: &Model, out: &mut Outcome) -> Option<ProfileInputs> {
    let canon = out.record("reduce", reduce_model(model))?;
    if canon.m != 1 {
        out.push(Verdict::skip(
            "profile",
            format!("needs a simple characteristic zero (m = 1), model has m = {}", canon.m),
        ));
        return None;
    }
    let ced = out.record("chapman_enskog_data", ce_data(cfg, model))?;
    let taylor = out.record("center_taylor", center_taylor(&canon, cfg.profile.taylor_order))?;
    Some(ProfileInputs { canon, ced, taylor })
}

fn columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |k| format!("{prefix}_{k}"))
}

fn profile(cfg: &RunConfig, model: &Model, out: &mut Outcome) {
    let Some(inp) = profile_inputs(cfg, model, out) else {
        return;
    };
    let eps = cfg.profile.eps;
    let run = run_profile(&inp.canon, &inp.ced, &inp.taylor, eps, &profile_settings(cfg));
    let Some(run) = out.record("profile", run) else {
        return;
    };
    let c = &run.comparison;
    let (r, nv) = (model.r, model.n - model.r);
    let header: Vec<String> = std::iter::once("x".to_string())
        .chain(columns("u_rel", r))
        .chain(columns("u_ce", r))
        .chain(columns("v_rel", nv))
        .chain(columns("vstar_ce", nv))
        .chain(["eta_bar".to_string(), "lambda_rel".to_string(), "lambda_ce".to_string()])
        .collect();
    let mut t = CsvTable::new(header);
    for i in 0..run.rel.xs.len() {
        let mut row = vec![run.rel.xs[i]];
        row.extend(run.rel.u.node(i).iter());
        row.extend(run.ce.u.node(i).iter());
        row.extend(run.rel.v.node(i).iter());
        row.extend(run.ce.v_star.node(i).iter());
        row.extend([run.eta_bar[i], run.lambda_rel[i], run.lambda_ce[i]]);
        t.push(row);
    }
    out.file("profile.csv", t.to_csv());
    out.push(upper("delta_agreement", c.delta_mismatch, 1e-10));
    if eps <= GAP_EPS_MAX {
        out.push(upper("rh_gap", c.gap_rel_error, 0.1));
    } else {
        out.push(Verdict::skip("rh_gap", format!("held to 10% only for eps <= {GAP_EPS_MAX}")));
    }
    out.push(Verdict::new("lambda_decreasing_rel", c.lambda_rel_decreasing, "every node".into()));
    out.push(Verdict::new("lambda_decreasing_ce", c.lambda_ce_decreasing, "every node".into()));
    out.push(upper("burgers_residual", c.burgers_residual, 1e-12));
    out.push(upper("conservation_rel", c.conservation_rel, 1e-7 * c.q_norm));
    out.push(upper("conservation_ce", c.conservation_ce, 1e-7 * c.q_norm));
}

fn sweep(cfg: &RunConfig, model: &Model, workers: usize, out: &mut Outcome) {
    let Some(inp) = profile_inputs(cfg, model, out) else {
        return;
    };
    let settings = profile_settings(cfg);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            out.push(Verdict::new("worker_pool", false, e.to_string()));
            return;
        }
    };
    // Indexed collect keeps the ε order regardless of completion order.
    let results: Vec<Result<_>> = pool.install(|| {
        cfg.profile
            .sweep
            .par_iter()
            .map(|&eps| run_profile(&inp.canon, &inp.ced, &inp.taylor, eps, &settings).map(|r| r.comparison))
            .collect()
    });
    let mut rows = Vec::new();
    for (eps, r) in cfg.profile.sweep.iter().zip(results) {
        if let Some(c) = out.record(&format!("profile_eps={eps}"), r) {
            rows.push(c);
        }
    }
    if rows.len() != cfg.profile.sweep.len() {
        return;
    }
    let jn = rows[0].u_diff.len();
    let header: Vec<String> = ["eps", "mu_hat"]
        .iter()
        .map(|s| s.to_string())
        .chain(columns("u_diff", jn))
        .chain(columns("v_diff", jn))
        .chain(
            [
                "endstate_approach",
                "endstate_gap",
                "gap_rel_error",
                "burgers_residual",
                "conservation_rel",
                "conservation_ce",
                "q_norm",
                "blowup_forcing",
                "remainder_bound",
                "delta_mismatch",
            ]
            .iter()
            .map(|s| s.to_string()),
        )
        .collect();
    let mut t = CsvTable::new(header);
    for c in &rows {
        let mut row = vec![c.eps, c.mu_hat];
        row.extend(&c.u_diff);
        row.extend(&c.v_diff);
        row.extend([
            c.endstate_approach,
            c.endstate_gap,
            c.gap_rel_error,
            c.burgers_residual,
            c.conservation_rel,
            c.conservation_ce,
            c.q_norm,
            c.blowup_forcing,
            c.remainder_bound,
            c.delta_mismatch,
        ]);
        t.push(row);
    }
    out.file("sweep.csv", t.to_csv());
    let rep = compare_profiles(rows, cfg.tolerances.order_band);
    let mut orders = String::from("quantity,j,order,threshold,pass\n");
    for o in &rep.orders {
        let _ = writeln!(orders, "{},{},{},{},{}", o.quantity, o.j, fmt17(o.order), fmt17(o.threshold), o.pass);
        out.push(Verdict::new(
            &format!("order_{}_j{}", o.quantity, o.j),
            o.pass,
            format!("{:.4} >= {:.4}", o.order, o.threshold),
        ));
    }
    out.file("orders.csv", orders);
    let all = |f: &dyn Fn(&kinshock::profiles::ProfileComparison) -> bool| rep.rows.iter().all(f);
    out.push(Verdict::new(
        "lambda_decreasing",
        all(&|c| c.lambda_rel_decreasing && c.lambda_ce_decreasing),
        "both profiles, every node, every eps".into(),
    ));
    let burgers = rep.rows.iter().map(|c| c.burgers_residual).fold(0.0, f64::max);
    out.push(upper("burgers_residual", burgers, 1e-12));
    let cons = rep
        .rows
        .iter()
        .map(|c| c.conservation_rel.max(c.conservation_ce) / c.q_norm)
        .fold(0.0, f64::max);
    out.push(upper("conservation_relative", cons, 1e-7));
    let delta = rep.rows.iter().map(|c| c.delta_mismatch).fold(0.0, f64::max);
    out.push(upper("delta_agreement", delta, 1e-10));
    let gap = rep
        .rows
        .iter()
        .filter(|c| c.eps <= GAP_EPS_MAX)
        .map(|c| c.gap_rel_error)
        .fold(0.0, f64::max);
    out.push(upper("rh_gap", gap, 0.1));
}
