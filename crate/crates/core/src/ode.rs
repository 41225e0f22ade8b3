//! Adaptive Dormand-Prince 5(4) integration with dense output.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; `0` picks one from the tolerances.
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 0.0,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution<T: Real> {
    pub ts: Vec<T>,
    pub ys: Vec<DVector<T>>,
    pub steps: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its continuous extension.
struct Step<T: Real> {
    t0: T,
    h: T,
    rc: [DVector<T>; 5],
}

impl<T: Real> Step<T> {
    fn eval(&self, t: T) -> DVector<T> {
        let th = (t - self.t0) / self.h;
        let th1 = T::one() - th;
        let [r1, r2, r3, r4, r5] = &self.rc;
        r1 + (r2 + (r3 + (r4 + r5 * th1) * th) * th1) * th
    }
}

/// Integrator state; advances one adaptive step at a time.
struct Stepper<'a, T: Real, F: FnMut(T, &DVector<T>) -> DVector<T>> {
    f: F,
    t: T,
    y: DVector<T>,
    k1: DVector<T>,
    h: T,
    dir: T,
    opts: &'a OdeOptions,
    steps: usize,
    rejected: usize,
}

impl<'a, T: Real, F: FnMut(T, &DVector<T>) -> DVector<T>> Stepper<'a, T, F> {
    fn new(mut f: F, t0: T, y0: DVector<T>, dir: T, opts: &'a OdeOptions) -> Self {
        let k1 = f(t0, &y0);
        let h = if opts.h_init > 0.0 {
            lit(opts.h_init)
        } else {
            let scale = y0.iter().fold(T::zero(), |a, v| a.max(v.abs())) * lit(opts.rtol) + lit(opts.atol);
            let d = k1.amax().max(T::eps() * T::eps());
            (scale / d).powf(lit(0.2)).min(lit(opts.h_max)).max(lit(1e-12))
        };
        Self {
            f,
            t: t0,
            y: y0,
            k1,
            h,
            dir,
            opts,
            steps: 0,
            rejected: 0,
        }
    }

    /// Takes one accepted step, not passing `t_stop`.
    fn step(&mut self, t_stop: T) -> Result<Step<T>> {
        loop {
            if self.steps + self.rejected >= self.opts.max_steps {
                return Err(Error::NonConvergence {
                    iterations: self.steps,
                    residual: to_f64(self.h),
                });
            }
            let remaining = (t_stop - self.t) * self.dir;
            let h = self.h.min(remaining).min(lit(self.opts.h_max));
            let hs = h * self.dir;
            let mut k: Vec<DVector<T>> = Vec::with_capacity(7);
            k.push(self.k1.clone());
            for s in 1..7 {
                let mut ys = self.y.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        ys.axpy(hs * lit(a), kj, T::one());
                    }
                }
                k.push((self.f)(self.t + hs * lit(C[s]), &ys));
            }
            // Stage 7 is evaluated at the 5th-order solution (FSAL).
            let mut y_new = self.y.clone();
            for (j, kj) in k.iter().take(6).enumerate() {
                if A[6][j] != 0.0 {
                    y_new.axpy(hs * lit(A[6][j]), kj, T::one());
                }
            }
            let mut err_sq = T::zero();
            for i in 0..self.y.len() {
                let mut e = T::zero();
                for (j, kj) in k.iter().enumerate() {
                    e += kj[i] * lit(E[j]);
                }
                e *= hs;
                let sc = lit::<T>(self.opts.atol) + lit::<T>(self.opts.rtol) * self.y[i].abs().max(y_new[i].abs());
                err_sq += (e / sc) * (e / sc);
            }
            let err = if self.y.is_empty() {
                T::zero()
            } else {
                (err_sq / lit(self.y.len() as f64)).sqrt()
            };
            if !err.is_finite() {
                self.h *= lit(0.2);
                self.rejected += 1;
                continue;
            }
            let fac = if err == T::zero() {
                lit(5.0)
            } else {
                (lit::<T>(0.9) * err.powf(lit(-0.2))).min(lit(5.0)).max(lit(0.2))
            };
            if err <= T::one() {
                let ydiff = &y_new - &self.y;
                let bspl = &k[0] * hs - &ydiff;
                let rc4 = &ydiff - &k[6] * hs - &bspl;
                let mut rc5 = DVector::zeros(self.y.len());
                for (j, kj) in k.iter().enumerate() {
                    if D[j] != 0.0 {
                        rc5.axpy(hs * lit(D[j]), kj, T::one());
                    }
                }
                let step = Step {
                    t0: self.t,
                    h: hs,
                    rc: [self.y.clone(), ydiff, bspl, rc4, rc5],
                };
                self.t += hs;
                self.y = y_new;
                self.k1 = k.swap_remove(6);
                self.steps += 1;
                self.h = h * fac;
                return Ok(step);
            }
            self.rejected += 1;
            self.h = h * fac.min(T::one());
            if self.h < lit::<T>(1e-14).max(T::eps() * lit(16.0)) * (T::one() + self.t.abs()) {
                return Err(Error::NonConvergence {
                    iterations: self.steps,
                    residual: to_f64(err),
                });
            }
        }
    }
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` and reports the solution at
/// the monotone output times `t_out` (increasing or decreasing from `t0`).
pub fn integrate<T: Real>(
    f: impl FnMut(T, &DVector<T>) -> DVector<T>,
    t0: T,
    y0: &DVector<T>,
    t_out: &[T],
    opts: &OdeOptions,
) -> Result<OdeSolution<T>> {
    let Some(&t_end) = t_out.last() else {
        return Ok(OdeSolution {
            ts: vec![],
            ys: vec![],
            steps: 0,
            rejected: 0,
        });
    };
    let dir = if t_end >= t0 { T::one() } else { -T::one() };
    if t_out.windows(2).any(|w| (w[1] - w[0]) * dir < T::zero()) || (t_out[0] - t0) * dir < T::zero() {
        return Err(Error::Precondition("output times must be monotone away from t0".into()));
    }
    let mut st = Stepper::new(f, t0, y0.clone(), dir, opts);
    let mut ys = Vec::with_capacity(t_out.len());
    let mut idx = 0;
    while idx < t_out.len() && t_out[idx] == t0 {
        ys.push(y0.clone());
        idx += 1;
    }
    while idx < t_out.len() {
        let step = st.step(t_end)?;
        while idx < t_out.len() && (t_out[idx] - st.t) * dir <= T::zero() {
            ys.push(if t_out[idx] == st.t { st.y.clone() } else { step.eval(t_out[idx]) });
            idx += 1;
        }
    }
    Ok(OdeSolution {
        ts: t_out.to_vec(),
        ys,
        steps: st.steps,
        rejected: st.rejected,
    })
}

/// Integrates until the scalar `event(y)` changes sign, and locates the
/// crossing on the dense output by bisection. Returns `None` if `t_max` is
/// reached first.
pub fn integrate_to_event<T: Real>(
    f: impl FnMut(T, &DVector<T>) -> DVector<T>,
    t0: T,
    y0: &DVector<T>,
    t_max: T,
    mut event: impl FnMut(&DVector<T>) -> T,
    opts: &OdeOptions,
) -> Result<Option<(T, DVector<T>)>> {
    let dir = if t_max >= t0 { T::one() } else { -T::one() };
    let mut st = Stepper::new(f, t0, y0.clone(), dir, opts);
    let mut g_old = event(y0);
    while (t_max - st.t) * dir > T::zero() {
        let step = st.step(t_max)?;
        let g_new = event(&st.y);
        if g_old == T::zero() {
            return Ok(Some((step.t0, step.eval(step.t0))));
        }
        if g_old * g_new <= T::zero() {
            let (mut lo, mut hi) = (step.t0, st.t);
            for _ in 0..200 {
                let mid = (lo + hi) * lit(0.5);
                if mid == lo || mid == hi {
                    break;
                }
                if event(&step.eval(mid)) * g_old > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = (lo + hi) * lit(0.5);
            return Ok(Some((t, step.eval(t))));
        }
        g_old = g_new;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> OdeOptions {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            ..OdeOptions::default()
        }
    }

    #[test]
    fn exponential_and_dense_output() {
        let ts: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let sol = integrate(|_, y: &DVector<f64>| -y * 0.7, 0.0, &DVector::from_element(1, 2.0), &ts, &tight()).unwrap();
        for (t, y) in sol.ts.iter().zip(&sol.ys) {
            assert!((y[0] - 2.0 * (-0.7 * t).exp()).abs() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let f = |_: f64, y: &DVector<f64>| DVector::from_vec(vec![y[1], -y[0]]);
        let ts: Vec<f64> = (0..=40).map(|k| -(k as f64) * 0.25).collect();
        let sol = integrate(f, 0.0, &DVector::from_vec(vec![1.0, 0.0]), &ts, &tight()).unwrap();
        for (t, y) in sol.ts.iter().zip(&sol.ys) {
            assert!((y[0] - t.cos()).abs() < 1e-10);
            assert!((y[1] + t.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn fifth_order_convergence_at_fixed_step() {
        // With tolerances loose enough never to reject, halving h_max should
        // reduce the error by about 2^5.
        let run = |h: f64| {
            let opts = OdeOptions {
                rtol: 1.0,
                atol: 1.0,
                h_init: h,
                h_max: h,
                max_steps: 100_000,
            };
            let sol = integrate(|t: f64, y: &DVector<f64>| DVector::from_element(1, t.cos() * y[0]), 0.0, &DVector::from_element(1, 1.0), &[2.0], &opts).unwrap();
            (sol.ys[0][0] - 2.0f64.sin().exp()).abs()
        };
        let order = (run(0.1) / run(0.05)).log2();
        assert!(order > 4.5, "order {order}");
    }

    #[test]
    fn event_location() {
        // y' = 1, crossing y = 0.3 at t = 0.3 - y0.
        let hit = integrate_to_event(|_, _: &DVector<f64>| DVector::from_element(1, 1.0), 0.0, &DVector::from_element(1, -1.0), 5.0, |y| y[0] - 0.3, &tight())
            .unwrap()
            .unwrap();
        assert!((hit.0 - 1.3).abs() < 1e-12);
        let miss = integrate_to_event(|_, _: &DVector<f64>| DVector::from_element(1, 1.0), 0.0, &DVector::from_element(1, -1.0), 1.0, |y| y[0] - 0.3, &tight()).unwrap();
        assert!(miss.is_none());
    }

    #[test]
    fn rejects_non_monotone_outputs() {
        let r = integrate(|_, y: &DVector<f64>| y.clone(), 0.0, &DVector::from_element(1, 1.0), &[1.0, 0.5], &tight());
        assert!(r.is_err());
    }
}
