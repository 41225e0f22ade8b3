//! Named model presets.

use crate::error::{Error, Result};
use crate::model::{build_synthetic_model, KineticModel, SyntheticSpec};
use crate::scalar::Real;

/// Largest `k` of the `sing-k` family.
pub const SING_MAX: u32 = 12;

/// Generator parameters `(r, n, spec)` of a named preset.
pub fn preset_spec(name: &str) -> Result<(usize, usize, SyntheticSpec)> {
    match name {
        "demo-m0" => Ok((
            2,
            8,
            SyntheticSpec {
                m: 0,
                velocities: vec![-1.0, -0.6, 0.45, 0.7, 1.0, -0.3, 0.35, -0.8],
                macro_modes: None,
                complement_sign: 0,
                micro_rates: (5.0, 7.5),
                curvature: 0.5,
                rotate: true,
                seed: 5,
            },
        )),
        "demo-m1" => Ok((
            2,
            10,
            SyntheticSpec {
                m: 1,
                velocities: vec![-1.0, -0.7, 0.6, 1.2, -0.4, 0.9, 0.5, -0.55, 0.8, -0.9],
                macro_modes: None,
                complement_sign: -1,
                micro_rates: (2.0, 3.0),
                curvature: 0.5,
                rotate: true,
                seed: 28,
            },
        )),
        "boltz-like" => Ok((
            5,
            24,
            SyntheticSpec {
                m: 0,
                velocities: (0..24)
                    .map(|i| {
                        let s = 0.25 + 0.05 * i as f64;
                        if i % 2 == 0 {
                            s
                        } else {
                            -s
                        }
                    })
                    .collect(),
                macro_modes: None,
                complement_sign: 0,
                micro_rates: (5.0, 10.0),
                curvature: 0.3,
                rotate: true,
                seed: 17,
            },
        )),
        _ => {
            let k: u32 = name
                .strip_prefix("sing-")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidModel(format!("unknown preset '{name}'")))?;
            if k > 30 {
                return Err(Error::InvalidModel(format!("sing-k needs k <= 30, got {k}")));
            }
            let small = 2f64.powi(-(k as i32));
            Ok((
                2,
                8,
                SyntheticSpec {
                    m: 0,
                    velocities: vec![1.5, -1.2, small, 1.1, -1.3, 1.25, -1.4, 1.05],
                    // V⊥ inside the span of modes 0 and 1, so the small speed
                    // stays in the micro block.
                    macro_modes: Some(vec![0, 1]),
                    complement_sign: 0,
                    micro_rates: (4.0, 6.0),
                    curvature: 0.5,
                    rotate: true,
                    seed: 23,
                },
            ))
        }
    }
}

pub fn preset_model<T: Real>(name: &str) -> Result<KineticModel<T>> {
    let (r, n, spec) = preset_spec(name)?;
    let mut model = build_synthetic_model(r, n, &spec)?;
    model.label = name.to_string();
    Ok(model)
}

/// Every preset name, with the `sing-k` family for `k = 0..=SING_MAX`.
pub fn preset_names() -> Vec<String> {
    let mut names = vec!["demo-m0".to_string(), "demo-m1".to_string(), "boltz-like".to_string()];
    names.extend((0..=SING_MAX).map(|k| format!("sing-{k}")));
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_hypotheses, macro_kernel_dim};

    #[test]
    fn names_resolve() {
        for name in preset_names() {
            let m = preset_model::<f64>(&name).unwrap();
            assert_eq!(m.label, name);
        }
        assert!(preset_model::<f64>("nope").is_err());
        assert!(preset_model::<f64>("sing-x").is_err());
    }

    #[test]
    fn shapes() {
        let b = preset_model::<f64>("boltz-like").unwrap();
        assert_eq!((b.r, b.n), (5, 24));
        assert_eq!(macro_kernel_dim(&preset_model::<f64>("demo-m1").unwrap(), 1e-10), 1);
        assert_eq!(macro_kernel_dim(&preset_model::<f64>("demo-m0").unwrap(), 1e-10), 0);
    }

    #[test]
    fn sing_family_min_speed() {
        for k in [0, 4, 8, 12] {
            let m = preset_model::<f64>(&format!("sing-{k}")).unwrap();
            let expect = 2f64.powi(-k);
            assert!((m.min_abs_eig() - expect).abs() < 1e-12 * expect.max(1e-3), "k={k}");
            assert!(check_hypotheses(&m, 1e-10).all_passed());
        }
    }
}
