//! Run configuration: a TOML document with a fixed schema. Unknown keys are
//! rejected and every violated constraint is reported at once.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use kinshock::model::{build_synthetic_model, model_from_text, SyntheticSpec};
use kinshock::presets::{preset_model, SING_MAX};
use kinshock::{Error, Model, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    CheckHypotheses,
    ChapmanEnskog,
    Reduce,
    ResolventProbe,
    StableManifold,
    CenterTaylor,
    Profile,
    Sweep,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::CheckHypotheses,
        Scenario::ChapmanEnskog,
        Scenario::Reduce,
        Scenario::ResolventProbe,
        Scenario::StableManifold,
        Scenario::CenterTaylor,
        Scenario::Profile,
        Scenario::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CheckHypotheses => "check-hypotheses",
            Scenario::ChapmanEnskog => "chapman-enskog",
            Scenario::Reduce => "reduce",
            Scenario::ResolventProbe => "resolvent-probe",
            Scenario::StableManifold => "stable-manifold",
            Scenario::CenterTaylor => "center-taylor",
            Scenario::Profile => "profile",
            Scenario::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown scenario '{s}'")))
    }
}

/// Synthetic generator parameters given inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineModel {
    pub r: usize,
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    pub velocities: Vec<f64>,
    #[serde(default)]
    pub macro_modes: Option<Vec<usize>>,
    #[serde(default)]
    pub complement_sign: i8,
    #[serde(default = "default_rates")]
    pub micro_rates: [f64; 2],
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    #[serde(default = "yes")]
    pub rotate: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_rates() -> [f64; 2] {
    [4.0, 6.0]
}
fn default_curvature() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}

/// Exactly one of `preset`, `file`, `inline`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<InlineModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub hypothesis: f64,
    pub newton: f64,
    pub ode_rtol: f64,
    /// Relative pass band for fitted orders.
    pub order_band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hypothesis: 1e-10,
            newton: 1e-12,
            ode_rtol: 1e-12,
            order_band: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChapmanEnskogConfig {
    /// Offsets `s` along `r̄` for the characteristic sweep.
    pub sweep: Vec<f64>,
}

impl Default for ChapmanEnskogConfig {
    fn default() -> Self {
        Self {
            sweep: (-4..=4).map(|i| 0.025 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventConfig {
    pub thetas: Vec<f64>,
    pub omegas: Vec<f64>,
    /// Random right-hand sides for the L² bound.
    pub samples: usize,
    /// Grid nodes for the L² bound; the spacing is the resolvent default.
    pub nodes: usize,
    /// Presets probed alongside the configured model; the kernel probe runs
    /// on their pooled spectra.
    pub family: Vec<String>,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self {
            thetas: (0..=24).map(|j| 2f64.powf(-(j as f64) / 2.0)).collect(),
            omegas: (-60..=60).map(|j| (j as f64 / 4.0).sinh()).collect(),
            samples: 50,
            nodes: 4001,
            family: (0..=SING_MAX).map(|k| format!("sing-{k}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StableConfig {
    /// `|v₀|` as a fraction of the admissible radius.
    pub radius_fraction: f64,
    /// `0` uses the default `25/ν̃`.
    pub x_max: f64,
    /// `0` uses the resolvent default spacing.
    pub spacing: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Halvings of `|v₀|` in the tangency sweep.
    pub tangency_levels: usize,
}

impl Default for StableConfig {
    fn default() -> Self {
        Self {
            radius_fraction: 1.0 - 1e-12,
            x_max: 0.0,
            spacing: 0.0,
            max_iter: 60,
            tol: 1e-14,
            tangency_levels: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CenterConfig {
    pub order: usize,
    /// Truncation radii for the fixed-point cross-check.
    pub eps: Vec<f64>,
    /// Halvings of `|w_c|` below `ε/2` in the agreement sweep.
    pub levels: usize,
    /// Amplitudes of the Taylor defect sweep.
    pub defect_scales: Vec<f64>,
}

impl Default for CenterConfig {
    fn default() -> Self {
        Self {
            order: 3,
            eps: vec![0.02],
            levels: 4,
            defect_scales: vec![0.04, 0.02, 0.01, 0.005, 0.0025],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    /// Half-gap of the single-profile scenario.
    pub eps: f64,
    /// Half-gaps of the sweep.
    pub sweep: Vec<f64>,
    pub taylor_order: usize,
    /// Grid half-width in Burgers widths.
    pub widths: f64,
    pub nodes: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            eps: 0.08,
            sweep: vec![0.02, 0.04, 0.08, 0.16],
            taylor_order: 3,
            widths: 8.0,
            nodes: 801,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When set, the command line must name the same scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for sweeps; `0` uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    pub model: ModelSource,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub chapman_enskog: ChapmanEnskogConfig,
    #[serde(default)]
    pub resolvent: ResolventConfig,
    #[serde(default)]
    pub stable: StableConfig,
    #[serde(default)]
    pub center: CenterConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("kinshock-out")
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    // Model files are resolved relative to the config file.
    if let (Some(file), Some(dir)) = (cfg.model.file.as_mut(), path.parent()) {
        if file.is_relative() {
            *file = dir.join(&*file);
        }
    }
    Ok(cfg)
}

fn positive(errs: &mut Vec<String>, key: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        errs.push(format!("{key}: must be positive and finite, got {x}"));
    }
}

fn all_positive(errs: &mut Vec<String>, key: &str, xs: &[f64]) {
    if xs.is_empty() {
        errs.push(format!("{key}: must not be empty"));
    }
    for (i, &x) in xs.iter().enumerate() {
        positive(errs, &format!("{key}[{i}]"), x);
    }
}

impl RunConfig {
    /// Defaults for every section around the given preset.
    pub fn for_preset(name: &str) -> Self {
        Self {
            scenario: None,
            seed: 0,
            workers: 0,
            out_dir: default_out(),
            model: ModelSource {
                preset: Some(name.to_string()),
                ..ModelSource::default()
            },
            tolerances: Tolerances::default(),
            chapman_enskog: ChapmanEnskogConfig::default(),
            resolvent: ResolventConfig::default(),
            stable: StableConfig::default(),
            center: CenterConfig::default(),
            profile: ProfileConfig::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Collects every violated constraint.
    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        if self.seed > i64::MAX as u64 {
            e.push(format!("seed: must fit a signed 64-bit TOML integer, got {}", self.seed));
        }
        let sources = [self.model.preset.is_some(), self.model.file.is_some(), self.model.inline.is_some()];
        if sources.iter().filter(|&&b| b).count() != 1 {
            e.push("model: exactly one of preset, file, inline is required".to_string());
        }
        if let Some(p) = &self.model.preset {
            if preset_model::<f64>(p).is_err() {
                e.push(format!("model.preset: unknown preset '{p}'"));
            }
        }
        if let Some(m) = &self.model.inline {
            if m.r == 0 || m.r >= m.n {
                e.push(format!("model.inline: need 1 <= r < n, got r={} n={}", m.r, m.n));
            }
            if m.velocities.len() != m.n {
                e.push(format!("model.inline.velocities: need {} entries, got {}", m.n, m.velocities.len()));
            }
            if m.m > 1 {
                e.push(format!("model.inline.m: must be 0 or 1, got {}", m.m));
            }
            positive(&mut e, "model.inline.micro_rates[0]", m.micro_rates[0]);
            positive(&mut e, "model.inline.micro_rates[1]", m.micro_rates[1]);
        }
        let t = &self.tolerances;
        positive(&mut e, "tolerances.hypothesis", t.hypothesis);
        positive(&mut e, "tolerances.newton", t.newton);
        positive(&mut e, "tolerances.ode_rtol", t.ode_rtol);
        positive(&mut e, "tolerances.order_band", t.order_band);
        let r = &self.resolvent;
        all_positive(&mut e, "resolvent.thetas", &r.thetas);
        if r.omegas.is_empty() {
            e.push("resolvent.omegas: must not be empty".into());
        }
        if r.samples == 0 {
            e.push("resolvent.samples: must be at least 1".into());
        }
        if r.nodes < 16 {
            e.push(format!("resolvent.nodes: must be at least 16, got {}", r.nodes));
        }
        for (i, name) in r.family.iter().enumerate() {
            if preset_model::<f64>(name).is_err() {
                e.push(format!("resolvent.family[{i}]: unknown preset '{name}'"));
            }
        }
        let s = &self.stable;
        if !(s.radius_fraction > 0.0 && s.radius_fraction <= 1.0) {
            e.push(format!("stable.radius_fraction: must lie in (0, 1], got {}", s.radius_fraction));
        }
        if s.x_max < 0.0 {
            e.push(format!("stable.x_max: must be nonnegative, got {}", s.x_max));
        }
        if s.spacing < 0.0 {
            e.push(format!("stable.spacing: must be nonnegative, got {}", s.spacing));
        }
        positive(&mut e, "stable.tol", s.tol);
        if s.max_iter == 0 {
            e.push("stable.max_iter: must be at least 1".into());
        }
        if s.tangency_levels < 2 {
            e.push("stable.tangency_levels: must be at least 2".into());
        }
        let c = &self.center;
        if c.order < 2 {
            e.push(format!("center.order: must be at least 2, got {}", c.order));
        }
        all_positive(&mut e, "center.eps", &c.eps);
        all_positive(&mut e, "center.defect_scales", &c.defect_scales);
        if c.levels < 2 {
            e.push("center.levels: must be at least 2".into());
        }
        let p = &self.profile;
        positive(&mut e, "profile.eps", p.eps);
        all_positive(&mut e, "profile.sweep", &p.sweep);
        if p.sweep.len() < 2 {
            e.push("profile.sweep: needs at least two amplitudes".into());
        }
        if p.taylor_order < 3 {
            e.push(format!("profile.taylor_order: must be at least 3, got {}", p.taylor_order));
        }
        positive(&mut e, "profile.widths", p.widths);
        if p.nodes < 16 {
            e.push(format!("profile.nodes: must be at least 16, got {}", p.nodes));
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(e))
        }
    }

    /// Builds the configured model.
    pub fn build_model(&self) -> Result<Model> {
        if let Some(p) = &self.model.preset {
            return preset_model(p);
        }
        if let Some(f) = &self.model.file {
            let text = std::fs::read_to_string(f).map_err(|e| Error::Io(format!("{}: {e}", f.display())))?;
            return model_from_text(&text);
        }
        let m = self
            .model
            .inline
            .as_ref()
            .ok_or_else(|| Error::Validation(vec!["model: no source given".into()]))?;
        let spec = SyntheticSpec {
            m: m.m,
            velocities: m.velocities.clone(),
            macro_modes: m.macro_modes.clone(),
            complement_sign: m.complement_sign,
            micro_rates: (m.micro_rates[0], m.micro_rates[1]),
            curvature: m.curvature,
            rotate: m.rotate,
            seed: m.seed,
        };
        let mut model = build_synthetic_model(m.r, m.n, &spec)?;
        model.label = "inline".to_string();
        Ok(model)
    }
}
