//! Scenario configuration. Every physical quantity carries its unit in the
//! field name (`_length`, `_time`).

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curvature::{RicNorm, SampleSet};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldKind, ManifoldSpec};
use crate::heat::WOptions;
use crate::liyau::{li_yau_constants, RhsForm};

pub const SCHEMA_VERSION: u32 = 1;

fn config_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Structural constant and smallness threshold; calibrated on the
    /// built-in suite when absent.
    #[serde(default)]
    pub constants: Option<Constants>,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub c: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `w ≥ 1`, `J ∈ (0, 1]`, heat positivity, Dirichlet kernel mass decay.
    MaxPrinciple,
    /// Direct and Duhamel solutions of the `w` problem agree.
    WCross,
    /// Running sup of `w` below the Grönwall envelope.
    Envelope,
    /// Closed-form lower bound below the solved `J`.
    LowerJ,
    LiYau,
    Classical,
    Doubling,
    Sobolev,
    Gaussian,
    Cutoff,
    Scaling,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::MaxPrinciple => "max_principle",
            CheckKind::WCross => "w_cross",
            CheckKind::Envelope => "envelope",
            CheckKind::LowerJ => "lower_j",
            CheckKind::LiYau => "li_yau",
            CheckKind::Classical => "classical",
            CheckKind::Doubling => "doubling",
            CheckKind::Sobolev => "sobolev",
            CheckKind::Gaussian => "gaussian",
            CheckKind::Cutoff => "cutoff",
            CheckKind::Scaling => "scaling",
        }
    }

    pub fn needs_w(&self) -> bool {
        matches!(
            self,
            CheckKind::MaxPrinciple | CheckKind::WCross | CheckKind::Envelope | CheckKind::LowerJ | CheckKind::LiYau
        )
    }

    pub fn needs_u(&self) -> bool {
        matches!(
            self,
            CheckKind::MaxPrinciple | CheckKind::LiYau | CheckKind::Classical | CheckKind::Scaling
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSettings {
    pub dimension: usize,
    pub p: f64,
    pub alpha: f64,
    /// Per-scenario overrides of the run constants.
    pub c: Option<f64>,
    pub kappa: Option<f64>,
    pub ric_norm: RicNorm,
    pub rhs_form: RhsForm,
}

impl Default for ParamSettings {
    fn default() -> Self {
        ParamSettings {
            dimension: 2,
            p: 2.0,
            alpha: 0.5,
            c: None,
            kappa: None,
            ric_norm: RicNorm::Eigenvalue,
            rhs_form: RhsForm::UnitRadius,
        }
    }
}

/// Initial datum of the heat solution `u` tested by the gradient bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    /// Unit mass at the vertex nearest `point` (chart coordinates; the
    /// center `O` when absent).
    PointSource {
        #[serde(default)]
        point: Option<[f64; 2]>,
    },
    Constant { value: f64 },
    /// Exact planar kernel `(4πt)⁻¹ e^{-|x-O|²/4t}` sampled at each output
    /// time instead of solved; flat charts only. The `t = 0` slice is a
    /// placeholder and never checked.
    ExactGaussian,
}

impl Default for Initial {
    fn default() -> Self {
        Initial::PointSource { point: None }
    }
}

/// Lower Ricci bound used by the classical check; `Ric ≥ 0` selects the
/// optimal form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalSettings {
    pub alpha: f64,
    pub tolerance_relative: f64,
}

impl Default for ClassicalSettings {
    fn default() -> Self {
        ClassicalSettings {
            alpha: 2.0,
            tolerance_relative: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Radius of the ball carrying the `w` problem.
    pub ball_radius_length: f64,
    /// Radius of the region where gradient bounds are checked.
    pub region_radius_length: f64,
    pub output_times_time: Vec<f64>,
    pub dt_time: f64,
    pub t_min_time: f64,
    pub t_max_time: f64,
    /// Relative slack of the gradient bounds.
    pub tolerance_relative: f64,
    /// Add `|Q_h - Q_{2h}|/3` to the slack.
    pub scheme_error_estimate: bool,
    pub cross_tolerance_relative: f64,
    pub w: WOptions,
    pub centers: SampleSet,
    pub classical: ClassicalSettings,
    pub sobolev_bound: f64,
    pub cutoff_bound: f64,
    pub doubling_radii_length: Vec<[f64; 2]>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            ball_radius_length: 1.0,
            region_radius_length: 0.5,
            output_times_time: vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0],
            dt_time: 0.0025,
            t_min_time: 0.01,
            t_max_time: 1.0,
            tolerance_relative: 1e-3,
            scheme_error_estimate: true,
            cross_tolerance_relative: 1e-3,
            w: WOptions::default(),
            centers: SampleSet::default(),
            classical: ClassicalSettings::default(),
            sobolev_bound: 1.0,
            cutoff_bound: 200.0,
            doubling_radii_length: vec![[0.1, 0.2], [0.2, 0.5], [0.25, 0.5], [0.5, 1.0], [0.2, 1.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub manifold: ManifoldSpec,
    /// Chart coordinates of the center `O`; the pole or the chart middle
    /// by default.
    #[serde(default)]
    pub center_point: Option<[f64; 2]>,
    #[serde(default)]
    pub params: ParamSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub initial: Initial,
    pub checks: Vec<CheckKind>,
    /// Built to violate a hypothesis or corrupt a solution; failures are
    /// expected and never fail the run.
    #[serde(default)]
    pub negative_control: bool,
    /// Multiply the heat solution by `1 ± 0.9` on a checkerboard.
    #[serde(default)]
    pub corrupt_solution: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if let Some(c) = &self.constants {
            if !(c.c > 0.0) || !c.c.is_finite() {
                return Err(config_err("constants.c", format!("must be positive, got {}", c.c)));
            }
            if !(c.kappa >= 0.0) || !c.kappa.is_finite() {
                return Err(config_err("constants.kappa", format!("must be >= 0, got {}", c.kappa)));
            }
        }
        if self.scenarios.is_empty() {
            return Err(config_err("scenarios", "at least one scenario is required"));
        }
        let mut ids = BTreeSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            if !ids.insert(s.id.as_str()) {
                return Err(config_err(format!("scenarios[{i}].id"), format!("duplicate id `{}`", s.id)));
            }
            s.validate(&format!("scenarios[{i}]"))?;
        }
        Ok(())
    }
}

impl Scenario {
    pub fn validate(&self, at: &str) -> Result<()> {
        let f = |name: &str| format!("{at}.{name}");
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(config_err(f("id"), "use letters, digits, `_` or `-`"));
        }
        self.manifold
            .validate()
            .map_err(|e| config_err(f("manifold"), e.to_string()))?;
        let p = &self.params;
        if p.dimension != self.manifold.dimension {
            return Err(config_err(
                f("params.dimension"),
                format!("{} does not match the manifold dimension {}", p.dimension, self.manifold.dimension),
            ));
        }
        let half = p.dimension as f64 / 2.0;
        if !(p.p > half) || !p.p.is_finite() {
            return Err(config_err(f("params.p"), format!("need p > n/2 = {half}, got {}", p.p)));
        }
        li_yau_constants(p.alpha, p.dimension).map_err(|e| config_err(f("params.alpha"), e.to_string()))?;
        if let Some(c) = p.c {
            if !(c > 0.0) || !c.is_finite() {
                return Err(config_err(f("params.c"), format!("must be positive, got {c}")));
            }
        }
        if let Some(k) = p.kappa {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(config_err(f("params.kappa"), format!("must be >= 0, got {k}")));
            }
        }
        if self.checks.is_empty() {
            return Err(config_err(f("checks"), "no checks requested"));
        }
        let s = &self.solver;
        if !(s.ball_radius_length > 0.0 && s.ball_radius_length <= 1.0) {
            return Err(config_err(
                f("solver.ball_radius_length"),
                format!("must lie in (0, 1], got {}", s.ball_radius_length),
            ));
        }
        if !(s.region_radius_length > 0.0 && s.region_radius_length <= s.ball_radius_length) {
            return Err(config_err(
                f("solver.region_radius_length"),
                format!("must lie in (0, ball_radius_length], got {}", s.region_radius_length),
            ));
        }
        let t = &s.output_times_time;
        if t.first() != Some(&0.0) || t.windows(2).any(|w| !(w[1] > w[0])) || t.len() < 2 {
            return Err(config_err(
                f("solver.output_times_time"),
                "must start at 0 and increase strictly",
            ));
        }
        if !(s.dt_time > 0.0) {
            return Err(config_err(f("solver.dt_time"), format!("must be positive, got {}", s.dt_time)));
        }
        if !(s.t_min_time > 0.0 && s.t_min_time <= s.t_max_time) {
            return Err(config_err(
                f("solver.t_min_time"),
                format!("need 0 < t_min <= t_max, got [{}, {}]", s.t_min_time, s.t_max_time),
            ));
        }
        for (name, x) in [
            ("solver.tolerance_relative", s.tolerance_relative),
            ("solver.cross_tolerance_relative", s.cross_tolerance_relative),
        ] {
            if !(x >= 0.0) {
                return Err(config_err(f(name), format!("must be >= 0, got {x}")));
            }
        }
        if !(s.w.slab_norm > 0.0 && s.w.slab_norm < 1.0) {
            return Err(config_err(f("solver.w.slab_norm"), "must lie in (0, 1)"));
        }
        if !(s.w.dt_floor > 0.0) {
            return Err(config_err(f("solver.w.dt_floor_time"), "must be positive"));
        }
        for (i, r) in s.doubling_radii_length.iter().enumerate() {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1] <= 1.0) {
                return Err(config_err(
                    format!("{at}.solver.doubling_radii_length[{i}]"),
                    format!("need 0 < r1 <= r2 <= 1, got {r:?}"),
                ));
            }
        }
        if self.checks.contains(&CheckKind::Classical) && !(s.classical.alpha > 1.0) {
            return Err(config_err(
                f("solver.classical.alpha"),
                format!("the general classical bound needs alpha > 1, got {}", s.classical.alpha),
            ));
        }
        let flat = matches!(self.manifold.kind, ManifoldKind::FlatTorus { .. });
        if matches!(self.initial, Initial::ExactGaussian) && !flat {
            return Err(config_err(f("initial"), "the exact Gaussian needs a flat chart"));
        }
        if let Initial::Constant { value } = self.initial {
            if !(value > 0.0) {
                return Err(config_err(f("initial.value"), "must be positive"));
            }
        }
        Ok(())
    }

    pub fn needs_w(&self) -> bool {
        self.checks.iter().any(|c| c.needs_w())
    }

    pub fn needs_u(&self) -> bool {
        self.checks.iter().any(|c| c.needs_u())
    }
}
