//! Experiment configuration: one JSON document per experiment.

use std::path::Path;

use qlmass::asymptotics::MassProfile;
use qlmass::FlowConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub background: BackgroundConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub initial_graph: InitialGraph,
    #[serde(default)]
    pub boundary_h: BoundaryH,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub mass: MassConfig,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub phi_curve: PhiCurveConfig,
    #[serde(default)]
    pub annulus: AnnulusConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            background: Default::default(),
            grid: Default::default(),
            initial_graph: Default::default(),
            boundary_h: Default::default(),
            flow: Default::default(),
            tolerances: Default::default(),
            mass: Default::default(),
            outputs: Default::default(),
            phi_curve: Default::default(),
            annulus: Default::default(),
            limits: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundConfig {
    pub n: usize,
    pub m: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self { n: 2, m: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Kahan summation in surface integrals.
    pub compensated: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_theta: 32,
            n_phi: 64,
            compensated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub l: usize,
    pub m: isize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialGraph {
    #[serde(rename = "R")]
    pub r: f64,
    pub harmonics: Vec<Harmonic>,
    /// Largest relative jump of `ρ` between neighbouring nodes.
    pub smoothness: f64,
}

impl Default for InitialGraph {
    fn default() -> Self {
        Self {
            r: 4.0,
            harmonics: Vec::new(),
            smoothness: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HMode {
    /// `𝔥 = value · H` with `H` the mean curvature of the initial graph.
    Factor,
    /// `𝔥` given directly: one number, or one value per node.
    Field,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HValue {
    Scalar(f64),
    Nodes(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryH {
    pub mode: HMode,
    pub value: HValue,
}

impl Default for BoundaryH {
    fn default() -> Self {
        Self {
            mode: HMode::Factor,
            value: HValue::Scalar(0.9),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Allowed increase of `Q` between samples, relative to `|Q(0)|`.
    pub mono: f64,
    /// Allowed relative defect of the `dQ/dt` audit.
    pub audit: f64,
    /// Relative error against the symmetric oracle for `ρ` and `w`.
    pub oracle: f64,
    /// Relative error against the symmetric oracle for `Q` and the mass aspect.
    pub oracle_integral: f64,
    /// Absolute error of annulus margins against the closed form.
    pub margin: f64,
    /// Absolute error of the extrapolated quasi-local limit.
    pub limit: f64,
    /// Relative error of the final volume-deficit ratio.
    pub volume: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mono: 1e-6,
            audit: 0.02,
            oracle: 1e-6,
            oracle_integral: 1e-5,
            margin: 1e-12,
            limit: 1e-4,
            volume: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MassConfig {
    pub horizon_area: Option<f64>,
    /// Tail fraction of the run used for `m₀`.
    pub m0_window: f64,
}

impl Default for MassConfig {
    fn default() -> Self {
        Self {
            horizon_area: None,
            m0_window: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub directory: String,
    pub prefix: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            directory: ".".into(),
            prefix: "qlmass".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhiCurveConfig {
    #[serde(rename = "R")]
    pub r: f64,
    pub h_mean: f64,
    pub samples: usize,
}

impl Default for PhiCurveConfig {
    fn default() -> Self {
        Self {
            r: 2.0,
            h_mean: 0.8,
            samples: 201,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnulusConfig {
    #[serde(rename = "R")]
    pub r: f64,
    pub m_hat: Vec<f64>,
}

impl Default for AnnulusConfig {
    fn default() -> Self {
        Self {
            r: 4.0,
            m_hat: vec![0.5, 1.0, 1.19, 1.5],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    pub profile: MassProfile,
    pub rho_min: Option<f64>,
    pub rho_lo: f64,
    pub rho_max: f64,
    pub count: usize,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            profile: MassProfile::Constant { mass: 2.0 },
            rho_min: None,
            rho_lo: 100.0,
            rho_max: 1e4,
            count: 9,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text)?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Failure::Config(format!("invalid JSON: {e}")))?;
        match value.get("schema") {
            None => return Err(Failure::Config("missing key `schema`".into())),
            Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
                return Err(Failure::Config(format!(
                    "key `schema`: unsupported version {v}, expected {SCHEMA_VERSION}"
                )))
            }
            _ => {}
        }
        serde_json::from_value(value).map_err(|e| Failure::Config(e.to_string()))
    }

    fn validate(&self) -> Result<(), Failure> {
        let bad = |key: &str, why: String| Err(Failure::Config(format!("key `{key}`: {why}")));
        if self.background.n < 2 {
            return bad("background.n", format!("{} < 2", self.background.n));
        }
        if !(self.background.m >= 0.0) {
            return bad("background.m", format!("{} must be >= 0", self.background.m));
        }
        if !(self.initial_graph.r > 0.0) {
            return bad("initial_graph.R", format!("{} must be positive", self.initial_graph.r));
        }
        for (i, h) in self.initial_graph.harmonics.iter().enumerate() {
            if h.m.unsigned_abs() > h.l || !h.amplitude.is_finite() {
                return bad(
                    &format!("initial_graph.harmonics[{i}]"),
                    format!("invalid mode l = {}, m = {}, amplitude = {}", h.l, h.m, h.amplitude),
                );
            }
        }
        if self.boundary_h.mode == HMode::Factor && !matches!(self.boundary_h.value, HValue::Scalar(_)) {
            return bad("boundary_h.value", "mode `factor` takes a single number".into());
        }
        self.flow
            .validate()
            .or_else(|e| bad("flow", e.to_string()))?;
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.mono", t.mono),
            ("tolerances.audit", t.audit),
            ("tolerances.oracle", t.oracle),
            ("tolerances.oracle_integral", t.oracle_integral),
            ("tolerances.margin", t.margin),
            ("tolerances.limit", t.limit),
            ("tolerances.volume", t.volume),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(key, format!("{v} must be a finite non-negative number"));
            }
        }
        if !(self.mass.m0_window > 0.0 && self.mass.m0_window <= 1.0) {
            return bad("mass.m0_window", format!("{} outside (0, 1]", self.mass.m0_window));
        }
        if self.outputs.prefix.is_empty() || self.outputs.prefix.contains(['/', '\\']) {
            return bad("outputs.prefix", format!("{:?} is not a file name prefix", self.outputs.prefix));
        }
        if self.phi_curve.samples < 3 {
            return bad("phi_curve.samples", format!("{} < 3", self.phi_curve.samples));
        }
        if !(self.limits.rho_lo > 0.0 && self.limits.rho_max > self.limits.rho_lo) {
            return bad(
                "limits.rho_max",
                format!("need 0 < rho_lo < rho_max, got {} and {}", self.limits.rho_lo, self.limits.rho_max),
            );
        }
        if self.limits.count < 4 {
            return bad("limits.count", format!("{} < 4", self.limits.count));
        }
        Ok(())
    }
}
