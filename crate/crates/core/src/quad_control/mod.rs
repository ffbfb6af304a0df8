//! Quadrotor case study: reduced lifted model, LQI synthesis, input recovery and a
//! square-tracking closed loop.

pub mod lqi;
pub mod model;
pub mod recovery;
pub mod riccati;
pub mod sim;
pub mod trajectory;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::output::write_json;
use crate::harness::overrides::{document_with_overrides, Override};
use crate::harness::scenario::{InertiaSpec, NamedInertia};
use crate::rigid_body::{BodyParams, Vec3, STANDARD_GRAVITY};

pub use lqi::{LqiController, LqiWeights};
pub use model::{build_quad_model, QuadModel, QUAD_STATE_DIM};
pub use recovery::{recover_input, Recovery};
pub use riccati::{care_solve, CareSolution};
pub use sim::{closed_loop_sim, LoopStatistics, LoopTiming, QuadLog};
pub use trajectory::{hover_reference, square_trajectory, PiecewiseReference, PolySegment};

/// Residual level used for the recovery monitor statistics.
pub const RESIDUAL_MONITOR_PCT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquareSettings {
    pub side: f64,
    #[serde(default)]
    pub altitude: f64,
    pub total_time: f64,
    /// Share of each quarter spent moving; the rest is a dwell at the corner.
    pub move_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSettings {
    pub plant_dt: f64,
    pub control_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSettings {
    /// Integrator bound as a multiple of the hover feedforward norm.
    pub integrator_clamp_factor: f64,
}

fn default_inertia() -> InertiaSpec {
    InertiaSpec::Named(NamedInertia::JQ)
}

fn default_mass() -> f64 {
    1.2
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_inertia")]
    pub inertia: InertiaSpec,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    pub trajectory: SquareSettings,
    pub timing: TimingSettings,
    pub controller: ControllerSettings,
    pub weights: LqiWeights,
}

impl QuadConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    pub fn from_toml_with(text: &str, overrides: &[Override]) -> Result<Self> {
        Self::from_value(document_with_overrides(text, overrides)?)
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset() -> Result<Self> {
        Self::from_toml(crate::harness::presets::QUAD_SQUARE.1)
    }

    pub fn params(&self) -> Result<BodyParams> {
        BodyParams::new(Vec3::from(self.inertia.diagonal()), self.mass, self.gravity)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.params()?;
        if !(self.gravity > 0.0) {
            return bad(format!("gravity must be positive for hover, got {}", self.gravity));
        }
        let tr = &self.trajectory;
        if !(tr.side.is_finite() && tr.side > 0.0) {
            return bad(format!("trajectory.side must be positive, got {}", tr.side));
        }
        if !tr.altitude.is_finite() {
            return bad("trajectory.altitude must be finite".into());
        }
        if !(tr.total_time.is_finite() && tr.total_time > 0.0) {
            return bad(format!("trajectory.total_time must be positive, got {}", tr.total_time));
        }
        if !(tr.move_fraction > 0.0 && tr.move_fraction <= 1.0) {
            return bad(format!("trajectory.move_fraction must lie in (0, 1], got {}", tr.move_fraction));
        }
        let timing = LoopTiming { plant_dt: self.timing.plant_dt, control_dt: self.timing.control_dt };
        timing.substeps()?;
        let c = self.controller.integrator_clamp_factor;
        if !(c.is_finite() && c > 0.0) {
            return bad(format!("controller.integrator_clamp_factor must be positive, got {c}"));
        }
        self.weights.validate()
    }

    pub fn timing(&self) -> LoopTiming {
        LoopTiming { plant_dt: self.timing.plant_dt, control_dt: self.timing.control_dt }
    }
}

/// Everything produced by [`run_quad`].
#[derive(Debug, Clone)]
pub struct QuadRun {
    pub config: QuadConfig,
    pub controller: LqiController,
    pub reference: PiecewiseReference,
    pub log: QuadLog,
    pub stats: LoopStatistics,
}

/// JSON digest of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadSummary {
    pub scenario: String,
    pub config: QuadConfig,
    pub riccati_relative_residual: f64,
    pub closed_loop_abscissa: f64,
    pub gain_norm: f64,
    pub integrator_clamp: f64,
    pub stats: LoopStatistics,
}

impl QuadRun {
    pub fn summary(&self) -> QuadSummary {
        QuadSummary {
            scenario: self.config.name.clone(),
            config: self.config.clone(),
            riccati_relative_residual: self.controller.care.relative_residual,
            closed_loop_abscissa: self.controller.care.abscissa,
            gain_norm: self.controller.k.norm(),
            integrator_clamp: self.controller.integral_clamp,
            stats: self.stats.clone(),
        }
    }

    /// Write `{name}.csv` and `summary.json` into `dir`.
    pub fn emit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.config.name));
        self.log.write_csv(&self.config.name, BufWriter::new(fs::File::create(&csv)?))?;
        let json = dir.join("summary.json");
        write_json(&self.summary(), &json)?;
        Ok(vec![csv, json])
    }
}

/// Synthesize the controller and fly the square.
pub fn run_quad(cfg: &QuadConfig) -> Result<QuadRun> {
    cfg.validate()?;
    let tr = &cfg.trajectory;
    let reference = square_trajectory(tr.side, tr.altitude, tr.total_time, tr.move_fraction)?;
    run_quad_on(cfg, reference)
}

/// Synthesize the controller and track `reference`, starting on it.
pub fn run_quad_on(cfg: &QuadConfig, reference: PiecewiseReference) -> Result<QuadRun> {
    cfg.validate()?;
    let params = cfg.params()?;
    let model = build_quad_model(&params)?;
    let timing = cfg.timing();
    let lifted = sim::lift_reference(&model, &reference, timing.control_dt)?;
    let euler: Vec<Vec3> = lifted
        .times
        .iter()
        .map(|&t| trajectory::flat_state(&reference, t, params.gravity).map(|f| f.euler))
        .collect::<Result<_>>()?;
    let initial = trajectory::flat_state(&reference, 0.0, params.gravity)?.state;
    let trim = (model.input_matrix_at(&initial)? * model.hover_input()).norm();
    let mut controller = LqiController::synthesize(&model, &cfg.weights, cfg.controller.integrator_clamp_factor * trim)?;
    let log = closed_loop_sim(&model, &mut controller, &lifted, &euler, &initial, timing)?;
    let stats = sim::statistics(&log, &reference.dwell_ends, RESIDUAL_MONITOR_PCT);
    Ok(QuadRun { config: cfg.clone(), controller, reference, log, stats })
}
