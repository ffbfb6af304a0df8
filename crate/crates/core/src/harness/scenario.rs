use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::attitude_lift::TruncationConfig;
use crate::error::{Error, Result};
use crate::lifted_model::BSource;
use crate::rigid_body::{BodyParams, InputSignal, RigidBodyState, Vec3, Wrench, STANDARD_GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedInertia {
    J0,
    J1,
    J2,
    J3,
    J4,
    JQ,
    JI,
}

impl NamedInertia {
    pub fn diagonal(self) -> [f64; 3] {
        match self {
            NamedInertia::J0 => [0.0131, 0.020, 0.0234],
            NamedInertia::J1 => [0.001, 0.01, 0.1],
            NamedInertia::J2 => [0.1, 0.11, 0.012],
            NamedInertia::J3 => [0.1, 0.11, 0.12],
            NamedInertia::J4 => [1.0, 2.0, 3.0],
            NamedInertia::JQ => [0.0131, 0.0131, 0.0234],
            NamedInertia::JI => [1.0, 1.0, 1.0],
        }
    }

    pub fn all() -> [NamedInertia; 7] {
        use NamedInertia::*;
        [J0, J1, J2, J3, J4, JQ, JI]
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|n| format!("{n:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown inertia '{s}' (expected one of J0..J4, JQ, JI)")))
    }
}

/// A named principal inertia or an explicit diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InertiaSpec {
    Named(NamedInertia),
    Diagonal { diag: [f64; 3] },
}

impl InertiaSpec {
    pub fn diagonal(&self) -> [f64; 3] {
        match self {
            InertiaSpec::Named(n) => n.diagonal(),
            InertiaSpec::Diagonal { diag } => *diag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Angular velocity only.
    #[default]
    Attitude,
    /// Position and attitude.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    #[serde(default)]
    pub nu: [f64; 3],
    /// Roll, pitch, yaw.
    #[serde(default)]
    pub euler: [f64; 3],
    #[serde(default)]
    pub position: [f64; 3],
    /// Body frame.
    #[serde(default)]
    pub velocity: [f64; 3],
}

impl InitialCondition {
    pub fn state(&self) -> RigidBodyState {
        RigidBodyState::from_euler(
            Vec3::from(self.position),
            Vec3::from(self.velocity),
            &Vec3::from(self.euler),
            Vec3::from(self.nu),
        )
    }
}

fn ones() -> [f64; 3] {
    [1.0; 3]
}

fn two_pi() -> [f64; 3] {
    [2.0 * PI; 3]
}

/// `M(t) = alpha [b1 sin(r1 t), b2 sin(r2 (t - rt)), b3 sin(r3 t)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorqueSignal {
    pub alpha: f64,
    #[serde(default = "ones")]
    pub beta: [f64; 3],
    #[serde(default = "two_pi")]
    pub rho: [f64; 3],
    #[serde(default)]
    pub rho_t: f64,
}

impl TorqueSignal {
    fn shift(&self, i: usize) -> f64 {
        if i == 1 {
            self.rho_t
        } else {
            0.0
        }
    }

    pub fn torque(&self, t: f64) -> Vec3 {
        Vec3::from_fn(|i, _| self.alpha * self.beta[i] * (self.rho[i] * (t - self.shift(i))).sin())
    }

    /// Norm of the antiderivative `-alpha b_i cos(r_i (t - s_i)) / r_i` at `t`.
    pub fn integral_norm(&self, t: f64) -> f64 {
        Vec3::from_fn(|i, _| {
            if self.rho[i] == 0.0 {
                0.0
            } else {
                self.alpha * self.beta[i] * (self.rho[i] * (t - self.shift(i))).cos() / self.rho[i]
            }
        })
        .norm()
    }

    /// Shortest period among the active components.
    pub fn min_period(&self) -> Option<f64> {
        (0..3)
            .filter(|&i| self.rho[i] != 0.0 && self.beta[i] != 0.0 && self.alpha != 0.0)
            .map(|i| 2.0 * PI / self.rho[i].abs())
            .min_by(f64::total_cmp)
    }
}

/// Body-frame force `constant + mass * mass_scaled`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSignal {
    #[serde(default)]
    pub constant: [f64; 3],
    #[serde(default)]
    pub mass_scaled: [f64; 3],
}

impl ForceSignal {
    pub fn force(&self, mass: f64) -> Vec3 {
        Vec3::from(self.constant) + mass * Vec3::from(self.mass_scaled)
    }
}

fn default_horizon_tlim() -> f64 {
    10.0
}

fn default_steps_per_tlim() -> f64 {
    1000.0
}

fn default_steps_per_period() -> f64 {
    100.0
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    /// Fixed step; derived from `t_lim` and the torque period when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Seconds; `horizon_tlim * t_lim` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default = "default_horizon_tlim")]
    pub horizon_tlim: f64,
    #[serde(default = "default_steps_per_tlim")]
    pub steps_per_tlim: f64,
    #[serde(default = "default_steps_per_period")]
    pub steps_per_period: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub b_source: BSource,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: None,
            horizon: None,
            horizon_tlim: default_horizon_tlim(),
            steps_per_tlim: default_steps_per_tlim(),
            steps_per_period: default_steps_per_period(),
            record_every: default_record_every(),
            b_source: BSource::default(),
        }
    }
}

fn default_mass() -> f64 {
    1.0
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

/// Declarative description of one validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub kind: ScenarioKind,
    pub inertia: InertiaSpec,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque: Option<TorqueSignal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<ForceSignal>,
    pub truncations: Vec<TruncationConfig>,
    #[serde(default)]
    pub sim: SimSettings,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<BodyParams> {
        BodyParams::new(Vec3::from(self.inertia.diagonal()), self.mass, self.gravity)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.params()?;
        if self.truncations.is_empty() {
            return bad("at least one truncation is required".into());
        }
        for t in &self.truncations {
            t.validate()?;
        }
        let s = &self.sim;
        if let Some(dt) = s.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return bad(format!("sim.dt must be positive, got {dt}"));
            }
        }
        if let Some(h) = s.horizon {
            if !(h.is_finite() && h > 0.0) {
                return bad(format!("sim.horizon must be positive, got {h}"));
            }
        }
        for (name, v) in [
            ("horizon_tlim", s.horizon_tlim),
            ("steps_per_tlim", s.steps_per_tlim),
            ("steps_per_period", s.steps_per_period),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("sim.{name} must be positive, got {v}"));
            }
        }
        if s.record_every == 0 {
            return bad("sim.record_every must be >= 1".into());
        }
        let finite = |a: &[f64; 3]| a.iter().all(|x| x.is_finite());
        let i = &self.initial;
        if !(finite(&i.nu) && finite(&i.euler) && finite(&i.position) && finite(&i.velocity)) {
            return bad("initial condition must be finite".into());
        }
        if i.euler[1].cos() < 1e-3 {
            return bad("initial pitch too close to +-90 degrees".into());
        }
        if let Some(m) = &self.torque {
            if !(m.alpha.is_finite() && finite(&m.beta) && finite(&m.rho) && m.rho_t.is_finite()) {
                return bad("torque parameters must be finite".into());
            }
        }
        if let Some(f) = &self.force {
            if !(finite(&f.constant) && finite(&f.mass_scaled)) {
                return bad("force parameters must be finite".into());
            }
        }
        Ok(())
    }

    pub fn input(&self) -> ScenarioInput {
        ScenarioInput {
            torque: self.torque,
            force: self.force.map_or(Vec3::zeros(), |f| f.force(self.mass)),
        }
    }
}

/// Open-loop wrench of a scenario.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioInput {
    pub torque: Option<TorqueSignal>,
    pub force: Vec3,
}

impl InputSignal for ScenarioInput {
    fn wrench(&self, t: f64) -> Wrench {
        Wrench { force: self.force, torque: self.torque.map_or(Vec3::zeros(), |m| m.torque(t)) }
    }
}
