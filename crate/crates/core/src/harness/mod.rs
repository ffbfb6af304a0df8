//! Paired nonlinear / lifted validation runs.

pub mod metrics;
pub mod output;
pub mod overrides;
pub mod presets;
pub mod scenario;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{gamma_rms, t_lim, t_lim_forced};
use crate::attitude_lift::TruncationConfig;
use crate::error::{Error, Result};
use crate::lifted_model::{lift, reconstruct, reconstruct_velocity, simulate_lifted_partial, LiftedSystem, SimOptions};
use crate::rigid_body::{BodyParams, Integrator, RigidBodyState, Trajectory, Vec3};

use metrics::{choose_normalizer, error_metric, euler_difference, onset_time, Normalizer, ONSET_THRESHOLD};
pub use scenario::{ScenarioConfig, ScenarioKind};
use scenario::ScenarioInput;

/// Lifted states larger than this are treated as diverged.
pub const BLOWUP: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSource {
    Explicit,
    TLim,
    TorquePeriod,
}

/// Step and horizon actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSim {
    pub dt: f64,
    pub dt_source: StepSource,
    pub horizon: f64,
    pub horizon_source: StepSource,
    pub t_lim: Option<f64>,
    pub gamma_rms: f64,
    pub torque_integral: Option<f64>,
}

pub fn resolve_sim(cfg: &ScenarioConfig, params: &BodyParams) -> Result<(f64, StepSource, f64, StepSource, Option<f64>)> {
    let s0 = cfg.initial.state();
    let tl = match t_lim(params, &s0.nu.component_mul(&params.inertia_diag())) {
        Ok(t) => Some(t),
        Err(Error::InfiniteHorizon) => None,
        Err(e) => return Err(e),
    };
    let sim = &cfg.sim;
    let (horizon, hs) = match (sim.horizon, tl) {
        (Some(h), _) => (h, StepSource::Explicit),
        (None, Some(t)) => (sim.horizon_tlim * t, StepSource::TLim),
        (None, None) => return Err(Error::Config("sim.horizon is required when the body starts at rest".into())),
    };
    let (dt, ds) = match sim.dt {
        Some(dt) => (dt, StepSource::Explicit),
        None => {
            let from_tlim = tl.map(|t| t / sim.steps_per_tlim);
            let from_period = cfg.torque.and_then(|m| m.min_period()).map(|p| p / sim.steps_per_period);
            match (from_tlim, from_period) {
                (Some(a), Some(b)) if b < a => (b, StepSource::TorquePeriod),
                (Some(a), _) => (a, StepSource::TLim),
                (None, Some(b)) => (b, StepSource::TorquePeriod),
                (None, None) => return Err(Error::Config("sim.dt is required when the body starts at rest".into())),
            }
        }
    };
    if horizon < dt {
        return Err(Error::Config(format!("horizon {horizon} shorter than dt {dt}")));
    }
    Ok((dt, ds, horizon, hs, tl))
}

/// Error curves of one truncation against the nonlinear reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub truncation: TruncationConfig,
    pub label: String,
    pub times: Vec<f64>,
    /// Keyed by quantity (`nu`, `z`, `p`, `v`, `eta`).
    pub errors: BTreeMap<String, Vec<f64>>,
    pub maxima: BTreeMap<String, f64>,
    /// Euclidean norm of the `p`, `v`, `eta` maxima.
    pub total: Option<f64>,
    pub divergence_time: Option<f64>,
    /// First time any tracked error exceeds [`ONSET_THRESHOLD`].
    pub onset_time: Option<f64>,
    pub t_lim_forced: Option<f64>,
}

impl ErrorSeries {
    pub fn error(&self, quantity: &str) -> Option<&[f64]> {
        self.errors.get(quantity).map(|v| v.as_slice())
    }
}

/// Physical quantities sampled along the nonlinear reference.
#[derive(Debug, Clone)]
struct ReferenceSeries {
    nu: Vec<Vec3>,
    z: Vec<Vec3>,
    p: Vec<Vec3>,
    v: Vec<Vec3>,
    eta: Vec<Vec3>,
}

impl ReferenceSeries {
    fn from_trajectory(t: &Trajectory) -> Self {
        Self {
            nu: t.states.iter().map(|s| s.nu).collect(),
            z: t.states.iter().map(|s| s.r.transpose() * s.p).collect(),
            p: t.states.iter().map(|s| s.p).collect(),
            v: t.states.iter().map(|s| s.v).collect(),
            eta: t.states.iter().map(|s| s.euler()).collect(),
        }
    }
}

/// Scenario with its nonlinear reference already integrated.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub params: BodyParams,
    pub resolved: ResolvedSim,
    pub initial: RigidBodyState,
    pub reference: Trajectory,
    pub normalizers: BTreeMap<String, Normalizer>,
    input: ScenarioInput,
    series: ReferenceSeries,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let params = cfg.params()?;
    let (dt, dt_source, horizon, horizon_source, tl) = resolve_sim(cfg, &params)?;
    let s0 = cfg.initial.state();
    let input = cfg.input();
    let reference = Integrator::new(dt, horizon)?.record_every(cfg.sim.record_every).run(&params, &s0, &input, 0.0)?;
    let series = ReferenceSeries::from_trajectory(&reference);

    let quantities: &[(&str, &Vec<Vec3>)] = match cfg.kind {
        ScenarioKind::Attitude => &[("nu", &series.nu)],
        ScenarioKind::Full => &[
            ("nu", &series.nu),
            ("z", &series.z),
            ("p", &series.p),
            ("v", &series.v),
            ("eta", &series.eta),
        ],
    };
    let mut normalizers = BTreeMap::new();
    for (name, data) in quantities {
        match choose_normalizer(name, data) {
            Ok(n) => {
                normalizers.insert(name.to_string(), n);
            }
            Err(e) if cfg.kind == ScenarioKind::Attitude => return Err(Error::Config(e.to_string())),
            Err(_) => {}
        }
    }

    let torque_integral = cfg.torque.filter(|m| m.alpha != 0.0).map(|m| m.integral_norm(0.0));
    let resolved = ResolvedSim {
        dt,
        dt_source,
        horizon,
        horizon_source,
        t_lim: tl,
        gamma_rms: gamma_rms(&params, &series.nu),
        torque_integral,
    };
    Ok(Prepared { config: cfg.clone(), params, resolved, initial: s0, reference, normalizers, input, series })
}

impl Prepared {
    pub fn run_truncation(&self, truncation: TruncationConfig) -> Result<ErrorSeries> {
        let sys = LiftedSystem::new(self.params, truncation)?;
        let x0 = lift(&self.initial, &self.params, &truncation)?;
        let mut opts = SimOptions::new(self.resolved.dt, self.resolved.horizon);
        opts.record_every = self.config.sim.record_every;
        opts.b_source = self.config.sim.b_source;
        opts.blowup = BLOWUP;
        let traj = simulate_lifted_partial(&sys, &x0, &self.input, Some(&self.initial), &opts)?;
        let mut divergence_time = traj.diverged_at;

        let mut lifted: BTreeMap<&str, Vec<Vec3>> = BTreeMap::new();
        lifted.insert("nu", traj.states.iter().map(|x| x.nu(0)).collect());
        let mut n = traj.states.len();
        if self.config.kind == ScenarioKind::Full {
            let (mut z, mut p, mut v, mut eta) = (vec![], vec![], vec![], vec![]);
            for (i, x) in traj.states.iter().enumerate() {
                match reconstruct(x, x.psi, &self.params) {
                    Ok((_, e, pos)) => {
                        z.push(x.z(0));
                        p.push(pos);
                        v.push(reconstruct_velocity(x));
                        eta.push(e);
                    }
                    Err(_) => {
                        n = i;
                        divergence_time = divergence_time.or(Some(traj.times[i]));
                        break;
                    }
                }
            }
            lifted.get_mut("nu").unwrap().truncate(n);
            lifted.insert("z", z);
            lifted.insert("p", p);
            lifted.insert("v", v);
            lifted.insert("eta", eta);
        }
        n = n.min(self.reference.states.len());
        let times = traj.times[..n].to_vec();

        let mut errors = BTreeMap::new();
        let mut maxima = BTreeMap::new();
        for (name, normalizer) in &self.normalizers {
            let approx = &lifted[name.as_str()][..n];
            let e = match name.as_str() {
                "eta" => {
                    let d: Vec<Vec3> =
                        self.series.eta[..n].iter().zip(approx).map(|(r, a)| euler_difference(r, a)).collect();
                    error_metric(&d, &vec![Vec3::zeros(); n], normalizer)
                }
                _ => error_metric(&self.reference_quantity(name)[..n], approx, normalizer),
            };
            maxima.insert(name.clone(), e.iter().copied().fold(0.0, f64::max));
            errors.insert(name.clone(), e);
        }
        let total = match (maxima.get("p"), maxima.get("v"), maxima.get("eta")) {
            (Some(p), Some(v), Some(e)) => Some((p * p + v * v + e * e).sqrt()),
            _ => None,
        };
        let worst: Vec<f64> = (0..n).map(|i| errors.values().map(|e| e[i]).fold(0.0, f64::max)).collect();
        let t_lim_m = self
            .resolved
            .torque_integral
            .and_then(|m| t_lim_forced(&self.params, self.resolved.gamma_rms, m, truncation.n_nu).ok());

        Ok(ErrorSeries {
            truncation,
            label: truncation.label(),
            onset_time: onset_time(&times, &worst, ONSET_THRESHOLD),
            times,
            errors,
            maxima,
            total,
            divergence_time,
            t_lim_forced: t_lim_m,
        })
    }

    fn reference_quantity(&self, name: &str) -> &[Vec3] {
        match name {
            "nu" => &self.series.nu,
            "z" => &self.series.z,
            "p" => &self.series.p,
            "v" => &self.series.v,
            _ => &self.series.eta,
        }
    }

    pub fn finish(self, series: Vec<ErrorSeries>) -> ScenarioResult {
        ScenarioResult { config: self.config, resolved: self.resolved, normalizers: self.normalizers, series }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub resolved: ResolvedSim,
    pub normalizers: BTreeMap<String, Normalizer>,
    pub series: Vec<ErrorSeries>,
}

impl ScenarioResult {
    pub fn series_for(&self, truncation: &TruncationConfig) -> Option<&ErrorSeries> {
        self.series.iter().find(|s| s.truncation == *truncation)
    }
}

/// Run every truncation of a scenario, one after the other.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let prepared = prepare(cfg)?;
    let series = cfg.truncations.iter().map(|t| prepared.run_truncation(*t)).collect::<Result<Vec<_>>>()?;
    Ok(prepared.finish(series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use scenario::{InertiaSpec, NamedInertia};

    fn attitude(nu: f64, orders: &[usize]) -> ScenarioConfig {
        ScenarioConfig {
            name: "t".into(),
            description: String::new(),
            kind: ScenarioKind::Attitude,
            inertia: InertiaSpec::Named(NamedInertia::J0),
            mass: 1.0,
            gravity: 9.81,
            initial: scenario::InitialCondition { nu: [nu; 3], ..Default::default() },
            torque: None,
            force: None,
            truncations: orders.iter().map(|n| TruncationConfig::new(*n, 1).unwrap()).collect(),
            sim: scenario::SimSettings { horizon_tlim: 5.0, steps_per_tlim: 200.0, ..Default::default() },
        }
    }

    #[test]
    fn horizon_and_step_follow_t_lim() {
        let cfg = attitude(0.01, &[2]);
        let p = cfg.params().unwrap();
        let (dt, ds, h, hs, tl) = resolve_sim(&cfg, &p).unwrap();
        let tl = tl.unwrap();
        assert_eq!((ds, hs), (StepSource::TLim, StepSource::TLim));
        assert!((h - 5.0 * tl).abs() < 1e-9 * tl && (dt - tl / 200.0).abs() < 1e-12 * tl);

        let mut rest = attitude(0.0, &[2]);
        assert!(matches!(resolve_sim(&rest, &p), Err(Error::Config(_))));
        rest.sim.horizon = Some(1.0);
        rest.sim.dt = Some(0.1);
        assert!(resolve_sim(&rest, &p).is_ok());
        assert!(matches!(prepare(&rest), Err(Error::Config(_))));
    }

    #[test]
    fn longer_ladders_track_better_early_on() {
        let r = run_scenario(&attitude(0.01, &[1, 3, 5])).unwrap();
        let at_end: Vec<f64> = r.series.iter().map(|s| *s.error("nu").unwrap().last().unwrap()).collect();
        assert!(at_end[0] > at_end[1] && at_end[1] > at_end[2], "{at_end:?}");
        assert!(r.series.iter().all(|s| s.error("nu").unwrap()[0] == 0.0));
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = attitude(0.1, &[2, 4]);
        assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }
}
