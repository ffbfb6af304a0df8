//! Two-rate closed loop: nonlinear plant with a zero-order-held lifted LQI controller.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::lqi::LqiController;
use super::model::{wrench_from_input, QuadModel};
use super::recovery::recover_input;
use super::trajectory::{flat_state, LiftedReference, PiecewiseReference};
use crate::error::{Error, Result};
use crate::harness::output::CsvWriter;
use crate::rigid_body::{step_state, RigidBodyState, Vec3};

/// Step used to differentiate the lifted reference.
pub const REFERENCE_DIFF_STEP: f64 = 1e-3;

/// Lifted reference and feedforward `x_d' - A x_d` on the controller grid `0, dt, .., total`.
pub fn lift_reference(model: &QuadModel, reference: &PiecewiseReference, control_dt: f64) -> Result<LiftedReference> {
    let n = (reference.total_time / control_dt).round() as usize;
    let g = model.params.gravity;
    let lifted_at = |t: f64| -> Result<DVector<f64>> { Ok(model.lift(&flat_state(reference, t, g)?.state)?.x) };
    let mut out = LiftedReference { times: Vec::with_capacity(n + 1), x: vec![], feedforward: vec![], position: vec![] };
    let h = REFERENCE_DIFF_STEP;
    for j in 0..=n {
        let t = j as f64 * control_dt;
        let x = lifted_at(t)?;
        let rate = (lifted_at(t + h)? - lifted_at(t - h)?) / (2.0 * h);
        out.feedforward.push(rate - &model.a * &x);
        out.x.push(x);
        out.position.push(reference.eval(t, 0));
        out.times.push(t);
    }
    Ok(out)
}

/// One row per controller tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadLog {
    pub times: Vec<f64>,
    pub position: Vec<Vec3>,
    pub reference_position: Vec<Vec3>,
    pub euler: Vec<Vec3>,
    pub reference_euler: Vec<Vec3>,
    pub thrust: Vec<f64>,
    pub torque: Vec<Vec3>,
    pub residual_pct: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub clamped: Vec<usize>,
}

impl QuadLog {
    pub fn tracking_error(&self) -> Vec<f64> {
        self.position.iter().zip(&self.reference_position).map(|(p, r)| (p - r).norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Long-format CSV with truncation label `label`.
    pub fn write_csv<W: Write>(&self, label: &str, out: W) -> Result<W> {
        let mut w = CsvWriter::new(out)?;
        let axes = ["x", "y", "z"];
        let vectors: [(&str, &Vec<Vec3>); 5] = [
            ("p", &self.position),
            ("p_d", &self.reference_position),
            ("eta", &self.euler),
            ("eta_d", &self.reference_euler),
            ("m", &self.torque),
        ];
        for (name, series) in vectors {
            for (i, axis) in axes.iter().enumerate() {
                let values: Vec<f64> = series.iter().map(|v| v[i]).collect();
                w.series(&self.times, &format!("{name}_{axis}"), label, &values)?;
            }
        }
        w.series(&self.times, "thrust", label, &self.thrust)?;
        w.series(&self.times, "delta_bu", label, &self.residual_pct)?;
        w.series(&self.times, "e_p", label, &self.tracking_error())?;
        let clamped: Vec<f64> = self.clamped.iter().map(|&c| c as f64).collect();
        w.series(&self.times, "clamped", label, &clamped)?;
        w.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopTiming {
    pub plant_dt: f64,
    pub control_dt: f64,
}

impl LoopTiming {
    pub fn substeps(&self) -> Result<usize> {
        let ratio = self.control_dt / self.plant_dt;
        let n = ratio.round();
        if !(self.plant_dt > 0.0 && self.control_dt > 0.0) || n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "controller period {} must be a positive integer multiple of the plant step {}",
                self.control_dt, self.plant_dt
            )));
        }
        Ok(n as usize)
    }
}

/// Run the loop from `initial` over the reference grid. The last tick is logged without a
/// following plant step.
pub fn closed_loop_sim(
    model: &QuadModel,
    ctrl: &mut LqiController,
    reference: &LiftedReference,
    reference_euler: &[Vec3],
    initial: &RigidBodyState,
    timing: LoopTiming,
) -> Result<QuadLog> {
    let substeps = timing.substeps()?;
    let mut s = *initial;
    let mut log = QuadLog::default();
    for (j, &t) in reference.times.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFiniteState { t });
        }
        let lifted = model.lift(&s)?;
        let b = model.input_matrix(&lifted);
        let u = ctrl.step(&lifted.x, &reference.x[j], &reference.feedforward[j], timing.control_dt);
        let rec = recover_input(&b, &u)?;
        if !rec.zeta.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        log.times.push(t);
        log.position.push(s.p);
        log.reference_position.push(reference.position[j]);
        log.euler.push(s.euler());
        log.reference_euler.push(reference_euler[j]);
        log.thrust.push(rec.zeta[0]);
        log.torque.push(Vec3::new(rec.zeta[1], rec.zeta[2], rec.zeta[3]));
        log.residual_pct.push(rec.residual_pct);
        log.degenerate.push(rec.degenerate);
        log.clamped.push(ctrl.clamped);
        if j + 1 == reference.times.len() {
            break;
        }
        let wrench = wrench_from_input(&rec.zeta);
        let hold = move |_t: f64| wrench;
        for i in 0..substeps {
            let ti = t + i as f64 * timing.plant_dt;
            s = step_state(&model.params, &s, &hold, ti, timing.plant_dt)?;
        }
    }
    Ok(log)
}

/// Scalar digest of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopStatistics {
    pub samples: usize,
    pub max_tracking_error: f64,
    /// Tracking error at the end of each dwell.
    pub corner_errors: Vec<f64>,
    pub min_thrust: f64,
    pub max_thrust: f64,
    pub max_torque_norm: f64,
    pub max_residual_pct: f64,
    pub mean_residual_pct: f64,
    pub median_residual_pct: f64,
    pub p95_residual_pct: f64,
    /// Fraction of ticks with `delta_bu` below the monitor threshold.
    pub fraction_residual_below: f64,
    pub residual_threshold_pct: f64,
    pub degenerate_ticks: usize,
    pub clamp_events: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

pub fn statistics(log: &QuadLog, checkpoints: &[f64], residual_threshold_pct: f64) -> LoopStatistics {
    let err = log.tracking_error();
    let at = |t: f64| {
        let i = log.times.iter().position(|&ti| ti >= t - 1e-9).unwrap_or(log.len().saturating_sub(1));
        err.get(i).copied().unwrap_or(f64::NAN)
    };
    let mut sorted = log.residual_pct.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = log.len().max(1) as f64;
    LoopStatistics {
        samples: log.len(),
        max_tracking_error: err.iter().copied().fold(0.0, f64::max),
        corner_errors: checkpoints.iter().map(|&t| at(t)).collect(),
        min_thrust: log.thrust.iter().copied().fold(f64::INFINITY, f64::min),
        max_thrust: log.thrust.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_torque_norm: log.torque.iter().map(|m| m.norm()).fold(0.0, f64::max),
        max_residual_pct: sorted.last().copied().unwrap_or(f64::NAN),
        mean_residual_pct: sorted.iter().sum::<f64>() / n,
        median_residual_pct: quantile(&sorted, 0.5),
        p95_residual_pct: quantile(&sorted, 0.95),
        fraction_residual_below: sorted.iter().filter(|&&r| r < residual_threshold_pct).count() as f64 / n,
        residual_threshold_pct,
        degenerate_ticks: log.degenerate.iter().filter(|&&d| d).count(),
        clamp_events: log.clamped.iter().sum(),
    }
}
