//! Linear quadratic control with integral action on the full-input surrogate `x' = A x + U`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{QuadModel, QUAD_STATE_DIM};
use super::riccati::{care_solve, CareSolution};
use crate::error::{Error, Result};

/// Diagonal weights on `[x - x_d, x_i]` and on `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqiWeights {
    pub q_state: Vec<f64>,
    pub q_integral: Vec<f64>,
    pub r: Vec<f64>,
}

impl LqiWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w, strict) in [("q_state", &self.q_state, false), ("q_integral", &self.q_integral, false), ("r", &self.r, true)] {
            if w.len() != QUAD_STATE_DIM {
                return Err(Error::Config(format!("weights.{name} needs {QUAD_STATE_DIM} entries, got {}", w.len())));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0 || (strict && *v == 0.0)) {
                return Err(Error::Config(format!("weights.{name} entries must be finite and {}", if strict { "positive" } else { "non-negative" })));
            }
        }
        Ok(())
    }
}

/// Augmented pair `([[A, 0], [-I, 0]], [I; 0])` over `X = [x - x_d, x_i]`.
pub fn augmented_system(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut aa = DMatrix::zeros(2 * n, 2 * n);
    aa.view_mut((0, 0), (n, n)).copy_from(a);
    aa.view_mut((n, 0), (n, n)).copy_from(&(-DMatrix::<f64>::identity(n, n)));
    let mut bb = DMatrix::zeros(2 * n, n);
    bb.view_mut((0, 0), (n, n)).copy_from(&DMatrix::<f64>::identity(n, n));
    (aa, bb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqiController {
    /// Gain over `X = [x - x_d, x_i]`.
    pub k: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub care: CareSolution,
    /// `x_i`, the integral of `x_d - x`.
    pub integral: DVector<f64>,
    /// Per-component bound on `x_i`.
    pub integral_clamp: f64,
    /// Components clamped on the last step.
    pub clamped: usize,
    /// Total component-clamp events.
    pub clamp_events: usize,
    last_error: Option<DVector<f64>>,
}

impl LqiController {
    pub fn synthesize(model: &QuadModel, weights: &LqiWeights, integral_clamp: f64) -> Result<Self> {
        weights.validate()?;
        let q = DMatrix::from_diagonal(&DVector::from_iterator(
            2 * QUAD_STATE_DIM,
            weights.q_state.iter().chain(&weights.q_integral).copied(),
        ));
        let r = DMatrix::from_diagonal(&DVector::from_column_slice(&weights.r));
        let (aa, bb) = augmented_system(&model.a);
        let care = care_solve(&aa, &bb, &q, &r)?;
        Ok(Self::from_gain(care.k.clone(), q, r, care, integral_clamp))
    }

    pub fn from_gain(k: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>, care: CareSolution, integral_clamp: f64) -> Self {
        let n = k.nrows();
        Self {
            k,
            q,
            r,
            care,
            integral: DVector::zeros(n),
            integral_clamp,
            clamped: 0,
            clamp_events: 0,
            last_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral.fill(0.0);
        self.last_error = None;
        self.clamped = 0;
        self.clamp_events = 0;
    }

    /// Advance the integrator by `dt` (trapezoidal) and return `U = -K X + U_d`.
    pub fn step(&mut self, x: &DVector<f64>, x_d: &DVector<f64>, u_d: &DVector<f64>, dt: f64) -> DVector<f64> {
        let tracking = x_d - x;
        if let Some(prev) = &self.last_error {
            self.integral += (prev + &tracking) * (0.5 * dt);
        }
        let bound = self.integral_clamp;
        self.clamped = 0;
        for v in self.integral.iter_mut() {
            if v.abs() > bound {
                *v = v.signum() * bound;
                self.clamped += 1;
            }
        }
        self.clamp_events += self.clamped;
        self.last_error = Some(tracking.clone());
        let n = x.len();
        let gx = self.k.columns(0, n) * (-tracking);
        let gi = self.k.columns(n, n) * &self.integral;
        u_d - gx - gi
    }
}
