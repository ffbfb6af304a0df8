//! Newton-Euler rigid-body dynamics with a rotation-matrix attitude.
//!
//! Frames: `p` lives in the inertial frame, `v` and `nu` in the body frame and
//! `r` maps body vectors to inertial ones. Gravity points along `-e3`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{step_count, Rk4};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Smallest admissible `cos(theta)` before Euler-rate extraction is refused.
pub const GIMBAL_COS_TOL: f64 = 1e-6;

/// Standard gravitational acceleration used by the presets.
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Cross-product matrix: `skew(a) * b == a x b`.
pub fn skew(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Inverse of [`skew`] for an antisymmetric matrix.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Z-Y-X (yaw-pitch-roll) rotation, `eta = (phi, theta, psi)`, body to inertial.
pub fn rotation_from_euler(eta: &Vec3) -> Mat3 {
    let (sf, cf) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    let (sp, cp) = eta.z.sin_cos();
    Mat3::new(
        ct * cp,
        sf * st * cp - cf * sp,
        cf * st * cp + sf * sp,
        ct * sp,
        sf * st * sp + cf * cp,
        cf * st * sp - sf * cp,
        -st,
        sf * ct,
        cf * ct,
    )
}

/// Recover `(phi, theta, psi)` from a rotation built by [`rotation_from_euler`].
pub fn euler_from_rotation(r: &Mat3) -> Vec3 {
    let theta = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let phi = r[(2, 1)].atan2(r[(2, 2)]);
    let psi = r[(1, 0)].atan2(r[(0, 0)]);
    Vec3::new(phi, theta, psi)
}

/// Matrix `W(eta)` with `nu = W(eta) * eta_dot`.
pub fn euler_rate_matrix(eta: &Vec3) -> Result<Mat3> {
    let (sf, cf) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    if ct.abs() < GIMBAL_COS_TOL {
        return Err(Error::GimbalProximity { cos_theta: ct });
    }
    Ok(Mat3::new(1.0, 0.0, -st, 0.0, cf, ct * sf, 0.0, -sf, ct * cf))
}

/// Euler-angle rates from body rates: `eta_dot = W(eta)^-1 nu`.
pub fn euler_rates(eta: &Vec3, nu: &Vec3) -> Result<Vec3> {
    let (sf, cf) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    if ct.abs() < GIMBAL_COS_TOL {
        return Err(Error::GimbalProximity { cos_theta: ct });
    }
    let psi_dot = (sf * nu.y + cf * nu.z) / ct;
    let theta_dot = cf * nu.y - sf * nu.z;
    let phi_dot = nu.x + st * psi_dot;
    Ok(Vec3::new(phi_dot, theta_dot, psi_dot))
}

/// Closest rotation to `m` in the Frobenius sense (polar factor).
pub fn orthonormalize(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * vt;
    }
    r
}

/// Mass properties and gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    inertia: Vec3,
    pub mass: f64,
    pub gravity: f64,
}

impl BodyParams {
    /// `inertia` holds the principal moments `(Jx, Jy, Jz)`.
    pub fn new(inertia: Vec3, mass: f64, gravity: f64) -> Result<Self> {
        if inertia.iter().any(|j| !(j.is_finite() && *j > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "inertia entries must be positive, got {:?}",
                inertia.as_slice()
            )));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !gravity.is_finite() {
            return Err(Error::InvalidParameter("gravity must be finite".into()));
        }
        Ok(Self { inertia, mass, gravity })
    }

    pub fn inertia_diag(&self) -> Vec3 {
        self.inertia
    }

    pub fn inertia(&self) -> Mat3 {
        Mat3::from_diagonal(&self.inertia)
    }

    pub fn inertia_inv(&self) -> Mat3 {
        Mat3::from_diagonal(&self.inertia.map(|j| 1.0 / j))
    }

    /// Spectral norm of `J^-1`.
    pub fn inertia_inv_norm(&self) -> f64 {
        1.0 / self.inertia.min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    /// Inertial position [m].
    pub p: Vec3,
    /// Body-frame linear velocity [m/s].
    pub v: Vec3,
    /// Body-to-inertial rotation.
    pub r: Mat3,
    /// Body-frame angular velocity [rad/s].
    pub nu: Vec3,
}

/// Number of scalars in [`RigidBodyState::to_flat`].
pub const STATE_DIM: usize = 18;

impl RigidBodyState {
    pub fn at_rest() -> Self {
        Self { p: Vec3::zeros(), v: Vec3::zeros(), r: Mat3::identity(), nu: Vec3::zeros() }
    }

    pub fn from_euler(p: Vec3, v: Vec3, eta: &Vec3, nu: Vec3) -> Self {
        Self { p, v, r: rotation_from_euler(eta), nu }
    }

    pub fn euler(&self) -> Vec3 {
        euler_from_rotation(&self.r)
    }

    /// Layout `[p, v, R (column major), nu]`.
    pub fn to_flat(&self, out: &mut [f64]) {
        out[0..3].copy_from_slice(self.p.as_slice());
        out[3..6].copy_from_slice(self.v.as_slice());
        out[6..15].copy_from_slice(self.r.as_slice());
        out[15..18].copy_from_slice(self.nu.as_slice());
    }

    pub fn from_flat(y: &[f64]) -> Self {
        Self {
            p: Vec3::from_column_slice(&y[0..3]),
            v: Vec3::from_column_slice(&y[3..6]),
            r: Mat3::from_column_slice(&y[6..15]),
            nu: Vec3::from_column_slice(&y[15..18]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).chain(self.r.iter()).chain(self.nu.iter()).all(|x| x.is_finite())
    }

    /// `|R^T R - I|` in the max-entry norm.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.r.transpose() * self.r - Mat3::identity()).amax()
    }
}

/// Time derivative of a [`RigidBodyState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub p_dot: Vec3,
    pub v_dot: Vec3,
    pub r_dot: Mat3,
    pub nu_dot: Vec3,
}

impl StateDerivative {
    pub fn to_flat(&self, out: &mut [f64]) {
        out[0..3].copy_from_slice(self.p_dot.as_slice());
        out[3..6].copy_from_slice(self.v_dot.as_slice());
        out[6..15].copy_from_slice(self.r_dot.as_slice());
        out[15..18].copy_from_slice(self.nu_dot.as_slice());
    }
}

/// External force and torque, both in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Stacked `[F; M]`.
    pub fn stacked(&self) -> nalgebra::Vector6<f64> {
        nalgebra::Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }
}

/// Time-varying input sampled at every integrator stage.
pub trait InputSignal: Send + Sync {
    fn wrench(&self, t: f64) -> Wrench;
}

impl<F> InputSignal for F
where
    F: Fn(f64) -> Wrench + Send + Sync,
{
    fn wrench(&self, t: f64) -> Wrench {
        self(t)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroInput;

impl InputSignal for ZeroInput {
    fn wrench(&self, _t: f64) -> Wrench {
        Wrench::zero()
    }
}

/// Right-hand side of the Newton-Euler equations:
/// `p' = R v`, `R' = R S(nu)`, `J nu' = M - nu x J nu`, `v' = F/m - nu x v - g R^T e3`.
pub fn nonlinear_derivative(s: &RigidBodyState, u: &Wrench, params: &BodyParams) -> StateDerivative {
    let j = params.inertia_diag();
    let gamma = s.nu.component_mul(&j);
    let nu_dot = (u.torque - s.nu.cross(&gamma)).component_div(&j);
    let g_body = s.r.transpose() * Vec3::new(0.0, 0.0, params.gravity);
    StateDerivative {
        p_dot: s.r * s.v,
        v_dot: u.force / params.mass - s.nu.cross(&s.v) - g_body,
        r_dot: s.r * skew(&s.nu),
        nu_dot,
    }
}

/// Sampled trajectory on a uniform grid.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<RigidBodyState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&RigidBodyState> {
        self.states.last()
    }
}

/// Fixed-step RK4 driver for the nonlinear model.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub dt: f64,
    pub horizon: f64,
    /// Keep every `record_every`-th sample (the initial sample is always kept).
    pub record_every: usize,
}

impl Integrator {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !(horizon.is_finite() && horizon >= dt) {
            return Err(Error::InvalidParameter(format!("horizon {horizon} must be at least dt {dt}")));
        }
        Ok(Self { dt, horizon, record_every: 1 })
    }

    pub fn record_every(mut self, n: usize) -> Self {
        self.record_every = n.max(1);
        self
    }

    pub fn steps(&self) -> usize {
        step_count(self.dt, self.horizon)
    }

    /// Integrate from `t0`. Fails with [`Error::NonFiniteState`] on overflow.
    pub fn run(
        &self,
        params: &BodyParams,
        s0: &RigidBodyState,
        input: &dyn InputSignal,
        t0: f64,
    ) -> Result<Trajectory> {
        let n = self.steps();
        let mut traj = Trajectory::default();
        traj.times.push(t0);
        traj.states.push(*s0);

        let mut y = [0.0; STATE_DIM];
        s0.to_flat(&mut y);
        let mut rk = Rk4::new(STATE_DIM);
        for i in 0..n {
            let t = t0 + i as f64 * self.dt;
            rk.step(&mut y, t, self.dt, |t, y, dy| {
                let s = RigidBodyState::from_flat(y);
                nonlinear_derivative(&s, &input.wrench(t), params).to_flat(dy);
            });
            let mut s = RigidBodyState::from_flat(&y);
            let t_next = t0 + (i + 1) as f64 * self.dt;
            if !s.is_finite() {
                return Err(Error::NonFiniteState { t: t_next });
            }
            s.r = orthonormalize(&s.r);
            s.to_flat(&mut y);
            if (i + 1) % self.record_every == 0 || i + 1 == n {
                traj.times.push(t_next);
                traj.states.push(s);
            }
        }
        Ok(traj)
    }
}

/// Single RK4 step of the nonlinear model with re-orthonormalization.
pub fn step_state(
    params: &BodyParams,
    s: &RigidBodyState,
    input: &dyn InputSignal,
    t: f64,
    dt: f64,
) -> Result<RigidBodyState> {
    let mut y = [0.0; STATE_DIM];
    s.to_flat(&mut y);
    Rk4::new(STATE_DIM).step(&mut y, t, dt, |t, y, dy| {
        nonlinear_derivative(&RigidBodyState::from_flat(y), &input.wrench(t), params).to_flat(dy);
    });
    let mut out = RigidBodyState::from_flat(&y);
    if !out.is_finite() {
        return Err(Error::NonFiniteState { t: t + dt });
    }
    out.r = orthonormalize(&out.r);
    Ok(out)
}
