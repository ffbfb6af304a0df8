//! Combined lifted model `x' = A x + B(x) zeta`, `zeta = [F; M]`.
//!
//! The lifted state stacks the attitude rungs first, then the position rungs:
//! `x = (nu_0, .., nu_{N_nu-1}, z_0, .., z_{N_z-1})`. Row blocks of `B(x)` are
//! `[0, J^-1 H_k]` for the attitude part and `[Xi_k, -Z_k]` for the position part.
//!
//! `Z_k` and `Xi_k` depend on the gravity, velocity and position rungs, which the
//! reported state does not carry. The simulator therefore propagates those rungs
//! alongside `x` as auxiliary truncated chains (`g`, `v`, `p`, `N_z` rungs each)
//! with their own lifted dynamics, and evaluates `B` from them
//! ([`BSource::Lifted`]). [`BSource::Nonlinear`] instead lifts a concurrently
//! integrated nonlinear state at every stage.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::attitude_lift::{
    attitude_state_matrix, build_attitude_ladder, extend_nu_ladder, jordan_permutation,
    ladder_from_entries, permute_rows, permute_square, AttitudeLadder, TruncationConfig,
};
use crate::error::{Error, Result};
use crate::ode::{step_count, Rk4};
use crate::position_lift::{
    build_position_ladder_with, position_state_matrix, CoefficientForm, PositionLadder,
};
use crate::rigid_body::{
    nonlinear_derivative, orthonormalize, rotation_from_euler, skew, BodyParams, InputSignal, RigidBodyState,
    Vec3, Wrench, GIMBAL_COS_TOL, STATE_DIM,
};

/// Where `B(x)` is evaluated during a lifted simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BSource {
    /// From the propagated lifted rungs.
    #[default]
    Lifted,
    /// From the lifting of a nonlinear state integrated alongside.
    Nonlinear,
}

/// Storage order of the lifted state during simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateLayout {
    /// Rung-major: `(nu_0, nu_1, ..)`.
    #[default]
    Block,
    /// Axis-major Jordan chains: `(nu_0(1), nu_1(1), .., nu_0(2), ..)`.
    Jordan,
}

/// Truncated gravity, velocity and position rungs carried next to `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxRungs {
    pub g: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub p: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub config: TruncationConfig,
    /// Block-ordered lifted state.
    pub x: DVector<f64>,
    pub aux: AuxRungs,
    /// Yaw angle integrated from the lifted rates (not observable from `g_0`).
    pub psi: f64,
}

impl LiftedState {
    pub fn nu(&self, k: usize) -> Vec3 {
        Vec3::from_column_slice(&self.x.as_slice()[3 * k..3 * k + 3])
    }

    pub fn z(&self, k: usize) -> Vec3 {
        let o = 3 * (self.config.n_nu + k);
        Vec3::from_column_slice(&self.x.as_slice()[o..o + 3])
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }

    fn flat_dim(config: &TruncationConfig) -> usize {
        config.dim() + 9 * config.n_z + 1
    }

    fn write_flat(&self, out: &mut [f64]) {
        let n = self.config.dim();
        out[..n].copy_from_slice(self.x.as_slice());
        let mut o = n;
        for chain in [&self.aux.g, &self.aux.v, &self.aux.p] {
            for r in chain {
                out[o..o + 3].copy_from_slice(r.as_slice());
                o += 3;
            }
        }
        out[o] = self.psi;
    }

    fn read_flat(config: &TruncationConfig, y: &[f64]) -> Self {
        let n = config.dim();
        let nz = config.n_z;
        let chain = |start: usize| -> Vec<Vec3> {
            (0..nz).map(|k| Vec3::from_column_slice(&y[start + 3 * k..start + 3 * k + 3])).collect()
        };
        Self {
            config: *config,
            x: DVector::from_column_slice(&y[..n]),
            aux: AuxRungs { g: chain(n), v: chain(n + 3 * nz), p: chain(n + 6 * nz) },
            psi: y[n + 9 * nz],
        }
    }
}

/// Lift a physical state into observable coordinates.
pub fn lift(s: &RigidBodyState, params: &BodyParams, config: &TruncationConfig) -> Result<LiftedState> {
    config.validate()?;
    let (att, pos) = full_ladders(s, params, config, CoefficientForm::Derived)?;
    let mut x = DVector::zeros(config.dim());
    for k in 0..config.n_nu {
        x.fixed_rows_mut::<3>(3 * k).copy_from(&att.nu[k]);
    }
    for k in 0..config.n_z {
        x.fixed_rows_mut::<3>(3 * (config.n_nu + k)).copy_from(&pos.z[k]);
    }
    let nz = config.n_z;
    Ok(LiftedState {
        config: *config,
        x,
        aux: AuxRungs { g: pos.g[..nz].to_vec(), v: pos.v[..nz].to_vec(), p: pos.p[..nz].to_vec() },
        psi: s.euler().z,
    })
}

fn full_ladders(
    s: &RigidBodyState,
    params: &BodyParams,
    config: &TruncationConfig,
    form: CoefficientForm,
) -> Result<(AttitudeLadder, PositionLadder)> {
    let len = config.n_nu.max(config.n_z);
    let att = build_attitude_ladder(s.nu, params, len)?;
    let pos = build_position_ladder_with(s, &att, params, config.n_z, form)?;
    Ok((att, pos))
}

/// Roll and pitch encoded in `g_0 = R^T g e3`.
pub fn roll_pitch_from_gravity(g0: &Vec3, gravity: f64) -> Result<(f64, f64)> {
    let norm = g0.norm();
    if !norm.is_finite() || (norm - gravity.abs()).abs() > 0.01 * gravity.abs() {
        return Err(Error::DegenerateGravityObservable { norm, expected: gravity.abs() });
    }
    let g = g0 / gravity;
    let phi = g.y.atan2(g.z);
    let theta = (-g.x).atan2((g.y * g.y + g.z * g.z).sqrt());
    if theta.cos() < GIMBAL_COS_TOL {
        return Err(Error::GimbalProximity { cos_theta: theta.cos() });
    }
    Ok((phi, theta))
}

/// Physical quantities `(nu, eta, p)` from a lifted state and a yaw angle.
pub fn reconstruct(x: &LiftedState, psi: f64, params: &BodyParams) -> Result<(Vec3, Vec3, Vec3)> {
    let (phi, theta) = roll_pitch_from_gravity(&x.aux.g[0], params.gravity)?;
    let eta = Vec3::new(phi, theta, psi);
    let p = rotation_from_euler(&eta) * x.z(0);
    Ok((x.nu(0), eta, p))
}

/// Body velocity `v_0 = z_1 - S^T(nu_0) z_0`; falls back to the carried rung when `N_z = 1`.
pub fn reconstruct_velocity(x: &LiftedState) -> Vec3 {
    if x.config.n_z >= 2 {
        x.z(1) - skew(&x.nu(0)).transpose() * x.z(0)
    } else {
        x.aux.v[0]
    }
}

/// Assembled lifted system for one truncation.
#[derive(Debug, Clone)]
pub struct LiftedSystem {
    pub config: TruncationConfig,
    pub params: BodyParams,
    pub form: CoefficientForm,
    a: DMatrix<f64>,
}

/// Everything `B(x)` needs at one evaluation point.
struct Coefficients {
    att: AttitudeLadder,
    pos: PositionLadder,
}

impl LiftedSystem {
    pub fn new(params: BodyParams, config: TruncationConfig) -> Result<Self> {
        config.validate()?;
        let n = config.dim();
        let nn = 3 * config.n_nu;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (nn, nn)).copy_from(&attitude_state_matrix(config.n_nu));
        a.view_mut((nn, nn), (n - nn, n - nn)).copy_from(&position_state_matrix(config.n_z));
        Ok(Self { config, params, form: CoefficientForm::Derived, a })
    }

    pub fn state_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Permutation to per-axis Jordan chains: three attitude chains followed by three position chains.
    pub fn jordan_permutation(&self) -> Vec<usize> {
        let nn = 3 * self.config.n_nu;
        let mut perm = jordan_permutation(self.config.n_nu, 3);
        perm.extend(jordan_permutation(self.config.n_z, 3).into_iter().map(|i| i + nn));
        perm
    }

    pub fn jordan_state_matrix(&self) -> DMatrix<f64> {
        permute_square(&self.a, &self.jordan_permutation())
    }

    fn coefficients_lifted(&self, x: &LiftedState) -> Result<Coefficients> {
        let c = &self.config;
        let carried: Vec<Vec3> = (0..c.n_nu).map(|k| x.nu(k)).collect();
        let nu = extend_nu_ladder(&carried, &self.params, c.n_nu.max(c.n_z));
        let att = ladder_from_entries(nu, &self.params);
        let pos = PositionLadder::from_rungs(
            x.aux.g.clone(),
            x.aux.v.clone(),
            x.aux.p.clone(),
            &att,
            &self.params,
            c.n_z,
            self.form,
        )?;
        Ok(Coefficients { att, pos })
    }

    fn coefficients_physical(&self, s: &RigidBodyState) -> Result<Coefficients> {
        let (att, pos) = full_ladders(s, &self.params, &self.config, self.form)?;
        Ok(Coefficients { att, pos })
    }

    fn assemble_b(&self, c: &Coefficients) -> DMatrix<f64> {
        let cfg = &self.config;
        let mut b = DMatrix::zeros(cfg.dim(), 6);
        for k in 0..cfg.n_nu {
            b.fixed_view_mut::<3, 3>(3 * k, 3).copy_from(&c.att.torque_gain(k, &self.params));
        }
        let o = 3 * cfg.n_nu;
        for k in 0..cfg.n_z {
            b.fixed_view_mut::<3, 3>(o + 3 * k, 0).copy_from(&c.pos.xi[k]);
            b.fixed_view_mut::<3, 3>(o + 3 * k, 3).copy_from(&(-c.pos.big_z[k]));
        }
        b
    }

    /// `B(x)` evaluated from the lifted state and its carried rungs.
    pub fn input_matrix(&self, x: &LiftedState) -> Result<DMatrix<f64>> {
        Ok(self.assemble_b(&self.coefficients_lifted(x)?))
    }

    /// `B(x)` evaluated at the lifting of a physical state.
    pub fn input_matrix_at(&self, s: &RigidBodyState) -> Result<DMatrix<f64>> {
        Ok(self.assemble_b(&self.coefficients_physical(s)?))
    }

    /// `A x + B(x) zeta` with `B` from the carried rungs.
    pub fn vector_field(&self, x: &LiftedState, u: &Wrench) -> Result<DVector<f64>> {
        let b = self.input_matrix(x)?;
        Ok(&self.a * &x.x + b * DVector::from_column_slice(u.stacked().as_slice()))
    }

    /// Derivative of the flat simulation vector (structured evaluation, block layout).
    fn flat_derivative(&self, x: &LiftedState, c: &Coefficients, u: &Wrench, dy: &mut [f64]) {
        let cfg = &self.config;
        let (f, m) = (u.force, u.torque);
        let ji = self.params.inertia_inv();
        for k in 0..cfg.n_nu {
            let mut d = ji * (c.att.big_h[k] * m);
            if k + 1 < cfg.n_nu {
                d += x.nu(k + 1);
            }
            dy[3 * k..3 * k + 3].copy_from_slice(d.as_slice());
        }
        let o = 3 * cfg.n_nu;
        for k in 0..cfg.n_z {
            let mut d = c.pos.xi[k] * f - c.pos.big_z[k] * m;
            if k + 1 < cfg.n_z {
                d += x.z(k + 1);
            }
            dy[o + 3 * k..o + 3 * k + 3].copy_from_slice(d.as_slice());
        }
        self.aux_derivative(x, c, u, &mut dy[cfg.dim()..]);
    }

    fn aux_derivative(&self, x: &LiftedState, c: &Coefficients, u: &Wrench, dy: &mut [f64]) {
        let nz = self.config.n_z;
        let (f, m) = (u.force, u.torque);
        let inv_m = 1.0 / self.params.mass;
        let next = |chain: &[Vec3], k: usize| if k + 1 < nz { chain[k + 1] } else { Vec3::zeros() };
        for k in 0..nz {
            let dg = next(&x.aux.g, k) - c.pos.big_g[k] * m;
            let dv = next(&x.aux.v, k) - x.aux.g[k] - c.pos.big_v[k] * m + c.pos.omega[k] * f * inv_m;
            let dp = next(&x.aux.p, k) + x.aux.v[k] - c.pos.big_p[k] * m;
            dy[3 * k..3 * k + 3].copy_from_slice(dg.as_slice());
            dy[3 * (nz + k)..3 * (nz + k) + 3].copy_from_slice(dv.as_slice());
            dy[3 * (2 * nz + k)..3 * (2 * nz + k) + 3].copy_from_slice(dp.as_slice());
        }
        // yaw rate from the lifted body rate and the roll/pitch carried by g_0
        let g = x.aux.g[0];
        let phi = g.y.atan2(g.z);
        let theta = (-g.x).atan2((g.y * g.y + g.z * g.z).sqrt());
        let nu = x.nu(0);
        dy[9 * nz] = (phi.sin() * nu.y + phi.cos() * nu.z) / theta.cos().max(GIMBAL_COS_TOL);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub dt: f64,
    pub horizon: f64,
    pub record_every: usize,
    pub b_source: BSource,
    pub layout: StateLayout,
    /// Magnitude treated as divergence, in addition to non-finite values.
    pub blowup: f64,
}

impl SimOptions {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            record_every: 1,
            b_source: BSource::Lifted,
            layout: StateLayout::Block,
            blowup: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LiftedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<LiftedState>,
    /// Time at which the state stopped being finite, if it did.
    pub diverged_at: Option<f64>,
}

/// Integrate the truncated lifted model with RK4.
///
/// `companion` is the physical initial state; it is required when `b_source` is
/// [`BSource::Nonlinear`]. Divergence ends the run early and is reported in
/// [`LiftedTrajectory::diverged_at`].
pub fn simulate_lifted_partial(
    sys: &LiftedSystem,
    x0: &LiftedState,
    input: &dyn InputSignal,
    companion: Option<&RigidBodyState>,
    opts: &SimOptions,
) -> Result<LiftedTrajectory> {
    if !(opts.dt.is_finite() && opts.dt > 0.0 && opts.horizon >= opts.dt) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and horizon >= dt (dt = {}, horizon = {})",
            opts.dt, opts.horizon
        )));
    }
    if x0.config != sys.config {
        return Err(Error::InvalidParameter("lifted state truncation does not match the system".into()));
    }
    let with_companion = opts.b_source == BSource::Nonlinear;
    if with_companion && companion.is_none() {
        return Err(Error::InvalidParameter("nonlinear B source needs the physical initial state".into()));
    }
    let cfg = sys.config;
    let n = cfg.dim();
    let flat = LiftedState::flat_dim(&cfg);
    let dim = flat + if with_companion { STATE_DIM } else { 0 };

    let perm = sys.jordan_permutation();
    let (aj, perm_rows) = match opts.layout {
        StateLayout::Block => (None, None),
        StateLayout::Jordan => (Some(sys.jordan_state_matrix()), Some(perm.clone())),
    };

    let mut y = vec![0.0; dim];
    x0.write_flat(&mut y[..flat]);
    if let Some(p) = &perm_rows {
        permute_in_place(&mut y[..n], p);
    }
    if with_companion {
        companion.unwrap().to_flat(&mut y[flat..]);
    }

    let unpack = |y: &[f64]| -> LiftedState {
        let mut s = LiftedState::read_flat(&cfg, &y[..flat]);
        if opts.layout == StateLayout::Jordan {
            let xj = s.x.clone();
            for (j, &p) in perm.iter().enumerate() {
                s.x[p] = xj[j];
            }
        }
        s
    };

    let mut traj = LiftedTrajectory::default();
    traj.times.push(0.0);
    traj.states.push(unpack(&y));

    let steps = step_count(opts.dt, opts.horizon);
    let mut rk = Rk4::new(dim);
    let mut failure: Option<Error> = None;
    for i in 0..steps {
        let t = i as f64 * opts.dt;
        rk.step(&mut y, t, opts.dt, |t, y, dy| {
            if failure.is_some() {
                dy.fill(0.0);
                return;
            }
            let u = input.wrench(t);
            let x = unpack(y);
            let coeffs = if with_companion {
                let s = RigidBodyState::from_flat(&y[flat..]);
                nonlinear_derivative(&s, &u, &sys.params).to_flat(&mut dy[flat..]);
                sys.coefficients_physical(&s)
            } else {
                sys.coefficients_lifted(&x)
            };
            let c = match coeffs {
                Ok(c) => c,
                Err(e) => {
                    failure = Some(e);
                    dy.fill(0.0);
                    return;
                }
            };
            match (&aj, &perm_rows) {
                (Some(aj), Some(p)) => {
                    // x_J' = A_J x_J + (P B) zeta
                    let bj = permute_rows(&sys.assemble_b(&c), p);
                    let xj = DVector::from_column_slice(&y[..n]);
                    let zeta = DVector::from_column_slice(u.stacked().as_slice());
                    let d = aj * xj + bj * zeta;
                    dy[..n].copy_from_slice(d.as_slice());
                    sys.aux_derivative(&x, &c, &u, &mut dy[n..flat]);
                }
                _ => sys.flat_derivative(&x, &c, &u, &mut dy[..flat]),
            }
        });
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let t_next = (i + 1) as f64 * opts.dt;
        if y.iter().any(|v| !v.is_finite() || v.abs() > opts.blowup) {
            traj.diverged_at = Some(t_next);
            break;
        }
        if with_companion {
            let mut s = RigidBodyState::from_flat(&y[flat..]);
            s.r = orthonormalize(&s.r);
            s.to_flat(&mut y[flat..]);
        }
        if (i + 1) % opts.record_every.max(1) == 0 || i + 1 == steps {
            traj.times.push(t_next);
            traj.states.push(unpack(&y));
        }
    }
    Ok(traj)
}

/// As [`simulate_lifted_partial`], but divergence is an error.
pub fn simulate_lifted(
    sys: &LiftedSystem,
    x0: &LiftedState,
    input: &dyn InputSignal,
    companion: Option<&RigidBodyState>,
    opts: &SimOptions,
) -> Result<LiftedTrajectory> {
    let traj = simulate_lifted_partial(sys, x0, input, companion, opts)?;
    match traj.diverged_at {
        Some(t) => Err(Error::NonFiniteState { t }),
        None => Ok(traj),
    }
}

fn permute_in_place(x: &mut [f64], perm: &[usize]) {
    let src = x.to_vec();
    for (j, &p) in perm.iter().enumerate() {
        x[j] = src[p];
    }
}
