//! Gravity, velocity and position observable ladders and the combined
//! low-order position ladder `z_k`.
//!
//! With the rotation-only transport `Phi_0 = I`,
//! `Phi_{k+1} = sum C(k,n) S^T(nu_n) Phi_{k-n}`, the base observables
//! `g_0 = R^T g e3`, `v_0 = R^T p_dot`, `p_0 = R^T p` climb as `a_k = Phi_k a_0`.
//! Along the forced flow (`zeta = [F; M]`):
//!
//! ```text
//! g_k' = g_{k+1}                 - G_k M
//! v_k' = v_{k+1} - g_k           - V_k M + (1/m) Omega_k F
//! p_k' = p_{k+1} + v_k           - P_k M
//! z_k' = z_{k+1}                 - Z_k M + Xi_k F
//! ```
//!
//! Gravity enters the velocity ladder with a minus sign, matching
//! `v' = F/m - nu x v - g R^T e3`. Consequently
//! `z_k = p_k + alpha_k v_{k-1} - beta_k g_{k-2}` and
//! `Z_k = P_k + alpha_k V_{k-1} - beta_k G_{k-2}`, `Xi_k = (alpha_k/m) Omega_{k-1}`,
//! with `alpha_k = k` and `beta_k = k (k-1) / 2`.
//!
//! The coefficient matrices follow from the product rule:
//! `A_{k+1} = sum C(k,n) [S^T(a_n) J^-1 H_{k-n} + S^T(nu_n) A_{k-n}]` for
//! `A in {G, V, P}` and `Omega_{k+1} = sum C(k,n) S^T(nu_n) Omega_{k-n}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attitude_lift::{binom, AttitudeLadder};
use crate::error::{Error, Result};
use crate::rigid_body::{skew, BodyParams, Mat3, RigidBodyState, Vec3};

/// Which variant of the coefficient recursions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientForm {
    /// Product-rule consistent recursions (passes the finite-difference oracle).
    #[default]
    Derived,
    /// As typeset in the source derivation: an extra `J^-1` in the `S^T(nu_n) A_{k-n}` terms
    /// and `S^T(v_n)` in the `Omega` recursion. Kept for comparison only.
    Literal,
}

/// `alpha_k = k`.
pub fn alpha(k: usize) -> u64 {
    k as u64
}

/// `beta_k = alpha_{k-1} + beta_{k-1}`, `beta_0 = 0`.
pub fn beta(k: usize) -> u64 {
    let (mut a, mut b) = (0u64, 0u64);
    for _ in 0..k {
        b += a;
        a += 1;
    }
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionLadder {
    pub g: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub p: Vec<Vec3>,
    pub z: Vec<Vec3>,
    pub big_g: Vec<Mat3>,
    pub big_v: Vec<Mat3>,
    pub big_p: Vec<Mat3>,
    pub omega: Vec<Mat3>,
    pub big_z: Vec<Mat3>,
    pub xi: Vec<Mat3>,
    pub alpha: Vec<u64>,
    pub beta: Vec<u64>,
}

/// Base observables `(g_0, v_0, p_0)` of a physical state.
pub fn base_observables(s: &RigidBodyState, params: &BodyParams) -> (Vec3, Vec3, Vec3) {
    let rt = s.r.transpose();
    let g0 = rt * Vec3::new(0.0, 0.0, params.gravity);
    // R^T p_dot = R^T R v = v
    let v0 = s.v;
    let p0 = rt * s.p;
    (g0, v0, p0)
}

/// Climb `a_{k+1} = sum C(k,n) S^T(nu_n) a_{k-n}` from the carried entries up to `len`.
pub fn extend_rotating_ladder(carried: &[Vec3], nu: &[Vec3], len: usize) -> Vec<Vec3> {
    let mut a: Vec<Vec3> = carried.iter().take(len).copied().collect();
    while a.len() < len {
        let k = a.len() - 1;
        let mut acc = Vec3::zeros();
        for n in 0..=k {
            // S^T(nu) a = a x nu
            acc += binom(k, n) * a[k - n].cross(&nu[n]);
        }
        a.push(acc);
    }
    a
}

fn coefficient_ladder(
    a: &[Vec3],
    att: &AttitudeLadder,
    j_inv: &Mat3,
    len: usize,
    form: CoefficientForm,
) -> Vec<Mat3> {
    let mut out = Vec::with_capacity(len);
    if len > 0 {
        out.push(Mat3::zeros());
    }
    while out.len() < len {
        let k = out.len() - 1;
        let mut acc = Mat3::zeros();
        for n in 0..=k {
            let c = binom(k, n);
            let star = skew(&a[n]).transpose() * j_inv * att.big_h[k - n];
            let dstar = match form {
                CoefficientForm::Derived => skew(&att.nu[n]).transpose() * out[k - n],
                CoefficientForm::Literal => skew(&att.nu[n]).transpose() * j_inv * out[k - n],
            };
            acc += c * (star + dstar);
        }
        out.push(acc);
    }
    out
}

fn omega_ladder(v: &[Vec3], nu: &[Vec3], len: usize, form: CoefficientForm) -> Vec<Mat3> {
    let mut out = Vec::with_capacity(len);
    if len > 0 {
        out.push(Mat3::identity());
    }
    while out.len() < len {
        let k = out.len() - 1;
        let mut acc = Mat3::zeros();
        for n in 0..=k {
            let driver = match form {
                CoefficientForm::Derived => nu[n],
                CoefficientForm::Literal => v[n],
            };
            acc += binom(k, n) * skew(&driver).transpose() * out[k - n];
        }
        out.push(acc);
    }
    out
}

impl PositionLadder {
    /// Ladder of length `n_z` from explicit `g`, `v`, `p` rungs (each of length `>= n_z`).
    ///
    /// `att` must hold at least `n_z` entries.
    pub fn from_rungs(
        g: Vec<Vec3>,
        v: Vec<Vec3>,
        p: Vec<Vec3>,
        att: &AttitudeLadder,
        params: &BodyParams,
        n_z: usize,
        form: CoefficientForm,
    ) -> Result<Self> {
        if n_z == 0 {
            return Err(Error::InvalidParameter("position ladder length must be >= 1".into()));
        }
        if att.len() < n_z || g.len() < n_z || v.len() < n_z || p.len() < n_z {
            return Err(Error::InvalidParameter(format!(
                "ladders too short for n_z = {n_z} (attitude {}, g {}, v {}, p {})",
                att.len(),
                g.len(),
                v.len(),
                p.len()
            )));
        }
        let j_inv = params.inertia_inv();
        let big_g = coefficient_ladder(&g, att, &j_inv, n_z, form);
        let big_v = coefficient_ladder(&v, att, &j_inv, n_z, form);
        let big_p = coefficient_ladder(&p, att, &j_inv, n_z, form);
        let omega = omega_ladder(&v, &att.nu, n_z, form);

        let alpha: Vec<u64> = (0..n_z).map(alpha).collect();
        let beta: Vec<u64> = (0..n_z).map(beta).collect();
        let inv_m = 1.0 / params.mass;
        let mut z = Vec::with_capacity(n_z);
        let mut big_z = Vec::with_capacity(n_z);
        let mut xi = Vec::with_capacity(n_z);
        for k in 0..n_z {
            let (a, b) = (alpha[k] as f64, beta[k] as f64);
            let mut zk = p[k];
            let mut zm = big_p[k];
            let mut xk = Mat3::zeros();
            if k >= 1 {
                zk += a * v[k - 1];
                zm += a * big_v[k - 1];
                xk = a * inv_m * omega[k - 1];
            }
            if k >= 2 {
                zk -= b * g[k - 2];
                zm -= b * big_g[k - 2];
            }
            z.push(zk);
            big_z.push(zm);
            xi.push(xk);
        }

        Ok(Self { g, v, p, z, big_g, big_v, big_p, omega, big_z, xi, alpha, beta })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Position-block input matrix, row block `k` = `[Xi_k, -Z_k]` (`3 N_z x 6`).
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut b = DMatrix::zeros(3 * n, 6);
        for k in 0..n {
            b.fixed_view_mut::<3, 3>(3 * k, 0).copy_from(&self.xi[k]);
            b.fixed_view_mut::<3, 3>(3 * k, 3).copy_from(&(-self.big_z[k]));
        }
        b
    }
}

/// Position ladder of a physical state. `att` must be the attitude ladder of the same state with
/// at least `n_z` entries.
pub fn build_position_ladder(
    s: &RigidBodyState,
    att: &AttitudeLadder,
    params: &BodyParams,
    n_z: usize,
) -> Result<PositionLadder> {
    build_position_ladder_with(s, att, params, n_z, CoefficientForm::Derived)
}

pub fn build_position_ladder_with(
    s: &RigidBodyState,
    att: &AttitudeLadder,
    params: &BodyParams,
    n_z: usize,
    form: CoefficientForm,
) -> Result<PositionLadder> {
    if att.len() < n_z {
        return Err(Error::InvalidParameter(format!(
            "attitude ladder has {} entries, need {n_z}",
            att.len()
        )));
    }
    let (g0, v0, p0) = base_observables(s, params);
    let g = extend_rotating_ladder(&[g0], &att.nu, n_z);
    let v = extend_rotating_ladder(&[v0], &att.nu, n_z);
    let p = extend_rotating_ladder(&[p0], &att.nu, n_z);
    PositionLadder::from_rungs(g, v, p, att, params, n_z, form)
}

/// Constant state matrix of the position system.
pub fn position_state_matrix(n_z: usize) -> DMatrix<f64> {
    crate::attitude_lift::block_shift(n_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude_lift::build_attitude_ladder;
    use crate::rigid_body::STANDARD_GRAVITY;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn j0(mass: f64) -> BodyParams {
        BodyParams::new(Vec3::new(0.0131, 0.020, 0.0234), mass, STANDARD_GRAVITY).unwrap()
    }

    fn ladder(s: &RigidBodyState, p: &BodyParams, n: usize) -> PositionLadder {
        let att = build_attitude_ladder(s.nu, p, n).unwrap();
        build_position_ladder(s, &att, p, n).unwrap()
    }

    #[test]
    fn coefficient_sequences() {
        assert_eq!((0..6).map(alpha).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!((0..6).map(beta).collect::<Vec<_>>(), vec![0, 0, 1, 3, 6, 10]);
        for k in 0..40 {
            assert_eq!(beta(k), (k * k.saturating_sub(1) / 2) as u64);
        }
    }

    #[test]
    fn rest_state_ladder() {
        let p = j0(1.0);
        let l = ladder(&RigidBodyState::at_rest(), &p, 5);
        let g0 = Vec3::new(0.0, 0.0, STANDARD_GRAVITY);
        assert_eq!(l.g[0], g0);
        assert!(l.g[1..].iter().all(|g| *g == Vec3::zeros()));
        assert_eq!(l.z[0], Vec3::zeros());
        assert_eq!(l.z[1], Vec3::zeros());
        // gravity pulls the unforced body down: z_2 = p_2 + 2 v_1 - g_0
        assert_eq!(l.z[2], -g0);
        assert_eq!(l.z[3], Vec3::zeros());
        assert_eq!(l.big_z[2], Mat3::zeros());
        assert_eq!(l.xi[2], Mat3::zeros());
        assert_eq!(l.xi[1], Mat3::identity());
    }

    #[test]
    fn zero_rate_kills_rotation_terms() {
        let p = j0(1.3);
        let s = RigidBodyState::from_euler(
            Vec3::new(1.0, -2.0, 0.5),
            Vec3::new(0.3, 0.1, -0.2),
            &Vec3::new(0.2, -0.1, 0.4),
            Vec3::zeros(),
        );
        let l = ladder(&s, &p, 4);
        for k in 1..4 {
            assert_eq!(l.g[k], Vec3::zeros());
            assert_eq!(l.v[k], Vec3::zeros());
            assert_eq!(l.p[k], Vec3::zeros());
        }
    }

    #[test]
    fn first_coefficients() {
        let p = j0(1.5);
        let s = RigidBodyState::from_euler(
            Vec3::new(1.0, -2.0, 0.5),
            Vec3::new(0.3, 0.1, -0.2),
            &Vec3::new(0.2, -0.1, 0.4),
            Vec3::new(0.3, -0.5, 0.2),
        );
        let l = ladder(&s, &p, 3);
        let ji = p.inertia_inv();
        assert_relative_eq!(l.big_g[1], skew(&l.g[0]).transpose() * ji, epsilon = 1e-12);
        assert_relative_eq!(l.big_v[1], skew(&l.v[0]).transpose() * ji, epsilon = 1e-12);
        assert_relative_eq!(l.big_p[1], skew(&l.p[0]).transpose() * ji, epsilon = 1e-12);
        assert_relative_eq!(l.omega[1], skew(&s.nu).transpose(), epsilon = 1e-15);
        assert_eq!(l.omega[0], Mat3::identity());
        assert_eq!(l.big_z[0], Mat3::zeros());
        assert_eq!(l.xi[0], Mat3::zeros());
        assert_relative_eq!(l.xi[2], 2.0 / 1.5 * l.omega[1], epsilon = 1e-15);
    }

    #[test]
    fn velocity_rate_sign_matches_newton() {
        // v_0' = v_1 - g_0 + F/m exactly reproduces the translational equation.
        let p = j0(1.2);
        let s = RigidBodyState::from_euler(
            Vec3::new(0.4, 0.2, -1.0),
            Vec3::new(1.0, -0.5, 0.25),
            &Vec3::new(0.3, 0.2, -0.7),
            Vec3::new(0.6, -0.1, 0.3),
        );
        let f = Vec3::new(0.5, -1.0, 12.0);
        let l = ladder(&s, &p, 2);
        let u = crate::rigid_body::Wrench { force: f, torque: Vec3::zeros() };
        let d = crate::rigid_body::nonlinear_derivative(&s, &u, &p);
        let from_ladder = l.v[1] - l.g[0] + l.omega[0] * f / p.mass;
        assert_relative_eq!(from_ladder, d.v_dot, epsilon = 1e-14);
    }

    #[test]
    fn rest_state_input_rows() {
        let p = j0(2.0);
        let l = ladder(&RigidBodyState::at_rest(), &p, 3);
        let b = l.input_matrix();
        assert_eq!(b.rows(0, 3).into_owned(), DMatrix::zeros(3, 6));
        let mut row1 = DMatrix::zeros(3, 6);
        row1.view_mut((0, 0), (3, 3)).fill_with_identity();
        row1.view_mut((0, 0), (3, 3)).scale_mut(0.5);
        assert_eq!(b.rows(3, 3).into_owned(), row1);
        // row 2 = [(2/m) Omega_1, -(P_2 + 2 V_1 - G_0)] = 0 at rest
        assert_eq!(b.rows(6, 3).into_owned(), DMatrix::zeros(3, 6));
        let one = ladder(&RigidBodyState::at_rest(), &p, 1);
        assert_eq!(one.input_matrix(), DMatrix::zeros(3, 6));
        let a = position_state_matrix(3);
        assert_eq!(&a * &a * &a, DMatrix::zeros(9, 9));
    }

    #[test]
    fn short_attitude_ladder_is_rejected() {
        let p = j0(1.0);
        let att = build_attitude_ladder(Vec3::zeros(), &p, 2).unwrap();
        assert!(build_position_ladder(&RigidBodyState::at_rest(), &att, &p, 3).is_err());
    }

    proptest! {
        #[test]
        fn rungs_are_linear_in_the_base(
            eta in prop::array::uniform3(-1.0..1.0f64),
            nu in prop::array::uniform3(-1.0..1.0f64),
            p in prop::array::uniform3(-5.0..5.0f64),
        ) {
            let params = j0(1.0);
            let s = RigidBodyState::from_euler(Vec3::from(p), Vec3::zeros(), &Vec3::from(eta), Vec3::from(nu));
            let mut s2 = s;
            s2.p *= 2.0;
            let (a, b) = (ladder(&s, &params, 6), ladder(&s2, &params, 6));
            for k in 0..6 {
                prop_assert!((b.p[k] - 2.0 * a.p[k]).norm() <= 1e-12 * (1.0 + a.p[k].norm()));
            }
        }
    }
}
