//! Reduced lifted quadrotor model: `x = (z_0, .., z_4, nu_0z)`, input `[T; M]`.

use nalgebra::{DMatrix, DVector, SMatrix, Vector4};

use crate::attitude_lift::{block_shift, build_attitude_ladder};
use crate::error::{Error, Result};
use crate::position_lift::{build_position_ladder, PositionLadder};
use crate::rigid_body::{BodyParams, RigidBodyState, Vec3, Wrench};

/// Position observables kept by the reduced model.
pub const QUAD_N_Z: usize = 5;
/// `3 * QUAD_N_Z + 1`.
pub const QUAD_STATE_DIM: usize = 3 * QUAD_N_Z + 1;
/// Thrust plus three torques.
pub const QUAD_INPUT_DIM: usize = 4;
/// Largest tolerated `|Ix - Iy| / Ix`.
pub const SYMMETRY_TOL: f64 = 1e-3;

pub type QuadInputMatrix = SMatrix<f64, QUAD_STATE_DIM, QUAD_INPUT_DIM>;

/// Index of `z_k[axis]` in the reduced state.
pub const fn z_index(k: usize, axis: usize) -> usize {
    3 * k + axis
}

/// Index of the yaw rate.
pub const YAW_INDEX: usize = 3 * QUAD_N_Z;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadModel {
    pub params: BodyParams,
    pub a: DMatrix<f64>,
}

/// Reduced model for a body symmetric about its z axis.
pub fn build_quad_model(params: &BodyParams) -> Result<QuadModel> {
    let j = params.inertia_diag();
    let asym = (j.x - j.y).abs() / j.x;
    if asym > SYMMETRY_TOL {
        return Err(Error::SymmetryViolation(asym));
    }
    let mut a = DMatrix::zeros(QUAD_STATE_DIM, QUAD_STATE_DIM);
    a.view_mut((0, 0), (3 * QUAD_N_Z, 3 * QUAD_N_Z)).copy_from(&block_shift(QUAD_N_Z));
    Ok(QuadModel { params: *params, a })
}

/// Reduced lifted state with the ladders it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadLift {
    pub x: DVector<f64>,
    pub ladder: PositionLadder,
}

impl QuadModel {
    pub fn lift(&self, s: &RigidBodyState) -> Result<QuadLift> {
        let att = build_attitude_ladder(s.nu, &self.params, QUAD_N_Z)?;
        let ladder = build_position_ladder(s, &att, &self.params, QUAD_N_Z)?;
        let mut x = DVector::zeros(QUAD_STATE_DIM);
        for (k, z) in ladder.z.iter().enumerate() {
            x.fixed_rows_mut::<3>(3 * k).copy_from(z);
        }
        x[YAW_INDEX] = s.nu.z;
        Ok(QuadLift { x, ladder })
    }

    /// `B(x)`: row block `k` is `[Xi_k e3, -Z_k]`, the last row `[0, 0, 0, 1/Iz]`.
    pub fn input_matrix(&self, lifted: &QuadLift) -> QuadInputMatrix {
        let mut b = QuadInputMatrix::zeros();
        for k in 0..QUAD_N_Z {
            b.fixed_view_mut::<3, 1>(3 * k, 0).copy_from(&lifted.ladder.xi[k].column(2));
            b.fixed_view_mut::<3, 3>(3 * k, 1).copy_from(&(-lifted.ladder.big_z[k]));
        }
        b[(YAW_INDEX, 3)] = 1.0 / self.params.inertia_diag().z;
        b
    }

    pub fn input_matrix_at(&self, s: &RigidBodyState) -> Result<QuadInputMatrix> {
        Ok(self.input_matrix(&self.lift(s)?))
    }

    /// `A x + B(x) zeta`.
    pub fn vector_field(&self, lifted: &QuadLift, zeta: &Vector4<f64>) -> DVector<f64> {
        &self.a * &lifted.x + DVector::from_column_slice((self.input_matrix(lifted) * zeta).as_slice())
    }

    /// Input that holds the body level and still.
    pub fn hover_input(&self) -> Vector4<f64> {
        Vector4::new(self.params.mass * self.params.gravity, 0.0, 0.0, 0.0)
    }
}

/// Body-frame wrench for a reduced input `[T; M]`.
pub fn wrench_from_input(zeta: &Vector4<f64>) -> Wrench {
    Wrench { force: Vec3::new(0.0, 0.0, zeta[0]), torque: Vec3::new(zeta[1], zeta[2], zeta[3]) }
}
