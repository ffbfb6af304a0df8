//! Least-squares recovery of the physical input from a full-dimension command.

use nalgebra::{DVector, Vector4};
use serde::{Deserialize, Serialize};

use super::model::{QuadInputMatrix, QUAD_INPUT_DIM};
use crate::error::{Error, Result};

/// Pivot threshold relative to the largest diagonal entry of `R`.
pub const RANK_TOL: f64 = 1e-12;
/// Value reported when `B zeta` vanishes.
pub const DEGENERATE_RESIDUAL_PCT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub zeta: Vector4<f64>,
    /// `100 |B zeta - U| / |B zeta|`.
    pub residual_pct: f64,
    /// Set when `|B zeta| = 0` and the percentage is a placeholder.
    pub degenerate: bool,
}

/// `zeta = argmin |B zeta - U|` through a QR factorization.
pub fn recover_input(b: &QuadInputMatrix, u: &DVector<f64>) -> Result<Recovery> {
    let qr = b.qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    let rank = r.diagonal().iter().filter(|d| d.abs() > RANK_TOL * scale).count();
    if scale == 0.0 || rank < QUAD_INPUT_DIM {
        return Err(Error::RankDeficientB { rank, cols: QUAD_INPUT_DIM });
    }
    let qtu = qr.q().transpose() * u;
    let zeta = r.solve_upper_triangular(&qtu).ok_or(Error::RankDeficientB { rank, cols: QUAD_INPUT_DIM })?;
    let fitted = b * zeta;
    let fitted_norm = fitted.norm();
    let miss = (DVector::from_column_slice(fitted.as_slice()) - u).norm();
    let (residual_pct, degenerate) =
        if fitted_norm > 0.0 { (100.0 * miss / fitted_norm, false) } else { (DEGENERATE_RESIDUAL_PCT, true) };
    Ok(Recovery { zeta, residual_pct, degenerate })
}
