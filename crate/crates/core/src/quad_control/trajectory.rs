//! Rest-to-rest ninth-order polynomial references and the lifted reference state.

use nalgebra::{DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rigid_body::{euler_rate_matrix, rotation_from_euler, RigidBodyState, Vec3};

/// Derivatives constrained at each end of a segment (position through snap).
pub const BOUNDARY_ORDER: usize = 5;

/// Ninth-order polynomial per axis over `[0, duration]`, in normalized time `tau = t / duration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySegment {
    pub duration: f64,
    /// `coeffs[axis][i]` multiplies `tau^i`.
    pub coeffs: [[f64; 10]; 3],
}

fn falling(i: usize, d: usize) -> f64 {
    (0..d).map(|j| (i - j) as f64).product()
}

impl PolySegment {
    /// Segment matching `start[d]` and `end[d]` (the `d`-th time derivative, `d < 5`) at its ends.
    pub fn from_boundary(start: &[Vec3; BOUNDARY_ORDER], end: &[Vec3; BOUNDARY_ORDER], duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidParameter(format!("segment duration must be positive, got {duration}")));
        }
        let mut m = SMatrix::<f64, 10, 10>::zeros();
        for d in 0..BOUNDARY_ORDER {
            m[(d, d)] = falling(d, d);
            for i in d..10 {
                m[(BOUNDARY_ORDER + d, i)] = falling(i, d);
            }
        }
        let lu = m.lu();
        let mut coeffs = [[0.0; 10]; 3];
        for (axis, c) in coeffs.iter_mut().enumerate() {
            let mut rhs = SVector::<f64, 10>::zeros();
            for d in 0..BOUNDARY_ORDER {
                let scale = duration.powi(d as i32);
                rhs[d] = start[d][axis] * scale;
                rhs[BOUNDARY_ORDER + d] = end[d][axis] * scale;
            }
            let sol = lu.solve(&rhs).ok_or_else(|| Error::InvalidParameter("singular boundary system".into()))?;
            c.copy_from_slice(sol.as_slice());
        }
        Ok(Self { duration, coeffs })
    }

    /// Rest-to-rest move from `a` to `b`.
    pub fn rest_to_rest(a: Vec3, b: Vec3, duration: f64) -> Result<Self> {
        let mut s = [Vec3::zeros(); BOUNDARY_ORDER];
        let mut e = [Vec3::zeros(); BOUNDARY_ORDER];
        s[0] = a;
        e[0] = b;
        Self::from_boundary(&s, &e, duration)
    }

    /// `d`-th time derivative at local time `t` (clamped to the segment).
    pub fn eval(&self, t: f64, d: usize) -> Vec3 {
        let tau = (t / self.duration).clamp(0.0, 1.0);
        let scale = self.duration.powi(-(d as i32));
        Vec3::from_fn(|axis, _| {
            let c = &self.coeffs[axis];
            let mut acc = 0.0;
            for i in (d..10).rev() {
                acc = acc * tau + c[i] * falling(i, d);
            }
            acc * scale
        })
    }
}

/// Piecewise reference: moves between waypoints separated by dwells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseReference {
    /// `(start time, segment)`; a dwell is a segment between identical points.
    pub pieces: Vec<(f64, PolySegment)>,
    pub total_time: f64,
    pub waypoints: Vec<Vec3>,
    /// Times at which each move has finished and the dwell ends.
    pub dwell_ends: Vec<f64>,
}

impl PiecewiseReference {
    /// `d`-th derivative of the reference position at `t`; held at the ends outside `[0, total]`.
    pub fn eval(&self, t: f64, d: usize) -> Vec3 {
        let i = self.pieces.partition_point(|(start, _)| *start <= t).saturating_sub(1);
        let (start, seg) = &self.pieces[i];
        seg.eval(t - start, d)
    }
}

/// Square of the given side in the horizontal plane at `altitude`, starting and ending at the
/// origin corner. Each quarter of `total_time` is a move lasting `move_fraction` of it followed
/// by a dwell.
pub fn square_trajectory(side: f64, altitude: f64, total_time: f64, move_fraction: f64) -> Result<PiecewiseReference> {
    if !(total_time.is_finite() && total_time > 0.0) {
        return Err(Error::InvalidParameter(format!("total time must be positive, got {total_time}")));
    }
    if !(side.is_finite() && side > 0.0 && altitude.is_finite()) {
        return Err(Error::InvalidParameter("side must be positive and altitude finite".into()));
    }
    if !(move_fraction > 0.0 && move_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("move fraction must lie in (0, 1], got {move_fraction}")));
    }
    let corners = [
        Vec3::new(0.0, 0.0, altitude),
        Vec3::new(side, 0.0, altitude),
        Vec3::new(side, side, altitude),
        Vec3::new(0.0, side, altitude),
        Vec3::new(0.0, 0.0, altitude),
    ];
    let quarter = total_time / 4.0;
    let mv = quarter * move_fraction;
    let mut pieces = Vec::new();
    let mut dwell_ends = Vec::new();
    for k in 0..4 {
        let t0 = k as f64 * quarter;
        pieces.push((t0, PolySegment::rest_to_rest(corners[k], corners[k + 1], mv)?));
        if move_fraction < 1.0 {
            pieces.push((t0 + mv, PolySegment::rest_to_rest(corners[k + 1], corners[k + 1], quarter - mv)?));
        }
        dwell_ends.push(t0 + quarter);
    }
    Ok(PiecewiseReference { pieces, total_time, waypoints: corners.to_vec(), dwell_ends })
}

/// Stationary reference at `point` for `duration`.
pub fn hover_reference(point: Vec3, duration: f64) -> Result<PiecewiseReference> {
    let seg = PolySegment::rest_to_rest(point, point, duration)?;
    Ok(PiecewiseReference { pieces: vec![(0.0, seg)], total_time: duration, waypoints: vec![point], dwell_ends: vec![duration] })
}

/// Desired attitude and body rate from the reference acceleration, with zero yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatState {
    pub state: RigidBodyState,
    pub euler: Vec3,
    pub thrust_per_mass: f64,
}

fn tilt_from_acceleration(acc: &Vec3, gravity: f64) -> Result<(Vec3, f64)> {
    let f = acc + Vec3::new(0.0, 0.0, gravity);
    let n = f.norm();
    if n == 0.0 {
        return Err(Error::InvalidParameter("reference demands zero thrust".into()));
    }
    let b3 = f / n;
    let phi = (-b3.y).clamp(-1.0, 1.0).asin();
    let theta = b3.x.atan2(b3.z);
    Ok((Vec3::new(phi, theta, 0.0), n))
}

/// Physical state implied by the reference at `t`.
pub fn flat_state(reference: &PiecewiseReference, t: f64, gravity: f64) -> Result<FlatState> {
    let h = 1e-4;
    let (eta, thrust) = tilt_from_acceleration(&reference.eval(t, 2), gravity)?;
    let (eta_p, _) = tilt_from_acceleration(&reference.eval(t + h, 2), gravity)?;
    let (eta_m, _) = tilt_from_acceleration(&reference.eval(t - h, 2), gravity)?;
    let eta_dot = (eta_p - eta_m) / (2.0 * h);
    let nu = euler_rate_matrix(&eta)? * eta_dot;
    let r = rotation_from_euler(&eta);
    let state = RigidBodyState { p: reference.eval(t, 0), v: r.transpose() * reference.eval(t, 1), r, nu };
    Ok(FlatState { state, euler: eta, thrust_per_mass: thrust })
}

/// Sampled lifted reference and its feedforward `x_d' - A x_d`.
#[derive(Debug, Clone)]
pub struct LiftedReference {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub feedforward: Vec<DVector<f64>>,
    pub position: Vec<Vec3>,
}

impl LiftedReference {
    /// Sample index for time `t` (nearest, clamped).
    pub fn index(&self, t: f64) -> usize {
        if self.times.len() < 2 {
            return 0;
        }
        let dt = self.times[1] - self.times[0];
        ((t - self.times[0]) / dt).round().clamp(0.0, (self.times.len() - 1) as f64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn boundary_conditions_hold() {
        let start = [Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.5, 0.0, -1.0), Vec3::new(0.0, 2.0, 0.1), Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)];
        let end = [Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), Vec3::new(-0.3, 0.0, 0.0), Vec3::new(0.2, 0.2, 0.2), Vec3::zeros()];
        let seg = PolySegment::from_boundary(&start, &end, 2.5).unwrap();
        for d in 0..BOUNDARY_ORDER {
            assert!((seg.eval(0.0, d) - start[d]).amax() < 1e-9, "start d={d}");
            assert!((seg.eval(2.5, d) - end[d]).amax() < 1e-9, "end d={d}");
        }
    }

    #[test]
    fn rest_to_rest_is_odd_symmetric() {
        let seg = PolySegment::rest_to_rest(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), 3.0).unwrap();
        assert_relative_eq!(seg.eval(1.5, 0).x, 0.5, epsilon = 1e-12);
        for d in 1..BOUNDARY_ORDER {
            assert!(seg.eval(0.0, d).amax() < 1e-12 && seg.eval(3.0, d).amax() < 1e-12);
        }
        assert!(PolySegment::rest_to_rest(Vec3::zeros(), Vec3::zeros(), 0.0).is_err());
    }

    #[test]
    fn square_closes_and_is_smooth() {
        let sq = square_trajectory(2.0, 0.0, 70.0, 0.6).unwrap();
        assert!((sq.eval(70.0, 0) - sq.eval(0.0, 0)).norm() < 1e-9);
        assert_relative_eq!(sq.eval(17.5, 0), Vec3::new(2.0, 0.0, 0.0), epsilon = 1e-9);
        for (t0, _) in &sq.pieces[1..] {
            for d in 0..BOUNDARY_ORDER {
                assert!((sq.eval(t0 - 1e-9, d) - sq.eval(*t0, d)).norm() < 1e-6, "d={d} at {t0}");
            }
        }
        assert_eq!(sq.dwell_ends, vec![17.5, 35.0, 52.5, 70.0]);
    }

    #[test]
    fn hover_flat_state() {
        let sq = square_trajectory(2.0, 0.0, 70.0, 0.6).unwrap();
        let f = flat_state(&sq, 0.0, 9.81).unwrap();
        assert_eq!(f.euler, Vec3::zeros());
        assert!(f.state.nu.norm() < 1e-9);
        assert_relative_eq!(f.thrust_per_mass, 9.81, epsilon = 1e-12);
    }

    #[test]
    fn flat_attitude_points_thrust_along_acceleration() {
        let sq = square_trajectory(2.0, 0.0, 70.0, 0.6).unwrap();
        let t = 3.0;
        let f = flat_state(&sq, t, 9.81).unwrap();
        let demanded = sq.eval(t, 2) + Vec3::new(0.0, 0.0, 9.81);
        let b3 = f.state.r.column(2).into_owned();
        assert_relative_eq!(b3 * f.thrust_per_mass, demanded, epsilon = 1e-12);
    }
}
