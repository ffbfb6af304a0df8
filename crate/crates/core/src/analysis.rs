//! Controllability test and validity bounds of the truncated attitude model.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::attitude_lift::{build_attitude_ladder, TruncationConfig};
use crate::error::{Error, Result};
use crate::position_lift::build_position_ladder;
use crate::rigid_body::{BodyParams, Mat3, RigidBodyState, Vec3};

/// Unforced horizon, in multiples of `t_lim`, inside which a truncation is expected to track well.
pub const GOOD_WINDOW_FACTOR: f64 = 5.0;

/// Empirical crossover, in multiples of `t_lim`, after which longer ladders start doing worse.
pub const SWITCH_FACTOR: f64 = 9.0;

/// Largest `n` for which [`eulerian`] is exact in `u64`.
pub const EULERIAN_MAX_N: u64 = 20;

/// Eulerian number `<n, k>`: permutations of `n` elements with exactly `k` descents.
pub fn eulerian(n: u64, k: u64) -> Result<u64> {
    if n > EULERIAN_MAX_N {
        return Err(Error::Overflow(format!("eulerian number <{n}, {k}> exceeds u64 (n > {EULERIAN_MAX_N})")));
    }
    if n == 0 {
        return Ok(u64::from(k == 0));
    }
    if k >= n {
        return Ok(0);
    }
    let n = n as usize;
    let mut row = vec![1u64];
    for m in 2..=n {
        let mut next = vec![0u64; m];
        for (j, slot) in next.iter_mut().enumerate() {
            let keep = if j < row.len() { (j as u64 + 1).checked_mul(row[j]) } else { Some(0) };
            let step = if j >= 1 { (m as u64 - j as u64).checked_mul(row[j - 1]) } else { Some(0) };
            *slot = keep
                .zip(step)
                .and_then(|(a, b)| a.checked_add(b))
                .ok_or_else(|| Error::Overflow(format!("eulerian row {m}")))?;
        }
        row = next;
    }
    Ok(row[k as usize])
}

/// Row `<n, 0..n-1>` in floating point (no overflow guard needed for bounds).
fn eulerian_row_f64(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for m in 2..=n {
        let mut next = vec![0.0; m];
        for (j, slot) in next.iter_mut().enumerate() {
            let keep = row.get(j).map_or(0.0, |r| (j + 1) as f64 * r);
            let step = if j >= 1 { (m - j) as f64 * row[j - 1] } else { 0.0 };
            *slot = keep + step;
        }
        row = next;
    }
    row
}

/// `sum_{n=0..k} <k+1, n> a^n b^(k-n)`.
fn eulerian_poly(k: usize, a: f64, b: f64) -> f64 {
    eulerian_row_f64(k + 1)
        .iter()
        .enumerate()
        .map(|(n, e)| e * a.powi(n as i32) * b.powi((k - n) as i32))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inv_inertia_norm: f64,
    pub gamma_norm: f64,
    pub nu_norm: f64,
    pub torque_norm: f64,
    /// Bound on `|nu_{k+1}|`, index `k = 0..=K`.
    pub nu: Vec<f64>,
    /// Bound on `|gamma_{k+1}|`.
    pub gamma: Vec<f64>,
    /// Bound on `|H_k|`.
    pub big_h: Vec<f64>,
    /// Bound on `|d/dt nu_k|`.
    pub nu_dot: Vec<f64>,
    pub nu_relaxed: Vec<f64>,
    pub big_h_relaxed: Vec<f64>,
    pub nu_dot_relaxed: Vec<f64>,
    /// `None` at rest.
    pub t_lim: Option<f64>,
    pub t_lim_forced: Option<f64>,
    pub torque_integral: Option<f64>,
}

/// Norm bounds of the attitude ladder for `k = 0..=k_max`.
pub fn attitude_bounds(
    params: &BodyParams,
    gamma_norm: f64,
    nu_norm: f64,
    torque_norm: f64,
    k_max: usize,
) -> BoundReport {
    let ji = params.inertia_inv_norm();
    let a = ji * gamma_norm;
    let mut r = BoundReport {
        inv_inertia_norm: ji,
        gamma_norm,
        nu_norm,
        torque_norm,
        nu: Vec::with_capacity(k_max + 1),
        gamma: Vec::with_capacity(k_max + 1),
        big_h: Vec::with_capacity(k_max + 1),
        nu_dot: Vec::with_capacity(k_max + 1),
        nu_relaxed: Vec::with_capacity(k_max + 1),
        big_h_relaxed: Vec::with_capacity(k_max + 1),
        nu_dot_relaxed: Vec::with_capacity(k_max + 1),
        t_lim: (a > 0.0).then(|| 1.0 / a),
        t_lim_forced: None,
        torque_integral: None,
    };
    let mut fact = 1.0;
    for k in 0..=k_max {
        fact *= (k + 1) as f64;
        let h = eulerian_poly(k, a, nu_norm);
        r.gamma.push(gamma_norm * nu_norm * h);
        r.nu.push(ji * gamma_norm * nu_norm * h);
        r.big_h.push(h);
        r.nu_dot.push(h * ji * (gamma_norm * nu_norm + torque_norm));
        let ak = a.powi(k as i32);
        r.nu_relaxed.push(ak * a * a * fact);
        r.big_h_relaxed.push(ak * fact);
        r.nu_dot_relaxed.push(ak * fact * (a * a + ji * torque_norm));
    }
    r
}

/// Bound on `|a_{k+1}|` for a rotating ladder (`g`, `v` or `p`) with base norm `a0_norm`.
pub fn rotating_ladder_bound(params: &BodyParams, gamma_norm: f64, nu_norm: f64, a0_norm: f64, k: usize) -> f64 {
    a0_norm * nu_norm * eulerian_poly(k, params.inertia_inv_norm() * gamma_norm, nu_norm)
}

/// `1 / (|J^-1| |gamma_0|)`.
pub fn t_lim(params: &BodyParams, gamma0: &Vec3) -> Result<f64> {
    let a = params.inertia_inv_norm() * gamma0.norm();
    if a == 0.0 {
        return Err(Error::InfiniteHorizon);
    }
    if !a.is_finite() {
        return Err(Error::InvalidParameter("angular momentum must be finite".into()));
    }
    Ok(1.0 / a)
}

/// Forced horizon `1 / (|J^-1| gamma_rms ((k+1) M_int)^(1/k))`.
pub fn t_lim_forced(params: &BodyParams, gamma_rms: f64, torque_integral: f64, k: usize) -> Result<f64> {
    if !(gamma_rms.is_finite() && gamma_rms > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma_rms must be positive, got {gamma_rms}")));
    }
    if !(torque_integral.is_finite() && torque_integral > 0.0) {
        return Err(Error::InvalidParameter(format!("torque integral must be positive, got {torque_integral}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let root = ((k as f64 + 1.0) * torque_integral).powf(1.0 / k as f64);
    Ok(1.0 / (params.inertia_inv_norm() * gamma_rms * root))
}

/// Root mean square of `|J nu|` over samples.
pub fn gamma_rms(params: &BodyParams, nu: &[Vec3]) -> f64 {
    if nu.is_empty() {
        return 0.0;
    }
    let j = params.inertia_diag();
    let s: f64 = nu.iter().map(|n| n.component_mul(&j).norm_squared()).sum();
    (s / nu.len() as f64).sqrt()
}

/// How the rank threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTolerance {
    /// `6 * eps * sigma_max`.
    #[default]
    Default,
    /// `factor * sigma_max`.
    Relative(f64),
    Absolute(f64),
}

impl RankTolerance {
    fn resolve(&self, sigma_max: f64) -> f64 {
        match *self {
            RankTolerance::Default => 6.0 * f64::EPSILON * sigma_max,
            RankTolerance::Relative(r) => r * sigma_max,
            RankTolerance::Absolute(a) => a,
        }
    }
}

/// Diagonal scaling applied before the singular value decomposition.
///
/// Rank is invariant under nonsingular diagonal scaling, but the blocks of the test matrix
/// differ by many orders of magnitude at small rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equilibration {
    None,
    /// Alternating row/column max-norm scaling.
    #[default]
    Ruiz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllabilityReport {
    /// Unscaled test matrix.
    pub matrix: Matrix6<f64>,
    pub rank: usize,
    pub full_rank: bool,
    /// Of the equilibrated matrix, descending.
    pub singular_values: Vector6<f64>,
    pub tolerance: f64,
    pub equilibration: Equilibration,
}

fn ruiz(m: &Matrix6<f64>, sweeps: usize) -> Matrix6<f64> {
    let mut s = *m;
    for _ in 0..sweeps {
        for i in 0..6 {
            let r = s.row(i).amax();
            if r > 0.0 {
                s.row_mut(i).scale_mut(1.0 / r.sqrt());
            }
        }
        for j in 0..6 {
            let c = s.column(j).amax();
            if c > 0.0 {
                s.column_mut(j).scale_mut(1.0 / c.sqrt());
            }
        }
    }
    s
}

/// Rank test of `[Xi, -Z; 0, J^-1 H]` built from the last rung of each ladder.
pub fn controllability_check(
    xi_last: &Mat3,
    z_last: &Mat3,
    h_last: &Mat3,
    params: &BodyParams,
    tol: RankTolerance,
    equilibration: Equilibration,
) -> ControllabilityReport {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(xi_last);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-z_last));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(params.inertia_inv() * h_last));
    let scaled = match equilibration {
        Equilibration::None => m,
        Equilibration::Ruiz => ruiz(&m, 30),
    };
    let mut sv = scaled.singular_values();
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    let tolerance = tol.resolve(sv[0]);
    let rank = sv.iter().filter(|s| **s > tolerance).count();
    ControllabilityReport { matrix: m, rank, full_rank: rank == 6, singular_values: sv, tolerance, equilibration }
}

/// [`controllability_check`] at the lifting of a physical state.
pub fn controllability_at(
    s: &RigidBodyState,
    params: &BodyParams,
    config: &TruncationConfig,
    tol: RankTolerance,
    equilibration: Equilibration,
) -> Result<ControllabilityReport> {
    config.validate()?;
    let att = build_attitude_ladder(s.nu, params, config.n_nu.max(config.n_z))?;
    let pos = build_position_ladder(s, &att, params, config.n_z)?;
    let (kz, kn) = (config.n_z - 1, config.n_nu - 1);
    Ok(controllability_check(&pos.xi[kz], &pos.big_z[kz], &att.big_h[kn], params, tol, equilibration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigid_body::STANDARD_GRAVITY;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn j0() -> BodyParams {
        BodyParams::new(Vec3::new(0.0131, 0.020, 0.0234), 1.0, STANDARD_GRAVITY).unwrap()
    }

    fn descents_histogram(n: usize) -> Vec<u64> {
        fn rec(perm: &mut Vec<usize>, used: &mut [bool], n: usize, hist: &mut [u64]) {
            if perm.len() == n {
                hist[perm.windows(2).filter(|w| w[0] > w[1]).count()] += 1;
                return;
            }
            for i in 0..n {
                if !used[i] {
                    used[i] = true;
                    perm.push(i);
                    rec(perm, used, n, hist);
                    perm.pop();
                    used[i] = false;
                }
            }
        }
        let mut hist = vec![0; n.max(1)];
        rec(&mut Vec::new(), &mut vec![false; n], n, &mut hist);
        hist
    }

    #[test]
    fn eulerian_matches_descent_counts() {
        for n in 1..=8u64 {
            let hist = descents_histogram(n as usize);
            for k in 0..n {
                assert_eq!(eulerian(n, k).unwrap(), hist[k as usize], "<{n},{k}>");
            }
        }
        assert_eq!(eulerian(3, 1).unwrap(), 4);
        assert_eq!(eulerian(4, 1).unwrap(), 11);
        assert_eq!(eulerian(0, 0).unwrap(), 1);
        assert_eq!(eulerian(5, 7).unwrap(), 0);
        assert!(eulerian(20, 10).is_ok());
        assert!(matches!(eulerian(21, 3), Err(Error::Overflow(_))));
    }

    #[test]
    fn eulerian_rows_sum_to_factorial() {
        let mut f = 1u64;
        for n in 1..=20u64 {
            f *= n;
            let s: u64 = (0..n).map(|k| eulerian(n, k).unwrap()).sum();
            assert_eq!(s, f);
        }
    }

    #[test]
    fn rest_bounds_vanish() {
        let r = attitude_bounds(&j0(), 0.0, 0.0, 0.0, 6);
        assert!(r.nu.iter().all(|b| *b == 0.0));
        assert!(r.big_h[1..].iter().all(|b| *b == 0.0));
        assert_eq!(r.big_h[0], 1.0);
        assert_eq!(r.t_lim, None);
    }

    #[test]
    fn t_lim_examples() {
        let p = BodyParams::new(Vec3::new(0.5, 1.0, 2.0), 1.0, STANDARD_GRAVITY).unwrap();
        assert_relative_eq!(t_lim(&p, &Vec3::new(0.0, 0.3, 0.4)).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(t_lim(&p, &Vec3::zeros()), Err(Error::InfiniteHorizon)));

        let nu = Vec3::repeat(0.001);
        let g = nu.component_mul(&j0().inertia_diag());
        let expected = 0.0131 / g.norm();
        assert_relative_eq!(t_lim(&j0(), &g).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(t_lim(&j0(), &(g * 10.0)).unwrap(), expected / 10.0, max_relative = 1e-14);
    }

    #[test]
    fn forced_limit_approaches_unforced_form() {
        let g = 2e-5;
        let base = 1.0 / (j0().inertia_inv_norm() * g);
        let t = t_lim_forced(&j0(), g, 0.3, 4000).unwrap();
        assert_relative_eq!(t, base, max_relative = 5e-3);
        assert!(t_lim_forced(&j0(), 0.0, 0.3, 2).is_err());
        assert!(t_lim_forced(&j0(), g, -1.0, 2).is_err());
        assert!(t_lim_forced(&j0(), g, 1.0, 0).is_err());
    }

    #[test]
    fn rank_drops_at_rest() {
        let cfg = TruncationConfig::new(4, 4).unwrap();
        let r = controllability_at(&RigidBodyState::at_rest(), &j0(), &cfg, RankTolerance::Default, Equilibration::Ruiz).unwrap();
        assert!(!r.full_rank);
        assert!(r.rank <= 3);
        assert!(r.tolerance > 0.0);
    }

    #[test]
    fn spherical_body_loses_rank() {
        let p = BodyParams::new(Vec3::repeat(0.02), 1.0, STANDARD_GRAVITY).unwrap();
        let mut s = RigidBodyState::at_rest();
        s.nu = Vec3::new(0.3, 0.1, -0.2);
        let r = controllability_at(&s, &p, &TruncationConfig::new(3, 2).unwrap(), RankTolerance::Default, Equilibration::Ruiz).unwrap();
        assert!(!r.full_rank);
    }

    proptest! {
        #[test]
        fn relaxed_bounds_dominate(
            j in prop::array::uniform3(0.005..2.0f64),
            nu in prop::array::uniform3(-1.0..1.0f64),
            m in 0.0..1.0f64,
        ) {
            let p = BodyParams::new(Vec3::from(j), 1.0, STANDARD_GRAVITY).unwrap();
            let nu = Vec3::from(nu);
            let g = nu.component_mul(&p.inertia_diag());
            let r = attitude_bounds(&p, g.norm(), nu.norm(), m, 12);
            for k in 0..=12 {
                prop_assert!(r.nu[k] >= 0.0 && r.big_h[k] >= 0.0);
                prop_assert!(r.nu_relaxed[k] >= r.nu[k] * (1.0 - 1e-12));
                prop_assert!(r.big_h_relaxed[k] >= r.big_h[k] * (1.0 - 1e-12));
                prop_assert!(r.nu_dot_relaxed[k] >= r.nu_dot[k] * (1.0 - 1e-12));
                prop_assert!((r.nu[k] - p.inertia_inv_norm() * r.gamma[k]).abs() <= 1e-12 * r.nu[k]);
            }
        }
    }
}
