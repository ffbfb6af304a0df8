//! Attitude observable ladder.
//!
//! Starting from `nu_0 = nu` and `gamma_k = J nu_k`, every rung is the next
//! time derivative of the torque-free angular velocity:
//!
//! ```text
//! nu_{k+1} = J^-1 sum_{n=0..k} C(k,n) S(gamma_n) nu_{k-n}
//! h_k      = S(gamma_k) J^-1 - S(nu_k)
//! H_{k+1}  = sum_{n=0..k} C(k,n) h_n H_{k-n},   H_0 = I
//! ```
//!
//! so that along any forced trajectory `d/dt nu_k = nu_{k+1} + J^-1 H_k M`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rigid_body::{skew, BodyParams, Mat3, Vec3};

/// Largest ladder length for which binomial coefficients are tabulated.
pub const MAX_LADDER_LEN: usize = 64;

/// Pascal's triangle, exact up to row [`MAX_LADDER_LEN`] - 1.
#[derive(Debug, Clone)]
pub struct Binomial {
    rows: Vec<Vec<u64>>,
}

impl Binomial {
    pub fn new(max_k: usize) -> Result<Self> {
        if max_k >= MAX_LADDER_LEN {
            return Err(Error::InvalidParameter(format!(
                "ladder order {max_k} exceeds the supported maximum {}",
                MAX_LADDER_LEN - 1
            )));
        }
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(max_k + 1);
        for k in 0..=max_k {
            let mut row = vec![1u64; k + 1];
            for n in 1..k {
                row[n] = rows[k - 1][n - 1] + rows[k - 1][n];
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn max_k(&self) -> usize {
        self.rows.len() - 1
    }

    #[inline]
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.rows[k][n] as f64
    }
}

thread_local! {
    static BINOMIAL: Binomial = Binomial::new(MAX_LADDER_LEN - 1).expect("static table");
}

/// `C(k, n)` as a float from a shared table.
#[inline]
pub fn binom(k: usize, n: usize) -> f64 {
    BINOMIAL.with(|b| b.get(k, n))
}

/// Truncation orders of the lifted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    /// Number of vector observables in the attitude ladder.
    pub n_nu: usize,
    /// Number of vector observables in the position ladder.
    pub n_z: usize,
}

impl TruncationConfig {
    pub fn new(n_nu: usize, n_z: usize) -> Result<Self> {
        let c = Self { n_nu, n_z };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nu == 0 || self.n_z == 0 {
            return Err(Error::Config(format!(
                "truncation orders must be >= 1 (got n_nu = {}, n_z = {})",
                self.n_nu, self.n_z
            )));
        }
        if self.n_nu.max(self.n_z) + 2 >= MAX_LADDER_LEN {
            return Err(Error::Config(format!("truncation order too large (max {})", MAX_LADDER_LEN - 3)));
        }
        Ok(())
    }

    /// Lifted state dimension `3 (N_nu + N_z)`.
    pub fn dim(&self) -> usize {
        3 * (self.n_nu + self.n_z)
    }

    pub fn label(&self) -> String {
        format!("nu{}z{}", self.n_nu, self.n_z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeLadder {
    pub nu: Vec<Vec3>,
    pub gamma: Vec<Vec3>,
    /// `H_k`, same length as `nu`.
    pub big_h: Vec<Mat3>,
    /// `h_k`, same length as `nu`.
    pub small_h: Vec<Mat3>,
}

impl AttitudeLadder {
    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// `J^-1 H_k`, the torque coefficient of `d/dt nu_k`.
    pub fn torque_gain(&self, k: usize, params: &BodyParams) -> Mat3 {
        params.inertia_inv() * self.big_h[k]
    }
}

/// Extend a partial ladder `nu_0..nu_{m-1}` to `len` entries with the torque-free recursion.
pub fn extend_nu_ladder(carried: &[Vec3], params: &BodyParams, len: usize) -> Vec<Vec3> {
    assert!(!carried.is_empty(), "ladder needs a base entry");
    let j = params.inertia_diag();
    let mut nu: Vec<Vec3> = carried.iter().take(len).copied().collect();
    let mut gamma: Vec<Vec3> = nu.iter().map(|n| n.component_mul(&j)).collect();
    while nu.len() < len {
        let k = nu.len() - 1;
        let mut acc = Vec3::zeros();
        for n in 0..=k {
            acc += binom(k, n) * gamma[n].cross(&nu[k - n]);
        }
        let next = acc.component_div(&j);
        gamma.push(next.component_mul(&j));
        nu.push(next);
    }
    nu
}

/// `h_k` and `H_k` for `k < nu.len()`.
pub fn build_h_matrices(nu: &[Vec3], params: &BodyParams) -> (Vec<Mat3>, Vec<Mat3>) {
    let j = params.inertia_diag();
    let j_inv = params.inertia_inv();
    let small_h: Vec<Mat3> = nu.iter().map(|n| skew(&n.component_mul(&j)) * j_inv - skew(n)).collect();
    let mut big_h = Vec::with_capacity(nu.len());
    if !nu.is_empty() {
        big_h.push(Mat3::identity());
    }
    while big_h.len() < nu.len() {
        let k = big_h.len() - 1;
        let mut acc = Mat3::zeros();
        for n in 0..=k {
            acc += binom(k, n) * small_h[n] * big_h[k - n];
        }
        big_h.push(acc);
    }
    (small_h, big_h)
}

/// Ladder of `len` entries rooted at `nu`.
pub fn build_attitude_ladder(nu: Vec3, params: &BodyParams, len: usize) -> Result<AttitudeLadder> {
    if len == 0 {
        return Err(Error::InvalidParameter("attitude ladder length must be >= 1".into()));
    }
    if len > MAX_LADDER_LEN {
        return Err(Error::InvalidParameter(format!("attitude ladder length {len} exceeds {MAX_LADDER_LEN}")));
    }
    Ok(ladder_from_entries(extend_nu_ladder(&[nu], params, len), params))
}

/// Ladder built around already-known entries (used when the rungs are lifted states).
pub fn ladder_from_entries(nu: Vec<Vec3>, params: &BodyParams) -> AttitudeLadder {
    let j = params.inertia_diag();
    let gamma = nu.iter().map(|n| n.component_mul(&j)).collect();
    let (small_h, big_h) = build_h_matrices(&nu, params);
    AttitudeLadder { nu, gamma, big_h, small_h }
}

/// Shift matrix with `I_3` on the first block superdiagonal (`N` blocks).
pub fn block_shift(n_blocks: usize) -> DMatrix<f64> {
    let n = 3 * n_blocks;
    let mut a = DMatrix::zeros(n, n);
    for k in 0..n_blocks.saturating_sub(1) {
        for i in 0..3 {
            a[(3 * k + i, 3 * (k + 1) + i)] = 1.0;
        }
    }
    a
}

/// Constant state matrix of the attitude system.
pub fn attitude_state_matrix(n_nu: usize) -> DMatrix<f64> {
    block_shift(n_nu)
}

/// Stacked `J^-1 H_k`, `k = 0..N_nu-1`, as a `3 N_nu x 3` matrix.
pub fn attitude_input_matrix(ladder: &AttitudeLadder, params: &BodyParams, n_nu: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(3 * n_nu, 3);
    for k in 0..n_nu {
        b.fixed_view_mut::<3, 3>(3 * k, 0).copy_from(&ladder.torque_gain(k, params));
    }
    b
}

/// Permutation taking the block layout `(x_0, .., x_{N-1})` of `blocks`-vectors to the per-axis
/// layout `(x_0(i), .., x_{N-1}(i))`, `i = 0..blocks`. Entry `j` holds the block-layout index that
/// lands at axis-layout position `j`.
pub fn jordan_permutation(n: usize, blocks: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(n * blocks);
    for i in 0..blocks {
        for k in 0..n {
            perm.push(blocks * k + i);
        }
    }
    perm
}

/// `P M P^T` for the permutation matrix `P` encoded by `perm`.
pub fn permute_square(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(perm.len(), perm.len(), |r, c| m[(perm[r], perm[c])])
}

/// `P M` (row permutation).
pub fn permute_rows(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(perm.len(), m.ncols(), |r, c| m[(perm[r], c)])
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigid_body::STANDARD_GRAVITY;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(j: [f64; 3]) -> BodyParams {
        BodyParams::new(Vec3::from(j), 1.0, STANDARD_GRAVITY).unwrap()
    }

    #[test]
    fn binomial_table() {
        let b = Binomial::new(10).unwrap();
        assert_eq!(b.get(4, 2), 6.0);
        assert_eq!(b.get(10, 3), 120.0);
        assert_eq!(binom(63, 31), 916_312_070_471_295_267.0);
        assert!(Binomial::new(64).is_err());
    }

    #[test]
    fn zero_velocity_is_a_fixed_point() {
        let l = build_attitude_ladder(Vec3::zeros(), &params([0.0131, 0.02, 0.0234]), 6).unwrap();
        assert!(l.nu.iter().all(|n| *n == Vec3::zeros()));
        assert!(l.small_h[0] == Mat3::zeros());
        assert!(l.big_h[1..].iter().all(|h| *h == Mat3::zeros()));
        assert_eq!(l.big_h[0], Mat3::identity());
    }

    #[test]
    fn spherical_inertia_is_linear() {
        let l = build_attitude_ladder(Vec3::new(0.3, -0.2, 0.5), &params([1.0, 1.0, 1.0]), 5).unwrap();
        assert!(l.nu[1..].iter().all(|n| n.norm() == 0.0));
        assert!(l.small_h.iter().all(|h| h.amax() < 1e-16));
        assert!(l.big_h[1..].iter().all(|h| h.amax() < 1e-16));
    }

    #[test]
    fn principal_axis_spin_has_no_higher_rungs() {
        let l = build_attitude_ladder(Vec3::new(0.0, 0.7, 0.0), &params([0.0131, 0.02, 0.0234]), 8).unwrap();
        assert!(l.nu[1..].iter().all(|n| *n == Vec3::zeros()));
    }

    #[test]
    fn first_rung_matches_euler_equation() {
        let p = params([0.0131, 0.02, 0.0234]);
        let nu = Vec3::new(0.1, 0.2, 0.3);
        let l = build_attitude_ladder(nu, &p, 3).unwrap();
        let euler = (-nu.cross(&nu.component_mul(&p.inertia_diag()))).component_div(&p.inertia_diag());
        assert_relative_eq!(l.nu[1], euler, epsilon = 1e-16);
        assert_relative_eq!(l.big_h[1], l.small_h[0]);
        assert!(build_attitude_ladder(nu, &p, 0).is_err());
    }

    #[test]
    fn extension_agrees_with_full_build() {
        let p = params([0.0131, 0.02, 0.0234]);
        let full = build_attitude_ladder(Vec3::new(0.4, -0.3, 0.9), &p, 7).unwrap();
        let ext = extend_nu_ladder(&full.nu[..3], &p, 7);
        assert_eq!(ext, full.nu);
    }

    #[test]
    fn state_matrix_structure() {
        let p = params([0.0131, 0.02, 0.0234]);
        assert_eq!(attitude_state_matrix(1), DMatrix::zeros(3, 3));
        let l = build_attitude_ladder(Vec3::new(0.1, 0.2, 0.3), &p, 1).unwrap();
        let b1 = attitude_input_matrix(&l, &p, 1);
        assert_relative_eq!(b1, DMatrix::from_iterator(3, 3, p.inertia_inv().iter().copied()));

        let rest = build_attitude_ladder(Vec3::zeros(), &p, 2).unwrap();
        let b2 = attitude_input_matrix(&rest, &p, 2);
        assert_relative_eq!(b2.rows(0, 3).into_owned(), DMatrix::from_iterator(3, 3, p.inertia_inv().iter().copied()));
        assert_eq!(b2.rows(3, 3).into_owned(), DMatrix::zeros(3, 3));

        let a = attitude_state_matrix(4);
        let a2 = &a * &a;
        for i in 0..6 {
            assert_eq!(a2[(i, i + 6)], 1.0);
        }
        assert_eq!(a2.iter().filter(|x| **x != 0.0).count(), 6);
        let a4 = &a2 * &a2;
        assert_eq!(a4, DMatrix::zeros(12, 12));
    }

    #[test]
    fn jordan_permutation_examples() {
        assert_eq!(jordan_permutation(1, 3), vec![0, 1, 2]);
        assert_eq!(jordan_permutation(2, 3), vec![0, 3, 1, 4, 2, 5]);
        let n = 4;
        let aj = permute_square(&attitude_state_matrix(n), &jordan_permutation(n, 3));
        let mut expected = DMatrix::zeros(3 * n, 3 * n);
        for axis in 0..3 {
            for k in 0..n - 1 {
                expected[(axis * n + k, axis * n + k + 1)] = 1.0;
            }
        }
        assert_eq!(aj, expected);
    }

    proptest! {
        #[test]
        fn jordan_permutation_is_a_bijection(n in 1usize..20, blocks in 1usize..7) {
            let perm = jordan_permutation(n, blocks);
            let mut seen = perm.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n * blocks).collect::<Vec<_>>());
            let inv = inverse_permutation(&perm);
            for (j, &p) in perm.iter().enumerate() {
                prop_assert_eq!(inv[p], j);
            }
        }

        #[test]
        fn gamma_is_inertia_times_nu(nu in prop::array::uniform3(-1.0..1.0f64)) {
            let p = params([0.0131, 0.02, 0.0234]);
            let l = build_attitude_ladder(Vec3::from(nu), &p, 6).unwrap();
            for (g, n) in l.gamma.iter().zip(&l.nu) {
                prop_assert_eq!(*g, p.inertia() * n);
            }
            prop_assert_eq!(l.big_h[0], Mat3::identity());
        }
    }
}
