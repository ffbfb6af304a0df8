//! Continuous algebraic Riccati and Lyapunov solvers.
//!
//! The Riccati solve takes the stable invariant subspace of the Hamiltonian from its matrix
//! sign function (determinant-scaled Newton iteration) and then polishes the result with
//! Newton-Kleinman steps, each Lyapunov equation again solved by a sign iteration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_SIGN_ITERATIONS: usize = 100;
pub const MAX_NEWTON_STEPS: usize = 20;
pub const RESIDUAL_TOL: f64 = 1e-8;

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone().lu().try_inverse().ok_or(Error::NotStabilizable)
}

fn scale_factor(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() as f64;
    let lu = m.clone().lu();
    let u = lu.u();
    let log_det: f64 = u.diagonal().iter().map(|d| d.abs().ln()).sum();
    let c = (-log_det / n).exp();
    if c.is_finite() && c > 0.0 {
        c
    } else {
        1.0
    }
}

/// Matrix sign function by the scaled Newton iteration.
pub fn matrix_sign(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut z = m.clone();
    let mut last = f64::INFINITY;
    for it in 0..MAX_SIGN_ITERATIONS {
        let zi = inverse(&z)?;
        let c = if it < 10 { scale_factor(&z) } else { 1.0 };
        let next = (&z * c + zi / c) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if change < 1e-14 || (change < 1e-10 && change >= last) {
            return Ok(z);
        }
        last = change;
    }
    Err(Error::NoConvergence { iterations: MAX_SIGN_ITERATIONS, residual: last })
}

/// Solve `A^T X + X A + C = 0` for Hurwitz `A`.
pub fn lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut ak = a.clone();
    let mut xk = c.clone();
    let mut last = f64::INFINITY;
    for it in 0..MAX_SIGN_ITERATIONS {
        let ai = inverse(&ak)?;
        let s = if it < 10 { scale_factor(&ak) } else { 1.0 };
        let next_a = (&ak * s + &ai / s) * 0.5;
        let next_x = (&xk * s + ai.transpose() * &xk * &ai / s) * 0.5;
        let change = (&next_a - &ak).norm() / next_a.norm();
        ak = next_a;
        xk = next_x;
        if change < 1e-14 || (change < 1e-10 && change >= last) {
            let x = &xk * 0.5;
            return Ok((&x + x.transpose()) * 0.5);
        }
        last = change;
    }
    Err(Error::NoConvergence { iterations: MAX_SIGN_ITERATIONS, residual: last })
}

/// `A^T P + P A - P B R^-1 B^T P + Q`.
pub fn care_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r_inv: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let eig = f.eigenvalues().map_err(|_| Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
    Ok(eig.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    /// `R^-1 B^T P`.
    pub k: DMatrix<f64>,
    /// Frobenius norm of the residual over the spectral norm of `P`.
    pub relative_residual: f64,
    /// Spectral abscissa of `A - B K`.
    pub abscissa: f64,
    pub newton_steps: usize,
}

/// Stabilizing solution of `A^T P + P A - P B R^-1 B^T P + Q = 0`.
pub fn care_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<CareSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::InvalidParameter("Riccati operands have inconsistent shapes".into()));
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("R must be symmetric positive definite".into()))?;
    let r_inv = r_chol.inverse();
    let g = b * &r_inv * b.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let w = matrix_sign(&h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let svd = lhs.svd(true, true);
    if svd.singular_values.min() <= 1e-12 * svd.singular_values.max() {
        return Err(Error::NotStabilizable);
    }
    let p0 = svd.solve(&rhs, 0.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut p = (&p0 + p0.transpose()) * 0.5;

    let rel = |p: &DMatrix<f64>| care_residual(a, b, q, &r_inv, p).norm() / p.norm().max(f64::MIN_POSITIVE);
    let mut residual = rel(&p);
    let mut steps = 0;
    while steps < MAX_NEWTON_STEPS {
        let k = &r_inv * b.transpose() * &p;
        let ac = a - b * &k;
        if spectral_abscissa(&ac)? >= 0.0 {
            return Err(Error::NotStabilizable);
        }
        let c = q + k.transpose() * r * &k;
        let next = lyapunov(&ac, &c)?;
        let next_residual = rel(&next);
        steps += 1;
        if next_residual >= residual && residual < RESIDUAL_TOL {
            break;
        }
        p = next;
        residual = next_residual;
        if residual < 1e-13 {
            break;
        }
    }
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::NoConvergence { iterations: steps, residual });
    }
    let k = &r_inv * b.transpose() * &p;
    let abscissa = spectral_abscissa(&(a - b * &k))?;
    if abscissa >= 0.0 {
        return Err(Error::NotStabilizable);
    }
    let spectral = p.clone().singular_values().max();
    let relative_residual = care_residual(a, b, q, &r_inv, &p).norm() / spectral;
    Ok(CareSolution { p, k, relative_residual, abscissa, newton_steps: steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_integrator() {
        let s = care_solve(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_relative_eq!(s.p[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.k[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_unstable() {
        let s = care_solve(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_relative_eq!(s.p[(0, 0)], 1.0 + 2f64.sqrt(), epsilon = 1e-12);
        assert!(s.abscissa < 0.0);
    }

    #[test]
    fn double_integrator_closed_form() {
        // P = [[sqrt(3), 1], [1, sqrt(3)]] for Q = I, R = 1.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let s = care_solve(&a, &b, &DMatrix::identity(2, 2), &scalar(1.0)).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[3f64.sqrt(), 1.0, 1.0, 3f64.sqrt()]);
        assert!((&s.p - want).amax() < 1e-12);
    }

    #[test]
    fn unstabilizable_pair_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(care_solve(&a, &b, &DMatrix::identity(2, 2), &scalar(1.0)).is_err());
    }

    #[test]
    fn lyapunov_random_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let shift = spectral_abscissa(&m).unwrap() + 0.5;
        let a = m - DMatrix::identity(n, n) * shift;
        let c = DMatrix::identity(n, n);
        let x = lyapunov(&a, &c).unwrap();
        let res = a.transpose() * &x + &x * &a + c;
        assert!(res.amax() < 1e-10 * x.amax(), "{res}");
    }

    #[test]
    fn random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = 8;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
            let s = care_solve(&a, &b, &DMatrix::identity(n, n), &DMatrix::identity(3, 3)).unwrap();
            assert!(s.relative_residual < RESIDUAL_TOL);
            assert!(s.abscissa < 0.0);
            assert!(s.p.clone().symmetric_eigenvalues().min() > 0.0);
        }
    }
}
