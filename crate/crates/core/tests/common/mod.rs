//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use koopman_core::attitude_lift::build_attitude_ladder;
use koopman_core::position_lift::{build_position_ladder_with, CoefficientForm, PositionLadder};
use koopman_core::rigid_body::{
    nonlinear_derivative, orthonormalize, rotation_from_euler, BodyParams, RigidBodyState, Vec3, Wrench,
    STANDARD_GRAVITY,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const J0: [f64; 3] = [0.0131, 0.020, 0.0234];
pub const J1: [f64; 3] = [0.001, 0.01, 0.1];
pub const J2: [f64; 3] = [0.1, 0.11, 0.012];
pub const J3: [f64; 3] = [0.1, 0.11, 0.12];
pub const J4: [f64; 3] = [1.0, 2.0, 3.0];
pub const JQ: [f64; 3] = [0.0131, 0.0131, 0.0234];

pub fn params(j: [f64; 3], mass: f64) -> BodyParams {
    BodyParams::new(Vec3::from(j), mass, STANDARD_GRAVITY).unwrap()
}

/// Flow of the nonlinear model under a constant wrench, integrated with many tiny RK4 steps
/// written out independently of the library integrator.
pub fn flow(s: &RigidBodyState, u: &Wrench, p: &BodyParams, t: f64, substeps: usize) -> RigidBodyState {
    let h = t / substeps as f64;
    let mut y = [0.0; 18];
    s.to_flat(&mut y);
    let f = |y: &[f64; 18]| {
        let mut dy = [0.0; 18];
        nonlinear_derivative(&RigidBodyState::from_flat(y), u, p).to_flat(&mut dy);
        dy
    };
    let axpy = |y: &[f64; 18], k: &[f64; 18], a: f64| {
        let mut o = *y;
        for i in 0..18 {
            o[i] += a * k[i];
        }
        o
    };
    for _ in 0..substeps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..18 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let mut out = RigidBodyState::from_flat(&y);
    out.r = orthonormalize(&out.r);
    out
}

/// Richardson-extrapolated central difference of a vector observable along the forced flow.
pub fn fd_rate<F>(s: &RigidBodyState, u: &Wrench, p: &BodyParams, h: f64, obs: F) -> Vec<Vec3>
where
    F: Fn(&RigidBodyState) -> Vec<Vec3>,
{
    let central = |h: f64| -> Vec<Vec3> {
        let fwd = obs(&flow(s, u, p, h, 8));
        let bwd = obs(&flow(s, u, p, -h, 8));
        fwd.iter().zip(&bwd).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    };
    let d1 = central(h);
    let d2 = central(h / 2.0);
    d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
}

/// Full ladders of a physical state, `len` rungs each.
pub fn ladders(s: &RigidBodyState, p: &BodyParams, len: usize, form: CoefficientForm) -> (koopman_core::attitude_lift::AttitudeLadder, PositionLadder) {
    let att = build_attitude_ladder(s.nu, p, len).unwrap();
    let pos = build_position_ladder_with(s, &att, p, len, form).unwrap();
    (att, pos)
}

pub fn random_state<R: Rng>(rng: &mut R, max_rate: f64) -> RigidBodyState {
    let eta = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0));
    let dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
    let nu = dir * rng.gen_range(0.05..1.0) * max_rate;
    RigidBodyState {
        p: Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
        v: Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        r: rotation_from_euler(&eta),
        nu,
    }
}

/// Relative mismatch of a rate identity. The scale is the sum of the norms of the terms that
/// make up the predicted rate, so an accidental cancellation between terms does not
/// masquerade as a large relative error.
pub fn rel_err(fd: &Vec3, predicted: &Vec3, term_scale: f64) -> f64 {
    (fd - predicted).norm() / term_scale.max(f64::MIN_POSITIVE)
}

/// Step for the central differences: a small fraction of the fastest time scale in the state.
pub fn fd_step(s: &RigidBodyState, p: &BodyParams, u: &Wrench) -> f64 {
    let a = p.inertia_inv_norm() * s.nu.component_mul(&p.inertia_diag()).norm();
    let forcing = p.inertia_inv_norm() * u.torque.norm() / s.nu.norm().max(1e-12);
    let rate = (a + s.nu.norm() + forcing).max(1e-6);
    2e-3 / rate
}

pub const K_MAX: usize = 8;

/// Largest relative mismatch across all identities for one random draw.
pub fn ladder_mismatch(j: [f64; 3], seed: u64, form: CoefficientForm) -> (f64, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = params(j, rng.gen_range(0.5..2.0));
    let s = random_state(&mut rng, 1.0);
    let jn = s.nu.component_mul(&p.inertia_diag()).norm();
    let u = Wrench {
        force: Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(5.0..15.0)),
        torque: Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * jn * s.nu.norm(),
    };
    let len = K_MAX + 2;
    let (att, pos) = ladders(&s, &p, len, form);
    let h = fd_step(&s, &p, &u);
    let fd = fd_rate(&s, &u, &p, h, |st| {
        let (a, l) = ladders(st, &p, len, form);
        a.nu.iter().chain(&l.g).chain(&l.v).chain(&l.p).chain(&l.z).copied().collect()
    });
    let ji = p.inertia_inv();
    let (f, m) = (u.force, u.torque);
    let mut worst = (0.0, String::new());
    let mut check = |name: &str, k: usize, fdv: &Vec3, terms: &[Vec3]| {
        let pred: Vec3 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.norm()).sum();
        let e = rel_err(fdv, &pred, scale);
        if e > worst.0 || e.is_nan() {
            worst = (e, format!("{name}_{k}"));
        }
    };
    for k in 0..=K_MAX {
        check("nu", k, &fd[k], &[att.nu[k + 1], ji * att.big_h[k] * m]);
        check("g", k, &fd[len + k], &[pos.g[k + 1], -pos.big_g[k] * m]);
        check(
            "v",
            k,
            &fd[2 * len + k],
            &[pos.v[k + 1], -pos.g[k], -pos.big_v[k] * m, pos.omega[k] * f / p.mass],
        );
        check("p", k, &fd[3 * len + k], &[pos.p[k + 1], pos.v[k], -pos.big_p[k] * m]);
        check("z", k, &fd[4 * len + k], &[pos.z[k + 1], -pos.big_z[k] * m, pos.xi[k] * f]);
    }
    worst
}
