//! Fixed-step classical Runge-Kutta integration over flat `f64` buffers.

/// Scratch buffers for allocation-free RK4 steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.k1.len()
    }

    /// Advance `y` from `t` to `t + dt` in place. `f(t, y, dy)` writes the derivative into `dy`.
    pub fn step<F>(&mut self, y: &mut [f64], t: f64, dt: f64, mut f: F)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        debug_assert_eq!(n, self.dim());

        f(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * dt * self.k1[i];
        }
        f(t + 0.5 * dt, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * dt * self.k2[i];
        }
        f(t + 0.5 * dt, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        f(t + dt, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Number of fixed steps covering `horizon`, tolerant to floating-point round-off in `horizon / dt`.
pub fn step_count(dt: f64, horizon: f64) -> usize {
    let n = horizon / dt;
    let r = n.round();
    if (n - r).abs() < 1e-9 * n.max(1.0) {
        r as usize
    } else {
        n.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_growth_is_exact() {
        let mut rk = Rk4::new(2);
        let mut y = [1.0, 0.5];
        for i in 0..10 {
            rk.step(&mut y, i as f64 * 0.1, 0.1, |_, y, dy| {
                dy[0] = y[1];
                dy[1] = 0.0;
            });
        }
        assert!((y[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn exponential_has_fourth_order_error() {
        let run = |dt: f64| {
            let mut rk = Rk4::new(1);
            let mut y = [1.0];
            let n = step_count(dt, 1.0);
            for i in 0..n {
                rk.step(&mut y, i as f64 * dt, dt, |_, y, dy| dy[0] = y[0]);
            }
            (y[0] - 1f64.exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn step_count_rounds() {
        assert_eq!(step_count(1e-3, 70.0), 70_000);
        assert_eq!(step_count(0.3, 1.0), 4);
    }
}
