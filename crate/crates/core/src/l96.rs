//! The full two-layer Lorenz '96 system.
//!
//! Small-scale values are stored as one ring of length `J*K` with index
//! `k*J + j`, which makes the periodic rule `y[j+J, k] = y[j, k+1]` plain
//! ring arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::series::{RowMatrix, SampleSeries};
use crate::DIVERGENCE_BOUND;

/// Instantaneous state of the full model.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub x: Vec<f64>,
    /// Ring layout, index `k*J + j`.
    pub y: Vec<f64>,
    pub t: f64,
}

impl FullState {
    pub fn zeros(config: &ModelConfig) -> Self {
        FullState {
            x: vec![0.0; config.k],
            y: vec![0.0; config.k * config.j],
            t: 0.0,
        }
    }

    /// `y[j, k]` with both indices wrapped by the periodic rules.
    pub fn y_at(&self, j: isize, k: isize, jj: usize) -> f64 {
        let n = self.y.len() as isize;
        let idx = (k * jj as isize + j).rem_euclid(n);
        self.y[idx as usize]
    }

    fn check_dims(&self, config: &ModelConfig) -> Result<()> {
        if self.x.len() != config.k || self.y.len() != config.k * config.j {
            return Err(Error::Config(format!(
                "state has {} large-scale and {} small-scale values, config expects {} and {}",
                self.x.len(),
                self.y.len(),
                config.k,
                config.k * config.j
            )));
        }
        Ok(())
    }

    /// Rotates the grid by `shift` large-scale points (and the matching `shift` columns of `y`).
    pub fn rotated(&self, shift: usize, j: usize) -> FullState {
        let mut x = self.x.clone();
        let mut y = self.y.clone();
        let kk = x.len();
        x.rotate_right(shift % kk);
        y.rotate_right((shift % kk) * j);
        FullState { x, y, t: self.t }
    }
}

/// `out[k] = x[k-1] * (x[k+1] - x[k-2])` on a periodic ring.
pub(crate) fn advect_x(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    debug_assert!(n >= 4 && out.len() == n);
    out[0] = x[n - 1] * (x[1] - x[n - 2]);
    out[1] = x[0] * (x[2] - x[n - 1]);
    for k in 2..n - 1 {
        out[k] = x[k - 1] * (x[k + 1] - x[k - 2]);
    }
    out[n - 1] = x[n - 2] * (x[0] - x[n - 3]);
}

/// `out[i] = y[i+1] * (y[i-1] - y[i+2])` on a periodic ring.
fn advect_y(y: &[f64], out: &mut [f64]) {
    let n = y.len();
    debug_assert!(n >= 4 && out.len() == n);
    out[0] = y[1] * (y[n - 1] - y[2]);
    for i in 1..n - 2 {
        out[i] = y[i + 1] * (y[i - 1] - y[i + 2]);
    }
    out[n - 2] = y[n - 1] * (y[n - 3] - y[0]);
    out[n - 1] = y[0] * (y[n - 2] - y[1]);
}

/// The large-scale tendency without feedback: `adv(x) - x + F`.
pub fn resolved_tendency(x: &[f64], forcing: f64, out: &mut [f64]) {
    advect_x(x, out);
    for (o, &xk) in out.iter_mut().zip(x) {
        *o += forcing - xk;
    }
}

fn feedback_into(y: &[f64], j: usize, h_x: f64, out: &mut [f64]) {
    let scale = h_x / j as f64;
    for (bk, col) in out.iter_mut().zip(y.chunks_exact(j)) {
        *bk = scale * col.iter().sum::<f64>();
    }
}

/// Small-scale feedback on each large-scale point: `b_k = (h_x / J) * sum_j y[j, k]`.
pub fn feedback(state: &FullState, config: &ModelConfig) -> Result<Vec<f64>> {
    state.check_dims(config)?;
    let mut b = vec![0.0; config.k];
    feedback_into(&state.y, config.j, config.h_x, &mut b);
    Ok(b)
}

fn tendency_into(x: &[f64], y: &[f64], config: &ModelConfig, dx: &mut [f64], dy: &mut [f64]) {
    let j = config.j;
    resolved_tendency(x, config.forcing, dx);
    let scale = config.h_x / j as f64;
    for (d, col) in dx.iter_mut().zip(y.chunks_exact(j)) {
        *d += scale * col.iter().sum::<f64>();
    }
    advect_y(y, dy);
    let inv_eps = 1.0 / config.epsilon;
    for (col, (dcol, &xk)) in y.chunks_exact(j).zip(dy.chunks_exact_mut(j).zip(x)) {
        let drive = config.h_y * xk;
        for (d, &yv) in dcol.iter_mut().zip(col) {
            *d = inv_eps * (*d - yv + drive);
        }
    }
}

/// Tendencies `(dx, dy)` of the full system; `dy` uses the same ring layout as the state.
pub fn tendency_full(state: &FullState, config: &ModelConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    state.check_dims(config)?;
    let mut dx = vec![0.0; config.k];
    let mut dy = vec![0.0; config.k * config.j];
    tendency_into(&state.x, &state.y, config, &mut dx, &mut dy);
    Ok((dx, dy))
}

fn first_bad(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .position(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND)
        .map(|i| (i, values[i]))
}

/// Reusable scratch space for stepping one trajectory.
pub struct FullIntegrator {
    config: ModelConfig,
    dx: Vec<f64>,
    dy: Vec<f64>,
    mid_x: Vec<f64>,
    mid_y: Vec<f64>,
}

impl FullIntegrator {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let (k, ky) = (config.k, config.k * config.j);
        Ok(FullIntegrator {
            config: config.clone(),
            dx: vec![0.0; k],
            dy: vec![0.0; ky],
            mid_x: vec![0.0; k],
            mid_y: vec![0.0; ky],
        })
    }

    /// One midpoint RK2 step of size `dt` on the coupled `(x, y)` system, in place.
    pub fn step_with(&mut self, state: &mut FullState, dt: f64) {
        let half = 0.5 * dt;
        tendency_into(&state.x, &state.y, &self.config, &mut self.dx, &mut self.dy);
        for ((m, &s), &d) in self.mid_x.iter_mut().zip(&state.x).zip(&self.dx) {
            *m = s + half * d;
        }
        for ((m, &s), &d) in self.mid_y.iter_mut().zip(&state.y).zip(&self.dy) {
            *m = s + half * d;
        }
        tendency_into(
            &self.mid_x,
            &self.mid_y,
            &self.config,
            &mut self.dx,
            &mut self.dy,
        );
        for (s, &d) in state.x.iter_mut().zip(&self.dx) {
            *s += dt * d;
        }
        for (s, &d) in state.y.iter_mut().zip(&self.dy) {
            *s += dt * d;
        }
        state.t += dt;
    }

    /// Steps with `dt_full` and checks the result; `step_index` is reported on divergence.
    pub fn step(&mut self, state: &mut FullState, step_index: u64) -> Result<()> {
        self.step_with(state, self.config.dt_full);
        if let Some((i, v)) = first_bad(&state.x) {
            return Err(divergence(step_index, state.t, "x", i, v));
        }
        if let Some((i, v)) = first_bad(&state.y) {
            return Err(divergence(step_index, state.t, "y", i, v));
        }
        Ok(())
    }
}

fn divergence(step: u64, time: f64, var: &str, i: usize, v: f64) -> Error {
    Error::Divergence {
        step,
        time,
        detail: format!("{var}[{i}] = {v}"),
    }
}

/// Advances the state by one `dt_full` step of the midpoint RK2 scheme.
pub fn rk2_step_full(state: &FullState, config: &ModelConfig) -> Result<FullState> {
    state.check_dims(config)?;
    let mut integrator = FullIntegrator::new(config)?;
    let mut next = state.clone();
    integrator.step(&mut next, 0)?;
    Ok(next)
}

/// Initial state: `x_k ~ U[-1, 1] * F / 10`, `y = 0`.
pub fn initial_state(config: &ModelConfig, seed: u64) -> FullState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = config.forcing / 10.0;
    let x = (0..config.k)
        .map(|_| rng.random_range(-1.0..=1.0) * scale)
        .collect();
    FullState {
        x,
        y: vec![0.0; config.k * config.j],
        t: 0.0,
    }
}

/// Integrates the full model from [`initial_state`], discards `burn_in`, then
/// records `n_samples` rows of `(x, b)` every `sample_interval`.
pub fn simulate_full(config: &ModelConfig, seed: u64) -> Result<SampleSeries> {
    let state = initial_state(config, seed);
    simulate_full_from(config, state)
}

pub fn simulate_full_from(config: &ModelConfig, mut state: FullState) -> Result<SampleSeries> {
    config.validate()?;
    state.check_dims(config)?;
    let mut integrator = FullIntegrator::new(config)?;
    let n = config.n_samples;
    let mut xs = RowMatrix::with_capacity(n, config.k);
    let mut bs = RowMatrix::with_capacity(n, config.k);
    if n > 0 {
        let mut step: u64 = 0;
        let t0 = state.t;
        let dt = config.dt_full;
        for _ in 0..config.burn_in_steps() {
            integrator.step(&mut state, step)?;
            step += 1;
        }
        let per_sample = config.steps_per_sample();
        let mut b = vec![0.0; config.k];
        for row in 0..n {
            feedback_into(&state.y, config.j, config.h_x, &mut b);
            xs.push_row(&state.x);
            bs.push_row(&b);
            if row + 1 == n {
                break;
            }
            for _ in 0..per_sample {
                integrator.step(&mut state, step)?;
                step += 1;
            }
            // Re-anchor time to the step count so it does not drift.
            state.t = t0 + step as f64 * dt;
        }
    }
    SampleSeries::new(xs, bs, config.sample_interval, config.hash())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config() -> ModelConfig {
        let mut c = ModelConfig::unimodal();
        c.k = 6;
        c.j = 5;
        c
    }

    fn random_state(config: &ModelConfig, seed: u64) -> FullState {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        FullState {
            x: (0..config.k).map(|_| rng.random_range(-5.0..5.0)).collect(),
            y: (0..config.k * config.j)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            t: 0.0,
        }
    }

    #[test]
    fn feedback_constant_and_zero_fields() {
        let c = ModelConfig::unimodal();
        let mut s = FullState::zeros(&c);
        assert!(feedback(&s, &c).unwrap().iter().all(|&b| b == 0.0));
        s.y.iter_mut().for_each(|v| *v = 0.7);
        for b in feedback(&s, &c).unwrap() {
            assert_abs_diff_eq!(b, -0.7, epsilon = 1e-14);
        }
    }

    #[test]
    fn feedback_hand_value() {
        let mut c = ModelConfig::trimodal();
        c.j = 2;
        let mut s = FullState::zeros(&c);
        s.y[2 * 3] = 1.0;
        s.y[2 * 3 + 1] = 3.0;
        let b = feedback(&s, &c).unwrap();
        assert_abs_diff_eq!(b[3], -6.4, epsilon = 1e-12);
        assert_eq!(b[2], 0.0);
    }

    #[test]
    fn feedback_rejects_wrong_dims() {
        let c = ModelConfig::unimodal();
        let s = FullState {
            x: vec![0.0; 5],
            y: vec![0.0; 10],
            t: 0.0,
        };
        assert!(matches!(feedback(&s, &c), Err(Error::Config(_))));
    }

    #[test]
    fn tendency_simple_fields() {
        let c = ModelConfig::unimodal();
        let mut s = FullState::zeros(&c);
        let (dx, dy) = tendency_full(&s, &c).unwrap();
        assert!(dx.iter().all(|&d| d == 10.0));
        assert!(dy.iter().all(|&d| d == 0.0));

        s.x.iter_mut().for_each(|v| *v = 2.5);
        let (dx, _) = tendency_full(&s, &c).unwrap();
        assert!(dx.iter().all(|&d| (d - 7.5).abs() < 1e-14));

        s.x.iter_mut().for_each(|v| *v = 1.0);
        let (_, dy) = tendency_full(&s, &c).unwrap();
        assert!(dy.iter().all(|&d| (d - 2.0).abs() < 1e-14));
    }

    /// Direct transcription of the equations with explicit index wrapping.
    fn tendency_oracle(s: &FullState, c: &ModelConfig) -> (Vec<f64>, Vec<f64>) {
        let (k, j) = (c.k as isize, c.j as isize);
        let x = |i: isize| s.x[i.rem_euclid(k) as usize];
        let y = |jj: isize, kk: isize| s.y_at(jj, kk, c.j);
        let mut dx = vec![0.0; c.k];
        let mut dy = vec![0.0; c.k * c.j];
        for kk in 0..k {
            let b: f64 = (0..j).map(|jj| y(jj, kk)).sum::<f64>() * c.h_x / c.j as f64;
            dx[kk as usize] = x(kk - 1) * (x(kk + 1) - x(kk - 2)) - x(kk) + c.forcing + b;
            for jj in 0..j {
                dy[(kk * j + jj) as usize] =
                    (y(jj + 1, kk) * (y(jj - 1, kk) - y(jj + 2, kk)) - y(jj, kk) + c.h_y * x(kk))
                        / c.epsilon;
            }
        }
        (dx, dy)
    }

    #[test]
    fn tendency_matches_index_oracle() {
        let c = small_config();
        let s = random_state(&c, 3);
        let (dx, dy) = tendency_full(&s, &c).unwrap();
        let (ox, oy) = tendency_oracle(&s, &c);
        for (a, b) in dx.iter().zip(&ox).chain(dy.iter().zip(&oy)) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rk2_fixed_point_and_scalar_decay() {
        let mut c = small_config();
        c.forcing = 0.0;
        let s = FullState::zeros(&c);
        assert_eq!(rk2_step_full(&s, &c).unwrap().x, s.x);

        // Uniform x with no coupling back from y reduces to dx/dt = -x.
        c.h_x = 0.0;
        c.dt_full = 0.1;
        c.sample_interval = 0.1;
        c.dt_reduced = 0.1;
        let mut s = FullState::zeros(&c);
        s.x.iter_mut().for_each(|v| *v = 1.0);
        let next = rk2_step_full(&s, &c).unwrap();
        for v in next.x {
            assert_abs_diff_eq!(v, 0.905, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(next.t, 0.1);
    }

    #[test]
    fn rk2_reports_divergence() {
        let c = small_config();
        let mut s = FullState::zeros(&c);
        s.x[0] = f64::NAN;
        assert!(matches!(
            rk2_step_full(&s, &c),
            Err(Error::Divergence { step: 0, .. })
        ));
    }

    #[test]
    fn simulate_empty_series() {
        let mut c = ModelConfig::unimodal();
        c.n_samples = 0;
        let s = simulate_full(&c, 1).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.width(), 18);
    }

    #[test]
    fn recorded_feedback_matches_state() {
        let mut c = small_config();
        c.burn_in = 0.0;
        c.n_samples = 3;
        let series = simulate_full(&c, 9).unwrap();
        // Replay the trajectory and check the recorded rows against the state.
        let mut state = initial_state(&c, 9);
        let mut integ = FullIntegrator::new(&c).unwrap();
        for n in 0..3 {
            assert_eq!(series.x.row(n), &state.x[..]);
            assert_eq!(series.b.row(n), &feedback(&state, &c).unwrap()[..]);
            for _ in 0..c.steps_per_sample() {
                integ.step_with(&mut state, c.dt_full);
            }
        }
    }
}
