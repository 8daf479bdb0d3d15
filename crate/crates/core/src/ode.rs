//! Dormand–Prince 5(4) with step-size control and the standard fourth-order
//! continuous extension.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: f64::INFINITY, max_steps: 2_000_000 }
    }
}

/// Dense solution on `[t0, t_end]` (forward or backward in time).
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    /// Per-step interpolation coefficients `rcont1..5`.
    dense: Vec<[Vec<f64>; 5]>,
    /// Set when integration stopped early; holds the reason.
    pub truncated: Option<String>,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }

    /// True when `t` lies in the integrated range.
    pub fn covers(&self, t: f64) -> bool {
        let (a, b) = (self.t0().min(self.t_end()), self.t0().max(self.t_end()));
        t >= a && t <= b
    }

    fn step_of(&self, t: f64) -> (usize, f64, f64) {
        let forward = self.t_end() >= self.t0();
        // index of the step containing t
        let idx = if forward {
            self.times.partition_point(|&s| s <= t)
        } else {
            self.times.partition_point(|&s| s >= t)
        };
        let k = idx.clamp(1, self.times.len() - 1) - 1;
        let h = self.times[k + 1] - self.times[k];
        (k, ((t - self.times[k]) / h).clamp(0.0, 1.0), h)
    }

    /// Interpolated state; `t` is clamped to the integrated range.
    pub fn at(&self, t: f64) -> Vec<f64> {
        if self.dense.is_empty() {
            return self.states[0].clone();
        }
        let (k, theta, _) = self.step_of(t);
        let th1 = 1.0 - theta;
        let r = &self.dense[k];
        (0..r[0].len())
            .map(|i| r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i]))))
            .collect()
    }

    /// Time derivative of the interpolant (third-order accurate).
    pub fn derivative_at(&self, t: f64) -> Vec<f64> {
        if self.dense.is_empty() {
            return vec![0.0; self.states[0].len()];
        }
        let (k, th, h) = self.step_of(t);
        let th1 = 1.0 - th;
        let r = &self.dense[k];
        (0..r[0].len())
            .map(|i| {
                let a = r[3][i] + th1 * r[4][i];
                let da = -r[4][i];
                let b = r[2][i] + th * a;
                let db = a + th * da;
                let c = r[1][i] + th1 * b;
                let dc = -b + th1 * db;
                (c + th * dc) / h
            })
            .collect()
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// `step_cap(t, y, f(t, y))` bounds the next step length (return infinity
/// for no bound). `inside(y)` must hold for every accepted state; the first
/// violation truncates the solution at the previous step.
pub fn integrate<F, C, G>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    step_cap: C,
    inside: G,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
    C: Fn(f64, &[f64], &[f64]) -> f64,
    G: Fn(&[f64]) -> bool,
{
    let n = y0.len();
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Ode(format!("non-finite initial state {y0:?}")));
    }
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0.to_vec()],
        dense: Vec::new(),
        truncated: None,
        steps: 0,
        rejected: 0,
    };
    if t_end == t0 {
        return Ok(traj);
    }
    let dir = (t_end - t0).signum();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    let mut h = initial_step(&y, &k1, opts, (t_end - t0).abs());
    let mut last_err: f64 = 1e-4;
    loop {
        if traj.steps + traj.rejected >= opts.max_steps {
            return Err(Error::Ode(format!("step budget exhausted at t = {t}")));
        }
        let remaining = (t_end - t).abs();
        if remaining <= 1e-14 * t_end.abs().max(1.0) {
            break;
        }
        let cap = step_cap(t, &y, &k1).min(opts.max_step);
        let mut h_abs = h.min(cap).min(remaining);
        if h_abs < 1e-15 * t.abs().max(1.0) {
            return Err(Error::Ode(format!("step size underflow at t = {t}")));
        }
        // avoid a sliver last step
        if remaining - h_abs < 0.01 * h_abs {
            h_abs = remaining;
        }
        let hs = dir * h_abs;

        for i in 0..n {
            tmp[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + hs, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if h_abs == remaining { t_end } else { t + hs };
        f(t_new, &y_new, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            traj.rejected += 1;
            h = h_abs * 0.2;
            continue;
        }
        if err <= 1.0 {
            if !inside(&y_new) {
                traj.truncated = Some(format!("left the chart after t = {t}"));
                return Ok(traj);
            }
            let mut r = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = hs * k1[i] - dy;
                r[0][i] = y[i];
                r[1][i] = dy;
                r[2][i] = bspl;
                r[3][i] = dy - hs * k7[i] - bspl;
                r[4][i] =
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            traj.dense.push(r);
            traj.times.push(t_new);
            traj.states.push(y_new.clone());
            traj.steps += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            // PI controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0);
            h = h_abs * fac.clamp(0.2, 10.0);
            last_err = err.max(1e-4);
        } else {
            traj.rejected += 1;
            let fac = 0.9 * err.powf(-0.2);
            h = h_abs * fac.clamp(0.1, 0.9);
        }
    }
    Ok(traj)
}

fn initial_step(y: &[f64], f0: &[f64], opts: &OdeOptions, span: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(f0) {
        let sc = opts.abs_tol + opts.rel_tol * yi.abs();
        d0 += (yi / sc).powi(2);
        d1 += (fi / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0.min(span).min(opts.max_step).max(1e-12 * span.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free() -> (impl Fn(f64, &[f64], &[f64]) -> f64, impl Fn(&[f64]) -> bool) {
        (|_: f64, _: &[f64], _: &[f64]| f64::INFINITY, |_: &[f64]| true)
    }

    #[test]
    fn exponential_decay() {
        let (cap, ok) = free();
        let tr = integrate(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], 5.0, &OdeOptions::default(), cap, ok).unwrap();
        assert!((tr.last()[0] - (-5.0f64).exp()).abs() < 1e-10);
        for &t in &[0.3, 1.7, 4.99] {
            let v = tr.at(t)[0];
            assert!((v - (-t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let (cap, ok) = free();
        let tr = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            -3.0,
            &OdeOptions::default(),
            cap,
            ok,
        )
        .unwrap();
        assert!((tr.last()[0] - (-3.0f64).sin()).abs() < 1e-9);
        assert!((tr.at(-1.0)[1] - 1.0f64.cos()).abs() < 1e-9);
        for &t in &[-0.4, -2.2] {
            let d = tr.derivative_at(t);
            assert!((d[0] - t.cos()).abs() < 1e-7 && (d[1] + t.sin()).abs() < 1e-7, "t={t} {d:?}");
        }
    }

    #[test]
    fn step_cap_and_truncation() {
        let opts = OdeOptions::default();
        let tr = integrate(|_, _, dy| dy[0] = 1.0, 0.0, &[0.0], 1.0, &opts, |_, _, _| 0.01, |_| true).unwrap();
        assert!(tr.steps >= 100);
        let tr = integrate(|_, _, dy| dy[0] = 1.0, 0.0, &[0.0], 2.0, &opts, |_, _, _| 0.1, |y| y[0] < 1.0).unwrap();
        assert!(tr.truncated.is_some());
        assert!(tr.last()[0] < 1.0);
    }
}
