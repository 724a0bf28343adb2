//! Adaptive Dormand-Prince 5(4) integration for two-component systems.

use std::ops::ControlFlow;

pub type State = [f64; 2];

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-12, atol: 1e-15, max_step: 0.02, initial_step: 1e-4, max_steps: 2_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// The observer asked to stop.
    Stopped,
    ReachedEnd,
    StepLimit,
    StepUnderflow,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = rhs(t, y)` from `t0` towards `t_end`, calling `observe`
/// after every accepted step.
pub fn integrate(
    rhs: impl Fn(f64, &State) -> State,
    t0: f64,
    y0: State,
    t_end: f64,
    ctl: &StepControl,
    mut observe: impl FnMut(f64, &State) -> ControlFlow<()>,
) -> Outcome {
    let mut t = t0;
    let mut y = y0;
    let mut h = ctl.initial_step.min(ctl.max_step);
    let mut k = [[0.0; 2]; 7];
    k[0] = rhs(t, &y);
    for _ in 0..ctl.max_steps {
        if t >= t_end {
            return Outcome::ReachedEnd;
        }
        h = h.min(t_end - t).min(ctl.max_step);
        if h < 1e-14 * t.abs().max(1.0) {
            return Outcome::StepUnderflow;
        }
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    ys[0] += h * a * kj[0];
                    ys[1] += h * a * kj[1];
                }
            }
            k[s] = rhs(t + C[s] * h, &ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for c in 0..2 {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * k[s][c];
                lo += B4[s] * k[s][c];
            }
            y5[c] += h * hi;
            let scale = ctl.atol + ctl.rtol * y[c].abs().max(y5[c].abs());
            err = err.max((h * (hi - lo) / scale).abs());
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            // First-same-as-last: the seventh stage is f at the new point.
            k[0] = k[6];
            if observe(t, &y).is_break() {
                return Outcome::Stopped;
            }
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= grow;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Outcome::StepLimit
}

/// Cubic Hermite interpolation on `[x0, x1]` from values and slopes.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let slope = ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * h * d0 + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * h * d1)
        / h;
    (value, slope)
}
