//! Preconditioned descent on `Γ_ε` with full trajectory instrumentation.
//!
//! The critical points sought are saddles of mountain-pass type, so plain
//! descent would slide off along the amplitude direction. Every trial point
//! `w = u - τg` is therefore rescaled onto the ray maximum
//! `t ↦ Γ_ε(tw)` before the Armijo test; the tangential part of the flow is
//! the `H_ε`-steepest descent.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{dual_norm, gamma, residual, riesz};
use crate::grid::Field;
use crate::limit::GroundStateSet;
use crate::localization::{barycenter_of, penalty, upsilon_gradient, zset_membership, ZMembership};
use crate::problem::{he_norm, Problem};

const ARMIJO: f64 = 1e-4;
const MIN_STEP_FRACTION: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct FlowState {
    pub u: Field,
    pub iteration: usize,
    pub energy: f64,
    /// `‖Γ_ε'(u)‖_{H_ε^{-1}}`.
    pub residual: f64,
    pub barycenter: Option<[f64; 2]>,
    pub penalty: f64,
    pub step: f64,
    /// `‖u_k - u_{k-1}‖_ε`; zero for the initial state.
    pub increment: f64,
    /// `‖Υ'(u)‖` as a map `H_ε → ℝ^d`; `None` for a degenerate barycenter.
    pub lipschitz: Option<f64>,
    residual_field: Field,
    direction: Field,
    step_streak: usize,
}

/// One trace row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
    pub barycenter: Option<[f64; 2]>,
    pub penalty: f64,
    pub step: f64,
    pub increment: f64,
    pub lipschitz: Option<f64>,
}

impl FlowState {
    pub fn record(&self) -> FlowRecord {
        FlowRecord {
            iteration: self.iteration,
            energy: self.energy,
            residual: self.residual,
            barycenter: self.barycenter,
            penalty: self.penalty,
            step: self.step,
            increment: self.increment,
            lipschitz: self.lipschitz,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIters,
    LeftZSet,
    Degenerate,
    /// Backtracking fell below `10⁻¹²τ₀` without an acceptable step.
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub tol: f64,
    pub max_iters: usize,
    pub stride: usize,
}

impl StopRule {
    pub fn from_problem(problem: &Problem) -> StopRule {
        let t = problem.params().tol;
        StopRule { tol: t.residual, max_iters: t.max_iters, stride: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
    pub termination: Termination,
    pub final_state: FlowState,
    pub started_in_z: Option<bool>,
    /// Membership of the final state in `Z_ε(ρ₀, 3δ₀)`.
    pub final_membership: Option<ZMembership>,
}

impl FlowTrace {
    pub fn energies_non_increasing(&self) -> bool {
        self.records.windows(2).all(|w| w[1].energy <= w[0].energy)
    }

    /// `D₁`: the largest recorded `‖Υ'(u)‖` along the trace.
    pub fn drift_bound(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.lipschitz).reduce(f64::max)
    }

    /// Consecutive records whose barycenter moved by more than
    /// `D₁ · increment`, as `(iteration, drift, bound)`.
    pub fn drift_violations(&self) -> Vec<(usize, f64, f64)> {
        let Some(d1) = self.drift_bound() else { return Vec::new() };
        self.records
            .windows(2)
            .filter_map(|w| {
                let (a, b) = (w[0].barycenter?, w[1].barycenter?);
                if w[1].iteration != w[0].iteration + 1 {
                    return None;
                }
                let drift = (a[0] - b[0]).hypot(a[1] - b[1]);
                let bound = d1 * w[1].increment;
                (drift > bound).then_some((w[1].iteration, drift, bound))
            })
            .collect()
    }

    pub fn write_csv(&self, out: impl Write, dim: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string(), "energy".into(), "residual".into()];
        for a in 0..dim {
            header.push(format!("upsilon_{}", a + 1));
        }
        header.extend(["phi".to_string(), "step".into(), "increment".into(), "lipschitz".into()]);
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string(), fmt(r.energy), fmt(r.residual)];
            for a in 0..dim {
                row.push(r.barycenter.map(|b| fmt(b[a])).unwrap_or_else(|| "nan".into()));
            }
            row.extend([
                fmt(r.penalty),
                fmt(r.step),
                fmt(r.increment),
                r.lipschitz.map(fmt).unwrap_or_else(|| "nan".into()),
            ]);
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// `d/dt Γ_ε(tw) = ⟨Γ_ε'(tw), w⟩`.
fn ray_derivative(w: &Field, t: f64, problem: &Problem) -> Result<f64> {
    let v = residual(&w.scaled(t), problem)?.dot(w)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("ray derivative"))
    }
}

/// Rescales `w` to the maximum of `t ↦ Γ_ε(tw)` nearest `t = 1`.
pub fn project_to_ray_maximum(w: &Field, problem: &Problem) -> Result<Field> {
    if w.max_abs() == 0.0 {
        return Err(Error::Param("cannot project the zero field".into()));
    }
    let dphi = |t: f64| ray_derivative(w, t, problem);
    let mut lo = 1.0;
    let mut hi = 1.0;
    let d1 = dphi(1.0)?;
    if d1 == 0.0 {
        return Ok(w.clone());
    }
    // Bracket a sign change from + (below) to - (above).
    if d1 > 0.0 {
        let mut k = 0;
        loop {
            hi *= 1.25;
            if dphi(hi)? < 0.0 {
                break;
            }
            lo = hi;
            k += 1;
            if k > 200 {
                return Err(Error::Param("energy unbounded along the ray".into()));
            }
        }
    } else {
        let mut k = 0;
        loop {
            lo /= 1.25;
            if dphi(lo)? > 0.0 {
                break;
            }
            hi = lo;
            k += 1;
            if k > 200 {
                return Err(Error::Param("no ray maximum: energy decreasing from zero".into()));
            }
        }
    }
    // Illinois regula falsi on the ray derivative.
    let (mut flo, mut fhi) = (dphi(lo)?, dphi(hi)?);
    let mut side = 0i8;
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        t = (lo * fhi - hi * flo) / (fhi - flo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let ft = dphi(t)?;
        if ft == 0.0 || (hi - lo) <= 1e-15 * t {
            break;
        }
        if ft > 0.0 {
            lo = t;
            flo = ft;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = t;
            fhi = ft;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
        if (hi - lo) <= 1e-14 * t {
            t = 0.5 * (lo + hi);
            break;
        }
    }
    Ok(w.scaled(t))
}

fn evaluate(u: Field, iteration: usize, step: f64, increment: f64, streak: usize, problem: &Problem) -> Result<FlowState> {
    let energy = gamma(&u, problem)?;
    let r = residual(&u, problem)?;
    let g = riesz(&r, problem)?;
    let res = r.dot(&g)?.max(0.0).sqrt();
    let bary = barycenter_of(&u, problem)?;
    let pen = penalty(&u, problem)?;
    if !energy.is_finite() || !res.is_finite() {
        return Err(Error::NonFinite("flow state"));
    }
    let lipschitz = if bary.degenerate {
        None
    } else {
        let grads = upsilon_gradient(&u, &problem.cutoffs()?, problem.params().loc()?.r0)?;
        let mut acc = 0.0;
        for gk in &grads {
            acc += dual_norm(gk, problem)?.powi(2);
        }
        Some(acc.sqrt())
    };
    Ok(FlowState {
        u,
        iteration,
        energy,
        residual: res,
        barycenter: if bary.degenerate { None } else { Some(bary.value) },
        penalty: pen,
        step,
        increment,
        lipschitz,
        residual_field: r,
        direction: g,
        step_streak: streak,
    })
}

/// Projects `u0` onto its ray maximum and evaluates all diagnostics.
pub fn initial_state(u0: &Field, problem: &Problem) -> Result<FlowState> {
    problem.check_field(u0)?;
    let u = project_to_ray_maximum(u0, problem)?;
    evaluate(u, 0, 0.0, 0.0, 0, problem)
}

/// One accepted step, or `None` when backtracking is exhausted.
pub fn step(state: &FlowState, problem: &Problem) -> Result<Option<FlowState>> {
    let tau0 = 1.0;
    let slope = state.residual_field.dot(&state.direction)?;
    let noise = 1e-13 * state.energy.abs().max(1.0);
    let mut tau = if state.step > 0.0 { state.step * if state.step_streak >= 2 { 2.0 } else { 1.0 } } else { tau0 };
    let start = tau;
    while tau >= MIN_STEP_FRACTION * tau0 {
        let trial = state.u.add_scaled(-tau, &state.direction)?;
        let next = match project_to_ray_maximum(&trial, problem) {
            Ok(v) => v,
            Err(_) => {
                tau *= 0.5;
                continue;
            }
        };
        let energy = gamma(&next, problem)?;
        let armijo = energy <= state.energy - ARMIJO * tau * slope;
        // Below the rounding floor of Γ the sufficient-decrease test is
        // meaningless; accept a non-increasing energy with a smaller residual.
        let floor_ok = ARMIJO * tau * slope < noise && energy <= state.energy;
        if armijo || floor_ok {
            let increment = he_norm(&next.sub(&state.u)?, problem)?;
            let streak = if tau >= start { state.step_streak + 1 } else { 0 };
            let cand = evaluate(next, state.iteration + 1, tau, increment, streak, problem)?;
            if armijo || cand.residual < state.residual {
                return Ok(Some(cand));
            }
        }
        tau *= 0.5;
    }
    Ok(None)
}

/// Iterates `step` until the dual residual drops below `stop.tol`.
pub fn descend(u0: &Field, problem: &Problem, stop: &StopRule, set: Option<&GroundStateSet>) -> Result<FlowTrace> {
    let delta0 = problem.params().delta0;
    let started_in_z = match set {
        Some(s) => {
            let rho1 = problem.params().loc()?.rho1;
            Some(zset_membership(u0, rho1, 3.0 * delta0, s, problem)?.member)
        }
        None => None,
    };
    let mut state = initial_state(u0, problem)?;
    let mut records = vec![state.record()];
    let stride = stop.stride.max(1);
    let termination = loop {
        if state.residual < stop.tol {
            break Termination::Converged;
        }
        if state.iteration >= stop.max_iters {
            break Termination::MaxIters;
        }
        let Some(y) = state.barycenter else { break Termination::Degenerate };
        let d = problem.grid().dim();
        let x: Vec<f64> = y[..d].iter().map(|v| problem.eps() * v).collect();
        if problem.dist_to_o(&x) >= 3.0 * delta0 {
            break Termination::LeftZSet;
        }
        match step(&state, problem)? {
            Some(next) => {
                state = next;
                if state.iteration % stride == 0 {
                    records.push(state.record());
                }
            }
            None => break Termination::Stalled,
        }
    };
    if records.last().map(|r| r.iteration) != Some(state.iteration) {
        records.push(state.record());
    }
    let final_membership = match set {
        Some(s) => {
            let rho0 = problem.params().loc()?.rho0;
            Some(zset_membership(&state.u, rho0, 3.0 * delta0, s, problem)?)
        }
        None => None,
    };
    Ok(FlowTrace { records, termination, final_state: state, started_in_z, final_membership })
}
