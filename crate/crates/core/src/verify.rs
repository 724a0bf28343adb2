//! Quantitative experiments: tail decay, the scalar recursion, the
//! directional-derivative identity, the gradient floor and convergence
//! diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{dual_norm, residual};
use crate::grid::Field;
use crate::limit::{ground_state, GroundStateSet};
use crate::localization::{barycenter_of, manifold_distance, manifold_element};
use crate::problem::{he_norm, Problem};

/// Fit window used for the decay reports unless configured otherwise.
pub const DEFAULT_WINDOW: (f64, f64) = (5.0, 15.0);
const RADIUS_STEP: f64 = 0.5;

/// `ln Q(R) ≈ ln C - cR` fitted by least squares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    /// `Q(R) = ∫_{|x-Υ| ≥ R} |∇u|² + u²`.
    pub tail: Vec<f64>,
    pub window: (f64, f64),
    /// Absent when `Q` vanishes on most of the window.
    pub fit: Option<DecayFit>,
}

impl DecayReport {
    /// `Q` at the largest sampled radius not above `r`.
    pub fn tail_at(&self, r: f64) -> Option<f64> {
        let k = self.radii.iter().rposition(|x| *x <= r)?;
        Some(self.tail[k])
    }
}

/// `u² + Σ_a (D⁺_a u)²` per node, forward differences inside the box.
fn energy_density(u: &Field) -> Vec<f64> {
    let g = u.grid();
    let v = u.values();
    let h = g.h();
    (0..g.len())
        .map(|idx| {
            let mi = g.multi_index(idx);
            let mut acc = v[idx] * v[idx];
            for a in 0..g.dim() {
                if mi[a] + 1 < g.n() {
                    let dv = (v[idx + g.stride(a)] - v[idx]) / h;
                    acc += dv * dv;
                }
            }
            acc
        })
        .collect()
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some((slope, intercept, r2))
}

/// Tail integrals about an explicit center.
pub fn tail_profile_about(u: &Field, center: &[f64], window: (f64, f64)) -> Result<DecayReport> {
    let g = u.grid();
    let d = g.dim();
    if !(window.0 >= 0.0 && window.1 > window.0) {
        return Err(Error::OutOfRange(format!("bad fit window {window:?}")));
    }
    let reach = (0..d)
        .map(|a| g.half_width() - (center[a] - g.center()[a]).abs())
        .fold(f64::INFINITY, f64::min);
    if window.1 > reach {
        return Err(Error::OutOfRange(format!(
            "fit window ends at {} but the box only reaches {reach:.3} from the center",
            window.1
        )));
    }
    let dens = energy_density(u);
    let mut by_dist: Vec<(f64, f64)> = (0..g.len())
        .map(|idx| {
            let x = g.point(idx);
            let r = (0..d).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>().sqrt();
            (r, dens[idx])
        })
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut suffix = vec![0.0; by_dist.len() + 1];
    for k in (0..by_dist.len()).rev() {
        suffix[k] = suffix[k + 1] + by_dist[k].1;
    }
    let vol = g.cell_volume();
    let count = (reach / RADIUS_STEP).floor() as usize;
    let radii: Vec<f64> = (0..=count).map(|k| k as f64 * RADIUS_STEP).collect();
    let tail: Vec<f64> = radii
        .iter()
        .map(|r| {
            let first = by_dist.partition_point(|(x, _)| x < r);
            suffix[first] * vol
        })
        .collect();

    let (xs, ys): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&tail)
        .filter(|(r, q)| **r >= window.0 - 1e-12 && **r <= window.1 + 1e-12 && **q > 0.0)
        .map(|(r, q)| (*r, q.ln()))
        .unzip();
    let in_window = radii.iter().filter(|r| **r >= window.0 - 1e-12 && **r <= window.1 + 1e-12).count();
    let fit = if xs.len() * 2 > in_window {
        linear_fit(&xs, &ys).map(|(slope, intercept, r2)| DecayFit {
            rate: -slope,
            log_prefactor: intercept,
            r_squared: r2,
            samples: xs.len(),
        })
    } else {
        None
    };
    let mut c = [0.0; 2];
    c[..d].copy_from_slice(&center[..d]);
    Ok(DecayReport { center: c, radii, tail, window, fit })
}

/// Tail integrals about the barycenter of `u`.
pub fn tail_profile(u: &Field, problem: &Problem, window: (f64, f64)) -> Result<DecayReport> {
    let y = barycenter_of(u, problem)?.require()?;
    tail_profile_about(u, &y[..problem.grid().dim()], window)
}

/// Relative slack for comparisons that saturate in exact arithmetic.
const ROUNDING: f64 = 4.0 * f64::EPSILON;

/// Checks `Q(R) ≤ θ^{R₁+1}Q(R₁)θ^{-R} + θb/(θ-1)` for every sampled `R ≥ R₁`,
/// given samples `q[k] = Q(r_first + k)` satisfying `Q(r) ≤ Q(r-1)/θ + b`.
pub fn decay_recursion_check(q: &[f64], r_first: f64, theta: f64, b: f64, r1: f64) -> Result<bool> {
    if !(theta > 1.0) || !(b >= 0.0) {
        return Err(Error::Param(format!("need theta > 1 and b >= 0, got theta = {theta}, b = {b}")));
    }
    if q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Param("Q samples must be finite and non-negative".into()));
    }
    for k in 1..q.len() {
        let bound = q[k - 1] / theta + b;
        if q[k] > bound * (1.0 + ROUNDING) {
            return Err(Error::RecursionHypothesis { r: r_first + k as f64, q: q[k], bound });
        }
    }
    let start = r1 - r_first;
    if start < 0.0 || start.fract() != 0.0 || start as usize >= q.len() {
        return Err(Error::OutOfRange(format!("R1 = {r1} is not a sampled radius")));
    }
    let k1 = start as usize;
    let floor = theta * b / (theta - 1.0);
    Ok(q.iter().enumerate().skip(k1).all(|(k, &qk)| {
        let n = (k - k1) as f64;
        qk <= (theta.powf(1.0 - n) * q[k1] + floor) * (1.0 + ROUNDING)
    }))
}

/// Smallest `|∇V(z)|` accepted by the directional test.
pub const GRADIENT_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalRecord {
    pub eps: f64,
    pub z: [f64; 2],
    /// `m = V(z)`.
    pub m: f64,
    /// `⟨Γ_ε'(u), ∂₁u⟩`.
    pub measured: f64,
    /// `-(ε/2) ∂₁V(z) ∫u²`, the pairing implied by translating `u`.
    pub predicted: f64,
    pub ratio: f64,
    /// `‖Γ_ε'(u)‖_{H_ε^{-1}} ‖∂₁u‖_ε`, an upper bound for `|measured|`.
    pub dual_bound: f64,
    /// `‖u - w‖_ε` with `(-Δ + V_ε)w = f(u)`.
    pub auxiliary_distance: f64,
}

/// Pairs the gradient at `U_{V(z)}(· - z/ε)` with its first partial derivative.
pub fn directional_derivative_test(z: &[f64], problem: &Problem) -> Result<DirectionalRecord> {
    let d = problem.grid().dim();
    let eps = problem.eps();
    let grad_v = problem.potential().gradient(z);
    let norm = (0..d).map(|a| grad_v[a] * grad_v[a]).sum::<f64>().sqrt();
    if norm < GRADIENT_FLOOR {
        return Err(Error::OutOfRange(format!("gradient floor: |grad V(z)| = {norm:.3e}")));
    }
    let m = problem.potential().value(z);
    let state = ground_state(m, d, problem.nonlinearity(), problem.params().t0)?;
    let center: Vec<f64> = z.iter().take(d).map(|v| v / eps).collect();
    if !problem.grid().contains(&center) {
        return Err(Error::OutOfRange("z/eps lies outside the computational box".into()));
    }
    let u = state.field(problem.grid(), &center);
    let r = residual(&u, problem)?;
    let du = u.central_derivative(0);
    let measured = r.dot(&du)?;
    let predicted = -0.5 * eps * grad_v[0] * u.l2_norm_sq();
    let dual_bound = dual_norm(&r, problem)? * he_norm(&du, problem)?;
    let rj = crate::functionals::residual_j(&u, problem)?;
    let auxiliary_distance = dual_norm(&rj, problem)?;
    let mut zz = [0.0; 2];
    zz[..d].copy_from_slice(&z[..d]);
    Ok(DirectionalRecord {
        eps,
        z: zz,
        m,
        measured,
        predicted,
        ratio: measured / predicted,
        dual_bound,
        auxiliary_distance,
    })
}

/// Slope of `ln |y|` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    linear_fit(&lx, &ly).map(|(s, _, _)| s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `Z_ε(ρ₀, 3δ₀) \ Z_ε(ρ₀, δ₀)`: barycenter displaced beyond `δ₀` from `O`.
    Displaced,
    /// Manifold distance in `[ρ₀/3, ρ₀]`.
    Annulus,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Displaced => "displaced",
            Regime::Annulus => "annulus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: usize,
    pub seed: u64,
}

/// One ensemble member, described in `ε`-independent terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub id: usize,
    /// Center in original coordinates.
    pub z: [f64; 2],
    /// Mass coefficient of the profile.
    pub m: f64,
    /// Dilation `U(e^{-θ}·)`.
    pub theta: f64,
    pub amplitude: f64,
    /// Set member used as the base (annulus regime).
    pub base: Option<usize>,
    /// Coefficients of the Hermite-function perturbation and its `H_ε` size.
    pub perturbation: Vec<f64>,
    pub perturbation_size: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorRow {
    pub eps: f64,
    pub regime: Regime,
    pub min_dual_norm: f64,
    pub witness: usize,
    /// Members evaluated (annulus members outside `[ρ₀/3, ρ₀]` are dropped).
    pub evaluated: usize,
    /// `max |⟨Γ', ∂₁u⟩| / ‖∂₁u‖_ε - dual norm` over the evaluated members;
    /// non-positive up to the linear-solve tolerance.
    pub duality_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorTable {
    pub seed: u64,
    pub rows: Vec<FloorRow>,
    /// Log-log slope of the displaced-regime minimum against `ε`.
    pub displaced_slope: Option<f64>,
    /// Largest over smallest annulus-regime minimum.
    pub annulus_spread: Option<f64>,
    pub displaced: Vec<EnsembleMember>,
    pub annulus: Vec<EnsembleMember>,
}

impl FloorTable {
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eps", "regime", "min_dual_norm", "witness_id"])?;
        for r in &self.rows {
            w.write_record([
                crate::flow::fmt(r.eps),
                r.regime.label().to_string(),
                crate::flow::fmt(r.min_dual_norm),
                format!("{}-{}", r.regime.label(), r.witness),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, d: usize) -> [f64; 2] {
    if d == 1 {
        [if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0]
    } else {
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        [t.cos(), t.sin()]
    }
}

/// Largest `r ≤ r_hi` along `dir` from `x₀` with `V ≥ level` on the whole
/// segment, sampled at `10⁻³` resolution.
fn feasible_reach(problem: &Problem, dir: [f64; 2], level: f64, r_hi: f64) -> f64 {
    let x0 = problem.x0();
    let d = problem.grid().dim();
    let mut r = 0.0;
    while r < r_hi {
        let next = (r + 1e-3).min(r_hi);
        let p: Vec<f64> = (0..d).map(|a| x0[a] + next * dir[a]).collect();
        if problem.potential().value(&p) < level {
            break;
        }
        r = next;
    }
    r
}

/// Normalized Hermite functions `H_k(y) e^{-y²/2}`, `k < 4`, of one variable.
fn hermite_mode(k: usize, y: f64) -> f64 {
    let g = (-0.5 * y * y).exp();
    g * match k {
        0 => 1.0,
        1 => 2.0 * y,
        2 => 4.0 * y * y - 2.0,
        _ => 8.0 * y * y * y - 12.0 * y,
    }
}

fn perturbation_field(problem: &Problem, center: &[f64], coeffs: &[f64]) -> Field {
    let d = problem.grid().dim();
    Field::from_fn(*problem.grid(), |x| {
        let mut acc = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            let mut v = 1.0;
            for a in 0..d {
                let y = x[a] - center[a];
                v *= if a == 0 { hermite_mode(k, y) } else { hermite_mode(0, y) };
            }
            acc += c * v;
        }
        acc
    })
}

/// Draws the `ε`-independent descriptions of both ensembles.
pub fn draw_ensembles(problem: &Problem, set: &GroundStateSet, spec: &EnsembleSpec) -> Result<(Vec<EnsembleMember>, Vec<EnsembleMember>)> {
    if spec.members == 0 {
        return Err(Error::EmptyEnsemble("members = 0".into()));
    }
    let d = problem.grid().dim();
    let prm = problem.params();
    let (o, delta0) = (prm.o_radius, prm.delta0);
    let v0 = problem.v0();
    let x0 = problem.x0();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut displaced = Vec::with_capacity(spec.members);
    let mut attempts = 0;
    while displaced.len() < spec.members {
        attempts += 1;
        if attempts > 100 * spec.members {
            return Err(Error::EmptyEnsemble("no direction reaches the displaced annulus with V >= V0 - delta0".into()));
        }
        let dir = unit_direction(&mut rng, d);
        let reach = feasible_reach(problem, dir, v0 - delta0, o + 3.0 * delta0);
        if reach <= o + delta0 {
            continue;
        }
        let r = rng.gen_range(o + delta0..reach);
        let mut z = [0.0; 2];
        for a in 0..d {
            z[a] = x0[a] + r * dir[a];
        }
        let id = displaced.len();
        let (theta, amplitude) = match id % 3 {
            0 => (0.0, 1.0),
            1 => (rng.gen_range(-0.05..0.05), 1.0),
            _ => (0.0, 1.0 + rng.gen_range(-0.02..0.02)),
        };
        displaced.push(EnsembleMember {
            id,
            z,
            m: problem.potential().value(&z[..d]),
            theta,
            amplitude,
            base: None,
            perturbation: Vec::new(),
            perturbation_size: 0.0,
        });
    }

    let rho0 = prm.loc()?.rho0;
    let annulus = (0..spec.members)
        .map(|id| {
            let dir = unit_direction(&mut rng, d);
            let r = rng.gen_range(0.0..o + delta0);
            let mut z = [0.0; 2];
            for a in 0..d {
                z[a] = x0[a] + r * dir[a];
            }
            let base = rng.gen_range(0..set.len());
            let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            EnsembleMember {
                id,
                z,
                m: set.state_of(base).m,
                theta: set.members[base].theta,
                amplitude: 1.0,
                base: Some(base),
                perturbation: coeffs,
                perturbation_size: rng.gen_range(0.5 * rho0..rho0),
            }
        })
        .collect();
    Ok((displaced, annulus))
}

struct Measured {
    dual: f64,
    duality_excess: f64,
    keep: bool,
}

fn measure(u: &Field, problem: &Problem) -> Result<(f64, f64)> {
    let r = residual(u, problem)?;
    let dual = dual_norm(&r, problem)?;
    let du = u.central_derivative(0);
    let dn = he_norm(&du, problem)?;
    let excess = if dn > 0.0 { r.dot(&du)?.abs() / dn - dual } else { f64::NEG_INFINITY };
    Ok((dual, excess))
}

fn displaced_field(member: &EnsembleMember, state: &crate::limit::GroundState, problem: &Problem) -> Result<Field> {
    let d = problem.grid().dim();
    let center: Vec<f64> = member.z[..d].iter().map(|v| v / problem.eps()).collect();
    if !problem.grid().contains(&center) {
        return Err(Error::OutOfRange(format!("member {} lies outside the box", member.id)));
    }
    Ok(Field::from_fn(*problem.grid(), |x| state.dilated_value(x, &center, member.theta, member.amplitude)))
}

fn annulus_field(member: &EnsembleMember, set: &GroundStateSet, problem: &Problem) -> Result<Field> {
    let d = problem.grid().dim();
    let center: Vec<f64> = member.z[..d].iter().map(|v| v / problem.eps()).collect();
    let base = manifold_element(set, member.base.expect("annulus member has a base"), &center, problem)?;
    let w = perturbation_field(problem, &center, &member.perturbation);
    let size = he_norm(&w, problem)?;
    base.add_scaled(member.perturbation_size / size, &w)
}

/// Per-`ε` minimum dual norm of `Γ_ε'` over both ensembles.
pub fn gradient_floor_experiment(
    spec: &crate::problem::ProblemSpec,
    set: &GroundStateSet,
    eps_list: &[f64],
    ensemble: &EnsembleSpec,
) -> Result<FloorTable> {
    if eps_list.is_empty() {
        return Err(Error::EmptyEnsemble("no eps values".into()));
    }
    let mut spec = spec.clone();
    spec.params.localization = Some(set.constants);
    let first = spec.at_eps(eps_list[0])?;
    let (displaced, annulus) = draw_ensembles(&first, set, ensemble)?;
    let f = first.nonlinearity();
    let t0 = first.params().t0;
    let states: Vec<crate::limit::GroundState> =
        displaced.par_iter().map(|m| ground_state(m.m, first.grid().dim(), f, t0)).collect::<Result<_>>()?;
    let rho0 = set.constants.rho0;

    let mut rows = Vec::new();
    for &eps in eps_list {
        let problem = spec.at_eps(eps)?;
        let a: Vec<Measured> = displaced
            .par_iter()
            .zip(&states)
            .map(|(m, st)| {
                let (dual, duality_excess) = measure(&displaced_field(m, st, &problem)?, &problem)?;
                Ok(Measured { dual, duality_excess, keep: true })
            })
            .collect::<Result<_>>()?;
        let b: Vec<Measured> = annulus
            .par_iter()
            .map(|m| {
                let u = annulus_field(m, set, &problem)?;
                let dist = manifold_distance(&u, set, &problem)?.dist;
                let keep = dist >= rho0 / 3.0 && dist <= rho0;
                let (dual, duality_excess) = measure(&u, &problem)?;
                Ok(Measured { dual, duality_excess, keep })
            })
            .collect::<Result<_>>()?;
        for (regime, ms) in [(Regime::Displaced, a), (Regime::Annulus, b)] {
            let kept: Vec<(usize, &Measured)> = ms.iter().enumerate().filter(|(_, m)| m.keep).collect();
            let Some(&(witness, best)) =
                kept.iter().min_by(|x, y| x.1.dual.total_cmp(&y.1.dual).then(x.0.cmp(&y.0)))
            else {
                return Err(Error::EmptyEnsemble(format!("{} regime at eps = {eps}", regime.label())));
            };
            rows.push(FloorRow {
                eps,
                regime,
                min_dual_norm: best.dual,
                witness,
                evaluated: kept.len(),
                duality_excess: kept.iter().map(|(_, m)| m.duality_excess).fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    let pick = |r: Regime| -> Vec<(f64, f64)> {
        rows.iter().filter(|x| x.regime == r).map(|x| (x.eps, x.min_dual_norm)).collect()
    };
    let (ea, va): (Vec<f64>, Vec<f64>) = pick(Regime::Displaced).into_iter().unzip();
    let displaced_slope = if ea.len() >= 2 { log_log_slope(&ea, &va) } else { None };
    let vb: Vec<f64> = pick(Regime::Annulus).into_iter().map(|x| x.1).collect();
    let annulus_spread = if vb.is_empty() {
        None
    } else {
        Some(vb.iter().copied().fold(0.0, f64::max) / vb.iter().copied().fold(f64::INFINITY, f64::min))
    };
    Ok(FloorTable { seed: ensemble.seed, rows, displaced_slope, annulus_spread, displaced, annulus })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    pub distance: f64,
    pub member: usize,
    /// Mass coefficient of the matched profile.
    pub m: f64,
    pub shift: [f64; 2],
    /// `|z - Υ(u)|` with `z` the best shift.
    pub barycenter_gap: f64,
    pub within_2r0: bool,
}

/// Best-fit manifold element of `u` and its offset from the barycenter.
pub fn convergence_diagnostics(u: &Field, problem: &Problem, set: &GroundStateSet) -> Result<ConvergenceDiagnostics> {
    let md = manifold_distance(u, set, problem)?;
    let y = barycenter_of(u, problem)?.require()?;
    let d = problem.grid().dim();
    let gap = (0..d).map(|a| (md.shift[a] - y[a]).powi(2)).sum::<f64>().sqrt();
    Ok(ConvergenceDiagnostics {
        distance: md.dist,
        member: md.member,
        m: set.state_of(md.member).m,
        shift: md.shift,
        barycenter_gap: gap,
        within_2r0: gap <= 2.0 * problem.params().loc()?.r0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (s, c, r2) = linear_fit(&xs, &ys).unwrap();
        assert!((s + 0.5).abs() < 1e-14 && (c - 2.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn geometric_tail_passes() {
        let theta: f64 = 1.7;
        let q: Vec<f64> = (0..30).map(|r| theta.powi(-r)).collect();
        assert!(decay_recursion_check(&q, 0.0, theta, 0.0, 0.0).unwrap());
        assert!(decay_recursion_check(&q, 0.0, theta, 0.0, 5.0).unwrap());
    }

    #[test]
    fn iterated_map_passes_with_limit_two() {
        let (theta, b) = (2.0, 1.0);
        let mut q = vec![40.0];
        for _ in 0..40 {
            q.push(q.last().unwrap() / theta + b);
        }
        assert!(decay_recursion_check(&q, 0.0, theta, b, 0.0).unwrap());
        assert!((q.last().unwrap() - theta * b / (theta - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn violation_names_the_step() {
        let mut q: Vec<f64> = (0..10).map(|r| 2f64.powi(-r)).collect();
        q[6] = 0.5;
        match decay_recursion_check(&q, 3.0, 2.0, 0.0, 3.0) {
            Err(Error::RecursionHypothesis { r, .. }) => assert_eq!(r, 9.0),
            other => panic!("expected a hypothesis error, got {other:?}"),
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(decay_recursion_check(&[1.0], 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(decay_recursion_check(&[1.0], 0.0, 2.0, -1.0, 0.0).is_err());
        assert!(decay_recursion_check(&[1.0, 0.4], 0.0, 2.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn tail_of_compact_support_vanishes() {
        let g = crate::grid::Grid::new(1, 20.0, 401).unwrap();
        let u = Field::from_fn(g, |x| if x[0].abs() < 2.0 { (1.0 - x[0] * x[0] / 4.0).powi(2) } else { 0.0 });
        let rep = tail_profile_about(&u, &[0.0], (1.0, 10.0)).unwrap();
        assert!(rep.tail.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(rep.tail_at(2.5), Some(0.0));
        assert_eq!(rep.tail_at(10.0), Some(0.0));
        assert!(rep.fit.is_none());
    }

    #[test]
    fn soliton_tail_rate() {
        let g = crate::grid::Grid::new(1, 30.0, 6001).unwrap();
        let u = Field::from_fn(g, crate::problem::testing::soliton(1.0, 0.0));
        let rep = tail_profile_about(&u, &[0.0], DEFAULT_WINDOW).unwrap();
        let fit = rep.fit.unwrap();
        assert!((1.9..=2.1).contains(&fit.rate), "rate {}", fit.rate);
        assert!(fit.r_squared > 0.999);
        assert!(tail_profile_about(&u, &[0.0], (5.0, 40.0)).is_err());
    }
}
