//! The two-parameter path of translated ground states, its level `c_ε`,
//! the degree of `(εΥ - x₀, P_{V₀})` on the path boundary, and the full
//! solve from the path peak.
//!
//! In one dimension the dilation family is not a mountain pass
//! (`L_m(U(e^{-θ}·)) = E_m cosh θ`), so the path is amplitude-modulated:
//! `γ(p,s) = e^{θ₁s}(φ_ε U₀)(x - p/ε)`. The plane uses
//! `θ(s)(φ_ε U₀)(e^{-2θ₁s}(x - p/ε))`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffSpec;
use crate::error::{Error, Result};
use crate::flow::{descend, FlowTrace, StopRule, Termination};
use crate::functionals::{energy_report, gamma, pohozaev_p, EnergyReport};
use crate::grid::{Field, Grid};
use crate::limit::{GroundState, GroundStateSet};
use crate::localization::{barycenter_of, manifold_distance};
use crate::problem::{Problem, ProblemSpec};
use crate::verify::{tail_profile, DecayFit, DEFAULT_WINDOW};

pub const S_POINTS: usize = 33;
pub const P_POINTS_PER_AXIS: usize = 9;
/// Minimum number of loop samples accepted by `degree_loop`.
pub const MIN_LOOP_SAMPLES: usize = 256;
const MAX_THETA_HALVINGS: usize = 6;

/// Piecewise-affine amplitude `θ(s)` of the planar path.
pub fn theta_profile(s: f64, theta1: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(format!("path parameter s = {s} outside [-1, 1]")));
    }
    if !(theta1 > 0.0 && theta1 < 0.5) {
        return Err(Error::Param(format!("theta1 must lie in (0, 1/2), got {theta1}")));
    }
    Ok(if s < -0.5 {
        2.0 * (1.0 - theta1) * s + 2.0 - theta1
    } else if s <= 0.5 {
        1.0
    } else {
        2.0 * theta1 * s + 1.0 - theta1
    })
}

#[derive(Clone, Debug)]
pub struct PathPoint {
    pub p: [f64; 2],
    pub s: f64,
    pub field: Field,
    pub gamma: f64,
    /// `P_{V₀}` of the path field.
    pub pohozaev: f64,
    /// `εΥ` in original coordinates; `None` when degenerate.
    pub x: Option<[f64; 2]>,
}

fn path_field(p: &[f64], s: f64, theta1: f64, u0: &GroundState, problem: &Problem) -> Result<Field> {
    let grid = problem.grid();
    let d = grid.dim();
    let eps = problem.eps();
    let mut c = [0.0; 2];
    for a in 0..d {
        c[a] = p[a] / eps;
    }
    if !grid.contains(&c[..d]) {
        return Err(Error::OutOfRange(format!("p/eps = {:?} lies outside the computational box", &c[..d])));
    }
    let (scale, dilation) = if d == 1 {
        ((theta1 * s).exp(), 1.0)
    } else {
        (theta_profile(s, theta1)?, (-2.0 * theta1 * s).exp())
    };
    let cut = CutoffSpec::new(1.0, problem.params().delta0);
    Ok(Field::from_fn(*grid, |x| {
        let r = dilation * (0..d).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>().sqrt();
        let phi = cut.phi(eps * r);
        if phi == 0.0 {
            0.0
        } else {
            scale * phi * u0.profile.value(r)
        }
    }))
}

fn evaluate_point(p: &[f64], s: f64, theta1: f64, set: &GroundStateSet, problem: &Problem) -> Result<PathPoint> {
    let u0 = set.top();
    let d = problem.grid().dim();
    let field = path_field(p, s, theta1, u0, problem)?;
    let g = gamma(&field, problem)?;
    let pz = pohozaev_p(&field, problem.v0(), d, problem.nonlinearity())?;
    let bary = barycenter_of(&field, problem)?;
    let x = if bary.degenerate { None } else { Some([problem.eps() * bary.value[0], problem.eps() * bary.value[1]]) };
    let mut pp = [0.0; 2];
    pp[..d].copy_from_slice(&p[..d]);
    Ok(PathPoint { p: pp, s, field, gamma: g, pohozaev: pz, x })
}

/// `γ_ε(p, s)` with its energy, Pohozaev value and barycenter.
pub fn initial_path(p: &[f64], s: f64, problem: &Problem, set: &GroundStateSet) -> Result<PathPoint> {
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(format!("path parameter s = {s} outside [-1, 1]")));
    }
    evaluate_point(p, s, problem.params().theta1, set, problem)
}

/// The configured `θ₁`, halved until `P_{V₀}(γ(x₀, -1)) > 0 > P_{V₀}(γ(x₀, 1))`.
/// When halving cannot help (a coarse cutoff moves the sign change of
/// `P_{V₀}` past `|s| = 1`), `θ₁` is enlarged towards `½` instead.
pub fn effective_theta1(problem: &Problem, set: &GroundStateSet) -> Result<f64> {
    let x0 = problem.x0();
    let base = problem.params().theta1;
    let smaller = (0..=MAX_THETA_HALVINGS).map(|k| base * 0.5f64.powi(k as i32));
    let larger = (1..).map(|k| base * 1.25f64.powi(k)).take_while(|t| *t < 0.5);
    for theta1 in smaller.chain(larger) {
        let lo = evaluate_point(&x0, -1.0, theta1, set, problem)?.pohozaev;
        let hi = evaluate_point(&x0, 1.0, theta1, set, problem)?.pohozaev;
        if lo > 0.0 && hi < 0.0 {
            return Ok(theta1);
        }
    }
    Err(Error::Validation("path endpoint Pohozaev signs fail for every theta1 tried".into()))
}

/// Sample points of `O^{δ₀} × [-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    pub p: Vec<[f64; 2]>,
    pub s: Vec<f64>,
    /// `p` on `∂O^{δ₀}`, per entry of `p`.
    pub p_boundary: Vec<bool>,
}

impl PathGrid {
    /// `P_POINTS_PER_AXIS^d` lattice points of the box around `O^{δ₀}`
    /// kept inside the ball, and `S_POINTS` values of `s`.
    pub fn standard(problem: &Problem) -> PathGrid {
        PathGrid::with_counts(problem, P_POINTS_PER_AXIS, S_POINTS)
    }

    pub fn with_counts(problem: &Problem, p_per_axis: usize, s_count: usize) -> PathGrid {
        let d = problem.grid().dim();
        let x0 = problem.x0();
        let radius = problem.params().o_radius + problem.params().delta0;
        let axis: Vec<f64> = if p_per_axis <= 1 {
            vec![0.0]
        } else {
            (0..p_per_axis).map(|k| -radius + 2.0 * radius * k as f64 / (p_per_axis - 1) as f64).collect()
        };
        let mut p = Vec::new();
        let mut p_boundary = Vec::new();
        let tol = 1e-12 * radius;
        let offsets: Vec<[f64; 2]> = if d == 1 {
            axis.iter().map(|a| [*a, 0.0]).collect()
        } else {
            axis.iter().flat_map(|a| axis.iter().map(move |b| [*a, *b])).collect()
        };
        for o in offsets {
            let r = o[0].hypot(o[1]);
            if r <= radius + tol {
                let mut q = [0.0; 2];
                for a in 0..d {
                    q[a] = x0[a] + o[a];
                }
                p.push(q);
                p_boundary.push(p_per_axis > 1 && r >= radius - tol);
            }
        }
        let s = if s_count <= 1 {
            vec![0.0]
        } else {
            (0..s_count).map(|k| -1.0 + 2.0 * k as f64 / (s_count - 1) as f64).collect()
        };
        PathGrid { p, s, p_boundary }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub p: [f64; 2],
    pub s: f64,
    pub gamma: f64,
    pub pohozaev: f64,
    pub x: Option<[f64; 2]>,
    pub on_boundary: bool,
}

#[derive(Clone, Debug)]
pub struct PathLevel {
    /// `c_ε`, the sampled maximum of `Γ_ε` along the path.
    pub level: f64,
    pub peak: PathPoint,
    /// Maximum over samples on `∂(O^{δ₀} × [-1, 1])`.
    pub boundary_max: f64,
    /// `level - boundary_max`.
    pub margin: f64,
    /// `max |p - εΥ| / ε` over the samples.
    pub r1: f64,
    /// `θ₁` actually used.
    pub theta1: f64,
    pub samples: Vec<PathSample>,
}

/// Maximum of `Γ_ε` over the sampled path; ties go to the first sample in
/// `(p, s)` lexicographic order.
pub fn path_level(problem: &Problem, set: &GroundStateSet, grid: &PathGrid) -> Result<PathLevel> {
    if grid.p.is_empty() || grid.s.is_empty() {
        return Err(Error::EmptyEnsemble("path grid".into()));
    }
    let theta1 = effective_theta1(problem, set)?;
    let d = problem.grid().dim();
    let eps = problem.eps();
    let jobs: Vec<(usize, f64)> =
        (0..grid.p.len()).flat_map(|i| grid.s.iter().map(move |s| (i, *s))).collect();
    let samples: Vec<PathSample> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let pt = evaluate_point(&grid.p[i], s, theta1, set, problem)?;
            let on_boundary = grid.p_boundary[i] || s.abs() == 1.0;
            Ok(PathSample { p: pt.p, s, gamma: pt.gamma, pohozaev: pt.pohozaev, x: pt.x, on_boundary })
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (k, smp) in samples.iter().enumerate() {
        if smp.gamma > samples[best].gamma {
            best = k;
        }
    }
    let boundary_max = samples.iter().filter(|s| s.on_boundary).map(|s| s.gamma).fold(f64::NEG_INFINITY, f64::max);
    let r1 = samples
        .iter()
        .filter_map(|s| {
            s.x.map(|x| (0..d).map(|a| (s.p[a] - x[a]).powi(2)).sum::<f64>().sqrt() / eps)
        })
        .fold(0.0, f64::max);
    let top = samples[best];
    let peak = evaluate_point(&top.p, top.s, theta1, set, problem)?;
    Ok(PathLevel {
        level: top.gamma,
        peak,
        boundary_max,
        margin: top.gamma - boundary_max,
        r1,
        theta1,
        samples,
    })
}

/// `𝓕_ε(p, s) = (εΥ - x₀, P_{V₀})` after `budget` descent steps from `γ_ε(p, s)`.
pub fn degree_map(p: &[f64], s: f64, problem: &Problem, set: &GroundStateSet, budget: usize) -> Result<Vec<f64>> {
    let theta1 = effective_theta1(problem, set)?;
    degree_map_with(p, s, theta1, problem, set, budget)
}

fn degree_map_with(
    p: &[f64],
    s: f64,
    theta1: f64,
    problem: &Problem,
    set: &GroundStateSet,
    budget: usize,
) -> Result<Vec<f64>> {
    let d = problem.grid().dim();
    let mut u = evaluate_point(p, s, theta1, set, problem)?.field;
    if budget > 0 {
        let stop = StopRule { tol: problem.params().tol.residual, max_iters: budget, stride: 1 };
        u = descend(&u, problem, &stop, None)?.final_state.u;
    }
    let y = barycenter_of(&u, problem)?.require()?;
    let x0 = problem.x0();
    let mut out: Vec<f64> = (0..d).map(|a| problem.eps() * y[a] - x0[a]).collect();
    out.push(pohozaev_p(&u, problem.v0(), d, problem.nonlinearity())?);
    Ok(out)
}

/// Winding number about the origin of the closed polygon through `samples`.
pub fn winding_degree(samples: &[[f64; 2]]) -> Result<i32> {
    if samples.len() < 3 {
        return Err(Error::Winding(format!("need at least 3 samples, got {}", samples.len())));
    }
    if let Some(k) = samples.iter().position(|z| z[0] == 0.0 && z[1] == 0.0) {
        return Err(Error::Winding(format!("sample {k} lies at the origin")));
    }
    let mut total = 0.0;
    for k in 0..samples.len() {
        let a = samples[k];
        let b = samples[(k + 1) % samples.len()];
        let jump = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
        if jump.abs() > PI / 2.0 {
            return Err(Error::Winding(format!(
                "angle jump {jump:.3} between samples {k} and {} exceeds pi/2; refine the loop",
                (k + 1) % samples.len()
            )));
        }
        total += jump;
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub degree: i32,
    pub samples: usize,
    pub budget: usize,
    pub theta1: f64,
    /// Largest consecutive angle increment, in radians.
    pub max_jump: f64,
    /// Smallest image norm along the loop.
    pub min_radius: f64,
    /// Loop parameters `(p, s)` and images, in traversal order.
    pub loop_points: Vec<([f64; 2], [f64; 2])>,
}

/// Samples `𝓕_ε` on the positively oriented boundary of
/// `[x₀ - r, x₀ + r] × [-1, 1]` (`r` the radius of `O^{δ₀}`) and winds it.
pub fn degree_loop(problem: &Problem, set: &GroundStateSet, samples: usize, budget: usize) -> Result<DegreeReport> {
    if problem.grid().dim() != 1 {
        return Err(Error::Param("the degree loop is implemented for d = 1".into()));
    }
    let per_side = samples.div_ceil(4).max(1);
    let n = 4 * per_side;
    let theta1 = effective_theta1(problem, set)?;
    let x0 = problem.x0()[0];
    let radius = problem.params().o_radius + problem.params().delta0;
    let (pa, pb) = (x0 - radius, x0 + radius);
    let params: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let side = k / per_side;
            let t = (k % per_side) as f64 / per_side as f64;
            match side {
                0 => [pa + t * (pb - pa), -1.0],
                1 => [pb, -1.0 + 2.0 * t],
                2 => [pb - t * (pb - pa), 1.0],
                _ => [pa, 1.0 - 2.0 * t],
            }
        })
        .collect();
    let images: Vec<[f64; 2]> = params
        .par_iter()
        .map(|q| {
            let v = degree_map_with(&q[..1], q[1], theta1, problem, set, budget)?;
            Ok([v[0], v[1]])
        })
        .collect::<Result<_>>()?;
    let degree = winding_degree(&images)?;
    let max_jump = (0..n)
        .map(|k| {
            let (a, b) = (images[k], images[(k + 1) % n]);
            (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]).abs()
        })
        .fold(0.0, f64::max);
    let min_radius = images.iter().map(|z| z[0].hypot(z[1])).fold(f64::INFINITY, f64::min);
    Ok(DegreeReport {
        degree,
        samples: n,
        budget,
        theta1,
        max_jump,
        min_radius,
        loop_points: params.into_iter().zip(images).collect(),
    })
}

/// Largest `ε` for which every path center keeps the slowest member of the
/// set down to `10⁻³` of its peak inside the box.
pub fn box_adequacy_threshold(spec: &ProblemSpec, set: &GroundStateSet) -> f64 {
    let reach = (0..set.len())
        .map(|k| {
            let st = set.state_of(k);
            let theta = set.members[k].theta;
            let target = 1e-3 * st.amplitude;
            let mut r = 0.0;
            while st.profile.value(r) > target {
                r += 0.01;
            }
            theta.exp() * r
        })
        .fold(0.0, f64::max);
    let x0 = spec.potential.maximum_point();
    let p_max = (0..spec.dim).map(|a| (x0[a] - spec.omega.center[a]).abs()).fold(0.0, f64::max)
        + spec.params.o_radius
        + spec.params.delta0;
    (spec.omega.half_width - p_max) / reach
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveRecord {
    pub eps: f64,
    /// `Γ_ε(u_ε)`.
    pub gamma: f64,
    pub energy: EnergyReport,
    pub residual: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// `x_ε = εΥ(u_ε)` in original coordinates.
    pub x_eps: Vec<f64>,
    /// `dist(x_ε, 𝒱)` with `𝒱` the maximum set of `V`.
    pub dist_to_max: f64,
    /// Set for a constant potential, where `𝒱` is everything.
    pub concentration_vacuous: bool,
    pub decay: Option<DecayFit>,
    /// `|P_m(u_ε)| / ∫|∇u_ε|²` at `m = V(x_ε)`.
    pub pohozaev_residual: f64,
    pub manifold_distance: f64,
    pub z_member: bool,
    pub level: f64,
    pub boundary_max: f64,
    pub margin: f64,
    pub r1: f64,
    pub theta1: f64,
    pub peak: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub record: SolveRecord,
    /// `u_ε` in rescaled coordinates.
    pub field: Field,
    pub trace: FlowTrace,
    pub path: PathLevel,
}

impl Solution {
    /// `v_ε(x) = u_ε(x/ε)` on the correspondingly shrunk grid.
    pub fn original_coordinates(&self) -> Result<Field> {
        let g = self.field.grid();
        let e = self.record.eps;
        let c = g.center();
        let center = [c[0] * e, c.get(1).copied().unwrap_or(0.0) * e];
        let grid = Grid::centered(g.dim(), g.half_width() * e, g.n(), center)?;
        Field::from_values(grid, self.field.values().to_vec())
    }
}

/// Path level, descent from the peak, and validation of the critical point.
pub fn solve(problem: &Problem, set: &GroundStateSet) -> Result<Solution> {
    let path = path_level(problem, set, &PathGrid::standard(problem))?;
    let stop = StopRule::from_problem(problem);
    let trace = descend(&path.peak.field, problem, &stop, Some(set))?;
    let state = &trace.final_state;
    if trace.termination != Termination::Converged {
        return Err(Error::Descent {
            reason: serde_json::to_string(&trace.termination)?.trim_matches('"').to_string(),
            residual: state.residual,
        });
    }
    if state.penalty != 0.0 {
        return Err(Error::Validation(format!("penalty is {:e}, not zero", state.penalty)));
    }
    let u = state.u.clone();
    let d = problem.grid().dim();
    let eps = problem.eps();
    let y = state.barycenter.ok_or(Error::Validation("degenerate barycenter at the critical point".into()))?;
    let x_eps: Vec<f64> = (0..d).map(|a| eps * y[a]).collect();
    let x0 = problem.x0();
    let dist_to_max = (0..d).map(|a| (x_eps[a] - x0[a]).powi(2)).sum::<f64>().sqrt();
    let m = problem.potential().value(&x_eps);
    let kinetic = u.gradient_energy();
    let pz = pohozaev_p(&u, m, d, problem.nonlinearity())?;
    let decay = tail_profile(&u, problem, DEFAULT_WINDOW).ok().and_then(|r| r.fit);
    let md = manifold_distance(&u, set, problem)?;
    let z_member = trace.final_membership.map(|z| z.member).unwrap_or(false);
    let record = SolveRecord {
        eps,
        gamma: state.energy,
        energy: energy_report(&u, problem)?,
        residual: state.residual,
        iterations: state.iteration,
        termination: trace.termination,
        x_eps,
        dist_to_max,
        concentration_vacuous: problem.potential().is_constant(),
        decay,
        pohozaev_residual: pz.abs() / kinetic,
        manifold_distance: md.dist,
        z_member,
        level: path.level,
        boundary_max: path.boundary_max,
        margin: path.margin,
        r1: path.r1,
        theta1: path.theta1,
        peak: [path.peak.p[0], path.peak.p[1], path.peak.s],
    };
    Ok(Solution { record, field: u, trace, path })
}

/// `solve` at `spec.at_eps(eps)` after checking the box-adequacy threshold.
pub fn solve_at(spec: &ProblemSpec, eps: f64, set: &GroundStateSet) -> Result<Solution> {
    let limit = box_adequacy_threshold(spec, set);
    if eps > limit {
        return Err(Error::OutOfRange(format!("eps = {eps} exceeds the box-adequacy threshold {limit:.3}")));
    }
    let mut spec = spec.clone();
    spec.params.localization = Some(set.constants);
    solve(&spec.at_eps(eps)?, set)
}
