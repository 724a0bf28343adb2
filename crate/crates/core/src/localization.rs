//! Barycenter, tail penalty and distances to the ground-state manifold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffSpec;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::limit::GroundStateSet;
use crate::problem::{he_inner, Problem};

/// Below this denominator (volume units) the barycenter is undefined.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarycenterReport {
    /// `Υ` in rescaled coordinates; only the first `dim` entries are meaningful.
    pub value: [f64; 2],
    pub denominator: f64,
    pub degenerate: bool,
}

impl BarycenterReport {
    pub fn point(&self, dim: usize) -> &[f64] {
        &self.value[..dim]
    }

    pub fn require(&self) -> Result<[f64; 2]> {
        if self.degenerate {
            Err(Error::DegenerateBarycenter(self.denominator))
        } else {
            Ok(self.value)
        }
    }
}

/// Node offsets `(di, half-width in j)` of a disc of radius `r`.
fn disc_rows(grid: &Grid, r: f64) -> Vec<(isize, isize)> {
    let h = grid.h();
    let slack = 1e-9;
    let reach = (r / h + slack).floor() as isize;
    if grid.dim() == 1 {
        return vec![(0, reach)];
    }
    (-reach..=reach)
        .map(|di| {
            let y = di as f64 * h;
            let rem = (r * r - y * y).max(0.0).sqrt();
            (di, (rem / h + slack).floor() as isize)
        })
        .collect()
}

/// `Σ_{j : |x_j - x_i| ≤ r} w_j` at every node `i`, with `w` zero off the grid.
pub(crate) fn ball_sum(grid: &Grid, w: &[f64], r: f64) -> Vec<f64> {
    let n = grid.n() as isize;
    let rows = disc_rows(grid, r);
    if grid.dim() == 1 {
        let reach = rows[0].1;
        let mut prefix = vec![0.0; w.len() + 1];
        for (k, v) in w.iter().enumerate() {
            prefix[k + 1] = prefix[k] + v;
        }
        return (0..n)
            .map(|i| {
                let lo = (i - reach).max(0) as usize;
                let hi = (i + reach + 1).min(n) as usize;
                prefix[hi] - prefix[lo]
            })
            .collect();
    }
    // Row-wise prefix sums; each disc is a stack of row segments.
    let nu = n as usize;
    let mut prefix = vec![0.0; nu * (nu + 1)];
    for i in 0..nu {
        let base = i * (nu + 1);
        for j in 0..nu {
            prefix[base + j + 1] = prefix[base + j] + w[i * nu + j];
        }
    }
    let mut out = vec![0.0; w.len()];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for &(di, half) in &rows {
                let row = i + di;
                if row < 0 || row >= n {
                    continue;
                }
                let lo = (j - half).max(0) as usize;
                let hi = (j + half + 1).min(n) as usize;
                let base = row as usize * (nu + 1);
                acc += prefix[base + hi] - prefix[base + lo];
            }
            out[(i * n + j) as usize] = acc;
        }
    }
    out
}

/// `∫_{B(P,R₀)} u²` by nodal quadrature at every grid node `P`.
pub fn ball_masses(u: &Field, r0: f64) -> Vec<f64> {
    let sq: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    let vol = u.grid().cell_volume();
    ball_sum(u.grid(), &sq, r0).into_iter().map(|s| s * vol).collect()
}

/// `∫_{B(P,R₀)} u²` for an arbitrary point `P`.
pub fn ball_mass(u: &Field, p: &[f64], r0: f64) -> f64 {
    let g = u.grid();
    let d = g.dim();
    let r2 = r0 * r0 * (1.0 + 1e-12);
    u.values()
        .iter()
        .enumerate()
        .filter(|(idx, _)| {
            let x = g.point(*idx);
            (0..d).map(|a| (x[a] - p[a]).powi(2)).sum::<f64>() <= r2
        })
        .map(|(_, v)| v * v)
        .sum::<f64>()
        * g.cell_volume()
}

struct BarycenterParts {
    report: BarycenterReport,
    masses: Vec<f64>,
    /// `Σ_P d(u,P)` without the volume factor.
    raw_denominator: f64,
}

fn barycenter_parts(u: &Field, cut: &CutoffSpec, r0: f64) -> BarycenterParts {
    let g = u.grid();
    let d = g.dim();
    let masses = ball_masses(u, r0);
    let mut den = 0.0;
    let mut num = [0.0; 2];
    for (idx, &m) in masses.iter().enumerate() {
        let w = cut.psi(m);
        if w > 0.0 {
            let p = g.point(idx);
            den += w;
            for a in 0..d {
                num[a] += w * p[a];
            }
        }
    }
    let vol = g.cell_volume();
    let degenerate = den * vol < DENOMINATOR_FLOOR;
    let value = if degenerate { [f64::NAN; 2] } else { [num[0] / den, num[1] / den] };
    BarycenterParts {
        report: BarycenterReport { value, denominator: den * vol, degenerate },
        masses,
        raw_denominator: den,
    }
}

/// `Υ(u) = Σ_P d(u,P) P / Σ_P d(u,P)` with `d(u,P) = ψ(∫_{B(P,R₀)} u²)`.
pub fn barycenter(u: &Field, cut: &CutoffSpec, r0: f64) -> BarycenterReport {
    barycenter_parts(u, cut, r0).report
}

pub fn barycenter_of(u: &Field, problem: &Problem) -> Result<BarycenterReport> {
    problem.check_field(u)?;
    Ok(barycenter(u, &problem.cutoffs()?, problem.params().loc()?.r0))
}

/// `L²` representers `G_k` of the components of `Υ'(u)`, so that
/// `Υ'(u)v = (⟨G_1, v⟩, ⟨G_2, v⟩)`.
pub fn upsilon_gradient(u: &Field, cut: &CutoffSpec, r0: f64) -> Result<Vec<Field>> {
    let parts = barycenter_parts(u, cut, r0);
    let y = parts.report.require()?;
    let g = u.grid();
    let mut out = Vec::with_capacity(g.dim());
    for a in 0..g.dim() {
        let w: Vec<f64> = parts
            .masses
            .iter()
            .enumerate()
            .map(|(idx, &m)| {
                let dp = cut.psi_derivative(m);
                if dp == 0.0 {
                    0.0
                } else {
                    dp * (g.point(idx)[a] - y[a])
                }
            })
            .collect();
        let s = ball_sum(g, &w, r0);
        let vals: Vec<f64> =
            u.values().iter().zip(&s).map(|(ui, si)| 2.0 * ui * si / parts.raw_denominator).collect();
        out.push(Field::from_values(*g, vals)?);
    }
    Ok(out)
}

/// `(Υ(u + tv) - Υ(u - tv)) / 2t` with `t = 10⁻⁴‖u‖/‖v‖`.
pub fn barycenter_directional(u: &Field, v: &Field, cut: &CutoffSpec, r0: f64) -> Result<[f64; 2]> {
    let base = barycenter(u, cut, r0);
    base.require()?;
    let vn = v.l2_norm();
    if vn == 0.0 {
        return Ok([0.0; 2]);
    }
    let t = 1e-4 * u.l2_norm() / vn;
    let plus = barycenter(&u.add_scaled(t, v)?, cut, r0).require()?;
    let minus = barycenter(&u.add_scaled(-t, v)?, cut, r0).require()?;
    let d = u.grid().dim();
    let mut out = [0.0; 2];
    for a in 0..d {
        out[a] = (plus[a] - minus[a]) / (2.0 * t);
    }
    Ok(out)
}

/// `χ(√ε |x - Υ|)` at every node.
fn chi_weights(grid: &Grid, cut: &CutoffSpec, eps: f64, y: &[f64; 2]) -> Vec<f64> {
    let d = grid.dim();
    let se = eps.sqrt();
    (0..grid.len())
        .map(|idx| {
            let x = grid.point(idx);
            let r = (0..d).map(|a| (x[a] - y[a]).powi(2)).sum::<f64>().sqrt();
            cut.chi(se * r)
        })
        .collect()
}

/// `ε^{-1/2}∫χ_{ε,u}u²` and the barycenter it used, or `None` when the
/// total mass already sits below the threshold.
fn penalty_argument(u: &Field, problem: &Problem) -> Result<Option<(f64, BarycenterParts, CutoffSpec)>> {
    problem.check_field(u)?;
    let eps = problem.eps();
    if u.l2_norm_sq() / eps.sqrt() <= 1.0 {
        return Ok(None);
    }
    let cut = problem.cutoffs()?;
    let parts = barycenter_parts(u, &cut, problem.params().loc()?.r0);
    let y = parts.report.require()?;
    let chi = chi_weights(u.grid(), &cut, eps, &y);
    let outer: f64 =
        u.values().iter().zip(&chi).map(|(v, c)| c * v * v).sum::<f64>() * u.grid().cell_volume();
    Ok(Some((outer / eps.sqrt(), parts, cut)))
}

/// `Φ_ε(u) = (ε^{-1/2}∫χ(√ε(x - Υ(u)))u² - 1)₊²`.
pub fn penalty(u: &Field, problem: &Problem) -> Result<f64> {
    Ok(match penalty_argument(u, problem)? {
        Some((a, _, _)) => (a - 1.0).max(0.0).powi(2),
        None => 0.0,
    })
}

/// `L²` representer of `Φ_ε'(u)`, including the term from moving `Υ`;
/// `None` when the penalty vanishes to first order.
pub fn penalty_gradient(u: &Field, problem: &Problem) -> Result<Option<Field>> {
    let Some((a, parts, cut)) = penalty_argument(u, problem)? else {
        return Ok(None);
    };
    if a <= 1.0 {
        return Ok(None);
    }
    let eps = problem.eps();
    let se = eps.sqrt();
    let g = u.grid();
    let d = g.dim();
    let y = parts.report.value;
    let r0 = problem.params().loc()?.r0;
    let vol = g.cell_volume();

    // ∂/∂Υ_k of ∫χ(√ε|x-Υ|)u².
    let mut dy = [0.0; 2];
    let mut chi = vec![0.0; g.len()];
    for (idx, &v) in u.values().iter().enumerate() {
        let x = g.point(idx);
        let r = (0..d).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>().sqrt();
        chi[idx] = cut.chi(se * r);
        if r > 0.0 && v != 0.0 {
            let dc = cut.chi_derivative(se * r) * se;
            for k in 0..d {
                dy[k] -= dc * (x[k] - y[k]) / r * v * v * vol;
            }
        }
    }
    let coeff = 2.0 * (a - 1.0) / se;
    let mut vals: Vec<f64> = u.values().iter().zip(&chi).map(|(v, c)| 2.0 * c * v).collect();
    if dy.iter().any(|v| *v != 0.0) {
        let grads = upsilon_gradient(u, &cut, r0)?;
        for (k, gk) in grads.iter().enumerate() {
            for (o, gi) in vals.iter_mut().zip(gk.values()) {
                *o += dy[k] * gi;
            }
        }
    }
    for o in vals.iter_mut() {
        *o *= coeff;
    }
    Ok(Some(Field::from_values(*g, vals)?))
}

/// Closest sampled element `(φ_ε U)(· - y)` of the ground-state manifold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDistance {
    /// `‖u - (φ_ε U)(· - y)‖_ε` at the minimizer.
    pub dist: f64,
    pub member: usize,
    /// `y` in rescaled coordinates.
    pub shift: [f64; 2],
}

/// `(φ_ε U)(· - y)` on the problem grid.
pub fn manifold_element(set: &GroundStateSet, member: usize, shift: &[f64], problem: &Problem) -> Result<Field> {
    let cut = CutoffSpec::new(1.0, problem.params().delta0);
    let eps = problem.eps();
    Ok(set.member_field(member, problem.grid(), shift, |r| cut.phi(eps * r)))
}

fn distance_sq(u: &Field, set: &GroundStateSet, member: usize, y: &[f64; 2], problem: &Problem) -> Result<f64> {
    let w = manifold_element(set, member, &y[..problem.grid().dim()], problem)?;
    let diff = u.sub(&w)?;
    Ok(he_inner(&diff, &diff, problem)?.max(0.0))
}

fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    for _ in 0..40 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(if fa <= fb { (a, fa) } else { (b, fb) })
}

/// Minimizes `‖u - (φ_ε U)(· - y)‖_ε` over the sampled set and shifts `y`:
/// a lattice search within `2R₀` of the barycenter (the box center when it
/// is degenerate), then golden-section refinement along each axis.
pub fn manifold_distance(u: &Field, set: &GroundStateSet, problem: &Problem) -> Result<ManifoldDistance> {
    problem.check_field(u)?;
    if set.is_empty() {
        return Err(Error::EmptyEnsemble("ground-state set".into()));
    }
    let grid = problem.grid();
    let d = grid.dim();
    let r0 = problem.params().loc()?.r0;
    let bary = barycenter_of(u, problem)?;
    let seed = if bary.degenerate { [grid.center()[0], *grid.center().get(1).unwrap_or(&0.0)] } else { bary.value };
    let step = if d == 1 { grid.h() } else { grid.h().max(4.0 * r0 / 32.0) };
    let reach = (2.0 * r0 / step).ceil() as isize;

    let candidates: Vec<ManifoldDistance> = (0..set.len())
        .into_par_iter()
        .map(|member| -> Result<ManifoldDistance> {
            let offsets: Vec<[f64; 2]> = if d == 1 {
                (-reach..=reach).map(|i| [seed[0] + i as f64 * step, 0.0]).collect()
            } else {
                (-reach..=reach)
                    .flat_map(|i| (-reach..=reach).map(move |j| (i, j)))
                    .map(|(i, j)| [seed[0] + i as f64 * step, seed[1] + j as f64 * step])
                    .collect()
            };
            let mut best = (f64::INFINITY, seed);
            for y in offsets {
                let v = distance_sq(u, set, member, &y, problem)?;
                if v < best.0 {
                    best = (v, y);
                }
            }
            let (mut val, mut y) = best;
            for _round in 0..d {
                for axis in 0..d {
                    let base = y;
                    let (t, v) = golden(base[axis] - step, base[axis] + step, |t| {
                        let mut p = base;
                        p[axis] = t;
                        distance_sq(u, set, member, &p, problem)
                    })?;
                    if v < val {
                        val = v;
                        y[axis] = t;
                    }
                }
            }
            Ok(ManifoldDistance { dist: val.sqrt(), member, shift: y })
        })
        .collect::<Result<_>>()?;
    let best = candidates
        .into_iter()
        .min_by(|a, b| a.dist.total_cmp(&b.dist).then(a.member.cmp(&b.member)))
        .expect("non-empty");
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZMembership {
    pub member: bool,
    pub distance: Option<ManifoldDistance>,
    /// `dist(εΥ(u), O)`, absent for a degenerate barycenter.
    pub barycenter_offset: Option<f64>,
}

/// `u ∈ Z_ε(ρ, δ)`: within `ρ` of the manifold with `dist(εΥ(u), O) < δ`.
pub fn zset_membership(u: &Field, rho: f64, delta: f64, set: &GroundStateSet, problem: &Problem) -> Result<ZMembership> {
    let bary = barycenter_of(u, problem)?;
    if bary.degenerate {
        return Ok(ZMembership { member: false, distance: None, barycenter_offset: None });
    }
    let d = problem.grid().dim();
    let eps = problem.eps();
    let x: Vec<f64> = bary.value[..d].iter().map(|v| eps * v).collect();
    let offset = problem.dist_to_o(&x);
    let dist = manifold_distance(u, set, problem)?;
    Ok(ZMembership { member: dist.dist < rho && offset < delta, distance: Some(dist), barycenter_offset: Some(offset) })
}
