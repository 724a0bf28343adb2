use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ground_state, GroundState};
use crate::error::{Error, Result};
use crate::functionals::pohozaev_p;
use crate::grid::{Field, Grid};
use crate::nonlinearity::Nonlinearity;
use crate::problem::LocalizationConstants;
use crate::snapshot::{read_snapshot, write_snapshot};

const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetOptions {
    pub dim: usize,
    /// `V₀ = max V`.
    pub v0: f64,
    pub delta0: f64,
    pub t0: f64,
}

/// One sampled element `U_m(e^{-θ}·)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetMember {
    /// Index into `GroundStateSet::states`.
    pub state: usize,
    pub theta: f64,
}

/// A finite sample of the ground-state set with its localization radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSet {
    pub options: SetOptions,
    pub states: Vec<GroundState>,
    pub members: Vec<SetMember>,
    /// Dilation bound in the plane; `None` in one dimension.
    pub theta0: Option<f64>,
    pub constants: LocalizationConstants,
}

impl GroundStateSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn state_of(&self, member: usize) -> &GroundState {
        &self.states[self.members[member].state]
    }

    /// The ground state at `m = V₀`.
    pub fn top(&self) -> &GroundState {
        self.states.iter().max_by(|a, b| a.m.total_cmp(&b.m)).expect("set is non-empty")
    }

    /// `U(e^{-θ}r)` for the given member.
    pub fn member_value(&self, member: usize, r: f64) -> f64 {
        let SetMember { state, theta } = self.members[member];
        self.states[state].profile.value((-theta).exp() * r)
    }

    /// `∫_{B(0,R)} U(e^{-θ}·)²`.
    fn member_mass_within(&self, member: usize, radius: f64) -> f64 {
        let SetMember { state, theta } = self.members[member];
        let d = self.options.dim as f64;
        (d * theta).exp() * self.states[state].profile.mass_within((-theta).exp() * radius)
    }

    fn member_mass_outside(&self, member: usize, radius: f64) -> f64 {
        let SetMember { state, theta } = self.members[member];
        let d = self.options.dim as f64;
        (d * theta).exp() * self.states[state].profile.mass_outside((-theta).exp() * radius)
    }

    /// `cut(|x - y|)·U(e^{-θ}|x - y|)` on the grid.
    pub fn member_field(&self, member: usize, grid: &Grid, center: &[f64], cut: impl Fn(f64) -> f64) -> Field {
        let d = grid.dim();
        Field::from_fn(*grid, |x| {
            let r = (0..d).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>().sqrt();
            let c = cut(r);
            if c == 0.0 {
                0.0
            } else {
                c * self.member_value(member, r)
            }
        })
    }

    /// Writes one snapshot per member (sampled on `grid` about its center)
    /// and a JSON manifest; returns the written paths.
    pub fn save(&self, dir: &Path, grid: &Grid) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut entries = Vec::new();
        for k in 0..self.members.len() {
            let name = format!("member_{k:02}.snls");
            let path = dir.join(&name);
            let field = self.member_field(k, grid, grid.center(), |_| 1.0);
            write_snapshot(&path, &field)?;
            written.push(path);
            let st = self.state_of(k);
            entries.push(ManifestEntry {
                file: name,
                m: st.m,
                theta: self.members[k].theta,
                level: st.level,
                mass: (self.options.dim as f64 * self.members[k].theta).exp() * st.mass,
                pohozaev_residual: st.pohozaev_residual,
                amplitude: st.amplitude,
            });
        }
        let manifest = Manifest {
            r0: self.constants.r0,
            rho1: self.constants.rho1,
            rho0: self.constants.rho0,
            rho2: self.constants.rho2,
            members: entries,
            set: self.clone(),
        };
        let path = dir.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        written.push(path);
        Ok(written)
    }

    pub fn load(dir: &Path) -> Result<GroundStateSet> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        for e in &manifest.members {
            read_snapshot(&dir.join(&e.file))?;
        }
        Ok(manifest.set)
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    m: f64,
    theta: f64,
    level: f64,
    mass: f64,
    pohozaev_residual: f64,
    amplitude: f64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    r0: f64,
    rho1: f64,
    rho0: f64,
    rho2: f64,
    members: Vec<ManifestEntry>,
    /// Full radial profiles, so a load reproduces the set exactly.
    set: GroundStateSet,
}

/// Smallest `θ` on a `0.02` scan for which `s ↦ sU₀(e^{-θ}·)` has the sign
/// pattern of the planar dilation lemma on sampled `s ∈ [0, 1) ∪ (1, 1.5]`.
fn planar_theta0(u0: &GroundState, f: &Nonlinearity) -> Result<f64> {
    let grid = Grid::new(2, u0.profile.cut_radius().min(25.0) + 10.0, 161)?;
    let m = u0.m;
    for step in 1..=50 {
        let theta = 0.02 * step as f64;
        let base = Field::from_fn(grid, |x| u0.dilated_value(x, &[0.0, 0.0], theta, 1.0));
        let ok = (0..=30).filter(|&k| k != 20).all(|k| {
            let s = k as f64 * 0.05;
            let u = base.scaled(s);
            let p = pohozaev_p(&u, m, 2, f).unwrap_or(f64::NAN);
            // d/ds L(s w) = s‖∇w‖² + m s‖w‖² - ∫f(s w)w
            let fw: f64 = base.values().iter().map(|&w| f.f(s * w) * w).sum::<f64>() * grid.cell_volume();
            let dl = s * base.gradient_energy() + m * s * base.l2_norm_sq() - fw;
            if k == 0 {
                true
            } else if s < 1.0 {
                p > 0.0 && dl > 0.0
            } else {
                p < 0.0 && dl < 0.0
            }
        });
        if ok {
            return Ok(theta);
        }
    }
    Err(Error::Param("no dilation in (0, 1] satisfies the planar sign pattern".into()))
}

/// Samples the ground-state set at `m ∈ {V₀ - δ₀, V₀ - δ₀/2, V₀}` (a single
/// state when `δ₀ = 0`), checks `2E_{V₀-δ₀} > E_{V₀}`, and fixes `R₀`, `ρ₁`,
/// `ρ₂`, `ρ₀`.
pub fn build_s0(opts: SetOptions, f: &Nonlinearity) -> Result<GroundStateSet> {
    let SetOptions { dim, v0, delta0, t0 } = opts;
    if !(delta0 >= 0.0 && delta0 < v0) {
        return Err(Error::Param(format!("delta0 must lie in [0, V0), got {delta0}")));
    }
    let ms: Vec<f64> = if delta0 == 0.0 { vec![v0] } else { vec![v0 - delta0, v0 - 0.5 * delta0, v0] };
    let states: Vec<GroundState> = ms.par_iter().map(|&m| ground_state(m, dim, f, t0)).collect::<Result<_>>()?;
    let top = states.last().expect("non-empty").level;
    let bottom = states[0].level;
    if states.len() > 1 && !(2.0 * bottom > top) {
        return Err(Error::Param(format!("delta0 too large: 2 E(V0 - delta0) = {} <= E(V0) = {top}", 2.0 * bottom)));
    }
    for st in &states {
        if st.pohozaev_residual > 1e-3 || st.level > top * (1.0 + 1e-12) {
            return Err(Error::Shooting { m: st.m, reason: "ground state fails the admissibility checks".into() });
        }
    }
    let theta0 = if dim == 2 { Some(planar_theta0(states.last().unwrap(), f)?) } else { None };
    let thetas: Vec<f64> = match theta0 {
        Some(t) => vec![-t, 0.0, t],
        None => vec![0.0],
    };
    let members: Vec<SetMember> = (0..states.len())
        .flat_map(|state| thetas.iter().map(move |&theta| SetMember { state, theta }))
        .collect();
    let mut set = GroundStateSet {
        options: opts,
        states,
        members,
        theta0,
        constants: LocalizationConstants { r0: 0.0, rho1: 0.0, rho0: 0.0, rho2: 0.0 },
    };
    set.constants = localization_constants(&set)?;
    Ok(set)
}

/// Smallest `R₀ > 1` on a `0.01` lattice with `‖U‖_{L²(ℝ^d∖B(0,R₀))} < ρ₁/8`
/// for every member, where `ρ₁` sits just below `(4/3)min_U ‖U‖_{L²(B(0,R₀/2))}`.
/// The tail shrinks and the inner norm grows with `R₀`, so the first
/// admissible lattice point is the joint choice.
fn localization_constants(set: &GroundStateSet) -> Result<LocalizationConstants> {
    let k = set.members.len();
    let d = set.options.dim as f64;
    let min_norm = (0..k)
        .map(|j| (d * set.members[j].theta).exp() * set.state_of(j).mass)
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    let rho1_at = |r: f64| 0.999 * 4.0 / 3.0 * (0..k).map(|j| set.member_mass_within(j, r / 2.0)).fold(f64::INFINITY, f64::min).sqrt();
    let mut step = 1;
    loop {
        let r0 = 1.0 + 0.01 * step as f64;
        let rho1 = rho1_at(r0);
        let target = (rho1 / 8.0).powi(2);
        if (0..k).all(|j| set.member_mass_outside(j, r0) < target) {
            let rho2 = 0.5 * min_norm;
            let rho0 = (0.9 * rho1 / 16.0).min(rho1.min(rho2) / 2.0);
            return Ok(LocalizationConstants { r0, rho1, rho0, rho2 });
        }
        step += 1;
        if r0 > 1e3 {
            return Err(Error::Param("no radius R0 captures the ground states".into()));
        }
    }
}
