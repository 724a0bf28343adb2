//! Ground states of `-ΔU + mU = f(U)`, the level curve `m ↦ E_m` and the
//! sampled ground-state set.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::nonlinearity::Nonlinearity;
use crate::ode::{hermite, integrate, Outcome, StepControl};

mod set;
pub use set::{build_s0, GroundStateSet, SetMember, SetOptions};

/// Shooting stops once `u` falls below this fraction of `u(0)`; beyond that
/// the linearized exponential tail is attached.
const TAIL_FRACTION: f64 = 1e-6;
/// Starting radius of the series expansion in two dimensions.
const SERIES_RADIUS: f64 = 1e-3;
const QUADRATURE_STEP: f64 = 1e-3;

/// A radial profile `r ↦ U(r)` from shooting nodes plus an exponential tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dim: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// Decay rate of the attached tail.
    pub kappa: f64,
}

impl RadialProfile {
    pub fn cut_radius(&self) -> f64 {
        *self.r.last().expect("profile has nodes")
    }

    /// `(U(r), U'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        let rc = self.cut_radius();
        if r >= rc {
            let uc = *self.u.last().expect("profile has nodes");
            let decay = (-self.kappa * (r - rc)).exp();
            return if self.dim == 1 {
                let v = uc * decay;
                (v, -self.kappa * v)
            } else {
                let v = uc * (rc / r).sqrt() * decay;
                (v, -(self.kappa + 0.5 / r) * v)
            };
        }
        let k = self.r.partition_point(|&x| x <= r).clamp(1, self.r.len() - 1);
        hermite(self.r[k - 1], self.r[k], self.u[k - 1], self.u[k], self.du[k - 1], self.du[k], r)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// Radius beyond which the profile is negligible for quadrature.
    pub fn quadrature_end(&self) -> f64 {
        self.cut_radius() + 40.0 / self.kappa
    }

    /// `∫ g(U, U', r)` over the ball `B(0, b)` minus `B(0, a)`.
    pub fn radial_integral(&self, a: f64, b: f64, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut n = ((b - a) / QUADRATURE_STEP).ceil() as usize;
        n += n % 2;
        n = n.max(2);
        let dr = (b - a) / n as f64;
        let weight = |r: f64| if self.dim == 1 { 2.0 } else { 2.0 * std::f64::consts::PI * r };
        let mut acc = 0.0;
        for k in 0..=n {
            let r = a + k as f64 * dr;
            let (u, du) = self.eval(r);
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * weight(r) * g(u, du, r);
        }
        acc * dr / 3.0
    }

    /// `∫_{B(0,R)} U²`.
    pub fn mass_within(&self, radius: f64) -> f64 {
        self.radial_integral(0.0, radius, |u, _, _| u * u)
    }

    /// `∫_{ℝ^d \ B(0,R)} U²`.
    pub fn mass_outside(&self, radius: f64) -> f64 {
        self.radial_integral(radius, radius.max(self.quadrature_end()), |u, _, _| u * u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub m: f64,
    pub dim: usize,
    pub amplitude: f64,
    /// `L_m(U)`.
    pub level: f64,
    /// `∫U²`.
    pub mass: f64,
    /// `∫|∇U|²`.
    pub kinetic: f64,
    /// `∫F(U)`.
    pub nonlinear: f64,
    /// `|P_m(U)| / ∫|∇U|²`.
    pub pohozaev_residual: f64,
    pub decay_rate: f64,
    /// Final width of the shooting bracket on `U(0)`.
    pub bracket_width: f64,
    pub profile: RadialProfile,
}

impl GroundState {
    /// `s·U(e^{-θ}|x - c|)`.
    pub fn dilated_value(&self, x: &[f64], center: &[f64], theta: f64, scale: f64) -> f64 {
        let r = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        scale * self.profile.value((-theta).exp() * r)
    }

    /// `U(· - c)` sampled on the grid.
    pub fn field(&self, grid: &Grid, center: &[f64]) -> Field {
        Field::from_fn(*grid, |x| self.dilated_value(x, center, 0.0, 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shot {
    Over,
    Under,
}

struct Shooter<'a> {
    m: f64,
    dim: usize,
    f: &'a Nonlinearity,
    r_max: f64,
}

impl Shooter<'_> {
    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        let mut acc = self.m * y[0] - self.f.f(y[0]);
        if self.dim == 2 {
            acc -= y[1] / r;
        }
        [y[1], acc]
    }

    fn start(&self, a: f64) -> (f64, [f64; 2]) {
        if self.dim == 1 {
            (0.0, [a, 0.0])
        } else {
            let c = (self.m * a - self.f.f(a)) / 4.0;
            let r = SERIES_RADIUS;
            (r, [a + c * r * r, 2.0 * c * r])
        }
    }

    /// Runs one shot; `record` receives every accepted node.
    fn shoot(&self, a: f64, stop_at_tail: bool, mut record: impl FnMut(f64, &[f64; 2])) -> Result<Option<Shot>> {
        let (r0, y0) = self.start(a);
        let mut verdict = None;
        let cut = TAIL_FRACTION * a;
        let out = integrate(|r, y| self.rhs(r, y), r0, y0, self.r_max, &StepControl::default(), |r, y| {
            if y[0] < 0.0 {
                verdict = Some(Shot::Over);
                return ControlFlow::Break(());
            }
            if y[1] > 0.0 {
                verdict = Some(Shot::Under);
                return ControlFlow::Break(());
            }
            record(r, y);
            if stop_at_tail && y[0] < cut {
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        });
        match out {
            Outcome::Stopped => Ok(verdict),
            Outcome::ReachedEnd => Ok(None),
            other => Err(Error::Shooting { m: self.m, reason: format!("integrator failed: {other:?}") }),
        }
    }

    /// A shot that neither crosses nor turns sits on a constant equilibrium
    /// and counts as undershooting.
    fn classify(&self, a: f64) -> Result<Shot> {
        Ok(self.shoot(a, false, |_, _| {})?.unwrap_or(Shot::Under))
    }
}

/// Positive radial ground state of `-ΔU + mU = f(U)` by shooting on `U(0)`.
pub fn ground_state(m: f64, dim: usize, f: &Nonlinearity, t0: f64) -> Result<GroundState> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Param(format!("mass coefficient must be positive, got {m}")));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::Param(format!("dimension must be 1 or 2, got {dim}")));
    }
    if !f.exceeds_quadratic(t0, m) {
        return Err(Error::Shooting { m, reason: format!("F({t0}) does not exceed m t0^2/2") });
    }
    let shooter = Shooter { m, dim, f, r_max: 60.0 / m.sqrt() + 60.0 };

    let mut lo = 1.0;
    let mut tries = 0;
    while shooter.classify(lo)? != Shot::Under {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::Shooting { m, reason: "no undershooting amplitude".into() });
        }
    }
    let mut hi = lo;
    tries = 0;
    while shooter.classify(hi)? != Shot::Over {
        hi *= 2.0;
        tries += 1;
        if tries > 40 {
            return Err(Error::Shooting { m, reason: "no overshooting amplitude".into() });
        }
    }
    // Bisect down to floating-point resolution.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shooter.classify(mid)? {
            Shot::Under => lo = mid,
            Shot::Over => hi = mid,
        }
    }
    let a = lo;

    let mut r = Vec::new();
    let mut u = Vec::new();
    let mut du = Vec::new();
    r.push(0.0);
    u.push(a);
    du.push(0.0);
    let premature = shooter.shoot(a, true, |rr, y| {
        r.push(rr);
        u.push(y[0]);
        du.push(y[1]);
    })?;
    if premature.is_some() || *u.last().unwrap() >= TAIL_FRACTION * a {
        return Err(Error::Shooting { m, reason: "separatrix lost before the tail".into() });
    }
    let uc = *u.last().unwrap();
    let kappa = (m - f.f(uc) / uc).sqrt();
    let profile = RadialProfile { dim, r, u, du, kappa };

    let end = profile.quadrature_end();
    let mass = profile.radial_integral(0.0, end, |u, _, _| u * u);
    let kinetic = profile.radial_integral(0.0, end, |_, du, _| du * du);
    let nonlinear = profile.radial_integral(0.0, end, |u, _, _| f.big_f(u));
    let level = 0.5 * kinetic + 0.5 * m * mass - nonlinear;
    let d = dim as f64;
    let pohozaev = 0.5 * (d - 2.0) * kinetic + 0.5 * d * m * mass - d * nonlinear;
    Ok(GroundState {
        m,
        dim,
        amplitude: a,
        level,
        mass,
        kinetic,
        nonlinear,
        pohozaev_residual: pohozaev.abs() / kinetic,
        decay_rate: kappa,
        bracket_width: hi - lo,
        profile,
    })
}

/// `(m, E_m)` along a strictly increasing sequence of `m`; fails if the
/// levels are not strictly increasing.
pub fn energy_curve(ms: &[f64], dim: usize, f: &Nonlinearity, t0: f64) -> Result<Vec<(f64, f64)>> {
    if let Some(k) = ms.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Param(format!("mass coefficients must be strictly increasing (index {})", k + 1)));
    }
    let levels: Vec<f64> =
        ms.par_iter().map(|&m| ground_state(m, dim, f, t0).map(|g| g.level)).collect::<Result<_>>()?;
    if let Some(k) = levels.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NotIncreasing { index: k + 1, prev: levels[k], next: levels[k + 1] });
    }
    Ok(ms.iter().copied().zip(levels).collect())
}

/// `s·U₀(e^{-θ}(x - c))` on the grid. Fails when the dilated profile is
/// not negligible at the box edge.
pub fn dilation_path(u0: &GroundState, theta: f64, s: f64, grid: &Grid, center: &[f64]) -> Result<Field> {
    if !(s >= 0.0) {
        return Err(Error::Param(format!("amplitude must be non-negative, got {s}")));
    }
    let d = grid.dim();
    let edge = (0..d).map(|a| grid.half_width() - (center[a] - grid.center()[a]).abs()).fold(f64::INFINITY, f64::min);
    if s > 0.0 && u0.profile.value((-theta).exp() * edge.max(0.0)) > 1e-6 * u0.amplitude {
        return Err(Error::OutOfRange(format!("dilation theta = {theta} spills out of the box")));
    }
    Ok(Field::from_fn(*grid, |x| u0.dilated_value(x, center, theta, s)))
}
