//! The parameter bundle and the discretized problem
//! `-Δu + V(εx)u = f(u)` on the rescaled box `(1/ε)·Ω̂`.

use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffSpec;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::nonlinearity::Nonlinearity;
use crate::potential::{Potential, Region};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Stop the flow once the dual residual falls below this.
    pub residual: f64,
    /// Relative tolerance of every `(-Δ + V_ε)` solve.
    pub linear: f64,
    pub max_iters: usize,
    pub linear_max_iters: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { residual: 1e-8, linear: 1e-8, max_iters: 4000, linear_max_iters: 20_000 }
    }
}

/// Radii tied to the ground-state set: `R₀`, `ρ₁` and the derived `ρ₀`, `ρ₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationConstants {
    pub r0: f64,
    pub rho1: f64,
    pub rho0: f64,
    /// Empirical mass floor: half the smallest ground-state `L²` norm.
    pub rho2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub eps: f64,
    /// Width `δ₀` of the neighbourhoods `O^δ`.
    pub delta0: f64,
    /// Radius of `O`, the ball about the maximum point of `V`.
    pub o_radius: f64,
    /// Path rate `θ₁ ∈ (0, ½)`.
    pub theta1: f64,
    /// Witness `t₀` with `F(t₀) > V₀t₀²/2`.
    pub t0: f64,
    pub localization: Option<LocalizationConstants>,
    pub tol: Tolerances,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Param(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.delta0 > 0.0) || !(self.o_radius >= 0.0) {
            return Err(Error::Param("delta0 must be positive and o_radius non-negative".into()));
        }
        if !(self.theta1 > 0.0 && self.theta1 < 0.5) {
            return Err(Error::Param(format!("theta1 must lie in (0, 1/2), got {}", self.theta1)));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::Param("t0 must be positive".into()));
        }
        if let Some(loc) = &self.localization {
            if !(loc.r0 > 0.0 && loc.rho1 > 0.0 && loc.rho0 > 0.0) {
                return Err(Error::Param("R0, rho1, rho0 must be positive".into()));
            }
            if loc.rho0 > loc.rho1.min(loc.rho2) / 2.0 + 1e-15 {
                return Err(Error::Param(format!(
                    "rho0 = {} exceeds min(rho1, rho2)/2 = {}",
                    loc.rho0,
                    loc.rho1.min(loc.rho2) / 2.0
                )));
            }
        }
        Ok(())
    }

    pub fn loc(&self) -> Result<&LocalizationConstants> {
        self.localization
            .as_ref()
            .ok_or_else(|| Error::Param("R0/rho1 not set; build the ground-state set first".into()))
    }
}

/// Everything that does not depend on `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dim: usize,
    /// `Ω̂` in original coordinates; the computational box is `Ω̂/ε`.
    pub omega: Region,
    /// Target grid spacing in rescaled coordinates.
    pub h: f64,
    pub potential: Potential,
    pub nonlinearity: Nonlinearity,
    pub params: Params,
}

impl ProblemSpec {
    /// Discretizes at the given `ε`.
    pub fn at_eps(&self, eps: f64) -> Result<Problem> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Param(format!("eps must lie in (0, 1), got {eps}")));
        }
        let center = [self.omega.center[0] / eps, self.omega.center[1] / eps];
        let grid = Grid::with_spacing(self.dim, self.omega.half_width / eps, self.h, center)?;
        let mut params = self.params.clone();
        params.eps = eps;
        Problem::new(grid, self.potential.clone(), self.nonlinearity, params, self.omega)
    }

    /// `V(x) = 1 + e^{-x²}` on `Ω̂ = [-4, 4]` with the cubic nonlinearity.
    pub fn reference() -> ProblemSpec {
        ProblemSpec {
            dim: 1,
            omega: Region { center: [0.0; 2], half_width: 4.0 },
            h: 0.1,
            potential: Potential::gaussian_bump(1.0, 1.0, &[0.0], 1.0).expect("valid bump"),
            nonlinearity: Nonlinearity::cubic(),
            params: Params {
                eps: 0.1,
                delta0: 0.7,
                o_radius: 0.1,
                theta1: 0.2,
                t0: 2.5,
                localization: None,
                tol: Tolerances::default(),
            },
        }
    }

    pub fn with_localization(mut self, loc: LocalizationConstants) -> ProblemSpec {
        self.params.localization = Some(loc);
        self
    }
}

/// A fully discretized problem at one `ε`.
#[derive(Clone, Debug)]
pub struct Problem {
    grid: Grid,
    potential: Potential,
    nonlinearity: Nonlinearity,
    params: Params,
    omega: Region,
    /// `V(εx)` at every node.
    v_eps: Vec<f64>,
}

impl Problem {
    pub fn new(
        grid: Grid,
        potential: Potential,
        nonlinearity: Nonlinearity,
        params: Params,
        omega: Region,
    ) -> Result<Problem> {
        params.validate()?;
        if potential.dim() != grid.dim() {
            return Err(Error::Param(format!(
                "potential is {}-dimensional but the grid is {}-dimensional",
                potential.dim(),
                grid.dim()
            )));
        }
        let eps = params.eps;
        let d = grid.dim();
        let v_eps: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let x = grid.point(idx);
                let y = [eps * x[0], eps * x[1]];
                potential.value(&y[..d])
            })
            .collect();
        if v_eps.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Param("V(eps x) must be positive and finite on the grid".into()));
        }
        Ok(Problem { grid, potential, nonlinearity, params, omega, v_eps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn eps(&self) -> f64 {
        self.params.eps
    }

    pub fn omega(&self) -> &Region {
        &self.omega
    }

    pub fn v_eps(&self) -> &[f64] {
        &self.v_eps
    }

    pub fn v0(&self) -> f64 {
        self.potential.max_value()
    }

    /// Maximum point of `V` in original coordinates.
    pub fn x0(&self) -> Vec<f64> {
        self.potential.maximum_point()
    }

    pub fn cutoffs(&self) -> Result<CutoffSpec> {
        Ok(CutoffSpec::new(self.params.loc()?.rho1, self.params.delta0))
    }

    /// `dist(y, O)` for a point `y` in original coordinates.
    pub fn dist_to_o(&self, y: &[f64]) -> f64 {
        let x0 = self.x0();
        let r = y.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        (r - self.params.o_radius).max(0.0)
    }

    /// The same discretization with a different potential; used for the
    /// constant-coefficient comparisons.
    pub fn with_potential(&self, potential: Potential) -> Result<Problem> {
        Problem::new(self.grid, potential, self.nonlinearity, self.params.clone(), self.omega)
    }

    pub fn with_params(&self, params: Params) -> Result<Problem> {
        Problem::new(self.grid, self.potential.clone(), self.nonlinearity, params, self.omega)
    }

    pub fn check_field(&self, u: &Field) -> Result<()> {
        if !u.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        u.check_finite("field")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    /// `‖u‖_ε = (‖∇u‖₂² + ∫V(εx)u²)^{1/2}`.
    pub he: f64,
}

pub fn norms(u: &Field, problem: &Problem) -> Result<Norms> {
    problem.check_field(u)?;
    let l2sq = u.l2_norm_sq();
    let grad = u.gradient_energy();
    let vol = problem.grid().cell_volume();
    let weighted: f64 = u.values().iter().zip(problem.v_eps()).map(|(x, v)| v * x * x).sum::<f64>() * vol;
    Ok(Norms { l2: l2sq.sqrt(), h1: (grad + l2sq).sqrt(), he: (grad + weighted).sqrt() })
}

/// `(u, v)_ε`, the inner product inducing `‖·‖_ε`.
pub fn he_inner(u: &Field, v: &Field, problem: &Problem) -> Result<f64> {
    problem.check_field(u)?;
    problem.check_field(v)?;
    let vol = problem.grid().cell_volume();
    let pot: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .zip(problem.v_eps())
        .map(|((a, b), w)| w * a * b)
        .sum::<f64>()
        * vol;
    Ok(u.gradient_dot(v)? + pot)
}

pub fn he_norm(u: &Field, problem: &Problem) -> Result<f64> {
    Ok(he_inner(u, u, problem)?.max(0.0).sqrt())
}
