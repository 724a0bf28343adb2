//! Energies, the Pohozaev functional, the penalized residual and its dual norm.
//!
//! Kinetic terms use forward differences over grid edges, so the residual
//! `-Δ_h u + V_ε u - f(u)` is the exact gradient of the discrete energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::linalg::solve_shifted_laplacian;
use crate::localization;
use crate::nonlinearity::Nonlinearity;
use crate::problem::Problem;

/// The five terms of `Γ_ε`; `total = kinetic + potential - nonlinear + penalty`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub potential: f64,
    pub nonlinear: f64,
    pub penalty: f64,
    pub total: f64,
}

fn nonlinear_term(u: &Field, f: &Nonlinearity) -> Result<f64> {
    let s: f64 = u.values().iter().map(|&t| f.big_f(t)).sum::<f64>() * u.grid().cell_volume();
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::NonFinite("nonlinear energy"))
    }
}

fn weighted_mass(u: &Field, weight: &[f64]) -> f64 {
    u.values().iter().zip(weight).map(|(x, w)| w * x * x).sum::<f64>() * u.grid().cell_volume()
}

/// `J_ε(u) = ½∫(|∇u|² + V(εx)u²) - ∫F(u)`.
pub fn energy_j(u: &Field, problem: &Problem) -> Result<f64> {
    problem.check_field(u)?;
    let kin = 0.5 * u.gradient_energy();
    let pot = 0.5 * weighted_mass(u, problem.v_eps());
    Ok(kin + pot - nonlinear_term(u, problem.nonlinearity())?)
}

/// `L_m(u) = ½‖∇u‖² + (m/2)‖u‖² - ∫F(u)`.
pub fn limit_energy_l(u: &Field, m: f64, f: &Nonlinearity) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::Param(format!("mass coefficient must be positive, got {m}")));
    }
    u.check_finite("field")?;
    Ok(0.5 * u.gradient_energy() + 0.5 * m * u.l2_norm_sq() - nonlinear_term(u, f)?)
}

/// `P_m(u) = ((N-2)/2)‖∇u‖² + (Nm/2)‖u‖² - N∫F(u)` evaluated with `N = dim`.
pub fn pohozaev_p(u: &Field, m: f64, dim: usize, f: &Nonlinearity) -> Result<f64> {
    u.check_finite("field")?;
    let n = dim as f64;
    Ok(0.5 * (n - 2.0) * u.gradient_energy() + 0.5 * n * m * u.l2_norm_sq() - n * nonlinear_term(u, f)?)
}

/// Full decomposition of `Γ_ε(u)`.
pub fn energy_report(u: &Field, problem: &Problem) -> Result<EnergyReport> {
    problem.check_field(u)?;
    let kinetic = 0.5 * u.gradient_energy();
    let potential = 0.5 * weighted_mass(u, problem.v_eps());
    let nonlinear = nonlinear_term(u, problem.nonlinearity())?;
    let penalty = localization::penalty(u, problem)?;
    Ok(EnergyReport { kinetic, potential, nonlinear, penalty, total: kinetic + potential - nonlinear + penalty })
}

/// `Γ_ε(u) = J_ε(u) + Φ_ε(u)`.
pub fn gamma(u: &Field, problem: &Problem) -> Result<f64> {
    Ok(energy_j(u, problem)? + localization::penalty(u, problem)?)
}

/// `L²` representer of `J_ε'(u)`: `-Δ_h u + V_ε u - f(u)`, zero on the boundary.
pub fn residual_j(u: &Field, problem: &Problem) -> Result<Field> {
    problem.check_field(u)?;
    let lap = u.laplacian();
    let f = problem.nonlinearity();
    let g = u.grid();
    let vals: Vec<f64> = u
        .values()
        .iter()
        .zip(lap.values())
        .zip(problem.v_eps())
        .enumerate()
        .map(|(idx, ((&x, &l), &v))| if g.is_boundary(idx) { 0.0 } else { -l + v * x - f.f(x) })
        .collect();
    Field::from_values(*g, vals)
}

/// `L²` representer of `Γ_ε'(u)`, penalty part included.
pub fn residual(u: &Field, problem: &Problem) -> Result<Field> {
    let r = residual_j(u, problem)?;
    match localization::penalty_gradient(u, problem)? {
        Some(pg) => r.add_scaled(1.0, &pg),
        None => Ok(r),
    }
}

/// Solves `(-Δ_h + V_ε)g = r`; `g` is the `H_ε` Riesz representative of `r`.
pub fn riesz(r: &Field, problem: &Problem) -> Result<Field> {
    problem.check_field(r)?;
    let tol = problem.params().tol;
    let (g, _) = solve_shifted_laplacian(problem.grid(), problem.v_eps(), r.values(), tol.linear, tol.linear_max_iters)?;
    Field::from_values(*problem.grid(), g)
}

/// `‖r‖_{H_ε^{-1}} = ⟨r, g⟩^{1/2}` with `g` the Riesz representative.
pub fn dual_norm(r: &Field, problem: &Problem) -> Result<f64> {
    let g = riesz(r, problem)?;
    Ok(r.dot(&g)?.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::testing::{constant_1d, soliton, with_localization};
    use crate::problem::{he_norm, norms};

    #[test]
    fn zero_field() {
        let p = constant_1d(1.0, 10.0, 201, 0.2);
        let z = Field::zeros(*p.grid());
        assert_eq!(energy_j(&z, &p).unwrap(), 0.0);
        assert_eq!(limit_energy_l(&z, 1.3, p.nonlinearity()).unwrap(), 0.0);
        assert_eq!(pohozaev_p(&z, 1.0, 1, p.nonlinearity()).unwrap(), 0.0);
        assert_eq!(residual(&z, &p).unwrap().max_abs(), 0.0);
        assert_eq!(dual_norm(&z, &p).unwrap(), 0.0);
    }

    #[test]
    fn soliton_levels() {
        for (m, level) in [(1.0, 4.0 / 3.0), (2.0, 3.7712361663282534)] {
            let p = constant_1d(m, 40.0, 8001, 0.3);
            let u = Field::from_fn(*p.grid(), soliton(m, 0.0));
            let l = limit_energy_l(&u, m, p.nonlinearity()).unwrap();
            assert!((l - level).abs() < 1e-3, "m={m}: {l}");
            assert_eq!(l, energy_j(&u, &p).unwrap());
        }
    }

    #[test]
    fn doubled_soliton_energy() {
        // u = 2U, m = 1: 4(2/3) + 4(2) - 16(4/3) = -32/3.
        let p = constant_1d(1.0, 40.0, 8001, 0.3);
        let u = Field::from_fn(*p.grid(), soliton(1.0, 0.0)).scaled(2.0);
        assert!((energy_j(&u, &p).unwrap() + 32.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn pohozaev_of_soliton_and_dilation() {
        let p = constant_1d(1.0, 40.0, 8001, 0.3);
        let f = p.nonlinearity();
        let u = Field::from_fn(*p.grid(), soliton(1.0, 0.0));
        assert!(pohozaev_p(&u, 1.0, 1, f).unwrap().abs() < 1e-3);
        let theta: f64 = 0.3;
        let s = soliton(1.0, 0.0);
        let dil = Field::from_fn(*p.grid(), |x| s(&[(-theta).exp() * x[0]]));
        let expected = 2.0 / 3.0 * (theta.exp() - (-theta).exp());
        let got = pohozaev_p(&dil, 1.0, 1, f).unwrap();
        assert!((got - expected).abs() < 1e-3 * expected, "{got} vs {expected}");
    }

    #[test]
    fn soliton_residual_is_second_order() {
        let res = |n: usize| {
            let p = constant_1d(1.0, 20.0, n, 0.3);
            let u = Field::from_fn(*p.grid(), soliton(1.0, 0.0));
            residual_j(&u, &p).unwrap().l2_norm()
        };
        let ratio = res(401) / res(801);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dual_norm_inverts_forward_operator() {
        let p = constant_1d(1.5, 15.0, 301, 0.3);
        let w = Field::from_fn(*p.grid(), |x| (-(x[0] - 1.0).powi(2)).exp() * (1.0 + 0.3 * x[0]));
        let lap = w.laplacian();
        let vals: Vec<f64> = w.values().iter().zip(lap.values()).map(|(a, l)| 1.5 * a - l).collect();
        let r = Field::from_values(*p.grid(), vals).unwrap();
        let dn = dual_norm(&r, &p).unwrap();
        let expect = he_norm(&w, &p).unwrap();
        assert!((dn - expect).abs() < 1e-7 * expect);
        assert!((dual_norm(&r.scaled(-3.0), &p).unwrap() - 3.0 * dn).abs() < 1e-7 * dn);
        assert!(dn <= r.l2_norm() / 1.5f64.sqrt());
        let _ = norms(&w, &p).unwrap();
    }

    #[test]
    fn residual_matches_energy_difference() {
        let p = with_localization(constant_1d(1.0, 12.0, 241, 0.3), 3.0, 2.0);
        let u = Field::from_fn(*p.grid(), |x| 1.2 * (-x[0] * x[0] / 3.0).exp());
        let v = Field::from_fn(*p.grid(), |x| (0.7 * x[0]).sin() * (-x[0] * x[0] / 8.0).exp());
        let r = residual(&u, &p).unwrap();
        let t = 1e-4;
        let fd = (gamma(&u.add_scaled(t, &v).unwrap(), &p).unwrap() - gamma(&u.add_scaled(-t, &v).unwrap(), &p).unwrap())
            / (2.0 * t);
        let pair = r.dot(&v).unwrap();
        assert!((fd - pair).abs() < 1e-7 * pair.abs().max(1.0), "{fd} vs {pair}");
    }
}
