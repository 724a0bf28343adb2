//! External potentials `V` in original coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    /// `V(x) = V_∞ + A exp(-|x - x₀|²/σ²)`.
    GaussianBump { v_inf: f64, amplitude: f64, center: Vec<f64>, width: f64 },
    /// Samples on a uniform lattice covering `origin ± half_width`,
    /// interpolated (bi)linearly and held constant outside.
    Tabulated { dim: usize, half_width: f64, origin: Vec<f64>, n: usize, values: Vec<f64> },
    /// `V ≡ value`; every point is a maximum.
    Constant { value: f64, dim: usize },
}

impl Potential {
    pub fn gaussian_bump(v_inf: f64, amplitude: f64, center: &[f64], width: f64) -> Result<Potential> {
        if !(v_inf > 0.0) || !(amplitude > 0.0) || !(width > 0.0) {
            return Err(Error::Param("gaussian bump needs V_inf > 0, A > 0, sigma > 0".into()));
        }
        if center.is_empty() || center.len() > 2 {
            return Err(Error::Param("gaussian bump center must have 1 or 2 components".into()));
        }
        Ok(Potential::GaussianBump { v_inf, amplitude, center: center.to_vec(), width })
    }

    pub fn tabulated(dim: usize, half_width: f64, origin: &[f64], n: usize, values: Vec<f64>) -> Result<Potential> {
        if dim == 0 || dim > 2 || origin.len() != dim || n < 2 || values.len() != n.pow(dim as u32) {
            return Err(Error::Param("tabulated potential shape mismatch".into()));
        }
        if !(half_width > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("tabulated potential needs a positive extent and finite values".into()));
        }
        Ok(Potential::Tabulated { dim, half_width, origin: origin.to_vec(), n, values })
    }

    pub fn constant(value: f64, dim: usize) -> Result<Potential> {
        if !(value > 0.0) {
            return Err(Error::Param(format!("constant potential must be positive, got {value}")));
        }
        Ok(Potential::Constant { value, dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Potential::GaussianBump { center, .. } => center.len(),
            Potential::Tabulated { dim, .. } | Potential::Constant { dim, .. } => *dim,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::GaussianBump { v_inf, amplitude, center, width } => {
                let r2: f64 = center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum();
                v_inf + amplitude * (-r2 / (width * width)).exp()
            }
            Potential::Tabulated { .. } => self.table_value(x),
            Potential::Constant { value, .. } => *value,
        }
    }

    /// Whether [`Potential::gradient`] is exact rather than a finite difference.
    pub fn has_analytic_gradient(&self) -> bool {
        !matches!(self, Potential::Tabulated { .. })
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        match self {
            Potential::GaussianBump { amplitude, center, width, .. } => {
                let r2: f64 = center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum();
                let e = amplitude * (-r2 / (width * width)).exp();
                for (a, c) in center.iter().enumerate() {
                    g[a] = -2.0 * (x[a] - c) / (width * width) * e;
                }
            }
            Potential::Tabulated { dim, half_width, n, .. } => {
                let step = 1e-3 * 2.0 * half_width / (*n as f64 - 1.0);
                for a in 0..*dim {
                    let mut xp = [x[0], x.get(1).copied().unwrap_or(0.0)];
                    let mut xm = xp;
                    xp[a] += step;
                    xm[a] -= step;
                    g[a] = (self.value(&xp[..*dim]) - self.value(&xm[..*dim])) / (2.0 * step);
                }
            }
            Potential::Constant { .. } => {}
        }
        g
    }

    /// `V₀`, the maximum value.
    pub fn max_value(&self) -> f64 {
        match self {
            Potential::GaussianBump { v_inf, amplitude, .. } => v_inf + amplitude,
            Potential::Tabulated { values, .. } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Potential::Constant { value, .. } => *value,
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            Potential::GaussianBump { v_inf, .. } => *v_inf,
            Potential::Tabulated { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
            Potential::Constant { value, .. } => *value,
        }
    }

    /// A point where `V = V₀`.
    pub fn maximum_point(&self) -> Vec<f64> {
        match self {
            Potential::GaussianBump { center, .. } => center.clone(),
            Potential::Tabulated { dim, half_width, origin, n, values } => {
                let (best, _) = values
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
                let step = 2.0 * half_width / (*n as f64 - 1.0);
                let mi = if *dim == 1 { [best, 0] } else { [best / n, best % n] };
                (0..*dim).map(|a| origin[a] - half_width + mi[a] as f64 * step).collect()
            }
            Potential::Constant { dim, .. } => vec![0.0; *dim],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Potential::Constant { .. })
    }

    fn table_value(&self, x: &[f64]) -> f64 {
        let Potential::Tabulated { dim, half_width, origin, n, values } = self else { unreachable!() };
        let step = 2.0 * half_width / (*n as f64 - 1.0);
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..*dim {
            let t = ((x[a] - origin[a] + half_width) / step).clamp(0.0, (*n - 1) as f64);
            let i = (t.floor() as usize).min(n - 2);
            base[a] = i;
            frac[a] = t - i as f64;
        }
        if *dim == 1 {
            values[base[0]] * (1.0 - frac[0]) + values[base[0] + 1] * frac[0]
        } else {
            let at = |i: usize, j: usize| values[i * n + j];
            let (i, j, s, t) = (base[0], base[1], frac[0], frac[1]);
            at(i, j) * (1.0 - s) * (1.0 - t) + at(i + 1, j) * s * (1.0 - t) + at(i, j + 1) * (1.0 - s) * t
                + at(i + 1, j + 1) * s * t
        }
    }

    /// Samples the structural hypotheses on `V` over the box `omega`:
    /// positivity, a strict interior maximum, and a non-vanishing gradient on
    /// the annulus `O^{3δ₀} ∖ O`, where `O` is the ball of radius `o_radius`
    /// about the maximum point.
    pub fn check_hypotheses(&self, omega: &Region, o_radius: f64, delta0: f64) -> Result<PotentialCheck> {
        let dim = self.dim();
        let samples = if dim == 1 { 2001 } else { 201 };
        let x0 = self.maximum_point();
        let mut min_v = f64::INFINITY;
        let mut max_interior = f64::NEG_INFINITY;
        let mut max_boundary = f64::NEG_INFINITY;
        let mut min_grad_annulus = f64::INFINITY;
        let total = if dim == 1 { samples } else { samples * samples };
        for k in 0..total {
            let mi = if dim == 1 { [k, 0] } else { [k / samples, k % samples] };
            let mut x = [0.0; 2];
            let mut on_boundary = false;
            for a in 0..dim {
                let t = mi[a] as f64 / (samples - 1) as f64;
                x[a] = omega.center[a] - omega.half_width + 2.0 * omega.half_width * t;
                on_boundary |= mi[a] == 0 || mi[a] == samples - 1;
            }
            let v = self.value(&x[..dim]);
            min_v = min_v.min(v);
            if on_boundary {
                max_boundary = max_boundary.max(v);
            } else {
                max_interior = max_interior.max(v);
            }
            let r = (0..dim).map(|a| (x[a] - x0[a]).powi(2)).sum::<f64>().sqrt();
            if r > o_radius && r <= o_radius + 3.0 * delta0 {
                let g = self.gradient(&x[..dim]);
                min_grad_annulus = min_grad_annulus.min((g[0] * g[0] + g[1] * g[1]).sqrt());
            }
        }
        let check = PotentialCheck { min_value: min_v, max_interior, max_boundary, min_grad_annulus };
        let floor = match self {
            Potential::GaussianBump { v_inf, .. } => *v_inf,
            _ => self.min_value(),
        };
        if !(min_v >= floor - 1e-12) || !(min_v > 0.0) {
            return Err(Error::Param(format!("potential not bounded below by a positive constant (min {min_v})")));
        }
        if self.is_constant() {
            return Ok(check);
        }
        if !(max_interior > max_boundary) {
            return Err(Error::Param(format!(
                "potential maximum {max_interior} not strictly above its boundary values {max_boundary}"
            )));
        }
        if !(min_grad_annulus > 0.0) {
            return Err(Error::Param("potential gradient vanishes on the annulus around its maximum set".into()));
        }
        Ok(check)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialCheck {
    pub min_value: f64,
    pub max_interior: f64,
    pub max_boundary: f64,
    /// `min |∇V|` over sampled points of `O^{3δ₀} ∖ O`; infinite if none.
    pub min_grad_annulus: f64,
}

/// A box `center ± half_width` in original coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: [f64; 2],
    pub half_width: f64,
}

impl Region {
    /// Distance from `x` to the box exterior, zero outside.
    pub fn inner_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(a, xa)| self.half_width - (xa - self.center[a]).abs())
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> Potential {
        Potential::gaussian_bump(1.0, 1.0, &[0.0], 1.0).unwrap()
    }

    #[test]
    fn gaussian_bump_values() {
        let v = bump();
        assert_eq!(v.max_value(), 2.0);
        assert!((v.value(&[0.5]) - (1.0 + (-0.25f64).exp())).abs() < 1e-15);
        let g = v.gradient(&[0.5]);
        assert!((g[0] + 2.0 * 0.5 * (-0.25f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let v = Potential::gaussian_bump(1.0, 0.7, &[0.2, -0.1], 1.3).unwrap();
        let x = [0.4, 0.5];
        let g = v.gradient(&x);
        let t = 1e-6;
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += t;
            xm[a] -= t;
            let fd = (v.value(&xp) - v.value(&xm)) / (2.0 * t);
            assert!((fd - g[a]).abs() < 1e-8);
        }
    }

    #[test]
    fn hypotheses_hold_for_reference_bump() {
        let omega = Region { center: [0.0; 2], half_width: 4.0 };
        let c = bump().check_hypotheses(&omega, 0.1, 0.7).unwrap();
        assert!(c.min_grad_annulus > 0.0);
        assert!(c.max_interior > c.max_boundary);
    }

    #[test]
    fn annulus_through_critical_point_is_rejected() {
        // A plateau maximum has zero gradient on the annulus.
        let values: Vec<f64> = (0..101).map(|i| if (40..=60).contains(&i) { 2.0 } else { 1.0 }).collect();
        let v = Potential::tabulated(1, 5.0, &[0.0], 101, values).unwrap();
        let omega = Region { center: [0.0; 2], half_width: 4.0 };
        assert!(v.check_hypotheses(&omega, 0.05, 0.1).is_err());
    }

    #[test]
    fn tabulated_interpolates_linearly() {
        let v = Potential::tabulated(1, 1.0, &[0.0], 3, vec![1.0, 3.0, 2.0]).unwrap();
        assert!((v.value(&[-0.5]) - 2.0).abs() < 1e-15);
        assert!((v.value(&[0.5]) - 2.5).abs() < 1e-15);
        assert_eq!(v.max_value(), 3.0);
        assert_eq!(v.maximum_point(), vec![0.0]);
    }
}
