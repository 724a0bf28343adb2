//! Smooth cutoff functions built from the quintic smoothstep.

use serde::{Deserialize, Serialize};

/// `s(t) = 6t⁵ - 15t⁴ + 10t³` on `[0, 1]`, clamped outside. `C²`, with
/// `max s' = 15/8`.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

pub fn smoothstep_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

/// A radial ramp between two knots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub lo: f64,
    pub hi: f64,
}

impl Ramp {
    /// Rises from 0 at `lo` to 1 at `hi`.
    pub fn rise(&self, r: f64) -> f64 {
        smoothstep((r - self.lo) / (self.hi - self.lo))
    }

    pub fn rise_derivative(&self, r: f64) -> f64 {
        smoothstep_derivative((r - self.lo) / (self.hi - self.lo)) / (self.hi - self.lo)
    }

    /// Falls from 1 at `lo` to 0 at `hi`.
    pub fn fall(&self, r: f64) -> f64 {
        1.0 - self.rise(r)
    }

    pub fn max_slope(&self) -> f64 {
        1.875 / (self.hi - self.lo)
    }
}

/// The three cutoffs used by the barycenter, the ground-state embedding and
/// the tail penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    /// `ψ` acting on ball masses: 0 below `ρ₁²/16`, 1 above `ρ₁²/2`.
    pub psi: Ramp,
    /// `φ` in original coordinates: 1 for `|x| ≤ δ₀/2`, 0 for `|x| ≥ δ₀`.
    pub phi: Ramp,
    /// `χ`: 0 on `B(0,1)`, 1 outside `B(0,2)`.
    pub chi: Ramp,
}

impl CutoffSpec {
    pub fn new(rho1: f64, delta0: f64) -> CutoffSpec {
        CutoffSpec {
            psi: Ramp { lo: rho1 * rho1 / 16.0, hi: rho1 * rho1 / 2.0 },
            phi: Ramp { lo: delta0 / 2.0, hi: delta0 },
            chi: Ramp { lo: 1.0, hi: 2.0 },
        }
    }

    pub fn psi(&self, mass: f64) -> f64 {
        self.psi.rise(mass)
    }

    pub fn psi_derivative(&self, mass: f64) -> f64 {
        self.psi.rise_derivative(mass)
    }

    /// `φ(|x|)`.
    pub fn phi(&self, r: f64) -> f64 {
        self.phi.fall(r)
    }

    /// `χ(|x|)`.
    pub fn chi(&self, r: f64) -> f64 {
        self.chi.rise(r)
    }

    pub fn chi_derivative(&self, r: f64) -> f64 {
        self.chi.rise_derivative(r)
    }
}
