//! Nonlinearities `f` and their antiderivatives `F`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power nonlinearity `f(t) = t^{p-1}` for `t ≥ 0`, `f(t) = 0` for `t < 0`,
/// optionally clamped to the constant `f(2K)` beyond `t = 2K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    exponent: f64,
    /// Truncation amplitude `K`; `f` is constant beyond `2K`.
    truncation: Option<f64>,
}

impl Nonlinearity {
    /// `p` must lie in `(2, 2*)`; in dimensions 1 and 2 that is `(2, ∞)`.
    pub fn power(exponent: f64) -> Result<Nonlinearity> {
        if !(exponent > 2.0) || !exponent.is_finite() {
            return Err(Error::Param(format!("power exponent must exceed 2, got {exponent}")));
        }
        Ok(Nonlinearity { exponent, truncation: None })
    }

    /// The cubic nonlinearity `f(t) = t³`.
    pub fn cubic() -> Nonlinearity {
        Nonlinearity { exponent: 4.0, truncation: None }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    fn raw_f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            t.powf(self.exponent - 1.0)
        }
    }

    fn raw_big_f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            t.powf(self.exponent) / self.exponent
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        match self.truncation {
            Some(k) if t >= 2.0 * k => self.raw_f(2.0 * k),
            _ => self.raw_f(t),
        }
    }

    /// `F(t) = ∫₀ᵗ f`, continued affinely past the truncation threshold.
    pub fn big_f(&self, t: f64) -> f64 {
        match self.truncation {
            Some(k) if t >= 2.0 * k => {
                let t2 = 2.0 * k;
                self.raw_big_f(t2) + self.raw_f(t2) * (t - t2)
            }
            _ => self.raw_big_f(t),
        }
    }

    /// `K̃ = sup |f|` after truncation, infinite otherwise.
    pub fn bound(&self) -> f64 {
        match self.truncation {
            Some(k) => self.raw_f(2.0 * k),
            None => f64::INFINITY,
        }
    }

    /// Whether `F(t₀) > m t₀²/2`.
    pub fn exceeds_quadratic(&self, t0: f64, m: f64) -> bool {
        self.big_f(t0) > 0.5 * m * t0 * t0
    }
}

/// Replaces `f` by `f(2K)` on `[2K, ∞)`.
pub fn truncate_nonlinearity(f: Nonlinearity, k: f64) -> Result<Nonlinearity> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Param(format!("truncation amplitude must be positive, got {k}")));
    }
    Ok(Nonlinearity { truncation: Some(k), ..f })
}
