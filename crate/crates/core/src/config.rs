//! Run configuration in TOML.
//!
//! ```toml
//! [problem]
//! dim = 1
//! h = 0.1
//! omega_center = [0.0]
//! omega_half_width = 4.0
//!
//! [potential]
//! kind = "gaussian-bump"
//! v_inf = 1.0
//! amplitude = 1.0
//! center = [0.0]
//! width = 1.0
//!
//! [nonlinearity]
//! exponent = 4.0
//!
//! [params]
//! delta0 = 0.7
//! o_radius = 0.1
//! theta1 = 0.2
//! t0 = 2.5
//!
//! [run]
//! eps = [0.4, 0.2, 0.1, 0.05]
//! seed = 7
//! ```
//!
//! `[tolerances]` and `[run]` may be omitted; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{truncate_nonlinearity, Nonlinearity};
use crate::potential::{Potential, Region};
use crate::problem::{Params, ProblemSpec, Tolerances};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub dim: usize,
    pub h: f64,
    pub omega_center: Vec<f64>,
    pub omega_half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    /// `p` in `f(t) = t^{p-1}`; the cubic case is `p = 4`.
    pub exponent: f64,
    /// Clamp `f` beyond `2K`.
    #[serde(default)]
    pub truncation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub delta0: f64,
    pub o_radius: f64,
    pub theta1: f64,
    pub t0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub eps: Vec<f64>,
    pub seed: u64,
    /// Mass coefficients of the `E_m` table, strictly increasing.
    pub masses: Vec<f64>,
    /// Loop samples for the degree computation.
    pub degree_samples: usize,
    /// Descent steps applied before evaluating the degree map.
    pub flow_budget: usize,
    pub ensemble_members: usize,
    pub fit_window: [f64; 2],
    /// Point `z` of the directional-derivative test, original coordinates.
    pub direction_point: Vec<f64>,
    /// Record every `trace_stride`-th flow iterate.
    pub trace_stride: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            eps: vec![0.4, 0.2, 0.1, 0.05],
            seed: 0,
            masses: (1..=10).map(|k| k as f64 / 5.0).collect(),
            degree_samples: 256,
            flow_budget: 0,
            ensemble_members: 50,
            fit_window: [5.0, 15.0],
            direction_point: vec![0.5],
            trace_stride: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    pub potential: Potential,
    pub nonlinearity: NonlinearitySection,
    pub params: ParamsSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub run: RunSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.spec()?;
        cfg.validate_run()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    fn validate_run(&self) -> Result<()> {
        let r = &self.run;
        if r.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::Config(format!("run.eps values must lie in (0, 1), got {:?}", r.eps)));
        }
        if r.masses.is_empty() {
            return Err(Error::Config("run.masses is empty".into()));
        }
        if r.masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::Config(format!("run.masses must be positive, got {:?}", r.masses)));
        }
        if let Some(k) = r.masses.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "run.masses not strictly increasing: masses[{}] = {} then masses[{}] = {}",
                k,
                r.masses[k],
                k + 1,
                r.masses[k + 1]
            )));
        }
        if !(r.fit_window[0] >= 0.0 && r.fit_window[1] > r.fit_window[0]) {
            return Err(Error::Config(format!("run.fit_window {:?} is not an interval", r.fit_window)));
        }
        if r.direction_point.len() != self.problem.dim {
            return Err(Error::Config("run.direction_point must have dim components".into()));
        }
        if r.trace_stride == 0 {
            return Err(Error::Config("run.trace_stride must be positive".into()));
        }
        Ok(())
    }

    /// The `ε`-independent problem description.
    pub fn spec(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        if p.dim != 1 && p.dim != 2 {
            return Err(Error::Config(format!("problem.dim must be 1 or 2, got {}", p.dim)));
        }
        if p.omega_center.len() != p.dim {
            return Err(Error::Config("problem.omega_center must have dim components".into()));
        }
        if !(p.h > 0.0 && p.omega_half_width > 0.0) {
            return Err(Error::Config("problem.h and problem.omega_half_width must be positive".into()));
        }
        if self.potential.dim() != p.dim {
            return Err(Error::Config("potential dimension differs from problem.dim".into()));
        }
        let potential = match &self.potential {
            Potential::GaussianBump { v_inf, amplitude, center, width } => {
                Potential::gaussian_bump(*v_inf, *amplitude, center, *width)
            }
            Potential::Tabulated { dim, half_width, origin, n, values } => {
                Potential::tabulated(*dim, *half_width, origin, *n, values.clone())
            }
            Potential::Constant { value, dim } => Potential::constant(*value, *dim),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        let mut f = Nonlinearity::power(self.nonlinearity.exponent).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(k) = self.nonlinearity.truncation {
            f = truncate_nonlinearity(f, k).map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut center = [0.0; 2];
        center[..p.dim].copy_from_slice(&p.omega_center);
        let q = &self.params;
        let params = Params {
            eps: 0.1,
            delta0: q.delta0,
            o_radius: q.o_radius,
            theta1: q.theta1,
            t0: q.t0,
            localization: None,
            tol: self.tolerances,
        };
        params.validate().map_err(|e| Error::Config(e.to_string()))?;
        let omega = Region { center, half_width: p.omega_half_width };
        potential.check_hypotheses(&omega, q.o_radius, q.delta0).map_err(|e| Error::Config(e.to_string()))?;
        Ok(ProblemSpec { dim: p.dim, omega, h: p.h, potential, nonlinearity: f, params })
    }
}

/// Key-sorted compact JSON of a TOML document; identical for documents
/// that differ only in key order, spacing or comments.
pub fn canonical_json(text: &str) -> Result<String> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let value = serde_json::to_value(table)?;
    Ok(serde_json::to_string(&value)?)
}

/// The reference problem as a configuration document.
pub const REFERENCE: &str = r#"[problem]
dim = 1
h = 0.1
omega_center = [0.0]
omega_half_width = 4.0

[potential]
kind = "gaussian-bump"
v_inf = 1.0
amplitude = 1.0
center = [0.0]
width = 1.0

[nonlinearity]
exponent = 4.0

[params]
delta0 = 0.7
o_radius = 0.1
theta1 = 0.2
t0 = 2.5

[run]
eps = [0.4, 0.2, 0.1, 0.05]
seed = 7
"#;
