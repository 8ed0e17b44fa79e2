//! Green function `G((0,i),(x,j))` by truncated series, Fourier inversion and
//! Monte Carlo, the asymptotic equivalent, and comparison tables.

mod asymptotic;
mod compare;
mod mc;
mod resolvent;
mod series;

pub use asymptotic::{asymptotic_coefficient, asymptotic_green, rotation_to_e1, AsymptoticCoefficient, MExponent};
pub use compare::{compare, nearest_lattice_point, CompareMethod, CompareRow, Comparison, DoobResidual};
pub use mc::{green_mc, green_mc_many, sample_path, suggested_horizon, McOptions};
pub use resolvent::{green_resolvent, green_resolvent_many, ResolventOptions, ResolventScheme};
pub use series::{green_series, green_series_many, Horizon};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::process::{self, ProcessSpec, DRIFT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Series,
    Resolvent,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Resolvent => "resolvent",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub method: Method,
    /// Truncation bound (series), grid/extrapolation residual (resolvent) or
    /// standard error (Monte Carlo).
    pub error: f64,
    /// False when the requested tolerance was not reached.
    pub converged: bool,
    pub params: Value,
}

/// Checks shared by all Green function methods.
fn check_target(spec: &ProcessSpec, i: usize, x: &[i64], j: usize) -> Result<()> {
    let p = spec.states();
    if i >= p || j >= p {
        return Err(Error::Precondition(format!("state index out of range (p = {p})")));
    }
    if x.len() != spec.dim() {
        return Err(Error::Precondition(format!("target has dimension {}, expected {}", x.len(), spec.dim())));
    }
    Ok(())
}

fn require_transient(spec: &ProcessSpec) -> Result<()> {
    let m = process::moments(spec)?.global_drift;
    if m.norm() <= DRIFT_TOL {
        return Err(Error::Precondition(
            "non-centered assumption (Assumption 2) fails: zero drift, the Green function may be infinite".into(),
        ));
    }
    Ok(())
}
