//! Witnesses for the parameter systems used in the tail bounds.
//!
//! `Upper`: `2/γ² < p < 2/γ² + Δp`, `η > δ`, `p(1 − η) > 2/γ² + δ`.
//!
//! `Lower`: `2/γ² < p < min(2/γ² + Δp, 2/γ² + 1/2, 4/γ²)`,
//! `p(1 − η) > 2/γ²(1 − η) + δ`, `η(2/γ² + 1/2) > 2/γ² + δ`.
//!
//! Both also need `0 < η < 1`, `δ > 0`, `Δp > 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamSystem {
    /// Upper-bound system.
    Upper,
    /// Lower-bound system.
    Lower,
}

impl FromStr for ParamSystem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upper" => Ok(ParamSystem::Upper),
            "lower" => Ok(ParamSystem::Lower),
            _ => Err(Error::UnknownSystem(s.to_string())),
        }
    }
}

impl fmt::Display for ParamSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamSystem::Upper => "upper",
            ParamSystem::Lower => "lower",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleParams {
    pub p: f64,
    pub eta: f64,
    pub delta: f64,
    pub dp: f64,
    pub system: ParamSystem,
}

/// Required slack on every inequality.
pub const SLACK: f64 = 1e-9;

/// `lhs − rhs` for each inequality `lhs > rhs` of the system.
pub fn slacks(gamma: f64, w: &FeasibleParams) -> Vec<f64> {
    let th = 2.0 / (gamma * gamma);
    let FeasibleParams { p, eta, delta, dp, system } = *w;
    let mut s = vec![p - th, th + dp - p, eta, 1.0 - eta, delta, dp];
    match system {
        ParamSystem::Upper => {
            s.push(eta - delta);
            s.push(p * (1.0 - eta) - th - delta);
        }
        ParamSystem::Lower => {
            s.push(th + 0.5 - p);
            s.push(2.0 * th - p);
            s.push(p * (1.0 - eta) - th * (1.0 - eta) - delta);
            s.push(eta * (th + 0.5) - th - delta);
        }
    }
    s
}

/// Every inequality holds with slack at least [`SLACK`].
pub fn verify(gamma: f64, w: &FeasibleParams) -> bool {
    slacks(gamma, w).iter().all(|&s| s >= SLACK)
}

/// `p` just above `2/γ²` (relative step `1e-3`, capped at a tenth of the
/// room below `2/γ² + 1/2`), `η` from the binding constraint, `δ` half the
/// remaining slack, `Δp = 2(p − 2/γ²)`.
pub fn feasible_params(gamma: f64, system: ParamSystem) -> Result<FeasibleParams> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidParameter(format!("need 0 < γ < 2, got {gamma}")));
    }
    let th = 2.0 / (gamma * gamma);
    let p = th + (1e-3 * th).min(0.1 * th.min(0.5));
    let dp = 2.0 * (p - th);
    let (eta, delta) = match system {
        ParamSystem::Upper => {
            // p(1 − η) > th needs η < 1 − th/p
            let eta = 0.5 * (1.0 - th / p);
            (eta, 0.5 * eta.min(p * (1.0 - eta) - th))
        }
        ParamSystem::Lower => {
            // η(th + 1/2) > th needs η > th/(th + 1/2)
            let lo = th / (th + 0.5);
            let eta = 0.5 * (lo + 1.0);
            (eta, 0.5 * ((p - th) * (1.0 - eta)).min(eta * (th + 0.5) - th))
        }
    };
    let w = FeasibleParams { p, eta, delta, dp, system };
    if !verify(gamma, &w) {
        return Err(Error::Infeasible(format!("{system} at γ = {gamma}: slacks {:?}", slacks(gamma, &w))));
    }
    Ok(w)
}

/// [`feasible_params`] with the system given by name.
pub fn feasible_params_named(gamma: f64, system: &str) -> Result<FeasibleParams> {
    feasible_params(gamma, system.parse()?)
}
