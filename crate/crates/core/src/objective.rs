//! Objectives `F(U, V)` of the portfolio's expected return `U` and expected
//! squared return `V`, with closed-form gradients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_quantile;

/// Guard on the variance term `V - U^2` for the objectives that divide by it.
pub const VARIANCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectiveSpec {
    /// `U - lambda (V - U^2)`
    Mv { lambda: f64 },
    /// `(U - r0) / sqrt(V - U^2)`
    Sharpe { r0: f64 },
    /// `U - lambda sqrt(V - U^2)`
    Msd { lambda: f64 },
}

impl ObjectiveSpec {
    pub fn mv(lambda: f64) -> Result<Self> {
        Self::Mv { lambda }.validated()
    }

    pub fn sharpe(r0: f64) -> Result<Self> {
        Self::Sharpe { r0 }.validated()
    }

    pub fn msd(lambda: f64) -> Result<Self> {
        Self::Msd { lambda }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Mv { lambda } | Self::Msd { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidObjective(format!("lambda must be positive and finite, got {lambda}")))
            }
            Self::Sharpe { r0 } if !r0.is_finite() => Err(Error::InvalidObjective(format!("r0 must be finite, got {r0}"))),
            ok => Ok(ok),
        }
    }

    fn spread(self, u: f64, v: f64) -> Result<f64> {
        let s = v - u * u;
        match self {
            Self::Mv { .. } => Ok(s),
            _ if s <= VARIANCE_EPS => Err(Error::DegenerateVariance(s)),
            _ => Ok(s),
        }
    }

    pub fn eval(self, u: f64, v: f64) -> Result<f64> {
        let s = self.spread(u, v)?;
        Ok(match self {
            Self::Mv { lambda } => u - lambda * s,
            Self::Sharpe { r0 } => (u - r0) / s.sqrt(),
            Self::Msd { lambda } => u - lambda * s.sqrt(),
        })
    }

    /// `(dF/dU, dF/dV)`.
    pub fn grad(self, u: f64, v: f64) -> Result<(f64, f64)> {
        let s = self.spread(u, v)?;
        Ok(match self {
            Self::Mv { lambda } => (1.0 + 2.0 * lambda * u, -lambda),
            Self::Sharpe { r0 } => {
                let k = s.powf(-1.5);
                (k * (v - r0 * u), k * (r0 - u) / 2.0)
            }
            Self::Msd { lambda } => {
                let sd = s.sqrt();
                (1.0 + lambda * u / sd, -lambda / (2.0 * sd))
            }
        })
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mv { lambda } => write!(f, "mv:lambda={lambda}"),
            Self::Sharpe { r0 } => write!(f, "sharpe:r0={r0}"),
            Self::Msd { lambda } => write!(f, "msd:lambda={lambda}"),
        }
    }
}

/// Accepts `mv:lambda=1.2816`, `sharpe:r0=0`, `msd:lambda=0.12816`. A bare
/// `sharpe` means `r0 = 0`. Values may also be written as normal quantiles,
/// e.g. `lambda=z0.9` or `lambda=0.1*z0.9`.
impl FromStr for ObjectiveSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, params) = s.split_once(':').unwrap_or((s, ""));
        let mut lambda = None;
        let mut r0 = None;
        for kv in params.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidObjective(format!("expected key=value, got `{kv}`")))?;
            let val = parse_scalar(v.trim())?;
            match k.trim() {
                "lambda" => lambda = Some(val),
                "r0" => r0 = Some(val),
                other => return Err(Error::InvalidObjective(format!("unknown parameter `{other}`"))),
            }
        }
        let need_lambda = || lambda.ok_or_else(|| Error::InvalidObjective(format!("`{kind}` requires lambda")));
        match kind.to_ascii_lowercase().as_str() {
            "mv" => Self::mv(need_lambda()?),
            "msd" => Self::msd(need_lambda()?),
            "sharpe" | "sr" => Self::sharpe(r0.unwrap_or(0.0)),
            other => Err(Error::InvalidObjective(format!("unknown objective `{other}`"))),
        }
    }
}

fn parse_scalar(v: &str) -> Result<f64> {
    let bad = || Error::InvalidObjective(format!("cannot parse `{v}`"));
    let (scale, rest) = match v.split_once('*') {
        Some((a, b)) => (a.trim().parse::<f64>().map_err(|_| bad())?, b.trim()),
        None => (1.0, v),
    };
    let base = match rest.strip_prefix('z') {
        Some(q) => {
            let q: f64 = q.parse().map_err(|_| bad())?;
            if !(q > 0.0 && q < 1.0) {
                return Err(bad());
            }
            normal_quantile(q)
        }
        None => rest.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(scale * base)
}

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
#[allow(dead_code)]
mod oracles;
