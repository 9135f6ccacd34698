//! Conditional-moment models for the next return, and the synthetic return
//! generators used by the simulation study.
//!
//! The shipped model is a per-asset AR(1) fitted by least squares:
//! `mu(S) = alpha + beta * r_n` and `V(S) = (1/n) sum_t e_t e_t^T + mu(S) mu(S)^T`,
//! where `r_n` is the last row of the history `S` and `e_t` are the fitted
//! residuals (with `e_1 = 0`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{symmetrize, ReturnPanel};
use crate::rng::{derive_seed, stream_rng};

/// Conditional mean and second moment of the next return given a history.
pub trait ConditionalMoments {
    /// Number of assets the model was built for.
    fn p(&self) -> usize;

    fn cond_mean(&self, panel: &ReturnPanel) -> Result<DVector<f64>>;

    fn cond_second_moment(&self, panel: &ReturnPanel) -> Result<DMatrix<f64>>;

    fn moments(&self, panel: &ReturnPanel) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.cond_mean(panel)?, self.cond_second_moment(panel)?))
    }
}

/// Fitted per-asset AR(1) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentModel {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    /// `n x p`; row 0 is identically zero.
    pub residuals: DMatrix<f64>,
    /// `(1/n) sum_t e_t e_t^T`, symmetric and positive semidefinite.
    pub second_moment_base: DMatrix<f64>,
}

/// Relative ridge added when the residual second moment has a negative eigenvalue.
const PSD_RIDGE: f64 = 1e-10;

impl MomentModel {
    /// A model whose moments do not depend on the history: `beta = 0`,
    /// `mu = mean`, `V = covariance + mean mean^T`.
    pub fn constant(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        if covariance.shape() != (p, p) {
            return Err(Error::DimensionMismatch { expected: p, got: covariance.nrows() });
        }
        Ok(Self {
            alpha: mean,
            beta: DVector::zeros(p),
            residuals: DMatrix::zeros(0, p),
            second_moment_base: make_psd(symmetrize(covariance)),
        })
    }

    fn check(&self, panel: &ReturnPanel) -> Result<()> {
        if panel.p() != self.alpha.len() {
            return Err(Error::DimensionMismatch { expected: self.alpha.len(), got: panel.p() });
        }
        Ok(())
    }
}

impl ConditionalMoments for MomentModel {
    fn p(&self) -> usize {
        self.alpha.len()
    }

    fn cond_mean(&self, panel: &ReturnPanel) -> Result<DVector<f64>> {
        self.check(panel)?;
        Ok(&self.alpha + self.beta.component_mul(&panel.last_row()))
    }

    fn cond_second_moment(&self, panel: &ReturnPanel) -> Result<DMatrix<f64>> {
        let mu = self.cond_mean(panel)?;
        Ok(&self.second_moment_base + &mu * mu.transpose())
    }
}

/// Least-squares AR(1) fit of every column on its own lag.
///
/// A column whose lagged values are constant gets `beta = 0` and `alpha` equal
/// to the mean of the regressand.
pub fn fit_ar1(panel: &ReturnPanel) -> Result<MomentModel> {
    let (n, p) = (panel.n(), panel.p());
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let r = panel.values();
    let m = (n - 1) as f64;
    let mut alpha = DVector::zeros(p);
    let mut beta = DVector::zeros(p);
    let mut residuals = DMatrix::zeros(n, p);
    for i in 0..p {
        let col = r.column(i);
        let x = col.rows(0, n - 1);
        let y = col.rows(1, n - 1);
        let xbar = x.sum() / m;
        let ybar = y.sum() / m;
        let sxx: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
        let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
        let scale = x.amax().max(f64::MIN_POSITIVE);
        let (a, b) = if sxx <= m * (f64::EPSILON * scale).powi(2) {
            log::debug!("asset {i}: constant lagged series, using intercept-only fit");
            (ybar, 0.0)
        } else {
            let b = sxy / sxx;
            (ybar - b * xbar, b)
        };
        alpha[i] = a;
        beta[i] = b;
        for t in 1..n {
            residuals[(t, i)] = r[(t, i)] - a - b * r[(t - 1, i)];
        }
    }
    let base = symmetrize(residuals.transpose() * &residuals / n as f64);
    Ok(MomentModel { alpha, beta, residuals, second_moment_base: make_psd(base) })
}

fn make_psd(m: DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    if p == 0 {
        return m;
    }
    let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min_eig >= 0.0 {
        return m;
    }
    let ridge = PSD_RIDGE * (m.trace() / p as f64).max(f64::MIN_POSITIVE);
    log::debug!("residual second moment has eigenvalue {min_eig:e}; adding ridge {ridge:e}");
    m + DMatrix::identity(p, p) * ridge
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Iid,
    Ar,
    Garch,
}

impl std::str::FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iid" => Ok(Self::Iid),
            "ar" => Ok(Self::Ar),
            "garch" => Ok(Self::Garch),
            other => Err(Error::InvalidConfig(format!("unknown setting `{other}`"))),
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Iid => "iid",
            Self::Ar => "ar",
            Self::Garch => "garch",
        })
    }
}

/// Independent per-asset AR(1) returns with Gaussian or GARCH(1,1) innovations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub setting: Setting,
    pub alpha: f64,
    pub beta: f64,
    /// Innovation standard deviation (IID and AR settings).
    pub sigma: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

/// Steps discarded before emitting GARCH rows.
pub const GARCH_BURN_IN: usize = 200;

const SIGMA: f64 = 0.04;

impl GeneratorConfig {
    /// `alpha = 0.005`, `beta = -0.4`, `sigma = 0.04`.
    pub fn ar(n: usize, p: usize, seed: u64) -> Self {
        Self { setting: Setting::Ar, alpha: 0.005, beta: -0.4, sigma: SIGMA, gamma0: 0.0, gamma1: 0.0, gamma2: 0.0, n, p, seed }
    }

    /// `beta = 0` with the AR setting's unconditional mean and variance.
    pub fn iid(n: usize, p: usize, seed: u64) -> Self {
        Self { setting: Setting::Iid, alpha: 0.0036, beta: 0.0, sigma: SIGMA, gamma0: 0.0, gamma1: 0.0, gamma2: 0.0, n, p, seed }
    }

    /// AR(1)-GARCH(1,1) with `gamma1 = gamma2 = 0.2` and
    /// `gamma0 = sigma^2 (1 - gamma1 - gamma2)`.
    pub fn garch(n: usize, p: usize, seed: u64) -> Self {
        let (g1, g2) = (0.2, 0.2);
        Self {
            setting: Setting::Garch,
            alpha: 0.005,
            beta: -0.4,
            sigma: SIGMA,
            gamma0: SIGMA * SIGMA * (1.0 - (g1 + g2)),
            gamma1: g1,
            gamma2: g2,
            n,
            p,
            seed,
        }
    }

    pub fn for_setting(setting: Setting, n: usize, p: usize, seed: u64) -> Self {
        match setting {
            Setting::Iid => Self::iid(n, p, seed),
            Setting::Ar => Self::ar(n, p, seed),
            Setting::Garch => Self::garch(n, p, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 1 {
            return Err(Error::InvalidConfig(format!("need n >= 2 and p >= 1, got n={}, p={}", self.n, self.p)));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::InvalidConfig("alpha and beta must be finite".into()));
        }
        match self.setting {
            Setting::Iid | Setting::Ar => {
                if !(self.sigma > 0.0 && self.sigma.is_finite()) {
                    return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
                }
            }
            Setting::Garch => {
                if !(self.gamma0 > 0.0 && self.gamma1 >= 0.0 && self.gamma2 >= 0.0) {
                    return Err(Error::InvalidConfig("GARCH needs gamma0 > 0 and gamma1, gamma2 >= 0".into()));
                }
                let persistence = self.gamma1 + self.gamma2;
                if persistence >= 1.0 {
                    return Err(Error::NonStationary(persistence));
                }
            }
        }
        Ok(())
    }
}

/// Draws an `n x p` panel. Column `i` uses its own random stream, so the
/// result depends only on the config.
pub fn simulate(config: &GeneratorConfig) -> Result<ReturnPanel> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let mut values = DMatrix::zeros(n, p);
    for i in 0..p {
        let mut rng = stream_rng(derive_seed(config.seed, i as u64), 0);
        let mut z = move || -> f64 { rng.sample(StandardNormal) };
        let mut prev = 0.0;
        match config.setting {
            Setting::Iid | Setting::Ar => {
                for t in 0..n {
                    let r = config.alpha + config.beta * prev + config.sigma * z();
                    values[(t, i)] = r;
                    prev = r;
                }
            }
            Setting::Garch => {
                let mut var = config.gamma0 / (1.0 - config.gamma1 - config.gamma2);
                let mut eps_prev: f64 = 0.0;
                for step in 0..GARCH_BURN_IN + n {
                    if step > 0 {
                        var = config.gamma0 + config.gamma1 * var + config.gamma2 * eps_prev * eps_prev;
                    }
                    let eps = var.sqrt() * z();
                    let r = config.alpha + config.beta * prev + eps;
                    if step >= GARCH_BURN_IN {
                        values[(step - GARCH_BURN_IN, i)] = r;
                    }
                    prev = r;
                    eps_prev = eps;
                }
            }
        }
    }
    ReturnPanel::with_default_labels(values)
}
