//! Bootstrap histories for the ensemble expectations.
//!
//! Replicate `b` draws from its own ChaCha8 stream `(seed, b)`, so an ensemble
//! is a pure function of the source panel and the scheme, whatever the thread
//! count.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{symmetrize, ReturnPanel};
use crate::rng::{derive_seed, stream_rng};
use crate::tsmodel::{ConditionalMoments, MomentModel};

/// Default number of replicates.
pub const DEFAULT_B: usize = 60;
/// Default number of second-level resamples used to choose a block length.
pub const DEFAULT_INNER_B: usize = 50;

/// Tolerance on `V - V^T` before symmetrizing a replicate's second moment.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResampleKind {
    /// Rows drawn independently with replacement.
    Iid,
    /// Circular blocks of `block_len` whole rows.
    MovingBlock { block_len: usize },
    /// Circular blocks with the length picked by [`select_block_length`].
    /// An empty grid means `1..=floor(sqrt(n))`.
    DoubleBlock { grid: Vec<usize>, inner_b: usize },
    /// Residual rows of a fitted AR(1) model pushed through its recursion from
    /// a zero start. `residual_block = None` draws residual rows iid,
    /// `Some(L)` draws circular residual blocks of length `L`.
    ParametricAr1 { residual_block: Option<usize> },
}

impl ResampleKind {
    pub fn double_block() -> Self {
        Self::DoubleBlock { grid: Vec::new(), inner_b: DEFAULT_INNER_B }
    }
}

impl Default for ResampleKind {
    fn default() -> Self {
        Self::double_block()
    }
}

/// Parses `iid`, `block:L=6`, `dblock`, `par-ar1` and `par-ar1:L=4`.
impl FromStr for ResampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let block_arg = || -> Result<Option<usize>> {
            if arg.is_empty() {
                return Ok(None);
            }
            let v = arg
                .strip_prefix("L=")
                .ok_or_else(|| Error::InvalidConfig(format!("expected `L=<len>`, got `{arg}`")))?;
            v.parse::<usize>()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("bad block length `{v}`")))
        };
        match kind {
            "iid" if arg.is_empty() => Ok(Self::Iid),
            "block" => {
                let block_len = block_arg()?.ok_or_else(|| Error::InvalidConfig("`block` needs `:L=<len>`".into()))?;
                Ok(Self::MovingBlock { block_len })
            }
            "dblock" if arg.is_empty() => Ok(Self::double_block()),
            "par-ar1" => Ok(Self::ParametricAr1 { residual_block: block_arg()? }),
            _ => Err(Error::InvalidConfig(format!("unknown resampling scheme `{s}`"))),
        }
    }
}

impl fmt::Display for ResampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Iid => f.write_str("iid"),
            Self::MovingBlock { block_len } => write!(f, "block:L={block_len}"),
            Self::DoubleBlock { .. } => f.write_str("dblock"),
            Self::ParametricAr1 { residual_block: None } => f.write_str("par-ar1"),
            Self::ParametricAr1 { residual_block: Some(l) } => write!(f, "par-ar1:L={l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleScheme {
    pub kind: ResampleKind,
    /// Number of replicates.
    pub b: usize,
    pub seed: u64,
}

impl ResampleScheme {
    pub fn new(kind: ResampleKind, b: usize, seed: u64) -> Self {
        Self { kind, b, seed }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.b == 0 {
            return Err(Error::InvalidConfig("number of replicates must be at least 1".into()));
        }
        let check = |len: usize| if (1..=n).contains(&len) { Ok(()) } else { Err(Error::BadBlockLen { len, n }) };
        match &self.kind {
            ResampleKind::Iid => Ok(()),
            ResampleKind::MovingBlock { block_len } => check(*block_len),
            ResampleKind::DoubleBlock { grid, inner_b } => {
                if *inner_b == 0 {
                    return Err(Error::InvalidConfig("inner_b must be at least 1".into()));
                }
                grid.iter().try_for_each(|&l| check(l))
            }
            ResampleKind::ParametricAr1 { residual_block } => residual_block.map_or(Ok(()), check),
        }
    }
}

/// Provenance of one replicate: the seed and stream its generator used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateSeed {
    pub seed: u64,
    pub stream: u64,
}

/// Resampled histories with their cached conditional moments and the current
/// weight of each replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    pub histories: Vec<ReturnPanel>,
    pub mu: Vec<DVector<f64>>,
    pub v: Vec<DMatrix<f64>>,
    pub weights: Vec<DVector<f64>>,
    pub seed_record: Vec<ReplicateSeed>,
    /// Block length actually used, for the block schemes.
    pub block_len: Option<usize>,
}

impl BootstrapEnsemble {
    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    /// Evaluates `model` on every history and caches the moments.
    pub fn attach_moments<M: ConditionalMoments + Sync>(&mut self, model: &M) -> Result<()> {
        let moments: Vec<(DVector<f64>, DMatrix<f64>)> = self
            .histories
            .par_iter()
            .map(|h| {
                let (mu, v) = model.moments(h)?;
                let asym = (&v - v.transpose()).amax();
                if asym > SYMMETRY_TOL * v.amax().max(1.0) {
                    return Err(Error::InvalidArgument(format!("second moment is not symmetric (gap {asym:e})")));
                }
                Ok((mu, symmetrize(v)))
            })
            .collect::<Result<_>>()?;
        (self.mu, self.v) = moments.into_iter().unzip();
        Ok(())
    }
}

fn circular_block_rows(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<usize> {
    let mut rows = Vec::with_capacity(n + len);
    while rows.len() < n {
        let start = rng.random_range(0..n);
        rows.extend((0..len).map(|j| (start + j) % n));
    }
    rows.truncate(n);
    rows
}

fn iid_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Draws `scheme.b` histories from `panel`. `model` is required by the
/// parametric scheme and, when given, its moments are cached on the ensemble.
pub fn resample(panel: &ReturnPanel, scheme: &ResampleScheme, model: Option<&MomentModel>) -> Result<BootstrapEnsemble> {
    let n = panel.n();
    scheme.validate(n)?;
    if let Some(m) = model {
        if m.p() != panel.p() {
            return Err(Error::DimensionMismatch { expected: panel.p(), got: m.p() });
        }
    }
    let block_len = match &scheme.kind {
        ResampleKind::MovingBlock { block_len } => Some(*block_len),
        ResampleKind::DoubleBlock { grid, inner_b } => {
            let grid = if grid.is_empty() { default_grid(n) } else { grid.clone() };
            Some(select_block_length(panel, &grid, *inner_b, derive_seed(scheme.seed, u64::MAX))?)
        }
        ResampleKind::ParametricAr1 { residual_block } => *residual_block,
        ResampleKind::Iid => None,
    };
    let parametric = match scheme.kind {
        ResampleKind::ParametricAr1 { .. } => Some(model.ok_or(Error::MissingModel)?),
        _ => None,
    };
    let source = panel.values();
    let draw = |b: usize| -> ReturnPanel {
        let mut rng = stream_rng(scheme.seed, b as u64);
        let rows = match block_len {
            Some(len) => circular_block_rows(&mut rng, n, len),
            None => iid_rows(&mut rng, n),
        };
        let values = match parametric {
            None => select_rows(source, &rows),
            Some(m) => {
                let eps = select_rows(&m.residuals, &rows);
                let mut r = DMatrix::zeros(n, panel.p());
                for i in 0..panel.p() {
                    let mut prev = 0.0;
                    for t in 0..n {
                        prev = m.alpha[i] + m.beta[i] * prev + eps[(t, i)];
                        r[(t, i)] = prev;
                    }
                }
                r
            }
        };
        panel.with_values(values)
    };
    let histories: Vec<ReturnPanel> = (0..scheme.b).into_par_iter().map(draw).collect();
    let seed_record = (0..scheme.b).map(|b| ReplicateSeed { seed: scheme.seed, stream: b as u64 }).collect();
    let mut ensemble = BootstrapEnsemble {
        histories,
        mu: Vec::new(),
        v: Vec::new(),
        weights: Vec::new(),
        seed_record,
        block_len,
    };
    if let Some(m) = model {
        ensemble.attach_moments(m)?;
    }
    Ok(ensemble)
}

/// `1..=floor(sqrt(n))`.
pub fn default_grid(n: usize) -> Vec<usize> {
    let top = ((n as f64).sqrt().floor() as usize).max(1);
    (1..=top).collect()
}

/// Circular block-bootstrap variance of the sample mean of `x` at block length
/// `len`: `(1/(n len)) (1/n) sum_s (blocksum_s - len xbar)^2` over all `n`
/// circular start positions.
fn block_mean_variance(x: &[f64], len: usize) -> f64 {
    let n = x.len();
    let xbar = x.iter().sum::<f64>() / n as f64;
    let mut window: f64 = (0..len).map(|j| x[j % n]).sum();
    let mut acc = 0.0;
    for s in 0..n {
        acc += (window - len as f64 * xbar).powi(2);
        window += x[(s + len) % n] - x[s];
    }
    acc / (n * n * len) as f64
}

/// Exact `n * Var(mean)` of a stationary AR(1) with coefficient `phi` and
/// marginal variance `gamma0`.
fn ar1_scaled_mean_variance(phi: f64, gamma0: f64, n: usize) -> f64 {
    let mut sum = 1.0;
    let mut pk = 1.0;
    for k in 1..n {
        pk *= phi;
        sum += 2.0 * (1.0 - k as f64 / n as f64) * pk;
    }
    gamma0 * sum
}

/// Picks the block length from `grid` for the block bootstrap of the sample
/// mean, by a second-level resampling estimate of mean-squared error.
///
/// Each asset gets a lag-one autoregressive sieve fitted to its demeaned
/// series. `inner_b` stationary series of length `n` are simulated from the
/// sieve, where the exact variance of the sample mean is known. A candidate
/// length is scored by the squared relative error of its circular block
/// variance against that value, averaged over the simulated series and summed
/// over assets. Exact ties fall back to the grid value nearest
/// `ceil(n^(1/3))`.
pub fn select_block_length(panel: &ReturnPanel, grid: &[usize], inner_b: usize, seed: u64) -> Result<usize> {
    let n = panel.n();
    if grid.is_empty() {
        return Err(Error::InvalidConfig("block length grid is empty".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&l| l == 0 || l > n) {
        return Err(Error::BadBlockLen { len: bad, n });
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let mut mse = vec![0.0; grid.len()];
    for i in 0..panel.p() {
        let x = panel.column(i);
        let mean = x.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let gamma0 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
        if !(gamma0 > 0.0) {
            continue;
        }
        let lag1 = c.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        let phi = (lag1 / gamma0).clamp(-0.99, 0.99);
        let innovation_sd = (gamma0 * (1.0 - phi * phi)).sqrt();
        let truth = ar1_scaled_mean_variance(phi, gamma0, n);
        let mut rng = stream_rng(seed, i as u64);
        for _ in 0..inner_b {
            let mut prev = gamma0.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let series: Vec<f64> = (0..n)
                .map(|_| {
                    prev = phi * prev + innovation_sd * rng.sample::<f64, _>(StandardNormal);
                    prev
                })
                .collect();
            for (acc, &len) in mse.iter_mut().zip(grid) {
                *acc += ((n as f64 * block_mean_variance(&series, len) - truth) / truth).powi(2);
            }
        }
    }
    let best = mse.iter().copied().fold(f64::INFINITY, f64::min);
    let winners: Vec<usize> = grid.iter().zip(&mse).filter(|(_, &e)| e == best).map(|(&l, _)| l).collect();
    if winners.len() == 1 {
        return Ok(winners[0]);
    }
    let target = (n as f64).cbrt().ceil();
    log::debug!("block length tie among {winners:?}; falling back to n^(1/3)");
    Ok(grid
        .iter()
        .copied()
        .min_by(|a, b| (*a as f64 - target).abs().total_cmp(&(*b as f64 - target).abs()).then(a.cmp(b)))
        .expect("nonempty"))
}
