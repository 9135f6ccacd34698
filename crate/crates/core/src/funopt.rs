//! Functional gradient ascent over portfolio rules.
//!
//! A rule maps a return history `S` to weights. Starting from a base rule
//! `w_0`, each iteration moves every bootstrap replicate along
//! `a_k mu(S) + 2 b_k V(S) w_k(S)` where `(a_k, b_k)` is the gradient of the
//! objective at the ensemble moments. Only the scalars `a_k, b_k, t_k` depend
//! on the training data, so the learned rule is replayed on a new history by
//! running the same recurrence.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::{project, project_hyperplane, ConstraintSet};
use crate::error::{Error, Result};
use crate::objective::ObjectiveSpec;
use crate::panel::{symmetrize, ReturnPanel};
use crate::resample::{resample, BootstrapEnsemble, ResampleScheme};
use crate::solvers::{equal_weight, solve_constant};
use crate::tsmodel::{ConditionalMoments, MomentModel};

/// How the weights move along a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `w + t P d` with `P = I - 11'/p`; keeps the budget, ignores floors.
    LinearP,
    /// `proj_omega(w + t d)`.
    Projected,
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_p" | "linear-p" | "linear" => Ok(Self::LinearP),
            "projected" => Ok(Self::Projected),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LinearP => "linear_p",
            Self::Projected => "projected",
        })
    }
}

/// Starting rule `w_0(S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseRule {
    /// Constant-weight optimum for the sample mean and second moment of `S`.
    PlugIn,
    EqualWeight,
    StoredConstant { w: Vec<f64> },
}

impl BaseRule {
    pub fn apply(&self, objective: ObjectiveSpec, omega: &ConstraintSet, panel: &ReturnPanel) -> Result<DVector<f64>> {
        let p = omega.p();
        if panel.p() != p {
            return Err(Error::DimensionMismatch { expected: p, got: panel.p() });
        }
        match self {
            Self::PlugIn => solve_constant(objective, &panel.sample_mean(), &panel.sample_second_moment(), omega),
            Self::EqualWeight => Ok(equal_weight(p)),
            Self::StoredConstant { w } if w.len() == p => Ok(DVector::from_column_slice(w)),
            Self::StoredConstant { w } => Err(Error::DimensionMismatch { expected: p, got: w.len() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchConfig {
    pub t_max: f64,
    pub shrink: f64,
    pub max_trials: usize,
    pub min_gain: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { t_max: 1e4, shrink: 0.5, max_trials: 40, min_gain: 1e-12 }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if self.max_trials == 0 {
            return Err(Error::InvalidConfig("max_trials must be at least 1".into()));
        }
        Ok(())
    }
}

const GOLDEN_ITERS: usize = 25;

/// Backtracks from `t_max` until `phi(t) > phi0 + min_gain`, then refines with
/// a golden-section search on `[t/2, 2t]` capped at `t_max`. Returns the best
/// accepted step and its value. Trials with degenerate variance count as
/// non-improving.
pub fn line_search_with(
    phi: impl Fn(f64) -> Result<f64>,
    phi0: f64,
    cfg: &LineSearchConfig,
) -> Result<Option<(f64, f64)>> {
    cfg.validate()?;
    let eval = |t: f64| -> Result<f64> {
        match phi(t) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) | Err(Error::DegenerateVariance(_)) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };
    let threshold = phi0 + cfg.min_gain;
    let mut t = cfg.t_max;
    let mut found = None;
    for _ in 0..cfg.max_trials {
        let v = eval(t)?;
        if v > threshold {
            found = Some((t, v));
            break;
        }
        t *= cfg.shrink;
    }
    let Some(mut best) = found else { return Ok(None) };
    let (mut lo, mut hi) = (best.0 / 2.0, (2.0 * best.0).min(cfg.t_max));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..GOLDEN_ITERS {
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f > best.1 {
                best = (x, f);
            }
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f > best.1 {
            best = (x, f);
        }
    }
    Ok(Some(best))
}

/// Step along the quadratic surrogate
/// `phi(t) = F(U + t U_d, V + t V_d + t^2 V_dd)`.
#[allow(clippy::too_many_arguments)]
pub fn line_search(
    objective: ObjectiveSpec,
    u: f64,
    v: f64,
    u_delta: f64,
    v_delta: f64,
    v_deltadelta: f64,
    cfg: &LineSearchConfig,
) -> Result<Option<f64>> {
    let phi0 = objective.eval(u, v)?;
    let phi = |t: f64| objective.eval(u + t * u_delta, v + t * v_delta + t * t * v_deltadelta);
    Ok(line_search_with(phi, phi0, cfg)?.map(|(t, _)| t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    LineSearch(LineSearchConfig),
    /// The same step at every iteration, without an ascent check.
    Fixed(f64),
}

impl Default for StepRule {
    fn default() -> Self {
        Self::LineSearch(LineSearchConfig::default())
    }
}

/// How `U_{k+1}, V_{k+1}` are obtained after a step of the projected variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentTracking {
    /// Recomputed from the new weights; the line search scores candidate
    /// steps by the same exact ensemble objective.
    #[default]
    Exact,
    /// Advanced along the quadratic surrogate from the unprojected direction.
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    /// Iteration cap.
    pub k: usize,
    pub variant: Variant,
    pub step: StepRule,
    pub tracking: MomentTracking,
    /// A step gaining less than this (relative) counts toward a stall.
    pub stall_rel_gain: f64,
    /// Consecutive small gains that end the run.
    pub stall_patience: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            k: 50,
            variant: Variant::Projected,
            step: StepRule::default(),
            tracking: MomentTracking::Exact,
            stall_rel_gain: 1e-9,
            stall_patience: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Stalled,
}

/// Per-iteration record of a run. `u`, `v`, `g` hold `K + 1` entries (start
/// plus one per accepted step); `t`, `grad` and `ascent_inner` hold one per
/// accepted step; `dir_norms` holds one per computed direction, including
/// the one whose step was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentTrace {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    pub t: Vec<f64>,
    pub grad: Vec<(f64, f64)>,
    /// `|mean_b P d_k(S_b)|`.
    pub dir_norms: Vec<f64>,
    /// `mean_b (y_k - w_k)'(w_{k+1} - w_k)` with `y_k = w_k + t_k d_k`.
    pub ascent_inner: Vec<f64>,
    pub stop_reason: StopReason,
}

impl AscentTrace {
    pub fn iterations(&self) -> usize {
        self.t.len()
    }

    /// Columns `k,U,V,G,t,a,b`; the last row has no step.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "U", "V", "G", "t", "a", "b"])?;
        for k in 0..self.u.len() {
            let step = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
            w.write_record([
                k.to_string(),
                format!("{}", self.u[k]),
                format!("{}", self.v[k]),
                format!("{}", self.g[k]),
                step(self.t.get(k).copied()),
                step(self.grad.get(k).map(|g| g.0)),
                step(self.grad.get(k).map(|g| g.1)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A learned rule: replaying the recurrence with the stored scalars on any
/// history gives its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalPolicy<M = MomentModel> {
    pub base_rule: BaseRule,
    pub objective: ObjectiveSpec,
    pub variant: Variant,
    /// Per-asset floor; `None` means shorting is unlimited.
    pub lower_bound: Option<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t: Vec<f64>,
    pub model: M,
}

impl<M: ConditionalMoments> FunctionalPolicy<M> {
    pub fn k(&self) -> usize {
        self.t.len()
    }

    pub fn omega(&self) -> Result<ConstraintSet> {
        ConstraintSet::new(self.model.p(), self.lower_bound.unwrap_or(f64::NEG_INFINITY))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.t.len();
        if self.a.len() != k || self.b.len() != k {
            return Err(Error::InvalidArgument(format!(
                "policy sequences differ in length: a={}, b={}, t={k}",
                self.a.len(),
                self.b.len()
            )));
        }
        if self.t.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument("policy step sizes must be finite and nonnegative".into()));
        }
        self.objective.validated()?;
        self.omega().map(|_| ())
    }
}

/// Model moments at a history, symmetrized the same way everywhere they are used.
pub(crate) fn checked_moments<M: ConditionalMoments>(model: &M, panel: &ReturnPanel) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (mu, v) = model.moments(panel)?;
    let asym = (&v - v.transpose()).amax();
    if asym > 1e-12 * v.amax().max(1.0) {
        return Err(Error::InvalidArgument(format!("second moment is not symmetric (gap {asym:e})")));
    }
    Ok((mu, symmetrize(v)))
}

/// `a mu + 2 b V w`, passed through `P` for the linear variant.
fn direction(variant: Variant, mu: &DVector<f64>, v: &DMatrix<f64>, w: &DVector<f64>, a: f64, b: f64) -> DVector<f64> {
    let d = mu * a + (v * w) * (2.0 * b);
    match variant {
        Variant::LinearP => project_hyperplane(&d),
        Variant::Projected => d,
    }
}

fn advance(variant: Variant, omega: &ConstraintSet, w: &DVector<f64>, d: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let y = w + d * t;
    match variant {
        Variant::LinearP => Ok(y),
        Variant::Projected => project(omega, &y),
    }
}

/// Ensemble averages `(mean w'mu, mean w'Vw)`, summed in replicate order.
fn ensemble_moments(ws: &[DVector<f64>], mus: &[DVector<f64>], vs: &[DMatrix<f64>]) -> (f64, f64) {
    let parts: Vec<(f64, f64)> = ws
        .par_iter()
        .zip(mus.par_iter())
        .zip(vs.par_iter())
        .map(|((w, mu), v)| (w.dot(mu), w.dot(&(v * w))))
        .collect();
    let n = parts.len() as f64;
    let (su, sv) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    (su / n, sv / n)
}

/// Output of [`run_ascent`]. The ensemble carries each replicate's final
/// weights.
#[derive(Debug, Clone)]
pub struct AscentOutcome<M = MomentModel> {
    pub policy: FunctionalPolicy<M>,
    pub trace: AscentTrace,
    pub ensemble: BootstrapEnsemble,
}

/// Resamples `panel` once and runs the ascent on that ensemble.
pub fn run_ascent(
    panel: &ReturnPanel,
    model: &MomentModel,
    objective: ObjectiveSpec,
    omega: &ConstraintSet,
    base_rule: &BaseRule,
    scheme: &ResampleScheme,
    cfg: &AscentConfig,
) -> Result<AscentOutcome<MomentModel>> {
    let ensemble = resample(panel, scheme, Some(model))?;
    run_ascent_on(ensemble, model, objective, omega, base_rule, cfg)
}

/// Runs the ascent on given histories with any moment model.
pub fn run_ascent_on<M: ConditionalMoments + Clone + Sync>(
    mut ensemble: BootstrapEnsemble,
    model: &M,
    objective: ObjectiveSpec,
    omega: &ConstraintSet,
    base_rule: &BaseRule,
    cfg: &AscentConfig,
) -> Result<AscentOutcome<M>> {
    let objective = objective.validated()?;
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    if model.p() != omega.p() {
        return Err(Error::DimensionMismatch { expected: omega.p(), got: model.p() });
    }
    if let StepRule::LineSearch(ls) = &cfg.step {
        ls.validate()?;
    }
    let variant = cfg.variant;
    let (mus, vs): (Vec<_>, Vec<_>) = ensemble
        .histories
        .par_iter()
        .map(|h| checked_moments(model, h))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let mut ws: Vec<DVector<f64>> = ensemble
        .histories
        .par_iter()
        .map(|h| base_rule.apply(objective, omega, h))
        .collect::<Result<_>>()?;
    let (mut u, mut v) = ensemble_moments(&ws, &mus, &vs);
    let mut g = objective.eval(u, v)?;
    let mut trace = AscentTrace {
        u: vec![u],
        v: vec![v],
        g: vec![g],
        t: Vec::new(),
        grad: Vec::new(),
        dir_norms: Vec::new(),
        ascent_inner: Vec::new(),
        stop_reason: StopReason::MaxIters,
    };
    let nb = ws.len() as f64;
    let mut warned_b = false;
    let mut streak = 0;
    for _ in 0..cfg.k {
        let (a, b) = objective.grad(u, v)?;
        if b >= 0.0 && !warned_b {
            log::warn!("variance sensitivity b = {b:e} is not negative; local concavity cannot be certified");
            warned_b = true;
        }
        let dirs: Vec<DVector<f64>> = (0..ws.len())
            .into_par_iter()
            .map(|i| direction(variant, &mus[i], &vs[i], &ws[i], a, b))
            .collect();
        let mean_dir = dirs.iter().fold(DVector::zeros(omega.p()), |acc, d| acc + d) / nb;
        trace.dir_norms.push(project_hyperplane(&mean_dir).norm());

        let parts: Vec<(f64, f64, f64)> = (0..ws.len())
            .into_par_iter()
            .map(|i| {
                let vd = &vs[i] * &dirs[i];
                (dirs[i].dot(&mus[i]), 2.0 * vd.dot(&ws[i]), dirs[i].dot(&vd))
            })
            .collect();
        let (u_d, v_d, v_dd) = parts.iter().fold((0.0, 0.0, 0.0), |s, p| (s.0 + p.0, s.1 + p.1, s.2 + p.2));
        let (u_d, v_d, v_dd) = (u_d / nb, v_d / nb, v_dd / nb);

        let exact_projected = variant == Variant::Projected && cfg.tracking == MomentTracking::Exact;
        let step = match &cfg.step {
            StepRule::Fixed(t) => Some(*t),
            StepRule::LineSearch(ls) if exact_projected => {
                let phi = |t: f64| -> Result<f64> {
                    let parts: Vec<(f64, f64)> = (0..ws.len())
                        .into_par_iter()
                        .map(|i| {
                            let w = advance(variant, omega, &ws[i], &dirs[i], t)?;
                            Ok((w.dot(&mus[i]), w.dot(&(&vs[i] * &w))))
                        })
                        .collect::<Result<_>>()?;
                    let (su, sv) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
                    objective.eval(su / nb, sv / nb)
                };
                line_search_with(phi, g, ls)?.map(|(t, _)| t)
            }
            StepRule::LineSearch(ls) => {
                let phi = |t: f64| objective.eval(u + t * u_d, v + t * v_d + t * t * v_dd);
                line_search_with(phi, g, ls)?.map(|(t, _)| t)
            }
        };
        let Some(t) = step else {
            trace.stop_reason = StopReason::Stalled;
            break;
        };

        let new_ws: Vec<DVector<f64>> = (0..ws.len())
            .into_par_iter()
            .map(|i| advance(variant, omega, &ws[i], &dirs[i], t))
            .collect::<Result<_>>()?;
        let inner = (0..ws.len()).map(|i| (&dirs[i] * t).dot(&(&new_ws[i] - &ws[i]))).sum::<f64>() / nb;
        let (u_new, v_new) = match (variant, cfg.tracking) {
            (Variant::Projected, MomentTracking::Surrogate) => (u + t * u_d, v + t * v_d + t * t * v_dd),
            _ => ensemble_moments(&new_ws, &mus, &vs),
        };
        let g_new = objective.eval(u_new, v_new)?;
        let rel_gain = (g_new - g) / g.abs().max(f64::MIN_POSITIVE);
        ws = new_ws;
        (u, v, g) = (u_new, v_new, g_new);
        trace.u.push(u);
        trace.v.push(v);
        trace.g.push(g);
        trace.t.push(t);
        trace.grad.push((a, b));
        trace.ascent_inner.push(inner);
        streak = if rel_gain < cfg.stall_rel_gain { streak + 1 } else { 0 };
        if streak >= cfg.stall_patience.max(1) {
            trace.stop_reason = StopReason::Stalled;
            break;
        }
    }
    log::debug!("ascent finished after {} steps ({:?}), G {} -> {}", trace.iterations(), trace.stop_reason, trace.g[0], g);
    ensemble.mu = mus;
    ensemble.v = vs;
    ensemble.weights = ws;
    let policy = FunctionalPolicy {
        base_rule: base_rule.clone(),
        objective,
        variant,
        lower_bound: (!omega.is_unbounded()).then_some(omega.lower_bound()),
        a: trace.grad.iter().map(|g| g.0).collect(),
        b: trace.grad.iter().map(|g| g.1).collect(),
        t: trace.t.clone(),
        model: model.clone(),
    };
    Ok(AscentOutcome { policy, trace, ensemble })
}

/// Weights `w_0, ..., w_K` of the policy on `panel`.
pub fn replay_path<M: ConditionalMoments>(policy: &FunctionalPolicy<M>, panel: &ReturnPanel) -> Result<Vec<DVector<f64>>> {
    policy.validate()?;
    let omega = policy.omega()?;
    if panel.p() != omega.p() {
        return Err(Error::DimensionMismatch { expected: omega.p(), got: panel.p() });
    }
    let mut w = policy.base_rule.apply(policy.objective, &omega, panel)?;
    let mut path = Vec::with_capacity(policy.k() + 1);
    if policy.k() == 0 {
        path.push(w);
        return Ok(path);
    }
    let (mu, v) = checked_moments(&policy.model, panel)?;
    for k in 0..policy.k() {
        let d = direction(policy.variant, &mu, &v, &w, policy.a[k], policy.b[k]);
        let next = advance(policy.variant, &omega, &w, &d, policy.t[k])?;
        path.push(std::mem::replace(&mut w, next));
    }
    path.push(w);
    Ok(path)
}

/// `w_K(S)` for the policy's recurrence.
pub fn evaluate_policy<M: ConditionalMoments>(policy: &FunctionalPolicy<M>, panel: &ReturnPanel) -> Result<DVector<f64>> {
    Ok(replay_path(policy, panel)?.pop().expect("path has at least w_0"))
}

/// Closed form of the linear variant:
/// `w_K = (prod_j B_j) w_0 + sum_i (prod_{j>i} B_j) t_i a_i P mu` with
/// `B_k = I + 2 t_k b_k P V` and later factors on the left.
pub fn replay_closed_form<M: ConditionalMoments>(policy: &FunctionalPolicy<M>, panel: &ReturnPanel) -> Result<DVector<f64>> {
    policy.validate()?;
    if policy.variant != Variant::LinearP {
        return Err(Error::InvalidArgument("closed-form replay applies to the linear variant only".into()));
    }
    let omega = policy.omega()?;
    let w0 = policy.base_rule.apply(policy.objective, &omega, panel)?;
    let k = policy.k();
    if k == 0 {
        return Ok(w0);
    }
    let p = omega.p();
    let (mu, v) = checked_moments(&policy.model, panel)?;
    let proj = DMatrix::identity(p, p) - DMatrix::from_element(p, p, 1.0 / p as f64);
    let pmu = &proj * &mu;
    let pv = &proj * &v;
    let factors: Vec<DMatrix<f64>> =
        (0..k).map(|j| DMatrix::identity(p, p) + &pv * (2.0 * policy.t[j] * policy.b[j])).collect();
    // suffix[i] = B_{K-1} ... B_i
    let mut suffix = vec![DMatrix::identity(p, p); k + 1];
    for i in (0..k).rev() {
        suffix[i] = &suffix[i + 1] * &factors[i];
    }
    let mut w = &suffix[0] * w0;
    for i in 0..k {
        w += &suffix[i + 1] * &pmu * (policy.t[i] * policy.a[i]);
    }
    Ok(w)
}

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
#[allow(dead_code)]
mod oracles;
