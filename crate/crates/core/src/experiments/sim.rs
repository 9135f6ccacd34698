//! Monte Carlo comparison of the baseline, plug-in and functional portfolios
//! on simulated panels.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSet;
use crate::error::{Error, Result};
use crate::funopt::{evaluate_policy, replay_closed_form, run_ascent, AscentConfig, BaseRule, StopReason, Variant};
use crate::objective::ObjectiveSpec;
use crate::resample::{ResampleKind, ResampleScheme, DEFAULT_B};
use crate::rng::derive_seed;
use crate::solvers::{equal_weight, solve_constant};
use crate::stats::{paired_t_test, realized_objective, sample_sd};
use crate::tsmodel::{fit_ar1, simulate, GeneratorConfig};

/// Realized objectives closer than this count as ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudyConfig {
    /// Data-generating process; `n` and `seed` are set per replication.
    pub generator: GeneratorConfig,
    pub objectives: Vec<ObjectiveSpec>,
    pub lower_bounds: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub replications: usize,
    pub b: usize,
    pub resample: ResampleKind,
    pub ascent: AscentConfig,
    pub master_seed: u64,
    /// Replay every training replicate and record the largest deviation from
    /// the optimizer's weights.
    #[serde(default)]
    pub check_replay: bool,
}

impl SimStudyConfig {
    pub fn new(generator: GeneratorConfig, objective: ObjectiveSpec, lower_bound: f64, master_seed: u64) -> Self {
        Self {
            generator,
            objectives: vec![objective],
            lower_bounds: vec![lower_bound],
            n_train: 60,
            n_test: 20,
            replications: 100,
            b: DEFAULT_B,
            resample: ResampleKind::default(),
            ascent: AscentConfig::default(),
            master_seed,
            check_replay: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train < 3 {
            return Err(Error::InvalidConfig(format!("n_train must be at least 3, got {}", self.n_train)));
        }
        if self.n_test < 2 {
            return Err(Error::InvalidConfig(format!("n_test must be at least 2, got {}", self.n_test)));
        }
        if self.replications < 2 {
            return Err(Error::InvalidConfig(format!("replications must be at least 2, got {}", self.replications)));
        }
        if self.objectives.is_empty() || self.lower_bounds.is_empty() {
            return Err(Error::InvalidConfig("objective and lower-bound grids must be non-empty".into()));
        }
        GeneratorConfig { n: self.n_train + self.n_test, ..self.generator.clone() }.validate()?;
        for o in &self.objectives {
            o.validated()?;
        }
        for &lb in &self.lower_bounds {
            ConstraintSet::new(self.generator.p, lb)?;
        }
        ResampleScheme::new(self.resample.clone(), self.b, 0).validate(self.n_train)?;
        Ok(())
    }
}

/// Outcome of one replication at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    /// `None` when the replication was excluded.
    pub g: Option<RealizedObjectives>,
    pub excluded_reason: Option<String>,
    pub iterations: usize,
    pub stop_reason: Option<StopReason>,
    /// Largest `|replayed - stored|` over training replicates.
    pub replay_error: Option<f64>,
    /// Largest `|closed form - recurrence|`, linear variant only.
    pub closed_form_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedObjectives {
    pub baseline: f64,
    pub plug_in: f64,
    pub functional: f64,
}

/// One row of the study table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointSummary {
    pub objective: ObjectiveSpec,
    pub lower_bound: f64,
    pub delta_pi_mean: f64,
    pub delta_pi_sd: f64,
    pub delta_fun_mean: f64,
    pub delta_fun_sd: f64,
    /// One-sided paired t-test of `H0: E(G_fun) <= E(G_pi)`; NaN if the
    /// differences are all equal.
    pub p_value: f64,
    pub n_plus: usize,
    pub n_zero: usize,
    pub n_minus: usize,
    pub excluded: usize,
    pub replications: Vec<ReplicationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudyReport {
    pub setting: String,
    pub rows: Vec<GridPointSummary>,
}

pub fn run_sim_study(cfg: &SimStudyConfig) -> Result<SimStudyReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (oi, &objective) in cfg.objectives.iter().enumerate() {
        for (li, &lb) in cfg.lower_bounds.iter().enumerate() {
            let point_seed = derive_seed(cfg.master_seed, ((oi as u64) << 32) | li as u64);
            rows.push(run_grid_point(cfg, objective, lb, point_seed)?);
        }
    }
    Ok(SimStudyReport { setting: cfg.generator.setting.to_string(), rows })
}

fn run_grid_point(cfg: &SimStudyConfig, objective: ObjectiveSpec, lb: f64, point_seed: u64) -> Result<GridPointSummary> {
    let records: Vec<ReplicationRecord> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, objective, lb, r, derive_seed(point_seed, r as u64)))
        .collect::<Result<_>>()?;
    let kept: Vec<RealizedObjectives> = records.iter().filter_map(|r| r.g).collect();
    let excluded = records.len() - kept.len();
    let d_pi: Vec<f64> = kept.iter().map(|g| g.plug_in - g.baseline).collect();
    let d_fun: Vec<f64> = kept.iter().map(|g| g.functional - g.baseline).collect();
    let mean = |x: &[f64]| if x.is_empty() { f64::NAN } else { x.iter().sum::<f64>() / x.len() as f64 };
    let sd = |x: &[f64]| if x.len() < 2 { f64::NAN } else { sample_sd(x) };
    let (mut n_plus, mut n_zero, mut n_minus) = (0, 0, 0);
    for g in &kept {
        let d = g.functional - g.plug_in;
        if d.abs() <= TIE_TOL {
            n_zero += 1;
        } else if d > 0.0 {
            n_plus += 1;
        } else {
            n_minus += 1;
        }
    }
    let fun: Vec<f64> = kept.iter().map(|g| g.functional).collect();
    let pi: Vec<f64> = kept.iter().map(|g| g.plug_in).collect();
    let p_value = match paired_t_test(&fun, &pi) {
        Ok(t) => t.p_value,
        Err(Error::ZeroVariance) | Err(Error::InvalidArgument(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(GridPointSummary {
        objective,
        lower_bound: lb,
        delta_pi_mean: mean(&d_pi),
        delta_pi_sd: sd(&d_pi),
        delta_fun_mean: mean(&d_fun),
        delta_fun_sd: sd(&d_fun),
        p_value,
        n_plus,
        n_zero,
        n_minus,
        excluded,
        replications: records,
    })
}

/// Numerical failures exclude a replication; anything else is a bug or a
/// configuration error and propagates.
fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateVariance(_) | Error::SingularCovariance | Error::DegenerateD | Error::TooShort { .. }
    )
}

fn run_replication(
    cfg: &SimStudyConfig,
    objective: ObjectiveSpec,
    lb: f64,
    index: usize,
    seed: u64,
) -> Result<ReplicationRecord> {
    let mut record = ReplicationRecord {
        index,
        seed,
        g: None,
        excluded_reason: None,
        iterations: 0,
        stop_reason: None,
        replay_error: None,
        closed_form_error: None,
    };
    match replicate(cfg, objective, lb, seed, &mut record) {
        Ok(g) => record.g = Some(g),
        Err(e) if is_numerical(&e) => {
            log::warn!("replication {index} excluded: {e}");
            record.excluded_reason = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(record)
}

fn replicate(
    cfg: &SimStudyConfig,
    objective: ObjectiveSpec,
    lb: f64,
    seed: u64,
    record: &mut ReplicationRecord,
) -> Result<RealizedObjectives> {
    let n = cfg.n_train + cfg.n_test;
    let p = cfg.generator.p;
    let panel = simulate(&GeneratorConfig { n, seed: derive_seed(seed, 0), ..cfg.generator.clone() })?;
    let train = panel.rows(0, cfg.n_train)?;
    let model = fit_ar1(&train)?;
    let omega = ConstraintSet::new(p, lb)?;
    let scheme = ResampleScheme::new(cfg.resample.clone(), cfg.b, derive_seed(seed, 1));
    let outcome = run_ascent(&train, &model, objective, &omega, &BaseRule::PlugIn, &scheme, &cfg.ascent)?;
    record.iterations = outcome.trace.iterations();
    record.stop_reason = Some(outcome.trace.stop_reason);

    if cfg.check_replay {
        let mut worst = 0.0f64;
        let mut worst_closed = 0.0f64;
        for (h, w) in outcome.ensemble.histories.iter().zip(&outcome.ensemble.weights) {
            let replay = evaluate_policy(&outcome.policy, h)?;
            worst = worst.max((&replay - w).amax());
            if outcome.policy.variant == Variant::LinearP {
                worst_closed = worst_closed.max((replay_closed_form(&outcome.policy, h)? - &replay).amax());
            }
        }
        record.replay_error = Some(worst);
        if outcome.policy.variant == Variant::LinearP {
            record.closed_form_error = Some(worst_closed);
        }
    }

    let w_bl = equal_weight(p);
    let (mut r_bl, mut r_pi, mut r_fun) = (Vec::new(), Vec::new(), Vec::new());
    for t in cfg.n_train..n {
        let history = panel.rows(t - cfg.n_train, t)?;
        let next: DVector<f64> = panel.row(t);
        let w_pi = solve_constant(objective, &history.sample_mean(), &history.sample_second_moment(), &omega)?;
        let w_fun = evaluate_policy(&outcome.policy, &history)?;
        r_bl.push(w_bl.dot(&next));
        r_pi.push(w_pi.dot(&next));
        r_fun.push(w_fun.dot(&next));
    }
    Ok(RealizedObjectives {
        baseline: realized_objective(objective, &r_bl)?,
        plug_in: realized_objective(objective, &r_pi)?,
        functional: realized_objective(objective, &r_fun)?,
    })
}

fn objective_label(o: &ObjectiveSpec) -> (&'static str, f64) {
    match *o {
        ObjectiveSpec::Mv { lambda } => ("mv", lambda),
        ObjectiveSpec::Sharpe { r0 } => ("sharpe", r0),
        ObjectiveSpec::Msd { lambda } => ("msd", lambda),
    }
}

impl SimStudyReport {
    /// One row per grid point.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "setting",
            "objective",
            "param",
            "lb",
            "delta_pi_mean",
            "delta_pi_sd",
            "delta_fun_mean",
            "delta_fun_sd",
            "p_value",
            "n_plus",
            "n_zero",
            "n_minus",
            "excluded",
        ])?;
        for row in &self.rows {
            let (name, param) = objective_label(&row.objective);
            w.write_record([
                self.setting.clone(),
                name.to_string(),
                format!("{param}"),
                format!("{}", row.lower_bound),
                format!("{:e}", row.delta_pi_mean),
                format!("{:e}", row.delta_pi_sd),
                format!("{:e}", row.delta_fun_mean),
                format!("{:e}", row.delta_fun_sd),
                format!("{:e}", row.p_value),
                row.n_plus.to_string(),
                row.n_zero.to_string(),
                row.n_minus.to_string(),
                row.excluded.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
