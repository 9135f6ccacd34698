//! Rolling monthly backtest against a benchmark.
//!
//! Each test month the universe is the `m` assets with complete history over
//! the trailing window, ranked by market value (or by average price when no
//! market values are supplied). Both portfolios are fitted on excess returns
//! over the benchmark.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSet;
use crate::error::{Error, Result};
use crate::funopt::{evaluate_policy, run_ascent, AscentConfig, BaseRule, FunctionalPolicy};
use crate::objective::ObjectiveSpec;
use crate::panel::{read_labeled_csv, ReturnPanel};
use crate::resample::{ResampleKind, ResampleScheme, DEFAULT_B};
use crate::rng::derive_seed;
use crate::solvers::solve_constant;
use crate::stats::information_ratio;
use crate::tsmodel::fit_ar1;

/// Dated table of prices (or market values); missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub ids: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `values[t][i]`.
    pub values: Vec<Vec<f64>>,
}

impl PriceTable {
    pub fn new(ids: Vec<String>, dates: Vec<NaiveDate>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != dates.len() || values.iter().any(|r| r.len() != ids.len()) {
            return Err(Error::Shape(format!("{} dates, {} ids, {} rows", dates.len(), ids.len(), values.len())));
        }
        if let Some(t) = dates.windows(2).position(|d| d[1] <= d[0]) {
            return Err(Error::UnorderedTime(t + 1));
        }
        Ok(Self { ids, dates, values })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (ids, dates, values) = read_labeled_csv(reader)?;
        Self::new(ids, dates, values)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::read_csv(f)
    }

    fn column_index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateRange {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    /// Trailing months used to fit each month's portfolios.
    pub window: usize,
    pub universe_size: usize,
    pub objective: ObjectiveSpec,
    pub lower_bound: f64,
    pub benchmark: String,
    /// Sub-periods reported alongside the overall ratio.
    pub intervals: Vec<DateRange>,
    pub b: usize,
    pub resample: ResampleKind,
    pub ascent: AscentConfig,
    pub master_seed: u64,
}

impl BacktestConfig {
    pub fn new(objective: ObjectiveSpec, lower_bound: f64, benchmark: impl Into<String>, master_seed: u64) -> Self {
        Self {
            window: 120,
            universe_size: 50,
            objective,
            lower_bound,
            benchmark: benchmark.into(),
            intervals: Vec::new(),
            b: DEFAULT_B,
            resample: ResampleKind::default(),
            ascent: AscentConfig::default(),
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 {
            return Err(Error::InvalidConfig(format!("window must be at least 3, got {}", self.window)));
        }
        if self.universe_size < 2 {
            return Err(Error::InvalidConfig(format!("universe size must be at least 2, got {}", self.universe_size)));
        }
        self.objective.validated()?;
        ConstraintSet::new(self.universe_size, self.lower_bound)?;
        ResampleScheme::new(self.resample.clone(), self.b, 0).validate(self.window)?;
        Ok(())
    }
}

/// One test month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRecord {
    pub date: NaiveDate,
    pub assets: Vec<String>,
    pub w_pi: Vec<f64>,
    pub w_fun: Vec<f64>,
    pub excess_pi: f64,
    pub excess_fun: f64,
    pub benchmark_return: f64,
    /// `max |w'e - (w'r - u)|` over both portfolios.
    pub identity_gap: f64,
    pub policy: FunctionalPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRatio {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub months: usize,
    pub ir_pi: f64,
    pub ir_fun: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub months: Vec<MonthRecord>,
    /// Months that could not be evaluated, with the reason.
    pub skipped: Vec<(NaiveDate, String)>,
    /// Configured intervals followed by the overall row.
    pub ratios: Vec<IntervalRatio>,
}

impl BacktestReport {
    pub fn overall(&self) -> &IntervalRatio {
        self.ratios.last().expect("overall row is always present")
    }

    pub fn max_identity_gap(&self) -> f64 {
        self.months.iter().map(|m| m.identity_gap).fold(0.0, f64::max)
    }

    /// Cumulative sums of the realized excess returns: `(date, pi, fun)`.
    pub fn cumulative_excess(&self) -> Vec<(NaiveDate, f64, f64)> {
        let (mut pi, mut fun) = (0.0, 0.0);
        self.months
            .iter()
            .map(|m| {
                pi += m.excess_pi;
                fun += m.excess_fun;
                (m.date, pi, fun)
            })
            .collect()
    }

    /// Writes `cumulative_excess.csv`, `information_ratios.csv` and one
    /// `policy_<YYYY-MM>.json` per month into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();

        let path = dir.join("cumulative_excess.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["date", "pi", "fun"])?;
        for (d, pi, fun) in self.cumulative_excess() {
            w.write_record([d.format("%Y-%m-%d").to_string(), format!("{pi}"), format!("{fun}")])?;
        }
        w.flush()?;
        written.push(path);

        let path = dir.join("information_ratios.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["interval", "start", "end", "months", "ir_pi", "ir_fun"])?;
        for r in &self.ratios {
            w.write_record([
                r.label.clone(),
                r.start.format("%Y-%m-%d").to_string(),
                r.end.format("%Y-%m-%d").to_string(),
                r.months.to_string(),
                format!("{}", r.ir_pi),
                format!("{}", r.ir_fun),
            ])?;
        }
        w.flush()?;
        written.push(path);

        for m in &self.months {
            let path = dir.join(format!("policy_{}.json", m.date.format("%Y-%m")));
            let mut f = fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            serde_json::to_writer(&mut f, &m.policy).map_err(|e| Error::Json(e.to_string()))?;
            f.write_all(b"\n").map_err(|e| Error::Io(e.to_string()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Log returns between consecutive rows; NaN where either price is missing
/// or not positive. Row `s` is the return realized at `dates[s + 1]`.
fn log_returns(prices: &PriceTable) -> Vec<Vec<f64>> {
    prices
        .values
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(&a, &b)| if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() { (b / a).ln() } else { f64::NAN })
                .collect()
        })
        .collect()
}

pub fn run_backtest(
    cfg: &BacktestConfig,
    prices: &PriceTable,
    market_values: Option<&PriceTable>,
) -> Result<BacktestReport> {
    cfg.validate()?;
    let bench = prices.column_index(&cfg.benchmark).ok_or_else(|| Error::MissingBenchmark(cfg.benchmark.clone()))?;
    if let Some(mv) = market_values {
        if mv.dates != prices.dates {
            return Err(Error::Shape("market values must share the price dates".into()));
        }
    } else {
        log::warn!("no market values supplied; ranking assets by average price over the window");
    }
    let returns = log_returns(prices);
    let test_rows: Vec<usize> = (cfg.window..returns.len()).collect();
    if test_rows.is_empty() {
        return Err(Error::InsufficientHistory { needed: cfg.window + 2, got: prices.dates.len() });
    }
    let outcomes: Vec<std::result::Result<MonthRecord, (NaiveDate, String)>> = test_rows
        .par_iter()
        .map(|&s| {
            let date = prices.dates[s + 1];
            match run_month(cfg, prices, market_values, &returns, bench, s) {
                Ok(rec) => Ok(Ok(rec)),
                Err(e @ (Error::InsufficientHistory { .. } | Error::DegenerateVariance(_) | Error::SingularCovariance)) => {
                    log::warn!("skipping {date}: {e}");
                    Ok(Err((date, e.to_string())))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut months = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(m) => months.push(m),
            Err(s) => skipped.push(s),
        }
    }
    if months.len() < 2 {
        return Err(Error::InsufficientHistory { needed: 2, got: months.len() });
    }
    let ratio = |label: &str, start: NaiveDate, end: NaiveDate| -> Result<IntervalRatio> {
        let sel: Vec<&MonthRecord> = months.iter().filter(|m| m.date >= start && m.date <= end).collect();
        let ir = |f: fn(&MonthRecord) -> f64| {
            let x: Vec<f64> = sel.iter().map(|m| f(m)).collect();
            if x.len() < 2 {
                Ok(f64::NAN)
            } else {
                information_ratio(&x).or_else(|e| if e == Error::ZeroVariance { Ok(f64::NAN) } else { Err(e) })
            }
        };
        Ok(IntervalRatio {
            label: label.to_string(),
            start,
            end,
            months: sel.len(),
            ir_pi: ir(|m| m.excess_pi)?,
            ir_fun: ir(|m| m.excess_fun)?,
        })
    };
    let mut ratios = cfg.intervals.iter().map(|r| ratio(&r.label, r.start, r.end)).collect::<Result<Vec<_>>>()?;
    ratios.push(ratio("overall", months[0].date, months[months.len() - 1].date)?);
    Ok(BacktestReport { months, skipped, ratios })
}

fn run_month(
    cfg: &BacktestConfig,
    prices: &PriceTable,
    market_values: Option<&PriceTable>,
    returns: &[Vec<f64>],
    bench: usize,
    s: usize,
) -> Result<MonthRecord> {
    let rows = s - cfg.window..=s;
    if returns[rows.clone()].iter().any(|r| !r[bench].is_finite()) {
        return Err(Error::InsufficientHistory { needed: cfg.window + 1, got: 0 });
    }
    // Candidates: complete returns over the window and the realized month.
    let mut candidates: Vec<(usize, f64)> = (0..prices.ids.len())
        .filter(|&i| i != bench && returns[rows.clone()].iter().all(|r| r[i].is_finite()))
        .map(|i| {
            let size = match market_values {
                Some(mv) => mv.values[s][i],
                None => prices.values[s + 1 - cfg.window..=s].iter().map(|r| r[i]).sum::<f64>() / cfg.window as f64,
            };
            (i, if size.is_finite() { size } else { f64::NEG_INFINITY })
        })
        .collect();
    if candidates.len() < 2 {
        return Err(Error::InsufficientHistory { needed: cfg.window + 1, got: candidates.len() });
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(cfg.universe_size);
    let mut chosen: Vec<usize> = candidates.into_iter().map(|c| c.0).collect();
    chosen.sort_unstable();
    let p = chosen.len();

    let hist = DMatrix::from_fn(cfg.window, p, |t, j| {
        let r = &returns[s - cfg.window + t];
        r[chosen[j]] - r[bench]
    });
    let ids: Vec<String> = chosen.iter().map(|&i| prices.ids[i].clone()).collect();
    let dates: Vec<NaiveDate> = (0..cfg.window).map(|t| prices.dates[s - cfg.window + t + 1]).collect();
    let history = ReturnPanel::new(hist, ids.clone(), dates)?;

    let omega = ConstraintSet::new(p, cfg.lower_bound)?;
    let w_pi = solve_constant(cfg.objective, &history.sample_mean(), &history.sample_second_moment(), &omega)?;
    let model = fit_ar1(&history)?;
    let scheme = ResampleScheme::new(cfg.resample.clone(), cfg.b, derive_seed(cfg.master_seed, s as u64));
    let outcome = run_ascent(&history, &model, cfg.objective, &omega, &BaseRule::PlugIn, &scheme, &cfg.ascent)?;
    let w_fun = evaluate_policy(&outcome.policy, &history)?;

    let r_next = DVector::from_iterator(p, chosen.iter().map(|&i| returns[s][i]));
    let u = returns[s][bench];
    let (excess_pi, gap_pi) = realized_excess(&w_pi, &r_next, u);
    let (excess_fun, gap_fun) = realized_excess(&w_fun, &r_next, u);
    Ok(MonthRecord {
        date: prices.dates[s + 1],
        assets: ids,
        excess_pi,
        excess_fun,
        benchmark_return: u,
        identity_gap: gap_pi.max(gap_fun),
        w_pi: w_pi.iter().copied().collect(),
        w_fun: w_fun.iter().copied().collect(),
        policy: outcome.policy,
    })
}

/// `w'e` with `e = r - u`, and its gap to `w'r - u`.
fn realized_excess(w: &DVector<f64>, r: &DVector<f64>, u: f64) -> (f64, f64) {
    let excess = w.dot(&r.add_scalar(-u));
    (excess, (excess - (w.dot(r) - u)).abs())
}

/// Prices `100 exp(cumsum r)` for every asset of `panel`, plus a benchmark
/// column holding the equal-weighted index. The first row is the base date
/// one month before the panel starts.
pub fn synthetic_prices(panel: &ReturnPanel, benchmark: &str) -> Result<PriceTable> {
    let (n, p) = (panel.n(), panel.p());
    let first = panel.time_ids()[0];
    let base = first
        .checked_sub_months(chrono::Months::new(1))
        .ok_or_else(|| Error::InvalidArgument("panel starts too early".into()))?;
    let mut dates = vec![base];
    dates.extend_from_slice(panel.time_ids());
    let mut ids = panel.asset_ids().to_vec();
    if ids.iter().any(|id| id == benchmark) {
        return Err(Error::DuplicateAsset(benchmark.to_string()));
    }
    ids.push(benchmark.to_string());
    let mut level = vec![0.0; p + 1];
    let mut values = vec![vec![100.0; p + 1]];
    for t in 0..n {
        let row = panel.row(t);
        for i in 0..p {
            level[i] += row[i];
        }
        level[p] += (row.iter().map(|r| r.exp()).sum::<f64>() / p as f64).ln();
        values.push(level.iter().map(|l| 100.0 * l.exp()).collect());
    }
    PriceTable::new(ids, dates, values)
}
