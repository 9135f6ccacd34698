//! `funfolio` command-line entry point.
//!
//! Every subcommand resolves its configuration from built-in defaults, an
//! optional JSON file (`--config`, which may also be a previous run's
//! manifest) and explicit flags, in that order of precedence. Outputs are
//! written next to a manifest recording the resolved configuration, the seed
//! and file digests; `funfolio replay <manifest>` re-runs it and checks the
//! digests.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use funfolio::experiments::backtest::{run_backtest, BacktestConfig, PriceTable};
use funfolio::experiments::sim::{run_sim_study, SimStudyConfig};
use funfolio::funopt::{run_ascent, AscentConfig, BaseRule, Variant};
use funfolio::resample::{ResampleKind, ResampleScheme};
use funfolio::solvers::solve_constant;
use funfolio::{fit_ar1, project, ConstraintSet, GeneratorConfig, MomentModel, ObjectiveSpec, ReturnPanel, Setting};
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use manifest::{manifest_path, sha256_file, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "funfolio", version, about = "Functional mean-variance portfolio optimization")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "FUNFOLIO_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit per-asset AR(1) models and write them as JSON.
    Fit(FitArgs),
    /// Solve for plug-in weights or learn a functional policy.
    Optimize(OptimizeArgs),
    /// Run the simulation study and write its table.
    Simulate(SimulateArgs),
    /// Run the rolling backtest and write a report directory.
    Backtest(BacktestArgs),
    /// Project a vector onto the constraint set.
    Project(ProjectArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Returns CSV (`date,<asset>...`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    returns: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FitConfig {
    returns: Option<String>,
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct OptimizeArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    returns: Option<String>,
    /// `plugin` or `functional`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    /// e.g. `mv:lambda=z0.9`, `sharpe:r0=0`, `msd:lambda=0.128`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<String>,
    /// Per-asset floor; omit with `--unbounded`.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lb: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    unbounded: bool,
    /// `iid`, `block:L=6`, `dblock`, `par-ar1`, `par-ar1:L=4`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<String>,
    #[arg(long = "B")]
    #[serde(rename = "b", skip_serializing_if = "Option::is_none")]
    b: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "k", skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    /// `projected` or `linear_p`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    variant: Option<String>,
    /// Previously fitted model JSON; fitted from the returns otherwise.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    /// Optional per-iteration trace CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct OptimizeConfig {
    returns: Option<String>,
    method: String,
    objective: String,
    lb: f64,
    unbounded: bool,
    scheme: String,
    b: usize,
    k: usize,
    variant: String,
    model: Option<String>,
    trace: Option<String>,
    seed: Option<u64>,
    out: Option<String>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            returns: None,
            method: "functional".into(),
            objective: "mv:lambda=z0.9".into(),
            lb: -0.2,
            unbounded: false,
            scheme: "dblock".into(),
            b: 60,
            k: 50,
            variant: "projected".into(),
            model: None,
            trace: None,
            seed: None,
            out: None,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// `ar`, `iid` or `garch`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    setting: Option<String>,
    /// Repeatable.
    #[arg(long = "objective")]
    #[serde(rename = "objectives", skip_serializing_if = "Vec::is_empty")]
    objectives: Vec<String>,
    /// Repeatable.
    #[arg(long = "lb", allow_negative_numbers = true)]
    #[serde(rename = "lbs", skip_serializing_if = "Vec::is_empty")]
    lbs: Vec<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "k", skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long = "B")]
    #[serde(rename = "b", skip_serializing_if = "Option::is_none")]
    b: Option<usize>,
    /// Number of assets.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_train: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_test: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    variant: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct SimulateConfig {
    setting: String,
    objectives: Vec<String>,
    lbs: Vec<f64>,
    reps: usize,
    k: usize,
    b: usize,
    p: usize,
    n_train: usize,
    n_test: usize,
    scheme: String,
    variant: String,
    seed: Option<u64>,
    out: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            setting: "ar".into(),
            objectives: vec!["mv:lambda=z0.9".into()],
            lbs: vec![-0.2],
            reps: 100,
            k: 50,
            b: 60,
            p: 20,
            n_train: 60,
            n_test: 20,
            scheme: "dblock".into(),
            variant: "projected".into(),
            seed: None,
            out: "table.csv".into(),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct BacktestArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Price CSV (`date,<asset>...`, empty cells for missing prices).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    prices: Option<String>,
    /// Optional market values with the same layout, used to rank assets.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    market_values: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    benchmark: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lb: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    universe: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "k", skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long = "B")]
    #[serde(rename = "b", skip_serializing_if = "Option::is_none")]
    b: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    variant: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Report directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct BacktestCliConfig {
    prices: Option<String>,
    market_values: Option<String>,
    benchmark: Option<String>,
    objective: String,
    lb: f64,
    window: usize,
    universe: usize,
    k: usize,
    b: usize,
    scheme: String,
    variant: String,
    seed: Option<u64>,
    out: String,
}

impl Default for BacktestCliConfig {
    fn default() -> Self {
        Self {
            prices: None,
            market_values: None,
            benchmark: None,
            objective: "sharpe:r0=0".into(),
            lb: -0.2,
            window: 120,
            universe: 50,
            k: 50,
            b: 60,
            scheme: "dblock".into(),
            variant: "projected".into(),
            seed: None,
            out: "report".into(),
        }
    }
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long, allow_negative_numbers = true)]
    lb: Option<f64>,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    vector: Vec<f64>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
}

/// Usage errors exit with 1, everything else with 2.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<funfolio::Error> for Failure {
    fn from(e: funfolio::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CmdResult<T> {
    Err(Failure::Usage(msg.into()))
}

/// Overwrites `base` key by key with `top`, recursing into objects.
fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, t) => *b = t.clone(),
    }
}

/// Config file contents: either a plain object or a manifest's `config`.
fn read_config_file(path: &Path) -> CmdResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let v: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config {} is not JSON: {e}", path.display())))?;
    match v {
        Value::Object(ref o) if o.contains_key("command") && o.contains_key("config") => Ok(o["config"].clone()),
        Value::Object(_) => Ok(v),
        _ => usage(format!("config {} must be a JSON object", path.display())),
    }
}

fn resolve<C: Default + Serialize + DeserializeOwned>(config: Option<&Path>, flags: &impl Serialize) -> CmdResult<C> {
    let mut v = serde_json::to_value(C::default()).map_err(anyhow::Error::from)?;
    if let Some(p) = config {
        merge(&mut v, &read_config_file(p)?);
    }
    merge(&mut v, &serde_json::to_value(flags).map_err(anyhow::Error::from)?);
    serde_json::from_value(v).map_err(|e| Failure::Usage(format!("invalid configuration: {e}")))
}

fn parse<T: std::str::FromStr<Err = funfolio::Error>>(what: &str, s: &str) -> CmdResult<T> {
    s.parse().map_err(|e| Failure::Usage(format!("bad {what} `{s}`: {e}")))
}

fn require(field: Option<String>, flag: &str) -> CmdResult<String> {
    field.ok_or_else(|| Failure::Usage(format!("missing required --{flag}")))
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn write_manifest(command: &str, config: &impl Serialize, seed: Option<u64>, inputs: &[PathBuf], outputs: &[PathBuf], out: &Path, is_dir: bool) -> CmdResult<PathBuf> {
    let value = serde_json::to_value(config).map_err(anyhow::Error::from)?;
    let m = RunManifest::new(command, value, seed, inputs, outputs)?;
    let path = manifest_path(out, is_dir);
    m.write(&path)?;
    Ok(path)
}

fn ascent_config(k: usize, variant: &str) -> CmdResult<AscentConfig> {
    Ok(AscentConfig { k, variant: parse::<Variant>("variant", variant)?, ..Default::default() })
}

fn read_returns(path: &str) -> CmdResult<ReturnPanel> {
    Ok(ReturnPanel::read_csv_path(path).with_context(|| format!("reading returns {path}"))?)
}

fn cmd_fit(args: FitArgs) -> CmdResult<()> {
    let cfg: FitConfig = resolve(args.config.as_deref(), &args)?;
    let returns = require(cfg.returns.clone(), "returns")?;
    let out = require(cfg.out.clone(), "out")?;
    let model = fit_ar1(&read_returns(&returns)?)?;
    fs::write(&out, serde_json::to_string_pretty(&model).map_err(anyhow::Error::from)? + "\n")
        .with_context(|| format!("writing {out}"))?;
    write_manifest("fit", &cfg, None, &[returns.into()], &[out.clone().into()], Path::new(&out), false)?;
    Ok(())
}

#[derive(Serialize)]
struct PlugInOutput<'a> {
    method: &'static str,
    objective: ObjectiveSpec,
    lower_bound: Option<f64>,
    assets: &'a [String],
    weights: Vec<f64>,
}

fn cmd_optimize(args: OptimizeArgs) -> CmdResult<()> {
    let mut cfg: OptimizeConfig = resolve(args.config.as_deref(), &args)?;
    let returns = require(cfg.returns.clone(), "returns")?;
    let out = require(cfg.out.clone(), "out")?;
    let objective: ObjectiveSpec = parse("objective", &cfg.objective)?;
    let panel = read_returns(&returns)?;
    let lb = if cfg.unbounded { f64::NEG_INFINITY } else { cfg.lb };
    let omega = ConstraintSet::new(panel.p(), lb)?;
    let mut inputs = vec![PathBuf::from(&returns)];
    let mut outputs = vec![PathBuf::from(&out)];
    let text = match cfg.method.as_str() {
        "plugin" | "plug-in" => {
            let w = solve_constant(objective, &panel.sample_mean(), &panel.sample_second_moment(), &omega)?;
            let o = PlugInOutput {
                method: "plugin",
                objective,
                lower_bound: (!cfg.unbounded).then_some(cfg.lb),
                assets: panel.asset_ids(),
                weights: w.iter().copied().collect(),
            };
            serde_json::to_string_pretty(&o).map_err(anyhow::Error::from)?
        }
        "functional" => {
            let seed = seed_or_entropy(cfg.seed);
            cfg.seed = Some(seed);
            let model: MomentModel = match &cfg.model {
                Some(path) => {
                    inputs.push(path.into());
                    let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing model {path}"))?
                }
                None => fit_ar1(&panel)?,
            };
            let scheme = ResampleScheme::new(parse::<ResampleKind>("scheme", &cfg.scheme)?, cfg.b, seed);
            let ascent = ascent_config(cfg.k, &cfg.variant)?;
            let outcome = run_ascent(&panel, &model, objective, &omega, &BaseRule::PlugIn, &scheme, &ascent)?;
            if let Some(trace) = &cfg.trace {
                let f = fs::File::create(trace).with_context(|| format!("writing {trace}"))?;
                outcome.trace.write_csv(f)?;
                outputs.push(trace.into());
            }
            log::info!("{} steps, G {} -> {}", outcome.trace.iterations(), outcome.trace.g[0], outcome.trace.g.last().unwrap());
            serde_json::to_string_pretty(&outcome.policy).map_err(anyhow::Error::from)?
        }
        other => return usage(format!("unknown method `{other}` (expected plugin or functional)")),
    };
    fs::write(&out, text + "\n").with_context(|| format!("writing {out}"))?;
    write_manifest("optimize", &cfg, cfg.seed, &inputs, &outputs, Path::new(&out), false)?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult<()> {
    let mut cfg: SimulateConfig = resolve(args.config.as_deref(), &args)?;
    let seed = seed_or_entropy(cfg.seed);
    cfg.seed = Some(seed);
    let setting: Setting = parse("setting", &cfg.setting)?;
    let objectives = cfg.objectives.iter().map(|o| parse::<ObjectiveSpec>("objective", o)).collect::<CmdResult<Vec<_>>>()?;
    let study = SimStudyConfig {
        generator: GeneratorConfig::for_setting(setting, 0, cfg.p, 0),
        objectives,
        lower_bounds: cfg.lbs.clone(),
        n_train: cfg.n_train,
        n_test: cfg.n_test,
        replications: cfg.reps,
        b: cfg.b,
        resample: parse("scheme", &cfg.scheme)?,
        ascent: ascent_config(cfg.k, &cfg.variant)?,
        master_seed: seed,
        check_replay: false,
    };
    study.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let report = run_sim_study(&study)?;
    let f = fs::File::create(&cfg.out).with_context(|| format!("writing {}", cfg.out))?;
    report.write_csv(f)?;
    for row in &report.rows {
        for r in row.replications.iter().filter(|r| r.excluded_reason.is_some()) {
            log::warn!("replication {} excluded: {}", r.index, r.excluded_reason.as_deref().unwrap_or(""));
        }
    }
    write_manifest("simulate", &cfg, Some(seed), &[], &[cfg.out.clone().into()], Path::new(&cfg.out), false)?;
    Ok(())
}

fn cmd_backtest(args: BacktestArgs) -> CmdResult<()> {
    let mut cfg: BacktestCliConfig = resolve(args.config.as_deref(), &args)?;
    let prices_path = require(cfg.prices.clone(), "prices")?;
    let benchmark = require(cfg.benchmark.clone(), "benchmark")?;
    let seed = seed_or_entropy(cfg.seed);
    cfg.seed = Some(seed);
    let objective: ObjectiveSpec = parse("objective", &cfg.objective)?;
    let bt = BacktestConfig {
        window: cfg.window,
        universe_size: cfg.universe,
        b: cfg.b,
        resample: parse("scheme", &cfg.scheme)?,
        ascent: ascent_config(cfg.k, &cfg.variant)?,
        ..BacktestConfig::new(objective, cfg.lb, benchmark, seed)
    };
    bt.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let prices = PriceTable::read_csv_path(&prices_path)?;
    let mut inputs = vec![PathBuf::from(&prices_path)];
    let mv = match &cfg.market_values {
        Some(p) => {
            inputs.push(p.into());
            Some(PriceTable::read_csv_path(p)?)
        }
        None => None,
    };
    let report = run_backtest(&bt, &prices, mv.as_ref())?;
    let outputs = report.write_dir(&cfg.out)?;
    let overall = report.overall();
    println!("overall information ratio: plug-in {:.4}, functional {:.4} ({} months)", overall.ir_pi, overall.ir_fun, overall.months);
    write_manifest("backtest", &cfg, Some(seed), &inputs, &outputs, Path::new(&cfg.out), true)?;
    Ok(())
}

fn cmd_project(args: ProjectArgs) -> CmdResult<()> {
    let v = DVector::from_vec(args.vector);
    let omega = ConstraintSet::new(v.len(), args.lb.unwrap_or(f64::NEG_INFINITY))?;
    let w = project(&omega, &v)?;
    let parts: Vec<String> = w.iter().map(|x| format!("{:.4}", if x.abs() < 5e-5 { 0.0 } else { *x })).collect();
    println!("[{}]", parts.join(","));
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> CmdResult<()> {
    let m = RunManifest::read(&args.manifest).map_err(|e| Failure::Usage(format!("{e:#}")))?;
    let tmp = std::env::temp_dir().join(format!("funfolio-replay-{}.json", std::process::id()));
    fs::write(&tmp, serde_json::to_string(&m.config).map_err(anyhow::Error::from)?).context("writing replay config")?;
    let argv = ["funfolio", m.command.as_str(), "--config", tmp.to_str().context("non-UTF-8 temp path")?];
    let cli = Cli::try_parse_from(argv).map_err(|e| Failure::Usage(e.to_string()))?;
    let result = dispatch(cli.command);
    let _ = fs::remove_file(&tmp);
    result?;
    let mut mismatched = Vec::new();
    for d in &m.outputs {
        if sha256_file(Path::new(&d.path))? != d.sha256 {
            mismatched.push(d.path.clone());
        }
    }
    if !mismatched.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("outputs differ from the manifest: {}", mismatched.join(", "))));
    }
    println!("replay reproduced {} output(s)", m.outputs.len());
    Ok(())
}

fn dispatch(command: Command) -> CmdResult<()> {
    match command {
        Command::Fit(a) => cmd_fit(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Backtest(a) => cmd_backtest(a),
        Command::Project(a) => cmd_project(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("usage: funfolio <fit|optimize|simulate|backtest|project|replay> [options]; see --help");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
