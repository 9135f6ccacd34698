//! End-to-end acceptance checks. Prints one line per check and exits nonzero
//! if any fails.

#[path = "common/oracles.rs"]
#[allow(dead_code)]
mod oracles;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use funfolio::experiments::backtest::{run_backtest, synthetic_prices, BacktestConfig};
use funfolio::experiments::sim::{run_sim_study, GridPointSummary, SimStudyConfig};
use funfolio::funopt::{
    replay_path, run_ascent, AscentConfig, BaseRule, FunctionalPolicy, StepRule, StopReason, Variant,
};
use funfolio::resample::{ResampleKind, ResampleScheme};
use funfolio::rng::stream_rng;
use funfolio::stats::{ljung_box, normal_quantile, paired_t_test};
use funfolio::{fit_ar1, is_feasible, project, simulate, ConstraintSet, GeneratorConfig, MomentModel, ObjectiveSpec};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn run(name: &'static str, budget: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Check {
    let start = Instant::now();
    let (mut pass, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            pass = false;
            detail.push_str(&format!("; over time budget {b:?}"));
        }
    }
    let check = Check { name, pass, detail, elapsed };
    println!(
        "[{}] {}: {} ({:.2?})",
        if check.pass { "PASS" } else { "FAIL" },
        check.name,
        check.detail,
        check.elapsed
    );
    check
}

fn gradient_fidelity() -> (bool, String) {
    let objectives = [
        ObjectiveSpec::mv(0.128).unwrap(),
        ObjectiveSpec::mv(1.28).unwrap(),
        ObjectiveSpec::sharpe(0.0).unwrap(),
        ObjectiveSpec::msd(0.128).unwrap(),
        ObjectiveSpec::msd(1.28).unwrap(),
    ];
    let mut rng = stream_rng(101, 0);
    let mut worst = 0.0f64;
    for spec in objectives {
        for _ in 0..100 {
            let u: f64 = rng.random_range(-0.5..0.5);
            let s: f64 = rng.random_range(0.01..1.0);
            let v = u * u + s;
            let f = |u: f64, v: f64| spec.eval(u, v).unwrap();
            // Richardson-extrapolated central differences.
            let h = 1e-3 * s;
            let d1 = oracles::central_diff2(f, u, v, h);
            let d2 = oracles::central_diff2(f, u, v, h / 2.0);
            let fd = ((4.0 * d2.0 - d1.0) / 3.0, (4.0 * d2.1 - d1.1) / 3.0);
            let g = spec.grad(u, v).unwrap();
            let err = ((g.0 - fd.0).powi(2) + (g.1 - fd.1).powi(2)).sqrt() / (g.0 * g.0 + g.1 * g.1).sqrt();
            worst = worst.max(err);
        }
    }
    (worst <= 1e-6, format!("worst relative error {worst:.2e} over 500 points"))
}

fn projection_oracle() -> (bool, String) {
    let mut rng = stream_rng(202, 0);
    let bounds = [-1.0, -0.2, 0.0];
    let mut worst_oracle = 0.0f64;
    for i in 0..500 {
        let p = rng.random_range(2..=6);
        let lb = bounds[i % 3];
        let omega = ConstraintSet::new(p, lb).unwrap();
        let v = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = project(&omega, &v).unwrap();
        worst_oracle = worst_oracle.max((&w - oracles::brute_force_projection(&v, lb)).amax());
    }
    let (mut idem, mut expand, mut vi) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut feasible = true;
    for i in 0..1000 {
        let p = rng.random_range(2..=8);
        let lb = bounds[i % 3];
        let omega = ConstraintSet::new(p, lb).unwrap();
        let mut draw = || DVector::from_fn(p, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let (x, y, z0) = (draw(), draw(), draw());
        let (px, py) = (project(&omega, &x).unwrap(), project(&omega, &y).unwrap());
        let z = project(&omega, &z0).unwrap();
        feasible &= is_feasible(&omega, &px, 1e-12) && is_feasible(&omega, &z, 1e-12);
        idem = idem.max((project(&omega, &px).unwrap() - &px).amax());
        expand = expand.max((&px - &py).norm() - (&x - &y).norm());
        vi = vi.max((&x - &px).dot(&(&z - &px)));
    }
    let pass = worst_oracle <= 1e-8 && idem <= 1e-10 && expand <= 1e-10 && vi <= 1e-10 && feasible;
    (
        pass,
        format!(
            "oracle gap {worst_oracle:.1e}; idempotence {idem:.1e}; expansion {expand:.1e}; variational {vi:.1e}"
        ),
    )
}

fn monotone_ascent() -> (bool, String) {
    let objectives = [
        ObjectiveSpec::mv(0.128).unwrap(),
        ObjectiveSpec::mv(1.28).unwrap(),
        ObjectiveSpec::sharpe(0.0).unwrap(),
        ObjectiveSpec::msd(0.128).unwrap(),
        ObjectiveSpec::msd(1.28).unwrap(),
    ];
    let mut monotone = 0;
    let mut steps = 0;
    let mut failures = Vec::new();
    for run in 0..50u64 {
        let objective = objectives[run as usize % 5];
        let variant = if run % 2 == 0 { Variant::Projected } else { Variant::LinearP };
        let lb = if (run / 2) % 2 == 0 { -1.0 } else { -0.2 };
        let panel = simulate(&GeneratorConfig::ar(60, 8, 300 + run)).unwrap();
        let model = fit_ar1(&panel).unwrap();
        let omega = ConstraintSet::new(8, lb).unwrap();
        let scheme = ResampleScheme::new(ResampleKind::default(), 20, run);
        let cfg = AscentConfig { k: 20, variant, ..Default::default() };
        match run_ascent(&panel, &model, objective, &omega, &BaseRule::PlugIn, &scheme, &cfg) {
            Ok(out) => {
                steps += out.trace.iterations();
                if out.trace.g.windows(2).all(|w| w[1] > w[0]) {
                    monotone += 1;
                } else {
                    failures.push(run);
                }
            }
            Err(e) => failures.push({
                eprintln!("run {run}: {e}");
                run
            }),
        }
    }
    (monotone == 50, format!("{monotone}/50 runs strictly increasing ({steps} accepted steps); failures {failures:?}"))
}

fn constant_problem() -> (DVector<f64>, DMatrix<f64>) {
    let mu = DVector::from_column_slice(&[0.010, 0.008, 0.004, -0.002, -0.006]);
    let sd = [0.040, 0.046, 0.052, 0.058, 0.064];
    let sigma = DMatrix::from_fn(5, 5, |i, j| if i == j { sd[i] * sd[i] } else { 0.15 * sd[i] * sd[j] });
    (mu, sigma)
}

fn constant_policy_run(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    omega: &ConstraintSet,
    w0: &DVector<f64>,
    cfg: &AscentConfig,
) -> funfolio::funopt::AscentOutcome {
    let model = MomentModel::constant(mu.clone(), sigma.clone()).unwrap();
    let panel = simulate(&GeneratorConfig::iid(40, 5, 9)).unwrap();
    let scheme = ResampleScheme::new(ResampleKind::Iid, 8, 4);
    let base = BaseRule::StoredConstant { w: w0.iter().copied().collect() };
    run_ascent(&panel, &model, ObjectiveSpec::mv(1.28).unwrap(), omega, &base, &scheme, cfg).unwrap()
}

fn constant_solution() -> (bool, String) {
    let (mu, sigma) = constant_problem();
    let omega = ConstraintSet::new(5, -0.2).unwrap();
    let start = DVector::from_column_slice(&[0.3, 0.3, 0.2, 0.1, 0.1]);
    let out = constant_policy_run(&mu, &sigma, &omega, &start, &AscentConfig { k: 10, ..Default::default() });
    let policy: &FunctionalPolicy = &out.policy;
    let reference = funfolio::funopt::evaluate_policy(policy, &simulate(&GeneratorConfig::ar(30, 5, 0)).unwrap()).unwrap();
    let mut identical = 0;
    for i in 0..20u64 {
        let g = match i % 3 {
            0 => GeneratorConfig::ar(25 + i as usize, 5, 500 + i),
            1 => GeneratorConfig::iid(25 + i as usize, 5, 500 + i),
            _ => GeneratorConfig::garch(25 + i as usize, 5, 500 + i),
        };
        let w = funfolio::funopt::evaluate_policy(policy, &simulate(&g).unwrap()).unwrap();
        if w == reference {
            identical += 1;
        }
    }

    // Start at the optimum: unconstrained budget set, and a floor that is slack there.
    let lambda = 1.28;
    let w_star = oracles::lagrange_mv(&mu, &sigma, lambda);
    let slack_floor = w_star.min() - 0.5;
    let mut norms = Vec::new();
    let mut stalled = true;
    for (omega, variant) in [
        (ConstraintSet::unbounded(5).unwrap(), Variant::LinearP),
        (ConstraintSet::new(5, slack_floor).unwrap(), Variant::Projected),
    ] {
        let out = constant_policy_run(&mu, &sigma, &omega, &w_star, &AscentConfig { variant, ..Default::default() });
        stalled &= out.trace.stop_reason == StopReason::Stalled && out.trace.iterations() == 0;
        norms.push(out.trace.dir_norms[0]);
    }
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    (
        identical == 20 && stalled && max_norm <= 1e-6,
        format!(
            "{identical}/20 panels bit-identical ({} steps); stalled at optimum: {stalled}, |mean P d_0| = {max_norm:.1e}",
            policy.k()
        ),
    )
}

/// `(m, M)` for `-Hess G` on the budget hyperplane: `2 lambda` times the
/// extreme eigenvalues of `Sigma` compressed to `1-perp`.
fn curvature_bounds(sigma: &DMatrix<f64>, lambda: f64) -> (f64, f64) {
    let p = sigma.nrows();
    let proj = DMatrix::identity(p, p) - DMatrix::from_element(p, p, 1.0 / p as f64);
    let eig = SymmetricEigen::new(&proj * sigma * &proj);
    let ones = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let vals: Vec<f64> = (0..p)
        .filter(|&i| eig.eigenvectors.column(i).dot(&ones).abs() < 0.5)
        .map(|i| eig.eigenvalues[i])
        .collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (2.0 * lambda * lo, 2.0 * lambda * hi)
}

fn geometric_rate() -> (bool, String) {
    let (mu, sigma) = constant_problem();
    let lambda = 1.28;
    let (m, big_m) = curvature_bounds(&sigma, lambda);
    let t = 2.0 / (big_m + m);
    let bound = (big_m - m) / (big_m + m);
    let start = DVector::from_element(5, 0.2);
    let cfg = |variant| AscentConfig {
        k: 25,
        variant,
        step: StepRule::Fixed(t),
        stall_rel_gain: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut pass = true;
    let mut parts = vec![format!("contraction bound {bound:.3}")];
    let cases = [
        ("budget", ConstraintSet::unbounded(5).unwrap(), Variant::LinearP, oracles::lagrange_mv(&mu, &sigma, lambda)),
        (
            "floor 0",
            ConstraintSet::new(5, 0.0).unwrap(),
            Variant::Projected,
            oracles::brute_force_constrained_mv(&mu, &sigma, lambda, 0.0),
        ),
    ];
    for (label, omega, variant, w_star) in cases {
        let out = constant_policy_run(&mu, &sigma, &omega, &start, &cfg(variant));
        let path = replay_path(&out.policy, &simulate(&GeneratorConfig::iid(30, 5, 1)).unwrap()).unwrap();
        let errs: Vec<f64> = path.iter().map(|w| (w - &w_star).norm()).collect();
        let worst_ratio = (5..=25).map(|k| errs[k] / errs[k - 1]).fold(0.0, f64::max);
        let shrink = errs[25] / errs[0];
        let active = w_star.iter().filter(|&&x| x.abs() < 1e-12).count();
        pass &= path.len() == 26 && worst_ratio <= 0.999 && shrink <= 1e-4;
        parts.push(format!("{label}: max ratio {worst_ratio:.3}, final/initial {shrink:.1e}, active floors {active}"));
    }
    (pass, parts.join("; "))
}

fn sim_config(generator: GeneratorConfig, variant: Variant) -> SimStudyConfig {
    let lambda = normal_quantile(0.9);
    SimStudyConfig {
        replications: 50,
        check_replay: true,
        ascent: AscentConfig { k: 50, variant, ..Default::default() },
        ..SimStudyConfig::new(generator, ObjectiveSpec::mv(lambda).unwrap(), -0.2, 2024)
    }
}

fn describe(row: &GridPointSummary) -> String {
    format!(
        "delta_pi {:.2e} ({:.1e}), delta_fun {:.2e} ({:.1e}), p {:.1e}, n+ {}, n0 {}, excluded {}",
        row.delta_pi_mean,
        row.delta_pi_sd,
        row.delta_fun_mean,
        row.delta_fun_sd,
        row.p_value,
        row.n_plus,
        row.n_zero,
        row.excluded
    )
}

fn calibration() -> (bool, String) {
    let mut rng = stream_rng(909, 0);
    let mut rejections = 0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..240).map(|_| rng.sample(StandardNormal)).collect();
        if ljung_box(&x, 12).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 1000.0;
    let p = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap().p_value;
    let oracle = oracles::student_t2_upper(2.0 * 3f64.sqrt());
    let pass = (0.02..=0.09).contains(&rate) && (p - 0.0371).abs() <= 5e-4 && (p - oracle).abs() <= 1e-10;
    (pass, format!("Ljung-Box rejection rate {rate:.3}; paired t p = {p:.5} (oracle {oracle:.5})"))
}

fn main() -> ExitCode {
    let lambda_ok = (normal_quantile(0.9) - 1.2816).abs() < 1e-4;
    let mut checks = vec![
        run("gradient fidelity", Some(Duration::from_secs(1)), gradient_fidelity),
        run("projection oracle", Some(Duration::from_secs(10)), projection_oracle),
        run("monotone ascent", None, monotone_ascent),
        run("constant solution", None, constant_solution),
        run("geometric rate", Some(Duration::from_secs(30)), geometric_rate),
    ];

    let mut ar_report = None;
    checks.push(run("AR setting: functional beats plug-in", Some(Duration::from_secs(900)), || {
        let report = run_sim_study(&sim_config(GeneratorConfig::ar(0, 20, 0), Variant::Projected)).unwrap();
        let row = report.rows[0].clone();
        let pass = lambda_ok
            && row.delta_fun_mean > 0.0
            && row.delta_pi_mean < 0.0
            && row.n_plus >= 40
            && row.p_value < 0.05;
        ar_report = Some(row.clone());
        (pass, describe(&row))
    }));
    checks.push(run("IID setting: baseline optimal", Some(Duration::from_secs(900)), || {
        let report = run_sim_study(&sim_config(GeneratorConfig::iid(0, 20, 0), Variant::Projected)).unwrap();
        let row = &report.rows[0];
        let pass = row.delta_pi_mean <= 0.0 && row.delta_fun_mean <= 0.0 && row.p_value >= 0.05;
        (pass, describe(row))
    }));
    checks.push(run("GARCH setting: functional beats plug-in", Some(Duration::from_secs(900)), || {
        let report = run_sim_study(&sim_config(GeneratorConfig::garch(0, 20, 0), Variant::Projected)).unwrap();
        let row = &report.rows[0];
        let pass = row.delta_fun_mean > 0.0 && row.delta_pi_mean < 0.0 && row.p_value < 0.05;
        (pass, describe(row))
    }));
    checks.push(run("statistical calibration", None, calibration));
    checks.push(run("replay consistency", None, || {
        let Some(row) = ar_report.as_ref() else { return (false, "AR study did not run".into()) };
        let replay = row.replications.iter().filter_map(|r| r.replay_error).fold(0.0, f64::max);
        let covered = row.replications.iter().filter(|r| r.replay_error.is_some()).count();
        let linear = run_sim_study(&sim_config(GeneratorConfig::ar(0, 20, 0), Variant::LinearP)).unwrap();
        let closed = linear.rows[0].replications.iter().filter_map(|r| r.closed_form_error).fold(0.0, f64::max);
        let linear_replay = linear.rows[0].replications.iter().filter_map(|r| r.replay_error).fold(0.0, f64::max);
        let pass = covered == row.replications.len() - row.excluded && replay <= 1e-12 && linear_replay <= 1e-12 && closed <= 1e-10;
        (
            pass,
            format!(
                "projected replay {replay:.1e} over {covered} runs; linear replay {linear_replay:.1e}; closed form {closed:.1e}"
            ),
        )
    }));
    checks.push(run("synthetic backtest", None, || {
        let mut wins = 0;
        let mut gap = 0.0f64;
        let mut ratios = Vec::new();
        for seed in 0..10u64 {
            let panel = simulate(&GeneratorConfig::ar(240, 60, 1000 + seed)).unwrap();
            let prices = synthetic_prices(&panel, "BENCH").unwrap();
            let cfg = BacktestConfig::new(ObjectiveSpec::sharpe(0.0).unwrap(), -0.2, "BENCH", seed);
            let report = run_backtest(&cfg, &prices, None).unwrap();
            let overall = report.overall();
            if overall.ir_fun >= overall.ir_pi {
                wins += 1;
            }
            gap = gap.max(report.max_identity_gap());
            ratios.push(format!("{:.2}/{:.2}", overall.ir_pi, overall.ir_fun));
        }
        (
            wins >= 7 && gap <= 1e-10,
            format!("functional IR >= plug-in IR in {wins}/10 runs [{}]; identity gap {gap:.1e}", ratios.join(" ")),
        )
    }));

    let passed = checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} acceptance checks passed", checks.len());
    if passed == checks.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
