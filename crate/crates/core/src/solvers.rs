//! Constant-weight solvers: the equal-weight baseline, the textbook
//! minimum-variance frontier point, and projected gradient ascent for any
//! objective over a constraint set.

use nalgebra::{DMatrix, DVector};

use crate::constraint::{project, ConstraintSet};
use crate::error::{Error, Result};
use crate::objective::ObjectiveSpec;

pub fn equal_weight(p: usize) -> DVector<f64> {
    DVector::from_element(p, 1.0 / p as f64)
}

/// Frontier portfolio with expected return `mu_star`:
/// `w = {B S^-1 1 - A S^-1 mu + mu_star (C S^-1 mu - A S^-1 1)} / D`
/// with `A = mu' S^-1 1`, `B = mu' S^-1 mu`, `C = 1' S^-1 1`, `D = BC - A^2`.
pub fn markowitz_closed_form(mu: &DVector<f64>, sigma: &DMatrix<f64>, mu_star: f64) -> Result<DVector<f64>> {
    let p = mu.len();
    if sigma.shape() != (p, p) {
        return Err(Error::DimensionMismatch { expected: p, got: sigma.nrows() });
    }
    let chol = sigma.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let ones = DVector::from_element(p, 1.0);
    let si_mu = chol.solve(mu);
    let si_one = chol.solve(&ones);
    let a = mu.dot(&si_one);
    let b = mu.dot(&si_mu);
    let c = ones.dot(&si_one);
    let d = b * c - a * a;
    if d <= 1e-12 * (b * c).abs() {
        return Err(Error::DegenerateD);
    }
    Ok((&si_one * b - &si_mu * a + (&si_mu * c - &si_one * a) * mu_star) / d)
}

/// Settings for [`solve_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the relative objective gain falls below this...
    pub rel_gain_tol: f64,
    /// ...and the accepted step moved the weights by less than this.
    pub step_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters: 500, rel_gain_tol: 1e-10, step_tol: 1e-9 }
    }
}

/// Result of [`solve_constant_with`] including the objective at every iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSolution {
    pub weights: DVector<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Maximizes `F(w'mu, w'Vw)` over `omega` from equal weights.
pub fn solve_constant(
    objective: ObjectiveSpec,
    mu: &DVector<f64>,
    v: &DMatrix<f64>,
    omega: &ConstraintSet,
) -> Result<DVector<f64>> {
    solve_constant_with(objective, mu, v, omega, &SolverConfig::default()).map(|s| s.weights)
}

/// Projected gradient ascent `w <- P(w + t (a mu + 2 b V w))` with
/// `(a, b) = grad F` at the current point. The step doubles after every
/// accepted iteration and halves until a sufficient-ascent test passes.
pub fn solve_constant_with(
    objective: ObjectiveSpec,
    mu: &DVector<f64>,
    v: &DMatrix<f64>,
    omega: &ConstraintSet,
    cfg: &SolverConfig,
) -> Result<ConstantSolution> {
    let p = omega.p();
    if mu.len() != p || v.shape() != (p, p) {
        return Err(Error::DimensionMismatch { expected: p, got: mu.len() });
    }
    let value = |w: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let vw = v * w;
        Ok((objective.eval(w.dot(mu), w.dot(&vw))?, vw))
    };
    let mut w = equal_weight(p);
    let (mut f, mut vw) = value(&w)?;
    let mut trace = vec![f];
    let mut t = 1.0;
    let mut iterations = 0;
    let mut previous: Option<(DVector<f64>, DVector<f64>)> = None;
    while iterations < cfg.max_iters {
        let (a, b) = objective.grad(w.dot(mu), w.dot(&vw))?;
        let g = mu * a + &vw * (2.0 * b);
        // Barzilai-Borwein trial step; the ascent test below keeps the
        // iterates monotone.
        if let Some((s, g_prev)) = previous.take() {
            let sy = s.dot(&(g_prev - &g));
            t = if sy > 0.0 { (s.norm_squared() / sy).clamp(1e-12, 1e12) } else { t * 2.0 };
        }
        let mut accepted = None;
        for _ in 0..80 {
            let cand = project(omega, &(&w + &g * t))?;
            let step = &cand - &w;
            // A projected step satisfies g'step >= |step|^2 / t.
            let predicted = g.dot(&step);
            if predicted <= 0.0 {
                break;
            }
            match value(&cand) {
                Ok((fc, vwc)) if fc >= f + 1e-4 * predicted => {
                    accepted = Some((cand, fc, vwc, step.norm()));
                    break;
                }
                Ok(_) | Err(Error::DegenerateVariance(_)) => t *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((cand, fc, vwc, step_norm)) = accepted else { break };
        iterations += 1;
        let gain = (fc - f) / f.abs().max(f64::MIN_POSITIVE);
        previous = Some((&cand - &w, g));
        w = cand;
        f = fc;
        vw = vwc;
        trace.push(f);
        if gain < cfg.rel_gain_tol && step_norm < cfg.step_tol {
            break;
        }
    }
    Ok(ConstantSolution { weights: w, trace, iterations })
}

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
#[allow(dead_code)]
mod oracles;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::is_feasible;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn random_problem(p: usize, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
        use crate::rng::stream_rng;
        use rand::Rng;
        let mut rng = stream_rng(seed, 0);
        let mu = DVector::from_fn(p, |_, _| rng.random_range(-0.01..0.02));
        let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-0.05..0.05));
        let sigma = &a * a.transpose() + DMatrix::identity(p, p) * 1e-3;
        (mu, sigma)
    }

    #[test]
    fn equal_weight_examples() {
        assert_eq!(equal_weight(20), DVector::from_element(20, 0.05));
        assert_eq!(equal_weight(1), dv(&[1.0]));
        let omega = ConstraintSet::new(20, 0.05).unwrap();
        assert!(is_feasible(&omega, &equal_weight(20), 1e-15));
    }

    #[test]
    fn markowitz_examples() {
        let w = markowitz_closed_form(&dv(&[0.1, 0.2]), &DMatrix::identity(2, 2), 0.15).unwrap();
        assert_abs_diff_eq!(w, dv(&[0.5, 0.5]), epsilon = 1e-12);
        let (mu, sigma) = random_problem(6, 4);
        let w = markowitz_closed_form(&mu, &sigma, 0.01).unwrap();
        assert!((w.dot(&mu) - 0.01).abs() <= 1e-10);
        assert!((w.sum() - 1.0).abs() <= 1e-10);
        assert_eq!(markowitz_closed_form(&dv(&[0.1, 0.1]), &DMatrix::identity(2, 2), 0.1).unwrap_err(), Error::DegenerateD);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(markowitz_closed_form(&dv(&[0.1, 0.2]), &singular, 0.1).unwrap_err(), Error::SingularCovariance);
    }

    #[test]
    fn symmetric_problem_gives_equal_weights() {
        let p = 5;
        let mu = DVector::from_element(p, 0.01);
        let v = DMatrix::identity(p, p) * 0.0016 + &mu * mu.transpose();
        let w = solve_constant(ObjectiveSpec::mv(1.28).unwrap(), &mu, &v, &ConstraintSet::new(p, -1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(w, equal_weight(p), epsilon = 1e-12);
    }

    #[test]
    fn two_assets_match_grid_search() {
        let mu = dv(&[0.01, 0.004]);
        let sigma = DMatrix::from_row_slice(2, 2, &[0.0025, 0.0006, 0.0006, 0.0016]);
        let v = &sigma + &mu * mu.transpose();
        let lambda = 1.28;
        let spec = ObjectiveSpec::mv(lambda).unwrap();
        let w = solve_constant(spec, &mu, &v, &ConstraintSet::unbounded(2).unwrap()).unwrap();
        let phi = |x: f64| {
            let w = dv(&[x, 1.0 - x]);
            spec.eval(w.dot(&mu), (w.transpose() * &v * &w)[(0, 0)]).unwrap()
        };
        let (x, _) = oracles::grid_argmax(phi, -3.0, 4.0, 1e-5);
        assert!((w[0] - x).abs() <= 1e-4 && (w[1] - (1.0 - x)).abs() <= 1e-4, "{w} vs {x}");
    }

    #[test]
    fn sharpe_improves_on_equal_weight() {
        let (mu, sigma) = random_problem(3, 9);
        let mu = mu.add_scalar(0.01);
        let v = &sigma + &mu * mu.transpose();
        let spec = ObjectiveSpec::sharpe(0.0).unwrap();
        let omega = ConstraintSet::new(3, 0.0).unwrap();
        let w = solve_constant(spec, &mu, &v, &omega).unwrap();
        let f = |w: &DVector<f64>| spec.eval(w.dot(&mu), (w.transpose() * &v * w)[(0, 0)]).unwrap();
        assert!(f(&w) >= f(&equal_weight(3)));
        assert!(is_feasible(&omega, &w, 1e-10));
    }

    #[test]
    fn unconstrained_mv_matches_lagrange_oracle() {
        for seed in 0..10 {
            let (mu, sigma) = random_problem(8, seed);
            let v = &sigma + &mu * mu.transpose();
            let w = solve_constant(ObjectiveSpec::mv(1.28).unwrap(), &mu, &v, &ConstraintSet::unbounded(8).unwrap()).unwrap();
            let exact = oracles::lagrange_mv(&mu, &sigma, 1.28);
            assert!((&w - &exact).amax() <= 1e-6, "seed {seed}: {}", (&w - &exact).amax());
        }
    }

    #[test]
    fn floored_mv_matches_brute_force() {
        for seed in 0..5 {
            let (mu, sigma) = random_problem(5, 100 + seed);
            let v = &sigma + &mu * mu.transpose();
            let w = solve_constant(ObjectiveSpec::mv(0.5).unwrap(), &mu, &v, &ConstraintSet::new(5, 0.0).unwrap()).unwrap();
            let exact = oracles::brute_force_constrained_mv(&mu, &sigma, 0.5, 0.0);
            assert!((&w - &exact).amax() <= 1e-6, "seed {seed}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn feasible_with_monotone_trace(
            seed in 0u64..10_000,
            lb in prop_oneof![Just(-1.0), Just(-0.2), Just(0.0)],
            kind in 0usize..3,
        ) {
            let (mu, sigma) = random_problem(6, seed);
            let mu = mu.add_scalar(0.005);
            let v = &sigma + &mu * mu.transpose();
            let spec = [ObjectiveSpec::mv(1.28).unwrap(), ObjectiveSpec::sharpe(0.0).unwrap(), ObjectiveSpec::msd(0.128).unwrap()][kind];
            let omega = ConstraintSet::new(6, lb).unwrap();
            let sol = solve_constant_with(spec, &mu, &v, &omega, &SolverConfig::default()).unwrap();
            prop_assert!(is_feasible(&omega, &sol.weights, 1e-10));
            prop_assert!(sol.trace.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn permutation_equivariant(seed in 0u64..10_000, shift in 1usize..6) {
            let (mu, sigma) = random_problem(6, seed);
            let v = &sigma + &mu * mu.transpose();
            let perm: Vec<usize> = (0..6).map(|i| (i + shift) % 6).collect();
            let mu_p = DVector::from_fn(6, |i, _| mu[perm[i]]);
            let v_p = DMatrix::from_fn(6, 6, |i, j| v[(perm[i], perm[j])]);
            let omega = ConstraintSet::new(6, -0.2).unwrap();
            let spec = ObjectiveSpec::mv(1.28).unwrap();
            let w = solve_constant(spec, &mu, &v, &omega).unwrap();
            let w_p = solve_constant(spec, &mu_p, &v_p, &omega).unwrap();
            for i in 0..6 {
                prop_assert!((w_p[i] - w[perm[i]]).abs() <= 1e-6);
            }
        }
    }
}
