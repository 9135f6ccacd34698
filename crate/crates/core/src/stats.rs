//! Evaluation statistics: realized objectives, the one-sided paired t-test,
//! the Ljung-Box portmanteau test and the realized information ratio.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::objective::ObjectiveSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `F(m1, m2)` where `m1` is the mean and `m2` the mean of squares of the
/// realized portfolio returns (both with divisor `n`).
pub fn realized_objective(objective: ObjectiveSpec, returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::InvalidArgument("need at least two realized returns".into()));
    }
    let m1 = mean(returns);
    let m2 = returns.iter().map(|r| r * r).sum::<f64>() / returns.len() as f64;
    objective.eval(m1, m2)
}

/// One-sided paired t-test of `H0: E(x - y) <= 0` against `E(x - y) > 0`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if d.iter().all(|&v| v == d[0]) {
        return Err(Error::ZeroVariance);
    }
    let n = d.len() as f64;
    let dbar = mean(&d);
    let var = d.iter().map(|v| (v - dbar).powi(2)).sum::<f64>() / (n - 1.0);
    let t = dbar / (var.sqrt() / n.sqrt());
    let df = n - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    Ok(TestResult { statistic: t, df, p_value: dist.sf(t).clamp(0.0, 1.0) })
}

/// Ljung-Box `Q = n(n+2) sum_{k=1}^{h} rho_k^2 / (n-k)` with an upper-tail
/// chi-square(h) p-value.
pub fn ljung_box(series: &[f64], h: usize) -> Result<TestResult> {
    let n = series.len();
    if h == 0 || n <= h {
        return Err(Error::InvalidArgument(format!("ljung-box needs 1 <= h < n, got h={h}, n={n}")));
    }
    let m = mean(series);
    let centered: Vec<f64> = series.iter().map(|x| x - m).collect();
    let denom: f64 = centered.iter().map(|x| x * x).sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::ConstantSeries);
    }
    let nf = n as f64;
    let q = nf
        * (nf + 2.0)
        * (1..=h)
            .map(|k| {
                let rho = centered[k..].iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>() / denom;
                rho * rho / (nf - k as f64)
            })
            .sum::<f64>();
    let dist = ChiSquared::new(h as f64).expect("h > 0");
    Ok(TestResult { statistic: q, df: h as f64, p_value: dist.sf(q).clamp(0.0, 1.0) })
}

/// Mean over sample standard deviation (divisor `n - 1`).
pub fn information_ratio(excess_returns: &[f64]) -> Result<f64> {
    let n = excess_returns.len();
    if n < 2 {
        return Err(Error::InvalidArgument("information ratio needs at least two returns".into()));
    }
    let m = mean(excess_returns);
    let var = excess_returns.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance(var));
    }
    Ok(m / var.sqrt())
}

pub fn sample_sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
#[allow(dead_code)]
mod oracles;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn realized_objective_examples() {
        let mv = ObjectiveSpec::mv(1.3).unwrap();
        assert_relative_eq!(realized_objective(mv, &[0.02; 5]).unwrap(), 0.02, epsilon = 1e-15);
        let sr = ObjectiveSpec::sharpe(0.0).unwrap();
        assert_eq!(realized_objective(sr, &[0.1, -0.1]).unwrap(), 0.0);
        let mv1 = ObjectiveSpec::mv(1.0).unwrap();
        assert_relative_eq!(realized_objective(mv1, &[1.0, 2.0, 3.0]).unwrap(), 4.0 / 3.0, epsilon = 1e-14);
        assert!(matches!(realized_objective(sr, &[0.5, 0.5]), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn paired_t_matches_closed_form_df2() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(r.statistic, 2.0 * 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.df, 2.0);
        assert_relative_eq!(r.p_value, oracles::student_t2_upper(r.statistic), epsilon = 1e-10);
        assert!((r.p_value - 0.0371).abs() < 5e-4);
    }

    #[test]
    fn paired_t_zero_variance() {
        assert_eq!(paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).unwrap_err(), Error::ZeroVariance);
        assert_eq!(paired_t_test(&[1.0, 2.0], &[0.0, 1.0]).unwrap_err(), Error::ZeroVariance);
    }

    #[test]
    fn paired_t_symmetric_differences_center_on_half() {
        for seed in 0..20 {
            let mut rng = stream_rng(seed, 0);
            let half: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
            let d: Vec<f64> = half.iter().copied().chain(half.iter().map(|v| -v)).collect();
            let p = paired_t_test(&d, &vec![0.0; d.len()]).unwrap().p_value;
            assert!((0.3..=0.7).contains(&p), "seed {seed}: p = {p}");
        }
    }

    #[test]
    fn ljung_box_df2_matches_closed_form() {
        let mut rng = stream_rng(9, 0);
        let x: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
        let r = ljung_box(&x, 2).unwrap();
        assert_relative_eq!(r.p_value, oracles::chi2_2_upper(r.statistic), epsilon = 1e-10);
    }

    #[test]
    fn ljung_box_zero_autocorrelation() {
        // Lag-1 products cancel: (1)(0) + (0)(-1) + (-1)(0) + (0)(1) = 0.
        let x = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        let c: Vec<f64> = x.to_vec();
        let r = ljung_box(&c, 1).unwrap();
        assert!(r.statistic.abs() < 1e-15);
        assert_relative_eq!(r.p_value, 1.0, epsilon = 1e-12);
        assert_eq!(ljung_box(&[2.0; 10], 3).unwrap_err(), Error::ConstantSeries);
        assert!(ljung_box(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn ljung_box_size_under_white_noise() {
        let mut rejections = 0;
        for rep in 0..1000 {
            let mut rng = stream_rng(2024, rep);
            let x: Vec<f64> = (0..240).map(|_| rng.sample(StandardNormal)).collect();
            rejections += (ljung_box(&x, 12).unwrap().p_value < 0.05) as usize;
        }
        let rate = rejections as f64 / 1000.0;
        assert!((0.02..=0.09).contains(&rate), "rejection rate {rate}");
    }

    #[test]
    fn information_ratio_examples() {
        assert_eq!(information_ratio(&[0.1, -0.1]).unwrap(), 0.0);
        assert!(matches!(information_ratio(&[0.25; 6]), Err(Error::DegenerateVariance(_))));
        assert_relative_eq!(information_ratio(&[1.0, 2.0, 3.0]).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn normal_quantile_anchor() {
        assert_relative_eq!(normal_quantile(0.9), 1.2815515655446004, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn paired_t_antisymmetric(x in proptest::collection::vec(-1.0f64..1.0, 3..30), shift in -1.0f64..1.0) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * 0.5 + shift + i as f64 * 1e-3).collect();
            if let (Ok(a), Ok(b)) = (paired_t_test(&x, &y), paired_t_test(&y, &x)) {
                prop_assert_eq!(a.statistic, -b.statistic);
            }
        }

        #[test]
        fn ljung_box_scale_invariant(x in proptest::collection::vec(-1.0f64..1.0, 20..60), scale in 0.001f64..1000.0) {
            let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
            if let Ok(a) = ljung_box(&x, 5) {
                let b = ljung_box(&scaled, 5).unwrap();
                prop_assert!((a.statistic - b.statistic).abs() <= 1e-10 * a.statistic.abs().max(1e-12));
            }
        }

        #[test]
        fn realized_sharpe_scale_invariant(x in proptest::collection::vec(-0.1f64..0.1, 5..40), scale in 0.01f64..100.0) {
            let sr = ObjectiveSpec::sharpe(0.0).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
            if let Ok(a) = realized_objective(sr, &x) {
                let b = realized_objective(sr, &scaled).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12));
            }
        }
    }
}
