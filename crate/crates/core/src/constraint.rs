//! Euclidean projection onto the lower-bounded budget simplex
//! `{w : sum(w) = 1, w_i >= lower_bound}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasible weight set for `p` assets. `lower_bound = -inf` means shorting is
/// unlimited and the set is the affine budget hyperplane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstraintSet", into = "RawConstraintSet")]
pub struct ConstraintSet {
    p: usize,
    lower_bound: f64,
}

impl ConstraintSet {
    pub fn new(p: usize, lower_bound: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("constraint set needs at least one asset".into()));
        }
        if lower_bound.is_nan() || lower_bound == f64::INFINITY {
            return Err(Error::InvalidArgument(format!("lower bound {lower_bound} is not usable")));
        }
        if p as f64 * lower_bound > 1.0 {
            return Err(Error::InfeasibleOmega { p, lower_bound });
        }
        Ok(Self { p, lower_bound })
    }

    /// Budget constraint only.
    pub fn unbounded(p: usize) -> Result<Self> {
        Self::new(p, f64::NEG_INFINITY)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower_bound == f64::NEG_INFINITY
    }
}

#[derive(Serialize, Deserialize)]
struct RawConstraintSet {
    p: usize,
    /// `null` encodes an unbounded floor.
    lower_bound: Option<f64>,
}

impl TryFrom<RawConstraintSet> for ConstraintSet {
    type Error = Error;
    fn try_from(raw: RawConstraintSet) -> Result<Self> {
        ConstraintSet::new(raw.p, raw.lower_bound.unwrap_or(f64::NEG_INFINITY))
    }
}

impl From<ConstraintSet> for RawConstraintSet {
    fn from(c: ConstraintSet) -> Self {
        RawConstraintSet { p: c.p, lower_bound: (!c.is_unbounded()).then_some(c.lower_bound) }
    }
}

/// `(I - 11^T/p) v`: removes the mean so the result sums to zero.
pub fn project_hyperplane(v: &DVector<f64>) -> DVector<f64> {
    let mean = v.mean();
    v.map(|x| x - mean)
}

/// Closest point of `omega` to `v`.
///
/// Sort-based threshold: `u_i = max(lb, v_i - tau)` where `tau` is the root
/// of the piecewise-linear budget equation, located exactly from the sorted
/// values.
pub fn project(omega: &ConstraintSet, v: &DVector<f64>) -> Result<DVector<f64>> {
    let p = omega.p;
    if v.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: v.len() });
    }
    if omega.is_unbounded() {
        let shift = (1.0 - v.sum()) / p as f64;
        return Ok(v.map(|x| x + shift));
    }
    let lb = omega.lower_bound;
    // Mass available above the floors.
    let budget = 1.0 - p as f64 * lb;
    if budget <= 0.0 {
        return Ok(DVector::from_element(p, lb));
    }
    let mut sorted: Vec<f64> = v.iter().map(|x| x - lb).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - budget) / (j + 1) as f64;
        if x - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    Ok(v.map(|x| lb + (x - lb - tau).max(0.0)))
}

pub fn is_feasible(omega: &ConstraintSet, w: &DVector<f64>, tol: f64) -> bool {
    w.len() == omega.p
        && (w.sum() - 1.0).abs() <= tol
        && w.iter().all(|&x| x >= omega.lower_bound - tol)
}

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
#[allow(dead_code)]
mod oracles;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn hyperplane_examples() {
        let v = dv(&[0.3, -0.1, -0.2]);
        assert_abs_diff_eq!(project_hyperplane(&v), v, epsilon = 1e-15);
        assert_abs_diff_eq!(project_hyperplane(&dv(&[1.0; 4])), DVector::zeros(4), epsilon = 0.0);
        let r = project_hyperplane(&dv(&[2.0, 0.0, 0.0]));
        assert_abs_diff_eq!(r, dv(&[4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0]), epsilon = 1e-15);
        assert!(r.sum().abs() <= 1e-12);
    }

    #[test]
    fn projection_examples() {
        let omega = ConstraintSet::new(3, -0.2).unwrap();
        let v = dv(&[0.5, 0.5, 0.0]);
        assert_abs_diff_eq!(project(&omega, &v).unwrap(), v, epsilon = 1e-15);

        let omega = ConstraintSet::new(3, -1.0).unwrap();
        let u = project(&omega, &dv(&[2.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(u, dv(&[5.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]), epsilon = 1e-14);

        let omega = ConstraintSet::new(3, 0.0).unwrap();
        let u = project(&omega, &dv(&[2.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(u, dv(&[1.0, 0.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn examples_agree_with_brute_force() {
        for (lb, v) in [(-1.0, [2.0, 0.0, 0.0]), (0.0, [2.0, 0.0, 0.0]), (-0.2, [0.5, 0.5, 0.0])] {
            let omega = ConstraintSet::new(3, lb).unwrap();
            let v = dv(&v);
            let exact = oracles::brute_force_projection(&v, lb);
            assert_abs_diff_eq!(project(&omega, &v).unwrap(), exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn tight_floor_collapses_to_a_point() {
        let omega = ConstraintSet::new(4, 0.25).unwrap();
        assert_eq!(project(&omega, &dv(&[5.0, -3.0, 0.0, 1.0])).unwrap(), DVector::from_element(4, 0.25));
    }

    #[test]
    fn construction_feasibility() {
        assert!(ConstraintSet::new(4, 0.25).is_ok());
        assert!(matches!(ConstraintSet::new(4, 0.2501), Err(Error::InfeasibleOmega { .. })));
        assert!(ConstraintSet::new(20, -1.0).is_ok());
        assert!(ConstraintSet::unbounded(3).unwrap().is_unbounded());
    }

    #[test]
    fn feasibility_checks() {
        let omega = ConstraintSet::new(4, 0.0).unwrap();
        assert!(is_feasible(&omega, &DVector::from_element(4, 0.25), 0.0));
        let omega = ConstraintSet::new(2, -0.2).unwrap();
        assert!(!is_feasible(&omega, &dv(&[1.5, -0.5]), 1e-10));
    }

    #[test]
    fn dimension_mismatch() {
        let omega = ConstraintSet::new(3, 0.0).unwrap();
        assert!(matches!(project(&omega, &dv(&[1.0, 0.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn serde_round_trip_keeps_infinite_floor() {
        for c in [ConstraintSet::new(5, -0.2).unwrap(), ConstraintSet::unbounded(5).unwrap()] {
            let s = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<ConstraintSet>(&s).unwrap(), c);
        }
        assert!(serde_json::from_str::<ConstraintSet>(r#"{"p":4,"lower_bound":0.3}"#).is_err());
    }

    proptest! {
        #[test]
        fn construction_iff_budget_allows(p in 1usize..30, lb in -2.0f64..1.0) {
            prop_assert_eq!(ConstraintSet::new(p, lb).is_ok(), p as f64 * lb <= 1.0);
        }

        #[test]
        fn unbounded_matches_affine_projection(v in proptest::collection::vec(-5.0f64..5.0, 1..10)) {
            let v = DVector::from_vec(v);
            let omega = ConstraintSet::unbounded(v.len()).unwrap();
            let expected = project_hyperplane(&v).add_scalar(1.0 / v.len() as f64);
            let got = project(&omega, &v).unwrap();
            prop_assert!((got - expected).amax() <= 1e-12);
        }

        #[test]
        fn projection_is_feasible_and_idempotent(
            v in proptest::collection::vec(-3.0f64..3.0, 1..12),
            lb in prop_oneof![Just(-1.0), Just(-0.2), Just(0.0)],
        ) {
            let v = DVector::from_vec(v);
            let omega = ConstraintSet::new(v.len(), lb).unwrap();
            let u = project(&omega, &v).unwrap();
            prop_assert!(is_feasible(&omega, &u, 1e-10));
            let uu = project(&omega, &u).unwrap();
            prop_assert!((uu - &u).amax() <= 1e-12);
        }

        #[test]
        fn matches_brute_force_small(
            v in proptest::collection::vec(-2.0f64..2.0, 1..7),
            lb in prop_oneof![Just(-1.0), Just(-0.2), Just(0.0)],
        ) {
            let v = DVector::from_vec(v);
            let omega = ConstraintSet::new(v.len(), lb).unwrap();
            let u = project(&omega, &v).unwrap();
            let o = oracles::brute_force_projection(&v, lb);
            prop_assert!((u - o).amax() <= 1e-8);
        }
    }
}
