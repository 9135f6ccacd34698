//! Independent reference computations used only by tests. Nothing here calls
//! into the library, so these stay valid as checks on it.

use nalgebra::{DMatrix, DVector};

/// Projection onto `{sum(u) = 1, u >= lb}` by enumerating every set of
/// coordinates pinned at the floor and solving the equality-only problem on
/// the remaining ones. Exponential in `p`; fine for `p <= 8`.
pub fn brute_force_projection(v: &DVector<f64>, lb: f64) -> DVector<f64> {
    let p = v.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << p) {
        let pinned: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).collect();
        let free: Vec<usize> = (0..p).filter(|i| mask & (1 << i) == 0).collect();
        let mut u = DVector::from_element(p, lb);
        if free.is_empty() {
            if ((p as f64) * lb - 1.0).abs() > 1e-12 {
                continue;
            }
        } else {
            let rest = 1.0 - pinned.len() as f64 * lb;
            let sum_free: f64 = free.iter().map(|&i| v[i]).sum();
            let shift = (rest - sum_free) / free.len() as f64;
            for &i in &free {
                u[i] = v[i] + shift;
            }
            if free.iter().any(|&i| u[i] < lb - 1e-14) {
                continue;
            }
        }
        let d = (&u - v).norm_squared();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, u));
        }
    }
    best.expect("feasible set is nonempty").1
}

/// Maximizer of `w'mu - lambda w'Sigma w` subject to `sum(w) = 1`, from the
/// bordered KKT system.
pub fn lagrange_mv(mu: &DVector<f64>, sigma: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let p = mu.len();
    let mut k = DMatrix::zeros(p + 1, p + 1);
    let mut rhs = DVector::zeros(p + 1);
    for i in 0..p {
        for j in 0..p {
            k[(i, j)] = 2.0 * lambda * sigma[(i, j)];
        }
        k[(i, p)] = 1.0;
        k[(p, i)] = 1.0;
        rhs[i] = mu[i];
    }
    rhs[p] = 1.0;
    let sol = k.lu().solve(&rhs).expect("nonsingular KKT system");
    sol.rows(0, p).into_owned()
}

/// Same objective with the extra floor `w >= lb`: enumerate which assets sit
/// at the floor, solve the KKT system on the rest, keep the best feasible one.
pub fn brute_force_constrained_mv(mu: &DVector<f64>, sigma: &DMatrix<f64>, lambda: f64, lb: f64) -> DVector<f64> {
    let p = mu.len();
    let objective = |w: &DVector<f64>| w.dot(mu) - lambda * (w.transpose() * sigma * w)[(0, 0)];
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << p) {
        let free: Vec<usize> = (0..p).filter(|i| mask & (1 << i) == 0).collect();
        let pinned: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).collect();
        if free.is_empty() {
            continue;
        }
        let f = free.len();
        // Unknowns: w_free, nu.
        let mut k = DMatrix::zeros(f + 1, f + 1);
        let mut rhs = DVector::zeros(f + 1);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                k[(a, b)] = 2.0 * lambda * sigma[(i, j)];
            }
            k[(a, f)] = 1.0;
            k[(f, a)] = 1.0;
            let pinned_pull: f64 = pinned.iter().map(|&j| 2.0 * lambda * sigma[(i, j)] * lb).sum();
            rhs[a] = mu[i] - pinned_pull;
        }
        rhs[f] = 1.0 - pinned.len() as f64 * lb;
        let Some(sol) = k.lu().solve(&rhs) else { continue };
        let mut w = DVector::from_element(p, lb);
        for (a, &i) in free.iter().enumerate() {
            w[i] = sol[a];
        }
        if w.iter().any(|&x| x < lb - 1e-12) {
            continue;
        }
        let g = objective(&w);
        if best.as_ref().is_none_or(|(bg, _)| g > *bg) {
            best = Some((g, w));
        }
    }
    best.expect("some face is feasible").1
}

/// Central finite difference of a scalar function of two reals.
pub fn central_diff2(f: impl Fn(f64, f64) -> f64, u: f64, v: f64, h: f64) -> (f64, f64) {
    let du = (f(u + h, v) - f(u - h, v)) / (2.0 * h);
    let dv = (f(u, v + h) - f(u, v - h)) / (2.0 * h);
    (du, dv)
}

/// Upper tail of Student's t with two degrees of freedom, in closed form.
pub fn student_t2_upper(t: f64) -> f64 {
    0.5 - t / (2.0 * (2.0 + t * t).sqrt())
}

/// Upper tail of chi-square with two degrees of freedom.
pub fn chi2_2_upper(x: f64) -> f64 {
    (-x / 2.0).exp()
}

/// Argmax of `phi` over `[lo, hi]` on a uniform grid.
pub fn grid_argmax(phi: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .map(|i| {
            let x = lo + i as f64 * step;
            (x, phi(x))
        })
        .filter(|(_, y)| y.is_finite())
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, (x, y)| if y > acc.1 { (x, y) } else { acc })
}
