//! Small nonlinear least-squares fits.

use nalgebra::{DMatrix, DVector};

/// Levenberg-Marquardt on `residuals(params)` with a central-difference
/// Jacobian; `scales` sets the typical magnitude of each parameter.
/// Returns the parameters and the final sum of squares.
pub(crate) fn levenberg_marquardt(
    initial: &[f64],
    scales: &[f64],
    residuals: impl Fn(&[f64]) -> Vec<f64>,
    max_iterations: usize,
) -> Option<(Vec<f64>, f64)> {
    let n = initial.len();
    let mut p = initial.to_vec();
    let mut r = DVector::from_vec(residuals(&p));
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return None;
    }
    let mut lambda = 1e-3;
    for _ in 0..max_iterations {
        let mut jac = DMatrix::zeros(r.len(), n);
        for j in 0..n {
            let h = 1e-6 * scales[j].max(p[j].abs() * 1e-3);
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[j] += h;
            lo[j] -= h;
            let (rh, rl) = (residuals(&hi), residuals(&lo));
            for i in 0..r.len() {
                jac[(i, j)] = (rh[i] - rl[i]) / (2.0 * h);
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let tr = DVector::from_vec(residuals(&trial));
            let tc = tr.norm_squared();
            if tc.is_finite() && tc <= cost {
                let converged = (cost - tc) <= 1e-15 * cost
                    || step.iter().zip(scales).all(|(s, k)| s.abs() <= 1e-13 * k);
                p = trial;
                r = tr;
                cost = tc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if converged {
                    return Some((p, cost));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some((p, cost))
}
