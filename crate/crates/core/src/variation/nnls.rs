//! Nonnegative least squares for the Euler–Lagrange cluster weights.
//!
//! Lawson–Hanson active set; the systems here have at most a handful of
//! columns (one per cluster member), so plain normal-equation subproblems via
//! SVD are ample.

use nalgebra::{DMatrix, DVector};

/// Solves min ‖A d − b‖₂ subject to d ≥ 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut passive = vec![false; n];
    let mut d = DVector::<f64>::zeros(n);
    let scale = a.amax().max(1e-300);
    let tol = 1e-12 * scale * b.norm().max(1.0);
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let residual = b - a * &d;
        let w = a.transpose() * residual;
        // Most violated KKT multiplier among active constraints.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol && best.is_none_or(|(_, bw)| w[j] > bw) {
                best = Some((j, w[j]));
            }
        }
        let Some((enter, _)) = best else { break };
        passive[enter] = true;

        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(cols.iter());
            let ls = sub
                .svd(true, true)
                .solve(b, 1e-13)
                .unwrap_or_else(|_| DVector::zeros(cols.len()));
            if ls.iter().all(|&v| v > 0.0) {
                d.fill(0.0);
                for (idx, &j) in cols.iter().enumerate() {
                    d[j] = ls[idx];
                }
                break;
            }
            // Step toward the subproblem solution until a variable hits zero.
            let mut alpha = f64::INFINITY;
            for (idx, &j) in cols.iter().enumerate() {
                if ls[idx] <= 0.0 {
                    let denom = d[j] - ls[idx];
                    if denom > 0.0 {
                        alpha = alpha.min(d[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (idx, &j) in cols.iter().enumerate() {
                d[j] += alpha * (ls[idx] - d[j]);
                if d[j] <= tol.max(1e-300) {
                    d[j] = 0.0;
                    passive[j] = false;
                }
            }
            if cols.iter().all(|&j| !passive[j]) {
                break;
            }
        }
    }
    d
}
