//! Damped Gauss-Newton (Levenberg-Marquardt) least squares for small dense
//! problems, with a finite-difference Jacobian.

use crate::error::{CoreError, Result};

/// Solver settings.
#[derive(Debug, Clone, Copy)]
pub struct LmConfig {
    pub max_iters: usize,
    /// Relative parameter-change convergence threshold.
    pub tol_rel: f64,
    pub lambda0: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { max_iters: 200, tol_rel: 1e-10, lambda0: 1e-3, fd_step: 1e-6 }
    }
}

/// Solution state returned by [`least_squares`].
#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals at the solution.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `J^T J` at the solution (for covariance estimates).
    pub jtj: Vec<Vec<f64>>,
    pub n_residuals: usize,
}

/// Solves a square linear system by Gaussian elimination with partial
/// pivoting. Sized for the handful of parameters the fitters carry.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|row| row.clone()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (pivot, _) = m
            .iter()
            .enumerate()
            .skip(col)
            .map(|(i, row)| (i, row[col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(CoreError::Numeric("singular matrix in linear solve".into()));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Ok(x)
}

/// Inverse of a small symmetric positive-definite matrix via columnwise solves.
pub fn invert_dense(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve_dense(a, &e)?;
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Ok(inv)
}

fn objective(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central-difference Jacobian of the residual vector.
fn jacobian(
    residual: &impl Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    m: usize,
    fd_step: f64,
) -> Vec<Vec<f64>> {
    let p = x.len();
    let mut jac = vec![vec![0.0; p]; m];
    for j in 0..p {
        let h = fd_step * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let rp = residual(&xp);
        let rm = residual(&xm);
        for i in 0..m {
            jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Minimizes the sum of squared residuals starting from `x0`.
///
/// Residuals must be finite at `x0`; non-finite residuals at trial points
/// are treated as rejected steps.
pub fn least_squares(
    residual: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cfg: &LmConfig,
) -> Result<LmResult> {
    let mut x = x0.to_vec();
    let p = x.len();
    let mut r = residual(&x);
    let m = r.len();
    if m < p {
        return Err(CoreError::Config(format!(
            "least squares needs at least {p} residuals, got {m}"
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Numeric("non-finite residuals at the initial point".into()));
    }
    let mut obj = objective(&r);
    let mut lambda = cfg.lambda0;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..cfg.max_iters {
        iterations = iter + 1;
        let jac = jacobian(&residual, &x, m, cfg.fd_step);
        // Normal equations.
        let mut jtj = vec![vec![0.0; p]; p];
        let mut jtr = vec![0.0; p];
        for i in 0..m {
            for a in 0..p {
                jtr[a] += jac[i][a] * r[i];
                for b in a..p {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = jtj.clone();
            for a in 0..p {
                damped[a][a] += lambda * jtj[a][a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let step = match solve_dense(&damped, &rhs) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let x_new: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + d).collect();
            let r_new = residual(&x_new);
            let obj_new =
                if r_new.iter().all(|v| v.is_finite()) { objective(&r_new) } else { f64::INFINITY };
            if obj_new < obj {
                let rel_step = step
                    .iter()
                    .zip(&x)
                    .map(|(d, v)| d.abs() / v.abs().max(1.0))
                    .fold(0.0f64, f64::max);
                x = x_new;
                r = r_new;
                let improvement = (obj - obj_new) / obj.max(1e-300);
                obj = obj_new;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_step < cfg.tol_rel || improvement < 1e-14 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !accepted {
            // No downhill step available: treat the current point as optimal.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let jac = jacobian(&residual, &x, m, cfg.fd_step);
    let mut jtj = vec![vec![0.0; p]; p];
    for i in 0..m {
        for a in 0..p {
            for b in a..p {
                jtj[a][b] += jac[i][a] * jac[i][b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            jtj[a][b] = jtj[b][a];
        }
    }

    Ok(LmResult { params: x, objective: obj, iterations, converged, jtj, n_residuals: m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        // y = 3 e^{-0.7 t}, recover (3, 0.7) from exact data.
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let res = |p: &[f64]| -> Vec<f64> {
            ts.iter().zip(&ys).map(|(t, y)| p[0] * (-p[1] * t).exp() - y).collect()
        };
        let fit = least_squares(res, &[1.0, 0.2], &LmConfig::default()).unwrap();
        assert!((fit.params[0] - 3.0).abs() < 1e-7, "{:?}", fit.params);
        assert!((fit.params[1] - 0.7).abs() < 1e-7);
        assert!(fit.objective < 1e-14);
    }

    #[test]
    fn himmelblau_residuals() {
        let res = |p: &[f64]| vec![p[0] * p[0] + p[1] - 11.0, p[0] + p[1] * p[1] - 7.0];
        let fit = least_squares(res, &[1.0, 1.0], &LmConfig::default()).unwrap();
        assert!(fit.objective < 1e-12, "obj {}", fit.objective);
    }

    #[test]
    fn solve_and_invert() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let x = solve_dense(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
        let inv = invert_dense(&a).unwrap();
        let det = 11.0;
        assert!((inv[0][0] - 3.0 / det).abs() < 1e-12);
        assert!((inv[1][1] - 4.0 / det).abs() < 1e-12);
    }

    #[test]
    fn jacobian_two_step_consistency() {
        // Finite-difference Jacobian is stable to halving the step.
        let res = |p: &[f64]| vec![(p[0] * 2.0).sin() + p[1], p[0] * p[1]];
        let x = [0.4, 1.3];
        let j1 = jacobian(&res, &x, 2, 1e-6);
        let j2 = jacobian(&res, &x, 2, 5e-7);
        for i in 0..2 {
            for j in 0..2 {
                assert!((j1[i][j] - j2[i][j]).abs() < 1e-6);
            }
        }
    }
}
