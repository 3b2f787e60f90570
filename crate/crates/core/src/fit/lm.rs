use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits of the damped least-squares iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative drop of the residual norm in an accepted step
    /// falls below this.
    pub residual_tol: f64,
    /// Stop when the infinity norm of J^T r falls below this.
    pub gradient_tol: f64,
    pub initial_damping: f64,
    /// A residual-change stop also needs every step component below
    /// step_tol (1 + |x|).
    pub step_tol: f64,
    /// Forward-difference step is max(rel_step |x|, abs_step).
    pub rel_step: f64,
    pub abs_step: f64,
    /// Columns of the scaled Jacobian whose relative singular value falls
    /// below this are reported as unidentifiable.
    pub rank_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            residual_tol: 1.0e-10,
            gradient_tol: 1.0e-10,
            step_tol: 1.0e-8,
            initial_damping: 1.0e-3,
            rel_step: 1.0e-6,
            abs_step: 1.0e-8,
            rank_tol: 1.0e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ResidualChange,
    Gradient,
    /// No damped step lowers the residual any further.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Indices of the free coordinates, the row/column order of `covariance`.
    pub free: Vec<usize>,
    /// sigma^2 (J^T J)^-1 over the free coordinates.
    pub covariance: DMatrix<f64>,
    /// Residual norm after every accepted step, starting with the initial one.
    pub history: Vec<f64>,
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Forward-difference Jacobian over the free coordinates, columns evaluated
/// in parallel.
pub fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], free: &[usize], opts: &LmOptions) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let columns = free
        .par_iter()
        .map(|&j| {
            let h = (opts.rel_step * x[j].abs()).max(opts.abs_step);
            let mut xp = x.to_vec();
            xp[j] += h;
            let step = xp[j] - x[j];
            let rp = f(&xp)?;
            if rp.len() != r0.len() {
                return Err(Error::DimensionMismatch {
                    expected: r0.len(),
                    got: rp.len(),
                });
            }
            Ok(rp.iter().zip(r0).map(|(a, b)| (a - b) / step).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let m = r0.len();
    Ok(DMatrix::from_fn(m, free.len(), |i, j| columns[j][i]))
}

/// Parameter combinations that the Jacobian cannot resolve, described with
/// `names`; empty when the problem has full rank.
pub fn null_space_combinations(j: &DMatrix<f64>, free: &[usize], names: &[String], rank_tol: f64) -> Vec<String> {
    let k = j.ncols();
    if k == 0 {
        return Vec::new();
    }
    let scales: Vec<f64> = (0..k).map(|c| j.column(c).norm()).collect();
    let name = |c: usize| names.get(free[c]).cloned().unwrap_or_else(|| format!("x{}", free[c]));
    let mut out: Vec<String> = (0..k)
        .filter(|&c| scales[c] == 0.0 || !scales[c].is_finite())
        .map(name)
        .collect();
    let live: Vec<usize> = (0..k).filter(|&c| scales[c] > 0.0 && scales[c].is_finite()).collect();
    if live.is_empty() {
        return out;
    }
    let scaled = DMatrix::from_fn(j.nrows(), live.len(), |r, c| j[(r, live[c])] / scales[live[c]]);
    // J^T J of the scaled columns has unit diagonal, so its spectrum is cheap
    let gram = scaled.transpose() * &scaled;
    let eig = gram.symmetric_eigen();
    let largest = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.max(0.0).sqrt() <= rank_tol * largest.sqrt() {
            let v = eig.eigenvectors.column(i);
            let mut terms: Vec<(f64, usize)> = v
                .iter()
                .enumerate()
                .filter(|(_, w)| w.abs() >= 0.05)
                .map(|(c, &w)| (w, live[c]))
                .collect();
            terms.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
            let sign = if terms.first().is_some_and(|t| t.0 < 0.0) { -1.0 } else { 1.0 };
            let text = terms
                .iter()
                .map(|&(w, c)| format!("{:+.3}*{}", sign * w, name(c)))
                .collect::<Vec<_>>()
                .join(" ");
            out.push(text);
        }
    }
    out
}

/// Levenberg-Marquardt minimization of |f(x)|^2 over the coordinates not
/// flagged in `frozen`.
///
/// Damping is scaled by diag(J^T J). Frozen coordinates are returned
/// bit-for-bit unchanged. `names` labels coordinates in rank-deficiency
/// reports.
pub fn damped_least_squares<F>(
    f: F,
    x0: &[f64],
    frozen: &[bool],
    names: &[String],
    opts: &LmOptions,
) -> Result<LmSolution>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if frozen.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            got: frozen.len(),
        });
    }
    let free: Vec<usize> = (0..x0.len()).filter(|&i| !frozen[i]).collect();
    if free.is_empty() {
        return Err(Error::InvalidArgument("every parameter is frozen".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial point is not finite".into()));
    }
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("residuals at the initial point are not finite".into()));
    }
    let m = r.len();
    let k = free.len();
    if m < k {
        return Err(Error::InvalidArgument(format!(
            "{m} residuals cannot determine {k} free parameters"
        )));
    }
    let mut cost = norm(&r);
    let mut history = vec![cost];
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    let mut jac = jacobian(&f, &x, &r, &free, opts)?;

    loop {
        let rv = DVector::from_column_slice(&r);
        let gradient = jac.transpose() * &rv;
        if gradient.amax() < opts.gradient_tol {
            stop = StopReason::Gradient;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;
        let a = jac.transpose() * &jac;
        let diag_max = a.diagonal().max();
        let mut accepted = false;
        while lambda < 1.0e16 {
            let mut lhs = a.clone();
            for i in 0..k {
                lhs[(i, i)] += lambda * a[(i, i)].max(1e-15 * diag_max);
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&gradient));
            let mut trial = x.clone();
            for (c, &i) in free.iter().enumerate() {
                trial[i] += delta[c];
            }
            let new_r = match f(&trial) {
                Ok(v) if v.iter().all(|z| z.is_finite()) => v,
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let new_cost = norm(&new_r);
            if new_cost < cost {
                let rel = (cost - new_cost) / cost;
                let small_step = free
                    .iter()
                    .enumerate()
                    .all(|(c, &i)| delta[c].abs() <= opts.step_tol * (1.0 + x[i].abs()));
                x = trial;
                r = new_r;
                cost = new_cost;
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < opts.residual_tol && small_step {
                    stop = StopReason::ResidualChange;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            stop = StopReason::Stalled;
            break;
        }
        jac = jacobian(&f, &x, &r, &free, opts)?;
        if stop == StopReason::ResidualChange {
            break;
        }
    }

    let combos = null_space_combinations(&jac, &free, names, opts.rank_tol);
    if !combos.is_empty() {
        return Err(Error::RankDeficient { combinations: combos });
    }
    let a = jac.transpose() * &jac;
    let inv = a
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::RankDeficient {
            combinations: vec!["normal matrix is not positive definite".into()],
        })?;
    let dof = (m - k).max(1) as f64;
    let sigma2 = cost * cost / dof;
    Ok(LmSolution {
        x,
        residuals: r,
        residual_norm: cost,
        iterations,
        converged: stop != StopReason::MaxIterations,
        stop,
        free,
        covariance: inv * sigma2,
        history,
    })
}
