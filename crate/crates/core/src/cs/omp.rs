use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{check_inputs, CsError, CsResult, CsSolverConfig, Stopping};

/// Orthogonal matching pursuit.
///
/// Each iteration adds the column with the largest normalized correlation
/// `|φⱼᴴ r| / ‖φⱼ‖` and re-solves least squares on the active set. Stops at
/// `k` atoms ([`Stopping::Sparsity`]) or once `‖r‖ ≤ ε`
/// ([`Stopping::Epsilon`]), and in either mode when `‖r‖ ≤ tolerance`.
pub fn omp(a: &DMatrix<Complex64>, y: &[Complex64], config: &CsSolverConfig) -> Result<CsResult, CsError> {
    config.validate()?;
    let y = check_inputs(a, y)?;
    let (m, n) = a.shape();
    let (target_k, epsilon) = match config.stopping {
        Stopping::Sparsity(k) if k <= m => (k, 0.0),
        Stopping::Sparsity(k) => return Err(CsError::Config(format!("sparsity {k} exceeds {m} measurements"))),
        Stopping::Epsilon(e) => (m.min(n), e),
        Stopping::Lambda(_) | Stopping::RelativeLambda(_) => {
            return Err(CsError::Config("the greedy solver needs a sparsity or epsilon rule".into()))
        }
    };
    let col_norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();

    let mut support: Vec<usize> = Vec::new();
    let mut coeffs = DVector::<Complex64>::zeros(0);
    let mut residual = y.clone();
    let mut rnorm = residual.norm();
    let mut rank_deficient = false;
    let mut iterations = 0;
    let done = |rnorm: f64, k: usize| rnorm <= config.tolerance || rnorm <= epsilon || k >= target_k;

    while !done(rnorm, support.len()) && iterations < config.max_iterations {
        let corr = a.ad_mul(&residual);
        let best = (0..n)
            .filter(|j| col_norms[*j] > 0.0 && !support.contains(j))
            .map(|j| (j, corr[j].norm() / col_norms[j]))
            .max_by(|p, q| p.1.total_cmp(&q.1));
        let Some((j, score)) = best else { break };
        if score == 0.0 {
            break;
        }
        support.push(j);
        iterations += 1;

        let sub = a.select_columns(support.iter());
        let svd = sub.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = smax * f64::EPSILON * m.max(support.len()) as f64;
        if svd.singular_values.iter().any(|&s| s <= cutoff) {
            rank_deficient = true;
        }
        coeffs = svd.solve(&y, cutoff).expect("cutoff is nonnegative");
        residual = &y - &sub * &coeffs;
        rnorm = residual.norm();
    }

    let mut estimate = vec![Complex64::new(0.0, 0.0); n];
    for (&j, c) in support.iter().zip(coeffs.iter()) {
        estimate[j] = *c;
    }
    let converged = match config.stopping {
        Stopping::Epsilon(e) => rnorm <= e || rnorm <= config.tolerance,
        _ => support.len() >= target_k || rnorm <= config.tolerance,
    };
    support.sort_unstable();
    Ok(CsResult {
        estimate,
        iterations,
        residual_norm: rnorm,
        converged,
        rank_deficient,
        support,
    })
}
