use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{check_inputs, CsError, CsResult, CsSolverConfig, Stopping};

/// Complex soft-threshold: `x · max(0, 1 − t/|x|)`.
pub fn soft_threshold(x: Complex64, t: f64) -> Complex64 {
    let mag = x.norm();
    if mag <= t {
        Complex64::new(0.0, 0.0)
    } else {
        x * (1.0 - t / mag)
    }
}

/// `½‖y − Ax‖² + λ‖x‖₁`.
pub fn objective(a: &DMatrix<Complex64>, y: &[Complex64], x: &[Complex64], lambda: f64) -> f64 {
    let r = DVector::from_column_slice(y) - a * DVector::from_column_slice(x);
    0.5 * r.norm_squared() + lambda * x.iter().map(|c| c.norm()).sum::<f64>()
}

/// Power-iteration estimate of `‖A‖₂²`, the largest eigenvalue of `AᴴA`.
pub fn spectral_norm_sq(a: &DMatrix<Complex64>) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut est = 0.0;
    for _ in 0..1000 {
        let w = a.ad_mul(&(a * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.unscale(norm);
        if (next - est).abs() <= 1e-12 * next {
            return next;
        }
        est = next;
    }
    est
}

struct Problem<'a> {
    a: &'a DMatrix<Complex64>,
    y: DVector<Complex64>,
    step: f64,
}

impl Problem<'_> {
    fn residual(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        &self.y - self.a * x
    }

    fn objective(&self, x: &DVector<Complex64>, lambda: f64) -> f64 {
        0.5 * self.residual(x).norm_squared() + lambda * x.iter().map(|c| c.norm()).sum::<f64>()
    }

    fn prox_step(&self, z: &DVector<Complex64>, lambda: f64) -> DVector<Complex64> {
        let grad = self.a.ad_mul(&(self.a * z - &self.y));
        (z - grad * Complex64::new(self.step, 0.0)).map(|c| soft_threshold(c, lambda * self.step))
    }

    /// Accelerated iterations from `x0` with function-value restart, so the
    /// objective never increases between accepted iterates.
    fn solve(&self, x0: DVector<Complex64>, lambda: f64, budget: usize, tol: f64) -> (DVector<Complex64>, usize, bool) {
        let mut x = x0;
        let mut z = x.clone();
        let mut t = 1.0f64;
        let mut f = self.objective(&x, lambda);
        for it in 1..=budget {
            let mut next = self.prox_step(&z, lambda);
            let mut f_next = self.objective(&next, lambda);
            if f_next > f {
                t = 1.0;
                next = self.prox_step(&x, lambda);
                f_next = self.objective(&next, lambda);
            }
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let momentum = Complex64::new((t - 1.0) / t_next, 0.0);
            z = &next + (&next - &x) * momentum;
            let change = (f - f_next).abs();
            x = next;
            f = f_next.min(f);
            t = t_next;
            if change < tol {
                return (x, it, true);
            }
        }
        (x, budget, false)
    }
}

/// FISTA with step `1/L`, where `L` is the power-iteration estimate of
/// `‖Φ‖₂²` inflated by 1e-4 to stay above the true Lipschitz constant.
///
/// [`Stopping::Lambda`] and [`Stopping::RelativeLambda`] solve a single
/// problem. [`Stopping::Epsilon`] halves `λ` from `½‖Φᴴy‖_∞` with warm
/// starts until `‖y − Φx‖ ≤ ε`, flagging the result not converged if the
/// iteration budget runs out first.
pub fn fista(a: &DMatrix<Complex64>, y: &[Complex64], config: &CsSolverConfig) -> Result<CsResult, CsError> {
    config.validate()?;
    let yv = check_inputs(a, y)?;
    let n = a.ncols();
    let zero = DVector::<Complex64>::zeros(n);
    let l = spectral_norm_sq(a) * 1.0001;
    let corr_max = a.ad_mul(&yv).iter().map(|c| c.norm()).fold(0.0, f64::max);
    if l == 0.0 || corr_max == 0.0 {
        return Ok(finish(a, &yv, zero, 0, true));
    }
    let p = Problem { a, y: yv, step: 1.0 / l };

    let (x, iterations, converged) = match config.stopping {
        Stopping::Lambda(lambda) => p.solve(zero, lambda, config.max_iterations, config.tolerance),
        Stopping::RelativeLambda(frac) => p.solve(zero, frac * corr_max, config.max_iterations, config.tolerance),
        Stopping::Epsilon(eps) => {
            let mut lambda = 0.5 * corr_max;
            let mut x = zero;
            let mut used = 0;
            loop {
                let (next, it, _) = p.solve(x, lambda, config.max_iterations - used, config.tolerance);
                x = next;
                used += it;
                if p.residual(&x).norm() <= eps {
                    break (x, used, true);
                }
                if used >= config.max_iterations || lambda < 1e-12 * corr_max {
                    break (x, used, false);
                }
                lambda *= 0.5;
            }
        }
        Stopping::Sparsity(_) => {
            return Err(CsError::Config("the proximal solver needs a lambda or epsilon rule".into()))
        }
    };
    Ok(finish(a, &p.y, x, iterations, converged))
}

fn finish(a: &DMatrix<Complex64>, y: &DVector<Complex64>, x: DVector<Complex64>, iterations: usize, converged: bool) -> CsResult {
    let residual_norm = (y - a * &x).norm();
    let support = (0..x.len()).filter(|&j| x[j] != Complex64::new(0.0, 0.0)).collect();
    CsResult {
        estimate: x.as_slice().to_vec(),
        iterations,
        residual_norm,
        converged,
        rank_deficient: false,
        support,
    }
}
