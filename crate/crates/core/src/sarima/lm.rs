//! Levenberg-Marquardt minimization of a sum of squared residuals with a
//! forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-10,
            xtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// Cost after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LmError {
    /// The residual is non-finite at the starting point.
    BadStart,
    /// These parameters have no influence on the residuals.
    Singular(Vec<usize>),
}

fn sum_squares(r: &[f64]) -> f64 {
    let s: f64 = r.iter().map(|v| v * v).sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Minimizes `||residuals(x)||²` starting from `x0`.
pub fn minimize<F>(residuals: F, x0: &[f64], config: &LmConfig) -> Result<LmOutcome, LmError>
where
    F: Fn(&[f64], &mut Vec<f64>),
{
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut r = Vec::new();
    residuals(&x, &mut r);
    let mut cost = sum_squares(&r);
    if !cost.is_finite() {
        return Err(LmError::BadStart);
    }
    let mut history = vec![cost];
    if k == 0 {
        return Ok(LmOutcome {
            params: x,
            cost,
            iterations: 0,
            history,
            converged: true,
        });
    }

    let m = r.len();
    let mut jac = DMatrix::<f64>::zeros(m, k);
    let mut r_trial = Vec::with_capacity(m);
    let mut lambda: Option<f64> = None;

    for iter in 1..=config.max_iterations {
        for j in 0..k {
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            residuals(&xp, &mut r_trial);
            for i in 0..m {
                jac[(i, j)] = (r_trial[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);

        let max_diag = (0..k).map(|j| a[(j, j)]).fold(0.0, f64::max);
        let dead: Vec<usize> = (0..k)
            .filter(|&j| {
                let d = a[(j, j)];
                !(d.is_finite() && d > 1e-12 * max_diag)
            })
            .collect();
        if !dead.is_empty() || max_diag == 0.0 {
            return Err(LmError::Singular(if dead.is_empty() {
                (0..k).collect()
            } else {
                dead
            }));
        }
        let mut lam = *lambda.get_or_insert(1e-3);

        let mut accepted = None;
        while lam < 1e16 {
            let mut damped = a.clone();
            for j in 0..k {
                damped[(j, j)] += lam * a[(j, j)];
            }
            let Some(chol) = damped.cholesky() else {
                lam *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            residuals(&trial, &mut r_trial);
            let trial_cost = sum_squares(&r_trial);
            if trial_cost < cost {
                accepted = Some((trial, trial_cost, step.norm()));
                lam = (lam / 10.0).max(1e-12);
                break;
            }
            lam *= 10.0;
        }
        lambda = Some(lam);

        let Some((trial, trial_cost, step_norm)) = accepted else {
            // No downhill step at any damping: a local minimum to working precision.
            return Ok(LmOutcome {
                params: x,
                cost,
                iterations: iter,
                history,
                converged: true,
            });
        };
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let reduction = cost - trial_cost;
        debug_assert!(trial_cost <= cost);
        x = trial;
        std::mem::swap(&mut r, &mut r_trial);
        cost = trial_cost;
        history.push(cost);

        if reduction <= config.ftol * cost || step_norm <= config.xtol * (x_norm + config.xtol) {
            return Ok(LmOutcome {
                params: x,
                cost,
                iterations: iter,
                history,
                converged: true,
            });
        }
    }
    Ok(LmOutcome {
        params: x,
        cost,
        iterations: config.max_iterations,
        history,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * (-1.3 * t).exp()).collect();
        let out = minimize(
            |p, r| {
                r.clear();
                r.extend(ts.iter().zip(&ys).map(|(t, y)| p[0] * (-p[1] * t).exp() - y));
            },
            &[1.0, 0.5],
            &LmConfig::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 3.0).abs() < 1e-6, "{:?}", out.params);
        assert!((out.params[1] - 1.3).abs() < 1e-6, "{:?}", out.params);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn reports_inert_parameter() {
        let err = minimize(
            |p, r| {
                r.clear();
                r.extend((0..10).map(|i| p[0] - i as f64));
            },
            &[0.0, 0.0],
            &LmConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, LmError::Singular(vec![1]));
    }

    #[test]
    fn iteration_cap_reported() {
        let out = minimize(
            |p, r| {
                r.clear();
                // Rosenbrock in residual form.
                r.push(10.0 * (p[1] - p[0] * p[0]));
                r.push(1.0 - p[0]);
            },
            &[-1.2, 1.0],
            &LmConfig {
                max_iterations: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
