//! Logistic and Poisson regression by Newton / iteratively reweighted least
//! squares, with optional prior weights.

use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use super::{linear_predictor, weighted_gram, xt_vec, DesignMatrix, Family, FitResult, StatsError};
use crate::linalg::spd_solve_inverse;

/// A fit is converged once `‖Xᵀ W (y − μ̂)‖∞` is at most this.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// A coefficient beyond this magnitude during iteration signals separation.
pub const SEPARATION_LIMIT: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlmOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            max_iterations: 100,
            tolerance: GRADIENT_TOLERANCE,
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct State {
    mu: Vec<f64>,
    loglik: f64,
}

fn evaluate(family: Family, eta: &[f64], y: &[f64], w: &[f64], log_fact: &[f64]) -> State {
    let mut mu = Vec::with_capacity(eta.len());
    let mut loglik = 0.0;
    for i in 0..eta.len() {
        let e = eta[i];
        match family {
            Family::Logistic => {
                mu.push(logistic(e));
                if w[i] > 0.0 {
                    loglik += w[i] * (y[i] * e - softplus(e));
                }
            }
            _ => {
                let m = e.exp();
                mu.push(m);
                if w[i] > 0.0 {
                    loglik += w[i] * (y[i] * e - m - log_fact[i]);
                }
            }
        }
    }
    State { mu, loglik }
}

fn check_response(family: Family, y: &[f64]) -> Result<(), StatsError> {
    let ok = match family {
        Family::Logistic => y.iter().all(|&v| v == 0.0 || v == 1.0),
        Family::Poisson => y.iter().all(|&v| v >= 0.0 && v.is_finite()),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(StatsError::InvalidResponse(format!(
            "response does not fit the {} family",
            family.as_str()
        )))
    }
}

pub fn fit_glm(design: &DesignMatrix, family: Family) -> Result<FitResult, StatsError> {
    fit_glm_with(design, None, family, GlmOptions::default())
}

pub fn weighted_glm(design: &DesignMatrix, weights: &[f64], family: Family) -> Result<FitResult, StatsError> {
    fit_glm_with(design, Some(weights), family, GlmOptions::default())
}

/// Maximum-likelihood fit. Standard errors come from the inverse
/// information at the optimum; with weights the information is weighted the
/// same way as the likelihood.
pub fn fit_glm_with(
    design: &DesignMatrix,
    weights: Option<&[f64]>,
    family: Family,
    options: GlmOptions,
) -> Result<FitResult, StatsError> {
    let y = design.y()?;
    check_response(family, y)?;
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != design.n || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().all(|&v| v == 0.0) {
                return Err(StatsError::InvalidWeights);
            }
            w.to_vec()
        }
        None => vec![1.0; design.n],
    };
    let n_eff = w.iter().filter(|&&v| v > 0.0).count();
    if n_eff <= design.p {
        return Err(StatsError::InsufficientData(format!(
            "{n_eff} observations for {} columns",
            design.p
        )));
    }
    let log_fact: Vec<f64> = match family {
        Family::Poisson => y.iter().map(|&v| ln_gamma(v + 1.0)).collect(),
        _ => vec![],
    };

    let mut beta = vec![0.0; design.p];
    if let Some(j) = design.column_index("(Intercept)") {
        let total: f64 = w.iter().sum();
        let ybar = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / total;
        beta[j] = match family {
            Family::Logistic => {
                let p = ybar.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
            _ => ybar.max(1e-6).ln(),
        };
    }

    let mut state = evaluate(family, &linear_predictor(design, &beta), y, &w, &log_fact);
    let mut iterations = 0;
    loop {
        let resid: Vec<f64> = (0..design.n).map(|i| w[i] * (y[i] - state.mu[i])).collect();
        let grad = xt_vec(design, &resid);
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let var: Vec<f64> = state
            .mu
            .iter()
            .zip(&w)
            .map(|(&m, &wi)| match family {
                Family::Logistic => wi * m * (1.0 - m),
                _ => wi * m,
            })
            .collect();
        let info = weighted_gram(design, &var);
        let (step, inverse) = spd_solve_inverse(info, &DVector::from_vec(grad))
            .map_err(|_| StatsError::Collinearity)?;
        if gnorm <= options.tolerance {
            return Ok(FitResult {
                family,
                names: design.names.clone(),
                outcomes: vec![],
                reference: None,
                beta,
                covariance: inverse,
                objective: state.loglik,
                converged: true,
                iterations,
                n_obs: n_eff,
                tau: None,
            });
        }
        if iterations >= options.max_iterations {
            return Err(StatsError::NonConvergence {
                iterations,
                gradient: gnorm,
            });
        }
        iterations += 1;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let next = evaluate(family, &linear_predictor(design, &trial), y, &w, &log_fact);
            let slack = 1e-10 * (1.0 + state.loglik.abs());
            if next.loglik.is_finite() && next.loglik >= state.loglik - slack {
                accepted = Some((trial, next));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, next)) = accepted else {
            return Err(StatsError::NonConvergence {
                iterations,
                gradient: gnorm,
            });
        };
        if let Some(j) = trial.iter().position(|b| b.abs() > SEPARATION_LIMIT) {
            return Err(StatsError::Separation(design.names[j].clone()));
        }
        beta = trial;
        state = next;
    }
}
