//! Average discrete marginal effects with delta-method intervals.

use nalgebra::DVector;

use super::glm::logistic;
use super::{normal_p_value, DesignMatrix, Family, FitResult, Frame, StatsError, Z_95};

pub const DEFAULT_STEP: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalEffect {
    pub outcome: String,
    /// Mean change in the predicted outcome when the variable rises by `step`.
    pub effect: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub p_value: f64,
    /// `exp(step · β)` for the variable's own column: an odds ratio for
    /// logistic fits (per outcome against the reference for multinomial
    /// fits) and a rate ratio for Poisson fits.
    pub ratio: Option<f64>,
}

/// Per-row predictions for every outcome and their gradients with respect
/// to the full coefficient vector, averaged over rows.
fn averaged(fit: &FitResult, design: &DesignMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = design.p;
    let dim = fit.beta.len();
    let k = match fit.family {
        Family::Multinomial => fit.outcomes.len() + 1,
        _ => 1,
    };
    let mut value = vec![0.0; k];
    let mut grad = vec![vec![0.0; dim]; k];
    let mut probs = vec![0.0; k];
    for i in 0..design.n {
        let x = design.row(i);
        let dot = |b: &[f64]| x.iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
        match fit.family {
            Family::Multinomial => {
                let eta: Vec<f64> = std::iter::once(0.0)
                    .chain((0..k - 1).map(|c| dot(&fit.beta[c * p..(c + 1) * p])))
                    .collect();
                let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = eta.iter().map(|e| (e - m).exp()).sum();
                for c in 0..k {
                    probs[c] = (eta[c] - m).exp() / z;
                }
                for c in 0..k {
                    value[c] += probs[c];
                    for l in 1..k {
                        let d = probs[c] * (f64::from(u8::from(c == l)) - probs[l]);
                        for (g, xv) in grad[c][(l - 1) * p..l * p].iter_mut().zip(x) {
                            *g += d * xv;
                        }
                    }
                }
            }
            family => {
                let eta = dot(&fit.beta);
                let (v, d) = match family {
                    Family::Logistic => {
                        let m = logistic(eta);
                        (m, m * (1.0 - m))
                    }
                    Family::Poisson => {
                        let m = eta.exp();
                        (m, m)
                    }
                    _ => (eta, 1.0),
                };
                value[0] += v;
                for (g, xv) in grad[0].iter_mut().zip(x) {
                    *g += d * xv;
                }
            }
        }
    }
    let n = design.n as f64;
    value.iter_mut().for_each(|v| *v /= n);
    grad.iter_mut().flatten().for_each(|g| *g /= n);
    (value, grad)
}

/// Average effect of raising `variable` by `step` on every outcome
/// (probabilities for logistic and multinomial fits, expected counts for
/// Poisson, the conditional quantile for quantile fits).
pub fn marginal_effect(
    fit: &FitResult,
    design: &DesignMatrix,
    frame: &Frame,
    variable: &str,
    step: f64,
) -> Result<Vec<MarginalEffect>, StatsError> {
    let shifted = frame.shifted(variable, step)?;
    let moved = design.rebuild(&shifted)?;
    if moved.names != design.names || moved.n != design.n {
        return Err(StatsError::UnknownVariable(variable.to_string()));
    }
    if moved.x == design.x {
        return Err(StatsError::UnknownVariable(variable.to_string()));
    }
    let (v0, g0) = averaged(fit, design);
    let (v1, g1) = averaged(fit, &moved);
    let labels: Vec<String> = match fit.family {
        Family::Multinomial => fit.reference.iter().chain(&fit.outcomes).cloned().collect(),
        _ => vec![design.formula.response.clone().unwrap_or_else(|| "y".into())],
    };
    let own = design.column_index(variable);
    let p = design.p;
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(c, outcome)| {
            let effect = v1[c] - v0[c];
            let g = DVector::from_iterator(g0[c].len(), g1[c].iter().zip(&g0[c]).map(|(a, b)| a - b));
            let var = (g.transpose() * &fit.covariance * &g)[(0, 0)];
            let se = var.max(0.0).sqrt();
            let ratio = match (fit.family, own) {
                (Family::Logistic | Family::Poisson, Some(j)) => Some((step * fit.beta[j]).exp()),
                (Family::Multinomial, Some(j)) if c > 0 => Some((step * fit.beta[(c - 1) * p + j]).exp()),
                _ => None,
            };
            MarginalEffect {
                outcome,
                effect,
                se,
                ci_lower: effect - Z_95 * se,
                ci_upper: effect + Z_95 * se,
                p_value: normal_p_value(effect / se),
                ratio,
            }
        })
        .collect())
}
