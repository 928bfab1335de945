//! Multinomial logit against a reference category, fitted by Newton's method.

use nalgebra::{DMatrix, DVector};

use super::glm::{GRADIENT_TOLERANCE, SEPARATION_LIMIT};
use super::{weighted_gram, xt_vec, DesignMatrix, Family, FitResult, Response, StatsError};
use crate::linalg::spd_solve_inverse;

const MAX_ITERATIONS: usize = 100;

struct State {
    /// Row-major n × K probabilities, column 0 the reference.
    probs: Vec<f64>,
    loglik: f64,
}

fn evaluate(design: &DesignMatrix, beta: &[f64], codes: &[usize], k: usize) -> State {
    let p = design.p;
    let mut probs = vec![0.0; design.n * k];
    let mut loglik = 0.0;
    let mut eta = vec![0.0; k];
    for i in 0..design.n {
        let row = design.row(i);
        eta[0] = 0.0;
        for c in 1..k {
            eta[c] = row.iter().zip(&beta[(c - 1) * p..c * p]).map(|(x, b)| x * b).sum();
        }
        let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = eta.iter().map(|e| (e - m).exp()).sum();
        let lse = m + z.ln();
        for c in 0..k {
            probs[i * k + c] = (eta[c] - lse).exp();
        }
        loglik += eta[codes[i]] - lse;
    }
    State { probs, loglik }
}

/// Fits `log(π_k / π_ref) = x β_k` for every non-reference outcome. The
/// design response must be categorical; `reference` defaults to its first
/// level.
pub fn fit_multinomial(design: &DesignMatrix, reference: Option<&str>) -> Result<FitResult, StatsError> {
    let Response::Categorical { values, levels } = &design.response else {
        return Err(StatsError::InvalidResponse("categorical response required".into()));
    };
    let mut levels = levels.clone();
    if let Some(r) = reference {
        let pos = levels
            .iter()
            .position(|l| l == r)
            .ok_or_else(|| StatsError::InvalidResponse(format!("reference level `{r}` not present")))?;
        let l = levels.remove(pos);
        levels.insert(0, l);
    }
    let k = levels.len();
    if k < 2 {
        return Err(StatsError::InvalidResponse("need at least two outcome levels".into()));
    }
    let codes: Vec<usize> = values
        .iter()
        .map(|v| levels.iter().position(|l| l == v).expect("level listed"))
        .collect();
    let p = design.p;
    let dim = (k - 1) * p;
    if design.n <= dim {
        return Err(StatsError::InsufficientData(format!("{} rows for {dim} parameters", design.n)));
    }

    let mut beta = vec![0.0; dim];
    if let Some(j) = design.column_index("(Intercept)") {
        let mut counts = vec![0usize; k];
        codes.iter().for_each(|&c| counts[c] += 1);
        for c in 1..k {
            if counts[c] > 0 && counts[0] > 0 {
                beta[(c - 1) * p + j] = (counts[c] as f64 / counts[0] as f64).ln();
            }
        }
    }

    let mut state = evaluate(design, &beta, &codes, k);
    let mut iterations = 0;
    loop {
        let mut grad = Vec::with_capacity(dim);
        for c in 1..k {
            let r: Vec<f64> = (0..design.n)
                .map(|i| f64::from(u8::from(codes[i] == c)) - state.probs[i * k + c])
                .collect();
            grad.extend(xt_vec(design, &r));
        }
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));

        let mut info = DMatrix::zeros(dim, dim);
        for a in 1..k {
            for b in 1..=a {
                let w: Vec<f64> = (0..design.n)
                    .map(|i| {
                        let pa = state.probs[i * k + a];
                        let pb = state.probs[i * k + b];
                        if a == b { pa * (1.0 - pa) } else { -pa * pb }
                    })
                    .collect();
                let block = weighted_gram(design, &w);
                info.view_mut(((a - 1) * p, (b - 1) * p), (p, p)).copy_from(&block);
                if a != b {
                    info.view_mut(((b - 1) * p, (a - 1) * p), (p, p)).copy_from(&block.transpose());
                }
            }
        }
        let (step, inverse) =
            spd_solve_inverse(info, &DVector::from_vec(grad)).map_err(|_| StatsError::Collinearity)?;
        if gnorm <= GRADIENT_TOLERANCE {
            return Ok(FitResult {
                family: Family::Multinomial,
                names: design.names.clone(),
                outcomes: levels[1..].to_vec(),
                reference: Some(levels[0].clone()),
                beta,
                covariance: inverse,
                objective: state.loglik,
                converged: true,
                iterations,
                n_obs: design.n,
                tau: None,
            });
        }
        if iterations >= MAX_ITERATIONS {
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
            let next = evaluate(design, &trial, &codes, k);
            if next.loglik.is_finite() && next.loglik >= state.loglik - 1e-10 * (1.0 + state.loglik.abs()) {
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
            return Err(StatsError::Separation(format!(
                "{}/{}",
                levels[1 + j / p],
                design.names[j % p]
            )));
        }
        beta = trial;
        state = next;
    }
}
