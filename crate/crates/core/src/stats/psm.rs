//! Propensity-score radius matching.

use super::glm::logistic;
use super::{build_design, fit_glm, linear_predictor, Family, Formula, Frame, StatsError};

pub const DEFAULT_CALIPER: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// Per-row weights for a reweighted outcome model.
    pub weights: Vec<f64>,
    /// Estimated treatment probabilities.
    pub scores: Vec<f64>,
    pub treated: Vec<bool>,
    pub n_matched_treated: usize,
    pub n_dropped: usize,
    pub caliper: f64,
}

/// Matches each treated row to every control whose propensity score lies
/// within `caliper` (probability scale). Treated rows with a match get
/// weight 1; each control gets `Σ 1/m_t` over the treated rows `t` it
/// matches, where `m_t` is that row's number of matched controls.
///
/// `formula` has the 0/1 treatment column as its response.
pub fn psm_match(frame: &Frame, formula: &Formula, caliper: f64) -> Result<MatchResult, StatsError> {
    let design = build_design(frame, formula)?;
    let treatment = design.y()?;
    let treated: Vec<bool> = treatment.iter().map(|&t| t == 1.0).collect();
    let n_treated = treated.iter().filter(|&&t| t).count();
    if n_treated == 0 || n_treated == treated.len() {
        return Err(StatsError::InsufficientData("both treatment arms must be nonempty".into()));
    }
    let fit = fit_glm(&design, Family::Logistic)?;
    let scores: Vec<f64> = linear_predictor(&design, &fit.beta).into_iter().map(logistic).collect();
    let (weights, n_matched) = radius_weights(&scores, &treated, caliper);
    if n_matched == 0 {
        return Err(StatsError::NoOverlap);
    }
    Ok(MatchResult {
        weights,
        scores,
        treated,
        n_matched_treated: n_matched,
        n_dropped: n_treated - n_matched,
        caliper,
    })
}

/// Radius-matching weights from given scores.
pub fn radius_weights(scores: &[f64], treated: &[bool], caliper: f64) -> (Vec<f64>, usize) {
    let mut controls: Vec<usize> = (0..scores.len()).filter(|&i| !treated[i]).collect();
    controls.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = controls.iter().map(|&i| scores[i]).collect();
    let slack = 1e-12;
    // Difference array over sorted controls.
    let mut diff = vec![0.0; controls.len() + 1];
    let mut weights = vec![0.0; scores.len()];
    let mut matched = 0;
    for i in (0..scores.len()).filter(|&i| treated[i]) {
        let s = scores[i];
        let lo = sorted.partition_point(|&c| c < s - caliper - slack);
        let hi = sorted.partition_point(|&c| c <= s + caliper + slack);
        if hi > lo {
            let share = 1.0 / (hi - lo) as f64;
            diff[lo] += share;
            diff[hi] -= share;
            weights[i] = 1.0;
            matched += 1;
        }
    }
    let mut running = 0.0;
    for (k, &c) in controls.iter().enumerate() {
        running += diff[k];
        weights[c] = running.max(0.0);
    }
    (weights, matched)
}
