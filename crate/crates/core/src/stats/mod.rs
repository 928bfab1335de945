//! Regression and matching suite: design matrices, generalized linear
//! models, multinomial logit, quantile regression, marginal effects,
//! propensity-score matching and descriptive statistics.

use std::io::Write;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub mod descriptives;
pub mod frame;
pub mod glm;
pub mod marginal;
pub mod multinomial;
pub mod psm;
pub mod quantile;

pub use descriptives::{bootstrap_ci, lowess, mean, pearson_r, welch_t, BootstrapCi, Correlation, TTest};
pub use frame::{build_design, Column, DesignMatrix, Factor, Formula, Frame, Response, Term};
pub use glm::{fit_glm, weighted_glm, GlmOptions, GRADIENT_TOLERANCE, SEPARATION_LIMIT};
pub use marginal::{marginal_effect, MarginalEffect, DEFAULT_STEP};
pub use multinomial::fit_multinomial;
pub use psm::{psm_match, MatchResult, DEFAULT_CALIPER};
pub use quantile::{fit_quantile, pinball_loss, QuantileOptions};

/// Two-sided 95% normal critical value.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("missing covariate `{0}`")]
    MissingCovariate(String),
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("formula: {0}")]
    Formula(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("separation: coefficient `{0}` diverges")]
    Separation(String),
    #[error("information matrix is singular (collinear columns)")]
    Collinearity,
    #[error("no convergence after {iterations} iterations (gradient {gradient:e})")]
    NonConvergence { iterations: usize, gradient: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("no treated unit has a control within the caliper")]
    NoOverlap,
    #[error("weights must be nonnegative, finite and not all zero")]
    InvalidWeights,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Logistic,
    Poisson,
    Multinomial,
    Quantile,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
            Family::Multinomial => "multinomial",
            Family::Quantile => "quantile",
        }
    }
}

/// One reported coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient {
    /// Design column name, prefixed by `outcome/` for multinomial fits.
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub family: Family,
    /// Design column names.
    pub names: Vec<String>,
    /// Non-reference outcome levels of a multinomial fit, in block order.
    pub outcomes: Vec<String>,
    pub reference: Option<String>,
    /// Coefficients; multinomial fits store one block of `names.len()` per outcome.
    pub beta: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Log-likelihood for likelihood fits, pinball loss for quantile fits.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    pub tau: Option<f64>,
}

pub(crate) fn normal_p_value(z: f64) -> f64 {
    let normal = Normal::standard();
    if z.is_finite() {
        (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0)
    } else if z.is_nan() {
        f64::NAN
    } else {
        0.0
    }
}

impl FitResult {
    pub fn term_names(&self) -> Vec<String> {
        if self.outcomes.is_empty() {
            self.names.clone()
        } else {
            self.outcomes
                .iter()
                .flat_map(|o| self.names.iter().map(move |n| format!("{o}/{n}")))
                .collect()
        }
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.term_names().iter().position(|t| t == term)
    }

    pub fn coef(&self, term: &str) -> Option<f64> {
        self.index(term).map(|i| self.beta[i])
    }

    pub fn se(&self, term: &str) -> Option<f64> {
        self.index(term).map(|i| self.covariance[(i, i)].max(0.0).sqrt())
    }

    pub fn coefficients(&self) -> Vec<Coefficient> {
        self.term_names()
            .into_iter()
            .enumerate()
            .map(|(i, term)| {
                let estimate = self.beta[i];
                let se = self.covariance[(i, i)].max(0.0).sqrt();
                Coefficient {
                    term,
                    estimate,
                    se,
                    ci_lower: estimate - Z_95 * se,
                    ci_upper: estimate + Z_95 * se,
                    p_value: normal_p_value(estimate / se),
                }
            })
            .collect()
    }

    pub fn coefficient(&self, term: &str) -> Option<Coefficient> {
        self.coefficients().into_iter().find(|c| c.term == term)
    }

    /// Writes `term,estimate,se,ci_lo,ci_hi,p`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "estimate", "se", "ci_lo", "ci_hi", "p"])?;
        for c in self.coefficients() {
            w.write_record([
                c.term,
                crate::corpus::format_real(c.estimate),
                crate::corpus::format_real(c.se),
                crate::corpus::format_real(c.ci_lower),
                crate::corpus::format_real(c.ci_upper),
                crate::corpus::format_real(c.p_value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Symmetric `Xᵀ diag(w) X` for a row-major design, built from the lower
/// triangle.
pub(crate) fn weighted_gram(design: &DesignMatrix, w: &[f64]) -> DMatrix<f64> {
    let p = design.p;
    let mut acc = vec![0.0; p * p];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let row = design.row(i);
        for a in 0..p {
            let ra = row[a] * wi;
            if ra == 0.0 {
                continue;
            }
            let dst = &mut acc[a * p..a * p + a + 1];
            for (d, rb) in dst.iter_mut().zip(&row[..=a]) {
                *d += ra * rb;
            }
        }
    }
    DMatrix::from_fn(p, p, |a, b| if b <= a { acc[a * p + b] } else { acc[b * p + a] })
}

/// `Xᵀ v`.
pub(crate) fn xt_vec(design: &DesignMatrix, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; design.p];
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(design.row(i)) {
            *o += x * vi;
        }
    }
    out
}

pub(crate) fn linear_predictor(design: &DesignMatrix, beta: &[f64]) -> Vec<f64> {
    (0..design.n)
        .map(|i| design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect()
}
