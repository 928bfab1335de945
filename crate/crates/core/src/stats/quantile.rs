//! Linear quantile regression.
//!
//! The pinball loss is piecewise linear, so an optimum sits on a vertex where
//! `p` observations are fitted exactly. A few reweighted least-squares passes
//! on a smoothed loss give a starting point; exact simplex-style pivots
//! between vertices then reach the optimum. Among tied optima the one with
//! the smallest mean fitted value is returned, which for an intercept-only
//! model is the order statistic `y(⌈nτ⌉)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{linear_predictor, weighted_gram, xt_vec, DesignMatrix, Family, FitResult, StatsError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileOptions {
    pub tau: f64,
    /// Bootstrap replicates for standard errors; 0 skips them.
    pub bootstrap: usize,
    pub seed: u64,
}

impl QuantileOptions {
    pub fn new(tau: f64) -> Self {
        QuantileOptions {
            tau,
            bootstrap: 200,
            seed: 0,
        }
    }
}

pub fn pinball_loss(residual: f64, tau: f64) -> f64 {
    if residual >= 0.0 {
        tau * residual
    } else {
        (tau - 1.0) * residual
    }
}

fn total_loss(design: &DesignMatrix, y: &[f64], beta: &[f64], tau: f64) -> f64 {
    linear_predictor(design, beta)
        .iter()
        .zip(y)
        .map(|(f, v)| pinball_loss(v - f, tau))
        .sum()
}

fn weighted_ls(design: &DesignMatrix, y: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let gram = weighted_gram(design, w);
    let wy: Vec<f64> = y.iter().zip(w).map(|(a, b)| a * b).collect();
    let rhs = DVector::from_vec(xt_vec(design, &wy));
    gram.cholesky().map(|c| c.solve(&rhs).iter().copied().collect())
}

/// Approximate minimizer from reweighted least squares.
fn smoothed_start(design: &DesignMatrix, y: &[f64], tau: f64) -> Result<Vec<f64>, StatsError> {
    let mut beta = weighted_ls(design, y, &vec![1.0; design.n]).ok_or(StatsError::Collinearity)?;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let floor = 1e-6 * scale;
    for _ in 0..30 {
        let fitted = linear_predictor(design, &beta);
        let w: Vec<f64> = y
            .iter()
            .zip(&fitted)
            .map(|(v, f)| {
                let r = v - f;
                let side = if r >= 0.0 { tau } else { 1.0 - tau };
                side / r.abs().max(floor)
            })
            .collect();
        match weighted_ls(design, y, &w) {
            Some(b) => beta = b,
            None => break,
        }
    }
    Ok(beta)
}

/// Picks `p` linearly independent rows, preferring small residuals.
fn initial_basis(design: &DesignMatrix, residuals: &[f64]) -> Option<Vec<usize>> {
    let p = design.p;
    let mut order: Vec<usize> = (0..design.n).collect();
    order.sort_by(|&a, &b| residuals[a].abs().total_cmp(&residuals[b].abs()).then(a.cmp(&b)));
    let mut basis = Vec::with_capacity(p);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for i in order {
        let mut v = design.row(i).to_vec();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        for q in &ortho {
            let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            ortho.push(v);
            basis.push(i);
            if basis.len() == p {
                return Some(basis);
            }
        }
    }
    None
}

fn basis_inverse(design: &DesignMatrix, basis: &[usize]) -> Option<DMatrix<f64>> {
    let p = design.p;
    let xh = DMatrix::from_fn(p, p, |r, c| design.row(basis[r])[c]);
    xh.try_inverse()
}

/// One-sided derivative of `ρ_τ(r + t δ)` at `t = 0+`.
fn slope(r: f64, delta: f64, tau: f64, zero: f64) -> f64 {
    if r > zero || (r.abs() <= zero && delta >= 0.0) {
        tau * delta
    } else {
        (tau - 1.0) * delta
    }
}

struct Vertex {
    beta: Vec<f64>,
    pivots: usize,
}

fn solve(design: &DesignMatrix, y: &[f64], tau: f64) -> Result<Vertex, StatsError> {
    let (n, p) = (design.n, design.p);
    let start = smoothed_start(design, y, tau)?;
    let fitted = linear_predictor(design, &start);
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let mut basis = initial_basis(design, &resid).ok_or(StatsError::Collinearity)?;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let zero = 1e-12 * scale;
    let max_pivots = 20 * (n + p) + 1000;

    let mut pivots = 0;
    loop {
        let inv = basis_inverse(design, &basis).ok_or(StatsError::Collinearity)?;
        let yh = DVector::from_fn(p, |r, _| y[basis[r]]);
        let beta: Vec<f64> = (&inv * yh).iter().copied().collect();
        let mut r: Vec<f64> = y
            .iter()
            .zip(linear_predictor(design, &beta))
            .map(|(a, b)| a - b)
            .collect();
        let mut in_basis = vec![usize::MAX; n];
        for (j, &h) in basis.iter().enumerate() {
            r[h] = 0.0;
            in_basis[h] = j;
        }
        // a[i * p + j] = x_i · (column j of the basis inverse).
        let mut a = vec![0.0; n * p];
        for i in 0..n {
            let row = design.row(i);
            for j in 0..p {
                a[i * p + j] = (0..p).map(|k| row[k] * inv[(k, j)]).sum();
            }
        }
        let mut col_sum = vec![0.0; p];
        for i in 0..n {
            for j in 0..p {
                col_sum[j] += a[i * p + j];
            }
        }

        // Best descent edge: (primary slope, secondary slope, j, sign).
        let mut best: Option<(f64, f64, usize, f64)> = None;
        for j in 0..p {
            for s in [1.0, -1.0] {
                let mut prim = 0.0;
                let mut mag = 0.0;
                for i in 0..n {
                    let delta = if in_basis[i] == usize::MAX {
                        -s * a[i * p + j]
                    } else if in_basis[i] == j {
                        -s
                    } else {
                        continue;
                    };
                    prim += slope(r[i], delta, tau, zero);
                    mag += delta.abs();
                }
                let sec = s * col_sum[j];
                let tol = 1e-10 * (1.0 + mag);
                let descent = prim < -tol || (prim.abs() <= tol && sec < -1e-10 * (1.0 + col_sum[j].abs()));
                if !descent {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bp, bs, ..)) => prim < bp - tol || ((prim - bp).abs() <= tol && sec < bs),
                };
                if better {
                    best = Some((prim, sec, j, s));
                }
            }
        }
        let Some((prim0, sec, j, s)) = best else {
            return Ok(Vertex { beta, pivots });
        };
        if pivots >= max_pivots {
            return Err(StatsError::NonConvergence {
                iterations: pivots,
                gradient: prim0.abs(),
            });
        }

        // Walk the kinks along the edge until the loss stops decreasing.
        // Residuals already at zero move away from their kink and never
        // cross another one.
        let mut breaks: Vec<(f64, usize, f64)> = (0..n)
            .filter(|&i| in_basis[i] == usize::MAX && r[i].abs() > zero)
            .filter_map(|i| {
                let delta = -s * a[i * p + j];
                let t = -r[i] / delta;
                (delta != 0.0 && t > 0.0).then_some((t, i, delta.abs()))
            })
            .collect();
        breaks.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut slope_now = prim0;
        let mut entering = None;
        for &(_, i, jump) in &breaks {
            slope_now += jump;
            let tol = 1e-10 * (1.0 + jump + slope_now.abs());
            if slope_now > tol || (slope_now.abs() <= tol && sec >= 0.0) {
                entering = Some(i);
                break;
            }
        }
        let Some(i_new) = entering else {
            return Err(StatsError::NonConvergence {
                iterations: pivots,
                gradient: prim0.abs(),
            });
        };
        basis[j] = i_new;
        pivots += 1;
    }
}

/// Minimizes `Σ ρ_τ(y − Xβ)`. Standard errors come from a seeded pairs
/// bootstrap.
pub fn fit_quantile(design: &DesignMatrix, options: QuantileOptions) -> Result<FitResult, StatsError> {
    let tau = options.tau;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(StatsError::InvalidResponse(format!("tau must lie in (0, 1), got {tau}")));
    }
    let y = design.y()?;
    if design.n <= design.p {
        return Err(StatsError::InsufficientData(format!("{} rows for {} columns", design.n, design.p)));
    }
    let vertex = solve(design, y, tau)?;
    let p = design.p;
    let covariance = if options.bootstrap == 0 {
        DMatrix::from_element(p, p, f64::NAN)
    } else {
        let reps: Vec<Vec<f64>> = (0..options.bootstrap)
            .into_par_iter()
            .filter_map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(b as u64);
                let rows: Vec<usize> = (0..design.n).map(|_| rng.random_range(0..design.n)).collect();
                let sample = design.select(&rows);
                let ys = sample.y().ok()?.to_vec();
                solve(&sample, &ys, tau).ok().map(|v| v.beta)
            })
            .collect();
        let m = reps.len() as f64;
        let mean: Vec<f64> = (0..p).map(|j| reps.iter().map(|r| r[j]).sum::<f64>() / m).collect();
        DMatrix::from_fn(p, p, |a, b| {
            reps.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (m - 1.0)
        })
    };
    Ok(FitResult {
        family: Family::Quantile,
        names: design.names.clone(),
        outcomes: vec![],
        reference: None,
        objective: total_loss(design, y, &vertex.beta, tau),
        beta: vertex.beta,
        covariance,
        converged: true,
        iterations: vertex.pivots,
        n_obs: design.n,
        tau: Some(tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn intercept_only(y: Vec<f64>) -> DesignMatrix {
        let rows = vec![vec![1.0]; y.len()];
        DesignMatrix::from_rows(vec!["(Intercept)".into()], &rows, y)
    }

    fn order_statistic(y: &[f64], tau: f64) -> f64 {
        let mut s = y.to_vec();
        s.sort_by(f64::total_cmp);
        let k = ((tau * s.len() as f64) - 1e-9).ceil() as usize;
        s[k.max(1) - 1]
    }

    fn quick(tau: f64) -> QuantileOptions {
        QuantileOptions {
            tau,
            bootstrap: 0,
            seed: 0,
        }
    }

    #[test]
    fn intercept_matches_order_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [7usize, 10, 100, 101] {
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            for tau in [0.1, 0.25, 0.5, 0.9] {
                let fit = fit_quantile(&intercept_only(y.clone()), quick(tau)).unwrap();
                assert_eq!(fit.beta[0], order_statistic(&y, tau), "n={n} tau={tau}");
            }
        }
    }

    #[test]
    fn noiseless_line_is_exact() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64 * 0.37]).collect();
        let y = rows.iter().map(|r| 2.0 * r[1]).collect();
        let d = DesignMatrix::from_rows(vec!["(Intercept)".into(), "x".into()], &rows, y);
        let fit = fit_quantile(&d, quick(0.5)).unwrap();
        assert!((fit.beta[1] - 2.0).abs() < 1e-6);
        assert!(fit.beta[0].abs() < 1e-6);
    }

    #[test]
    fn beats_least_squares_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![1.0, rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 1.0 + 2.0 * r[1] - r[2] + noise.sample(&mut rng) * (1.0 + r[1]))
            .collect();
        let d = DesignMatrix::from_rows(vec!["(Intercept)".into(), "a".into(), "b".into()], &rows, y.clone());
        let ols = weighted_ls(&d, &y, &vec![1.0; 300]).unwrap();
        for tau in [0.2, 0.5, 0.8] {
            let fit = fit_quantile(&d, quick(tau)).unwrap();
            assert!(fit.objective <= total_loss(&d, &y, &ols, tau) + 1e-9);
            // No coordinate move improves the loss.
            for j in 0..3 {
                for h in [1e-4, -1e-4] {
                    let mut b = fit.beta.clone();
                    b[j] += h;
                    assert!(total_loss(&d, &y, &b, tau) >= fit.objective - 1e-9);
                }
            }
        }
    }

    #[test]
    fn bootstrap_is_seeded() {
        let y: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64).collect();
        let d = intercept_only(y);
        let opts = QuantileOptions {
            tau: 0.5,
            bootstrap: 40,
            seed: 9,
        };
        let a = fit_quantile(&d, opts).unwrap();
        let b = fit_quantile(&d, opts).unwrap();
        assert_eq!(a.covariance, b.covariance);
        assert!(a.covariance[(0, 0)] > 0.0);
        assert!(fit_quantile(&d, QuantileOptions::new(1.0)).is_err());
    }
}
