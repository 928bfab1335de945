//! Two-sample tests, correlation, bootstrap intervals and LOWESS.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_difference: f64,
}

/// Welch two-sample t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientData("each group needs two values".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let (t, p) = if diff == 0.0 { (0.0, 1.0) } else { (diff.signum() * f64::INFINITY, 0.0) };
        return Ok(TTest {
            t,
            df: na + nb - 2.0,
            p,
            mean_difference: diff,
        });
    }
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let t = diff / se2.sqrt();
    Ok(TTest {
        t,
        df,
        p: t_two_sided(t, df),
        mean_difference: diff,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

/// Pearson correlation with a two-sided t-test p-value.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(StatsError::InsufficientData("need at least three paired values".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::InsufficientData("a series is constant".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = x.len() as f64 - 2.0;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation { r, p, n: x.len() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapCi {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Linear-interpolated quantile of sorted values.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval of `statistic` at `level` (e.g. 0.95).
/// Replicate `b` draws from ChaCha8 stream `b` of `seed`.
pub fn bootstrap_ci<F>(data: &[f64], statistic: F, replicates: usize, level: f64, seed: u64) -> Result<BootstrapCi, StatsError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if data.len() < 2 || replicates < 2 {
        return Err(StatsError::InsufficientData("bootstrap needs two values and two replicates".into()));
    }
    let n = data.len();
    let mut reps: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let sample: Vec<f64> = (0..n).map(|_| data[rng.random_range(0..n)]).collect();
            statistic(&sample)
        })
        .collect();
    reps.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        estimate: statistic(data),
        lower: sorted_quantile(&reps, alpha),
        upper: sorted_quantile(&reps, 1.0 - alpha),
    })
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        (1.0 - u * u * u).powi(3)
    }
}

fn bisquare(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        (1.0 - u * u).powi(2)
    }
}

/// LOWESS smoothing: local linear fits over the `ceil(frac · n)` nearest
/// neighbours with tricube weights, followed by `iterations` bisquare
/// robustness passes. Returns fitted values in input order.
pub fn lowess(x: &[f64], y: &[f64], frac: f64, iterations: usize) -> Result<Vec<f64>, StatsError> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(StatsError::InsufficientData("lowess needs at least three points".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let k = ((frac * n as f64).ceil() as usize).clamp(2, n);

    let mut robust = vec![1.0; n];
    let mut fitted = vec![0.0; n];
    for pass in 0..=iterations {
        let mut lo = 0;
        for i in 0..n {
            while lo + k < n && xs[lo + k] - xs[i] < xs[i] - xs[lo] {
                lo += 1;
            }
            let hi = lo + k - 1;
            let h = (xs[i] - xs[lo]).max(xs[hi] - xs[i]);
            let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in lo..=hi {
                let u = if h > 0.0 { (xs[j] - xs[i]).abs() / (h * 1.000_000_1) } else { 0.0 };
                let w = tricube(u) * robust[j];
                sw += w;
                swx += w * xs[j];
                swy += w * ys[j];
                swxx += w * xs[j] * xs[j];
                swxy += w * xs[j] * ys[j];
            }
            fitted[i] = if sw <= 0.0 {
                ys[i]
            } else {
                let mx = swx / sw;
                let my = swy / sw;
                let sxx = swxx / sw - mx * mx;
                if sxx > 1e-12 * (1.0 + mx * mx) {
                    let slope = (swxy / sw - mx * my) / sxx;
                    my + slope * (xs[i] - mx)
                } else {
                    my
                }
            };
        }
        if pass == iterations {
            break;
        }
        let resid: Vec<f64> = ys.iter().zip(&fitted).map(|(a, b)| (a - b).abs()).collect();
        let mut sorted = resid.clone();
        sorted.sort_by(f64::total_cmp);
        let s = sorted_quantile(&sorted, 0.5);
        let scale = ys.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        if s <= 1e-12 * scale {
            break;
        }
        for (r, e) in robust.iter_mut().zip(&resid) {
            *r = bisquare(e / (6.0 * s));
        }
    }
    let mut out = vec![0.0; n];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = fitted[pos];
    }
    Ok(out)
}
