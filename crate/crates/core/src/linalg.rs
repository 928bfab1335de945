//! Small linear-algebra kernels: a CSR matrix with a Jacobi-preconditioned
//! conjugate gradient solver, and dense symmetric solves used by the model
//! fits.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("conjugate gradient did not reach residual {tolerance:e} in {iterations} iterations (residual {residual:e})")]
    Divergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch")]
    Dimension,
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix from triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet outside matrix");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            cols.push(c);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            *o = self.cols[range.clone()]
                .iter()
                .zip(&self.values[range])
                .map(|(&c, v)| v * x[c])
                .sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let range = self.row_ptr[i]..self.row_ptr[i + 1];
                self.cols[range.clone()]
                    .iter()
                    .zip(&self.values[range])
                    .find(|(&c, _)| c == i)
                    .map_or(0.0, |(_, &v)| v)
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] += self.values[k];
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Euclidean norm of `b - A x` at exit.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A`, stopping once the
/// residual norm is at most `tolerance`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<CgSolution, SolverError> {
    let n = a.dim();
    if b.len() != n {
        return Err(SolverError::Dimension);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = dot(&r, &r).sqrt();
    let mut iterations = 0;
    while residual > tolerance {
        if iterations >= max_iterations {
            return Err(SolverError::Divergence {
                iterations,
                residual,
                tolerance,
            });
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolverError::NotPositiveDefinite);
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;
        // Recompute the true residual now and then to shed drift.
        if iterations % 50 == 0 {
            a.mul_vec(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        residual = dot(&r, &r).sqrt();
    }
    Ok(CgSolution {
        x,
        iterations,
        residual,
    })
}

/// Cholesky solve of a dense symmetric positive definite system, also
/// returning the inverse.
pub fn spd_solve_inverse(
    a: DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>), SolverError> {
    let chol = a.cholesky().ok_or(SolverError::NotPositiveDefinite)?;
    let x = chol.solve(b);
    let inv = chol.inverse();
    if x.iter().any(|v| !v.is_finite()) || inv.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NotPositiveDefinite);
    }
    Ok((x, inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_sums_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 1, 4.0)]);
        let mut out = vec![0.0; 2];
        m.mul_vec(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![3.0, 5.0]);
        assert_eq!(m.diagonal(), vec![3.0, 4.0]);
    }

    #[test]
    fn cg_solves_small_spd() {
        let m = CsrMatrix::from_triplets(
            3,
            vec![
                (0, 0, 4.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        );
        let b = [1.0, 2.0, 3.0];
        let sol = conjugate_gradient(&m, &b, 1e-12, 30).unwrap();
        let dense = m.to_dense().lu().solve(&DVector::from_row_slice(&b)).unwrap();
        for i in 0..3 {
            assert!((sol.x[i] - dense[i]).abs() < 1e-10);
        }
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn cg_reports_divergence_at_cap() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 1e6), (0, 1, 0.5), (1, 0, 0.5)]);
        let err = conjugate_gradient(&m, &[1.0, 1.0], 1e-300, 1).unwrap_err();
        assert!(matches!(err, SolverError::Divergence { iterations: 1, .. }));
    }
}
