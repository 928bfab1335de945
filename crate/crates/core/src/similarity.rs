//! Discipline similarity from reference profiles.
//!
//! For each discipline and publication year, the references made by that
//! discipline's papers form a 144-long share vector. Two disciplines are as
//! similar as the cosine of their vectors.

use std::collections::BTreeMap;
use std::ops::Index;

use rayon::prelude::*;

use crate::corpus::{Cohort, Paper};
use crate::taxonomy::{DisciplineId, N_DISCIPLINES};

/// Nonnegative vector over the 144 disciplines.
#[derive(Clone, Debug, PartialEq)]
pub struct DisciplineVector {
    values: Vec<f64>,
}

impl Default for DisciplineVector {
    fn default() -> Self {
        Self::zeros()
    }
}

impl DisciplineVector {
    pub fn zeros() -> Self {
        DisciplineVector {
            values: vec![0.0; N_DISCIPLINES],
        }
    }

    /// Builds a vector from raw values. Returns `None` if the length is not
    /// 144 or a value is negative or not finite.
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        (values.len() == N_DISCIPLINES && values.iter().all(|v| v.is_finite() && *v >= 0.0))
            .then_some(DisciplineVector { values })
    }

    pub fn from_counts(counts: &[(DisciplineId, u32)]) -> Self {
        let mut v = Self::zeros();
        v.add_counts(counts, 1.0);
        v
    }

    pub fn unit(d: DisciplineId) -> Self {
        let mut v = Self::zeros();
        v.values[d.index()] = 1.0;
        v
    }

    pub fn add_counts(&mut self, counts: &[(DisciplineId, u32)], scale: f64) {
        for &(d, c) in counts {
            self.values[d.index()] += c as f64 * scale;
        }
    }

    pub fn add(&mut self, other: &DisciplineVector, scale: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * scale;
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Rescales to unit sum; a zero vector stays zero.
    pub fn normalized(&self) -> DisciplineVector {
        let total = self.sum();
        if total <= 0.0 {
            return self.clone();
        }
        DisciplineVector {
            values: self.values.iter().map(|v| v / total).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> DisciplineVector {
        DisciplineVector {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, d: DisciplineId) -> f64 {
        self.values[d.index()]
    }

    /// Nonzero entries as (discipline, value).
    pub fn support(&self) -> impl Iterator<Item = (DisciplineId, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (DisciplineId::from_index(i).unwrap(), v))
    }
}

impl Index<usize> for DisciplineVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Cosine similarity; `defined` is false when either vector is zero, in
/// which case `value` is 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cosine {
    pub value: f64,
    pub defined: bool,
}

pub fn cosine(u: &DisciplineVector, v: &DisciplineVector) -> Cosine {
    cosine_slices(&u.values, &v.values)
}

pub(crate) fn cosine_slices(u: &[f64], v: &[f64]) -> Cosine {
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Cosine {
            value: 0.0,
            defined: false,
        };
    }
    Cosine {
        value: (dot / (uu.sqrt() * vv.sqrt())).clamp(0.0, 1.0),
        defined: true,
    }
}

/// Which papers feed the vector of a (discipline, year).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VectorWindow {
    /// Papers published in that year only.
    #[default]
    WithinYear,
    /// Papers published in that year or earlier.
    PooledToDate,
}

/// Reference share vector of discipline `discipline`'s papers in `year`.
pub fn discipline_vector(cohort: &Cohort, discipline: DisciplineId, year: i32) -> DisciplineVector {
    let mut v = DisciplineVector::zeros();
    for p in cohort.papers.iter() {
        if p.discipline == discipline && p.pub_year == year {
            v.add_counts(&p.ref_counts, 1.0);
        }
    }
    v.normalized()
}

/// Pairwise similarity of the 144 disciplines for one year.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    pub year: i32,
    entries: Vec<f64>,
    active: Vec<bool>,
}

impl SimilarityMatrix {
    /// Builds the matrix from per-discipline vectors (any scale).
    pub fn from_vectors(year: i32, vectors: &[DisciplineVector]) -> Self {
        assert_eq!(vectors.len(), N_DISCIPLINES);
        let n = N_DISCIPLINES;
        let active: Vec<bool> = vectors.iter().map(|v| !v.is_zero()).collect();
        let shares: Vec<DisciplineVector> = vectors.iter().map(|v| v.normalized()).collect();
        let norms: Vec<f64> = shares
            .iter()
            .map(|v| v.values.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            if !active[i] {
                continue;
            }
            entries[i * n + i] = 1.0;
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let dot: f64 = shares[i]
                    .values
                    .iter()
                    .zip(&shares[j].values)
                    .map(|(a, b)| a * b)
                    .sum();
                let s = (dot / (norms[i] * norms[j])).clamp(0.0, 1.0);
                entries[i * n + j] = s;
                entries[j * n + i] = s;
            }
        }
        SimilarityMatrix {
            year,
            entries,
            active,
        }
    }

    /// Builds a matrix directly from entries (row-major 144×144). Used for
    /// hand-constructed fixtures; a discipline is active when its diagonal is
    /// positive.
    pub fn from_entries(year: i32, entries: Vec<f64>) -> Option<Self> {
        if entries.len() != N_DISCIPLINES * N_DISCIPLINES {
            return None;
        }
        let active = (0..N_DISCIPLINES)
            .map(|i| entries[i * N_DISCIPLINES + i] > 0.0)
            .collect();
        Some(SimilarityMatrix {
            year,
            entries,
            active,
        })
    }

    pub fn get(&self, i: DisciplineId, j: DisciplineId) -> f64 {
        self.entries[i.index() * N_DISCIPLINES + j.index()]
    }

    pub fn row(&self, i: DisciplineId) -> &[f64] {
        let start = i.index() * N_DISCIPLINES;
        &self.entries[start..start + N_DISCIPLINES]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_active(&self, d: DisciplineId) -> bool {
        self.active[d.index()]
    }

    pub fn active(&self) -> impl Iterator<Item = DisciplineId> + '_ {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| DisciplineId::from_index(i).unwrap())
    }
}

/// Raw reference counts per citing discipline for each year.
fn year_counts<'a>(papers: impl Iterator<Item = &'a Paper>) -> BTreeMap<i32, Vec<DisciplineVector>> {
    let mut out: BTreeMap<i32, Vec<DisciplineVector>> = BTreeMap::new();
    for p in papers {
        if p.ref_counts.is_empty() {
            continue;
        }
        let vs = out
            .entry(p.pub_year)
            .or_insert_with(|| vec![DisciplineVector::zeros(); N_DISCIPLINES]);
        vs[p.discipline.index()].add_counts(&p.ref_counts, 1.0);
    }
    out
}

pub fn similarity_matrix(cohort: &Cohort, year: i32) -> SimilarityMatrix {
    let vectors: Vec<DisciplineVector> = DisciplineId::all()
        .map(|d| discipline_vector(cohort, d, year))
        .collect();
    SimilarityMatrix::from_vectors(year, &vectors)
}

/// Similarity matrices for every publication year in a corpus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimilaritySet {
    matrices: BTreeMap<i32, SimilarityMatrix>,
}

impl SimilaritySet {
    pub fn build(cohort: &Cohort) -> Self {
        Self::build_with(cohort, VectorWindow::WithinYear)
    }

    pub fn build_with(cohort: &Cohort, window: VectorWindow) -> Self {
        let mut counts = year_counts(cohort.papers.iter());
        if window == VectorWindow::PooledToDate {
            let mut running = vec![DisciplineVector::zeros(); N_DISCIPLINES];
            for vs in counts.values_mut() {
                for (r, v) in running.iter_mut().zip(vs.iter_mut()) {
                    r.add(v, 1.0);
                    *v = r.clone();
                }
            }
        }
        let matrices = counts
            .into_par_iter()
            .map(|(year, vs)| (year, SimilarityMatrix::from_vectors(year, &vs)))
            .collect();
        SimilaritySet { matrices }
    }

    pub fn from_matrices(matrices: impl IntoIterator<Item = SimilarityMatrix>) -> Self {
        SimilaritySet {
            matrices: matrices.into_iter().map(|m| (m.year, m)).collect(),
        }
    }

    pub fn get(&self, year: i32) -> Option<&SimilarityMatrix> {
        self.matrices.get(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.matrices.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}
