//! Rao-Stirling interdisciplinarity of papers and of Ph.D. careers.
//!
//! A paper's score is `1 - Σ_ij S_ij p_i p_j`, where `p` are the shares of
//! its classified references per discipline and `S` the similarity matrix of
//! its publication year. References to disciplines that are inactive in that
//! year have a zero row in `S`, so they count as maximally distant.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{eligible_papers, Cohort, Paper, Person, MIN_CLASSIFIED_REFS};
use crate::similarity::{SimilarityMatrix, SimilaritySet};
use crate::taxonomy::DisciplineId;

#[derive(Debug, Error, PartialEq)]
pub enum IdrError {
    #[error("paper `{paper}` has {found} classified references, need {MIN_CLASSIFIED_REFS}")]
    TooFewReferences { paper: String, found: u32 },
    #[error("person `{0}` has no scorable Ph.D.-window papers")]
    NoEligiblePapers(String),
    #[error("no similarity matrix for year {0}")]
    MissingSimilarity(i32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IdrVariant {
    Paper,
    PersonMedian,
    PersonPooled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdrScore {
    pub value: f64,
    /// Classified references behind the score.
    pub n_refs: u32,
    /// Papers behind the score (1 for a paper score).
    pub n_papers: usize,
    pub variant: IdrVariant,
}

/// `1 - Σ S_ij p_i p_j` over the support of `counts`.
pub fn rao_stirling(counts: &[(DisciplineId, u32)], s: &SimilarityMatrix) -> f64 {
    let total: u32 = counts.iter().map(|&(_, c)| c).sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let mut concentration = 0.0;
    for &(i, ci) in counts {
        let row = s.row(i);
        let pi = ci as f64 / total;
        let mut inner = 0.0;
        for &(j, cj) in counts {
            inner += row[j.index()] * (cj as f64 / total);
        }
        concentration += pi * inner;
    }
    (1.0 - concentration).clamp(0.0, 1.0)
}

pub fn paper_idr(paper: &Paper, s: &SimilarityMatrix) -> Result<IdrScore, IdrError> {
    let n_refs = paper.classified_refs();
    if n_refs < MIN_CLASSIFIED_REFS {
        return Err(IdrError::TooFewReferences {
            paper: paper.id.clone(),
            found: n_refs,
        });
    }
    Ok(IdrScore {
        value: rao_stirling(&paper.ref_counts, s),
        n_refs,
        n_papers: 1,
        variant: IdrVariant::Paper,
    })
}

/// Median with the mean-of-middles rule for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn matrix_for(matrices: &SimilaritySet, year: i32) -> Result<&SimilarityMatrix, IdrError> {
    matrices.get(year).ok_or(IdrError::MissingSimilarity(year))
}

/// Median paper score over the person's scorable window papers.
pub fn phd_idr_median(
    person: &Person,
    cohort: &Cohort,
    matrices: &SimilaritySet,
) -> Result<IdrScore, IdrError> {
    let eligible = eligible_papers(person, cohort);
    if eligible.idr.is_empty() {
        return Err(IdrError::NoEligiblePapers(person.id.clone()));
    }
    let mut values = Vec::with_capacity(eligible.idr.len());
    let mut n_refs = 0;
    for &i in &eligible.idr {
        let paper = &cohort.papers[i];
        let score = paper_idr(paper, matrix_for(matrices, paper.pub_year)?)?;
        n_refs += score.n_refs;
        values.push(score.value);
    }
    Ok(IdrScore {
        value: median(&mut values).expect("nonempty"),
        n_refs,
        n_papers: values.len(),
        variant: IdrVariant::PersonMedian,
    })
}

/// Score of the union of the person's window references, deduplicated by
/// reference id and evaluated with the graduation-year matrix. Papers whose
/// references lack ids contribute their counts as-is.
pub fn phd_idr_pooled(
    person: &Person,
    cohort: &Cohort,
    matrices: &SimilaritySet,
) -> Result<IdrScore, IdrError> {
    let eligible = eligible_papers(person, cohort);
    if eligible.idr.is_empty() {
        return Err(IdrError::NoEligiblePapers(person.id.clone()));
    }
    let s = matrix_for(matrices, person.grad_year)?;
    let mut unique: BTreeMap<&str, DisciplineId> = BTreeMap::new();
    let mut counts: BTreeMap<DisciplineId, u32> = BTreeMap::new();
    let mut missing_ids = 0;
    for &i in &eligible.idr {
        let paper = &cohort.papers[i];
        if paper.fully_identified() {
            for (rid, d) in &paper.ref_ids {
                unique.insert(rid.as_str(), *d);
            }
        } else {
            missing_ids += 1;
            for &(d, c) in &paper.ref_counts {
                *counts.entry(d).or_default() += c;
            }
        }
    }
    if missing_ids > 0 {
        log::warn!(
            "person {}: {missing_ids} paper(s) without reference ids, pooling raw counts",
            person.id
        );
    }
    for d in unique.values() {
        *counts.entry(*d).or_default() += 1;
    }
    let pooled: Vec<(DisciplineId, u32)> = counts.into_iter().collect();
    Ok(IdrScore {
        value: rao_stirling(&pooled, s),
        n_refs: pooled.iter().map(|&(_, c)| c).sum(),
        n_papers: eligible.idr.len(),
        variant: IdrVariant::PersonPooled,
    })
}
