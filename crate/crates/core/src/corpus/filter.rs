//! Paper eligibility and sample filters.

use super::{Cohort, CorpusError, Paper, Person};

/// Papers with more authors than this are dropped.
pub const MAX_AUTHORS: u32 = 10;
/// First relative year of the Ph.D. window (inclusive).
pub const WINDOW_START: i32 = -4;
/// Last relative year of the Ph.D. window (inclusive).
pub const WINDOW_END: i32 = 1;
/// A paper needs this many classified references to receive a score.
pub const MIN_CLASSIFIED_REFS: u32 = 5;
/// Persons with more window papers than this are treated as outliers.
pub const MAX_WINDOW_PAPERS: usize = 20;
/// Largest allowed gap between graduation and first faculty appearance.
pub const MAX_PLACEMENT_GAP: i32 = 6;

/// Ph.D.-window papers of one person, as indices into the paper store.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EligiblePapers {
    /// Papers with at most [`MAX_AUTHORS`] authors inside the window.
    pub productivity: Vec<usize>,
    /// The subset of `productivity` with enough classified references.
    pub idr: Vec<usize>,
}

pub fn in_window(relative_year: i32) -> bool {
    (WINDOW_START..=WINDOW_END).contains(&relative_year)
}

pub fn scorable(paper: &Paper) -> bool {
    paper.classified_refs() >= MIN_CLASSIFIED_REFS
}

pub fn eligible_papers(person: &Person, cohort: &Cohort) -> EligiblePapers {
    let mut out = EligiblePapers::default();
    for &i in &person.papers {
        let paper = &cohort.papers[i];
        if paper.author_count > MAX_AUTHORS || !in_window(paper.pub_year - person.grad_year) {
            continue;
        }
        out.productivity.push(i);
        if scorable(paper) {
            out.idr.push(i);
        }
    }
    out
}

/// Result of [`apply_sample_filters`].
#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutcome {
    pub cohort: Cohort,
    pub removed_no_scorable_papers: usize,
    pub removed_outliers: usize,
    pub removed_placement_gap: usize,
}

/// Keeps persons who graduated at most six years before their first
/// appointment, have at least one scorable window paper, and have no more
/// than [`MAX_WINDOW_PAPERS`] window papers.
pub fn apply_sample_filters(cohort: &Cohort) -> Result<FilterOutcome, CorpusError> {
    let mut kept = Vec::with_capacity(cohort.persons.len());
    let (mut gap, mut none, mut outliers) = (0, 0, 0);
    for person in &cohort.persons {
        let lag = person.placement_year - person.grad_year;
        if !(0..=MAX_PLACEMENT_GAP).contains(&lag) {
            gap += 1;
            continue;
        }
        let eligible = eligible_papers(person, cohort);
        if eligible.idr.is_empty() {
            none += 1;
        } else if eligible.productivity.len() > MAX_WINDOW_PAPERS {
            outliers += 1;
        } else {
            kept.push(person.clone());
        }
    }
    if kept.is_empty() {
        return Err(CorpusError::EmptyCohort);
    }
    Ok(FilterOutcome {
        cohort: cohort.with_persons(kept),
        removed_no_scorable_papers: none,
        removed_outliers: outliers,
        removed_placement_gap: gap,
    })
}
