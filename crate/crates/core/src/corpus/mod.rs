//! Record schema for papers, faculty and incumbents, plus the sample and
//! paper-level eligibility filters.

mod filter;
mod io;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::taxonomy::{DisciplineId, SubfieldId};

pub use filter::{
    apply_sample_filters, eligible_papers, EligiblePapers, FilterOutcome, MAX_AUTHORS,
    MAX_WINDOW_PAPERS, MIN_CLASSIFIED_REFS, WINDOW_END, WINDOW_START,
};
pub use io::{
    attach_references, corpus_tables, load_corpus, parse_baselines, parse_incumbents, parse_papers,
    parse_persons, parse_references, universities, write_corpus, CorpusFiles, IngestOptions,
    LoadSummary, ReferenceRow,
};
pub use io::format_real;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: {reason}")]
    MalformedRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("dangling reference to paper `{0}`")]
    DanglingReference(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("no person survives the sample filters")]
    EmptyCohort,
    #[error("non-positive citation baseline for discipline {discipline}, year {year}")]
    InvalidBaseline { discipline: DisciplineId, year: i32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Woman,
    Man,
    Unknown,
}

impl Gender {
    pub fn parse(s: &str) -> Option<Gender> {
        match s {
            "woman" | "w" | "female" | "f" => Some(Gender::Woman),
            "man" | "m" | "male" => Some(Gender::Man),
            "unknown" | "u" | "" => Some(Gender::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Woman => "woman",
            Gender::Man => "man",
            Gender::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One publication.
#[derive(Clone, Debug, PartialEq)]
pub struct Paper {
    pub id: String,
    pub pub_year: i32,
    pub discipline: DisciplineId,
    pub author_count: u32,
    pub citations: u32,
    /// Classified reference counts, sorted by discipline, zero counts dropped.
    pub ref_counts: Vec<(DisciplineId, u32)>,
    /// References that carry an identifier, sorted. Each counts once toward
    /// `ref_counts`.
    pub ref_ids: Vec<(String, DisciplineId)>,
}

impl Paper {
    pub fn new(id: impl Into<String>, pub_year: i32, discipline: DisciplineId) -> Self {
        Paper {
            id: id.into(),
            pub_year,
            discipline,
            author_count: 1,
            citations: 0,
            ref_counts: Vec::new(),
            ref_ids: Vec::new(),
        }
    }

    /// Replaces the reference counts; entries are merged and sorted.
    pub fn with_refs(mut self, refs: impl IntoIterator<Item = (DisciplineId, u32)>) -> Self {
        let mut merged: BTreeMap<DisciplineId, u32> = BTreeMap::new();
        for (d, c) in refs {
            *merged.entry(d).or_default() += c;
        }
        self.ref_counts = merged.into_iter().filter(|&(_, c)| c > 0).collect();
        self
    }

    pub fn classified_refs(&self) -> u32 {
        self.ref_counts.iter().map(|&(_, c)| c).sum()
    }

    /// True when every classified reference carries an identifier.
    pub fn fully_identified(&self) -> bool {
        self.ref_ids.len() as u32 == self.classified_refs()
    }
}

/// Advisor attributes attached to a faculty record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Advisor {
    pub gender: Gender,
    /// Publications in relative years -9..=-5 (the five years before entry).
    pub five_year_pubs: u32,
    /// Years from the advisor's first publication to the student's entry.
    pub seniority_years: u32,
}

/// One newly hired faculty member.
#[derive(Clone, Debug, PartialEq)]
pub struct Person {
    pub id: String,
    pub gender: Gender,
    pub phd_university: String,
    pub phd_subfield: SubfieldId,
    pub grad_year: i32,
    pub placement_university: String,
    pub placement_subfield: SubfieldId,
    pub placement_year: i32,
    pub unique_collaborators: u32,
    pub advisor: Advisor,
    /// Indices into [`Cohort::papers`], ascending.
    pub papers: Vec<usize>,
}

impl Person {
    /// A person with neutral covariates and no papers; placement one year
    /// after graduation.
    pub fn new(
        id: impl Into<String>,
        phd_university: impl Into<String>,
        phd_subfield: SubfieldId,
        grad_year: i32,
        placement_university: impl Into<String>,
        placement_subfield: SubfieldId,
    ) -> Self {
        Person {
            id: id.into(),
            gender: Gender::Unknown,
            phd_university: phd_university.into(),
            phd_subfield,
            grad_year,
            placement_university: placement_university.into(),
            placement_subfield,
            placement_year: grad_year + 1,
            unique_collaborators: 0,
            advisor: Advisor {
                gender: Gender::Unknown,
                five_year_pubs: 0,
                seniority_years: 0,
            },
            papers: Vec::new(),
        }
    }

    /// Papers with their year relative to graduation.
    pub fn papers<'a>(&'a self, cohort: &'a Cohort) -> impl Iterator<Item = (&'a Paper, i32)> + 'a {
        self.papers.iter().map(move |&i| {
            let p = &cohort.papers[i];
            (p, p.pub_year - self.grad_year)
        })
    }

    pub fn is_stayer(&self) -> bool {
        self.phd_subfield == self.placement_subfield
    }
}

/// Existing faculty registered at a (university, subfield) over a span of years.
#[derive(Clone, Debug, PartialEq)]
pub struct Incumbent {
    pub id: String,
    pub university: String,
    pub subfield: SubfieldId,
    pub first_year: i32,
    pub last_year: i32,
    pub papers: Vec<usize>,
}

impl Incumbent {
    pub fn registered_in(&self, year: i32) -> bool {
        (self.first_year..=self.last_year).contains(&year)
    }
}

/// Immutable, validated corpus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cohort {
    pub persons: Vec<Person>,
    /// Paper store, sorted by id; shared between filtered views.
    pub papers: Arc<Vec<Paper>>,
    pub incumbents: Arc<Vec<Incumbent>>,
    /// Mean citations per (discipline, year), strictly positive.
    pub baselines: Arc<BTreeMap<(DisciplineId, i32), f64>>,
    paper_index: Arc<HashMap<String, usize>>,
}

/// Person record whose papers are still named by id.
#[derive(Clone, Debug, PartialEq)]
pub struct PersonRecord {
    pub person: Person,
    pub paper_ids: Vec<String>,
}

/// Incumbent record whose papers are still named by id.
#[derive(Clone, Debug, PartialEq)]
pub struct IncumbentRecord {
    pub incumbent: Incumbent,
    pub paper_ids: Vec<String>,
}

impl Cohort {
    /// Assembles a cohort, resolving paper ids and sorting every table by id
    /// so the result does not depend on input order.
    pub fn assemble(
        persons: Vec<PersonRecord>,
        mut papers: Vec<Paper>,
        incumbents: Vec<IncumbentRecord>,
        baselines: BTreeMap<(DisciplineId, i32), f64>,
    ) -> Result<Cohort, CorpusError> {
        for (&(discipline, year), &mean) in &baselines {
            if !(mean > 0.0 && mean.is_finite()) {
                return Err(CorpusError::InvalidBaseline { discipline, year });
            }
        }
        papers.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = papers.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(CorpusError::DuplicateId(w[0].id.clone()));
        }
        let paper_index: HashMap<String, usize> = papers
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect();
        let resolve = |ids: &[String]| -> Result<Vec<usize>, CorpusError> {
            let mut out = ids
                .iter()
                .map(|id| {
                    paper_index
                        .get(id)
                        .copied()
                        .ok_or_else(|| CorpusError::DanglingReference(id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.sort_unstable();
            out.dedup();
            Ok(out)
        };

        let mut resolved_persons = Vec::with_capacity(persons.len());
        for rec in persons {
            let mut person = rec.person;
            person.papers = resolve(&rec.paper_ids)?;
            resolved_persons.push(person);
        }
        resolved_persons.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = resolved_persons.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(CorpusError::DuplicateId(w[0].id.clone()));
        }

        let mut resolved_incumbents = Vec::with_capacity(incumbents.len());
        for rec in incumbents {
            let mut inc = rec.incumbent;
            inc.papers = resolve(&rec.paper_ids)?;
            resolved_incumbents.push(inc);
        }
        resolved_incumbents.sort_by(|a, b| {
            (&a.id, &a.university, a.subfield, a.first_year).cmp(&(
                &b.id,
                &b.university,
                b.subfield,
                b.first_year,
            ))
        });

        Ok(Cohort {
            persons: resolved_persons,
            papers: Arc::new(papers),
            incumbents: Arc::new(resolved_incumbents),
            baselines: Arc::new(baselines),
            paper_index: Arc::new(paper_index),
        })
    }

    pub fn paper(&self, id: &str) -> Option<&Paper> {
        self.paper_index.get(id).map(|&i| &self.papers[i])
    }

    pub fn person(&self, id: &str) -> Option<&Person> {
        self.persons
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.persons[i])
    }

    /// Returns a view sharing the paper store but holding only `persons`.
    pub fn with_persons(&self, persons: Vec<Person>) -> Cohort {
        Cohort {
            persons,
            papers: self.papers.clone(),
            incumbents: self.incumbents.clone(),
            baselines: self.baselines.clone(),
            paper_index: self.paper_index.clone(),
        }
    }

    /// Range of publication years in the store.
    pub fn year_range(&self) -> Option<(i32, i32)> {
        let min = self.papers.iter().map(|p| p.pub_year).min()?;
        let max = self.papers.iter().map(|p| p.pub_year).max()?;
        Some((min, max))
    }

    pub fn baseline(&self, discipline: DisciplineId, year: i32) -> Option<f64> {
        self.baselines.get(&(discipline, year)).copied()
    }
}

/// Incremental construction of a [`Cohort`].
#[derive(Clone, Debug, Default)]
pub struct CohortBuilder {
    persons: Vec<PersonRecord>,
    papers: Vec<Paper>,
    incumbents: Vec<IncumbentRecord>,
    baselines: BTreeMap<(DisciplineId, i32), f64>,
}

impl CohortBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn paper(&mut self, paper: Paper) -> &mut Self {
        self.papers.push(paper);
        self
    }

    pub fn person<I, S>(&mut self, person: Person, paper_ids: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.persons.push(PersonRecord {
            person,
            paper_ids: paper_ids.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn incumbent<I, S>(&mut self, incumbent: Incumbent, paper_ids: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.incumbents.push(IncumbentRecord {
            incumbent,
            paper_ids: paper_ids.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn baseline(&mut self, discipline: DisciplineId, year: i32, mean: f64) -> &mut Self {
        self.baselines.insert((discipline, year), mean);
        self
    }

    pub fn build(self) -> Result<Cohort, CorpusError> {
        Cohort::assemble(self.persons, self.papers, self.incumbents, self.baselines)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(i: u32) -> DisciplineId {
        DisciplineId::new(i).unwrap()
    }

    #[test]
    fn with_refs_merges_and_sorts() {
        let p = Paper::new("p", 2010, d(3)).with_refs([(d(9), 2), (d(3), 1), (d(9), 1), (d(4), 0)]);
        assert_eq!(p.ref_counts, vec![(d(3), 1), (d(9), 3)]);
        assert_eq!(p.classified_refs(), 4);
        assert!(!p.fully_identified());
    }

    #[test]
    fn assemble_rejects_duplicate_papers() {
        let papers = vec![Paper::new("a", 2000, d(1)), Paper::new("a", 2001, d(2))];
        let err = Cohort::assemble(vec![], papers, vec![], BTreeMap::new()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn assemble_rejects_zero_baseline() {
        let mut baselines = BTreeMap::new();
        baselines.insert((d(1), 2000), 0.0);
        let err = Cohort::assemble(vec![], vec![], vec![], baselines).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidBaseline { .. }));
    }
}
