//! Research alignment between new hires and incumbent faculty.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::{eligible_papers, Cohort, Incumbent, Person};
use crate::similarity::{cosine, DisciplineVector};
use crate::taxonomy::SubfieldId;

/// Incumbent publications are taken from this many years before the
/// evaluation year.
pub const INCUMBENT_LOOKBACK: i32 = 5;

#[derive(Debug, Error, PartialEq)]
pub enum DeviationError {
    #[error("person {0} has no classified references in Ph.D.-stage papers")]
    NoReferences(String),
    #[error("no incumbents with references at {university} / subfield {subfield} in {year}")]
    NoIncumbents {
        university: String,
        subfield: SubfieldId,
        year: i32,
    },
    #[error("deviation needs two nonzero profiles")]
    ZeroVector,
}

/// Reference-share profile normalized to unit sum.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileVector {
    pub vector: DisciplineVector,
    /// Publications that contributed references.
    pub n_pubs: usize,
}

/// How incumbent vectors are combined into a unit profile.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Unweighted mean of per-incumbent share vectors.
    #[default]
    MeanOfPersons,
    /// One pooled tally over all incumbent papers.
    Pooled,
}

fn pooled<'a>(papers: impl Iterator<Item = &'a crate::corpus::Paper>) -> Option<(DisciplineVector, usize)> {
    let mut v = DisciplineVector::zeros();
    let mut n = 0;
    for p in papers {
        if p.classified_refs() > 0 {
            v.add_counts(&p.ref_counts, 1.0);
            n += 1;
        }
    }
    (n > 0).then_some((v, n))
}

/// Pooled reference shares over a person's Ph.D.-stage (productivity) papers.
pub fn person_profile(person: &Person, cohort: &Cohort) -> Result<ProfileVector, DeviationError> {
    let eligible = eligible_papers(person, cohort);
    let (v, n) = pooled(eligible.productivity.iter().map(|&i| &cohort.papers[i]))
        .ok_or_else(|| DeviationError::NoReferences(person.id.clone()))?;
    Ok(ProfileVector {
        vector: v.normalized(),
        n_pubs: n,
    })
}

fn incumbent_tally(inc: &Incumbent, cohort: &Cohort, year: i32) -> Option<(DisciplineVector, usize)> {
    let window = (year - INCUMBENT_LOOKBACK)..year;
    pooled(
        inc.papers
            .iter()
            .map(|&i| &cohort.papers[i])
            .filter(|p| window.contains(&p.pub_year)),
    )
}

/// Incumbents grouped by (university, subfield) for repeated profile lookups.
pub struct UnitIndex<'a> {
    cohort: &'a Cohort,
    by_unit: HashMap<(&'a str, SubfieldId), Vec<&'a Incumbent>>,
    pub aggregation: Aggregation,
}

impl<'a> UnitIndex<'a> {
    pub fn new(cohort: &'a Cohort, aggregation: Aggregation) -> Self {
        let mut by_unit: HashMap<_, Vec<_>> = HashMap::new();
        for inc in cohort.incumbents.iter() {
            by_unit
                .entry((inc.university.as_str(), inc.subfield))
                .or_default()
                .push(inc);
        }
        UnitIndex {
            cohort,
            by_unit,
            aggregation,
        }
    }

    /// Universities with at least one incumbent in the subfield, sorted.
    pub fn universities(&self, subfield: SubfieldId) -> Vec<&'a str> {
        let mut out: Vec<&str> = self
            .by_unit
            .keys()
            .filter(|(_, sf)| *sf == subfield)
            .map(|(u, _)| *u)
            .collect();
        out.sort_unstable();
        out
    }

    /// Profile of incumbents registered at the unit in `year`, built from
    /// their papers in `[year − 5, year − 1]`. The incumbent whose id equals
    /// `exclude` is left out.
    pub fn profile(
        &self,
        university: &str,
        subfield: SubfieldId,
        year: i32,
        exclude: Option<&str>,
    ) -> Result<ProfileVector, DeviationError> {
        let members = self
            .by_unit
            .get(&(university, subfield))
            .map(Vec::as_slice)
            .unwrap_or_default();
        let mut acc = DisciplineVector::zeros();
        let (mut n_pubs, mut n_people) = (0, 0);
        for inc in members {
            if !inc.registered_in(year) || exclude == Some(inc.id.as_str()) {
                continue;
            }
            let Some((v, n)) = incumbent_tally(inc, self.cohort, year) else {
                continue;
            };
            match self.aggregation {
                Aggregation::MeanOfPersons => acc.add(&v.normalized(), 1.0),
                Aggregation::Pooled => acc.add(&v, 1.0),
            }
            n_pubs += n;
            n_people += 1;
        }
        if n_people == 0 {
            return Err(DeviationError::NoIncumbents {
                university: university.to_string(),
                subfield,
                year,
            });
        }
        Ok(ProfileVector {
            vector: acc.normalized(),
            n_pubs,
        })
    }
}

pub fn unit_profile(
    cohort: &Cohort,
    university: &str,
    subfield: SubfieldId,
    year: i32,
) -> Result<ProfileVector, DeviationError> {
    UnitIndex::new(cohort, Aggregation::default()).profile(university, subfield, year, None)
}

/// Cosine distance `1 − cos(a, b)`, clamped to `[0, 1]`.
pub fn research_deviation(a: &ProfileVector, b: &ProfileVector) -> Result<f64, DeviationError> {
    let c = cosine(&a.vector, &b.vector);
    if !c.defined {
        return Err(DeviationError::ZeroVector);
    }
    Ok((1.0 - c.value).clamp(0.0, 1.0))
}

/// Deviation of a person from the incumbents at their placement, evaluated in
/// the placement year.
pub fn placement_deviation(person: &Person, index: &UnitIndex<'_>) -> Result<f64, DeviationError> {
    let own = person_profile(person, index.cohort)?;
    let unit = index.profile(
        &person.placement_university,
        person.placement_subfield,
        person.placement_year,
        Some(&person.id),
    )?;
    research_deviation(&own, &unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CohortBuilder, Paper};
    use crate::taxonomy::DisciplineId;

    fn d(i: u32) -> DisciplineId {
        DisciplineId::new(i).unwrap()
    }

    fn sf() -> SubfieldId {
        SubfieldId::new(1).unwrap()
    }

    fn profile(values: &[(u32, f64)]) -> ProfileVector {
        let mut v = vec![0.0; 144];
        for &(i, x) in values {
            v[i as usize - 1] = x;
        }
        ProfileVector {
            vector: DisciplineVector::from_values(v).unwrap(),
            n_pubs: 1,
        }
    }

    fn incumbent(id: &str, first: i32, last: i32) -> Incumbent {
        Incumbent {
            id: id.into(),
            university: "U".into(),
            subfield: sf(),
            first_year: first,
            last_year: last,
            papers: vec![],
        }
    }

    #[test]
    fn deviation_values() {
        let a = profile(&[(1, 3.0), (2, 4.0)]);
        let b = profile(&[(1, 4.0), (2, 3.0)]);
        assert!((research_deviation(&a, &b).unwrap() - 0.04).abs() < 1e-12);
        assert!(research_deviation(&a, &a).unwrap().abs() < 1e-12);
        let c = profile(&[(7, 1.0)]);
        assert_eq!(research_deviation(&a, &c).unwrap(), 1.0);
        assert_eq!(
            research_deviation(&a, &profile(&[])),
            Err(DeviationError::ZeroVector)
        );
    }

    #[test]
    fn person_profile_pools_window_papers() {
        let mut b = CohortBuilder::new();
        b.paper(Paper::new("a", 2008, d(1)).with_refs([(d(2), 2)]));
        b.paper(Paper::new("b", 2009, d(1)).with_refs([(d(2), 2), (d(9), 2)]));
        // Outside the window: ignored.
        b.paper(Paper::new("c", 2015, d(1)).with_refs([(d(50), 10)]));
        b.person(Person::new("p", "U", sf(), 2010, "V", sf()), ["a", "b", "c"]);
        b.person(Person::new("q", "U", sf(), 2010, "V", sf()), Vec::<String>::new());
        let c = b.build().unwrap();
        let p = person_profile(c.person("p").unwrap(), &c).unwrap();
        assert_eq!(p.n_pubs, 2);
        assert!((p.vector.get(d(2)) - 4.0 / 6.0).abs() < 1e-12);
        assert!((p.vector.get(d(9)) - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(
            person_profile(c.person("q").unwrap(), &c),
            Err(DeviationError::NoReferences("q".into()))
        );
    }

    #[test]
    fn unit_profile_averages_incumbents() {
        let mut b = CohortBuilder::new();
        b.paper(Paper::new("x1", 2014, d(1)).with_refs([(d(1), 9)]));
        b.paper(Paper::new("x2", 2012, d(1)).with_refs([(d(2), 1)]));
        b.paper(Paper::new("y1", 2013, d(1)).with_refs([(d(3), 1)]));
        // Too old and too recent for a 2015 evaluation.
        b.paper(Paper::new("z1", 2009, d(1)).with_refs([(d(4), 1)]));
        b.paper(Paper::new("z2", 2015, d(1)).with_refs([(d(5), 1)]));
        b.paper(Paper::new("w1", 2013, d(1)).with_refs([(d(6), 1)]));
        b.incumbent(incumbent("i1", 2000, 2020), ["x1", "x2"]);
        b.incumbent(incumbent("i2", 2000, 2020), ["y1", "z1", "z2"]);
        b.incumbent(incumbent("i3", 2016, 2020), ["w1"]);
        let c = b.build().unwrap();

        let u = unit_profile(&c, "U", sf(), 2015).unwrap();
        // i1 = (0.9, 0.1, 0), i2 = (0, 0, 1); mean halves each.
        let expect = [0.45, 0.05, 0.5, 0.0, 0.0, 0.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((u.vector.get(d(i as u32 + 1)) - e).abs() < 1e-12);
        }
        assert_eq!(u.n_pubs, 3);

        let index = UnitIndex::new(&c, Aggregation::Pooled);
        let pooled = index.profile("U", sf(), 2015, None).unwrap();
        assert!((pooled.vector.get(d(1)) - 9.0 / 11.0).abs() < 1e-12);

        let index = UnitIndex::new(&c, Aggregation::MeanOfPersons);
        let solo = index.profile("U", sf(), 2015, Some("i1")).unwrap();
        assert_eq!(solo.vector.get(d(3)), 1.0);
        assert!(matches!(
            index.profile("U", sf(), 2001, None),
            Err(DeviationError::NoIncumbents { .. })
        ));
        assert_eq!(index.universities(sf()), vec!["U"]);
    }

    #[test]
    fn identical_incumbents_match_single() {
        let mut b = CohortBuilder::new();
        b.paper(Paper::new("x", 2014, d(1)).with_refs([(d(1), 3), (d(2), 1)]));
        for id in ["a", "b", "c"] {
            b.incumbent(incumbent(id, 2010, 2020), ["x"]);
        }
        let c = b.build().unwrap();
        let index = UnitIndex::new(&c, Aggregation::MeanOfPersons);
        let all = index.profile("U", sf(), 2015, None).unwrap();
        assert!((all.vector.get(d(1)) - 0.75).abs() < 1e-12);
    }
}
