//! Seeded synthetic cohorts with planted effects.
//!
//! Universities are shared by all subfields and carry a latent prestige
//! order (`U001` is the most prestigious). Each person's Ph.D.-window papers
//! draw their references from a mixture of a home discipline and a uniform
//! spillover; the mixing weight is solved from the person's target IDR, and
//! per-gender offsets are calibrated so the pipeline-measured means hit the
//! configured values. Top placement follows a logistic model evaluated on
//! the pipeline's own covariates, with ranks taken from the prestige order.
//! Background seniors and corrective hires one step down the order are then
//! added until SpringRank reproduces that order in every subfield, so the
//! planted model holds for the recomputed ranks.
//! Post-graduation papers carry no classified references.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{person_idr, phd_record, IdrMethod, PhdRecord};
use crate::corpus::{Advisor, Cohort, CohortBuilder, CorpusError, Gender, Incumbent, Paper, Person};
use crate::ranking::{springrank, top_count, PlacementGraph, RankError, DEFAULT_ALPHA};
use crate::similarity::SimilaritySet;
use crate::stats::glm::logistic;
use crate::taxonomy::{DisciplineId, Field, SubfieldId, N_DISCIPLINES};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    ConfigInvalid(String),
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Generator settings. Every field has a default, so a TOML file only
/// needs the values it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_persons: usize,
    /// Universities available in every subfield.
    pub n_universities: usize,
    /// Disciplines that receive papers and references (the first N ids).
    pub n_disciplines: usize,
    pub grad_year_start: i32,
    pub grad_year_end: i32,
    pub seed: u64,

    pub idr_mean_men: f64,
    /// Women's mean IDR minus men's.
    pub planted_gender_idr_gap: f64,
    pub idr_sd: f64,
    pub calibration_passes: usize,

    /// Per-unit IDR log-odds of a top placement.
    pub planted_idr_logodds: f64,
    /// Per-unit IDR log-rate of post-graduation papers for top hires.
    pub planted_productivity_slope: f64,
    /// Top set defining the planted outcome, as a fraction of universities.
    pub top_fraction: f64,
    /// Target share of persons placed in the top set.
    pub top_hire_rate: f64,

    /// Log-odds per unit of Ph.D. university percentile / 100.
    pub rank_logodds: f64,
    pub woman_logodds: f64,
    pub pubs_logodds: f64,
    pub cites_logodds: f64,
    pub collaborators_logodds: f64,
    pub advisor_woman_logodds: f64,
    pub advisor_pubs_logodds: f64,
    pub advisor_seniority_logodds: f64,

    pub woman_share: f64,
    pub stayer_share: f64,
    /// Among movers, the share staying within their broad field.
    pub same_field_mover_share: f64,
    /// Mean papers per year after graduation (relative years 2..=10).
    pub post_rate: f64,
    pub incumbents_per_unit: usize,
    /// Senior faculty per generated person. They have no Ph.D.-window
    /// papers, so the sample filters drop them, but their hires enter the
    /// university rankings.
    pub background_ratio: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_persons: 2000,
            n_universities: 60,
            n_disciplines: N_DISCIPLINES,
            grad_year_start: 2006,
            grad_year_end: 2015,
            seed: 0,
            idr_mean_men: 0.41,
            planted_gender_idr_gap: 0.04,
            idr_sd: 0.1,
            calibration_passes: 3,
            planted_idr_logodds: -1.186,
            planted_productivity_slope: 0.5,
            top_fraction: 0.1,
            top_hire_rate: 0.15,
            rank_logodds: 6.0,
            woman_logodds: -0.1,
            pubs_logodds: 0.08,
            cites_logodds: 0.15,
            collaborators_logodds: 0.01,
            advisor_woman_logodds: 0.0,
            advisor_pubs_logodds: 0.01,
            advisor_seniority_logodds: 0.01,
            woman_share: 0.35,
            stayer_share: 0.7,
            same_field_mover_share: 0.6,
            post_rate: 0.5,
            incumbents_per_unit: 2,
            background_ratio: 1.0,
        }
    }
}

const WINDOW_RATE: f64 = 1.5;
const MAX_WINDOW_PAPERS: u32 = 8;
const MEAN_REFS: f64 = 25.0;
const MIN_REFS: u32 = 15;
const PRESTIGE_DECAY: f64 = 4.0;

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<SynthConfig, SynthError> {
        let config: SynthConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<SynthConfig, SynthError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::ConfigInvalid(m.to_string()));
        if self.n_persons == 0 || self.n_universities < 2 || self.incumbents_per_unit == 0 {
            return bad("counts must be positive (n_universities at least 2)");
        }
        if self.n_disciplines < subfields().len() || self.n_disciplines > N_DISCIPLINES {
            return bad("n_disciplines must lie in 19..=144");
        }
        if self.grad_year_end < self.grad_year_start {
            return bad("grad_year_end precedes grad_year_start");
        }
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.top_fraction) || !unit(self.top_hire_rate) {
            return bad("top_fraction and top_hire_rate must lie in (0, 1)");
        }
        for (name, x) in [
            ("woman_share", self.woman_share),
            ("stayer_share", self.stayer_share),
            ("same_field_mover_share", self.same_field_mover_share),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return Err(SynthError::ConfigInvalid(format!("{name} must lie in [0, 1]")));
            }
        }
        let women = self.idr_mean_men + self.planted_gender_idr_gap;
        if !(0.05..=0.85).contains(&self.idr_mean_men) || !(0.05..=0.85).contains(&women) {
            return bad("group IDR means must lie in [0.05, 0.85]");
        }
        if !(self.idr_sd >= 0.0) || !(self.post_rate > 0.0) || !(self.background_ratio >= 0.0) {
            return bad("idr_sd and background_ratio must be nonnegative, post_rate positive");
        }
        let coefs = [
            self.planted_idr_logodds,
            self.planted_productivity_slope,
            self.rank_logodds,
            self.woman_logodds,
            self.pubs_logodds,
            self.cites_logodds,
            self.collaborators_logodds,
            self.advisor_woman_logodds,
            self.advisor_pubs_logodds,
            self.advisor_seniority_logodds,
        ];
        if coefs.iter().any(|c| !c.is_finite()) {
            return bad("coefficients must be finite");
        }
        Ok(())
    }

    fn grad_years(&self) -> i32 {
        self.grad_year_end - self.grad_year_start + 1
    }
}

/// Subfields that receive synthetic persons (Humanities is excluded on
/// ingest, so it is never generated).
pub fn subfields() -> Vec<SubfieldId> {
    SubfieldId::all().filter(|s| s.field() != Field::Humanities).collect()
}

pub fn university_id(j: usize) -> String {
    format!("U{:03}", j + 1)
}

/// Home disciplines of the `k`-th generated subfield: a contiguous block.
fn home_block(config: &SynthConfig, k: usize) -> std::ops::Range<usize> {
    let width = config.n_disciplines / subfields().len();
    k * width..(k + 1) * width
}

/// Expected Rao-Stirling score of `refs` references drawn from a mixture
/// with spillover weight `m`, under unit self-similarity and zero
/// cross-similarity.
fn expected_score(m: f64, n_active: usize, refs: f64) -> f64 {
    let n = n_active as f64;
    let home = 1.0 - m + m / n;
    let other = m / n;
    let concentration = home * home + (n - 1.0) * other * other;
    (1.0 - concentration) * (1.0 - 1.0 / refs)
}

/// Spillover weight whose expected score equals `target` (bisection).
pub fn mixing_weight(target: f64, n_active: usize, refs: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    if target >= expected_score(1.0, n_active, refs) {
        return 1.0;
    }
    if target <= 0.0 {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if expected_score(mid, n_active, refs) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn poisson<R: Rng>(r: &mut R, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(r) as u32
}

/// Mean citations per (discipline, year) used by the generator.
fn baseline(d: usize, year: i32, start: i32) -> f64 {
    4.0 + (d % 7) as f64 + 0.25 * (year - start).max(0) as f64
}

/// Draws reference counts from the home/spillover mixture.
fn draw_refs<R: Rng>(r: &mut R, home: usize, m: f64, n_active: usize) -> Vec<(DisciplineId, u32)> {
    let n_refs = MIN_REFS + poisson(r, MEAN_REFS - MIN_REFS as f64);
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for _ in 0..n_refs {
        let spill: f64 = r.random();
        let pick = r.random_range(0..n_active);
        let d = if spill < m { pick } else { home };
        *counts.entry(d).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(d, c)| (DisciplineId::from_index(d).unwrap(), c))
        .collect()
}

fn draw_citations<R: Rng>(r: &mut R, d: usize, year: i32, start: i32) -> u32 {
    let quality: f64 = Gamma::new(2.0, 0.5).unwrap().sample(r);
    poisson(r, baseline(d, year, start) * quality)
}

/// Everything about a person that does not depend on placement.
#[derive(Clone, Debug)]
struct Draft {
    person: Person,
    university: usize,
    home: usize,
    papers: Vec<Paper>,
}

/// Stream layout: person `i` uses streams `4i` (attributes and window
/// papers), `4i + 1` (placement) and `4i + 2` (later papers); incumbents use
/// streams above `1 << 48`.
fn person_draft(config: &SynthConfig, i: usize, offsets: [f64; 2], prestige_cdf: &[f64]) -> Draft {
    let sfs = subfields();
    let mut r = rng(config.seed, 4 * i as u64);
    let woman = r.random::<f64>() < config.woman_share;
    let k = r.random_range(0..sfs.len());
    let u: f64 = r.random();
    let university = prestige_cdf.partition_point(|&c| c < u).min(config.n_universities - 1);
    let grad_year = config.grad_year_start + r.random_range(0..config.grad_years());
    let home = home_block(config, k).start + r.random_range(0..home_block(config, k).len());
    let z: f64 = StandardNormal.sample(&mut r);
    let base = if woman {
        config.idr_mean_men + config.planted_gender_idr_gap
    } else {
        config.idr_mean_men
    };
    let target = (base + offsets[usize::from(woman)] + config.idr_sd * z).clamp(0.0, 0.95);
    let m = mixing_weight(target, config.n_disciplines, MEAN_REFS);

    let id = format!("R{:06}", i + 1);
    let n_papers = (1 + poisson(&mut r, WINDOW_RATE)).min(MAX_WINDOW_PAPERS);
    let mut papers = Vec::with_capacity(n_papers as usize);
    let mut coauthors = 0;
    for j in 0..n_papers {
        let year = grad_year + r.random_range(crate::corpus::WINDOW_START..=crate::corpus::WINDOW_END);
        let authors = 1 + poisson(&mut r, 2.0).min(9);
        coauthors += authors - 1;
        let refs = draw_refs(&mut r, home, m, config.n_disciplines);
        let mut p = Paper::new(format!("{id}-w{j}"), year, DisciplineId::from_index(home).unwrap()).with_refs(refs);
        p.author_count = authors;
        p.citations = draw_citations(&mut r, home, year, config.grad_year_start);
        papers.push(p);
    }
    let collaborators = coauthors / 2 + poisson(&mut r, 1.0);
    let advisor = Advisor {
        gender: if r.random::<f64>() < 0.25 { Gender::Woman } else { Gender::Man },
        five_year_pubs: poisson(&mut r, 10.0),
        seniority_years: 3 + poisson(&mut r, 12.0),
    };
    let sf = sfs[k];
    let mut person = Person::new(id, university_id(university), sf, grad_year, university_id(university), sf);
    person.gender = if woman { Gender::Woman } else { Gender::Man };
    person.unique_collaborators = collaborators;
    person.advisor = advisor;
    Draft {
        person,
        university,
        home,
        papers,
    }
}

/// Placement uniforms of one person.
#[derive(Clone, Copy, Debug)]
struct PlacementDraws {
    subfield: SubfieldId,
    gap: i32,
    top: f64,
    slot: f64,
}

fn placement_draws(config: &SynthConfig, i: usize, phd: SubfieldId) -> PlacementDraws {
    let sfs = subfields();
    let mut r = rng(config.seed, 4 * i as u64 + 1);
    let stay: f64 = r.random();
    let close: f64 = r.random();
    let pick: f64 = r.random();
    let gap = r.random_range(0..=2);
    let top: f64 = r.random();
    let slot: f64 = r.random();
    let subfield = if stay < config.stayer_share {
        phd
    } else {
        let same: Vec<SubfieldId> = sfs.iter().copied().filter(|&s| s != phd && s.field() == phd.field()).collect();
        let other: Vec<SubfieldId> = sfs.iter().copied().filter(|&s| s.field() != phd.field()).collect();
        let pool = if close < config.same_field_mover_share && !same.is_empty() { same } else { other };
        pool[((pick * pool.len() as f64) as usize).min(pool.len() - 1)]
    };
    PlacementDraws {
        subfield,
        gap,
        top,
        slot,
    }
}

/// Incumbent faculty of every (university, subfield) with one referenced
/// paper per year; more prestigious units are less interdisciplinary.
fn incumbents(config: &SynthConfig) -> Vec<(Incumbent, Vec<Paper>)> {
    let sfs = subfields();
    let first = config.grad_year_start - 5;
    let last = config.grad_year_end + 2;
    let units: Vec<(usize, usize, usize)> = (0..config.n_universities)
        .flat_map(|u| (0..sfs.len()).flat_map(move |k| (0..config.incumbents_per_unit).map(move |c| (u, k, c))))
        .collect();
    units
        .into_par_iter()
        .enumerate()
        .map(|(n, (u, k, c))| {
            let mut r = rng(config.seed, (1 << 48) + n as u64);
            let block = home_block(config, k);
            let home = block.start + r.random_range(0..block.len());
            let z: f64 = StandardNormal.sample(&mut r);
            let target = (0.3 + 0.2 * u as f64 / config.n_universities as f64 + 0.05 * z).clamp(0.0, 0.9);
            let m = mixing_weight(target, config.n_disciplines, MEAN_REFS);
            let id = format!("I{}-{:02}-{c}", university_id(u), sfs[k].get());
            let papers: Vec<Paper> = (first..last)
                .map(|year| {
                    let refs = draw_refs(&mut r, home, m, config.n_disciplines);
                    let mut p = Paper::new(format!("{id}-{year}"), year, DisciplineId::from_index(home).unwrap())
                        .with_refs(refs);
                    p.author_count = 1 + poisson(&mut r, 3.0).min(9);
                    p.citations = draw_citations(&mut r, home, year, config.grad_year_start);
                    p
                })
                .collect();
            let inc = Incumbent {
                id,
                university: university_id(u),
                subfield: sfs[k],
                first_year: first - 10,
                last_year: last + 10,
                papers: Vec::new(),
            };
            (inc, papers)
        })
        .collect()
}

/// Senior faculty hired before the sample period; most hires go down the
/// prestige order.
fn background(config: &SynthConfig, prestige_cdf: &[f64]) -> Vec<Person> {
    let sfs = subfields();
    let n = (config.background_ratio * config.n_persons as f64).round() as usize;
    let n_univ = config.n_universities;
    let draw = |u: f64, from: usize| -> usize {
        let lo = if from == 0 { 0.0 } else { prestige_cdf[from - 1] };
        let x = lo + u * (1.0 - lo);
        prestige_cdf.partition_point(|&c| c < x).min(n_univ - 1)
    };
    (0..n)
        .into_par_iter()
        .map(|b| {
            let mut r = rng(config.seed, (1 << 50) + b as u64);
            let phd = sfs[r.random_range(0..sfs.len())];
            let origin = draw(r.random(), 0);
            let down: f64 = r.random();
            let u: f64 = r.random();
            let target = if down < 0.9 {
                draw(u, (origin + 1).min(n_univ - 1))
            } else {
                draw(u, 0)
            };
            let stay: f64 = r.random();
            let pick = r.random_range(0..sfs.len());
            let placement_sf = if stay < config.stayer_share { phd } else { sfs[pick] };
            let grad_year = config.grad_year_start - 1 - r.random_range(0..20);
            let woman = r.random::<f64>() < config.woman_share;
            senior(format!("B{:06}", b + 1), origin, target, phd, placement_sf, grad_year, woman)
        })
        .collect()
}

fn senior(id: String, origin: usize, target: usize, phd: SubfieldId, sf: SubfieldId, grad_year: i32, woman: bool) -> Person {
    let mut p = Person::new(id, university_id(origin), phd, grad_year, university_id(target), sf);
    p.gender = if woman { Gender::Woman } else { Gender::Man };
    p
}

/// Minimum score gap between prestige neighbours.
const RANK_MARGIN: f64 = 1e-3;
const MAX_CORRECTION_ROUNDS: usize = 5000;

/// Adds senior hires `j -> j + 1` between adjacent universities until each
/// subfield's SpringRank order equals the prestige order. Returns the number
/// of added hires and whether every subfield succeeded.
fn enforce_hierarchy(config: &SynthConfig, drafts: &[Draft], seniors: &mut Vec<Person>) -> Result<(usize, bool), SynthError> {
    let n_univ = config.n_universities;
    let ids: Vec<String> = (0..n_univ).map(university_id).collect();
    let results: Vec<Result<(SubfieldId, Vec<(usize, usize)>, bool), RankError>> = subfields()
        .into_par_iter()
        .map(|sf| {
            let mut edges: Vec<(String, String)> = seniors
                .iter()
                .chain(drafts.iter().map(|d| &d.person))
                .filter(|p| p.placement_subfield == sf)
                .map(|p| (p.phd_university.clone(), p.placement_university.clone()))
                .collect();
            let mut added: Vec<(usize, usize)> = Vec::new();
            let present: BTreeSet<&str> = edges.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
            for j in 0..n_univ {
                if !present.contains(ids[j].as_str()) {
                    added.push(if j + 1 < n_univ { (j, j + 1) } else { (j - 1, j) });
                }
            }
            edges.extend(added.iter().map(|&(a, b)| (ids[a].clone(), ids[b].clone())));
            for _ in 0..MAX_CORRECTION_ROUNDS {
                let graph = PlacementGraph::from_edges(sf, edges.iter().map(|(a, b)| (a.as_str(), b.as_str())));
                let scores = springrank(&graph, DEFAULT_ALPHA)?.scores;
                let violations: Vec<usize> = (0..n_univ - 1)
                    .filter(|&j| scores[&ids[j]] - scores[&ids[j + 1]] < RANK_MARGIN)
                    .collect();
                if violations.is_empty() {
                    return Ok((sf, added, true));
                }
                for j in violations {
                    added.push((j, j + 1));
                    edges.push((ids[j].clone(), ids[j + 1].clone()));
                }
            }
            Ok((sf, added, false))
        })
        .collect();
    let mut total = 0;
    let mut exact = true;
    for r in results {
        let (sf, added, ok) = r?;
        exact &= ok;
        for (a, b) in added {
            total += 1;
            let id = format!("C{:02}{:06}", sf.get(), total);
            seniors.push(senior(id, a, b, sf, sf, config.grad_year_start - 1, false));
        }
    }
    Ok((total, exact))
}

fn assemble(
    config: &SynthConfig,
    persons: &[Person],
    person_papers: &[Vec<Paper>],
    incumbents: &[(Incumbent, Vec<Paper>)],
) -> Result<Cohort, CorpusError> {
    let mut b = CohortBuilder::new();
    let mut years = BTreeSet::new();
    for (p, papers) in persons.iter().zip(person_papers) {
        for paper in papers {
            years.insert(paper.pub_year);
            b.paper(paper.clone());
        }
        b.person(p.clone(), papers.iter().map(|x| x.id.clone()));
    }
    for (inc, papers) in incumbents {
        for paper in papers {
            years.insert(paper.pub_year);
            b.paper(paper.clone());
        }
        b.incumbent(inc.clone(), papers.iter().map(|x| x.id.clone()));
    }
    for d in 0..config.n_disciplines {
        for &y in &years {
            b.baseline(DisciplineId::from_index(d).unwrap(), y, baseline(d, y, config.grad_year_start));
        }
    }
    b.build()
}

/// Diagnostics of one generation run.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthReport {
    /// Pipeline-measured mean IDR of men and women.
    pub idr_means: [f64; 2],
    /// Calibrated target offsets of men and women.
    pub offsets: [f64; 2],
    /// Senior hires added so rankings follow the prestige order.
    pub corrective_hires: usize,
    /// True when every subfield ranking equals the prestige order.
    pub hierarchy_exact: bool,
    pub intercept: f64,
    pub top_share: f64,
}

/// Generated cohort and diagnostics.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub cohort: Cohort,
    pub report: SynthReport,
}

pub fn synth_cohort(config: &SynthConfig) -> Result<Cohort, SynthError> {
    Ok(synthesize(config)?.cohort)
}

struct Covariates {
    idr: f64,
    record: PhdRecord,
}

pub fn synthesize(config: &SynthConfig) -> Result<Synthetic, SynthError> {
    config.validate()?;
    let n_univ = config.n_universities;
    let weights: Vec<f64> = (0..n_univ)
        .map(|j| (-PRESTIGE_DECAY * j as f64 / n_univ as f64).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let prestige_cdf: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / total;
            Some(*acc)
        })
        .collect();
    let incumbents = incumbents(config);
    let n_top = top_count(n_univ, 100.0 * config.top_fraction);
    let seniors = background(config, &prestige_cdf);

    // IDR calibration passes.
    let goals = [config.idr_mean_men, config.idr_mean_men + config.planted_gender_idr_gap];
    let mut offsets = [0.0; 2];
    let mut drafts: Vec<Draft>;
    let mut covariates: Vec<Covariates>;
    let mut means;
    let mut pass = 0;
    loop {
        drafts = (0..config.n_persons)
            .into_par_iter()
            .map(|i| person_draft(config, i, offsets, &prestige_cdf))
            .collect();
        let persons: Vec<Person> = drafts.iter().map(|d| d.person.clone()).collect();
        let papers: Vec<Vec<Paper>> = drafts.iter().map(|d| d.papers.clone()).collect();
        let cohort = assemble(config, &persons, &papers, &incumbents)?;
        let matrices = SimilaritySet::build(&cohort);
        covariates = cohort
            .persons
            .par_iter()
            .map(|p| Covariates {
                idr: person_idr(p, &cohort, &matrices, IdrMethod::Median).unwrap_or(0.0),
                record: phd_record(p, &cohort),
            })
            .collect();
        means = group_means(&drafts, &covariates);
        log::debug!("calibration pass {pass}: means {means:?}, offsets {offsets:?}");
        if pass == config.calibration_passes {
            break;
        }
        for g in 0..2 {
            if means[g].is_finite() {
                offsets[g] += goals[g] - means[g];
            }
        }
        pass += 1;
    }

    let draws: Vec<PlacementDraws> = drafts
        .iter()
        .enumerate()
        .map(|(i, d)| placement_draws(config, i, d.person.phd_subfield))
        .collect();
    for (d, w) in drafts.iter_mut().zip(&draws) {
        d.person.placement_subfield = w.subfield;
        d.person.placement_year = d.person.grad_year + w.gap;
    }

    let score = |d: &Draft, c: &Covariates, rank: f64| -> f64 {
        let p = &d.person;
        let flag = |b: bool| f64::from(u8::from(b));
        config.planted_idr_logodds * c.idr
            + config.rank_logodds * rank / 100.0
            + config.woman_logodds * flag(p.gender == Gender::Woman)
            + config.pubs_logodds * c.record.pubs as f64
            + config.cites_logodds * c.record.norm_cites
            + config.collaborators_logodds * p.unique_collaborators as f64
            + config.advisor_woman_logodds * flag(p.advisor.gender == Gender::Woman)
            + config.advisor_pubs_logodds * p.advisor.five_year_pubs as f64
            + config.advisor_seniority_logodds * p.advisor.seniority_years as f64
    };

    // Ranks and top sets are the latent prestige order; the senior-faculty
    // hires below make SpringRank reproduce it exactly.
    let prestige_pct = |j: usize| 100.0 * (n_univ - 1 - j) as f64 / (n_univ - 1) as f64;
    let top_ids: Vec<String> = (0..n_top).map(university_id).collect();
    let linear: Vec<f64> = drafts
        .iter()
        .zip(&covariates)
        .map(|(d, c)| score(d, c, prestige_pct(d.university)))
        .collect();
    let intercept = solve_intercept(&linear, config.top_hire_rate);
    let tops: Vec<bool> = linear
        .iter()
        .zip(&draws)
        .map(|(&x, w)| w.top < logistic(intercept + x))
        .collect();
    let placements: Vec<String> = drafts
        .iter()
        .zip(&draws)
        .zip(&tops)
        .map(|((d, w), &top)| place(d.university, w, top, &top_ids, n_univ))
        .collect();
    for (d, u) in drafts.iter_mut().zip(&placements) {
        d.person.placement_university = u.clone();
    }
    let mut seniors = seniors;
    let (corrective, hierarchy_exact) = enforce_hierarchy(config, &drafts, &mut seniors)?;
    if !hierarchy_exact {
        log::warn!("rankings do not reproduce the planted prestige order");
    }

    // Later papers, now that the top placement is known.
    let later: Vec<Vec<Paper>> = drafts
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let mut r = rng(config.seed, 4 * i as u64 + 2);
            let top = f64::from(u8::from(tops[i]));
            let rate = config.post_rate * (config.planted_productivity_slope * covariates[i].idr * top).exp();
            let mut out = Vec::new();
            for rel in 2..=crate::analysis::PANEL_END {
                let year = d.person.grad_year + rel;
                for j in 0..poisson(&mut r, rate) {
                    let mut p = Paper::new(
                        format!("{}-p{rel:02}{j}", d.person.id),
                        year,
                        DisciplineId::from_index(d.home).unwrap(),
                    );
                    p.author_count = 1 + poisson(&mut r, 2.5).min(9);
                    p.citations = draw_citations(&mut r, d.home, year, config.grad_year_start);
                    out.push(p);
                }
            }
            out
        })
        .collect();

    let persons: Vec<Person> = drafts
        .iter()
        .map(|d| d.person.clone())
        .chain(seniors.iter().cloned())
        .collect();
    let papers: Vec<Vec<Paper>> = drafts
        .iter()
        .zip(later)
        .map(|(d, mut l)| {
            let mut all = d.papers.clone();
            all.append(&mut l);
            all
        })
        .chain(seniors.iter().map(|_| Vec::new()))
        .collect();
    let cohort = assemble(config, &persons, &papers, &incumbents)?;
    let top_share = tops.iter().filter(|&&t| t).count() as f64 / tops.len() as f64;
    Ok(Synthetic {
        cohort,
        report: SynthReport {
            idr_means: means,
            offsets,
            corrective_hires: corrective,
            hierarchy_exact,
            intercept,
            top_share,
        },
    })
}

fn group_means(drafts: &[Draft], covariates: &[Covariates]) -> [f64; 2] {
    let mut sum = [0.0; 2];
    let mut n = [0usize; 2];
    for (d, c) in drafts.iter().zip(covariates) {
        let g = usize::from(d.person.gender == Gender::Woman);
        sum[g] += c.idr;
        n[g] += 1;
    }
    [sum[0] / n[0] as f64, sum[1] / n[1] as f64]
}

/// Intercept giving a mean predicted probability of `rate`.
fn solve_intercept(linear: &[f64], rate: f64) -> f64 {
    let mean = |b: f64| linear.iter().map(|&x| logistic(b + x)).sum::<f64>() / linear.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Top hires go to a member of the top set; the others go to a non-top
/// university less prestigious than their own, or any non-top university
/// when none is.
fn place(origin: usize, draws: &PlacementDraws, top: bool, top_set: &[String], n_univ: usize) -> String {
    let pick = |pool: &[String]| pool[((draws.slot * pool.len() as f64) as usize).min(pool.len() - 1)].clone();
    if top {
        return pick(top_set);
    }
    let rest: Vec<String> = (0..n_univ)
        .map(university_id)
        .filter(|u| !top_set.contains(u))
        .collect();
    let below: Vec<String> = (origin + 1..n_univ)
        .map(university_id)
        .filter(|u| !top_set.contains(u))
        .collect();
    if below.is_empty() {
        pick(&rest)
    } else {
        pick(&below)
    }
}
