//! Per-person analysis table and the post-graduation productivity panel.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::corpus::{apply_sample_filters, eligible_papers, Cohort, CorpusError, Gender, Person};
use crate::interdisciplinarity::{phd_idr_median, phd_idr_pooled, IdrError};
use crate::mobility::{classify_move, null_normalize, subfield_distance, CutoffScope, MoveType};
use crate::ranking::{RankError, Rankings, DEFAULT_ALPHA};
use crate::similarity::SimilaritySet;
use crate::stats::Frame;
use crate::taxonomy::{DisciplineId, Field};

/// Top-X% thresholds used throughout the placement analyses.
pub const THRESHOLDS: [f64; 4] = [5.0, 10.0, 15.0, 20.0];
/// Relative years covered by the productivity panel.
pub const PANEL_START: i32 = -4;
pub const PANEL_END: i32 = 10;
/// Share of each (discipline, year) counted as hit papers.
pub const HIT_SHARE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Idr(#[from] IdrError),
    #[error("no person has a complete covariate record")]
    EmptyTable,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IdrMethod {
    #[default]
    Median,
    Pooled,
}

/// Pipeline settings shared by the analyses.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    pub idr: IdrMethod,
    pub alpha: f64,
    pub shuffles: usize,
    pub seed: u64,
    pub cutoff_scope: CutoffScope,
    /// Replaces the SpringRank tables when given.
    pub external_ranks: Option<Rankings>,
    /// Skip the mobility null model (movement labels are then absent).
    pub skip_mobility: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            idr: IdrMethod::Median,
            alpha: DEFAULT_ALPHA,
            shuffles: crate::mobility::DEFAULT_SHUFFLES,
            seed: 0,
            cutoff_scope: CutoffScope::Global,
            external_ranks: None,
            skip_mobility: false,
        }
    }
}

/// Covariates and outcomes of one person.
#[derive(Clone, Debug, PartialEq)]
pub struct PersonRow {
    pub person: usize,
    pub person_id: String,
    pub field: Field,
    pub grad_year: i32,
    pub gender: Gender,
    pub idr: f64,
    /// Percentile of the Ph.D. university in the placement subfield ranking.
    pub phd_rank: f64,
    pub placement_rank: f64,
    pub pubs: u32,
    pub norm_cites: f64,
    pub collaborators: u32,
    pub advisor_gender: Gender,
    pub advisor_pubs: u32,
    pub advisor_seniority: u32,
    /// Placement inside the top set, one flag per entry of [`THRESHOLDS`].
    pub top: [bool; 4],
    pub move_type: Option<MoveType>,
}

impl PersonRow {
    pub fn top_at(&self, threshold: f64) -> bool {
        THRESHOLDS
            .iter()
            .position(|&t| t == threshold)
            .is_some_and(|k| self.top[k])
    }
}

/// Mean of `citations / baseline` over the papers, skipping papers without
/// a baseline. Zero when no paper has one.
pub fn normalized_citations(cohort: &Cohort, papers: &[usize]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for &i in papers {
        let p = &cohort.papers[i];
        if let Some(b) = cohort.baseline(p.discipline, p.pub_year) {
            sum += p.citations as f64 / b;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Ph.D.-period covariates that do not depend on rankings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhdRecord {
    pub pubs: u32,
    pub norm_cites: f64,
}

pub fn phd_record(person: &Person, cohort: &Cohort) -> PhdRecord {
    let eligible = eligible_papers(person, cohort);
    PhdRecord {
        pubs: eligible.productivity.len() as u32,
        norm_cites: normalized_citations(cohort, &eligible.productivity),
    }
}

pub fn person_idr(person: &Person, cohort: &Cohort, matrices: &SimilaritySet, method: IdrMethod) -> Result<f64, IdrError> {
    Ok(match method {
        IdrMethod::Median => phd_idr_median(person, cohort, matrices)?.value,
        IdrMethod::Pooled => phd_idr_pooled(person, cohort, matrices)?.value,
    })
}

/// Filtered cohort with everything the experiments share.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub cohort: Cohort,
    pub matrices: SimilaritySet,
    pub rankings: Rankings,
    pub rows: Vec<PersonRow>,
    pub options: PipelineOptions,
}

impl Pipeline {
    /// Rankings come from every faculty record in `cohort`; the remaining
    /// stages use the persons that pass the sample filters.
    pub fn run(cohort: &Cohort, options: PipelineOptions) -> Result<Pipeline, AnalysisError> {
        let rankings = match &options.external_ranks {
            Some(r) => r.clone(),
            None => Rankings::springrank(cohort, options.alpha)?,
        };
        let filtered = apply_sample_filters(cohort)?;
        log::info!(
            "sample filters removed {} (gap), {} (no scorable papers), {} (outliers)",
            filtered.removed_placement_gap,
            filtered.removed_no_scorable_papers,
            filtered.removed_outliers
        );
        let cohort = filtered.cohort;
        let matrices = SimilaritySet::build(&cohort);
        let moves = if options.skip_mobility {
            None
        } else {
            let net = null_normalize(&cohort, options.shuffles, options.seed);
            let labels = classify_move(&cohort, &subfield_distance(&net), options.cutoff_scope);
            Some(labels.into_iter().map(|l| l.kind).collect::<Vec<_>>())
        };
        let rows = person_rows(&cohort, &matrices, &rankings, options.idr, moves.as_deref())?;
        Ok(Pipeline {
            cohort,
            matrices,
            rankings,
            rows,
            options,
        })
    }

    pub fn frame(&self) -> Frame {
        person_frame(&self.rows)
    }

    pub fn rows_in(&self, field: Field) -> Vec<&PersonRow> {
        self.rows.iter().filter(|r| r.field == field).collect()
    }
}

/// One row per person with a defined IDR and ranked Ph.D. and placement
/// universities. `moves` (if given) is parallel to `cohort.persons`.
pub fn person_rows(
    cohort: &Cohort,
    matrices: &SimilaritySet,
    rankings: &Rankings,
    method: IdrMethod,
    moves: Option<&[MoveType]>,
) -> Result<Vec<PersonRow>, AnalysisError> {
    let tops: Vec<_> = THRESHOLDS.iter().map(|&x| rankings.top_sets(x)).collect();
    let mut rows = Vec::with_capacity(cohort.persons.len());
    let (mut no_idr, mut unranked) = (0, 0);
    for (i, p) in cohort.persons.iter().enumerate() {
        let idr = match person_idr(p, cohort, matrices, method) {
            Ok(v) => v,
            Err(IdrError::NoEligiblePapers(_)) => {
                no_idr += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let sf = p.placement_subfield;
        let (Some(phd_rank), Some(placement_rank)) = (
            rankings.percentile(sf, &p.phd_university),
            rankings.percentile(sf, &p.placement_university),
        ) else {
            unranked += 1;
            continue;
        };
        let rec = phd_record(p, cohort);
        let mut top = [false; 4];
        for (t, sets) in top.iter_mut().zip(&tops) {
            *t = sets.contains(sf, &p.placement_university);
        }
        rows.push(PersonRow {
            person: i,
            person_id: p.id.clone(),
            field: p.phd_subfield.field(),
            grad_year: p.grad_year,
            gender: p.gender,
            idr,
            phd_rank,
            placement_rank,
            pubs: rec.pubs,
            norm_cites: rec.norm_cites,
            collaborators: p.unique_collaborators,
            advisor_gender: p.advisor.gender,
            advisor_pubs: p.advisor.five_year_pubs,
            advisor_seniority: p.advisor.seniority_years,
            top,
            move_type: moves.map(|m| m[i]),
        });
    }
    if no_idr + unranked > 0 {
        log::info!("person table: skipped {no_idr} without IDR, {unranked} with unranked universities");
    }
    if rows.is_empty() {
        return Err(AnalysisError::EmptyTable);
    }
    Ok(rows)
}

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

/// Model frame of the person table. Numeric columns: `idr`, `phd_rank`,
/// `placement_rank`, `woman`, `pubs`, `norm_cites`, `collaborators`,
/// `advisor_pubs`, `advisor_seniority`, `top5` .. `top20`; categorical:
/// `grad_year`, `gender` (reference `man`), `advisor_gender` (reference
/// `man`), `field`, and `movement` when labels are present.
pub fn person_frame<R: std::borrow::Borrow<PersonRow>>(rows: &[R]) -> Frame {
    let rows: Vec<&PersonRow> = rows.iter().map(|r| r.borrow()).collect();
    let num = |f: &dyn Fn(&PersonRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let cat = |f: &dyn Fn(&PersonRow) -> String| rows.iter().map(|r| f(r)).collect::<Vec<String>>();
    let mut frame = Frame::new(rows.len());
    frame
        .add_numeric("idr", num(&|r| r.idr))
        .add_numeric("phd_rank", num(&|r| r.phd_rank))
        .add_numeric("placement_rank", num(&|r| r.placement_rank))
        .add_numeric("woman", num(&|r| flag(r.gender == Gender::Woman)))
        .add_numeric("pubs", num(&|r| r.pubs as f64))
        .add_numeric("norm_cites", num(&|r| r.norm_cites))
        .add_numeric("collaborators", num(&|r| r.collaborators as f64))
        .add_numeric("advisor_pubs", num(&|r| r.advisor_pubs as f64))
        .add_numeric("advisor_seniority", num(&|r| r.advisor_seniority as f64))
        .add_categorical("grad_year", cat(&|r| r.grad_year.to_string()), None)
        .add_categorical("gender", cat(&|r| r.gender.to_string()), Some("man"))
        .add_categorical("advisor_gender", cat(&|r| r.advisor_gender.to_string()), Some("man"))
        .add_categorical("field", cat(&|r| r.field.to_string()), None);
    for (k, t) in THRESHOLDS.iter().enumerate() {
        frame.add_numeric(&format!("top{t}"), num(&|r| flag(r.top[k])));
    }
    if rows.iter().all(|r| r.move_type.is_some()) && !rows.is_empty() {
        frame.add_categorical(
            "movement",
            cat(&|r| r.move_type.map(|m| m.as_str().to_string()).unwrap_or_default()),
            Some(MoveType::SameFieldStayer.as_str()),
        );
    }
    frame
}

/// Papers at or above the `1 - HIT_SHARE` citation quantile of their
/// (discipline, year): the top `ceil(HIT_SHARE · n)` by citations, ties at
/// the boundary included.
pub fn hit_papers(cohort: &Cohort) -> Vec<bool> {
    let mut groups: HashMap<(DisciplineId, i32), Vec<u32>> = HashMap::new();
    for p in cohort.papers.iter() {
        groups.entry((p.discipline, p.pub_year)).or_default().push(p.citations);
    }
    let cut: HashMap<(DisciplineId, i32), u32> = groups
        .into_iter()
        .map(|(k, mut c)| {
            c.sort_unstable_by(|a, b| b.cmp(a));
            let k_top = ((HIT_SHARE * c.len() as f64 - 1e-9).ceil() as usize).max(1);
            (k, c[k_top - 1])
        })
        .collect();
    cohort
        .papers
        .iter()
        .map(|p| p.citations > 0 && p.citations >= cut[&(p.discipline, p.pub_year)])
        .collect()
}

/// Paper and hit-paper counts per relative year, one row per (person,
/// year) in `PANEL_START..=PANEL_END`. Columns: `papers`, `hits`, `idr`,
/// `top` (at `threshold`), `rel_year` (categorical, reference `-4`).
pub fn productivity_panel(pipeline: &Pipeline, threshold: f64) -> Frame {
    let hits = hit_papers(&pipeline.cohort);
    let span = (PANEL_END - PANEL_START + 1) as usize;
    let n = pipeline.rows.len() * span;
    let (mut papers, mut hit, mut idr, mut top, mut year) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for row in &pipeline.rows {
        let person = &pipeline.cohort.persons[row.person];
        let mut counts: BTreeMap<i32, (u32, u32)> = BTreeMap::new();
        for &i in &person.papers {
            let p = &pipeline.cohort.papers[i];
            if p.author_count > crate::corpus::MAX_AUTHORS {
                continue;
            }
            let e = counts.entry(p.pub_year - person.grad_year).or_default();
            e.0 += 1;
            e.1 += u32::from(hits[i]);
        }
        for rel in PANEL_START..=PANEL_END {
            let (c, h) = counts.get(&rel).copied().unwrap_or_default();
            papers.push(c as f64);
            hit.push(h as f64);
            idr.push(row.idr);
            top.push(flag(row.top_at(threshold)));
            year.push(rel.to_string());
        }
    }
    let mut frame = Frame::new(n);
    frame
        .add_numeric("papers", papers)
        .add_numeric("hits", hit)
        .add_numeric("idr", idr)
        .add_numeric("top", top)
        .add_categorical("rel_year", year, Some(&PANEL_START.to_string()));
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CohortBuilder, Paper};
    use crate::taxonomy::SubfieldId;

    fn d(i: u32) -> DisciplineId {
        DisciplineId::new(i).unwrap()
    }

    #[test]
    fn normalized_citations_skip_missing_baselines() {
        let mut b = CohortBuilder::new();
        let mut a = Paper::new("a", 2010, d(1));
        a.citations = 6;
        let mut c = Paper::new("c", 2011, d(1));
        c.citations = 9;
        b.paper(a).paper(c).baseline(d(1), 2010, 3.0);
        let cohort = b.build().unwrap();
        assert_eq!(normalized_citations(&cohort, &[0, 1]), 2.0);
        assert_eq!(normalized_citations(&cohort, &[1]), 0.0);
    }

    #[test]
    fn hits_are_top_decile_per_group() {
        let mut b = CohortBuilder::new();
        for i in 0..20u32 {
            let mut p = Paper::new(format!("p{i:02}"), 2010, d(2));
            p.citations = i;
            b.paper(p);
        }
        let mut other = Paper::new("q", 2011, d(2));
        other.citations = 1;
        b.paper(other);
        let cohort = b.build().unwrap();
        let hits = hit_papers(&cohort);
        let flagged: Vec<&str> = cohort
            .papers
            .iter()
            .zip(&hits)
            .filter(|(_, &h)| h)
            .map(|(p, _)| p.id.as_str())
            .collect();
        assert_eq!(flagged, ["p18", "p19", "q"]);
    }

    #[test]
    fn frame_columns() {
        let sf = SubfieldId::new(5).unwrap();
        let mut b = CohortBuilder::new();
        b.paper(Paper::new("x", 2010, d(3)).with_refs([(d(3), 4), (d(9), 2)]));
        let mut p = Person::new("p1", "U1", sf, 2010, "U2", sf);
        p.gender = Gender::Woman;
        b.person(p, ["x"]);
        b.person(Person::new("p2", "U2", sf, 2010, "U1", sf), ["x"]);
        let cohort = b.build().unwrap();
        let pipe = Pipeline::run(
            &cohort,
            PipelineOptions {
                skip_mobility: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(pipe.rows.len(), 2);
        let f = pipe.frame();
        assert_eq!(f.numeric("woman").unwrap(), &[1.0, 0.0]);
        assert_eq!(f.numeric("pubs").unwrap(), &[1.0, 1.0]);
        assert!(f.column("movement").is_none());
        let panel = productivity_panel(&pipe, 10.0);
        assert_eq!(panel.len(), 2 * 15);
        assert_eq!(panel.numeric("papers").unwrap().iter().sum::<f64>(), 2.0);
    }
}
