//! End-to-end experiments that write result tables and a run manifest.
//!
//! Each experiment writes one or more CSV files into the output directory
//! and `manifest.txt`, a plain `key=value` file with the parameters, a
//! SHA-256 digest of the input corpus and one of every output file.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{person_frame, productivity_panel, AnalysisError, IdrMethod, Pipeline, PipelineOptions, PersonRow};
use crate::corpus::{corpus_tables, format_real, Cohort, CorpusError, Gender};
use crate::deviation::{person_profile, research_deviation, Aggregation, ProfileVector, UnitIndex};
use crate::mobility::MoveType;
use crate::ranking::{Rankings, DEFAULT_ALPHA};
use crate::stats::{
    bootstrap_ci, build_design, fit_glm, fit_multinomial, lowess, marginal_effect, mean, psm_match, weighted_glm,
    welch_t, Family, FitResult, Formula, Frame, StatsError, DEFAULT_CALIPER, DEFAULT_STEP,
};
use crate::taxonomy::{Field, SubfieldId};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Covariate sets of the placement grid, each with graduation-year dummies.
pub const COVARIATE_SETS: [(&str, &str); 3] = [
    ("R", "idr + phd_rank + C(grad_year)"),
    ("R+P", "idr + phd_rank + C(grad_year) + C(gender) + pubs + norm_cites + collaborators"),
    (
        "R+P+A",
        "idr + phd_rank + C(grad_year) + C(gender) + pubs + norm_cites + collaborators + C(advisor_gender) + advisor_pubs + advisor_seniority",
    ),
];

const FULL_CONTROLS: &str = COVARIATE_SETS[2].1;
/// Propensity model for gender: the full controls without gender itself.
const PROPENSITY_CONTROLS: &str =
    "phd_rank + C(grad_year) + pubs + norm_cites + collaborators + C(advisor_gender) + advisor_pubs + advisor_seniority";
const TOP_THRESHOLD: f64 = 10.0;
const LOWESS_FRAC: f64 = 2.0 / 3.0;
const LOWESS_ITERATIONS: usize = 2;
const IDR_BIN: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    IdrTrend,
    PlacementLogit,
    MovementMlogit,
    DeviationGrid,
    GenderPsm,
    ProductivityPoisson,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::IdrTrend,
        Experiment::PlacementLogit,
        Experiment::MovementMlogit,
        Experiment::DeviationGrid,
        Experiment::GenderPsm,
        Experiment::ProductivityPoisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::IdrTrend => "idr-trend",
            Experiment::PlacementLogit => "placement-logit",
            Experiment::MovementMlogit => "movement-mlogit",
            Experiment::DeviationGrid => "deviation-grid",
            Experiment::GenderPsm => "gender-psm",
            Experiment::ProductivityPoisson => "productivity-poisson",
        }
    }

    /// Parses one name, or `all` for every experiment.
    pub fn parse_list(name: &str) -> Result<Vec<Experiment>, ReportError> {
        if name == "all" {
            return Ok(Experiment::ALL.to_vec());
        }
        Ok(vec![name.parse()?])
    }
}

impl FromStr for Experiment {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ReportError::UnknownExperiment(s.to_string()))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportConfig {
    /// Seeds the mobility shuffles and the bootstrap.
    pub seed: u64,
    pub shuffles: usize,
    pub alpha: f64,
    pub idr: IdrMethod,
    pub bootstrap: usize,
    pub caliper: f64,
    pub step: f64,
    pub external_ranks: Option<Rankings>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            seed: 0,
            shuffles: crate::mobility::DEFAULT_SHUFFLES,
            alpha: DEFAULT_ALPHA,
            idr: IdrMethod::Median,
            bootstrap: 1000,
            caliper: DEFAULT_CALIPER,
            step: DEFAULT_STEP,
            external_ranks: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOutput {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// A CSV table built in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| ReportError::Io(e.into_error()))
    }
}

fn real(x: f64) -> String {
    format_real(x)
}

fn analyzed_fields() -> impl Iterator<Item = Field> {
    Field::ALL.into_iter().filter(|f| *f != Field::Humanities)
}

fn field_rows<'a>(rows: &'a [PersonRow], field: Option<Field>) -> Vec<&'a PersonRow> {
    rows.iter().filter(|r| field.is_none_or(|f| r.field == f)).collect()
}

fn field_label(field: Option<Field>) -> String {
    field.map_or_else(|| "all".to_string(), |f| f.to_string())
}

/// Adds field dummies for pooled models.
fn with_field(rhs: &str, field: Option<Field>) -> String {
    match field {
        Some(_) => rhs.to_string(),
        None => format!("{rhs} + C(field)"),
    }
}

fn fit_formula(frame: &Frame, formula: &str, family: Family) -> Result<(FitResult, crate::stats::DesignMatrix), StatsError> {
    let design = build_design(frame, &Formula::parse(formula)?)?;
    let fit = fit_glm(&design, family)?;
    Ok((fit, design))
}

fn coefficient_cells(fit: &FitResult, term: &str) -> Vec<String> {
    match fit.coefficient(term) {
        Some(c) => vec![real(c.estimate), real(c.se), real(c.ci_lower), real(c.ci_upper), real(c.p_value)],
        None => vec![String::new(); 5],
    }
}

fn coefficient_table(fits: &[(&str, &FitResult)]) -> Table {
    let mut t = Table::new(&["model", "term", "estimate", "se", "ci_lo", "ci_hi", "p"]);
    for (label, fit) in fits {
        for c in fit.coefficients() {
            t.push(vec![
                label.to_string(),
                c.term,
                real(c.estimate),
                real(c.se),
                real(c.ci_lower),
                real(c.ci_upper),
                real(c.p_value),
            ]);
        }
    }
    t
}

fn group_seed(seed: u64, group: usize) -> u64 {
    seed ^ ((group as u64 + 1) << 40)
}

fn idr_trend(pipe: &Pipeline, config: &ReportConfig) -> Result<Vec<(String, Table)>, ReportError> {
    let mut trend = Table::new(&["field", "grad_year", "n", "mean_idr", "ci_lo", "ci_hi", "smoothed"]);
    let mut gender = Table::new(&[
        "field", "n_men", "mean_men", "n_women", "mean_women", "difference", "t", "df", "p",
    ]);
    let groups: Vec<Option<Field>> = analyzed_fields().map(Some).chain([None]).collect();
    let mut k = 0;
    for field in groups {
        let rows = field_rows(&pipe.rows, field);
        let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            by_year.entry(r.grad_year).or_default().push(r.idr);
        }
        let years: Vec<f64> = by_year.keys().map(|&y| y as f64).collect();
        let means: Vec<f64> = by_year.values().map(|v| mean(v)).collect();
        let smooth = lowess(&years, &means, LOWESS_FRAC, LOWESS_ITERATIONS).ok();
        for (i, (year, values)) in by_year.iter().enumerate() {
            let ci = bootstrap_ci(values, mean, config.bootstrap, 0.95, group_seed(config.seed, k));
            k += 1;
            let (lo, hi) = ci.map_or((String::new(), String::new()), |c| (real(c.lower), real(c.upper)));
            trend.push(vec![
                field_label(field),
                year.to_string(),
                values.len().to_string(),
                real(means[i]),
                lo,
                hi,
                smooth.as_ref().map_or_else(String::new, |s| real(s[i])),
            ]);
        }
        let of = |g: Gender| rows.iter().filter(|r| r.gender == g).map(|r| r.idr).collect::<Vec<_>>();
        let (men, women) = (of(Gender::Man), of(Gender::Woman));
        let mut row = vec![
            field_label(field),
            men.len().to_string(),
            if men.is_empty() { String::new() } else { real(mean(&men)) },
            women.len().to_string(),
            if women.is_empty() { String::new() } else { real(mean(&women)) },
        ];
        match welch_t(&women, &men) {
            Ok(t) => row.extend([real(t.mean_difference), real(t.t), real(t.df), real(t.p)]),
            Err(_) => row.extend(vec![String::new(); 4]),
        }
        gender.push(row);
    }
    Ok(vec![("idr_trend.csv".into(), trend), ("idr_gender.csv".into(), gender)])
}

/// One grid cell of the placement models.
fn placement_cell(rows: &[&PersonRow], threshold: f64, rhs: &str, step: f64) -> Vec<String> {
    let frame = person_frame(rows);
    let n_top = rows.iter().filter(|r| r.top_at(threshold)).count();
    let formula = format!("top{threshold} ~ {rhs}");
    let mut out = vec![rows.len().to_string(), n_top.to_string()];
    let fitted = fit_formula(&frame, &formula, Family::Logistic).and_then(|(fit, design)| {
        let me = marginal_effect(&fit, &design, &frame, "idr", step)?;
        Ok((fit, me))
    });
    match fitted {
        Ok((fit, me)) => {
            out.extend(coefficient_cells(&fit, "idr"));
            let beta = fit.coef("idr").unwrap_or(f64::NAN);
            out.push(real(100.0 * ((step * beta).exp() - 1.0)));
            out.push(real(me[0].effect));
            out.push("ok".into());
        }
        Err(e) => {
            out.extend(vec![String::new(); 7]);
            out.push(e.to_string());
        }
    }
    out
}

fn placement_logit(pipe: &Pipeline, config: &ReportConfig) -> Result<Vec<(String, Table)>, ReportError> {
    let mut cells = Vec::new();
    for field in analyzed_fields() {
        for threshold in crate::analysis::THRESHOLDS {
            for (set, rhs) in COVARIATE_SETS {
                cells.push((field, threshold, set, rhs));
            }
        }
    }
    let results: Vec<Vec<String>> = cells
        .par_iter()
        .map(|&(field, threshold, set, rhs)| {
            let rows = field_rows(&pipe.rows, Some(field));
            let mut row = vec![field.to_string(), threshold.to_string(), set.to_string()];
            row.extend(placement_cell(&rows, threshold, rhs, config.step));
            row
        })
        .collect();
    let mut grid = Table::new(&[
        "field", "threshold", "covariates", "n", "n_top", "estimate", "se", "ci_lo", "ci_hi", "p",
        "odds_change_pct", "marginal_effect", "status",
    ]);
    results.into_iter().for_each(|r| grid.push(r));

    let frame = pipe.frame();
    let formula = format!("top{TOP_THRESHOLD} ~ {}", with_field(FULL_CONTROLS, None));
    let (fit, _) = fit_formula(&frame, &formula, Family::Logistic)?;
    let pooled = coefficient_table(&[("pooled_top10", &fit)]);
    Ok(vec![
        ("placement_logit.csv".into(), grid),
        ("placement_logit_pooled.csv".into(), pooled),
    ])
}

fn movement_outcome(r: &PersonRow) -> String {
    match (r.top_at(TOP_THRESHOLD), r.move_type) {
        (true, Some(m)) => format!("top_{m}"),
        _ => "non_top".to_string(),
    }
}

fn movement_mlogit(pipe: &Pipeline, config: &ReportConfig) -> Result<Vec<(String, Table)>, ReportError> {
    let mut frame = pipe.frame();
    frame.add_categorical(
        "outcome",
        pipe.rows.iter().map(movement_outcome).collect(),
        Some("non_top"),
    );
    let formula = Formula::parse(&format!("outcome ~ {}", with_field(FULL_CONTROLS, None)))?;
    let design = build_design(&frame, &formula)?;
    let fit = fit_multinomial(&design, Some("non_top"))?;
    let coefs = coefficient_table(&[("mlogit", &fit)]);
    let mut effects = Table::new(&["outcome", "effect", "se", "ci_lo", "ci_hi", "p", "ratio"]);
    for me in marginal_effect(&fit, &design, &frame, "idr", config.step)? {
        effects.push(vec![
            me.outcome,
            real(me.effect),
            real(me.se),
            real(me.ci_lower),
            real(me.ci_upper),
            real(me.p_value),
            me.ratio.map_or_else(String::new, real),
        ]);
    }

    let mut by_type = Table::new(&[
        "movement", "n", "n_top", "estimate", "se", "ci_lo", "ci_hi", "p", "odds_change_pct",
        "marginal_effect", "status",
    ]);
    for m in [MoveType::SameFieldStayer, MoveType::CloseFieldMover, MoveType::DistantFieldMover] {
        let rows: Vec<&PersonRow> = pipe.rows.iter().filter(|r| r.move_type == Some(m)).collect();
        let mut row = vec![m.to_string()];
        row.extend(placement_cell(&rows, TOP_THRESHOLD, &with_field(FULL_CONTROLS, None), config.step));
        by_type.push(row);
    }
    Ok(vec![
        ("movement_mlogit.csv".into(), coefs),
        ("movement_effects.csv".into(), effects),
        ("movement_logit.csv".into(), by_type),
    ])
}

fn idr_bin(idr: f64) -> usize {
    ((idr / IDR_BIN).floor().max(0.0) as usize).min((1.0 / IDR_BIN) as usize - 1)
}

fn idr_label(k: usize) -> String {
    format!("{:.1}-{:.1}", k as f64 * IDR_BIN, (k + 1) as f64 * IDR_BIN)
}

fn decile_label(k: usize) -> String {
    format!("{}-{}", 10 * k, 10 * (k + 1))
}

fn rank_decile(percentile: f64) -> usize {
    ((percentile / 10.0).floor().max(0.0) as usize).min(9)
}

type UnitKey<'a> = (&'a str, SubfieldId, i32);

fn deviation_grid(pipe: &Pipeline, _config: &ReportConfig) -> Result<Vec<(String, Table)>, ReportError> {
    let cohort = &pipe.cohort;
    let index = UnitIndex::new(cohort, Aggregation::MeanOfPersons);
    let mut needed: Vec<UnitKey> = Vec::new();
    let mut units_by_sf: HashMap<SubfieldId, Vec<(&str, f64)>> = HashMap::new();
    for r in &pipe.rows {
        let p = &cohort.persons[r.person];
        let sf = p.placement_subfield;
        let units = units_by_sf.entry(sf).or_insert_with(|| {
            index
                .universities(sf)
                .into_iter()
                .filter_map(|u| pipe.rankings.percentile(sf, u).map(|pct| (u, pct)))
                .collect()
        });
        needed.extend(units.iter().map(|&(u, _)| (u, sf, p.placement_year)));
    }
    needed.sort_unstable();
    needed.dedup();
    let profiles: HashMap<UnitKey, ProfileVector> = needed
        .par_iter()
        .filter_map(|&(u, sf, y)| index.profile(u, sf, y, None).ok().map(|v| ((u, sf, y), v)))
        .collect();

    let n_idr = (1.0 / IDR_BIN) as usize;
    // (sum, count) per idr bin and rank decile; and per idr bin and top flag.
    let mut grid = vec![(0.0, 0usize); n_idr * 10];
    let mut placed = vec![(0.0, 0usize); n_idr * 2];
    for r in &pipe.rows {
        let p = &cohort.persons[r.person];
        let Ok(own) = person_profile(p, cohort) else {
            continue;
        };
        let sf = p.placement_subfield;
        let b = idr_bin(r.idr);
        for &(u, pct) in &units_by_sf[&sf] {
            let Some(unit) = profiles.get(&(u, sf, p.placement_year)) else {
                continue;
            };
            if let Ok(d) = research_deviation(&own, unit) {
                let cell = &mut grid[b * 10 + rank_decile(pct)];
                cell.0 += d;
                cell.1 += 1;
            }
        }
        let actual = index
            .profile(&p.placement_university, sf, p.placement_year, Some(&p.id))
            .ok()
            .and_then(|unit| research_deviation(&own, &unit).ok());
        if let Some(d) = actual {
            let cell = &mut placed[b * 2 + usize::from(r.top_at(TOP_THRESHOLD))];
            cell.0 += d;
            cell.1 += 1;
        }
    }
    let mut t = Table::new(&["idr_bin", "rank_decile", "n", "mean_deviation"]);
    for (k, &(s, n)) in grid.iter().enumerate() {
        if n > 0 {
            t.push(vec![
                idr_label(k / 10),
                decile_label(k % 10),
                n.to_string(),
                real(s / n as f64),
            ]);
        }
    }
    let mut q = Table::new(&["idr_bin", "top10", "n", "mean_deviation"]);
    for (k, &(s, n)) in placed.iter().enumerate() {
        if n > 0 {
            q.push(vec![
                idr_label(k / 2),
                (k % 2).to_string(),
                n.to_string(),
                real(s / n as f64),
            ]);
        }
    }
    Ok(vec![("deviation_grid.csv".into(), t), ("deviation_placement.csv".into(), q)])
}

fn gender_models(rows: &[&PersonRow], field: Option<Field>, caliper: f64) -> Vec<Vec<String>> {
    let frame = person_frame(rows);
    let outcome = format!("top{TOP_THRESHOLD} ~ woman");
    let n_women = rows.iter().filter(|r| r.gender == Gender::Woman).count();
    let mut out = Vec::new();
    let head = |model: &str, matched: String, dropped: String| {
        vec![field_label(field), model.to_string(), rows.len().to_string(), n_women.to_string(), matched, dropped]
    };

    let mut row = head("unadjusted", String::new(), String::new());
    match fit_formula(&frame, &outcome, Family::Logistic) {
        Ok((fit, _)) => {
            row.extend(coefficient_cells(&fit, "woman"));
            row.push("ok".into());
        }
        Err(e) => {
            row.extend(vec![String::new(); 5]);
            row.push(e.to_string());
        }
    }
    out.push(row);

    for (model, extra) in [("matched", ""), ("matched_idr", "idr + ")] {
        let propensity = format!("woman ~ {extra}{}", with_field(PROPENSITY_CONTROLS, field));
        let result = Formula::parse(&propensity)
            .and_then(|f| psm_match(&frame, &f, caliper))
            .and_then(|m| {
                let design = build_design(&frame, &Formula::parse(&outcome)?)?;
                let fit = weighted_glm(&design, &m.weights, Family::Logistic)?;
                Ok((m, fit))
            });
        match result {
            Ok((m, fit)) => {
                let mut row = head(model, m.n_matched_treated.to_string(), m.n_dropped.to_string());
                row.extend(coefficient_cells(&fit, "woman"));
                row.push("ok".into());
                out.push(row);
            }
            Err(e) => {
                let mut row = head(model, String::new(), String::new());
                row.extend(vec![String::new(); 5]);
                row.push(e.to_string());
                out.push(row);
            }
        }
    }
    out
}

fn gender_psm(pipe: &Pipeline, config: &ReportConfig) -> Result<Vec<(String, Table)>, ReportError> {
    let groups: Vec<Option<Field>> = analyzed_fields().map(Some).chain([None]).collect();
    let results: Vec<Vec<Vec<String>>> = groups
        .par_iter()
        .map(|&field| gender_models(&field_rows(&pipe.rows, field), field, config.caliper))
        .collect();
    let mut t = Table::new(&[
        "field", "model", "n", "n_women", "n_matched", "n_dropped", "estimate", "se", "ci_lo", "ci_hi", "p",
        "status",
    ]);
    results.into_iter().flatten().for_each(|r| t.push(r));
    Ok(vec![("gender_psm.csv".into(), t)])
}

/// Log-rate slope of `idr` in relative year `rel` for the top (or non-top)
/// group, with its standard error.
fn idr_slope(fit: &FitResult, rel: &str, top: bool, reference: &str) -> Option<(f64, f64)> {
    let mut terms = vec!["idr".to_string()];
    if rel != reference {
        terms.push(format!("idr:rel_year[{rel}]"));
    }
    if top {
        terms.push("idr:top".to_string());
        if rel != reference {
            terms.push(format!("idr:top:rel_year[{rel}]"));
        }
    }
    let idx: Vec<usize> = terms.iter().map(|t| fit.index(t)).collect::<Option<_>>()?;
    let est = idx.iter().map(|&j| fit.beta[j]).sum();
    let var: f64 = idx
        .iter()
        .flat_map(|&a| idx.iter().map(move |&b| (a, b)))
        .map(|(a, b)| fit.covariance[(a, b)])
        .sum();
    Some((est, var.max(0.0).sqrt()))
}

fn productivity_poisson(pipe: &Pipeline, config: &ReportConfig) -> Result<Vec<(String, Table)>, ReportError> {
    let panel = productivity_panel(pipe, TOP_THRESHOLD);
    let reference = crate::analysis::PANEL_START.to_string();
    let outcomes = ["papers", "hits"];
    let fits: Vec<FitResult> = outcomes
        .par_iter()
        .map(|y| {
            let f = format!("{y} ~ C(rel_year) + idr + idr:C(rel_year) + idr:top + idr:top:C(rel_year)");
            fit_formula(&panel, &f, Family::Poisson).map(|(fit, _)| fit)
        })
        .collect::<Result<_, _>>()?;
    let labelled: Vec<(&str, &FitResult)> = outcomes.iter().copied().zip(&fits).collect();
    let coefs = coefficient_table(&labelled);

    let mut effects = Table::new(&["outcome", "rel_year", "group", "slope", "se", "ci_lo", "ci_hi", "rate_ratio"]);
    for (y, fit) in &labelled {
        for rel in crate::analysis::PANEL_START..=crate::analysis::PANEL_END {
            for top in [false, true] {
                let Some((est, se)) = idr_slope(fit, &rel.to_string(), top, &reference) else {
                    continue;
                };
                effects.push(vec![
                    y.to_string(),
                    rel.to_string(),
                    if top { "top" } else { "non_top" }.to_string(),
                    real(est),
                    real(se),
                    real(est - crate::stats::Z_95 * se),
                    real(est + crate::stats::Z_95 * se),
                    real((config.step * est).exp()),
                ]);
            }
        }
    }
    Ok(vec![
        ("productivity_poisson.csv".into(), coefs),
        ("productivity_effects.csv".into(), effects),
    ])
}

/// SHA-256 over the canonical CSV serialization of the cohort.
pub fn cohort_digest(cohort: &Cohort) -> Result<String, CorpusError> {
    let mut h = Sha256::new();
    for (name, bytes) in corpus_tables(cohort)? {
        h.update(name.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn run_one(pipe: &Pipeline, e: Experiment, config: &ReportConfig) -> Result<Vec<(String, Table)>, ReportError> {
    log::info!("running {e}");
    match e {
        Experiment::IdrTrend => idr_trend(pipe, config),
        Experiment::PlacementLogit => placement_logit(pipe, config),
        Experiment::MovementMlogit => movement_mlogit(pipe, config),
        Experiment::DeviationGrid => deviation_grid(pipe, config),
        Experiment::GenderPsm => gender_psm(pipe, config),
        Experiment::ProductivityPoisson => productivity_poisson(pipe, config),
    }
}

/// Runs `experiment` (a name from [`Experiment::ALL`] or `all`) and writes
/// its tables and the manifest into `out_dir`.
pub fn run_report(
    cohort: &Cohort,
    experiment: &str,
    config: &ReportConfig,
    out_dir: impl AsRef<Path>,
) -> Result<ReportOutput, ReportError> {
    let experiments = Experiment::parse_list(experiment)?;
    let out_dir = out_dir.as_ref();
    let options = PipelineOptions {
        idr: config.idr,
        alpha: config.alpha,
        shuffles: config.shuffles,
        seed: config.seed,
        cutoff_scope: Default::default(),
        external_ranks: config.external_ranks.clone(),
        skip_mobility: !experiments.contains(&Experiment::MovementMlogit),
    };
    let pipe = Pipeline::run(cohort, options)?;
    let mut tables = Vec::new();
    for &e in &experiments {
        tables.extend(run_one(&pipe, e, config)?);
    }

    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut hashes = Vec::new();
    for (name, table) in &tables {
        let bytes = table.to_csv()?;
        let path = out_dir.join(name);
        fs::write(&path, &bytes)?;
        hashes.push((name.clone(), hex(&Sha256::digest(&bytes))));
        files.push(path);
    }

    let mut m = String::new();
    let mut kv = |k: &str, v: String| {
        m.push_str(k);
        m.push('=');
        m.push_str(&v);
        m.push('\n');
    };
    kv("experiment", experiment.to_string());
    kv("version", env!("CARGO_PKG_VERSION").to_string());
    kv("seed", config.seed.to_string());
    kv("shuffles", config.shuffles.to_string());
    kv("alpha", real(config.alpha));
    kv(
        "idr_variant",
        match config.idr {
            IdrMethod::Median => "median",
            IdrMethod::Pooled => "pooled",
        }
        .to_string(),
    );
    kv("bootstrap", config.bootstrap.to_string());
    kv("caliper", real(config.caliper));
    kv("step", real(config.step));
    kv("top_threshold", real(TOP_THRESHOLD));
    kv(
        "rankings",
        if config.external_ranks.is_some() { "external" } else { "springrank" }.to_string(),
    );
    kv("input_sha256", cohort_digest(cohort)?);
    kv("persons_input", cohort.persons.len().to_string());
    kv("persons_filtered", pipe.cohort.persons.len().to_string());
    kv("persons_analyzed", pipe.rows.len().to_string());
    for (name, h) in &hashes {
        kv(&format!("output.{name}"), h.clone());
    }
    let manifest = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest, m)?;
    Ok(ReportOutput { files, manifest })
}
