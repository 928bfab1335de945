//! Production rankings of universities within a subfield.
//!
//! Every faculty member placed in a subfield contributes one directed edge
//! from the Ph.D. university to the hiring university. SpringRank treats each
//! edge as a spring of rest length one and places universities on a line so
//! the total spring energy
//!
//! ```text
//! H(s) = ½ Σ_ij A_ij (s_i − s_j − 1)² + ½ α ‖s‖²
//! ```
//!
//! is minimal. Setting the gradient to zero gives the sparse symmetric
//! positive definite system
//!
//! ```text
//! [D_out + D_in − (A + Aᵀ) + α I] s = d_out − d_in
//! ```
//!
//! which is solved with preconditioned conjugate gradient.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use thiserror::Error;

use crate::corpus::Cohort;
use crate::linalg::{conjugate_gradient, CsrMatrix, SolverError};
use crate::taxonomy::SubfieldId;

/// Regularization used when none is given.
pub const DEFAULT_ALPHA: f64 = 0.01;
/// Absolute residual the solver must reach.
pub const SOLVER_TOLERANCE: f64 = 1e-10;
/// Scores closer than this are treated as tied when assigning percentiles.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("subfield {subfield} has {nodes} universities with placements, need at least 2")]
    TooFewNodes { subfield: SubfieldId, nodes: usize },
    #[error("regularization must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("springrank solver: {0}")]
    SolverDivergence(#[from] SolverError),
    #[error("external ranks line {line}: {reason}")]
    MalformedRank { line: u64, reason: String },
}

/// Directed multigraph of Ph.D. → placement flows in one subfield.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementGraph {
    pub subfield: SubfieldId,
    /// University ids, sorted.
    pub nodes: Vec<String>,
    /// (source, target) node indices → number of placements.
    pub edges: BTreeMap<(usize, usize), u32>,
}

impl PlacementGraph {
    pub fn from_edges<'a>(
        subfield: SubfieldId,
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Self {
        let pairs: Vec<(&str, &str)> = edges.into_iter().collect();
        let nodes: Vec<String> = pairs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect();
        let index: HashMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut weights = BTreeMap::new();
        for (a, b) in pairs {
            *weights.entry((index[a], index[b])).or_insert(0) += 1;
        }
        PlacementGraph {
            subfield,
            nodes,
            edges: weights,
        }
    }

    pub fn weight(&self, source: &str, target: &str) -> u32 {
        let find = |u: &str| self.nodes.binary_search_by(|n| n.as_str().cmp(u)).ok();
        match (find(source), find(target)) {
            (Some(a), Some(b)) => self.edges.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// The same graph with every edge reversed.
    pub fn reversed(&self) -> PlacementGraph {
        PlacementGraph {
            subfield: self.subfield,
            nodes: self.nodes.clone(),
            edges: self.edges.iter().map(|(&(a, b), &w)| ((b, a), w)).collect(),
        }
    }
}

pub fn placement_graph(cohort: &Cohort, subfield: SubfieldId) -> Result<PlacementGraph, RankError> {
    let graph = PlacementGraph::from_edges(
        subfield,
        cohort
            .persons
            .iter()
            .filter(|p| p.placement_subfield == subfield)
            .map(|p| (p.phd_university.as_str(), p.placement_university.as_str())),
    );
    if graph.nodes.len() < 2 {
        return Err(RankError::TooFewNodes {
            subfield,
            nodes: graph.nodes.len(),
        });
    }
    Ok(graph)
}

/// Solved SpringRank positions.
#[derive(Clone, Debug, PartialEq)]
pub struct SpringRank {
    pub scores: BTreeMap<String, f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Linear system `(L, b)` whose solution minimizes the spring energy.
pub fn springrank_system(graph: &PlacementGraph, alpha: f64) -> (CsrMatrix, Vec<f64>) {
    let n = graph.nodes.len();
    let mut out_deg = vec![0.0; n];
    let mut in_deg = vec![0.0; n];
    let mut triplets = Vec::with_capacity(2 * graph.edges.len() + n);
    for (&(i, j), &w) in &graph.edges {
        let w = w as f64;
        out_deg[i] += w;
        in_deg[j] += w;
        triplets.push((i, j, -w));
        triplets.push((j, i, -w));
    }
    for i in 0..n {
        triplets.push((i, i, out_deg[i] + in_deg[i] + alpha));
    }
    let b = out_deg.iter().zip(&in_deg).map(|(o, i)| o - i).collect();
    (CsrMatrix::from_triplets(n, triplets), b)
}

pub fn springrank(graph: &PlacementGraph, alpha: f64) -> Result<SpringRank, RankError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(RankError::InvalidAlpha(alpha));
    }
    let (matrix, b) = springrank_system(graph, alpha);
    let n = graph.nodes.len();
    let sol = conjugate_gradient(&matrix, &b, SOLVER_TOLERANCE, 10 * n.max(1))?;
    Ok(SpringRank {
        scores: graph.nodes.iter().cloned().zip(sol.x).collect(),
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// Spring energy of a score assignment.
pub fn spring_energy(graph: &PlacementGraph, alpha: f64, scores: &[f64]) -> f64 {
    let springs: f64 = graph
        .edges
        .iter()
        .map(|(&(i, j), &w)| w as f64 * (scores[i] - scores[j] - 1.0).powi(2))
        .sum();
    0.5 * springs + 0.5 * alpha * scores.iter().map(|s| s * s).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankRow {
    pub university: String,
    pub score: f64,
    pub percentile: f64,
}

/// University scores and percentiles for one subfield (or one external list).
#[derive(Clone, Debug, PartialEq)]
pub struct RankTable {
    pub subfield: Option<SubfieldId>,
    /// Sorted by descending score, then ascending university id.
    pub rows: Vec<RankRow>,
    index: HashMap<String, usize>,
}

impl RankTable {
    fn new(subfield: Option<SubfieldId>, mut rows: Vec<RankRow>) -> Self {
        rows.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.university.cmp(&b.university))
        });
        let index = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.university.clone(), i))
            .collect();
        RankTable {
            subfield,
            rows,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, university: &str) -> Option<&RankRow> {
        self.index.get(university).map(|&i| &self.rows[i])
    }

    pub fn percentile(&self, university: &str) -> Option<f64> {
        self.get(university).map(|r| r.percentile)
    }

    pub fn with_subfield(mut self, subfield: SubfieldId) -> Self {
        self.subfield = Some(subfield);
        self
    }
}

/// Converts scores to rank percentiles: `100 · position / (N − 1)` with
/// positions counted from the lowest score, tied scores sharing the mean of
/// their positions. A single university gets 50.
pub fn percentiles(scores: &BTreeMap<String, f64>) -> RankTable {
    let mut order: Vec<(&String, f64)> = scores.iter().map(|(u, &s)| (u, s)).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let n = order.len();
    let mut rows = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && order[end + 1].1 - order[end].1 <= TIE_TOLERANCE {
            end += 1;
        }
        let percentile = if n > 1 {
            100.0 * ((start + end) as f64 / 2.0) / (n - 1) as f64
        } else {
            50.0
        };
        for &(u, s) in &order[start..=end] {
            rows.push(RankRow {
                university: u.clone(),
                score: s,
                percentile,
            });
        }
        start = end + 1;
    }
    RankTable::new(None, rows)
}

/// Number of members in a top `x_percent` set of `n` universities.
pub fn top_count(n: usize, x_percent: f64) -> usize {
    let raw = x_percent / 100.0 * n as f64;
    // Guard against products such as 0.1 · 110 landing just above an integer.
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// The `ceil(x/100 · N)` highest-scoring universities; boundary ties are
/// broken by ascending university id.
pub fn top_set(table: &RankTable, x_percent: f64) -> BTreeSet<String> {
    top_n(table, top_count(table.len(), x_percent))
}

pub fn top_n(table: &RankTable, n: usize) -> BTreeSet<String> {
    table
        .rows
        .iter()
        .take(n)
        .map(|r| r.university.clone())
        .collect()
}

/// Reads a `university,rank` list (rank 1 is best) into a table whose score
/// is the negated rank.
pub fn parse_external_ranks<R: Read>(input: R) -> Result<RankTable, RankError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let malformed = |line: u64, reason: String| RankError::MalformedRank { line, reason };
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(1, format!("missing column `{name}`")))
    };
    let (ui, ri) = (col("university")?, col("rank")?);
    let mut scores = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            malformed(e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let university = record.get(ui).unwrap_or("");
        if university.is_empty() {
            return Err(malformed(line, "empty university".into()));
        }
        let rank: f64 = record
            .get(ri)
            .and_then(|s| s.parse().ok())
            .filter(|r: &f64| r.is_finite() && *r >= 1.0)
            .ok_or_else(|| malformed(line, "rank must be a number ≥ 1".into()))?;
        if scores.insert(university.to_string(), -rank).is_some() {
            return Err(malformed(line, format!("duplicate university `{university}`")));
        }
    }
    Ok(percentiles(&scores))
}

/// Rank tables used by downstream analyses.
#[derive(Clone, Debug, PartialEq)]
pub enum Rankings {
    /// One SpringRank table per subfield.
    BySubfield(BTreeMap<SubfieldId, RankTable>),
    /// A single external list applied to every subfield.
    External(RankTable),
}

impl Rankings {
    /// SpringRank tables for every subfield with at least two universities.
    pub fn springrank(cohort: &Cohort, alpha: f64) -> Result<Rankings, RankError> {
        let mut tables = BTreeMap::new();
        for sf in SubfieldId::all() {
            let graph = match placement_graph(cohort, sf) {
                Ok(g) => g,
                Err(RankError::TooFewNodes { .. }) => continue,
                Err(e) => return Err(e),
            };
            let scores = springrank(&graph, alpha)?;
            tables.insert(sf, percentiles(&scores.scores).with_subfield(sf));
        }
        Ok(Rankings::BySubfield(tables))
    }

    pub fn table(&self, subfield: SubfieldId) -> Option<&RankTable> {
        match self {
            Rankings::BySubfield(t) => t.get(&subfield),
            Rankings::External(t) => Some(t),
        }
    }

    pub fn percentile(&self, subfield: SubfieldId, university: &str) -> Option<f64> {
        self.table(subfield)?.percentile(university)
    }

    /// Top sets for one threshold, keyed by subfield.
    pub fn top_sets(&self, x_percent: f64) -> TopSets {
        let sets = SubfieldId::all()
            .filter_map(|sf| self.table(sf).map(|t| (sf, top_set(t, x_percent))))
            .collect();
        TopSets { sets }
    }
}

/// Membership lookup for one top-X% threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct TopSets {
    sets: BTreeMap<SubfieldId, BTreeSet<String>>,
}

impl TopSets {
    /// `None` when the subfield has no ranking or the university is unranked.
    pub fn contains(&self, subfield: SubfieldId, university: &str) -> bool {
        self.sets
            .get(&subfield)
            .is_some_and(|s| s.contains(university))
    }

    pub fn get(&self, subfield: SubfieldId) -> Option<&BTreeSet<String>> {
        self.sets.get(&subfield)
    }
}
