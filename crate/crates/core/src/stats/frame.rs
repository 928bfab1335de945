//! Data frames, model formulas and design matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::StatsError;

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    /// Values with their level order; the first level is the reference.
    Categorical { values: Vec<String>, levels: Vec<String> },
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { values, .. } => values.len(),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical { values, levels } => {
                let values: Vec<String> = rows.iter().map(|&i| values[i].clone()).collect();
                let present: BTreeSet<&String> = values.iter().collect();
                let levels = levels.iter().filter(|l| present.contains(l)).cloned().collect();
                Column::Categorical { values, levels }
            }
        }
    }
}

/// Column-oriented table of observations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Frame {
    n: usize,
    columns: BTreeMap<String, Column>,
}

impl Frame {
    pub fn new(n: usize) -> Self {
        Frame {
            n,
            columns: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn insert(&mut self, name: &str, col: Column) {
        assert_eq!(col.len(), self.n, "column `{name}` has the wrong length");
        self.columns.insert(name.to_string(), col);
    }

    pub fn add_numeric(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        self.insert(name, Column::Numeric(values));
        self
    }

    /// Adds a categorical column with levels sorted; `reference` (if given)
    /// is moved to the front.
    pub fn add_categorical(&mut self, name: &str, values: Vec<String>, reference: Option<&str>) -> &mut Self {
        let mut levels: Vec<String> = values.iter().collect::<BTreeSet<_>>().into_iter().cloned().collect();
        if let Some(r) = reference {
            if let Some(pos) = levels.iter().position(|l| l == r) {
                let l = levels.remove(pos);
                levels.insert(0, l);
            }
        }
        self.insert(name, Column::Categorical { values, levels });
        self
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.get(name)
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], StatsError> {
        match self.columns.get(name) {
            Some(Column::Numeric(v)) => Ok(v),
            Some(_) => Err(StatsError::InvalidResponse(format!("`{name}` is not numeric"))),
            None => Err(StatsError::MissingCovariate(name.to_string())),
        }
    }

    pub fn categorical(&self, name: &str) -> Result<(&[String], &[String]), StatsError> {
        match self.columns.get(name) {
            Some(Column::Categorical { values, levels }) => Ok((values, levels)),
            Some(_) => Err(StatsError::InvalidResponse(format!("`{name}` is not categorical"))),
            None => Err(StatsError::MissingCovariate(name.to_string())),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, rows: &[usize]) -> Frame {
        Frame {
            n: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|(k, c)| (k.clone(), c.select(rows)))
                .collect(),
        }
    }

    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Frame {
        let rows: Vec<usize> = (0..self.n).filter(|&i| keep(i)).collect();
        self.select(&rows)
    }

    /// A copy with `step` added to a numeric column.
    pub fn shifted(&self, name: &str, step: f64) -> Result<Frame, StatsError> {
        let values = self
            .numeric(name)
            .map_err(|_| StatsError::UnknownVariable(name.to_string()))?
            .iter()
            .map(|v| v + step)
            .collect();
        let mut out = self.clone();
        out.columns.insert(name.to_string(), Column::Numeric(values));
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Factor {
    /// Numeric or categorical depending on the column.
    Var(String),
    /// Forced categorical, `C(name)`.
    Cat(String),
}

impl Factor {
    pub fn name(&self) -> &str {
        match self {
            Factor::Var(n) | Factor::Cat(n) => n,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Var(n) => f.write_str(n),
            Factor::Cat(n) => write!(f, "C({n})"),
        }
    }
}

/// Product of one or more factors.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Term(pub Vec<Factor>);

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(Factor::to_string).collect();
        f.write_str(&parts.join(":"))
    }
}

/// `response ~ a + b + C(year) + a:b`, with `a*b` expanding to `a + b + a:b`
/// and `- 1` or `0 +` removing the intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct Formula {
    pub response: Option<String>,
    pub intercept: bool,
    pub terms: Vec<Term>,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !s.chars().next().unwrap().is_ascii_digit()
}

fn parse_factor(s: &str) -> Result<Factor, StatsError> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("C(").and_then(|r| r.strip_suffix(')')) {
        let inner = inner.trim();
        if is_ident(inner) {
            return Ok(Factor::Cat(inner.to_string()));
        }
    } else if is_ident(s) {
        return Ok(Factor::Var(s.to_string()));
    }
    Err(StatsError::Formula(format!("bad term `{s}`")))
}

impl Formula {
    pub fn new(response: Option<&str>, terms: Vec<Term>) -> Self {
        Formula {
            response: response.map(str::to_string),
            intercept: true,
            terms,
        }
    }

    pub fn parse(text: &str) -> Result<Formula, StatsError> {
        let (response, rhs) = match text.split_once('~') {
            Some((lhs, rhs)) => {
                let lhs = lhs.trim();
                if !is_ident(lhs) {
                    return Err(StatsError::Formula(format!("bad response `{lhs}`")));
                }
                (Some(lhs.to_string()), rhs)
            }
            None => (None, text),
        };
        let mut intercept = true;
        let mut terms: Vec<Term> = Vec::new();
        let push = |t: Term, terms: &mut Vec<Term>| {
            if !terms.contains(&t) {
                terms.push(t);
            }
        };
        for (k, chunk) in rhs.split('+').enumerate() {
            let mut chunk = chunk.trim();
            if let Some(rest) = chunk.strip_suffix("- 1").or_else(|| chunk.strip_suffix("-1")) {
                intercept = false;
                chunk = rest.trim();
                if chunk.is_empty() {
                    continue;
                }
            }
            match chunk {
                "" => return Err(StatsError::Formula("empty term".into())),
                "1" => continue,
                "0" if k == 0 => {
                    intercept = false;
                    continue;
                }
                _ => {}
            }
            if chunk.contains('*') {
                let factors = chunk.split('*').map(parse_factor).collect::<Result<Vec<_>, _>>()?;
                // All non-empty subsets, by size then position.
                let n = factors.len();
                let mut subsets: Vec<Vec<usize>> = (1u32..(1 << n))
                    .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
                    .collect();
                subsets.sort_by_key(|s: &Vec<usize>| (s.len(), s.clone()));
                for s in subsets {
                    push(Term(s.iter().map(|&i| factors[i].clone()).collect()), &mut terms);
                }
            } else {
                let factors = chunk.split(':').map(parse_factor).collect::<Result<Vec<_>, _>>()?;
                push(Term(factors), &mut terms);
            }
        }
        if terms.is_empty() && !intercept {
            return Err(StatsError::Formula("formula has no terms".into()));
        }
        Ok(Formula {
            response,
            intercept,
            terms,
        })
    }

    pub fn with_response(mut self, response: &str) -> Self {
        self.response = Some(response.to_string());
        self
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = &self.response {
            write!(f, "{r} ~ ")?;
        }
        let mut parts: Vec<String> = Vec::new();
        if !self.intercept {
            parts.push("0".into());
        } else if self.terms.is_empty() {
            parts.push("1".into());
        }
        parts.extend(self.terms.iter().map(Term::to_string));
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    None,
    Numeric(Vec<f64>),
    Categorical { values: Vec<String>, levels: Vec<String> },
}

/// Row-major model matrix with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub n: usize,
    pub p: usize,
    pub x: Vec<f64>,
    pub names: Vec<String>,
    pub response: Response,
    pub formula: Formula,
    /// Category levels used for each categorical factor.
    pub levels: BTreeMap<String, Vec<String>>,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.x[i * self.p + j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn y(&self) -> Result<&[f64], StatsError> {
        match &self.response {
            Response::Numeric(y) => Ok(y),
            _ => Err(StatsError::InvalidResponse("numeric response required".into())),
        }
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], y: Vec<f64>) -> Self {
        let p = names.len();
        let n = rows.len();
        let x = rows.iter().flat_map(|r| {
            assert_eq!(r.len(), p);
            r.iter().copied()
        });
        DesignMatrix {
            n,
            p,
            x: x.collect(),
            names,
            response: Response::Numeric(y),
            formula: Formula {
                response: None,
                intercept: false,
                terms: vec![],
            },
            levels: BTreeMap::new(),
        }
    }

    /// The same model evaluated on another frame, reusing this design's
    /// category levels and skipping the constant-column check.
    pub fn rebuild(&self, frame: &Frame) -> Result<DesignMatrix, StatsError> {
        assemble(frame, &self.formula, Some(&self.levels), false)
    }

    /// Rows at the given indices.
    pub fn select(&self, rows: &[usize]) -> DesignMatrix {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            x.extend_from_slice(self.row(i));
        }
        let response = match &self.response {
            Response::None => Response::None,
            Response::Numeric(y) => Response::Numeric(rows.iter().map(|&i| y[i]).collect()),
            Response::Categorical { values, levels } => Response::Categorical {
                values: rows.iter().map(|&i| values[i].clone()).collect(),
                levels: levels.clone(),
            },
        };
        DesignMatrix {
            n: rows.len(),
            x,
            response,
            ..self.clone()
        }
    }
}

enum Block<'a> {
    Numeric(&'a [f64]),
    /// Per-row level index into `levels`, with the dummy levels (all but the first).
    Dummies { codes: Vec<Option<usize>>, levels: Vec<String> },
}

fn format_level(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn factor_block<'a>(
    frame: &'a Frame,
    factor: &Factor,
    known: Option<&BTreeMap<String, Vec<String>>>,
    levels_out: &mut BTreeMap<String, Vec<String>>,
) -> Result<Block<'a>, StatsError> {
    let name = factor.name();
    let column = frame
        .column(name)
        .ok_or_else(|| StatsError::MissingCovariate(name.to_string()))?;
    let (values, default_levels): (Vec<String>, Vec<String>) = match (factor, column) {
        (Factor::Var(_), Column::Numeric(v)) => return Ok(Block::Numeric(v)),
        (Factor::Cat(_), Column::Numeric(v)) => {
            let mut uniq: Vec<f64> = v.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            (v.iter().map(|&x| format_level(x)).collect(), uniq.into_iter().map(format_level).collect())
        }
        (_, Column::Categorical { values, levels }) => (values.clone(), levels.clone()),
    };
    let levels = known
        .and_then(|k| k.get(name).cloned())
        .unwrap_or(default_levels);
    let codes = values
        .iter()
        .map(|v| levels.iter().position(|l| l == v))
        .collect();
    levels_out.insert(name.to_string(), levels.clone());
    Ok(Block::Dummies { codes, levels })
}

fn assemble(
    frame: &Frame,
    formula: &Formula,
    known: Option<&BTreeMap<String, Vec<String>>>,
    check_constant: bool,
) -> Result<DesignMatrix, StatsError> {
    let n = frame.len();
    let mut levels = BTreeMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if formula.intercept {
        names.push("(Intercept)".into());
        cols.push(vec![1.0; n]);
    }
    for term in &formula.terms {
        let mut partial: Vec<(String, Vec<f64>)> = vec![(String::new(), vec![1.0; n])];
        for factor in &term.0 {
            let block = factor_block(frame, factor, known, &mut levels)?;
            let pieces: Vec<(String, Vec<f64>)> = match block {
                Block::Numeric(v) => vec![(factor.name().to_string(), v.to_vec())],
                Block::Dummies { codes, levels } => levels
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, l)| {
                        let col = codes.iter().map(|&c| if c == Some(k) { 1.0 } else { 0.0 }).collect();
                        (format!("{}[{l}]", factor.name()), col)
                    })
                    .collect(),
            };
            partial = partial
                .iter()
                .flat_map(|(pn, pv)| {
                    pieces.iter().map(move |(qn, qv)| {
                        let name = if pn.is_empty() { qn.clone() } else { format!("{pn}:{qn}") };
                        (name, pv.iter().zip(qv).map(|(a, b)| a * b).collect())
                    })
                })
                .collect();
        }
        for (name, col) in partial {
            names.push(name);
            cols.push(col);
        }
    }
    if check_constant {
        let start = usize::from(formula.intercept);
        for (name, col) in names.iter().zip(&cols).skip(start) {
            if col.iter().all(|&v| v == col[0]) {
                return Err(StatsError::ConstantColumn(name.clone()));
            }
        }
    }
    let response = match &formula.response {
        None => Response::None,
        Some(r) => match frame.column(r) {
            Some(Column::Numeric(v)) => Response::Numeric(v.clone()),
            Some(Column::Categorical { values, levels }) => Response::Categorical {
                values: values.clone(),
                levels: levels.clone(),
            },
            None => return Err(StatsError::MissingCovariate(r.clone())),
        },
    };
    let p = names.len();
    let mut x = vec![0.0; n * p];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            x[i * p + j] = *v;
        }
    }
    Ok(DesignMatrix {
        n,
        p,
        x,
        names,
        response,
        formula: formula.clone(),
        levels,
    })
}

/// Expands a formula against a frame. Categorical factors become dummies for
/// every level except the first.
pub fn build_design(frame: &Frame, formula: &Formula) -> Result<DesignMatrix, StatsError> {
    assemble(frame, formula, None, true)
}
