//! Columnar CSV ingest and export.
//!
//! Files are UTF-8, comma separated, RFC-4180 quoted, with a header row.
//! Columns are located by header name; extra columns are ignored.
//!
//! | file             | columns                                                                 |
//! |------------------|-------------------------------------------------------------------------|
//! | `persons.csv`    | person_id, gender, phd_university, phd_subfield, grad_year, placement_university, placement_subfield, placement_year, unique_collaborators, advisor_gender, advisor_5yr_pubs, advisor_seniority_years, paper_ids |
//! | `papers.csv`     | paper_id, pub_year, discipline_id, author_count, citations              |
//! | `references.csv` | paper_id, ref_discipline_id, count, ref_id (optional)                   |
//! | `baselines.csv`  | discipline_id, year, mean_citations                                     |
//! | `incumbents.csv` | incumbent_id, university, subfield, first_year, last_year, paper_ids (optional file) |
//!
//! `paper_ids` is a `;`-separated list.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{
    Advisor, Cohort, CorpusError, Gender, Incumbent, IncumbentRecord, Paper, Person, PersonRecord,
};
use crate::taxonomy::{DisciplineId, Field, SubfieldId};

pub const PERSONS_FILE: &str = "persons.csv";
pub const PAPERS_FILE: &str = "papers.csv";
pub const REFERENCES_FILE: &str = "references.csv";
pub const BASELINES_FILE: &str = "baselines.csv";
pub const INCUMBENTS_FILE: &str = "incumbents.csv";

const PERSON_COLUMNS: [&str; 13] = [
    "person_id",
    "gender",
    "phd_university",
    "phd_subfield",
    "grad_year",
    "placement_university",
    "placement_subfield",
    "placement_year",
    "unique_collaborators",
    "advisor_gender",
    "advisor_5yr_pubs",
    "advisor_seniority_years",
    "paper_ids",
];
const PAPER_COLUMNS: [&str; 5] = [
    "paper_id",
    "pub_year",
    "discipline_id",
    "author_count",
    "citations",
];
const REFERENCE_COLUMNS: [&str; 3] = ["paper_id", "ref_discipline_id", "count"];
const BASELINE_COLUMNS: [&str; 3] = ["discipline_id", "year", "mean_citations"];
const INCUMBENT_COLUMNS: [&str; 6] = [
    "incumbent_id",
    "university",
    "subfield",
    "first_year",
    "last_year",
    "paper_ids",
];

/// Input options applied while loading.
#[derive(Clone, Debug, PartialEq)]
pub struct IngestOptions {
    /// Persons whose Ph.D. subfield belongs to one of these fields are dropped.
    pub exclude_fields: Vec<Field>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            exclude_fields: vec![Field::Humanities],
        }
    }
}

/// Locations of the corpus files.
#[derive(Clone, Debug)]
pub struct CorpusFiles {
    pub persons: PathBuf,
    pub papers: PathBuf,
    pub references: PathBuf,
    pub baselines: PathBuf,
    pub incumbents: Option<PathBuf>,
}

impl CorpusFiles {
    /// Standard file names inside `dir`; `incumbents.csv` is used if present.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let incumbents = dir.join(INCUMBENTS_FILE);
        CorpusFiles {
            persons: dir.join(PERSONS_FILE),
            papers: dir.join(PAPERS_FILE),
            references: dir.join(REFERENCES_FILE),
            baselines: dir.join(BASELINES_FILE),
            incumbents: incumbents.exists().then_some(incumbents),
        }
    }
}

/// Row counts observed while loading.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadSummary {
    pub persons: usize,
    pub excluded_persons: usize,
    pub papers: usize,
    pub reference_rows: usize,
    pub baselines: usize,
    pub incumbents: usize,
}

/// One row of `references.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRow {
    pub paper_id: String,
    pub discipline: DisciplineId,
    pub count: u32,
    pub ref_id: Option<String>,
}

pub fn load_corpus(
    files: &CorpusFiles,
    options: &IngestOptions,
) -> Result<(Cohort, LoadSummary), CorpusError> {
    let open = |p: &Path| -> Result<BufReader<File>, CorpusError> {
        Ok(BufReader::new(File::open(p)?))
    };
    let name = |p: &Path| p.display().to_string();

    let persons = parse_persons(open(&files.persons)?, &name(&files.persons))?;
    let papers = parse_papers(open(&files.papers)?, &name(&files.papers))?;
    let refs = parse_references(open(&files.references)?, &name(&files.references))?;
    let baselines = parse_baselines(open(&files.baselines)?, &name(&files.baselines))?;
    let incumbents = match &files.incumbents {
        Some(p) => parse_incumbents(open(p)?, &name(p))?,
        None => Vec::new(),
    };

    let mut summary = LoadSummary {
        papers: papers.len(),
        reference_rows: refs.len(),
        baselines: baselines.len(),
        incumbents: incumbents.len(),
        ..Default::default()
    };

    let papers = attach_references(papers, refs)?;
    let total = persons.len();
    let persons: Vec<PersonRecord> = persons
        .into_iter()
        .filter(|r| !options.exclude_fields.contains(&r.person.phd_subfield.field()))
        .collect();
    summary.excluded_persons = total - persons.len();
    summary.persons = persons.len();

    let cohort = Cohort::assemble(persons, papers, incumbents, baselines)?;
    log::info!(
        "loaded {} persons ({} excluded), {} papers, {} reference rows, {} baselines, {} incumbents",
        summary.persons,
        summary.excluded_persons,
        summary.papers,
        summary.reference_rows,
        summary.baselines,
        summary.incumbents
    );
    Ok((cohort, summary))
}

/// Merges reference rows into their papers.
pub fn attach_references(
    mut papers: Vec<Paper>,
    refs: Vec<ReferenceRow>,
) -> Result<Vec<Paper>, CorpusError> {
    let index: HashMap<&str, usize> = papers
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let mut counts: Vec<BTreeMap<DisciplineId, u32>> = vec![BTreeMap::new(); papers.len()];
    let mut ids: Vec<BTreeMap<String, DisciplineId>> = vec![BTreeMap::new(); papers.len()];
    for row in refs {
        let &i = index
            .get(row.paper_id.as_str())
            .ok_or_else(|| CorpusError::DanglingReference(row.paper_id.clone()))?;
        *counts[i].entry(row.discipline).or_default() += row.count;
        if let Some(rid) = row.ref_id {
            if ids[i].insert(rid.clone(), row.discipline).is_some() {
                return Err(CorpusError::DuplicateId(format!("{}/{}", row.paper_id, rid)));
            }
        }
    }
    for ((paper, c), r) in papers.iter_mut().zip(counts).zip(ids) {
        paper.ref_counts = c.into_iter().filter(|&(_, n)| n > 0).collect();
        let mut ref_ids: Vec<(String, DisciplineId)> = r.into_iter().collect();
        ref_ids.sort();
        paper.ref_ids = ref_ids;
    }
    Ok(papers)
}

struct Table<R: Read> {
    file: String,
    reader: csv::Reader<R>,
    columns: HashMap<String, usize>,
}

struct Row<'a> {
    file: &'a str,
    line: u64,
    record: &'a csv::StringRecord,
    columns: &'a HashMap<String, usize>,
}

impl<R: Read> Table<R> {
    fn open(input: R, file: &str, required: &[&str]) -> Result<Self, CorpusError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers().map_err(|e| malformed(file, 1, e.to_string()))?;
        let columns: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i))
            .collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(malformed(file, 1, format!("missing column `{col}`")));
            }
        }
        Ok(Table {
            file: file.to_string(),
            reader,
            columns,
        })
    }

    fn for_each<F>(&mut self, mut f: F) -> Result<(), CorpusError>
    where
        F: FnMut(&Row<'_>) -> Result<(), CorpusError>,
    {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(true) => {}
                Ok(false) => return Ok(()),
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Err(malformed(&self.file, line, e.to_string()));
                }
            }
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.iter().all(str::is_empty) {
                continue;
            }
            f(&Row {
                file: &self.file,
                line,
                record: &record,
                columns: &self.columns,
            })?;
        }
    }
}

impl Row<'_> {
    fn error(&self, reason: impl Into<String>) -> CorpusError {
        malformed(self.file, self.line, reason.into())
    }

    fn raw(&self, column: &str) -> Option<&str> {
        self.columns.get(column).and_then(|&i| self.record.get(i))
    }

    fn text(&self, column: &str) -> Result<&str, CorpusError> {
        self.raw(column)
            .ok_or_else(|| self.error(format!("missing field `{column}`")))
    }

    fn id(&self, column: &str) -> Result<String, CorpusError> {
        let s = self.text(column)?;
        if s.is_empty() {
            return Err(self.error(format!("empty `{column}`")));
        }
        Ok(s.to_string())
    }

    fn parse<T: FromStr>(&self, column: &str) -> Result<T, CorpusError> {
        let s = self.text(column)?;
        s.parse()
            .map_err(|_| self.error(format!("invalid `{column}`: {s:?}")))
    }

    fn discipline(&self, column: &str) -> Result<DisciplineId, CorpusError> {
        let v: u32 = self.parse(column)?;
        DisciplineId::new(v)
            .ok_or_else(|| self.error(format!("`{column}` {v} outside 1..=144")))
    }

    fn subfield(&self, column: &str) -> Result<SubfieldId, CorpusError> {
        let v: u32 = self.parse(column)?;
        SubfieldId::new(v).ok_or_else(|| self.error(format!("`{column}` {v} outside 1..=24")))
    }

    fn gender(&self, column: &str) -> Result<Gender, CorpusError> {
        let s = self.text(column)?;
        Gender::parse(&s.to_ascii_lowercase())
            .ok_or_else(|| self.error(format!("invalid `{column}`: {s:?}")))
    }

    fn id_list(&self, column: &str) -> Result<Vec<String>, CorpusError> {
        Ok(self
            .text(column)?
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect())
    }
}

fn malformed(file: &str, line: u64, reason: String) -> CorpusError {
    CorpusError::MalformedRow {
        file: file.to_string(),
        line,
        reason,
    }
}

pub fn parse_persons<R: Read>(input: R, file: &str) -> Result<Vec<PersonRecord>, CorpusError> {
    let mut table = Table::open(input, file, &PERSON_COLUMNS)?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let person = Person {
            id: row.id("person_id")?,
            gender: row.gender("gender")?,
            phd_university: row.id("phd_university")?,
            phd_subfield: row.subfield("phd_subfield")?,
            grad_year: row.parse("grad_year")?,
            placement_university: row.id("placement_university")?,
            placement_subfield: row.subfield("placement_subfield")?,
            placement_year: row.parse("placement_year")?,
            unique_collaborators: row.parse("unique_collaborators")?,
            advisor: Advisor {
                gender: row.gender("advisor_gender")?,
                five_year_pubs: row.parse("advisor_5yr_pubs")?,
                seniority_years: row.parse("advisor_seniority_years")?,
            },
            papers: Vec::new(),
        };
        out.push(PersonRecord {
            person,
            paper_ids: row.id_list("paper_ids")?,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Parses `papers.csv`; reference data is attached separately.
pub fn parse_papers<R: Read>(input: R, file: &str) -> Result<Vec<Paper>, CorpusError> {
    let mut table = Table::open(input, file, &PAPER_COLUMNS)?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let author_count: u32 = row.parse("author_count")?;
        if author_count == 0 {
            return Err(row.error("`author_count` must be at least 1"));
        }
        let mut paper = Paper::new(row.id("paper_id")?, row.parse("pub_year")?, row.discipline("discipline_id")?);
        paper.author_count = author_count;
        paper.citations = row.parse("citations")?;
        out.push(paper);
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_references<R: Read>(input: R, file: &str) -> Result<Vec<ReferenceRow>, CorpusError> {
    let mut table = Table::open(input, file, &REFERENCE_COLUMNS)?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let ref_id = row
            .raw("ref_id")
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        let count: u32 = row.parse("count")?;
        if ref_id.is_some() && count != 1 {
            return Err(row.error("rows carrying a `ref_id` must have count 1"));
        }
        out.push(ReferenceRow {
            paper_id: row.id("paper_id")?,
            discipline: row.discipline("ref_discipline_id")?,
            count,
            ref_id,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_baselines<R: Read>(
    input: R,
    file: &str,
) -> Result<BTreeMap<(DisciplineId, i32), f64>, CorpusError> {
    let mut table = Table::open(input, file, &BASELINE_COLUMNS)?;
    let mut out = BTreeMap::new();
    table.for_each(|row| {
        let key = (row.discipline("discipline_id")?, row.parse("year")?);
        let mean: f64 = row.parse("mean_citations")?;
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(row.error("`mean_citations` must be positive"));
        }
        if out.insert(key, mean).is_some() {
            return Err(row.error(format!("duplicate baseline for {}/{}", key.0, key.1)));
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_incumbents<R: Read>(input: R, file: &str) -> Result<Vec<IncumbentRecord>, CorpusError> {
    let mut table = Table::open(input, file, &INCUMBENT_COLUMNS)?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let incumbent = Incumbent {
            id: row.id("incumbent_id")?,
            university: row.id("university")?,
            subfield: row.subfield("subfield")?,
            first_year: row.parse("first_year")?,
            last_year: row.parse("last_year")?,
            papers: Vec::new(),
        };
        if incumbent.first_year > incumbent.last_year {
            return Err(row.error("`first_year` after `last_year`"));
        }
        out.push(IncumbentRecord {
            incumbent,
            paper_ids: row.id_list("paper_ids")?,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Writes the corpus files into `dir`. Output is ordered by id, so equal
/// cohorts produce identical bytes.
pub fn write_corpus(cohort: &Cohort, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in corpus_tables(cohort)? {
        let mut f = BufWriter::new(File::create(dir.join(name))?);
        f.write_all(&bytes)?;
        f.flush()?;
    }
    Ok(())
}

/// The corpus files as `(file name, CSV bytes)`, in the layout
/// [`write_corpus`] produces. `incumbents.csv` is omitted when empty.
pub fn corpus_tables(cohort: &Cohort) -> Result<Vec<(&'static str, Vec<u8>)>, CorpusError> {
    let mut tables = Vec::new();
    let writer = || csv::Writer::from_writer(Vec::new());
    let join_ids = |idx: &[usize]| -> String {
        idx.iter()
            .map(|&i| cohort.papers[i].id.as_str())
            .collect::<Vec<_>>()
            .join(";")
    };

    let mut w = writer();
    w.write_record(PERSON_COLUMNS)?;
    for p in &cohort.persons {
        w.write_record([
            p.id.clone(),
            p.gender.to_string(),
            p.phd_university.clone(),
            p.phd_subfield.to_string(),
            p.grad_year.to_string(),
            p.placement_university.clone(),
            p.placement_subfield.to_string(),
            p.placement_year.to_string(),
            p.unique_collaborators.to_string(),
            p.advisor.gender.to_string(),
            p.advisor.five_year_pubs.to_string(),
            p.advisor.seniority_years.to_string(),
            join_ids(&p.papers),
        ])?;
    }
    tables.push((PERSONS_FILE, finish(w)?));

    let mut w = writer();
    w.write_record(PAPER_COLUMNS)?;
    for p in cohort.papers.iter() {
        w.write_record([
            p.id.clone(),
            p.pub_year.to_string(),
            p.discipline.to_string(),
            p.author_count.to_string(),
            p.citations.to_string(),
        ])?;
    }
    tables.push((PAPERS_FILE, finish(w)?));

    let mut w = writer();
    w.write_record(["paper_id", "ref_discipline_id", "count", "ref_id"])?;
    for p in cohort.papers.iter() {
        let mut identified: BTreeMap<DisciplineId, u32> = BTreeMap::new();
        for (rid, d) in &p.ref_ids {
            *identified.entry(*d).or_default() += 1;
            w.write_record([p.id.as_str(), &d.to_string(), "1", rid.as_str()])?;
        }
        for &(d, c) in &p.ref_counts {
            let rest = c - identified.get(&d).copied().unwrap_or(0);
            if rest > 0 {
                w.write_record([p.id.as_str(), &d.to_string(), &rest.to_string(), ""])?;
            }
        }
    }
    tables.push((REFERENCES_FILE, finish(w)?));

    let mut w = writer();
    w.write_record(BASELINE_COLUMNS)?;
    for (&(d, y), &m) in cohort.baselines.iter() {
        w.write_record([d.to_string(), y.to_string(), format_real(m)])?;
    }
    tables.push((BASELINES_FILE, finish(w)?));

    if !cohort.incumbents.is_empty() {
        let mut w = writer();
        w.write_record(INCUMBENT_COLUMNS)?;
        for inc in cohort.incumbents.iter() {
            w.write_record([
                inc.id.clone(),
                inc.university.clone(),
                inc.subfield.to_string(),
                inc.first_year.to_string(),
                inc.last_year.to_string(),
                join_ids(&inc.papers),
            ])?;
        }
        tables.push((INCUMBENTS_FILE, finish(w)?));
    }
    Ok(tables)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CorpusError> {
    w.into_inner().map_err(|e| CorpusError::Io(e.into_error()))
}

/// Shortest representation that parses back to the same value.
pub fn format_real(x: f64) -> String {
    format!("{x:?}")
}

/// Distinct universities named anywhere in the cohort.
pub fn universities(cohort: &Cohort) -> BTreeSet<&str> {
    cohort
        .persons
        .iter()
        .flat_map(|p| [p.phd_university.as_str(), p.placement_university.as_str()])
        .chain(cohort.incumbents.iter().map(|i| i.university.as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPERS: &str = "paper_id,pub_year,discipline_id,author_count,citations\n\
                          p1,2010,3,2,5\n\
                          p2,2011,7,1,0\n";

    #[test]
    fn parses_papers() {
        let papers = parse_papers(PAPERS.as_bytes(), "papers.csv").unwrap();
        assert_eq!(papers.len(), 2);
        assert_eq!(papers[0].discipline.get(), 3);
        assert_eq!(papers[1].author_count, 1);
    }

    #[test]
    fn discipline_out_of_range_is_malformed() {
        let src = "paper_id,pub_year,discipline_id,author_count,citations\np1,2010,145,2,5\n";
        match parse_papers(src.as_bytes(), "papers.csv") {
            Err(CorpusError::MalformedRow { line, reason, .. }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("145"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_malformed() {
        let src = "paper_id,pub_year\np1,2010\n";
        assert!(matches!(
            parse_papers(src.as_bytes(), "papers.csv"),
            Err(CorpusError::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn zero_authors_rejected() {
        let src = "paper_id,pub_year,discipline_id,author_count,citations\np1,2010,1,0,5\n";
        assert!(parse_papers(src.as_bytes(), "papers.csv").is_err());
    }

    #[test]
    fn quoted_fields_accepted() {
        let src = "paper_id,pub_year,discipline_id,author_count,citations\n\"p,1\",2010,1,1,5\n";
        let papers = parse_papers(src.as_bytes(), "papers.csv").unwrap();
        assert_eq!(papers[0].id, "p,1");
    }

    #[test]
    fn references_attach_and_dangle() {
        let papers = parse_papers(PAPERS.as_bytes(), "papers.csv").unwrap();
        let refs = "paper_id,ref_discipline_id,count,ref_id\n\
                    p1,3,2,\n\
                    p1,5,1,r9\n\
                    p1,3,1,r1\n";
        let rows = parse_references(refs.as_bytes(), "references.csv").unwrap();
        let papers = attach_references(papers, rows).unwrap();
        assert_eq!(papers[0].classified_refs(), 4);
        assert_eq!(papers[0].ref_ids.len(), 2);
        assert!(papers[1].ref_counts.is_empty());

        let bad = "paper_id,ref_discipline_id,count\nzzz,3,2\n";
        let rows = parse_references(bad.as_bytes(), "references.csv").unwrap();
        assert!(matches!(
            attach_references(papers, rows),
            Err(CorpusError::DanglingReference(id)) if id == "zzz"
        ));
    }

    #[test]
    fn identified_reference_needs_unit_count() {
        let refs = "paper_id,ref_discipline_id,count,ref_id\np1,3,2,r1\n";
        assert!(parse_references(refs.as_bytes(), "references.csv").is_err());
    }

    #[test]
    fn baselines_must_be_positive() {
        let src = "discipline_id,year,mean_citations\n1,2010,0\n";
        assert!(parse_baselines(src.as_bytes(), "baselines.csv").is_err());
        let src = "discipline_id,year,mean_citations\n1,2010,2.5\n";
        let b = parse_baselines(src.as_bytes(), "baselines.csv").unwrap();
        assert_eq!(b[&(DisciplineId::new(1).unwrap(), 2010)], 2.5);
    }
}
