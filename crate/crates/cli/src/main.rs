use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use careerscope::analysis::{person_frame, productivity_panel, IdrMethod, Pipeline, PipelineOptions};
use careerscope::corpus::{apply_sample_filters, format_real, load_corpus, write_corpus, Cohort, CorpusFiles, IngestOptions};
use careerscope::deviation::{placement_deviation, Aggregation, UnitIndex};
use careerscope::interdisciplinarity::{phd_idr_median, phd_idr_pooled, IdrError};
use careerscope::mobility::{
    classify_move, mobility_network, normalize_against, shuffled_mean, subfield_distance, CutoffScope,
};
use careerscope::ranking::{parse_external_ranks, Rankings, DEFAULT_ALPHA};
use careerscope::report::{run_report, ReportConfig};
use careerscope::similarity::{similarity_matrix, SimilaritySet};
use careerscope::stats::{
    build_design, fit_glm, fit_multinomial, fit_quantile, psm_match, weighted_glm, Family, FitResult, Formula, Frame,
    QuantileOptions, DEFAULT_CALIPER,
};
use careerscope::synth::{synthesize, SynthConfig};
use careerscope::taxonomy::{SubfieldId, N_DISCIPLINES, N_SUBFIELDS};

#[derive(Parser)]
#[command(name = "careerscope", version, about = "Doctoral interdisciplinarity and faculty placement analyses")]
struct Cli {
    /// Directory holding persons.csv, papers.csv, references.csv, baselines.csv
    /// and optionally incumbents.csv.
    #[arg(long, global = true, default_value = ".")]
    input_dir: PathBuf,
    /// Write CSV output to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Median,
    Pooled,
}

impl From<Variant> for IdrMethod {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Median => IdrMethod::Median,
            Variant::Pooled => IdrMethod::Pooled,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Logit,
    Mlogit,
    Poisson,
    Quantile,
}

#[derive(Clone, Copy, ValueEnum)]
enum Data {
    /// One row per person.
    Person,
    /// One row per person and relative year (papers, hits, idr, top, rel_year).
    Panel,
}

#[derive(Clone, Copy, ValueEnum)]
enum Treatment {
    Gender,
}

#[derive(Subcommand)]
enum Command {
    /// Discipline similarity matrix for one year.
    Similarity {
        #[arg(long)]
        year: i32,
    },
    /// Ph.D. interdisciplinarity per person.
    Idr {
        #[arg(long, value_enum, default_value = "median")]
        variant: Variant,
    },
    /// SpringRank production ranking of one subfield.
    Rank {
        #[arg(long)]
        subfield: u32,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// university,rank CSV used instead of SpringRank.
        #[arg(long)]
        external_ranks: Option<PathBuf>,
    },
    /// Null-normalized subfield mobility and movement labels.
    Mobility {
        #[arg(long, default_value_t = careerscope::mobility::DEFAULT_SHUFFLES)]
        shuffles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for mobility_pairs.csv and mobility_labels.csv; both
        /// tables go to the output stream when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Research deviation of each hire from incumbents at the placement.
    Deviation {
        #[arg(long)]
        pooled: bool,
    },
    /// Fit a regression on the person table or the productivity panel.
    Regress {
        #[arg(long, value_enum)]
        model: Model,
        /// File containing a formula such as `top ~ idr + phd_rank + C(grad_year)`.
        #[arg(long)]
        formula: PathBuf,
        /// Threshold defining the `top` column.
        #[arg(long, default_value_t = 10.0)]
        top_threshold: f64,
        #[arg(long, value_enum, default_value = "person")]
        data: Data,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = careerscope::mobility::DEFAULT_SHUFFLES)]
        shuffles: usize,
        #[arg(long)]
        external_ranks: Option<PathBuf>,
    },
    /// Radius propensity-score matching followed by a weighted logit.
    Psm {
        #[arg(long, value_enum, default_value = "gender")]
        treatment: Treatment,
        #[arg(long, default_value_t = DEFAULT_CALIPER)]
        caliper: f64,
        #[arg(long, default_value_t = 10.0)]
        top_threshold: f64,
        /// Include IDR in the propensity model.
        #[arg(long)]
        with_idr: bool,
    },
    /// Generate a synthetic corpus.
    Synth {
        /// TOML generator settings; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named experiment (or `all`) and write its tables and manifest.
    Report {
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = careerscope::mobility::DEFAULT_SHUFFLES)]
        shuffles: usize,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, value_enum, default_value = "median")]
        variant: Variant,
        #[arg(long, default_value_t = DEFAULT_CALIPER)]
        caliper: f64,
        #[arg(long)]
        external_ranks: Option<PathBuf>,
    },
}

fn load(dir: &Path) -> Result<Cohort> {
    let (cohort, _) = load_corpus(&CorpusFiles::in_dir(dir), &IngestOptions::default())
        .with_context(|| format!("loading corpus from {}", dir.display()))?;
    Ok(cohort)
}

fn external(path: &Option<PathBuf>) -> Result<Option<Rankings>> {
    path.as_ref()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(Rankings::External(parse_external_ranks(f)?))
        })
        .transpose()
}

fn sink(output: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn subfield(id: u32) -> Result<SubfieldId> {
    SubfieldId::new(id).with_context(|| format!("subfield must be in 1..={N_SUBFIELDS}"))
}

fn real(x: f64) -> String {
    format_real(x)
}

fn similarity(cohort: &Cohort, year: i32, out: &mut dyn Write) -> Result<()> {
    let s = similarity_matrix(cohort, year);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["discipline_id".to_string()];
    header.extend((1..=N_DISCIPLINES).map(|d| d.to_string()));
    w.write_record(&header)?;
    for row in 0..N_DISCIPLINES {
        let mut rec = vec![(row + 1).to_string()];
        rec.extend(s.row(careerscope::taxonomy::DisciplineId::from_index(row).unwrap()).iter().map(|&v| real(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn idr(cohort: &Cohort, variant: Variant, out: &mut dyn Write) -> Result<()> {
    let filtered = apply_sample_filters(cohort)?.cohort;
    let matrices = SimilaritySet::build(&filtered);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["person_id", "idr", "n_papers"])?;
    for p in &filtered.persons {
        let score = match variant {
            Variant::Median => phd_idr_median(p, &filtered, &matrices),
            Variant::Pooled => phd_idr_pooled(p, &filtered, &matrices),
        };
        match score {
            Ok(s) => w.write_record([p.id.clone(), real(s.value), s.n_papers.to_string()])?,
            Err(IdrError::NoEligiblePapers(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    w.flush()?;
    Ok(())
}

fn rank(cohort: &Cohort, sf: SubfieldId, alpha: f64, ext: Option<Rankings>, out: &mut dyn Write) -> Result<()> {
    let rankings = match ext {
        Some(r) => r,
        None => Rankings::springrank(cohort, alpha)?,
    };
    let table = rankings
        .table(sf)
        .with_context(|| format!("subfield {sf} has fewer than two ranked universities"))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["university", "score", "percentile"])?;
    for r in &table.rows {
        w.write_record([r.university.clone(), real(r.score), real(r.percentile)])?;
    }
    w.flush()?;
    Ok(())
}

fn mobility(cohort: &Cohort, shuffles: usize, seed: u64, dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let filtered = apply_sample_filters(cohort)?.cohort;
    let raw = mobility_network(&filtered);
    let expected = shuffled_mean(&filtered, shuffles, seed);
    let normalized = normalize_against(&raw, &expected);
    let distances = subfield_distance(&normalized);
    let labels = classify_move(&filtered, &distances, CutoffScope::Global);

    let mut pairs = csv::Writer::from_writer(Vec::new());
    pairs.write_record(["source_subfield", "target_subfield", "raw", "expected", "normalized", "distance"])?;
    for (k, (s, t, v)) in normalized.pairs().enumerate() {
        pairs.write_record([
            s.to_string(),
            t.to_string(),
            real(raw.weights()[k]),
            real(expected[k]),
            real(v),
            real(distances.get(s, t)),
        ])?;
    }
    let mut persons = csv::Writer::from_writer(Vec::new());
    persons.write_record(["person_id", "phd_subfield", "placement_subfield", "distance", "label"])?;
    for (p, l) in filtered.persons.iter().zip(&labels) {
        persons.write_record([
            l.person_id.clone(),
            p.phd_subfield.to_string(),
            p.placement_subfield.to_string(),
            real(l.distance),
            l.kind.to_string(),
        ])?;
    }
    let pairs = pairs.into_inner().map_err(|e| e.into_error())?;
    let persons = persons.into_inner().map_err(|e| e.into_error())?;
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            std::fs::write(d.join("mobility_pairs.csv"), pairs)?;
            std::fs::write(d.join("mobility_labels.csv"), persons)?;
        }
        None => {
            out.write_all(&pairs)?;
            out.write_all(b"\n")?;
            out.write_all(&persons)?;
        }
    }
    Ok(())
}

fn deviation(cohort: &Cohort, pooled: bool, out: &mut dyn Write) -> Result<()> {
    let filtered = apply_sample_filters(cohort)?.cohort;
    let aggregation = if pooled { Aggregation::Pooled } else { Aggregation::MeanOfPersons };
    let index = UnitIndex::new(&filtered, aggregation);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["person_id", "university", "subfield", "deviation"])?;
    let mut skipped = 0;
    for p in &filtered.persons {
        match placement_deviation(p, &index) {
            Ok(d) => w.write_record([
                p.id.clone(),
                p.placement_university.clone(),
                p.placement_subfield.to_string(),
                real(d),
            ])?,
            Err(_) => skipped += 1,
        }
    }
    w.flush()?;
    if skipped > 0 {
        eprintln!("deviation undefined for {skipped} persons (no references or no incumbents)");
    }
    Ok(())
}

fn with_top(mut frame: Frame, threshold: f64) -> Result<Frame> {
    let name = format!("top{threshold}");
    let top = frame
        .numeric(&name)
        .with_context(|| format!("--top-threshold must be one of 5, 10, 15, 20 (got {threshold})"))?
        .to_vec();
    frame.add_numeric("top", top);
    Ok(frame)
}

fn write_fit(fit: &FitResult, out: &mut dyn Write) -> Result<()> {
    fit.write_csv(out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn regress(
    cohort: &Cohort,
    model: Model,
    formula_file: &Path,
    threshold: f64,
    data: Data,
    tau: f64,
    seed: u64,
    shuffles: usize,
    ext: Option<Rankings>,
    out: &mut dyn Write,
) -> Result<()> {
    let text = std::fs::read_to_string(formula_file).with_context(|| format!("reading {}", formula_file.display()))?;
    let formula = Formula::parse(text.trim())?;
    let options = PipelineOptions {
        seed,
        shuffles,
        external_ranks: ext,
        skip_mobility: !text.contains("movement"),
        ..Default::default()
    };
    let pipe = Pipeline::run(cohort, options)?;
    let frame = match data {
        Data::Person => with_top(person_frame(&pipe.rows), threshold)?,
        Data::Panel => productivity_panel(&pipe, threshold),
    };
    let design = build_design(&frame, &formula)?;
    let fit = match model {
        Model::Logit => fit_glm(&design, Family::Logistic)?,
        Model::Poisson => fit_glm(&design, Family::Poisson)?,
        Model::Mlogit => fit_multinomial(&design, None)?,
        Model::Quantile => fit_quantile(
            &design,
            QuantileOptions {
                seed,
                ..QuantileOptions::new(tau)
            },
        )?,
    };
    write_fit(&fit, out)
}

fn psm(cohort: &Cohort, caliper: f64, threshold: f64, with_idr: bool, out: &mut dyn Write) -> Result<()> {
    let pipe = Pipeline::run(
        cohort,
        PipelineOptions {
            skip_mobility: true,
            ..Default::default()
        },
    )?;
    let frame = with_top(pipe.frame(), threshold)?;
    let idr = if with_idr { "idr + " } else { "" };
    let propensity = Formula::parse(&format!(
        "woman ~ {idr}phd_rank + C(grad_year) + pubs + norm_cites + collaborators + C(advisor_gender) \
         + advisor_pubs + advisor_seniority + C(field)"
    ))?;
    let matched = psm_match(&frame, &propensity, caliper)?;
    eprintln!(
        "matched {} treated units, dropped {}",
        matched.n_matched_treated, matched.n_dropped
    );
    let design = build_design(&frame, &Formula::parse("top ~ woman")?)?;
    let fit = weighted_glm(&design, &matched.weights, Family::Logistic)?;
    write_fit(&fit, out)
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<std::io::Error>().or_else(|| match c.downcast_ref::<csv::Error>()?.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        });
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn main() -> std::process::ExitCode {
    match run() {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { config, seed, out } => {
            let mut c = match config {
                Some(p) => SynthConfig::from_file(&p).with_context(|| format!("reading {}", p.display()))?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                c.seed = s;
            }
            let cohort = synthesize(&c)?.cohort;
            write_corpus(&cohort, &out)?;
            eprintln!("wrote {} persons and {} papers to {}", cohort.persons.len(), cohort.papers.len(), out.display());
            return Ok(());
        }
        Command::Report {
            experiment,
            out,
            seed,
            shuffles,
            bootstrap,
            variant,
            caliper,
            external_ranks,
        } => {
            let cohort = load(&cli.input_dir)?;
            let config = ReportConfig {
                seed,
                shuffles,
                bootstrap,
                idr: variant.into(),
                caliper,
                external_ranks: external(&external_ranks)?,
                ..Default::default()
            };
            let report = run_report(&cohort, &experiment, &config, &out)?;
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            return Ok(());
        }
        _ => {}
    }

    let cohort = load(&cli.input_dir)?;
    let mut out = sink(&cli.output)?;
    match cli.command {
        Command::Similarity { year } => similarity(&cohort, year, &mut out)?,
        Command::Idr { variant } => idr(&cohort, variant, &mut out)?,
        Command::Rank {
            subfield: sf,
            alpha,
            external_ranks,
        } => {
            if !(alpha > 0.0) {
                bail!("--alpha must be positive");
            }
            rank(&cohort, subfield(sf)?, alpha, external(&external_ranks)?, &mut out)?
        }
        Command::Mobility { shuffles, seed, out: dir } => mobility(&cohort, shuffles, seed, dir.as_deref(), &mut out)?,
        Command::Deviation { pooled } => deviation(&cohort, pooled, &mut out)?,
        Command::Regress {
            model,
            formula,
            top_threshold,
            data,
            tau,
            seed,
            shuffles,
            external_ranks,
        } => regress(
            &cohort,
            model,
            &formula,
            top_threshold,
            data,
            tau,
            seed,
            shuffles,
            external(&external_ranks)?,
            &mut out,
        )?,
        Command::Psm {
            treatment: Treatment::Gender,
            caliper,
            top_threshold,
            with_idr,
        } => psm(&cohort, caliper, top_threshold, with_idr, &mut out)?,
        Command::Synth { .. } | Command::Report { .. } => unreachable!(),
    }
    out.flush()?;
    Ok(())
}
