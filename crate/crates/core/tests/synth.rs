use careerscope::analysis::{productivity_panel, Pipeline, PipelineOptions};
use careerscope::corpus::{write_corpus, Gender};
use careerscope::ranking::{top_count, Rankings, DEFAULT_ALPHA};
use careerscope::stats::{build_design, fit_glm, mean, Family, Formula};
use careerscope::synth::{subfields, synthesize, university_id, SynthConfig, SynthError};

fn config(n: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_persons: n,
        seed,
        ..Default::default()
    }
}

fn pipeline(cohort: &careerscope::corpus::Cohort) -> Pipeline {
    Pipeline::run(
        cohort,
        PipelineOptions {
            skip_mobility: true,
            ..Default::default()
        },
    )
    .unwrap()
}

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn same_seed_gives_identical_corpus_files() {
    let c = SynthConfig {
        n_persons: 500,
        n_universities: 20,
        ..config(0, 21)
    };
    let (a, b, other) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_corpus(&synthesize(&c).unwrap().cohort, a.path()).unwrap();
    write_corpus(&synthesize(&c).unwrap().cohort, b.path()).unwrap();
    write_corpus(&synthesize(&SynthConfig { seed: 22, ..c.clone() }).unwrap().cohort, other.path()).unwrap();
    let fa = files(a.path());
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, files(b.path()));
    assert_ne!(fa, files(other.path()));
}

#[test]
fn gender_means_hit_configured_gap() {
    let s = synthesize(&config(5000, 3)).unwrap();
    let pipe = pipeline(&s.cohort);
    let of = |g| pipe.rows.iter().filter(|r| r.gender == g).map(|r| r.idr).collect::<Vec<_>>();
    let (men, women) = (mean(&of(Gender::Man)), mean(&of(Gender::Woman)));
    assert!((men - 0.41).abs() < 0.005, "men {men}");
    assert!((women - 0.45).abs() < 0.005, "women {women}");
    assert!((s.report.idr_means[0] - men).abs() < 1e-12);
    assert!((s.report.idr_means[1] - women).abs() < 1e-12);
}

#[test]
fn recomputed_rankings_follow_prestige() {
    let c = config(3000, 4);
    let s = synthesize(&c).unwrap();
    assert!(s.report.hierarchy_exact);
    let ranks = Rankings::springrank(&s.cohort, DEFAULT_ALPHA).unwrap();
    let n_top = top_count(c.n_universities, 100.0 * c.top_fraction);
    let top = ranks.top_sets(100.0 * c.top_fraction);
    for sf in subfields() {
        let table = ranks.table(sf).unwrap();
        assert_eq!(table.len(), c.n_universities);
        let pct: Vec<f64> = (0..c.n_universities)
            .map(|j| table.percentile(&university_id(j)).unwrap())
            .collect();
        assert!(pct.windows(2).all(|w| w[0] > w[1]), "subfield {sf}");
        let expected: std::collections::BTreeSet<String> = (0..n_top).map(university_id).collect();
        assert_eq!(top.get(sf).unwrap(), &expected);
    }
}

#[test]
fn planted_placement_effect_is_recovered() {
    let s = synthesize(&config(20_000, 1)).unwrap();
    let pipe = pipeline(&s.cohort);
    let f = Formula::parse(
        "top10 ~ idr + phd_rank + C(grad_year) + C(gender) + pubs + norm_cites + collaborators \
         + C(advisor_gender) + advisor_pubs + advisor_seniority",
    )
    .unwrap();
    let fit = fit_glm(&build_design(&pipe.frame(), &f).unwrap(), Family::Logistic).unwrap();
    let c = fit.coefficient("idr").unwrap();
    assert!(c.ci_lower <= -1.186 && -1.186 <= c.ci_upper, "{c:?}");
}

#[test]
fn planted_productivity_slope_is_recovered() {
    let c = config(20_000, 2);
    let s = synthesize(&c).unwrap();
    let pipe = pipeline(&s.cohort);
    let panel = productivity_panel(&pipe, 100.0 * c.top_fraction);
    let (years, _) = panel.categorical("rel_year").unwrap();
    let later: Vec<usize> = (0..panel.len()).filter(|&i| years[i].parse::<i32>().unwrap() >= 2).collect();
    let frame = panel.select(&later);
    let f = Formula::parse("papers ~ C(rel_year) + idr + top + idr:top").unwrap();
    let fit = fit_glm(&build_design(&frame, &f).unwrap(), Family::Poisson).unwrap();
    let slope = fit.coefficient("idr:top").unwrap();
    let truth = c.planted_productivity_slope;
    assert!(slope.ci_lower <= truth && truth <= slope.ci_upper, "{slope:?}");
}

#[test]
fn invalid_config_is_rejected() {
    let bad = SynthConfig {
        top_fraction: 0.0,
        ..Default::default()
    };
    assert!(matches!(synthesize(&bad), Err(SynthError::ConfigInvalid(_))));
}
