use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use careerscope::corpus::Cohort;
use careerscope::report::{run_report, Experiment, ReportConfig, ReportError, MANIFEST_FILE};
use careerscope::synth::{synthesize, SynthConfig};
use sha2::{Digest, Sha256};

fn cohort() -> Cohort {
    synthesize(&SynthConfig {
        n_persons: 4000,
        n_universities: 30,
        seed: 9,
        ..Default::default()
    })
    .unwrap()
    .cohort
}

fn config() -> ReportConfig {
    ReportConfig {
        seed: 5,
        shuffles: 20,
        bootstrap: 200,
        ..Default::default()
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn manifest(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_to_string(dir.join(MANIFEST_FILE))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn all_experiments_write_tables_and_manifest() {
    let c = cohort();
    let dir = tempfile::tempdir().unwrap();
    let out = run_report(&c, "all", &config(), dir.path()).unwrap();
    let names: BTreeSet<String> = out
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for expected in [
        "idr_trend.csv",
        "idr_gender.csv",
        "placement_logit.csv",
        "placement_logit_pooled.csv",
        "movement_mlogit.csv",
        "movement_effects.csv",
        "movement_logit.csv",
        "deviation_grid.csv",
        "deviation_placement.csv",
        "gender_psm.csv",
        "productivity_poisson.csv",
        "productivity_effects.csv",
    ] {
        assert!(names.contains(expected), "missing {expected}");
    }

    let m = manifest(dir.path());
    assert_eq!(m["experiment"], "all");
    assert_eq!(m["seed"], "5");
    assert_eq!(m["shuffles"], "20");
    assert_eq!(m["input_sha256"].len(), 64);
    for f in &out.files {
        let name = f.file_name().unwrap().to_string_lossy();
        let digest: String = Sha256::digest(std::fs::read(f).unwrap())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(m[&format!("output.{name}")], digest);
    }

    let (header, rows) = read_csv(&dir.path().join("placement_logit.csv"));
    assert_eq!(&header[..3], ["field", "threshold", "covariates"]);
    assert_eq!(rows.len(), 60);
    let cells: BTreeSet<_> = rows.iter().map(|r| (r[0].clone(), r[1].clone(), r[2].clone())).collect();
    assert_eq!(cells.len(), 60);
    let ok = rows.iter().filter(|r| r.last().unwrap() == "ok").count();
    assert!(ok >= 50, "only {ok} grid models converged");

    let (header, rows) = read_csv(&dir.path().join("idr_trend.csv"));
    assert_eq!(header, ["field", "grad_year", "n", "mean_idr", "ci_lo", "ci_hi", "smoothed"]);
    for r in rows.iter().filter(|r| !r[4].is_empty()) {
        let v: Vec<f64> = r[3..6].iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[1] <= v[0] && v[0] <= v[2], "{r:?}");
    }
    assert!(rows.iter().any(|r| r[0] == "all"));

    let (_, rows) = read_csv(&dir.path().join("movement_effects.csv"));
    let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!(total.abs() < 1e-9, "effects on category probabilities sum to zero");
}

#[test]
fn placement_logit_is_byte_identical_across_runs() {
    let c = cohort();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = run_report(&c, "placement-logit", &config(), a.path()).unwrap();
    run_report(&c, "placement-logit", &config(), b.path()).unwrap();
    for f in oa.files.iter().map(|p| p.file_name().unwrap()).chain([std::ffi::OsStr::new(MANIFEST_FILE)]) {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f:?}"
        );
    }
}

#[test]
fn unknown_experiment_is_an_error() {
    let c = cohort();
    let dir = tempfile::tempdir().unwrap();
    let err = run_report(&c, "fig-9", &config(), dir.path()).unwrap_err();
    assert!(matches!(err, ReportError::UnknownExperiment(ref n) if n == "fig-9"));
    assert!(!dir.path().join(MANIFEST_FILE).exists());
    assert_eq!(Experiment::ALL.len(), 6);
}
