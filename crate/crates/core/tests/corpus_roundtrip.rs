use careerscope::corpus::{load_corpus, write_corpus, CorpusFiles, IngestOptions};
use careerscope::synth::{synthesize, SynthConfig};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_persons: 400,
        n_universities: 15,
        calibration_passes: 1,
        seed,
        ..Default::default()
    }
}

#[test]
fn written_corpus_loads_back_unchanged() {
    let cohort = synthesize(&small(11)).unwrap().cohort;
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&cohort, dir.path()).unwrap();
    let (loaded, summary) = load_corpus(&CorpusFiles::in_dir(dir.path()), &IngestOptions::default()).unwrap();
    assert_eq!(summary.persons, cohort.persons.len());
    assert_eq!(summary.excluded_persons, 0);
    assert_eq!(summary.papers, cohort.papers.len());
    assert_eq!(loaded, cohort);

    let again = tempfile::tempdir().unwrap();
    write_corpus(&loaded, again.path()).unwrap();
    for name in ["persons.csv", "papers.csv", "references.csv", "baselines.csv", "incumbents.csv"] {
        let a = std::fs::read(dir.path().join(name)).unwrap();
        let b = std::fs::read(again.path().join(name)).unwrap();
        assert!(a == b, "{name} differs after a round trip");
    }
}

#[test]
fn incumbents_file_is_optional() {
    let cohort = synthesize(&small(12)).unwrap().cohort;
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&cohort, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("incumbents.csv")).unwrap();
    let (loaded, summary) = load_corpus(&CorpusFiles::in_dir(dir.path()), &IngestOptions::default()).unwrap();
    assert_eq!(summary.incumbents, 0);
    assert!(loaded.incumbents.is_empty());
    assert_eq!(loaded.persons.len(), cohort.persons.len());
}
