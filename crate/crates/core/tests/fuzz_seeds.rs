//! Replays the checked-in fuzz seeds and random inputs through the fuzz
//! target bodies.

#[path = "../fuzz/src/bodies.rs"]
mod bodies;

use std::path::Path;

use proptest::prelude::*;

#[test]
fn seeds_replay_cleanly() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus");
    for (name, body) in bodies::TARGETS {
        let dir = root.join(name);
        let mut n = 0;
        for entry in std::fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
            body(&std::fs::read(entry.unwrap().path()).unwrap());
            n += 1;
        }
        assert!(n > 0, "no seeds for {name}");
    }
}

#[test]
fn seeds_are_accepted_by_their_parsers() {
    use careerscope::corpus::{parse_baselines, parse_incumbents, parse_papers, parse_persons, parse_references};
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus");
    let read = |t: &str, f: &str| std::fs::read(root.join(t).join(f)).unwrap();
    assert_eq!(parse_persons(&read("persons", "synthetic")[..], "s").unwrap().len(), 5);
    assert_eq!(parse_persons(&read("persons", "quoted")[..], "s").unwrap()[0].person.id, "p,1");
    assert!(parse_papers(&read("papers", "synthetic")[..], "s").is_ok());
    assert_eq!(parse_references(&read("references", "identified")[..], "s").unwrap().len(), 3);
    assert!(parse_baselines(&read("baselines", "synthetic")[..], "s").is_ok());
    assert!(parse_incumbents(&read("incumbents", "synthetic")[..], "s").is_ok());
    let ranks = careerscope::ranking::parse_external_ranks(&read("external_ranks", "reordered")[..]).unwrap();
    assert_eq!(ranks.rows[0].university, "Big, State");
    for f in ["placement", "interaction", "no_response"] {
        let text = String::from_utf8(read("formula", f)).unwrap();
        assert!(careerscope::stats::Formula::parse(&text).is_ok(), "{f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bodies_accept_arbitrary_bytes(data in proptest::collection::vec(any::<u8>(), 0..256)) {
        for (_, body) in bodies::TARGETS {
            body(&data);
        }
    }

    #[test]
    fn formula_body_on_formula_like_text(text in "[a-z_ ~+*:01()C-]{0,40}") {
        bodies::formula(text.as_bytes());
    }

    #[test]
    fn csv_bodies_on_csv_like_text(text in "[a-z_0-9,;\"\n]{0,200}") {
        for (_, body) in bodies::TARGETS {
            body(text.as_bytes());
        }
    }
}
