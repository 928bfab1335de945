use careerscope::corpus::{parse_baselines, parse_incumbents, parse_papers, parse_persons, parse_references};
use careerscope::ranking::parse_external_ranks;
use careerscope::stats::Formula;
use careerscope::synth::SynthConfig;

pub const TARGETS: [(&str, fn(&[u8])); 8] = [
    ("persons", persons),
    ("papers", papers),
    ("references", references),
    ("baselines", baselines),
    ("incumbents", incumbents),
    ("external_ranks", external_ranks),
    ("formula", formula),
    ("synth_config", synth_config),
];

pub fn persons(data: &[u8]) {
    let _ = parse_persons(data, "fuzz");
}

pub fn papers(data: &[u8]) {
    let _ = parse_papers(data, "fuzz");
}

pub fn references(data: &[u8]) {
    let _ = parse_references(data, "fuzz");
}

pub fn baselines(data: &[u8]) {
    let _ = parse_baselines(data, "fuzz");
}

pub fn incumbents(data: &[u8]) {
    let _ = parse_incumbents(data, "fuzz");
}

pub fn external_ranks(data: &[u8]) {
    if let Ok(table) = parse_external_ranks(data) {
        for row in &table.rows {
            assert!((0.0..=100.0).contains(&row.percentile));
        }
    }
}

/// Printed formulas parse back to the same formula.
pub fn formula(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(f) = Formula::parse(text) {
        let printed = f.to_string();
        let again = Formula::parse(&printed).unwrap_or_else(|e| panic!("`{printed}` does not parse: {e}"));
        assert_eq!(again, f);
    }
}

/// Valid configs survive a TOML round trip.
pub fn synth_config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = SynthConfig::from_toml(text) {
        let back = SynthConfig::from_toml(&c.to_toml()).expect("serialized config parses");
        assert_eq!(back, c);
    }
}
