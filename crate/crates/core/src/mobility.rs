//! Ph.D. → faculty subfield mobility, normalized against a shuffle null model.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{Cohort, Person};
use crate::taxonomy::{SubfieldId, N_SUBFIELDS};

pub const DEFAULT_SHUFFLES: usize = 100;
/// Share of movers labeled close-field.
pub const CLOSE_QUANTILE: f64 = 0.8;

/// 24 × 24 directed weights, row = Ph.D. subfield, column = placement subfield.
#[derive(Clone, Debug, PartialEq)]
pub struct MobilityNetwork {
    weights: Vec<f64>,
    pub normalized: bool,
}

impl MobilityNetwork {
    pub fn from_weights(weights: Vec<f64>, normalized: bool) -> Option<Self> {
        (weights.len() == N_SUBFIELDS * N_SUBFIELDS).then_some(MobilityNetwork {
            weights,
            normalized,
        })
    }

    pub fn weight(&self, source: SubfieldId, target: SubfieldId) -> f64 {
        self.weights[source.index() * N_SUBFIELDS + target.index()]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(source, target, weight)` for every pair, row-major.
    pub fn pairs(&self) -> impl Iterator<Item = (SubfieldId, SubfieldId, f64)> + '_ {
        SubfieldId::all().flat_map(move |s| SubfieldId::all().map(move |t| (s, t, self.weight(s, t))))
    }
}

fn tally(phd: &[u8], placement: &[u8]) -> Vec<f64> {
    let mut counts = vec![0.0; N_SUBFIELDS * N_SUBFIELDS];
    for (&a, &b) in phd.iter().zip(placement) {
        counts[a as usize * N_SUBFIELDS + b as usize] += 1.0;
    }
    counts
}

fn endpoints(persons: &[Person]) -> (Vec<u8>, Vec<u8>) {
    persons
        .iter()
        .map(|p| (p.phd_subfield.index() as u8, p.placement_subfield.index() as u8))
        .unzip()
}

pub fn mobility_network(cohort: &Cohort) -> MobilityNetwork {
    let (phd, placement) = endpoints(&cohort.persons);
    MobilityNetwork {
        weights: tally(&phd, &placement),
        normalized: false,
    }
}

/// Mean weights over `n_shuffles` random permutations of placement subfields.
///
/// Shuffle `k` draws from a ChaCha8 stream seeded with `seed` on stream `k`,
/// so results do not depend on thread scheduling.
pub fn shuffled_mean(cohort: &Cohort, n_shuffles: usize, seed: u64) -> Vec<f64> {
    let (phd, placement) = endpoints(&cohort.persons);
    let tallies: Vec<Vec<f64>> = (0..n_shuffles)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut perm = placement.clone();
            perm.shuffle(&mut rng);
            tally(&phd, &perm)
        })
        .collect();
    let mut mean = vec![0.0; N_SUBFIELDS * N_SUBFIELDS];
    for t in &tallies {
        for (m, v) in mean.iter_mut().zip(t) {
            *m += v;
        }
    }
    let n = n_shuffles.max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Divides raw weights by their shuffled expectation. A zero raw weight stays
/// 0; a positive raw weight with zero expectation becomes +∞.
pub fn null_normalize(cohort: &Cohort, n_shuffles: usize, seed: u64) -> MobilityNetwork {
    let raw = mobility_network(cohort);
    let mean = shuffled_mean(cohort, n_shuffles, seed);
    normalize_against(&raw, &mean)
}

pub fn normalize_against(raw: &MobilityNetwork, expected: &[f64]) -> MobilityNetwork {
    let weights = raw
        .weights
        .iter()
        .zip(expected)
        .map(|(&r, &e)| match (r > 0.0, e > 0.0) {
            (false, _) => 0.0,
            (true, true) => r / e,
            (true, false) => f64::INFINITY,
        })
        .collect();
    MobilityNetwork {
        weights,
        normalized: true,
    }
}

/// Reciprocal distances; zero weight gives +∞.
#[derive(Clone, Debug, PartialEq)]
pub struct SubfieldDistances {
    values: Vec<f64>,
}

impl SubfieldDistances {
    pub fn get(&self, source: SubfieldId, target: SubfieldId) -> f64 {
        self.values[source.index() * N_SUBFIELDS + target.index()]
    }
}

pub fn subfield_distance(net: &MobilityNetwork) -> SubfieldDistances {
    SubfieldDistances {
        values: net
            .weights
            .iter()
            .map(|&w| if w > 0.0 { 1.0 / w } else { f64::INFINITY })
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveType {
    SameFieldStayer,
    CloseFieldMover,
    DistantFieldMover,
}

impl MoveType {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveType::SameFieldStayer => "same_field_stayer",
            MoveType::CloseFieldMover => "close_field_mover",
            MoveType::DistantFieldMover => "distant_field_mover",
        }
    }
}

impl fmt::Display for MoveType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoveLabel {
    pub person_id: String,
    pub kind: MoveType,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CutoffScope {
    /// One cutoff over all movers.
    #[default]
    Global,
    /// A cutoff per Ph.D. subfield.
    PerSource,
}

/// The value at the `q` quantile of the sorted distances: the
/// `ceil(q · m)`-th smallest.
pub fn quantile_cutoff(distances: &[f64], q: f64) -> Option<f64> {
    if distances.is_empty() {
        return None;
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((q * sorted.len() as f64 - 1e-9).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[k - 1])
}

fn label(distance: f64, cutoff: Option<f64>) -> MoveType {
    match cutoff {
        Some(c) if distance.is_finite() && distance <= c => MoveType::CloseFieldMover,
        _ => MoveType::DistantFieldMover,
    }
}

/// Labels every person; movers at or below the 80th-percentile distance are
/// close-field, the rest (and all infinite distances) distant-field.
pub fn classify_move(cohort: &Cohort, distances: &SubfieldDistances, scope: CutoffScope) -> Vec<MoveLabel> {
    let dist = |p: &Person| distances.get(p.phd_subfield, p.placement_subfield);
    let movers = || cohort.persons.iter().filter(|p| !p.is_stayer());
    let cutoffs: Vec<Option<f64>> = match scope {
        CutoffScope::Global => {
            let all: Vec<f64> = movers().map(dist).collect();
            vec![quantile_cutoff(&all, CLOSE_QUANTILE); N_SUBFIELDS]
        }
        CutoffScope::PerSource => SubfieldId::all()
            .map(|sf| {
                let ds: Vec<f64> = movers().filter(|p| p.phd_subfield == sf).map(dist).collect();
                quantile_cutoff(&ds, CLOSE_QUANTILE)
            })
            .collect(),
    };
    cohort
        .persons
        .iter()
        .map(|p| {
            let distance = dist(p);
            let kind = if p.is_stayer() {
                MoveType::SameFieldStayer
            } else {
                label(distance, cutoffs[p.phd_subfield.index()])
            };
            MoveLabel {
                person_id: p.id.clone(),
                kind,
                distance,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CohortBuilder;

    fn sf(i: u32) -> SubfieldId {
        SubfieldId::new(i).unwrap()
    }

    fn cohort(moves: &[(u32, u32)]) -> Cohort {
        let mut b = CohortBuilder::new();
        for (i, &(a, t)) in moves.iter().enumerate() {
            b.person(Person::new(format!("p{i:04}"), "U", sf(a), 2010, "V", sf(t)), Vec::<String>::new());
        }
        b.build().unwrap()
    }

    #[test]
    fn raw_weights_tally() {
        let c = cohort(&[(1, 2), (1, 2), (3, 3), (2, 1)]);
        let net = mobility_network(&c);
        assert_eq!(net.weight(sf(1), sf(2)), 2.0);
        assert_eq!(net.weight(sf(3), sf(3)), 1.0);
        assert_eq!(net.weight(sf(2), sf(1)), 1.0);
        assert_eq!(net.total(), 4.0);
        assert!(!net.normalized);
    }

    #[test]
    fn stayers_fill_only_the_diagonal() {
        let net = mobility_network(&cohort(&[(4, 4), (5, 5), (5, 5)]));
        for (s, t, w) in net.pairs() {
            if s != t {
                assert_eq!(w, 0.0);
            }
        }
    }

    #[test]
    fn shuffle_preserves_marginals() {
        let c = cohort(&[(1, 2), (1, 3), (2, 3), (3, 1), (3, 3), (2, 2)]);
        let mean = shuffled_mean(&c, 50, 7);
        for s in 0..N_SUBFIELDS {
            let row: f64 = mean[s * N_SUBFIELDS..(s + 1) * N_SUBFIELDS].iter().sum();
            let expected = c.persons.iter().filter(|p| p.phd_subfield.index() == s).count() as f64;
            assert!((row - expected).abs() < 1e-9);
        }
        assert_eq!(mean, shuffled_mean(&c, 50, 7));
    }

    #[test]
    fn normalization_edge_cases() {
        let mut raw = vec![0.0; N_SUBFIELDS * N_SUBFIELDS];
        raw[0] = 4.0;
        raw[1] = 2.0;
        let mut expected = vec![1.0; N_SUBFIELDS * N_SUBFIELDS];
        expected[1] = 0.0;
        let net = normalize_against(&MobilityNetwork::from_weights(raw, false).unwrap(), &expected);
        assert_eq!(net.weight(sf(1), sf(1)), 4.0);
        assert_eq!(net.weight(sf(1), sf(2)), f64::INFINITY);
        assert_eq!(net.weight(sf(1), sf(3)), 0.0);
        let d = subfield_distance(&net);
        assert_eq!(d.get(sf(1), sf(1)), 0.25);
        assert_eq!(d.get(sf(1), sf(2)), 0.0);
        assert_eq!(d.get(sf(1), sf(3)), f64::INFINITY);
    }

    #[test]
    fn cutoff_picks_ceiling_order_statistic() {
        let ds: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        assert_eq!(quantile_cutoff(&ds, 0.8), Some(8.0));
        assert_eq!(quantile_cutoff(&[3.0], 0.8), Some(3.0));
        assert_eq!(quantile_cutoff(&[], 0.8), None);
    }

    #[test]
    fn ten_movers_split_eight_two() {
        // Ten movers out of subfield 1 on distinct targets, plus one stayer.
        let moves: Vec<(u32, u32)> = (2..=11).map(|t| (1, t)).chain([(1, 1)]).collect();
        let c = cohort(&moves);
        let mut values = vec![f64::INFINITY; N_SUBFIELDS * N_SUBFIELDS];
        for t in 2..=11u32 {
            values[(t - 1) as usize] = t as f64 / 10.0;
        }
        values[0] = 0.5;
        let d = SubfieldDistances { values };
        let labels = classify_move(&c, &d, CutoffScope::Global);
        let count = |k| labels.iter().filter(|l| l.kind == k).count();
        assert_eq!(count(MoveType::SameFieldStayer), 1);
        assert_eq!(count(MoveType::CloseFieldMover), 8);
        assert_eq!(count(MoveType::DistantFieldMover), 2);
        assert_eq!(labels, classify_move(&c, &d, CutoffScope::Global));
    }

    #[test]
    fn infinite_distance_is_distant() {
        let c = cohort(&[(1, 2)]);
        let d = SubfieldDistances {
            values: vec![f64::INFINITY; N_SUBFIELDS * N_SUBFIELDS],
        };
        let labels = classify_move(&c, &d, CutoffScope::Global);
        assert_eq!(labels[0].kind, MoveType::DistantFieldMover);
    }

    #[test]
    fn per_source_cutoffs() {
        // Source 1 movers are close (0.1..0.5), source 7 movers far (1..5).
        let moves: Vec<(u32, u32)> = (2..=6).map(|t| (1, t)).chain((2..=6).map(|t| (7, t))).collect();
        let c = cohort(&moves);
        let mut values = vec![f64::INFINITY; N_SUBFIELDS * N_SUBFIELDS];
        for t in 2..=6usize {
            values[t - 1] = (t - 1) as f64 / 10.0;
            values[6 * N_SUBFIELDS + t - 1] = (t - 1) as f64;
        }
        let d = SubfieldDistances { values };
        let distant = |labels: &[MoveLabel]| -> Vec<String> {
            labels
                .iter()
                .filter(|l| l.kind == MoveType::DistantFieldMover)
                .map(|l| l.person_id.clone())
                .collect()
        };
        assert_eq!(distant(&classify_move(&c, &d, CutoffScope::Global)), vec!["p0008", "p0009"]);
        assert_eq!(distant(&classify_move(&c, &d, CutoffScope::PerSource)), vec!["p0004", "p0009"]);
    }
}
