#![allow(dead_code)]

use gfs_core::curation::EpisodeRules;
use gfs_core::{BinRule, CurationRules, DictionaryConfig, HeuristicWeights, StatisticSet, SummaryRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rows of a random stream: a per-channel offset and scale plus Gaussian
/// noise, with occasional level shifts.
pub fn stream(rng: &mut ChaCha8Rng, len: usize, d: usize) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut offset: Vec<f64> = (0..d).map(|_| rng.random_range(-50.0..50.0)).collect();
    let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..10.0)).collect();
    (0..len)
        .map(|_| {
            if rng.random_bool(0.01) {
                offset.iter_mut().for_each(|o| *o += rng.random_range(-20.0..20.0));
            }
            (0..d).map(|c| offset[c] + scale[c] * noise.sample(rng)).collect()
        })
        .collect()
}

/// |a - b| relative to `scale` (or to |b| when that is larger).
pub fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / b.abs().max(scale).max(f64::MIN_POSITIVE)
}

pub struct CorpusEntry {
    pub record: SummaryRecord,
    pub rows: Vec<Vec<f64>>,
}

/// A record exercising a random mix of statistics, rules, weights, access
/// counts and compactions. Deterministic in `seed`.
pub fn corpus_record(seed: u64) -> CorpusEntry {
    let mut r = rng(seed);
    let d = r.random_range(1..=4);
    let len = r.random_range(0..400);
    let rows = stream(&mut r, len, d);
    let stats = StatisticSet {
        covariance: r.random_bool(0.5),
        hull: r.random_bool(0.5),
        histogram: if r.random_bool(0.5) {
            Some(BinRule::new(0, -60.0, 60.0, r.random_range(1..32)).unwrap())
        } else {
            None
        },
        swv: r.random_bool(0.5),
    };
    let mut rules = CurationRules::with_budget(r.random_range(4..48));
    if r.random_bool(0.3) {
        rules.weights = HeuristicWeights {
            nonstationarity_w: r.random_range(0.0..2.0),
            slowness_w: r.random_range(0.0..2.0),
            recurrence_reprieve_w: r.random_range(0.0..2.0),
            prior_access_w: r.random_range(0.0..2.0),
        };
    }
    if r.random_bool(0.3) {
        rules.episodes = Some(EpisodeRules {
            channel: 0,
            dictionary: DictionaryConfig {
                pattern_len: r.random_range(2..6),
                capacity: r.random_range(2..10),
                auto_compact: r.random_bool(0.5),
                ..Default::default()
            },
        });
    }
    let mut rec = SummaryRecord::new(d, stats, rules).unwrap();
    let weighted = r.random_bool(0.3);
    for row in &rows {
        if weighted {
            rec.ingest_weighted(row, r.random_range(0.1..3.0)).unwrap();
        } else {
            rec.ingest(row).unwrap();
        }
        if rec.slots() > 0 && r.random_bool(0.05) {
            let keys: Vec<u64> = rec.samples_in_time_order().iter().map(|s| s.t_start).take(3).collect();
            rec.record_access(&keys).unwrap();
        }
    }
    if rec.slots() > 4 && r.random_bool(0.3) {
        rec.rules.budget_values = Some(rec.stored_values() * 2 / 3);
        let _ = gfs_core::curation::compact(&mut rec);
    }
    if rec.slots() > 2 && r.random_bool(0.3) {
        let b = r.random_range(2..=rec.slots());
        let _ = rec.set_budget(b);
    }
    if rec.dictionary().is_some_and(|d| d.len() > 1) && r.random_bool(0.5) {
        rec.compact_dictionary(1).unwrap();
    }
    CorpusEntry { record: rec, rows }
}
