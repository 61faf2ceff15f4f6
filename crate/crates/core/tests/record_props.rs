mod common;

use common::corpus_record;
use gfs_core::stats::summarize;
use gfs_core::{container, CurationRules, SearchIndex, StatisticSet, SummaryRecord};
use proptest::prelude::*;

fn record(xs: &[f64], budget: usize, stats: StatisticSet) -> SummaryRecord {
    let mut r = SummaryRecord::new(1, stats, CurationRules::with_budget(budget)).unwrap();
    for x in xs {
        r.ingest(&[*x]).unwrap();
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn budget_and_invariants_hold(xs in prop::collection::vec(-1e3f64..1e3, 0..700), budget in 1usize..40) {
        let mut r = SummaryRecord::new(1, StatisticSet::full(), CurationRules::with_budget(budget)).unwrap();
        for x in &xs {
            r.ingest(&[*x]).unwrap();
            prop_assert!(r.slots() <= budget);
        }
        prop_assert!(r.check_invariants().is_ok());
        let covered: u64 = r.span_report().iter().map(|row| row.t_end - row.t_start).sum();
        prop_assert_eq!(covered, xs.len() as u64);
    }

    // the record never loses information the merge laws preserve
    #[test]
    fn aggregate_equals_direct(xs in prop::collection::vec(-1e3f64..1e3, 1..500), budget in 1usize..30) {
        let r = record(&xs, budget, StatisticSet::default());
        let rows: Vec<[f64; 1]> = xs.iter().map(|x| [*x]).collect();
        let direct = summarize(&rows, 1, 0, &StatisticSet::default()).unwrap();
        let agg = r.aggregate();
        prop_assert_eq!(agg.n, direct.n);
        prop_assert_eq!(&agg.min, &direct.min);
        prop_assert_eq!(&agg.max, &direct.max);
        prop_assert!((agg.mean[0] - direct.mean[0]).abs() <= 1e-9 * 1e3);
        prop_assert!((agg.variance[0] - direct.variance[0]).abs() <= 1e-9 * direct.variance[0].max(1.0));
    }

    #[test]
    fn interval_hits_cover_the_query(xs in prop::collection::vec(-10.0f64..10.0, 2..300), budget in 1usize..20,
                                     a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let r = record(&xs, budget, StatisticSet::default());
        let (mut t0, mut t1) = (a.index(xs.len()) as u64, b.index(xs.len()) as u64 + 1);
        if t0 >= t1 {
            std::mem::swap(&mut t0, &mut t1);
            t1 += 1;
        }
        let t1 = t1.min(xs.len() as u64);
        prop_assume!(t0 < t1);
        let hits = r.query_interval(t0, t1).unwrap();
        prop_assert!(hits.first().unwrap().sample.t_start <= t0);
        prop_assert!(hits.last().unwrap().sample.t_end >= t1);
        for w in hits.windows(2) {
            prop_assert_eq!(w[0].sample.t_end, w[1].sample.t_start);
        }
    }

    #[test]
    fn shrinking_budget_compacts(xs in prop::collection::vec(-10.0f64..10.0, 10..300), budget in 4usize..40, to in 1usize..4) {
        let mut r = record(&xs, budget, StatisticSet::full());
        let before = r.aggregate();
        r.set_budget(to).unwrap();
        prop_assert!(r.slots() <= to);
        prop_assert!(r.check_invariants().is_ok());
        prop_assert_eq!(r.aggregate().n, before.n);
    }

    #[test]
    fn stored_rows_are_never_reported_absent(xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..300),
                                            budget in 1usize..30, fanout in 2usize..9) {
        let mut r = SummaryRecord::new(2, StatisticSet { hull: true, ..Default::default() }, CurationRules::with_budget(budget)).unwrap();
        for (x, y) in &xs {
            r.ingest(&[*x, *y]).unwrap();
        }
        let idx = SearchIndex::from_record(&r, fanout).unwrap();
        for (x, y) in &xs {
            prop_assert!(!idx.membership(&[*x, *y]).unwrap().absent_certain);
        }
    }

    #[test]
    fn corpus_round_trips_bit_exactly(seed in any::<u64>()) {
        let rec = corpus_record(seed).record;
        let bytes = container::write(&rec);
        let back = container::read(&bytes).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(container::write(&back), bytes);
    }
}
