//! Curation: deciding what to merge and what to forget.
//!
//! The rules live with the record and are serialized with it. By default all
//! heuristic weights are zero and the record merges purely by age; non-zero
//! weights let divergence, usage and recurrence compete for which pair of
//! samples is merged next.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::compare::{self, kl_discrete, kl_gaussian_full, kl_hull, DistributionModel, KL_CAP};
use crate::dictionary::DictionaryConfig;
use crate::record::{Action, SummaryRecord};
use crate::spectrum;
use crate::stats::{tri_index, BinSource, StatId, SummarySample};
use crate::{Error, Result};

/// Weights of the merge-scoring heuristics. Lower scores merge first.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeuristicWeights {
    /// Weight on the symmetric divergence between the two samples.
    pub nonstationarity_w: f64,
    /// Weight on the share of variance at the two finest scales; erratic
    /// pairs score lower and merge earlier.
    pub slowness_w: f64,
    /// Weight on episodic dictionary hits; recurring content is kept longer.
    pub recurrence_reprieve_w: f64,
    /// Weight on the pair's decayed access count.
    pub prior_access_w: f64,
}

impl HeuristicWeights {
    pub fn all_zero(&self) -> bool {
        self.nonstationarity_w == 0.0
            && self.slowness_w == 0.0
            && self.recurrence_reprieve_w == 0.0
            && self.prior_access_w == 0.0
    }
}

/// Episodic pattern tracking: fixed-length windows of one channel are
/// matched against a dictionary and counted per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRules {
    pub channel: usize,
    pub dictionary: DictionaryConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationRules {
    pub weights: HeuristicWeights,
    /// Verdict threshold in nats.
    pub tau: f64,
    /// Maximum number of stored samples.
    pub budget_slots: usize,
    /// Optional ceiling on stored values (floats plus integers, as reported
    /// by `inspect`). Exceeding it after merges triggers statistic drops.
    pub budget_values: Option<usize>,
    /// Statistic drop order, first dropped first. Filled from
    /// [`rank_statistics_for_drop`] the first time a drop is needed.
    pub drop_priority: Vec<StatId>,
    /// Access counters halve over this many compaction cycles.
    pub access_half_life: f64,
    /// Highest order for higher-order scale-wise summaries.
    pub max_swv_order: u32,
    pub episodes: Option<EpisodeRules>,
}

impl Default for CurationRules {
    fn default() -> Self {
        CurationRules {
            weights: HeuristicWeights::default(),
            tau: compare::DEFAULT_TAU,
            budget_slots: 64,
            budget_values: None,
            drop_priority: Vec::new(),
            access_half_life: 16.0,
            max_swv_order: 2,
            episodes: None,
        }
    }
}

impl CurationRules {
    pub fn with_budget(budget_slots: usize) -> CurationRules {
        CurationRules { budget_slots, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        for (name, v) in [
            ("nonstationarity_w", w.nonstationarity_w),
            ("slowness_w", w.slowness_w),
            ("recurrence_reprieve_w", w.recurrence_reprieve_w),
            ("prior_access_w", w.prior_access_w),
            ("tau", self.tau),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidRules(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.budget_slots == 0 {
            return Err(Error::InvalidRules("budget_slots must be >= 1".into()));
        }
        if !(self.access_half_life > 0.0) {
            return Err(Error::InvalidRules("access_half_life must be > 0".into()));
        }
        if self.max_swv_order < 2 {
            return Err(Error::InvalidRules("max_swv_order must be >= 2".into()));
        }
        if self.drop_priority.iter().any(|s| !StatId::DROPPABLE.contains(s)) {
            return Err(Error::InvalidRules("count and mean are never droppable".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessCounter {
    pub count: f64,
    /// Cycle at which `count` was last brought up to date.
    pub stamp: u64,
}

/// Usage counters keyed by sample start index, decayed per compaction cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessLog {
    pub half_life: f64,
    pub cycle: u64,
    pub counters: BTreeMap<u64, AccessCounter>,
}

impl AccessLog {
    pub fn new(half_life: f64) -> AccessLog {
        AccessLog { half_life, cycle: 0, counters: BTreeMap::new() }
    }

    fn decayed(&self, c: &AccessCounter) -> f64 {
        let age = (self.cycle - c.stamp) as f64;
        if age == 0.0 {
            c.count
        } else {
            c.count * 0.5f64.powf(age / self.half_life)
        }
    }

    /// Decayed count for the sample starting at `key`.
    pub fn count(&self, key: u64) -> f64 {
        self.counters.get(&key).map_or(0.0, |c| self.decayed(c))
    }

    pub fn record(&mut self, key: u64) {
        let now = self.cycle;
        let current = self.count(key);
        self.counters.insert(key, AccessCounter { count: current + 1.0, stamp: now });
    }

    pub fn tick(&mut self) {
        self.cycle += 1;
    }

    /// Pool the counter of `from` into `into` (samples merged).
    pub fn pool(&mut self, into: u64, from: u64) {
        if into == from {
            return;
        }
        let Some(f) = self.counters.remove(&from) else {
            return;
        };
        let total = self.decayed(&f) + self.count(into);
        self.counters.insert(into, AccessCounter { count: total, stamp: self.cycle });
    }
}

/// A candidate merge of samples `index` and `index + 1` at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeCandidate {
    pub index: usize,
    pub score: f64,
}

/// Number of leading pairs eligible for merging: the oldest quartile.
pub fn oldest_quartile(samples: usize) -> usize {
    let pairs = samples.saturating_sub(1);
    pairs.div_ceil(4).max(1).min(pairs)
}

fn mean_fast_share(s: &SummarySample) -> f64 {
    match &s.swv {
        Some(ch) if !ch.is_empty() => ch.iter().map(|t| spectrum::fast_share(t)).sum::<f64>() / ch.len() as f64,
        _ => 0.0,
    }
}

fn recurrence_hits(s: &SummarySample) -> f64 {
    s.episodes.as_ref().map_or(0.0, |h| h.bins.values().sum::<u64>() as f64)
}

/// Score adjacent pairs from the oldest quartile of `samples` (time order),
/// ascending; ties go to the older pair.
pub fn score_merge_candidates(
    samples: &[SummarySample],
    rules: &CurationRules,
    log: &AccessLog,
) -> Result<Vec<MergeCandidate>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let w = &rules.weights;
    let eligible = oldest_quartile(samples.len());
    let mut out = Vec::with_capacity(eligible);
    for i in 0..eligible {
        let (a, b) = (&samples[i], &samples[i + 1]);
        let mut score = 0.0;
        if w.nonstationarity_w > 0.0 {
            let kl = compare::symmetric_merge_score(a, b).unwrap_or(KL_CAP);
            score += w.nonstationarity_w * kl;
        }
        if w.prior_access_w > 0.0 {
            score += w.prior_access_w * (log.count(a.t_start) + log.count(b.t_start));
        }
        if w.recurrence_reprieve_w > 0.0 {
            score += w.recurrence_reprieve_w * (recurrence_hits(a) + recurrence_hits(b));
        }
        if w.slowness_w > 0.0 {
            score -= w.slowness_w * 0.5 * (mean_fast_share(a) + mean_fast_share(b));
        }
        out.push(MergeCandidate { index: i, score });
    }
    out.sort_by(|x, y| x.score.total_cmp(&y.score).then(x.index.cmp(&y.index)));
    Ok(out)
}

fn capped(v: f64) -> f64 {
    if v.is_nan() {
        KL_CAP
    } else {
        v.min(KL_CAP)
    }
}

fn symmetric(f: impl Fn(bool) -> f64) -> f64 {
    capped(capped(f(false)) + capped(f(true)))
}

fn channel_models(s: &SummarySample, id: StatId) -> Option<Vec<DistributionModel>> {
    let d = s.channels();
    match id {
        StatId::Variance if s.has(id) => {
            Some((0..d).map(|c| DistributionModel::gaussian(s.mean[c], s.variance[c])).collect())
        }
        StatId::Extrema if s.has(id) => Some((0..d).map(|c| DistributionModel::uniform(s.min[c], s.max[c])).collect()),
        StatId::Histogram => {
            let h = s.histogram.as_ref()?;
            let BinSource::Uniform(rule) = h.source else {
                return None;
            };
            let mut w = vec![0.0; rule.bins as usize];
            for (b, n) in &h.bins {
                w[*b as usize] = *n as f64;
            }
            DistributionModel::piecewise(rule.edges(), &w, true).ok().map(|m| vec![m])
        }
        _ => None,
    }
}

fn covariance_matrix(s: &SummarySample) -> Option<DMatrix<f64>> {
    let c = s.covariance.as_ref()?;
    let d = s.channels();
    Some(DMatrix::from_fn(d, d, |i, j| c[tri_index(d, i, j)]))
}

fn episode_weights(s: &SummarySample) -> Option<(BinSource, BTreeMap<u32, u64>, u64)> {
    s.episodes.as_ref().map(|h| (h.source, h.bins.clone(), h.outlier))
}

/// Symmetric divergence between two samples using statistic `id` alone;
/// `None` when either side lacks it.
pub fn statistic_divergence(a: &SummarySample, b: &SummarySample, id: StatId) -> Option<f64> {
    match id {
        StatId::Variance | StatId::Extrema | StatId::Histogram => {
            let (ma, mb) = (channel_models(a, id)?, channel_models(b, id)?);
            if ma.len() != mb.len() {
                return None;
            }
            Some(symmetric(|rev| {
                ma.iter()
                    .zip(&mb)
                    .map(|(x, y)| if rev { compare::kl_divergence(y, x) } else { compare::kl_divergence(x, y) })
                    .sum()
            }))
        }
        StatId::Covariance => {
            let (ca, cb) = (covariance_matrix(a)?, covariance_matrix(b)?);
            Some(symmetric(|rev| {
                if rev {
                    kl_gaussian_full(&b.mean, &cb, &a.mean, &ca)
                } else {
                    kl_gaussian_full(&a.mean, &ca, &b.mean, &cb)
                }
            }))
        }
        StatId::Hull => {
            let (ha, hb) = (a.hull.as_ref()?, b.hull.as_ref()?);
            Some(symmetric(|rev| if rev { kl_hull(hb, ha) } else { kl_hull(ha, hb) }))
        }
        StatId::Swv => {
            let (sa, sb) = (a.swv.as_ref()?, b.swv.as_ref()?);
            Some(symmetric(|rev| {
                sa.iter().zip(sb).map(|(x, y)| if rev { kl_discrete(y, x) } else { kl_discrete(x, y) }).sum()
            }))
        }
        StatId::Episodes => {
            let (src_a, ba, oa) = episode_weights(a)?;
            let (src_b, bb, ob) = episode_weights(b)?;
            if src_a != src_b {
                return None;
            }
            let keys: Vec<u32> =
                ba.keys().chain(bb.keys()).copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let dense = |m: &BTreeMap<u32, u64>, o: u64| {
                let mut v: Vec<f64> = keys.iter().map(|k| m.get(k).copied().unwrap_or(0) as f64).collect();
                v.push(o as f64);
                v
            };
            let (pa, pb) = (dense(&ba, oa), dense(&bb, ob));
            Some(symmetric(|rev| if rev { kl_discrete(&pb, &pa) } else { kl_discrete(&pa, &pb) }))
        }
        _ => None,
    }
}

/// Droppable statistics ranked by their mean symmetric divergence over
/// adjacent pairs, least discriminative first; ties keep statistic-id order.
/// Statistics absent from every pair are not ranked.
pub fn rank_statistics_for_drop(samples: &[SummarySample]) -> Result<Vec<(StatId, f64)>> {
    if samples.len() < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: samples.len() });
    }
    let mut ranked = Vec::new();
    for id in StatId::DROPPABLE {
        let scores: Vec<f64> = samples.windows(2).filter_map(|p| statistic_divergence(&p[0], &p[1], id)).collect();
        if !scores.is_empty() {
            ranked.push((id, scores.iter().sum::<f64>() / scores.len() as f64));
        }
    }
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Drop order used when too few samples exist to rank statistics: the
/// largest optional statistics go first.
const FALLBACK_DROP_ORDER: [StatId; 7] = [
    StatId::Hull,
    StatId::Swv,
    StatId::Episodes,
    StatId::Histogram,
    StatId::Covariance,
    StatId::Extrema,
    StatId::Variance,
];

/// What [`compact`] did.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompactReport {
    pub merges: usize,
    pub drops: usize,
}

/// Bring the record within its budgets: merges first, then statistic drops
/// (oldest level first) when a value budget is set and merges alone cannot
/// meet it. A record already within budget is left bit-identical.
pub fn compact(rec: &mut SummaryRecord) -> Result<CompactReport> {
    rec.rules.validate()?;
    let budget = rec.rules.budget_slots;
    let values_over = |r: &SummaryRecord| r.rules.budget_values.is_some_and(|v| r.stored_values() > v);
    if rec.slots() <= budget && !values_over(rec) {
        return Ok(CompactReport::default());
    }
    let mut report = CompactReport::default();
    // rank while there are still enough samples to compare
    if values_over(rec) && rec.rules.drop_priority.is_empty() {
        let samples = rec.samples_in_time_order();
        if let Ok(r) = rank_statistics_for_drop(&samples) {
            rec.rules.drop_priority = r.into_iter().map(|(id, _)| id).collect();
        }
    }
    while rec.slots() > budget {
        rec.merge_step(true)?;
        report.merges += 1;
    }
    while values_over(rec) && rec.levels().iter().any(|l| l.len() >= 2) {
        rec.merge_step(true)?;
        report.merges += 1;
    }
    if values_over(rec) {
        let mut order = rec.rules.drop_priority.clone();
        for id in FALLBACK_DROP_ORDER {
            if !order.contains(&id) {
                order.push(id);
            }
        }
        'outer: for id in order {
            for level in (0..rec.levels().len()).rev() {
                for idx in 0..rec.levels()[level].len() {
                    if rec.drop_statistic(level, idx, id) {
                        report.drops += 1;
                    }
                    if !values_over(rec) {
                        break 'outer;
                    }
                }
            }
        }
    }
    if report.merges > 0 {
        rec.access.tick();
    }
    rec.provenance.push(Action::Compact { merges: report.merges, drops: report.drops });
    if values_over(rec) {
        return Err(Error::CannotSatisfyBudget(format!(
            "{} values stored, budget {}",
            rec.stored_values(),
            rec.rules.budget_values.unwrap_or(0)
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{summarize, StatisticSet};

    fn s(v: &[f64], t: u64) -> SummarySample {
        let rows: Vec<[f64; 1]> = v.iter().map(|x| [*x]).collect();
        summarize(&rows, 1, t, &StatisticSet { swv: true, ..Default::default() }).unwrap()
    }

    #[test]
    fn identical_pair_scores_zero_and_ranks_first() {
        let rules = CurationRules {
            weights: HeuristicWeights { nonstationarity_w: 1.0, ..Default::default() },
            ..Default::default()
        };
        // nine samples: the oldest quartile holds pairs 0 and 1
        let mut level = vec![s(&[0.0, 10.0], 0), s(&[1.0, 2.0], 2), s(&[1.0, 2.0], 4)];
        level.extend((3..9).map(|i| s(&[5.0, 9.0], 2 * i)));
        let ranked = score_merge_candidates(&level, &rules, &AccessLog::new(16.0)).unwrap();
        assert_eq!(ranked.len(), 2);
        assert_eq!(ranked[0], MergeCandidate { index: 1, score: 0.0 });
        assert!(ranked[1].score > 0.0);
    }

    #[test]
    fn access_pushes_pair_back() {
        let rules = CurationRules {
            weights: HeuristicWeights { prior_access_w: 1.0, ..Default::default() },
            ..Default::default()
        };
        let level: Vec<SummarySample> = (0..9).map(|i| s(&[1.0, 2.0], 2 * i)).collect();
        let mut log = AccessLog::new(16.0);
        for _ in 0..10 {
            log.record(0);
        }
        let ranked = score_merge_candidates(&level, &rules, &log).unwrap();
        assert_eq!(ranked[0].index, 1, "untouched pair first");
        assert!(ranked[0].score < ranked[1].score);
        // heavier access weight keeps the same argmin
        let heavier = CurationRules {
            weights: HeuristicWeights { prior_access_w: 5.0, ..Default::default() },
            ..Default::default()
        };
        assert_eq!(score_merge_candidates(&level, &heavier, &log).unwrap()[0].index, 1);
    }

    #[test]
    fn zero_weights_pick_oldest() {
        let level: Vec<SummarySample> = (0..9).map(|i| s(&[i as f64, 0.0], 2 * i)).collect();
        let ranked = score_merge_candidates(&level, &CurationRules::default(), &AccessLog::new(16.0)).unwrap();
        assert_eq!(ranked[0].index, 0);
        assert_eq!(ranked.len(), oldest_quartile(9));
        assert_eq!(
            score_merge_candidates(&level[..1], &CurationRules::default(), &AccessLog::new(16.0)),
            Err(Error::TooFewSamples { needed: 2, got: 1 })
        );
    }

    #[test]
    fn quartile_sizes() {
        assert_eq!(oldest_quartile(2), 1);
        assert_eq!(oldest_quartile(3), 1);
        assert_eq!(oldest_quartile(9), 2);
        assert_eq!(oldest_quartile(17), 4);
    }

    #[test]
    fn access_log_decay_and_pooling() {
        let mut log = AccessLog::new(16.0);
        log.record(5);
        assert_eq!(log.count(5), 1.0);
        for _ in 0..16 {
            log.tick();
        }
        assert!((log.count(5) - 0.5).abs() < 1e-15);
        log.record(7);
        log.pool(5, 7);
        assert!((log.count(5) - 1.5).abs() < 1e-15);
        assert_eq!(log.count(7), 0.0);
    }

    #[test]
    fn constant_statistic_drops_first() {
        // variance alternates, mean and extrema stay put
        let samples: Vec<SummarySample> = (0..8)
            .map(|i| {
                let v = if i % 2 == 0 { vec![-1.0, 1.0, -1.0, 1.0] } else { vec![-1.0, 0.0, 0.0, 1.0] };
                s(&v, 4 * i)
            })
            .collect();
        let ranked = rank_statistics_for_drop(&samples).unwrap();
        let pos = |id: StatId| ranked.iter().position(|(x, _)| *x == id).unwrap();
        assert_eq!(ranked[pos(StatId::Extrema)].1, 0.0);
        assert!(pos(StatId::Extrema) < pos(StatId::Variance));
        // direct divergence of the alternating variances
        let (va, vb) = (1.0f64, 0.5f64);
        let direct = 0.5 * (va / vb + vb / va) - 1.0;
        assert!((ranked[pos(StatId::Variance)].1 - direct).abs() < 1e-12);
        assert_eq!(rank_statistics_for_drop(&samples[..3]), Err(Error::TooFewSamples { needed: 4, got: 3 }));
    }

    #[test]
    fn ranking_ties_by_id() {
        let samples: Vec<SummarySample> = (0..4).map(|i| s(&[1.0, 1.0], 2 * i)).collect();
        let ranked = rank_statistics_for_drop(&samples).unwrap();
        assert!(ranked.iter().all(|(_, v)| *v == 0.0));
        let ids: Vec<StatId> = ranked.iter().map(|(id, _)| *id).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn rules_validation() {
        assert!(CurationRules::default().validate().is_ok());
        let mut r = CurationRules::default();
        r.weights.slowness_w = -1.0;
        assert!(matches!(r.validate(), Err(Error::InvalidRules(_))));
        let r = CurationRules { drop_priority: vec![StatId::Mean], ..Default::default() };
        assert!(r.validate().is_err());
    }
}
