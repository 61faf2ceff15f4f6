//! The binary scaled summary: a budgeted multi-scale record of a stream.
//!
//! Level `k` holds samples that each summarize (nominally) `2^k` consecutive
//! raw samples. New data enter level 0. Nothing is merged until the record
//! holds more samples than its slot budget; then the level furthest above
//! its share of the budget merges its oldest pair into one sample at the next
//! level. Older data therefore always sit at coarser scales, and the stored
//! samples tile the stream from index 0 to now without gaps or overlap.
//!
//! ```
//! use gfs_core::{CurationRules, StatisticSet, SummaryRecord};
//!
//! let mut rec = SummaryRecord::new(1, StatisticSet::default(), CurationRules::with_budget(8)).unwrap();
//! for i in 0..100 {
//!     rec.ingest(&[i as f64]).unwrap();
//! }
//! assert!(rec.slots() <= 8);
//! let all = rec.aggregate();
//! assert_eq!(all.n, 100);
//! assert!((all.mean[0] - 49.5).abs() < 1e-12);
//! ```

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::curation::{self, AccessLog, CompactReport, CurationRules};
use crate::dictionary::{self, Dictionary, Item, Remap};
use crate::spectrum::{self, ScaleWiseVariance};
use crate::stats::{self, Histogram, StatId, StatisticSet, SummarySample};
use crate::{Error, Result};

/// Role of a channel in the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelLabel {
    Observation,
    Action,
    Reward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub channels: usize,
    pub stats: StatisticSet,
    pub labels: Vec<ChannelLabel>,
    pub names: Vec<String>,
}

/// One entry of the derivation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    LevelOpened { level: usize, at: u64 },
    Merge { level: usize, t_start: u64, t_end: u64 },
    Promote { level: usize, t_start: u64 },
    Drop { level: usize, t_start: u64, stat: StatId },
    Compact { merges: usize, drops: usize },
    DictionaryCompacted { generation: u32, entries: usize },
    BudgetChanged { slots: usize },
    Note { text: String },
}

/// How the stored values were derived. Routine merges during ingest are
/// counted per level; explicit curation actions are logged individually.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub statistics: Vec<StatId>,
    pub scale_ratio: u32,
    /// Pair merges that produced a sample at level `k`.
    pub merges_per_level: Vec<u64>,
    /// Merges of the two oldest samples across levels (budget below the
    /// number of occupied levels).
    pub saturated_merges: u64,
    /// Samples carried up a level without a partner.
    pub promotions: u64,
    pub events: Vec<Action>,
    /// Oldest events discarded to keep the log bounded.
    pub events_truncated: u64,
}

const EVENT_CAP: usize = 4096;

impl Provenance {
    pub fn push(&mut self, a: Action) {
        if self.events.len() >= EVENT_CAP {
            self.events.remove(0);
            self.events_truncated += 1;
        }
        self.events.push(a);
    }

    fn count_merge(&mut self, level: usize) {
        if self.merges_per_level.len() <= level {
            self.merges_per_level.resize(level + 1, 0);
        }
        self.merges_per_level[level] += 1;
    }

    pub fn total_merges(&self) -> u64 {
        self.merges_per_level.iter().sum::<u64>() + self.saturated_merges
    }
}

/// One line of [`SummaryRecord::span_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRow {
    pub level: usize,
    pub count: usize,
    pub t_start: u64,
    pub t_end: u64,
}

/// A stored sample returned by [`SummaryRecord::query_interval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalHit {
    pub level: usize,
    /// The sample extends beyond the queried range.
    pub coarse: bool,
    pub sample: SummarySample,
}

/// Per-level slot quotas, finest level first: `floor(M/K)` each with the
/// remainder going to the finest levels.
pub fn allocate_budget(slots: usize, levels: usize) -> Result<Vec<usize>> {
    if levels == 0 || slots < levels {
        return Err(Error::BudgetTooSmall { slots, levels });
    }
    Ok(quotas(slots, levels))
}

fn quotas(slots: usize, levels: usize) -> Vec<usize> {
    let (q, r) = (slots / levels, slots % levels);
    (0..levels).map(|i| q + usize::from(i < r)).collect()
}

/// Time covered by `levels` levels when level 0 covers `level0_span` units
/// and every level holds the same number of slots.
pub fn recorder_span(level0_span: u128, levels: u32) -> u128 {
    level0_span * ((1u128 << levels) - 1)
}

fn ceil_log2(n: u64) -> usize {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub(crate) meta: StreamMeta,
    pub(crate) levels: Vec<VecDeque<SummarySample>>,
    pub(crate) ingested: u64,
    pub rules: CurationRules,
    pub provenance: Provenance,
    pub access: AccessLog,
    pub(crate) dictionary: Option<Dictionary>,
    pub(crate) snippet: Vec<f64>,
}

impl SummaryRecord {
    pub fn new(channels: usize, stats: StatisticSet, rules: CurationRules) -> Result<SummaryRecord> {
        if channels == 0 {
            return Err(Error::ChannelMismatch { expected: 1, got: 0 });
        }
        rules.validate()?;
        let dictionary = match &rules.episodes {
            Some(ep) => {
                if ep.channel >= channels {
                    return Err(Error::InvalidRules(format!("episode channel {} of {channels}", ep.channel)));
                }
                if ep.dictionary.pattern_len == 0 {
                    return Err(Error::InvalidRules("episode window must be >= 1".into()));
                }
                Some(Dictionary::new(0, ep.dictionary.clone())?)
            }
            None => None,
        };
        let mut statistics = vec![StatId::Count, StatId::Mean, StatId::Variance, StatId::Extrema];
        if stats.covariance {
            statistics.push(StatId::Covariance);
        }
        if stats.hull && channels == 2 {
            statistics.push(StatId::Hull);
        }
        if stats.histogram.is_some() {
            statistics.push(StatId::Histogram);
        }
        if stats.swv {
            statistics.push(StatId::Swv);
        }
        if dictionary.is_some() {
            statistics.push(StatId::Episodes);
        }
        let access = AccessLog::new(rules.access_half_life);
        Ok(SummaryRecord {
            meta: StreamMeta {
                channels,
                stats,
                labels: vec![ChannelLabel::Observation; channels],
                names: (0..channels).map(|c| format!("x{c}")).collect(),
            },
            levels: Vec::new(),
            ingested: 0,
            rules,
            provenance: Provenance { statistics, scale_ratio: 2, ..Default::default() },
            access,
            dictionary,
            snippet: Vec::new(),
        })
    }

    pub fn meta(&self) -> &StreamMeta {
        &self.meta
    }

    pub fn set_channel_info(&mut self, names: Vec<String>, labels: Vec<ChannelLabel>) -> Result<()> {
        let d = self.meta.channels;
        if names.len() != d || labels.len() != d {
            return Err(Error::ChannelMismatch { expected: d, got: names.len().max(labels.len()) });
        }
        self.meta.names = names;
        self.meta.labels = labels;
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.meta.channels
    }

    pub fn levels(&self) -> &[VecDeque<SummarySample>] {
        &self.levels
    }

    pub fn dictionary(&self) -> Option<&Dictionary> {
        self.dictionary.as_ref()
    }

    /// Raw samples ingested so far; the next sample gets this index.
    pub fn ingested(&self) -> u64 {
        self.ingested
    }

    pub fn budget(&self) -> usize {
        self.rules.budget_slots
    }

    pub fn slots(&self) -> usize {
        self.levels.iter().map(VecDeque::len).sum()
    }

    /// Stored floats plus integers over all samples.
    pub fn stored_values(&self) -> usize {
        self.iter_time_order()
            .map(|(_, s)| {
                let (f, i) = s.storage_cost();
                f + i
            })
            .sum()
    }

    /// Stored samples oldest first, with their level.
    pub fn iter_time_order(&self) -> impl Iterator<Item = (usize, &SummarySample)> {
        self.levels.iter().enumerate().rev().flat_map(|(k, l)| l.iter().map(move |s| (k, s)))
    }

    pub fn samples_in_time_order(&self) -> Vec<SummarySample> {
        self.iter_time_order().map(|(_, s)| s.clone()).collect()
    }

    /// Merge of every stored sample: the summary of the whole stream.
    pub fn aggregate(&self) -> SummarySample {
        let mut acc = SummarySample::empty(self.meta.channels, 0);
        for (_, s) in self.iter_time_order() {
            acc = stats::merge(&acc, s).expect("stored samples share the channel count");
        }
        acc
    }

    pub fn ingest(&mut self, x: &[f64]) -> Result<()> {
        self.ingest_weighted(x, 1.0)
    }

    pub fn ingest_weighted(&mut self, x: &[f64], w: f64) -> Result<()> {
        let d = self.meta.channels;
        if x.len() != d {
            return Err(Error::ChannelMismatch { expected: d, got: x.len() });
        }
        if !x.iter().all(|v| v.is_finite()) || !(w.is_finite() && w > 0.0) {
            return Err(Error::BadRequest("values and weight must be finite, weight positive".into()));
        }
        let t = self.ingested;
        let mut s = stats::summarize_weighted(&[x], Some(&[w]), d, t, &self.meta.stats)?;
        if let Some(dict) = &self.dictionary {
            s.episodes = Some(Histogram::new(dict.source()));
        }
        if self.levels.is_empty() {
            self.open_level(0);
        }
        self.levels[0].push_back(s);
        self.ingested += 1;
        self.observe_episode(x, t)?;

        let mut merged = false;
        while self.slots() > self.rules.budget_slots {
            self.merge_step(false)?;
            merged = true;
        }
        if merged {
            self.access.tick();
        }
        Ok(())
    }

    fn observe_episode(&mut self, x: &[f64], t: u64) -> Result<()> {
        let (Some(ep), Some(dict)) = (&self.rules.episodes, &mut self.dictionary) else {
            return Ok(());
        };
        self.snippet.push(x[ep.channel]);
        if self.snippet.len() < dict.config.pattern_len {
            return Ok(());
        }
        let snippet = std::mem::take(&mut self.snippet);
        let a = dict.assign(&Item::Pattern(snippet), t)?;
        if let Some(r) = &a.remap {
            self.apply_remap(r)?;
        }
        let newest = self.levels[0].back_mut().expect("just ingested");
        newest.episodes.as_mut().expect("episodes enabled").add(a.entry, 1);
        Ok(())
    }

    fn apply_remap(&mut self, r: &Remap) -> Result<()> {
        for level in &mut self.levels {
            for s in level.iter_mut() {
                if let Some(h) = &s.episodes {
                    s.episodes = Some(dictionary::remap_histogram(h, r)?);
                }
            }
        }
        let entries = self.dictionary.as_ref().map_or(0, Dictionary::len);
        self.provenance.push(Action::DictionaryCompacted { generation: r.to_generation, entries });
        Ok(())
    }

    /// Compact the episode dictionary and rewrite stored episode histograms.
    pub fn compact_dictionary(&mut self, target: usize) -> Result<Remap> {
        let dict = self.dictionary.as_mut().ok_or(Error::MissingStatistic("episodes"))?;
        let r = dict.compact_dictionary(target)?;
        if !r.is_empty() {
            self.apply_remap(&r)?;
        }
        Ok(r)
    }

    fn open_level(&mut self, level: usize) {
        while self.levels.len() <= level {
            let k = self.levels.len();
            self.levels.push(VecDeque::new());
            self.provenance.push(Action::LevelOpened { level: k, at: self.ingested });
        }
    }

    /// Level that should give up a pair next, if any level has one.
    /// Level 0 keeps its two newest samples out of reach.
    pub fn merge_level(&self) -> Option<usize> {
        let q = quotas(self.rules.budget_slots, self.levels.len().max(1));
        let mut best: Option<(usize, i64)> = None;
        for (k, l) in self.levels.iter().enumerate() {
            let eligible = if k == 0 { l.len() >= 3 } else { l.len() >= 2 };
            if !eligible {
                continue;
            }
            let excess = l.len() as i64 - q[k] as i64;
            if best.is_none_or(|(_, e)| excess > e) {
                best = Some((k, excess));
            }
        }
        best.map(|(k, _)| k)
    }

    /// Index of the pair to merge at `level`: the oldest unless non-zero
    /// heuristic weights pick another pair from the oldest quartile.
    pub fn merge_pair(&mut self, level: usize) -> Result<usize> {
        if self.rules.weights.all_zero() {
            return Ok(0);
        }
        let samples = self.levels[level].make_contiguous();
        let ranked = curation::score_merge_candidates(samples, &self.rules, &self.access)?;
        Ok(ranked[0].index)
    }

    /// Free one slot.
    pub(crate) fn merge_step(&mut self, explicit: bool) -> Result<()> {
        match self.merge_level() {
            Some(k) => self.merge_at_level(k, explicit),
            None if self.slots() >= 2 => self.saturated_merge(explicit),
            None => Err(Error::CannotSatisfyBudget(format!(
                "{} slot(s) stored, budget {}",
                self.slots(),
                self.rules.budget_slots
            ))),
        }
    }

    fn merge_at_level(&mut self, k: usize, explicit: bool) -> Result<()> {
        let pair = self.merge_pair(k)?;
        self.open_level(k + 1);
        for _ in 0..pair {
            let s = self.levels[k].pop_front().expect("pair index within level");
            let t_start = s.t_start;
            self.levels[k + 1].push_back(stats::promote(&s));
            self.provenance.promotions += 1;
            self.provenance.push(Action::Promote { level: k + 1, t_start });
        }
        let a = self.levels[k].pop_front().expect("eligible level");
        let b = self.levels[k].pop_front().expect("eligible level");
        let m = stats::merge(&a, &b)?;
        self.access.pool(a.t_start, b.t_start);
        if explicit {
            self.provenance.push(Action::Merge { level: k + 1, t_start: m.t_start, t_end: m.t_end });
        }
        self.provenance.count_merge(k + 1);
        self.levels[k + 1].push_back(m);
        Ok(())
    }

    // The two oldest samples merge across levels; the result is labelled with
    // the smallest level whose nominal span covers it (never below the top).
    fn saturated_merge(&mut self, explicit: bool) -> Result<()> {
        let mut from = self.levels.iter().rposition(|l| !l.is_empty()).expect("at least two samples");
        let top = from;
        let a = self.levels[from].pop_front().expect("non-empty");
        if self.levels[from].is_empty() {
            from = self.levels[..from].iter().rposition(|l| !l.is_empty()).expect("at least two samples");
        }
        let b = self.levels[from].pop_front().expect("non-empty");
        let m = stats::merge(&a, &b)?;
        self.access.pool(a.t_start, b.t_start);
        let level = top.max(ceil_log2(m.span()));
        self.open_level(level);
        if explicit {
            self.provenance.push(Action::Merge { level, t_start: m.t_start, t_end: m.t_end });
        }
        self.provenance.saturated_merges += 1;
        self.levels[level].push_front(m);
        Ok(())
    }

    /// Remove statistic `id` from one stored sample, logging the drop.
    pub(crate) fn drop_statistic(&mut self, level: usize, idx: usize, id: StatId) -> bool {
        let s = &mut self.levels[level][idx];
        if !s.drop_stat(id) {
            return false;
        }
        let t_start = s.t_start;
        self.provenance.push(Action::Drop { level, t_start, stat: id });
        true
    }

    /// Change the slot budget and compact to it.
    pub fn set_budget(&mut self, slots: usize) -> Result<CompactReport> {
        if slots == 0 {
            return Err(Error::InvalidRules("budget_slots must be >= 1".into()));
        }
        if slots != self.rules.budget_slots {
            self.rules.budget_slots = slots;
            self.provenance.push(Action::BudgetChanged { slots });
        }
        curation::compact(self)
    }

    pub fn span_report(&self) -> Vec<SpanRow> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(level, l)| SpanRow {
                level,
                count: l.len(),
                t_start: l.front().expect("non-empty").t_start,
                t_end: l.back().expect("non-empty").t_end,
            })
            .collect()
    }

    /// Stored samples overlapping `[t0, t1)`, oldest first.
    pub fn query_interval(&self, t0: u64, t1: u64) -> Result<Vec<IntervalHit>> {
        if t0 >= t1 {
            return Err(Error::InvalidRange { t0, t1 });
        }
        if t1 > self.ingested {
            return Err(Error::FutureRange { t0, t1, now: self.ingested });
        }
        Ok(self
            .iter_time_order()
            .filter(|(_, s)| s.t_end > t0 && s.t_start < t1)
            .map(|(level, s)| IntervalHit { level, coarse: s.t_start < t0 || s.t_end > t1, sample: s.clone() })
            .collect())
    }

    /// Count one access to each stored sample identified by its start index.
    pub fn record_access(&mut self, keys: &[u64]) -> Result<()> {
        let known: BTreeSet<u64> = self.iter_time_order().map(|(_, s)| s.t_start).collect();
        if let Some(bad) = keys.iter().find(|k| !known.contains(k)) {
            return Err(Error::UnknownId(*bad));
        }
        for k in keys {
            self.access.record(*k);
        }
        Ok(())
    }

    /// Term `scale` (1 = finest) of channel `channel` across the samples of
    /// one level, oldest first.
    pub fn coefficient_series(&self, level: usize, channel: usize, scale: usize) -> Result<Vec<f64>> {
        let l = self.levels.get(level).ok_or(Error::EmptySeries)?;
        l.iter()
            .map(|s| {
                let swv = s.swv.as_ref().ok_or(Error::MissingStatistic("swv"))?;
                let terms =
                    swv.get(channel).ok_or(Error::ChannelMismatch { expected: self.channels(), got: channel + 1 })?;
                Ok(terms.get(scale.wrapping_sub(1)).copied().unwrap_or(0.0))
            })
            .collect()
    }

    /// Second-order (modulation) spectrum of one scale's coefficients.
    pub fn modulation_spectrum(&self, level: usize, channel: usize, scale: usize) -> Result<ScaleWiseVariance> {
        let series = self.coefficient_series(level, channel, scale)?;
        spectrum::summarize_coefficients(&series, 2, self.rules.max_swv_order)
    }

    /// Structural checks: contiguous tiling from 0 to now, coarser levels
    /// older, sane moments, budget respected.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvariantViolation(m));
        if self.slots() > self.rules.budget_slots {
            return bad(format!("{} slots over budget {}", self.slots(), self.rules.budget_slots));
        }
        let mut next = 0u64;
        let mut n_total = 0u64;
        for (level, s) in self.iter_time_order() {
            if s.t_start != next {
                return bad(format!("gap or overlap at index {next} (level {level})"));
            }
            if s.t_end <= s.t_start || s.n == 0 || s.n != s.span() {
                return bad(format!("sample at {} has inconsistent span/count", s.t_start));
            }
            if s.channels() != self.meta.channels {
                return bad(format!("sample at {} has wrong channel count", s.t_start));
            }
            if s.variance.iter().any(|v| !(*v >= 0.0)) || !(s.weight >= 0.0) {
                return bad(format!("sample at {} has negative variance or weight", s.t_start));
            }
            next = s.t_end;
            n_total += s.n;
        }
        if next != self.ingested || n_total != self.ingested {
            return bad(format!("coverage ends at {next}, stream length {}", self.ingested));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(budget: usize) -> SummaryRecord {
        SummaryRecord::new(1, StatisticSet { swv: true, ..Default::default() }, CurationRules::with_budget(budget))
            .unwrap()
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_budget(64, 4).unwrap(), vec![16; 4]);
        assert_eq!(allocate_budget(10, 3).unwrap(), vec![4, 3, 3]);
        assert_eq!(allocate_budget(2, 3), Err(Error::BudgetTooSmall { slots: 2, levels: 3 }));
    }

    #[test]
    fn thousand_samples_budget_64() {
        let mut r = rec(64);
        for i in 0..1000 {
            r.ingest(&[(i as f64).sin()]).unwrap();
            assert!(r.slots() <= 64);
        }
        let top = r.span_report().last().unwrap().level;
        assert!(top >= 4, "top level {top}");
        r.check_invariants().unwrap();
    }

    #[test]
    fn single_sample_no_merge() {
        let mut r = rec(1);
        r.ingest(&[3.0]).unwrap();
        assert_eq!(r.span_report(), vec![SpanRow { level: 0, count: 1, t_start: 0, t_end: 1 }]);
        assert_eq!(r.provenance.total_merges(), 0);
    }

    #[test]
    fn budget_one_power_of_two() {
        for k in 0..7u32 {
            let mut r = rec(1);
            let xs: Vec<f64> = (0..1u64 << k).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            for x in &xs {
                r.ingest(&[*x]).unwrap();
            }
            let rows = r.span_report();
            assert_eq!(rows, vec![SpanRow { level: k as usize, count: 1, t_start: 0, t_end: 1 << k }]);
            let s = &r.levels()[k as usize][0];
            let rows_raw: Vec<[f64; 1]> = xs.iter().map(|x| [*x]).collect();
            let direct = stats::summarize(&rows_raw, 1, 0, &StatisticSet::default()).unwrap();
            assert_eq!(s.n, direct.n);
            assert!((s.mean[0] - direct.mean[0]).abs() <= 1e-12 * 6.0);
            assert!((s.variance[0] - direct.variance[0]).abs() <= 1e-12 * 36.0);
            assert_eq!((s.min[0], s.max[0]), (direct.min[0], direct.max[0]));
        }
    }

    #[test]
    fn laziness_within_level_zero_quota() {
        let mut r = rec(16);
        for i in 0..16 {
            r.ingest(&[i as f64]).unwrap();
        }
        assert_eq!(r.provenance.total_merges(), 0);
        assert_eq!(r.slots(), 16);
        r.ingest(&[0.0]).unwrap();
        assert_eq!(r.provenance.total_merges(), 1);
    }

    #[test]
    fn conservation_without_saturation() {
        let mut r = rec(12);
        for i in 0..777 {
            r.ingest(&[i as f64]).unwrap();
        }
        assert_eq!(r.provenance.saturated_merges, 0);
        assert_eq!(r.provenance.promotions, 0);
        let covered: u64 = r.span_report().iter().map(|row| row.count as u64 * (1 << row.level)).sum();
        assert_eq!(covered, 777);
    }

    #[test]
    fn recency_is_monotone() {
        let mut r = rec(7);
        for i in 0..300 {
            r.ingest(&[i as f64]).unwrap();
            let levels: Vec<usize> = r.iter_time_order().map(|(k, _)| k).collect();
            assert!(levels.windows(2).all(|w| w[0] >= w[1]));
            r.check_invariants().unwrap();
        }
    }

    #[test]
    fn queries() {
        let mut r = rec(8);
        for i in 0..100 {
            r.ingest(&[i as f64]).unwrap();
        }
        let newest = r.query_interval(99, 100).unwrap();
        assert_eq!(newest.len(), 1);
        assert_eq!((newest[0].level, newest[0].coarse), (0, false));
        let all = r.query_interval(0, 100).unwrap();
        assert_eq!(all.len(), r.slots());
        assert!(all.iter().all(|h| !h.coarse));
        let old = r.query_interval(0, 1).unwrap();
        assert_eq!(old.len(), 1);
        assert!(old[0].coarse && old[0].level > 0);
        assert_eq!(r.query_interval(5, 101), Err(Error::FutureRange { t0: 5, t1: 101, now: 100 }));
        assert_eq!(r.query_interval(5, 5), Err(Error::InvalidRange { t0: 5, t1: 5 }));
    }

    #[test]
    fn empty_record() {
        let r = rec(4);
        assert!(r.span_report().is_empty());
        r.check_invariants().unwrap();
        assert!(matches!(r.query_interval(0, 1), Err(Error::FutureRange { .. })));
    }

    #[test]
    fn channel_mismatch() {
        let mut r = rec(4);
        assert_eq!(r.ingest(&[1.0, 2.0]), Err(Error::ChannelMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut r = rec(4);
        for bad in [f64::NAN, f64::INFINITY] {
            assert!(matches!(r.ingest(&[bad]), Err(Error::BadRequest(_))));
        }
        assert!(matches!(r.ingest_weighted(&[1.0], 0.0), Err(Error::BadRequest(_))));
        assert_eq!(r.ingested(), 0);
    }

    #[test]
    fn access_counts_follow_merges() {
        let mut r = rec(4);
        for i in 0..4 {
            r.ingest(&[i as f64]).unwrap();
        }
        r.record_access(&[0, 1]).unwrap();
        assert_eq!(r.record_access(&[99]), Err(Error::UnknownId(99)));
        r.ingest(&[4.0]).unwrap();
        // samples 0 and 1 merged; their counters pool under key 0, then the
        // compaction cycle decays them by one tick
        let decay = 0.5f64.powf(1.0 / r.rules.access_half_life);
        assert!((r.access.count(0) - 2.0 * decay).abs() < 1e-12);
    }

    #[test]
    fn recorder_span_arithmetic() {
        let day_hours: u128 = 24;
        let year_hours: u128 = 8766;
        assert!(recorder_span(day_hours, 9) >= year_hours);
        assert!(recorder_span(day_hours, 8) < year_hours);
        assert!(recorder_span(day_hours, 45) > 10u128.pow(10) * year_hours);
    }

    #[test]
    fn modulation_spectrum_of_level() {
        let xs: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64).collect();
        let mut r = rec(32);
        for x in &xs {
            r.ingest(&[*x]).unwrap();
        }
        let series = r.coefficient_series(1, 0, 1).unwrap();
        assert!(!series.is_empty());
        for (s, c) in r.levels()[1].iter().zip(&series) {
            let t = s.t_start as usize;
            let direct = ((xs[t] - xs[t + 1]) / 2.0).powi(2);
            assert!((c - direct).abs() < 1e-12);
        }
        let m = r.modulation_spectrum(1, 0, 1).unwrap();
        assert_eq!(m, spectrum::summarize_coefficients(&series, 2, 2).unwrap());
        assert!(matches!(r.coefficient_series(9, 0, 1), Err(Error::EmptySeries)));
    }

    #[test]
    fn episodes_are_counted_and_remapped() {
        use crate::curation::EpisodeRules;
        use crate::dictionary::DictionaryConfig;
        let rules = CurationRules {
            budget_slots: 16,
            episodes: Some(EpisodeRules {
                channel: 0,
                dictionary: DictionaryConfig { pattern_len: 4, capacity: 8, ..Default::default() },
            }),
            ..Default::default()
        };
        let mut r = SummaryRecord::new(1, StatisticSet::default(), rules).unwrap();
        let shapes = [[0.0, 1.0, 0.0, -1.0], [5.0, 5.0, -5.0, -5.0]];
        for b in 0..50 {
            for v in shapes[b % 2] {
                r.ingest(&[v]).unwrap();
            }
        }
        let agg = r.aggregate();
        let episodes = agg.episodes.unwrap();
        assert_eq!(episodes.total(), 50);
        let before = r.dictionary().unwrap().total_count();
        r.compact_dictionary(1).unwrap();
        assert_eq!(r.dictionary().unwrap().total_count(), before);
        let agg2 = r.aggregate().episodes.unwrap();
        assert_eq!(agg2.total(), 50);
        assert_eq!(agg2.source, r.dictionary().unwrap().source());
    }
}
