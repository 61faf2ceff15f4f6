//! Dictionaries that give histogram bins a meaning.
//!
//! An entry is either an exact symbol or a pattern: a fixed-length snippet
//! shape held as a mean vector with a per-element spread. Incoming items are
//! assigned to the nearest entry by diagonal Mahalanobis distance, open a new
//! provisional entry when nothing is close enough, or fall into the outlier
//! bin when the dictionary is full. Compaction merges similar entries and
//! deletes rare ones; every compaction yields a [`Remap`] so histograms built
//! against the old entry ids stay consistent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::{BinSource, Histogram};
use crate::{Error, Result};

pub type EntryId = u32;

/// Something to be counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Symbol(String),
    Pattern(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryShape {
    Symbol(String),
    /// Member mean and population variance per element.
    Pattern {
        mean: Vec<f64>,
        variance: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictEntry {
    pub id: EntryId,
    pub shape: EntryShape,
    pub count: u64,
    pub last_hit: u64,
    pub provisional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryConfig {
    /// Snippet length for pattern items.
    pub pattern_len: usize,
    pub capacity: usize,
    /// Gate radius in (diagonal) Mahalanobis units.
    pub gate: f64,
    pub std_floor: f64,
    /// Entries below this count are provisional.
    pub promote_at: u64,
    /// Entries below this count are deleted at compaction.
    pub drop_below: u64,
    /// When full and an item finds no match, compact to half the bin count
    /// (entries plus the outlier bin) and admit the item instead of counting
    /// it as an outlier. This is the bootstrap loop; turn it off to keep the
    /// first `capacity` entries fixed.
    pub auto_compact: bool,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig {
            pattern_len: 8,
            capacity: 16,
            gate: 3.0,
            std_floor: 1e-6,
            promote_at: 3,
            drop_below: 2,
            auto_compact: true,
        }
    }
}

/// Old entry id to new entry id (`None`: moved to the outlier bin).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Remap {
    pub dictionary: u64,
    pub from_generation: u32,
    pub to_generation: u32,
    pub map: BTreeMap<EntryId, Option<EntryId>>,
}

impl Remap {
    pub fn is_empty(&self) -> bool {
        self.from_generation == self.to_generation
    }

    pub fn apply(&self, id: EntryId) -> Option<EntryId> {
        self.map.get(&id).copied().unwrap_or(Some(id))
    }
}

/// Outcome of [`Dictionary::assign`].
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Entry the item was counted in, `None` for the outlier bin.
    pub entry: Option<EntryId>,
    pub created: bool,
    /// Set when the assignment triggered an automatic compaction.
    pub remap: Option<Remap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub id: u64,
    pub generation: u32,
    pub config: DictionaryConfig,
    /// Sorted by id.
    pub entries: Vec<DictEntry>,
    pub outlier: u64,
    next_id: EntryId,
    // running scalar moments of every pattern element seen
    global_n: u64,
    global_mean: f64,
    global_m2: f64,
}

fn pool(na: f64, ma: &[f64], va: &[f64], nb: f64, mb: &[f64], vb: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = na + nb;
    let mean: Vec<f64> = ma.iter().zip(mb).map(|(a, b)| (na * a + nb * b) / n).collect();
    let var = (0..mean.len())
        .map(|i| {
            let (da, db) = (ma[i] - mean[i], mb[i] - mean[i]);
            (na * (va[i] + da * da) + nb * (vb[i] + db * db)) / n
        })
        .collect();
    (mean, var)
}

impl Dictionary {
    pub fn new(id: u64, config: DictionaryConfig) -> Result<Dictionary> {
        if config.capacity == 0 || !(config.gate > 0.0) || !(config.std_floor > 0.0) {
            return Err(Error::InvalidRules("dictionary needs capacity >= 1, gate > 0, std floor > 0".into()));
        }
        Ok(Dictionary {
            id,
            generation: 0,
            config,
            entries: Vec::new(),
            outlier: 0,
            next_id: 0,
            global_n: 0,
            global_mean: 0.0,
            global_m2: 0.0,
        })
    }

    pub fn source(&self) -> BinSource {
        BinSource::Dictionary { id: self.id, generation: self.generation }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry counts plus the outlier bin; invariant under compaction.
    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum::<u64>() + self.outlier
    }

    pub fn entry(&self, id: EntryId) -> Option<&DictEntry> {
        self.entries.binary_search_by_key(&id, |e| e.id).ok().map(|i| &self.entries[i])
    }

    /// Spread assumed for an entry with a single member: the global element
    /// std divided by the gate radius.
    pub fn prior_std(&self) -> f64 {
        if self.global_n < 2 {
            return 0.0;
        }
        (self.global_m2 / self.global_n as f64).sqrt() / self.config.gate
    }

    /// Per-element std band of a pattern entry.
    pub fn std_band(&self, e: &DictEntry) -> Option<Vec<f64>> {
        let EntryShape::Pattern { variance, .. } = &e.shape else {
            return None;
        };
        let s0 = self.prior_std();
        let prior = s0 * s0 / e.count.max(1) as f64;
        Some(variance.iter().map(|v| (v + prior).sqrt().max(self.config.std_floor)).collect())
    }

    /// Diagonal Mahalanobis distance from `x` to a pattern entry.
    pub fn distance(&self, e: &DictEntry, x: &[f64]) -> Option<f64> {
        let EntryShape::Pattern { mean, .. } = &e.shape else {
            return None;
        };
        let band = self.std_band(e)?;
        Some(x.iter().zip(mean).zip(&band).map(|((x, m), s)| ((x - m) / s).powi(2)).sum::<f64>().sqrt())
    }

    /// Closest pattern entry; equal distances resolve to the lowest id.
    pub fn nearest(&self, x: &[f64]) -> Option<(EntryId, f64)> {
        let mut best: Option<(EntryId, f64)> = None;
        for e in &self.entries {
            if let Some(d) = self.distance(e, x) {
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((e.id, d));
                }
            }
        }
        best
    }

    fn check_item(&self, item: &Item) -> Result<()> {
        match item {
            Item::Pattern(x) if x.len() != self.config.pattern_len => {
                Err(Error::LengthMismatch { expected: self.config.pattern_len, got: x.len() })
            }
            _ => Ok(()),
        }
    }

    /// Count `item` at time `t`.
    pub fn assign(&mut self, item: &Item, t: u64) -> Result<Assignment> {
        self.check_item(item)?;
        let hit = match item {
            Item::Symbol(s) => {
                self.entries.iter().find(|e| matches!(&e.shape, EntryShape::Symbol(x) if x == s)).map(|e| e.id)
            }
            Item::Pattern(x) => {
                let hit = self.nearest(x).filter(|(_, d)| *d <= self.config.gate).map(|(id, _)| id);
                for v in x {
                    self.global_n += 1;
                    let d = v - self.global_mean;
                    self.global_mean += d / self.global_n as f64;
                    self.global_m2 += d * (v - self.global_mean);
                }
                hit
            }
        };
        if let Some(id) = hit {
            self.absorb(id, item, t);
            return Ok(Assignment { entry: Some(id), created: false, remap: None });
        }
        let mut remap = None;
        if self.entries.len() >= self.config.capacity && self.config.auto_compact {
            // halve the bin count (entries plus outlier bin)
            let r = self.compact_dictionary(self.config.capacity.div_ceil(2))?;
            if !r.is_empty() {
                remap = Some(r);
            }
        }
        if self.entries.len() < self.config.capacity {
            let id = self.insert(item, t);
            return Ok(Assignment { entry: Some(id), created: true, remap });
        }
        self.outlier += 1;
        Ok(Assignment { entry: None, created: false, remap })
    }

    fn insert(&mut self, item: &Item, t: u64) -> EntryId {
        let id = self.next_id;
        self.next_id += 1;
        let shape = match item {
            Item::Symbol(s) => EntryShape::Symbol(s.clone()),
            Item::Pattern(x) => EntryShape::Pattern { mean: x.clone(), variance: vec![0.0; x.len()] },
        };
        self.entries.push(DictEntry { id, shape, count: 1, last_hit: t, provisional: 1 < self.config.promote_at });
        id
    }

    fn absorb(&mut self, id: EntryId, item: &Item, t: u64) {
        let promote_at = self.config.promote_at;
        let i = self.entries.binary_search_by_key(&id, |e| e.id).expect("entry exists");
        let e = &mut self.entries[i];
        if let (EntryShape::Pattern { mean, variance }, Item::Pattern(x)) = (&mut e.shape, item) {
            let (m, v) = pool(e.count as f64, mean, variance, 1.0, x, &vec![0.0; x.len()]);
            *mean = m;
            *variance = v;
        }
        e.count += 1;
        e.last_hit = e.last_hit.max(t);
        e.provisional = e.count < promote_at;
    }

    // Fold entry `from` into entry `into`.
    fn fold(&mut self, into: EntryId, from: EntryId) {
        let fi = self.entries.binary_search_by_key(&from, |e| e.id).expect("entry exists");
        let f = self.entries.remove(fi);
        let ii = self.entries.binary_search_by_key(&into, |e| e.id).expect("entry exists");
        let e = &mut self.entries[ii];
        if let (EntryShape::Pattern { mean, variance }, EntryShape::Pattern { mean: fm, variance: fv }) =
            (&mut e.shape, &f.shape)
        {
            let (m, v) = pool(e.count as f64, mean, variance, f.count as f64, fm, fv);
            *mean = m;
            *variance = v;
        }
        e.count += f.count;
        e.last_hit = e.last_hit.max(f.last_hit);
        e.provisional = e.count < self.config.promote_at;
    }

    fn new_remap(&self) -> Remap {
        Remap {
            dictionary: self.id,
            from_generation: self.generation,
            to_generation: self.generation,
            map: BTreeMap::new(),
        }
    }

    fn record_move(remap: &mut Remap, from: EntryId, to: Option<EntryId>) {
        for v in remap.map.values_mut() {
            if *v == Some(from) {
                *v = to;
            }
        }
        remap.map.insert(from, to);
    }

    /// Shrink to at most `target` histogram bins, the outlier bin included,
    /// so at most `target - 1` entries survive. Rare entries are deleted
    /// first (their counts go to the outlier bin), then the closest pattern
    /// pair is merged by Ward cost. Entries that cannot be merged away are
    /// deleted, least frequent first.
    pub fn compact_dictionary(&mut self, target: usize) -> Result<Remap> {
        if target == 0 {
            return Err(Error::BadRequest("compaction target must be at least 1".into()));
        }
        let keep = target - 1;
        let mut remap = self.new_remap();
        if self.entries.len() <= keep {
            return Ok(remap);
        }
        let drop_below = self.config.drop_below;
        let rare: Vec<EntryId> =
            self.deletion_order().into_iter().filter(|(c, _)| *c < drop_below).map(|(_, id)| id).collect();
        for id in rare.into_iter().take(self.entries.len() - keep) {
            self.delete(&mut remap, id);
        }
        while self.entries.len() > keep {
            let Some((a, b)) = self.closest_pair() else {
                break;
            };
            self.fold(a, b);
            Self::record_move(&mut remap, b, Some(a));
        }
        let rest: Vec<EntryId> = self.deletion_order().into_iter().map(|(_, id)| id).collect();
        for id in rest.into_iter().take(self.entries.len().saturating_sub(keep)) {
            self.delete(&mut remap, id);
        }
        self.generation += 1;
        remap.to_generation = self.generation;
        Ok(remap)
    }

    // (count, id) ascending: least frequent, then oldest, first
    fn deletion_order(&self) -> Vec<(u64, EntryId)> {
        let mut v: Vec<(u64, EntryId)> = self.entries.iter().map(|e| (e.count, e.id)).collect();
        v.sort_unstable();
        v
    }

    fn delete(&mut self, remap: &mut Remap, id: EntryId) {
        let i = self.entries.binary_search_by_key(&id, |e| e.id).expect("entry exists");
        self.outlier += self.entries.remove(i).count;
        Self::record_move(remap, id, None);
    }

    fn closest_pair(&self) -> Option<(EntryId, EntryId)> {
        let mut best: Option<(EntryId, EntryId, f64)> = None;
        for (i, a) in self.entries.iter().enumerate() {
            let EntryShape::Pattern { mean: ma, .. } = &a.shape else {
                continue;
            };
            for b in &self.entries[i + 1..] {
                let EntryShape::Pattern { mean: mb, .. } = &b.shape else {
                    continue;
                };
                let d2: f64 = ma.iter().zip(mb).map(|(x, y)| (x - y) * (x - y)).sum();
                let (na, nb) = (a.count as f64, b.count as f64);
                let cost = na * nb / (na + nb) * d2;
                if best.is_none_or(|(_, _, c)| cost < c) {
                    best = Some((a.id, b.id, cost));
                }
            }
        }
        best.map(|(a, b, _)| (a, b))
    }

    /// Merge entries into user-chosen categories (`from -> into`).
    pub fn simplify_categories(&mut self, map: &BTreeMap<EntryId, EntryId>) -> Result<Remap> {
        for (from, into) in map {
            for id in [from, into] {
                if self.entry(*id).is_none() {
                    return Err(Error::UnknownId(*id as u64));
                }
            }
        }
        let mut remap = self.new_remap();
        let mut changed = false;
        for (&from, &into) in map {
            // follow earlier moves so chains like a->b, b->c land on c
            let target = remap.apply(into).expect("merged entries never reach the outlier bin");
            let source = remap.apply(from).expect("merged entries never reach the outlier bin");
            if source == target {
                continue;
            }
            self.fold(target, source);
            Self::record_move(&mut remap, source, Some(target));
            if source != from {
                Self::record_move(&mut remap, from, Some(target));
            }
            changed = true;
        }
        if changed {
            self.generation += 1;
            remap.to_generation = self.generation;
        }
        Ok(remap)
    }
}

/// Rewrite a histogram built against an older generation of the dictionary.
pub fn remap_histogram(h: &Histogram, remap: &Remap) -> Result<Histogram> {
    let from = BinSource::Dictionary { id: remap.dictionary, generation: remap.from_generation };
    if h.source != from {
        return Err(Error::DictionaryMismatch);
    }
    let mut out = Histogram::new(BinSource::Dictionary { id: remap.dictionary, generation: remap.to_generation });
    out.outlier = h.outlier;
    for (b, c) in &h.bins {
        out.add(remap.apply(*b), *c);
    }
    Ok(out)
}

/// Bin-wise sum of two dictionary histograms. Histograms from different
/// generations are reconciled with `mapping` when it bridges them.
pub fn merge_histograms(h1: &Histogram, h2: &Histogram, mapping: Option<&Remap>) -> Result<Histogram> {
    if h1.source == h2.source {
        return h1.merge(h2);
    }
    let Some(m) = mapping else {
        return Err(Error::DictionaryMismatch);
    };
    let from = BinSource::Dictionary { id: m.dictionary, generation: m.from_generation };
    if h1.source == from {
        remap_histogram(h1, m)?.merge(h2)
    } else if h2.source == from {
        h1.merge(&remap_histogram(h2, m)?)
    } else {
        Err(Error::DictionaryMismatch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cfg(len: usize, cap: usize) -> DictionaryConfig {
        DictionaryConfig { pattern_len: len, capacity: cap, auto_compact: false, ..Default::default() }
    }

    #[test]
    fn symbol_repeat() {
        let mut d = Dictionary::new(1, cfg(0, 4)).unwrap();
        let a = d.assign(&Item::Symbol("apple".into()), 0).unwrap();
        let b = d.assign(&Item::Symbol("apple".into()), 1).unwrap();
        assert!(a.created && !b.created);
        assert_eq!(a.entry, b.entry);
        assert_eq!(d.entry(a.entry.unwrap()).unwrap().count, 2);
    }

    #[test]
    fn pattern_at_mean() {
        let mut d = Dictionary::new(1, cfg(2, 4)).unwrap();
        let a = d.assign(&Item::Pattern(vec![1.0, 2.0]), 0).unwrap();
        assert_eq!(d.nearest(&[1.0, 2.0]).unwrap(), (a.entry.unwrap(), 0.0));
        let b = d.assign(&Item::Pattern(vec![1.0, 2.0]), 1).unwrap();
        assert_eq!(a.entry, b.entry);
    }

    #[test]
    fn length_mismatch() {
        let mut d = Dictionary::new(1, cfg(2, 4)).unwrap();
        assert_eq!(d.assign(&Item::Pattern(vec![1.0]), 0), Err(Error::LengthMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn gate_boundary_goes_to_outlier_when_full() {
        let mut d = Dictionary::new(1, cfg(1, 1)).unwrap();
        // first item creates the only entry; the rest land far outside it
        let xs = [0.0, 30.0, -30.0, 30.0, -30.0];
        for (t, x) in xs.into_iter().enumerate() {
            d.assign(&Item::Pattern(vec![x]), t as u64).unwrap();
        }
        assert_eq!(d.outlier, 4);
        let e = d.entries[0].clone();
        assert_eq!(e.count, 1);
        let gm = xs.iter().sum::<f64>() / 5.0;
        let gstd = (xs.iter().map(|x| (x - gm) * (x - gm)).sum::<f64>() / 5.0).sqrt();
        let std = gstd / 3.0;
        assert!((d.std_band(&e).unwrap()[0] - std).abs() < 1e-12);
        let q = 3.0 * std * (1.0 + 1e-6);
        let dist = d.distance(&e, &[q]).unwrap();
        assert!(dist > 3.0 && dist < 3.0001, "probe sits just outside the gate ({dist})");
        let mut probe = d.clone();
        let res = probe.assign(&Item::Pattern(vec![q]), 9).unwrap();
        assert_eq!(res.entry, None);
        assert_eq!(probe.outlier, d.outlier + 1);
        let inside = 2.0 * std;
        assert_eq!(d.assign(&Item::Pattern(vec![inside]), 10).unwrap().entry, Some(e.id));
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let mut d = Dictionary::new(1, cfg(1, 4)).unwrap();
        d.assign(&Item::Pattern(vec![-1.0]), 0).unwrap();
        d.assign(&Item::Pattern(vec![1.0]), 1).unwrap();
        assert_eq!(d.nearest(&[0.0]).unwrap().0, 0);
    }

    #[test]
    fn histogram_merges() {
        let mut d = Dictionary::new(3, cfg(0, 8)).unwrap();
        let mut h = Histogram::new(d.source());
        for s in ["a", "b", "a", "c"] {
            h.add(d.assign(&Item::Symbol(s.into()), 0).unwrap().entry, 1);
        }
        let empty = Histogram::new(d.source());
        assert_eq!(merge_histograms(&h, &empty, None).unwrap(), h);
        let dbl = merge_histograms(&h, &h, None).unwrap();
        assert_eq!(dbl.total(), 8);
        assert_eq!(dbl.bins[&0], 4);

        let map = BTreeMap::from([(1, 0)]);
        let remap = d.simplify_categories(&map).unwrap();
        let newer = Histogram::new(d.source());
        assert_eq!(merge_histograms(&h, &newer, None), Err(Error::DictionaryMismatch));
        let merged = merge_histograms(&h, &newer, Some(&remap)).unwrap();
        assert_eq!(merged.bins[&0], 3, "counts of 'a' and 'b' combine");
        assert_eq!(merged.total(), h.total());
    }

    #[test]
    fn compaction_noop_and_conservation() {
        let mut d = Dictionary::new(1, cfg(1, 8)).unwrap();
        for (t, x) in [0.0, 10.0, 20.0].into_iter().enumerate() {
            d.assign(&Item::Pattern(vec![x]), t as u64).unwrap();
        }
        let before = d.clone();
        let r = d.compact_dictionary(4).unwrap();
        assert!(r.is_empty() && r.map.is_empty());
        assert_eq!(d, before);
        let total = d.total_count();
        // three entries fit in four bins; two bins leave one entry
        d.compact_dictionary(2).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.total_count(), total);
        // a single bin is the outlier bin alone
        d.compact_dictionary(1).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.outlier, total);
    }

    #[test]
    fn symbols_compact_by_deletion() {
        let mut d = Dictionary::new(1, cfg(0, 8)).unwrap();
        for s in ["a", "b", "b", "c", "c", "c"] {
            d.assign(&Item::Symbol(s.into()), 0).unwrap();
        }
        let r = d.compact_dictionary(3).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(r.apply(0), None, "the rarest symbol goes to the outlier bin");
        assert_eq!(d.outlier, 1);
        assert_eq!(d.total_count(), 6);
    }

    #[test]
    fn simplify_examples() {
        let mut d = Dictionary::new(1, cfg(0, 8)).unwrap();
        for s in ["apple", "pear", "plum", "apple"] {
            d.assign(&Item::Symbol(s.into()), 0).unwrap();
        }
        let before = d.clone();
        let identity: BTreeMap<EntryId, EntryId> = d.entries.iter().map(|e| (e.id, e.id)).collect();
        d.simplify_categories(&identity).unwrap();
        assert_eq!(d, before);

        let mut partial = d.clone();
        partial.simplify_categories(&BTreeMap::from([(1, 0)])).unwrap();
        assert_eq!(partial.entry(0).unwrap().count, 3);
        assert_eq!(partial.entry(2).unwrap().count, 1);

        let all: BTreeMap<EntryId, EntryId> = d.entries.iter().map(|e| (e.id, 0)).collect();
        d.simplify_categories(&all).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.entries[0].count, 4);
        assert_eq!(d.simplify_categories(&BTreeMap::from([(9, 0)])), Err(Error::UnknownId(9)));
    }

    #[test]
    fn auto_compaction_frees_room() {
        let mut c = cfg(1, 4);
        c.auto_compact = true;
        let mut d = Dictionary::new(1, c).unwrap();
        let mut remaps = 0;
        for (t, x) in [0.0, 100.0, 1e3, 1e4, 1e5].into_iter().enumerate() {
            if d.assign(&Item::Pattern(vec![x]), t as u64).unwrap().remap.is_some() {
                remaps += 1;
            }
        }
        assert_eq!(remaps, 1);
        assert_eq!(d.total_count(), 5);
        assert!(d.len() <= 4);
    }

    #[test]
    fn three_clusters_small() {
        let centers = [[0.0, 0.0], [5.0, 0.0], [2.5, 4.33]];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut d = Dictionary::new(1, DictionaryConfig { pattern_len: 2, capacity: 8, ..Default::default() }).unwrap();
        for t in 0..900u64 {
            let c = centers[(t % 3) as usize];
            let x = vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)];
            d.assign(&Item::Pattern(x), t).unwrap();
        }
        d.compact_dictionary(4).unwrap();
        assert_eq!(d.total_count(), 900);
        let mut big: Vec<&DictEntry> = d.entries.iter().collect();
        big.sort_by_key(|e| std::cmp::Reverse(e.count));
        for c in centers {
            let err = big[..3]
                .iter()
                .map(|e| match &e.shape {
                    EntryShape::Pattern { mean, .. } => ((mean[0] - c[0]).powi(2) + (mean[1] - c[1]).powi(2)).sqrt(),
                    _ => f64::INFINITY,
                })
                .fold(f64::INFINITY, f64::min);
            assert!(err < 0.5, "center {c:?} recovered within {err}");
        }
    }
}
