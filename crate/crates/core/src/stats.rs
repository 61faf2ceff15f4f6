//! Mergeable statistic bundles.
//!
//! A [`SummarySample`] summarizes one half-open interval `[t_start, t_end)` of
//! raw stream indices. Every statistic it carries obeys a merge law, so the
//! summary of a union of disjoint intervals can be computed from the summaries
//! of the parts alone:
//!
//! ```
//! use gfs_core::stats::{summarize, merge, StatisticSet};
//!
//! let stats = StatisticSet::default();
//! let a = summarize(&[[1.0], [2.0]], 1, 0, &stats).unwrap();
//! let b = summarize(&[[3.0], [4.0]], 1, 2, &stats).unwrap();
//! let whole = summarize(&[[1.0], [2.0], [3.0], [4.0]], 1, 0, &stats).unwrap();
//! let merged = merge(&a, &b).unwrap();
//! assert_eq!(merged.n, whole.n);
//! assert!((merged.variance[0] - whole.variance[0]).abs() < 1e-12);
//! ```
//!
//! Variances are population variances (divide by the effective count). Counts,
//! extrema, hulls and histogram bins are raw; mean, variance, covariance and
//! scale-wise variance are weighted by the sample weights.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hull::{self, Point};
use crate::{Error, Result};

/// Stable identifiers for statistics, shared with the container format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u16)]
pub enum StatId {
    Count = 0,
    Mean = 1,
    Variance = 2,
    Extrema = 3,
    Covariance = 4,
    Hull = 5,
    Histogram = 6,
    Swv = 7,
    Episodes = 8,
    /// Reserved; no merge law is implemented.
    Skewness = 9,
    /// Reserved; no merge law is implemented.
    Kurtosis = 10,
}

impl StatId {
    pub const ALL: [StatId; 11] = [
        StatId::Count,
        StatId::Mean,
        StatId::Variance,
        StatId::Extrema,
        StatId::Covariance,
        StatId::Hull,
        StatId::Histogram,
        StatId::Swv,
        StatId::Episodes,
        StatId::Skewness,
        StatId::Kurtosis,
    ];

    /// Statistics that curation may remove. Count and mean form the minimum
    /// viable summary and never appear here.
    pub const DROPPABLE: [StatId; 7] = [
        StatId::Variance,
        StatId::Extrema,
        StatId::Covariance,
        StatId::Hull,
        StatId::Histogram,
        StatId::Swv,
        StatId::Episodes,
    ];

    pub fn from_u16(v: u16) -> Option<StatId> {
        StatId::ALL.iter().copied().find(|s| *s as u16 == v)
    }

    pub fn name(self) -> &'static str {
        match self {
            StatId::Count => "count",
            StatId::Mean => "mean",
            StatId::Variance => "variance",
            StatId::Extrema => "extrema",
            StatId::Covariance => "covariance",
            StatId::Hull => "hull",
            StatId::Histogram => "histogram",
            StatId::Swv => "swv",
            StatId::Episodes => "episodes",
            StatId::Skewness => "skewness",
            StatId::Kurtosis => "kurtosis",
        }
    }
}

impl fmt::Display for StatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of [`StatId`]s stored as a bitmask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatSet(pub u16);

impl StatSet {
    pub const EMPTY: StatSet = StatSet(0);

    pub fn all() -> StatSet {
        StatId::ALL.iter().fold(StatSet::EMPTY, |s, id| s.with(*id))
    }

    pub fn contains(self, id: StatId) -> bool {
        self.0 & (1 << id as u16) != 0
    }

    pub fn with(self, id: StatId) -> StatSet {
        StatSet(self.0 | (1 << id as u16))
    }

    pub fn without(self, id: StatId) -> StatSet {
        StatSet(self.0 & !(1 << id as u16))
    }

    pub fn union(self, other: StatSet) -> StatSet {
        StatSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = StatId> {
        StatId::ALL.into_iter().filter(move |id| self.contains(*id))
    }
}

/// Parametric family suggested for a sample's distribution model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    Gaussian,
    Piecewise,
}

impl Family {
    pub(crate) fn code(f: Option<Family>) -> u8 {
        match f {
            None => 0,
            Some(Family::Uniform) => 1,
            Some(Family::Gaussian) => 2,
            Some(Family::Piecewise) => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Option<Family>> {
        match c {
            0 => Some(None),
            1 => Some(Some(Family::Uniform)),
            2 => Some(Some(Family::Gaussian)),
            3 => Some(Some(Family::Piecewise)),
            _ => None,
        }
    }
}

/// Equal-width binning of one channel over `[lo, hi]`. Values outside the
/// range land in the histogram's outlier bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRule {
    pub channel: usize,
    pub lo: f64,
    pub hi: f64,
    pub bins: u32,
}

impl BinRule {
    pub fn new(channel: usize, lo: f64, hi: f64, bins: u32) -> Result<BinRule> {
        if !(hi > lo) || bins == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::BadRequest(format!("invalid bin rule {lo}:{hi}:{bins}")));
        }
        Ok(BinRule { channel, lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    /// Bin index for `x`, or `None` for the outlier bin. The last bin is
    /// closed on the right.
    pub fn bin_of(&self, x: f64) -> Option<u32> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let idx = ((x - self.lo) / self.width()).floor() as i64;
        Some(idx.clamp(0, self.bins as i64 - 1) as u32)
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = self.width();
        (0..=self.bins).map(|i| if i == self.bins { self.hi } else { self.lo + w * i as f64 }).collect()
    }
}

/// What a histogram's bin ids refer to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSource {
    Uniform(BinRule),
    /// Entry ids of a [`crate::Dictionary`] at a given compaction generation.
    Dictionary {
        id: u64,
        generation: u32,
    },
}

/// Sparse bin counts plus an outlier bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub source: BinSource,
    pub bins: BTreeMap<u32, u64>,
    pub outlier: u64,
}

impl Histogram {
    pub fn new(source: BinSource) -> Histogram {
        Histogram { source, bins: BTreeMap::new(), outlier: 0 }
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum::<u64>() + self.outlier
    }

    pub fn add(&mut self, bin: Option<u32>, count: u64) {
        match bin {
            Some(b) => *self.bins.entry(b).or_insert(0) += count,
            None => self.outlier += count,
        }
    }

    /// Bin-wise sum. Both histograms must share a source.
    pub fn merge(&self, other: &Histogram) -> Result<Histogram> {
        if self.source != other.source {
            return Err(Error::DictionaryMismatch);
        }
        let mut out = self.clone();
        for (b, c) in &other.bins {
            *out.bins.entry(*b).or_insert(0) += c;
        }
        out.outlier += other.outlier;
        Ok(out)
    }
}

/// Which optional statistics to compute at ingest. Count, weight, mean,
/// variance and extrema are always computed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatisticSet {
    pub covariance: bool,
    /// Only honoured for two-channel streams.
    pub hull: bool,
    pub histogram: Option<BinRule>,
    pub swv: bool,
}

impl StatisticSet {
    pub fn full() -> StatisticSet {
        StatisticSet { covariance: true, hull: true, histogram: None, swv: true }
    }
}

/// Mergeable statistics for one interval of raw samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySample {
    pub t_start: u64,
    pub t_end: u64,
    /// Raw cardinality.
    pub n: u64,
    /// Effective count: the sum of raw sample weights.
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// `+inf` when empty; `-inf` when extrema were dropped.
    pub min: Vec<f64>,
    /// `-inf` when empty; `+inf` when extrema were dropped.
    pub max: Vec<f64>,
    /// Upper triangle, row-major.
    pub covariance: Option<Vec<f64>>,
    pub hull: Option<Vec<Point>>,
    pub histogram: Option<Histogram>,
    /// Dictionary hits of episodic patterns completed inside the interval.
    pub episodes: Option<Histogram>,
    /// Scale-wise variance per channel, finest scale first.
    pub swv: Option<Vec<Vec<f64>>>,
    pub family_hint: Option<Family>,
    /// Statistics removed by merges (intersection rule) or by curation.
    pub dropped: StatSet,
}

pub(crate) fn tri_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * (i + 1) / 2 + j
}

pub(crate) fn tri_len(d: usize) -> usize {
    d * (d + 1) / 2
}

impl SummarySample {
    /// The neutral element: merging with it is an exact identity.
    pub fn empty(channels: usize, t: u64) -> SummarySample {
        SummarySample {
            t_start: t,
            t_end: t,
            n: 0,
            weight: 0.0,
            mean: vec![0.0; channels],
            variance: vec![0.0; channels],
            min: vec![f64::INFINITY; channels],
            max: vec![f64::NEG_INFINITY; channels],
            covariance: None,
            hull: None,
            histogram: None,
            episodes: None,
            swv: None,
            family_hint: None,
            dropped: StatSet::EMPTY,
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn span(&self) -> u64 {
        self.t_end - self.t_start
    }

    /// Whether statistic `id` is available on this sample.
    pub fn has(&self, id: StatId) -> bool {
        match id {
            StatId::Count | StatId::Mean => true,
            StatId::Variance | StatId::Extrema => !self.dropped.contains(id),
            StatId::Covariance => self.covariance.is_some(),
            StatId::Hull => self.hull.is_some(),
            StatId::Histogram => self.histogram.is_some(),
            StatId::Episodes => self.episodes.is_some(),
            StatId::Swv => self.swv.is_some(),
            StatId::Skewness | StatId::Kurtosis => false,
        }
    }

    /// Remove a statistic, recording the removal. Count and mean cannot be
    /// dropped; asking for them is a no-op returning `false`.
    pub fn drop_stat(&mut self, id: StatId) -> bool {
        if !StatId::DROPPABLE.contains(&id) || !self.has(id) {
            return false;
        }
        match id {
            StatId::Variance => self.variance.iter_mut().for_each(|v| *v = 0.0),
            StatId::Extrema => {
                self.min.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
                self.max.iter_mut().for_each(|v| *v = f64::INFINITY);
            }
            StatId::Covariance => self.covariance = None,
            StatId::Hull => self.hull = None,
            StatId::Histogram => self.histogram = None,
            StatId::Swv => self.swv = None,
            StatId::Episodes => self.episodes = None,
            _ => unreachable!(),
        }
        self.dropped = self.dropped.with(id);
        true
    }

    /// Covariance entry `(i, j)` if covariance is carried.
    pub fn cov(&self, i: usize, j: usize) -> Option<f64> {
        self.covariance.as_ref().map(|c| c[tri_index(self.channels(), i, j)])
    }

    /// Number of stored floating-point values and integers, for cost
    /// accounting.
    pub fn storage_cost(&self) -> (usize, usize) {
        let d = self.channels();
        let mut floats = 1 + d;
        if self.has(StatId::Variance) {
            floats += d;
        }
        if self.has(StatId::Extrema) {
            floats += 2 * d;
        }
        if let Some(c) = &self.covariance {
            floats += c.len();
        }
        if let Some(h) = &self.hull {
            floats += 2 * h.len();
        }
        if let Some(s) = &self.swv {
            floats += s.iter().map(Vec::len).sum::<usize>();
        }
        let mut ints = 3;
        for h in [&self.histogram, &self.episodes].into_iter().flatten() {
            ints += 2 * h.bins.len() + 1;
        }
        (floats, ints)
    }
}

/// Summarize raw rows directly (population moments). This is the reference
/// that merges must reproduce.
pub fn summarize<R: AsRef<[f64]>>(
    rows: &[R],
    channels: usize,
    t_start: u64,
    stats: &StatisticSet,
) -> Result<SummarySample> {
    summarize_weighted(rows, None, channels, t_start, stats)
}

/// Like [`summarize`] with a per-row weight.
pub fn summarize_weighted<R: AsRef<[f64]>>(
    rows: &[R],
    weights: Option<&[f64]>,
    channels: usize,
    t_start: u64,
    stats: &StatisticSet,
) -> Result<SummarySample> {
    let d = channels;
    for r in rows {
        if r.as_ref().len() != d {
            return Err(Error::ChannelMismatch { expected: d, got: r.as_ref().len() });
        }
    }
    if let Some(w) = weights {
        if w.len() != rows.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: w.len() });
        }
        if let Some(bad) = w.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::NegativeWeight(*bad));
        }
    }
    let n = rows.len();
    let mut s = SummarySample::empty(d, t_start);
    s.t_end = t_start + n as u64;
    if n == 0 {
        return Ok(s);
    }
    let w_of = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..n).map(w_of).sum();
    // zero total weight falls back to count weighting
    let (wsum_eff, use_w) = if wsum > 0.0 { (wsum, true) } else { (n as f64, false) };
    let wt = |i: usize| if use_w { w_of(i) } else { 1.0 };

    s.n = n as u64;
    s.weight = wsum;
    for c in 0..d {
        let mean = (0..n).map(|i| wt(i) * rows[i].as_ref()[c]).sum::<f64>() / wsum_eff;
        let var = (0..n)
            .map(|i| {
                let dx = rows[i].as_ref()[c] - mean;
                wt(i) * dx * dx
            })
            .sum::<f64>()
            / wsum_eff;
        s.mean[c] = mean;
        s.variance[c] = var;
        s.min[c] = rows.iter().map(|r| r.as_ref()[c]).fold(f64::INFINITY, f64::min);
        s.max[c] = rows.iter().map(|r| r.as_ref()[c]).fold(f64::NEG_INFINITY, f64::max);
    }
    if stats.covariance {
        let mut cov = vec![0.0; tri_len(d)];
        for i in 0..d {
            for j in i..d {
                let v = if i == j {
                    s.variance[i]
                } else {
                    (0..n)
                        .map(|k| {
                            let r = rows[k].as_ref();
                            wt(k) * (r[i] - s.mean[i]) * (r[j] - s.mean[j])
                        })
                        .sum::<f64>()
                        / wsum_eff
                };
                cov[tri_index(d, i, j)] = v;
            }
        }
        s.covariance = Some(cov);
    }
    if stats.hull && d == 2 {
        let pts: Vec<Point> = rows.iter().map(|r| [r.as_ref()[0], r.as_ref()[1]]).collect();
        s.hull = Some(hull::convex_hull(&pts));
    }
    if let Some(rule) = stats.histogram {
        if rule.channel < d {
            let mut h = Histogram::new(BinSource::Uniform(rule));
            for r in rows {
                h.add(rule.bin_of(r.as_ref()[rule.channel]), 1);
            }
            s.histogram = Some(h);
        }
    }
    if stats.swv {
        // Binary pairwise reduction in stream order; an odd trailing element
        // is carried up alone.
        let mut layer: Vec<SummarySample> =
            (0..n).map(|i| point_sample(rows[i].as_ref(), wt(i), t_start + i as u64)).collect();
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            for pair in layer.chunks(2) {
                next.push(match pair {
                    [a, b] => merge(a, b)?,
                    [a] => promote(a),
                    _ => unreachable!(),
                });
            }
            layer = next;
        }
        s.swv = layer.pop().and_then(|x| x.swv);
    }
    Ok(s)
}

fn point_sample(row: &[f64], w: f64, t: u64) -> SummarySample {
    let d = row.len();
    let mut s = SummarySample::empty(d, t);
    s.t_end = t + 1;
    s.n = 1;
    s.weight = w;
    s.mean = row.to_vec();
    s.min = row.to_vec();
    s.max = row.to_vec();
    s.swv = Some(vec![Vec::new(); d]);
    s
}

/// Carry a sample up one scale without a partner: its scale-wise variance
/// gains a zero term so the depth tracks the scale.
pub fn promote(s: &SummarySample) -> SummarySample {
    let mut out = s.clone();
    if let Some(swv) = &mut out.swv {
        for t in swv.iter_mut() {
            t.push(0.0);
        }
    }
    out
}

/// Merge two samples. The interval of the result is the smallest interval
/// covering both; weights combine additively.
pub fn merge(a: &SummarySample, b: &SummarySample) -> Result<SummarySample> {
    let d = a.channels();
    if b.channels() != d {
        return Err(Error::ChannelMismatch { expected: d, got: b.channels() });
    }
    if b.is_empty() {
        let mut out = a.clone();
        widen_interval(&mut out, b);
        return Ok(out);
    }
    if a.is_empty() {
        let mut out = b.clone();
        widen_interval(&mut out, a);
        return Ok(out);
    }

    let wsum = a.weight + b.weight;
    let (fa, fb) = if wsum > 0.0 {
        (a.weight / wsum, b.weight / wsum)
    } else {
        let n = (a.n + b.n) as f64;
        (a.n as f64 / n, b.n as f64 / n)
    };

    let mut dropped = a.dropped.union(b.dropped);
    let mean: Vec<f64> = (0..d).map(|c| fa * a.mean[c] + fb * b.mean[c]).collect();
    let da: Vec<f64> = (0..d).map(|c| a.mean[c] - mean[c]).collect();
    let db: Vec<f64> = (0..d).map(|c| b.mean[c] - mean[c]).collect();

    let variance = if dropped.contains(StatId::Variance) {
        vec![0.0; d]
    } else {
        (0..d).map(|c| fa * (a.variance[c] + da[c] * da[c]) + fb * (b.variance[c] + db[c] * db[c])).collect()
    };
    let min = (0..d).map(|c| a.min[c].min(b.min[c])).collect();
    let max = (0..d).map(|c| a.max[c].max(b.max[c])).collect();

    let covariance = match (&a.covariance, &b.covariance) {
        (Some(ca), Some(cb)) => {
            let mut out = vec![0.0; tri_len(d)];
            for i in 0..d {
                for j in i..d {
                    let k = tri_index(d, i, j);
                    out[k] = fa * (ca[k] + da[i] * da[j]) + fb * (cb[k] + db[i] * db[j]);
                }
            }
            if !dropped.contains(StatId::Variance) {
                // keep the diagonal identical to the variance vector
                for i in 0..d {
                    out[tri_index(d, i, i)] = variance[i];
                }
            }
            Some(out)
        }
        (None, None) => None,
        _ => {
            dropped = dropped.with(StatId::Covariance);
            None
        }
    };
    let hull = match (&a.hull, &b.hull) {
        (Some(ha), Some(hb)) => Some(hull::merge_hull(ha, hb)),
        (None, None) => None,
        _ => {
            dropped = dropped.with(StatId::Hull);
            None
        }
    };
    let histogram = match (&a.histogram, &b.histogram) {
        (Some(ha), Some(hb)) => Some(ha.merge(hb)?),
        (None, None) => None,
        _ => {
            dropped = dropped.with(StatId::Histogram);
            None
        }
    };
    let episodes = match (&a.episodes, &b.episodes) {
        (Some(ha), Some(hb)) => Some(ha.merge(hb)?),
        (None, None) => None,
        _ => {
            dropped = dropped.with(StatId::Episodes);
            None
        }
    };
    let swv = match (&a.swv, &b.swv) {
        (Some(sa), Some(sb)) => {
            Some((0..d).map(|c| crate::spectrum::merge_terms(&sa[c], &sb[c], fa, fb, da[c], db[c])).collect())
        }
        (None, None) => None,
        _ => {
            dropped = dropped.with(StatId::Swv);
            None
        }
    };

    Ok(SummarySample {
        t_start: a.t_start.min(b.t_start),
        t_end: a.t_end.max(b.t_end),
        n: a.n + b.n,
        weight: wsum,
        mean,
        variance,
        min,
        max,
        covariance,
        hull,
        histogram,
        episodes,
        swv,
        family_hint: if a.family_hint == b.family_hint { a.family_hint } else { None },
        dropped,
    })
}

fn widen_interval(out: &mut SummarySample, other: &SummarySample) {
    if other.t_end > other.t_start {
        out.t_start = out.t_start.min(other.t_start);
        out.t_end = out.t_end.max(other.t_end);
    }
}

/// Scale a sample's weight by `w`. A zero weight keeps the sample (and its
/// raw count, extrema and bins) but removes it from weighted moments.
pub fn apply_weight(x: &SummarySample, w: f64) -> Result<SummarySample> {
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::NegativeWeight(w));
    }
    let mut out = x.clone();
    out.weight *= w;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<[f64; 1]> {
        v.iter().map(|x| [*x]).collect()
    }

    fn s1(v: &[f64], t: u64) -> SummarySample {
        summarize(&col(v), 1, t, &StatisticSet::default()).unwrap()
    }

    // Direct population variance, independent of the merge path.
    fn pop_var(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn merge_pooled_variance_example() {
        let a = s1(&[0.5, 1.5], 0);
        let b = s1(&[2.5, 3.5], 2);
        assert_eq!((a.n, a.mean[0], a.variance[0]), (2, 1.0, 0.25));
        assert_eq!((b.n, b.mean[0], b.variance[0]), (2, 3.0, 0.25));
        let m = merge(&a, &b).unwrap();
        assert_eq!(m.n, 4);
        assert!((m.mean[0] - 2.0).abs() < 1e-15);
        let oracle = pop_var(&[0.5, 1.5, 2.5, 3.5]);
        assert!((oracle - 1.25).abs() < 1e-15);
        assert!((m.variance[0] - oracle).abs() < 1e-15);
        assert_eq!((m.t_start, m.t_end), (0, 4));
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let x = summarize(&[[1.0, 2.0], [3.0, -1.0]], 2, 5, &StatisticSet::full()).unwrap();
        let e = SummarySample::empty(2, 7);
        assert_eq!(merge(&x, &e).unwrap(), x);
        assert_eq!(merge(&e, &x).unwrap(), x);
    }

    #[test]
    fn weighted_mean_of_unequal_counts() {
        let a = s1(&[0.0], 0);
        let b = s1(&[4.0, 4.0, 4.0], 1);
        let m = merge(&a, &b).unwrap();
        assert_eq!(m.n, 4);
        assert!((m.mean[0] - (0.0 * 1.0 + 4.0 * 3.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn extrema_merge_elementwise() {
        let a = s1(&[-1.0, 2.0], 0);
        let b = s1(&[0.0, 5.0], 2);
        let m = merge(&a, &b).unwrap();
        assert_eq!((m.min[0], m.max[0]), (-1.0, 5.0));
    }

    #[test]
    fn summarize_examples() {
        let s = s1(&[1.0, 2.0, 3.0, 4.0], 0);
        assert_eq!((s.n, s.mean[0], s.variance[0], s.min[0], s.max[0]), (4, 2.5, 1.25, 1.0, 4.0));
        let e = summarize::<[f64; 1]>(&[], 1, 3, &StatisticSet::default()).unwrap();
        assert_eq!(e, SummarySample::empty(1, 3));
        let c = s1(&[7.5, 7.5, 7.5], 0);
        assert_eq!((c.n, c.mean[0], c.variance[0], c.min[0], c.max[0]), (3, 7.5, 0.0, 7.5, 7.5));
    }

    #[test]
    fn weights() {
        let a = s1(&[0.0, 0.0], 0);
        let b = s1(&[4.0, 4.0], 2);
        assert_eq!(apply_weight(&a, 1.0).unwrap(), a);
        let m0 = merge(&a, &apply_weight(&b, 0.0).unwrap()).unwrap();
        assert_eq!(m0.mean[0], 0.0);
        assert_eq!(m0.n, 4);
        assert_eq!(m0.max[0], 4.0, "excluded data still bound the extrema");
        let mh = merge(&a, &apply_weight(&b, 0.5).unwrap()).unwrap();
        assert!((mh.mean[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(apply_weight(&a, -1.0), Err(Error::NegativeWeight(-1.0)));
    }

    #[test]
    fn channel_mismatch() {
        let a = s1(&[1.0], 0);
        let b = summarize(&[[1.0, 2.0]], 2, 1, &StatisticSet::default()).unwrap();
        assert!(matches!(merge(&a, &b), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn histogram_source_mismatch() {
        let r1 = BinRule::new(0, 0.0, 1.0, 4).unwrap();
        let r2 = BinRule::new(0, 0.0, 2.0, 4).unwrap();
        let a = summarize(&[[0.5]], 1, 0, &StatisticSet { histogram: Some(r1), ..Default::default() }).unwrap();
        let b = summarize(&[[0.5]], 1, 1, &StatisticSet { histogram: Some(r2), ..Default::default() }).unwrap();
        assert_eq!(merge(&a, &b), Err(Error::DictionaryMismatch));
    }

    #[test]
    fn missing_optional_is_dropped_and_recorded() {
        let a = summarize(&[[1.0, 2.0]], 2, 0, &StatisticSet::full()).unwrap();
        let b = summarize(&[[3.0, 1.0]], 2, 1, &StatisticSet::default()).unwrap();
        let m = merge(&a, &b).unwrap();
        assert!(m.covariance.is_none() && m.hull.is_none() && m.swv.is_none());
        assert!(m.dropped.contains(StatId::Covariance));
        assert!(m.dropped.contains(StatId::Hull));
        assert!(m.dropped.contains(StatId::Swv));
    }

    #[test]
    fn covariance_diagonal_matches_variance() {
        let rows = [[1.0, 2.0], [2.0, 1.0], [4.0, 3.0], [0.0, -1.0]];
        let a = summarize(&rows[..1], 2, 0, &StatisticSet::full()).unwrap();
        let b = summarize(&rows[1..], 2, 1, &StatisticSet::full()).unwrap();
        let m = merge(&a, &b).unwrap();
        let direct = summarize(&rows, 2, 0, &StatisticSet::full()).unwrap();
        for i in 0..2 {
            assert_eq!(m.cov(i, i).unwrap(), m.variance[i]);
            for j in 0..2 {
                assert!((m.cov(i, j).unwrap() - direct.cov(i, j).unwrap()).abs() < 1e-12);
            }
        }
        let h = m.hull.unwrap();
        assert!(hull::contains(&h, [m.mean[0], m.mean[1]]));
    }

    #[test]
    fn bin_rule_edges() {
        let r = BinRule::new(0, 0.0, 2.0, 2).unwrap();
        assert_eq!(r.bin_of(0.0), Some(0));
        assert_eq!(r.bin_of(1.0), Some(1));
        assert_eq!(r.bin_of(2.0), Some(1));
        assert_eq!(r.bin_of(2.5), None);
        assert_eq!(r.bin_of(f64::NAN), None);
        assert_eq!(r.edges(), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn dropped_extrema_are_unbounded() {
        let mut a = s1(&[1.0, 2.0], 0);
        assert!(a.drop_stat(StatId::Extrema));
        assert!(!a.drop_stat(StatId::Mean));
        let b = s1(&[5.0], 2);
        let m = merge(&a, &b).unwrap();
        assert!(!m.has(StatId::Extrema));
        assert_eq!((m.min[0], m.max[0]), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn storage_cost_matches_figure_style_accounting() {
        // mean (2) + covariance (3) + an 8-vertex hull (16) = 21 floats
        let pts: Vec<[f64; 2]> = (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 8.0;
                [a.cos(), a.sin()]
            })
            .collect();
        let mut s =
            summarize(&pts, 2, 0, &StatisticSet { covariance: true, hull: true, ..Default::default() }).unwrap();
        s.drop_stat(StatId::Variance);
        s.drop_stat(StatId::Extrema);
        let (floats, _) = s.storage_cost();
        assert_eq!(floats - 1, 21, "one extra float is the weight");
    }
}
