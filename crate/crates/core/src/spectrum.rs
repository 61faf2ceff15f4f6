//! Scale-wise variance: a per-interval decomposition of variance into one
//! non-negative term per binary scale, finest scale first.
//!
//! For an interval of `2^K` samples the terms sum to the population variance,
//! and the mean square equals the sum of terms plus the squared mean, so the
//! vector behaves like a power spectrum on a log-frequency axis. Merging two
//! adjacent intervals averages their terms and appends one coarser term
//! carried by the spread of their means.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scale-wise variance of one channel together with what is needed to merge
/// it: the interval mean and effective count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleWiseVariance {
    pub terms: Vec<f64>,
    pub mean: f64,
    pub weight: f64,
}

impl ScaleWiseVariance {
    /// A single raw value: depth 0.
    pub fn point(x: f64) -> ScaleWiseVariance {
        ScaleWiseVariance { terms: Vec::new(), mean: x, weight: 1.0 }
    }

    pub fn depth(&self) -> usize {
        self.terms.len()
    }

    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Weighted term merge shared with [`crate::stats::merge`]. Inputs of unequal
/// depth are zero-padded at the coarse end; `da`/`db` are each side's mean
/// minus the merged mean.
pub(crate) fn merge_terms(ta: &[f64], tb: &[f64], fa: f64, fb: f64, da: f64, db: f64) -> Vec<f64> {
    let k = ta.len().max(tb.len());
    let mut out: Vec<f64> =
        (0..k).map(|i| fa * ta.get(i).copied().unwrap_or(0.0) + fb * tb.get(i).copied().unwrap_or(0.0)).collect();
    out.push(fa * da * da + fb * db * db);
    out
}

/// Merge two adjacent intervals of equal depth. Equal weights reproduce the
/// plain binary recursion; unequal weights use weighted averages, which keep
/// the terms summing to the pooled variance.
pub fn swv_merge(a: &ScaleWiseVariance, b: &ScaleWiseVariance) -> Result<ScaleWiseVariance> {
    if a.depth() != b.depth() {
        return Err(Error::DepthMismatch(a.depth(), b.depth()));
    }
    let w = a.weight + b.weight;
    let (fa, fb) = if w > 0.0 { (a.weight / w, b.weight / w) } else { (0.5, 0.5) };
    let mean = fa * a.mean + fb * b.mean;
    Ok(ScaleWiseVariance {
        terms: merge_terms(&a.terms, &b.terms, fa, fb, a.mean - mean, b.mean - mean),
        mean,
        weight: w,
    })
}

/// Scale-wise variance of a raw series by pairwise reduction. A series whose
/// length is not a power of two carries its unpaired trailing element up
/// alone (zero term at that scale).
pub fn swv_of_series(series: &[f64]) -> Result<ScaleWiseVariance> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut layer: Vec<ScaleWiseVariance> = series.iter().map(|x| ScaleWiseVariance::point(*x)).collect();
    while layer.len() > 1 {
        let mut next = Vec::with_capacity(layer.len().div_ceil(2));
        for pair in layer.chunks(2) {
            next.push(match pair {
                [a, b] => {
                    if a.depth() == b.depth() {
                        swv_merge(a, b)?
                    } else {
                        let w = a.weight + b.weight;
                        let (fa, fb) = (a.weight / w, b.weight / w);
                        let mean = fa * a.mean + fb * b.mean;
                        ScaleWiseVariance {
                            terms: merge_terms(&a.terms, &b.terms, fa, fb, a.mean - mean, b.mean - mean),
                            mean,
                            weight: w,
                        }
                    }
                }
                [a] => {
                    let mut up = a.clone();
                    up.terms.push(0.0);
                    up
                }
                _ => unreachable!(),
            });
        }
        layer = next;
    }
    Ok(layer.pop().expect("non-empty"))
}

/// Second-order scale-wise variance: the spectrum of a time series of
/// (already compressed) first-order coefficients at one scale.
pub fn second_order_swv(coefficients: &[f64]) -> Result<ScaleWiseVariance> {
    swv_of_series(coefficients)
}

/// Compressive transform applied to coefficients before they feed the next
/// order: identity at order 1, square root at order 2, cube root at order 3.
pub fn compress(v: f64, order: u32) -> Result<f64> {
    if order == 0 {
        return Err(Error::InvalidOrder(order));
    }
    if !(v >= 0.0) {
        return Err(Error::NegativeInput(v));
    }
    Ok(match order {
        1 => v,
        2 => v.sqrt(),
        3 => v.cbrt(),
        k => v.powf(1.0 / k as f64),
    })
}

/// Summarize a coefficient series at a given order: compress each value for
/// that order, then take its scale-wise variance. `max_order` is the
/// configured ceiling.
pub fn summarize_coefficients(coefficients: &[f64], order: u32, max_order: u32) -> Result<ScaleWiseVariance> {
    if order < 2 {
        return Err(Error::InvalidOrder(order));
    }
    if order > max_order {
        return Err(Error::OrderTooHigh { order, max: max_order });
    }
    let compressed = coefficients.iter().map(|v| compress(*v, order)).collect::<Result<Vec<_>>>()?;
    second_order_swv(&compressed)
}

/// Share of energy in the two finest scales; 0 for a flat signal.
pub fn fast_share(terms: &[f64]) -> f64 {
    let total: f64 = terms.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    terms.iter().take(2).sum::<f64>() / total
}

/// Index (1-based, finest = 1) of the largest term, `None` when all are zero.
pub fn dominant_scale(terms: &[f64]) -> Option<usize> {
    let (idx, max) =
        terms.iter().enumerate().fold((0, 0.0f64), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    (max > 0.0).then_some(idx + 1)
}
