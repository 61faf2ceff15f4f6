//! Distribution models built from statistics, and divergences between them.
//!
//! Raw data are gone by the time summaries are compared, so every comparison
//! goes through a parametric model of what the statistics say: extrema give a
//! uniform, mean and variance a Gaussian, a histogram a piecewise-uniform
//! density. Kullback-Leibler divergence between models is asymmetric and may
//! be infinite; both properties carry meaning and are preserved.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::hull::{self, Point};
use crate::stats::{BinSource, Family, StatId, SummarySample};
use crate::{Error, Result};

/// Mass floor for empty cells of an empirical (histogram) reference model.
pub const EMPIRICAL_FLOOR: f64 = 1e-12;
/// Cells used when comparing models of different families.
pub const MIXED_CELLS: usize = 256;
/// Half-width, in standard deviations, of a Gaussian's discretized support.
pub const GAUSSIAN_SPAN: f64 = 8.0;
/// Finite stand-in for an infinite divergence when ranking.
pub const KL_CAP: f64 = 1e6;
/// Default verdict threshold in nats.
pub const DEFAULT_TAU: f64 = 0.1;

/// A one-dimensional distribution parametrized by summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionModel {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    PiecewiseUniform {
        edges: Vec<f64>,
        probs: Vec<f64>,
        empirical: bool,
    },
    /// Degenerate model for zero variance or `min == max`.
    PointMass {
        at: f64,
    },
}

impl DistributionModel {
    pub fn uniform(lo: f64, hi: f64) -> DistributionModel {
        if hi > lo {
            DistributionModel::Uniform { lo, hi }
        } else {
            DistributionModel::PointMass { at: lo }
        }
    }

    pub fn gaussian(mean: f64, variance: f64) -> DistributionModel {
        if variance > 0.0 {
            DistributionModel::Gaussian { mean, variance }
        } else {
            DistributionModel::PointMass { at: mean }
        }
    }

    /// Piecewise-uniform model from bin edges and non-negative weights, which
    /// are normalized to probabilities.
    pub fn piecewise(edges: Vec<f64>, weights: &[f64], empirical: bool) -> Result<DistributionModel> {
        if edges.len() != weights.len() + 1 || weights.is_empty() {
            return Err(Error::DimensionMismatch { expected: weights.len() + 1, got: edges.len() });
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::BadRequest("piecewise edges must increase".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::EmptySample);
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(DistributionModel::PiecewiseUniform { edges, probs, empirical })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            DistributionModel::Uniform { .. } => "uniform",
            DistributionModel::Gaussian { .. } => "gaussian",
            DistributionModel::PiecewiseUniform { .. } => "piecewise_uniform",
            DistributionModel::PointMass { .. } => "point_mass",
        }
    }

    /// Interval holding (practically) all mass.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DistributionModel::Uniform { lo, hi } => (*lo, *hi),
            DistributionModel::Gaussian { mean, variance } => {
                let s = variance.sqrt() * GAUSSIAN_SPAN;
                (mean - s, mean + s)
            }
            DistributionModel::PiecewiseUniform { edges, .. } => (edges[0], edges[edges.len() - 1]),
            DistributionModel::PointMass { at } => (*at, *at),
        }
    }

    /// Density at `x`; `+inf` at a point mass.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            DistributionModel::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            DistributionModel::Gaussian { mean, variance } => {
                let z2 = (x - mean) * (x - mean) / variance;
                (-0.5 * z2).exp() / (std::f64::consts::TAU * variance).sqrt()
            }
            DistributionModel::PiecewiseUniform { edges, probs, .. } => match bin_at(edges, x) {
                Some(i) => probs[i] / (edges[i + 1] - edges[i]),
                None => 0.0,
            },
            DistributionModel::PointMass { at } => {
                if x == *at {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    fn covers_point(&self, x: f64) -> bool {
        match self {
            DistributionModel::Uniform { lo, hi } => x >= *lo && x <= *hi,
            DistributionModel::Gaussian { .. } => true,
            DistributionModel::PiecewiseUniform { edges, empirical, .. } => {
                let inside = x >= edges[0] && x <= edges[edges.len() - 1];
                inside && (*empirical || self.density(x) > 0.0)
            }
            DistributionModel::PointMass { at } => x == *at,
        }
    }

    fn is_empirical(&self) -> bool {
        matches!(self, DistributionModel::PiecewiseUniform { empirical: true, .. })
    }

    /// Uniform and piecewise models as (edges, densities).
    fn as_steps(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            DistributionModel::Uniform { lo, hi } => Some((vec![*lo, *hi], vec![1.0 / (hi - lo)])),
            DistributionModel::PiecewiseUniform { edges, probs, .. } => {
                Some((edges.clone(), probs.iter().enumerate().map(|(i, p)| p / (edges[i + 1] - edges[i])).collect()))
            }
            _ => None,
        }
    }

    /// Probability of `[a, b]`.
    pub fn cell_mass(&self, a: f64, b: f64) -> f64 {
        match self {
            DistributionModel::Gaussian { mean, variance } => gaussian_mass(*mean, variance.sqrt(), a, b),
            DistributionModel::PointMass { at } => {
                if *at >= a && *at <= b {
                    1.0
                } else {
                    0.0
                }
            }
            _ => {
                let (edges, dens) = self.as_steps().expect("step model");
                (0..dens.len())
                    .map(|i| {
                        let lo = edges[i].max(a);
                        let hi = edges[i + 1].min(b);
                        if hi > lo {
                            dens[i] * (hi - lo)
                        } else {
                            0.0
                        }
                    })
                    .sum()
            }
        }
    }

    fn ln_cell_mass(&self, a: f64, b: f64) -> f64 {
        let m = self.cell_mass(a, b);
        if m > 1e-300 {
            return m.ln();
        }
        match self {
            DistributionModel::Gaussian { mean, variance } => {
                // far tail: density at the midpoint times the width
                let mid = 0.5 * (a + b);
                let z2 = (mid - mean) * (mid - mean) / variance;
                -0.5 * z2 - 0.5 * (std::f64::consts::TAU * variance).ln() + (b - a).ln()
            }
            _ if m > 0.0 => m.ln(),
            _ => f64::NEG_INFINITY,
        }
    }
}

fn bin_at(edges: &[f64], x: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[last]) {
        return None;
    }
    let i = edges.partition_point(|e| *e <= x);
    Some(i.saturating_sub(1).min(last - 1))
}

fn std_normal_upper(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

fn gaussian_mass(mean: f64, sd: f64, a: f64, b: f64) -> f64 {
    let (za, zb) = ((a - mean) / sd, (b - mean) / sd);
    if za >= 0.0 {
        std_normal_upper(za) - std_normal_upper(zb)
    } else if zb <= 0.0 {
        std_normal_upper(-zb) - std_normal_upper(-za)
    } else {
        1.0 - std_normal_upper(zb) - std_normal_upper(-za)
    }
    .max(0.0)
}

/// `D(A || B)` in nats for one-dimensional models; `+inf` when A puts mass
/// where B has none.
pub fn kl_divergence(a: &DistributionModel, b: &DistributionModel) -> f64 {
    use DistributionModel::*;
    match (a, b) {
        (PointMass { at }, _) => {
            if b.covers_point(*at) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        (_, PointMass { .. }) => f64::INFINITY,
        (Uniform { lo: la, hi: ha }, Uniform { lo: lb, hi: hb }) => {
            if la >= lb && ha <= hb {
                ((hb - lb) / (ha - la)).ln()
            } else {
                f64::INFINITY
            }
        }
        (Gaussian { mean: ma, variance: va }, Gaussian { mean: mb, variance: vb }) => {
            let kl = 0.5 * (vb / va).ln() + (va + (ma - mb) * (ma - mb)) / (2.0 * vb) - 0.5;
            kl.max(0.0)
        }
        (Gaussian { .. }, _) | (_, Gaussian { .. }) => kl_discretized(a, b),
        _ => kl_steps(a, b),
    }
}

// Exact divergence between piecewise-constant densities on the common
// refinement of their edges.
fn kl_steps(a: &DistributionModel, b: &DistributionModel) -> f64 {
    let (ea, _) = a.as_steps().expect("step model");
    let (eb, _) = b.as_steps().expect("step model");
    let (lo, hi) = (ea[0], ea[ea.len() - 1]);
    let (blo, bhi) = (eb[0], eb[eb.len() - 1]);
    let mut edges: Vec<f64> = ea.iter().chain(eb.iter()).copied().filter(|e| *e >= lo && *e <= hi).collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut kl = 0.0;
    for w in edges.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let pa = a.density(mid) * width;
        if pa <= 0.0 {
            continue;
        }
        let mut pb = b.density(mid) * width;
        if pb <= 0.0 {
            if b.is_empirical() && mid >= blo && mid <= bhi {
                pb = EMPIRICAL_FLOOR;
            } else {
                return f64::INFINITY;
            }
        }
        kl += pa * (pa / pb).ln();
    }
    kl.max(0.0)
}

// Mixed families: both models on MIXED_CELLS equal cells over the union of
// supports.
fn kl_discretized(a: &DistributionModel, b: &DistributionModel) -> f64 {
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    let (lo, hi) = (alo.min(blo), ahi.max(bhi));
    let w = (hi - lo) / MIXED_CELLS as f64;
    let mut kl = 0.0;
    for i in 0..MIXED_CELLS {
        let x0 = lo + w * i as f64;
        let x1 = if i + 1 == MIXED_CELLS { hi } else { x0 + w };
        let pa = a.cell_mass(x0, x1);
        if pa <= 0.0 {
            continue;
        }
        let mut ln_pb = b.ln_cell_mass(x0, x1);
        if ln_pb == f64::NEG_INFINITY {
            if b.is_empirical() && x1 > blo && x0 < bhi {
                ln_pb = EMPIRICAL_FLOOR.ln();
            } else {
                return f64::INFINITY;
            }
        }
        kl += pa * (pa.ln() - ln_pb);
    }
    kl.max(0.0)
}

/// Per-channel models of a sample; divergences add across channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleModel {
    pub channels: Vec<DistributionModel>,
    /// Statistics the models were built from.
    pub sources: Vec<StatId>,
}

impl SampleModel {
    /// Joint density at `q` under channel independence.
    pub fn likelihood(&self, q: &[f64]) -> f64 {
        self.channels.iter().zip(q).map(|(m, x)| m.density(*x)).product()
    }
}

/// Build a model from a sample's statistics. Family precedence: explicit
/// override, then the sample's hint, then histogram, mean+variance, extrema.
pub fn model_from_sample(s: &SummarySample, family: Option<Family>) -> Result<SampleModel> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let chosen = family.or(s.family_hint);
    let mut channels = Vec::with_capacity(s.channels());
    let mut sources = Vec::new();
    for c in 0..s.channels() {
        let (m, src) = channel_model(s, c, chosen)?;
        if !sources.contains(&src) {
            sources.push(src);
        }
        channels.push(m);
    }
    sources.sort();
    Ok(SampleModel { channels, sources })
}

fn histogram_model(s: &SummarySample, c: usize) -> Option<DistributionModel> {
    let h = s.histogram.as_ref()?;
    let BinSource::Uniform(rule) = h.source else {
        return None;
    };
    if rule.channel != c {
        return None;
    }
    let mut weights = vec![0.0; rule.bins as usize];
    for (b, n) in &h.bins {
        weights[*b as usize] = *n as f64;
    }
    DistributionModel::piecewise(rule.edges(), &weights, true).ok()
}

fn gaussian_model(s: &SummarySample, c: usize) -> Option<DistributionModel> {
    s.has(StatId::Variance).then(|| DistributionModel::gaussian(s.mean[c], s.variance[c]))
}

fn uniform_model(s: &SummarySample, c: usize) -> Option<DistributionModel> {
    (s.has(StatId::Extrema) && s.min[c].is_finite() && s.max[c].is_finite())
        .then(|| DistributionModel::uniform(s.min[c], s.max[c]))
}

fn channel_model(s: &SummarySample, c: usize, family: Option<Family>) -> Result<(DistributionModel, StatId)> {
    match family {
        Some(Family::Piecewise) => {
            if s.histogram.is_none() {
                return Err(Error::MissingStatistic("piecewise"));
            }
            // channels the histogram does not bin fall back to the defaults
            if let Some(m) = histogram_model(s, c) {
                return Ok((m, StatId::Histogram));
            }
            channel_model(s, c, None)
        }
        Some(Family::Gaussian) => {
            gaussian_model(s, c).map(|m| (m, StatId::Variance)).ok_or(Error::MissingStatistic("gaussian"))
        }
        Some(Family::Uniform) => {
            uniform_model(s, c).map(|m| (m, StatId::Extrema)).ok_or(Error::MissingStatistic("uniform"))
        }
        None => histogram_model(s, c)
            .map(|m| (m, StatId::Histogram))
            .or_else(|| gaussian_model(s, c).map(|m| (m, StatId::Variance)))
            .or_else(|| uniform_model(s, c).map(|m| (m, StatId::Extrema)))
            .ok_or(Error::MissingStatistic("any")),
    }
}

/// Sum of per-channel divergences.
pub fn kl_models(a: &SampleModel, b: &SampleModel) -> Result<f64> {
    if a.channels.len() != b.channels.len() {
        return Err(Error::ChannelMismatch { expected: a.channels.len(), got: b.channels.len() });
    }
    Ok(a.channels.iter().zip(&b.channels).map(|(x, y)| kl_divergence(x, y)).sum())
}

/// Subset/equality judgement between two summarized datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PlausibleSubset,
    NotSubset,
    PlausiblyEqual,
    Distinct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetVerdict {
    pub verdict: Verdict,
    /// `D(A || B)`.
    #[serde(with = "crate::service::ext_f64")]
    pub forward: f64,
    /// `D(B || A)`.
    #[serde(with = "crate::service::ext_f64")]
    pub reverse: f64,
    pub threshold: f64,
    pub note: String,
}

/// Judge whether A plausibly is a subset of B (or equal to it) from the two
/// divergences. Equality is only ever corroborated: raw data would be needed
/// to confirm it.
pub fn verdict_from_divergences(forward: f64, reverse: f64, tau: f64) -> SubsetVerdict {
    let (verdict, note) = if forward <= tau && reverse <= tau {
        (Verdict::PlausiblyEqual, "corroborated, not confirmed")
    } else if forward == f64::INFINITY {
        (Verdict::NotSubset, "A has mass where B has none")
    } else if forward <= tau || reverse == f64::INFINITY {
        (Verdict::PlausibleSubset, "A fits within B; B does not fit within A")
    } else {
        (Verdict::Distinct, "neither divergence is small")
    };
    SubsetVerdict { verdict, forward, reverse, threshold: tau, note: note.to_string() }
}

pub fn subset_verdict(a: &SummarySample, b: &SummarySample, tau: f64) -> Result<SubsetVerdict> {
    let ma = model_from_sample(a, None)?;
    let mb = model_from_sample(b, None)?;
    Ok(verdict_from_divergences(kl_models(&ma, &mb)?, kl_models(&mb, &ma)?, tau))
}

/// `D(a || b) + D(b || a)` clamped to [`KL_CAP`]; zero iff the models agree.
pub fn symmetric_merge_score(a: &SummarySample, b: &SummarySample) -> Result<f64> {
    let ma = model_from_sample(a, None)?;
    let mb = model_from_sample(b, None)?;
    symmetric_models(&ma, &mb)
}

pub(crate) fn symmetric_models(a: &SampleModel, b: &SampleModel) -> Result<f64> {
    Ok((kl_models(a, b)? + kl_models(b, a)?).min(KL_CAP))
}

/// Divergence between uniform densities over convex polygons.
pub fn kl_hull(a: &[Point], b: &[Point]) -> f64 {
    if !hull::is_subset(a, b) {
        return f64::INFINITY;
    }
    let (aa, ab) = (hull::area(a), hull::area(b));
    if aa <= 0.0 {
        0.0
    } else {
        (ab / aa).ln().max(0.0)
    }
}

/// Divergence between two discrete distributions given as non-negative
/// weights; cells where `q` is empty get [`EMPIRICAL_FLOOR`].
pub fn kl_discrete(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if sp <= 0.0 && sq <= 0.0 {
        return 0.0;
    }
    if sp <= 0.0 || sq <= 0.0 {
        return f64::INFINITY;
    }
    let mut kl = 0.0;
    for i in 0..n {
        let pi = at(p, i) / sp;
        if pi <= 0.0 {
            continue;
        }
        let qi = (at(q, i) / sq).max(EMPIRICAL_FLOOR);
        kl += pi * (pi / qi).ln();
    }
    kl.max(0.0)
}

fn regularize(c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = c.nrows();
    let lambda = 1e-9 * c.trace() / d as f64;
    c + DMatrix::identity(d, d) * lambda
}

/// Divergence between multivariate Gaussians (covariances regularized as in
/// [`joint_diagonalize`]).
pub fn kl_gaussian_full(ma: &[f64], ca: &DMatrix<f64>, mb: &[f64], cb: &DMatrix<f64>) -> f64 {
    let d = ma.len();
    let (ta, tb) = (ca.trace(), cb.trace());
    if tb <= 0.0 {
        return if ta <= 0.0 && ma == mb { 0.0 } else { f64::INFINITY };
    }
    if ta <= 0.0 {
        return 0.0;
    }
    let (ra, rb) = (regularize(ca), regularize(cb));
    let (Some(la), Some(lb)) = (ra.clone().cholesky(), rb.clone().cholesky()) else {
        return f64::INFINITY;
    };
    let diff = DVector::from_iterator(d, mb.iter().zip(ma).map(|(b, a)| b - a));
    let inv_b = lb.inverse();
    let trace = (&inv_b * &ra).trace();
    let maha = (diff.transpose() * &inv_b * &diff)[(0, 0)];
    let ln_det =
        |l: &nalgebra::Cholesky<f64, nalgebra::Dyn>| 2.0 * l.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    (0.5 * (trace + maha - d as f64 + ln_det(&lb) - ln_det(&la))).max(0.0)
}

/// Result of jointly diagonalizing two covariance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDiagonalization {
    /// Columns are the new axes, leading column first.
    pub transform: DMatrix<f64>,
    /// Generalized eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Find `W` with `Wᵀ C1 W = I` and `Wᵀ C2 W = diag(λ)`, λ descending, so the
/// leading columns span the directions where C2 departs most from C1.
pub fn joint_diagonalize(c1: &DMatrix<f64>, c2: &DMatrix<f64>) -> Result<JointDiagonalization> {
    let d = c1.nrows();
    if c1.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c1.ncols() });
    }
    if c2.nrows() != d || c2.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c2.nrows() });
    }
    let chol = regularize(c1).cholesky().ok_or(Error::SingularMatrix)?;
    let l_inv = chol.l().try_inverse().ok_or(Error::SingularMatrix)?;
    let m = &l_inv * c2 * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let w_all = l_inv.transpose() * &eig.eigenvectors;
    let mut transform = DMatrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        let mut col = w_all.column(i).into_owned();
        let lead = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            col.neg_mut();
        }
        transform.set_column(k, &col);
    }
    Ok(JointDiagonalization { transform, eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect() })
}
