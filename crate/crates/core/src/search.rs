//! A tree of merged summaries for pruned search.
//!
//! Leaves are stored samples; each internal node carries the merge of its
//! children, so its extrema (and hull, for two channels) bound everything
//! below it. A query value outside a node's bounds cannot occur anywhere in
//! that subtree, which lets membership queries rule out data quickly without
//! ever reporting a false negative. Inside the bounds, nothing is certain:
//! candidates are only ranked by likelihood under their distribution models.

use serde::{Deserialize, Serialize};

use crate::compare::model_from_sample;
use crate::hull;
use crate::record::SummaryRecord;
use crate::stats::{self, StatId, SummarySample};
use crate::{Error, Result};

pub const DEFAULT_FANOUT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexNode {
    /// Merge of every leaf below this node.
    pub aggregate: SummarySample,
    pub children: Vec<IndexNode>,
    /// Position of the leaf in the input order, for leaf nodes.
    pub leaf: Option<usize>,
}

impl IndexNode {
    fn leaf(i: usize, s: &SummarySample) -> IndexNode {
        IndexNode { aggregate: s.clone(), children: Vec::new(), leaf: Some(i) }
    }

    pub fn is_leaf(&self) -> bool {
        self.leaf.is_some()
    }

    /// Whether `q` is inside this node's bounds: the hull when one is
    /// carried for two channels, else the extrema box.
    pub fn admits(&self, q: &[f64]) -> bool {
        let s = &self.aggregate;
        if s.has(StatId::Extrema) {
            let inside = q.iter().enumerate().all(|(c, x)| *x >= s.min[c] && *x <= s.max[c]);
            if !inside {
                return false;
            }
        }
        match &s.hull {
            Some(h) if q.len() == 2 => hull::contains(h, [q[0], q[1]]),
            _ => true,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(IndexNode::node_count).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        self.children.iter().map(|c| c.height() + 1).max().unwrap_or(0)
    }
}

/// A plausible leaf for a membership query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub leaf: usize,
    pub t_start: u64,
    pub t_end: u64,
    /// Density of the query under the leaf's distribution model.
    #[serde(with = "crate::service::ext_f64")]
    pub likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    /// True only when every subtree was excluded by its bounds.
    pub absent_certain: bool,
    /// Ranked by likelihood, highest first; ranking is a plausibility
    /// heuristic, not evidence of presence.
    pub candidates: Vec<Candidate>,
    /// Bounds tests performed.
    pub nodes_visited: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    pub root: IndexNode,
    pub fanout: usize,
    leaves: Vec<SummarySample>,
}

impl SearchIndex {
    /// Build bottom-up by merging consecutive runs of `fanout` nodes. A run
    /// of one node is passed up unchanged.
    pub fn build(leaves: &[SummarySample], fanout: usize) -> Result<SearchIndex> {
        if fanout < 2 {
            return Err(Error::InvalidFanout(fanout));
        }
        if leaves.is_empty() {
            return Err(Error::EmptyLeaves);
        }
        let d = leaves[0].channels();
        if let Some(bad) = leaves.iter().find(|s| s.channels() != d) {
            return Err(Error::ChannelMismatch { expected: d, got: bad.channels() });
        }
        let mut layer: Vec<IndexNode> = leaves.iter().enumerate().map(|(i, s)| IndexNode::leaf(i, s)).collect();
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(fanout));
            let mut it = layer.into_iter().peekable();
            while it.peek().is_some() {
                let group: Vec<IndexNode> = it.by_ref().take(fanout).collect();
                if group.len() == 1 {
                    next.extend(group);
                    continue;
                }
                let mut agg = group[0].aggregate.clone();
                for c in &group[1..] {
                    agg = stats::merge(&agg, &c.aggregate)?;
                }
                next.push(IndexNode { aggregate: agg, children: group, leaf: None });
            }
            layer = next;
        }
        Ok(SearchIndex { root: layer.pop().expect("non-empty"), fanout, leaves: leaves.to_vec() })
    }

    /// Index over a record's stored samples, oldest first.
    pub fn from_record(rec: &SummaryRecord, fanout: usize) -> Result<SearchIndex> {
        SearchIndex::build(&rec.samples_in_time_order(), fanout)
    }

    pub fn leaves(&self) -> &[SummarySample] {
        &self.leaves
    }

    pub fn channels(&self) -> usize {
        self.root.aggregate.channels()
    }

    /// Swap one leaf and rebuild.
    pub fn replace_leaf(&mut self, i: usize, s: SummarySample) -> Result<()> {
        if i >= self.leaves.len() {
            return Err(Error::UnknownId(i as u64));
        }
        let mut leaves = std::mem::take(&mut self.leaves);
        leaves[i] = s;
        *self = SearchIndex::build(&leaves, self.fanout)?;
        Ok(())
    }

    pub fn membership(&self, q: &[f64]) -> Result<Membership> {
        let d = self.channels();
        if q.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: q.len() });
        }
        let mut visited = 0;
        let mut found = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            visited += 1;
            if !node.admits(q) {
                continue;
            }
            match node.leaf {
                Some(i) => found.push(i),
                None => stack.extend(node.children.iter().rev()),
            }
        }
        let mut candidates: Vec<Candidate> = found
            .into_iter()
            .map(|i| {
                let s = &self.leaves[i];
                let likelihood = model_from_sample(s, None).map_or(0.0, |m| m.likelihood(q));
                Candidate { leaf: i, t_start: s.t_start, t_end: s.t_end, likelihood }
            })
            .collect();
        candidates.sort_by(|a, b| b.likelihood.total_cmp(&a.likelihood).then(a.leaf.cmp(&b.leaf)));
        Ok(Membership { absent_certain: candidates.is_empty(), candidates, nodes_visited: visited })
    }

    /// Bounds on how many raw samples fall in the box `[lo, hi]`: leaves
    /// wholly inside count toward both, leaves that only intersect it count
    /// toward the upper bound.
    pub fn range_count_bounds(&self, lo: &[f64], hi: &[f64]) -> Result<(u64, u64)> {
        let d = self.channels();
        for v in [lo, hi] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        let (mut lower, mut upper) = (0u64, 0u64);
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            let s = &node.aggregate;
            let (nlo, nhi) = if s.has(StatId::Extrema) {
                (s.min.clone(), s.max.clone())
            } else {
                (vec![f64::NEG_INFINITY; d], vec![f64::INFINITY; d])
            };
            let disjoint = (0..d).any(|c| nhi[c] < lo[c] || nlo[c] > hi[c]);
            if disjoint {
                continue;
            }
            let inside = (0..d).all(|c| nlo[c] >= lo[c] && nhi[c] <= hi[c]);
            if inside {
                lower += s.n;
                upper += s.n;
            } else if node.is_leaf() {
                upper += s.n;
            } else {
                stack.extend(node.children.iter());
            }
        }
        Ok((lower, upper))
    }
}
