//! Bounded-memory summary store for unbounded numeric streams.
//!
//! Raw samples are folded into mergeable statistics ([`SummarySample`]) and
//! kept in a binary multi-scale record ([`SummaryRecord`]) whose size never
//! exceeds a fixed slot budget. Older data are held at coarser scales. The
//! record carries its own derivation log and curation rules, and serializes to
//! a self-describing container.
//!
//! Module map:
//!
//! * [`stats`]: statistic bundles and their merge laws.
//! * [`spectrum`]: scale-wise variance and its higher-order summaries.
//! * [`record`]: the budgeted multi-scale record.
//! * [`compare`]: distribution models, KL divergence, joint diagonalization.
//! * [`search`]: statistic-labelled index with pruned membership queries.
//! * [`dictionary`]: dictionary-backed histograms and episodic patterns.
//! * [`curation`]: heuristic merge scoring, statistic drops, access log.
//! * [`container`]: the on-disk format.
//! * [`service`]: line-oriented JSON query handling shared by CLI and server.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod container;
pub mod curation;
pub mod dictionary;
mod error;
pub mod hull;
pub mod record;
pub mod search;
pub mod service;
pub mod spectrum;
pub mod stats;

pub use compare::{DistributionModel, SampleModel, SubsetVerdict, Verdict};
pub use curation::{AccessLog, CurationRules, HeuristicWeights};
pub use dictionary::{Dictionary, DictionaryConfig, Item};
pub use error::{Error, Result};
pub use record::{SpanRow, SummaryRecord};
pub use search::{IndexNode, SearchIndex};
pub use stats::{BinRule, BinSource, Family, Histogram, StatId, StatSet, StatisticSet, SummarySample};
