//! Browser demo: summarize a synthetic stream under a slot budget, then ask
//! the summary membership and comparison questions.
//!
//! Every method returns a JSON string; queries go through the same
//! line-protocol handler the command-line server uses.

use gfs_core::service::{self, num};
use gfs_core::{CurationRules, StatisticSet, SummaryRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Piecewise-stationary series: a slow sine, level shifts every few hundred
/// steps, and Gaussian noise whose scale changes with each regime.
pub fn synthetic_series(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut level, mut sigma) = (0.0, 1.0);
    (0..len)
        .map(|t| {
            if t % 300 == 0 {
                level = rng.random_range(-5.0..5.0);
                sigma = rng.random_range(0.2..2.0);
            }
            level + 3.0 * (t as f64 / 150.0).sin() + sigma * unit.sample(&mut rng)
        })
        .collect()
}

#[wasm_bindgen]
pub struct Demo {
    record: SummaryRecord,
}

#[wasm_bindgen]
impl Demo {
    /// Ingest `len` synthetic values into a record with `budget` slots.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, len: usize, budget: usize) -> Result<Demo, JsError> {
        let stats = StatisticSet { swv: true, ..Default::default() };
        let mut record = SummaryRecord::new(1, stats, CurationRules::with_budget(budget.max(1)))?;
        for x in synthetic_series(seed, len) {
            record.ingest(&[x])?;
        }
        Ok(Demo { record })
    }

    /// Stored samples oldest first, for drawing.
    pub fn layout(&self) -> String {
        let samples: Vec<Value> = self
            .record
            .iter_time_order()
            .map(|(level, s)| {
                json!({
                    "level": level,
                    "t_start": s.t_start,
                    "t_end": s.t_end,
                    "mean": num(s.mean[0]),
                    "std": num(s.variance[0].sqrt()),
                    "min": num(s.min[0]),
                    "max": num(s.max[0]),
                })
            })
            .collect();
        json!({
            "ingested": self.record.ingested(),
            "slots": self.record.slots(),
            "budget": self.record.budget(),
            "samples": samples,
        })
        .to_string()
    }

    /// Could `x` have occurred in the stream?
    pub fn member(&mut self, x: f64) -> String {
        self.ask(&json!({ "op": "member", "value": [x] }))
    }

    /// KL divergences between the summaries of two sample ranges.
    pub fn compare(&mut self, a0: u64, a1: u64, b0: u64, b1: u64) -> String {
        self.ask(&json!({ "op": "compare", "a": [a0, a1], "b": [b0, b1] }))
    }
}

impl Demo {
    fn ask(&mut self, req: &Value) -> String {
        service::handle_line(&mut self.record, &req.to_string())
    }
}
