//! Experience pool and similarity retrieval.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, LengthMismatch};
use crate::types::Action;

pub const DEFAULT_POOL_CAPACITY: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceRecord {
    pub features: FeatureVector,
    pub action: Action,
    /// Average AoI after the frame's update, seconds.
    pub outcome_avg_aoi_s: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("pool holds {len} records but capacity is {capacity}")]
pub struct PoolOverflow {
    pub len: usize,
    pub capacity: usize,
}

#[derive(Serialize, Deserialize)]
struct PoolRepr {
    capacity: usize,
    records: VecDeque<ExperienceRecord>,
}

/// Ring buffer in insertion order; the oldest record is evicted first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoolRepr", into = "PoolRepr")]
pub struct ExperiencePool {
    capacity: usize,
    records: VecDeque<ExperienceRecord>,
}

impl TryFrom<PoolRepr> for ExperiencePool {
    type Error = PoolOverflow;

    fn try_from(r: PoolRepr) -> Result<Self, PoolOverflow> {
        if r.records.len() > r.capacity {
            return Err(PoolOverflow {
                len: r.records.len(),
                capacity: r.capacity,
            });
        }
        Ok(ExperiencePool {
            capacity: r.capacity,
            records: r.records,
        })
    }
}

impl From<ExperiencePool> for PoolRepr {
    fn from(p: ExperiencePool) -> Self {
        PoolRepr {
            capacity: p.capacity,
            records: p.records,
        }
    }
}

impl Default for ExperiencePool {
    fn default() -> Self {
        Self::new(DEFAULT_POOL_CAPACITY)
    }
}

impl ExperiencePool {
    pub fn new(capacity: usize) -> Self {
        ExperiencePool {
            capacity,
            records: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &ExperienceRecord> {
        self.records.iter()
    }

    pub fn push(&mut self, rec: ExperienceRecord) {
        if self.capacity == 0 {
            return;
        }
        while self.records.len() >= self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(rec);
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }
}

/// Negative Euclidean distance; higher is more similar.
pub fn similarity(a: &FeatureVector, b: &FeatureVector) -> Result<f64, LengthMismatch> {
    a.distance(b).map(|d| -d)
}

/// Stores the outcome of one frame. Non-finite or negative outcomes are not
/// valid records and are dropped.
pub fn record_feedback(pool: &mut ExperiencePool, features: FeatureVector, action: Action, outcome_avg_aoi_s: f64, step: usize) {
    if !(outcome_avg_aoi_s.is_finite() && outcome_avg_aoi_s >= 0.0) {
        return;
    }
    pool.push(ExperienceRecord {
        features,
        action,
        outcome_avg_aoi_s,
        step,
    });
}

/// The `k` most similar records, ties going to the newer one, returned in
/// chronological order. Records whose feature length differs from
/// `current` are skipped.
pub fn retrieve_examples(pool: &ExperiencePool, current: &FeatureVector, k: usize) -> Vec<ExperienceRecord> {
    let mut scored: Vec<(usize, f64)> = pool
        .iter()
        .enumerate()
        .filter_map(|(i, r)| similarity(&r.features, current).ok().map(|s| (i, s)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.0.cmp(&a.0)));
    scored.truncate(k);
    scored.sort_by_key(|&(i, _)| i);
    scored.into_iter().map(|(i, _)| pool.records[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(f: Vec<f64>, step: usize) -> ExperienceRecord {
        ExperienceRecord {
            features: FeatureVector(f),
            action: Action::new(1, 0.0),
            outcome_avg_aoi_s: step as f64,
            step,
        }
    }

    #[test]
    fn similarity_examples() {
        let a = FeatureVector(vec![0.0, 0.0]);
        let b = FeatureVector(vec![3.0, 4.0]);
        assert_eq!(similarity(&a, &a).unwrap(), 0.0);
        assert_eq!(similarity(&a, &b).unwrap(), -5.0);
        assert_eq!(similarity(&b, &a).unwrap(), similarity(&a, &b).unwrap());
        assert!(similarity(&a, &FeatureVector(vec![1.0])).is_err());
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut p = ExperiencePool::new(512);
        for s in 0..513 {
            p.push(rec(vec![s as f64], s));
        }
        assert_eq!(p.len(), 512);
        assert_eq!(p.iter().next().unwrap().step, 1);
        assert_eq!(p.iter().last().unwrap().step, 512);
    }

    #[test]
    fn retrieval_edges() {
        let mut p = ExperiencePool::new(8);
        let cur = FeatureVector(vec![0.0, 0.0]);
        assert!(retrieve_examples(&p, &cur, 3).is_empty());
        p.push(rec(vec![1.0, 0.0], 0));
        p.push(rec(vec![2.0, 0.0], 1));
        assert_eq!(retrieve_examples(&p, &cur, 5).len(), 2);
        p.push(rec(vec![0.0, 0.0], 2));
        p.push(rec(vec![5.0, 0.0], 3));
        let got = retrieve_examples(&p, &cur, 1);
        assert_eq!(got[0].step, 2);
        // chronological output
        let got: Vec<_> = retrieve_examples(&p, &cur, 3).iter().map(|r| r.step).collect();
        assert_eq!(got, vec![0, 1, 2]);
    }

    #[test]
    fn ties_prefer_newer() {
        let mut p = ExperiencePool::new(8);
        for s in 0..4 {
            p.push(rec(vec![1.0], s));
        }
        let got: Vec<_> = retrieve_examples(&p, &FeatureVector(vec![0.0]), 2).iter().map(|r| r.step).collect();
        assert_eq!(got, vec![2, 3]);
    }

    #[test]
    fn feedback_stores_outcome_and_drops_invalid() {
        let mut p = ExperiencePool::new(4);
        record_feedback(&mut p, FeatureVector(vec![0.1]), Action::new(2, 3.0), 2.5, 7);
        record_feedback(&mut p, FeatureVector(vec![0.1]), Action::new(2, 3.0), f64::NAN, 8);
        record_feedback(&mut p, FeatureVector(vec![0.1]), Action::new(2, 3.0), -1.0, 9);
        assert_eq!(p.len(), 1);
        assert_eq!(p.iter().next().unwrap().outcome_avg_aoi_s, 2.5);
    }

    #[test]
    fn serde_round_trip_and_overflow_rejected() {
        let mut p = ExperiencePool::new(3);
        for s in 0..5 {
            p.push(rec(vec![0.1 * s as f64, 1.0 / 3.0], s));
        }
        let text = serde_json::to_string(&p).unwrap();
        let back: ExperiencePool = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"capacity":1,"records":[
            {"features":[0.0],"action":{"sensor":1,"velocity_mps":0.0},"outcome_avg_aoi_s":1.0,"step":0},
            {"features":[0.0],"action":{"sensor":1,"velocity_mps":0.0},"outcome_avg_aoi_s":1.0,"step":1}]}"#;
        assert!(serde_json::from_str::<ExperiencePool>(bad).is_err());
    }
}
