//! Policy interface and the non-learning baselines.
//!
//! All selection rules break ties towards the lowest sensor id.

use crate::rng::RngStream;
use crate::types::{Action, Observation, SensorRow, StepRecord};
use crate::world::RunSummary;

/// Anything that can pick `(sensor, velocity)` for a frame.
///
/// `decide` must be total: it returns an in-range action for every
/// observation.
pub trait Policy {
    fn name(&self) -> &str;

    fn decide(&mut self, obs: &Observation, rng: &mut RngStream) -> Action;

    /// Called with the frame-start observation and the executed frame.
    fn after_step(&mut self, _obs: &Observation, _record: &StepRecord) {}

    /// Episode-end hook.
    fn notify(&mut self, _summary: &RunSummary) {}

    /// Clears per-episode state.
    fn reset(&mut self) {}
}

/// Rows to choose from: the eligible ones when any exist, all otherwise.
fn candidates(obs: &Observation) -> impl Iterator<Item = &SensorRow> {
    let any = obs.any_eligible();
    obs.rows.iter().filter(move |r| !any || r.eligible)
}

/// First row minimising `key` (strict comparison keeps the lowest id on ties).
fn argmin_by<'a>(rows: impl Iterator<Item = &'a SensorRow>, key: impl Fn(&SensorRow) -> f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for r in rows {
        let k = key(r);
        if best.is_none_or(|(_, b)| k < b) {
            best = Some((r.id, k));
        }
    }
    best.map(|(id, _)| id).unwrap_or(1)
}

/// Nearest sensor by horizontal distance, flying at `v_max`.
pub fn nearest_neighbor_decide(obs: &Observation) -> Action {
    Action::new(argmin_by(candidates(obs), |r| r.distance_m), obs.v_max_mps)
}

/// Stalest sensor, flying at `v_max`.
pub fn max_aoi_decide(obs: &Observation) -> Action {
    Action::new(argmin_by(candidates(obs), |r| -r.aoi_s), obs.v_max_mps)
}

#[derive(Debug, Clone, Default)]
pub struct NearestNeighbor;

impl Policy for NearestNeighbor {
    fn name(&self) -> &str {
        "nearest"
    }

    fn decide(&mut self, obs: &Observation, _rng: &mut RngStream) -> Action {
        nearest_neighbor_decide(obs)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MaxAoi;

impl Policy for MaxAoi {
    fn name(&self) -> &str {
        "maxaoi"
    }

    fn decide(&mut self, obs: &Observation, _rng: &mut RngStream) -> Action {
        max_aoi_decide(obs)
    }
}

/// Cycles 1, 2, ..., N at half the maximum speed.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    counter: usize,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for RoundRobin {
    fn name(&self) -> &str {
        "roundrobin"
    }

    fn decide(&mut self, obs: &Observation, _rng: &mut RngStream) -> Action {
        let sensor = self.counter % obs.n_sensors().max(1) + 1;
        self.counter += 1;
        Action::new(sensor, obs.v_max_mps / 2.0)
    }

    fn reset(&mut self) {
        self.counter = 0;
    }
}

/// Always the same action; useful in tests.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    action: Action,
}

impl ConstantPolicy {
    pub fn new(action: Action) -> Self {
        ConstantPolicy { action }
    }
}

impl Policy for ConstantPolicy {
    fn name(&self) -> &str {
        "constant"
    }

    fn decide(&mut self, _obs: &Observation, _rng: &mut RngStream) -> Action {
        self.action
    }
}

/// Plays back a fixed action list, then repeats the last action.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    actions: Vec<Action>,
    next: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<Action>) -> Self {
        ScriptedPolicy { actions, next: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> &str {
        "scripted"
    }

    fn decide(&mut self, obs: &Observation, _rng: &mut RngStream) -> Action {
        let a = self
            .actions
            .get(self.next)
            .or(self.actions.last())
            .copied()
            .unwrap_or(Action::new(1, obs.v_min_mps));
        self.next += 1;
        a
    }

    fn reset(&mut self) {
        self.next = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(dist: &[f64], aoi: &[f64], eligible: &[bool]) -> Observation {
        let rows = dist
            .iter()
            .zip(aoi)
            .zip(eligible)
            .enumerate()
            .map(|(i, ((d, a), e))| SensorRow {
                id: i + 1,
                aoi_s: *a,
                distance_m: *d,
                path_loss_db: 60.0 + d,
                snr_db: 50.0 - d,
                queue_len: 0,
                battery_j: 50.0,
                eligible: *e,
            })
            .collect();
        Observation {
            t_s: 0.0,
            step: 0,
            steps_remaining: 30,
            uav_pos: [0.0, 0.0, 10.0],
            v_min_mps: 0.0,
            v_max_mps: 15.0,
            rows,
        }
    }

    #[test]
    fn nearest_examples() {
        let all = [true; 3];
        assert_eq!(nearest_neighbor_decide(&obs(&[5.0, 3.0, 9.0], &[0.0; 3], &all)).sensor, 2);
        assert_eq!(nearest_neighbor_decide(&obs(&[4.0, 4.0, 9.0], &[0.0; 3], &all)).sensor, 1);
        let o = obs(&[1.0, 2.0, 9.0], &[0.0; 3], &[false, false, true]);
        assert_eq!(nearest_neighbor_decide(&o), Action::new(3, 15.0));
        // nobody eligible: fall back to all rows
        let o = obs(&[7.0, 2.0, 9.0], &[0.0; 3], &[false; 3]);
        assert_eq!(nearest_neighbor_decide(&o).sensor, 2);
    }

    #[test]
    fn max_aoi_examples() {
        let all = [true; 3];
        assert_eq!(max_aoi_decide(&obs(&[0.0; 3], &[3.0, 7.0, 7.0], &all)).sensor, 2);
        assert_eq!(max_aoi_decide(&obs(&[0.0; 3], &[0.0; 3], &all)).sensor, 1);
        let o = obs(&[0.0; 2], &[40.0, 1.0], &[false, true]);
        assert_eq!(max_aoi_decide(&o), Action::new(2, 15.0));
    }

    #[test]
    fn round_robin_cycles_and_resets() {
        let o = obs(&[0.0; 3], &[0.0; 3], &[true; 3]);
        let mut rr = RoundRobin::new();
        let mut rng = RngStream::new(0, "t");
        let picks: Vec<_> = (0..4).map(|_| rr.decide(&o, &mut rng)).collect();
        assert_eq!(picks.iter().map(|a| a.sensor).collect::<Vec<_>>(), vec![1, 2, 3, 1]);
        assert!(picks.iter().all(|a| a.velocity_mps == 7.5));
        rr.reset();
        assert_eq!(rr.decide(&o, &mut rng).sensor, 1);
    }

    proptest! {
        #[test]
        fn selections_scale_invariant(
            dist in proptest::collection::vec(0.0f64..150.0, 1..12),
            scale in 0.01f64..100.0,
        ) {
            let n = dist.len();
            let aoi = dist.clone();
            let e = vec![true; n];
            let base = obs(&dist, &aoi, &e);
            let scaled: Vec<f64> = dist.iter().map(|d| d * scale).collect();
            let o2 = obs(&scaled, &scaled, &e);
            prop_assert_eq!(nearest_neighbor_decide(&base).sensor, nearest_neighbor_decide(&o2).sensor);
            prop_assert_eq!(max_aoi_decide(&base).sensor, max_aoi_decide(&o2).sensor);
        }

        #[test]
        fn baselines_stay_in_bounds(
            dist in proptest::collection::vec(0.0f64..150.0, 1..12),
            elig in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let n = dist.len();
            let o = obs(&dist, &dist, &elig[..n]);
            let mut rng = RngStream::new(1, "t");
            let mut rr = RoundRobin::new();
            for a in [nearest_neighbor_decide(&o), max_aoi_decide(&o), rr.decide(&o, &mut rng)] {
                prop_assert!((1..=n).contains(&a.sensor));
                prop_assert!((0.0..=15.0).contains(&a.velocity_mps));
            }
        }
    }
}
