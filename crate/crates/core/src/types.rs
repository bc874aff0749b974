//! Records shared between the world, the policies and the harness.

use serde::{Deserialize, Serialize};

/// Sensor ids are 1-based, matching the logs and the prompts.
pub type SensorId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorState {
    pub id: SensorId,
    pub pos: [f64; 2],
    pub aoi_s: f64,
    /// Generation time of the freshest delivered sample.
    pub last_gen_s: f64,
    pub queue_len: usize,
    pub battery_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub pos: [f64; 3],
    /// Distance flown along the orbit; the orbit angle is `arc_s / radius`.
    pub arc_s: f64,
    pub velocity_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub sensor: SensorId,
    pub velocity_mps: f64,
}

impl Action {
    pub fn new(sensor: SensorId, velocity_mps: f64) -> Self {
        Action {
            sensor,
            velocity_mps,
        }
    }
}

/// Clamps into `[lo, hi]`; NaN maps to `lo`.
pub fn clamp_velocity(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        lo
    } else {
        v.clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRow {
    pub id: SensorId,
    pub aoi_s: f64,
    /// Horizontal UAV-to-sensor distance.
    pub distance_m: f64,
    pub path_loss_db: f64,
    pub snr_db: f64,
    pub queue_len: usize,
    pub battery_j: f64,
    pub eligible: bool,
}

/// Frame-start snapshot handed to policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t_s: f64,
    pub step: usize,
    pub steps_remaining: usize,
    pub uav_pos: [f64; 3],
    pub v_min_mps: f64,
    pub v_max_mps: f64,
    pub rows: Vec<SensorRow>,
}

impl Observation {
    pub fn n_sensors(&self) -> usize {
        self.rows.len()
    }

    pub fn any_eligible(&self) -> bool {
        self.rows.iter().any(|r| r.eligible)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Action as executed, velocity already clamped.
    pub action: Action,
    pub success: bool,
    pub avg_aoi_s: f64,
    pub per_sensor_aoi: Vec<f64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
