//! Discrete-time world: UAV on a circular orbit, one beacon/data/ack exchange
//! per frame, and Age-of-Information bookkeeping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{link_budget, ChannelParams};
use crate::config::{ConfigError, SuccessModel, WorldConfig};
use crate::policy::Policy;
use crate::rng::RngStream;
use crate::types::{
    clamp_velocity, mean, Action, Observation, SensorId, SensorRow, SensorState, StepRecord,
    UavState,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("episode horizon of {n_steps} steps exceeded")]
    HorizonExceeded { n_steps: usize },
    #[error("sensor {sensor} out of range 1..{n}")]
    InvalidSensor { sensor: SensorId, n: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone)]
pub struct World {
    cfg: WorldConfig,
    channel: ChannelParams<f64>,
    seed: u64,
    step_index: usize,
    t_s: f64,
    uav: UavState,
    sensors: Vec<SensorState>,
    rng: RngStream,
    log: Vec<StepRecord>,
}

impl World {
    /// Validates `cfg`, scatters the sensors uniformly over the area and
    /// parks the UAV at orbit angle zero.
    pub fn new(cfg: WorldConfig, seed: u64) -> Result<Self, EnvError> {
        let cfg = cfg.validate()?;
        let mut layout = RngStream::new(seed, "layout");
        let sensors = (1..=cfg.n_sensors)
            .map(|id| {
                let x = layout.uniform_in(0.0, cfg.area_size_m);
                let y = layout.uniform_in(0.0, cfg.area_size_m);
                SensorState {
                    id,
                    pos: [x, y],
                    aoi_s: 0.0,
                    last_gen_s: 0.0,
                    queue_len: 0,
                    battery_j: cfg.battery_j,
                }
            })
            .collect();
        let [cx, cy] = cfg.orbit_center();
        let uav = UavState {
            pos: [cx + cfg.orbit_radius_m, cy, cfg.altitude_m],
            arc_s: 0.0,
            velocity_mps: 0.0,
        };
        Ok(World {
            channel: cfg.channel(),
            cfg,
            seed,
            step_index: 0,
            t_s: 0.0,
            uav,
            sensors,
            rng: RngStream::new(seed, "channel"),
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time(&self) -> f64 {
        self.t_s
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_done(&self) -> bool {
        self.step_index >= self.cfg.n_steps
    }

    pub fn uav(&self) -> &UavState {
        &self.uav
    }

    pub fn sensors(&self) -> &[SensorState] {
        &self.sensors
    }

    /// Test hook: overwrite a sensor's state (position, AoI, battery...).
    pub fn sensor_mut(&mut self, id: SensorId) -> Option<&mut SensorState> {
        id.checked_sub(1).and_then(|i| self.sensors.get_mut(i))
    }

    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }

    pub fn avg_aoi(&self) -> f64 {
        mean(&self.aoi_vec())
    }

    fn aoi_vec(&self) -> Vec<f64> {
        self.sensors.iter().map(|s| s.aoi_s).collect()
    }

    fn check_sensor(&self, id: SensorId) -> Result<usize, EnvError> {
        if (1..=self.sensors.len()).contains(&id) {
            Ok(id - 1)
        } else {
            Err(EnvError::InvalidSensor {
                sensor: id,
                n: self.sensors.len(),
            })
        }
    }

    /// Moves the UAV along the orbit by `velocity * dt`. The caller clamps.
    pub fn advance_uav(&mut self, velocity_mps: f64) -> &UavState {
        let r = self.cfg.orbit_radius_m;
        let [cx, cy] = self.cfg.orbit_center();
        self.uav.velocity_mps = velocity_mps;
        if velocity_mps != 0.0 {
            self.uav.arc_s += velocity_mps * self.cfg.dt_s;
            let theta = self.uav.arc_s / r;
            self.uav.pos = [cx + r * theta.cos(), cy + r * theta.sin(), self.cfg.altitude_m];
        }
        &self.uav
    }

    /// One beacon/data/ack exchange with `sensor_id` from the current UAV
    /// position. Ineligible sensors (battery below one transmission) fail
    /// without spending energy or randomness.
    pub fn attempt_collection(&mut self, sensor_id: SensorId) -> Result<bool, EnvError> {
        let idx = self.check_sensor(sensor_id)?;
        let sensor = &mut self.sensors[idx];
        if sensor.battery_j < self.cfg.e_tx_j {
            return Ok(false);
        }
        let lb = link_budget(self.uav.pos, sensor.pos, &self.channel);
        let u = self.rng.uniform();
        sensor.battery_j = (sensor.battery_j - self.cfg.e_tx_j).max(0.0);
        let success = u < lb.success_p;
        if success {
            sensor.queue_len = 0;
        }
        Ok(success)
    }

    /// Generate-at-will AoI update for the frame starting at the current clock.
    pub fn update_aoi(&mut self, selected: SensorId, success: bool) -> Result<(), EnvError> {
        let idx = self.check_sensor(selected)?;
        let dt = self.cfg.dt_s;
        let frame_start = self.t_s;
        for (i, s) in self.sensors.iter_mut().enumerate() {
            s.queue_len = (s.queue_len + 1).min(self.cfg.queue_cap);
            if success && i == idx {
                s.queue_len = 0;
                s.last_gen_s = frame_start;
                s.aoi_s = dt;
            } else {
                s.aoi_s += dt;
            }
            if let Some(cap) = self.cfg.aoi_cap_s {
                s.aoi_s = s.aoi_s.min(cap);
            }
        }
        Ok(())
    }

    /// Executes one frame: clamp, move, transmit, update AoI, tick, log.
    pub fn step(&mut self, action: Action) -> Result<StepRecord, EnvError> {
        if self.is_done() {
            return Err(EnvError::HorizonExceeded {
                n_steps: self.cfg.n_steps,
            });
        }
        self.check_sensor(action.sensor)?;
        let v = clamp_velocity(action.velocity_mps, self.cfg.v_min_mps, self.cfg.v_max_mps);
        self.advance_uav(v);
        let success = self.attempt_collection(action.sensor)?;
        self.update_aoi(action.sensor, success)?;
        self.step_index += 1;
        self.t_s = self.step_index as f64 * self.cfg.dt_s;
        let per_sensor_aoi = self.aoi_vec();
        let record = StepRecord {
            step: self.step_index,
            action: Action::new(action.sensor, v),
            success,
            avg_aoi_s: mean(&per_sensor_aoi),
            per_sensor_aoi,
        };
        self.log.push(record.clone());
        Ok(record)
    }

    /// Frame-start snapshot with link budgets at the current UAV position.
    pub fn observe(&self) -> Observation {
        let rows = self
            .sensors
            .iter()
            .map(|s| {
                let lb = link_budget(self.uav.pos, s.pos, &self.channel);
                let link_ok = match self.cfg.success_model {
                    SuccessModel::Threshold => lb.snr_db >= self.cfg.snr_threshold_db,
                    SuccessModel::Logistic => true,
                };
                SensorRow {
                    id: s.id,
                    aoi_s: s.aoi_s,
                    distance_m: lb.distance_m,
                    path_loss_db: lb.path_loss_db,
                    snr_db: lb.snr_db,
                    queue_len: s.queue_len,
                    battery_j: s.battery_j,
                    eligible: s.battery_j >= self.cfg.e_tx_j && link_ok,
                }
            })
            .collect();
        Observation {
            t_s: self.t_s,
            step: self.step_index,
            steps_remaining: self.cfg.n_steps.saturating_sub(self.step_index),
            uav_pos: self.uav.pos,
            v_min_mps: self.cfg.v_min_mps,
            v_max_mps: self.cfg.v_max_mps,
            rows,
        }
    }
}

/// Episode statistics, all exact functions of the step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_steps: usize,
    /// Mean over steps of the per-step average AoI.
    pub time_avg_aoi_s: f64,
    pub per_sensor_mean_aoi: Vec<f64>,
    pub per_sensor_final_aoi: Vec<f64>,
    pub velocity_trace: Vec<f64>,
    pub success_count: usize,
}

impl RunSummary {
    pub fn from_log(log: &[StepRecord], n_sensors: usize) -> Self {
        let steps = log.len();
        let mut per_sensor_mean_aoi = vec![0.0; n_sensors];
        for rec in log {
            for (acc, a) in per_sensor_mean_aoi.iter_mut().zip(&rec.per_sensor_aoi) {
                *acc += a;
            }
        }
        if steps > 0 {
            per_sensor_mean_aoi.iter_mut().for_each(|m| *m /= steps as f64);
        }
        let per_sensor_final_aoi = log
            .last()
            .map(|r| r.per_sensor_aoi.clone())
            .unwrap_or_else(|| vec![0.0; n_sensors]);
        let per_step: Vec<f64> = log.iter().map(|r| r.avg_aoi_s).collect();
        RunSummary {
            n_steps: steps,
            time_avg_aoi_s: mean(&per_step),
            per_sensor_mean_aoi,
            per_sensor_final_aoi,
            velocity_trace: log.iter().map(|r| r.action.velocity_mps).collect(),
            success_count: log.iter().filter(|r| r.success).count(),
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            self.success_count as f64 / self.n_steps as f64
        }
    }
}

/// Runs `policy` from the world's current state to the horizon. The policy
/// draws from its own `"policy"` substream of the world seed.
pub fn run_episode<P: Policy + ?Sized>(
    world: &mut World,
    policy: &mut P,
) -> Result<RunSummary, EnvError> {
    let mut rng = RngStream::new(world.seed(), "policy");
    policy.reset();
    while !world.is_done() {
        let obs = world.observe();
        let action = policy.decide(&obs, &mut rng);
        let record = world.step(action)?;
        policy.after_step(&obs, &record);
    }
    let summary = RunSummary::from_log(world.log(), world.sensors().len());
    policy.notify(&summary);
    Ok(summary)
}

/// Replays a fixed action sequence and returns the time-averaged AoI over the
/// executed steps.
pub fn evaluate_sequence(world: &World, actions: &[Action]) -> Result<f64, EnvError> {
    let mut w = world.clone();
    let start = w.log.len();
    for &a in actions {
        w.step(a)?;
    }
    let avgs: Vec<f64> = w.log[start..].iter().map(|r| r.avg_aoi_s).collect();
    Ok(mean(&avgs))
}

/// Exhaustive search over every `(sensor, velocity)` sequence to the horizon.
/// Returns the first optimal sequence in lexicographic (sensor, velocity
/// index) order and its time-averaged AoI. Exponential; tiny worlds only.
pub fn exhaustive_optimum(world: &World, velocities: &[f64]) -> Result<(Vec<Action>, f64), EnvError> {
    fn dfs(
        w: &World,
        velocities: &[f64],
        path: &mut Vec<Action>,
        acc: f64,
        best: &mut Option<(Vec<Action>, f64)>,
    ) -> Result<(), EnvError> {
        if w.is_done() {
            if best.as_ref().is_none_or(|(_, b)| acc < *b) {
                *best = Some((path.clone(), acc));
            }
            return Ok(());
        }
        for sensor in 1..=w.sensors.len() {
            for &v in velocities {
                let mut next = w.clone();
                let rec = next.step(Action::new(sensor, v))?;
                path.push(rec.action);
                dfs(&next, velocities, path, acc + rec.avg_aoi_s, best)?;
                path.pop();
            }
        }
        Ok(())
    }

    let remaining = world.cfg.n_steps - world.step_index.min(world.cfg.n_steps);
    if remaining == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut best = None;
    dfs(world, velocities, &mut Vec::new(), 0.0, &mut best)?;
    let (path, total) = best.expect("at least one sequence when steps remain");
    Ok((path, total / remaining as f64))
}
