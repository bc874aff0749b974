//! Episode collection, PPO updates and frozen-policy evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::Adam;
use super::dist::{argmax, joint_log_prob, sample_action};
use super::gae::{gae_advantages_bootstrapped, normalize};
use super::loss::{loss_and_grad, LossCoefficients, LossError, Minibatch};
use super::net::{MlpParams, MlpShape, ShapeError};
use crate::config::WorldConfig;
use crate::features::{FeatureVector, DEFAULT_AOI_SCALE_S};
use crate::policy::Policy;
use crate::rng::{derive_seed, RngStream};
use crate::types::{mean, Action, Observation};
use crate::world::{run_episode, EnvError, RunSummary, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatch: 64,
            learning_rate: 3e-4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            episodes: 2000,
            steps_per_episode: 30,
            hidden: 64,
        }
    }
}

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("invalid ppo config: {0}")]
    Config(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("training diverged at episode {episode}: {source}")]
    Diverged { episode: usize, source: LossError },
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.to_string()));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda must lie in (0, 1]");
        }
        if self.epochs == 0 || self.minibatch == 0 || self.steps_per_episode == 0 || self.hidden == 0 {
            return bad("epochs, minibatch, steps_per_episode and hidden must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }

    fn coefficients(&self) -> LossCoefficients<f64> {
        LossCoefficients {
            clip_eps: self.clip_eps,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// `k / (bins - 1)` of the way from `v_min` to `v_max`.
pub fn velocity_for_bin(bin: usize, n_bins: usize, v_min: f64, v_max: f64) -> f64 {
    v_min + (v_max - v_min) * bin as f64 / (n_bins - 1) as f64
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryBuffer {
    pub features: Vec<Vec<f64>>,
    pub sensor_actions: Vec<usize>,
    pub velocity_actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl TrajectoryBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        features: Vec<f64>,
        sensor: usize,
        velocity: usize,
        log_prob: f64,
        value: f64,
        reward: f64,
        done: bool,
    ) {
        self.features.push(features);
        self.sensor_actions.push(sensor);
        self.velocity_actions.push(velocity);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.dones.push(done);
    }
}

/// One learning-curve row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_aoi: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams<f64>,
    pub curve: Vec<CurveRow>,
}

/// World seed used for training episode `episode` of a run seeded with `seed`.
pub fn episode_world_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, episode as u64)
}

/// Frozen network acting in a world.
#[derive(Debug, Clone)]
pub struct PpoPolicy {
    params: MlpParams<f64>,
    world: WorldConfig,
    greedy: bool,
}

impl PpoPolicy {
    pub fn new(params: MlpParams<f64>, world: WorldConfig, greedy: bool) -> Result<Self, ShapeError> {
        let want = MlpShape::for_sensors(world.n_sensors, params.shape.hidden1);
        if params.shape.input != want.input || params.shape.n_sensors != world.n_sensors {
            return Err(ShapeError::Features {
                expected: params.shape.input,
                got: want.input,
            });
        }
        Ok(PpoPolicy {
            params,
            world,
            greedy,
        })
    }

    fn act(&self, obs: &Observation, rng: &mut RngStream) -> (Action, usize, usize, f64, f64, Vec<f64>) {
        let x = FeatureVector::from_observation(obs, &self.world).0;
        let fwd = self
            .params
            .forward(&x)
            .expect("feature length checked at construction");
        let (s, v, lp) = if self.greedy {
            let s = argmax(&fwd.sensor_logits);
            let v = argmax(&fwd.velocity_logits);
            (s, v, joint_log_prob(&fwd.sensor_logits, &fwd.velocity_logits, s, v))
        } else {
            sample_action(&fwd.sensor_logits, &fwd.velocity_logits, rng)
        };
        let vel = velocity_for_bin(v, self.params.shape.n_velocity, obs.v_min_mps, obs.v_max_mps);
        (Action::new(s + 1, vel), s, v, lp, fwd.value, x)
    }
}

impl PpoPolicy {
    fn value(&self, obs: &Observation) -> f64 {
        let x = FeatureVector::from_observation(obs, &self.world).0;
        self.params.forward(&x).expect("feature length checked at construction").value
    }
}

impl Policy for PpoPolicy {
    fn name(&self) -> &str {
        "ppo"
    }

    fn decide(&mut self, obs: &Observation, rng: &mut RngStream) -> Action {
        self.act(obs, rng).0
    }
}

/// Trains from scratch. Each episode runs in a fresh world built by
/// `world_factory(episode)`; one PPO update (several epochs of shuffled
/// minibatches) follows every episode.
pub fn train<F>(
    world_cfg: &WorldConfig,
    mut world_factory: F,
    cfg: &PpoConfig,
    seed: u64,
) -> Result<TrainOutcome, PpoError>
where
    F: FnMut(usize) -> Result<World, EnvError>,
{
    cfg.validate()?;
    let world_cfg = world_cfg.clone().validate().map_err(EnvError::from)?;
    let shape = MlpShape::for_sensors(world_cfg.n_sensors, cfg.hidden);
    let reward_scale = world_cfg.aoi_cap_s.unwrap_or(DEFAULT_AOI_SCALE_S);
    let mut init_rng = RngStream::new(seed, "ppo-init");
    let mut sample_rng = RngStream::new(seed, "ppo-sample");
    let mut shuffle_rng = RngStream::new(seed, "ppo-shuffle");
    let mut policy = PpoPolicy::new(MlpParams::init(shape, &mut init_rng), world_cfg, false)?;
    let mut adam = Adam::new(shape.param_count());
    let coef = cfg.coefficients();
    let mut curve = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let mut world = world_factory(episode)?;
        let mut buf = TrajectoryBuffer::default();
        let mut aois = Vec::new();
        while !world.is_done() && buf.len() < cfg.steps_per_episode {
            let obs = world.observe();
            let (action, s, v, lp, value, x) = policy.act(&obs, &mut sample_rng);
            let rec = world.step(action)?;
            aois.push(rec.avg_aoi_s);
            buf.push(x, s, v, lp, value, -rec.avg_aoi_s, false);
        }
        // The horizon is a time limit rather than a terminal state: the
        // features carry no clock, so the critic bootstraps past the cut.
        let last_value = policy.value(&world.observe());

        // the critic works in units of the AoI normaliser so its loss stays
        // comparable to the surrogate term on the shared trunk
        let scaled: Vec<f64> = buf.rewards.iter().map(|r| r / reward_scale).collect();
        let (mut adv, returns) =
            gae_advantages_bootstrapped(&scaled, &buf.values, &buf.dones, last_value, cfg.gamma, cfg.gae_lambda);
        if adv.len() > 1 {
            normalize(&mut adv);
        }

        let mut order: Vec<usize> = (0..buf.len()).collect();
        for _ in 0..cfg.epochs {
            shuffle_rng.shuffle(&mut order);
            for chunk in order.chunks(cfg.minibatch) {
                let mb = Minibatch {
                    features: chunk.iter().map(|&i| buf.features[i].clone()).collect(),
                    sensor_actions: chunk.iter().map(|&i| buf.sensor_actions[i]).collect(),
                    velocity_actions: chunk.iter().map(|&i| buf.velocity_actions[i]).collect(),
                    old_log_probs: chunk.iter().map(|&i| buf.log_probs[i]).collect(),
                    advantages: chunk.iter().map(|&i| adv[i]).collect(),
                    returns: chunk.iter().map(|&i| returns[i]).collect(),
                };
                let (_, grad) = loss_and_grad(&policy.params, &mb, &coef)
                    .map_err(|source| PpoError::Diverged { episode, source })?;
                adam.update(&mut policy.params.data, &grad, cfg.learning_rate);
            }
        }
        if !policy.params.is_finite() {
            return Err(PpoError::Diverged {
                episode,
                source: LossError::NonFinite,
            });
        }

        curve.push(CurveRow {
            episode,
            mean_reward: mean(&buf.rewards),
            mean_aoi: mean(&aois),
        });
    }

    Ok(TrainOutcome {
        params: policy.params,
        curve,
    })
}

/// Convenience factory: episode `e` gets world seed `episode_world_seed(seed, e)`.
pub fn seeded_factory(cfg: WorldConfig, seed: u64) -> impl FnMut(usize) -> Result<World, EnvError> {
    move |episode| World::new(cfg.clone(), episode_world_seed(seed, episode))
}

/// Runs the frozen network for one episode of `world`.
pub fn evaluate(params: &MlpParams<f64>, world: &mut World, greedy: bool) -> Result<RunSummary, PpoError> {
    let mut policy = PpoPolicy::new(params.clone(), world.config().clone(), greedy)?;
    Ok(run_episode(world, &mut policy)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (WorldConfig, PpoConfig) {
        let w = WorldConfig {
            n_sensors: 3,
            n_steps: 10,
            ..Default::default()
        };
        let p = PpoConfig {
            episodes: 6,
            steps_per_episode: 10,
            hidden: 8,
            ..Default::default()
        };
        (w, p)
    }

    #[test]
    fn velocity_bins_at_defaults() {
        let v: Vec<f64> = (0..5).map(|k| velocity_for_bin(k, 5, 0.0, 15.0)).collect();
        assert_eq!(v, vec![0.0, 3.75, 7.5, 11.25, 15.0]);
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        let bad = PpoConfig {
            clip_eps: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PpoConfig {
            gamma: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let (w, p) = small();
        let a = train(&w, seeded_factory(w.clone(), 1), &p, 7).unwrap();
        let b = train(&w, seeded_factory(w.clone(), 1), &p, 7).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.params, b.params);
        assert_eq!(a.curve.len(), 6);
        for row in &a.curve {
            assert!((row.mean_reward + row.mean_aoi).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_evaluation_is_deterministic() {
        let (w, p) = small();
        let out = train(&w, seeded_factory(w.clone(), 2), &p, 3).unwrap();
        let mut w1 = World::new(w.clone(), 99).unwrap();
        let mut w2 = World::new(w.clone(), 99).unwrap();
        let s1 = evaluate(&out.params, &mut w1, true).unwrap();
        let s2 = evaluate(&out.params, &mut w2, true).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(w1.log(), w2.log());
        assert!(s1.velocity_trace.iter().all(|v| [0.0, 3.75, 7.5, 11.25, 15.0].contains(v)));
    }

    #[test]
    fn mismatched_world_rejected() {
        let (w, p) = small();
        let out = train(&w, seeded_factory(w.clone(), 2), &p, 3).unwrap();
        let other = WorldConfig {
            n_sensors: 4,
            ..w
        };
        assert!(PpoPolicy::new(out.params, other, true).is_err());
    }

    #[test]
    fn buffer_columns_stay_aligned() {
        let mut b = TrajectoryBuffer::default();
        b.push(vec![0.0], 0, 1, -1.0, 0.5, -2.0, false);
        b.push(vec![0.1], 1, 0, -1.2, 0.4, -1.0, true);
        assert_eq!(b.len(), 2);
        assert_eq!(b.features.len(), b.dones.len());
    }
}
