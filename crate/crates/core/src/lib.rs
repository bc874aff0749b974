//! Seeded simulator of UAV-assisted sensor data collection that schedules one
//! ground sensor per frame and the UAV's speed along a fixed orbit, minimising
//! the average Age of Information (AoI).
//!
//! Controllers:
//! * [`icl`]: a language-model controller driven by a task description, a
//!   per-step state table and retrieved past experience, with an offline
//!   mock backend and a greedy fallback;
//! * [`ppo`]: a from-scratch actor-critic PPO baseline;
//! * [`policy`]: nearest-neighbour, max-AoI and round-robin baselines.
//!
//! The channel and learning kernels are generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix the `f64` instantiations used by the
//! simulator and the harness.

pub mod channel;
pub mod config;
pub mod features;
pub mod harness;
pub mod icl;
pub mod policy;
pub mod ppo;
pub mod rng;
pub mod scalar;
pub mod types;
pub mod world;

pub use config::{ConfigError, ConfigLoadError, SuccessModel, WorldConfig};
pub use features::FeatureVector;
pub use policy::{max_aoi_decide, nearest_neighbor_decide, MaxAoi, NearestNeighbor, Policy, RoundRobin};
pub use rng::RngStream;
pub use scalar::Scalar;
pub use types::{Action, Observation, SensorId, SensorRow, SensorState, StepRecord, UavState};
pub use world::{run_episode, EnvError, RunSummary, World};

pub type ChannelParams = channel::ChannelParams<f64>;
pub type LinkBudget = channel::LinkBudget<f64>;
pub type MlpParams = ppo::MlpParams<f64>;
pub type Minibatch = ppo::Minibatch<f64>;
pub type Adam = ppo::Adam<f64>;
