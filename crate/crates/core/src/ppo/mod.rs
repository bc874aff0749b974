//! From-scratch actor-critic PPO baseline with a factored categorical policy
//! over (sensor, velocity bin).

pub mod adam;
pub mod dist;
pub mod gae;
pub mod io;
pub mod loss;
pub mod net;
pub mod train;

pub use adam::Adam;
pub use gae::{gae_advantages, gae_advantages_bootstrapped, normalize};
pub use io::{read_params, write_params, ParamFileError};
pub use loss::{loss_and_grad, ppo_loss, LossCoefficients, LossError, LossParts, Minibatch};
pub use net::{Forward, MlpParams, MlpShape, ShapeError, VELOCITY_BINS};
pub use train::{
    episode_world_seed, evaluate, seeded_factory, train, velocity_for_bin, CurveRow, PpoConfig,
    PpoError, PpoPolicy, TrainOutcome, TrajectoryBuffer,
};
