//! Normalised state features shared by the PPO network and the ICL
//! experience pool.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::WorldConfig;
use crate::types::Observation;

/// SNR normalisation range in dB.
pub const SNR_RANGE_DB: (f64, f64) = (-20.0, 60.0);
/// AoI normaliser when the config has no cap.
pub const DEFAULT_AOI_SCALE_S: f64 = 40.0;

const BOUND: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("feature length mismatch: {left} vs {right}")]
pub struct LengthMismatch {
    pub left: usize,
    pub right: usize,
}

/// Layout: `[aoi_1..aoi_N, snr_1..snr_N, x, y, sin θ, cos θ]`, length `2N + 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len_for(n_sensors: usize) -> usize {
        2 * n_sensors + 4
    }

    pub fn from_observation(obs: &Observation, cfg: &WorldConfig) -> Self {
        let aoi_scale = cfg.aoi_cap_s.unwrap_or(DEFAULT_AOI_SCALE_S);
        let (lo, hi) = SNR_RANGE_DB;
        let clip = |x: f64| x.clamp(-BOUND, BOUND);
        let mut v = Vec::with_capacity(Self::len_for(obs.rows.len()));
        v.extend(obs.rows.iter().map(|r| clip(r.aoi_s / aoi_scale)));
        v.extend(obs.rows.iter().map(|r| clip((r.snr_db - lo) / (hi - lo))));
        let [x, y, _] = obs.uav_pos;
        v.push(clip(x / cfg.area_size_m));
        v.push(clip(y / cfg.area_size_m));
        let [cx, cy] = cfg.orbit_center();
        let theta = (y - cy).atan2(x - cx);
        v.push(theta.sin());
        v.push(theta.cos());
        FeatureVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance(&self, other: &FeatureVector) -> Result<f64, LengthMismatch> {
        if self.len() != other.len() {
            return Err(LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::World;
    use crate::types::Action;

    #[test]
    fn layout_and_bounds() {
        let cfg = WorldConfig::default();
        let mut w = World::new(cfg.clone(), 3).unwrap();
        for k in 0..30 {
            let f = FeatureVector::from_observation(&w.observe(), &cfg);
            assert_eq!(f.len(), 24);
            assert!(f.as_slice().iter().all(|x| x.abs() <= 1.5));
            w.step(Action::new(k % 3 + 1, 13.0)).unwrap();
        }
        let f = FeatureVector::from_observation(&World::new(cfg.clone(), 3).unwrap().observe(), &cfg);
        // orbit angle zero at start
        assert!((f.0[22] - 0.0).abs() < 1e-12);
        assert!((f.0[23] - 1.0).abs() < 1e-12);
        assert_eq!(f.0[20], 0.85);
    }
}
