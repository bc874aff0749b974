//! World configuration: every physical, channel and episode parameter of a run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::scalar::Scalar;

/// Speed of light in vacuum, m/s.
pub const LIGHT_SPEED_MPS: f64 = 299_792_458.0;

/// How an SNR is turned into a packet-success probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SuccessModel {
    /// Success iff `snr >= snr_threshold_db`.
    #[default]
    Threshold,
    /// Smooth logistic around the threshold with scale `logistic_scale_db`.
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl ConfigError {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub fn field(&self) -> &'static str {
        match self {
            ConfigError::Invalid { field, .. } => field,
        }
    }
}

/// Single source of truth for a run. Serialised as a flat JSON object whose
/// keys are exactly the field names; absent keys take the defaults below and
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub area_size_m: f64,
    pub n_sensors: usize,
    pub n_steps: usize,
    pub dt_s: f64,
    pub v_min_mps: f64,
    pub v_max_mps: f64,
    pub altitude_m: f64,
    pub orbit_radius_m: f64,
    /// `None` means the centre of the deployment area.
    pub orbit_center: Option<[f64; 2]>,
    pub ptx_dbm: f64,
    pub noise_dbm: f64,
    pub env_a: f64,
    pub env_b: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub carrier_hz: f64,
    pub light_speed_mps: f64,
    pub success_model: SuccessModel,
    pub snr_threshold_db: f64,
    pub logistic_scale_db: f64,
    pub queue_cap: usize,
    pub battery_j: f64,
    pub e_tx_j: f64,
    /// `None` disables the cap.
    pub aoi_cap_s: Option<f64>,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            area_size_m: 100.0,
            n_sensors: 10,
            n_steps: 30,
            dt_s: 1.0,
            v_min_mps: 0.0,
            v_max_mps: 15.0,
            altitude_m: 10.0,
            orbit_radius_m: 35.0,
            orbit_center: None,
            ptx_dbm: 20.0,
            noise_dbm: -90.0,
            env_a: 9.61,
            env_b: 0.16,
            eta_los_db: 1.0,
            eta_nlos_db: 20.0,
            carrier_hz: 2.4e9,
            light_speed_mps: LIGHT_SPEED_MPS,
            success_model: SuccessModel::Threshold,
            snr_threshold_db: 5.0,
            logistic_scale_db: 2.0,
            queue_cap: 40,
            battery_j: 50.0,
            e_tx_j: 0.05,
            aoi_cap_s: Some(40.0),
            seed: 0,
        }
    }
}

fn positive(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive and finite, got {x}")))
    }
}

fn finite(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be finite, got {x}")))
    }
}

fn nonzero(field: &'static str, n: usize) -> Result<(), ConfigError> {
    if n > 0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must be at least 1"))
    }
}

impl WorldConfig {
    pub fn orbit_center(&self) -> [f64; 2] {
        self.orbit_center
            .unwrap_or([self.area_size_m / 2.0, self.area_size_m / 2.0])
    }

    /// Checks every invariant in field order and reports the first violation.
    pub fn validate(self) -> Result<Self, ConfigError> {
        positive("area_size_m", self.area_size_m)?;
        nonzero("n_sensors", self.n_sensors)?;
        nonzero("n_steps", self.n_steps)?;
        positive("dt_s", self.dt_s)?;
        if !(self.v_min_mps.is_finite() && self.v_min_mps >= 0.0) {
            return Err(ConfigError::new("v_min_mps", "v_min must be non-negative"));
        }
        if !(self.v_max_mps.is_finite() && self.v_max_mps > 0.0) {
            return Err(ConfigError::new("v_max_mps", "v_max must be positive"));
        }
        if self.v_min_mps > self.v_max_mps {
            return Err(ConfigError::new("v_max_mps", "v_min must not exceed v_max"));
        }
        positive("altitude_m", self.altitude_m)?;
        positive("orbit_radius_m", self.orbit_radius_m)?;
        let [cx, cy] = self.orbit_center();
        finite("orbit_center", cx)?;
        finite("orbit_center", cy)?;
        let r = self.orbit_radius_m;
        let area = self.area_size_m;
        if cx - r < 0.0 || cx + r > area || cy - r < 0.0 || cy + r > area {
            return Err(ConfigError::new("orbit_radius_m", "orbit exits area"));
        }
        finite("ptx_dbm", self.ptx_dbm)?;
        finite("noise_dbm", self.noise_dbm)?;
        positive("env_a", self.env_a)?;
        positive("env_b", self.env_b)?;
        finite("eta_los_db", self.eta_los_db)?;
        finite("eta_nlos_db", self.eta_nlos_db)?;
        positive("carrier_hz", self.carrier_hz)?;
        positive("light_speed_mps", self.light_speed_mps)?;
        finite("snr_threshold_db", self.snr_threshold_db)?;
        positive("logistic_scale_db", self.logistic_scale_db)?;
        nonzero("queue_cap", self.queue_cap)?;
        positive("battery_j", self.battery_j)?;
        positive("e_tx_j", self.e_tx_j)?;
        if let Some(cap) = self.aoi_cap_s {
            positive("aoi_cap_s", cap)?;
        }
        Ok(self)
    }

    /// Channel constants in the requested scalar type.
    pub fn channel<T: Scalar>(&self) -> ChannelParams<T> {
        ChannelParams {
            env_a: T::of(self.env_a),
            env_b: T::of(self.env_b),
            eta_los_db: T::of(self.eta_los_db),
            eta_nlos_db: T::of(self.eta_nlos_db),
            carrier_hz: T::of(self.carrier_hz),
            light_speed_mps: T::of(self.light_speed_mps),
            ptx_dbm: T::of(self.ptx_dbm),
            noise_dbm: T::of(self.noise_dbm),
            success_model: self.success_model,
            snr_threshold_db: T::of(self.snr_threshold_db),
            logistic_scale_db: T::of(self.logistic_scale_db),
        }
    }

    /// Parses the flat JSON object form and validates it.
    pub fn from_json(text: &str) -> Result<Self, ConfigLoadError> {
        let cfg: WorldConfig = serde_json::from_str(text).map_err(|e| ConfigLoadError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(cfg.validate()?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

#[derive(Debug, Error)]
pub enum ConfigLoadError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_validate() {
        let cfg = WorldConfig::default().validate().unwrap();
        assert_eq!(cfg.n_sensors, 10);
        assert_eq!(cfg.n_steps, 30);
        assert_eq!(cfg.v_max_mps, 15.0);
        assert_eq!(cfg.area_size_m, 100.0);
        assert_eq!(cfg.orbit_center(), [50.0, 50.0]);
    }

    #[test]
    fn zero_vmax_rejected() {
        let cfg = WorldConfig {
            v_max_mps: 0.0,
            v_min_mps: 0.0,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field(), "v_max_mps");
        assert!(err.to_string().contains("v_max must be positive"), "{err}");
    }

    #[test]
    fn orbit_outside_area_rejected() {
        let cfg = WorldConfig {
            orbit_radius_m: 60.0,
            orbit_center: Some([50.0, 50.0]),
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("orbit exits area"), "{err}");
    }

    #[test]
    fn vmin_above_vmax_rejected() {
        let cfg = WorldConfig {
            v_min_mps: 20.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_json_gives_defaults() {
        let cfg = WorldConfig::from_json("{}").unwrap();
        assert_eq!(cfg, WorldConfig::default());
    }

    #[test]
    fn unknown_key_rejected_with_location() {
        let err = WorldConfig::from_json("{\n  \"n_sensor\": 15\n}").unwrap_err();
        match err {
            ConfigLoadError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn null_cap_disables_it() {
        let cfg = WorldConfig::from_json(r#"{"aoi_cap_s": null, "success_model": "logistic"}"#)
            .unwrap();
        assert_eq!(cfg.aoi_cap_s, None);
        assert_eq!(cfg.success_model, SuccessModel::Logistic);
    }

    proptest! {
        #[test]
        fn json_round_trip(
            n in 1usize..40,
            steps in 1usize..100,
            vmax in 0.5f64..40.0,
            h in 1.0f64..200.0,
            thr in -10.0f64..30.0,
            cap in proptest::option::of(1.0f64..100.0),
            seed in any::<u64>(),
            logistic in any::<bool>(),
        ) {
            let cfg = WorldConfig {
                n_sensors: n,
                n_steps: steps,
                v_max_mps: vmax,
                altitude_m: h,
                snr_threshold_db: thr,
                aoi_cap_s: cap,
                seed,
                success_model: if logistic { SuccessModel::Logistic } else { SuccessModel::Threshold },
                ..Default::default()
            };
            let back = WorldConfig::from_json(&cfg.to_json()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
