//! Air-to-ground channel: elevation angle, LoS probability, mean path loss,
//! SNR and packet-success probability.
//!
//! All functions are pure. Angles are in degrees throughout; the LoS model's
//! constants `a` and `b` are calibrated against degrees.

use crate::config::SuccessModel;
use crate::scalar::Scalar;

/// Channel constants, usually obtained from [`crate::WorldConfig::channel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T> {
    pub env_a: T,
    pub env_b: T,
    pub eta_los_db: T,
    pub eta_nlos_db: T,
    pub carrier_hz: T,
    pub light_speed_mps: T,
    pub ptx_dbm: T,
    pub noise_dbm: T,
    pub success_model: SuccessModel,
    pub snr_threshold_db: T,
    pub logistic_scale_db: T,
}

/// Everything the channel says about one UAV/sensor pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget<T> {
    pub distance_m: T,
    pub elevation_deg: T,
    pub p_los: T,
    pub path_loss_db: T,
    pub snr_db: T,
    pub success_p: T,
}

pub fn horizontal_distance<T: Scalar>(uav: [T; 3], sensor: [T; 2]) -> T {
    (uav[0] - sensor[0]).hypot(uav[1] - sensor[1])
}

/// `atan(h / d)` in degrees; exactly 90 directly overhead.
pub fn elevation_angle<T: Scalar>(uav: [T; 3], sensor: [T; 2]) -> T {
    let d = horizontal_distance(uav, sensor);
    if d == T::zero() {
        return T::of(90.0);
    }
    uav[2].atan2(d).to_degrees()
}

/// `1 / (1 + a exp(-b (phi - a)))` with `phi` in degrees.
pub fn los_probability<T: Scalar>(phi_deg: T, a: T, b: T) -> T {
    T::one() / (T::one() + a * (-b * (phi_deg - a)).exp())
}

/// Straight-line UAV-to-sensor range, `d sec(phi)`.
pub fn slant_distance<T: Scalar>(uav: [T; 3], sensor: [T; 2]) -> T {
    horizontal_distance(uav, sensor).hypot(uav[2])
}

/// Mean path loss in dB: the LoS-probability-weighted excess loss on top of
/// free-space loss at the slant range.
pub fn path_loss_db<T: Scalar>(uav: [T; 3], sensor: [T; 2], p: &ChannelParams<T>) -> T {
    let phi = elevation_angle(uav, sensor);
    let p_los = los_probability(phi, p.env_a, p.env_b);
    path_loss_with(p_los, slant_distance(uav, sensor), p)
}

fn path_loss_with<T: Scalar>(p_los: T, slant: T, p: &ChannelParams<T>) -> T {
    let twenty = T::of(20.0);
    let four_pi = T::of(4.0) * T::PI();
    p_los * (p.eta_los_db - p.eta_nlos_db)
        + twenty * slant.log10()
        + twenty * p.carrier_hz.log10()
        + twenty * (four_pi / p.light_speed_mps).log10()
        + p.eta_nlos_db
}

pub fn snr_db<T: Scalar>(path_loss_db: T, p: &ChannelParams<T>) -> T {
    p.ptx_dbm - path_loss_db - p.noise_dbm
}

pub fn success_probability<T: Scalar>(snr_db: T, p: &ChannelParams<T>) -> T {
    match p.success_model {
        SuccessModel::Threshold => {
            if snr_db >= p.snr_threshold_db {
                T::one()
            } else {
                T::zero()
            }
        }
        SuccessModel::Logistic => {
            T::one() / (T::one() + ((p.snr_threshold_db - snr_db) / p.logistic_scale_db).exp())
        }
    }
}

pub fn link_budget<T: Scalar>(uav: [T; 3], sensor: [T; 2], p: &ChannelParams<T>) -> LinkBudget<T> {
    let distance_m = horizontal_distance(uav, sensor);
    let elevation_deg = elevation_angle(uav, sensor);
    let p_los = los_probability(elevation_deg, p.env_a, p.env_b);
    let path_loss_db = path_loss_with(p_los, slant_distance(uav, sensor), p);
    let snr = snr_db(path_loss_db, p);
    LinkBudget {
        distance_m,
        elevation_deg,
        p_los,
        path_loss_db,
        snr_db: snr,
        success_p: success_probability(snr, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WorldConfig;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn params() -> ChannelParams<f64> {
        WorldConfig::default().channel()
    }

    #[test]
    fn elevation_examples() {
        assert_eq!(elevation_angle([10.0, 0.0, 10.0], [0.0, 0.0]), 45.0);
        assert_eq!(elevation_angle([3.0, 4.0, 10.0], [3.0, 4.0]), 90.0);
        // atan(1/3) in degrees, 40-digit evaluation
        let phi = elevation_angle([30.0, 0.0, 10.0], [0.0, 0.0]);
        assert!(rel(phi, 18.434_948_822_922_01) < 1e-12, "{phi}");
    }

    #[test]
    fn los_examples() {
        let (a, b) = (9.61, 0.16);
        assert!(rel(los_probability(a, a, b), 1.0 / (1.0 + a)) < 1e-15);
        assert!(rel(los_probability(90.0, a, b), 0.999_975_074_537_903) < 1e-12);
        assert!(rel(los_probability(18.434_948_822_922_01, a, b), 0.299_262_463_486_332_7) < 1e-12);
    }

    #[test]
    fn slant_examples() {
        assert!(rel(slant_distance([30.0, 0.0, 10.0], [0.0, 0.0]), 1000f64.sqrt()) < 1e-15);
        assert_eq!(slant_distance([0.0, 0.0, 10.0], [0.0, 0.0]), 10.0);
        assert_eq!(slant_distance([40.0, 0.0, 9.0], [0.0, 0.0]), 41.0);
    }

    #[test]
    fn path_loss_examples() {
        let p = params();
        let g = path_loss_db([30.0, 0.0, 10.0], [0.0, 0.0], &p);
        assert!(rel(g, 84.366_021_249_875_17) < 1e-10, "{g}");

        let free = ChannelParams {
            eta_los_db: 0.0,
            eta_nlos_db: 0.0,
            ..p
        };
        let fspl = path_loss_db([30.0, 0.0, 10.0], [0.0, 0.0], &free);
        // standard FSPL = 20 log10(4 pi d f / c)
        let oracle = 20.0 * (4.0 * std::f64::consts::PI * 1000f64.sqrt() * 2.4e9 / 299_792_458.0).log10();
        assert!(rel(fspl, oracle) < 1e-12);
        assert!(rel(fspl, 70.052_008_056_115_5) < 1e-10);

        let far = path_loss_db([60.0, 0.0, 10.0], [0.0, 0.0], &p);
        assert!(far > g);
    }

    #[test]
    fn snr_examples() {
        let p = params();
        assert!(rel(snr_db(84.366_021_249_875_17, &p), 25.633_978_750_124_83) < 1e-12);
        assert_eq!(snr_db(110.0, &p), 0.0);
        assert_eq!(snr_db(20.0 + 90.0 + 10.0, &p), -10.0);
    }

    #[test]
    fn success_examples() {
        let mut p = params();
        assert_eq!(success_probability(4.999, &p), 0.0);
        assert_eq!(success_probability(5.0, &p), 1.0);
        p.success_model = SuccessModel::Logistic;
        assert_eq!(success_probability(5.0, &p), 0.5);
        let s = success_probability(5.0 + 2.0 * 2.0, &p);
        assert!(rel(s, 0.880_797_077_977_882_4) < 1e-12);
    }

    #[test]
    fn overhead_link_is_strong() {
        let lb = link_budget([0.0, 0.0, 10.0], [0.0, 0.0], &params());
        assert_eq!(lb.elevation_deg, 90.0);
        assert!(lb.snr_db > 40.0);
        assert_eq!(lb.success_p, 1.0);
    }

    #[test]
    fn generic_over_f32() {
        let p: ChannelParams<f32> = WorldConfig::default().channel();
        let g = path_loss_db([30.0f32, 0.0, 10.0], [0.0, 0.0], &p);
        assert!((g - 84.366_02).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn slant_is_d_sec_phi(d in 1e-3f64..500.0, h in 0.5f64..200.0) {
            let uav = [d, 0.0, h];
            let s = slant_distance(uav, [0.0, 0.0]);
            let phi = elevation_angle(uav, [0.0, 0.0]).to_radians();
            prop_assert!((s - d / phi.cos()).abs() < 1e-9 * s);
        }

        #[test]
        fn los_increasing(p1 in 0.01f64..90.0, p2 in 0.01f64..90.0) {
            prop_assume!(p1 < p2);
            prop_assert!(los_probability(p1, 9.61, 0.16) < los_probability(p2, 9.61, 0.16));
        }

        #[test]
        fn path_loss_increasing_in_distance(d1 in 0.0f64..300.0, d2 in 0.0f64..300.0, h in 1.0f64..100.0) {
            prop_assume!(d1 + 1e-6 < d2);
            let p = params();
            prop_assert!(path_loss_db([d1, 0.0, h], [0.0, 0.0], &p) < path_loss_db([d2, 0.0, h], [0.0, 0.0], &p));
        }

        #[test]
        fn success_monotone(s1 in -50f64..80.0, s2 in -50f64..80.0, logistic in any::<bool>()) {
            prop_assume!(s1 <= s2);
            let mut p = params();
            if logistic { p.success_model = SuccessModel::Logistic; }
            prop_assert!(success_probability(s1, &p) <= success_probability(s2, &p));
        }
    }
}
