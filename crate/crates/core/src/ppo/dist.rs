//! Categorical helpers for the factored (sensor, velocity) policy.

use crate::rng::RngStream;
use crate::scalar::Scalar;

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    log_softmax(logits).into_iter().map(T::exp).collect()
}

pub fn entropy<T: Scalar>(logits: &[T]) -> T {
    log_softmax(logits)
        .into_iter()
        .map(|lp| -lp.exp() * lp)
        .sum()
}

/// First index of the maximum.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from `softmax(logits)`.
pub fn sample<T: Scalar>(logits: &[T], rng: &mut RngStream) -> usize {
    let p = softmax(logits);
    let u = T::of(rng.uniform());
    let mut acc = T::zero();
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    p.len() - 1
}

/// Independent draws from both heads and the joint log-probability.
pub fn sample_action<T: Scalar>(
    sensor_logits: &[T],
    velocity_logits: &[T],
    rng: &mut RngStream,
) -> (usize, usize, T) {
    let s = sample(sensor_logits, rng);
    let v = sample(velocity_logits, rng);
    let lp = log_softmax(sensor_logits)[s] + log_softmax(velocity_logits)[v];
    (s, v, lp)
}

pub fn joint_log_prob<T: Scalar>(sensor_logits: &[T], velocity_logits: &[T], s: usize, v: usize) -> T {
    log_softmax(sensor_logits)[s] + log_softmax(velocity_logits)[v]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let p = softmax(&[0.0f64; 7]);
        for x in &p {
            assert!((x - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_draws_within_three_sigma() {
        let mut rng = RngStream::new(9, "sample");
        let zs = [0.0f64; 10];
        let zv = [0.0f64; 5];
        let n = 100_000;
        let mut cs = [0usize; 10];
        let mut cv = [0usize; 5];
        for _ in 0..n {
            let (s, v, _) = sample_action(&zs, &zv, &mut rng);
            cs[s] += 1;
            cv[v] += 1;
        }
        let check = |counts: &[usize], k: usize| {
            let p = 1.0 / k as f64;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            for &c in counts {
                assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
            }
        };
        check(&cs, 10);
        check(&cv, 5);
    }

    #[test]
    fn saturated_logit_always_drawn() {
        let mut rng = RngStream::new(2, "sample");
        let mut z = [0.0f64; 6];
        z[4] = 30.0;
        for _ in 0..10_000 {
            assert_eq!(sample(&z, &mut rng), 4);
        }
    }

    #[test]
    fn sampled_log_prob_matches_log_softmax_sum() {
        let mut rng = RngStream::new(3, "sample");
        let zs = [0.3f64, -1.2, 2.0, 0.0];
        let zv = [1.0f64, 0.5, -0.5, 0.0, 0.2];
        for _ in 0..100 {
            let (s, v, lp) = sample_action(&zs, &zv, &mut rng);
            let direct = (softmax(&zs)[s]).ln() + (softmax(&zv)[v]).ln();
            assert!((lp - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_of_uniform_heads() {
        let h = entropy(&[0.0f64; 10]) + entropy(&[0.0f64; 5]);
        assert!((h - (10f64.ln() + 5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn argmax_shift_invariant() {
        let z = [0.1f64, 2.0, 2.0, -1.0];
        let shifted: Vec<f64> = z.iter().map(|x| x + 17.0).collect();
        assert_eq!(argmax(&z), 1);
        assert_eq!(argmax(&shifted), 1);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = RngStream::new(4, "p");
        for _ in 0..200 {
            let z: Vec<f64> = (0..8).map(|_| 20.0 * rng.normal()).collect();
            let s: f64 = softmax(&z).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
