//! Generalised advantage estimation.

use crate::scalar::Scalar;

/// Returns `(advantages, returns)` with `returns = advantages + values`.
/// The value after the last entry is taken as zero, so the final transition
/// should be flagged `done`.
pub fn gae_advantages<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    gamma: T,
    lambda: T,
) -> (Vec<T>, Vec<T>) {
    gae_advantages_bootstrapped(rewards, values, dones, T::zero(), gamma, lambda)
}

/// As [`gae_advantages`], but a buffer whose last entry is not `done` (cut
/// off by a time limit) bootstraps from `last_value`, the critic's estimate
/// for the state after the final transition.
pub fn gae_advantages_bootstrapped<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    last_value: T,
    gamma: T,
    lambda: T,
) -> (Vec<T>, Vec<T>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "buffer columns differ in length");
    let mut adv = vec![T::zero(); n];
    let mut next_adv = T::zero();
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, returns)
}

/// Shifts to zero mean and scales to unit (population) variance. Leaves
/// single-element or constant batches centred but unscaled.
pub fn normalize<T: Scalar>(xs: &mut [T]) {
    if xs.is_empty() {
        return;
    }
    let n = T::of_usize(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt();
    let scale = if std > T::of(1e-12) { std } else { T::one() };
    for x in xs.iter_mut() {
        *x = (*x - mean) / scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn gamma_lambda_one_gives_suffix_sums() {
        let r = [1.0, -2.0, 0.5, 3.0];
        let (a, ret) = gae_advantages(&r, &[0.0; 4], &[false, false, false, true], 1.0, 1.0);
        assert_eq!(a, vec![2.5, 1.5, 3.5, 3.0]);
        assert_eq!(ret, a);
    }

    #[test]
    fn single_terminal_step() {
        let (a, ret) = gae_advantages(&[2.0], &[0.75], &[true], 0.99, 0.95);
        assert_eq!(a, vec![1.25]);
        assert_eq!(ret, vec![2.0]);
    }

    #[test]
    fn three_step_hand_case() {
        // delta_2 = 1 - .5 = .5; delta_1 = 1 + .9*.5 - .5 = .95; delta_0 = .95
        // A_2 = .5, A_1 = .95 + .72*.5 = 1.31, A_0 = .95 + .72*1.31 = 1.8932
        let (a, ret) = gae_advantages::<f64>(&[1.0; 3], &[0.5; 3], &[false, false, true], 0.9, 0.8);
        let want = [1.8932, 1.31, 0.5];
        for k in 0..3 {
            assert!((a[k] - want[k]).abs() < 1e-12, "{a:?}");
            assert!((ret[k] - (want[k] + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn done_cuts_bootstrap_between_episodes() {
        let (a, _) = gae_advantages(&[1.0, 1.0], &[0.0, 5.0], &[true, true], 0.9, 0.9);
        assert_eq!(a, vec![1.0, -4.0]);
    }

    #[test]
    fn bootstrap_only_applies_past_an_open_end() {
        let (a, _) = gae_advantages_bootstrapped(&[1.0, 1.0], &[0.0, 0.0], &[false, false], 10.0, 0.5, 1.0);
        // delta_1 = 1 + 5 = 6; A_0 = 1 + .5 * 6 = 4
        assert_eq!(a, vec![4.0, 6.0]);
        let (b, _) = gae_advantages_bootstrapped(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 10.0, 0.5, 1.0);
        assert_eq!(b, gae_advantages(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 0.5, 1.0).0);
    }

    #[test]
    fn normalisation_moments() {
        let mut rng = RngStream::new(5, "adv");
        for n in 2..50 {
            let mut xs: Vec<f64> = (0..n).map(|_| 3.0 + 10.0 * rng.normal()).collect();
            normalize(&mut xs);
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
            assert!(m.abs() < 1e-9);
            assert!((v.sqrt() - 1.0).abs() < 1e-6);
        }
    }
}
