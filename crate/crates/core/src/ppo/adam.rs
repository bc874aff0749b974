use crate::scalar::Scalar;

/// Bias-corrected Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n_params: usize) -> Self {
        Adam {
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn update(&mut self, params: &mut [T], grads: &[T], lr: T) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (T::one() - self.beta1) * g;
            *v = self.beta2 * *v + (T::one() - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut adam = Adam::<f64>::new(3);
        let mut p: Vec<f64> = vec![1.0, 1.0, 1.0];
        adam.update(&mut p, &[0.5, -4.0, 1e-3], 0.01);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] - 1.01).abs() < 1e-9);
        assert!((p[2] - 0.99).abs() < 1e-6);
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut adam = Adam::new(2);
        let mut p = vec![0.3, -2.0];
        for _ in 0..5 {
            adam.update(&mut p, &[0.0, 0.0], 0.1);
        }
        assert_eq!(p, vec![0.3, -2.0]);
    }

    #[test]
    fn two_scripted_steps() {
        // p0 = 1, g = 0.5 then -0.25, lr = 0.1 (40-digit evaluation of the recurrences)
        let mut adam = Adam::<f64>::new(1);
        let mut p: Vec<f64> = vec![1.0];
        adam.update(&mut p, &[0.5], 0.1);
        assert!((p[0] - 0.900_000_002).abs() < 1e-12);
        adam.update(&mut p, &[-0.25], 0.1);
        assert!((p[0] - 0.873_366_298_707_846_2).abs() < 1e-12, "{}", p[0]);
    }
}
