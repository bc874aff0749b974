//! Two-layer tanh MLP with sensor, velocity and value heads.
//!
//! Parameters live in one flat vector, in this order (weights row-major,
//! `out x in`):
//!
//! | block | shape            |
//! |-------|------------------|
//! | w1    | hidden1 x input  |
//! | b1    | hidden1          |
//! | w2    | hidden2 x hidden1|
//! | b2    | hidden2          |
//! | ws    | sensors x hidden2|
//! | bs    | sensors          |
//! | wv    | vel_bins x hidden2 |
//! | bv    | vel_bins         |
//! | wc    | 1 x hidden2      |
//! | bc    | 1                |

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;
use crate::scalar::Scalar;

pub const VELOCITY_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("expected {expected} features, got {got}")]
    Features { expected: usize, got: usize },
    #[error("expected {expected} parameters, got {got}")]
    Params { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub n_sensors: usize,
    pub n_velocity: usize,
}

/// Offsets of each block inside the flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
    pub ws: Range<usize>,
    pub bs: Range<usize>,
    pub wv: Range<usize>,
    pub bv: Range<usize>,
    pub wc: Range<usize>,
    pub bc: Range<usize>,
}

impl MlpShape {
    pub fn for_sensors(n_sensors: usize, hidden: usize) -> Self {
        MlpShape {
            input: crate::features::FeatureVector::len_for(n_sensors),
            hidden1: hidden,
            hidden2: hidden,
            n_sensors,
            n_velocity: VELOCITY_BINS,
        }
    }

    pub(crate) fn layout(&self) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        Layout {
            w1: take(self.hidden1 * self.input),
            b1: take(self.hidden1),
            w2: take(self.hidden2 * self.hidden1),
            b2: take(self.hidden2),
            ws: take(self.n_sensors * self.hidden2),
            bs: take(self.n_sensors),
            wv: take(self.n_velocity * self.hidden2),
            bv: take(self.n_velocity),
            wc: take(self.hidden2),
            bc: take(1),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().bc.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub shape: MlpShape,
    pub data: Vec<T>,
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub input: Vec<T>,
    pub h1: Vec<T>,
    pub h2: Vec<T>,
    pub sensor_logits: Vec<T>,
    pub velocity_logits: Vec<T>,
    pub value: T,
}

/// `out = W x + b`, W row-major `out x in`.
fn affine<T: Scalar>(w: &[T], b: &[T], x: &[T]) -> Vec<T> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bias)| {
            w[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(x)
                .fold(bias, |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

/// Accumulates `dW += g x^T`, `db += g` and returns `W^T g`.
fn affine_back<T: Scalar>(w: &[T], x: &[T], g: &[T], dw: &mut [T], db: &mut [T]) -> Vec<T> {
    let n_in = x.len();
    let mut dx = vec![T::zero(); n_in];
    for (o, &go) in g.iter().enumerate() {
        if go == T::zero() {
            continue;
        }
        db[o] += go;
        let row = o * n_in..(o + 1) * n_in;
        for ((dwi, &wi), (&xi, dxi)) in dw[row.clone()].iter_mut().zip(&w[row]).zip(x.iter().zip(dx.iter_mut())) {
            *dwi += go * xi;
            *dxi += go * wi;
        }
    }
    dx
}

/// Disjoint mutable views of a flat gradient vector.
struct GradBlocks<'a, T> {
    w1: &'a mut [T],
    b1: &'a mut [T],
    w2: &'a mut [T],
    b2: &'a mut [T],
    ws: &'a mut [T],
    bs: &'a mut [T],
    wv: &'a mut [T],
    bv: &'a mut [T],
    wc: &'a mut [T],
    bc: &'a mut [T],
}

impl<'a, T> GradBlocks<'a, T> {
    fn split(g: &'a mut [T], l: &Layout) -> Self {
        let (w1, g) = g.split_at_mut(l.w1.len());
        let (b1, g) = g.split_at_mut(l.b1.len());
        let (w2, g) = g.split_at_mut(l.w2.len());
        let (b2, g) = g.split_at_mut(l.b2.len());
        let (ws, g) = g.split_at_mut(l.ws.len());
        let (bs, g) = g.split_at_mut(l.bs.len());
        let (wv, g) = g.split_at_mut(l.wv.len());
        let (bv, g) = g.split_at_mut(l.bv.len());
        let (wc, bc) = g.split_at_mut(l.wc.len());
        GradBlocks {
            w1,
            b1,
            w2,
            b2,
            ws,
            bs,
            wv,
            bv,
            wc,
            bc,
        }
    }
}

impl<T: Scalar> MlpParams<T> {
    pub fn zeros(shape: MlpShape) -> Self {
        MlpParams {
            data: vec![T::zero(); shape.param_count()],
            shape,
        }
    }

    pub fn from_vec(shape: MlpShape, data: Vec<T>) -> Result<Self, ShapeError> {
        if data.len() != shape.param_count() {
            return Err(ShapeError::Params {
                expected: shape.param_count(),
                got: data.len(),
            });
        }
        Ok(MlpParams { shape, data })
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases; policy heads scaled by
    /// 0.01 so the untrained policy is close to uniform.
    pub fn init(shape: MlpShape, rng: &mut RngStream) -> Self {
        let mut p = Self::zeros(shape);
        let l = shape.layout();
        let mut fill = |range: Range<usize>, fan_in: usize, gain: f64| {
            let bound = gain / (fan_in as f64).sqrt();
            for w in &mut p.data[range] {
                *w = T::of(rng.uniform_in(-bound, bound));
            }
        };
        fill(l.w1, shape.input, 1.0);
        fill(l.w2, shape.hidden1, 1.0);
        fill(l.ws, shape.hidden2, 0.01);
        fill(l.wv, shape.hidden2, 0.01);
        fill(l.wc, shape.hidden2, 1.0);
        p
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn forward(&self, features: &[T]) -> Result<Forward<T>, ShapeError> {
        let s = &self.shape;
        if features.len() != s.input {
            return Err(ShapeError::Features {
                expected: s.input,
                got: features.len(),
            });
        }
        let l = s.layout();
        let d = &self.data;
        let h1: Vec<T> = affine(&d[l.w1], &d[l.b1], features)
            .into_iter()
            .map(T::tanh)
            .collect();
        let h2: Vec<T> = affine(&d[l.w2], &d[l.b2], &h1).into_iter().map(T::tanh).collect();
        let sensor_logits = affine(&d[l.ws], &d[l.bs], &h2);
        let velocity_logits = affine(&d[l.wv], &d[l.bv], &h2);
        let value = affine(&d[l.wc], &d[l.bc], &h2)[0];
        Ok(Forward {
            input: features.to_vec(),
            h1,
            h2,
            sensor_logits,
            velocity_logits,
            value,
        })
    }

    /// Back-propagates output gradients of one sample into `grad`.
    pub fn backward(
        &self,
        fwd: &Forward<T>,
        d_sensor: &[T],
        d_velocity: &[T],
        d_value: T,
        grad: &mut [T],
    ) {
        let l = self.shape.layout();
        let d = &self.data;
        let g = GradBlocks::split(grad, &l);
        let a = affine_back(&d[l.ws], &fwd.h2, d_sensor, g.ws, g.bs);
        let b = affine_back(&d[l.wv], &fwd.h2, d_velocity, g.wv, g.bv);
        let c = affine_back(&d[l.wc], &fwd.h2, &[d_value], g.wc, g.bc);
        let dz2: Vec<T> = (0..fwd.h2.len())
            .map(|k| (a[k] + b[k] + c[k]) * (T::one() - fwd.h2[k] * fwd.h2[k]))
            .collect();
        let dh1 = affine_back(&d[l.w2], &fwd.h1, &dz2, g.w2, g.b2);
        let dz1: Vec<T> = dh1
            .iter()
            .zip(&fwd.h1)
            .map(|(&g, &h)| g * (T::one() - h * h))
            .collect();
        affine_back(&d[l.w1], &fwd.input, &dz1, g.w1, g.b1);
    }

    /// Ranges of the value-head parameters in the flat layout.
    pub fn value_head_range(&self) -> Range<usize> {
        let l = self.shape.layout();
        l.wc.start..l.bc.end
    }

    /// Ranges of the two policy heads in the flat layout.
    pub fn policy_head_range(&self) -> Range<usize> {
        let l = self.shape.layout();
        l.ws.start..l.bv.end
    }
}
