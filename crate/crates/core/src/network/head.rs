//! Score MLP `Score(x - x_i, h_i)`.
//!
//! The first layer is affine in the concatenation `[r, h_i]`, so its
//! feature half (plus bias) is folded once per anchor into an
//! [`AnchorContext`]; each query then only pays for the three relative
//! coordinates and the remaining layers.

use alloc::vec;
use alloc::vec::Vec;

use super::ScoreNetworkParams;
use crate::Point3;

/// First-layer pre-activation contributed by an anchor's feature and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorContext(pub(crate) Vec<f64>);

/// Reusable activation buffers for score evaluation.
#[derive(Debug, Clone)]
pub struct ScoreScratch {
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl ScoreScratch {
    pub fn new(params: &ScoreNetworkParams) -> Self {
        let widest = params.layout().score.iter().map(|l| l.rows).max().unwrap_or(3);
        ScoreScratch {
            pre: params.layout().score.iter().map(|l| vec![0.0; l.rows]).collect(),
            delta: vec![0.0; widest],
            next_delta: vec![0.0; widest],
        }
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

impl ScoreNetworkParams {
    pub fn anchor_context(&self, h: &[f64]) -> AnchorContext {
        let l0 = self.layout().score[0];
        let vals = self.values();
        let fdim = l0.cols - 3;
        debug_assert_eq!(h.len(), fdim);
        let mut ctx = vec![0.0; l0.rows];
        for (r, out) in ctx.iter_mut().enumerate() {
            let row = &vals[l0.weight + r * l0.cols + 3..l0.weight + (r + 1) * l0.cols];
            let mut acc = vals[l0.bias + r];
            for t in 0..fdim {
                acc += row[t] * h[t];
            }
            *out = acc;
        }
        AnchorContext(ctx)
    }

    /// Evaluates the score MLP at relative position `rel`, leaving the
    /// pre-activations in `scratch` for [`Self::head_backward`].
    pub fn score_with_context(&self, rel: Point3, ctx: &AnchorContext, scratch: &mut ScoreScratch) -> Point3 {
        let layers = &self.layout().score;
        let vals = self.values();
        let l0 = layers[0];
        {
            let a0 = &mut scratch.pre[0];
            for r in 0..l0.rows {
                let w = &vals[l0.weight + r * l0.cols..l0.weight + r * l0.cols + 3];
                a0[r] = ctx.0[r] + w[0] * rel.x + w[1] * rel.y + w[2] * rel.z;
            }
        }
        for l in 1..layers.len() {
            let layer = layers[l];
            let (done, rest) = scratch.pre.split_at_mut(l);
            let prev = &done[l - 1];
            let cur = &mut rest[0];
            for r in 0..layer.rows {
                let row = &vals[layer.weight + r * layer.cols..layer.weight + (r + 1) * layer.cols];
                let mut acc = vals[layer.bias + r];
                for c in 0..layer.cols {
                    acc += row[c] * relu(prev[c]);
                }
                cur[r] = acc;
            }
        }
        let out = &scratch.pre[layers.len() - 1];
        Point3::new(out[0], out[1], out[2])
    }

    /// Reverse pass through the MLP for the forward evaluation currently in
    /// `scratch`. Adds parameter gradients (all layers except the feature
    /// half of the first) to `grad` and the first-layer pre-activation
    /// gradient to `d_ctx`.
    pub fn head_backward(
        &self,
        rel: Point3,
        scratch: &mut ScoreScratch,
        d_out: Point3,
        grad: &mut [f64],
        d_ctx: &mut [f64],
    ) {
        let layers = &self.layout().score;
        let vals = self.values();
        let last = layers.len() - 1;
        scratch.delta[..3].copy_from_slice(&d_out.to_array());
        for l in (1..=last).rev() {
            let layer = layers[l];
            let prev = &scratch.pre[l - 1];
            let delta = &scratch.delta[..layer.rows];
            let next = &mut scratch.next_delta[..layer.cols];
            next.fill(0.0);
            for r in 0..layer.rows {
                let dr = delta[r];
                if dr == 0.0 {
                    continue;
                }
                grad[layer.bias + r] += dr;
                let base = layer.weight + r * layer.cols;
                for c in 0..layer.cols {
                    grad[base + c] += dr * relu(prev[c]);
                    next[c] += vals[base + c] * dr;
                }
            }
            for c in 0..layer.cols {
                if prev[c] <= 0.0 {
                    next[c] = 0.0;
                }
            }
            core::mem::swap(&mut scratch.delta, &mut scratch.next_delta);
        }
        let l0 = layers[0];
        let rel = rel.to_array();
        for (r, (&dr, dc)) in scratch.delta.iter().zip(d_ctx.iter_mut()).take(l0.rows).enumerate() {
            *dc += dr;
            let base = l0.weight + r * l0.cols;
            for (t, rt) in rel.iter().enumerate() {
                grad[base + t] += dr * rt;
            }
        }
    }

    /// Reverse pass of [`Self::anchor_context`]: accumulates the first-layer
    /// feature weights and bias into `grad` and the feature gradient into
    /// `d_h`.
    pub fn context_backward(&self, h: &[f64], d_ctx: &[f64], grad: &mut [f64], d_h: &mut [f64]) {
        let l0 = self.layout().score[0];
        let vals = self.values();
        let fdim = l0.cols - 3;
        for r in 0..l0.rows {
            let dr = d_ctx[r];
            if dr == 0.0 {
                continue;
            }
            grad[l0.bias + r] += dr;
            let base = l0.weight + r * l0.cols + 3;
            for t in 0..fdim {
                grad[base + t] += dr * h[t];
                d_h[t] += vals[base + t] * dr;
            }
        }
    }
}
