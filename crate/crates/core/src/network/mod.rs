//! The score estimation network.
//!
//! A feature extractor turns a patch into per-point features `h_i` with a
//! stack of dynamic edge-convolution blocks; a small MLP then evaluates the
//! localized score `S_i(x) = Score(x - x_i, h_i)`. Gradients are computed by
//! a hand-written reverse pass specific to this architecture.
//!
//! Parameters live in one flat vector. The ordering is fixed:
//! for each block `b`, its edge weight (`width_b x 2*in_b`, row-major) and
//! bias (`width_b`); then for each score layer, weight (`out x in`,
//! row-major) and bias. The first score layer's input columns are the three
//! relative coordinates followed by the `F` feature channels.

mod features;
mod head;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::rng::RngSeed;
use crate::{Error, Point3, Result};

pub use features::{extract_features, FeatureSet, FeatureTape};
pub use head::{AnchorContext, ScoreScratch};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Neighbours per point in every edge-convolution graph.
    pub graph_k: usize,
    /// Output width of each edge-convolution block.
    pub block_widths: Vec<usize>,
    /// Hidden widths of the score MLP (rectified); the output layer has 3 units.
    pub score_hidden: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { graph_k: 16, block_widths: vec![32, 64, 128], score_hidden: vec![128, 64] }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.graph_k == 0 {
            return Err(Error::invalid("graph_k must be at least 1"));
        }
        if self.block_widths.is_empty() {
            return Err(Error::invalid("at least one feature block is required"));
        }
        if self.block_widths.iter().chain(&self.score_hidden).any(|&w| w == 0) {
            return Err(Error::invalid("layer widths must be at least 1"));
        }
        Ok(())
    }

    /// Width of the concatenated per-point feature.
    pub fn feature_dim(&self) -> usize {
        self.block_widths.iter().sum()
    }

    pub fn layout(&self) -> NetworkLayout {
        let mut offset = 0;
        let mut layer = |rows: usize, cols: usize| {
            let l = Layer { weight: offset, bias: offset + rows * cols, rows, cols };
            offset += rows * cols + rows;
            l
        };
        let mut blocks = Vec::with_capacity(self.block_widths.len());
        let mut input = 3;
        for &w in &self.block_widths {
            blocks.push(layer(w, 2 * input));
            input = w;
        }
        let mut score = Vec::with_capacity(self.score_hidden.len() + 1);
        let mut input = 3 + self.feature_dim();
        for &w in self.score_hidden.iter().chain(core::iter::once(&3)) {
            score.push(layer(w, input));
            input = w;
        }
        NetworkLayout { blocks, score, len: offset }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

/// Offsets of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub weight: usize,
    pub bias: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Layer {
    pub fn weight_range(&self) -> Range<usize> {
        self.weight..self.weight + self.rows * self.cols
    }

    pub fn bias_range(&self) -> Range<usize> {
        self.bias..self.bias + self.rows
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkLayout {
    pub blocks: Vec<Layer>,
    pub score: Vec<Layer>,
    pub len: usize,
}

/// All learnable weights, with the configuration that fixes their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNetworkParams {
    config: NetworkConfig,
    layout: NetworkLayout,
    values: Vec<f64>,
}

impl ScoreNetworkParams {
    /// Fan-in scaled uniform weights, zero biases, and a zero output layer so
    /// the untrained score is identically zero.
    pub fn init(config: &NetworkConfig, seed: RngSeed) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let mut values = vec![0.0; layout.len];
        let mut rng = seed.stream(0);
        let last = layout.score.len() - 1;
        for (i, l) in layout.blocks.iter().chain(&layout.score).enumerate() {
            if i == layout.blocks.len() + last {
                continue;
            }
            let bound = libm::sqrt(6.0 / l.cols as f64);
            for w in &mut values[l.weight_range()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(ScoreNetworkParams { config: config.clone(), layout, values })
    }

    pub fn from_values(config: &NetworkConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        if values.len() != layout.len {
            return Err(Error::invalid(alloc::format!("expected {} parameters, got {}", layout.len, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(ScoreNetworkParams { config: config.clone(), layout, values })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rounds every parameter to the nearest `f32`, so that a single
    /// precision checkpoint reproduces these values exactly.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }

    /// Named tensors in storage order.
    pub fn tensors(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for (b, l) in self.layout.blocks.iter().enumerate() {
            out.push((alloc::format!("block{b}.edge.weight"), l.weight_range()));
            out.push((alloc::format!("block{b}.edge.bias"), l.bias_range()));
        }
        for (s, l) in self.layout.score.iter().enumerate() {
            out.push((alloc::format!("score{s}.weight"), l.weight_range()));
            out.push((alloc::format!("score{s}.bias"), l.bias_range()));
        }
        out
    }

    /// `S_i(x)`: the localized score of anchor `anchor` at query `x`.
    ///
    /// Depends on `x` only through `x - anchor_positions[anchor]`.
    pub fn score(&self, x: Point3, anchor: usize, features: &FeatureSet, anchor_positions: &[Point3]) -> Point3 {
        let ctx = self.anchor_context(features.row(anchor));
        self.score_with_context(x - anchor_positions[anchor], &ctx, &mut ScoreScratch::new(self))
    }
}

#[cfg(test)]
mod tests;
