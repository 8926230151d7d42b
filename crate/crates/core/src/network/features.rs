//! Densely connected dynamic edge convolution.
//!
//! Block `b` builds a kNN graph (self excluded) over its input: point
//! coordinates for the first block, the previous block's features for the
//! rest. Each edge `(i, j)` is mapped by a shared affine layer applied to
//! `[h_i, h_j - h_i]`, rectified, and max-pooled over `j`. The per-point
//! feature is the concatenation of all block outputs.
//!
//! Writing the edge weight as `[A | B]`, the edge pre-activation splits into
//! `(A - B) h_i + bias` plus `B h_j`, so each block costs one pass over the
//! points plus a max over neighbour rows.

use alloc::vec;
use alloc::vec::Vec;

use super::ScoreNetworkParams;
use crate::spatial::{knn_graph_points, knn_graph_rows};
use crate::{Error, Point3, Result};

/// Per-point feature rows `h_i`, one per input point.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureSet {
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid("feature data is not a whole number of rows"));
        }
        Ok(FeatureSet { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone)]
struct BlockTape {
    input: Vec<f64>,
    in_dim: usize,
    /// Neighbour that won the max for each (point, channel).
    argmax: Vec<usize>,
    /// Whether the pooled pre-activation was strictly positive.
    active: Vec<bool>,
}

/// Forward activations kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct FeatureTape {
    blocks: Vec<BlockTape>,
    features: FeatureSet,
}

/// Per-point features of a (normalized) patch.
pub fn extract_features(points: &[Point3], params: &ScoreNetworkParams) -> Result<FeatureSet> {
    Ok(FeatureTape::record(points, params)?.features)
}

impl FeatureTape {
    pub fn record(points: &[Point3], params: &ScoreNetworkParams) -> Result<Self> {
        let cfg = params.config();
        let k = cfg.graph_k;
        let n = points.len();
        if n <= k {
            return Err(Error::invalid(alloc::format!(
                "feature extraction needs more than graph_k = {k} points, got {n}"
            )));
        }
        let fdim = cfg.feature_dim();
        let vals = params.values();
        let mut features = vec![0.0; n * fdim];
        let mut input: Vec<f64> = points.iter().flat_map(|p| p.to_array()).collect();
        let mut in_dim = 3;
        let mut col = 0;
        let mut blocks = Vec::with_capacity(cfg.block_widths.len());

        for (b, layer) in params.layout().blocks.iter().enumerate() {
            let (w, d) = (layer.rows, in_dim);
            let neighbors = if b == 0 { knn_graph_points(points, k)? } else { knn_graph_rows(&input, d, k)? };
            let weight = &vals[layer.weight_range()];
            let bias = &vals[layer.bias_range()];
            let mut wd = vec![0.0; w * d];
            let mut wb = vec![0.0; w * d];
            for c in 0..w {
                for t in 0..d {
                    let a = weight[c * 2 * d + t];
                    let bb = weight[c * 2 * d + d + t];
                    wd[c * d + t] = a - bb;
                    wb[c * d + t] = bb;
                }
            }
            let mut self_term = vec![0.0; n * w];
            let mut nbr_term = vec![0.0; n * w];
            for i in 0..n {
                let h = &input[i * d..(i + 1) * d];
                for c in 0..w {
                    let (rd, rb) = (&wd[c * d..(c + 1) * d], &wb[c * d..(c + 1) * d]);
                    let mut u = bias[c];
                    let mut v = 0.0;
                    for t in 0..d {
                        u += rd[t] * h[t];
                        v += rb[t] * h[t];
                    }
                    self_term[i * w + c] = u;
                    nbr_term[i * w + c] = v;
                }
            }

            let mut output = vec![0.0; n * w];
            let mut argmax = vec![0usize; n * w];
            let mut active = vec![false; n * w];
            let mut best = vec![0.0; w];
            let mut best_j = vec![0usize; w];
            for i in 0..n {
                let nbrs = &neighbors[i * k..(i + 1) * k];
                best.copy_from_slice(&nbr_term[nbrs[0] * w..(nbrs[0] + 1) * w]);
                best_j.fill(nbrs[0]);
                for &j in &nbrs[1..] {
                    let row = &nbr_term[j * w..(j + 1) * w];
                    for c in 0..w {
                        if row[c] > best[c] || (row[c] == best[c] && j < best_j[c]) {
                            best[c] = row[c];
                            best_j[c] = j;
                        }
                    }
                }
                for c in 0..w {
                    let pre = self_term[i * w + c] + best[c];
                    let on = pre > 0.0;
                    let out = if on { pre } else { 0.0 };
                    output[i * w + c] = out;
                    features[i * fdim + col + c] = out;
                    argmax[i * w + c] = best_j[c];
                    active[i * w + c] = on;
                }
            }
            blocks.push(BlockTape { input, in_dim: d, argmax, active });
            input = output;
            in_dim = w;
            col += w;
        }
        Ok(FeatureTape { blocks, features: FeatureSet { dim: fdim, data: features } })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn into_features(self) -> FeatureSet {
        self.features
    }

    /// Accumulates into `grad` the parameter gradient of a scalar whose
    /// gradient with respect to the features is `d_features` (row-major,
    /// same shape as the feature set). The kNN graphs are piecewise constant
    /// and contribute nothing; the max routes to the recorded argmax edge.
    pub fn backward(&self, params: &ScoreNetworkParams, d_features: &[f64], grad: &mut [f64]) {
        let fdim = self.features.dim;
        let n = self.features.len();
        assert_eq!(d_features.len(), n * fdim);
        assert_eq!(grad.len(), params.len());
        let layout = params.layout();
        let vals = params.values();

        let mut col = fdim;
        let mut carried: Option<Vec<f64>> = None;
        for (b, (layer, tape)) in layout.blocks.iter().zip(&self.blocks).enumerate().rev() {
            let (w, d) = (layer.rows, tape.in_dim);
            col -= w;
            // gradient w.r.t. this block's (post-rectifier) output
            let mut g = vec![0.0; n * w];
            for i in 0..n {
                for c in 0..w {
                    if tape.active[i * w + c] {
                        let mut v = d_features[i * fdim + col + c];
                        if let Some(next) = &carried {
                            v += next[i * w + c];
                        }
                        g[i * w + c] = v;
                    }
                }
            }
            let mut d_nbr = vec![0.0; n * w];
            for i in 0..n {
                for c in 0..w {
                    let v = g[i * w + c];
                    if v != 0.0 {
                        d_nbr[tape.argmax[i * w + c] * w + c] += v;
                    }
                }
            }

            let weight = &vals[layer.weight_range()];
            let (gw_start, gb_start) = (layer.weight, layer.bias);
            let mut d_in = if b > 0 { Some(vec![0.0; n * d]) } else { None };
            for i in 0..n {
                let h = &tape.input[i * d..(i + 1) * d];
                for c in 0..w {
                    let gi = g[i * w + c];
                    let ei = d_nbr[i * w + c] - gi;
                    if gi == 0.0 && ei == 0.0 {
                        continue;
                    }
                    grad[gb_start + c] += gi;
                    let row = gw_start + c * 2 * d;
                    for t in 0..d {
                        grad[row + t] += gi * h[t];
                        grad[row + d + t] += ei * h[t];
                    }
                    if let Some(d_in) = d_in.as_mut() {
                        let wrow = &weight[c * 2 * d..(c + 1) * 2 * d];
                        let dst = &mut d_in[i * d..(i + 1) * d];
                        for t in 0..d {
                            dst[t] += wrow[t] * gi + wrow[d + t] * ei;
                        }
                    }
                }
            }
            carried = d_in;
        }
    }
}
