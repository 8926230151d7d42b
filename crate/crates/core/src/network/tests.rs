#![allow(clippy::needless_range_loop)]

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::*;
use crate::rng::RngSeed;
use crate::training::{patch_loss, patch_loss_and_grad, LossVariant, TrainConfig, TrainingPair};

fn p(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}

fn random_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = RngSeed(seed).stream(0);
    (0..n).map(|_| p(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Every parameter uniform in `[-scale, scale)`, so the output layer is live.
fn randomized(cfg: &NetworkConfig, seed: u64, scale: f64) -> ScoreNetworkParams {
    let mut rng = RngSeed(seed).stream(0);
    let values = (0..cfg.param_count()).map(|_| rng.random_range(-scale..scale)).collect();
    ScoreNetworkParams::from_values(cfg, values).unwrap()
}

#[test]
fn default_parameter_count() {
    // blocks: 32*6+32, 64*64+64, 128*128+128; score: 128*227+128, 64*128+64, 3*64+3
    assert_eq!(NetworkConfig::default().param_count(), 58531);
    assert_eq!(NetworkConfig::default().feature_dim(), 224);
}

#[test]
fn init_is_deterministic_and_scores_zero() {
    let cfg = NetworkConfig { graph_k: 5, block_widths: vec![6, 7], score_hidden: vec![9, 4] };
    let a = ScoreNetworkParams::init(&cfg, RngSeed(3)).unwrap();
    assert_eq!(a, ScoreNetworkParams::init(&cfg, RngSeed(3)).unwrap());
    assert_ne!(a, ScoreNetworkParams::init(&cfg, RngSeed(4)).unwrap());
    let pts = random_points(30, 1);
    let f = extract_features(&pts, &a).unwrap();
    assert!(f.as_slice().iter().any(|&v| v != 0.0));
    for (i, &q) in random_points(10, 2).iter().enumerate() {
        assert_eq!(a.score(q * 3.0, i, &f, &pts), Point3::ZERO);
    }
    let layer = a.layout().blocks[1];
    for (idx, &v) in a.values().iter().enumerate() {
        if layer.weight_range().contains(&idx) {
            assert!(v.abs() <= libm::sqrt(6.0 / 12.0));
        }
    }
}

#[test]
fn config_validation() {
    assert!(NetworkConfig { graph_k: 0, ..NetworkConfig::default() }.validate().is_err());
    assert!(NetworkConfig { block_widths: vec![], ..NetworkConfig::default() }.validate().is_err());
    assert!(NetworkConfig { score_hidden: vec![4, 0], ..NetworkConfig::default() }.validate().is_err());
    assert!(NetworkConfig { score_hidden: vec![], ..NetworkConfig::default() }.validate().is_ok());
    let cfg = NetworkConfig::default();
    assert!(ScoreNetworkParams::from_values(&cfg, vec![0.0; 3]).is_err());
    let mut v = vec![0.0; cfg.param_count()];
    v[7] = f64::NAN;
    assert!(ScoreNetworkParams::from_values(&cfg, v).is_err());
}

#[test]
fn too_few_points_rejected() {
    let cfg = NetworkConfig { graph_k: 4, block_widths: vec![3], score_hidden: vec![] };
    let params = randomized(&cfg, 1, 1.0);
    assert!(extract_features(&random_points(4, 0), &params).is_err());
    assert!(extract_features(&random_points(5, 0), &params).is_ok());
}

#[test]
fn tensor_names_cover_layout() {
    let params = ScoreNetworkParams::init(&NetworkConfig::default(), RngSeed(0)).unwrap();
    let t = params.tensors();
    assert_eq!(t.len(), 12);
    assert_eq!(t[0].0, "block0.edge.weight");
    assert_eq!(t[11].0, "score2.bias");
    let mut next = 0;
    for (_, r) in &t {
        assert_eq!(r.start, next);
        next = r.end;
    }
    assert_eq!(next, params.len());
}

#[test]
fn features_are_permutation_equivariant() {
    let cfg = NetworkConfig { graph_k: 4, block_widths: vec![5, 6], score_hidden: vec![3] };
    let params = randomized(&cfg, 7, 0.8);
    let pts = random_points(25, 8);
    let f = extract_features(&pts, &params).unwrap();
    assert_eq!(f, extract_features(&pts, &params).unwrap());
    let mut rng = RngSeed(9).stream(0);
    for _ in 0..5 {
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
        let g = extract_features(&permuted, &params).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(g.row(new), f.row(old));
        }
    }
}

/// Direct evaluation of one edge-convolution block: brute-force neighbours,
/// explicit edge vectors `[h_i, h_j - h_i]`, rectify, then max.
fn reference_block(input: &[Vec<f64>], k: usize, weight: &[f64], bias: &[f64], width: usize) -> Vec<Vec<f64>> {
    let n = input.len();
    let d = input[0].len();
    let mut out = Vec::new();
    for i in 0..n {
        let mut order: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (input[i].iter().zip(&input[j]).map(|(a, b)| (a - b) * (a - b)).sum(), j))
            .collect();
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut row = vec![f64::NEG_INFINITY; width];
        for &(_, j) in &order[..k] {
            let mut edge = input[i].clone();
            edge.extend(input[j].iter().zip(&input[i]).map(|(hj, hi)| hj - hi));
            for c in 0..width {
                let mut v = bias[c];
                for t in 0..2 * d {
                    v += weight[c * 2 * d + t] * edge[t];
                }
                row[c] = row[c].max(v.max(0.0));
            }
        }
        out.push(row);
    }
    out
}

#[test]
fn single_block_matches_reference() {
    let cfg = NetworkConfig { graph_k: 2, block_widths: vec![2], score_hidden: vec![] };
    let pts = vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 2.0, 0.0), p(0.5, 0.5, 1.0)];
    let mut values = vec![0.0; cfg.param_count()];
    let layer = cfg.layout().blocks[0];
    let weight = [0.3, -0.2, 0.5, 1.0, 0.25, -0.75, -0.4, 0.6, 0.1, -0.5, 0.8, 0.2];
    values[layer.weight_range()].copy_from_slice(&weight);
    values[layer.bias_range()].copy_from_slice(&[0.05, -0.1]);
    let params = ScoreNetworkParams::from_values(&cfg, values).unwrap();
    let f = extract_features(&pts, &params).unwrap();
    let input: Vec<Vec<f64>> = pts.iter().map(|q| q.to_array().to_vec()).collect();
    let expect = reference_block(&input, 2, &weight, &[0.05, -0.1], 2);
    for i in 0..4 {
        for c in 0..2 {
            assert!((f.row(i)[c] - expect[i][c]).abs() < 1e-12, "point {i} channel {c}");
        }
    }
    assert!(f.as_slice().iter().any(|&v| v > 0.0));
}

#[test]
fn stacked_blocks_match_reference() {
    let cfg = NetworkConfig { graph_k: 3, block_widths: vec![4, 3], score_hidden: vec![2] };
    let params = randomized(&cfg, 21, 0.7);
    let pts = random_points(12, 22);
    let f = extract_features(&pts, &params).unwrap();
    let vals = params.values();
    let mut input: Vec<Vec<f64>> = pts.iter().map(|q| q.to_array().to_vec()).collect();
    let mut col = 0;
    for (b, layer) in params.layout().blocks.iter().enumerate() {
        let out = reference_block(&input, 3, &vals[layer.weight_range()], &vals[layer.bias_range()], layer.rows);
        for i in 0..12 {
            for c in 0..layer.rows {
                assert!((f.row(i)[col + c] - out[i][c]).abs() < 1e-12, "block {b}");
            }
        }
        col += layer.rows;
        input = out;
    }
}

#[test]
fn hand_computed_mlp() {
    let cfg = NetworkConfig { graph_k: 1, block_widths: vec![1], score_hidden: vec![2] };
    let layout = cfg.layout();
    let mut values = vec![0.0; cfg.param_count()];
    let (l0, l1) = (layout.score[0], layout.score[1]);
    values[l0.weight_range()].copy_from_slice(&[1.0, 0.0, -1.0, 2.0, 0.5, 1.0, 0.0, -1.0]);
    values[l0.bias_range()].copy_from_slice(&[0.1, -0.2]);
    values[l1.weight_range()].copy_from_slice(&[1.0, 2.0, 3.0, -1.0, 0.0, 0.5]);
    values[l1.bias_range()].copy_from_slice(&[0.0, 1.0, -1.0]);
    let params = ScoreNetworkParams::from_values(&cfg, values).unwrap();
    let features = FeatureSet::from_rows(1, vec![0.5]).unwrap();
    // r = (1, 2, 3), h = 0.5:
    // hidden = relu([1 - 3 + 1 + 0.1, 0.5 + 2 - 0.5 - 0.2]) = [0, 1.8]
    // out = [2 * 1.8, -1.8 + 1, 0.5 * 1.8 - 1] = [3.6, -0.8, -0.1]
    let s = params.score(p(1.5, 2.0, 3.5), 0, &features, &[p(0.5, 0.0, 0.5)]);
    let expect = p(3.6, -0.8, -0.1);
    assert!((s - expect).norm() < 1e-12, "{s:?}");
}

#[test]
fn score_depends_on_relative_position_only() {
    let cfg = NetworkConfig { graph_k: 3, block_widths: vec![4, 4], score_hidden: vec![8] };
    let params = randomized(&cfg, 30, 0.5);
    // eighth-integer coordinates keep every difference exact
    let mut rng = RngSeed(31).stream(0);
    let grid = |rng: &mut rand_chacha::ChaCha20Rng| rng.random_range(-16i32..16) as f64 / 8.0;
    let anchors: Vec<Point3> = (0..10).map(|_| p(grid(&mut rng), grid(&mut rng), grid(&mut rng))).collect();
    let features = extract_features(&anchors, &params).unwrap();
    let shift = p(3.125, -7.5, 0.25);
    let moved: Vec<Point3> = anchors.iter().map(|&a| a + shift).collect();
    for i in 0..10 {
        let x = p(grid(&mut rng), grid(&mut rng), grid(&mut rng));
        let a = params.score(x, i, &features, &anchors);
        let b = params.score(x + shift, i, &features, &moved);
        assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
        assert_ne!(a, Point3::ZERO);
    }
}

fn training_pair(n: usize, seed: u64) -> TrainingPair {
    let clean = random_points(n, seed);
    TrainingPair::synthesize(&clean, 0.05, RngSeed(seed + 1)).unwrap()
}

/// Central differences of the patch loss against the reverse pass. Returns
/// the worst relative error, with errors measured against
/// `max(|analytic|, |numeric|, 1e-6)`.
fn gradient_error(cfg: &NetworkConfig, seed: u64) -> f64 {
    let params = randomized(cfg, seed, 0.6);
    let pair = training_pair(14, seed + 10);
    let tcfg = TrainConfig { anchors_per_patch: 6, samples_per_anchor: 2, ..TrainConfig::default() };
    let loss_seed = RngSeed(seed + 20);
    let mut grad = vec![0.0; params.len()];
    patch_loss_and_grad(&pair, &params, &tcfg, loss_seed, &mut grad).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let mut plus = params.clone();
        plus.values_mut()[k] += h;
        let mut minus = params.clone();
        minus.values_mut()[k] -= h;
        let fd = (patch_loss(&pair, &plus, &tcfg, loss_seed).unwrap()
            - patch_loss(&pair, &minus, &tcfg, loss_seed).unwrap())
            / (2.0 * h);
        let denom = grad[k].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((grad[k] - fd).abs() / denom);
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let cfgs = [
        NetworkConfig { graph_k: 3, block_widths: vec![3, 4], score_hidden: vec![5] },
        NetworkConfig { graph_k: 4, block_widths: vec![4], score_hidden: vec![3, 3] },
        NetworkConfig { graph_k: 2, block_widths: vec![2, 3, 2], score_hidden: vec![4] },
    ];
    for (i, cfg) in cfgs.iter().enumerate() {
        let err = gradient_error(cfg, 100 + i as u64);
        assert!(err < 1e-4, "config {i}: relative error {err}");
    }
}

#[test]
fn zero_loss_has_zero_gradient() {
    let cfg = NetworkConfig { graph_k: 3, block_widths: vec![3, 4], score_hidden: vec![5] };
    let params = ScoreNetworkParams::init(&cfg, RngSeed(1)).unwrap();
    let pts = random_points(20, 2);
    // clean == noisy and point-only: every target is zero, as is the output
    let pair = TrainingPair::new(&pts, pts.clone(), 0.0).unwrap();
    let tcfg = TrainConfig { loss: LossVariant::PointOnly, anchors_per_patch: 10, ..TrainConfig::default() };
    let mut grad = vec![0.0; params.len()];
    let loss = patch_loss_and_grad(&pair, &params, &tcfg, RngSeed(3), &mut grad).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn dead_block_gets_zero_gradient() {
    let cfg = NetworkConfig { graph_k: 3, block_widths: vec![3, 2], score_hidden: vec![4] };
    let mut params = randomized(&cfg, 5, 0.5);
    // the last block can never activate, so its weights and the first score
    // layer's columns reading it are unused
    let last = params.layout().blocks[1];
    for b in &mut params.values_mut()[last.bias_range()] {
        *b = -1e3;
    }
    let pair = training_pair(16, 6);
    let tcfg = TrainConfig { anchors_per_patch: 8, samples_per_anchor: 3, ..TrainConfig::default() };
    let mut grad = vec![0.0; params.len()];
    patch_loss_and_grad(&pair, &params, &tcfg, RngSeed(7), &mut grad).unwrap();
    assert!(grad[last.weight_range()].iter().all(|&g| g == 0.0));
    assert!(grad[last.bias_range()].iter().all(|&g| g == 0.0));
    let l0 = params.layout().score[0];
    for r in 0..l0.rows {
        let row = l0.weight + r * l0.cols;
        // columns: 3 relative coordinates, then block 0 (3), then block 1 (2)
        assert_eq!(&grad[row + 6..row + 8], &[0.0, 0.0]);
    }
    assert!(grad.iter().any(|&g| g != 0.0));
}
