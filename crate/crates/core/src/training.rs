//! Score-matching objective and optimizer loop.
//!
//! The target score at `x` is the vector to the nearest clean point,
//! `s(x) = NN(x, Y) - x`. For each anchor `x_i` of a noisy patch the
//! network's localized score `S_i` is regressed onto `s` at points drawn
//! from an isotropic Gaussian around `x_i`, with std equal to the noise
//! level of the pair. Anchor losses are averaged over the patch.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::network::{FeatureTape, NetworkConfig, ScoreNetworkParams, ScoreScratch};
use crate::noise::normal3;
use crate::patch::extract_patches;
use crate::rng::RngSeed;
use crate::spatial::SpatialIndex;
use crate::{normalize_unit_sphere, Error, Point3, PointCloud, Result};

/// `NN(x, Y) - x`.
pub fn ground_truth_score(x: Point3, clean: &SpatialIndex) -> Point3 {
    clean.points()[clean.nearest(x)] - x
}

/// `m` i.i.d. draws from `N(center, std^2 I)`.
pub fn sample_neighborhood(center: Point3, std: f64, m: usize, seed: RngSeed) -> Result<Vec<Point3>> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::invalid("neighbourhood std must be finite and non-negative"));
    }
    if m == 0 {
        return Err(Error::invalid("neighbourhood sample count must be at least 1"));
    }
    let mut rng = seed.stream(0);
    Ok((0..m).map(|_| center + normal3(&mut rng) * std).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossVariant {
    /// Regress `S_i` on Gaussian samples around `x_i`.
    #[default]
    Neighborhood,
    /// Regress `S_i` at `x_i` only.
    PointOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Noise std range, relative to the shape's bounding radius.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Neighbourhood samples per anchor.
    pub samples_per_anchor: usize,
    pub anchors_per_patch: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub loss: LossVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sigma_min: 0.005,
            sigma_max: 0.02,
            samples_per_anchor: 8,
            anchors_per_patch: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            iterations: 2000,
            loss: LossVariant::Neighborhood,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max && self.sigma_max <= 0.1) {
            return Err(Error::invalid("noise range must satisfy 0 < sigma_min <= sigma_max <= 0.1"));
        }
        if self.samples_per_anchor == 0 || self.anchors_per_patch == 0 {
            return Err(Error::invalid("sample and anchor counts must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::invalid("moment decay rates must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        Ok(())
    }
}

/// A clean patch, its noisy counterpart (same order), and the noise std,
/// all expressed in the noisy patch's normalized frame.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    clean: SpatialIndex,
    noisy: Vec<Point3>,
    sigma: f64,
}

impl TrainingPair {
    pub fn new(clean: &[Point3], noisy: Vec<Point3>, sigma: f64) -> Result<Self> {
        if clean.len() != noisy.len() {
            return Err(Error::invalid("clean and noisy patches differ in size"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("noise std must be finite and non-negative"));
        }
        if noisy.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("noisy patch has a non-finite point"));
        }
        Ok(TrainingPair { clean: SpatialIndex::from_points(clean)?, noisy, sigma })
    }

    /// Corrupts `clean` with isotropic Gaussian noise of std `sigma` and
    /// moves both into the noisy patch's normalized frame, the frame the
    /// network sees at inference.
    pub fn synthesize(clean: &[Point3], sigma: f64, seed: RngSeed) -> Result<Self> {
        let mut rng = seed.stream(0);
        let noisy = PointCloud::new(clean.iter().map(|&p| p + normal3(&mut rng) * sigma).collect())?;
        let (noisy, t) = normalize_unit_sphere(&noisy);
        let clean: Vec<Point3> = clean.iter().map(|&p| t.apply(p)).collect();
        TrainingPair::new(&clean, noisy.into_points(), sigma / t.scale)
    }

    pub fn clean(&self) -> &SpatialIndex {
        &self.clean
    }

    pub fn noisy(&self) -> &[Point3] {
        &self.noisy
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Mean squared error of one anchor's predictions.
pub fn anchor_loss(targets: &[Point3], predictions: &[Point3]) -> f64 {
    let sum: f64 = targets.iter().zip(predictions).map(|(&t, &p)| (t - p).norm_sq()).sum();
    sum / targets.len() as f64
}

/// Patch loss from per-anchor losses.
pub fn aggregate_loss(anchor_losses: &[f64]) -> f64 {
    anchor_losses.iter().sum::<f64>() / anchor_losses.len() as f64
}

/// Anchors and their query points for one loss evaluation.
struct LossSamples {
    anchors: Vec<usize>,
    /// `per_anchor` query points per anchor, anchor-major.
    queries: Vec<Point3>,
    per_anchor: usize,
}

fn draw_samples(pair: &TrainingPair, cfg: &TrainConfig, seed: RngSeed) -> LossSamples {
    let n = pair.noisy.len();
    let count = cfg.anchors_per_patch.min(n);
    let mut anchor_rng = seed.stream(0);
    let anchors = rand::seq::index::sample(&mut anchor_rng, n, count).into_vec();
    let mut sample_rng = seed.stream(1);
    let (per_anchor, mut queries) = match cfg.loss {
        LossVariant::PointOnly => (1, Vec::with_capacity(count)),
        LossVariant::Neighborhood => {
            let m = cfg.samples_per_anchor;
            (m, Vec::with_capacity(count * m))
        }
    };
    for &i in &anchors {
        let x = pair.noisy[i];
        match cfg.loss {
            LossVariant::PointOnly => queries.push(x),
            LossVariant::Neighborhood => {
                for _ in 0..per_anchor {
                    queries.push(x + normal3(&mut sample_rng) * pair.sigma);
                }
            }
        }
    }
    LossSamples { anchors, queries, per_anchor }
}

fn loss_impl(
    pair: &TrainingPair,
    params: &ScoreNetworkParams,
    cfg: &TrainConfig,
    seed: RngSeed,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let tape = FeatureTape::record(&pair.noisy, params)?;
    let features = tape.features();
    let samples = draw_samples(pair, cfg, seed);
    let m = samples.per_anchor;
    let scale = 2.0 / (samples.anchors.len() * m) as f64;

    let mut scratch = ScoreScratch::new(params);
    let mut anchor_losses = Vec::with_capacity(samples.anchors.len());
    let mut targets = vec![Point3::ZERO; m];
    let mut preds = vec![Point3::ZERO; m];
    let mut grad = grad;
    let ctx_width = params.layout().score[0].rows;
    let mut d_ctx = vec![0.0; ctx_width];
    let mut d_features = grad.as_ref().map(|_| vec![0.0; features.as_slice().len()]);

    for (a, &i) in samples.anchors.iter().enumerate() {
        let xi = pair.noisy[i];
        let h = features.row(i);
        let ctx = params.anchor_context(h);
        d_ctx.fill(0.0);
        for s in 0..m {
            let x = samples.queries[a * m + s];
            let rel = x - xi;
            targets[s] = ground_truth_score(x, &pair.clean);
            preds[s] = params.score_with_context(rel, &ctx, &mut scratch);
            if let Some(g) = grad.as_deref_mut() {
                let d_out = (preds[s] - targets[s]) * scale;
                params.head_backward(rel, &mut scratch, d_out, g, &mut d_ctx);
            }
        }
        anchor_losses.push(anchor_loss(&targets, &preds));
        if let (Some(g), Some(df)) = (grad.as_deref_mut(), d_features.as_mut()) {
            let dim = features.dim();
            params.context_backward(h, &d_ctx, g, &mut df[i * dim..(i + 1) * dim]);
        }
    }
    if let (Some(g), Some(df)) = (grad, d_features) {
        tape.backward(params, &df, g);
    }
    Ok(aggregate_loss(&anchor_losses))
}

/// The score-matching loss of one training pair.
pub fn patch_loss(pair: &TrainingPair, params: &ScoreNetworkParams, cfg: &TrainConfig, seed: RngSeed) -> Result<f64> {
    loss_impl(pair, params, cfg, seed, None)
}

/// [`patch_loss`], also adding its parameter gradient into `grad`.
pub fn patch_loss_and_grad(
    pair: &TrainingPair,
    params: &ScoreNetworkParams,
    cfg: &TrainConfig,
    seed: RngSeed,
    grad: &mut [f64],
) -> Result<f64> {
    if grad.len() != params.len() {
        return Err(Error::invalid("gradient buffer does not match the parameter count"));
    }
    loss_impl(pair, params, cfg, seed, Some(grad))
}

/// Adaptive moment estimation.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= self.lr * mh / (libm::sqrt(vh) + self.epsilon);
        }
    }
}

/// Clean training patches from one shape: the cloud is normalized to the
/// unit sphere and split as for denoising. Patches stay in the shape frame
/// so the noise range is relative to the shape's bounding radius.
pub fn patch_dataset(cloud: &PointCloud, patch_size: usize, coverage: f64) -> Result<Vec<PointCloud>> {
    let (shape, _) = normalize_unit_sphere(cloud);
    extract_patches(&shape, patch_size, coverage)?.iter().map(|p| shape.select(&p.indices)).collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final weights, rounded to single precision.
    pub params: ScoreNetworkParams,
    /// Loss of every step, in order.
    pub losses: Vec<f64>,
}

/// Trains from scratch. See [`train_with_progress`].
pub fn train(
    dataset: &[PointCloud],
    cfg: &TrainConfig,
    net_cfg: &NetworkConfig,
    seed: RngSeed,
) -> Result<TrainOutcome> {
    train_with_progress(dataset, cfg, net_cfg, seed, |_, _| {})
}

/// Runs `cfg.iterations` optimizer steps, one patch per step, calling
/// `progress(step, loss)` after each. Everything random derives from
/// `seed`, so repeated runs produce identical weights.
pub fn train_with_progress(
    dataset: &[PointCloud],
    cfg: &TrainConfig,
    net_cfg: &NetworkConfig,
    seed: RngSeed,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    net_cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training needs at least one patch"));
    }
    if let Some(p) = dataset.iter().find(|p| p.len() <= net_cfg.graph_k) {
        return Err(Error::invalid(alloc::format!(
            "training patch of {} points is too small for graph_k = {}",
            p.len(),
            net_cfg.graph_k
        )));
    }
    let mut params = ScoreNetworkParams::init(net_cfg, seed.derive(u64::MAX))?;
    let mut adam = Adam::new(params.len(), cfg);
    let mut grad = vec![0.0; params.len()];
    let mut losses = Vec::with_capacity(cfg.iterations);

    for step in 0..cfg.iterations {
        let step_seed = seed.derive(step as u64);
        let mut rng = step_seed.stream(0);
        let patch = &dataset[rng.random_range(0..dataset.len())];
        let sigma =
            if cfg.sigma_min == cfg.sigma_max { cfg.sigma_min } else { rng.random_range(cfg.sigma_min..cfg.sigma_max) };
        let pair = TrainingPair::synthesize(patch.points(), sigma, step_seed.derive(1))?;
        grad.fill(0.0);
        let loss = patch_loss_and_grad(&pair, &params, cfg, step_seed.derive(2), &mut grad)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step });
        }
        adam.step(params.values_mut(), &grad);
        if params.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { step });
        }
        losses.push(loss);
        progress(step, loss);
    }
    params.round_to_f32();
    Ok(TrainOutcome { params, losses })
}

/// Trailing moving average of `values` over `window` entries, ending at
/// `end` (inclusive).
pub fn smoothed(values: &[f64], end: usize, window: usize) -> f64 {
    let start = (end + 1).saturating_sub(window);
    let slice = &values[start..=end];
    slice.iter().sum::<f64>() / slice.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{primitives, sample_surface, SamplingConfig, SamplingMethod};

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn ground_truth_examples() {
        let one = SpatialIndex::from_points(&[Point3::ZERO]).unwrap();
        assert_eq!(ground_truth_score(p(1.0, 0.0, 0.0), &one), p(-1.0, 0.0, 0.0));
        assert_eq!(ground_truth_score(Point3::ZERO, &one), Point3::ZERO);
        let two = SpatialIndex::from_points(&[Point3::ZERO, p(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(ground_truth_score(p(0.9, 0.0, 0.0), &two), p(-0.9, 0.0, 0.0));
    }

    #[test]
    fn neighborhood_samples() {
        let c = p(0.5, -1.0, 2.0);
        assert!(sample_neighborhood(c, 0.0, 5, RngSeed(1)).unwrap().iter().all(|&q| q == c));
        let a = sample_neighborhood(c, 0.3, 100_000, RngSeed(2)).unwrap();
        assert_eq!(a, sample_neighborhood(c, 0.3, 100_000, RngSeed(2)).unwrap());
        let mean = a.iter().fold(Point3::ZERO, |s, &q| s + q) / a.len() as f64;
        // 5 standard errors of the mean
        let tol = 5.0 * 0.3 / libm::sqrt(a.len() as f64);
        for axis in 0..3 {
            assert!((mean.axis(axis) - c.axis(axis)).abs() < tol);
        }
        assert!(sample_neighborhood(c, -1.0, 1, RngSeed(0)).is_err());
        assert!(sample_neighborhood(c, 1.0, 0, RngSeed(0)).is_err());
    }

    #[test]
    fn loss_aggregation() {
        assert_eq!(anchor_loss(&[p(1.0, 0.0, 0.0)], &[Point3::ZERO]), 1.0);
        assert_eq!(aggregate_loss(&[1.0, 3.0]), 2.0);
        let t = [p(1.0, 2.0, 3.0), p(-1.0, 0.5, 0.0)];
        assert_eq!(anchor_loss(&t, &t), 0.0);
    }

    fn sphere_patch(n: usize, seed: u64) -> PointCloud {
        let mesh = primitives::uv_sphere(16, 32);
        let cloud = sample_surface(&mesh, &SamplingConfig::new(n, SamplingMethod::UniformArea), RngSeed(seed)).unwrap();
        normalize_unit_sphere(&cloud).0
    }

    fn small_net() -> NetworkConfig {
        NetworkConfig { graph_k: 6, block_widths: vec![8, 8], score_hidden: vec![16] }
    }

    #[test]
    fn zero_network_loss_is_mean_squared_target() {
        let clean = sphere_patch(200, 3);
        let pair = TrainingPair::synthesize(clean.points(), 0.02, RngSeed(4)).unwrap();
        let params = ScoreNetworkParams::init(&small_net(), RngSeed(5)).unwrap();
        let cfg = TrainConfig { anchors_per_patch: 50, samples_per_anchor: 3, ..TrainConfig::default() };
        let loss = patch_loss(&pair, &params, &cfg, RngSeed(6)).unwrap();
        let s = draw_samples(&pair, &cfg, RngSeed(6));
        let per_anchor: Vec<f64> = s
            .queries
            .chunks(3)
            .map(|q| q.iter().map(|&x| ground_truth_score(x, pair.clean()).norm_sq()).sum::<f64>() / 3.0)
            .collect();
        assert_eq!(loss, aggregate_loss(&per_anchor));
        assert!(loss > 0.0);
    }

    #[test]
    fn point_only_is_special_case() {
        let clean = sphere_patch(120, 7);
        let pair = TrainingPair::synthesize(clean.points(), 0.01, RngSeed(8)).unwrap();
        let mut params = ScoreNetworkParams::init(&small_net(), RngSeed(9)).unwrap();
        // nonzero output layer
        let last = *params.layout().score.last().unwrap();
        let mut rng = RngSeed(10).stream(0);
        for w in &mut params.values_mut()[last.weight_range()] {
            *w = rng.random_range(-0.5..0.5);
        }
        let zero_std = TrainingPair::new(pair.clean().points(), pair.noisy().to_vec(), 0.0).unwrap();
        let neigh = TrainConfig { samples_per_anchor: 1, anchors_per_patch: 40, ..TrainConfig::default() };
        let point = TrainConfig { loss: LossVariant::PointOnly, ..neigh.clone() };
        let mut g1 = vec![0.0; params.len()];
        let mut g2 = vec![0.0; params.len()];
        let a = patch_loss_and_grad(&zero_std, &params, &neigh, RngSeed(11), &mut g1).unwrap();
        let b = patch_loss_and_grad(&zero_std, &params, &point, RngSeed(11), &mut g2).unwrap();
        assert_eq!(a, b);
        assert_eq!(g1, g2);
    }

    #[test]
    fn synthesized_pair_frames() {
        let clean = sphere_patch(300, 12);
        let pair = TrainingPair::synthesize(clean.points(), 0.02, RngSeed(13)).unwrap();
        let noisy = PointCloud::new(pair.noisy().to_vec()).unwrap();
        let (_, t) = normalize_unit_sphere(&noisy);
        assert!(t.center.norm() < 1e-12);
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(pair.sigma() > 0.015 && pair.sigma() < 0.025);
    }

    #[test]
    fn training_is_deterministic_and_descends() {
        let data = vec![sphere_patch(150, 14)];
        let cfg =
            TrainConfig { iterations: 500, anchors_per_patch: 32, samples_per_anchor: 4, ..TrainConfig::default() };
        let a = train(&data, &cfg, &small_net(), RngSeed(15)).unwrap();
        assert!(smoothed(&a.losses, 499, 50) < smoothed(&a.losses, 49, 50));
        let short = TrainConfig { iterations: 20, ..cfg };
        let b = train(&data, &short, &small_net(), RngSeed(16)).unwrap();
        let c = train(&data, &short, &small_net(), RngSeed(16)).unwrap();
        assert_eq!(b.params, c.params);
        assert_eq!(b.losses, c.losses);
    }

    #[test]
    fn rejects_bad_inputs() {
        let tiny = vec![PointCloud::new(vec![Point3::ZERO; 4]).unwrap()];
        assert!(train(&tiny, &TrainConfig::default(), &small_net(), RngSeed(0)).is_err());
        assert!(train(&[], &TrainConfig::default(), &small_net(), RngSeed(0)).is_err());
        let bad = TrainConfig { sigma_min: 0.05, sigma_max: 0.01, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        assert!(TrainConfig { samples_per_anchor: 0, ..TrainConfig::default() }.validate().is_err());
    }

    #[test]
    fn moving_average() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(smoothed(&v, 3, 2), 3.5);
        assert_eq!(smoothed(&v, 0, 50), 1.0);
    }
}
