//! Denoising by gradient ascent on an ensemble score.
//!
//! A cloud is normalized, split into overlapping patches, and every patch is
//! moved into its own normalized frame. A [`ScoreModel`] turns the patch into
//! a field of localized scores `S_j`, computed once from the input positions.
//! Each point then climbs the ensemble score
//! `E_i(x) = mean_{j in kNN(x_i)} S_j(x)` with step sizes `alpha_t`, where
//! the neighbourhood is fixed at the input positions. Every point takes its
//! result from the patch whose seed is nearest to it.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::network::{extract_features, AnchorContext, ScoreNetworkParams, ScoreScratch};
use crate::noise::{perturb, NoiseModel};
use crate::patch::{extract_patches, Patch};
use crate::rng::RngSeed;
use crate::spatial::SpatialIndex;
use crate::{normalize_unit_sphere, Error, NormalizationTransform, Point3, PointCloud, Result};

/// Step sizes `alpha_t = alpha1 * gamma^(t-1)` for `t = 1..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    alpha1: f64,
    gamma: f64,
    steps: usize,
}

impl StepSchedule {
    /// Requires `0 < alpha1 < 1`, `0 < gamma <= 1` and `steps >= 1`.
    pub fn new(alpha1: f64, gamma: f64, steps: usize) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha1 < 1.0) {
            return Err(Error::invalid("alpha1 must lie in (0, 1)"));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid("gamma must lie in (0, 1]; step sizes may not grow"));
        }
        if steps == 0 {
            return Err(Error::invalid("at least one ascent step is required"));
        }
        Ok(StepSchedule { alpha1, gamma, steps })
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn alphas(&self) -> Vec<f64> {
        let mut a = self.alpha1;
        (0..self.steps)
            .map(|_| {
                let cur = a;
                a *= self.gamma;
                cur
            })
            .collect()
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule { alpha1: 0.2, gamma: 0.95, steps: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DenoiseMode {
    #[default]
    GradientAscent,
    /// One update `x_i + E_i(x_i)`.
    DirectDisplacement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseConfig {
    /// Anchors averaged in the ensemble score.
    pub ensemble_k: usize,
    pub schedule: StepSchedule,
    pub patch_size: usize,
    /// Average number of patches covering each point.
    pub coverage: f64,
    pub mode: DenoiseMode,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            ensemble_k: 4,
            schedule: StepSchedule::default(),
            patch_size: 1000,
            coverage: 3.0,
            mode: DenoiseMode::GradientAscent,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_k == 0 {
            return Err(Error::invalid("ensemble size must be at least 1"));
        }
        if self.patch_size == 0 {
            return Err(Error::invalid("patch size must be at least 1"));
        }
        if !(self.coverage > 0.0 && self.coverage.is_finite()) {
            return Err(Error::invalid("coverage must be positive"));
        }
        // re-check in case the schedule was built by hand
        StepSchedule::new(self.schedule.alpha1, self.schedule.gamma, self.schedule.steps)?;
        Ok(())
    }
}

/// A patch in its normalized frame, with the transform taking the input
/// cloud's frame into it.
#[derive(Debug, Clone, Copy)]
pub struct PatchView<'a> {
    pub points: &'a [Point3],
    pub to_patch: NormalizationTransform,
}

/// Localized score functions `S_j` for the anchors of one patch.
pub trait LocalScoreField {
    fn anchor_count(&self) -> usize;

    fn localized_score(&mut self, anchor: usize, x: Point3) -> Point3;

    /// `(1/K) sum_j S_j(x)` over `members`.
    fn ensemble_score(&mut self, x: Point3, members: &[usize]) -> Point3 {
        let mut acc = Point3::ZERO;
        for &j in members {
            acc += self.localized_score(j, x);
        }
        acc / members.len() as f64
    }
}

/// Anything that can produce a score field for a normalized patch.
pub trait ScoreModel {
    type Field<'a>: LocalScoreField
    where
        Self: 'a;

    /// Smallest patch the model accepts.
    fn min_patch_points(&self) -> usize;

    fn build_field<'a>(&'a self, patch: &PatchView<'_>) -> Result<Self::Field<'a>>;
}

/// The network's field: per-anchor features are frozen at the input
/// positions.
pub struct NetworkField<'a> {
    params: &'a ScoreNetworkParams,
    anchors: Vec<Point3>,
    contexts: Vec<AnchorContext>,
    scratch: ScoreScratch,
}

impl LocalScoreField for NetworkField<'_> {
    fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    fn localized_score(&mut self, anchor: usize, x: Point3) -> Point3 {
        self.params.score_with_context(x - self.anchors[anchor], &self.contexts[anchor], &mut self.scratch)
    }
}

impl ScoreModel for ScoreNetworkParams {
    type Field<'a> = NetworkField<'a>;

    fn min_patch_points(&self) -> usize {
        self.config().graph_k + 1
    }

    fn build_field<'a>(&'a self, patch: &PatchView<'_>) -> Result<NetworkField<'a>> {
        let features = extract_features(patch.points, self)?;
        let contexts = (0..features.len()).map(|i| self.anchor_context(features.row(i))).collect();
        Ok(NetworkField { params: self, anchors: patch.points.to_vec(), contexts, scratch: ScoreScratch::new(self) })
    }
}

/// A field that ignores the anchor, e.g. an analytic score.
pub struct UniformField<F>(pub F);

impl<F: FnMut(Point3) -> Point3> LocalScoreField for UniformField<F> {
    fn anchor_count(&self) -> usize {
        usize::MAX
    }

    fn localized_score(&mut self, _anchor: usize, x: Point3) -> Point3 {
        (self.0)(x)
    }

    fn ensemble_score(&mut self, x: Point3, _members: &[usize]) -> Point3 {
        (self.0)(x)
    }
}

/// Ensemble members for every point: the point itself, then its `k - 1`
/// nearest other points. Flattened with stride `k`.
pub fn ensemble_members(points: &[Point3], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(alloc::format!("ensemble size {k} must lie in 1..={}", points.len())));
    }
    let mut out = Vec::with_capacity(points.len() * k);
    if k == 1 {
        out.extend(0..points.len());
        return Ok(out);
    }
    let index = SpatialIndex::from_points(points)?;
    for (i, &p) in points.iter().enumerate() {
        out.push(i);
        out.extend(index.knn_excluding(p, k - 1, i)?);
    }
    Ok(out)
}

fn check_update(p: Point3, point: usize, step: usize) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteUpdate { point, step })
    }
}

/// `x_i^(t) = x_i^(t-1) + alpha_t E_i(x_i^(t-1))`, all points in lockstep.
/// Row `i` of `members` (stride `k`) lists the anchors whose scores form
/// `E_i`, usually from [`ensemble_members`].
pub fn gradient_ascent<F: LocalScoreField + ?Sized>(
    points: &[Point3],
    field: &mut F,
    members: &[usize],
    k: usize,
    schedule: &StepSchedule,
) -> Result<Vec<Point3>> {
    let n = points.len();
    assert_eq!(members.len(), n * k, "ensemble member table has the wrong size");
    let mut cur = points.to_vec();
    let mut step = vec![Point3::ZERO; n];
    for (t, alpha) in schedule.alphas().into_iter().enumerate() {
        for i in 0..n {
            step[i] = field.ensemble_score(cur[i], &members[i * k..(i + 1) * k]);
        }
        for i in 0..n {
            let next = cur[i] + step[i] * alpha;
            check_update(next, i, t + 1)?;
            cur[i] = next;
        }
    }
    Ok(cur)
}

/// `y_i = x_i + E_i(x_i)`.
pub fn direct_displacement<F: LocalScoreField + ?Sized>(
    points: &[Point3],
    field: &mut F,
    members: &[usize],
    k: usize,
) -> Result<Vec<Point3>> {
    assert_eq!(members.len(), points.len() * k, "ensemble member table has the wrong size");
    points
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let y = x + field.ensemble_score(x, &members[i * k..(i + 1) * k]);
            check_update(y, i, 1)?;
            Ok(y)
        })
        .collect()
}

/// `outer` followed by `inner`.
fn compose(outer: &NormalizationTransform, inner: &NormalizationTransform) -> NormalizationTransform {
    NormalizationTransform { center: outer.center + inner.center * outer.scale, scale: outer.scale * inner.scale }
}

struct Plan {
    normalized: PointCloud,
    transform: NormalizationTransform,
    patches: Vec<Patch>,
    /// For every point, the owning patch and the point's position in it.
    owner: Vec<(usize, usize)>,
}

fn plan(cloud: &PointCloud, min_points: usize, cfg: &DenoiseConfig) -> Result<Plan> {
    cfg.validate()?;
    let n = cloud.len();
    if n < min_points {
        return Err(Error::invalid(alloc::format!("the model needs at least {min_points} points, got {n}")));
    }
    let patch_len = cfg.patch_size.min(n);
    if patch_len < min_points {
        return Err(Error::invalid(alloc::format!(
            "patch size {patch_len} is below the model's minimum of {min_points}"
        )));
    }
    if cfg.ensemble_k > patch_len {
        return Err(Error::invalid(alloc::format!(
            "ensemble size {} exceeds the patch size {patch_len}",
            cfg.ensemble_k
        )));
    }
    let (normalized, transform) = normalize_unit_sphere(cloud);
    let patches = extract_patches(&normalized, cfg.patch_size, cfg.coverage)?;
    let mut owner = vec![(usize::MAX, 0); n];
    let mut best = vec![f64::INFINITY; n];
    for (pi, patch) in patches.iter().enumerate() {
        let seed = normalized[patch.seed];
        for (pos, &i) in patch.indices.iter().enumerate() {
            let d = normalized[i].dist_sq(seed);
            if d < best[i] {
                best[i] = d;
                owner[i] = (pi, pos);
            }
        }
    }
    Ok(Plan { normalized, transform, patches, owner })
}

fn wrap(patch: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Patch { patch, source: Box::new(e) }
}

/// Denoises a whole cloud. Output order matches the input.
///
/// Each point's result is reconstructed from its displacement in the
/// owning patch's frame, so a zero field returns the input unchanged.
pub fn denoise_cloud<M: ScoreModel + ?Sized>(cloud: &PointCloud, model: &M, cfg: &DenoiseConfig) -> Result<PointCloud> {
    let plan = plan(cloud, model.min_patch_points(), cfg)?;
    let k = cfg.ensemble_k;
    let mut out = cloud.points().to_vec();
    for (pi, patch) in plan.patches.iter().enumerate() {
        let owned: Vec<(usize, usize)> = patch
            .indices
            .iter()
            .enumerate()
            .filter(|&(pos, &i)| plan.owner[i] == (pi, pos))
            .map(|(pos, &i)| (pos, i))
            .collect();
        if owned.is_empty() {
            continue;
        }
        let local = patch.local_points(&plan.normalized);
        let view = PatchView { points: &local, to_patch: compose(&plan.transform, &patch.transform) };
        let mut field = model.build_field(&view).map_err(wrap(pi))?;
        let members = ensemble_members(&local, k).map_err(wrap(pi))?;
        // trajectories are independent, so only owned points are moved
        let starts: Vec<Point3> = owned.iter().map(|&(pos, _)| local[pos]).collect();
        let rows: Vec<usize> =
            owned.iter().flat_map(|&(pos, _)| members[pos * k..(pos + 1) * k].iter().copied()).collect();
        let moved = match cfg.mode {
            DenoiseMode::GradientAscent => gradient_ascent(&starts, &mut field, &rows, k, &cfg.schedule),
            DenoiseMode::DirectDisplacement => direct_displacement(&starts, &mut field, &rows, k),
        }
        .map_err(|e| match e {
            Error::NonFiniteUpdate { point, step } => Error::NonFiniteUpdate { point: owned[point].1, step },
            e => e,
        })
        .map_err(wrap(pi))?;
        let scale = view.to_patch.scale;
        for (&(_, i), (&m, &s)) in owned.iter().zip(moved.iter().zip(&starts)) {
            out[i] = cloud[i] + (m - s) * scale;
        }
    }
    PointCloud::new(out)
}

/// Upsampling by denoising: `r` independent Gaussian jitters of the input
/// (std `sigma` times its bounding radius) are concatenated and denoised.
pub fn upsample_via_denoise<M: ScoreModel + ?Sized>(
    cloud: &PointCloud,
    rate: usize,
    sigma: f64,
    model: &M,
    cfg: &DenoiseConfig,
    seed: RngSeed,
) -> Result<PointCloud> {
    let jittered = jitter_copies(cloud, rate, sigma, seed)?;
    denoise_cloud(&jittered, model, cfg)
}

/// The raw input of [`upsample_via_denoise`].
pub fn jitter_copies(cloud: &PointCloud, rate: usize, sigma: f64, seed: RngSeed) -> Result<PointCloud> {
    if rate == 0 {
        return Err(Error::invalid("upsampling rate must be at least 1"));
    }
    let (_, t) = normalize_unit_sphere(cloud);
    let noise = NoiseModel::gaussian(sigma * t.scale);
    let copies = (0..rate).map(|r| perturb(cloud, &noise, seed.derive(r as u64))).collect::<Result<Vec<_>>>()?;
    PointCloud::concat(&copies)
}

/// Samples the ensemble field of `cloud` at `probes`. A probe uses the
/// ensemble of its nearest input point, evaluated in that point's owning
/// patch; vectors are returned in the input frame's units.
pub fn sample_score_field<M: ScoreModel + ?Sized>(
    cloud: &PointCloud,
    model: &M,
    cfg: &DenoiseConfig,
    probes: &[Point3],
) -> Result<Vec<Point3>> {
    let plan = plan(cloud, model.min_patch_points(), cfg)?;
    let k = cfg.ensemble_k;
    let index = SpatialIndex::new(&plan.normalized);
    let mut by_patch: Vec<Vec<(usize, usize)>> = vec![Vec::new(); plan.patches.len()];
    for (qi, &q) in probes.iter().enumerate() {
        let nearest = index.nearest(plan.transform.apply(q));
        let (pi, pos) = plan.owner[nearest];
        by_patch[pi].push((qi, pos));
    }
    let mut out = vec![Point3::ZERO; probes.len()];
    for (pi, queries) in by_patch.iter().enumerate() {
        if queries.is_empty() {
            continue;
        }
        let patch = &plan.patches[pi];
        let local = patch.local_points(&plan.normalized);
        let view = PatchView { points: &local, to_patch: compose(&plan.transform, &patch.transform) };
        let mut field = model.build_field(&view).map_err(wrap(pi))?;
        let members = ensemble_members(&local, k).map_err(wrap(pi))?;
        for &(qi, pos) in queries {
            // mapped in two stages, like the anchors
            let x = patch.transform.apply(plan.transform.apply(probes[qi]));
            out[qi] = field.ensemble_score(x, &members[pos * k..(pos + 1) * k]) * view.to_patch.scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;
    use crate::oracle::PlaneGaussianModel;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    /// Product of `(1 - 0.2 * 0.95^(t-1))` over t = 1..=30, evaluated in
    /// 40-digit arithmetic.
    const PLANE_Z30: f64 = 0.03480072108593628;

    #[test]
    fn schedule_validation() {
        assert!(StepSchedule::new(0.2, 1.05, 30).is_err());
        assert!(StepSchedule::new(1.0, 0.9, 30).is_err());
        assert!(StepSchedule::new(0.0, 0.9, 30).is_err());
        assert!(StepSchedule::new(0.2, 0.9, 0).is_err());
        let s = StepSchedule::new(0.5, 1.0, 3).unwrap();
        assert_eq!(s.alphas(), vec![0.5, 0.5, 0.5]);
        let a = StepSchedule::default().alphas();
        assert!(a.windows(2).all(|w| w[1] <= w[0]));
    }

    struct Table(Vec<Point3>);

    impl LocalScoreField for Table {
        fn anchor_count(&self) -> usize {
            self.0.len()
        }

        fn localized_score(&mut self, anchor: usize, _x: Point3) -> Point3 {
            self.0[anchor]
        }
    }

    #[test]
    fn ensemble_averages() {
        let mut f = Table(vec![p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(2.0, 2.0, 2.0)]);
        assert_eq!(f.ensemble_score(Point3::ZERO, &[0, 1]), p(0.5, 0.5, 0.0));
        assert_eq!(f.ensemble_score(Point3::ZERO, &[2]), p(2.0, 2.0, 2.0));
        let mut c = Table(vec![p(0.1, 0.2, 0.3); 4]);
        assert_eq!(c.ensemble_score(Point3::ZERO, &[0, 1, 2, 3]), p(0.1, 0.2, 0.3) * 4.0 / 4.0);
    }

    #[test]
    fn members_start_with_self() {
        let pts = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(3.0, 0.0, 0.0), p(3.5, 0.0, 0.0)];
        assert_eq!(ensemble_members(&pts, 1).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(ensemble_members(&pts, 2).unwrap(), vec![0, 1, 1, 0, 2, 3, 3, 2]);
        assert!(ensemble_members(&pts, 5).is_err());
    }

    #[test]
    fn plane_recurrence() {
        let plane = PlaneGaussianModel::new(0.1).unwrap();
        let mut field = UniformField(|x| plane.normalized_score(x));
        let start = [p(0.3, -0.2, 1.0)];
        let schedule = StepSchedule::default();
        let mut z = start[0].z;
        for a in schedule.alphas() {
            let next = gradient_ascent(&[p(0.3, -0.2, z)], &mut field, &[0], 1, &StepSchedule::new(a, 1.0, 1).unwrap())
                .unwrap()[0]
                .z;
            assert!(next > 0.0 && next < z);
            z = next;
        }
        let out = gradient_ascent(&start, &mut field, &[0], 1, &schedule).unwrap();
        assert_eq!(out[0].z, z);
        assert!((out[0].z - PLANE_Z30).abs() < 1e-12);
        assert!(out[0].z < 0.1);
        assert_eq!((out[0].x, out[0].y), (0.3, -0.2));
    }

    #[test]
    fn zero_field_is_identity() {
        let pts = [p(0.1, 0.2, 0.3), p(-1.0, 2.0, 0.5)];
        let mut zero = UniformField(|_| Point3::ZERO);
        assert_eq!(gradient_ascent(&pts, &mut zero, &[0, 1], 1, &StepSchedule::default()).unwrap(), pts);
        assert_eq!(direct_displacement(&pts, &mut zero, &[0, 1], 1).unwrap(), pts);
    }

    #[test]
    fn non_finite_update_reports_point_and_step() {
        let pts = [p(0.0, 0.0, 0.0), p(0.0, 0.0, 1.0)];
        let mut blow = UniformField(|x: Point3| if x.z > 0.5 { p(0.0, 0.0, f64::INFINITY) } else { Point3::ZERO });
        let err = gradient_ascent(&pts, &mut blow, &[0, 1], 1, &StepSchedule::default()).unwrap_err();
        assert_eq!(err, Error::NonFiniteUpdate { point: 1, step: 1 });
    }

    #[test]
    fn untrained_network_is_identity() {
        let cfg = NetworkConfig { graph_k: 4, block_widths: vec![4], score_hidden: vec![4] };
        let params = ScoreNetworkParams::init(&cfg, RngSeed(1)).unwrap();
        let mut rng = RngSeed(2).stream(0);
        use rand::Rng;
        let pts: Vec<Point3> = (0..60)
            .map(|_| p(rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0), rng.random_range(5.0..6.0)))
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let dcfg = DenoiseConfig { patch_size: 20, ..DenoiseConfig::default() };
        assert_eq!(denoise_cloud(&cloud, &params, &dcfg).unwrap(), cloud);
        let up = upsample_via_denoise(&cloud, 1, 0.0, &params, &dcfg, RngSeed(3)).unwrap();
        assert_eq!(up, cloud);
        let up = upsample_via_denoise(&cloud, 3, 0.01, &params, &dcfg, RngSeed(3)).unwrap();
        assert_eq!(up.len(), 180);
        let tiny = PointCloud::new(pts_line(4)).unwrap();
        assert!(denoise_cloud(&tiny, &params, &dcfg).is_err());
    }

    fn pts_line(n: usize) -> Vec<Point3> {
        (0..n).map(|i| p(i as f64, 0.0, 0.0)).collect()
    }
}
