use rand::Rng;

use scoredenoise_core::denoise::{denoise_cloud, jitter_copies, upsample_via_denoise, DenoiseConfig, DenoiseMode};
use scoredenoise_core::network::{NetworkConfig, ScoreNetworkParams};
use scoredenoise_core::rng::RngSeed;
use scoredenoise_core::{Point3, PointCloud};

fn small_net() -> NetworkConfig {
    NetworkConfig { graph_k: 6, block_widths: vec![8, 8], score_hidden: vec![16] }
}

/// A network with every parameter random, so no layer is identically zero.
fn random_net(seed: u64) -> ScoreNetworkParams {
    let cfg = small_net();
    let mut rng = RngSeed(seed).stream(0);
    let values = (0..cfg.param_count()).map(|_| rng.random_range(-0.3..0.3)).collect();
    ScoreNetworkParams::from_values(&cfg, values).unwrap()
}

/// 1024 points on a 2^-16 grid, so centroids are exact.
fn dyadic_cloud(seed: u64) -> PointCloud {
    let mut rng = RngSeed(seed).stream(1);
    let q = |v: f64| (v * 65536.0).round() / 65536.0;
    let pts = (0..1024)
        .map(|_| {
            let d = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let d = d / d.norm();
            Point3::new(q(d.x), q(d.y), q(d.z))
        })
        .collect();
    PointCloud::new(pts).unwrap()
}

fn cfg(mode: DenoiseMode) -> DenoiseConfig {
    DenoiseConfig { patch_size: 256, mode, ..DenoiseConfig::default() }
}

#[test]
fn untrained_network_is_identity() {
    let params = ScoreNetworkParams::init(&small_net(), RngSeed(0)).unwrap();
    let cloud = dyadic_cloud(2);
    for mode in [DenoiseMode::GradientAscent, DenoiseMode::DirectDisplacement] {
        let out = denoise_cloud(&cloud, &params, &cfg(mode)).unwrap();
        assert_eq!(out, cloud);
    }
}

#[test]
fn translation_moves_output_rigidly() {
    let params = random_net(3);
    let cloud = dyadic_cloud(4);
    let t = Point3::new(0.5, -0.25, 2.0);
    for mode in [DenoiseMode::GradientAscent, DenoiseMode::DirectDisplacement] {
        let a = denoise_cloud(&cloud, &params, &cfg(mode)).unwrap();
        let b = denoise_cloud(&cloud.translated(t), &params, &cfg(mode)).unwrap();
        let mut moved = 0;
        for ((x, pa), pb) in cloud.points().iter().zip(a.points()).zip(b.points()) {
            // the displacement is bit-identical; adding it to x + t rounds once more
            let ulp = f64::EPSILON * (x.norm() + t.norm() + (*pa - *x).norm());
            assert!((*pb - t - *pa).norm() <= 4.0 * ulp);
            if pa != x {
                moved += 1;
            }
        }
        assert!(moved > 1000, "the field must actually move points");
    }
}

#[test]
fn upsampling_multiplies_the_count() {
    let params = random_net(5);
    let cloud = dyadic_cloud(6);
    let up = upsample_via_denoise(&cloud, 3, 0.01, &params, &cfg(DenoiseMode::GradientAscent), RngSeed(7)).unwrap();
    assert_eq!(up.len(), 3 * cloud.len());
    let raw = jitter_copies(&cloud, 3, 0.01, RngSeed(7)).unwrap();
    assert_eq!(raw.len(), up.len());
    assert_ne!(raw, up);
    assert!(jitter_copies(&cloud, 0, 0.01, RngSeed(7)).is_err());
}

#[test]
fn too_small_inputs_rejected() {
    let params = ScoreNetworkParams::init(&small_net(), RngSeed(0)).unwrap();
    let tiny = PointCloud::new(dyadic_cloud(8).points()[..5].to_vec()).unwrap();
    assert!(denoise_cloud(&tiny, &params, &DenoiseConfig::default()).is_err());
}
