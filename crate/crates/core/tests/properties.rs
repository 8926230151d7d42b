use proptest::prelude::*;

use scoredenoise_core::mesh::{point_to_mesh_sq, point_to_mesh_sq_exhaustive, primitives, TriangleMesh};
use scoredenoise_core::metrics::{chamfer_distance, point_to_mesh};
use scoredenoise_core::patch::extract_patches;
use scoredenoise_core::spatial::SpatialIndex;
use scoredenoise_core::{normalize_unit_sphere, Point3, PointCloud};

fn point() -> impl Strategy<Value = Point3> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn cloud(min: usize, max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(point(), min..max).prop_map(|p| PointCloud::new(p).unwrap())
}

fn brute_one_sided(from: &PointCloud, to: &PointCloud) -> f64 {
    let mut sum = 0.0;
    for &p in from.points() {
        let mut best = f64::INFINITY;
        for &q in to.points() {
            best = best.min(p.dist_sq(q));
        }
        sum += best;
    }
    sum / from.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_sorted_scan(c in cloud(1, 120), q in point(), k in 1usize..12) {
        let index = SpatialIndex::new(&c);
        let k = k.min(c.len());
        let got = index.knn(q, k).unwrap();
        let mut order: Vec<usize> = (0..c.len()).collect();
        order.sort_by(|&a, &b| q.dist_sq(c[a]).total_cmp(&q.dist_sq(c[b])).then(a.cmp(&b)));
        let got_d: Vec<f64> = got.iter().map(|&i| q.dist_sq(c[i])).collect();
        let want_d: Vec<f64> = order[..k].iter().map(|&i| q.dist_sq(c[i])).collect();
        prop_assert_eq!(got_d, want_d);
    }

    #[test]
    fn normalization_is_idempotent(c in cloud(2, 80)) {
        let (n1, t) = normalize_unit_sphere(&c);
        prop_assume!(t.scale > 1e-6);
        let (n2, t2) = normalize_unit_sphere(&n1);
        prop_assert!(t2.center.norm() < 1e-12);
        prop_assert!((t2.scale - 1.0).abs() < 1e-12);
        for (a, b) in n1.points().iter().zip(n2.points()) {
            prop_assert!(a.dist_sq(*b) < 1e-24);
        }
    }

    #[test]
    fn patches_cover_every_point(c in cloud(1, 200), size in 1usize..60, coverage in 0.2..4.0f64) {
        let patches = extract_patches(&c, size, coverage).unwrap();
        let mut seen = vec![false; c.len()];
        for p in &patches {
            prop_assert_eq!(p.len(), size.min(c.len()));
            prop_assert_eq!(p.indices[0], p.seed);
            for &i in &p.indices {
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn chamfer_equals_double_loop(a in cloud(1, 150), b in cloud(1, 150)) {
        let cd = chamfer_distance(&a, &b).unwrap();
        prop_assert_eq!(cd, brute_one_sided(&a, &b) + brute_one_sided(&b, &a));
        prop_assert_eq!(cd, chamfer_distance(&b, &a).unwrap());
    }

    #[test]
    fn mesh_distance_equals_exhaustive(q in point()) {
        for mesh in [primitives::cube(0.7), primitives::icosphere(1), primitives::unit_square()] {
            prop_assert_eq!(point_to_mesh_sq(q, &mesh), point_to_mesh_sq_exhaustive(q, &mesh));
        }
    }
}

#[test]
fn points_on_a_mesh_have_zero_p2m() {
    let mesh: TriangleMesh = primitives::cube(1.0);
    let on: Vec<Point3> = mesh.vertices().to_vec();
    assert_eq!(point_to_mesh(&PointCloud::new(on).unwrap(), &mesh).unwrap(), 0.0);
}
