use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

use globreg::evaluation::{rotation_error, BenchmarkReport, PairRow, SuccessThresholds};
use globreg::geometry::{apply_transform, voxel_downsample, Features, PointCloud, RigidTransform};
use globreg::index::{brute_force_nearest, IndexSpace, SpatialIndex};
use globreg::io::config::{parse_config, render_config, ConfigFile};
use globreg::io::ply::{encode_ply, parse_ply, PlyFormat};
use globreg::io::weights::{encode_weight_file, parse_weight_file};
use globreg::pipeline::{Branch, StageTimings};
use globreg::ransac::inlier_fraction;
use globreg::{CorrespondenceSet, WeightVector};

fn point() -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-10.0f64..10.0).prop_map(|[x, y, z]| Vector3::new(x, y, z))
}

fn rigid() -> impl Strategy<Value = RigidTransform> {
    (prop::array::uniform3(-1.0f64..1.0), 0.0f64..std::f64::consts::PI, point())
        .prop_filter("axis must be non-zero", |(a, _, _)| a.iter().map(|v| v * v).sum::<f64>() > 1e-4)
        .prop_map(|([x, y, z], angle, t)| RigidTransform::from_axis_angle(Vector3::new(x, y, z), angle, t))
}

fn sorted_coords(cloud: &PointCloud) -> Vec<[u64; 3]> {
    let mut v: Vec<[u64; 3]> = cloud.points().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_preserve_distances(t in rigid(), pts in prop::collection::vec(point(), 2..40)) {
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let moved = apply_transform(&t, &cloud);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let before = (pts[i] - pts[j]).norm();
                let after = (moved.point(i) - moved.point(j)).norm();
                prop_assert!((before - after).abs() <= 1e-12 * (1.0 + before));
            }
        }
        let back = t.inverse().compose(&t);
        prop_assert!((back.rotation() - Matrix3::identity()).amax() < 1e-12);
        prop_assert!(back.translation().norm() < 1e-12);
    }

    #[test]
    fn rotation_error_is_symmetric_and_bounded(a in rigid(), b in rigid()) {
        let (ra, rb) = (a.rotation(), b.rotation());
        let ab = rotation_error(ra, rb);
        prop_assert!((ab - rotation_error(rb, ra)).abs() < 1e-12);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&ab));
        prop_assert!(rotation_error(ra, ra) < 1e-7);
    }

    #[test]
    fn voxel_downsampling_is_idempotent_and_order_free(
        pts in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0).prop_map(|[x, y, z]| Vector3::new(x, y, z)), 1..200),
        voxel in 0.05f64..1.0,
        seed in any::<u64>(),
        shuffle_seed in any::<u64>(),
    ) {
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let once = voxel_downsample(&cloud, voxel, seed).unwrap();
        let twice = voxel_downsample(&once, voxel, seed).unwrap();
        prop_assert_eq!(once.points(), twice.points());

        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut s = shuffle_seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted = voxel_downsample(&cloud.select(&order), voxel, seed).unwrap();
        prop_assert_eq!(sorted_coords(&once), sorted_coords(&permuted));
    }

    #[test]
    fn kd_tree_matches_linear_scan(
        dim in 1usize..6,
        rows in 1usize..150,
        raw in prop::collection::vec(-3i32..3, 900),
        queries in prop::collection::vec(prop::collection::vec(-3.5f64..3.5, 6), 1..20),
        radius in 0.0f64..3.0,
    ) {
        // small integer grid so ties are common
        let data: Vec<f64> = raw.iter().take(dim * rows).map(|&v| v as f64 * 0.5).collect();
        let rows = data.len() / dim;
        let data = data[..rows * dim].to_vec();
        let index = SpatialIndex::from_rows(dim, data.clone()).unwrap();
        for q in &queries {
            let q = &q[..dim];
            prop_assert_eq!(index.nearest(q), brute_force_nearest(dim, &data, q));
            let mut inside: Vec<usize> = (0..rows)
                .filter(|&i| data[i * dim..(i + 1) * dim].iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= radius * radius)
                .collect();
            let mut found = index.within_radius(q, radius);
            found.sort_unstable();
            inside.sort_unstable();
            prop_assert_eq!(found, inside);
        }
    }

    #[test]
    fn inlier_fraction_shrinks_as_threshold_grows(
        w in prop::collection::vec(0.0f64..=1.0, 1..100),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let w = WeightVector::new(w).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let f_lo = inlier_fraction(&w, lo).unwrap();
        let f_hi = inlier_fraction(&w, hi).unwrap();
        prop_assert!(f_hi <= f_lo);
        prop_assert!((0.0..=1.0).contains(&f_lo));
    }

    #[test]
    fn recall_grows_with_thresholds(
        errors in prop::collection::vec((0.0f64..40.0, 0.0f64..1.5, any::<bool>()), 1..40),
        re in (0.0f64..40.0, 0.0f64..40.0),
        te in (0.0f64..1.5, 0.0f64..1.5),
    ) {
        let rows: Vec<PairRow> = errors
            .iter()
            .enumerate()
            .map(|(id, &(re_deg, te_m, failed))| {
                if failed {
                    PairRow::failed(id, format!("p{id}"), "solver failure")
                } else {
                    PairRow {
                        id,
                        name: format!("p{id}"),
                        branch: Some(Branch::WeightedProcrustesRefined),
                        inlier_fraction: Some(0.5),
                        re_deg: Some(re_deg),
                        te_m: Some(te_m),
                        success: false,
                        error: None,
                        timing: StageTimings::default(),
                    }
                }
            })
            .collect();
        let report = BenchmarkReport::from_rows(rows, SuccessThresholds::INDOOR);
        let (re_lo, re_hi) = if re.0 <= re.1 { re } else { (re.1, re.0) };
        let (te_lo, te_hi) = if te.0 <= te.1 { te } else { (te.1, te.0) };
        prop_assert!(report.recall_at(re_lo, te_lo) <= report.recall_at(re_hi, te_lo));
        prop_assert!(report.recall_at(re_lo, te_lo) <= report.recall_at(re_lo, te_hi));
        prop_assert!(report.recall_at(re_hi, te_hi) <= 1.0);
        for curve in [&report.curves.rotation, &report.curves.translation] {
            prop_assert!(curve.windows(2).all(|p| p[0].recall <= p[1].recall));
        }
    }

    #[test]
    fn weight_files_round_trip(
        entries in prop::collection::vec((0usize..500, 0.0f64..=1.0), 1..60),
        target_size in 1usize..400,
    ) {
        let mut seen = std::collections::HashSet::new();
        let (pairs, weights): (Vec<_>, Vec<_>) = entries
            .into_iter()
            .filter(|(i, _)| seen.insert(*i))
            .enumerate()
            .map(|(k, (i, w))| ((i, (i * 7 + k) % target_size), w))
            .unzip();
        let set = CorrespondenceSet::new(pairs, 500, target_size).unwrap();
        let weights = WeightVector::new(weights).unwrap();
        let text = encode_weight_file(&set, &weights).unwrap();
        let back = parse_weight_file(text.as_bytes(), Path::new("w.txt")).unwrap();
        prop_assert_eq!(back.correspondences, set);
        prop_assert_eq!(back.weights, weights);
    }

    #[test]
    fn ply_round_trips_in_both_encodings(
        pts in prop::collection::vec(prop::array::uniform3(-1e3f32..1e3), 1..50),
        with_features in any::<bool>(),
    ) {
        let points: Vec<Vector3<f64>> = pts.iter().map(|p| Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64)).collect();
        let features = with_features.then(|| {
            Features::new(2, pts.iter().flat_map(|p| [p[0] as f64 * 0.5, p[1] as f64 - p[2] as f64]).map(|v| v as f32 as f64).collect()).unwrap()
        });
        let cloud = PointCloud::with_features(points, features).unwrap();
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let back = parse_ply(&encode_ply(&cloud, format), Path::new("c.ply")).unwrap();
            // properties are declared float32, so that is the precision that survives
            let f32s = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
            let flat = |c: &PointCloud| c.points().iter().flat_map(|p| [p.x, p.y, p.z]).collect::<Vec<f64>>();
            prop_assert_eq!(f32s(&flat(&back)), f32s(&flat(&cloud)));
            prop_assert_eq!(back.features().map(|f| f32s(f.as_slice())), cloud.features().map(|f| f32s(f.as_slice())));
        }
    }

    #[test]
    fn configs_round_trip(
        voxel in 0.01f64..1.0,
        huber in 0.01f64..2.0,
        iters in 1usize..500,
        seed in any::<u64>(),
        outdoor in any::<bool>(),
    ) {
        let mut file = if outdoor {
            parse_config("preset = outdoor\n", Path::new("c.cfg")).unwrap()
        } else {
            ConfigFile::default()
        };
        file.pipeline.voxel_size = voxel;
        file.pipeline.voxel_seed = seed;
        file.pipeline.refine.huber_delta = huber;
        file.pipeline.refine.max_iters = iters;
        let back = parse_config(&render_config(&file), Path::new("c.cfg")).unwrap();
        prop_assert_eq!(back, file);
    }
}

#[test]
fn rotation_error_matches_angle_about_any_axis() {
    for k in 0..50 {
        let theta = 0.06 * k as f64;
        let axis = nalgebra::Unit::new_normalize(Vector3::new(1.0, -2.0, 0.5 + k as f64));
        let r = *Rotation3::from_axis_angle(&axis, theta).matrix();
        assert!((rotation_error(&Matrix3::identity(), &r) - theta).abs() < 1e-7);
    }
}

#[test]
fn index_over_coordinates_agrees_with_cloud() {
    let cloud = PointCloud::from_slice(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
    let index = SpatialIndex::build(&cloud, IndexSpace::Coordinates).unwrap();
    assert_eq!(index.nearest(&[0.9, 0.1, 0.0]).index, 1);
}
