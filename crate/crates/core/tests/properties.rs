use fieldsense::geo3d::{
    compute_patch_features, fit_plane_lsq, grid_points, voxel_downsample, GridGeometry, Point3, PointCloud,
    VoxelGridParams,
};
use fieldsense::ground::{chi_square_threshold, FeatureVector, GroundModel, GroundParams};
use fieldsense::map::Label;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn cloud_strategy(max: usize) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -1.0..1.0f64), 1..max)
}

fn to_cloud(pts: &[(f64, f64, f64)]) -> PointCloud {
    PointCloud::new(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect(), 0)
}

fn features_strategy(dim: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), n)
}

proptest! {
    #[test]
    fn plane_through_points_on_a_plane(a in -0.5..0.5f64, b in -0.5..0.5f64, c in -2.0..2.0f64,
                                       xy in prop::collection::vec((-4.0..4.0f64, -4.0..4.0f64), 6..40)) {
        let pts: Vec<Point3> = xy.iter().map(|&(x, y)| Point3::new(x, y, a * x + b * y + c)).collect();
        prop_assume!(fit_plane_lsq(&pts).is_ok());
        let plane = fit_plane_lsq(&pts).unwrap();
        let n = nalgebra::Vector3::new(-a, -b, 1.0).normalize();
        prop_assert!((plane.normal - n).norm() < 1e-6);
        for p in &pts {
            prop_assert!(plane.signed_distance(p.x, p.y, p.z).abs() < 1e-8);
        }
    }

    #[test]
    fn patch_features_match_brute_force(z in prop::collection::vec(-2.0..2.0f64, 1..60)) {
        let pts: Vec<Point3> = z.iter().enumerate().map(|(i, &z)| Point3::new((i % 7) as f64 * 0.1, (i / 7) as f64 * 0.1, z)).collect();
        let f = compute_patch_features(&pts).unwrap();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let std = (z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let range = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - z.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!((f.mean_height - mean).abs() < 1e-12);
        prop_assert!((f.height_std - std).abs() < 1e-9);
        prop_assert!((f.height_range - range).abs() < 1e-12);
        prop_assert_eq!(f.n_points, z.len());
        prop_assert!((0.0..=1.0).contains(&f.normal_z));
        prop_assert!(f.fit_residual >= 0.0);
    }

    #[test]
    fn voxel_downsample_is_idempotent(pts in cloud_strategy(200), size in 0.05..1.0f64) {
        let params = VoxelGridParams { voxel_size: size };
        let once = voxel_downsample(&to_cloud(&pts), params).unwrap();
        let twice = voxel_downsample(&once, params).unwrap();
        prop_assert!(once.len() <= pts.len());
        prop_assert_eq!(once.len(), twice.len());
        for (a, b) in once.points.iter().zip(&twice.points) {
            prop_assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12 && (a.z - b.z).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_partitions_every_point_once(pts in cloud_strategy(300), size in 0.2..2.0f64,
                                        rows in 1usize..12, cols in 1usize..12) {
        let g = GridGeometry::new((-3.0, -3.0), size, rows, cols).unwrap();
        let cloud = to_cloud(&pts);
        let grid = grid_points(&cloud, g);
        let mut seen = vec![0usize; pts.len()];
        for (cell, members) in grid.patches.iter().enumerate() {
            let (r, c) = g.row_col(cell);
            let (x0, y0, x1, y1) = g.cell_bounds(r, c);
            for &i in members {
                seen[i] += 1;
                let p = &cloud.points[i];
                prop_assert!(p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1);
            }
        }
        prop_assert!(seen.iter().all(|&k| k <= 1));
        prop_assert_eq!(seen.iter().filter(|&&k| k == 1).count() + grid.dropped, pts.len());
    }

    #[test]
    fn mahalanobis_matches_explicit_inverse(train in features_strategy(3, 6..40), probe in prop::collection::vec(-4.0..4.0f64, 3)) {
        let params = GroundParams { capacity: 64, epsilon: 1e-3, ..GroundParams::default() };
        let vs: Vec<FeatureVector> = train.iter().cloned().map(FeatureVector::from).collect();
        let model = GroundModel::bootstrap(params, &vs).unwrap();
        let n = train.len() as f64;
        let mean = train.iter().fold(DVector::zeros(3), |acc, v| acc + DVector::from_column_slice(v)) / n;
        let mut cov = DMatrix::<f64>::identity(3, 3) * 1e-3;
        for v in &train {
            let d = DVector::from_column_slice(v) - &mean;
            cov += &d * d.transpose() / (n - 1.0);
        }
        let d = DVector::from_column_slice(&probe) - &mean;
        let expected = (d.transpose() * cov.try_inverse().unwrap() * &d)[0];
        let got = model.mahalanobis_score(&FeatureVector::from(probe)).unwrap();
        prop_assert!((got - expected).abs() <= 1e-6 * expected.max(1.0));
    }

    #[test]
    fn classification_is_affine_invariant(train in features_strategy(3, 12..40), probes in features_strategy(3, 1..20),
                                          m in prop::collection::vec(-2.0..2.0f64, 9), shift in prop::collection::vec(-10.0..10.0f64, 3)) {
        let a = DMatrix::from_row_slice(3, 3, &m);
        let sv = a.clone().svd(false, false).singular_values;
        prop_assume!(sv.min() > 0.1);
        let t = DVector::from_column_slice(&shift);
        let map = |v: &[f64]| FeatureVector::from((&a * DVector::from_column_slice(v) + &t).as_slice().to_vec());
        let params = GroundParams { capacity: 64, epsilon: 1e-13, ..GroundParams::default() };
        let before = GroundModel::bootstrap(params, &train.iter().cloned().map(FeatureVector::from).collect::<Vec<_>>()).unwrap();
        let after = GroundModel::bootstrap(params, &train.iter().map(|v| map(v)).collect::<Vec<_>>()).unwrap();
        for p in &probes {
            let sa = before.mahalanobis_score(&FeatureVector::from(p.clone())).unwrap();
            let sb = after.mahalanobis_score(&map(p)).unwrap();
            prop_assert!((sa - sb).abs() <= 1e-6 * sa.max(1.0), "{} vs {}", sa, sb);
            if (sa - before.threshold()).abs() > 1e-6 * sa.max(1.0) {
                prop_assert_eq!(before.classify_vector(&FeatureVector::from(p.clone())).unwrap().label,
                                after.classify_vector(&map(p)).unwrap().label);
            }
        }
    }

    #[test]
    fn raising_the_threshold_keeps_ground(train in features_strategy(3, 6..30), probes in features_strategy(3, 1..30), bump in 0.0..20.0f64) {
        let vs: Vec<FeatureVector> = train.into_iter().map(FeatureVector::from).collect();
        let model = GroundModel::bootstrap(GroundParams { capacity: 64, ..GroundParams::default() }, &vs).unwrap();
        let mut looser = model.clone();
        looser.set_threshold(model.threshold() + bump).unwrap();
        for p in probes {
            let v = FeatureVector::from(p);
            let s = model.mahalanobis_score(&v).unwrap();
            prop_assert!(s >= 0.0);
            if model.classify_vector(&v).unwrap().label == Label::Ground {
                prop_assert_eq!(looser.classify_vector(&v).unwrap().label, Label::Ground);
            }
        }
    }

    #[test]
    fn ground_set_grows_with_confidence(train in features_strategy(3, 6..30), probes in features_strategy(3, 1..30),
                                        p1 in 0.5..0.999f64, dp in 0.0..0.0009f64) {
        let p2 = p1 + dp;
        prop_assert!(chi_square_threshold(3, p1).unwrap() <= chi_square_threshold(3, p2).unwrap());
        let vs: Vec<FeatureVector> = train.into_iter().map(FeatureVector::from).collect();
        let lo = GroundModel::bootstrap(GroundParams { confidence: p1, capacity: 64, ..GroundParams::default() }, &vs).unwrap();
        let hi = GroundModel::bootstrap(GroundParams { confidence: p2, capacity: 64, ..GroundParams::default() }, &vs).unwrap();
        for p in probes {
            let v = FeatureVector::from(p);
            if lo.classify_vector(&v).unwrap().label == Label::Ground {
                prop_assert_eq!(hi.classify_vector(&v).unwrap().label, Label::Ground);
            }
        }
    }

    #[test]
    fn buffer_never_exceeds_capacity(train in features_strategy(2, 3..20), batches in prop::collection::vec(features_strategy(2, 0..15), 0..6),
                                     capacity in 3usize..25) {
        let params = GroundParams { capacity, ..GroundParams::default() };
        let mut model = GroundModel::bootstrap(params, &train.iter().cloned().map(FeatureVector::from).collect::<Vec<_>>()).unwrap();
        let mut all: Vec<Vec<f64>> = train;
        for batch in batches {
            model.update(&batch.iter().cloned().map(FeatureVector::from).collect::<Vec<_>>()).unwrap();
            all.extend(batch);
            prop_assert!(model.buffer().len() <= capacity);
            let tail = &all[all.len() - model.buffer().len()..];
            for (kept, orig) in model.buffer().iter().zip(tail) {
                prop_assert_eq!(&kept.0, orig);
            }
        }
    }
}
