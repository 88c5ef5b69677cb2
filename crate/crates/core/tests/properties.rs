use proptest::prelude::*;

use dualgrasp::antipodal::{grasp_pose_from_contacts, GripperModel};
use dualgrasp::geom::{OrientedBox, OrientedBoxSet, Transform, Vec3};
use dualgrasp::mesh::{area_weighted_surface_sample, primitives, rescale_to_target, stable_pose};
use dualgrasp::metrics::{build_grasp_matrix, min_singular_value, stability_omega, ContactSet, DexterityLabel};
use dualgrasp::pairs::{finalize_pairs, prune_and_bin, LabeledPair, MAX_PER_BIN};
use dualgrasp::metrics::ScoreWeights;
use dualgrasp::scene::{crop_gripper_volume, estimate_object_frame, to_object_frame};

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec3(1.0).prop_filter("nonzero", |v| v.norm() > 1e-3).prop_map(|v| v.normalize())
}

fn rigid() -> impl Strategy<Value = Transform> {
    (unit(), 0.0..std::f64::consts::PI, vec3(2.0))
        .prop_map(|(axis, angle, t)| Transform::from_translation(t) * Transform::from_axis_angle(&axis, angle))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rescale_keeps_distance_ratios(dims in vec3(1.0).prop_map(|v| v.abs() + Vec3::repeat(0.05)), target in 0.1..2.0f64) {
        let mesh = primitives::cuboid(Vec3::new(0.3, -0.1, 0.2), dims);
        let (out, s) = rescale_to_target(&mesh, target).unwrap();
        prop_assert!((out.aabb().max_extent() - target).abs() < 1e-12);
        let (a, b) = (mesh.vertices(), out.vertices());
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                let ratio = (b[i] - b[j]).norm() / (a[i] - a[j]).norm();
                prop_assert!((ratio - s).abs() < 1e-12 * s.max(1.0));
            }
        }
    }

    #[test]
    fn closed_meshes_give_even_hit_counts(dir in unit(), origin in unit().prop_map(|u| u * 3.0), k in 0usize..3) {
        let mesh = match k {
            0 => primitives::unit_cube(),
            1 => primitives::uv_sphere(Vec3::zeros(), 0.7, 12, 24),
            _ => primitives::cylinder(Vec3::new(0.0, 0.0, -0.5), Vec3::new(0.1, 0.0, 0.5), 0.3, 20),
        };
        prop_assert_eq!(mesh.ray_intersections(&origin, &dir).len() % 2, 0);
    }

    #[test]
    fn stable_pose_is_rigid_and_grounded(pose in rigid(), seed in any::<u64>(), k in 0usize..4) {
        let base = match k {
            0 => primitives::unit_cube(),
            1 => primitives::plate(Vec3::new(0.6, 0.4, 0.04)),
            2 => primitives::square_stool(0.36, 0.04, 0.6, 0.02),
            _ => primitives::tube_chair(0.42, 0.45, 0.85, 0.015, true),
        };
        let mesh = base.transformed(&pose);
        let p = stable_pose(&mesh, seed).unwrap();
        prop_assert!(p.table_from_object.orthonormality_error() < 1e-9);
        prop_assert!((p.table_from_object.rotation.determinant() - 1.0).abs() < 1e-9);
        let min_z = mesh.vertices().iter().map(|v| p.table_from_object.apply_point(v).z).fold(f64::INFINITY, f64::min);
        prop_assert!(min_z.abs() < 1e-9);
    }

    #[test]
    fn collision_is_rigid_invariant(t in rigid(), center in vec3(0.8), dims in vec3(0.3).prop_map(|v| v.abs() + Vec3::repeat(0.01))) {
        let mesh = primitives::frame(0.7, 0.5, 0.05, 0.03);
        let body = OrientedBoxSet::new(vec![OrientedBox::axis_aligned(Vec3::zeros(), dims)]);
        let pose = Transform::from_translation(center);
        prop_assert_eq!(mesh.collides(&body, &pose), mesh.transformed(&t).collides(&body, &(t * pose)));
    }

    #[test]
    fn metrics_are_rotation_invariant(pts in prop::array::uniform4(vec3(0.5)), axes in prop::array::uniform4(unit()), r in rigid()) {
        let rot = Transform::new(r.rotation, Vec3::zeros());
        let a = ContactSet::new(pts, axes, 0.4, 0.7).unwrap();
        let b = ContactSet::new(pts.map(|p| rot.apply_point(&p)), axes.map(|c| rot.apply_vector(&c).normalize()), 0.4, 0.7).unwrap();
        let (ga, gb) = (build_grasp_matrix(&a), build_grasp_matrix(&b));
        prop_assert!((stability_omega(&ga, &a) - stability_omega(&gb, &b)).abs() < 1e-9);
        prop_assert!((min_singular_value(&ga) - min_singular_value(&gb)).abs() < 1e-9);
    }

    #[test]
    fn object_frame_is_proper_rotation(n in unit(), t in vec3(2.0)) {
        let frame = estimate_object_frame(&n, &t).unwrap();
        prop_assert!(frame.orthonormality_error() < 1e-12);
        let r = frame.inverse().rotation;
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        prop_assert!((r.column(2) - n).norm() < 1e-12);
        prop_assert!(frame.apply_point(&t).norm() < 1e-12);
    }

    #[test]
    fn composition_matches_sequential(a in rigid(), b in rigid(), p in vec3(1.0)) {
        let c = a * b;
        prop_assert!((c.to_matrix4() - a.to_matrix4() * b.to_matrix4()).abs().max() < 1e-12);
        let direct = to_object_frame(&[p], &c)[0];
        prop_assert!((direct - a.apply_point(&b.apply_point(&p))).norm() < 1e-12);
    }

    #[test]
    fn crop_is_pose_equivariant(t in rigid(), cloud in prop::collection::vec(vec3(0.06), 50..300), roll in 0.0..std::f64::consts::TAU) {
        let region = GripperModel::default().closing_region;
        let grasp = grasp_pose_from_contacts(&Vec3::new(-0.02, 0.0, 0.0), &Vec3::new(0.02, 0.01, 0.0), roll).unwrap();
        let moved: Vec<Vec3> = cloud.iter().map(|p| t.apply_point(p)).collect();
        let a = crop_gripper_volume(&cloud, &grasp, &region);
        let b = crop_gripper_volume(&moved, &(t * grasp), &region);
        // allow disagreement only for points within rounding distance of a face
        let inv = grasp.inverse();
        let near_face = |k: &usize| {
            let q = inv.apply_point(&cloud[*k]) - region.center;
            (0..3).any(|i| (q[i].abs() - region.half_extents[i]).abs() < 1e-12)
        };
        let sym: Vec<usize> = a.iter().filter(|k| !b.contains(k)).chain(b.iter().filter(|k| !a.contains(k))).copied().collect();
        prop_assert!(sym.iter().all(near_face));
    }

    #[test]
    fn json_floats_round_trip(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 6)) {
        let label = DexterityLabel {
            omega: vals[0], sigma_min: vals[1], theta_g: vals[2], q_for: vals[3], q_dex: Some(vals[4]), q_tor: vals[5],
            q_score: None, epsilon_ok: true,
        };
        let back: DexterityLabel = serde_json::from_str(&serde_json::to_string(&label).unwrap()).unwrap();
        prop_assert_eq!(back.omega.to_bits(), label.omega.to_bits());
        prop_assert_eq!(back.sigma_min.to_bits(), label.sigma_min.to_bits());
        prop_assert_eq!(back.theta_g.to_bits(), label.theta_g.to_bits());
        prop_assert_eq!(back.q_dex.unwrap().to_bits(), label.q_dex.unwrap().to_bits());
    }

    #[test]
    fn pruning_invariants(omegas in prop::collection::vec((0u32..200, any::<bool>()), 0..2500)) {
        let input: Vec<LabeledPair> = omegas.iter().enumerate().map(|(k, &(w, ok))| {
            let omega = w as f64 * 0.01;
            LabeledPair { a: k, b: k + 1, label: DexterityLabel {
                omega, sigma_min: 0.01 + (k % 7) as f64 * 0.01, theta_g: 1.0,
                q_for: dualgrasp::metrics::q_for_from_omega(omega), q_dex: None, q_tor: 1f64.cos(), q_score: None, epsilon_ok: ok,
            } }
        }).collect();
        let mut out = prune_and_bin(input);
        prop_assert!(out.len() <= 2001);
        prop_assert!(out.iter().all(|p| p.label.epsilon_ok));
        for b in dualgrasp::pairs::Bin::ALL {
            prop_assert!(out.iter().filter(|p| p.bin == b).count() <= MAX_PER_BIN);
        }
        // stable: equal ω keeps input order
        for w in out.windows(2) {
            prop_assert!(w[0].label.omega < w[1].label.omega || (w[0].label.omega == w[1].label.omega && w[0].a < w[1].a) || w[0].bin < w[1].bin);
        }
        if !out.is_empty() {
            let before: Vec<f64> = out.iter().map(|p| p.label.sigma_min).collect();
            finalize_pairs(&mut [&mut out], &ScoreWeights::default()).unwrap();
            for (i, j) in (0..before.len()).flat_map(|i| (0..before.len()).map(move |j| (i, j))).take(5000) {
                if before[i] < before[j] {
                    prop_assert!(out[i].label.q_dex.unwrap() < out[j].label.q_dex.unwrap());
                }
            }
        }
    }
}

// Each cube side carries 1/6 of the area, and the lower-left quarter of a side 1/24.
#[test]
fn cube_surface_counts_match_multinomial() {
    let n = 60_000;
    let pts = area_weighted_surface_sample(&primitives::unit_cube(), n, 11);
    let mut side = [0usize; 6];
    let mut corner = 0usize;
    for s in &pts {
        let axis = (0..3).max_by(|&a, &b| s.normal[a].abs().total_cmp(&s.normal[b].abs())).unwrap();
        side[axis * 2 + usize::from(s.normal[axis] > 0.0)] += 1;
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        if s.point[u] < 0.0 && s.point[v] < 0.0 {
            corner += 1;
        }
    }
    let check = |count: usize, p: f64| {
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((count as f64 - mean).abs() < 5.0 * sd, "count {count} vs mean {mean}");
    };
    side.iter().for_each(|&c| check(c, 1.0 / 6.0));
    check(corner, 0.25);
}
