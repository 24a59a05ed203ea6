use std::time::Instant;

use bodyorient_core::geometry::{
    chest_direction, convert_pose_dataset, orientation_from_skeleton, shoulder_vector, torso_vector, PoseConversion,
};
use bodyorient_core::{Error, Skeleton3D, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line reference: plain arrays, explicit cross product and atan2.
mod oracle {
    pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    pub fn mid(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
    }

    pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    /// `(shoulder, torso, chest, theta)` for joints `[ls, rs, lh, rh]`.
    pub fn orientation(j: [[f64; 3]; 4]) -> ([f64; 3], [f64; 3], [f64; 3], f64) {
        let s = sub(j[1], j[0]);
        let t = sub(mid(j[2], j[3]), mid(j[0], j[1]));
        let c = cross(t, s);
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let c = [c[0] / n, c[1] / n, c[2] / n];
        let mut theta = c[1].atan2(c[2]) * 180.0 / std::f64::consts::PI;
        if theta < 0.0 {
            theta += 360.0;
        }
        (s, t, c, theta)
    }
}

const NAMES: [&str; 4] = ["left_shoulder", "right_shoulder", "left_hip", "right_hip"];

fn skeleton(j: [[f64; 3]; 4]) -> Skeleton3D {
    Skeleton3D::from_joints(NAMES.iter().zip(j).map(|(n, p)| (*n, Vec3::from(p))))
}

fn random_joints(rng: &mut ChaCha8Rng) -> [[f64; 3]; 4] {
    let mut j = [[0.0; 3]; 4];
    for p in &mut j {
        for c in p.iter_mut() {
            *c = rng.random_range(-2.0..2.0);
        }
    }
    j
}

fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[test]
fn matches_oracle_on_10k_random_skeletons() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for _ in 0..10_000 {
        let j = random_joints(&mut rng);
        let s = skeleton(j);
        let (os, ot, oc, otheta) = oracle::orientation(j);
        assert_eq!(shoulder_vector(&s).unwrap(), Vec3::from(os));
        assert!((torso_vector(&s).unwrap() - Vec3::from(ot)).norm() < 1e-15);
        let c = chest_direction(&s).unwrap();
        assert!((c - Vec3::from(oc)).norm() < 1e-12);
        let theta = orientation_from_skeleton(&s).unwrap().theta_deg();
        assert!(circ(theta, otheta) < 1e-9, "{theta} vs {otheta}");
        checked += 1;
    }
    assert_eq!(checked, 10_000);
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn conversion_is_elementwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut poses: Vec<Skeleton3D> = (0..3).map(|_| skeleton(random_joints(&mut rng))).collect();
    poses.push(skeleton([
        [0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [2.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
    ]));
    let out = convert_pose_dataset(&poses);
    assert_eq!(out.len(), 4);
    for (s, o) in poses.iter().zip(&out).take(3) {
        assert_eq!(o.label(), Some(orientation_from_skeleton(s).unwrap()));
    }
    assert!(matches!(out[3], PoseConversion::Skipped { .. }));
    assert!(convert_pose_dataset(&[]).is_empty());
}

#[test]
fn degenerate_and_vertical_chests() {
    let collinear = skeleton([[0.0, -1.0, 0.0], [0.0, 1.0, 0.0], [0.0, -3.0, 0.0], [0.0, 3.0, 0.0]]);
    assert!(matches!(
        orientation_from_skeleton(&collinear),
        Err(Error::DegeneratePose { .. })
    ));
    // Torso along z and shoulders along y put the chest on the x axis.
    let lying = skeleton([[0.0, -1.0, 0.0], [0.0, 1.0, 0.0], [0.0, -0.5, 2.0], [0.0, 0.5, 2.0]]);
    assert!(matches!(
        orientation_from_skeleton(&lying),
        Err(Error::ChestNearAxisX { .. })
    ));
}

fn joints_strategy() -> impl Strategy<Value = [[f64; 3]; 4]> {
    prop::array::uniform4(prop::array::uniform3(-3.0f64..3.0))
}

fn non_degenerate(j: &[[f64; 3]; 4]) -> bool {
    let (s, t, c, _) = oracle::orientation(*j);
    let cross = oracle::cross(t, s);
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    norm(cross) > 1e-3 && c[1].hypot(c[2]) > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn chest_is_unit_and_orthogonal(j in joints_strategy()) {
        prop_assume!(non_degenerate(&j));
        let s = skeleton(j);
        let c = chest_direction(&s).unwrap();
        let t = torso_vector(&s).unwrap();
        let sh = shoulder_vector(&s).unwrap();
        prop_assert!((c.norm() - 1.0).abs() < 1e-9);
        prop_assert!(c.dot(&t).abs() < 1e-9);
        prop_assert!(c.dot(&sh).abs() < 1e-9);
    }

    #[test]
    fn scale_and_translation_invariant(
        j in joints_strategy(),
        scale in 1e-3f64..1e3,
        shift in prop::array::uniform3(-100.0f64..100.0),
    ) {
        prop_assume!(non_degenerate(&j));
        let s = skeleton(j);
        let theta = orientation_from_skeleton(&s).unwrap().theta_deg();
        let scaled = orientation_from_skeleton(&s.map(|p| scale * p)).unwrap().theta_deg();
        let moved = orientation_from_skeleton(&s.map(|p| p + Vec3::from(shift))).unwrap().theta_deg();
        prop_assert!(circ(theta, scaled) < 1e-9);
        prop_assert!(circ(theta, moved) < 1e-9);
    }

    #[test]
    fn rotation_about_x_shifts_theta_by_minus_delta(j in joints_strategy(), delta in -720.0f64..720.0) {
        prop_assume!(non_degenerate(&j));
        let s = skeleton(j);
        let theta = orientation_from_skeleton(&s).unwrap().theta_deg();
        let rotated = orientation_from_skeleton(&s.rotated_about_x(delta)).unwrap().theta_deg();
        prop_assert!(circ(rotated, theta - delta) < 1e-6);
    }
}
