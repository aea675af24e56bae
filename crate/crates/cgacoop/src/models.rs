//! Built-in example chains and cooperative systems.
//!
//! These are geometric stand-ins built from screw axes, not vendor models.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::algebra::Multivector;
use crate::chain::{offset, pose_motor, Chain, Joint};
use crate::cooperative::{CooperativeSystem, Slot};
use crate::primitive::Kind;
use crate::versor::rotation_bivector;

/// Nominal configuration of the 7-dof arm.
#[allow(clippy::approx_constant)]
pub const IIWA_Q0: [f64; 7] = [0.0, -0.7854, 0.0, 1.3962, 0.0, 0.6109, 0.0];

const Z: [f64; 3] = [0.0, 0.0, 1.0];
const Y: [f64; 3] = [0.0, 1.0, 0.0];
const NEG_Y: [f64; 3] = [0.0, -1.0, 0.0];
const X: [f64; 3] = [1.0, 0.0, 0.0];

fn rev(axis: [f64; 3], origin: [f64; 3], limit: f64) -> Joint {
    Joint::revolute(axis, origin).expect("unit axis").with_limits(-limit, limit)
}

fn deg(d: f64) -> f64 {
    d * PI / 180.0
}

/// Base motor at `translation` rotated by `yaw` about +z.
pub fn yaw_base(translation: [f64; 3], yaw: f64) -> Multivector {
    pose_motor(translation, rotation_bivector(Z, yaw))
}

/// 7-dof arm, upright at zero configuration, flange 1.306 m above its base.
pub fn iiwa_like(name: &str, base: Multivector) -> Chain {
    let joints = vec![
        rev(Z, [0.0, 0.0, 0.0], deg(170.0)),
        rev(Y, [0.0, 0.0, 0.36], deg(120.0)),
        rev(Z, [0.0, 0.0, 0.36], deg(170.0)),
        rev(NEG_Y, [0.0, 0.0, 0.78], deg(120.0)),
        rev(Z, [0.0, 0.0, 0.78], deg(170.0)),
        rev(Y, [0.0, 0.0, 1.18], deg(120.0)),
        rev(Z, [0.0, 0.0, 1.18], deg(175.0)),
    ];
    Chain::new(name, base, joints, offset([0.0, 0.0, 1.306]))
}

/// One 7-dof arm whose end-effector is a point.
pub fn single_arm() -> CooperativeSystem {
    CooperativeSystem::stacked("single-arm", vec![iiwa_like("arm", Multivector::ONE)], Kind::Point).expect("valid")
}

/// Three arms on a circle of radius 1.5 m facing its center.
pub fn three_arm(kind: Kind) -> CooperativeSystem {
    let chains = (0..3)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / 3.0;
            let base = yaw_base([1.5 * libm::cos(phi), 1.5 * libm::sin(phi), 0.0], phi);
            iiwa_like(&format!("arm{}", i + 1), base)
        })
        .collect();
    CooperativeSystem::stacked(&format!("three-arm-{}", kind.name()), chains, kind).expect("valid")
}

/// Three-arm circle system (21 dof).
pub fn three_arm_circle() -> CooperativeSystem {
    three_arm(Kind::Circle)
}

/// Two arms facing each other along the y axis (14 dof).
pub fn two_arm(kind: Kind) -> CooperativeSystem {
    let chains = vec![
        iiwa_like("arm1", yaw_base([0.0, -1.0, 0.0], -PI / 2.0)),
        iiwa_like("arm2", yaw_base([0.0, 1.0, 0.0], PI / 2.0)),
    ];
    CooperativeSystem::stacked(&format!("two-arm-{}", kind.name()), chains, kind).expect("valid")
}

/// Nominal stacked configuration: the arm's `q0` repeated.
pub fn iiwa_q0(arms: usize) -> Vec<f64> {
    (0..arms).flat_map(|_| IIWA_Q0).collect()
}

/// Three arms in a row along x facing +y (21 dof). The middle end-effector
/// starts 0.25 m above the others so the points span a vertical circle.
pub fn three_arm_row() -> CooperativeSystem {
    let chains = (0..3)
        .map(|i| iiwa_like(&format!("arm{}", i + 1), yaw_base([0.8 * (i as f64 - 1.0), 0.0, 0.0], -PI / 2.0)))
        .collect();
    CooperativeSystem::stacked("three-arm-row", chains, Kind::Circle).expect("valid")
}

/// Nominal configuration of [`three_arm_row`].
pub fn three_arm_row_q0() -> Vec<f64> {
    let sys = three_arm_row();
    let q = iiwa_q0(3);
    let p = sys.slots[1].chain.end_effector(&IIWA_Q0).expect("nominal");
    crate::control::point_ik(&sys, 1, &q, [p[0], p[1], p[2] + 0.25], 1e-12, 50).expect("reachable")
}

fn humanoid_arm(side: f64) -> Vec<Joint> {
    let y = 0.2 * side;
    vec![
        rev(Y, [0.0, y, 0.4], deg(150.0)),
        rev(X, [0.0, y, 0.4], deg(90.0)),
        rev(Z, [0.0, y, 0.4], deg(150.0)),
        rev(Y, [0.0, y, 0.15], deg(150.0)),
        rev(Z, [0.0, y, 0.15], deg(150.0)),
        rev(Y, [0.0, y, -0.1], deg(90.0)),
        rev(X, [0.0, y, -0.1], deg(90.0)),
    ]
}

/// 17-dof dual arm with a shared 3-dof waist. Joints 0..3 are the waist,
/// 3..10 the right arm, 10..17 the left arm. The hands span a line.
pub fn g1_like(kind: Kind) -> CooperativeSystem {
    let waist = vec![
        rev(Z, [0.0, 0.0, 0.0], deg(150.0)),
        rev(X, [0.0, 0.0, 0.05], deg(30.0)),
        rev(Y, [0.0, 0.0, 0.1], deg(30.0)),
    ];
    let base = pose_motor([0.0, 0.0, 0.8], [0.0; 3]);
    let arm = |name: &str, side: f64| {
        let mut joints = waist.clone();
        joints.extend(humanoid_arm(side));
        Chain::new(name, base, joints, offset([0.0, 0.2 * side, -0.15]))
    };
    let slots = vec![
        Slot { chain: arm("right", -1.0), joints: (0..3).chain(3..10).collect() },
        Slot { chain: arm("left", 1.0), joints: (0..3).chain(10..17).collect() },
    ];
    CooperativeSystem::with_slots(&format!("g1-like-{}", kind.name()), slots, 17, kind).expect("valid")
}

/// Nominal humanoid configuration: hands in front of the torso.
pub fn g1_q0() -> Vec<f64> {
    let arm = [-0.6, 0.0, 0.0, -1.2, 0.0, 0.3, 0.0];
    let mut q = vec![0.0; 3];
    q.extend(arm);
    q.extend(arm);
    q
}

fn finger(name: &str, base: [f64; 3]) -> Chain {
    let at = |dz: f64| [base[0], base[1], base[2] + dz];
    let joints = vec![
        rev(X, at(0.0), deg(30.0)),
        rev(Y, at(0.0), deg(100.0)),
        rev(Y, at(0.05), deg(100.0)),
        rev(Y, at(0.09), deg(100.0)),
    ];
    Chain::new(name, Multivector::ONE, joints, offset(at(0.12)))
}

fn thumb(base: [f64; 3]) -> Chain {
    let at = |dx: f64| [base[0] + dx, base[1], base[2]];
    let joints = vec![
        rev(X, at(0.0), deg(90.0)),
        rev(Z, at(0.0), deg(100.0)),
        rev(Z, at(0.05), deg(100.0)),
        rev(Z, at(0.09), deg(100.0)),
    ];
    Chain::new("thumb", Multivector::ONE, joints, offset(at(0.12)))
}

/// 16-dof four-finger hand; the fingertips span a sphere.
pub fn leap_like() -> CooperativeSystem {
    let chains = vec![
        finger("index", [0.0, 0.045, 0.0]),
        finger("middle", [0.0, 0.0, 0.01]),
        finger("ring", [0.0, -0.045, 0.0]),
        thumb([0.03, 0.06, -0.06]),
    ];
    CooperativeSystem::stacked("leap-like", chains, Kind::Sphere).expect("valid")
}

/// Nominal hand configuration: fingers curled by different amounts.
pub fn leap_q0() -> Vec<f64> {
    vec![
        0.1, 0.2, 0.2, 0.2, //
        0.0, 0.9, 0.8, 0.6, //
        -0.1, 0.2, 0.2, 0.2, //
        0.5, -0.6, -0.6, -0.5,
    ]
}

/// Three fingers (index, ring, thumb) spanning a plane (12 dof).
pub fn three_finger_plane() -> CooperativeSystem {
    let chains = vec![finger("index", [0.0, 0.045, 0.0]), finger("ring", [0.0, -0.045, 0.0]), thumb([0.03, 0.06, -0.06])];
    CooperativeSystem::stacked("three-finger-plane", chains, Kind::Plane).expect("valid")
}

pub fn three_finger_q0() -> Vec<f64> {
    let q = leap_q0();
    q[..4].iter().chain(&q[8..]).copied().collect()
}

/// Built-in system by name, with its nominal configuration.
pub fn builtin(name: &str) -> Option<(CooperativeSystem, Vec<f64>)> {
    Some(match name {
        "single-arm" => (single_arm(), iiwa_q0(1)),
        "three-arm-circle" => (three_arm_circle(), iiwa_q0(3)),
        "three-arm-plane" => (three_arm(Kind::Plane), iiwa_q0(3)),
        "two-arm-point-pair" => (two_arm(Kind::PointPair), iiwa_q0(2)),
        "two-arm-line" => (two_arm(Kind::Line), iiwa_q0(2)),
        "g1-like-line" => (g1_like(Kind::Line), g1_q0()),
        "g1-like-point-pair" => (g1_like(Kind::PointPair), g1_q0()),
        "leap-like" => (leap_like(), leap_q0()),
        "three-finger-plane" => (three_finger_plane(), three_finger_q0()),
        "three-arm-row" => (three_arm_row(), three_arm_row_q0()),
        _ => return None,
    })
}

pub const BUILTIN_NAMES: [&str; 10] = [
    "single-arm",
    "three-arm-circle",
    "three-arm-plane",
    "two-arm-point-pair",
    "two-arm-line",
    "g1-like-line",
    "g1-like-point-pair",
    "leap-like",
    "three-finger-plane",
    "three-arm-row",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_arm_reaches_forward() {
        let c = iiwa_like("a", Multivector::ONE);
        let p = c.end_effector(&IIWA_Q0).unwrap();
        assert!(p[0] < -0.7 && p[0] > -0.8, "{p:?}");
        assert!(p[1].abs() < 1e-9);
        assert!(p[2] > 0.3 && p[2] < 0.55, "{p:?}");
    }

    #[test]
    fn builtins_are_valid_at_nominal() {
        for name in BUILTIN_NAMES {
            let (sys, q0) = builtin(name).unwrap();
            assert_eq!(q0.len(), sys.dof, "{name}");
            let ev = sys.evaluate(&q0, None).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!ev.singularity.singular, "{name}: {:?}", ev.singularity);
        }
    }

    #[test]
    fn three_arm_circle_is_horizontal() {
        let sys = three_arm_circle();
        let p = sys.primitive(&iiwa_q0(3)).unwrap().params().unwrap();
        assert!(p.center[0].abs() < 1e-9 && p.center[1].abs() < 1e-9);
        assert!((p.axis[2].abs() - 1.0).abs() < 1e-9);
        assert!((p.radius() - 0.75).abs() < 0.02, "{}", p.radius());
    }

    #[test]
    fn humanoid_hands_lie_along_y() {
        let sys = g1_like(Kind::Line);
        let pts = sys.end_effectors(&g1_q0()).unwrap();
        assert!(pts[0][1] < 0.0 && pts[1][1] > 0.0);
        assert!(pts[0][0] > 0.1, "{pts:?}");
        assert!((pts[0][0] - pts[1][0]).abs() < 1e-12 && (pts[0][2] - pts[1][2]).abs() < 1e-12);
    }
}
