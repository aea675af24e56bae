//! Serial kinematic chains with motor-valued forward kinematics.
//!
//! A joint is a motor bivector `B` with six coordinates
//! (e23, e13, e12, e1∞, e2∞, e3∞). Its motion is the screw exponential
//! `exp(−½ q B)`; for a revolute joint about an axis through a point this is
//! the rotation conjugated by the translation to that point.

use alloc::string::String;
use alloc::vec::Vec;
use libm::sqrt;
use nalgebra::DMatrix;

use crate::algebra::{extract_point, Blade, Multivector};
use crate::error::{Error, Result};
use crate::versor::{exp, exp_rotor, exp_translator, log, rotation_axis_vector, rotation_bivector, Bivector, Group};

/// Motor bivector coordinates (e23, e13, e12, e1∞, e2∞, e3∞).
pub type MotorBivector = [f64; 6];

/// Blades of the motor bivector coordinates.
pub const MOTOR_BLADES: [Blade; 6] = [Blade::E23, Blade::E13, Blade::E12, Blade::E1INF, Blade::E2INF, Blade::E3INF];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JointType {
    Revolute,
    Prismatic,
    /// Given directly as bivector coordinates.
    Screw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub joint_type: JointType,
    pub bivector: MotorBivector,
    pub limits: Option<(f64, f64)>,
    /// Point drawn for the joint; on the axis for revolute joints.
    pub anchor: [f64; 3],
    // Screw decomposition: exp(−½qB) = T(p) T(q t_par) R(q ω) T(−p).
    pivot: [f64; 3],
    omega: [f64; 3],
    t_par: [f64; 3],
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(a: [f64; 3]) -> Result<[f64; 3]> {
    let n = sqrt(dot(a, a));
    if n < 1e-12 {
        return Err(Error::Invalid("zero joint axis"));
    }
    Ok([a[0] / n, a[1] / n, a[2] / n])
}

impl Joint {
    /// General screw joint from bivector coordinates.
    pub fn screw(bivector: MotorBivector) -> Self {
        let omega = rotation_axis_vector([bivector[0], bivector[1], bivector[2]]);
        let t = [bivector[3], bivector[4], bivector[5]];
        let w2 = dot(omega, omega);
        let (pivot, t_par) = if w2 > 1e-24 {
            let s = dot(t, omega) / w2;
            let t_par = [s * omega[0], s * omega[1], s * omega[2]];
            let t_perp = [t[0] - t_par[0], t[1] - t_par[1], t[2] - t_par[2]];
            let c = cross(omega, t_perp);
            ([c[0] / w2, c[1] / w2, c[2] / w2], t_par)
        } else {
            ([0.0; 3], t)
        };
        Joint { joint_type: JointType::Screw, bivector, limits: None, anchor: pivot, pivot, omega, t_par }
    }

    /// Revolute joint about `axis` through `origin` (right-hand rule).
    pub fn revolute(axis: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let a = unit(axis)?;
        let r = rotation_bivector(a, 1.0);
        let t = cross(origin, a);
        let mut j = Joint::screw([r[0], r[1], r[2], t[0], t[1], t[2]]);
        j.joint_type = JointType::Revolute;
        j.anchor = origin;
        Ok(j)
    }

    /// Prismatic joint along `axis`.
    pub fn prismatic(axis: [f64; 3]) -> Result<Self> {
        let a = unit(axis)?;
        let mut j = Joint::screw([0.0, 0.0, 0.0, a[0], a[1], a[2]]);
        j.joint_type = JointType::Prismatic;
        Ok(j)
    }

    pub fn with_anchor(mut self, anchor: [f64; 3]) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn with_limits(mut self, lo: f64, hi: f64) -> Self {
        self.limits = Some((lo, hi));
        self
    }

    /// Axis and a point on it (revolute), or the direction (prismatic).
    pub fn axis_origin(&self) -> ([f64; 3], [f64; 3]) {
        match self.joint_type {
            JointType::Prismatic => ([self.bivector[3], self.bivector[4], self.bivector[5]], [0.0; 3]),
            _ => (self.omega, self.anchor),
        }
    }

    pub fn bivector_mv(&self) -> Multivector {
        let mut m = Multivector::ZERO;
        for (k, b) in MOTOR_BLADES.iter().enumerate() {
            m[*b] = self.bivector[k];
        }
        m
    }

    /// Joint motor `exp(−½ q B)`.
    pub fn motor(&self, q: f64) -> Multivector {
        let r = exp_rotor(rotation_bivector(self.omega, q));
        let tq = exp_translator([q * self.t_par[0], q * self.t_par[1], q * self.t_par[2]]);
        if self.pivot == [0.0; 3] {
            return tq * r;
        }
        let p = self.pivot;
        exp_translator(p) * tq * r * exp_translator([-p[0], -p[1], -p[2]])
    }
}

/// Motor from a translation and rotation coordinates (e23, e13, e12): `T R`.
pub fn pose_motor(translation: [f64; 3], rotation: [f64; 3]) -> Multivector {
    exp_translator(translation) * exp_rotor(rotation)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub name: String,
    pub base: Multivector,
    pub joints: Vec<Joint>,
    pub ee_offset: Multivector,
    pub enforce_limits: bool,
}

impl Chain {
    pub fn new(name: &str, base: Multivector, joints: Vec<Joint>, ee_offset: Multivector) -> Self {
        Chain { name: name.into(), base, joints, ee_offset, enforce_limits: false }
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch { expected: self.dof(), found: q.len() });
        }
        if self.enforce_limits {
            for (i, (j, &v)) in self.joints.iter().zip(q).enumerate() {
                if let Some((lo, hi)) = j.limits {
                    if v < lo || v > hi {
                        return Err(Error::JointLimit { joint: i, value: v });
                    }
                }
            }
        }
        Ok(())
    }

    /// `M = base ∏ exp(−½ q_j B_j) ee_offset`.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Multivector> {
        self.check(q)?;
        let mut m = self.base;
        for (j, &v) in self.joints.iter().zip(q) {
            m = m * j.motor(v);
        }
        Ok(m * self.ee_offset)
    }

    /// Base origin, every joint pivot and the end-effector in world coordinates.
    pub fn joint_points(&self, q: &[f64]) -> Result<Vec<[f64; 3]>> {
        self.check(q)?;
        let e0 = Multivector::e0();
        let mut out = Vec::with_capacity(self.dof() + 2);
        out.push(extract_point(&self.base.sandwich(&e0))?);
        let mut m = self.base;
        for (j, &v) in self.joints.iter().zip(q) {
            let pivot = crate::algebra::embed_point(j.anchor);
            out.push(extract_point(&m.sandwich(&pivot))?);
            m = m * j.motor(v);
        }
        out.push(extract_point(&(m * self.ee_offset).sandwich(&e0))?);
        Ok(out)
    }

    /// End-effector position `M e0 reverse(M)`.
    pub fn end_effector(&self, q: &[f64]) -> Result<[f64; 3]> {
        extract_point(&self.forward_kinematics(q)?.sandwich(&Multivector::e0()))
    }

    /// End-effector motor and its partial derivatives `∂M/∂q_j`.
    pub fn analytic_jacobian(&self, q: &[f64]) -> Result<(Multivector, Vec<Multivector>)> {
        self.check(q)?;
        let n = self.dof();
        let motors: Vec<Multivector> = self.joints.iter().zip(q).map(|(j, &v)| j.motor(v)).collect();
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(self.base);
        for m in &motors {
            let last = *prefix.last().unwrap();
            prefix.push(last * *m);
        }
        let mut suffix = alloc::vec![self.ee_offset; n + 1];
        for j in (0..n).rev() {
            suffix[j] = motors[j] * suffix[j + 1];
        }
        let cols = (0..n)
            .map(|j| prefix[j] * self.joints[j].bivector_mv().scale(-0.5) * suffix[j])
            .collect();
        Ok((prefix[n] * self.ee_offset, cols))
    }

    /// Body-frame geometric Jacobian `−2 reverse(M) ∂M/∂q`, 6×n in motor coordinates.
    pub fn geometric_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let (m, cols) = self.analytic_jacobian(q)?;
        let mr = m.reverse();
        let mut j = DMatrix::zeros(6, self.dof());
        for (c, col) in cols.iter().enumerate() {
            let g = (mr * *col).scale(-2.0);
            for (r, b) in MOTOR_BLADES.iter().enumerate() {
                j[(r, c)] = g[*b];
            }
        }
        Ok(j)
    }
}

/// Relative and absolute motors of two chains:
/// `relative = reverse(M2) M1`, `absolute = M2 exp(½ log(relative))`.
pub fn cdts_motors(m1: &Multivector, m2: &Multivector) -> Result<(Multivector, Multivector)> {
    let relative = m2.reverse() * *m1;
    let b = log(Group::Motor, &relative)?;
    let half: Bivector = core::array::from_fn(|k| 0.5 * b[k]);
    let absolute = *m2 * exp(Group::Motor, &half)?;
    Ok((relative, absolute))
}

/// Conformal point of the end-effector of motor `m`.
pub fn motor_point(m: &Multivector) -> Multivector {
    m.sandwich(&Multivector::e0())
}

/// Translation-only end-effector offset.
pub fn offset(t: [f64; 3]) -> Multivector {
    exp_translator(t)
}
