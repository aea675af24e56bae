//! Cooperative similarity of one to four chains.
//!
//! The end-effector points of the chains are wedged into a primitive `X_c`.
//! The cooperative similarity `V_Sc` maps the unit primitive of the same kind
//! onto `X_c`. Its Jacobians come in three forms:
//!
//! * `J_A`: multivector columns `∂V_Sc/∂q_j`;
//! * `J_G`: 7×m body twists, coordinates of `−2 reverse(V_Sc) J_A`;
//! * `J_B`: 7×m derivative of `log(V_Sc)`.
//!
//! Twist coordinates use the same (e23, e13, e12, e0∞, e1∞, e2∞, e3∞) order as
//! bivectors, so that `log(reverse(V(q)) V(q + ε q̇)) ≈ ε J_G q̇`. Because the
//! dilator exponential is `exp(+½ b e0∞)`, the dilation row is the negated
//! e0∞ coefficient of `−2 reverse(V) J_A`.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::algebra::Multivector;
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_sorted;
use crate::primitive::{degeneracy_measure, similarity_from_unit_with_tangents, Kind, Orientation, Primitive};
use crate::versor::{bivector_coords, bivector_mv, log_jacobian, log_jacobian_fd, similarity_coeffs, Bivector, SIMILARITY_BLADES};

/// Finite-difference step of the default `J_{S→B}`.
pub const LOG_JACOBIAN_STEP: f64 = 1e-7;
/// Manipulability eigenvalues below this are treated as zero when inverting.
pub const MANIPULABILITY_FLOOR: f64 = 1e-12;
/// Below this masked manipulability eigenvalue the configuration is flagged singular.
pub const SINGULAR_EIGENVALUE: f64 = 1e-6;

/// A chain and the indices of its joints in the system's joint vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub chain: Chain,
    pub joints: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CooperativeSystem {
    pub name: String,
    pub slots: Vec<Slot>,
    pub dof: usize,
    pub kind: Kind,
}

/// Orientation memory for circle/plane normals and line/pair directions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OrientationContext {
    pub axis: Option<[f64; 3]>,
}

/// Geometric-singularity indicators attached to every Jacobian evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularityInfo {
    /// Carrier-flat degeneracy measure of `X_c`.
    pub degeneracy: f64,
    /// Smallest eigenvalue of `J_G J_Gᵀ` restricted to the controllable rows.
    pub min_eigenvalue: f64,
    pub singular: bool,
}

/// Everything evaluated at one configuration.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub versor: Multivector,
    pub primitive: Primitive,
    pub axis: [f64; 3],
    pub flipped: bool,
    pub j_a: Vec<Multivector>,
    pub j_g: DMatrix<f64>,
    pub singularity: SingularityInfo,
}

/// How `J_{S→B}` is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LogJacobian {
    #[default]
    FiniteDifference,
    Analytic,
}

/// Body-twist coordinates of the bivector `−2 reverse(V) dV`.
pub fn twist_coords(b: &Multivector) -> Bivector {
    let mut c = bivector_coords(b);
    c[3] = -c[3];
    c
}

/// Inverse of [`twist_coords`].
pub fn twist_mv(x: &Bivector) -> Multivector {
    let mut c = *x;
    c[3] = -c[3];
    bivector_mv(&c)
}

/// Manipulability `J Jᵀ`, its eigenvalues (descending) and inverse when it exists.
#[derive(Clone, Debug)]
pub struct Manipulability {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Manipulability {
    pub fn new(j: &DMatrix<f64>) -> Self {
        let matrix = j * j.transpose();
        let (eigenvalues, eigenvectors) = symmetric_eigen_sorted(&matrix);
        Manipulability { matrix, eigenvalues, eigenvectors }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let min = self.min_eigenvalue();
        if min <= MANIPULABILITY_FLOOR {
            return Err(Error::SingularManipulability { min_eigenvalue: min });
        }
        let n = self.matrix.nrows();
        let mut out = DMatrix::zeros(n, n);
        for (k, &v) in self.eigenvalues.iter().enumerate() {
            let col = self.eigenvectors.column(k);
            out += col * col.transpose() / v;
        }
        Ok(out)
    }
}

/// Rows of `j` selected by `mask`.
pub fn masked_rows(j: &DMatrix<f64>, mask: &[bool; 7]) -> DMatrix<f64> {
    let rows: Vec<usize> = (0..7).filter(|&r| mask[r]).collect();
    let mut out = DMatrix::zeros(rows.len(), j.ncols());
    for (k, &r) in rows.iter().enumerate() {
        out.set_row(k, &j.row(r));
    }
    out
}

impl CooperativeSystem {
    /// Chains with disjoint joints stacked in order.
    pub fn stacked(name: &str, chains: Vec<Chain>, kind: Kind) -> Result<Self> {
        let mut next = 0;
        let slots = chains
            .into_iter()
            .map(|chain| {
                let joints = (next..next + chain.dof()).collect();
                next += chain.dof();
                Slot { chain, joints }
            })
            .collect();
        Self::with_slots(name, slots, next, kind)
    }

    /// Chains whose joints map into a shared joint vector of size `dof`.
    pub fn with_slots(name: &str, slots: Vec<Slot>, dof: usize, kind: Kind) -> Result<Self> {
        if slots.is_empty() || slots.len() > 4 || slots.len() != kind.point_count() {
            return Err(Error::ChainCount(slots.len()));
        }
        for s in &slots {
            if s.joints.len() != s.chain.dof() {
                return Err(Error::DimensionMismatch { expected: s.chain.dof(), found: s.joints.len() });
            }
            if s.joints.iter().any(|&j| j >= dof) {
                return Err(Error::Invalid("joint index out of range"));
            }
        }
        Ok(CooperativeSystem { name: name.into(), slots, dof, kind })
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof {
            return Err(Error::DimensionMismatch { expected: self.dof, found: q.len() });
        }
        Ok(())
    }

    pub fn chain_q(&self, slot: usize, q: &[f64]) -> Vec<f64> {
        self.slots[slot].joints.iter().map(|&j| q[j]).collect()
    }

    pub fn end_effectors(&self, q: &[f64]) -> Result<Vec<[f64; 3]>> {
        self.check(q)?;
        (0..self.slots.len()).map(|i| self.slots[i].chain.end_effector(&self.chain_q(i, q))).collect()
    }

    /// Primitive formed by the end-effectors.
    pub fn primitive(&self, q: &[f64]) -> Result<Primitive> {
        self.check(q)?;
        let mut pts = Vec::with_capacity(self.slots.len());
        for i in 0..self.slots.len() {
            let m = self.slots[i].chain.forward_kinematics(&self.chain_q(i, q))?;
            pts.push(m.sandwich(&Multivector::e0()));
        }
        Primitive::from_conformal_points(self.kind, &pts)
    }

    /// `V_Sc(q)`: pure function of `q` (antipodal axes are flipped).
    pub fn similarity(&self, q: &[f64]) -> Result<Multivector> {
        let x = self.primitive(q)?;
        Ok(similarity_from_unit_with_tangents(self.kind, &x.blade, &[], Orientation::FlipAntipodal)?.0.versor)
    }

    /// `V_Sc(q)` following the axis stored in `ctx`; updates `ctx`.
    pub fn similarity_with(&self, q: &[f64], ctx: &mut OrientationContext) -> Result<Multivector> {
        let x = self.primitive(q)?;
        let m = similarity_from_unit_with_tangents(self.kind, &x.blade, &[], orientation(ctx))?.0;
        if self.kind.has_axis() {
            ctx.axis = Some(m.axis);
        }
        Ok(m.versor)
    }

    /// Primitive blade and its derivative along every joint.
    pub fn primitive_jacobian(&self, q: &[f64]) -> Result<(Primitive, Vec<Multivector>)> {
        self.check(q)?;
        let e0 = Multivector::e0();
        let n = self.slots.len();
        let mut points = Vec::with_capacity(n);
        let mut dpoints: Vec<Vec<(usize, Multivector)>> = Vec::with_capacity(n);
        for (i, slot) in self.slots.iter().enumerate() {
            let (m, cols) = slot.chain.analytic_jacobian(&self.chain_q(i, q))?;
            let mr = m.reverse();
            points.push(m * e0 * mr);
            dpoints.push(
                cols.iter()
                    .zip(&slot.joints)
                    .map(|(jc, &g)| (g, *jc * e0 * mr + m * e0 * jc.reverse()))
                    .collect(),
            );
        }
        let prim = Primitive::from_conformal_points(self.kind, &points)?;
        let einf = Multivector::einf();
        let mut dx = alloc::vec![Multivector::ZERO; self.dof];
        for i in 0..n {
            // Wedge of the points before and after slot i.
            let before = points[..i].iter().fold(Multivector::ONE, |a, p| a.wedge(p));
            let mut after = points[i + 1..].iter().fold(Multivector::ONE, |a, p| a.wedge(p));
            if self.kind.is_flat() {
                after = after.wedge(&einf);
            }
            for (g, dp) in &dpoints[i] {
                dx[*g] += before.wedge(dp).wedge(&after);
            }
        }
        Ok((prim, dx))
    }

    /// End-effector position of one slot and its 3×m Jacobian in the system joints.
    pub fn point_jacobian(&self, slot: usize, q: &[f64]) -> Result<([f64; 3], DMatrix<f64>)> {
        self.check(q)?;
        let s = &self.slots[slot];
        let (m, cols) = s.chain.analytic_jacobian(&self.chain_q(slot, q))?;
        let e0 = Multivector::e0();
        let mr = m.reverse();
        let p = crate::algebra::extract_point(&(m * e0 * mr))?;
        let mut j = DMatrix::zeros(3, self.dof);
        for (c, &g) in cols.iter().zip(&s.joints) {
            let dp = (*c * e0 * mr + m * e0 * c.reverse()).euclidean();
            for k in 0..3 {
                j[(k, g)] += dp[k];
            }
        }
        Ok((p, j))
    }

    /// Versor, `J_A`, `J_G` and singularity indicators.
    pub fn evaluate(&self, q: &[f64], ctx: Option<&mut OrientationContext>) -> Result<Evaluation> {
        let (prim, dx) = self.primitive_jacobian(q)?;
        let orient = match &ctx {
            Some(c) => orientation(c),
            None => Orientation::FlipAntipodal,
        };
        let (m, j_a) = similarity_from_unit_with_tangents(self.kind, &prim.blade, &dx, orient)?;
        if let Some(c) = ctx {
            if self.kind.has_axis() {
                c.axis = Some(m.axis);
            }
        }
        let vr = m.versor.reverse();
        let mut j_g = DMatrix::zeros(7, self.dof);
        for (c, col) in j_a.iter().enumerate() {
            let t = twist_coords(&(vr * *col).scale(-2.0));
            for r in 0..7 {
                j_g[(r, c)] = t[r];
            }
        }
        let masked = masked_rows(&j_g, &self.kind.controllable_mask());
        let min_eigenvalue = Manipulability::new(&masked).min_eigenvalue();
        let degeneracy = if self.kind == Kind::Point { 1.0 } else { degeneracy_measure(self.kind, &prim.blade) };
        let singularity = SingularityInfo {
            degeneracy,
            min_eigenvalue,
            singular: min_eigenvalue < SINGULAR_EIGENVALUE,
        };
        Ok(Evaluation { versor: m.versor, primitive: prim, axis: m.axis, flipped: m.flipped, j_a, j_g, singularity })
    }

    /// `J_B = J_{S→B} J_A` (7×m).
    pub fn jacobian_b(&self, q: &[f64], mode: LogJacobian) -> Result<DMatrix<f64>> {
        let ev = self.evaluate(q, None)?;
        let ls = match mode {
            LogJacobian::FiniteDifference => log_jacobian_fd(&ev.versor, LOG_JACOBIAN_STEP)?,
            LogJacobian::Analytic => log_jacobian(&ev.versor)?,
        };
        Ok(ls * coefficient_matrix(&ev.j_a))
    }

    /// Error `log(reverse(V_Sc) V_d)` (shortest representative) and its
    /// Jacobian with respect to `q`.
    pub fn error_jacobian(&self, q: &[f64], desired: &Multivector, mode: LogJacobian) -> Result<(Bivector, DMatrix<f64>, Evaluation)> {
        let ev = self.evaluate(q, None)?;
        let mut e = ev.versor.reverse() * *desired;
        let sign = if e[crate::algebra::Blade::SCALAR] < 0.0 { -1.0 } else { 1.0 };
        e = e.scale(sign);
        let err = crate::versor::log(crate::versor::Group::Similarity, &e)?;
        let de: Vec<Multivector> = ev.j_a.iter().map(|c| (c.reverse() * *desired).scale(sign)).collect();
        let ls = match mode {
            LogJacobian::FiniteDifference => log_jacobian_fd(&e, LOG_JACOBIAN_STEP)?,
            LogJacobian::Analytic => log_jacobian(&e)?,
        };
        Ok((err, ls * coefficient_matrix(&de), ev))
    }
}

fn orientation(ctx: &OrientationContext) -> Orientation {
    match ctx.axis {
        Some(a) => Orientation::Follow(a),
        None => Orientation::FlipAntipodal,
    }
}

/// 12×m matrix of similarity-blade coefficients of multivector columns.
pub fn coefficient_matrix(cols: &[Multivector]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(SIMILARITY_BLADES.len(), cols.len());
    for (c, col) in cols.iter().enumerate() {
        let k = similarity_coeffs(col);
        for r in 0..12 {
            a[(r, c)] = k[r];
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::versor::{log, Group};
    use alloc::vec;

    fn fd<F: Fn(&[f64]) -> Multivector>(f: F, q: &[f64], j: usize, h: f64) -> Multivector {
        let mut a = q.to_vec();
        let mut b = q.to_vec();
        a[j] += h;
        b[j] -= h;
        (f(&a) - f(&b)).scale(0.5 / h)
    }

    fn rel(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale.max(1.0)
    }

    fn systems() -> Vec<(CooperativeSystem, Vec<f64>)> {
        models::BUILTIN_NAMES.iter().map(|n| models::builtin(n).unwrap()).collect()
    }

    #[test]
    fn primitive_and_similarity_jacobians_match_finite_differences() {
        for (sys, q) in systems() {
            let (_, dx) = sys.primitive_jacobian(&q).unwrap();
            let ev = sys.evaluate(&q, None).unwrap();
            for j in 0..sys.dof {
                let num = fd(|q| sys.primitive(q).unwrap().blade, &q, j, 1e-6);
                assert!(num.distance(&dx[j]) / num.max_abs().max(1.0) < 1e-7, "{} X col {j}", sys.name);
                let num = fd(|q| sys.similarity(q).unwrap(), &q, j, 1e-6);
                assert!(num.distance(&ev.j_a[j]) / num.max_abs().max(1.0) < 1e-7, "{} J_A col {j}", sys.name);
            }
        }
    }

    #[test]
    fn body_twist_matches_log_of_relative_motion() {
        for (sys, q) in systems() {
            let ev = sys.evaluate(&q, None).unwrap();
            let vr = ev.versor.reverse();
            let h = 1e-6;
            for j in 0..sys.dof {
                let step = |s: f64| {
                    let mut qq = q.clone();
                    qq[j] += s;
                    log(Group::Similarity, &(vr * sys.similarity(&qq).unwrap())).unwrap()
                };
                let (a, b) = (step(h), step(-h));
                for r in 0..7 {
                    let num = (a[r] - b[r]) / (2.0 * h);
                    assert!(rel(num, ev.j_g[(r, j)], num.abs()) < 1e-6, "{} row {r} col {j}: {num} vs {}", sys.name, ev.j_g[(r, j)]);
                }
                // J_A = V (−½ J_G) in multivector form.
                let col: Bivector = core::array::from_fn(|r| ev.j_g[(r, j)]);
                let back = ev.versor * twist_mv(&col).scale(-0.5);
                assert!(back.distance(&ev.j_a[j]) < 1e-10);
            }
        }
    }

    #[test]
    fn log_jacobian_matches_finite_differences() {
        for (sys, q) in systems() {
            let jb = sys.jacobian_b(&q, LogJacobian::Analytic).unwrap();
            let jf = sys.jacobian_b(&q, LogJacobian::FiniteDifference).unwrap();
            let h = 1e-6;
            for j in 0..sys.dof {
                let step = |s: f64| {
                    let mut qq = q.clone();
                    qq[j] += s;
                    log(Group::Similarity, &sys.similarity(&qq).unwrap()).unwrap()
                };
                let (a, b) = (step(h), step(-h));
                for r in 0..7 {
                    let num = (a[r] - b[r]) / (2.0 * h);
                    assert!(rel(num, jb[(r, j)], num.abs()) < 1e-6, "{} row {r} col {j}", sys.name);
                    assert!(rel(num, jf[(r, j)], num.abs()) < 1e-5, "{} fd row {r} col {j}", sys.name);
                }
            }
        }
    }

    #[test]
    fn error_jacobian_matches_finite_differences() {
        let sys = models::three_arm_circle();
        let q0 = models::iiwa_q0(3);
        let mut qd = q0.clone();
        for (k, v) in qd.iter_mut().enumerate() {
            *v += 0.05 * ((k * 7 % 5) as f64 - 2.0);
        }
        let vd = sys.similarity(&qd).unwrap();
        let (_, je, _) = sys.error_jacobian(&q0, &vd, LogJacobian::Analytic).unwrap();
        let h = 1e-6;
        for j in 0..sys.dof {
            let step = |s: f64| {
                let mut qq = q0.clone();
                qq[j] += s;
                sys.error_jacobian(&qq, &vd, LogJacobian::Analytic).unwrap().0
            };
            let (a, b) = (step(h), step(-h));
            for r in 0..7 {
                let num = (a[r] - b[r]) / (2.0 * h);
                assert!(rel(num, je[(r, j)], num.abs()) < 1e-6);
            }
        }
    }

    #[test]
    fn single_chain_reduces_to_point_jacobian() {
        let sys = models::single_arm();
        let q = models::iiwa_q0(1);
        let ev = sys.evaluate(&q, None).unwrap();
        let gj = sys.slots[0].chain.geometric_jacobian(&q).unwrap();
        let (m, _) = sys.slots[0].chain.analytic_jacobian(&q).unwrap();
        // Translation rows of the point similarity equal the world-frame EE velocity.
        let p = crate::algebra::extract_point(&m.sandwich(&Multivector::e0())).unwrap();
        for j in 0..sys.dof {
            let num = fd(|q| crate::algebra::embed_point(sys.slots[0].chain.end_effector(q).unwrap()), &q, j, 1e-6);
            let v = num.euclidean();
            for k in 0..3 {
                assert!((ev.j_g[(4 + k, j)] - v[k]).abs() < 1e-6);
            }
            for r in 0..4 {
                assert_eq!(ev.j_g[(r, j)], 0.0);
            }
        }
        assert_eq!(gj.ncols(), 7);
        assert!(p[0] < 0.0);
    }

    #[test]
    fn frozen_system_has_zero_jacobian_and_shared_joints_accumulate() {
        let sys = models::g1_like(Kind::Line);
        let q = models::g1_q0();
        let ev = sys.evaluate(&q, None).unwrap();
        // Waist yaw moves both hands; it must appear once with both contributions.
        let num = fd(|q| sys.similarity(q).unwrap(), &q, 0, 1e-6);
        assert!(num.distance(&ev.j_a[0]) < 1e-7);
        assert!(ev.j_g.column(0).norm() > 1e-3);
    }

    #[test]
    fn point_jacobian_matches_finite_differences() {
        let sys = models::g1_like(Kind::Line);
        let q = models::g1_q0();
        for slot in 0..2 {
            let (_, j) = sys.point_jacobian(slot, &q).unwrap();
            for c in 0..sys.dof {
                let num = fd(|q| crate::algebra::embed_point(sys.end_effectors(q).unwrap()[slot]), &q, c, 1e-6).euclidean();
                for k in 0..3 {
                    assert!((num[k] - j[(k, c)]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn manipulability_inverse_and_singularity() {
        let m = Manipulability::new(&DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0]));
        assert_eq!(m.eigenvalues, vec![4.0, 1.0]);
        assert!((m.inverse().unwrap() * &m.matrix - DMatrix::identity(2, 2)).norm() < 1e-12);
        let s = Manipulability::new(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert!(matches!(s.inverse(), Err(Error::SingularManipulability { .. })));
    }
}
