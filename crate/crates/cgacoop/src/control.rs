//! Task-space dynamics and controllers in the similarity task space.
//!
//! Twists `ξ = J_G q̇` are body twists (see [`crate::cooperative`]). With the
//! error `B_e = log(reverse(V_Sc) V_d)` they satisfy `Ḃ_e = −ξ` to first
//! order near the target.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::algebra::Multivector;
use crate::cooperative::{masked_rows, CooperativeSystem, LogJacobian, SingularityInfo};
use crate::error::{Error, Result};
use crate::linalg::{pinv, spd_pinv, symmetric_eigen_sorted};
use crate::versor::{error_bivector, Bivector};

/// Eigenvalue floor of `J_G M⁻¹ J_Gᵀ`.
pub const TASK_INERTIA_FLOOR: f64 = 1e-10;
/// Time step of the `J̇_G` central difference.
pub const JDOT_STEP: f64 = 1e-6;

/// Joint-space dynamics `M q̈ + C(q, q̇) + g = τ` with `C` the Coriolis force vector.
pub trait JointDynamicsModel {
    fn mass(&self, q: &[f64]) -> DMatrix<f64>;
    fn coriolis(&self, q: &[f64], qd: &[f64]) -> DVector<f64>;
    fn gravity(&self, q: &[f64]) -> DVector<f64>;
}

/// Constant diagonal inertia, no Coriolis or gravity terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalModel {
    pub inertia: f64,
}

impl Default for DiagonalModel {
    fn default() -> Self {
        DiagonalModel { inertia: 1.0 }
    }
}

impl JointDynamicsModel for DiagonalModel {
    fn mass(&self, q: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(q.len(), q.len()) * self.inertia
    }
    fn coriolis(&self, q: &[f64], _qd: &[f64]) -> DVector<f64> {
        DVector::zeros(q.len())
    }
    fn gravity(&self, q: &[f64]) -> DVector<f64> {
        DVector::zeros(q.len())
    }
}

/// Diagonal stiffness and damping on the bivector basis
/// (e23, e13, e12, e0∞, e1∞, e2∞, e3∞).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gains {
    pub k: [f64; 7],
    pub d: [f64; 7],
}

impl Gains {
    /// `K = diag(1, 1, 1, 7.5, 7.5, 7.5, 7.5)`, `D = diag(5, …, 5)`.
    pub fn nominal() -> Self {
        Gains { k: [1.0, 1.0, 1.0, 7.5, 7.5, 7.5, 7.5], d: [5.0; 7] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.iter().chain(&self.d).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Invalid("gains must be positive"));
        }
        Ok(())
    }
}

impl Default for Gains {
    fn default() -> Self {
        Self::nominal()
    }
}

pub fn twist_vec(x: &Bivector) -> DVector<f64> {
    DVector::from_column_slice(x)
}

pub fn to_bivector(v: &DVector<f64>) -> Bivector {
    core::array::from_fn(|k| v[k])
}

/// `J_G(q)` alone.
pub fn jacobian_g(sys: &CooperativeSystem, q: &[f64]) -> Result<DMatrix<f64>> {
    Ok(sys.evaluate(q, None)?.j_g)
}

/// `J̇_G` by central differences along `q ± h q̇`.
pub fn jacobian_g_dot(sys: &CooperativeSystem, q: &[f64], qd: &[f64]) -> Result<DMatrix<f64>> {
    let shift = |s: f64| -> Vec<f64> { q.iter().zip(qd).map(|(a, b)| a + s * b).collect() };
    let a = jacobian_g(sys, &shift(JDOT_STEP))?;
    let b = jacobian_g(sys, &shift(-JDOT_STEP))?;
    Ok((a - b) / (2.0 * JDOT_STEP))
}

/// Task-space inertia, Coriolis and gravity terms.
#[derive(Clone, Debug)]
pub struct TaskDynamics {
    pub versor: Multivector,
    pub j_g: DMatrix<f64>,
    pub m_inv: DMatrix<f64>,
    pub m_s: DMatrix<f64>,
    pub c_s: DVector<f64>,
    pub g_s: DVector<f64>,
    /// Rank of `J_G M⁻¹ J_Gᵀ` kept when inverting.
    pub rank: usize,
    pub singularity: SingularityInfo,
}

/// `M_S = (J_G M⁻¹ J_Gᵀ)⁺`, `C_S = M_S (J_G M⁻¹ C − J̇_G q̇)`, `g_S = M_S J_G M⁻¹ g`.
///
/// The inverse keeps eigenvalues above [`TASK_INERTIA_FLOOR`]; the inertia is
/// singular only when fewer directions remain than the kind can control.
pub fn task_space_dynamics<M: JointDynamicsModel + ?Sized>(
    sys: &CooperativeSystem,
    q: &[f64],
    qd: &[f64],
    model: &M,
) -> Result<TaskDynamics> {
    if qd.len() != sys.dof {
        return Err(Error::DimensionMismatch { expected: sys.dof, found: qd.len() });
    }
    let ev = sys.evaluate(q, None)?;
    let j_g = ev.j_g;
    let m_inv = model.mass(q).try_inverse().ok_or(Error::Invalid("mass matrix is singular"))?;
    let lambda_inv = &j_g * &m_inv * j_g.transpose();
    let (m_s, rank) = spd_pinv(&lambda_inv, TASK_INERTIA_FLOOR);
    let needed = sys.kind.controllable_mask().iter().filter(|m| **m).count();
    if rank < needed {
        let (vals, _) = symmetric_eigen_sorted(&lambda_inv);
        return Err(Error::SingularTaskInertia { min_eigenvalue: vals[needed - 1] });
    }
    let qdv = DVector::from_column_slice(qd);
    let mut c_s = DVector::zeros(7);
    if qdv.norm() > 0.0 {
        let jdot = jacobian_g_dot(sys, q, qd)?;
        let c = model.coriolis(q, qd);
        c_s = &m_s * (&j_g * &m_inv * c - jdot * &qdv);
    }
    let g_s = &m_s * &j_g * &m_inv * model.gravity(q);
    Ok(TaskDynamics { versor: ev.versor, j_g, m_inv, m_s, c_s, g_s, rank, singularity: ev.singularity })
}

/// Result of inverting a twist command.
#[derive(Clone, Debug)]
pub struct DiffKin {
    pub qd: DVector<f64>,
    /// Whether components outside the controllable mask were dropped.
    pub masked_out: bool,
    pub singularity: SingularityInfo,
}

/// `q̇ = J_G⁺ ξ` after zeroing uncontrollable components of `ξ`.
pub fn differential_kinematics(sys: &CooperativeSystem, q: &[f64], xi: &Bivector) -> Result<DiffKin> {
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite twist"));
    }
    let ev = sys.evaluate(q, None)?;
    let mask = sys.kind.controllable_mask();
    let mut cmd = *xi;
    let mut masked_out = false;
    for r in 0..7 {
        if !mask[r] && cmd[r] != 0.0 {
            cmd[r] = 0.0;
            masked_out = true;
        }
    }
    let qd = pinv(&ev.j_g) * twist_vec(&cmd);
    Ok(DiffKin { qd, masked_out, singularity: ev.singularity })
}

/// `N = I − J⁺ J`.
pub fn nullspace_projector(j_g: &DMatrix<f64>) -> DMatrix<f64> {
    let m = j_g.ncols();
    DMatrix::identity(m, m) - pinv(j_g) * j_g
}

/// `q̇ = N(q) q̇_task`.
pub fn project_secondary(sys: &CooperativeSystem, q: &[f64], qd_task: &[f64]) -> Result<DVector<f64>> {
    if qd_task.len() != sys.dof {
        return Err(Error::DimensionMismatch { expected: sys.dof, found: qd_task.len() });
    }
    let j = jacobian_g(sys, q)?;
    Ok(nullspace_projector(&j) * DVector::from_column_slice(qd_task))
}

/// Options of [`gauss_newton_ik`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub min_step: f64,
    pub log_jacobian: LogJacobian,
}

impl Default for IkOptions {
    fn default() -> Self {
        IkOptions { tol: 1e-6, max_iter: 100, armijo: 1e-4, backtrack: 0.5, min_step: 1e-10, log_jacobian: LogJacobian::Analytic }
    }
}

#[derive(Clone, Debug)]
pub struct IkResult {
    pub q: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Residual `‖e‖` after each accepted iterate, starting with the initial one.
    pub trace: Vec<f64>,
}

/// Gauss-Newton on `e(q) = log(reverse(V_Sc(q)) V_d)` with backtracking.
pub fn gauss_newton_ik(sys: &CooperativeSystem, q0: &[f64], desired: &Multivector, opts: &IkOptions) -> Result<IkResult> {
    let norm = |e: &Bivector| libm::sqrt(e.iter().map(|v| v * v).sum::<f64>());
    let mut q = q0.to_vec();
    let (mut e, mut je, _) = sys.error_jacobian(&q, desired, opts.log_jacobian)?;
    let mut res = norm(&e);
    let mut trace = alloc::vec![res];
    let mut it = 0;
    while res > opts.tol && it < opts.max_iter {
        let ev = twist_vec(&e);
        let step = -(pinv(&je) * &ev);
        let slope = (je.transpose() * &ev).dot(&step);
        let f0 = 0.5 * res * res;
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= opts.min_step {
            let trial: Vec<f64> = q.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            if let Ok((e2, j2, _)) = sys.error_jacobian(&trial, desired, opts.log_jacobian) {
                let r2 = norm(&e2);
                if 0.5 * r2 * r2 <= f0 + opts.armijo * alpha * slope {
                    accepted = Some((trial, e2, j2, r2));
                    break;
                }
            }
            alpha *= opts.backtrack;
        }
        let Some((qn, en, jn, rn)) = accepted else { break };
        q = qn;
        e = en;
        je = jn;
        res = rn;
        it += 1;
        trace.push(res);
    }
    if res > opts.tol {
        return Err(Error::NotConverged { best: q, residual: res, iterations: it });
    }
    Ok(IkResult { q, iterations: it, residual: res, trace })
}

/// Move one end-effector to `target` by Gauss-Newton on its position
/// (joints of other chains stay put unless shared).
pub fn point_ik(sys: &CooperativeSystem, slot: usize, q0: &[f64], target: [f64; 3], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut q = q0.to_vec();
    let mut res = f64::INFINITY;
    for _ in 0..=max_iter {
        let (p, j) = sys.point_jacobian(slot, &q)?;
        let e = DVector::from_fn(3, |k, _| target[k] - p[k]);
        res = e.norm();
        if res <= tol {
            return Ok(q);
        }
        let dq = pinv(&j) * e;
        for (a, d) in q.iter_mut().zip(dq.iter()) {
            *a += d;
        }
    }
    Err(Error::NotConverged { best: q, residual: res, iterations: max_iter })
}

/// Output of [`impedance_torque`].
#[derive(Clone, Debug)]
pub struct Impedance {
    pub tau: DVector<f64>,
    pub error: Bivector,
    pub twist: Bivector,
    pub dynamics: TaskDynamics,
}

/// Similarity impedance law for regulation to a fixed `V_d`:
/// `ξ̇_d = K B_e + D (−½ ξ)`, `W_d = M_S ξ̇_d + C_S + g_S`, `τ = J_Gᵀ W_d`.
pub fn impedance_torque<M: JointDynamicsModel + ?Sized>(
    sys: &CooperativeSystem,
    q: &[f64],
    qd: &[f64],
    desired: &Multivector,
    gains: &Gains,
    model: &M,
) -> Result<Impedance> {
    let dynamics = task_space_dynamics(sys, q, qd, model)?;
    let error = error_bivector(&dynamics.versor, desired)?;
    let xi = &dynamics.j_g * DVector::from_column_slice(qd);
    let acc = DVector::from_fn(7, |r, _| gains.k[r] * error[r] - 0.5 * gains.d[r] * xi[r]);
    let wrench = &dynamics.m_s * acc + &dynamics.c_s + &dynamics.g_s;
    let tau = dynamics.j_g.transpose() * wrench;
    Ok(Impedance { tau, error, twist: to_bivector(&xi), dynamics })
}

/// Masked manipulability spectrum, descending.
pub fn masked_spectrum(sys: &CooperativeSystem, j_g: &DMatrix<f64>) -> Vec<f64> {
    let m = masked_rows(j_g, &sys.kind.controllable_mask());
    symmetric_eigen_sorted(&(&m * m.transpose())).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::primitive::Kind;
    use crate::versor::{log, Group};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perturbed(q: &[f64], rng: &mut ChaCha8Rng, s: f64) -> Vec<f64> {
        q.iter().map(|v| v + rng.random_range(-s..s)).collect()
    }

    #[test]
    fn identity_mass_with_orthonormal_rows() {
        let sys = models::three_arm_circle();
        let q = models::iiwa_q0(3);
        let td = task_space_dynamics(&sys, &q, &alloc::vec![0.0; 21], &DiagonalModel::default()).unwrap();
        assert_eq!(td.rank, 6);
        assert_eq!(td.c_s.norm(), 0.0);
        assert_eq!(td.g_s.norm(), 0.0);
        // Energy: ½ξᵀM_Sξ = ½q̇ᵀq̇ for q̇ in the row space.
        let y = DVector::from_column_slice(&[0.3, -0.2, 0.1, 0.5, 0.0, 0.7, -0.4]);
        let qd = td.j_g.transpose() * y;
        let xi = &td.j_g * &qd;
        let lhs = (xi.transpose() * &td.m_s * &xi)[0];
        assert!((lhs - qd.norm_squared()).abs() < 1e-8 * qd.norm_squared());
    }

    #[test]
    fn differential_kinematics_realizes_achievable_twists() {
        let sys = models::three_arm_circle();
        let q = models::iiwa_q0(3);
        let j = jacobian_g(&sys, &q).unwrap();
        let v = DVector::from_fn(21, |i, _| ((i * 13 % 7) as f64 - 3.0) * 0.1);
        let xi = to_bivector(&(&j * v));
        let dk = differential_kinematics(&sys, &q, &xi).unwrap();
        let back = &j * &dk.qd;
        // The e12 row is not commanded; the rest is realized.
        for r in 0..7 {
            if r != 2 {
                assert!((back[r] - xi[r]).abs() < 1e-9 + 1e-3 * xi[2].abs(), "row {r}");
            }
        }
        let zero = differential_kinematics(&sys, &q, &[0.0; 7]).unwrap();
        assert_eq!(zero.qd.norm(), 0.0);
        let p = &j * pinv(&j);
        assert!((&p * &p - &p).norm() < 1e-9 && (&p - p.transpose()).norm() < 1e-9);
    }

    #[test]
    fn pure_dilation_grows_radius() {
        let sys = models::three_arm_circle();
        let mut q = models::iiwa_q0(3);
        let mut last = sys.primitive(&q).unwrap().radius().unwrap();
        for _ in 0..50 {
            let dk = differential_kinematics(&sys, &q, &[0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0]).unwrap();
            for (a, b) in q.iter_mut().zip(dk.qd.iter()) {
                *a += 0.01 * b;
            }
            let r = sys.primitive(&q).unwrap().radius().unwrap();
            // d ln r / dt = s.
            assert!(((r / last).ln() - 0.002).abs() < 2e-5, "{r} {last}");
            last = r;
        }
    }

    #[test]
    fn nullspace_projector_properties() {
        let sys = models::three_arm_circle();
        let q = models::iiwa_q0(3);
        let j = jacobian_g(&sys, &q).unwrap();
        let n = nullspace_projector(&j);
        assert!((&j * &n).norm() < 1e-8);
        assert!((&n * &n - &n).norm() < 1e-8);
        assert!((&n - n.transpose()).norm() < 1e-10);
        let rank_j = j.clone().svd(false, false).rank(1e-8);
        let rank_n = n.clone().svd(false, false).rank(1e-8);
        assert_eq!(rank_n, 21 - rank_j);
        let v = DVector::from_fn(21, |i, _| (i as f64 * 0.37).sin());
        let w = pinv(&j) * (&j * &v);
        assert!((&n * w).norm() < 1e-8);
    }

    #[test]
    fn ik_converges_to_reachable_target() {
        let sys = models::three_arm_circle();
        let q0 = models::iiwa_q0(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let target = sys.similarity(&perturbed(&q0, &mut rng, 0.2)).unwrap();
        let r = gauss_newton_ik(&sys, &q0, &target, &IkOptions::default()).unwrap();
        assert!(r.residual <= 1e-6);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        let at = gauss_newton_ik(&sys, &q0, &sys.similarity(&q0).unwrap(), &IkOptions::default()).unwrap();
        assert_eq!(at.iterations, 0);
    }

    #[test]
    fn ik_reports_unreachable_targets() {
        let sys = models::three_arm_circle();
        let q0 = models::iiwa_q0(3);
        let target = crate::versor::exp_dilator(3.0) * sys.similarity(&q0).unwrap();
        let opts = IkOptions { max_iter: 30, ..Default::default() };
        match gauss_newton_ik(&sys, &q0, &target, &opts) {
            Err(Error::NotConverged { residual, .. }) => assert!(residual > 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn impedance_vanishes_at_target() {
        let sys = models::three_arm_circle();
        let q0 = models::iiwa_q0(3);
        let vd = sys.similarity(&q0).unwrap();
        let imp = impedance_torque(&sys, &q0, &alloc::vec![0.0; 21], &vd, &Gains::nominal(), &DiagonalModel::default()).unwrap();
        assert!(imp.tau.norm() < 1e-12);
    }

    #[test]
    fn error_rate_is_minus_twist() {
        let sys = models::three_arm_circle();
        let q0 = models::iiwa_q0(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let qd: Vec<f64> = (0..21).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vd = sys.similarity(&q0).unwrap();
        let xi = jacobian_g(&sys, &q0).unwrap() * DVector::from_column_slice(&qd);
        let h = 1e-5;
        let at = |s: f64| {
            let q: Vec<f64> = q0.iter().zip(&qd).map(|(a, b)| a + s * b).collect();
            log(Group::Similarity, &(sys.similarity(&q).unwrap().reverse() * vd)).unwrap()
        };
        let (a, b) = (at(h), at(-h));
        for r in 0..7 {
            let rate = (a[r] - b[r]) / (2.0 * h);
            assert!((rate + xi[r]).abs() <= 1e-3 * xi.norm(), "row {r}: {rate} vs {}", -xi[r]);
        }
    }

    #[test]
    fn point_pair_task_inertia_has_full_mask_rank() {
        let sys = models::two_arm(Kind::PointPair);
        let q = models::iiwa_q0(2);
        let td = task_space_dynamics(&sys, &q, &alloc::vec![0.1; 14], &DiagonalModel::default()).unwrap();
        assert!(td.rank >= 6);
        assert!(td.c_s.iter().all(|v| v.is_finite()));
    }
}
