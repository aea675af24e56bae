//! iLQR for similarity reaching with double-integrator joints.
//!
//! State `x = (q, q̇)`, control `u = q̈`, exact discretization
//! `q⁺ = q + dt q̇ + ½ dt² u`, `q̇⁺ = q̇ + dt u`. The cost is
//! `Σ ½ dt uᵀ R u + ½ eᵀ Q e` with the terminal error
//! `e = log(reverse(V_Sc(q_n)) V_d)`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::algebra::Multivector;
use crate::cooperative::{CooperativeSystem, LogJacobian};
use crate::error::{Error, Result};
use crate::versor::Bivector;

#[derive(Clone, Debug, PartialEq)]
pub struct OcpConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Diagonal of the control weight.
    pub r: f64,
    /// Diagonal of the terminal precision on (e23, e13, e12, e0∞, e1∞, e2∞, e3∞).
    pub q: [f64; 7],
    pub max_iter: usize,
    pub tol: f64,
    pub reg_init: f64,
    pub reg_min: f64,
    pub reg_max: f64,
}

impl Default for OcpConfig {
    fn default() -> Self {
        OcpConfig {
            horizon: 250,
            dt: 1e-3,
            r: 1e-6,
            q: [1.0; 7],
            max_iter: 10,
            tol: 1e-3,
            reg_init: 1e-6,
            reg_min: 1e-9,
            reg_max: 1e10,
        }
    }
}

impl OcpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || !(self.dt > 0.0) || !(self.r > 0.0) || self.q.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Invalid("ocp config needs horizon ≥ 1, dt > 0, R and Q positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OcpSolution {
    /// `(q, q̇)` for steps `0..=n`.
    pub states: Vec<(Vec<f64>, Vec<f64>)>,
    pub controls: Vec<Vec<f64>>,
    /// Total cost after each accepted iteration, starting with the initial rollout.
    pub cost_trace: Vec<f64>,
    pub terminal_error: Bivector,
    pub terminal_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One exact double-integrator step.
pub fn step(q: &[f64], qd: &[f64], u: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let qn = (0..q.len()).map(|i| q[i] + dt * qd[i] + 0.5 * dt * dt * u[i]).collect();
    let qdn = (0..q.len()).map(|i| qd[i] + dt * u[i]).collect();
    (qn, qdn)
}

/// States from `x0` under `controls`.
pub fn rollout(q0: &[f64], qd0: &[f64], controls: &[Vec<f64>], dt: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push((q0.to_vec(), qd0.to_vec()));
    for u in controls {
        let (q, qd) = states.last().unwrap();
        let next = step(q, qd, u, dt);
        states.push(next);
    }
    states
}

fn norm7(e: &Bivector) -> f64 {
    libm::sqrt(e.iter().map(|v| v * v).sum())
}

/// Terminal cost `½ eᵀ Q e`, its gradient and Gauss-Newton Hessian in `q`.
pub fn terminal_cost(
    sys: &CooperativeSystem,
    q: &[f64],
    desired: &Multivector,
    weights: &[f64; 7],
) -> Result<(f64, DVector<f64>, DMatrix<f64>, Bivector)> {
    let (e, je, _) = sys.error_jacobian(q, desired, LogJacobian::Analytic)?;
    let qe = DVector::from_fn(7, |r, _| weights[r] * e[r]);
    let cost = 0.5 * (0..7).map(|r| weights[r] * e[r] * e[r]).sum::<f64>();
    let grad = je.transpose() * &qe;
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    let hess = je.transpose() * w * &je;
    Ok((cost, grad, hess, e))
}

fn running_cost(controls: &[Vec<f64>], cfg: &OcpConfig) -> f64 {
    controls.iter().map(|u| 0.5 * cfg.dt * cfg.r * u.iter().map(|v| v * v).sum::<f64>()).sum()
}

/// Solve the reaching problem from `(q0, q̇0)` to `desired`.
pub fn solve_reaching(
    sys: &CooperativeSystem,
    q0: &[f64],
    qd0: &[f64],
    desired: &Multivector,
    cfg: &OcpConfig,
) -> Result<OcpSolution> {
    cfg.validate()?;
    let m = sys.dof;
    if q0.len() != m || qd0.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: q0.len().min(qd0.len()) });
    }
    let n = cfg.horizon;
    let dt = cfg.dt;
    let mut controls = vec![vec![0.0; m]; n];
    let mut states = rollout(q0, qd0, &controls, dt);
    let (tc, mut grad, mut hess, mut err) = terminal_cost(sys, &states[n].0, desired, &cfg.q)?;
    let mut cost = tc + running_cost(&controls, cfg);
    let mut cost_trace = vec![cost];
    let mut reg = cfg.reg_init;
    let mut iterations = 0;

    // Linear dynamics blocks.
    let eye = DMatrix::<f64>::identity(m, m);
    let mut a = DMatrix::<f64>::identity(2 * m, 2 * m);
    a.view_mut((0, m), (m, m)).copy_from(&(&eye * dt));
    let mut b = DMatrix::<f64>::zeros(2 * m, m);
    b.view_mut((0, 0), (m, m)).copy_from(&(&eye * (0.5 * dt * dt)));
    b.view_mut((m, 0), (m, m)).copy_from(&(&eye * dt));
    let at = a.transpose();
    let bt = b.transpose();
    let r_mat = &eye * (cfg.r * dt);

    while norm7(&err) > cfg.tol && iterations < cfg.max_iter {
        // Backward pass.
        let mut vx = DVector::<f64>::zeros(2 * m);
        vx.rows_mut(0, m).copy_from(&grad);
        let mut vxx = DMatrix::<f64>::zeros(2 * m, 2 * m);
        vxx.view_mut((0, 0), (m, m)).copy_from(&hess);
        let mut gains_k = vec![DVector::<f64>::zeros(m); n];
        let mut gains_kk = vec![DMatrix::<f64>::zeros(m, 2 * m); n];
        let mut expected = 0.0;
        let mut ok = true;
        for k in (0..n).rev() {
            let u = DVector::from_column_slice(&controls[k]);
            let vreg = &vxx + DMatrix::<f64>::identity(2 * m, 2 * m) * reg;
            let qu = &r_mat * &u + &bt * &vx;
            let quu = &r_mat + &bt * &vreg * &b;
            let qux = &bt * &vreg * &a;
            let Some(chol) = quu.clone().cholesky() else {
                ok = false;
                break;
            };
            let kff = -chol.solve(&qu);
            let kfb = -chol.solve(&qux);
            let qx = &at * &vx;
            let qxx = &at * &vxx * &a;
            let qux_plain = &bt * &vxx * &a;
            let quu_plain = &r_mat + &bt * &vxx * &b;
            vx = &qx + kfb.transpose() * &quu_plain * &kff + kfb.transpose() * &qu + qux_plain.transpose() * &kff;
            vxx = &qxx + kfb.transpose() * &quu_plain * &kfb + kfb.transpose() * &qux_plain + qux_plain.transpose() * &kfb;
            vxx = (&vxx + vxx.transpose()) * 0.5;
            expected += kff.dot(&qu) + 0.5 * kff.dot(&(&quu_plain * &kff));
            gains_k[k] = kff;
            gains_kk[k] = kfb;
        }
        if !ok {
            reg = (reg * 10.0).min(cfg.reg_max);
            if reg >= cfg.reg_max {
                break;
            }
            continue;
        }

        // Forward pass with backtracking.
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..10 {
            let mut new_controls = Vec::with_capacity(n);
            let mut q = q0.to_vec();
            let mut qd = qd0.to_vec();
            let mut new_states = Vec::with_capacity(n + 1);
            new_states.push((q.clone(), qd.clone()));
            for k in 0..n {
                let dx = DVector::from_fn(2 * m, |i, _| {
                    if i < m {
                        q[i] - states[k].0[i]
                    } else {
                        qd[i - m] - states[k].1[i - m]
                    }
                });
                let du = &gains_k[k] * alpha + &gains_kk[k] * dx;
                let u: Vec<f64> = (0..m).map(|i| controls[k][i] + du[i]).collect();
                let (qn, qdn) = step(&q, &qd, &u, dt);
                q = qn;
                qd = qdn;
                new_states.push((q.clone(), qd.clone()));
                new_controls.push(u);
            }
            if let Ok((tc, g, h, e)) = terminal_cost(sys, &q, desired, &cfg.q) {
                let c = tc + running_cost(&new_controls, cfg);
                let predicted = alpha * expected;
                if c < cost && (predicted >= 0.0 || cost - c >= -1e-4 * predicted) {
                    accepted = Some((new_controls, new_states, c, g, h, e));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((c_new, s_new, c, g, h, e)) => {
                controls = c_new;
                states = s_new;
                cost = c;
                grad = g;
                hess = h;
                err = e;
                cost_trace.push(cost);
                reg = (reg / 2.0).max(cfg.reg_min);
                iterations += 1;
            }
            None => {
                reg *= 10.0;
                if reg >= cfg.reg_max {
                    break;
                }
                iterations += 1;
            }
        }
    }
    let terminal_norm = norm7(&err);
    Ok(OcpSolution {
        states,
        controls,
        cost_trace,
        terminal_error: err,
        terminal_norm,
        iterations,
        converged: terminal_norm <= cfg.tol,
    })
}

/// Body twists `J_G q̇` along a solution.
pub fn command_trajectory(sys: &CooperativeSystem, sol: &OcpSolution) -> Result<Vec<Bivector>> {
    sol.states
        .iter()
        .map(|(q, qd)| {
            let j = sys.evaluate(q, None)?.j_g;
            let xi = j * DVector::from_column_slice(qd);
            Ok(core::array::from_fn(|r| xi[r]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn at_target_needs_no_control() {
        let sys = models::three_arm_circle();
        let q0 = models::iiwa_q0(3);
        let vd = sys.similarity(&q0).unwrap();
        let sol = solve_reaching(&sys, &q0, &vec![0.0; 21], &vd, &OcpConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 1);
        assert!(sol.controls.iter().all(|u| u.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn reaches_small_perturbation_and_rollout_is_exact() {
        let sys = models::three_arm_circle();
        let q0 = models::iiwa_q0(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let qt: Vec<f64> = q0.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect();
        let vd = sys.similarity(&qt).unwrap();
        let sol = solve_reaching(&sys, &q0, &vec![0.0; 21], &vd, &OcpConfig::default()).unwrap();
        assert!(sol.converged, "{} after {}", sol.terminal_norm, sol.iterations);
        assert!(sol.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        let again = rollout(&q0, &vec![0.0; 21], &sol.controls, 1e-3);
        for (a, b) in again.iter().zip(&sol.states) {
            for i in 0..21 {
                assert!((a.0[i] - b.0[i]).abs() <= 1e-12 && (a.1[i] - b.1[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn terminal_gradient_matches_finite_differences() {
        let sys = models::three_arm_circle();
        let q0 = models::iiwa_q0(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let qt: Vec<f64> = q0.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        let vd = sys.similarity(&qt).unwrap();
        let (_, g, _, _) = terminal_cost(&sys, &q0, &vd, &[1.0; 7]).unwrap();
        let h = 1e-6;
        for j in 0..21 {
            let mut a = q0.clone();
            let mut b = q0.clone();
            a[j] += h;
            b[j] -= h;
            let num = (terminal_cost(&sys, &a, &vd, &[1.0; 7]).unwrap().0 - terminal_cost(&sys, &b, &vd, &[1.0; 7]).unwrap().0) / (2.0 * h);
            assert!((num - g[j]).abs() <= 1e-4 * num.abs().max(1e-3), "{j}: {num} vs {}", g[j]);
        }
    }

    #[test]
    fn exact_discretization() {
        let (q, qd) = step(&[0.0], &[1.0], &[2.0], 0.1);
        assert!((q[0] - 0.11).abs() < 1e-15 && (qd[0] - 1.2).abs() < 1e-15);
    }
}
