//! Scenario-driven simulation and trajectory records.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{jacobian_normalize, Blade, Multivector};
use crate::control::{
    differential_kinematics, gauss_newton_ik, impedance_torque, nullspace_projector, point_ik, DiagonalModel, Gains,
    IkOptions, JointDynamicsModel,
};
use crate::cooperative::{CooperativeSystem, Manipulability};
use crate::error::{Error, Result};
use crate::linalg::pinv;
use crate::ocp::{command_trajectory, solve_reaching, OcpConfig};
use crate::primitive::{Kind, Params, Primitive};
use crate::versor::{exp, log, Bivector, Group};

/// Joint position and velocity at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
}

impl State {
    pub fn at_rest(q: Vec<f64>) -> Self {
        let qd = vec![0.0; q.len()];
        State { t: 0.0, q, qd }
    }
}

/// `q⁺ = q + dt q̇`.
pub fn step_kinematic(state: &State, qd: &[f64], dt: f64) -> State {
    State {
        t: state.t + dt,
        q: state.q.iter().zip(qd).map(|(a, b)| a + dt * b).collect(),
        qd: qd.to_vec(),
    }
}

/// Semi-implicit Euler on `M q̈ = τ − C − g`.
pub fn step_dynamic<M: JointDynamicsModel + ?Sized>(state: &State, tau: &[f64], model: &M, dt: f64) -> Result<State> {
    let mass = model.mass(&state.q);
    let rhs = DVector::from_column_slice(tau) - model.coriolis(&state.q, &state.qd) - model.gravity(&state.q);
    let chol = mass.cholesky().ok_or(Error::Invalid("mass matrix is not positive definite"))?;
    let qdd = chol.solve(&rhs);
    let qd: Vec<f64> = state.qd.iter().zip(qdd.iter()).map(|(v, a)| v + dt * a).collect();
    let q = state.q.iter().zip(&qd).map(|(p, v)| p + dt * v).collect();
    Ok(State { t: state.t + dt, q, qd })
}

/// One row of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub tau: Option<Vec<f64>>,
    /// Coefficients of `X_c` (NaN when degenerate).
    pub blade: [f64; 32],
    pub params: Option<Params>,
    /// `log(V_Sc)` on (e23, e13, e12, e0∞, e1∞, e2∞, e3∞).
    pub log: Bivector,
    /// Body twist command applied at this step.
    pub command: Option<Bivector>,
    pub error_norm: f64,
    /// Eigenvalues of `J_G J_Gᵀ`, descending.
    pub eigenvalues: Vec<f64>,
    pub min_masked_eigenvalue: f64,
    pub degeneracy: f64,
    pub singular: bool,
    pub event: Option<String>,
}

/// Record the cooperative state at `q`. Degenerate configurations yield NaN
/// fields and an event instead of an error.
pub fn record(sys: &CooperativeSystem, state: &State, tau: Option<Vec<f64>>, command: Option<Bivector>, error_norm: f64) -> Record {
    let mut r = Record {
        t: state.t,
        q: state.q.clone(),
        qd: state.qd.clone(),
        tau,
        blade: [f64::NAN; 32],
        params: None,
        log: [f64::NAN; 7],
        command,
        error_norm,
        eigenvalues: vec![f64::NAN; 7],
        min_masked_eigenvalue: f64::NAN,
        degeneracy: f64::NAN,
        singular: true,
        event: None,
    };
    match sys.evaluate(&state.q, None) {
        Ok(ev) => {
            r.blade = ev.primitive.blade.0;
            r.params = ev.primitive.params().ok();
            r.log = log(Group::Similarity, &ev.versor).unwrap_or([f64::NAN; 7]);
            r.eigenvalues = Manipulability::new(&ev.j_g).eigenvalues;
            r.min_masked_eigenvalue = ev.singularity.min_eigenvalue;
            r.degeneracy = ev.singularity.degeneracy;
            r.singular = ev.singularity.singular;
        }
        Err(e) => {
            if let Err(Error::DegeneratePrimitive { measure }) = sys.primitive(&state.q) {
                r.degeneracy = measure;
            }
            r.event = Some(e.to_string());
        }
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Kinematic,
    Dynamic,
    Ik,
    Ocp,
    Nullspace,
    SingularitySweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Kinematic => "kinematic",
            Mode::Dynamic => "dynamic",
            Mode::Ik => "ik",
            Mode::Ocp => "ocp",
            Mode::Nullspace => "nullspace",
            Mode::SingularitySweep => "singularity-sweep",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        [Mode::Kinematic, Mode::Dynamic, Mode::Ik, Mode::Ocp, Mode::Nullspace, Mode::SingularitySweep]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// A twist held from time `t` until the next entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedTwist {
    pub t: f64,
    pub twist: Bivector,
}

/// What the scenario drives toward.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// Hold the initial similarity.
    Hold,
    Versor(Multivector),
    /// Primitive through these points.
    Points(Vec<[f64; 3]>),
    /// `V_Sc(q0) exp(B)` in the body frame.
    Relative(Bivector),
    /// `V_Sc` at a joint configuration.
    Joints(Vec<f64>),
    /// Open-loop twist stream (kinematic mode).
    Commands(Vec<TimedTwist>),
}

/// Secondary Euclidean reach of one chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Secondary {
    pub chain: usize,
    pub goal: SecondaryGoal,
    pub gain: f64,
    /// Project through the similarity nullspace.
    pub projected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SecondaryGoal {
    Point([f64; 3]),
    /// Slide along the primitive: an angle about the axis for rounds, a
    /// distance along the axis for lines and pairs, an in-plane offset along
    /// the first in-plane direction for planes.
    Along(f64),
}

/// Drive one chain's end-effector toward collinearity with the others.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub chain: usize,
    pub steps: usize,
    /// Decades of remaining distance covered by the log-spaced schedule.
    pub decades: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: CooperativeSystem,
    pub mode: Mode,
    pub q0: Vec<f64>,
    /// Uniform joint perturbation half-width applied to `q0`.
    pub perturbation: f64,
    pub seed: u64,
    pub target: Target,
    pub gains: Gains,
    /// Scalar gain of kinematic regulation and the nullspace hold task.
    pub kinematic_gain: f64,
    pub duration: f64,
    pub dt: f64,
    pub inertia: f64,
    pub ocp: OcpConfig,
    pub ik: IkOptions,
    pub secondary: Option<Secondary>,
    /// In nullspace mode, hold these coefficients of the normalized primitive
    /// instead of the whole similarity.
    pub constraint: Vec<Blade>,
    pub sweep: Option<Sweep>,
    /// Joint-speed norm clamp for kinematic stepping.
    pub max_joint_speed: Option<f64>,
    /// Continue after per-step errors instead of aborting.
    pub continue_on_error: bool,
}

impl Scenario {
    pub fn new(name: &str, system: CooperativeSystem, q0: Vec<f64>, mode: Mode) -> Self {
        Scenario {
            name: name.into(),
            system,
            mode,
            q0,
            perturbation: 0.0,
            seed: 0,
            target: Target::Hold,
            gains: Gains::nominal(),
            kinematic_gain: 5.0,
            duration: 1.0,
            dt: 1e-2,
            inertia: 1.0,
            ocp: OcpConfig::default(),
            ik: IkOptions::default(),
            secondary: None,
            constraint: Vec::new(),
            sweep: None,
            max_joint_speed: None,
            continue_on_error: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.duration >= 0.0) {
            return Err(Error::Invalid("dt must be positive and duration non-negative"));
        }
        if self.q0.len() != self.system.dof {
            return Err(Error::DimensionMismatch { expected: self.system.dof, found: self.q0.len() });
        }
        match self.mode {
            Mode::Nullspace if self.secondary.is_none() => Err(Error::Invalid("nullspace mode needs a secondary task")),
            Mode::SingularitySweep if self.sweep.is_none() => Err(Error::Invalid("singularity-sweep mode needs a sweep")),
            Mode::Kinematic | Mode::Dynamic | Mode::Ik | Mode::Ocp | Mode::Nullspace | Mode::SingularitySweep => Ok(()),
        }
    }

    fn steps(&self) -> usize {
        libm::round(self.duration / self.dt) as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub name: String,
    pub mode: String,
    pub steps: usize,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub initial_error: f64,
    pub final_error: f64,
    /// Largest similarity distance from the initial similarity (nullspace mode).
    pub max_similarity_distance: Option<f64>,
    /// Largest drift of the constrained coefficients.
    pub max_constraint_deviation: Option<f64>,
    pub secondary_initial: Option<f64>,
    pub secondary_final: Option<f64>,
    pub clamp_events: usize,
    pub events: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Run {
    pub initial: Vec<f64>,
    pub desired: Option<Multivector>,
    pub records: Vec<Record>,
    pub summary: Summary,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// `‖log(reverse(V) V_d)‖` with the shorter double-cover representative.
pub fn similarity_distance(v: &Multivector, desired: &Multivector) -> Result<f64> {
    Ok(norm(&crate::versor::error_bivector(v, desired)?))
}

/// Initial joints: `q0` plus the seeded perturbation.
pub fn initial_configuration(sc: &Scenario) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    if sc.perturbation > 0.0 {
        sc.q0.iter().map(|v| v + rng.random_range(-sc.perturbation..sc.perturbation)).collect()
    } else {
        sc.q0.clone()
    }
}

/// The similarity the system would report for the primitive `v` carries the
/// unit primitive to. Motions the primitive is invariant to are dropped.
pub fn canonical(kind: Kind, v: &Multivector) -> Result<Multivector> {
    let x = Primitive::unit(kind).transformed(v);
    Ok(crate::primitive::similarity_from_unit_with_tangents(kind, &x.blade, &[], crate::primitive::Orientation::FlipAntipodal)?.0.versor)
}

/// Desired similarity for a target, relative to the nominal `q0`.
pub fn desired_versor(sc: &Scenario) -> Result<Option<Multivector>> {
    let sys = &sc.system;
    Ok(match &sc.target {
        Target::Hold => Some(sys.similarity(&sc.q0)?),
        Target::Versor(v) => Some(canonical(sys.kind, v)?),
        Target::Points(p) => {
            let x = Primitive::from_points(sys.kind, p)?;
            Some(crate::primitive::similarity_between_oriented(&Primitive::unit(sys.kind), &x, crate::primitive::Orientation::FlipAntipodal)?.versor)
        }
        Target::Relative(b) => Some(canonical(sys.kind, &(sys.similarity(&sc.q0)? * exp(Group::Similarity, b)?))?),
        Target::Joints(q) => Some(sys.similarity(q)?),
        Target::Commands(_) => None,
    })
}

fn command_at(cmds: &[TimedTwist], t: f64) -> Bivector {
    let mut out = [0.0; 7];
    for c in cmds {
        if c.t <= t + 1e-12 {
            out = c.twist;
        }
    }
    out
}

fn clamp_speed(qd: &mut [f64], max: Option<f64>) -> bool {
    if let Some(m) = max {
        let n = norm(qd);
        if n > m {
            for v in qd.iter_mut() {
                *v *= m / n;
            }
            return true;
        }
    }
    false
}

fn error_norm(sys: &CooperativeSystem, q: &[f64], desired: Option<&Multivector>) -> f64 {
    match desired {
        Some(d) => sys.similarity(q).and_then(|v| similarity_distance(&v, d)).unwrap_or(f64::NAN),
        None => f64::NAN,
    }
}

/// Goal point of a secondary task, computed at the initial configuration.
pub fn secondary_point(sys: &CooperativeSystem, q: &[f64], sec: &Secondary) -> Result<[f64; 3]> {
    let p = sys.end_effectors(q)?[sec.chain];
    match sec.goal {
        SecondaryGoal::Point(x) => Ok(x),
        SecondaryGoal::Along(s) => {
            let x = sys.primitive(q)?;
            let params = x.params()?;
            let a = params.axis;
            Ok(match sys.kind {
                Kind::Circle | Kind::Sphere => {
                    let rotor = crate::versor::exp_rotor(crate::versor::rotation_bivector(a, s));
                    let c = params.center;
                    let rel = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
                    let r = crate::primitive::rotate(&rotor, rel);
                    [c[0] + r[0], c[1] + r[1], c[2] + r[2]]
                }
                Kind::Line | Kind::PointPair => [p[0] + s * a[0], p[1] + s * a[1], p[2] + s * a[2]],
                Kind::Plane => {
                    let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
                    let d = helper[0] * a[0] + helper[1] * a[1] + helper[2] * a[2];
                    let u = [helper[0] - d * a[0], helper[1] - d * a[1], helper[2] - d * a[2]];
                    let n = norm(&u);
                    [p[0] + s * u[0] / n, p[1] + s * u[1] / n, p[2] + s * u[2] / n]
                }
                Kind::Point => p,
            })
        }
    }
}

/// Normalized primitive coefficients on `blades` and their Jacobian.
pub fn constraint_values(sys: &CooperativeSystem, q: &[f64], blades: &[Blade]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (x, dx) = sys.primitive_jacobian(q)?;
    let n = x.blade.normalized()?;
    let dn = jacobian_normalize(&x.blade, &dx)?;
    let values = blades.iter().map(|b| n[*b]).collect();
    let j = DMatrix::from_fn(blades.len(), sys.dof, |r, c| dn[c][blades[r]]);
    Ok((values, j))
}

/// Run a scenario to completion.
pub fn run_scenario(sc: &Scenario) -> Result<Run> {
    sc.validate()?;
    let sys = &sc.system;
    let q_init = initial_configuration(sc);
    let desired = desired_versor(sc)?;
    let mut summary = Summary { name: sc.name.clone(), mode: sc.mode.name().into(), ..Default::default() };
    let mut records = Vec::new();
    let mut state = State::at_rest(q_init.clone());
    summary.initial_error = error_norm(sys, &state.q, desired.as_ref());
    let model = DiagonalModel { inertia: sc.inertia };

    match sc.mode {
        Mode::Kinematic => {
            for k in 0..=sc.steps() {
                let cmd = match (&sc.target, &desired) {
                    (Target::Commands(c), _) => command_at(c, state.t),
                    (_, Some(d)) => {
                        let (e, _, _) = sys.error_jacobian(&state.q, d, crate::cooperative::LogJacobian::Analytic)?;
                        core::array::from_fn(|r| sc.kinematic_gain * e[r])
                    }
                    _ => [0.0; 7],
                };
                let step = differential_kinematics(sys, &state.q, &cmd);
                let mut qd: Vec<f64> = match &step {
                    Ok(dk) => dk.qd.iter().copied().collect(),
                    Err(e) if sc.continue_on_error => {
                        summary.events.push(e.to_string());
                        vec![0.0; sys.dof]
                    }
                    Err(e) => return Err(e.clone()),
                };
                if clamp_speed(&mut qd, sc.max_joint_speed) {
                    summary.clamp_events += 1;
                }
                state.qd = qd.clone();
                records.push(record(sys, &state, None, Some(cmd), error_norm(sys, &state.q, desired.as_ref())));
                if k < sc.steps() {
                    state = step_kinematic(&state, &qd, sc.dt);
                }
            }
        }
        Mode::Dynamic => {
            let d = desired.ok_or(Error::Invalid("dynamic mode needs a target similarity"))?;
            for k in 0..=sc.steps() {
                let imp = impedance_torque(sys, &state.q, &state.qd, &d, &sc.gains, &model)?;
                let tau: Vec<f64> = imp.tau.iter().copied().collect();
                let mut rec = record(sys, &state, Some(tau.clone()), Some(imp.twist), norm(&imp.error));
                rec.error_norm = norm(&imp.error);
                records.push(rec);
                if k < sc.steps() {
                    state = step_dynamic(&state, &tau, &model, sc.dt)?;
                }
            }
        }
        Mode::Ik => {
            let d = desired.ok_or(Error::Invalid("ik mode needs a target similarity"))?;
            let result = gauss_newton_ik(sys, &state.q, &d, &sc.ik);
            let (q, iterations, converged) = match result {
                Ok(r) => (r.q, r.iterations, true),
                Err(Error::NotConverged { best, iterations, .. }) => (best, iterations, false),
                Err(e) => return Err(e),
            };
            records.push(record(sys, &state, None, None, summary.initial_error));
            state = State { t: iterations as f64, q: q.clone(), qd: vec![0.0; sys.dof] };
            records.push(record(sys, &state, None, None, error_norm(sys, &q, Some(&d))));
            summary.converged = Some(converged);
            summary.iterations = Some(iterations);
        }
        Mode::Ocp => {
            let d = desired.ok_or(Error::Invalid("ocp mode needs a target similarity"))?;
            let sol = solve_reaching(sys, &state.q, &state.qd, &d, &sc.ocp)?;
            let cmds = command_trajectory(sys, &sol)?;
            for (k, ((q, qd), cmd)) in sol.states.iter().zip(&cmds).enumerate() {
                let s = State { t: k as f64 * sc.ocp.dt, q: q.clone(), qd: qd.clone() };
                let tau = sol.controls.get(k).cloned();
                records.push(record(sys, &s, tau, Some(*cmd), error_norm(sys, q, Some(&d))));
            }
            if let Some((q, qd)) = sol.states.last() {
                state = State { t: (sol.states.len() - 1) as f64 * sc.ocp.dt, q: q.clone(), qd: qd.clone() };
            }
            summary.converged = Some(sol.converged);
            summary.iterations = Some(sol.iterations);
        }
        Mode::Nullspace => {
            let sec = sc.secondary.expect("validated");
            let hold = sys.similarity(&state.q)?;
            let goal = secondary_point(sys, &state.q, &sec)?;
            let constrained = !sc.constraint.is_empty();
            let (c0, _) = if constrained { constraint_values(sys, &state.q, &sc.constraint)? } else { (Vec::new(), DMatrix::zeros(0, 0)) };
            let mut max_dist: f64 = 0.0;
            let mut max_dev: f64 = 0.0;
            let reach = |q: &[f64]| -> Result<f64> {
                let p = sys.end_effectors(q)?[sec.chain];
                Ok(norm(&[goal[0] - p[0], goal[1] - p[1], goal[2] - p[2]]))
            };
            summary.secondary_initial = Some(reach(&state.q)?);
            for k in 0..=sc.steps() {
                let (p, jp) = sys.point_jacobian(sec.chain, &state.q)?;
                let v = DVector::from_fn(3, |i, _| sec.gain * (goal[i] - p[i]));
                let task = pinv(&jp) * v;
                let ev = sys.evaluate(&state.q, None)?;
                let dist = similarity_distance(&ev.versor, &hold)?;
                max_dist = max_dist.max(dist);
                let mut err = dist;
                let qd = if constrained {
                    let (c, jc) = constraint_values(sys, &state.q, &sc.constraint)?;
                    let dev = c.iter().zip(&c0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    max_dev = max_dev.max(dev);
                    err = dev;
                    if sec.projected {
                        let jp = pinv(&jc);
                        let fix = DVector::from_fn(c.len(), |i, _| sc.kinematic_gain * (c0[i] - c[i]));
                        let n = DMatrix::identity(sys.dof, sys.dof) - &jp * &jc;
                        &jp * fix + n * task
                    } else {
                        task
                    }
                } else if sec.projected {
                    let (e, _, _) = sys.error_jacobian(&state.q, &hold, crate::cooperative::LogJacobian::Analytic)?;
                    let primary = differential_kinematics(sys, &state.q, &core::array::from_fn(|r| sc.kinematic_gain * e[r]))?.qd;
                    primary + nullspace_projector(&ev.j_g) * task
                } else {
                    task
                };
                let mut qd: Vec<f64> = qd.iter().copied().collect();
                if clamp_speed(&mut qd, sc.max_joint_speed) {
                    summary.clamp_events += 1;
                }
                state.qd = qd.clone();
                let cmd = ev.j_g * DVector::from_column_slice(&qd);
                records.push(record(sys, &state, None, Some(core::array::from_fn(|r| cmd[r])), err));
                if k < sc.steps() {
                    state = step_kinematic(&state, &qd, sc.dt);
                }
            }
            if constrained {
                summary.max_constraint_deviation = Some(max_dev);
            } else {
                summary.max_similarity_distance = Some(max_dist);
            }
            summary.secondary_final = Some(reach(&state.q)?);
        }
        Mode::SingularitySweep => {
            let sw = sc.sweep.expect("validated");
            let pts = sys.end_effectors(&state.q)?;
            let others: Vec<[f64; 3]> = (0..pts.len()).filter(|&i| i != sw.chain).map(|i| pts[i]).collect();
            if others.len() < 2 {
                return Err(Error::Invalid("singularity sweep needs three or more chains"));
            }
            // Foot of the moving point on the line through two other points.
            let (a, b) = (others[0], others[1]);
            let p0 = pts[sw.chain];
            let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let s = ((p0[0] - a[0]) * ab[0] + (p0[1] - a[1]) * ab[1] + (p0[2] - a[2]) * ab[2]) / (ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2]);
            let foot = [a[0] + s * ab[0], a[1] + s * ab[1], a[2] + s * ab[2]];
            for k in 0..=sw.steps {
                let remaining = if k == sw.steps { 0.0 } else { libm::pow(10.0, -sw.decades * k as f64 / sw.steps as f64) };
                let target = core::array::from_fn(|i| foot[i] + remaining * (p0[i] - foot[i]));
                state.q = point_ik(sys, sw.chain, &state.q, target, 1e-13, 50)?;
                state.t = k as f64;
                let rec = record(sys, &state, None, None, remaining);
                let degenerate = rec.event.is_some();
                if let Some(e) = &rec.event {
                    summary.events.push(e.clone());
                }
                records.push(rec);
                if degenerate {
                    break;
                }
            }
        }
    }
    summary.steps = records.len();
    summary.final_error = match sc.mode {
        Mode::Nullspace => records.last().map(|r| r.error_norm).unwrap_or(f64::NAN),
        Mode::SingularitySweep => records.last().map(|r| r.error_norm).unwrap_or(f64::NAN),
        _ => error_norm(sys, &state.q, desired.as_ref()),
    };
    if summary.converged.is_none() && desired.is_some() && sc.mode != Mode::Nullspace {
        summary.converged = Some(summary.final_error <= sc.ik.tol.max(sc.ocp.tol));
    }
    Ok(Run { initial: q_init, desired, records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn kinematic_step_is_exact() {
        let s = State::at_rest(vec![0.0]);
        let n = step_kinematic(&s, &[1.0], 0.01);
        assert_eq!(n.q, vec![0.01]);
        assert_eq!(step_kinematic(&s, &[0.0], 0.01).q, s.q);
    }

    #[test]
    fn dynamic_step_integrates_constant_torque() {
        let mut s = State::at_rest(vec![0.0]);
        let m = DiagonalModel::default();
        for _ in 0..1000 {
            s = step_dynamic(&s, &[1.0], &m, 1e-3).unwrap();
        }
        assert!((s.qd[0] - 1.0).abs() < 1e-3);
        let eq = step_dynamic(&State::at_rest(vec![0.3]), &[0.0], &m, 1e-3).unwrap();
        assert_eq!(eq.q, vec![0.3]);
    }

    #[test]
    fn scenarios_are_deterministic() {
        let (sys, q0) = models::builtin("three-arm-circle").unwrap();
        let mut sc = Scenario::new("k", sys, q0, Mode::Kinematic);
        sc.perturbation = 0.05;
        sc.seed = 4;
        sc.duration = 0.2;
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a.records.len(), 21);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.q, y.q);
            assert_eq!(x.log.map(f64::to_bits), y.log.map(f64::to_bits));
        }
        assert!(a.summary.final_error < a.summary.initial_error);
    }

    #[test]
    fn nullspace_motion_keeps_similarity() {
        let (sys, q0) = models::builtin("three-arm-circle").unwrap();
        let mut sc = Scenario::new("n", sys, q0, Mode::Nullspace);
        sc.secondary = Some(Secondary { chain: 0, goal: SecondaryGoal::Along(0.2), gain: 2.0, projected: true });
        sc.duration = 2.0;
        sc.dt = 1e-3;
        sc.kinematic_gain = 200.0;
        let r = run_scenario(&sc).unwrap();
        assert!(r.summary.max_similarity_distance.unwrap() < 1e-6, "{:?}", r.summary);
        assert!(r.summary.secondary_final.unwrap() < 0.1 * r.summary.secondary_initial.unwrap());
    }

    #[test]
    fn line_constraint_holds_vertical_coefficient() {
        let (sys, q0) = models::builtin("g1-like-line").unwrap();
        let p = sys.end_effectors(&q0).unwrap()[0];
        let mut sc = Scenario::new("l", sys, q0, Mode::Nullspace);
        sc.secondary = Some(Secondary { chain: 0, goal: SecondaryGoal::Point([p[0] + 0.05, p[1] - 0.05, p[2] + 0.1]), gain: 2.0, projected: true });
        sc.constraint = vec![Blade::from_name("e03inf").unwrap()];
        sc.duration = 3.0;
        sc.dt = 1e-3;
        sc.kinematic_gain = 200.0;
        let r = run_scenario(&sc).unwrap();
        let s = &r.summary;
        assert!(s.max_constraint_deviation.unwrap() < 1e-6, "{s:?}");
        assert!(s.secondary_final.unwrap() < 0.1 * s.secondary_initial.unwrap(), "{s:?}");
        let mut free = sc.clone();
        free.secondary.as_mut().unwrap().projected = false;
        assert!(run_scenario(&free).unwrap().summary.max_constraint_deviation.unwrap() > 1e-3);
    }

    #[test]
    fn validation_rejects_missing_fields() {
        let (sys, q0) = models::builtin("three-arm-circle").unwrap();
        let sc = Scenario::new("n", sys, q0, Mode::Nullspace);
        assert!(run_scenario(&sc).is_err());
    }
}
