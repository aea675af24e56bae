//! Verification suites: identity checks and finite-difference oracles.

use std::fmt;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Result};
use cgacoop::algebra::{jacobian_inverse, jacobian_normalize, Blade, BLADE_GRADE, BLADE_MASK};
use cgacoop::control::{differential_kinematics, gauss_newton_ik, nullspace_projector, IkOptions};
use cgacoop::cooperative::{CooperativeSystem, LogJacobian};
use cgacoop::models;
use cgacoop::ocp::{rollout, solve_reaching, OcpConfig};
use cgacoop::primitive::{similarity_between, Kind, Primitive};
use cgacoop::versor::{exp, log, rotation_bivector, Bivector, Group, SIMILARITY_BLADES};
use cgacoop::Multivector;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SUITES: [&str; 5] = ["algebra", "groups", "jacobians", "similarity", "controllers"];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

impl Check {
    /// Pass when `measured ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64, samples: usize) -> Self {
        Check { name: name.into(), measured, tolerance, samples, passed: measured <= tolerance }
    }

    /// Pass when `measured ≥ tolerance`.
    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64, samples: usize) -> Self {
        Check { name: name.into(), measured, tolerance, samples, passed: measured >= tolerance }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub suite: String,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {} ({:.2} s)", self.suite, self.elapsed.as_secs_f64())?;
        for c in &self.checks {
            writeln!(
                f,
                "  {} {:<44} measured {:.3e} tol {:.1e} n={}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance,
                c.samples
            )?;
        }
        Ok(())
    }
}

/// Sample sizes for each suite.
#[derive(Clone, Copy, Debug)]
pub struct Sizes {
    pub triples: usize,
    pub group_samples: usize,
    pub configs: usize,
    pub pairs: usize,
    pub ik_seeds: usize,
}

impl Sizes {
    pub const FULL: Sizes = Sizes { triples: 1000, group_samples: 10_000, configs: 50, pairs: 500, ik_seeds: 20 };
    pub const QUICK: Sizes = Sizes { triples: 100, group_samples: 500, configs: 3, pairs: 50, ik_seeds: 3 };
}

pub fn run_suite(name: &str, seed: u64, sizes: Sizes) -> Result<Report> {
    match name {
        "algebra" => Ok(algebra(seed, sizes.triples)),
        "groups" => Ok(groups(seed, sizes.group_samples)),
        "jacobians" => jacobians(seed, sizes.configs, &JACOBIAN_SYSTEMS),
        "similarity" => Ok(similarity(seed, sizes.pairs)),
        "controllers" => controllers(seed, sizes.ik_seeds),
        _ => Err(anyhow!("unknown suite {name:?}; known: {}", SUITES.join(", "))),
    }
}

fn timed(suite: &str, f: impl FnOnce() -> Vec<Check>) -> Report {
    let start = Instant::now();
    let checks = f();
    Report { suite: suite.into(), checks, elapsed: start.elapsed() }
}

fn random_mv(rng: &mut ChaCha8Rng) -> Multivector {
    Multivector(std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
}

pub fn algebra(seed: u64, triples: usize) -> Report {
    timed("algebra", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e0 = Multivector::e0();
        let ei = Multivector::einf();
        let i = Multivector::pseudoscalar();
        let one = Multivector::ONE;
        let mut checks = vec![
            Check::at_most("e0^2 = 0", (e0 * e0).max_abs(), 0.0, 1),
            Check::at_most("einf^2 = 0", (ei * ei).max_abs(), 0.0, 1),
            Check::at_most("e0 . einf = -1", ((e0 * ei + ei * e0).scale(0.5) + one).max_abs(), 0.0, 1),
            Check::at_most("I^2 = -1", (i * i + one).max_abs(), 0.0, 1),
        ];
        let mut assoc = 0.0f64;
        let mut rev = 0.0f64;
        for _ in 0..triples {
            let (a, b, c) = (random_mv(&mut rng), random_mv(&mut rng), random_mv(&mut rng));
            let l = (a * b) * c;
            let r = a * (b * c);
            assoc = assoc.max((l - r).max_abs() / l.max_abs().max(1.0));
            rev = rev.max(((a * b).reverse() - b.reverse() * a.reverse()).max_abs());
        }
        checks.push(Check::at_most("associativity (relative)", assoc, 1e-12, triples));
        checks.push(Check::at_most("reverse(ab) = reverse(b) reverse(a)", rev, 1e-12, triples));
        let mut outside = 0.0f64;
        for _ in 0..triples {
            let v1 = random_similarity(&mut rng);
            let v2 = random_similarity(&mut rng);
            let p = v1 * v2;
            for b in 0..32 {
                let blade = Blade(b);
                if !SIMILARITY_BLADES.contains(&blade) {
                    outside = outside.max(p[blade].abs());
                }
            }
        }
        checks.push(Check::at_most("similarity closure (off-subspace coefficients)", outside, 0.0, triples));
        let grades = SIMILARITY_BLADES.iter().fold([0usize; 6], |mut g, b| {
            g[b.grade()] += 1;
            g
        });
        let layout_ok = grades == [1, 0, 7, 0, 4, 0] && BLADE_MASK.len() == 32 && BLADE_GRADE.iter().filter(|g| **g == 2).count() == 10;
        checks.push(Check::at_most("similarity subspace is 1+7+4 blades", if layout_ok { 0.0 } else { 1.0 }, 0.0, 1));
        checks
    })
}

fn random_bivector(rng: &mut ChaCha8Rng, group: Group) -> Bivector {
    let mut b = [0.0; 7];
    let mask = group.coordinate_mask();
    if mask[0] {
        let dir: [f64; 3] = loop {
            let d: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if n > 1e-3 && n <= 1.0 {
                break [d[0] / n, d[1] / n, d[2] / n];
            }
        };
        let angle = rng.random_range(1e-6..std::f64::consts::PI - 0.1);
        let r = rotation_bivector(dir, angle);
        b[..3].copy_from_slice(&r);
    }
    if mask[3] {
        b[3] = rng.random_range(-2.0..2.0);
    }
    if mask[4] {
        for k in 4..7 {
            b[k] = rng.random_range(-2.0..2.0);
        }
    }
    b
}

fn random_similarity(rng: &mut ChaCha8Rng) -> Multivector {
    exp(Group::Similarity, &random_bivector(rng, Group::Similarity)).expect("coordinates are in the group")
}

pub const GROUPS: [Group; 5] = [Group::Rotor, Group::Translator, Group::Dilator, Group::Motor, Group::Similarity];

pub fn groups(seed: u64, samples: usize) -> Report {
    timed("groups", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checks = Vec::new();
        for g in GROUPS {
            let mut round = 0.0f64;
            let mut constraint = 0.0f64;
            let mut support = 0.0f64;
            let mut failures = 0usize;
            for _ in 0..samples {
                let b = random_bivector(&mut rng, g);
                let v = exp(g, &b).expect("coordinates are in the group");
                match log(g, &v) {
                    Ok(back) => round = round.max(b.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)),
                    Err(_) => failures += 1,
                }
                constraint = constraint.max((v * v.reverse() - Multivector::ONE).max_abs());
                for k in 0..32 {
                    if !g.support().contains(&Blade(k)) {
                        support = support.max(v[Blade(k)].abs());
                    }
                }
            }
            let name = format!("{g:?}").to_lowercase();
            checks.push(Check::at_most(format!("{name} exp/log round trip"), if failures > 0 { f64::INFINITY } else { round }, 1e-10, samples));
            checks.push(Check::at_most(format!("{name} versor constraint"), constraint, 1e-10, samples));
            checks.push(Check::at_most(format!("{name} support"), support, 0.0, samples));
        }
        let d = cgacoop::versor::exp_dilator(0.3679f64.ln());
        let b = log(Group::Dilator, &d).map(|b| (b[3] + 1.0).abs()).unwrap_or(f64::INFINITY);
        checks.push(Check::at_most("dilator d=0.3679 <-> -e0inf", b, 1e-4, 1));
        let back = exp(Group::Dilator, &[0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]).expect("dilator");
        let scale = cgacoop::algebra::extract_point(&back.sandwich(&cgacoop::algebra::embed_point([1.0, 0.0, 0.0])))
            .map(|p| (p[0] - 0.3679).abs())
            .unwrap_or(f64::INFINITY);
        checks.push(Check::at_most("-e0inf scales distances by 0.3679", scale, 1e-4, 1));
        checks
    })
}

/// Systems with 7, 17 and 21 joints.
pub const JACOBIAN_SYSTEMS: [&str; 3] = ["single-arm", "g1-like-line", "three-arm-circle"];

const FD_STEP: f64 = 1e-6;

fn rel_err(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    let n = numeric.norm();
    let d = (analytic - numeric).norm();
    if n < 1e-9 {
        d
    } else {
        d / n
    }
}

fn mv_columns(cols: &[Multivector]) -> DMatrix<f64> {
    DMatrix::from_fn(32, cols.len(), |r, c| cols[c].0[r])
}

fn fd_mv(f: impl Fn(&[f64]) -> Result<Multivector>, q: &[f64], j: usize) -> Result<Multivector> {
    let mut p = q.to_vec();
    p[j] += FD_STEP;
    let mut m = q.to_vec();
    m[j] -= FD_STEP;
    Ok((f(&p)? - f(&m)?).scale(0.5 / FD_STEP))
}

fn fd_bivector(f: impl Fn(&[f64]) -> Result<Bivector>, q: &[f64], j: usize) -> Result<Bivector> {
    let mut p = q.to_vec();
    p[j] += FD_STEP;
    let mut m = q.to_vec();
    m[j] -= FD_STEP;
    let (a, b) = (f(&p)?, f(&m)?);
    Ok(std::array::from_fn(|k| (a[k] - b[k]) * 0.5 / FD_STEP))
}

/// Configurations `q0 + U(−spread, spread)` that keep a non-singular primitive.
pub fn random_configs(sys: &CooperativeSystem, q0: &[f64], count: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        let q: Vec<f64> = q0.iter().map(|v| v + rng.random_range(-spread..spread)).collect();
        if let Ok(ev) = sys.evaluate(&q, None) {
            if ev.singularity.degeneracy > 1e-3 {
                out.push(q);
            }
        }
    }
    out
}

pub fn jacobians(seed: u64, configs: usize, systems: &[&str]) -> Result<Report> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for name in systems {
        let (sys, q0) = models::builtin(name).ok_or_else(|| anyhow!("unknown system {name}"))?;
        let qs = random_configs(&sys, &q0, configs, 0.3, &mut rng);
        let mut worst = [0.0f64; 8];
        for q in &qs {
            for (s, slot) in sys.slots.iter().enumerate() {
                let qc = sys.chain_q(s, q);
                let (m, cols) = slot.chain.analytic_jacobian(&qc)?;
                let num: Vec<Multivector> =
                    (0..qc.len()).map(|j| fd_mv(|x| Ok(slot.chain.forward_kinematics(x)?), &qc, j)).collect::<Result<_>>()?;
                worst[0] = worst[0].max(rel_err(&mv_columns(&cols), &mv_columns(&num)));
                let g = slot.chain.geometric_jacobian(&qc)?;
                let rebuilt: Vec<Multivector> = (0..qc.len())
                    .map(|j| {
                        let mut b = Multivector::ZERO;
                        for (r, blade) in cgacoop::chain::MOTOR_BLADES.iter().enumerate() {
                            b[*blade] = g[(r, j)];
                        }
                        m * b.scale(-0.5)
                    })
                    .collect();
                worst[1] = worst[1].max(rel_err(&mv_columns(&rebuilt), &mv_columns(&num)));
            }
            let (x, dx) = sys.primitive_jacobian(q)?;
            let num: Vec<Multivector> = (0..sys.dof).map(|j| fd_mv(|x| Ok(sys.primitive(x)?.blade), q, j)).collect::<Result<_>>()?;
            worst[2] = worst[2].max(rel_err(&mv_columns(&dx), &mv_columns(&num)));

            let ev = sys.evaluate(q, None)?;
            let num: Vec<Multivector> = (0..sys.dof).map(|j| fd_mv(|x| Ok(sys.similarity(x)?), q, j)).collect::<Result<_>>()?;
            worst[3] = worst[3].max(rel_err(&mv_columns(&ev.j_a), &mv_columns(&num)));

            let vr = ev.versor.reverse();
            let num_g: Vec<Bivector> = (0..sys.dof)
                .map(|j| fd_bivector(|x| Ok(log(Group::Similarity, &(vr * sys.similarity(x)?))?), q, j))
                .collect::<Result<_>>()?;
            let num_g = DMatrix::from_fn(7, sys.dof, |r, c| num_g[c][r]);
            worst[4] = worst[4].max(rel_err(&ev.j_g, &num_g));

            let num_b: Vec<Bivector> =
                (0..sys.dof).map(|j| fd_bivector(|x| Ok(log(Group::Similarity, &sys.similarity(x)?)?), q, j)).collect::<Result<_>>()?;
            let num_b = DMatrix::from_fn(7, sys.dof, |r, c| num_b[c][r]);
            worst[5] = worst[5].max(rel_err(&sys.jacobian_b(q, LogJacobian::Analytic)?, &num_b));
            worst[5] = worst[5].max(rel_err(&sys.jacobian_b(q, LogJacobian::FiniteDifference)?, &num_b));

            // Normalization and inverse along the primitive's own tangent
            // directions; conformal points are null and have neither.
            if sys.kind == Kind::Point {
                continue;
            }
            let xs = x.blade.scale(1.7);
            let dirs: Vec<Multivector> = dx.iter().map(|d| d.scale(1.7)).collect();
            let along = |f: &dyn Fn(&Multivector) -> Result<Multivector>| -> Result<Vec<Multivector>> {
                dirs.iter().map(|d| Ok((f(&(xs + d.scale(FD_STEP)))? - f(&(xs - d.scale(FD_STEP)))?).scale(0.5 / FD_STEP))).collect()
            };
            let num = along(&|m| Ok(m.normalized()?))?;
            worst[6] = worst[6].max(rel_err(&mv_columns(&jacobian_normalize(&xs, &dirs)?), &mv_columns(&num)));
            let num = along(&|m| Ok(m.inverse()?))?;
            worst[7] = worst[7].max(rel_err(&mv_columns(&jacobian_inverse(&xs, &dirs)?), &mv_columns(&num)));
        }
        let labels = [
            "chain J^A",
            "J^A = M(-1/2 J^G) identity",
            "primitive Jacobian",
            "similarity J_A",
            "similarity J_G",
            "similarity J_B",
            "jacobian_normalize",
            "jacobian_inverse",
        ];
        for (l, w) in labels.iter().zip(worst) {
            checks.push(Check::at_most(format!("{name} ({} dof) {l}", sys.dof), if qs.len() < configs { f64::INFINITY } else { w }, 1e-5, qs.len()));
        }
    }
    Ok(Report { suite: "jacobians".into(), checks, elapsed: start.elapsed() })
}

fn random_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(-2.0..2.0))
}

pub fn random_primitive(kind: Kind, rng: &mut ChaCha8Rng) -> Primitive {
    loop {
        let pts: Vec<[f64; 3]> = (0..kind.point_count()).map(|_| random_point(rng)).collect();
        if let Ok(p) = Primitive::from_points(kind, &pts) {
            if (kind == Kind::Point || cgacoop::primitive::degeneracy_measure(kind, &p.blade) > 1e-3) && p.params().is_ok() {
                return p;
            }
        }
    }
}

/// Blades a similarity between two primitives of `kind` may use.
pub fn subgroup_support(kind: Kind) -> &'static [Blade] {
    match kind {
        Kind::Point => Group::Translator.support(),
        Kind::Line | Kind::Plane => Group::Motor.support(),
        Kind::Sphere => &[Blade::SCALAR, Blade::E0INF, Blade::E1INF, Blade::E2INF, Blade::E3INF],
        Kind::PointPair | Kind::Circle => Group::Similarity.support(),
    }
}

/// Oriented distance between blades after scaling both to unit coefficient norm.
pub fn oriented_residual(a: &Multivector, b: &Multivector) -> f64 {
    (a.scale(1.0 / a.coeff_norm()) - b.scale(1.0 / b.coeff_norm())).max_abs()
}

pub fn similarity(seed: u64, pairs: usize) -> Report {
    timed("similarity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checks = Vec::new();
        for kind in Kind::ALL {
            let mut residual = 0.0f64;
            let mut outside = 0.0f64;
            let mut failures = 0;
            for _ in 0..pairs {
                let x1 = random_primitive(kind, &mut rng);
                let x2 = random_primitive(kind, &mut rng);
                match similarity_between(&x1, &x2) {
                    Ok(v) => {
                        let moved = v.sandwich(&x1.blade);
                        // A sphere's sign is the handedness of its points; no similarity changes it.
                        let r = if kind == Kind::Sphere { moved.projective_distance(&x2.blade) } else { oriented_residual(&moved, &x2.blade) };
                        residual = residual.max(r);
                        let scale = v.max_abs();
                        for k in 0..32 {
                            if !subgroup_support(kind).contains(&Blade(k)) {
                                outside = outside.max(v[Blade(k)].abs() / scale);
                            }
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
            let name = kind.name();
            checks.push(Check::at_most(format!("{name} sandwich residual"), if failures > 0 { f64::INFINITY } else { residual }, 1e-8, pairs));
            checks.push(Check::at_most(format!("{name} versor in subgroup"), outside, 1e-12, pairs));
        }
        checks
    })
}

pub fn controllers(seed: u64, ik_seeds: usize) -> Result<Report> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sys, q0) = models::builtin("three-arm-circle").ok_or_else(|| anyhow!("missing builtin"))?;
    let mut checks = Vec::new();

    let targets = random_configs(&sys, &q0, ik_seeds, 0.2, &mut rng);
    let mut ok = 0;
    let mut worst = 0.0f64;
    for qt in &targets {
        let vd = sys.similarity(qt)?;
        if let Ok(r) = gauss_newton_ik(&sys, &q0, &vd, &IkOptions::default()) {
            worst = worst.max(r.residual);
            if r.residual <= 1e-6 {
                ok += 1;
            }
        }
    }
    checks.push(Check::at_least("ik success fraction", ok as f64 / targets.len().max(1) as f64, 0.95, targets.len()));

    let dk_err = {
        let xi: Bivector = [0.0, 0.0, 0.0, 0.05, 0.02, -0.01, 0.03];
        let dk = differential_kinematics(&sys, &q0, &xi)?;
        let jg = sys.evaluate(&q0, None)?.j_g;
        let got = &jg * &dk.qd;
        (0..7).filter(|r| sys.kind.controllable_mask()[*r]).map(|r| (got[r] - xi[r]).abs()).fold(0.0, f64::max)
    };
    checks.push(Check::at_most("differential kinematics J_G qd = twist", dk_err, 1e-8, 1));

    let jg = sys.evaluate(&q0, None)?.j_g;
    let n = nullspace_projector(&jg);
    checks.push(Check::at_most("J_G N = 0", (&jg * &n).norm(), 1e-8, 1));

    let cfg = OcpConfig::default();
    let target = random_configs(&sys, &q0, 1, 0.02, &mut rng);
    let vd = sys.similarity(&target[0])?;
    let sol = solve_reaching(&sys, &q0, &vec![0.0; sys.dof], &vd, &cfg)?;
    let again = rollout(&q0, &vec![0.0; sys.dof], &sol.controls, cfg.dt);
    let consistency = sol
        .states
        .iter()
        .zip(&again)
        .flat_map(|((a, b), (c, d))| a.iter().zip(c).chain(b.iter().zip(d)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("ilqr rollout consistency", consistency, 1e-12, 1));
    checks.push(Check::at_most("ilqr terminal error", sol.terminal_norm, 1e-3, 1));

    Ok(Report { suite: "controllers".into(), checks, elapsed: start.elapsed() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suites_pass() {
        for s in SUITES {
            let r = run_suite(s, 3, Sizes::QUICK).unwrap();
            assert!(r.passed(), "{r}");
        }
        assert!(run_suite("nope", 0, Sizes::QUICK).is_err());
    }
}
