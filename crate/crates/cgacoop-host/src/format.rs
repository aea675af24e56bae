//! System and scenario description files (TOML).
//!
//! A system reference is either `builtin:<name>` or a path to a system file.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cgacoop::chain::{pose_motor, Chain, Joint, JointType};
use cgacoop::control::{Gains, IkOptions};
use cgacoop::cooperative::{CooperativeSystem, Slot};
use cgacoop::models;
use cgacoop::ocp::OcpConfig;
use cgacoop::primitive::Kind;
use cgacoop::sim::{Mode, Scenario, Secondary, SecondaryGoal, Sweep, Target, TimedTwist};
use cgacoop::versor::{decompose, log_rotor};
use cgacoop::{Blade, Multivector};
use serde::{Deserialize, Serialize};

pub const SYSTEM_SCHEMA: &str = "cgacoop.system/1";
pub const SCENARIO_SCHEMA: &str = "cgacoop.scenario/1";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFile {
    #[serde(default)]
    pub translation: [f64; 3],
    /// Rotation bivector (e23, e13, e12).
    #[serde(default)]
    pub rotation: [f64; 3],
}

impl PoseFile {
    pub fn motor(&self) -> Multivector {
        pose_motor(self.translation, self.rotation)
    }

    pub fn from_motor(m: &Multivector) -> Result<Self> {
        let f = decompose(m).map_err(|e| anyhow!("pose is not a motor: {e}"))?;
        // Adding 0.0 turns −0.0 into 0.0.
        let rotation = log_rotor(&f.rotor).map_err(|e| anyhow!("{e}"))?.map(|x| x + 0.0);
        Ok(PoseFile { translation: f.t.map(|x| x + 0.0), rotation })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum JointFile {
    Revolute {
        axis: [f64; 3],
        #[serde(default)]
        origin: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limits: Option<[f64; 2]>,
    },
    Prismatic {
        axis: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limits: Option<[f64; 2]>,
    },
    /// Motor bivector (e23, e13, e12, e1∞, e2∞, e3∞).
    Screw {
        bivector: [f64; 6],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limits: Option<[f64; 2]>,
    },
}

impl JointFile {
    pub fn joint(&self) -> Result<Joint> {
        let (j, limits) = match self {
            JointFile::Revolute { axis, origin, limits } => (Joint::revolute(*axis, *origin)?, limits),
            JointFile::Prismatic { axis, limits } => (Joint::prismatic(*axis)?, limits),
            JointFile::Screw { bivector, limits } => (Joint::screw(*bivector), limits),
        };
        Ok(match limits {
            Some([lo, hi]) => {
                if lo > hi {
                    bail!("joint limits out of order: [{lo}, {hi}]");
                }
                j.with_limits(*lo, *hi)
            }
            None => j,
        })
    }

    pub fn from_joint(j: &Joint) -> Self {
        let limits = j.limits.map(|(a, b)| [a, b]);
        let (axis, origin) = j.axis_origin();
        match j.joint_type {
            JointType::Revolute => JointFile::Revolute { axis, origin, limits },
            JointType::Prismatic => JointFile::Prismatic { axis, limits },
            JointType::Screw => JointFile::Screw { bivector: j.bivector, limits },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub name: String,
    #[serde(default)]
    pub base_pose: PoseFile,
    pub joints: Vec<JointFile>,
    #[serde(default)]
    pub ee_offset: PoseFile,
    /// Indices into the system joint vector; defaults to stacking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_map: Option<Vec<usize>>,
    #[serde(default)]
    pub enforce_limits: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub schema: String,
    pub name: String,
    /// point, point_pair, line, circle, plane or sphere.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    pub chains: Vec<ChainFile>,
}

impl SystemFile {
    pub fn build(&self) -> Result<(CooperativeSystem, Vec<f64>)> {
        if self.schema != SYSTEM_SCHEMA {
            bail!("unsupported system schema {:?} (expected {SYSTEM_SCHEMA})", self.schema);
        }
        let kind = Kind::from_name(&self.kind).ok_or_else(|| anyhow!("unknown primitive kind {:?}", self.kind))?;
        let mut next = 0;
        let mut slots = Vec::new();
        for c in &self.chains {
            let joints = c.joints.iter().map(JointFile::joint).collect::<Result<Vec<_>>>().with_context(|| format!("chain {}", c.name))?;
            let mut chain = Chain::new(&c.name, c.base_pose.motor(), joints, c.ee_offset.motor());
            chain.enforce_limits = c.enforce_limits;
            let map = match &c.joint_map {
                Some(m) => m.clone(),
                None => (next..next + chain.dof()).collect(),
            };
            next = next.max(map.iter().map(|i| i + 1).max().unwrap_or(next));
            slots.push(Slot { chain, joints: map });
        }
        let dof = self.dof.unwrap_or(next);
        let sys = CooperativeSystem::with_slots(&self.name, slots, dof, kind)?;
        let q0 = self.q0.clone().unwrap_or_else(|| vec![0.0; dof]);
        if q0.len() != dof {
            bail!("q0 has {} entries, system has {dof} joints", q0.len());
        }
        Ok((sys, q0))
    }

    pub fn from_system(sys: &CooperativeSystem, q0: &[f64]) -> Result<Self> {
        let chains = sys
            .slots
            .iter()
            .map(|s| {
                Ok(ChainFile {
                    name: s.chain.name.clone(),
                    base_pose: PoseFile::from_motor(&s.chain.base)?,
                    joints: s.chain.joints.iter().map(JointFile::from_joint).collect(),
                    ee_offset: PoseFile::from_motor(&s.chain.ee_offset)?,
                    joint_map: Some(s.joints.clone()),
                    enforce_limits: s.chain.enforce_limits,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SystemFile {
            schema: SYSTEM_SCHEMA.into(),
            name: sys.name.clone(),
            kind: sys.kind.name().into(),
            dof: Some(sys.dof),
            q0: Some(q0.to_vec()),
            chains,
        })
    }
}

/// Load `builtin:<name>` or a TOML system file.
pub fn load_system(reference: &str) -> Result<(CooperativeSystem, Vec<f64>)> {
    load_system_relative(reference, Path::new("."))
}

pub fn load_system_relative(reference: &str, dir: &Path) -> Result<(CooperativeSystem, Vec<f64>)> {
    if let Some(name) = reference.strip_prefix("builtin:") {
        return models::builtin(name)
            .ok_or_else(|| anyhow!("unknown builtin system {name:?}; known: {}", models::BUILTIN_NAMES.join(", ")));
    }
    let path = resolve(reference, dir);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading system file {}", path.display()))?;
    let file: SystemFile = toml::from_str(&text).with_context(|| format!("parsing system file {}", path.display()))?;
    file.build()
}

fn resolve(reference: &str, dir: &Path) -> PathBuf {
    let p = PathBuf::from(reference);
    if p.is_absolute() {
        p
    } else {
        dir.join(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetFile {
    Hold,
    /// Similarity versor coefficients on the 12 similarity blades.
    Versor { coefficients: [f64; 12] },
    Points { points: Vec<[f64; 3]> },
    Relative { bivector: [f64; 7] },
    Joints { q: Vec<f64> },
    Commands { commands: Vec<TimedTwistFile> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedTwistFile {
    pub t: f64,
    pub twist: [f64; 7],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    pub k: [f64; 7],
    pub d: [f64; 7],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcpFile {
    pub horizon: Option<usize>,
    pub dt: Option<f64>,
    pub r: Option<f64>,
    pub q: Option<[f64; 7]>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IkFile {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondaryFile {
    pub chain: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub along: Option<f64>,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default = "yes")]
    pub projected: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub chain: usize,
    pub steps: usize,
    #[serde(default = "six")]
    pub decades: f64,
}

fn six() -> f64 {
    6.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    pub name: String,
    pub system: String,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "hold")]
    pub target: TargetFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinematic_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
    #[serde(default)]
    pub ocp: OcpFile,
    #[serde(default)]
    pub ik: IkFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<SecondaryFile>,
    /// Blade names of normalized primitive coefficients to hold in nullspace mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraint: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_joint_speed: Option<f64>,
    #[serde(default)]
    pub continue_on_error: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn hold() -> TargetFile {
    TargetFile::Hold
}

impl ScenarioFile {
    /// Build the core scenario; system paths resolve against `dir`.
    pub fn build(&self, dir: &Path) -> Result<Scenario> {
        if self.schema != SCENARIO_SCHEMA {
            bail!("unsupported scenario schema {:?} (expected {SCENARIO_SCHEMA})", self.schema);
        }
        let mode = Mode::from_name(&self.mode).ok_or_else(|| anyhow!("unknown mode {:?}", self.mode))?;
        let (system, nominal) = load_system_relative(&self.system, dir)?;
        let q0 = self.q0.clone().unwrap_or(nominal);
        let mut sc = Scenario::new(&self.name, system, q0, mode);
        sc.perturbation = self.perturbation;
        sc.seed = self.seed;
        sc.target = match &self.target {
            TargetFile::Hold => Target::Hold,
            TargetFile::Versor { coefficients } => {
                let mut v = Multivector::ZERO;
                for (b, c) in cgacoop::versor::SIMILARITY_BLADES.iter().zip(coefficients) {
                    v[*b] = *c;
                }
                Target::Versor(v)
            }
            TargetFile::Points { points } => Target::Points(points.clone()),
            TargetFile::Relative { bivector } => Target::Relative(*bivector),
            TargetFile::Joints { q } => Target::Joints(q.clone()),
            TargetFile::Commands { commands } => Target::Commands(commands.iter().map(|c| TimedTwist { t: c.t, twist: c.twist }).collect()),
        };
        if let Some(g) = &self.gains {
            sc.gains = Gains { k: g.k, d: g.d };
            sc.gains.validate()?;
        }
        if let Some(k) = self.kinematic_gain {
            sc.kinematic_gain = k;
        }
        if let Some(d) = self.duration {
            sc.duration = d;
        }
        if let Some(dt) = self.dt {
            sc.dt = dt;
        }
        if let Some(m) = self.inertia {
            sc.inertia = m;
        }
        let o = &self.ocp;
        let def = OcpConfig::default();
        sc.ocp = OcpConfig {
            horizon: o.horizon.unwrap_or(def.horizon),
            dt: o.dt.unwrap_or(def.dt),
            r: o.r.unwrap_or(def.r),
            q: o.q.unwrap_or(def.q),
            max_iter: o.max_iter.unwrap_or(def.max_iter),
            tol: o.tol.unwrap_or(def.tol),
            ..def
        };
        let idef = IkOptions::default();
        sc.ik = IkOptions { tol: self.ik.tol.unwrap_or(idef.tol), max_iter: self.ik.max_iter.unwrap_or(idef.max_iter), ..idef };
        sc.secondary = match &self.secondary {
            Some(s) => {
                let goal = match (s.point, s.along) {
                    (Some(p), None) => SecondaryGoal::Point(p),
                    (None, Some(a)) => SecondaryGoal::Along(a),
                    _ => bail!("secondary needs exactly one of `point` or `along`"),
                };
                Some(Secondary { chain: s.chain, goal, gain: s.gain, projected: s.projected })
            }
            None => None,
        };
        if let Some(s) = &self.secondary {
            if s.chain >= sc.system.slots.len() {
                bail!("secondary chain {} out of range", s.chain);
            }
        }
        sc.constraint = self
            .constraint
            .iter()
            .map(|n| Blade::from_name(n).ok_or_else(|| anyhow!("unknown blade {n:?} in constraint")))
            .collect::<Result<_>>()?;
        sc.sweep = self.sweep.as_ref().map(|s| Sweep { chain: s.chain, steps: s.steps, decades: s.decades });
        sc.max_joint_speed = self.max_joint_speed;
        sc.continue_on_error = self.continue_on_error;
        sc.validate()?;
        Ok(sc)
    }
}

/// Read and build a scenario file.
pub fn load_scenario(path: &Path) -> Result<(ScenarioFile, Scenario)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    let file: ScenarioFile = toml::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let sc = file.build(dir)?;
    Ok((file, sc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_systems_round_trip_through_toml() {
        for name in models::BUILTIN_NAMES {
            let (sys, q0) = models::builtin(name).unwrap();
            let file = SystemFile::from_system(&sys, &q0).unwrap();
            let text = toml::to_string(&file).unwrap();
            let back: SystemFile = toml::from_str(&text).unwrap();
            let (sys2, q2) = back.build().unwrap();
            assert_eq!(q0, q2);
            let a = sys.similarity(&q0).unwrap();
            let b = sys2.similarity(&q0).unwrap();
            assert!(a.distance(&b) < 1e-12, "{name}");
            assert_eq!(sys.slots.iter().map(|s| s.joints.clone()).collect::<Vec<_>>(), sys2.slots.iter().map(|s| s.joints.clone()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rejects_wrong_schema_and_kind() {
        let (sys, q0) = models::builtin("single-arm").unwrap();
        let mut f = SystemFile::from_system(&sys, &q0).unwrap();
        f.schema = "other/9".into();
        assert!(f.build().is_err());
        f.schema = SYSTEM_SCHEMA.into();
        f.kind = "torus".into();
        assert!(f.build().is_err());
        f.kind = "line".into();
        assert!(f.build().is_err());
    }

    #[test]
    fn scenario_defaults() {
        let text = r#"
schema = "cgacoop.scenario/1"
name = "hold"
system = "builtin:three-arm-circle"
mode = "kinematic"
"#;
        let f: ScenarioFile = toml::from_str(text).unwrap();
        let sc = f.build(Path::new(".")).unwrap();
        assert_eq!(sc.target, Target::Hold);
        assert_eq!(sc.q0, models::iiwa_q0(3));
        let bad = text.replace("kinematic", "nullspace");
        let f: ScenarioFile = toml::from_str(&bad).unwrap();
        assert!(f.build(Path::new(".")).is_err());
    }
}
