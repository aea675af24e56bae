//! Teleoperation session: axes commands to similarity twists, one tick at a time.
//!
//! The session is a pure state machine. Transport, clocks and broadcasting
//! belong to the host.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::control::differential_kinematics;
use crate::cooperative::CooperativeSystem;
use crate::error::{Error, Result};
use crate::primitive::{Kind, Params};
use crate::sim::{step_kinematic, State};
use crate::versor::{log, similarity_coeffs, Bivector, Group};

/// Default control period in seconds.
pub const DEFAULT_DT: f64 = 0.01;
/// Commands older than this are treated as zero.
pub const DEFAULT_STALENESS_MS: u64 = 250;

/// Seven device axes in `[−1, 1]`: tx, ty, tz, rx, ry, rz, dilation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxesCommand {
    pub axes: [f64; 7],
    pub timestamp_ms: u64,
    pub seq: u64,
}

impl AxesCommand {
    pub fn zero() -> Self {
        AxesCommand { axes: [0.0; 7], timestamp_ms: 0, seq: 0 }
    }

    /// Axes clamped to `[−1, 1]`; non-finite values become 0.
    pub fn clamped(&self) -> [f64; 7] {
        self.axes.map(|a| if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 })
    }
}

/// Per-axis scale from device units to twist coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisGains(pub [f64; 7]);

impl Default for AxisGains {
    /// 0.1 m/s translation, 0.5 rad/s rotation, 1 /s log-scale.
    fn default() -> Self {
        AxisGains([0.1, 0.1, 0.1, 0.5, 0.5, 0.5, 1.0])
    }
}

/// Map device axes to a body twist on (e23, e13, e12, e0∞, e1∞, e2∞, e3∞),
/// zeroing components outside `mask`.
///
/// A rotation about +y has a negative e13 coordinate; a negative dilation
/// axis shrinks the primitive.
pub fn map_axes(cmd: &AxesCommand, gains: &AxisGains, mask: &[bool; 7]) -> Bivector {
    let a = cmd.clamped();
    let g = gains.0;
    let mut x = [
        g[3] * a[3],
        -g[4] * a[4],
        g[5] * a[5],
        g[6] * a[6],
        g[0] * a[0],
        g[1] * a[1],
        g[2] * a[2],
    ];
    for r in 0..7 {
        if !mask[r] {
            x[r] = 0.0;
        }
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TeleopConfig {
    pub dt: f64,
    pub gains: AxisGains,
    pub staleness_ms: u64,
    /// Joint-velocity norm limit per step.
    pub max_joint_speed: f64,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        TeleopConfig { dt: DEFAULT_DT, gains: AxisGains::default(), staleness_ms: DEFAULT_STALENESS_MS, max_joint_speed: 2.0 }
    }
}

/// State broadcast after each tick.
#[derive(Clone, Debug, PartialEq)]
pub struct StateUpdate {
    pub tick: u64,
    pub t: f64,
    pub q: Vec<f64>,
    pub kind: Kind,
    pub params: Option<Params>,
    pub log: Bivector,
    pub versor: [f64; 12],
    /// Twist actually applied during the tick.
    pub twist: Bivector,
    /// Sequence number of the command used, if any.
    pub command_seq: Option<u64>,
    pub stale: bool,
    pub singular: bool,
    pub clamped: bool,
    pub masked: bool,
    pub min_eigenvalue: f64,
    pub degeneracy: f64,
    /// Joint points of every chain for drawing.
    pub chains: Vec<Vec<[f64; 3]>>,
    pub error: Option<String>,
}

/// Why a command was refused.
#[derive(Clone, Debug, PartialEq)]
pub enum Rejected {
    OutOfOrder { last: u64, got: u64 },
}

#[derive(Clone, Debug)]
pub struct TeleopSession {
    pub system: CooperativeSystem,
    pub config: TeleopConfig,
    state: State,
    latest: Option<(AxesCommand, u64)>,
    last_seq: Option<u64>,
    tick: u64,
}

impl TeleopSession {
    pub fn new(system: CooperativeSystem, q0: Vec<f64>, config: TeleopConfig) -> Result<Self> {
        if q0.len() != system.dof {
            return Err(Error::DimensionMismatch { expected: system.dof, found: q0.len() });
        }
        if !(config.dt > 0.0) || config.gains.0.iter().any(|g| !g.is_finite()) {
            return Err(Error::Invalid("teleop config needs dt > 0 and finite gains"));
        }
        system.evaluate(&q0, None)?;
        Ok(TeleopSession { system, config, state: State::at_rest(q0), latest: None, last_seq: None, tick: 0 })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    /// Store a command received at `now_ms` (latest wins). Sequence numbers
    /// must increase.
    pub fn submit(&mut self, cmd: AxesCommand, now_ms: u64) -> core::result::Result<(), Rejected> {
        if let Some(last) = self.last_seq {
            if cmd.seq <= last {
                return Err(Rejected::OutOfOrder { last, got: cmd.seq });
            }
        }
        self.last_seq = Some(cmd.seq);
        self.latest = Some((cmd, now_ms));
        Ok(())
    }

    /// Advance one control period at time `now_ms`.
    pub fn step(&mut self, now_ms: u64) -> StateUpdate {
        let mask = self.system.kind.controllable_mask();
        let (cmd, seq, stale) = match self.latest {
            Some((c, at)) if now_ms.saturating_sub(at) <= self.config.staleness_ms => (c, Some(c.seq), false),
            Some((c, _)) => (AxesCommand::zero(), Some(c.seq), true),
            None => (AxesCommand::zero(), None, false),
        };
        let mut twist = map_axes(&cmd, &self.config.gains, &mask);
        let masked = cmd.clamped().iter().any(|a| *a != 0.0) && {
            let all = map_axes(&cmd, &self.config.gains, &[true; 7]);
            all.iter().zip(&twist).any(|(a, b)| a != b)
        };
        let mut singular = false;
        let mut clamped = false;
        let mut error = None;
        let mut qd = vec![0.0; self.system.dof];
        match differential_kinematics(&self.system, &self.state.q, &twist) {
            Ok(dk) => {
                if dk.singularity.singular {
                    singular = true;
                    twist = [0.0; 7];
                } else {
                    qd = dk.qd.iter().copied().collect();
                    let n = libm::sqrt(qd.iter().map(|v| v * v).sum());
                    if n > self.config.max_joint_speed {
                        clamped = true;
                        let s = self.config.max_joint_speed / n;
                        qd.iter_mut().for_each(|v| *v *= s);
                    }
                }
            }
            Err(e) => {
                singular = true;
                twist = [0.0; 7];
                error = Some(e.to_string());
            }
        }
        self.state = step_kinematic(&self.state, &qd, self.config.dt);
        self.tick += 1;
        let mut up = self.snapshot();
        up.twist = twist;
        up.command_seq = seq;
        up.stale = stale;
        up.singular |= singular;
        up.clamped = clamped;
        up.masked = masked;
        if up.error.is_none() {
            up.error = error;
        }
        up
    }

    /// Current state without stepping.
    pub fn snapshot(&self) -> StateUpdate {
        let sys = &self.system;
        let q = &self.state.q;
        let chains = (0..sys.slots.len())
            .map(|i| sys.slots[i].chain.joint_points(&sys.chain_q(i, q)).unwrap_or_default())
            .collect();
        let mut up = StateUpdate {
            tick: self.tick,
            t: self.state.t,
            q: q.clone(),
            kind: sys.kind,
            params: None,
            log: [f64::NAN; 7],
            versor: [f64::NAN; 12],
            twist: [0.0; 7],
            command_seq: None,
            stale: false,
            singular: true,
            clamped: false,
            masked: false,
            min_eigenvalue: f64::NAN,
            degeneracy: f64::NAN,
            chains,
            error: None,
        };
        match sys.evaluate(q, None) {
            Ok(ev) => {
                up.params = ev.primitive.params().ok();
                up.log = log(Group::Similarity, &ev.versor).unwrap_or([f64::NAN; 7]);
                up.versor = similarity_coeffs(&ev.versor);
                up.singular = ev.singularity.singular;
                up.min_eigenvalue = ev.singularity.min_eigenvalue;
                up.degeneracy = ev.singularity.degeneracy;
            }
            Err(e) => up.error = Some(e.to_string()),
        }
        up
    }
}

/// Run a command log offline: each accepted entry is submitted at its receipt
/// time and followed by one tick at that time. Rejected entries do not tick.
pub fn replay(system: CooperativeSystem, q0: Vec<f64>, config: TeleopConfig, log: &[(AxesCommand, u64)]) -> Result<Vec<StateUpdate>> {
    let mut s = TeleopSession::new(system, q0, config)?;
    Ok(log.iter().filter_map(|(cmd, at)| s.submit(*cmd, *at).ok().map(|()| s.step(*at))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn cmd(axes: [f64; 7], seq: u64) -> AxesCommand {
        AxesCommand { axes, timestamp_ms: seq * 10, seq }
    }

    #[test]
    fn zero_axes_map_to_zero_twist() {
        assert_eq!(map_axes(&AxesCommand::zero(), &AxisGains::default(), &[true; 7]), [0.0; 7]);
    }

    #[test]
    fn sphere_drops_rotations() {
        let x = map_axes(&cmd([0.0, 0.0, 0.0, 1.0, -1.0, 0.5, 0.0], 1), &AxisGains::default(), &Kind::Sphere.controllable_mask());
        assert_eq!(&x[..3], &[0.0; 3]);
    }

    #[test]
    fn dilation_axis_maps_to_e0inf_row() {
        let x = map_axes(&cmd([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0], 1), &AxisGains([1.0; 7]), &[true; 7]);
        assert_eq!(x, [0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        let c = AxesCommand { axes: [3.0, f64::NAN, -2.0, 0.0, 0.0, 0.0, 0.0], timestamp_ms: 0, seq: 0 };
        assert_eq!(c.clamped(), [1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn idle_session_holds_state() {
        let (sys, q0) = models::builtin("leap-like").unwrap();
        let mut s = TeleopSession::new(sys, q0.clone(), TeleopConfig::default()).unwrap();
        for k in 0..5 {
            let up = s.step(k * 10);
            assert_eq!(up.twist, [0.0; 7]);
        }
        assert_eq!(s.state().q, q0);
    }

    #[test]
    fn stale_and_out_of_order_commands() {
        let (sys, q0) = models::builtin("leap-like").unwrap();
        let mut s = TeleopSession::new(sys, q0, TeleopConfig::default()).unwrap();
        s.submit(cmd([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 5), 0).unwrap();
        assert!(s.submit(cmd([0.0; 7], 5), 1).is_err());
        assert!(s.step(100).twist[4] > 0.0);
        let up = s.step(300);
        assert!(up.stale);
        assert_eq!(up.twist, [0.0; 7]);
    }

    #[test]
    fn negative_dilation_closes_the_hand() {
        let (sys, q0) = models::builtin("leap-like").unwrap();
        let mut s = TeleopSession::new(sys, q0, TeleopConfig::default()).unwrap();
        let mut last = s.snapshot().params.unwrap().radius();
        for k in 1..=25 {
            s.submit(cmd([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0], k), k * 10).unwrap();
            let up = s.step(k * 10);
            let r = up.params.unwrap().radius();
            assert!(r < last, "tick {k}");
            last = r;
        }
    }
}
