//! Teleop wire protocol: one JSON object per websocket text message, tagged by `type`.
//!
//! Non-finite numbers travel as `null`.

use cgacoop::primitive::{Kind, Params};
use cgacoop::teleop::{AxesCommand, StateUpdate, TeleopConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A float that encodes NaN and infinities as `null`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits() || (self.0.is_nan() && other.0.is_nan())
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_none()
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Num(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN)))
    }
}

fn wrap<const N: usize>(x: [f64; N]) -> [Num; N] {
    x.map(Num)
}

fn unwrap<const N: usize>(x: [Num; N]) -> [f64; N] {
    x.map(|n| n.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Commander,
    Viewer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Fixed-rate loop on the wall clock.
    Realtime,
    /// One tick per command, at the command's timestamp.
    Lockstep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxesMsg {
    pub axes: [Num; 7],
    pub timestamp_ms: u64,
    pub seq: u64,
}

impl From<&AxesCommand> for AxesMsg {
    fn from(c: &AxesCommand) -> Self {
        AxesMsg { axes: wrap(c.axes), timestamp_ms: c.timestamp_ms, seq: c.seq }
    }
}

impl AxesMsg {
    pub fn command(&self) -> AxesCommand {
        AxesCommand { axes: unwrap(self.axes), timestamp_ms: self.timestamp_ms, seq: self.seq }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigMsg {
    pub role: Role,
    pub system: String,
    pub kind: String,
    pub dof: usize,
    pub chains: usize,
    pub dt: Num,
    pub gains: [Num; 7],
    pub mask: [bool; 7],
    pub staleness_ms: u64,
    pub max_joint_speed: Num,
    pub mode: ClockMode,
}

impl ConfigMsg {
    pub fn new(role: Role, system: &cgacoop::cooperative::CooperativeSystem, config: &TeleopConfig, mode: ClockMode) -> Self {
        ConfigMsg {
            role,
            system: system.name.clone(),
            kind: system.kind.name().into(),
            dof: system.dof,
            chains: system.slots.len(),
            dt: Num(config.dt),
            gains: wrap(config.gains.0),
            mask: system.kind.controllable_mask(),
            staleness_ms: config.staleness_ms,
            max_joint_speed: Num(config.max_joint_speed),
            mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsMsg {
    pub center: [Num; 3],
    pub radius: Num,
    pub log_radius: Num,
    pub axis: [Num; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMsg {
    pub tick: u64,
    pub t: Num,
    pub q: Vec<Num>,
    pub kind: String,
    pub params: Option<ParamsMsg>,
    pub log: [Num; 7],
    pub versor: [Num; 12],
    pub twist: [Num; 7],
    pub command_seq: Option<u64>,
    pub stale: bool,
    pub singular: bool,
    pub clamped: bool,
    pub masked: bool,
    pub min_eigenvalue: Num,
    pub degeneracy: Num,
    pub chains: Vec<Vec<[Num; 3]>>,
    pub error: Option<String>,
}

impl From<&StateUpdate> for StateMsg {
    fn from(u: &StateUpdate) -> Self {
        StateMsg {
            tick: u.tick,
            t: Num(u.t),
            q: u.q.iter().map(|x| Num(*x)).collect(),
            kind: u.kind.name().into(),
            params: u.params.map(|p| ParamsMsg {
                center: wrap(p.center),
                radius: Num(p.radius()),
                log_radius: Num(p.log_radius),
                axis: wrap(p.axis),
            }),
            log: wrap(u.log),
            versor: wrap(u.versor),
            twist: wrap(u.twist),
            command_seq: u.command_seq,
            stale: u.stale,
            singular: u.singular,
            clamped: u.clamped,
            masked: u.masked,
            min_eigenvalue: Num(u.min_eigenvalue),
            degeneracy: Num(u.degeneracy),
            chains: u.chains.iter().map(|c| c.iter().map(|p| wrap(*p)).collect()).collect(),
            error: u.error.clone(),
        }
    }
}

impl StateMsg {
    /// Back to the session type; `None` for an unknown kind name.
    pub fn update(&self) -> Option<StateUpdate> {
        Some(StateUpdate {
            tick: self.tick,
            t: self.t.0,
            q: self.q.iter().map(|n| n.0).collect(),
            kind: Kind::from_name(&self.kind)?,
            params: self.params.as_ref().map(|p| Params { center: unwrap(p.center), log_radius: p.log_radius.0, axis: unwrap(p.axis) }),
            log: unwrap(self.log),
            versor: unwrap(self.versor),
            twist: unwrap(self.twist),
            command_seq: self.command_seq,
            stale: self.stale,
            singular: self.singular,
            clamped: self.clamped,
            masked: self.masked,
            min_eigenvalue: self.min_eigenvalue.0,
            degeneracy: self.degeneracy.0,
            chains: self.chains.iter().map(|c| c.iter().map(|p| unwrap(*p)).collect()).collect(),
            error: self.error.clone(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Message was not valid JSON or not a known type.
    Malformed,
    /// Axes sent by a viewer.
    ReadOnly,
    /// Sequence number not above the last accepted one.
    OutOfOrder,
    /// Message type the server does not accept from clients.
    Unexpected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorMsg {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Axes(AxesMsg),
    State(StateMsg),
    Config(ConfigMsg),
    Error(ErrorMsg),
}

impl Message {
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }

    pub fn decode(text: &str) -> Result<Message, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Message {
        Message::Error(ErrorMsg { code, message: message.into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_round_trips_as_null() {
        let m = Message::Axes(AxesMsg { axes: wrap([0.5, f64::NAN, 0.0, 0.0, 0.0, 0.0, -1.0]), timestamp_ms: 7, seq: 3 });
        let s = m.encode();
        assert!(s.contains("null"));
        assert_eq!(Message::decode(&s).unwrap(), m);
    }

    #[test]
    fn unknown_type_and_fields_fail() {
        assert!(Message::decode(r#"{"type":"teleport"}"#).is_err());
        assert!(Message::decode(r#"{"type":"axes","axes":[0,0,0,0,0,0,0],"timestamp_ms":0,"seq":0,"x":1}"#).is_err());
        assert!(Message::decode(r#"{"type":"axes","axes":[0,0,0],"timestamp_ms":0,"seq":0}"#).is_err());
    }
}
