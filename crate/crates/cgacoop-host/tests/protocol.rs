use std::path::PathBuf;

use cgacoop::models;
use cgacoop::teleop::{AxesCommand, TeleopConfig, TeleopSession};
use cgacoop_host::protocol::{AxesMsg, ClockMode, ConfigMsg, ErrorCode, Message, Num, ParamsMsg, Role, StateMsg};
use serde_json::Value;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compare against the frozen file; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, msg: &Message) {
    let path = golden_dir().join(format!("{name}.json"));
    let text = msg.encode();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, format!("{text}\n")).unwrap();
    }
    let frozen = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let frozen = frozen.trim_end();
    assert_eq!(text, frozen, "{name} encoding changed");
    assert_eq!(&Message::decode(frozen).unwrap(), msg, "{name} decoding changed");
}

fn n<const N: usize>(x: [f64; N]) -> [Num; N] {
    x.map(Num)
}

fn state() -> StateMsg {
    StateMsg {
        tick: 12,
        t: Num(0.12),
        q: vec![Num(0.1), Num(-0.25), Num(0.5)],
        kind: "sphere".into(),
        params: Some(ParamsMsg { center: n([0.0, 0.05, 0.1]), radius: Num(0.04), log_radius: Num(0.04f64.ln()), axis: n([0.0, 0.0, 1.0]) }),
        log: n([0.0, 0.0, 0.0, -0.5, 0.01, 0.0, 0.1]),
        versor: n([1.0, 0.0, 0.0, 0.0, -0.25, 0.005, 0.0, 0.05, 0.0, 0.0, 0.0, 0.0]),
        twist: n([0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]),
        command_seq: Some(4),
        stale: false,
        singular: false,
        clamped: true,
        masked: true,
        min_eigenvalue: Num(0.0125),
        degeneracy: Num(3.5e-7),
        chains: vec![vec![n([0.0, 0.0, 0.0]), n([0.0, 0.0, 0.05])], vec![n([0.02, 0.0, 0.0]), n([0.02, 0.01, 0.06])]],
        error: None,
    }
}

fn degenerate_state() -> StateMsg {
    StateMsg {
        tick: 3,
        t: Num(0.03),
        q: vec![Num(0.0); 3],
        kind: "circle".into(),
        params: None,
        log: n([f64::NAN; 7]),
        versor: n([f64::NAN; 12]),
        twist: n([0.0; 7]),
        command_seq: None,
        stale: true,
        singular: true,
        clamped: false,
        masked: false,
        min_eigenvalue: Num(f64::NAN),
        degeneracy: Num(0.0),
        chains: vec![],
        error: Some("degenerate primitive".into()),
    }
}

#[test]
fn axes_golden() {
    golden("axes", &Message::Axes(AxesMsg { axes: n([0.5, 0.0, -0.25, 0.0, 1.0, 0.0, -1.0]), timestamp_ms: 1500, seq: 42 }));
}

#[test]
fn axes_with_missing_value_golden() {
    golden("axes-null", &Message::Axes(AxesMsg { axes: n([0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]), timestamp_ms: 0, seq: 1 }));
}

#[test]
fn state_golden() {
    golden("state", &Message::State(state()));
    golden("state-degenerate", &Message::State(degenerate_state()));
}

#[test]
fn config_golden() {
    let (sys, _) = models::builtin("leap-like").unwrap();
    let cfg = ConfigMsg::new(Role::Commander, &sys, &TeleopConfig::default(), ClockMode::Lockstep);
    golden("config", &Message::Config(cfg.clone()));
    golden("config-viewer", &Message::Config(ConfigMsg { role: Role::Viewer, mode: ClockMode::Realtime, ..cfg }));
}

#[test]
fn error_golden() {
    for (name, code) in [
        ("error-malformed", ErrorCode::Malformed),
        ("error-read-only", ErrorCode::ReadOnly),
        ("error-out-of-order", ErrorCode::OutOfOrder),
        ("error-unexpected", ErrorCode::Unexpected),
    ] {
        golden(name, &Message::error(code, "details"));
    }
}

#[test]
fn field_names_are_stable() {
    let v: Value = serde_json::from_str(&Message::State(state()).encode()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(
        keys,
        [
            "chains", "clamped", "command_seq", "degeneracy", "error", "kind", "log", "masked", "min_eigenvalue", "params", "q", "singular",
            "stale", "t", "tick", "twist", "type", "versor"
        ]
    );
}

#[test]
fn session_updates_survive_the_wire() {
    let (sys, q0) = models::builtin("leap-like").unwrap();
    let mut s = TeleopSession::new(sys, q0, TeleopConfig::default()).unwrap();
    s.submit(AxesCommand { axes: [0.2, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5], timestamp_ms: 10, seq: 1 }, 10).unwrap();
    for k in 0..5 {
        let up = s.step(10 + k * 10);
        let text = Message::State(StateMsg::from(&up)).encode();
        let Message::State(back) = Message::decode(&text).unwrap() else { panic!("not a state") };
        assert_eq!(back.update().unwrap(), up);
    }
}

#[test]
fn rejects_bad_input() {
    for text in [
        "",
        "[]",
        r#"{"axes":[0,0,0,0,0,0,0],"timestamp_ms":0,"seq":0}"#,
        r#"{"type":"axes","axes":[0,0,0,0,0,0,0],"timestamp_ms":-1,"seq":0}"#,
        r#"{"type":"axes","axes":[0,0,0,0,0,0,0,0],"timestamp_ms":0,"seq":0}"#,
        r#"{"type":"axes","axes":[0,0,0,0,0,0,"a"],"timestamp_ms":0,"seq":0}"#,
        r#"{"type":"error","code":"nope","message":""}"#,
    ] {
        assert!(Message::decode(text).is_err(), "{text}");
    }
}
