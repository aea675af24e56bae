//! Trajectory output: NDJSON records and plain columnar tables.

use std::io::Write;

use anyhow::Result;
use cgacoop::sim::{Record, Run, Summary};
use serde_json::{json, Value};

/// JSON number, or null when not finite.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

pub fn record_json(r: &Record) -> Value {
    json!({
        "t": num(r.t),
        "q": nums(&r.q),
        "qd": nums(&r.qd),
        "tau": r.tau.as_ref().map(|t| nums(t)),
        "blade": nums(&r.blade),
        "params": r.params.map(|p| json!({
            "center": nums(&p.center),
            "radius": num(p.radius()),
            "log_radius": num(p.log_radius),
            "axis": nums(&p.axis),
        })),
        "log": nums(&r.log),
        "command": r.command.map(|c| nums(&c)),
        "error_norm": num(r.error_norm),
        "eigenvalues": nums(&r.eigenvalues),
        "min_masked_eigenvalue": num(r.min_masked_eigenvalue),
        "degeneracy": num(r.degeneracy),
        "singular": r.singular,
        "event": r.event,
    })
}

pub fn summary_json(s: &Summary) -> Value {
    json!({
        "name": s.name,
        "mode": s.mode,
        "steps": s.steps,
        "converged": s.converged,
        "iterations": s.iterations,
        "initial_error": num(s.initial_error),
        "final_error": num(s.final_error),
        "max_similarity_distance": s.max_similarity_distance.map(num),
        "max_constraint_deviation": s.max_constraint_deviation.map(num),
        "secondary_initial": s.secondary_initial.map(num),
        "secondary_final": s.secondary_final.map(num),
        "clamp_events": s.clamp_events,
        "events": s.events,
    })
}

/// One JSON object per line, then a final `{"summary": ...}` line.
pub fn write_records<W: Write>(out: &mut W, run: &Run) -> Result<()> {
    for r in &run.records {
        serde_json::to_writer(&mut *out, &record_json(r))?;
        out.write_all(b"\n")?;
    }
    serde_json::to_writer(&mut *out, &json!({ "summary": summary_json(&run.summary) }))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub const TABLE_COLUMNS: [&str; 20] = [
    "t", "error_norm", "cx", "cy", "cz", "radius", "ax", "ay", "az", "log_e23", "log_e13", "log_e12", "log_e0inf", "log_e1inf",
    "log_e2inf", "log_e3inf", "cmd_e0inf", "min_masked_eig", "degeneracy", "singular",
];

fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.9e}")
    } else {
        "nan".into()
    }
}

/// Whitespace-separated columns with a header row.
pub fn write_table<W: Write>(out: &mut W, run: &Run) -> Result<()> {
    writeln!(out, "{}", TABLE_COLUMNS.join(" "))?;
    for r in &run.records {
        let mut row = vec![r.t, r.error_norm];
        match r.params {
            Some(p) => {
                row.extend_from_slice(&p.center);
                row.push(p.radius());
                row.extend_from_slice(&p.axis);
            }
            None => row.extend_from_slice(&[f64::NAN; 7]),
        }
        row.extend_from_slice(&r.log);
        row.push(r.command.map_or(f64::NAN, |c| c[3]));
        row.push(r.min_masked_eigenvalue);
        row.push(r.degeneracy);
        let mut cells: Vec<String> = row.into_iter().map(cell).collect();
        cells.push(if r.singular { "1".into() } else { "0".into() });
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cgacoop::models;
    use cgacoop::sim::{record, State};

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(num(f64::INFINITY), Value::Null);
        assert_eq!(num(1.5), json!(1.5));
    }

    #[test]
    fn table_rows_match_header() {
        let (sys, q0) = models::builtin("three-arm-circle").unwrap();
        let r = record(&sys, &State::at_rest(q0), None, None, 0.0);
        let run = Run {
            initial: r.q.clone(),
            desired: None,
            records: vec![r.clone(), r],
            summary: Summary { name: "x".into(), mode: "kinematic".into(), steps: 1, ..Default::default() },
        };
        let mut buf = Vec::new();
        write_table(&mut buf, &run).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines() {
            assert_eq!(line.split_whitespace().count(), TABLE_COLUMNS.len());
        }
        let mut buf = Vec::new();
        write_records(&mut buf, &run).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        for line in text.lines() {
            serde_json::from_str::<Value>(line).unwrap();
        }
    }
}
