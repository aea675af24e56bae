use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use cgacoop::control::{gauss_newton_ik, IkOptions};
use cgacoop::cooperative::{CooperativeSystem, LogJacobian, Manipulability};
use cgacoop::ocp::{command_trajectory, solve_reaching, OcpConfig};
use cgacoop::sim::{initial_configuration, run_scenario, Mode, Scenario};
use cgacoop::teleop::{AxisGains, TeleopConfig};
use cgacoop::versor::{decompose, log, Group};
use cgacoop_host::format::{load_scenario, load_system, SystemFile};
use cgacoop_host::output::{num, nums, write_records, write_table};
use cgacoop_host::protocol::ClockMode;
use cgacoop_host::server::{serve, ServerOptions};
use cgacoop_host::verify::{run_suite, Sizes, SUITES};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cgacoop", version, about = "Cooperative manipulation with conformal geometric algebra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Solve one inverse-kinematics problem towards a perturbed configuration.
    Ik {
        #[arg(long, default_value = "builtin:three-arm-circle")]
        system: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target joints are q0 + U(−p, p).
        #[arg(long, default_value_t = 0.2)]
        perturbation: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one iLQR reaching problem and print the command trajectory.
    Ocp {
        #[arg(long, default_value = "builtin:three-arm-circle")]
        system: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        perturbation: f64,
        #[arg(long, default_value_t = 250)]
        horizon: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Serve the teleoperation websocket.
    Teleop {
        #[arg(long, default_value = "builtin:leap-like")]
        system: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = cgacoop::teleop::DEFAULT_DT)]
        dt: f64,
        /// Seven comma-separated axis gains (tx,ty,tz,rx,ry,rz,dilation).
        #[arg(long)]
        gains: Option<String>,
        #[arg(long, default_value_t = cgacoop::teleop::DEFAULT_STALENESS_MS)]
        staleness_ms: u64,
        #[arg(long, default_value_t = 2.0)]
        max_joint_speed: f64,
        /// Tick once per received command at its timestamp.
        #[arg(long)]
        lockstep: bool,
        /// Write every broadcast state to this NDJSON file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_ticks: Option<u64>,
    },
    /// Run verification suites.
    Verify {
        /// algebra, groups, jacobians, similarity, controllers or all.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        quick: bool,
    },
    /// Report the primitive, similarity and manipulability at a configuration.
    Inspect {
        #[arg(long, default_value = "builtin:three-arm-circle")]
        system: String,
        /// Comma-separated joints; defaults to the system's nominal configuration.
        #[arg(long)]
        q: Option<String>,
        /// Print the system as a TOML file instead.
        #[arg(long)]
        export: bool,
    },
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number {x:?}"))).collect()
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn echo(value: serde_json::Value) {
    eprintln!("config {value}");
}

fn perturbed_target(sys: &CooperativeSystem, q0: &[f64], seed: u64, p: f64) -> Result<(Vec<f64>, cgacoop::Multivector)> {
    let mut sc = Scenario::new("target", sys.clone(), q0.to_vec(), Mode::Kinematic);
    sc.seed = seed;
    sc.perturbation = p;
    let qt = initial_configuration(&sc);
    let vd = sys.similarity(&qt).map_err(|e| anyhow!("target configuration: {e}"))?;
    Ok((qt, vd))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { scenario, seed, out, format } => {
            let (file, mut sc) = load_scenario(&scenario)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            echo(json!({
                "command": "run",
                "scenario": scenario,
                "system": file.system,
                "mode": sc.mode.name(),
                "seed": sc.seed,
                "perturbation": sc.perturbation,
                "dt": sc.dt,
                "duration": sc.duration,
                "format": format!("{format:?}").to_lowercase(),
            }));
            let run = run_scenario(&sc)?;
            let mut w = sink(&out)?;
            match format {
                Format::Table => write_table(&mut w, &run)?,
                Format::Records => write_records(&mut w, &run)?,
            }
            w.flush()?;
            eprintln!("summary {}", cgacoop_host::output::summary_json(&run.summary));
            Ok(true)
        }
        Command::Ik { system, seed, perturbation, tol, max_iter, out } => {
            let (sys, q0) = load_system(&system)?;
            echo(json!({"command": "ik", "system": system, "seed": seed, "perturbation": perturbation, "tol": tol, "max_iter": max_iter}));
            let (qt, vd) = perturbed_target(&sys, &q0, seed, perturbation)?;
            let opts = IkOptions { tol, max_iter, ..IkOptions::default() };
            let (q, residual, iterations, converged, trace) = match gauss_newton_ik(&sys, &q0, &vd, &opts) {
                Ok(r) => (r.q, r.residual, r.iterations, true, r.trace),
                Err(cgacoop::Error::NotConverged { best, residual, iterations }) => (best, residual, iterations, false, vec![]),
                Err(e) => return Err(e.into()),
            };
            let mut w = sink(&out)?;
            serde_json::to_writer(
                &mut w,
                &json!({
                    "converged": converged,
                    "iterations": iterations,
                    "residual": num(residual),
                    "trace": nums(&trace),
                    "target_q": nums(&qt),
                    "q": nums(&q),
                }),
            )?;
            writeln!(w)?;
            w.flush()?;
            Ok(converged)
        }
        Command::Ocp { system, seed, perturbation, horizon, dt, r, out, format } => {
            let (sys, q0) = load_system(&system)?;
            let cfg = OcpConfig { horizon, dt, r: r.unwrap_or(OcpConfig::default().r), ..OcpConfig::default() };
            echo(json!({"command": "ocp", "system": system, "seed": seed, "perturbation": perturbation, "horizon": horizon, "dt": dt, "r": cfg.r}));
            let (_, vd) = perturbed_target(&sys, &q0, seed, perturbation)?;
            let sol = solve_reaching(&sys, &q0, &vec![0.0; sys.dof], &vd, &cfg)?;
            let cmds = command_trajectory(&sys, &sol)?;
            let mut w = sink(&out)?;
            match format {
                Format::Table => {
                    writeln!(w, "k t xi_e23 xi_e13 xi_e12 xi_e0inf xi_e1inf xi_e2inf xi_e3inf")?;
                    for (k, c) in cmds.iter().enumerate() {
                        let cells: Vec<String> = c.iter().map(|x| format!("{x:.9e}")).collect();
                        writeln!(w, "{k} {:.6} {}", k as f64 * dt, cells.join(" "))?;
                    }
                }
                Format::Records => {
                    for (k, c) in cmds.iter().enumerate() {
                        serde_json::to_writer(&mut w, &json!({"k": k, "t": k as f64 * dt, "command": nums(c)}))?;
                        writeln!(w)?;
                    }
                }
            }
            w.flush()?;
            eprintln!(
                "summary {}",
                json!({"converged": sol.converged, "iterations": sol.iterations, "terminal_norm": num(sol.terminal_norm), "cost_trace": nums(&sol.cost_trace)})
            );
            Ok(sol.converged)
        }
        Command::Teleop { system, port, host, dt, gains, staleness_ms, max_joint_speed, lockstep, out, max_ticks } => {
            let (sys, q0) = load_system(&system)?;
            let gains = match gains {
                Some(g) => {
                    let v = parse_list(&g)?;
                    let arr: [f64; 7] = v.try_into().map_err(|_| anyhow!("--gains needs seven values"))?;
                    AxisGains(arr)
                }
                None => AxisGains::default(),
            };
            let bind: SocketAddr = format!("{host}:{port}").parse().with_context(|| format!("bad address {host}:{port}"))?;
            let mode = if lockstep { ClockMode::Lockstep } else { ClockMode::Realtime };
            echo(json!({
                "command": "teleop", "system": system, "bind": bind.to_string(), "dt": dt, "gains": gains.0,
                "staleness_ms": staleness_ms, "max_joint_speed": max_joint_speed, "mode": mode, "out": out, "max_ticks": max_ticks,
            }));
            let opts = ServerOptions {
                bind,
                teleop: TeleopConfig { dt, gains, staleness_ms, max_joint_speed },
                mode,
                tee: out,
                max_ticks,
            };
            let handle = serve(sys, q0, opts)?;
            eprintln!("listening on {}", handle.url());
            let ticks = handle.wait()?;
            eprintln!("stopped after {ticks} ticks");
            Ok(true)
        }
        Command::Verify { suite, seed, quick } => {
            let sizes = if quick { Sizes::QUICK } else { Sizes::FULL };
            let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite.as_str()] };
            echo(json!({"command": "verify", "suites": names, "seed": seed, "quick": quick}));
            let mut ok = true;
            for n in names {
                let r = run_suite(n, seed, sizes)?;
                print!("{r}");
                ok &= r.passed();
            }
            Ok(ok)
        }
        Command::Inspect { system, q, export } => {
            let (sys, q0) = load_system(&system)?;
            let q = match q {
                Some(s) => parse_list(&s)?,
                None => q0.clone(),
            };
            if q.len() != sys.dof {
                bail!("--q has {} values, system has {} joints", q.len(), sys.dof);
            }
            echo(json!({"command": "inspect", "system": system, "q": q, "export": export}));
            if export {
                print!("{}", toml::to_string(&SystemFile::from_system(&sys, &q)?)?);
                return Ok(true);
            }
            println!("{:#}", inspect(&sys, &q));
            Ok(true)
        }
    }
}

fn inspect(sys: &CooperativeSystem, q: &[f64]) -> serde_json::Value {
    let mask = sys.kind.controllable_mask();
    let mut report = json!({
        "system": sys.name,
        "kind": sys.kind.name(),
        "dof": sys.dof,
        "chains": sys.slots.iter().map(|s| json!({"name": s.chain.name, "joints": s.joints})).collect::<Vec<_>>(),
        "mask": mask,
        "end_effectors": sys.end_effectors(q).map(|e| e.iter().map(|p| nums(p)).collect::<Vec<_>>()).ok(),
    });
    match sys.evaluate(q, None) {
        Ok(ev) => {
            report["degenerate"] = json!(false);
            report["params"] = match ev.primitive.params() {
                Ok(p) => json!({"center": nums(&p.center), "radius": num(p.radius()), "axis": nums(&p.axis)}),
                Err(e) => json!({"error": e.to_string()}),
            };
            report["log"] = log(Group::Similarity, &ev.versor).map(|b| nums(&b)).unwrap_or_else(|e| json!({"error": e.to_string()}));
            report["decomposition"] = match decompose(&ev.versor) {
                Ok(f) => json!({
                    "translation": nums(&f.t),
                    "rotation": cgacoop::versor::log_rotor(&f.rotor).map(|r| nums(&r)).unwrap_or(serde_json::Value::Null),
                    "dilation": num(f.b),
                }),
                Err(e) => json!({"error": e.to_string()}),
            };
            report["flipped"] = json!(ev.flipped);
            let spectrum = Manipulability::new(&cgacoop::cooperative::masked_rows(&ev.j_g, &mask)).eigenvalues;
            report["manipulability"] = nums(&spectrum);
            report["min_eigenvalue"] = num(ev.singularity.min_eigenvalue);
            report["degeneracy"] = num(ev.singularity.degeneracy);
            report["singular"] = json!(ev.singularity.singular);
            report["j_b_rank"] = match sys.jacobian_b(q, LogJacobian::Analytic) {
                Ok(j) => json!(j.rank(1e-9)),
                Err(e) => json!({"error": e.to_string()}),
            };
        }
        Err(e) => {
            report["degenerate"] = json!(true);
            report["error"] = json!(e.to_string());
        }
    }
    report
}
