use std::path::PathBuf;

use cgacoop::sim::run_scenario;
use cgacoop_host::format::load_scenario;

fn data(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(sub)
}

fn run(name: &str) -> cgacoop::sim::Run {
    let (_, sc) = load_scenario(&data("scenarios").join(format!("{name}.toml"))).unwrap();
    run_scenario(&sc).unwrap()
}

#[test]
fn every_shipped_scenario_loads() {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(data("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let (file, sc) = load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
        sc.validate().unwrap();
        assert_eq!(Some(file.name.as_str()), path.file_stem().and_then(|s| s.to_str()));
        names.push(file.name);
    }
    assert!(names.len() >= 10);
}

#[test]
fn shipped_systems_match_builtins() {
    for name in ["leap-like", "three-arm-circle"] {
        let (a, qa) = cgacoop_host::format::load_system(data("systems").join(format!("{name}.toml")).to_str().unwrap()).unwrap();
        let (b, qb) = cgacoop::models::builtin(name).unwrap();
        assert_eq!(qa, qb);
        assert_eq!(a.dof, b.dof);
        let (ea, eb) = (a.end_effectors(&qa).unwrap(), b.end_effectors(&qb).unwrap());
        for (x, y) in ea.iter().zip(&eb) {
            for i in 0..3 {
                assert!((x[i] - y[i]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn reaching_scenarios_converge() {
    for name in ["circle-reaching", "plane-reaching", "circle-ik"] {
        let r = run(name);
        assert_eq!(r.summary.converged, Some(true), "{name}: {:?}", r.summary);
        assert!(r.summary.final_error < 1e-3 * r.summary.initial_error.max(1.0), "{name}");
    }
}

#[test]
fn plane_reaching_never_dilates() {
    let r = run("plane-reaching");
    let max = r.records.iter().filter_map(|rec| rec.command).map(|c| c[3].abs()).fold(0.0, f64::max);
    assert!(max <= 1e-10, "{max}");
}

#[test]
fn circle_reaching_dilates() {
    let r = run("circle-reaching");
    let max = r.records.iter().filter_map(|rec| rec.command).map(|c| c[3].abs()).fold(0.0, f64::max);
    assert!(max > 1e-3, "{max}");
}

#[test]
fn line_constraint_contrast() {
    let held = run("line-constraint").summary;
    let free = run("line-free").summary;
    assert!(held.max_constraint_deviation.unwrap() <= 1e-6);
    assert!(free.max_constraint_deviation.unwrap() > 1e-3);
    assert!(held.secondary_final.unwrap() <= 0.1 * held.secondary_initial.unwrap());
}

#[test]
fn nullspace_contrast() {
    let held = run("nullspace").summary;
    let free = run("nullspace-unprojected").summary;
    assert!(held.max_similarity_distance.unwrap() <= 1e-6);
    assert!(free.max_similarity_distance.unwrap() > 1e-3);
}

#[test]
fn hand_dilation_shrinks_the_sphere() {
    let r = run("hand-dilation");
    let radii: Vec<f64> = r.records.iter().map(|rec| rec.params.unwrap().radius()).collect();
    assert!(radii.windows(2).all(|w| w[1] < w[0]));
    let ratio = radii.last().unwrap() / radii[0];
    assert!((ratio - (-0.2f64).exp()).abs() < 1e-3, "{ratio}");
}

#[test]
fn singularity_sweep_degenerates() {
    let r = run("singularity-sweep");
    assert!(r.summary.events.iter().any(|e| e.contains("egenerate")), "{:?}", r.summary.events);
    let last = r.records.last().unwrap();
    assert!(last.min_masked_eigenvalue < 1e-6 || last.event.is_some());
}
