use std::fs;
use std::path::Path;
use std::process::Command;

use aoa_hopper::fixed_point::{closed_form_solution, numeric_fixed_point, NewtonSettings, Provenance, SimulatorMap};
use aoa_hopper::harness::{run_single, run_sweep, Config, GainStep, SweepConfig};
use aoa_hopper::sim::SimSettings;
use aoa_hopper::{ControlInputs, SlipParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aoa-hopper"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = "\
# small grid
p_bar_min = -1.2
p_bar_max = -0.6
p_bar_count = 3
k_theta_min = 0.4
k_theta_max = 0.7
k_theta_count = 2
pipelines = \"closed-form,analytic-numeric,simulator-numeric\"
";

#[test]
fn sweep_output_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut csvs = Vec::new();
    for (run, workers) in [("a", "1"), ("b", "3")] {
        let out = tmp.path().join(run);
        let status = bin()
            .arg("sweep")
            .arg(&cfg)
            .args(["--set", &format!("workers={workers}"), "-o"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        csvs.push((
            fs::read(out.join("sweep.csv")).unwrap(),
            fs::read(out.join("errors.csv")).unwrap(),
        ));
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn every_grid_point_appears_once() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    assert!(bin()
        .arg("sweep")
        .arg(&cfg)
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut keys: Vec<(String, String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string(), f[2].to_string())
        })
        .collect();
    assert_eq!(keys.len(), 3 * 2 * 3);
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 18);
}

#[test]
fn single_point_sweep_is_one_result_per_pipeline() {
    let mut cfg = Config::default();
    cfg.p_bar_count = 1;
    cfg.k_theta_count = 1;
    cfg.p_bar_min = -0.79;
    cfg.p_bar_max = -0.79;
    cfg.k_theta_min = 0.64;
    cfg.k_theta_max = 0.64;
    let report = run_sweep(&SweepConfig::from_config(&cfg).unwrap()).unwrap();
    assert_eq!(report.points.len(), 3);
    for p in Provenance::ALL {
        let pts: Vec<_> = report.pipeline_points(p).collect();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].ok().unwrap().provenance, p);
    }
}

#[test]
fn one_hop_from_a_fixed_point_returns_it() {
    let params = SlipParams::jerboa();
    let inputs = ControlInputs::new(-0.79, 0.64);
    let settings = SimSettings::default();
    let map = SimulatorMap {
        inputs,
        params,
        settings,
    };
    let seed = closed_form_solution(-0.79, 0.64, &params).unwrap().apex;
    let fp = numeric_fixed_point(&map, &seed, &NewtonSettings::simulator()).unwrap();
    let rep = run_single(&fp.apex, &inputs, &params, &settings, 1, None);
    assert!(rep.failure.is_none());
    let next = rep.hops[0].next_apex;
    assert!((next.x_dot - fp.apex.x_dot).abs() <= 1e-6);
    assert!((next.y - fp.apex.y).abs() <= 1e-6);
}

#[test]
fn thirty_hops_settle_with_large_touchdown_angle() {
    let rep = aoa_hopper::harness::run_single_from_config(&Config::default()).unwrap();
    assert!(rep.failure.is_none());
    assert_eq!(rep.hops.len(), 30);
    let last = rep.hops[29];
    let prev = rep.hops[28];
    assert!((last.next_apex.x_dot - prev.next_apex.x_dot).abs() < 1e-4);
    assert!(last.theta_td > 0.3 && last.theta_td < 0.7, "theta_td {}", last.theta_td);
}

// Radial kinetic energy at touchdown.
fn radial_energy(h: &aoa_hopper::harness::HopRecord, params: &SlipParams) -> f64 {
    0.5 * params.m * h.r_dot_td * h.r_dot_td
}

#[test]
fn raising_gain_mid_run_raises_radial_energy() {
    let params = SlipParams::jerboa();
    let inputs = ControlInputs::new(-0.79, 0.5);
    let seed = closed_form_solution(-0.79, 0.5, &params).unwrap().apex;
    let step = GainStep { hop: 25, k_theta: 0.7 };
    let rep = run_single(&seed, &inputs, &params, &SimSettings::default(), 50, Some(step));
    assert!(rep.failure.is_none(), "{:?}", rep.failure);
    let before = radial_energy(&rep.hops[24], &params);
    let after = radial_energy(&rep.hops[49], &params);
    assert!(after > before, "{after} <= {before}");
    assert_eq!(rep.hops[25].k_theta, 0.7);
}

#[test]
fn single_subcommand_writes_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n_hops = 3\n");
    let out = tmp.path().join("s");
    assert!(bin()
        .arg("single")
        .arg(&cfg)
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let hops = fs::read_to_string(out.join("hops.csv")).unwrap();
    assert_eq!(hops.lines().count(), 4);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.lines().next().unwrap().starts_with("t,phase,r"));
    assert!(!out.join("failure.json").exists());
}

#[test]
fn fixed_point_subcommand_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = bin()
        .arg("fixed-point")
        .arg(&cfg)
        .args([
            "--p-bar",
            "-0.79",
            "--k-theta",
            "0.64",
            "--pipeline",
            "analytic-numeric",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["provenance"], "analytic-numeric");
    assert!(v["apex"]["x_dot"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_key = write_config(tmp.path(), "no_such_key = 1\n");
    assert_eq!(bin().arg("sweep").arg(&bad_key).status().unwrap().code(), Some(2));
    let missing = tmp.path().join("absent.toml");
    assert_eq!(bin().arg("single").arg(&missing).status().unwrap().code(), Some(2));
    let good = write_config(tmp.path(), "");
    let code = bin()
        .arg("sweep")
        .arg(&good)
        .args(["--set", "p_bar_count=0"])
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));
    let code = bin()
        .arg("fixed-point")
        .arg(&good)
        .args(["--p-bar", "-1", "--k-theta", "0.5", "--pipeline", "bogus"])
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));
}

#[test]
fn all_failed_sweep_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    // no hopping gait exists without momentum
    let cfg = write_config(
        tmp.path(),
        "p_bar_min = -0.0001\np_bar_max = -0.0001\np_bar_count = 1\nk_theta_count = 1\npipelines = \"closed-form\"\n",
    );
    let out = tmp.path().join("o");
    let code = bin()
        .arg("sweep")
        .arg(&cfg)
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("failed:"));
}

#[test]
fn validate_subcommand_passes() {
    let out = bin().arg("validate").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("[PASS]").count(), 8);
}
