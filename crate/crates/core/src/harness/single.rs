//! Multi-hop simulations with full trajectory output.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use super::config::Config;
use super::sweep::Failure;
use crate::error::Result;
use crate::fixed_point::closed_form_fixed_point;
use crate::format::sig;
use crate::model::{ApexState, ControlInputs, SlipParams};
use crate::sim::{hop_end, simulate_hop, HybridTrajectory, SimSettings};

/// Optional mid-run change of the angle-of-attack gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainStep {
    /// First hop (0-based) run with the new gain.
    pub hop: usize,
    pub k_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopRecord {
    pub hop: usize,
    pub k_theta: f64,
    /// Apex entering the hop.
    pub apex: ApexState,
    pub theta_td: f64,
    pub theta_lo: f64,
    pub r_lo: f64,
    pub p_lo: f64,
    /// Radial touchdown speed.
    pub r_dot_td: f64,
    pub next_apex: ApexState,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleReport {
    pub hops: Vec<HopRecord>,
    pub failure: Option<HopFailure>,
    #[serde(skip)]
    pub trajectory: HybridTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopFailure {
    pub hop: usize,
    pub apex: ApexState,
    pub reason: Failure,
}

/// Chains `n_hops` simulator hops from `seed`, stopping at the first failure.
pub fn run_single(
    seed: &ApexState,
    inputs: &ControlInputs,
    params: &SlipParams,
    settings: &SimSettings,
    n_hops: usize,
    step: Option<GainStep>,
) -> SingleReport {
    let mut traj = HybridTrajectory::default();
    let mut hops = Vec::with_capacity(n_hops);
    let mut apex = *seed;
    let (mut t, mut x) = (0.0, 0.0);
    let mut failure = None;
    for hop in 0..n_hops {
        let mut inp = *inputs;
        if let Some(s) = step.filter(|s| hop >= s.hop) {
            inp.k_theta = s.k_theta;
        }
        match simulate_hop(&apex, &inp, params, settings, Some((&mut traj, t, x))) {
            Ok(h) => {
                hops.push(HopRecord {
                    hop,
                    k_theta: inp.k_theta,
                    apex,
                    theta_td: h.theta_td,
                    theta_lo: h.liftoff.theta,
                    r_lo: h.liftoff.r,
                    p_lo: h.p_liftoff,
                    r_dot_td: h.touchdown.r_dot,
                    next_apex: h.next_apex,
                });
                (t, x) = hop_end(t, x, &apex, &h, params);
                apex = h.next_apex;
            }
            Err(e) => {
                failure = Some(HopFailure {
                    hop,
                    apex,
                    reason: Failure::from(&e),
                });
                break;
            }
        }
    }
    SingleReport {
        hops,
        failure,
        trajectory: traj,
    }
}

/// Runs the single-simulation scenario described by `cfg`.
pub fn run_single_from_config(cfg: &Config) -> Result<SingleReport> {
    let params = cfg.params();
    let seed = match cfg.start_apex() {
        Some(a) => a,
        None => closed_form_fixed_point(cfg.p_bar, cfg.k_theta, &params)?.apex,
    };
    let step = match (cfg.k_theta_step_hop, cfg.k_theta_step_value) {
        (Some(hop), Some(k_theta)) => Some(GainStep { hop, k_theta }),
        _ => None,
    };
    Ok(run_single(
        &seed,
        &cfg.inputs(cfg.p_bar, cfg.k_theta),
        &params,
        &cfg.settings(),
        cfg.n_hops,
        step,
    ))
}

pub const HOPS_HEADER: &str = "hop,k_theta,x_dot,y,theta_td,theta_lo,r_lo,p_lo,r_dot_td,x_dot_next,y_next";

pub fn write_hops_csv<W: Write>(report: &SingleReport, mut w: W) -> io::Result<()> {
    writeln!(w, "{HOPS_HEADER}")?;
    for h in &report.hops {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            h.hop,
            sig(h.k_theta),
            sig(h.apex.x_dot),
            sig(h.apex.y),
            sig(h.theta_td),
            sig(h.theta_lo),
            sig(h.r_lo),
            sig(h.p_lo),
            sig(h.r_dot_td),
            sig(h.next_apex.x_dot),
            sig(h.next_apex.y)
        )?;
    }
    Ok(())
}

/// Writes `trajectory.csv`, `hops.csv` and, after a failure, `failure.json`.
pub fn write_single_outputs(report: &SingleReport, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    report
        .trajectory
        .write_csv(io::BufWriter::new(fs::File::create(dir.join("trajectory.csv"))?))?;
    write_hops_csv(report, io::BufWriter::new(fs::File::create(dir.join("hops.csv"))?))?;
    let failure_path = dir.join("failure.json");
    match &report.failure {
        Some(f) => {
            let json = serde_json::to_string_pretty(f).map_err(io::Error::other)?;
            fs::write(failure_path, json + "\n")?;
        }
        None if failure_path.exists() => fs::remove_file(failure_path)?,
        None => {}
    }
    Ok(())
}
