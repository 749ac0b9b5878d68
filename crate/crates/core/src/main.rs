use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aoa_hopper::fixed_point::{
    closed_form_fixed_point, numeric_fixed_point, AnalyticMap, NewtonSettings, Provenance, SimulatorMap,
};
use aoa_hopper::format::sig;
use aoa_hopper::harness::{self, Config, SweepConfig};
use aoa_hopper::ApexState;

const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "aoa-hopper",
    version,
    about = "Hip-energized hopping: sweeps, simulations and fixed points"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat key-value config file
    config: PathBuf,
    /// Override a config key, e.g. `--set p_bar_count=5` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output_dir`)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<Config, String> {
        let mut overrides = self.set.clone();
        if let Some(o) = &self.output {
            overrides.push(format!("output_dir={}", toml_string(&o.display().to_string())));
        }
        Config::load(&self.config, &overrides).map_err(|e| e.to_string())
    }
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Subcommand)]
enum Command {
    /// Fixed points over the (p_bar, k_theta) grid for every selected pipeline
    Sweep(Common),
    /// Chain simulator hops and write the trajectory
    Single(Common),
    /// One fixed point
    FixedPoint {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        p_bar: f64,
        #[arg(long)]
        k_theta: f64,
        /// closed-form, analytic-numeric or simulator-numeric
        #[arg(long, default_value = "closed-form")]
        pipeline: String,
    },
    /// Run the invariant suite
    Validate {
        /// Optional config supplying model parameters
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode, String> {
    match cmd {
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let sweep = SweepConfig::from_config(&cfg).map_err(|e| e.to_string())?;
            let report = harness::run_sweep(&sweep).map_err(|e| e.to_string())?;
            harness::write_sweep_outputs(&report, &cfg.output_dir).map_err(|e| e.to_string())?;
            for c in &report.counts {
                println!(
                    "{:<18} converged {:>4}  failed {:>4}  unstable {:>4}  max spectral radius {}",
                    c.pipeline.as_str(),
                    c.converged,
                    c.failed,
                    c.unstable,
                    sig(c.max_spectral_radius)
                );
            }
            for e in &report.errors {
                println!(
                    "{} vs {}: rms x_dot {} ({}%), rms y {} ({}%), n = {}",
                    e.predicted.as_str(),
                    e.reference.as_str(),
                    sig(e.x_dot.rms),
                    sig(e.x_dot.percent_rms),
                    sig(e.y.rms),
                    sig(e.y.percent_rms),
                    e.x_dot.n
                );
            }
            println!("wrote {}", cfg.output_dir.display());
            Ok(if report.all_failed() {
                ExitCode::from(EXIT_ALL_FAILED)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Single(common) => {
            let cfg = common.load()?;
            let report = harness::run_single_from_config(&cfg).map_err(|e| e.to_string())?;
            harness::write_single_outputs(&report, &cfg.output_dir).map_err(|e| e.to_string())?;
            if let Some(last) = report.hops.last() {
                println!(
                    "{} hops; last apex x_dot {} y {} theta_td {} theta_lo {} p_lo {}",
                    report.hops.len(),
                    sig(last.next_apex.x_dot),
                    sig(last.next_apex.y),
                    sig(last.theta_td),
                    sig(last.theta_lo),
                    sig(last.p_lo)
                );
            }
            if let Some(f) = &report.failure {
                println!("stopped at hop {}: {}", f.hop, f.reason.message);
            }
            println!("wrote {}", cfg.output_dir.display());
            Ok(if report.hops.is_empty() {
                ExitCode::from(EXIT_ALL_FAILED)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::FixedPoint {
            common,
            p_bar,
            k_theta,
            pipeline,
        } => {
            let cfg = common.load()?;
            let pipeline: Provenance = pipeline.parse().map_err(|e: aoa_hopper::Error| e.to_string())?;
            let params = cfg.params();
            let inputs = cfg.inputs(p_bar, k_theta);
            inputs.validate().map_err(|e| e.to_string())?;
            let closed = closed_form_fixed_point(p_bar, k_theta, &params);
            let seed = closed.as_ref().map(|r| r.apex).unwrap_or(ApexState::new(1.0, 0.22));
            let result = match pipeline {
                Provenance::ClosedForm => closed,
                Provenance::AnalyticNumeric => {
                    numeric_fixed_point(&AnalyticMap { inputs, params }, &seed, &NewtonSettings::analytic())
                }
                Provenance::SimulatorNumeric => numeric_fixed_point(
                    &SimulatorMap {
                        inputs,
                        params,
                        settings: cfg.settings(),
                    },
                    &seed,
                    &NewtonSettings::simulator(),
                ),
            };
            match result {
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).map_err(|e| e.to_string())?);
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("fixed point failed: {e}");
                    Ok(ExitCode::from(EXIT_ALL_FAILED))
                }
            }
        }
        Command::Validate { config } => {
            let params = match config {
                Some(path) => Config::load(&path, &[]).map_err(|e| e.to_string())?.params(),
                None => aoa_hopper::SlipParams::jerboa(),
            };
            let checks = harness::run_validation(&params);
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
