//! Flat key-value run configuration.
//!
//! The file is TOML restricted to top-level keys; `#` starts a comment.
//! Missing keys take the defaults below, unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::Provenance;
use crate::model::{ApexState, ControlInputs, SlipParams};
use crate::sim::{SimSettings, TorqueUpdate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub m: f64,
    pub k: f64,
    pub b: f64,
    pub r0: f64,
    pub g: f64,

    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Hip torque limit (N m); absent or zero means unlimited.
    pub tau_max: f64,

    pub dt: f64,
    /// Controller sample period (s); zero re-evaluates the torque every step.
    pub control_period: f64,
    pub sample_period: f64,
    pub event_tol: f64,

    pub p_bar_min: f64,
    pub p_bar_max: f64,
    pub p_bar_count: usize,
    pub k_theta_min: f64,
    pub k_theta_max: f64,
    pub k_theta_count: usize,
    /// Comma-separated subset of `closed-form,analytic-numeric,simulator-numeric`.
    pub pipelines: String,
    pub seed_chaining: bool,
    /// Worker threads for sweeps; zero uses every core.
    pub workers: usize,
    pub output_dir: PathBuf,

    pub p_bar: f64,
    pub k_theta: f64,
    pub n_hops: usize,
    /// Starting apex for single runs; the closed-form fixed point when absent.
    pub apex_x_dot: Option<f64>,
    pub apex_y: Option<f64>,
    /// Hop index at which `k_theta` switches to `k_theta_step_value`.
    pub k_theta_step_hop: Option<usize>,
    pub k_theta_step_value: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let p = SlipParams::jerboa();
        let s = SimSettings::default();
        Self {
            m: p.m,
            k: p.k,
            b: p.b,
            r0: p.r0,
            g: p.g,
            kp: ControlInputs::DEFAULT_KP,
            ki: ControlInputs::DEFAULT_KI,
            kd: ControlInputs::DEFAULT_KD,
            tau_max: 0.0,
            dt: s.dt,
            control_period: 1e-3,
            sample_period: s.sample_period,
            event_tol: s.event_tol,
            p_bar_min: -1.55,
            p_bar_max: -0.5,
            p_bar_count: 20,
            k_theta_min: 0.3,
            k_theta_max: 0.75,
            k_theta_count: 20,
            pipelines: "closed-form,analytic-numeric,simulator-numeric".into(),
            seed_chaining: true,
            workers: 0,
            output_dir: PathBuf::from("out"),
            p_bar: -0.79,
            k_theta: 0.64,
            n_hops: 30,
            apex_x_dot: None,
            apex_y: None,
            k_theta_step_hop: None,
            k_theta_step_value: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

/// Parses `key=value` into a TOML value, reading bare words as strings.
fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| config_err(format!("override '{item}' is not key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

impl Config {
    /// Parses config text and applies `key=value` overrides on top.
    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(config_err(format!("nested table '{k}' not allowed; use flat keys")));
        }
        for item in overrides {
            let (k, v) = parse_override(item)?;
            table.insert(k, v);
        }
        let cfg: Config = table.try_into().map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_with(&text, overrides)
    }

    pub fn params(&self) -> SlipParams {
        SlipParams {
            m: self.m,
            k: self.k,
            b: self.b,
            r0: self.r0,
            g: self.g,
        }
    }

    pub fn inputs(&self, p_bar: f64, k_theta: f64) -> ControlInputs {
        let limit = (self.tau_max > 0.0).then_some(self.tau_max);
        ControlInputs::new(p_bar, k_theta)
            .with_gains(self.kp, self.ki, self.kd)
            .with_torque_limit(limit)
    }

    pub fn settings(&self) -> SimSettings {
        SimSettings {
            dt: self.dt,
            torque: if self.control_period > 0.0 {
                TorqueUpdate::ZeroOrderHold {
                    period: self.control_period,
                }
            } else {
                TorqueUpdate::Continuous
            },
            event_tol: self.event_tol,
            sample_period: self.sample_period,
            ..SimSettings::default()
        }
    }

    pub fn pipeline_list(&self) -> Result<Vec<Provenance>> {
        let mut out = Vec::new();
        for name in self.pipelines.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let p: Provenance = name.parse()?;
            if !out.contains(&p) {
                out.push(p);
            }
        }
        if out.is_empty() {
            return Err(config_err("no pipelines selected"));
        }
        // fixed output order regardless of how they were listed
        out.sort_by_key(|p| Provenance::ALL.iter().position(|q| q == p));
        Ok(out)
    }

    pub fn start_apex(&self) -> Option<ApexState> {
        match (self.apex_x_dot, self.apex_y) {
            (Some(x), Some(y)) => Some(ApexState::new(x, y)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        self.inputs(self.p_bar, self.k_theta).validate()?;
        self.settings().validate()?;
        if self.p_bar_count < 1 || self.k_theta_count < 1 {
            return Err(config_err("grid counts must be at least 1"));
        }
        if !(self.p_bar_min <= self.p_bar_max) || !(self.k_theta_min <= self.k_theta_max) {
            return Err(config_err("grid ranges must satisfy min <= max"));
        }
        if !(0.0 <= self.k_theta_min && self.k_theta_max <= 1.0) {
            return Err(config_err("k_theta range must lie in [0, 1]"));
        }
        if self.n_hops < 1 {
            return Err(config_err("n_hops must be at least 1"));
        }
        if self.apex_x_dot.is_some() != self.apex_y.is_some() {
            return Err(config_err("apex_x_dot and apex_y must be given together"));
        }
        if self.k_theta_step_hop.is_some() != self.k_theta_step_value.is_some() {
            return Err(config_err(
                "k_theta_step_hop and k_theta_step_value must be given together",
            ));
        }
        if let Some(v) = self.k_theta_step_value {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_err("k_theta_step_value outside [0, 1]"));
            }
        }
        self.pipeline_list()?;
        Ok(())
    }
}

/// `count` evenly spaced values from `min` to `max` (just `min` for one).
pub fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    (0..count)
        .map(|i| {
            if i == count - 1 {
                max
            } else {
                min + (max - min) * i as f64 / (count - 1) as f64
            }
        })
        .collect()
}
