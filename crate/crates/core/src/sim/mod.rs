//! Hybrid simulator of the unsimplified stance dynamics under the closed-loop
//! controllers, and the numerical apex-to-apex return map built on it.

pub mod flight;
mod trajectory;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controller::{hip_torque, solve_aoa_implicit, PidState};
use crate::error::{Error, Phase, Result};
use crate::model::{
    flight_to_stance, stance_to_flight, ApexState, ControlInputs, FlightState, SlipParams, StanceState,
};

pub use flight::{apex_before_touchdown, flight_flow, integrate_ascent, integrate_descent, touchdown_time};
pub use trajectory::{EventKind, GaitEvent, HybridTrajectory, TrajPhase, TrajectorySample, TRAJECTORY_HEADER};

/// How the hip torque is refreshed during stance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TorqueUpdate {
    /// Sampled controller, torque held between samples.
    ZeroOrderHold { period: f64 },
    /// Controller re-evaluated at every integrator step.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    /// RK4 step (s).
    pub dt: f64,
    pub torque: TorqueUpdate,
    /// Event localization tolerance (s).
    pub event_tol: f64,
    /// Stance time budget in undamped half periods `pi / sqrt(k/m)`.
    pub budget_half_periods: f64,
    /// Trajectory output period (s).
    pub sample_period: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            torque: TorqueUpdate::ZeroOrderHold { period: 1e-3 },
            event_tol: 1e-10,
            budget_half_periods: 10.0,
            sample_period: 1e-3,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.event_tol > 0.0 && self.sample_period > 0.0 && self.budget_half_periods > 0.0) {
            return Err(Error::InvalidParameter("simulation settings must be positive".into()));
        }
        if let TorqueUpdate::ZeroOrderHold { period } = self.torque {
            let ratio = period / self.dt;
            if !(period > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                return Err(Error::InvalidParameter(
                    "control period must be a positive multiple of dt".into(),
                ));
            }
        }
        Ok(())
    }

    fn steps_per(&self, period: f64) -> usize {
        ((period / self.dt).round() as usize).max(1)
    }
}

/// Right-hand side of the stance dynamics:
/// `r'' = r theta'^2 - k/m (r - r0) - b/m r' - g cos(theta)`,
/// `theta'' = -2 r' theta' / r + g/r sin(theta) + tau / (m r^2)`.
pub fn stance_dynamics(s: &StanceState, torque: f64, params: &SlipParams) -> StanceState {
    let SlipParams { m, k, b, r0, g } = *params;
    let (sin, cos) = s.theta.sin_cos();
    StanceState {
        r: s.r_dot,
        r_dot: s.r * s.theta_dot * s.theta_dot - k / m * (s.r - r0) - b / m * s.r_dot - g * cos,
        theta: s.theta_dot,
        theta_dot: -2.0 * s.r_dot * s.theta_dot / s.r + g / s.r * sin + torque / (m * s.r * s.r),
    }
}

/// One classical Runge-Kutta step of `x' = f(x)`.
pub fn rk4_step<F>(f: F, x: [f64; 4], h: f64) -> [f64; 4]
where
    F: Fn(&[f64; 4]) -> [f64; 4],
{
    let add = |a: &[f64; 4], b: &[f64; 4], s: f64| -> [f64; 4] {
        [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
    };
    let k1 = f(&x);
    let k2 = f(&add(&x, &k1, 0.5 * h));
    let k3 = f(&add(&x, &k2, 0.5 * h));
    let k4 = f(&add(&x, &k3, h));
    let mut out = x;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn stance_step(x: &StanceState, torque: f64, h: f64, params: &SlipParams) -> StanceState {
    let f = |a: &[f64; 4]| stance_dynamics(&StanceState::from_array(*a), torque, params).to_array();
    StanceState::from_array(rk4_step(f, x.to_array(), h))
}

/// Mechanical energy in stance: kinetic, spring and gravitational.
pub fn stance_energy(s: &StanceState, params: &SlipParams) -> f64 {
    s.kinetic_energy(params.m) + 0.5 * params.k * (s.r - params.r0).powi(2) + params.m * params.g * s.r * s.theta.cos()
}

/// Radial leg force `k (r - r0) + b r_dot` (positive once the leg pulls).
pub fn leg_force(s: &StanceState, params: &SlipParams) -> f64 {
    params.k * (s.r - params.r0) + params.b * s.r_dot
}

/// Result of one stance phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StanceOutcome {
    pub liftoff: StanceState,
    /// Stance duration (s).
    pub t_liftoff: f64,
    /// Time of maximum compression (s after touchdown).
    pub t_bottom: Option<f64>,
    pub samples: Vec<(f64, StanceState, f64)>,
}

/// Integrates stance from touchdown with the default settings.
pub fn integrate_stance(td: &StanceState, inputs: &ControlInputs, params: &SlipParams) -> Result<StanceOutcome> {
    integrate_stance_with(td, inputs, params, &SimSettings::default(), false)
}

/// Integrates the stance dynamics under the momentum controller until the leg
/// force returns to zero from below with the leg extending.
///
/// With `record`, `(t, state, torque)` samples are kept every
/// `settings.sample_period` from touchdown.
pub fn integrate_stance_with(
    td: &StanceState,
    inputs: &ControlInputs,
    params: &SlipParams,
    settings: &SimSettings,
    record: bool,
) -> Result<StanceOutcome> {
    td.validate()?;
    if !(td.r_dot < 0.0) {
        return Err(Error::InvalidState(format!(
            "touchdown radial velocity {} must be negative",
            td.r_dot
        )));
    }
    let dt = settings.dt;
    let budget = settings.budget_half_periods * PI / params.omega0();
    let control_steps = match settings.torque {
        TorqueUpdate::ZeroOrderHold { period } => settings.steps_per(period),
        TorqueUpdate::Continuous => 1,
    };
    let control_dt = control_steps as f64 * dt;
    let sample_steps = settings.steps_per(settings.sample_period);

    let mut x = *td;
    let mut pid = PidState::at_touchdown(td, params);
    let mut tau = 0.0;
    let mut t_bottom = None;
    let mut samples = Vec::new();
    let mut step = 0usize;
    loop {
        let t = step as f64 * dt;
        if t > budget {
            return Err(Error::FailedLiftoff { budget });
        }
        if step % control_steps == 0 {
            (tau, pid) = hip_torque(inputs.p_bar, &x, pid, inputs, params, control_dt);
        }
        if record && step % sample_steps == 0 {
            samples.push((t, x, tau));
        }
        let next = stance_step(&x, tau, dt, params);
        if !(next.r > 0.0 && next.r * next.theta.cos() > 0.0) || !next.r.is_finite() {
            return Err(Error::GroundFault { t: t + dt });
        }
        if t_bottom.is_none() && x.r_dot < 0.0 && next.r_dot >= 0.0 {
            let s = localize(&x, tau, dt, settings.event_tol, params, |s| s.r_dot);
            t_bottom = Some(t + s);
        }
        if leg_force(&x, params) < 0.0 && leg_force(&next, params) >= 0.0 && next.r_dot > 0.0 {
            let s = localize(&x, tau, dt, settings.event_tol, params, |s| leg_force(s, params));
            let liftoff = stance_step(&x, tau, s, params);
            return Ok(StanceOutcome {
                liftoff,
                t_liftoff: t + s,
                t_bottom,
                samples,
            });
        }
        x = next;
        step += 1;
    }
}

/// Bisection for the sub-step `s in (0, dt]` at which `event` crosses zero
/// from below, re-integrating from the step start with a shortened RK4 step.
fn localize<F>(x: &StanceState, tau: f64, dt: f64, tol: f64, params: &SlipParams, event: F) -> f64
where
    F: Fn(&StanceState) -> f64,
{
    let (mut a, mut b) = (0.0, dt);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if event(&stance_step(x, tau, mid, params)) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    b
}

/// Per-hop diagnostics of a numerical return-map evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopSummary {
    pub theta_aoa: f64,
    pub theta_td: f64,
    pub touchdown: StanceState,
    pub liftoff: StanceState,
    pub t_stance: f64,
    pub t_flight_descent: f64,
    /// Angular momentum at liftoff.
    pub p_liftoff: f64,
    pub next_apex: ApexState,
}

/// Numerical return map with default settings and no trajectory recording.
pub fn return_map_numeric(apex: &ApexState, inputs: &ControlInputs, params: &SlipParams) -> Result<ApexState> {
    Ok(simulate_hop(apex, inputs, params, &SimSettings::default(), None)?.next_apex)
}

/// One apex-to-apex hop of the hybrid simulator.
///
/// Angle of attack from the implicit solver with `E_v = m g y_apex`, ballistic
/// descent, touchdown reset, integrated stance, liftoff reset, ballistic
/// ascent. When `trace` is given, samples are appended to it starting at the
/// trace's `(t0, x0)` origin. Errors carry the phase where the gait failed.
pub fn simulate_hop(
    apex: &ApexState,
    inputs: &ControlInputs,
    params: &SlipParams,
    settings: &SimSettings,
    trace: Option<(&mut HybridTrajectory, f64, f64)>,
) -> Result<HopSummary> {
    apex.validate()?;
    let aoa = solve_aoa_implicit(apex.x_dot, apex.vertical_energy(params), inputs.k_theta, params)
        .map_err(|e| e.in_phase(Phase::AngleOfAttack))?;
    let theta_td = aoa.theta_td;
    let t_descent = touchdown_time(apex, theta_td, params).map_err(|e| e.in_phase(Phase::Descent))?;
    let td_flight = integrate_descent(apex, theta_td, params).map_err(|e| e.in_phase(Phase::Descent))?;
    let td = flight_to_stance(&td_flight, theta_td, params).map_err(|e| e.in_phase(Phase::Touchdown))?;
    let record = trace.is_some();
    let stance = integrate_stance_with(&td, inputs, params, settings, record).map_err(|e| e.in_phase(Phase::Stance))?;
    let lo_flight = stance_to_flight(&stance.liftoff);
    let next = integrate_ascent(&lo_flight, params).map_err(|e| e.in_phase(Phase::Ascent))?;

    if let Some((traj, t0, x0)) = trace {
        record_hop(
            traj, t0, x0, apex, theta_td, t_descent, &stance, &lo_flight, params, settings,
        );
    }
    Ok(HopSummary {
        theta_aoa: aoa.theta_aoa,
        theta_td,
        touchdown: td,
        liftoff: stance.liftoff,
        t_stance: stance.t_liftoff,
        t_flight_descent: t_descent,
        p_liftoff: stance.liftoff.momentum(params.m),
        next_apex: next,
    })
}

#[allow(clippy::too_many_arguments)]
fn record_hop(
    traj: &mut HybridTrajectory,
    t0: f64,
    x0: f64,
    apex: &ApexState,
    theta_td: f64,
    t_descent: f64,
    stance: &StanceOutcome,
    lo: &FlightState,
    params: &SlipParams,
    settings: &SimSettings,
) {
    let period = settings.sample_period;
    let flight_sample = |t: f64, phase: TrajPhase, x: f64, f: &FlightState, theta: f64| TrajectorySample {
        t,
        phase,
        r: params.r0,
        r_dot: 0.0,
        theta,
        theta_dot: 0.0,
        x,
        y: f.y,
        x_dot: f.x_dot,
        y_dot: f.y_dot,
        tau: 0.0,
    };
    traj.events.push(GaitEvent {
        kind: EventKind::Apex,
        t: t0,
    });

    let apex_flight = FlightState::new(apex.x_dot, apex.y, 0.0);
    let mut j = 0;
    while (j as f64) * period < t_descent {
        let s = j as f64 * period;
        let f = flight_flow(&apex_flight, s, params);
        traj.samples.push(flight_sample(
            t0 + s,
            TrajPhase::Descent,
            x0 + apex.x_dot * s,
            &f,
            theta_td,
        ));
        j += 1;
    }

    let t_td = t0 + t_descent;
    let x_td = x0 + apex.x_dot * t_descent;
    let toe = x_td + params.r0 * theta_td.sin();
    traj.events.push(GaitEvent {
        kind: EventKind::Touchdown,
        t: t_td,
    });
    if let Some(tb) = stance.t_bottom {
        traj.events.push(GaitEvent {
            kind: EventKind::Bottom,
            t: t_td + tb,
        });
    }
    for &(s, st, tau) in &stance.samples {
        let f = stance_to_flight(&st);
        traj.samples.push(TrajectorySample {
            t: t_td + s,
            phase: TrajPhase::Stance,
            r: st.r,
            r_dot: st.r_dot,
            theta: st.theta,
            theta_dot: st.theta_dot,
            x: toe - st.r * st.theta.sin(),
            y: f.y,
            x_dot: f.x_dot,
            y_dot: f.y_dot,
            tau,
        });
    }

    let t_lo = t_td + stance.t_liftoff;
    let lo_state = stance.liftoff;
    let x_lo = toe - lo_state.r * lo_state.theta.sin();
    traj.events.push(GaitEvent {
        kind: EventKind::Liftoff,
        t: t_lo,
    });
    let t_ascent = lo.y_dot.max(0.0) / params.g;
    let mut j = 0;
    while (j as f64) * period < t_ascent {
        let s = j as f64 * period;
        let f = flight_flow(lo, s, params);
        traj.samples.push(flight_sample(
            t_lo + s,
            TrajPhase::Ascent,
            x_lo + lo.x_dot * s,
            &f,
            lo_state.theta,
        ));
        j += 1;
    }
}

/// End-of-hop time and fore-aft position, for chaining traced hops.
pub fn hop_end(t0: f64, x0: f64, apex: &ApexState, hop: &HopSummary, params: &SlipParams) -> (f64, f64) {
    let t_td = t0 + hop.t_flight_descent;
    let toe = x0 + apex.x_dot * hop.t_flight_descent + params.r0 * hop.theta_td.sin();
    let lo = stance_to_flight(&hop.liftoff);
    let t_ascent = lo.y_dot / params.g;
    let x_lo = toe - hop.liftoff.r * hop.liftoff.theta.sin();
    (t_td + hop.t_stance + t_ascent, x_lo + lo.x_dot * t_ascent)
}
