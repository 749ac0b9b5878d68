//! Touchdown angle selection (angle of attack) and the stance hip-torque law.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::quadratic_roots;
use crate::model::{ControlInputs, SlipParams, StanceState};

pub const AOA_TOL: f64 = 1e-10;
pub const AOA_MAX_ITER: usize = 200;
/// Relaxation factor of the fixed-point iteration.
const AOA_RELAXATION: f64 = 0.8;
/// Upper end of the bisection bracket, as a fraction of pi/2.
const AOA_BRACKET_FRACTION: f64 = 0.99;

/// Control period the integral gain is expressed against (1 kHz).
pub const PID_REFERENCE_PERIOD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AoaMethod {
    Implicit,
    QuadraticApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AoaSolution {
    pub theta_aoa: f64,
    /// Commanded touchdown angle `k_theta * theta_aoa`.
    pub theta_td: f64,
    pub method: AoaMethod,
    /// `|Phi(theta_aoa) - theta_aoa|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Vertical speed magnitude at touchdown for a leg angle `theta_td`, squared.
fn touchdown_radicand(e_v: f64, theta_td: f64, params: &SlipParams) -> f64 {
    2.0 * e_v / params.m - 2.0 * params.g * params.r0 * theta_td.cos()
}

/// Angle-of-attack constraint map `Phi(theta) = atan(x_dot / |y_dot_td(k theta)|)`.
pub fn aoa_constraint(x_dot: f64, e_v: f64, k_theta: f64, theta: f64, params: &SlipParams) -> Result<f64> {
    let rad = touchdown_radicand(e_v, k_theta * theta, params);
    if !(rad > 0.0) {
        return Err(Error::InsufficientEnergy { radicand: rad });
    }
    Ok((x_dot / rad.sqrt()).atan())
}

fn check_inputs(x_dot: f64, e_v: f64, k_theta: f64) -> Result<()> {
    if !(x_dot.is_finite() && e_v.is_finite()) {
        return Err(Error::InvalidState("non-finite angle-of-attack input".into()));
    }
    if !(0.0..=1.0).contains(&k_theta) {
        return Err(Error::InvalidParameter(format!("k_theta = {k_theta} outside [0, 1]")));
    }
    Ok(())
}

/// Solves `theta = Phi(theta)` for the angle of attack.
///
/// Relaxed fixed-point iteration from zero, with bisection over the feasible
/// part of `(0, 0.99 pi/2)` as the fallback. The feasible part starts where
/// the touchdown height drops below the apex height; an apex below the rest
/// length therefore still admits a solution when `k_theta > 0`.
pub fn solve_aoa_implicit(x_dot: f64, e_v: f64, k_theta: f64, params: &SlipParams) -> Result<AoaSolution> {
    check_inputs(x_dot, e_v, k_theta)?;
    let speed = x_dot.abs();
    let (theta, iterations) = solve_aoa_positive(speed, e_v, k_theta, params)?;
    let theta_aoa = theta.copysign(x_dot);
    let residual = (aoa_constraint(x_dot, e_v, k_theta, theta_aoa, params)? - theta_aoa).abs();
    Ok(AoaSolution {
        theta_aoa,
        theta_td: k_theta * theta_aoa,
        method: AoaMethod::Implicit,
        residual,
        iterations,
    })
}

fn solve_aoa_positive(speed: f64, e_v: f64, k_theta: f64, params: &SlipParams) -> Result<(f64, usize)> {
    if speed == 0.0 {
        touchdown_feasible(e_v, k_theta, params)?;
        return Ok((0.0, 0));
    }
    if touchdown_radicand(e_v, 0.0, params) > 0.0 {
        let mut theta = 0.0;
        for i in 1..=AOA_MAX_ITER {
            let Ok(phi) = aoa_constraint(speed, e_v, k_theta, theta, params) else {
                break;
            };
            if (phi - theta).abs() <= AOA_TOL {
                return Ok((phi, i));
            }
            theta += AOA_RELAXATION * (phi - theta);
        }
    }
    let lo = touchdown_feasible(e_v, k_theta, params)?;
    let hi = AOA_BRACKET_FRACTION * FRAC_PI_2;
    bisect_aoa(speed, e_v, k_theta, params, lo, hi)
}

/// Smallest leg angle at which touchdown height is reachable from the apex.
fn touchdown_feasible(e_v: f64, k_theta: f64, params: &SlipParams) -> Result<f64> {
    let ratio = e_v / (params.m * params.g * params.r0);
    if ratio > 1.0 {
        return Ok(0.0);
    }
    let hi = AOA_BRACKET_FRACTION * FRAC_PI_2;
    let theta_min = if k_theta > 0.0 {
        ratio.max(-1.0).acos() / k_theta
    } else {
        f64::INFINITY
    };
    if theta_min >= hi {
        return Err(Error::InsufficientEnergy {
            radicand: touchdown_radicand(e_v, 0.0, params),
        });
    }
    Ok(theta_min)
}

fn bisect_aoa(speed: f64, e_v: f64, k_theta: f64, params: &SlipParams, lo: f64, hi: f64) -> Result<(f64, usize)> {
    // g(theta) = Phi(theta) - theta is positive just above `lo` (Phi -> pi/2
    // or Phi(0) > 0) and negative at `hi` unless Phi saturates.
    let g = |t: f64| -> f64 {
        match aoa_constraint(speed, e_v, k_theta, t, params) {
            Ok(phi) => phi - t,
            Err(_) => FRAC_PI_2 - t,
        }
    };
    let (mut a, mut b) = (lo, hi);
    if g(b) > 0.0 {
        return Err(Error::NoConvergence {
            what: "angle-of-attack bisection",
            iterations: 0,
            residual: g(b),
        });
    }
    let mut iterations = 0;
    while b - a > 0.25 * AOA_TOL && iterations < 200 {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    let theta = 0.5 * (a + b);
    let residual = g(theta).abs();
    if residual > AOA_TOL {
        return Err(Error::NoConvergence {
            what: "angle-of-attack bisection",
            iterations,
            residual,
        });
    }
    Ok((theta, AOA_MAX_ITER + iterations))
}

/// Closed-form approximation of the angle of attack.
///
/// Replaces `atan(z)` by `pi z / 4` and `cos` by its second-order expansion,
/// solves the resulting quadratic in `theta^2` and maps the root once through
/// the exact constraint.
pub fn solve_aoa_approx(x_dot: f64, e_v: f64, k_theta: f64, params: &SlipParams) -> Result<AoaSolution> {
    check_inputs(x_dot, e_v, k_theta)?;
    let (a, b, c) = aoa_quadratic_coeffs(x_dot, e_v, params);
    let (q_plus, _) = quadratic_roots(a, b, c)?;
    if q_plus < 0.0 {
        return Err(Error::NegativeDiscriminant(q_plus));
    }
    let seed = q_plus.sqrt().copysign(x_dot);
    let theta_aoa = aoa_constraint(x_dot, e_v, k_theta, seed, params)?;
    let residual = match aoa_constraint(x_dot, e_v, k_theta, theta_aoa, params) {
        Ok(phi) => (phi - theta_aoa).abs(),
        Err(_) => f64::INFINITY,
    };
    Ok(AoaSolution {
        theta_aoa,
        theta_td: k_theta * theta_aoa,
        method: AoaMethod::QuadraticApprox,
        residual,
        iterations: 1,
    })
}

/// Coefficients `(a, b, c)` of the quadratic in `theta_aoa^2`.
pub fn aoa_quadratic_coeffs(x_dot: f64, e_v: f64, params: &SlipParams) -> (f64, f64, f64) {
    let a = 16.0 * params.g * params.r0;
    let b = 16.0 * (2.0 * e_v / params.m - 2.0 * params.g * params.r0);
    let c = -x_dot * x_dot * PI * PI;
    (a, b, c)
}

/// Integrator and derivative memory of the momentum PID. Reset at touchdown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PidState {
    /// Sum of momentum errors, one term per reference control period.
    pub integral: f64,
    /// Momentum at the previous control sample.
    pub prev_momentum: Option<f64>,
}

impl PidState {
    /// Fresh state for a stance starting at `state`.
    pub fn at_touchdown(state: &StanceState, params: &SlipParams) -> Self {
        Self {
            integral: 0.0,
            prev_momentum: Some(state.momentum(params.m)),
        }
    }
}

/// Angular-momentum PID with gravity feed-forward,
/// `tau = kp e + ki sum(e) - kd p_dot - m g r sin(theta)`, `e = p_bar - p`.
///
/// `p_dot` is the backward difference over `dt`. The error sum gains one
/// term per [`PID_REFERENCE_PERIOD`] (weight `dt / PID_REFERENCE_PERIOD`).
/// With a torque limit the result is clamped and the integrator is frozen
/// while saturated.
pub fn hip_torque(
    target_p: f64,
    state: &StanceState,
    pid: PidState,
    gains: &ControlInputs,
    params: &SlipParams,
    dt: f64,
) -> (f64, PidState) {
    debug_assert!(dt > 0.0);
    let p = state.momentum(params.m);
    let err = target_p - p;
    let p_dot = pid.prev_momentum.map_or(0.0, |prev| (p - prev) / dt);
    let feed_forward = -params.m * params.g * state.r * state.theta.sin();
    let integral = pid.integral + err * dt / PID_REFERENCE_PERIOD;
    let torque = |i: f64| gains.kp * err + gains.ki * i - gains.kd * p_dot + feed_forward;

    let raw = torque(integral);
    let (tau, integral) = match gains.tau_max {
        Some(limit) if raw.abs() > limit => {
            let frozen = torque(pid.integral);
            (frozen.clamp(-limit, limit), pid.integral)
        }
        _ => (raw, integral),
    };
    (
        tau,
        PidState {
            integral,
            prev_momentum: Some(p),
        },
    )
}
