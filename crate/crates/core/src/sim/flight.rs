//! Ballistic flight: closed-form descent to touchdown and ascent to apex.

use crate::error::{Error, Result};
use crate::model::{ApexState, FlightState, SlipParams};

/// Ballistic flow `(x_dot, y + y_dot t - g t^2 / 2, y_dot - g t)`.
pub fn flight_flow(start: &FlightState, t: f64, params: &SlipParams) -> FlightState {
    FlightState {
        x_dot: start.x_dot,
        y: start.y + start.y_dot * t - 0.5 * params.g * t * t,
        y_dot: start.y_dot - params.g * t,
    }
}

/// Time from apex until the toe, held at `theta_td`, reaches the ground.
pub fn touchdown_time(apex: &ApexState, theta_td: f64, params: &SlipParams) -> Result<f64> {
    let y_touchdown = params.r0 * theta_td.cos();
    let radicand = 2.0 * params.g * (apex.y - y_touchdown);
    if radicand < 0.0 {
        return Err(Error::UnreachableTouchdown {
            y_apex: apex.y,
            y_touchdown,
        });
    }
    Ok(radicand.sqrt() / params.g)
}

/// Descent map: apex to the flight state at touchdown.
///
/// The touchdown height is set exactly to `r0 cos(theta_td)` so the
/// touchdown reset sees no roundoff in its height check.
pub fn integrate_descent(apex: &ApexState, theta_td: f64, params: &SlipParams) -> Result<FlightState> {
    let t_td = touchdown_time(apex, theta_td, params)?;
    let mut td = flight_flow(&FlightState::new(apex.x_dot, apex.y, 0.0), t_td, params);
    td.y = params.r0 * theta_td.cos();
    Ok(td)
}

/// Ascent map: liftoff flight state to the next apex.
pub fn integrate_ascent(lo: &FlightState, params: &SlipParams) -> Result<ApexState> {
    if lo.y_dot < 0.0 {
        return Err(Error::DescendingAtLiftoff { y_dot: lo.y_dot });
    }
    Ok(ApexState {
        x_dot: lo.x_dot,
        y: lo.y + lo.y_dot * lo.y_dot / (2.0 * params.g),
    })
}

/// Inverse descent: touchdown flight state back to its apex.
pub fn apex_before_touchdown(td: &FlightState, params: &SlipParams) -> ApexState {
    ApexState {
        x_dot: td.x_dot,
        y: td.y + td.y_dot * td.y_dot / (2.0 * params.g),
    }
}
