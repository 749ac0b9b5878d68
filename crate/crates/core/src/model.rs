//! Physical parameters, gait knobs, hybrid-phase state types and the
//! polar/Cartesian reset maps shared by the simulator and the closed-form map.
//!
//! Angle convention: `theta = 0` is a vertical leg and `theta > 0` places the
//! toe ahead of the body in `+x`. Forward travel therefore pairs with a
//! negative target angular momentum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on the touchdown height check in [`flight_to_stance`].
pub const TOUCHDOWN_HEIGHT_TOL: f64 = 1e-9;

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Point-mass hopper constants (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipParams {
    /// Mass (kg).
    pub m: f64,
    /// Spring constant (N/m).
    pub k: f64,
    /// Radial damping (N s/m).
    pub b: f64,
    /// Spring rest length (m).
    pub r0: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
}

impl SlipParams {
    pub fn new(m: f64, k: f64, b: f64, r0: f64, g: f64) -> Result<Self> {
        let p = Self { m, k, b, r0, g };
        p.validate()?;
        Ok(p)
    }

    /// Penn Jerboa parameters: 3.3 kg, 4000 N/m, 20 N s/m, 0.2 m.
    pub fn jerboa() -> Self {
        Self {
            m: 3.3,
            k: 4000.0,
            b: 20.0,
            r0: 0.2,
            g: STANDARD_GRAVITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.m, self.k, self.b, self.r0, self.g].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("non-finite model parameter".into()));
        }
        if self.m <= 0.0 || self.k <= 0.0 || self.r0 <= 0.0 || self.g <= 0.0 {
            return Err(Error::InvalidParameter("m, k, r0 and g must be positive".into()));
        }
        if self.b < 0.0 {
            return Err(Error::InvalidParameter("damping must be nonnegative".into()));
        }
        let rg = self.r_g();
        if !(rg > 0.0 && rg < self.r0) {
            return Err(Error::InvalidParameter(format!(
                "gravity-loaded length r_g = {rg} must lie in (0, r0)"
            )));
        }
        Ok(())
    }

    /// Gravity-loaded leg equilibrium `r0 - m g / k`.
    pub fn r_g(&self) -> f64 {
        self.r0 - self.m * self.g / self.k
    }

    /// Undamped vertical natural frequency `sqrt(k/m)`.
    pub fn omega0(&self) -> f64 {
        (self.k / self.m).sqrt()
    }
}

impl Default for SlipParams {
    fn default() -> Self {
        Self::jerboa()
    }
}

/// Gait knobs and stance-controller gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInputs {
    /// Target stance angular momentum (kg m^2/s); negative for forward travel.
    pub p_bar: f64,
    /// Angle-of-attack gain in `[0, 1]`.
    pub k_theta: f64,
    pub kp: f64,
    /// Integral gain on the per-sample momentum error sum.
    pub ki: f64,
    pub kd: f64,
    /// Hip torque saturation (N m).
    pub tau_max: Option<f64>,
}

impl ControlInputs {
    pub const DEFAULT_KP: f64 = 400.0;
    pub const DEFAULT_KI: f64 = 20.0;
    pub const DEFAULT_KD: f64 = 0.2;

    /// Gait knobs with the default PID gains and no torque limit.
    pub fn new(p_bar: f64, k_theta: f64) -> Self {
        Self {
            p_bar,
            k_theta,
            kp: Self::DEFAULT_KP,
            ki: Self::DEFAULT_KI,
            kd: Self::DEFAULT_KD,
            tau_max: None,
        }
    }

    pub fn with_gains(mut self, kp: f64, ki: f64, kd: f64) -> Self {
        self.kp = kp;
        self.ki = ki;
        self.kd = kd;
        self
    }

    pub fn with_torque_limit(mut self, tau_max: Option<f64>) -> Self {
        self.tau_max = tau_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p_bar.is_finite() {
            return Err(Error::InvalidParameter("p_bar must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.k_theta) {
            return Err(Error::InvalidParameter(format!(
                "k_theta = {} outside [0, 1]",
                self.k_theta
            )));
        }
        if ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidParameter("PID gains must be finite".into()));
        }
        if let Some(t) = self.tau_max {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter("tau_max must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Polar stance coordinates about the toe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceState {
    pub r: f64,
    pub r_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl StanceState {
    pub fn new(r: f64, r_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            r,
            r_dot,
            theta,
            theta_dot,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.r, self.r_dot, self.theta, self.theta_dot]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.r <= 0.0 {
            return Err(Error::InvalidState(format!("stance state {self:?}")));
        }
        Ok(())
    }

    /// Angular momentum about the toe, `m r^2 theta_dot`.
    pub fn momentum(&self, m: f64) -> f64 {
        m * self.r * self.r * self.theta_dot
    }

    pub fn kinetic_energy(&self, m: f64) -> f64 {
        0.5 * m * (self.r_dot.powi(2) + (self.r * self.theta_dot).powi(2))
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.r, self.r_dot, self.theta, self.theta_dot]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Cartesian flight state of the mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightState {
    pub x_dot: f64,
    pub y: f64,
    pub y_dot: f64,
}

impl FlightState {
    pub fn new(x_dot: f64, y: f64, y_dot: f64) -> Self {
        Self { x_dot, y, y_dot }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_dot, self.y, self.y_dot].iter().all(|v| v.is_finite());
        if !finite || self.y <= 0.0 {
            return Err(Error::InvalidState(format!("flight state {self:?}")));
        }
        Ok(())
    }

    pub fn kinetic_energy(&self, m: f64) -> f64 {
        0.5 * m * (self.x_dot.powi(2) + self.y_dot.powi(2))
    }

    pub fn total_energy(&self, params: &SlipParams) -> f64 {
        self.kinetic_energy(params.m) + params.m * params.g * self.y
    }
}

/// Apex (Poincare section) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApexState {
    pub x_dot: f64,
    pub y: f64,
}

impl ApexState {
    pub fn new(x_dot: f64, y: f64) -> Self {
        Self { x_dot, y }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_dot.is_finite() && self.y.is_finite()) || self.y <= 0.0 {
            return Err(Error::InvalidState(format!("apex state {self:?}")));
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x_dot, self.y]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }

    /// Vertical energy `m g y` (apex has zero vertical velocity).
    pub fn vertical_energy(&self, params: &SlipParams) -> f64 {
        params.m * params.g * self.y
    }
}

/// Liftoff reset: polar stance state to Cartesian flight state.
pub fn stance_to_flight(s: &StanceState) -> FlightState {
    let (sin, cos) = s.theta.sin_cos();
    FlightState {
        x_dot: -s.theta_dot * s.r * cos - s.r_dot * sin,
        y: s.r * cos,
        y_dot: -s.theta_dot * s.r * sin + s.r_dot * cos,
    }
}

/// Touchdown reset: Cartesian flight state to polar stance state with the
/// leg at rest length and angle `theta_td`.
pub fn flight_to_stance(f: &FlightState, theta_td: f64, params: &SlipParams) -> Result<StanceState> {
    let (sin, cos) = theta_td.sin_cos();
    let expected = params.r0 * cos;
    if !((f.y - expected).abs() <= TOUCHDOWN_HEIGHT_TOL) {
        return Err(Error::TouchdownMismatch { y: f.y, expected });
    }
    Ok(StanceState {
        r: params.r0,
        r_dot: -sin * f.x_dot + cos * f.y_dot,
        theta: theta_td,
        theta_dot: (-cos * f.x_dot - sin * f.y_dot) / params.r0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn jerboa_gravity_loaded_length() {
        let p = SlipParams::jerboa();
        assert!((p.r_g() - 0.19191).abs() < 1e-4);
        assert_relative_eq!(p.r_g(), 0.2 - 3.3 * 9.81 / 4000.0, epsilon = 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(SlipParams::new(3.3, 4000.0, 0.0, 0.2, 9.81).is_ok());
        assert!(SlipParams::new(-1.0, 4000.0, 20.0, 0.2, 9.81).is_err());
        assert!(SlipParams::new(3.3, 4000.0, -1.0, 0.2, 9.81).is_err());
        // spring too soft to hold the mass up: r_g <= 0
        assert!(SlipParams::new(3.3, 100.0, 20.0, 0.2, 9.81).is_err());
        assert!(SlipParams::new(3.3, f64::NAN, 20.0, 0.2, 9.81).is_err());
    }

    #[test]
    fn control_validation() {
        assert!(ControlInputs::new(-1.0, 0.5).validate().is_ok());
        assert!(ControlInputs::new(-1.0, 1.2).validate().is_err());
        assert!(ControlInputs::new(-1.0, -0.1).validate().is_err());
        let c = ControlInputs::new(-1.0, 0.5).with_torque_limit(Some(0.0));
        assert!(c.validate().is_err());
    }

    #[test]
    fn stance_to_flight_vertical_leg() {
        let f = stance_to_flight(&StanceState::new(0.2, 2.0, 0.0, -5.0));
        assert_relative_eq!(f.x_dot, 1.0, epsilon = 1e-15);
        assert_relative_eq!(f.y, 0.2, epsilon = 1e-15);
        assert_relative_eq!(f.y_dot, 2.0, epsilon = 1e-15);

        let f = stance_to_flight(&StanceState::new(0.2, 0.0, 0.0, 0.0));
        assert_eq!((f.x_dot, f.y, f.y_dot), (0.0, 0.2, 0.0));
    }

    #[test]
    fn stance_to_flight_tilted() {
        // hand-evaluated reset at r=0.19, r_dot=1.5, theta=0.3, theta_dot=-4
        let f = stance_to_flight(&StanceState::new(0.19, 1.5, 0.3, -4.0));
        assert_relative_eq!(f.x_dot, 0.28277542174345127, epsilon = 1e-14);
        assert_relative_eq!(f.y, 0.18151393293386514, epsilon = 1e-14);
        assert_relative_eq!(f.y_dot, 1.657600090751027, epsilon = 1e-14);
    }

    #[test]
    fn flight_to_stance_cases() {
        let p = SlipParams::jerboa();
        let s = flight_to_stance(&FlightState::new(1.0, 0.2, -2.0), 0.0, &p).unwrap();
        assert_eq!(s.r, 0.2);
        assert_relative_eq!(s.r_dot, -2.0, epsilon = 1e-15);
        assert_eq!(s.theta, 0.0);
        assert_relative_eq!(s.theta_dot, -5.0, epsilon = 1e-14);

        let th = 0.4f64;
        let s = flight_to_stance(&FlightState::new(1.2, 0.2 * th.cos(), -1.8), th, &p).unwrap();
        assert_relative_eq!(s.r_dot, -2.125211799975574, epsilon = 1e-14);
        assert_relative_eq!(s.theta_dot, -2.021600883239455, epsilon = 1e-13);
    }

    #[test]
    fn flight_to_stance_rejects_wrong_height() {
        let p = SlipParams::jerboa();
        let err = flight_to_stance(&FlightState::new(1.0, 0.21, -2.0), 0.0, &p).unwrap_err();
        assert!(matches!(err, Error::TouchdownMismatch { .. }));
        // within slack
        assert!(flight_to_stance(&FlightState::new(1.0, 0.2 + 5e-10, -2.0), 0.0, &p).is_ok());
    }

    proptest! {
        #[test]
        fn resets_round_trip_and_preserve_kinetic_energy(
            r_dot in -4.0f64..4.0,
            theta in -1.2f64..1.2,
            theta_dot in -20.0f64..20.0,
        ) {
            let p = SlipParams::jerboa();
            let s = StanceState::new(p.r0, r_dot, theta, theta_dot);
            let f = stance_to_flight(&s);
            let back = flight_to_stance(&f, theta, &p).unwrap();
            prop_assert!((back.r - s.r).abs() <= 1e-12);
            prop_assert!((back.r_dot - s.r_dot).abs() <= 1e-12 * (1.0 + s.r_dot.abs()));
            prop_assert!((back.theta_dot - s.theta_dot).abs() <= 1e-12 * (1.0 + s.theta_dot.abs()));
            let (ks, kf) = (s.kinetic_energy(p.m), f.kinetic_energy(p.m));
            prop_assert!((ks - kf).abs() <= 1e-12 * ks.max(1e-300));
        }
    }
}
