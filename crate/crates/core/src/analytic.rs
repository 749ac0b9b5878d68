//! Closed-form approximate return map.
//!
//! Stance is approximated by holding angular momentum at its target and
//! letting gravity act radially, then expanding the `1/r^3` and `1/r^2`
//! terms about the gravity-loaded length `r_g`. The radial motion becomes a
//! forced damped oscillator
//!
//! ```text
//! r'' + 2 zeta omega r' + omega^2 r = Gamma
//! ```
//!
//! driving a leg-angle integrator `theta' = p/(m r_g^2) (3 - 2 r / r_g)`.

use serde::Serialize;

use crate::controller::solve_aoa_approx;
use crate::error::{Error, Phase, Result};
use crate::fixed_point::nominal_stance_constants;
use crate::model::{flight_to_stance, stance_to_flight, ApexState, ControlInputs, SlipParams, StanceState};
use crate::sim::{integrate_ascent, integrate_descent};

/// Parameters of the linearized stance oscillator that do not depend on the
/// touchdown state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StanceOscillator {
    pub omega: f64,
    pub zeta: f64,
    pub omega_d: f64,
    /// Constant forcing (m/s^2).
    pub gamma: f64,
    /// Mean leg-angle drift rate (rad/s).
    pub x_rate: f64,
    /// `2 p / (m r_g^3)`, the sensitivity of `theta'` to `r - r_g`.
    pub coupling: f64,
}

impl StanceOscillator {
    pub fn new(p_bar: f64, params: &SlipParams) -> Result<Self> {
        let SlipParams { m, k, b, .. } = *params;
        let rg = params.r_g();
        let omega = (k / m + 3.0 * p_bar * p_bar / (m * m * rg.powi(4))).sqrt();
        let gamma = p_bar * p_bar / (m * m * rg.powi(3)) + omega * omega * rg;
        let zeta = b / (2.0 * m * omega);
        if !(zeta < 1.0) {
            return Err(Error::Overdamped { zeta });
        }
        let omega_d = omega * (1.0 - zeta * zeta).sqrt();
        let x_rate = p_bar / (m * rg * rg) * (3.0 - 2.0 * gamma / (rg * omega * omega));
        Ok(Self {
            omega,
            zeta,
            omega_d,
            gamma,
            x_rate,
            coupling: 2.0 * p_bar / (m * rg.powi(3)),
        })
    }

    /// Static equilibrium `Gamma / omega^2` of the linearized radial motion.
    pub fn r_eq(&self) -> f64 {
        self.gamma / (self.omega * self.omega)
    }
}

/// Time derivative of the linearized stance dynamics
/// `r'' = p^2/(m^2 r_g^3) - (3 p^2/(m^2 r_g^4) + k/m)(r - r_g) - b/m r'`,
/// `theta' = 3 p/(m r_g^2) - 2 p r/(m r_g^3)`.
///
/// The returned `theta_dot` field is the rate of change of `theta'`, i.e.
/// `-2 p r'/(m r_g^3)`; `theta` is the algebraic rate above, not `s.theta_dot`.
pub fn linearized_stance_rhs(s: &StanceState, p_bar: f64, params: &SlipParams) -> StanceState {
    let SlipParams { m, k, b, .. } = *params;
    let rg = params.r_g();
    let p2 = p_bar * p_bar / (m * m);
    StanceState {
        r: s.r_dot,
        r_dot: p2 / rg.powi(3) - (3.0 * p2 / rg.powi(4) + k / m) * (s.r - rg) - b / m * s.r_dot,
        theta: 3.0 * p_bar / (m * rg * rg) - 2.0 * p_bar * s.r / (m * rg.powi(3)),
        theta_dot: -2.0 * p_bar * s.r_dot / (m * rg.powi(3)),
    }
}

/// Constants of the closed-form stance solution for one touchdown state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StanceFlowCoeffs {
    pub omega: f64,
    pub zeta: f64,
    pub omega_d: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    /// Amplitude `sqrt(A^2 + B^2)`.
    pub m_amp: f64,
    pub psi: f64,
    pub psi2: f64,
    /// Phase of the combined leg force `k (r - r_eq) + b r'` relative to `r - r_eq`.
    pub psi4: f64,
    pub x_rate: f64,
    pub y_amp: f64,
    /// Amplitude factor of the leg force oscillation.
    pub m2: f64,
}

/// Coefficients of the closed-form stance flow from a touchdown state.
pub fn flow_coeffs(td: &StanceState, p_bar: f64, params: &SlipParams) -> Result<StanceFlowCoeffs> {
    let osc = StanceOscillator::new(p_bar, params)?;
    let StanceOscillator {
        omega,
        zeta,
        omega_d,
        gamma,
        x_rate,
        ..
    } = osc;
    let (k, b) = (params.k, params.b);
    let rg = params.r_g();
    let damped = (1.0 - zeta * zeta).sqrt();

    let a = td.r - osc.r_eq();
    let bb = (td.r_dot + zeta * omega * a) / omega_d;
    let m_amp = a.hypot(bb);
    let psi = (-bb).atan2(a);
    let psi2 = (-damped).atan2(zeta);
    let m2 = (k * k + b * b * omega * omega - 2.0 * b * k * omega * psi2.cos()).sqrt();
    let psi4 = (b * omega * damped).atan2(k - b * omega * zeta);
    let y_amp = 2.0 * p_bar * m_amp / (params.m * rg.powi(3) * omega);
    Ok(StanceFlowCoeffs {
        omega,
        zeta,
        omega_d,
        gamma,
        a,
        b: bb,
        m_amp,
        psi,
        psi2,
        psi4,
        x_rate,
        y_amp,
        m2,
    })
}

/// Closed-form stance state `t` seconds after touchdown.
///
/// `theta_dot` is the first-order momentum expansion about `r_g`, so at
/// `t = 0` it need not equal the touchdown angular rate.
pub fn stance_flow(t: f64, c: &StanceFlowCoeffs, td: &StanceState, p_bar: f64, params: &SlipParams) -> StanceState {
    let rg = params.r_g();
    let decay = (-c.zeta * c.omega * t).exp();
    let phase = c.omega_d * t + c.psi;
    let r_eq = c.gamma / (c.omega * c.omega);
    StanceState {
        r: c.m_amp * decay * phase.cos() + r_eq,
        r_dot: -c.m_amp * c.omega * decay * (phase + c.psi2).cos(),
        theta: td.theta + c.x_rate * t + c.y_amp * (decay * (phase - c.psi2).cos() - (c.psi - c.psi2).cos()),
        theta_dot: p_bar / (params.m * rg * rg) * (3.0 - 2.0 * (c.m_amp / rg) * decay * phase.cos() - 2.0 * r_eq / rg),
    }
}

/// Radial acceleration of the closed-form flow,
/// `M omega^2 exp(-zeta omega t) cos(omega_d t + psi + 2 psi2)`.
pub fn stance_flow_r_ddot(t: f64, c: &StanceFlowCoeffs) -> f64 {
    let decay = (-c.zeta * c.omega * t).exp();
    c.m_amp * c.omega * c.omega * decay * (c.omega_d * t + c.psi + 2.0 * c.psi2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftoffTime {
    /// Time of maximum compression.
    pub t_bottom: f64,
    pub t_liftoff: f64,
}

/// Approximate liftoff time with the default leg-force phase `c.psi4`.
pub fn liftoff_time(c: &StanceFlowCoeffs, params: &SlipParams) -> Result<LiftoffTime> {
    liftoff_time_with_phase(c, params, c.psi4)
}

/// Approximate liftoff time: the leg-force zero crossing on the first
/// rebound, with the decay at liftoff approximated by its value at twice the
/// bottom time.
pub fn liftoff_time_with_phase(c: &StanceFlowCoeffs, params: &SlipParams, psi4: f64) -> Result<LiftoffTime> {
    let (k, r0) = (params.k, params.r0);
    let w2 = c.omega * c.omega;
    let t_bottom = (std::f64::consts::FRAC_PI_2 - c.psi - c.psi2) / c.omega_d;
    let decay = (-c.zeta * c.omega * 2.0 * t_bottom).exp();
    let arg = k * (r0 * w2 - c.gamma) / (c.m2 * c.m_amp * w2 * decay);
    if !(-1.0..=1.0).contains(&arg) {
        return Err(Error::NoLiftoffRoot(arg));
    }
    let t_liftoff = (2.0 * std::f64::consts::PI - arg.acos() - c.psi - psi4) / c.omega_d;
    if !(t_bottom > 0.0 && t_liftoff > t_bottom) {
        return Err(Error::NonpositiveTime {
            t_lo: t_liftoff,
            t_bottom,
        });
    }
    Ok(LiftoffTime { t_bottom, t_liftoff })
}

/// Closed-form stance map: touchdown to liftoff with `theta_dot_lo` set from
/// the held momentum, `p / (m r_lo^2)`.
pub fn stance_map_analytic(td: &StanceState, p_bar: f64, params: &SlipParams) -> Result<StanceState> {
    Ok(stance_map_analytic_detailed(td, p_bar, params)?.0)
}

pub fn stance_map_analytic_detailed(
    td: &StanceState,
    p_bar: f64,
    params: &SlipParams,
) -> Result<(StanceState, StanceFlowCoeffs, LiftoffTime)> {
    td.validate()?;
    if !(td.r_dot < 0.0) {
        return Err(Error::InvalidState(format!(
            "touchdown radial velocity {} must be negative",
            td.r_dot
        )));
    }
    let c = flow_coeffs(td, p_bar, params)?;
    let t = liftoff_time(&c, params)?;
    let mut lo = stance_flow(t.t_liftoff, &c, td, p_bar, params);
    lo.theta_dot = p_bar / (params.m * lo.r * lo.r);
    Ok((lo, c, t))
}

/// Constants of the affine stance map at a frozen stance time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StanceMapConstants {
    pub t_lo: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl StanceMapConstants {
    /// Evaluates `C1..C4` at stance time `t_lo` for touchdown at rest length.
    ///
    /// `C1, C3` are the sensitivities of `r_dot_lo` and `theta_lo` to
    /// `r_dot_td`; `C2, C4` the remaining offsets.
    pub fn new(p_bar: f64, t_lo: f64, params: &SlipParams) -> Result<Self> {
        let osc = StanceOscillator::new(p_bar, params)?;
        let StanceOscillator {
            omega: w,
            zeta: z,
            omega_d: wd,
            ..
        } = osc;
        let m = params.m;
        let rg = params.r_g();
        let a = params.r0 - osc.r_eq();
        let sq = (1.0 - z * z).sqrt();
        let e = (-z * w * t_lo).exp();
        let (s, c) = (wd * t_lo).sin_cos();
        let mrg3 = m * rg.powi(3);

        let c1 = w * e * (sq * c - z * s) / wd;
        let c2 = a * w * e / wd * (-sq * wd * s - z * z * w * s + z * c * (sq * w - wd));
        let c3 = 2.0 * sq * p_bar * e * c / (mrg3 * w * wd) + 2.0 * z * p_bar * e * s / (mrg3 * w * wd)
            - 2.0 * sq * p_bar / (mrg3 * w * wd);
        let c4 = osc.x_rate * t_lo
            - 2.0 * p_bar * a / (mrg3 * w * w)
                * (2.0 * z * w + e * (wd * s - 2.0 * z * w * c - z * z * w * w / wd * s));
        Ok(Self { t_lo, c1, c2, c3, c4 })
    }

    /// Affine stance map at these constants.
    pub fn apply(&self, td: &StanceState, p_bar: f64, params: &SlipParams) -> StanceState {
        StanceState {
            r: params.r0,
            r_dot: self.c1 * td.r_dot + self.c2,
            theta: td.theta + self.c3 * td.r_dot + self.c4,
            theta_dot: p_bar / (params.m * params.r0 * params.r0),
        }
    }
}

/// Affine stance map with constants frozen at the nominal stance time of
/// the gait `(p_bar, k_theta)`.
pub fn simplified_stance_map(td: &StanceState, p_bar: f64, k_theta: f64, params: &SlipParams) -> Result<StanceState> {
    let nominal = nominal_stance_constants(p_bar, k_theta, params)?;
    Ok(nominal.constants.apply(td, p_bar, params))
}

/// Closed-form apex-to-apex return map.
pub fn return_map_analytic(apex: &ApexState, inputs: &ControlInputs, params: &SlipParams) -> Result<ApexState> {
    apex.validate()?;
    let aoa = solve_aoa_approx(apex.x_dot, apex.vertical_energy(params), inputs.k_theta, params)
        .map_err(|e| e.in_phase(Phase::AngleOfAttack))?;
    let td_flight = integrate_descent(apex, aoa.theta_td, params).map_err(|e| e.in_phase(Phase::Descent))?;
    let td = flight_to_stance(&td_flight, aoa.theta_td, params).map_err(|e| e.in_phase(Phase::Touchdown))?;
    let lo = stance_map_analytic(&td, inputs.p_bar, params).map_err(|e| e.in_phase(Phase::Stance))?;
    let lo_flight = stance_to_flight(&lo);
    integrate_ascent(&lo_flight, params).map_err(|e| e.in_phase(Phase::Ascent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn jerboa() -> SlipParams {
        SlipParams::jerboa()
    }

    #[test]
    fn coefficient_values_at_unit_momentum() {
        let p = jerboa();
        let td = StanceState::new(p.r0, -1.8, 0.35, -0.5);
        let c = flow_coeffs(&td, -1.0, &p).unwrap();
        assert!((c.omega - 37.62).abs() < 0.01, "{}", c.omega);
        assert!((c.zeta - 0.0805).abs() < 1e-4, "{}", c.zeta);
        assert_relative_eq!(c.omega_d, c.omega * (1.0 - c.zeta * c.zeta).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(c.m_amp, c.a.hypot(c.b), epsilon = 1e-15);
        let m2 = (p.k.powi(2) + (p.b * c.omega).powi(2) - 2.0 * p.b * p.k * c.omega * c.psi2.cos()).sqrt();
        assert_relative_eq!(c.m2, m2, epsilon = 1e-9);
    }

    #[test]
    fn zero_momentum_and_undamped_limits() {
        let p = jerboa();
        let td = StanceState::new(p.r0, -1.8, 0.0, 0.0);
        let c = flow_coeffs(&td, 0.0, &p).unwrap();
        assert_relative_eq!(c.omega, p.omega0(), epsilon = 1e-12);
        assert_relative_eq!(c.gamma, c.omega * c.omega * p.r_g(), epsilon = 1e-9);
        assert_eq!(c.x_rate, 0.0);

        let p0 = SlipParams { b: 0.0, ..p };
        let c = flow_coeffs(&td, -1.0, &p0).unwrap();
        assert_eq!(c.zeta, 0.0);
        assert_eq!(c.omega_d, c.omega);
        assert_relative_eq!(c.psi2, -FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(c.psi4, 0.0);
    }

    #[test]
    fn overdamped_rejected() {
        let p = SlipParams { b: 300.0, ..jerboa() };
        let td = StanceState::new(p.r0, -1.0, 0.0, 0.0);
        assert!(matches!(flow_coeffs(&td, 0.0, &p), Err(Error::Overdamped { .. })));
    }

    #[test]
    fn flow_matches_touchdown_at_zero() {
        let p = jerboa();
        let td = StanceState::new(p.r0, -1.8, 0.35, -0.5);
        let c = flow_coeffs(&td, -1.0, &p).unwrap();
        let s = stance_flow(0.0, &c, &td, -1.0, &p);
        assert_relative_eq!(s.r, td.r, epsilon = 1e-15);
        assert_relative_eq!(s.r_dot, td.r_dot, epsilon = 1e-13);
        assert_relative_eq!(s.theta, td.theta, epsilon = 1e-15);
    }

    #[test]
    fn undamped_unforced_flow_is_a_cosine() {
        let p = SlipParams { b: 0.0, ..jerboa() };
        let td = StanceState::new(p.r0, -1.5, 0.0, 0.0);
        let c = flow_coeffs(&td, 0.0, &p).unwrap();
        let w = p.omega0();
        for i in 0..50 {
            let t = i as f64 * 2e-3;
            let s = stance_flow(t, &c, &td, 0.0, &p);
            let expected = p.r_g() + (td.r - p.r_g()) * (w * t).cos() + td.r_dot / w * (w * t).sin();
            assert_relative_eq!(s.r, expected, epsilon = 1e-14);
            assert_eq!(s.theta, 0.0);
        }
    }

    #[test]
    fn flow_solves_linear_oscillator() {
        let p = jerboa();
        let td = StanceState::new(p.r0, -1.8, 0.35, -0.5);
        let c = flow_coeffs(&td, -1.0, &p).unwrap();
        for i in 0..100 {
            let t = i as f64 * 1e-3;
            let s = stance_flow(t, &c, &td, -1.0, &p);
            let res = stance_flow_r_ddot(t, &c) + 2.0 * c.zeta * c.omega * s.r_dot + c.omega.powi(2) * s.r - c.gamma;
            assert!(res.abs() <= 1e-9, "residual {res} at t = {t}");
        }
    }

    /// Root of `k (r - r0) + b r'` on the closed-form flow after the bottom.
    fn liftoff_oracle(c: &StanceFlowCoeffs, td: &StanceState, p_bar: f64, p: &SlipParams) -> f64 {
        let force = |t: f64| {
            let s = stance_flow(t, c, td, p_bar, p);
            p.k * (s.r - p.r0) + p.b * s.r_dot
        };
        let period = 2.0 * PI / c.omega_d;
        // bracket the upward crossing by scanning from the bottom
        let mut t = (FRAC_PI_2 - c.psi - c.psi2) / c.omega_d;
        let dt = period / 2000.0;
        while force(t + dt) < 0.0 {
            t += dt;
        }
        let (mut a, mut b) = (t, t + dt);
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if force(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn undamped_liftoff_time_is_exact() {
        let p = SlipParams { b: 0.0, ..jerboa() };
        let td = StanceState::new(p.r0, -1.5, 0.0, 0.0);
        let c = flow_coeffs(&td, 0.0, &p).unwrap();
        let t = liftoff_time(&c, &p).unwrap();
        // rebound to rest length: omega t = 2 pi - 2 psi
        assert_relative_eq!(t.t_liftoff, (2.0 * PI - 2.0 * c.psi) / p.omega0(), epsilon = 1e-12);
        assert_relative_eq!(t.t_liftoff, 2.0 * t.t_bottom, epsilon = 1e-12);
        // approaches the half period for a hard landing
        let hard = StanceState::new(p.r0, -200.0, 0.0, 0.0);
        let c = flow_coeffs(&hard, 0.0, &p).unwrap();
        let t = liftoff_time(&c, &p).unwrap();
        assert!((t.t_liftoff - PI / p.omega0()).abs() < 1e-3 * PI / p.omega0());
    }

    #[test]
    fn liftoff_time_close_to_flow_root() {
        let p = jerboa();
        for &(p_bar, r_dot) in &[(-1.0, -2.0), (-0.5, -1.0), (-1.55, -2.5), (-0.79, -1.7)] {
            let td = StanceState::new(p.r0, r_dot, 0.4, -2.0);
            let c = flow_coeffs(&td, p_bar, &p).unwrap();
            let t = liftoff_time(&c, &p).unwrap();
            let oracle = liftoff_oracle(&c, &td, p_bar, &p);
            assert!(t.t_bottom > 0.0 && t.t_liftoff > t.t_bottom);
            // the only approximation is the decay factor at liftoff
            assert!((t.t_liftoff - oracle).abs() < 2e-3, "{} vs {oracle}", t.t_liftoff);
        }
    }

    #[test]
    fn misplaced_force_phase_misses_the_root() {
        // with psi4 replaced by psi2 the formula is off by ~quarter period
        let p = jerboa();
        let td = StanceState::new(p.r0, -2.0, 0.4, -2.0);
        let c = flow_coeffs(&td, -1.0, &p).unwrap();
        let oracle = liftoff_oracle(&c, &td, -1.0, &p);
        let good = liftoff_time(&c, &p).unwrap().t_liftoff;
        let bad = liftoff_time_with_phase(&c, &p, c.psi2)
            .map(|t| t.t_liftoff)
            .unwrap_or(f64::NAN);
        assert!((good - oracle).abs() < (bad - oracle).abs() || bad.is_nan());
    }

    #[test]
    fn symmetric_bounce_in_closed_form() {
        let p = SlipParams { b: 0.0, ..jerboa() };
        let td = StanceState::new(p.r0, -1.5, 0.0, 0.0);
        let lo = stance_map_analytic(&td, 0.0, &p).unwrap();
        assert_relative_eq!(lo.r_dot, 1.5, epsilon = 1e-12);
        assert_relative_eq!(lo.r, p.r0, epsilon = 1e-12);
    }

    #[test]
    fn stance_map_constants_match_flow() {
        let p = jerboa();
        for &p_bar in &[-0.5, -1.0, -1.55] {
            let t_lo = 0.085;
            let k = StanceMapConstants::new(p_bar, t_lo, &p).unwrap();
            for &r_dot in &[-0.8, -1.9, -3.0] {
                let td = StanceState::new(p.r0, r_dot, 0.45, -1.0);
                let c = flow_coeffs(&td, p_bar, &p).unwrap();
                let direct = stance_flow(t_lo, &c, &td, p_bar, &p);
                let affine = k.apply(&td, p_bar, &p);
                assert!((direct.r_dot - affine.r_dot).abs() < 1e-9);
                assert!((direct.theta - affine.theta).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn simplified_map_is_affine() {
        let p = jerboa();
        let k = StanceMapConstants::new(-1.0, 0.085, &p).unwrap();
        let at = |rd: f64, th: f64| k.apply(&StanceState::new(p.r0, rd, th, 0.0), -1.0, &p);
        let (h, rd, th) = (0.3, -2.0, 0.4);
        for f in [|s: StanceState| s.r_dot, |s: StanceState| s.theta] {
            let d2r = f(at(rd + h, th)) - 2.0 * f(at(rd, th)) + f(at(rd - h, th));
            let d2t = f(at(rd, th + h)) - 2.0 * f(at(rd, th)) + f(at(rd, th - h));
            assert!(d2r.abs() < 1e-12 && d2t.abs() < 1e-12);
        }
        let zero = at(0.0, 0.4);
        assert_eq!(zero.r_dot, k.c2);
        assert_relative_eq!(zero.theta, 0.4 + k.c4, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn theta_flow_integrates_momentum_expansion(
            p_bar in -1.6f64..-0.3, r_dot in -3.0f64..-0.5, t in 0.0f64..0.12,
        ) {
            let p = jerboa();
            let td = StanceState::new(p.r0, r_dot, 0.3, 0.0);
            let c = flow_coeffs(&td, p_bar, &p).unwrap();
            let h = 1e-6;
            let fd = (stance_flow(t + h, &c, &td, p_bar, &p).theta - stance_flow(t - h, &c, &td, p_bar, &p).theta) / (2.0 * h);
            let s = stance_flow(t, &c, &td, p_bar, &p);
            prop_assert!((fd - s.theta_dot).abs() <= 1e-6);
            // radial velocity is the derivative of the radial flow
            let fd_r = (stance_flow(t + h, &c, &td, p_bar, &p).r - stance_flow(t - h, &c, &td, p_bar, &p).r) / (2.0 * h);
            prop_assert!((fd_r - s.r_dot).abs() <= 1e-9 * c.m_amp * c.omega);
            let fd_rr = (stance_flow(t + h, &c, &td, p_bar, &p).r_dot - stance_flow(t - h, &c, &td, p_bar, &p).r_dot) / (2.0 * h);
            prop_assert!((fd_rr - stance_flow_r_ddot(t, &c)).abs() <= 1e-9 * c.m_amp * c.omega * c.omega);
        }
    }
}
