//! Gait fixed points: the closed-form touchdown solution, Newton fixed points
//! of either return map, and stability from the return-map Jacobian.

use std::f64::consts::FRAC_PI_4;

use serde::Serialize;

use crate::analytic::{flow_coeffs, liftoff_time, return_map_analytic, StanceMapConstants};
use crate::error::{Error, Result};
use crate::model::{stance_to_flight, ApexState, ControlInputs, SlipParams, StanceState};
use crate::sim::{apex_before_touchdown, simulate_hop, SimSettings};

/// Quadratic roots `Q+ = (-b + sqrt(d)) / 2a`, `Q- = (-b - sqrt(d)) / 2a`.
///
/// With `a = 0` both roots are the linear solution `-c / b`.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Result<(f64, f64)> {
    if a == 0.0 {
        if b == 0.0 {
            return Err(Error::DegenerateQuadratic);
        }
        let r = -c / b;
        return Ok((r, r));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || disc.is_nan() {
        return Err(Error::NegativeDiscriminant(disc));
    }
    let s = disc.sqrt();
    Ok(((-b + s) / (2.0 * a), (-b - s) / (2.0 * a)))
}

/// Nominal leg-angle offset at touchdown, `(p / 0.7) (pi / 4) (1 - k_theta)`.
pub fn theta_offset(p_bar: f64, k_theta: f64) -> f64 {
    (p_bar / 0.7) * FRAC_PI_4 * (1.0 - k_theta)
}

/// Where the fixed point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    AnalyticNumeric,
    SimulatorNumeric,
}

impl Provenance {
    pub const ALL: [Provenance; 3] = [
        Provenance::ClosedForm,
        Provenance::AnalyticNumeric,
        Provenance::SimulatorNumeric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::AnalyticNumeric => "analytic-numeric",
            Provenance::SimulatorNumeric => "simulator-numeric",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown pipeline '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TouchdownFixedPoint {
    pub r_dot_td: f64,
    pub theta_td: f64,
    pub theta_dot_td: f64,
    pub theta_offset: f64,
}

impl TouchdownFixedPoint {
    pub fn stance_state(&self, params: &SlipParams) -> StanceState {
        StanceState::new(params.r0, self.r_dot_td, self.theta_td, self.theta_dot_td)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stability {
    pub jacobian: [[f64; 2]; 2],
    /// Eigenvalues as `(re, im)` pairs.
    pub eigenvalues: [(f64, f64); 2],
    pub spectral_radius: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub apex: ApexState,
    pub touchdown: Option<TouchdownFixedPoint>,
    pub jacobian: [[f64; 2]; 2],
    pub spectral_radius: f64,
    pub stable: bool,
    pub provenance: Provenance,
    /// `max |P(z*) - z*|` on the map the point was computed for.
    pub residual: f64,
    /// Newton steps (zero for the closed form).
    pub iterations: usize,
}

/// An apex-to-apex map whose fixed points we seek.
pub trait ReturnMap {
    fn apply(&self, apex: &ApexState) -> Result<ApexState>;

    fn provenance(&self) -> Provenance {
        Provenance::AnalyticNumeric
    }
}

impl<F> ReturnMap for F
where
    F: Fn(&ApexState) -> Result<ApexState>,
{
    fn apply(&self, apex: &ApexState) -> Result<ApexState> {
        self(apex)
    }
}

/// Closed-form approximate return map.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticMap {
    pub inputs: ControlInputs,
    pub params: SlipParams,
}

impl ReturnMap for AnalyticMap {
    fn apply(&self, apex: &ApexState) -> Result<ApexState> {
        return_map_analytic(apex, &self.inputs, &self.params)
    }

    fn provenance(&self) -> Provenance {
        Provenance::AnalyticNumeric
    }
}

/// Hybrid-simulator return map.
#[derive(Debug, Clone, Copy)]
pub struct SimulatorMap {
    pub inputs: ControlInputs,
    pub params: SlipParams,
    pub settings: SimSettings,
}

impl ReturnMap for SimulatorMap {
    fn apply(&self, apex: &ApexState) -> Result<ApexState> {
        Ok(simulate_hop(apex, &self.inputs, &self.params, &self.settings, None)?.next_apex)
    }

    fn provenance(&self) -> Provenance {
        Provenance::SimulatorNumeric
    }
}

/// Affine stance constants at the nominal stance time of a gait, with the
/// touchdown radial speed they were frozen at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NominalStance {
    pub constants: StanceMapConstants,
    pub r_dot_td: f64,
    pub iterations: usize,
}

const NOMINAL_TOL: f64 = 1e-13;
const NOMINAL_MAX_ITER: usize = 100;
const NOMINAL_SEED_R_DOT: f64 = -1.5;

/// Freezes the stance time for the affine stance map.
///
/// The stance time is the closed-form liftoff time from a rest-length
/// touchdown whose radial speed is the energy-constraint root computed with
/// that same stance time; the pair is found by fixed-point iteration.
pub fn nominal_stance_constants(p_bar: f64, k_theta: f64, params: &SlipParams) -> Result<NominalStance> {
    let mut r_dot = NOMINAL_SEED_R_DOT;
    let mut prev_t = f64::NAN;
    for i in 1..=NOMINAL_MAX_ITER {
        let td = StanceState::new(params.r0, r_dot, 0.0, 0.0);
        let c = flow_coeffs(&td, p_bar, params)?;
        let t_lo = liftoff_time(&c, params)?.t_liftoff;
        let constants = StanceMapConstants::new(p_bar, t_lo, params)?;
        let (a, b, c) = energy_coefficients(&constants, p_bar, k_theta, params);
        let next = quadratic_roots(a, b, c)?.1;
        if (t_lo - prev_t).abs() <= NOMINAL_TOL * t_lo && (next - r_dot).abs() <= 1e-12 {
            return Ok(NominalStance {
                constants,
                r_dot_td: next,
                iterations: i,
            });
        }
        if !(next < 0.0) {
            return Err(Error::NonPhysical(format!("nominal touchdown radial speed {next}")));
        }
        prev_t = t_lo;
        r_dot = next;
    }
    Err(Error::NoConvergence {
        what: "nominal stance time",
        iterations: NOMINAL_MAX_ITER,
        residual: (r_dot - prev_t).abs(),
    })
}

/// Coefficients of the energy constraint `E_td - E_lo = 0` as a quadratic in
/// the touchdown radial speed.
pub fn energy_coefficients(k: &StanceMapConstants, p_bar: f64, k_theta: f64, params: &SlipParams) -> (f64, f64, f64) {
    let m = params.m;
    let tan = theta_offset(p_bar, k_theta).tan();
    let a = m / 2.0 * (1.0 - k.c1 * k.c1 + tan * tan);
    let b = -k.c1 * k.c2 * m;
    let c = -p_bar * p_bar / (2.0 * m * params.r0 * params.r0) - k.c2 * k.c2 * m / 2.0;
    (a, b, c)
}

/// Coefficients of the fore-aft speed constraint `x_dot_td - x_dot_lo = 0`
/// as a quadratic in the touchdown leg angle.
pub fn speed_coefficients(
    r_dot: f64,
    k: &StanceMapConstants,
    p_bar: f64,
    k_theta: f64,
    params: &SlipParams,
) -> (f64, f64, f64) {
    let mr0 = params.m * params.r0;
    let tan = theta_offset(p_bar, k_theta).tan();
    let v_lo = k.c2 + k.c1 * r_dot;
    let d_theta = k.c4 + k.c3 * r_dot;
    let a = -0.5 * r_dot * tan - p_bar / (2.0 * mr0);
    let b = -r_dot - (k.c4 * p_bar + k.c3 * r_dot * p_bar) / mr0 + k.c2 + k.c1 * r_dot;
    let c = v_lo * d_theta + r_dot * tan - (-2.0 + d_theta * d_theta) * p_bar / (2.0 * mr0);
    (a, b, c)
}

/// Residuals `(E_td - E_lo, x_dot_td - x_dot_lo)` of the two fixed-point
/// constraints, with small-angle trigonometry and the nominal stance constants.
pub fn energy_speed_constraints(
    candidate: &TouchdownFixedPoint,
    p_bar: f64,
    k_theta: f64,
    params: &SlipParams,
) -> Result<(f64, f64)> {
    let k = nominal_stance_constants(p_bar, k_theta, params)?.constants;
    Ok(constraint_residuals(candidate, &k, p_bar, params))
}

fn constraint_residuals(
    c: &TouchdownFixedPoint,
    k: &StanceMapConstants,
    p_bar: f64,
    params: &SlipParams,
) -> (f64, f64) {
    let (m, r0) = (params.m, params.r0);
    let rd = c.r_dot_td;
    let th = c.theta_td;
    let tan = c.theta_offset.tan();
    let v_lo = k.c1 * rd + k.c2;
    let th_lo = th + k.c3 * rd + k.c4;

    let e_td = 0.5 * m * rd * rd + 0.5 * m * (rd * tan).powi(2);
    let e_lo = 0.5 * m * v_lo * v_lo + p_bar * p_bar / (2.0 * m * r0 * r0);
    let x_td = -rd * th + rd * tan * (1.0 - th * th / 2.0);
    let x_lo = -p_bar / (m * r0) * (1.0 - th_lo * th_lo / 2.0) - v_lo * th_lo;
    (e_td - e_lo, x_td - x_lo)
}

/// Closed-form touchdown fixed point and its apex image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormSolution {
    pub touchdown: TouchdownFixedPoint,
    pub apex: ApexState,
    pub nominal: NominalStance,
}

/// Closed-form fixed point of the simplified return map, without stability.
pub fn closed_form_solution(p_bar: f64, k_theta: f64, params: &SlipParams) -> Result<ClosedFormSolution> {
    if !(0.0..=1.0).contains(&k_theta) {
        return Err(Error::InvalidParameter(format!("k_theta = {k_theta} outside [0, 1]")));
    }
    let nominal = nominal_stance_constants(p_bar, k_theta, params).map_err(no_real_root)?;
    let k = nominal.constants;
    let (ar, br, cr) = energy_coefficients(&k, p_bar, k_theta, params);
    let r_dot = quadratic_roots(ar, br, cr).map_err(no_real_root)?.1;
    if !(r_dot < 0.0) {
        return Err(Error::NonPhysical(format!(
            "touchdown radial velocity {r_dot} not negative"
        )));
    }
    let (at, bt, ct) = speed_coefficients(r_dot, &k, p_bar, k_theta, params);
    let theta = quadratic_roots(at, bt, ct).map_err(no_real_root)?.0;
    let offset = theta_offset(p_bar, k_theta);
    let touchdown = TouchdownFixedPoint {
        r_dot_td: r_dot,
        theta_td: theta,
        theta_dot_td: -r_dot / params.r0 * offset.tan(),
        theta_offset: offset,
    };
    // back through the touchdown reset and the descent
    let td_flight = stance_to_flight(&touchdown.stance_state(params));
    if !(td_flight.y_dot < 0.0) {
        return Err(Error::NonPhysical(format!(
            "touchdown vertical velocity {} not descending",
            td_flight.y_dot
        )));
    }
    let apex = apex_before_touchdown(&td_flight, params);
    if !(apex.y > params.r0 * theta.cos()) {
        return Err(Error::NonPhysical(format!(
            "apex height {} below touchdown height",
            apex.y
        )));
    }
    Ok(ClosedFormSolution {
        touchdown,
        apex,
        nominal,
    })
}

fn no_real_root(e: Error) -> Error {
    match e {
        Error::NegativeDiscriminant(d) => Error::NoRealFixedPoint(format!("discriminant {d:e}")),
        other => other,
    }
}

/// Closed-form fixed point with its stability on the analytic return map.
pub fn closed_form_fixed_point(p_bar: f64, k_theta: f64, params: &SlipParams) -> Result<FixedPointResult> {
    let sol = closed_form_solution(p_bar, k_theta, params)?;
    let map = AnalyticMap {
        inputs: ControlInputs::new(p_bar, k_theta),
        params: *params,
    };
    let image = map.apply(&sol.apex)?;
    let st = stability(&map, &sol.apex)?;
    Ok(FixedPointResult {
        apex: sol.apex,
        touchdown: Some(sol.touchdown),
        jacobian: st.jacobian,
        spectral_radius: st.spectral_radius,
        stable: st.stable,
        provenance: Provenance::ClosedForm,
        residual: inf_norm(image.x_dot - sol.apex.x_dot, image.y - sol.apex.y),
        iterations: 0,
    })
}

fn inf_norm(a: f64, b: f64) -> f64 {
    a.abs().max(b.abs())
}

/// Central-difference step per component.
pub fn fd_step(v: f64) -> f64 {
    1e-6f64.max(1e-6 * v.abs())
}

fn jacobian_with<M: ReturnMap + ?Sized>(map: &M, z: &ApexState, scale: f64) -> Result<[[f64; 2]; 2]> {
    let base = z.to_array();
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let h = scale * fd_step(base[j]);
        let mut plus = base;
        let mut minus = base;
        plus[j] += h;
        minus[j] -= h;
        let fp = map.apply(&ApexState::from_array(plus))?.to_array();
        let fm = map.apply(&ApexState::from_array(minus))?.to_array();
        for i in 0..2 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Central-difference Jacobian of `map` at `z`.
pub fn jacobian<M: ReturnMap + ?Sized>(map: &M, z: &ApexState) -> Result<[[f64; 2]; 2]> {
    jacobian_with(map, z, 1.0)
}

/// Eigenvalues of a real 2x2 matrix from its characteristic polynomial.
pub fn eigenvalues_2x2(m: &[[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [(half + s, 0.0), (half - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(half, s), (half, -s)]
    }
}

pub fn spectral_radius(m: &[[f64; 2]; 2]) -> f64 {
    eigenvalues_2x2(m)
        .iter()
        .map(|&(re, im)| re.hypot(im))
        .fold(0.0, f64::max)
}

/// Relative disagreement between the `h` and `2h` Jacobians above which the
/// finite difference is considered unresolved.
const JACOBIAN_CONSISTENCY: f64 = 1e-3;

/// Local stability of `map` at the fixed point `z_star`.
pub fn stability<M: ReturnMap + ?Sized>(map: &M, z_star: &ApexState) -> Result<Stability> {
    let jac = jacobian(map, z_star)?;
    let coarse = jacobian_with(map, z_star, 2.0)?;
    let scale = jac.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-3);
    for i in 0..2 {
        for j in 0..2 {
            if !jac[i][j].is_finite() {
                return Err(Error::IllConditioned(format!("non-finite entry J[{i}][{j}]")));
            }
            if (jac[i][j] - coarse[i][j]).abs() > JACOBIAN_CONSISTENCY * scale {
                return Err(Error::IllConditioned(format!(
                    "J[{i}][{j}] = {} at h, {} at 2h",
                    jac[i][j], coarse[i][j]
                )));
            }
        }
    }
    let eigenvalues = eigenvalues_2x2(&jac);
    let rho = spectral_radius(&jac);
    Ok(Stability {
        jacobian: jac,
        eigenvalues,
        spectral_radius: rho,
        stable: rho < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings tried before giving up on a Newton direction.
    pub max_backtracks: usize,
    /// Forward iterations of the map used to re-seed when Newton fails.
    pub warmup_hops: usize,
}

impl NewtonSettings {
    pub fn analytic() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            max_backtracks: 12,
            warmup_hops: 60,
        }
    }

    pub fn simulator() -> Self {
        Self {
            tol: 1e-6,
            ..Self::analytic()
        }
    }

    pub fn for_provenance(p: Provenance) -> Self {
        match p {
            Provenance::SimulatorNumeric => Self::simulator(),
            _ => Self::analytic(),
        }
    }
}

fn residual_of<M: ReturnMap + ?Sized>(map: &M, z: &ApexState) -> Result<([f64; 2], f64)> {
    let pz = map.apply(z)?;
    let r = [pz.x_dot - z.x_dot, pz.y - z.y];
    Ok((r, inf_norm(r[0], r[1])))
}

/// Newton iteration on `P(z) - z` with a central-difference Jacobian.
///
/// Reports the Jacobian and spectral radius at convergence. If Newton fails
/// from `seed`, the map is iterated forward `warmup_hops` times (a stable gait
/// attracts) and Newton restarts from there.
pub fn numeric_fixed_point<M: ReturnMap + ?Sized>(
    map: &M,
    seed: &ApexState,
    settings: &NewtonSettings,
) -> Result<FixedPointResult> {
    match newton(map, seed, settings) {
        Ok(r) => Ok(r),
        Err(first) if settings.warmup_hops > 0 => {
            let mut z = *seed;
            for _ in 0..settings.warmup_hops {
                z = match map.apply(&z) {
                    Ok(next) => next,
                    Err(_) => return Err(first),
                };
            }
            newton(map, &z, settings).map_err(|_| first)
        }
        Err(e) => Err(e),
    }
}

fn newton<M: ReturnMap + ?Sized>(map: &M, seed: &ApexState, settings: &NewtonSettings) -> Result<FixedPointResult> {
    let mut z = *seed;
    let (mut r, mut norm) = residual_of(map, &z).map_err(|e| Error::GaitFailure(Box::new(e)))?;
    let mut iterations = 0;
    while norm > settings.tol {
        if iterations >= settings.max_iter {
            return Err(Error::NoConvergence {
                what: "Newton fixed-point search",
                iterations,
                residual: norm,
            });
        }
        let jp = jacobian(map, &z).map_err(|e| Error::GaitFailure(Box::new(e)))?;
        // (J_P - I) dz = -r
        let a = [[jp[0][0] - 1.0, jp[0][1]], [jp[1][0], jp[1][1] - 1.0]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if !(det.abs() > 1e-14) {
            return Err(Error::IllConditioned(format!("singular Newton matrix, det = {det:e}")));
        }
        let dz = [
            -(a[1][1] * r[0] - a[0][1] * r[1]) / det,
            -(-a[1][0] * r[0] + a[0][0] * r[1]) / det,
        ];
        let mut step = 1.0;
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..=settings.max_backtracks {
            let trial = ApexState::new(z.x_dot + step * dz[0], z.y + step * dz[1]);
            match residual_of(map, &trial) {
                Ok((tr, tn)) if tn < norm || tn <= settings.tol => {
                    accepted = Some((trial, tr, tn));
                    break;
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
            step *= 0.5;
        }
        match accepted {
            Some((nz, nr, nn)) => {
                z = nz;
                r = nr;
                norm = nn;
            }
            None => {
                return Err(match last_err {
                    Some(e) => Error::GaitFailure(Box::new(e)),
                    None => Error::NoConvergence {
                        what: "Newton line search",
                        iterations,
                        residual: norm,
                    },
                })
            }
        }
        iterations += 1;
    }
    let st = stability(map, &z)?;
    Ok(FixedPointResult {
        apex: z,
        touchdown: None,
        jacobian: st.jacobian,
        spectral_radius: st.spectral_radius,
        stable: st.stable,
        provenance: map.provenance(),
        residual: norm,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn jerboa() -> SlipParams {
        SlipParams::jerboa()
    }

    #[test]
    fn quadratic_root_cases() {
        assert_eq!(quadratic_roots(1.0, -3.0, 2.0).unwrap(), (2.0, 1.0));
        assert_eq!(quadratic_roots(1.0, 0.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(quadratic_roots(2.0, -4.0, -6.0).unwrap(), (3.0, -1.0));
        assert_eq!(quadratic_roots(0.0, 2.0, -4.0).unwrap(), (2.0, 2.0));
        assert!(matches!(
            quadratic_roots(0.0, 0.0, 1.0),
            Err(Error::DegenerateQuadratic)
        ));
        assert!(matches!(
            quadratic_roots(1.0, 0.0, 1.0),
            Err(Error::NegativeDiscriminant(_))
        ));
    }

    #[test]
    fn eigen_toys() {
        let half = [[0.5, 0.0], [0.0, 0.5]];
        assert_eq!(spectral_radius(&half), 0.5);
        let rot = [[0.0, -0.5], [0.5, 0.0]];
        assert_relative_eq!(spectral_radius(&rot), 0.5, epsilon = 1e-15);
        let ev = eigenvalues_2x2(&[[2.0, 1.0], [1.0, 2.0]]);
        assert_eq!(ev, [(3.0, 0.0), (1.0, 0.0)]);
    }

    #[test]
    fn stability_of_toy_maps() {
        let contract = |z: &ApexState| Ok(ApexState::new(z.x_dot / 2.0, z.y / 2.0));
        let st = stability(&contract, &ApexState::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(st.spectral_radius, 0.5, epsilon = 1e-9);
        assert!(st.stable);

        let identity = |z: &ApexState| Ok(*z);
        let st = stability(&identity, &ApexState::new(1.0, 0.3)).unwrap();
        assert_relative_eq!(st.spectral_radius, 1.0, epsilon = 1e-9);

        let expand = |z: &ApexState| Ok(ApexState::new(1.5 * z.x_dot, z.y - 0.2 * z.x_dot));
        let st = stability(&expand, &ApexState::new(1.0, 0.3)).unwrap();
        assert_relative_eq!(st.spectral_radius, 1.5, epsilon = 1e-9);
        assert!(!st.stable);
    }

    #[test]
    fn newton_on_toy_map() {
        // fixed point (2, 0.25) of an affine contraction
        let map = |z: &ApexState| {
            Ok(ApexState::new(
                0.5 * z.x_dot + 1.0 + 0.1 * z.y - 0.025,
                0.3 * z.y + 0.175,
            ))
        };
        let res = numeric_fixed_point(&map, &ApexState::new(0.0, 1.0), &NewtonSettings::analytic()).unwrap();
        assert!((res.apex.x_dot - 2.0).abs() < 1e-9);
        assert!((res.apex.y - 0.25).abs() < 1e-9);
        assert!(res.stable);
        let again = numeric_fixed_point(&map, &res.apex, &NewtonSettings::analytic()).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn ill_conditioned_map_detected() {
        let noisy = |z: &ApexState| {
            let wobble = (z.x_dot * 1e7).sin() * 1e-7;
            Ok(ApexState::new(0.5 * z.x_dot + wobble, 0.5 * z.y))
        };
        assert!(matches!(
            stability(&noisy, &ApexState::new(0.3, 0.2)),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn provenance_names_round_trip() {
        for p in Provenance::ALL {
            assert_eq!(p.as_str().parse::<Provenance>().unwrap(), p);
        }
        assert!("closed".parse::<Provenance>().is_err());
    }

    #[test]
    fn unit_gain_has_no_touchdown_rate() {
        let sol = closed_form_solution(-1.0, 1.0, &jerboa()).unwrap();
        assert_eq!(sol.touchdown.theta_offset, 0.0);
        assert_eq!(sol.touchdown.theta_dot_td, 0.0);
    }

    #[test]
    fn mirror_gait() {
        let p = jerboa();
        let fwd = closed_form_solution(-1.0, 0.5, &p).unwrap();
        let back = closed_form_solution(1.0, 0.5, &p).unwrap();
        assert_relative_eq!(back.apex.x_dot, -fwd.apex.x_dot, epsilon = 1e-12);
        assert_relative_eq!(back.touchdown.theta_td, -fwd.touchdown.theta_td, epsilon = 1e-12);
        assert_relative_eq!(back.apex.y, fwd.apex.y, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_zeroes_constraints() {
        let p = jerboa();
        for &(pb, kt) in &[(-1.0, 0.5), (-0.5, 0.3), (-1.55, 0.75), (-0.79, 0.64)] {
            let sol = closed_form_solution(pb, kt, &p).unwrap();
            let (e, s) = energy_speed_constraints(&sol.touchdown, pb, kt, &p).unwrap();
            assert!(e.abs() <= 1e-9 && s.abs() <= 1e-9, "({pb}, {kt}): {e:e} {s:e}");
            let tp = sol.touchdown;
            assert!((tp.theta_dot_td + tp.r_dot_td / p.r0 * tp.theta_offset.tan()).abs() <= 1e-12);
        }
    }

    #[test]
    fn perturbed_candidates_violate_constraints() {
        let p = jerboa();
        let (pb, kt) = (-1.0, 0.5);
        let sol = closed_form_solution(pb, kt, &p).unwrap();
        let k = sol.nominal.constants;

        let mut th = sol.touchdown;
        th.theta_td += 0.01;
        let (_, s) = energy_speed_constraints(&th, pb, kt, &p).unwrap();
        // derivative of the speed polynomial in theta: 2 a theta + b
        let (a, b, _) = speed_coefficients(sol.touchdown.r_dot_td, &k, pb, kt, &p);
        let slope = 2.0 * a * sol.touchdown.theta_td + b;
        assert!(s != 0.0 && s.signum() == slope.signum(), "{s} vs slope {slope}");
        assert!((s - slope * 0.01 - a * 1e-4).abs() < 1e-9);

        let mut rd = sol.touchdown;
        rd.r_dot_td += 0.01;
        let (e, _) = energy_speed_constraints(&rd, pb, kt, &p).unwrap();
        let (a, b, _) = energy_coefficients(&k, pb, kt, &p);
        let slope = 2.0 * a * sol.touchdown.r_dot_td + b;
        assert!(e != 0.0 && e.signum() == slope.signum());
    }

    #[test]
    fn nominal_stance_time_is_self_consistent() {
        let p = jerboa();
        let n = nominal_stance_constants(-1.0, 0.5, &p).unwrap();
        let td = StanceState::new(p.r0, n.r_dot_td, 0.0, 0.0);
        let t = liftoff_time(&flow_coeffs(&td, -1.0, &p).unwrap(), &p).unwrap();
        assert_relative_eq!(t.t_liftoff, n.constants.t_lo, epsilon = 1e-12);
    }
}
