//! Quick invariant suite behind the `validate` subcommand.

use serde::Serialize;

use crate::analytic::{flow_coeffs, linearized_stance_rhs, stance_flow};
use crate::controller::{hip_torque, solve_aoa_implicit, PidState};
use crate::fixed_point::{
    closed_form_solution, energy_speed_constraints, numeric_fixed_point, NewtonSettings, SimulatorMap,
};
use crate::model::{flight_to_stance, stance_to_flight, ApexState, ControlInputs, SlipParams, StanceState};
use crate::sim::SimSettings;
use crate::sim::{integrate_ascent, integrate_descent, rk4_step, simulate_hop, stance_dynamics, stance_energy};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn failed(name: &'static str, why: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        detail: why.to_string(),
    }
}

const STANCE_SAMPLES: [(f64, f64, f64, f64); 5] = [
    (0.19, -1.5, 0.3, -4.0),
    (0.2, -0.8, 0.45, -2.0),
    (0.17, 0.6, -0.2, -6.5),
    (0.195, 1.2, -0.5, -9.0),
    (0.18, 0.0, 0.1, 3.0),
];

fn resets(p: &SlipParams) -> Check {
    let mut worst = 0.0f64;
    for &(r, rd, th, thd) in &STANCE_SAMPLES {
        let s = StanceState::new(r, rd, th, thd);
        let f = stance_to_flight(&s);
        let ke = s.kinetic_energy(p.m);
        worst = worst.max((f.kinetic_energy(p.m) - ke).abs() / ke);
        let at_td = crate::model::FlightState::new(f.x_dot, p.r0 * th.cos(), f.y_dot);
        match flight_to_stance(&at_td, th, p) {
            Ok(back) => worst = worst.max((back.kinetic_energy(p.m) - ke).abs() / ke),
            Err(e) => return failed("resets_preserve_kinetic_energy", e),
        }
    }
    check("resets_preserve_kinetic_energy", worst, 1e-12)
}

fn flight_energy(p: &SlipParams) -> Check {
    let mut worst = 0.0f64;
    for &(xd, y, th) in &[(1.2, 0.25, 0.4), (0.5, 0.21, 0.2), (2.5, 0.3, 0.7)] {
        let apex = ApexState::new(xd, y);
        let e0 = crate::model::FlightState::new(xd, y, 0.0).total_energy(p);
        let td = match integrate_descent(&apex, th, p) {
            Ok(td) => td,
            Err(e) => return failed("flight_energy_conserved", e),
        };
        worst = worst.max((td.total_energy(p) - e0).abs() / e0);
        let up = crate::model::FlightState::new(td.x_dot, td.y, -td.y_dot);
        match integrate_ascent(&up, p) {
            Ok(a) => {
                worst = worst.max((crate::model::FlightState::new(a.x_dot, a.y, 0.0).total_energy(p) - e0).abs() / e0)
            }
            Err(e) => return failed("flight_energy_conserved", e),
        }
    }
    check("flight_energy_conserved", worst, 1e-10)
}

fn unforced_stance(p: &SlipParams) -> Check {
    let p = SlipParams { b: 0.0, ..*p };
    let f = |x: &[f64; 4]| stance_dynamics(&StanceState::from_array(*x), 0.0, &p).to_array();
    let mut x = StanceState::new(p.r0, -1.5, 0.3, -4.0).to_array();
    let e0 = stance_energy(&StanceState::from_array(x), &p);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        x = rk4_step(f, x, 1e-5);
        worst = worst.max((stance_energy(&StanceState::from_array(x), &p) - e0).abs() / e0.abs());
    }
    check("undamped_unforced_stance_energy", worst, 1e-9)
}

fn aoa(p: &SlipParams) -> Check {
    let mut worst = 0.0f64;
    for &(xd, y, kt) in &[(1.5, 0.25, 0.6), (0.7, 0.22, 0.3), (2.4, 0.19, 0.75)] {
        let ev = p.m * p.g * y;
        match (solve_aoa_implicit(xd, ev, kt, p), solve_aoa_implicit(-xd, ev, kt, p)) {
            (Ok(a), Ok(b)) => {
                worst = worst.max(a.residual).max((a.theta_aoa + b.theta_aoa).abs());
            }
            (Err(e), _) | (_, Err(e)) => return failed("aoa_solution_odd_and_exact", e),
        }
    }
    check("aoa_solution_odd_and_exact", worst, 1e-10)
}

fn closed_form(p: &SlipParams) -> Check {
    let mut worst = 0.0f64;
    for &(pb, kt) in &[(-0.5, 0.3), (-0.79, 0.64), (-1.0, 0.5), (-1.55, 0.75)] {
        let sol = match closed_form_solution(pb, kt, p) {
            Ok(s) => s,
            Err(e) => return failed("closed_form_zeroes_constraints", e),
        };
        match energy_speed_constraints(&sol.touchdown, pb, kt, p) {
            Ok((e, s)) => worst = worst.max(e.abs()).max(s.abs()),
            Err(e) => return failed("closed_form_zeroes_constraints", e),
        }
        let t = sol.touchdown;
        worst = worst.max((t.theta_dot_td + t.r_dot_td / p.r0 * t.theta_offset.tan()).abs());
    }
    check("closed_form_zeroes_constraints", worst, 1e-9)
}

fn flow_vs_rk4(p: &SlipParams) -> Check {
    let mut worst = 0.0f64;
    for &(pb, rd, th) in &[(-1.0, -1.8, 0.35), (-0.5, -0.9, 0.2), (-1.5, -2.2, 0.6)] {
        let td = StanceState::new(p.r0, rd, th, 0.0);
        let c = match flow_coeffs(&td, pb, p) {
            Ok(c) => c,
            Err(e) => return failed("stance_flow_matches_linearized_rk4", e),
        };
        let f = |x: &[f64; 4]| linearized_stance_rhs(&StanceState::from_array(*x), pb, p).to_array();
        let mut x = [td.r, td.r_dot, td.theta, 0.0];
        let h = 1e-6;
        for i in 1..=60_000 {
            x = rk4_step(f, x, h);
            if i % 1000 == 0 {
                let s = stance_flow(i as f64 * h, &c, &td, pb, p);
                worst = worst
                    .max((s.r - x[0]).abs())
                    .max((s.r_dot - x[1]).abs())
                    .max((s.theta - x[2]).abs());
            }
        }
    }
    check("stance_flow_matches_linearized_rk4", worst, 1e-9)
}

fn torque_limit(p: &SlipParams) -> Check {
    let inputs = ControlInputs::new(-1.5, 0.5).with_torque_limit(Some(2.0));
    let mut worst = 0.0f64;
    let mut pid = PidState::default();
    for &(r, rd, th, thd) in &STANCE_SAMPLES {
        let s = StanceState::new(r, rd, th, thd);
        let (tau, next) = hip_torque(inputs.p_bar, &s, pid, &inputs, p, 1e-3);
        pid = next;
        worst = worst.max(tau.abs() - 2.0);
    }
    check("torque_limit_respected", worst.max(0.0), 0.0)
}

fn fixed_point_idempotent(p: &SlipParams) -> Check {
    let inputs = ControlInputs::new(-1.0, 0.5);
    let map = SimulatorMap {
        inputs,
        params: *p,
        settings: SimSettings::default(),
    };
    let seed = match closed_form_solution(-1.0, 0.5, p) {
        Ok(s) => s.apex,
        Err(e) => return failed("simulator_fixed_point_idempotent", e),
    };
    let fp = match numeric_fixed_point(&map, &seed, &NewtonSettings::simulator()) {
        Ok(f) => f,
        Err(e) => return failed("simulator_fixed_point_idempotent", e),
    };
    match simulate_hop(&fp.apex, &inputs, p, &map.settings, None) {
        Ok(h) => check(
            "simulator_fixed_point_idempotent",
            (h.next_apex.x_dot - fp.apex.x_dot)
                .abs()
                .max((h.next_apex.y - fp.apex.y).abs()),
            1e-6,
        ),
        Err(e) => failed("simulator_fixed_point_idempotent", e),
    }
}

/// Runs every check with the given model parameters.
pub fn run_validation(params: &SlipParams) -> Vec<Check> {
    vec![
        resets(params),
        flight_energy(params),
        unforced_stance(params),
        aoa(params),
        closed_form(params),
        flow_vs_rk4(params),
        torque_limit(params),
        fixed_point_idempotent(params),
    ]
}
