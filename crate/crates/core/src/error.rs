use std::fmt;

use thiserror::Error;

/// Hybrid phase in which a return-map evaluation failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AngleOfAttack,
    Descent,
    Touchdown,
    Stance,
    Liftoff,
    Ascent,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::AngleOfAttack => "angle_of_attack",
            Phase::Descent => "descent",
            Phase::Touchdown => "touchdown",
            Phase::Stance => "stance",
            Phase::Liftoff => "liftoff",
            Phase::Ascent => "ascent",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("touchdown height mismatch: y = {y}, r0*cos(theta) = {expected}")]
    TouchdownMismatch { y: f64, expected: f64 },
    #[error("insufficient vertical energy to reach touchdown height (radicand {radicand})")]
    InsufficientEnergy { radicand: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("negative discriminant {0:e}")]
    NegativeDiscriminant(f64),
    #[error("degenerate quadratic (a = 0, b = 0)")]
    DegenerateQuadratic,
    #[error("leg force never vanished within {budget} s of stance")]
    FailedLiftoff { budget: f64 },
    #[error("mass driven below ground during stance at t = {t} s")]
    GroundFault { t: f64 },
    #[error("apex height {y_apex} m is below touchdown height {y_touchdown} m")]
    UnreachableTouchdown { y_apex: f64, y_touchdown: f64 },
    #[error("vertical velocity {y_dot} m/s is negative at liftoff")]
    DescendingAtLiftoff { y_dot: f64 },
    #[error("stance oscillator is not underdamped (zeta = {zeta})")]
    Overdamped { zeta: f64 },
    #[error("liftoff arccos argument {0} outside [-1, 1]")]
    NoLiftoffRoot(f64),
    #[error("liftoff time {t_lo} s not after bottom time {t_bottom} s")]
    NonpositiveTime { t_lo: f64, t_bottom: f64 },
    #[error("no real fixed point: {0}")]
    NoRealFixedPoint(String),
    #[error("non-physical fixed point: {0}")]
    NonPhysical(String),
    #[error("finite-difference Jacobian is ill conditioned: {0}")]
    IllConditioned(String),
    #[error("gait failed in {phase}: {source}")]
    Gait {
        phase: Phase,
        #[source]
        source: Box<Error>,
    },
    #[error("gait failure during fixed-point search: {0}")]
    GaitFailure(Box<Error>),
}

impl Error {
    pub(crate) fn in_phase(self, phase: Phase) -> Self {
        match self {
            e @ Error::Gait { .. } => e,
            e => Error::Gait {
                phase,
                source: Box::new(e),
            },
        }
    }

    /// Short snake_case name of the innermost error.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidState(_) => "invalid_state",
            Error::TouchdownMismatch { .. } => "touchdown_mismatch",
            Error::InsufficientEnergy { .. } => "insufficient_energy",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NegativeDiscriminant(_) => "negative_discriminant",
            Error::DegenerateQuadratic => "degenerate_quadratic",
            Error::FailedLiftoff { .. } => "failed_liftoff",
            Error::GroundFault { .. } => "ground_fault",
            Error::UnreachableTouchdown { .. } => "unreachable_touchdown",
            Error::DescendingAtLiftoff { .. } => "descending_at_liftoff",
            Error::Overdamped { .. } => "overdamped",
            Error::NoLiftoffRoot(_) => "no_liftoff_root",
            Error::NonpositiveTime { .. } => "nonpositive_time",
            Error::NoRealFixedPoint(_) => "no_real_fixed_point",
            Error::NonPhysical(_) => "non_physical",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::Gait { source, .. } => source.kind(),
            Error::GaitFailure(inner) => inner.kind(),
        }
    }

    /// `kind` prefixed with the phase tag when there is one, e.g.
    /// `ascent/descending_at_liftoff`.
    pub fn tag(&self) -> String {
        match self.phase() {
            Some(p) => format!("{p}/{}", self.kind()),
            None => self.kind().to_string(),
        }
    }

    /// Phase tag of a gait failure, looking through fixed-point wrappers.
    pub fn phase(&self) -> Option<Phase> {
        match self {
            Error::Gait { phase, .. } => Some(*phase),
            Error::GaitFailure(inner) => inner.phase(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
