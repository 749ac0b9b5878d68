use std::io::{self, Write};

use serde::Serialize;

use crate::format::sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajPhase {
    Descent,
    Stance,
    Ascent,
}

impl TrajPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            TrajPhase::Descent => "descent",
            TrajPhase::Stance => "stance",
            TrajPhase::Ascent => "ascent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Touchdown,
    Bottom,
    Liftoff,
    Apex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaitEvent {
    pub kind: EventKind,
    pub t: f64,
}

/// One output row. In flight the massless leg is reported at rest length,
/// held at the touchdown (descent) or liftoff (ascent) angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub phase: TrajPhase,
    pub r: f64,
    pub r_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub x: f64,
    pub y: f64,
    pub x_dot: f64,
    pub y_dot: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HybridTrajectory {
    pub samples: Vec<TrajectorySample>,
    pub events: Vec<GaitEvent>,
}

pub const TRAJECTORY_HEADER: &str = "t,phase,r,r_dot,theta,theta_dot,x,y,x_dot,y_dot,tau";

impl HybridTrajectory {
    pub fn extend(&mut self, other: HybridTrajectory) {
        self.samples.extend(other.samples);
        self.events.extend(other.events);
    }

    pub fn event_times(&self, kind: EventKind) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().filter(move |e| e.kind == kind).map(|e| e.t)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                sig(s.t),
                s.phase.as_str(),
                sig(s.r),
                sig(s.r_dot),
                sig(s.theta),
                sig(s.theta_dot),
                sig(s.x),
                sig(s.y),
                sig(s.x_dot),
                sig(s.y_dot),
                sig(s.tau)
            )?;
        }
        Ok(())
    }
}
