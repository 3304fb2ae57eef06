//! Intelligent Driver Model car-following law.

use crate::error::{Error, Result};

/// Maximum acceleration `a`, m/s^2.
pub const ACCEL: f64 = 1.0;
/// Comfortable deceleration `b`, m/s^2.
pub const DECEL: f64 = 1.5;
/// Desired (and maximum allowed) speed `v0`, m/s.
pub const MAX_SPEED: f64 = 35.0;
/// Jam distance `s0`, m.
pub const MIN_GAP: f64 = 2.0;
/// Safe time headway `T`, s.
pub const TAU: f64 = 1.0;
/// Free-road acceleration exponent.
pub const DELTA: i32 = 4;
/// Physics tick, s.
pub const DT: f64 = 0.1;

/// The vehicle ahead, either a real vehicle or a standing stop-line obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub speed: f64,
    /// Bumper-to-bumper distance, m.
    pub gap: f64,
}

/// IDM acceleration for a vehicle at speed `v` behind `leader`.
///
/// The returned value is clamped so that `v + accel * DT` stays in
/// `[0, MAX_SPEED]`. A leader with a non-positive gap is a collision.
pub fn idm_accel(v: f64, leader: Option<Leader>) -> Result<f64> {
    let free = 1.0 - (v / MAX_SPEED).powi(DELTA);
    let raw = match leader {
        None => ACCEL * free,
        Some(Leader { speed, gap }) => {
            if gap <= 0.0 {
                return Err(Error::Collision { route: usize::MAX, time: f64::NAN, gap });
            }
            let dv = v - speed;
            let dynamic = v * TAU + v * dv / (2.0 * (ACCEL * DECEL).sqrt());
            let s_star = MIN_GAP + dynamic.max(0.0);
            ACCEL * (free - (s_star / gap).powi(2))
        }
    };
    Ok(raw.clamp(-v / DT, (MAX_SPEED - v) / DT))
}
