//! Vehicle capability models.
//!
//! An [`AdProfile`] answers the four capability questions used throughout
//! the toolkit: how far the vehicle needs to stop (`B`), how far it travels
//! while slowing to a given speed (partial braking), and how long it takes
//! and how fast it goes after accelerating over a distance (`AT`, `AV`).
//! [`step`] advances a vehicle by one tick along the same trajectories, so
//! simulated maneuvers agree with the analytic values.

mod diagnostics;
mod estimate;
mod ode;
pub mod presets;
mod ramp;
mod step;
mod table;

pub use diagnostics::{
    check_capability, AdditivityDeviation, CapabilityGrid, CapabilityReport, MonotonicityViolation, RealismFlag,
    MAX_REALISTIC_ACCEL, MAX_REALISTIC_DECEL,
};
pub use estimate::{estimate_accel_empirical, estimate_braking_empirical, CruiseRun, SteppedVehicle, StoppingRun};
pub use ode::OdeProfile;
pub use step::{maneuver_progress, maneuver_time_to_cover, step, MotionState, StepOutcome};
pub use table::TableProfile;

use ramp::Ramp;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("target speed {target} exceeds initial speed {initial}")]
    TargetAboveInitial { initial: f64, target: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("estimation failed: {0}")]
    EstimationFailed(String),
}

/// Jerk-limited trapezoidal acceleration and braking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JerkLimitedProfile {
    pub a_max: f64,
    pub d_max: f64,
    pub j_accel_up: f64,
    pub j_accel_down: f64,
    pub j_decel_up: f64,
    pub j_decel_down: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_cap: Option<f64>,
}

impl JerkLimitedProfile {
    fn validate(&self) -> Result<(), String> {
        let rates = [self.a_max, self.d_max, self.j_accel_up, self.j_accel_down, self.j_decel_up, self.j_decel_down];
        if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err("all rates and jerks must be positive".into());
        }
        if matches!(self.v_cap, Some(c) if !(c > 0.0)) {
            return Err("speed cap must be positive".into());
        }
        Ok(())
    }

    pub(crate) fn stop_ramp(&self, v: f64) -> Ramp {
        Ramp::for_delta_v(v, self.d_max, self.j_decel_up, self.j_decel_down)
    }

    pub(crate) fn slow_ramp(&self, dv: f64) -> Ramp {
        Ramp::for_delta_v(dv, self.d_max, self.j_decel_up, self.j_decel_down)
    }

    pub(crate) fn speedup_ramp(&self, dv: f64) -> Ramp {
        Ramp::for_delta_v(dv, self.a_max, self.j_accel_up, self.j_accel_down)
    }

    fn braking_distance(&self, v: f64) -> f64 {
        let r = self.stop_ramp(v);
        let t = r.duration();
        v * t - r.delta_x(t)
    }

    fn braking_partial(&self, v: f64, v_t: f64) -> f64 {
        let r = self.stop_ramp(v);
        let (mut lo, mut hi) = (0.0, r.duration());
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if v - r.delta_v(mid) > v_t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        v * t - r.delta_x(t)
    }

    fn distance_for_duration(&self, v: f64, duration: f64) -> (f64, f64) {
        let r = Ramp::for_duration(duration, self.a_max, self.j_accel_up, self.j_accel_down);
        (v * duration + r.delta_x(duration), v + r.total_delta_v())
    }

    fn accel_reach(&self, v: f64, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            return (0.0, v);
        }
        let cap = self.v_cap.unwrap_or(f64::INFINITY);
        if v >= cap {
            return (x / v, v);
        }
        let mut hi = if cap.is_finite() {
            let r = self.speedup_ramp(cap - v);
            let t_cap = r.duration();
            let x_cap = v * t_cap + r.delta_x(t_cap);
            if x >= x_cap {
                return (t_cap + (x - x_cap) / cap, cap);
            }
            t_cap
        } else {
            1.0
        };
        while self.distance_for_duration(v, hi).0 < x {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.distance_for_duration(v, mid).0 < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        (t, self.distance_for_duration(v, t).1.min(cap))
    }
}

/// A vehicle's acceleration/deceleration capability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum AdProfile {
    JerkLimited(JerkLimitedProfile),
    Ode(OdeProfile),
    Table(TableProfile),
}

impl AdProfile {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        match self {
            AdProfile::JerkLimited(p) => p.validate(),
            AdProfile::Ode(p) => p.validate(),
            AdProfile::Table(p) => p.validate(),
        }
        .map_err(DynamicsError::InvalidProfile)
    }

    /// Highest speed the acceleration law can reach, if bounded.
    pub fn speed_cap(&self) -> Option<f64> {
        match self {
            AdProfile::JerkLimited(p) => p.v_cap,
            AdProfile::Ode(p) => Some(p.speed_limit),
            AdProfile::Table(p) => p.accel_speed.last().and_then(|r| r.last()).copied(),
        }
    }

    /// Speed below which the vehicle counts as stopped under this law.
    pub fn stop_threshold(&self) -> f64 {
        match self {
            AdProfile::Ode(p) => p.stop_threshold,
            _ => 0.0,
        }
    }

    /// Braking distance `B(v)`: distance of a full stop from speed `v`.
    pub fn braking_distance(&self, v: f64) -> Result<f64, DynamicsError> {
        check_speed(v)?;
        Ok(match self {
            AdProfile::JerkLimited(p) => p.braking_distance(v),
            AdProfile::Ode(p) => p.braking_distance(v),
            AdProfile::Table(p) => p.braking_distance(v),
        })
    }

    /// Distance covered by the full stop from `v` until the speed has fallen
    /// to `v_t`.
    pub fn braking_partial(&self, v: f64, v_t: f64) -> Result<f64, DynamicsError> {
        check_speed(v)?;
        check_speed(v_t)?;
        if v_t > v {
            return Err(DynamicsError::TargetAboveInitial { initial: v, target: v_t });
        }
        if v_t == v {
            return Ok(0.0);
        }
        Ok(match self {
            AdProfile::JerkLimited(p) => p.braking_partial(v, v_t),
            AdProfile::Ode(p) => p.braking_partial(v, v_t),
            AdProfile::Table(p) => p.braking_partial(v, v_t),
        })
    }

    /// `(AT(v, x), AV(v, x))`: time taken and speed reached when accelerating
    /// from `v` over `x` meters.
    pub fn accel_reach(&self, v: f64, x: f64) -> Result<(f64, f64), DynamicsError> {
        check_speed(v)?;
        if x.is_nan() || x < 0.0 {
            return Err(DynamicsError::NegativeDistance(x));
        }
        Ok(match self {
            AdProfile::JerkLimited(p) => p.accel_reach(v, x),
            AdProfile::Ode(p) => p.accel_reach(v, x),
            AdProfile::Table(p) => p.accel_reach(v, x),
        })
    }

    pub fn accel_time(&self, v: f64, x: f64) -> Result<f64, DynamicsError> {
        self.accel_reach(v, x).map(|r| r.0)
    }

    pub fn accel_speed(&self, v: f64, x: f64) -> Result<f64, DynamicsError> {
        self.accel_reach(v, x).map(|r| r.1)
    }
}

fn check_speed(v: f64) -> Result<(), DynamicsError> {
    if v.is_nan() || v < 0.0 {
        Err(DynamicsError::NegativeSpeed(v))
    } else {
        Ok(())
    }
}

/// Longitudinal command applied for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KinematicCommand {
    BrakeToStop,
    /// Accelerate with the full law, levelling off at `target` when given.
    Accelerate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<f64>,
    },
    Hold,
    TrackSpeed {
        target: f64,
    },
}

impl KinematicCommand {
    pub fn mode_name(&self) -> &'static str {
        match self {
            KinematicCommand::BrakeToStop => "brake_to_stop",
            KinematicCommand::Accelerate { .. } => "accelerate",
            KinematicCommand::Hold => "hold",
            KinematicCommand::TrackSpeed { .. } => "track_speed",
        }
    }
}
