//! Black-box estimation of the capability functions.
//!
//! These procedures treat the vehicle as an opaque simulation. Braking
//! distance is the smallest obstacle distance, searched upward in fixed
//! steps, at which the vehicle stops without touching the obstacle.
//! Acceleration values come from raising the speed limit of a clear road
//! until the distance needed to reach it matches the requested distance.

use super::{step, AdProfile, DynamicsError, KinematicCommand, MotionState};

/// A stopping experiment: starting at `speed` with an obstacle `gap` meters
/// ahead, does the vehicle come to rest before reaching it?
pub trait StoppingRun {
    fn stops_before(&mut self, speed: f64, gap: f64) -> bool;
}

/// A cruising experiment: starting at `speed` under a speed limit `limit`,
/// returns the time and distance needed to reach the limit.
pub trait CruiseRun {
    fn reach_limit(&mut self, speed: f64, limit: f64) -> Option<(f64, f64)>;
}

/// Runs experiments with this crate's own tick stepping.
#[derive(Debug, Clone)]
pub struct SteppedVehicle {
    pub profile: AdProfile,
    pub dt: f64,
    pub max_ticks: usize,
}

impl SteppedVehicle {
    pub fn new(profile: AdProfile, dt: f64) -> Self {
        SteppedVehicle { profile, dt, max_ticks: 1_000_000 }
    }
}

impl StoppingRun for SteppedVehicle {
    fn stops_before(&mut self, speed: f64, gap: f64) -> bool {
        let stopped = self.profile.stop_threshold().max(1e-9);
        let mut state = MotionState::new(speed);
        let mut travelled = 0.0;
        for _ in 0..self.max_ticks {
            if state.speed < stopped {
                return true;
            }
            let (next, out) = step(&self.profile, &state, &KinematicCommand::BrakeToStop, self.dt);
            travelled += out.dx;
            if travelled > gap + 1e-9 {
                return false;
            }
            state = next;
        }
        false
    }
}

impl CruiseRun for SteppedVehicle {
    fn reach_limit(&mut self, speed: f64, limit: f64) -> Option<(f64, f64)> {
        let cmd = KinematicCommand::Accelerate { target: Some(limit) };
        let mut state = MotionState::new(speed);
        let (mut t, mut d) = (0.0, 0.0);
        for _ in 0..self.max_ticks {
            if state.speed >= limit - 1e-9 {
                return Some((t, d));
            }
            let (next, out) = step(&self.profile, &state, &cmd, self.dt);
            t += self.dt;
            d += out.dx;
            state = next;
        }
        None
    }
}

/// Smallest obstacle distance, on a grid of `search_step`, at which the
/// vehicle stops safely from `speed`. Gives up past `bound`.
pub fn estimate_braking_empirical(
    run: &mut impl StoppingRun,
    speed: f64,
    search_step: f64,
    bound: f64,
) -> Result<f64, DynamicsError> {
    if speed < 0.0 || speed.is_nan() {
        return Err(DynamicsError::NegativeSpeed(speed));
    }
    if !(search_step > 0.0) {
        return Err(DynamicsError::EstimationFailed("search step must be positive".into()));
    }
    let mut k = 0u64;
    loop {
        let gap = k as f64 * search_step;
        if gap > bound {
            return Err(DynamicsError::EstimationFailed(format!("no safe stop from {speed} m/s within {bound} m")));
        }
        if run.stops_before(speed, gap) {
            return Ok(gap);
        }
        k += 1;
    }
}

/// `(AT, AV)` estimated by raising the limit from `speed` in `speed_step`
/// increments, then bisecting the last increment until the distance needed
/// to reach the limit matches `distance`. Limits above `max_limit` are not
/// tried.
pub fn estimate_accel_empirical(
    run: &mut impl CruiseRun,
    speed: f64,
    distance: f64,
    speed_step: f64,
    max_limit: f64,
) -> Result<(f64, f64), DynamicsError> {
    if speed < 0.0 || speed.is_nan() {
        return Err(DynamicsError::NegativeSpeed(speed));
    }
    if distance < 0.0 || distance.is_nan() {
        return Err(DynamicsError::NegativeDistance(distance));
    }
    if distance == 0.0 {
        return Ok((0.0, speed));
    }
    let fail = || DynamicsError::EstimationFailed(format!("{distance} m not attainable from {speed} m/s"));
    let mut measure = |limit: f64| run.reach_limit(speed, limit).ok_or_else(fail);
    let mut lo = speed;
    let mut hi = speed;
    loop {
        hi = (hi + speed_step).min(max_limit);
        let (_, d) = measure(hi)?;
        if d >= distance {
            break;
        }
        if hi >= max_limit {
            return Err(fail());
        }
        lo = hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if measure(mid)?.1 < distance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t, _) = measure(hi)?;
    Ok((t, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::presets;

    #[test]
    fn braking_estimate_brackets_analytic_value() {
        let p = presets::apollo_like();
        let mut sim = SteppedVehicle::new(p.clone(), 0.01);
        let est = estimate_braking_empirical(&mut sim, 20.0, 0.1, 200.0).unwrap();
        let b = p.braking_distance(20.0).unwrap();
        assert!(est >= b - 1e-6 && est <= b + 0.1 + 1e-6, "{est} vs {b}");
        assert_eq!(estimate_braking_empirical(&mut sim, 0.0, 0.1, 200.0).unwrap(), 0.0);
    }

    #[test]
    fn braking_estimate_reports_failure_past_bound() {
        let mut sim = SteppedVehicle::new(presets::apollo_like(), 0.01);
        assert!(matches!(
            estimate_braking_empirical(&mut sim, 20.0, 1.0, 10.0),
            Err(DynamicsError::EstimationFailed(_))
        ));
    }

    #[test]
    fn accel_estimate_zero_distance_is_strict() {
        let mut sim = SteppedVehicle::new(presets::apollo_like(), 0.01);
        assert_eq!(estimate_accel_empirical(&mut sim, 7.0, 0.0, 0.5, 22.2).unwrap(), (0.0, 7.0));
    }

    #[test]
    fn accel_estimate_fails_when_cap_is_too_low() {
        let mut sim = SteppedVehicle::new(presets::apollo_like(), 0.01);
        assert!(estimate_accel_empirical(&mut sim, 0.0, 500.0, 0.5, 22.2).is_err());
    }
}
