//! Tick-by-tick motion along maneuver trajectories.
//!
//! A maneuver starts when a command differs from the previous one and
//! begins from zero acceleration at the current speed. Repeating the same
//! command continues the maneuver, and every tick samples the maneuver's
//! exact trajectory. A full stop simulated this way therefore covers exactly
//! `B(v)`.

use super::ramp::Ramp;
use super::{AdProfile, KinematicCommand, TableProfile};

#[derive(Debug, Clone, PartialEq)]
enum Trajectory {
    Constant { v: f64 },
    Ramp { v0: f64, sign: f64, ramp: Ramp },
    Decay { v0: f64, floor: f64 },
    Rise { v0: f64, cut: f64 },
    ConstDecel { v0: f64, decel: f64, floor: f64 },
    TableRise { v0: f64, cut: f64, x_cut: f64, t_cut: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Maneuver {
    cmd: KinematicCommand,
    traj: Trajectory,
    elapsed: f64,
    covered: f64,
}

/// Speed plus the bookkeeping of the maneuver in progress.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionState {
    pub speed: f64,
    maneuver: Option<Maneuver>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub speed: f64,
    pub dx: f64,
}

impl MotionState {
    pub fn new(speed: f64) -> Self {
        MotionState { speed: speed.max(0.0), maneuver: None }
    }

    /// Command currently being executed, if any.
    pub fn active_command(&self) -> Option<KinematicCommand> {
        self.maneuver.as_ref().map(|m| m.cmd)
    }

    /// Seconds since the active maneuver began.
    pub fn maneuver_elapsed(&self) -> f64 {
        self.maneuver.as_ref().map_or(0.0, |m| m.elapsed)
    }
}

fn trajectory(p: &AdProfile, cmd: &KinematicCommand, v0: f64) -> Trajectory {
    let accelerate = |target: Option<f64>| -> Trajectory {
        let cut = target.unwrap_or(f64::INFINITY).min(p.speed_cap().unwrap_or(f64::INFINITY));
        if cut <= v0 {
            return Trajectory::Constant { v: v0 };
        }
        match p {
            AdProfile::JerkLimited(j) => {
                let ramp = if cut.is_finite() {
                    j.speedup_ramp(cut - v0)
                } else {
                    Ramp::open_ended(j.a_max, j.j_accel_up, j.j_accel_down)
                };
                Trajectory::Ramp { v0, sign: 1.0, ramp }
            }
            AdProfile::Ode(_) => Trajectory::Rise { v0, cut },
            AdProfile::Table(t) => table_rise(t, v0, cut),
        }
    };
    let slow_to = |floor: f64| -> Trajectory {
        match p {
            AdProfile::JerkLimited(j) => {
                let ramp = if floor <= 0.0 { j.stop_ramp(v0) } else { j.slow_ramp(v0 - floor) };
                Trajectory::Ramp { v0, sign: -1.0, ramp }
            }
            AdProfile::Ode(_) => Trajectory::Decay { v0, floor },
            AdProfile::Table(t) => Trajectory::ConstDecel { v0, decel: t.stop_decel(v0), floor },
        }
    };
    match *cmd {
        KinematicCommand::Hold => Trajectory::Constant { v: v0 },
        KinematicCommand::BrakeToStop => {
            if v0 <= 0.0 {
                Trajectory::Constant { v: 0.0 }
            } else {
                slow_to(0.0)
            }
        }
        KinematicCommand::Accelerate { target } => accelerate(target),
        KinematicCommand::TrackSpeed { target } => {
            let target = target.max(0.0);
            if target > v0 {
                accelerate(Some(target))
            } else if target < v0 {
                slow_to(target)
            } else {
                Trajectory::Constant { v: v0 }
            }
        }
    }
}

fn table_rise(tab: &TableProfile, v0: f64, cut: f64) -> Trajectory {
    let reach = |x: f64| tab.accel_reach(v0, x);
    let (mut x_cut, mut t_cut) = (f64::INFINITY, f64::INFINITY);
    if cut.is_finite() && reach(1e4).1 >= cut {
        let (mut lo, mut hi) = (0.0, 1e4);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if reach(mid).1 < cut {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        x_cut = hi;
        t_cut = reach(hi).0;
    }
    Trajectory::TableRise { v0, cut, x_cut, t_cut }
}

/// Speed at `t1` and distance covered by `t1`, given the distance `x0`
/// already covered at `t0`.
fn sample(p: &AdProfile, traj: &Trajectory, t0: f64, t1: f64, x0: f64) -> (f64, f64) {
    match *traj {
        Trajectory::Constant { v } => (v, x0 + v * (t1 - t0)),
        Trajectory::Ramp { v0, sign, ramp } => {
            let v = (v0 + sign * ramp.delta_v(t1)).max(0.0);
            (v, v0 * t1 + sign * ramp.delta_x(t1))
        }
        Trajectory::Decay { v0, floor } => {
            let AdProfile::Ode(o) = p else { unreachable!() };
            let end_speed = if floor > 0.0 { floor } else { o.stop_threshold };
            let t_end = o.decay_time_to(v0, end_speed);
            let v_at = |t: f64| if t < t_end { o.decay_speed(v0, t) } else { end_speed };
            let x_at = |t: f64| {
                let tt = t.min(t_end);
                let x = (v0 - o.decay_speed(v0, tt)) / o.decel_gain;
                x + floor * (t - t_end).max(0.0)
            };
            let v = if t1 >= t_end && floor <= 0.0 { 0.0 } else { v_at(t1) };
            (v, x_at(t1))
        }
        Trajectory::Rise { v0, cut } => {
            let AdProfile::Ode(o) = p else { unreachable!() };
            let limit = o.speed_limit;
            let t_cut = o.rise_time_to_speed(v0, limit, cut).unwrap_or(f64::INFINITY);
            let rising_end = t1.min(t_cut);
            let mut x = x0;
            if rising_end > t0 {
                x += o.rise_distance(v0, limit, t0, rising_end);
            }
            if t1 > t_cut {
                x += cut * (t1 - t_cut.max(t0));
            }
            let v = if t1 >= t_cut { cut } else { o.rise_speed(v0, limit, t1) };
            (v, x)
        }
        Trajectory::ConstDecel { v0, decel, floor } => {
            if !decel.is_finite() {
                return (floor, x0 + floor * (t1 - t0));
            }
            let t_end = (v0 - floor) / decel;
            let tt = t1.min(t_end);
            let x = v0 * tt - 0.5 * decel * tt * tt + floor * (t1 - t_end).max(0.0);
            (if t1 >= t_end { floor } else { v0 - decel * t1 }, x)
        }
        Trajectory::TableRise { v0, cut, x_cut, t_cut } => {
            let AdProfile::Table(tab) = p else { unreachable!() };
            let reach = |x: f64| tab.accel_reach(v0, x);
            if t1 >= t_cut {
                return (cut, x_cut + cut * (t1 - t_cut));
            }
            let mut lo = x0;
            let mut hi = x0 + 1.0;
            while reach(hi).0 < t1 {
                hi = 2.0 * hi;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if reach(mid).0 < t1 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = 0.5 * (lo + hi);
            (reach(x).1, x)
        }
    }
}

/// Speed and distance covered `t` seconds into a fresh `cmd` maneuver
/// begun at speed `v0`.
pub fn maneuver_progress(p: &AdProfile, v0: f64, cmd: &KinematicCommand, t: f64) -> (f64, f64) {
    let traj = trajectory(p, cmd, v0.max(0.0));
    sample(p, &traj, 0.0, t.max(0.0), 0.0)
}

/// Time at which a fresh `cmd` maneuver from `v0` has covered `d` meters,
/// or `None` if it comes to rest first.
pub fn maneuver_time_to_cover(p: &AdProfile, v0: f64, cmd: &KinematicCommand, d: f64) -> Option<f64> {
    if d <= 0.0 {
        return Some(0.0);
    }
    let traj = trajectory(p, cmd, v0.max(0.0));
    let at = |t: f64| sample(p, &traj, 0.0, t, 0.0);
    let mut hi = 1.0;
    loop {
        let (v, x) = at(hi);
        if x >= d {
            break;
        }
        if v <= 0.0 || hi > 1e5 {
            return None;
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 < d {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Some(hi)
}

/// Advances `state` by one tick of length `dt` under `cmd`.
pub fn step(p: &AdProfile, state: &MotionState, cmd: &KinematicCommand, dt: f64) -> (MotionState, StepOutcome) {
    let mut m = match &state.maneuver {
        Some(m) if m.cmd == *cmd => m.clone(),
        _ => Maneuver { cmd: *cmd, traj: trajectory(p, cmd, state.speed), elapsed: 0.0, covered: 0.0 },
    };
    let (t0, t1) = (m.elapsed, m.elapsed + dt);
    let (v, x) = sample(p, &m.traj, t0, t1, m.covered);
    let dx = (x - m.covered).max(0.0);
    m.elapsed = t1;
    m.covered = x;
    let v = if v.is_finite() { v.max(0.0) } else { 0.0 };
    (MotionState { speed: v, maneuver: Some(m) }, StepOutcome { speed: v, dx })
}
