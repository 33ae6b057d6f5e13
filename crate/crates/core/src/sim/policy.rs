//! Reference ego policies and the worst-case arriving driver.
//!
//! A policy only sees vistas. It keeps its own copy of the motion state,
//! stepped with the commands it issues, so it can dry-run the next tick
//! exactly as the simulator will execute it.

use serde::{Deserialize, Serialize};

use crate::criticality::{max_caution_speed, VistaContext, VistaKind};
use crate::dynamics::{maneuver_time_to_cover, step, AdProfile, KinematicCommand, MotionState};
use crate::vista::{ObstacleState, Vista, ZoneView};

/// Clearance kept to the rear of a lead vehicle when stopping behind it.
pub const STANDOFF: f64 = 1.0;
/// Extra room demanded on top of each worst-case requirement.
pub const GUARD: f64 = 1.0;
const EPS: f64 = 1e-6;
const TIME_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicyKind {
    WorstCaseSafe,
    Overcautious,
    Overoptimistic {
        #[serde(default = "default_factor")]
        factor: f64,
    },
    /// Replays `commands`, one per tick, then brakes to a stop.
    Scripted {
        commands: Vec<KinematicCommand>,
        #[serde(default)]
        lane_change: bool,
    },
    External(crate::bridge::AgentConfig),
}

fn default_factor() -> f64 {
    0.5
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::WorstCaseSafe => "worst-case-safe",
            PolicyKind::Overcautious => "overcautious",
            PolicyKind::Overoptimistic { .. } => "overoptimistic",
            PolicyKind::Scripted { .. } => "scripted",
            PolicyKind::External(_) => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{reason}")]
pub struct PolicyFailure {
    pub reason: String,
}

impl PolicyFailure {
    pub fn new(reason: impl Into<String>) -> Self {
        PolicyFailure { reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoDecision {
    pub command: KinematicCommand,
    /// Take the lane-change route. Only honoured on the first tick.
    #[serde(default)]
    pub lane_change: bool,
}

impl From<KinematicCommand> for EgoDecision {
    fn from(command: KinematicCommand) -> Self {
        EgoDecision { command, lane_change: false }
    }
}

pub trait EgoPolicy: Send {
    fn decide(&mut self, tick: u64, vista: &Vista) -> Result<EgoDecision, PolicyFailure>;

    /// Called once when the run ends, whatever the reason.
    fn finish(&mut self, _reason: &str) {}
}

/// What a policy knows about itself and the context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEnv {
    pub ctx: VistaContext,
    pub profile: AdProfile,
    pub dt: f64,
    pub vehicle_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Attitude {
    WorstCaseSafe,
    Overcautious,
    Overoptimistic(f64),
}

/// Dry-runs commands against a mirrored motion state and falls back to a
/// full stop, held until rest, whenever the next tick would leave too little
/// room to stop before `gap`.
#[derive(Debug, Clone)]
struct Guarded {
    profile: AdProfile,
    dt: f64,
    mirror: MotionState,
    braking: bool,
}

impl Guarded {
    fn new(profile: AdProfile, dt: f64, speed: f64) -> Self {
        Guarded { profile, dt, mirror: MotionState::new(speed), braking: false }
    }

    fn sync(&mut self, observed_speed: f64) {
        if (self.mirror.speed - observed_speed).abs() > 1e-6 {
            self.mirror = MotionState::new(observed_speed);
        }
    }

    fn stopped(&self) -> bool {
        self.mirror.speed <= self.profile.stop_threshold().max(1e-9)
    }

    fn fits(&self, cmd: &KinematicCommand, gap: f64) -> bool {
        let (next, out) = step(&self.profile, &self.mirror, cmd, self.dt);
        let b = self.profile.braking_distance(next.speed).unwrap_or(f64::INFINITY);
        out.dx + b <= gap + 1e-9
    }

    fn choose(&mut self, desired: KinematicCommand, gap: f64) -> KinematicCommand {
        if self.braking && !self.stopped() {
            return self.apply(KinematicCommand::BrakeToStop);
        }
        self.braking = false;
        if self.fits(&desired, gap) {
            self.apply(desired)
        } else {
            self.braking = true;
            self.apply(KinematicCommand::BrakeToStop)
        }
    }

    fn apply(&mut self, cmd: KinematicCommand) -> KinematicCommand {
        self.mirror = step(&self.profile, &self.mirror, &cmd, self.dt).0;
        cmd
    }
}

fn lead_distance(front: &[ObstacleState]) -> f64 {
    front.iter().find(|o| o.kind.is_vehicle()).map_or(f64::INFINITY, |o| o.distance)
}

/// Worst-case-safe, overcautious and overoptimistic policies.
#[derive(Debug, Clone)]
pub struct ReferencePolicy {
    attitude: Attitude,
    env: PolicyEnv,
    guard: Option<Guarded>,
    progress: Option<KinematicCommand>,
    lane_decided: bool,
}

impl ReferencePolicy {
    pub fn worst_case_safe(env: PolicyEnv) -> Self {
        Self::with(Attitude::WorstCaseSafe, env)
    }

    pub fn overcautious(env: PolicyEnv) -> Self {
        Self::with(Attitude::Overcautious, env)
    }

    pub fn overoptimistic(env: PolicyEnv, factor: f64) -> Self {
        Self::with(Attitude::Overoptimistic(factor), env)
    }

    fn with(attitude: Attitude, env: PolicyEnv) -> Self {
        ReferencePolicy { attitude, env, guard: None, progress: None, lane_decided: false }
    }

    /// Whether the policy has committed to crossing the zone.
    pub fn committed(&self) -> bool {
        self.progress.is_some()
    }

    fn b(&self, v: f64) -> f64 {
        self.env.profile.braking_distance(v.max(0.0)).unwrap_or(f64::INFINITY)
    }

    fn reach(&self, v: f64, x: f64) -> (f64, f64) {
        self.env.profile.accel_reach(v.max(0.0), x.max(0.0)).unwrap_or((f64::INFINITY, v))
    }

    /// Speed the ego accelerates to when committing: enough to carry it
    /// through the zone with full acceleration.
    fn progress_target(&self, v: f64, x_e: f64) -> f64 {
        let ctx = &self.env.ctx;
        self.reach(v, (x_e + ctx.cd).max(self.env.vehicle_length)).1
    }

    fn front_guard(&self, target: f64) -> f64 {
        self.b(target).max(self.env.vehicle_length) + GUARD + target * self.env.dt
    }

    /// `(x_a, v_a)` of the nearest arriving vehicle, or `None` while one is
    /// already inside its zone.
    fn arriving_reading(&self, vista: &Vista) -> Option<(f64, f64)> {
        let a = vista.nearest_arriving()?;
        if a.distance < -EPS {
            return None;
        }
        Some((a.distance.max(0.0), a.speed.unwrap_or(self.env.ctx.vl).max(self.env.ctx.vl)))
    }

    /// Time for a cruising vehicle at distance `x_a` to reach its zone, when
    /// it starts a full stop at `brake_at`. Infinite if it stops short.
    fn arrival_time(&self, x_a: f64, va: f64, brake_at: f64) -> f64 {
        let cruise = va * brake_at;
        if cruise >= x_a {
            return x_a / va;
        }
        let rest = x_a - cruise;
        match maneuver_time_to_cover(&self.env.profile, va, &KinematicCommand::BrakeToStop, rest) {
            Some(t) if self.b(va) > rest + EPS => brake_at + t,
            _ => f64::INFINITY,
        }
    }

    fn progress_command(&self, vista: &Vista, zone: ZoneView, tick: u64) -> Option<KinematicCommand> {
        let env = &self.env;
        let (ctx, dt, l) = (&env.ctx, env.dt, env.vehicle_length);
        let v = vista.ego.speed;
        let x_e = zone.entry.max(0.0);
        let x_f = lead_distance(&vista.front) - zone.exit;
        let target = self.progress_target(v, x_e);
        let accelerate = KinematicCommand::Accelerate { target: Some(target) };
        let ok = match (ctx.kind, self.attitude) {
            (_, Attitude::Overcautious) => false,
            (VistaKind::LaneChange, _) => false,
            (VistaKind::Merging, Attitude::WorstCaseSafe) => {
                let Some((x_a, va)) = self.arriving_reading(vista) else { return None };
                let at = self.reach(v, x_e).0;
                x_a >= self.b(va) + va * at + va * dt + GUARD && x_f >= self.front_guard(target)
            }
            (VistaKind::Merging, Attitude::Overoptimistic(f)) => {
                let Some((x_a, va)) = self.arriving_reading(vista) else { return None };
                let (at, av) = self.reach(v, x_e);
                x_a >= f * (self.b(va) + va * at) && x_f >= f * self.b(av)
            }
            (VistaKind::CrossingYield, Attitude::WorstCaseSafe) => {
                let Some((x_a, va)) = self.arriving_reading(vista) else { return None };
                let p = &env.profile;
                let t_in = maneuver_time_to_cover(p, v, &accelerate, x_e)?;
                let t_clear = maneuver_time_to_cover(p, v, &accelerate, x_e + ctx.cd + l)?;
                self.arrival_time(x_a, va, t_in + dt) >= t_clear + dt && x_f >= self.front_guard(target)
            }
            (VistaKind::CrossingYield, Attitude::Overoptimistic(f)) => {
                let Some((x_a, va)) = self.arriving_reading(vista) else { return None };
                let (at, av) = self.reach(v, x_e + ctx.cd);
                x_a >= f * va * at && x_f >= f * self.b(av)
            }
            (VistaKind::CrossingLight, Attitude::WorstCaseSafe) => {
                let now = tick as f64 * dt;
                let entry_budget = ctx.ty - now - TIME_MARGIN;
                let clear_budget = dt + ctx.ty + ctx.tar - now - TIME_MARGIN;
                let fast_enough = |u: f64| {
                    let cmd = KinematicCommand::Accelerate { target: Some(u) };
                    let t_in = maneuver_time_to_cover(&env.profile, v, &cmd, x_e);
                    let t_out = maneuver_time_to_cover(&env.profile, v, &cmd, x_e + ctx.cd + l);
                    matches!((t_in, t_out), (Some(a), Some(b)) if a <= entry_budget && b <= clear_budget)
                };
                let lo = target;
                let hi = self.reach(v, x_e + ctx.cd + l).1.max(lo);
                if !fast_enough(hi) {
                    return None;
                }
                let u = if fast_enough(lo) {
                    lo
                } else {
                    let (mut a, mut b) = (lo, hi);
                    for _ in 0..60 {
                        let mid = 0.5 * (a + b);
                        if fast_enough(mid) {
                            b = mid;
                        } else {
                            a = mid;
                        }
                    }
                    b
                };
                return (x_f >= self.front_guard(u)).then_some(KinematicCommand::Accelerate { target: Some(u) });
            }
            (VistaKind::CrossingLight, Attitude::Overoptimistic(f)) => {
                let now = tick as f64 * dt;
                let at_in = self.reach(v, x_e).0;
                let (at_out, av) = self.reach(v, x_e + ctx.cd);
                at_in <= (ctx.ty - now) / f && at_out <= (ctx.ty + ctx.tar - now) / f && x_f >= f * self.b(av)
            }
        };
        ok.then_some(accelerate)
    }

    /// Lane-change check at the branch point, against the target lane.
    fn lane_change_ok(&self, vista: &Vista) -> bool {
        let Some(lc) = &vista.lane_change else { return false };
        let Some((x_a, va)) = self.arriving_reading(vista) else { return false };
        let v = vista.ego.speed;
        if !(v > 0.0) {
            return false;
        }
        let dt = self.env.dt;
        let x_e = lc.zone.entry.max(0.0);
        let x_f = lead_distance(&lc.front) - lc.zone.exit;
        match self.attitude {
            Attitude::Overcautious => false,
            Attitude::WorstCaseSafe => x_a >= va * x_e / v + self.b(va) + va * dt + GUARD && x_f >= self.front_guard(v),
            Attitude::Overoptimistic(f) => x_a >= f * (va * x_e / v + self.b(va)) && x_f >= f * self.b(v),
        }
    }
}

impl EgoPolicy for ReferencePolicy {
    fn decide(&mut self, tick: u64, vista: &Vista) -> Result<EgoDecision, PolicyFailure> {
        let v = vista.ego.speed;
        let guard = self.guard.get_or_insert_with(|| Guarded::new(self.env.profile.clone(), self.env.dt, v));
        guard.sync(v);

        let mut lane_change = false;
        let mut zone = vista.ego.zone;
        let mut front = vista.front.as_slice();
        if self.env.ctx.kind == VistaKind::LaneChange && !self.lane_decided {
            self.lane_decided = true;
            if self.lane_change_ok(vista) {
                let lc = vista.lane_change.as_ref().expect("checked by lane_change_ok");
                lane_change = true;
                zone = Some(lc.zone);
                front = lc.front.as_slice();
                self.progress = Some(KinematicCommand::Hold);
            }
        }

        if self.progress.is_none() {
            if let Some(z) = zone.filter(|z| z.entry >= -EPS) {
                if let Some(cmd) = self.progress_command(vista, z, tick) {
                    self.progress = Some(cmd);
                    if let Some(g) = self.guard.as_mut() {
                        g.braking = false;
                    }
                }
            }
        }

        let lead_gap = lead_distance(front) - STANDOFF;
        let (desired, gap) = match self.progress {
            Some(cmd) => (cmd, lead_gap),
            None => {
                let stop_line = zone.filter(|z| z.entry >= -EPS).map_or(f64::INFINITY, |z| z.entry);
                let gap = lead_gap.min(stop_line);
                let limit = max_caution_speed(&self.env.profile, gap.clamp(0.0, 1e4)).unwrap_or(0.0);
                (KinematicCommand::TrackSpeed { target: limit }, gap)
            }
        };
        let command = self.guard.as_mut().expect("initialized above").choose(desired, gap);
        Ok(EgoDecision { command, lane_change })
    }
}

/// Replays a fixed command list.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    commands: Vec<KinematicCommand>,
    lane_change: bool,
}

impl ScriptedPolicy {
    pub fn new(commands: Vec<KinematicCommand>, lane_change: bool) -> Self {
        ScriptedPolicy { commands, lane_change }
    }
}

impl EgoPolicy for ScriptedPolicy {
    fn decide(&mut self, tick: u64, _vista: &Vista) -> Result<EgoDecision, PolicyFailure> {
        let command = self.commands.get(tick as usize).copied().unwrap_or(KinematicCommand::BrakeToStop);
        Ok(EgoDecision { command, lane_change: self.lane_change && tick == 0 })
    }
}

/// Builds an in-process policy. External agents are opened by the bridge.
pub fn make_policy(kind: &PolicyKind, env: PolicyEnv) -> Option<Box<dyn EgoPolicy>> {
    Some(match kind {
        PolicyKind::WorstCaseSafe => Box::new(ReferencePolicy::worst_case_safe(env)),
        PolicyKind::Overcautious => Box::new(ReferencePolicy::overcautious(env)),
        PolicyKind::Overoptimistic { factor } => Box::new(ReferencePolicy::overoptimistic(env, *factor)),
        PolicyKind::Scripted { commands, lane_change } => Box::new(ScriptedPolicy::new(commands.clone(), *lane_change)),
        PolicyKind::External(_) => return None,
    })
}

/// The arriving vehicle: cruises at the limit behind whatever is ahead and
/// brakes to a stop while the ego occupies the zone, as long as it has not
/// entered the zone itself.
#[derive(Debug, Clone)]
pub struct ArrivingDriver {
    vl: f64,
    guard: Guarded,
    yielding: bool,
}

impl ArrivingDriver {
    pub fn new(profile: AdProfile, vl: f64, dt: f64) -> Self {
        ArrivingDriver { vl, guard: Guarded::new(profile, dt, vl), yielding: false }
    }

    pub fn decide(&mut self, vista: &Vista) -> KinematicCommand {
        self.guard.sync(vista.ego.speed);
        let before_zone = vista.ego.zone.is_some_and(|z| z.entry > EPS);
        let ego_inside = vista.arriving.iter().any(|o| {
            o.id == Some(crate::sim::VehicleRole::Ego) && o.distance < -EPS && o.clear_distance.is_some_and(|c| c > EPS)
        });
        if ego_inside && before_zone {
            self.yielding = true;
            return self.guard.apply(KinematicCommand::BrakeToStop);
        }
        if std::mem::take(&mut self.yielding) {
            self.guard.braking = false;
        }
        let gap = lead_distance(&vista.front) - STANDOFF;
        self.guard.choose(KinematicCommand::Accelerate { target: Some(self.vl) }, gap)
    }
}
