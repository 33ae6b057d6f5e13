//! Deterministic fixed-step execution of one test case.
//!
//! Each tick every moving vehicle receives its vista, built from the same
//! world snapshot, and returns a command. All vehicles are then advanced
//! with the dynamics step, the clock moves on, collisions are detected and
//! a snapshot is appended to the trace.

mod policy;
mod trace;
mod world;

pub use policy::{
    make_policy, ArrivingDriver, EgoDecision, EgoPolicy, PolicyEnv, PolicyFailure, PolicyKind, ReferencePolicy,
    ScriptedPolicy, GUARD, STANDOFF,
};
pub use trace::{Event, LightsSnapshot, Snapshot, Termination, Trace, TraceHeader, VehicleSnapshot};
pub use world::{init_scenario, LightSchedule, Sign, Vehicle, VehicleRole, WorldState};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::criticality::{CriticalityError, TestCase, VistaKind};
use crate::dynamics::{step, AdProfile, DynamicsError, KinematicCommand, MotionState};
use crate::metric_map::{MapError, MapLayout};
use crate::vista::{build_vista, Approach, VisibilityParams, VistaError};

/// Speed below which a vehicle counts as stopped.
pub const STOP_SPEED: f64 = 0.01;
/// Zone clearance after which a moving ego counts as through.
pub const CLEARANCE: f64 = 10.0;
/// Seconds of complete standstill after which a run is cut short.
pub const QUIESCENCE: f64 = 12.0;
const EPS: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Criticality(#[from] CriticalityError),
    #[error(transparent)]
    Vista(#[from] VistaError),
    #[error("agent session: {0}")]
    Session(String),
    #[error("malformed trace: {0}")]
    Trace(String),
}

fn default_dt() -> f64 {
    0.1
}
fn default_t_max() -> f64 {
    60.0
}
fn default_length() -> f64 {
    5.0
}
fn default_margin() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub case: TestCase,
    pub ego_profile: AdProfile,
    pub arriving_profile: AdProfile,
    pub policy: PolicyKind,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_length")]
    pub vehicle_length: f64,
    #[serde(default)]
    pub visibility: VisibilityParams,
    #[serde(default)]
    pub layout: MapLayout,
    /// Room left beyond the ego's braking distance before the parked
    /// inner-lane vehicle of a lane change.
    #[serde(default = "default_margin")]
    pub inner_obstacle_margin: f64,
}

impl ScenarioConfig {
    pub fn new(case: TestCase, ego_profile: AdProfile, arriving_profile: AdProfile, policy: PolicyKind) -> Self {
        ScenarioConfig {
            case,
            ego_profile,
            arriving_profile,
            policy,
            dt: default_dt(),
            t_max: default_t_max(),
            vehicle_length: default_length(),
            visibility: VisibilityParams::default(),
            layout: MapLayout::default(),
            inner_obstacle_margin: default_margin(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_max > self.dt && self.t_max.is_finite()) {
            return bad(format!("t_max must exceed dt, got {}", self.t_max));
        }
        if !(self.vehicle_length > 0.0) {
            return bad(format!("vehicle_length must be positive, got {}", self.vehicle_length));
        }
        if !(self.visibility.fd > 0.0 && self.visibility.ld > 0.0) {
            return bad("visibility distances must be positive".into());
        }
        if !(self.inner_obstacle_margin >= 0.0) {
            return bad("inner_obstacle_margin must be non-negative".into());
        }
        self.ego_profile.validate()?;
        self.arriving_profile.validate()?;
        let c = &self.case;
        c.context.validate()?;
        if !(c.v_e >= 0.0 && c.x_e >= 0.0 && c.x_f >= 0.0) {
            return bad("v_e, x_e and x_f must be non-negative".into());
        }
        match (c.context.kind.has_arriving(), c.x_a) {
            (true, None) => return bad(format!("{} cases need x_a", c.context.kind)),
            (false, Some(_)) => return bad(format!("{} cases take no x_a", c.context.kind)),
            (_, Some(x)) if !(x >= 0.0) => return bad(format!("x_a must be non-negative, got {x}")),
            _ => {}
        }
        if c.context.kind == VistaKind::LaneChange && !(c.v_e > 0.0) {
            return Err(CriticalityError::LaneChangeAtRest.into());
        }
        if let PolicyKind::Overoptimistic { factor } = self.policy {
            if !(factor > 0.0 && factor <= 1.0) {
                return bad(format!("overoptimistic factor must be in (0, 1], got {factor}"));
            }
        }
        if let PolicyKind::External(agent) = &self.policy {
            agent.validate()?;
        }
        Ok(())
    }

    pub fn policy_env(&self) -> PolicyEnv {
        PolicyEnv {
            ctx: self.case.context,
            profile: self.ego_profile.clone(),
            dt: self.dt,
            vehicle_length: self.vehicle_length,
        }
    }
}

fn command_is_valid(cmd: &KinematicCommand) -> bool {
    match *cmd {
        KinematicCommand::TrackSpeed { target } => target.is_finite() && target >= 0.0,
        KinematicCommand::Accelerate { target: Some(t) } => t.is_finite() && t >= 0.0,
        _ => true,
    }
}

/// Parameter range in `[0, 1]` during which a vehicle moving linearly from
/// `s0` to `s1` has the point `c` strictly inside its footprint `(s - l, s)`.
fn covering(s0: f64, s1: f64, c: f64, l: f64) -> Option<(f64, f64)> {
    let inside = |s: f64| s > c + EPS && s - l < c - EPS;
    let ds = s1 - s0;
    if ds.abs() < 1e-12 {
        return inside(s0).then_some((0.0, 1.0));
    }
    let t_a = (c + EPS - s0) / ds;
    let t_b = (c + l - EPS - s0) / ds;
    let (lo, hi) = (t_a.min(t_b).max(0.0), t_a.max(t_b).min(1.0));
    (hi > lo).then_some((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ZonePhase {
    Before,
    Inside,
    After,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    world: WorldState,
    policy: Box<dyn EgoPolicy>,
    arriving: Option<ArrivingDriver>,
    snapshots: Vec<Snapshot>,
    phases: BTreeMap<VehicleRole, ZonePhase>,
    still_since: Option<f64>,
    progressed: bool,
    done: Option<Termination>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig, policy: Box<dyn EgoPolicy>) -> Result<Self, SimError> {
        let world = init_scenario(&cfg)?;
        let arriving = world
            .vehicle(VehicleRole::Arriving)
            .map(|_| ArrivingDriver::new(cfg.arriving_profile.clone(), world.ctx.vl, cfg.dt));
        let phases = world.vehicles.iter().filter(|v| v.zone.is_some()).map(|v| (v.role, ZonePhase::Before)).collect();
        let first = Snapshot::capture(&world, &BTreeMap::new());
        Ok(Simulation {
            cfg,
            world,
            policy,
            arriving,
            snapshots: vec![first],
            phases,
            still_since: Some(0.0),
            progressed: false,
            done: None,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn is_done(&self) -> bool {
        self.done.is_some()
    }

    fn finish(&mut self, reason: Termination, extra: Option<trace::Event>) {
        let last = self.snapshots.last_mut().expect("at least the initial snapshot");
        last.events.extend(extra);
        last.events.push(Event::End { reason });
        self.done = Some(reason);
        self.policy.finish(match reason {
            Termination::Collision => "collision",
            Termination::SoftwareFailure => "software failure",
            Termination::Resolved => "resolved",
            Termination::Quiescent => "standstill",
            Termination::TimeLimit => "time limit",
        });
    }

    fn fail(&mut self, reason: String) {
        self.finish(Termination::SoftwareFailure, Some(Event::SoftwareFailure { reason }));
    }

    /// Advances the world by one tick.
    pub fn tick(&mut self) -> Result<(), SimError> {
        if self.done.is_some() {
            return Ok(());
        }
        let vis = self.cfg.visibility;
        let ego_vista = build_vista(&self.world, VehicleRole::Ego, &vis)?;
        let decision = match self.policy.decide(self.world.tick, &ego_vista) {
            Ok(d) => d,
            Err(f) => {
                self.fail(f.reason);
                return Ok(());
            }
        };
        if !command_is_valid(&decision.command) {
            self.fail(format!("invalid command {:?}", decision.command));
            return Ok(());
        }
        let arriving_cmd = match &mut self.arriving {
            Some(driver) => Some(driver.decide(&build_vista(&self.world, VehicleRole::Arriving, &vis)?)),
            None => None,
        };

        let mut events = Vec::new();
        if self.world.tick == 0 && decision.lane_change && self.world.ctx.kind == VistaKind::LaneChange {
            self.world.switch_ego_lane()?;
            events.push(Event::LaneChange);
        }
        if !self.progressed && matches!(decision.command, KinematicCommand::Accelerate { .. }) {
            self.progressed = true;
            events.push(Event::Progress);
        }

        let before: Vec<f64> = self.world.vehicles.iter().map(|v| v.s).collect();
        let prev_lights = self.snapshots.last().and_then(|s| s.lights);
        let mut modes = BTreeMap::new();
        let dt = self.cfg.dt;
        for v in &mut self.world.vehicles {
            let cmd = match v.role {
                VehicleRole::Ego => decision.command,
                VehicleRole::Arriving => arriving_cmd.unwrap_or(KinematicCommand::Hold),
                _ => continue,
            };
            let profile = v.profile.as_ref().expect("moving vehicles carry a profile");
            let (next, out) = step(profile, &v.motion, &cmd, dt);
            let end = v.route.length();
            if v.s + out.dx >= end {
                v.s = end;
                v.motion = MotionState::new(0.0);
            } else {
                v.s += out.dx;
                v.motion = next;
            }
            modes.insert(v.role, cmd.mode_name().to_string());
        }
        self.world.tick += 1;
        self.world.time = self.world.tick as f64 * dt;

        for v in &self.world.vehicles {
            let (Some((entry, exit)), Some(phase)) = (v.zone, self.phases.get_mut(&v.role)) else { continue };
            if *phase == ZonePhase::Before && v.s > entry + EPS {
                *phase = ZonePhase::Inside;
                events.push(Event::ZoneEntry { vehicle: v.role });
            }
            if *phase == ZonePhase::Inside && v.tail() >= exit - EPS {
                *phase = ZonePhase::After;
                events.push(Event::ZoneExit { vehicle: v.role });
            }
        }
        let mut snap = Snapshot::capture(&self.world, &modes);
        if let (Some(prev), Some(now)) = (prev_lights, snap.lights) {
            if prev.ego != now.ego {
                events.push(Event::LightChange { approach: Approach::Ego, color: now.ego });
            }
            if prev.side != now.side {
                events.push(Event::LightChange { approach: Approach::Side, color: now.side });
            }
        }
        let collision = self.detect_collision(&before);
        snap.events = events;
        self.snapshots.push(snap);

        if let Some(c) = collision {
            self.finish(Termination::Collision, Some(c));
        } else if self.resolved() {
            self.finish(Termination::Resolved, None);
        } else if self.quiescent() {
            self.finish(Termination::Quiescent, None);
        } else if self.world.time >= self.cfg.t_max - 1e-9 {
            self.finish(Termination::TimeLimit, None);
        }
        Ok(())
    }

    fn detect_collision(&self, before: &[f64]) -> Option<Event> {
        let vs = &self.world.vehicles;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                let (a, b) = (&vs[i], &vs[j]);
                if !a.role.is_participant() && !b.role.is_participant() {
                    continue;
                }
                let pa = a.route.interval_pieces(a.tail(), a.s);
                let pb = b.route.interval_pieces(b.tail(), b.s);
                let overlap = pa
                    .iter()
                    .any(|x| pb.iter().any(|y| x.segment == y.segment && x.to.min(y.to) - x.from.max(y.from) > EPS));
                if !overlap {
                    continue;
                }
                let front_in = |v: &Vehicle, pieces: &[crate::metric_map::Leg]| {
                    let p = v.position();
                    pieces.iter().any(|l| l.segment == p.segment && p.offset >= l.from - EPS && p.offset <= l.to + EPS)
                };
                let (a_in, b_in) = (front_in(a, &pb), front_in(b, &pa));
                let a_fault = match (a_in, b_in) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => a.motion.speed >= b.motion.speed,
                };
                let (at_fault, other) = if a_fault { (a, b) } else { (b, a) };
                let p = at_fault.position();
                return Some(Event::Collision {
                    at_fault: at_fault.role,
                    other: other.role,
                    geometry: format!("footprint overlap on {} at offset {:.3}", p.segment, p.offset),
                });
            }
        }

        let ego_idx = vs.iter().position(|v| v.role == VehicleRole::Ego)?;
        let arr_idx = vs.iter().position(|v| v.role == VehicleRole::Arriving)?;
        let (ego, arr) = (&vs[ego_idx], &vs[arr_idx]);
        for cp in &self.world.map.conflict_points {
            let (Some(ce), Some(ca)) = (ego.route.coord_of(&cp.ego), arr.route.coord_of(&cp.arriving)) else {
                continue;
            };
            let (e0, a0) = (before[ego_idx], before[arr_idx]);
            let (Some(ie), Some(ia)) = (covering(e0, ego.s, ce, ego.length), covering(a0, arr.s, ca, arr.length))
            else {
                continue;
            };
            let (lo, hi) = (ie.0.max(ia.0), ie.1.min(ia.1));
            if hi - lo <= 1e-9 {
                continue;
            }
            let over_e = e0 + (ego.s - e0) * lo - ce;
            let over_a = a0 + (arr.s - a0) * lo - ca;
            let (at_fault, other) = if over_e <= over_a {
                (VehicleRole::Ego, VehicleRole::Arriving)
            } else {
                (VehicleRole::Arriving, VehicleRole::Ego)
            };
            return Some(Event::Collision {
                at_fault,
                other,
                geometry: format!("conflict point {}/{}", cp.ego.segment, cp.arriving.segment),
            });
        }
        None
    }

    fn stopped(v: &Vehicle) -> bool {
        v.motion.speed < STOP_SPEED
    }

    fn resolved(&self) -> bool {
        let w = &self.world;
        let Some(ego) = w.vehicle(VehicleRole::Ego) else { return false };
        let ego_done = match ego.zone {
            Some((_, exit)) => ego.tail() >= exit - EPS && (Self::stopped(ego) || ego.tail() - exit >= CLEARANCE),
            None => false,
        };
        let arriving_done = match w.vehicle(VehicleRole::Arriving) {
            None => true,
            Some(a) => {
                let past = a.zone.is_some_and(|(_, exit)| a.tail() >= exit - EPS);
                let blocked_ahead = w.vehicles.iter().any(|o| {
                    o.role != a.role
                        && o.position() != a.position()
                        && a.route.coord_of(&o.position()).is_some_and(|c| c > a.s)
                });
                past && (Self::stopped(a) || !blocked_ahead)
            }
        };
        ego_done && arriving_done
    }

    fn quiescent(&mut self) -> bool {
        let all_still = self.world.vehicles.iter().all(Self::stopped);
        if !all_still {
            self.still_since = None;
            return false;
        }
        let since = *self.still_since.get_or_insert(self.world.time);
        let settled = self.world.lights.map_or(true, |l| self.world.time >= l.settled_at() - 1e-9);
        settled && self.world.time - since >= QUIESCENCE - 1e-9
    }

    /// Runs to termination and returns the trace.
    pub fn run(mut self) -> Result<Trace, SimError> {
        while self.done.is_none() {
            self.tick()?;
        }
        Ok(self.into_trace())
    }

    fn into_trace(self) -> Trace {
        let w = &self.world;
        let routes =
            w.vehicles.iter().map(|v| (v.role, v.route.legs().iter().map(|l| l.segment.clone()).collect())).collect();
        let zones = w.vehicles.iter().filter_map(|v| v.zone.map(|(a, b)| (v.role, [a, b]))).collect();
        let conflict_points = match (w.vehicle(VehicleRole::Ego), w.vehicle(VehicleRole::Arriving)) {
            (Some(e), Some(a)) => w
                .map
                .conflict_points
                .iter()
                .filter_map(|cp| Some([e.route.coord_of(&cp.ego)?, a.route.coord_of(&cp.arriving)?]))
                .collect(),
            _ => Vec::new(),
        };
        let header = TraceHeader {
            kind: w.ctx.kind,
            dt: self.cfg.dt,
            t_max: self.cfg.t_max,
            vehicle_length: self.cfg.vehicle_length,
            policy: self.cfg.policy.name().to_string(),
            case: self.cfg.case.clone(),
            routes,
            zones,
            conflict_points,
            lights: w.lights,
        };
        Trace { header, snapshots: self.snapshots }
    }
}

/// Runs `cfg` with the given ego policy.
pub fn run_with(cfg: ScenarioConfig, policy: Box<dyn EgoPolicy>) -> Result<Trace, SimError> {
    Simulation::new(cfg, policy)?.run()
}

/// Runs `cfg` with its configured policy. External agents are connected
/// through the bridge for the duration of the run.
pub fn run(cfg: &ScenarioConfig) -> Result<Trace, SimError> {
    cfg.validate()?;
    let policy = match &cfg.policy {
        PolicyKind::External(agent) => Box::new(crate::bridge::connect(agent, cfg)?) as Box<dyn EgoPolicy>,
        kind => make_policy(kind, cfg.policy_env()).expect("in-process policy"),
    };
    run_with(cfg.clone(), policy)
}
