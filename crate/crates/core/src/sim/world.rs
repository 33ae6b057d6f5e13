use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::{ScenarioConfig, SimError};
use crate::criticality::{VistaContext, VistaKind};
use crate::dynamics::{AdProfile, MotionState};
use crate::metric_map::{build_context_map, ContextMap, Landmark, Position, Route};
use crate::vista::{Approach, LightColor, ObstacleKind};

const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleRole {
    Ego,
    Arriving,
    Front,
    /// Stationary vehicle on the inner lane of a lane change.
    InnerObstacle,
}

impl VehicleRole {
    /// Ego and arriving vehicles compete for the critical zone; the others
    /// are parked.
    pub fn is_participant(&self) -> bool {
        matches!(self, VehicleRole::Ego | VehicleRole::Arriving)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            VehicleRole::Ego => "ego",
            VehicleRole::Arriving => "arriving",
            VehicleRole::Front => "front",
            VehicleRole::InnerObstacle => "inner_obstacle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub role: VehicleRole,
    pub route: Route,
    /// Route coordinate of the front end.
    pub s: f64,
    pub motion: MotionState,
    pub length: f64,
    /// Zone entry and exit in route coordinates.
    pub zone: Option<(f64, f64)>,
    pub switched_route: bool,
    pub profile: Option<AdProfile>,
}

impl Vehicle {
    pub fn position(&self) -> Position {
        self.route.position_at(self.s).expect("vehicles stay on their routes")
    }

    pub fn tail(&self) -> f64 {
        self.s - self.length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sign {
    pub kind: ObstacleKind,
    pub position: Position,
    pub governs: VehicleRole,
    pub approach: Option<Approach>,
}

/// Fixed phase plan of a crossing-light run: the ego light turns yellow one
/// tick in, red `ty` later, and the side light turns green after a further
/// all-red interval `tar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightSchedule {
    pub yellow_at: f64,
    pub red_at: f64,
    pub side_green_at: f64,
}

impl LightSchedule {
    pub fn new(ctx: &VistaContext, dt: f64) -> Self {
        LightSchedule { yellow_at: dt, red_at: dt + ctx.ty, side_green_at: dt + ctx.ty + ctx.tar }
    }

    pub fn color(&self, approach: Approach, time: f64) -> LightColor {
        let reached = |at: f64| time >= at - TIME_TOL;
        match approach {
            Approach::Ego if reached(self.red_at) => LightColor::Red,
            Approach::Ego if reached(self.yellow_at) => LightColor::Yellow,
            Approach::Ego => LightColor::Green,
            Approach::Side if reached(self.side_green_at) => LightColor::Green,
            Approach::Side => LightColor::Red,
        }
    }

    /// Time of the last scheduled change.
    pub fn settled_at(&self) -> f64 {
        self.side_green_at
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub tick: u64,
    pub time: f64,
    pub dt: f64,
    pub vehicles: Vec<Vehicle>,
    pub signs: Vec<Sign>,
    pub lights: Option<LightSchedule>,
    pub ctx: VistaContext,
    pub vehicle_length: f64,
    pub map: Arc<ContextMap>,
}

impl WorldState {
    pub fn vehicle(&self, role: VehicleRole) -> Option<&Vehicle> {
        self.vehicles.iter().find(|v| v.role == role)
    }

    pub fn vehicle_mut(&mut self, role: VehicleRole) -> Option<&mut Vehicle> {
        self.vehicles.iter_mut().find(|v| v.role == role)
    }

    pub fn light_color(&self, approach: Approach) -> Option<LightColor> {
        self.lights.map(|l| l.color(approach, self.time))
    }

    /// Replaces the ego route with the lane-change route.
    pub fn switch_ego_lane(&mut self) -> Result<(), SimError> {
        let alt = self
            .map
            .routes
            .ego_lane_change
            .clone()
            .ok_or_else(|| SimError::Config("this context has no lane-change route".into()))?;
        let zone = self.map.ego_zone_on(&alt);
        let ego = self.vehicle_mut(VehicleRole::Ego).expect("ego exists");
        let pos = ego.route.position_at(ego.s)?;
        let s = alt.coord_of(&pos).ok_or_else(|| SimError::Config("ego is past the lane branch".into()))?;
        ego.route = alt;
        ego.s = s;
        ego.zone = zone;
        ego.switched_route = true;
        Ok(())
    }
}

fn landmark_coord(map: &ContextMap, route: &Route, l: Landmark) -> Result<f64, SimError> {
    map.landmark(l)
        .and_then(|p| route.coord_of(p))
        .ok_or_else(|| SimError::Config(format!("landmark {l:?} is not on the route")))
}

fn fit(route: &Route, s: f64, what: &str) -> Result<f64, SimError> {
    if s < 0.0 || s > route.length() {
        return Err(SimError::Config(format!(
            "{what} at route coordinate {s:.3} does not fit a route of length {:.3}",
            route.length()
        )));
    }
    Ok(s)
}

fn parked(role: VehicleRole, route: Route, s: f64, length: f64) -> Vehicle {
    Vehicle { role, route, s, motion: MotionState::new(0.0), length, zone: None, switched_route: false, profile: None }
}

/// Places the vehicles of `cfg.case` on a freshly built map.
pub fn init_scenario(cfg: &ScenarioConfig) -> Result<WorldState, SimError> {
    cfg.validate()?;
    let case = &cfg.case;
    let ctx = case.context;
    let map = Arc::new(build_context_map(&ctx, cfg.layout)?);
    let l = cfg.vehicle_length;

    let ego_route = map.routes.ego.clone();
    let ego_zone = map.ego_zone_on(&ego_route);
    // The lane-change distance x_e runs along the connector; the inner lane
    // shares the approach, so the spawn coordinate is the same on both routes.
    let ego_s = match (&map.routes.ego_lane_change, ctx.kind) {
        (Some(alt), VistaKind::LaneChange) => {
            let (entry, _) = map.ego_zone_on(alt).ok_or_else(|| SimError::Config("lane-change zone missing".into()))?;
            entry - case.x_e
        }
        _ => ego_zone.ok_or_else(|| SimError::Config("ego route misses the zone".into()))?.0 - case.x_e,
    };
    let ego = Vehicle {
        role: VehicleRole::Ego,
        s: fit(&ego_route, ego_s, "ego")?,
        route: ego_route.clone(),
        motion: MotionState::new(case.v_e),
        length: l,
        zone: ego_zone,
        switched_route: false,
        profile: Some(cfg.ego_profile.clone()),
    };
    let mut vehicles = vec![ego];

    if let Some(x_a) = case.x_a {
        let route = map.routes.arriving.clone();
        let (entry, exit) = map.arriving_zone().ok_or_else(|| SimError::Config("arriving zone missing".into()))?;
        vehicles.push(Vehicle {
            role: VehicleRole::Arriving,
            s: fit(&route, entry - x_a, "arriving vehicle")?,
            route,
            motion: MotionState::new(ctx.vl),
            length: l,
            zone: Some((entry, exit)),
            switched_route: false,
            profile: Some(cfg.arriving_profile.clone()),
        });
    }

    let front_route = map.routes.ego_lane_change.clone().unwrap_or_else(|| ego_route.clone());
    let anchor = landmark_coord(&map, &front_route, Landmark::FrontAnchor)?;
    let front_s = fit(&front_route, anchor + case.x_f + l, "front vehicle")?;
    vehicles.push(parked(VehicleRole::Front, front_route, front_s, l));

    if ctx.kind == VistaKind::LaneChange {
        let branch = landmark_coord(&map, &ego_route, Landmark::LaneBranch)?;
        let rear = branch + cfg.ego_profile.braking_distance(case.v_e)? + cfg.inner_obstacle_margin;
        let s = fit(&ego_route, rear + l, "inner-lane obstacle")?;
        vehicles.push(parked(VehicleRole::InnerObstacle, ego_route.clone(), s, l));
    }

    let mut signs = Vec::new();
    let sign_at = |l: Landmark| map.landmark(l).cloned();
    match ctx.kind {
        VistaKind::Merging | VistaKind::CrossingYield => {
            if let Some(position) = sign_at(Landmark::YieldSign) {
                signs.push(Sign { kind: ObstacleKind::YieldSign, position, governs: VehicleRole::Ego, approach: None });
            }
        }
        VistaKind::CrossingLight => {
            for (l, governs, approach) in [
                (Landmark::EgoLight, VehicleRole::Ego, Approach::Ego),
                (Landmark::SideLight, VehicleRole::Arriving, Approach::Side),
            ] {
                let position = sign_at(l).ok_or_else(|| SimError::Config(format!("landmark {l:?} missing")))?;
                signs.push(Sign { kind: ObstacleKind::TrafficLight, position, governs, approach: Some(approach) });
            }
        }
        VistaKind::LaneChange => {}
    }
    let lights = (ctx.kind == VistaKind::CrossingLight).then(|| LightSchedule::new(&ctx, cfg.dt));

    Ok(WorldState { tick: 0, time: 0.0, dt: cfg.dt, vehicles, signs, lights, ctx, vehicle_length: l, map })
}
