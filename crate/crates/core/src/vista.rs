//! What each vehicle sees: its own state, the obstacles ahead on its route,
//! and the vehicles approaching its critical zone.
//!
//! Distances are measured along routes. For an obstacle ahead, the
//! distance runs from the observer's front to the obstacle's rear (or to
//! the point for signs). For an arriving vehicle it runs from that
//! vehicle's front to its own zone entry. When nothing real is visible,
//! fictitious entries at the visibility limits stand in for the worst case.

use serde::{Deserialize, Serialize};

use crate::metric_map::SegmentId;
use crate::sim::{VehicleRole, WorldState};

const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityParams {
    /// Frontal visibility along the route.
    pub fd: f64,
    /// Lateral visibility along each entrance to the junction.
    pub ld: f64,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        VisibilityParams { fd: 320.0, ld: 320.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Vehicle,
    SpeedLimitSign,
    YieldSign,
    StopSign,
    TrafficLight,
    FictitiousFront,
    FictitiousArriving,
}

impl ObstacleKind {
    pub fn is_vehicle(&self) -> bool {
        matches!(self, ObstacleKind::Vehicle | ObstacleKind::FictitiousFront | ObstacleKind::FictitiousArriving)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightColor {
    Green,
    Yellow,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub kind: ObstacleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<VehicleRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<SegmentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    pub distance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    /// Arriving entries only: distance until the vehicle's rear has left
    /// its zone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clear_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<LightColor>,
    /// Posted value for speed-limit signs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl ObstacleState {
    fn point(kind: ObstacleKind, distance: f64) -> Self {
        ObstacleState {
            kind,
            id: None,
            segment: None,
            offset: None,
            distance,
            speed: None,
            clear_distance: None,
            color: None,
            value: None,
        }
    }
}

/// Distances from the observer's front to its zone entry and exit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneView {
    pub entry: f64,
    pub exit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoView {
    pub segment: SegmentId,
    pub offset: f64,
    pub speed: f64,
    pub route: Vec<SegmentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<ZoneView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Ego,
    Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightView {
    pub approach: Approach,
    pub color: LightColor,
    /// Distance to the stop line, for lights on the observer's route.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

/// The target lane as seen from the branch point of a lane change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeView {
    pub zone: ZoneView,
    pub front: Vec<ObstacleState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vista {
    pub ego: EgoView,
    pub front: Vec<ObstacleState>,
    pub arriving: Vec<ObstacleState>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lights: Vec<LightView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_change: Option<LaneChangeView>,
}

impl Vista {
    /// Nearest vehicle ahead (real or fictitious).
    pub fn lead(&self) -> Option<&ObstacleState> {
        self.front.iter().find(|o| o.kind.is_vehicle())
    }

    /// Nearest arriving vehicle that has not yet cleared its zone.
    pub fn nearest_arriving(&self) -> Option<&ObstacleState> {
        self.arriving.iter().min_by(|a, b| a.distance.total_cmp(&b.distance))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VistaError {
    #[error("no vehicle {0:?} in the world")]
    UnknownVehicle(VehicleRole),
    #[error("vehicle {0:?} is off its route")]
    OffRoute(VehicleRole),
}

fn front_obstacles(
    world: &WorldState,
    observer: VehicleRole,
    route: &crate::metric_map::Route,
    s: f64,
    fd: f64,
) -> Vec<ObstacleState> {
    let mut front = Vec::new();
    for other in world.vehicles.iter().filter(|v| v.role != observer) {
        let Ok(pos) = other.route.position_at(other.s) else { continue };
        let Some(c) = route.coord_of(&pos) else { continue };
        if c <= s + EPS {
            continue;
        }
        front.push(ObstacleState {
            kind: ObstacleKind::Vehicle,
            id: Some(other.role),
            segment: Some(pos.segment.clone()),
            offset: Some(pos.offset),
            distance: c - other.length - s,
            speed: Some(other.motion.speed),
            clear_distance: None,
            color: None,
            value: None,
        });
    }
    for sign in world.signs.iter().filter(|g| g.governs == observer) {
        let Some(c) = route.coord_of(&sign.position) else { continue };
        if c < s - EPS {
            continue;
        }
        let mut o = ObstacleState::point(sign.kind, c - s);
        o.segment = Some(sign.position.segment.clone());
        o.offset = Some(sign.position.offset);
        o.color = sign.approach.and_then(|a| world.light_color(a));
        front.push(o);
    }
    front.retain(|o| o.distance < fd);
    front.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    front.push(ObstacleState { speed: Some(0.0), ..ObstacleState::point(ObstacleKind::FictitiousFront, fd) });
    front
}

/// Builds the vista of `observer` in `world`.
pub fn build_vista(world: &WorldState, observer: VehicleRole, vis: &VisibilityParams) -> Result<Vista, VistaError> {
    let me = world.vehicle(observer).ok_or(VistaError::UnknownVehicle(observer))?;
    let pos = me.route.position_at(me.s).map_err(|_| VistaError::OffRoute(observer))?;
    let ego = EgoView {
        segment: pos.segment.clone(),
        offset: pos.offset,
        speed: me.motion.speed,
        route: me.route.legs().iter().map(|l| l.segment.clone()).collect(),
        zone: me.zone.map(|(entry, exit)| ZoneView { entry: entry - me.s, exit: exit - me.s }),
    };
    let front = front_obstacles(world, observer, &me.route, me.s, vis.fd);

    let mut arriving = Vec::new();
    for other in world.vehicles.iter().filter(|v| v.role != observer && v.role.is_participant()) {
        let Some((entry, exit)) = other.zone else { continue };
        let distance = entry - other.s;
        let clear_distance = exit + other.length - other.s;
        if distance > vis.ld || clear_distance <= EPS {
            continue;
        }
        let Ok(p) = other.route.position_at(other.s) else { continue };
        arriving.push(ObstacleState {
            kind: ObstacleKind::Vehicle,
            id: Some(other.role),
            segment: Some(p.segment),
            offset: Some(p.offset),
            distance,
            speed: Some(other.motion.speed),
            clear_distance: Some(clear_distance),
            color: None,
            value: None,
        });
    }
    if arriving.is_empty() {
        arriving.push(ObstacleState {
            speed: Some(world.ctx.vl),
            clear_distance: Some(vis.ld + world.ctx.cd + world.vehicle_length),
            ..ObstacleState::point(ObstacleKind::FictitiousArriving, vis.ld)
        });
    }

    let mut lights = Vec::new();
    for sign in world.signs.iter().filter(|g| g.kind == ObstacleKind::TrafficLight) {
        let Some(approach) = sign.approach else { continue };
        let Some(color) = world.light_color(approach) else { continue };
        let distance =
            if sign.governs == observer { me.route.coord_of(&sign.position).map(|c| c - me.s) } else { None };
        lights.push(LightView { approach, color, distance });
    }

    let lane_change = match (&world.map.routes.ego_lane_change, observer, me.switched_route) {
        (Some(alt), VehicleRole::Ego, false) => alt.coord_of(&pos).and_then(|s_alt| {
            let (entry, exit) = world.map.ego_zone_on(alt)?;
            Some(LaneChangeView {
                zone: ZoneView { entry: entry - s_alt, exit: exit - s_alt },
                front: front_obstacles(world, observer, alt, s_alt, vis.fd),
            })
        }),
        _ => None,
    };

    Ok(Vista { ego, front, arriving, lights, lane_change })
}

/// Drops everything in front beyond the first vehicle, keeping a leading
/// sign or light together with the first vehicle after it.
pub fn simplify(v: &Vista) -> Vista {
    let mut out = v.clone();
    out.front = simplify_front(&v.front);
    if let Some(lc) = &mut out.lane_change {
        lc.front = simplify_front(&lc.front);
    }
    out
}

fn simplify_front(front: &[ObstacleState]) -> Vec<ObstacleState> {
    match front.first() {
        None => Vec::new(),
        Some(first) if first.kind.is_vehicle() => vec![first.clone()],
        Some(first) => {
            let mut kept = vec![first.clone()];
            if let Some(next) = front[1..].iter().find(|o| o.kind.is_vehicle()) {
                kept.push(next.clone());
            }
            kept
        }
    }
}
