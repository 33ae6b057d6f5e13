//! Parametric maps for the four test contexts.
//!
//! Every map is laid out so the critical zone sits near the origin, with
//! long straight approaches on each entrance and a long exit road. Distances
//! used by test cases are measured from named landmarks on these maps.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::graph::MetricGraph;
use super::route::{Leg, Position, Route};
use super::segment::{Point, Segment, SegmentId};
use super::MapError;
use crate::criticality::{VistaContext, VistaKind, XeRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Landmark {
    /// Where the ego route joins the arriving route (merging, lane change).
    MergePoint,
    ZoneEntry,
    ZoneExit,
    ArrivingZoneEntry,
    ArrivingZoneExit,
    YieldSign,
    EgoLight,
    SideLight,
    /// Front of the ego vehicle at spawn when `x_e = 0`.
    EgoAnchor,
    ArrivingAnchor,
    /// Position from which the front vehicle distance `x_f` is measured.
    FrontAnchor,
    /// Lane-change branch point on the inner lane.
    LaneBranch,
}

/// Two positions on different segments that denote the same physical point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictPoint {
    pub ego: Position,
    pub arriving: Position,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaneInfo {
    pub inner: Vec<SegmentId>,
    pub outer: Vec<SegmentId>,
    pub connector: SegmentId,
    pub merge_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextRoutes {
    pub ego: Route,
    /// Alternative ego route through the lane-change connector.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ego_lane_change: Option<Route>,
    pub arriving: Route,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapLayout {
    /// Length of every approach road before the critical zone.
    pub approach: f64,
    /// Length of the exit roads after the critical zone.
    pub exit: f64,
}

impl Default for MapLayout {
    fn default() -> Self {
        MapLayout { approach: 420.0, exit: 420.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextMap {
    pub kind: VistaKind,
    pub critical_distance: f64,
    pub graph: MetricGraph,
    pub landmarks: BTreeMap<Landmark, Position>,
    pub conflict_points: Vec<ConflictPoint>,
    pub routes: ContextRoutes,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lanes: Option<LaneInfo>,
}

impl ContextMap {
    pub fn landmark(&self, l: Landmark) -> Option<&Position> {
        self.landmarks.get(&l)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("context maps serialize")
    }

    /// Ego route coordinates of zone entry and exit on `route`, if the route
    /// passes through the zone.
    pub fn ego_zone_on(&self, route: &Route) -> Option<(f64, f64)> {
        let entry = route.coord_of(self.landmarks.get(&Landmark::ZoneEntry)?)?;
        let exit = route.coord_of(self.landmarks.get(&Landmark::ZoneExit)?)?;
        Some((entry, exit))
    }

    pub fn arriving_zone(&self) -> Option<(f64, f64)> {
        let r = &self.routes.arriving;
        let entry = r.coord_of(self.landmarks.get(&Landmark::ArrivingZoneEntry)?)?;
        let exit = r.coord_of(self.landmarks.get(&Landmark::ArrivingZoneExit)?)?;
        Some((entry, exit))
    }
}

fn route_of(graph: &MetricGraph, ids: &[&str]) -> Route {
    Route::new(
        ids.iter()
            .map(|id| {
                let sid = SegmentId::from(*id);
                let len = graph.segment_length(&sid).expect("route segments exist");
                Leg::new(sid, 0.0, len)
            })
            .collect(),
    )
    .expect("builder routes are non-empty")
}

/// Builds the map for `ctx.kind`.
pub fn build_context_map(ctx: &VistaContext, layout: MapLayout) -> Result<ContextMap, MapError> {
    if !(ctx.vl > 0.0) {
        return Err(MapError::Config("speed limit must be positive".into()));
    }
    if !(layout.approach > 0.0 && layout.exit > 0.0) {
        return Err(MapError::Config("approach and exit lengths must be positive".into()));
    }
    match ctx.kind {
        VistaKind::Merging => {
            if ctx.cd != 0.0 {
                return Err(MapError::Config("merging uses a critical distance of 0".into()));
            }
            Ok(merging(layout))
        }
        VistaKind::LaneChange => {
            if ctx.cd != 0.0 {
                return Err(MapError::Config("lane change uses a critical distance of 0".into()));
            }
            match ctx.x_e_rule {
                XeRule::Fixed(d) if d > 0.0 => Ok(lane_change(layout, d)),
                _ => Err(MapError::Config("lane change needs a fixed positive travel distance".into())),
            }
        }
        VistaKind::CrossingYield | VistaKind::CrossingLight => {
            if !(ctx.cd > 0.0) {
                return Err(MapError::Config("crossings need a positive critical distance".into()));
            }
            Ok(crossing(ctx.kind, ctx.cd, layout))
        }
    }
}

fn merging(layout: MapLayout) -> ContextMap {
    let m = Point::new(0.0, 0.0);
    let angle = std::f64::consts::PI / 6.0;
    let ramp_start = Point::new(-layout.approach * angle.cos(), -layout.approach * angle.sin());
    let mut g = MetricGraph::new();
    g.add_edge("ramp_start", Segment::line("ramp", ramp_start, m), "merge", false).unwrap();
    g.add_edge("main_start", Segment::line("main_up", Point::new(-layout.approach, 0.0), m), "merge", false).unwrap();
    g.add_edge("merge", Segment::line("main_down", m, Point::new(layout.exit, 0.0)), "main_end", false).unwrap();

    let merge = Position::new("main_down", 0.0);
    let landmarks = BTreeMap::from([
        (Landmark::MergePoint, merge.clone()),
        (Landmark::ZoneEntry, merge.clone()),
        (Landmark::ZoneExit, merge.clone()),
        (Landmark::ArrivingZoneEntry, merge.clone()),
        (Landmark::ArrivingZoneExit, merge.clone()),
        (Landmark::YieldSign, merge.clone()),
        (Landmark::EgoAnchor, merge.clone()),
        (Landmark::ArrivingAnchor, merge.clone()),
        (Landmark::FrontAnchor, merge),
    ]);
    let routes = ContextRoutes {
        ego: route_of(&g, &["ramp", "main_down"]),
        ego_lane_change: None,
        arriving: route_of(&g, &["main_up", "main_down"]),
    };
    ContextMap {
        kind: VistaKind::Merging,
        critical_distance: 0.0,
        graph: g,
        landmarks,
        conflict_points: Vec::new(),
        routes,
        lanes: None,
    }
}

fn lane_change(layout: MapLayout, travel: f64) -> ContextMap {
    let lateral = 3.5_f64.min(travel * 0.5);
    let branch = Point::new(0.0, 0.0);
    let merge = Point::new((travel * travel - lateral * lateral).sqrt(), lateral);
    let mut g = MetricGraph::new();
    g.add_edge(
        "inner_start",
        Segment::line("inner_approach", Point::new(-layout.approach, 0.0), branch),
        "branch",
        false,
    )
    .unwrap();
    g.add_edge("branch", Segment::line("inner", branch, Point::new(layout.exit, 0.0)), "inner_end", false).unwrap();
    g.add_edge("branch", Segment::line("connector", branch, merge), "merge", true).unwrap();
    g.add_edge(
        "outer_start",
        Segment::line("outer_approach", Point::new(merge.x - layout.approach, lateral), merge),
        "merge",
        false,
    )
    .unwrap();
    g.add_edge("merge", Segment::line("outer", merge, Point::new(merge.x + layout.exit, lateral)), "outer_end", false)
        .unwrap();

    let merge_pos = Position::new("outer", 0.0);
    let branch_pos = Position::new("inner", 0.0);
    let landmarks = BTreeMap::from([
        (Landmark::MergePoint, merge_pos.clone()),
        (Landmark::ZoneEntry, merge_pos.clone()),
        (Landmark::ZoneExit, merge_pos.clone()),
        (Landmark::ArrivingZoneEntry, merge_pos.clone()),
        (Landmark::ArrivingZoneExit, merge_pos.clone()),
        (Landmark::EgoAnchor, branch_pos.clone()),
        (Landmark::LaneBranch, branch_pos),
        (Landmark::ArrivingAnchor, merge_pos.clone()),
        (Landmark::FrontAnchor, merge_pos),
    ]);
    let routes = ContextRoutes {
        ego: route_of(&g, &["inner_approach", "inner"]),
        ego_lane_change: Some(route_of(&g, &["inner_approach", "connector", "outer"])),
        arriving: route_of(&g, &["outer_approach", "outer"]),
    };
    ContextMap {
        kind: VistaKind::LaneChange,
        critical_distance: 0.0,
        graph: g,
        landmarks,
        conflict_points: Vec::new(),
        routes,
        lanes: Some(LaneInfo {
            inner: vec!["inner_approach".into(), "inner".into()],
            outer: vec!["outer_approach".into(), "outer".into()],
            connector: "connector".into(),
            merge_distance: travel,
        }),
    }
}

fn crossing(kind: VistaKind, cd: f64, layout: MapLayout) -> ContextMap {
    let h = cd / 2.0;
    let c = Point::new(0.0, 0.0);
    let mut g = MetricGraph::new();
    let ego_pts = [
        Point::new(-h - layout.approach, 0.0),
        Point::new(-h, 0.0),
        c,
        Point::new(h, 0.0),
        Point::new(h + layout.exit, 0.0),
    ];
    let side_pts = [
        Point::new(0.0, -h - layout.approach),
        Point::new(0.0, -h),
        c,
        Point::new(0.0, h),
        Point::new(0.0, h + layout.exit),
    ];
    let chain = [("approach", false), ("zone_in", true), ("zone_out", true), ("exit", false)];
    for (prefix, pts) in [("ego", &ego_pts), ("side", &side_pts)] {
        let verts = [
            format!("{prefix}_start"),
            format!("{prefix}_entry"),
            "conflict".to_string(),
            format!("{prefix}_exit"),
            format!("{prefix}_end"),
        ];
        for (i, (name, internal)) in chain.iter().enumerate() {
            let seg = Segment::line(format!("{prefix}_{name}").as_str(), pts[i], pts[i + 1]);
            g.add_edge(verts[i].as_str(), seg, verts[i + 1].as_str(), *internal).unwrap();
        }
    }

    let entry = Position::new("ego_zone_in", 0.0);
    let side_entry = Position::new("side_zone_in", 0.0);
    let mut landmarks = BTreeMap::from([
        (Landmark::ZoneEntry, entry.clone()),
        (Landmark::ZoneExit, Position::new("ego_exit", 0.0)),
        (Landmark::ArrivingZoneEntry, side_entry.clone()),
        (Landmark::ArrivingZoneExit, Position::new("side_exit", 0.0)),
        (Landmark::EgoAnchor, entry.clone()),
        (Landmark::ArrivingAnchor, side_entry.clone()),
        (Landmark::FrontAnchor, Position::new("ego_exit", 0.0)),
    ]);
    match kind {
        VistaKind::CrossingYield => {
            landmarks.insert(Landmark::YieldSign, entry);
        }
        _ => {
            landmarks.insert(Landmark::EgoLight, entry);
            landmarks.insert(Landmark::SideLight, side_entry);
        }
    }
    let routes = ContextRoutes {
        ego: route_of(&g, &["ego_approach", "ego_zone_in", "ego_zone_out", "ego_exit"]),
        ego_lane_change: None,
        arriving: route_of(&g, &["side_approach", "side_zone_in", "side_zone_out", "side_exit"]),
    };
    ContextMap {
        kind,
        critical_distance: cd,
        graph: g,
        landmarks,
        conflict_points: vec![ConflictPoint {
            ego: Position::new("ego_zone_out", 0.0),
            arriving: Position::new("side_zone_out", 0.0),
        }],
        routes,
        lanes: None,
    }
}
