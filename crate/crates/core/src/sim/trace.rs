use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::world::{LightSchedule, VehicleRole, WorldState};
use super::SimError;
use crate::criticality::{TestCase, VistaKind};
use crate::metric_map::SegmentId;
use crate::vista::{Approach, LightColor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub kind: VistaKind,
    pub dt: f64,
    pub t_max: f64,
    pub vehicle_length: f64,
    pub policy: String,
    pub case: TestCase,
    /// Segment sequence of each vehicle's route; the ego route is the one
    /// finally driven.
    pub routes: BTreeMap<VehicleRole, Vec<SegmentId>>,
    /// Zone entry and exit in each participant's route coordinates.
    pub zones: BTreeMap<VehicleRole, [f64; 2]>,
    /// Conflict points as `[ego coordinate, arriving coordinate]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflict_points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lights: Option<LightSchedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub id: VehicleRole,
    pub segment: SegmentId,
    pub offset: f64,
    /// Route coordinate of the front end.
    pub s: f64,
    pub speed: f64,
    /// Mode of the command that produced this state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightsSnapshot {
    pub ego: LightColor,
    pub side: LightColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Collision,
    SoftwareFailure,
    Resolved,
    Quiescent,
    TimeLimit,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Collision => "collision",
            Termination::SoftwareFailure => "software_failure",
            Termination::Resolved => "resolved",
            Termination::Quiescent => "quiescent",
            Termination::TimeLimit => "time_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ZoneEntry {
        vehicle: VehicleRole,
    },
    ZoneExit {
        vehicle: VehicleRole,
    },
    LightChange {
        approach: Approach,
        color: LightColor,
    },
    LaneChange,
    /// First tick on which the ego was commanded to accelerate.
    Progress,
    Collision {
        at_fault: VehicleRole,
        other: VehicleRole,
        geometry: String,
    },
    SoftwareFailure {
        reason: String,
    },
    End {
        reason: Termination,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub time: f64,
    pub vehicles: Vec<VehicleSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lights: Option<LightsSnapshot>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<Event>,
}

impl Snapshot {
    pub fn capture(world: &WorldState, modes: &BTreeMap<VehicleRole, String>) -> Self {
        let vehicles = world
            .vehicles
            .iter()
            .map(|v| {
                let p = v.position();
                VehicleSnapshot {
                    id: v.role,
                    segment: p.segment,
                    offset: p.offset,
                    s: v.s,
                    speed: v.motion.speed,
                    mode: modes.get(&v.role).cloned(),
                }
            })
            .collect();
        let lights = world.lights.map(|l| LightsSnapshot {
            ego: l.color(Approach::Ego, world.time),
            side: l.color(Approach::Side, world.time),
        });
        Snapshot { tick: world.tick, time: world.time, vehicles, lights, events: Vec::new() }
    }

    pub fn vehicle(&self, role: VehicleRole) -> Option<&VehicleSnapshot> {
        self.vehicles.iter().find(|v| v.id == role)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Snapshot(Snapshot),
}

impl Trace {
    pub fn termination(&self) -> Option<Termination> {
        self.events().find_map(|(_, e)| match e {
            Event::End { reason } => Some(*reason),
            _ => None,
        })
    }

    /// All events with the tick they were recorded at.
    pub fn events(&self) -> impl Iterator<Item = (u64, &Event)> {
        self.snapshots.iter().flat_map(|s| s.events.iter().map(move |e| (s.tick, e)))
    }

    /// One header line followed by one line per snapshot.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Line::Header(self.header.clone())).expect("trace serializes");
        out.push('\n');
        for s in &self.snapshots {
            out.push_str(&serde_json::to_string(&Line::Snapshot(s.clone())).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SimError> {
        let mut header = None;
        let mut snapshots = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: Line =
                serde_json::from_str(line).map_err(|e| SimError::Trace(format!("line {}: {e}", i + 1)))?;
            match parsed {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Header(_) => return Err(SimError::Trace(format!("line {}: second header", i + 1))),
                Line::Snapshot(s) => snapshots.push(s),
            }
        }
        let header = header.ok_or_else(|| SimError::Trace("missing header line".into()))?;
        Ok(Trace { header, snapshots })
    }
}
