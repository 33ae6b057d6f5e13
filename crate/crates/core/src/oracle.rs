//! Verdicts from traces.
//!
//! The oracle reads nothing but the trace: zone extents come from the
//! header, positions and light colours from the snapshots, collisions and
//! software failures from the recorded events.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::criticality::{TestCase, VistaKind};
use crate::sim::{Event, Snapshot, Trace, VehicleRole, STOP_SPEED};
use crate::vista::LightColor;

const EPS: f64 = 1e-6;
/// Standstill inside the zone, in seconds, after which the ego counts as
/// stranded.
pub const BLOCK_HORIZON: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    /// Two vehicles in the zone at once.
    P1,
    /// Ego stopped inside the zone.
    P2,
    /// Ego enters on red.
    P3,
    /// Ego inside the zone while the side light is green.
    P4,
}

impl Property {
    pub const ALL: [Property; 4] = [Property::P1, Property::P2, Property::P3, Property::P4];

    pub fn as_str(&self) -> &'static str {
        match self {
            Property::P1 => "p1",
            Property::P2 => "p2",
            Property::P3 => "p3",
            Property::P4 => "p4",
        }
    }
}

pub type PropertySet = BTreeSet<Property>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Caution,
    Progress,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Verdict {
    SafeCaution,
    SafeProgress,
    UnsafeCaution(PropertySet),
    UnsafeProgress(PropertySet),
    EgoAccident,
    ArrivingAccident,
    Blocked,
    SoftwareFailure,
}

impl Verdict {
    pub fn code(&self) -> &'static str {
        match self {
            Verdict::SafeCaution => "CS",
            Verdict::SafeProgress => "PS",
            Verdict::UnsafeCaution(_) => "CU",
            Verdict::UnsafeProgress(_) => "PU",
            Verdict::EgoAccident => "Ae",
            Verdict::ArrivingAccident => "Aa",
            Verdict::Blocked => "Blk",
            Verdict::SoftwareFailure => "Fsw",
        }
    }

    pub fn properties(&self) -> Option<&PropertySet> {
        match self {
            Verdict::UnsafeCaution(p) | Verdict::UnsafeProgress(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::SafeCaution | Verdict::SafeProgress)
    }

    /// Anything other than a safe outcome.
    pub fn is_problematic(&self) -> bool {
        !self.is_safe()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())?;
        if let Some(props) = self.properties() {
            for p in props {
                write!(f, " {}", p.as_str())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("trace integrity: {0}")]
    Integrity(String),
    #[error("unknown verdict '{0}'")]
    UnknownVerdict(String),
}

impl FromStr for Verdict {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let code = parts.next().ok_or_else(|| OracleError::UnknownVerdict(s.into()))?;
        let mut props = PropertySet::new();
        for p in parts {
            let prop = Property::ALL
                .into_iter()
                .find(|q| q.as_str() == p)
                .ok_or_else(|| OracleError::UnknownVerdict(s.into()))?;
            props.insert(prop);
        }
        let plain = |v: Verdict| if props.is_empty() { Ok(v) } else { Err(OracleError::UnknownVerdict(s.into())) };
        match code {
            "CS" => plain(Verdict::SafeCaution),
            "PS" => plain(Verdict::SafeProgress),
            "Ae" => plain(Verdict::EgoAccident),
            "Aa" => plain(Verdict::ArrivingAccident),
            "Blk" => plain(Verdict::Blocked),
            "Fsw" => plain(Verdict::SoftwareFailure),
            "CU" | "PU" if props.is_empty() => Err(OracleError::UnknownVerdict(s.into())),
            "CU" => Ok(Verdict::UnsafeCaution(props)),
            "PU" => Ok(Verdict::UnsafeProgress(props)),
            _ => Err(OracleError::UnknownVerdict(s.into())),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub ego_s: f64,
    pub ego_speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arriving_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ego_light: Option<LightColor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_light: Option<LightColor>,
}

/// One contiguous interval of ticks violating `property`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEvent {
    pub property: Property,
    pub tick: u64,
    pub last_tick: u64,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionInfo {
    pub tick: u64,
    pub at_fault: VehicleRole,
    pub other: VehicleRole,
    pub geometry: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub case: TestCase,
    pub verdict: Verdict,
    pub behavior: Behavior,
    #[serde(default)]
    pub properties: PropertySet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation_tick: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionInfo>,
    /// Properties violated but outranked by the verdict.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub suppressed: PropertySet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Below the stop speed and not pulling away. A vehicle starting from rest
/// spends a tick or two under the threshold without having stopped there.
fn halted(speed: f64, previous: Option<f64>) -> bool {
    speed < STOP_SPEED && previous.map_or(true, |p| speed <= p)
}

fn in_zone(s: f64, zone: [f64; 2], length: f64) -> bool {
    s > zone[0] + EPS && s - length < zone[1] - EPS
}

struct View<'a> {
    trace: &'a Trace,
    ego_zone: Option<[f64; 2]>,
    arr_zone: Option<[f64; 2]>,
    length: f64,
}

impl<'a> View<'a> {
    fn new(trace: &'a Trace) -> Result<Self, OracleError> {
        let h = &trace.header;
        if trace.snapshots.is_empty() {
            return Err(OracleError::Integrity("no snapshots".into()));
        }
        for w in trace.snapshots.windows(2) {
            if w[1].tick <= w[0].tick {
                return Err(OracleError::Integrity(format!("tick {} follows tick {}", w[1].tick, w[0].tick)));
            }
        }
        if let Some(s) = trace.snapshots.iter().find(|s| s.vehicle(VehicleRole::Ego).is_none()) {
            return Err(OracleError::Integrity(format!("tick {} has no ego vehicle", s.tick)));
        }
        let collisions = trace.events().filter(|(_, e)| matches!(e, Event::Collision { .. })).count();
        if collisions > 1 {
            return Err(OracleError::Integrity(format!("{collisions} collision events")));
        }
        if !(h.vehicle_length > 0.0 && h.dt > 0.0) {
            return Err(OracleError::Integrity("vehicle length and dt must be positive".into()));
        }
        Ok(View {
            trace,
            ego_zone: h.zones.get(&VehicleRole::Ego).copied(),
            arr_zone: h.zones.get(&VehicleRole::Arriving).copied(),
            length: h.vehicle_length,
        })
    }

    fn ego_in(&self, s: &Snapshot) -> bool {
        match (self.ego_zone, s.vehicle(VehicleRole::Ego)) {
            (Some(z), Some(e)) => in_zone(e.s, z, self.length),
            _ => false,
        }
    }

    fn arriving_in(&self, s: &Snapshot) -> bool {
        match (self.arr_zone, s.vehicle(VehicleRole::Arriving)) {
            (Some(z), Some(a)) => in_zone(a.s, z, self.length),
            _ => false,
        }
    }

    fn entry_tick(&self, role: VehicleRole) -> Option<u64> {
        let zone = if role == VehicleRole::Ego { self.ego_zone } else { self.arr_zone }?;
        self.trace.snapshots.iter().find(|s| s.vehicle(role).is_some_and(|v| v.s > zone[0] + EPS)).map(|s| s.tick)
    }

    fn witness(&self, s: &Snapshot) -> Witness {
        let ego = s.vehicle(VehicleRole::Ego).expect("checked in View::new");
        Witness {
            ego_s: ego.s,
            ego_speed: ego.speed,
            arriving_s: s.vehicle(VehicleRole::Arriving).map(|a| a.s),
            ego_light: s.lights.map(|l| l.ego),
            side_light: s.lights.map(|l| l.side),
        }
    }
}

/// Every violation of p1 to p4, one event per property per contiguous run
/// of violating ticks.
pub fn check_properties(trace: &Trace) -> Result<Vec<ViolationEvent>, OracleError> {
    let view = View::new(trace)?;
    let mut events: Vec<ViolationEvent> = Vec::new();
    let mut open: [Option<usize>; 4] = [None; 4];
    let mut prev: Option<&Snapshot> = None;
    for snap in &trace.snapshots {
        let ego = snap.vehicle(VehicleRole::Ego).expect("checked in View::new");
        let ego_in = view.ego_in(snap);
        let entered = match (view.ego_zone, prev.and_then(|p| p.vehicle(VehicleRole::Ego))) {
            (Some(z), Some(before)) => before.s <= z[0] + EPS && ego.s > z[0] + EPS,
            _ => false,
        };
        let lights = snap.lights;
        let prev_speed = prev.and_then(|p| p.vehicle(VehicleRole::Ego)).map(|e| e.speed);
        let holds = [
            ego_in && view.arriving_in(snap),
            ego_in && halted(ego.speed, prev_speed),
            entered && lights.is_some_and(|l| l.ego == LightColor::Red),
            ego_in && lights.is_some_and(|l| l.side == LightColor::Green),
        ];
        for (i, &h) in holds.iter().enumerate() {
            match (h, open[i]) {
                (true, Some(idx)) if events[idx].last_tick + 1 == snap.tick => events[idx].last_tick = snap.tick,
                (true, _) => {
                    events.push(ViolationEvent {
                        property: Property::ALL[i],
                        tick: snap.tick,
                        last_tick: snap.tick,
                        witness: view.witness(snap),
                    });
                    open[i] = Some(events.len() - 1);
                }
                (false, _) => open[i] = None,
            }
        }
        prev = Some(snap);
    }
    events.sort_by_key(|e| (e.tick, e.property));
    Ok(events)
}

pub fn classify_behavior(trace: &Trace) -> Result<Behavior, OracleError> {
    let view = View::new(trace)?;
    let ego_entry = view.entry_tick(VehicleRole::Ego);
    let progress = if trace.header.kind == VistaKind::CrossingLight {
        trace
            .snapshots
            .iter()
            .filter(|s| ego_entry.map_or(true, |t| s.tick <= t))
            .any(|s| s.vehicle(VehicleRole::Ego).and_then(|e| e.mode.as_deref()) == Some("accelerate"))
    } else {
        match (ego_entry, view.entry_tick(VehicleRole::Arriving)) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(e), Some(a)) => e < a,
        }
    };
    Ok(if progress { Behavior::Progress } else { Behavior::Caution })
}

fn stranded(view: &View<'_>) -> bool {
    let dt = view.trace.header.dt;
    let mut since: Option<u64> = None;
    let mut prev_speed = None;
    for snap in &view.trace.snapshots {
        let ego = snap.vehicle(VehicleRole::Ego).expect("checked in View::new");
        let halt = halted(ego.speed, prev_speed);
        prev_speed = Some(ego.speed);
        if view.ego_in(snap) && halt {
            let start = *since.get_or_insert(snap.tick);
            if (snap.tick - start) as f64 * dt >= BLOCK_HORIZON - 1e-9 {
                return true;
            }
        } else {
            since = None;
        }
    }
    false
}

/// The single verdict for a terminated trace, with its supporting details.
pub fn verdict(trace: &Trace) -> Result<VerdictRecord, OracleError> {
    let view = View::new(trace)?;
    let violations = check_properties(trace)?;
    let behavior = classify_behavior(trace)?;
    let properties: PropertySet = violations.iter().map(|v| v.property).collect();
    let first_violation_tick = violations.iter().map(|v| v.tick).min();

    let failure = trace.events().find_map(|(_, e)| match e {
        Event::SoftwareFailure { reason } => Some(reason.clone()),
        _ => None,
    });
    let collision = trace.events().find_map(|(tick, e)| match e {
        Event::Collision { at_fault, other, geometry } => {
            Some(CollisionInfo { tick, at_fault: *at_fault, other: *other, geometry: geometry.clone() })
        }
        _ => None,
    });

    let verdict = if failure.is_some() {
        Verdict::SoftwareFailure
    } else if let Some(c) = &collision {
        if c.at_fault == VehicleRole::Ego {
            Verdict::EgoAccident
        } else {
            Verdict::ArrivingAccident
        }
    } else if stranded(&view) {
        Verdict::Blocked
    } else if !properties.is_empty() {
        match behavior {
            Behavior::Caution => Verdict::UnsafeCaution(properties.clone()),
            Behavior::Progress => Verdict::UnsafeProgress(properties.clone()),
        }
    } else {
        match behavior {
            Behavior::Caution => Verdict::SafeCaution,
            Behavior::Progress => Verdict::SafeProgress,
        }
    };
    let suppressed = if verdict.properties().is_some() { PropertySet::new() } else { properties.clone() };
    Ok(VerdictRecord {
        case: trace.header.case.clone(),
        verdict,
        behavior,
        properties,
        first_violation_tick,
        collision,
        suppressed,
        failure,
    })
}
