//! Positions and routes.
//!
//! A route is an ordered list of legs, each a sub-interval of one segment.
//! Route coordinates are arclength from the start of the first leg.

use serde::{Deserialize, Serialize};

use super::segment::{SegmentId, GEOM_TOL};
use super::MapError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub segment: SegmentId,
    pub offset: f64,
}

impl Position {
    pub fn new(segment: impl Into<SegmentId>, offset: f64) -> Self {
        Position { segment: segment.into(), offset }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub segment: SegmentId,
    pub from: f64,
    pub to: f64,
}

impl Leg {
    pub fn new(segment: impl Into<SegmentId>, from: f64, to: f64) -> Self {
        Leg { segment: segment.into(), from, to }
    }

    pub fn length(&self) -> f64 {
        self.to - self.from
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    legs: Vec<Leg>,
}

impl Route {
    pub fn new(legs: Vec<Leg>) -> Result<Self, MapError> {
        if legs.is_empty() {
            return Err(MapError::EmptyRoute);
        }
        if let Some(bad) = legs.iter().find(|l| !(l.from >= 0.0 && l.to >= l.from)) {
            return Err(MapError::InvalidLeg { segment: bad.segment.clone() });
        }
        Ok(Route { legs })
    }

    /// A route traversing whole segments of the given lengths.
    pub fn through(segments: &[(SegmentId, f64)]) -> Result<Self, MapError> {
        Route::new(segments.iter().map(|(id, len)| Leg::new(id.clone(), 0.0, *len)).collect())
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn length(&self) -> f64 {
        self.legs.iter().map(Leg::length).sum()
    }

    pub fn contains_segment(&self, id: &SegmentId) -> bool {
        self.legs.iter().any(|l| &l.segment == id)
    }

    /// Route coordinate of `p`, or `None` when `p` is not on the route.
    pub fn coord_of(&self, p: &Position) -> Option<f64> {
        let mut acc = 0.0;
        for leg in &self.legs {
            if leg.segment == p.segment && p.offset >= leg.from - GEOM_TOL && p.offset <= leg.to + GEOM_TOL {
                return Some(acc + (p.offset - leg.from).clamp(0.0, leg.length()));
            }
            acc += leg.length();
        }
        None
    }

    /// Position at route coordinate `s`. A coordinate on a leg boundary maps
    /// to the end of the earlier leg.
    pub fn position_at(&self, s: f64) -> Result<Position, MapError> {
        let total = self.length();
        if s.is_nan() || s < -GEOM_TOL {
            return Err(MapError::NegativeDistance(s));
        }
        if s > total + GEOM_TOL {
            return Err(MapError::RouteEnd { remaining: s - total });
        }
        let mut acc = 0.0;
        for leg in &self.legs {
            if s <= acc + leg.length() + GEOM_TOL {
                let off = leg.from + (s - acc).clamp(0.0, leg.length());
                return Ok(Position { segment: leg.segment.clone(), offset: off });
            }
            acc += leg.length();
        }
        let last = self.legs.last().expect("routes are non-empty");
        Ok(Position { segment: last.segment.clone(), offset: last.to })
    }

    /// Splits the route interval `[lo, hi]` into per-segment pieces, clipped
    /// to the route extent.
    pub fn interval_pieces(&self, lo: f64, hi: f64) -> Vec<Leg> {
        let mut out = Vec::new();
        let mut acc = 0.0;
        for leg in &self.legs {
            let (a, b) = (acc, acc + leg.length());
            let (x, y) = (lo.max(a), hi.min(b));
            if y > x {
                out.push(Leg::new(leg.segment.clone(), leg.from + (x - a), leg.from + (y - a)));
            }
            acc = b;
        }
        out
    }
}

/// Moves `p` forward by `d` meters along `route`.
pub fn advance(p: &Position, d: f64, route: &Route) -> Result<Position, MapError> {
    if d.is_nan() || d < 0.0 {
        return Err(MapError::NegativeDistance(d));
    }
    let s = route.coord_of(p).ok_or_else(|| MapError::NotOnRoute(p.clone()))?;
    route.position_at(s + d)
}
