//! Segments: finite planar curves measured by arclength.
//!
//! A segment is a straight line or a polyline. Lengths are the sum of the
//! piece lengths, so every metric operation (concatenation, split, offset
//! lookup) reduces to arithmetic on the piece list.

use serde::{Deserialize, Serialize};
use std::fmt;

use super::MapError;

/// Tolerance used when comparing points and lengths, in meters.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub String);

impl SegmentId {
    pub fn new(s: impl Into<String>) -> Self {
        SegmentId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SegmentId {
    fn from(s: &str) -> Self {
        SegmentId(s.to_string())
    }
}

impl From<String> for SegmentId {
    fn from(s: String) -> Self {
        SegmentId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Line { from: Point, to: Point },
    Polyline { vertices: Vec<Point> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    #[serde(flatten)]
    shape: Shape,
}

impl Segment {
    pub fn line(id: impl Into<SegmentId>, from: Point, to: Point) -> Self {
        Segment { id: id.into(), shape: Shape::Line { from, to } }
    }

    /// A straight segment along the x axis starting at the origin.
    pub fn straight(id: impl Into<SegmentId>, length: f64) -> Self {
        Segment::line(id, Point::new(0.0, 0.0), Point::new(length.max(0.0), 0.0))
    }

    /// Builds a segment through `vertices`, dropping zero-length pieces and
    /// interior vertices that do not change direction.
    pub fn polyline(id: impl Into<SegmentId>, vertices: Vec<Point>) -> Self {
        Segment { id: id.into(), shape: normalize(vertices) }
    }

    /// A zigzag polyline whose pieces have the given lengths. Consecutive
    /// pieces turn by ±60 degrees so none of them merge during normalization.
    pub fn polyline_from_lengths(id: impl Into<SegmentId>, lengths: &[f64]) -> Self {
        let mut pts = vec![Point::new(0.0, 0.0)];
        let mut cur = pts[0];
        for (i, &len) in lengths.iter().enumerate() {
            let heading = if i % 2 == 0 { 0.0 } else { std::f64::consts::FRAC_PI_3 };
            cur = Point::new(cur.x + len * heading.cos(), cur.y + len * heading.sin());
            pts.push(cur);
        }
        Segment::polyline(id, pts)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn vertices(&self) -> Vec<Point> {
        match &self.shape {
            Shape::Line { from, to } => vec![*from, *to],
            Shape::Polyline { vertices } => vertices.clone(),
        }
    }

    pub fn pieces(&self) -> Vec<f64> {
        self.vertices().windows(2).map(|w| w[0].distance(w[1])).collect()
    }

    pub fn length(&self) -> f64 {
        self.pieces().iter().sum()
    }

    pub fn start(&self) -> Point {
        self.vertices()[0]
    }

    pub fn end(&self) -> Point {
        *self.vertices().last().expect("segments have at least one vertex")
    }

    /// Point at arclength `offset` from the segment origin.
    pub fn point_at(&self, offset: f64) -> Result<Point, MapError> {
        let (idx, t) = self.locate(offset)?;
        let v = self.vertices();
        Ok(if idx + 1 < v.len() { v[idx].lerp(v[idx + 1], t) } else { v[idx] })
    }

    /// Piece index and fraction along that piece for `offset`.
    fn locate(&self, offset: f64) -> Result<(usize, f64), MapError> {
        let len = self.length();
        if !(-GEOM_TOL..=len + GEOM_TOL).contains(&offset) || offset.is_nan() {
            return Err(MapError::OutOfRange { segment: self.id.clone(), offset, length: len });
        }
        let offset = offset.clamp(0.0, len);
        let mut acc = 0.0;
        let pieces = self.pieces();
        for (i, &p) in pieces.iter().enumerate() {
            if offset <= acc + p || i + 1 == pieces.len() {
                let t = if p > 0.0 { ((offset - acc) / p).clamp(0.0, 1.0) } else { 0.0 };
                return Ok((i, t));
            }
            acc += p;
        }
        Ok((0, 0.0))
    }

    /// Compares geometry within `tol`, ignoring identifiers.
    pub fn same_geometry(&self, other: &Segment, tol: f64) -> bool {
        let (a, b) = (self.vertices(), other.vertices());
        a.len() == b.len() && a.iter().zip(&b).all(|(p, q)| p.distance(*q) <= tol)
    }
}

/// Partial concatenation: defined only when `b` starts where `a` ends.
pub fn concat(a: &Segment, b: &Segment) -> Option<Segment> {
    if a.end().distance(b.start()) > 1e-6 {
        return None;
    }
    let mut pts = a.vertices();
    pts.extend(b.vertices().into_iter().skip(1));
    Some(Segment::polyline(format!("{}+{}", a.id, b.id), pts))
}

/// Splits `s` at arclength `at` into a prefix of length `at` and the rest.
pub fn split(s: &Segment, at: f64) -> Result<(Segment, Segment), MapError> {
    let len = s.length();
    if at.is_nan() || at < 0.0 || at > len {
        return Err(MapError::OutOfRange { segment: s.id.clone(), offset: at, length: len });
    }
    let (idx, t) = s.locate(at)?;
    let v = s.vertices();
    let cut = if idx + 1 < v.len() { v[idx].lerp(v[idx + 1], t) } else { v[idx] };
    let mut head: Vec<Point> = v[..=idx].to_vec();
    head.push(cut);
    let mut tail = vec![cut];
    tail.extend_from_slice(&v[idx + 1..]);
    Ok((Segment::polyline(format!("{}/0", s.id), head), Segment::polyline(format!("{}/1", s.id), tail)))
}

fn normalize(vertices: Vec<Point>) -> Shape {
    let mut pts: Vec<Point> = Vec::with_capacity(vertices.len());
    for p in vertices {
        if pts.last().map_or(true, |q: &Point| q.distance(p) > GEOM_TOL) {
            pts.push(p);
        }
    }
    let mut i = 1;
    while i + 1 < pts.len() {
        let (a, b, c) = (pts[i - 1], pts[i], pts[i + 1]);
        let (ux, uy) = (b.x - a.x, b.y - a.y);
        let (wx, wy) = (c.x - b.x, c.y - b.y);
        let cross = ux * wy - uy * wx;
        let dot = ux * wx + uy * wy;
        let scale = (ux.hypot(uy) * wx.hypot(wy)).max(f64::MIN_POSITIVE);
        if dot > 0.0 && cross.abs() / scale <= 1e-12 {
            pts.remove(i);
        } else {
            i += 1;
        }
    }
    match pts.len() {
        0 => unreachable!("normalize receives at least one vertex"),
        1 => Shape::Line { from: pts[0], to: pts[0] },
        2 => Shape::Line { from: pts[0], to: pts[1] },
        _ => Shape::Polyline { vertices: pts },
    }
}
