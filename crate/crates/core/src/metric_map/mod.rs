//! Metric-graph map model.
//!
//! Maps are directed graphs whose edges carry [`Segment`]s. Vehicles move
//! along [`Route`]s, and every location is a [`Position`]: a segment plus an
//! arclength offset. The [`context`] submodule builds the four test maps.

pub mod context;
pub mod graph;
pub mod route;
pub mod segment;

pub use context::{build_context_map, ConflictPoint, ContextMap, ContextRoutes, Landmark, LaneInfo, MapLayout};
pub use graph::{Decomposition, Edge, Junction, MetricGraph, Road, VertexId};
pub use route::{advance, Leg, Position, Route};
pub use segment::{concat, split, Point, Segment, SegmentId, Shape};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("offset {offset} outside segment {segment} of length {length}")]
    OutOfRange { segment: SegmentId, offset: f64, length: f64 },
    #[error("route ends {remaining} m before the requested distance")]
    RouteEnd { remaining: f64 },
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("position {0:?} is not on the route")]
    NotOnRoute(Position),
    #[error("route has no legs")]
    EmptyRoute,
    #[error("leg on segment {segment} has an invalid interval")]
    InvalidLeg { segment: SegmentId },
    #[error("edge segment {0} has zero length")]
    ZeroLengthEdge(SegmentId),
    #[error("segment {0} already used by another edge")]
    DuplicateSegment(SegmentId),
    #[error("graph is not weakly connected")]
    Disconnected,
    #[error("junction vertex {0} cannot reach a junction exit")]
    JunctionUnreachable(VertexId),
    #[error("invalid map configuration: {0}")]
    Config(String),
}
