//! Metric graphs and their decomposition into roads and junctions.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::segment::{Segment, SegmentId};
use super::MapError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub String);

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        VertexId(s.to_string())
    }
}

impl From<String> for VertexId {
    fn from(s: String) -> Self {
        VertexId(s)
    }
}

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: VertexId,
    pub segment: SegmentId,
    pub target: VertexId,
    /// Marks connectors that lie inside an intersection area.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub internal: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricGraph {
    vertices: BTreeSet<VertexId>,
    edges: Vec<Edge>,
    segments: BTreeMap<SegmentId, Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Road {
    pub vertices: Vec<VertexId>,
    pub segments: Vec<SegmentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Junction {
    pub vertices: BTreeSet<VertexId>,
    pub segments: Vec<SegmentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub roads: Vec<Road>,
    pub junctions: Vec<Junction>,
}

impl MetricGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, v: impl Into<VertexId>) {
        self.vertices.insert(v.into());
    }

    pub fn add_edge(
        &mut self,
        source: impl Into<VertexId>,
        segment: Segment,
        target: impl Into<VertexId>,
        internal: bool,
    ) -> Result<(), MapError> {
        if segment.length() <= 0.0 {
            return Err(MapError::ZeroLengthEdge(segment.id.clone()));
        }
        if self.segments.contains_key(&segment.id) {
            return Err(MapError::DuplicateSegment(segment.id.clone()));
        }
        let (source, target) = (source.into(), target.into());
        self.vertices.insert(source.clone());
        self.vertices.insert(target.clone());
        self.edges.push(Edge { source, segment: segment.id.clone(), target, internal });
        self.segments.insert(segment.id.clone(), segment);
        Ok(())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexId> {
        self.vertices.iter()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn segment(&self, id: &SegmentId) -> Option<&Segment> {
        self.segments.get(id)
    }

    pub fn segment_length(&self, id: &SegmentId) -> Option<f64> {
        self.segments.get(id).map(Segment::length)
    }

    fn in_degree(&self, v: &VertexId) -> usize {
        self.edges.iter().filter(|e| &e.target == v).count()
    }

    fn out_degree(&self, v: &VertexId) -> usize {
        self.edges.iter().filter(|e| &e.source == v).count()
    }

    pub fn is_weakly_connected(&self) -> bool {
        let Some(start) = self.vertices.iter().next() else { return true };
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(v) = queue.pop_front() {
            for e in &self.edges {
                let next = if e.source == v {
                    &e.target
                } else if e.target == v {
                    &e.source
                } else {
                    continue;
                };
                if seen.insert(next.clone()) {
                    queue.push_back(next.clone());
                }
            }
        }
        seen.len() == self.vertices.len()
    }

    /// Splits the graph into roads and junctions.
    ///
    /// Roads are maximal directed paths of non-internal edges whose interior
    /// vertices have exactly one incoming and one outgoing edge. Junctions are
    /// the connected groups formed by internal edges and by vertices where
    /// roads meet or branch.
    pub fn decompose(&self) -> Result<Decomposition, MapError> {
        if !self.is_weakly_connected() {
            return Err(MapError::Disconnected);
        }
        let pass_through = |v: &VertexId| {
            self.in_degree(v) == 1
                && self.out_degree(v) == 1
                && self.edges.iter().all(|e| !(e.internal && (&e.source == v || &e.target == v)))
        };

        let mut used = vec![false; self.edges.len()];
        let mut roads = Vec::new();
        let walk = |start: usize, used: &mut Vec<bool>| {
            let mut road = Road { vertices: vec![self.edges[start].source.clone()], segments: Vec::new() };
            let mut cur = start;
            loop {
                used[cur] = true;
                let e = &self.edges[cur];
                road.segments.push(e.segment.clone());
                road.vertices.push(e.target.clone());
                if !pass_through(&e.target) {
                    break;
                }
                match self.edges.iter().position(|n| n.source == e.target && !n.internal) {
                    Some(next) if !used[next] => cur = next,
                    _ => break,
                }
            }
            road
        };
        for (i, e) in self.edges.iter().enumerate() {
            if !e.internal && !used[i] && !pass_through(&e.source) {
                roads.push(walk(i, &mut used));
            }
        }
        // Whatever is left is a loop of pass-through vertices.
        for i in 0..self.edges.len() {
            if !self.edges[i].internal && !used[i] {
                roads.push(walk(i, &mut used));
            }
        }

        let degree = |v: &VertexId| self.in_degree(v) + self.out_degree(v);
        let mut members: BTreeSet<VertexId> =
            self.vertices.iter().filter(|v| degree(v) >= 2 && !pass_through(v)).cloned().collect();
        for e in self.edges.iter().filter(|e| e.internal) {
            members.insert(e.source.clone());
            members.insert(e.target.clone());
        }

        let mut parent: BTreeMap<VertexId, VertexId> = members.iter().map(|v| (v.clone(), v.clone())).collect();
        fn find(parent: &mut BTreeMap<VertexId, VertexId>, v: &VertexId) -> VertexId {
            let p = parent[v].clone();
            if &p == v {
                return p;
            }
            let root = find(parent, &p);
            parent.insert(v.clone(), root.clone());
            root
        }
        for e in self.edges.iter().filter(|e| e.internal) {
            let (a, b) = (find(&mut parent, &e.source), find(&mut parent, &e.target));
            if a != b {
                parent.insert(a, b);
            }
        }
        let mut groups: BTreeMap<VertexId, Junction> = BTreeMap::new();
        for v in &members {
            let root = find(&mut parent, v);
            groups
                .entry(root)
                .or_insert_with(|| Junction { vertices: BTreeSet::new(), segments: Vec::new() })
                .vertices
                .insert(v.clone());
        }
        for e in self.edges.iter().filter(|e| e.internal) {
            let root = find(&mut parent, &e.source);
            groups.get_mut(&root).expect("internal edge endpoints are members").segments.push(e.segment.clone());
        }
        let junctions: Vec<Junction> = groups.into_values().collect();
        for j in &junctions {
            self.check_reachability(j)?;
        }
        Ok(Decomposition { roads, junctions })
    }

    /// Within the junction subgraph, every vertex without incoming internal
    /// edges must reach a vertex without outgoing internal edges.
    fn check_reachability(&self, j: &Junction) -> Result<(), MapError> {
        let inner: Vec<&Edge> = self.edges.iter().filter(|e| e.internal && j.vertices.contains(&e.source)).collect();
        let has_in = |v: &VertexId| inner.iter().any(|e| &e.target == v);
        let has_out = |v: &VertexId| inner.iter().any(|e| &e.source == v);
        for v in j.vertices.iter().filter(|v| !has_in(v)) {
            let mut seen = BTreeSet::from([v.clone()]);
            let mut queue = VecDeque::from([v.clone()]);
            let mut ok = false;
            while let Some(u) = queue.pop_front() {
                if !has_out(&u) {
                    ok = true;
                    break;
                }
                for e in inner.iter().filter(|e| e.source == u) {
                    if seen.insert(e.target.clone()) {
                        queue.push_back(e.target.clone());
                    }
                }
            }
            if !ok {
                return Err(MapError::JunctionUnreachable(v.clone()));
            }
        }
        Ok(())
    }
}
