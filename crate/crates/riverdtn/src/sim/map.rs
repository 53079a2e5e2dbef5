//! River map: named vertices, traversable edges, shortest paths.
//!
//! The map is a small undirected graph whose vertices carry 2-D positions in
//! meters; edge lengths are the Euclidean distances between their endpoints,
//! so a map drawn to scale is automatically metrically consistent. Boats
//! travel along shortest paths between labeled sites (piers and
//! communities); people use vertex positions as anchors for their local
//! movement.

use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("map has no vertex named {0:?}")]
    UnknownVertex(String),
    #[error("duplicate vertex name {0:?}")]
    DuplicateVertex(String),
    #[error("edge endpoints must differ (self-loop at {0:?})")]
    SelfLoop(String),
    #[error("map not connected: {0:?} unreachable from {1:?}")]
    NotConnected(String, String),
    #[error("map must have at least one vertex")]
    Empty,
}

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point `fraction` of the way toward `other` (0 = self, 1 = other).
    pub fn lerp(self, other: Vec2, fraction: f64) -> Vec2 {
        Vec2::new(
            self.x + (other.x - self.x) * fraction,
            self.y + (other.y - self.y) * fraction,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapVertex {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

/// JSON shape of a map: vertex list plus name-pair edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapGraph {
    pub vertices: Vec<MapVertex>,
    pub edges: Vec<(String, String)>,
}

/// A validated map with adjacency and name index built.
#[derive(Debug, Clone)]
pub struct Map {
    vertices: Vec<MapVertex>,
    index: BTreeMap<String, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Map {
    pub fn build(graph: &MapGraph) -> Result<Self, MapError> {
        if graph.vertices.is_empty() {
            return Err(MapError::Empty);
        }
        let mut index = BTreeMap::new();
        for (i, v) in graph.vertices.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(MapError::DuplicateVertex(v.name.clone()));
            }
        }
        let mut adjacency = vec![Vec::new(); graph.vertices.len()];
        for (a, b) in &graph.edges {
            let ia = *index.get(a).ok_or_else(|| MapError::UnknownVertex(a.clone()))?;
            let ib = *index.get(b).ok_or_else(|| MapError::UnknownVertex(b.clone()))?;
            if ia == ib {
                return Err(MapError::SelfLoop(a.clone()));
            }
            let length = Vec2::new(graph.vertices[ia].x, graph.vertices[ia].y)
                .distance(Vec2::new(graph.vertices[ib].x, graph.vertices[ib].y));
            adjacency[ia].push((ib, length));
            adjacency[ib].push((ia, length));
        }
        for adj in &mut adjacency {
            adj.sort_by(|a, b| a.0.cmp(&b.0));
        }
        let map = Self { vertices: graph.vertices.clone(), index, adjacency };
        // Connectivity from vertex 0 covers the whole graph by symmetry.
        let reachable = map.reachable_from(0);
        if let Some(stranded) = (0..map.vertices.len()).find(|i| !reachable[*i]) {
            return Err(MapError::NotConnected(
                map.vertices[stranded].name.clone(),
                map.vertices[0].name.clone(),
            ));
        }
        Ok(map)
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &(n, _) in &self.adjacency[v] {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        seen
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_names(&self) -> impl Iterator<Item = &str> {
        self.vertices.iter().map(|v| v.name.as_str())
    }

    pub fn lookup(&self, name: &str) -> Result<usize, MapError> {
        self.index.get(name).copied().ok_or_else(|| MapError::UnknownVertex(name.to_string()))
    }

    pub fn position(&self, vertex: usize) -> Vec2 {
        Vec2::new(self.vertices[vertex].x, self.vertices[vertex].y)
    }

    /// Shortest path from `from` to `to` as a vertex sequence including both
    /// endpoints, with its total length in meters. Dijkstra with
    /// smallest-index tie-breaks, so equal-length alternatives resolve the
    /// same way on every run.
    pub fn shortest_path(&self, from: usize, to: usize) -> (Vec<usize>, f64) {
        #[derive(PartialEq)]
        struct Head(f64, usize);
        impl Eq for Head {}
        impl Ord for Head {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                // Min-heap on (distance, vertex); distances are finite.
                other
                    .0
                    .partial_cmp(&self.0)
                    .unwrap()
                    .then_with(|| other.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Head {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }

        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(Head(0.0, from));
        while let Some(Head(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            if v == to {
                break;
            }
            for &(next, length) in &self.adjacency[v] {
                let candidate = d + length;
                if candidate < dist[next] {
                    dist[next] = candidate;
                    prev[next] = v;
                    heap.push(Head(candidate, next));
                }
            }
        }
        let mut path = vec![to];
        let mut cursor = to;
        while cursor != from {
            cursor = prev[cursor];
            path.push(cursor);
        }
        path.reverse();
        (path, dist[to])
    }
}

/// The default synthetic river: two piers on the main channel, four
/// communities up the tributaries. Distances are kilometers-scale, drawn to
/// scale in `docs/riverside-map.svg`.
pub fn default_river_map() -> MapGraph {
    let v = |name: &str, x: f64, y: f64| MapVertex { name: name.to_string(), x, y };
    MapGraph {
        vertices: vec![
            v("PierA", 0.0, 0.0),
            v("PierB", 6000.0, 0.0),
            v("C1", -2400.0, 1800.0),
            v("C2", -2400.0, -1800.0),
            v("C3", 8400.0, 1800.0),
            v("C4", 8400.0, -1800.0),
        ],
        edges: vec![
            ("PierA".into(), "C1".into()),
            ("PierA".into(), "C2".into()),
            ("PierA".into(), "PierB".into()),
            ("PierB".into(), "C3".into()),
            ("PierB".into(), "C4".into()),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_builds_and_is_to_scale() {
        let map = Map::build(&default_river_map()).unwrap();
        assert_eq!(map.vertex_count(), 6);
        let a = map.lookup("PierA").unwrap();
        let c1 = map.lookup("C1").unwrap();
        // 2400-1800 right triangle: 3 km tributary.
        assert!((map.position(a).distance(map.position(c1)) - 3000.0).abs() < 1e-9);
    }

    #[test]
    fn shortest_path_crosses_the_main_channel() {
        let map = Map::build(&default_river_map()).unwrap();
        let c1 = map.lookup("C1").unwrap();
        let c3 = map.lookup("C3").unwrap();
        let (path, length) = map.shortest_path(c1, c3);
        let names: Vec<&str> = path.iter().map(|&i| map.vertex_names().nth(i).unwrap()).collect();
        assert_eq!(names, vec!["C1", "PierA", "PierB", "C3"]);
        assert!((length - 12_000.0).abs() < 1e-9);
    }

    #[test]
    fn path_to_self_is_trivial() {
        let map = Map::build(&default_river_map()).unwrap();
        let a = map.lookup("PierA").unwrap();
        let (path, length) = map.shortest_path(a, a);
        assert_eq!(path, vec![a]);
        assert_eq!(length, 0.0);
    }

    #[test]
    fn disconnected_map_is_rejected() {
        let mut graph = default_river_map();
        graph.vertices.push(MapVertex { name: "Island".into(), x: 0.0, y: 9000.0 });
        assert!(matches!(Map::build(&graph), Err(MapError::NotConnected(..))));
    }

    #[test]
    fn bad_edges_are_rejected() {
        let mut graph = default_river_map();
        graph.edges.push(("PierA".into(), "Nowhere".into()));
        assert!(matches!(Map::build(&graph), Err(MapError::UnknownVertex(_))));

        let mut graph = default_river_map();
        graph.edges.push(("PierA".into(), "PierA".into()));
        assert!(matches!(Map::build(&graph), Err(MapError::SelfLoop(_))));

        let mut graph = default_river_map();
        graph.vertices.push(MapVertex { name: "PierA".into(), x: 1.0, y: 1.0 });
        assert!(matches!(Map::build(&graph), Err(MapError::DuplicateVertex(_))));
    }

    #[test]
    fn lerp_walks_a_segment() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(100.0, 0.0);
        assert_eq!(a.lerp(b, 0.25).x, 25.0);
        assert_eq!(a.lerp(b, 1.0).x, 100.0);
    }
}
