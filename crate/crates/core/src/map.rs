//! Road map model: a WKT subset reader and an undirected Euclidean graph.
//!
//! Coordinates are planar meters. Points that parse to identical values are
//! merged into one vertex, so linestrings that share endpoints become
//! connected roads.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Undirected road graph. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct MapGraph {
    vertices: Vec<Point>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPath {
    pub vertices: Vec<usize>,
    pub total_length: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WktOptions {
    /// Merge points closer than this distance. Off by default: only exactly
    /// equal coordinates are merged.
    pub snap_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSummary {
    pub vertices: usize,
    pub edges: usize,
    pub components: usize,
    pub total_length: f64,
    pub min: Point,
    pub max: Point,
}

fn coord_key(p: Point) -> (u64, u64) {
    // +0.0 folds negative zero onto positive zero
    ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits())
}

/// Incremental graph construction with vertex merging.
#[derive(Debug, Default)]
pub struct MapBuilder {
    graph: MapGraph,
    exact: HashMap<(u64, u64), usize>,
    edge_set: HashSet<(usize, usize)>,
    snap: Option<(f64, HashMap<(i64, i64), Vec<usize>>)>,
}

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_snap_epsilon(epsilon: f64) -> Self {
        Self {
            snap: Some((epsilon, HashMap::new())),
            ..Self::default()
        }
    }

    fn cell(eps: f64, p: Point) -> (i64, i64) {
        ((p.x / eps).floor() as i64, (p.y / eps).floor() as i64)
    }

    pub fn vertex(&mut self, p: Point) -> usize {
        if let Some(&idx) = self.exact.get(&coord_key(p)) {
            return idx;
        }
        if let Some((eps, cells)) = &self.snap {
            let (cx, cy) = Self::cell(*eps, p);
            let mut best: Option<usize> = None;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = cells.get(&(cx + dx, cy + dy)) {
                        for &v in list {
                            if self.graph.vertices[v].distance(&p) <= *eps
                                && best.is_none_or(|b| v < b)
                            {
                                best = Some(v);
                            }
                        }
                    }
                }
            }
            if let Some(v) = best {
                return v;
            }
        }
        let idx = self.graph.vertices.len();
        self.graph.vertices.push(p);
        self.graph.adjacency.push(Vec::new());
        self.exact.insert(coord_key(p), idx);
        if let Some((eps, cells)) = &mut self.snap {
            cells.entry(Self::cell(*eps, p)).or_default().push(idx);
        }
        idx
    }

    /// Adds an undirected edge; self-loops and duplicates are ignored.
    pub fn edge(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let key = (a.min(b), a.max(b));
        if !self.edge_set.insert(key) {
            return false;
        }
        let length = self.graph.vertices[a].distance(&self.graph.vertices[b]);
        self.graph.edges.push(Edge { a, b, length });
        self.graph.adjacency[a].push((b, length));
        self.graph.adjacency[b].push((a, length));
        true
    }

    pub fn polyline(&mut self, points: &[Point]) {
        let ids: Vec<usize> = points.iter().map(|&p| self.vertex(p)).collect();
        for w in ids.windows(2) {
            self.edge(w[0], w[1]);
        }
    }

    pub fn build(mut self) -> MapGraph {
        for adj in &mut self.graph.adjacency {
            adj.sort_by_key(|&(v, _)| v);
        }
        self.graph
    }
}

impl MapGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, idx: usize) -> Point {
        self.vertices[idx]
    }

    /// Neighbours of `idx` with edge lengths, sorted by neighbour index.
    pub fn neighbours(&self, idx: usize) -> &[(usize, f64)] {
        &self.adjacency[idx]
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|&&(v, _)| v == b)
            .map(|&(_, len)| len)
    }

    /// Regular `cols` x `rows` lattice with the given spacing, origin at (0, 0).
    pub fn synthetic_grid(cols: usize, rows: usize, spacing: f64) -> MapGraph {
        let mut b = MapBuilder::new();
        for r in 0..rows {
            for c in 0..cols {
                b.vertex(Point::new(c as f64 * spacing, r as f64 * spacing));
            }
        }
        let at = |c: usize, r: usize| r * cols + c;
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    b.edge(at(c, r), at(c + 1, r));
                }
                if r + 1 < rows {
                    b.edge(at(c, r), at(c, r + 1));
                }
            }
        }
        b.build()
    }

    /// One `LINESTRING` per edge, in edge order.
    pub fn to_wkt(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let (p, q) = (self.vertices[e.a], self.vertices[e.b]);
            let _ = writeln!(out, "LINESTRING ({} {}, {} {})", p.x, p.y, q.x, q.y);
        }
        out
    }

    pub fn component_count(&self) -> usize {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    pub fn summary(&self) -> MapSummary {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        MapSummary {
            vertices: self.vertex_count(),
            edges: self.edge_count(),
            components: self.component_count(),
            total_length: self.edges.iter().map(|e| e.length).sum(),
            min,
            max,
        }
    }

    /// Vertex closest to `point`; ties go to the smallest index.
    pub fn nearest_vertex(&self, point: Point) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = v.distance_sq(&point);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
            .ok_or_else(|| Error::World("nearest vertex requested on an empty map".into()))
    }

    /// Shortest path by total length. Among equally short paths the one with
    /// the lexicographically smallest vertex sequence is returned.
    pub fn shortest_path(&self, from: usize, to: usize) -> Result<Option<MapPath>> {
        let n = self.vertices.len();
        if from >= n || to >= n {
            return Err(Error::Domain(format!(
                "vertex index out of range (from {from}, to {to}, {n} vertices)"
            )));
        }
        if from == to {
            return Ok(Some(MapPath {
                vertices: vec![from],
                total_length: 0.0,
            }));
        }

        // Distances to the target, so the forward walk from `from` can pick
        // the smallest next vertex that stays on some shortest path.
        let dist = self.distances_from(to, Some(from));
        if !dist[from].is_finite() {
            return Ok(None);
        }

        let mut vertices = vec![from];
        let mut total_length = 0.0;
        let mut u = from;
        while u != to {
            let tol = 1e-9 * dist[u].max(1.0);
            let next = self.adjacency[u]
                .iter()
                .find(|&&(v, len)| dist[v].is_finite() && (len + dist[v] - dist[u]).abs() <= tol);
            let Some(&(v, len)) = next else {
                return Err(Error::Invariant(format!(
                    "shortest path walk stuck at vertex {u}"
                )));
            };
            total_length += len;
            vertices.push(v);
            u = v;
            if vertices.len() > n {
                return Err(Error::Invariant("shortest path walk did not terminate".into()));
            }
        }
        Ok(Some(MapPath {
            vertices,
            total_length,
        }))
    }

    /// Dijkstra from `source`. With `stop_at`, settles only vertices that are
    /// no farther than that vertex.
    fn distances_from(&self, source: usize, stop_at: Option<usize>) -> Vec<f64> {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry {
            cost: 0.0,
            vertex: source,
        });
        let mut limit = f64::INFINITY;
        while let Some(HeapEntry { cost, vertex }) = heap.pop() {
            if done[vertex] {
                continue;
            }
            if cost > limit {
                break;
            }
            done[vertex] = true;
            if Some(vertex) == stop_at {
                limit = cost * (1.0 + 1e-9) + 1e-9;
            }
            for &(v, len) in &self.adjacency[vertex] {
                let nd = cost + len;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapEntry { cost: nd, vertex: v });
                }
            }
        }
        // unsettled vertices may carry tentative distances; drop them
        for (d, ok) in dist.iter_mut().zip(&done) {
            if !ok {
                *d = f64::INFINITY;
            }
        }
        dist
    }
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    cost: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn parse_wkt(text: &str) -> Result<MapGraph> {
    parse_wkt_with(text, WktOptions::default())
}

pub fn parse_wkt_with(text: &str, opts: WktOptions) -> Result<MapGraph> {
    let mut builder = match opts.snap_epsilon {
        Some(eps) if eps > 0.0 => MapBuilder::with_snap_epsilon(eps),
        _ => MapBuilder::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for linestring in parse_geometry_line(line).map_err(|msg| Error::parse(line_no, msg))? {
            let distinct = linestring.windows(2).filter(|w| w[0] != w[1]).count();
            if linestring.len() < 2 || distinct == 0 {
                return Err(Error::parse(
                    line_no,
                    "linestring needs at least two distinct points",
                ));
            }
            builder.polyline(&linestring);
        }
    }
    Ok(builder.build())
}

fn parse_geometry_line(line: &str) -> std::result::Result<Vec<Vec<Point>>, String> {
    let keyword_end = line
        .find(|c: char| !c.is_ascii_alphabetic())
        .unwrap_or(line.len());
    let keyword = line[..keyword_end].to_ascii_uppercase();
    let mut cur = Cursor::new(&line[keyword_end..]);
    let out = match keyword.as_str() {
        "LINESTRING" => vec![cur.coord_list()?],
        "MULTILINESTRING" => {
            cur.expect('(')?;
            let mut parts = vec![cur.coord_list()?];
            while cur.eat(',') {
                parts.push(cur.coord_list()?);
            }
            cur.expect(')')?;
            parts
        }
        "" => return Err("expected LINESTRING or MULTILINESTRING".into()),
        other => return Err(format!("unsupported geometry type {other}")),
    };
    cur.skip_ws();
    if !cur.rest().is_empty() {
        return Err(format!("trailing input: {:?}", cur.rest()));
    }
    Ok(out)
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Self { s, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> std::result::Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!("expected '{c}' at {:?}", self.rest()))
        }
    }

    fn number(&mut self) -> std::result::Result<f64, String> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')))
            .unwrap_or(rest.len());
        let tok = &rest[..len];
        let v: f64 = tok
            .parse()
            .map_err(|_| format!("invalid number {:?}", if tok.is_empty() { rest } else { tok }))?;
        if !v.is_finite() {
            return Err(format!("non-finite coordinate {tok}"));
        }
        self.pos += len;
        Ok(v)
    }

    fn coord_list(&mut self) -> std::result::Result<Vec<Point>, String> {
        self.expect('(')?;
        let mut pts = Vec::new();
        loop {
            let x = self.number()?;
            let y = self.number()?;
            pts.push(Point::new(x, y));
            if !self.eat(',') {
                break;
            }
        }
        self.expect(')')?;
        Ok(pts)
    }
}
