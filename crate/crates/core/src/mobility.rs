//! Node movement: stationary infrastructure and vehicles that drive shortest
//! paths between random map vertices, pausing between trips.

use crate::error::{Error, Result};
use crate::map::{MapGraph, MapPath, Point};
use crate::rng::RandomStream;

/// Attempts at drawing a reachable destination before idling for a tick.
pub const MAX_DESTINATION_ATTEMPTS: usize = 10;

pub const DEFAULT_SPEED_RANGE: (f64, f64) = (2.7, 13.9);
pub const DEFAULT_WAIT_RANGE: (f64, f64) = (0.0, 120.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovementKind {
    Stationary,
    MapShortestPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovementSpec {
    pub kind: MovementKind,
    pub fixed_position: Option<Point>,
    pub speed_range: (f64, f64),
    pub wait_range: (f64, f64),
}

impl MovementSpec {
    pub fn stationary(at: Point) -> Self {
        Self {
            kind: MovementKind::Stationary,
            fixed_position: Some(at),
            speed_range: DEFAULT_SPEED_RANGE,
            wait_range: DEFAULT_WAIT_RANGE,
        }
    }

    pub fn vehicle(speed_range: (f64, f64), wait_range: (f64, f64)) -> Self {
        Self {
            kind: MovementKind::MapShortestPath,
            fixed_position: None,
            speed_range,
            wait_range,
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.kind == MovementKind::Stationary
    }

    /// Checks range ordering. `prefix` names the settings namespace used in
    /// error messages.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let (smin, smax) = self.speed_range;
        if !(smin > 0.0 && smin <= smax && smax.is_finite()) {
            return Err(Error::config(
                format!("{prefix}.speed"),
                format!("need 0 < min <= max, got {smin},{smax}"),
            ));
        }
        let (wmin, wmax) = self.wait_range;
        if !(wmin >= 0.0 && wmin <= wmax && wmax.is_finite()) {
            return Err(Error::config(
                format!("{prefix}.waitTime"),
                format!("need 0 <= min <= max, got {wmin},{wmax}"),
            ));
        }
        if self.is_stationary() && self.fixed_position.is_none() {
            return Err(Error::config(
                format!("{prefix}.nodeLocation"),
                "stationary movement requires a fixed position",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MovementMode {
    Stationary,
    WaitingUntil(f64),
    Traversing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovementState {
    pub mode: MovementMode,
    pub path: MapPath,
    /// Meters travelled along `path`.
    pub path_offset: f64,
    pub speed: f64,
    /// Index into `path.vertices` of the start of the current leg.
    pub leg: usize,
    leg_start: f64,
}

impl MovementState {
    fn parked(vertex: Option<usize>, mode: MovementMode, speed: f64) -> Self {
        Self {
            mode,
            path: MapPath {
                vertices: vertex.into_iter().collect(),
                total_length: 0.0,
            },
            path_offset: 0.0,
            speed,
            leg: 0,
            leg_start: 0.0,
        }
    }

    /// Vertex the node currently stands on or last departed from.
    pub fn anchor_vertex(&self) -> Option<usize> {
        self.path.vertices.get(self.leg).copied()
    }

    /// Starts traversing `path` at `speed` from its first vertex.
    pub fn start_trip(&mut self, path: MapPath, speed: f64) {
        self.path = path;
        self.path_offset = 0.0;
        self.leg = 0;
        self.leg_start = 0.0;
        self.speed = speed;
        self.mode = MovementMode::Traversing;
    }

    /// Position implied by the path and offset.
    pub fn position(&self, graph: &MapGraph) -> Option<Point> {
        let verts = &self.path.vertices;
        let &first = verts.first()?;
        if verts.len() == 1 {
            return Some(graph.vertex(first));
        }
        if self.leg + 1 >= verts.len() {
            return Some(graph.vertex(*verts.last()?));
        }
        let a = graph.vertex(verts[self.leg]);
        let b = graph.vertex(verts[self.leg + 1]);
        let len = graph.edge_length(verts[self.leg], verts[self.leg + 1])?;
        let t = if len > 0.0 {
            ((self.path_offset - self.leg_start) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Some(a.lerp(&b, t))
    }
}

/// True once `now` has reached `deadline`, tolerating float drift of tick sums.
pub fn time_reached(now: f64, deadline: f64, tick: f64) -> bool {
    now >= deadline - 1e-6 * tick
}

pub fn init_position(
    spec: &MovementSpec,
    graph: &MapGraph,
    rng: &mut RandomStream,
    now: f64,
) -> Result<(Point, MovementState)> {
    match spec.kind {
        MovementKind::Stationary => {
            let fixed = spec.fixed_position.ok_or_else(|| {
                Error::config("nodeLocation", "stationary movement requires a fixed position")
            })?;
            // Off-map deployments (no road graph) keep the raw coordinate.
            let (pos, vertex) = if graph.is_empty() {
                (fixed, None)
            } else {
                let v = graph.nearest_vertex(fixed)?;
                (graph.vertex(v), Some(v))
            };
            Ok((
                pos,
                MovementState::parked(vertex, MovementMode::Stationary, 0.0),
            ))
        }
        MovementKind::MapShortestPath => {
            if graph.is_empty() {
                return Err(Error::World(
                    "map-based movement needs a non-empty road map".into(),
                ));
            }
            let v = rng.index(graph.vertex_count());
            let until = now + rng.uniform(spec.wait_range.0, spec.wait_range.1);
            Ok((
                graph.vertex(v),
                MovementState::parked(
                    Some(v),
                    MovementMode::WaitingUntil(until),
                    spec.speed_range.0,
                ),
            ))
        }
    }
}

/// Advances one tick ending at `now`. Returns the new position.
pub fn advance(
    state: &mut MovementState,
    spec: &MovementSpec,
    now: f64,
    dt: f64,
    graph: &MapGraph,
    rng: &mut RandomStream,
) -> Point {
    match state.mode {
        MovementMode::Stationary => {
            return state
                .position(graph)
                .or(spec.fixed_position)
                .unwrap_or_default();
        }
        MovementMode::WaitingUntil(t) => {
            if !time_reached(now, t, dt) {
                return state.position(graph).unwrap_or_default();
            }
            if !plan_trip(state, spec, now, dt, graph, rng) {
                return state.position(graph).unwrap_or_default();
            }
        }
        MovementMode::Traversing => {}
    }

    state.path_offset += state.speed * dt;
    let total = state.path.total_length;
    if state.path_offset >= total - 1e-9 {
        // residual distance past the end is discarded
        state.path_offset = total;
        state.leg = state.path.vertices.len() - 1;
        state.leg_start = total;
        state.mode = MovementMode::WaitingUntil(
            now + rng.uniform(spec.wait_range.0, spec.wait_range.1),
        );
    } else {
        let verts = &state.path.vertices;
        while state.leg + 1 < verts.len() {
            let len = graph
                .edge_length(verts[state.leg], verts[state.leg + 1])
                .unwrap_or(0.0);
            if state.path_offset < state.leg_start + len {
                break;
            }
            state.leg_start += len;
            state.leg += 1;
        }
    }
    state.position(graph).unwrap_or_default()
}

/// Picks a reachable random destination and starts the trip. On failure the
/// node waits one more tick.
fn plan_trip(
    state: &mut MovementState,
    spec: &MovementSpec,
    now: f64,
    dt: f64,
    graph: &MapGraph,
    rng: &mut RandomStream,
) -> bool {
    let Some(here) = state.path.vertices.last().copied() else {
        state.mode = MovementMode::WaitingUntil(now + dt);
        return false;
    };
    for _ in 0..MAX_DESTINATION_ATTEMPTS {
        let dest = rng.index(graph.vertex_count());
        if dest == here {
            continue;
        }
        if let Ok(Some(path)) = graph.shortest_path(here, dest) {
            let speed = rng.uniform(spec.speed_range.0, spec.speed_range.1);
            state.start_trip(path, speed);
            return true;
        }
    }
    state.path = MapPath {
        vertices: vec![here],
        total_length: 0.0,
    };
    state.leg = 0;
    state.path_offset = 0.0;
    state.leg_start = 0.0;
    state.mode = MovementMode::WaitingUntil(now + dt);
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::parse_wkt;
    use crate::rng::{seeded_rng, StreamLabel};

    #[test]
    fn stationary_snaps_and_stays() {
        let g = MapGraph::synthetic_grid(10, 10, 100.0);
        let spec = MovementSpec::stationary(Point::new(500.0, 500.0));
        let mut rng = seeded_rng(1, StreamLabel::Movement);
        let (p, mut st) = init_position(&spec, &g, &mut rng, 0.0).unwrap();
        assert_eq!(p, Point::new(500.0, 500.0));
        for i in 1..=100 {
            let q = advance(&mut st, &spec, i as f64 * 0.1, 0.1, &g, &mut rng);
            assert_eq!(q, p);
        }
        assert_eq!(st.mode, MovementMode::Stationary);
    }

    #[test]
    fn stationary_snaps_off_vertex_point() {
        let g = MapGraph::synthetic_grid(10, 10, 100.0);
        let spec = MovementSpec::stationary(Point::new(530.0, 480.0));
        let mut rng = seeded_rng(1, StreamLabel::Movement);
        let (p, _) = init_position(&spec, &g, &mut rng, 0.0).unwrap();
        assert_eq!(p, Point::new(500.0, 500.0));
    }

    #[test]
    fn stationary_without_position_is_config_error() {
        let spec = MovementSpec {
            fixed_position: None,
            ..MovementSpec::stationary(Point::default())
        };
        let mut rng = seeded_rng(1, StreamLabel::Movement);
        let err = init_position(&spec, &MapGraph::default(), &mut rng, 0.0).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn vehicle_needs_map() {
        let spec = MovementSpec::vehicle(DEFAULT_SPEED_RANGE, DEFAULT_WAIT_RANGE);
        let mut rng = seeded_rng(1, StreamLabel::Movement);
        let err = init_position(&spec, &MapGraph::default(), &mut rng, 0.0).unwrap_err();
        assert!(matches!(err, Error::World(_)));
    }

    #[test]
    fn vehicle_init_is_deterministic() {
        let g = MapGraph::synthetic_grid(10, 10, 100.0);
        let spec = MovementSpec::vehicle(DEFAULT_SPEED_RANGE, DEFAULT_WAIT_RANGE);
        let a = init_position(&spec, &g, &mut seeded_rng(42, StreamLabel::Movement), 0.0).unwrap();
        let b = init_position(&spec, &g, &mut seeded_rng(42, StreamLabel::Movement), 0.0).unwrap();
        assert_eq!(a, b);
        assert!(matches!(a.1.mode, MovementMode::WaitingUntil(t) if (0.0..=120.0).contains(&t)));
    }

    fn straight_trip(length: f64, speed: f64) -> (MapGraph, MovementState, MovementSpec) {
        let g = parse_wkt(&format!("LINESTRING (0 0, {length} 0)")).unwrap();
        let spec = MovementSpec::vehicle((speed, speed), (1000.0, 1000.0));
        let mut st = MovementState::parked(Some(0), MovementMode::Traversing, speed);
        st.start_trip(g.shortest_path(0, 1).unwrap().unwrap(), speed);
        (g, st, spec)
    }

    #[test]
    fn one_tick_moves_speed_times_dt() {
        let (g, mut st, spec) = straight_trip(100.0, 10.0);
        let mut rng = seeded_rng(1, StreamLabel::Movement);
        let p = advance(&mut st, &spec, 0.1, 0.1, &g, &mut rng);
        assert!((p.x - 1.0).abs() < 1e-12 && p.y == 0.0);
    }

    #[test]
    fn arrival_after_exact_tick_count() {
        let (g, mut st, spec) = straight_trip(100.0, 10.0);
        let mut rng = seeded_rng(1, StreamLabel::Movement);
        for i in 1..100 {
            advance(&mut st, &spec, i as f64 * 0.1, 0.1, &g, &mut rng);
            assert_eq!(st.mode, MovementMode::Traversing, "tick {i}");
        }
        let p = advance(&mut st, &spec, 10.0, 0.1, &g, &mut rng);
        assert_eq!(p, Point::new(100.0, 0.0));
        assert!(matches!(st.mode, MovementMode::WaitingUntil(t) if (t - 1010.0).abs() < 1e-9));
    }

    #[test]
    fn overshoot_stops_at_path_end() {
        let (g, mut st, spec) = straight_trip(1.5, 10.0);
        let mut rng = seeded_rng(1, StreamLabel::Movement);
        advance(&mut st, &spec, 0.1, 0.1, &g, &mut rng);
        let p = advance(&mut st, &spec, 0.2, 0.1, &g, &mut rng);
        assert_eq!(p, Point::new(1.5, 0.0));
        assert_eq!(st.path_offset, 1.5);
    }

    #[test]
    fn corners_interpolate_on_next_leg() {
        let g = parse_wkt("LINESTRING (0 0, 10 0, 10 10)").unwrap();
        let spec = MovementSpec::vehicle((5.0, 5.0), (0.0, 0.0));
        let mut st = MovementState::parked(Some(0), MovementMode::Traversing, 5.0);
        st.start_trip(g.shortest_path(0, 2).unwrap().unwrap(), 5.0);
        let mut rng = seeded_rng(1, StreamLabel::Movement);
        let p = advance(&mut st, &spec, 3.0, 3.0, &g, &mut rng);
        assert!((p.x - 10.0).abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12, "{p:?}");
        assert_eq!(st.leg, 1);
    }

    #[test]
    fn disconnected_map_falls_back_to_waiting() {
        // vertex 0 sits on a component of its own pair; destinations elsewhere fail
        let g = parse_wkt("LINESTRING (0 0, 1 0)\nLINESTRING (50 50, 60 50)").unwrap();
        let spec = MovementSpec::vehicle((1.0, 1.0), (0.0, 0.0));
        let mut st = MovementState::parked(Some(0), MovementMode::WaitingUntil(0.0), 1.0);
        let mut rng = seeded_rng(3, StreamLabel::Movement);
        let mut trips = 0;
        for i in 1..=200 {
            let now = i as f64;
            let was_waiting = matches!(st.mode, MovementMode::WaitingUntil(_));
            let p = advance(&mut st, &spec, now, 1.0, &g, &mut rng);
            assert!(p.y == 0.0 && (0.0..=1.0).contains(&p.x));
            if was_waiting && st.mode == MovementMode::Traversing {
                trips += 1;
            }
        }
        // only vertex 1 is ever reachable from vertex 0 and back
        assert!(trips == 0 || st.path.vertices.iter().all(|&v| v < 2));
    }

    #[test]
    fn single_vertex_map_idles() {
        let mut b = crate::map::MapBuilder::new();
        b.vertex(Point::new(3.0, 4.0));
        let g = b.build();
        let spec = MovementSpec::vehicle((1.0, 1.0), (0.0, 0.0));
        let mut rng = seeded_rng(3, StreamLabel::Movement);
        let (_, mut st) = init_position(&spec, &g, &mut rng, 0.0).unwrap();
        for i in 1..=5 {
            let p = advance(&mut st, &spec, i as f64, 1.0, &g, &mut rng);
            assert_eq!(p, Point::new(3.0, 4.0));
            assert!(matches!(st.mode, MovementMode::WaitingUntil(t) if (t - (i as f64 + 1.0)).abs() < 1e-12));
        }
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let spec = MovementSpec::vehicle((5.0, 1.0), (0.0, 1.0));
        assert!(matches!(spec.validate("Group1"), Err(Error::Config { key, .. }) if key == "Group1.speed"));
        let spec = MovementSpec::vehicle((1.0, 5.0), (-1.0, 1.0));
        assert!(matches!(spec.validate("Group1"), Err(Error::Config { key, .. }) if key == "Group1.waitTime"));
        let spec = MovementSpec::vehicle((0.0, 5.0), (0.0, 1.0));
        assert!(spec.validate("G").is_err());
    }
}
