//! Message creation schedule.

use crate::error::{Error, Result};
use crate::ids::{MessageId, NodeId};
use crate::mobility::time_reached;
use crate::rng::RandomStream;

pub const DEFAULT_INTERVAL_RANGE: (f64, f64) = (25.0, 35.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSpec {
    pub id_prefix: String,
    /// Seconds between consecutive creations.
    pub interval_range: (f64, f64),
    /// Message size in bytes, inclusive.
    pub size_range: (u64, u64),
    pub sources: Vec<NodeId>,
    pub destinations: Vec<NodeId>,
    pub active_window: (f64, f64),
}

impl TrafficSpec {
    /// `key` is the settings namespace, e.g. `Events1`.
    pub fn validate(&self, key: &str) -> Result<()> {
        let (imin, imax) = self.interval_range;
        if !(imin > 0.0 && imin <= imax && imax.is_finite()) {
            return Err(Error::config(
                format!("{key}.interval"),
                format!("need 0 < min <= max, got {imin},{imax}"),
            ));
        }
        let (smin, smax) = self.size_range;
        if !(smin > 0 && smin <= smax) {
            return Err(Error::config(
                format!("{key}.size"),
                format!("need 0 < min <= max, got {smin},{smax}"),
            ));
        }
        if self.sources.is_empty() {
            return Err(Error::config(format!("{key}.hosts"), "no source nodes"));
        }
        if self.destinations.is_empty() {
            return Err(Error::config(format!("{key}.tohosts"), "no destination nodes"));
        }
        if self.sources.len() == 1 && self.destinations == self.sources {
            return Err(Error::config(
                format!("{key}.tohosts"),
                "the only destination is the only source",
            ));
        }
        let (start, end) = self.active_window;
        if !(start >= 0.0 && start <= end) {
            return Err(Error::config(
                format!("{key}.time"),
                format!("need 0 <= start <= end, got {start},{end}"),
            ));
        }
        if self.id_prefix.is_empty() || self.id_prefix.contains(char::is_whitespace) {
            return Err(Error::config(
                format!("{key}.prefix"),
                "message id prefix must be a non-empty token",
            ));
        }
        Ok(())
    }
}

/// A message the generator wants created this tick.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageRequest {
    pub id: MessageId,
    pub source: NodeId,
    pub destination: NodeId,
    pub size: u64,
    pub created_at: f64,
}

#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    spec: TrafficSpec,
    next_at: f64,
    counter: u64,
}

impl TrafficGenerator {
    /// The first creation falls one interval draw after the window opens.
    pub fn new(spec: TrafficSpec, rng: &mut RandomStream) -> Self {
        let next_at =
            spec.active_window.0 + rng.uniform(spec.interval_range.0, spec.interval_range.1);
        Self {
            spec,
            next_at,
            counter: 0,
        }
    }

    pub fn spec(&self) -> &TrafficSpec {
        &self.spec
    }

    pub fn next_at(&self) -> f64 {
        self.next_at
    }

    /// Emits at most one message per call, when `now` has reached the
    /// scheduled time inside the active window.
    pub fn generate(&mut self, rng: &mut RandomStream, now: f64, tick: f64) -> Option<MessageRequest> {
        let (_, end) = self.spec.active_window;
        if !time_reached(now, self.next_at, tick) || !time_reached(end, now, tick) {
            return None;
        }
        self.next_at = now + rng.uniform(self.spec.interval_range.0, self.spec.interval_range.1);

        let source = self.spec.sources[rng.index(self.spec.sources.len())];
        let targets: Vec<NodeId> = self
            .spec
            .destinations
            .iter()
            .copied()
            .filter(|&d| d != source)
            .collect();
        if targets.is_empty() {
            return None;
        }
        let destination = targets[rng.index(targets.len())];
        let size = rng.uniform_u64(self.spec.size_range.0, self.spec.size_range.1);
        self.counter += 1;
        Some(MessageRequest {
            id: MessageId::new(&self.spec.id_prefix, self.counter),
            source,
            destination,
            size,
            created_at: now,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, StreamLabel};

    fn spec(interval: (f64, f64), size: (u64, u64)) -> TrafficSpec {
        TrafficSpec {
            id_prefix: "M".into(),
            interval_range: interval,
            size_range: size,
            sources: vec![NodeId(0)],
            destinations: vec![NodeId(1)],
            active_window: (0.0, 1800.0),
        }
    }

    fn run(spec: TrafficSpec, seed: u64, tick: f64, duration: f64) -> Vec<MessageRequest> {
        let mut rng = seeded_rng(seed, StreamLabel::Traffic);
        let mut gen = TrafficGenerator::new(spec, &mut rng);
        let ticks = (duration / tick).round() as u64;
        (1..=ticks)
            .filter_map(|i| gen.generate(&mut rng, i as f64 * tick, tick))
            .collect()
    }

    #[test]
    fn fixed_cadence_yields_sixty() {
        let out = run(spec((30.0, 30.0), (100, 100)), 1, 0.1, 1800.0);
        assert_eq!(out.len(), 60);
        assert_eq!(out[0].id.as_str(), "M1");
        assert_eq!(out[59].id.as_str(), "M60");
    }

    #[test]
    fn sizes_stay_in_range() {
        let out = run(spec((25.0, 35.0), (2_200_000, 2_400_000)), 7, 0.5, 1800.0);
        assert!(!out.is_empty());
        assert!(out
            .iter()
            .all(|m| (2_200_000..=2_400_000).contains(&m.size)));
    }

    #[test]
    fn timestamps_monotone_and_inside_window() {
        let mut s = spec((5.0, 15.0), (1, 10));
        s.active_window = (100.0, 400.0);
        let out = run(s, 3, 0.5, 600.0);
        assert!(out.windows(2).all(|w| w[0].created_at <= w[1].created_at));
        assert!(out
            .iter()
            .all(|m| m.created_at >= 100.0 && m.created_at <= 400.0 + 1e-9));
    }

    #[test]
    fn source_never_targets_itself() {
        let mut s = spec((1.0, 1.0), (1, 1));
        s.sources = vec![NodeId(0), NodeId(1), NodeId(2)];
        s.destinations = vec![NodeId(0), NodeId(1)];
        let out = run(s, 5, 1.0, 500.0);
        assert!(out.iter().all(|m| m.source != m.destination));
    }

    #[test]
    fn validation_errors_name_keys() {
        let mut s = spec((30.0, 25.0), (1, 1));
        assert!(matches!(s.validate("Events1"), Err(Error::Config { key, .. }) if key == "Events1.interval"));
        s.interval_range = (25.0, 30.0);
        s.sources.clear();
        assert!(matches!(s.validate("Events1"), Err(Error::Config { key, .. }) if key == "Events1.hosts"));
        s.sources = vec![NodeId(1)];
        assert!(matches!(s.validate("Events1"), Err(Error::Config { key, .. }) if key == "Events1.tohosts"));
        s.destinations.clear();
        assert!(s.validate("Events1").is_err());
    }
}
