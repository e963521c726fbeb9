//! Turns a settings document into a validated [`Scenario`].

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::config::settings::{parse_bool, parse_count, parse_list, parse_pair, parse_real, SettingsDoc};
use crate::error::{Error, Result};
use crate::ids::NodeId;
use crate::link::{InterfaceSpec, SpatialIndex};
use crate::map::{parse_wkt_with, MapGraph, Point, WktOptions};
use crate::mobility::{MovementKind, MovementSpec, DEFAULT_SPEED_RANGE, DEFAULT_WAIT_RANGE};
use crate::reports::{ReportKind, ReportSettings, DEFAULT_SAMPLE_INTERVAL};
use crate::routing::{QueueOrder, RouterKind, DEFAULT_SPRAY_COPIES};
use crate::sim::{GroupSpec, Scenario, DEFAULT_TICK};
use crate::traffic::{TrafficSpec, DEFAULT_INTERVAL_RANGE};

pub const DEFAULT_BUFFER: u64 = 100_000_000;

const SCENARIO_KEYS: &[&str] = &[
    "Scenario.name",
    "Scenario.seed",
    "Scenario.endTime",
    "Scenario.updateInterval",
    "Scenario.nrofHostGroups",
    "SprayAndWaitRouter.nrofCopies",
    "SprayAndWaitRouter.binaryMode",
    "Router.queueOrder",
    "Events.nrof",
    "MapBasedMovement.mapFile",
    "MapBasedMovement.snapEpsilon",
    "Map.gridSize",
    "Map.gridSpacing",
    "Report.reports",
    "Report.granularity",
    "Report.bufferIncludeStatic",
    "Connectivity.spatialIndex",
];

const GROUP_FIELDS: &[&str] = &[
    "groupID",
    "nrofHosts",
    "router",
    "bufferSize",
    "msgTtl",
    "movementModel",
    "speed",
    "waitTime",
    "nodeLocation",
    "interface.transmitSpeed",
    "interface.transmitRange",
];

const EVENT_FIELDS: &[&str] = &["interval", "size", "hosts", "tohosts", "prefix", "time"];

/// Where an effective setting came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Line { line: usize, overrides: Vec<usize> },
    Default,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainLine {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

impl std::fmt::Display for ExplainLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {}", self.key, self.value)?;
        match &self.origin {
            Origin::Default => write!(f, "  (default)"),
            Origin::Line { line: 0, .. } => write!(f, "  (set programmatically)"),
            Origin::Line { line, overrides } if overrides.is_empty() => write!(f, "  (line {line})"),
            Origin::Line { line, overrides } => {
                let prev: Vec<String> = overrides.iter().map(|l| l.to_string()).collect();
                write!(f, "  (line {line}, overrides line {})", prev.join(", "))
            }
        }
    }
}

fn split_indexed<'a>(key: &'a str, ns: &str) -> Option<(Option<usize>, &'a str)> {
    let rest = key.strip_prefix(ns)?;
    let digits = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let field = rest[digits..].strip_prefix('.')?;
    if digits == 0 {
        Some((None, field))
    } else {
        Some((Some(rest[..digits].parse().ok()?), field))
    }
}

/// Keys in `doc` the scenario builder does not understand.
pub fn unknown_keys(doc: &SettingsDoc, groups: usize, events: usize) -> Vec<String> {
    doc.keys()
        .filter(|k| {
            if SCENARIO_KEYS.contains(k) {
                return false;
            }
            if let Some((idx, field)) = split_indexed(k, "Group") {
                let idx_ok = idx.is_none_or(|i| (1..=groups).contains(&i));
                return !(idx_ok && GROUP_FIELDS.contains(&field));
            }
            if let Some((Some(i), field)) = split_indexed(k, "Events") {
                return !((1..=events).contains(&i) && EVENT_FIELDS.contains(&field));
            }
            true
        })
        .map(String::from)
        .collect()
}

struct Reader<'a> {
    doc: &'a SettingsDoc,
    explain: Vec<ExplainLine>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, key: &str) -> Option<&'a str> {
        let entry = self.doc.entry(key)?;
        self.explain.push(ExplainLine {
            key: key.to_string(),
            value: entry.value.clone(),
            origin: Origin::Line {
                line: entry.line,
                overrides: entry.overridden.iter().map(|(l, _)| *l).collect(),
            },
        });
        Some(entry.value.as_str())
    }

    fn default(&mut self, key: &str, value: impl std::fmt::Display) {
        self.explain.push(ExplainLine {
            key: key.to_string(),
            value: value.to_string(),
            origin: Origin::Default,
        });
    }

    /// Value of the first present key in `keys`, parsed; otherwise the
    /// default, recorded under the first key.
    fn value<T: Clone + std::fmt::Debug>(
        &mut self,
        keys: &[&str],
        parse: impl Fn(&str) -> Option<T>,
        default: Option<(T, String)>,
        what: &str,
    ) -> Result<T> {
        for key in keys {
            if let Some(raw) = self.raw(key) {
                return parse(raw).ok_or_else(|| {
                    Error::config(*key, format!("expected {what}, got {raw:?}"))
                });
            }
        }
        match default {
            Some((v, shown)) => {
                self.default(keys[0], shown);
                Ok(v)
            }
            None => Err(Error::config(keys[0], "missing mandatory setting")),
        }
    }
}

fn fmt_pair(p: (f64, f64)) -> String {
    format!("{},{}", p.0, p.1)
}

/// Loads the road map named by the settings: an explicit WKT file, a
/// synthetic grid, or nothing. `base` resolves relative map paths.
pub fn load_map(doc: &SettingsDoc, base: Option<&Path>, override_path: Option<&Path>) -> Result<MapGraph> {
    let snap = match doc.get("MapBasedMovement.snapEpsilon") {
        Some(v) => Some(parse_real(v).ok_or_else(|| {
            Error::config("MapBasedMovement.snapEpsilon", format!("expected a number, got {v:?}"))
        })?),
        None => None,
    };
    let file = match (override_path, doc.get("MapBasedMovement.mapFile")) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(f)) => {
            let p = Path::new(f);
            Some(match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p.to_path_buf(),
            })
        }
        (None, None) => None,
    };
    if let Some(path) = file {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        return parse_wkt_with(&text, WktOptions { snap_epsilon: snap });
    }
    if let Some(size) = doc.get("Map.gridSize") {
        let (cols, rows) = parse_pair(size, parse_count)
            .filter(|&(c, r)| c >= 1 && r >= 1)
            .ok_or_else(|| Error::config("Map.gridSize", format!("expected cols,rows, got {size:?}")))?;
        let spacing = match doc.get("Map.gridSpacing") {
            Some(s) => parse_real(s)
                .filter(|&v| v > 0.0)
                .ok_or_else(|| Error::config("Map.gridSpacing", format!("expected a positive number, got {s:?}")))?,
            None => 100.0,
        };
        return Ok(MapGraph::synthetic_grid(cols as usize, rows as usize, spacing));
    }
    Ok(MapGraph::default())
}

pub fn build_scenario(doc: &SettingsDoc, map: MapGraph) -> Result<Scenario> {
    build_scenario_explained(doc, map).map(|(s, _)| s)
}

/// Builds the scenario and reports every effective setting with its origin.
pub fn build_scenario_explained(doc: &SettingsDoc, map: MapGraph) -> Result<(Scenario, Vec<ExplainLine>)> {
    let mut r = Reader {
        doc,
        explain: Vec::new(),
    };

    let groups_n = r.value(&["Scenario.nrofHostGroups"], parse_count, None, "a group count")? as usize;
    if groups_n == 0 {
        return Err(Error::config("Scenario.nrofHostGroups", "at least one group is required"));
    }
    let events_n = r.value(&["Events.nrof"], parse_count, Some((0, "0".into())), "an event generator count")? as usize;

    let unknown = unknown_keys(doc, groups_n, events_n);
    if !unknown.is_empty() {
        return Err(Error::config(unknown.join(", "), "unknown settings"));
    }

    let duration = r.value(&["Scenario.endTime"], parse_real, None, "seconds")?;
    let name = r.value(
        &["Scenario.name"],
        |s| Some(s.to_string()),
        Some(("scenario".into(), "scenario".into())),
        "a name",
    )?;
    let seed = r.value(&["Scenario.seed"], parse_count, Some((0, "0".into())), "an unsigned seed")?;
    let tick = r.value(
        &["Scenario.updateInterval"],
        parse_real,
        Some((DEFAULT_TICK, DEFAULT_TICK.to_string())),
        "seconds",
    )?;

    let copies = r.value(
        &["SprayAndWaitRouter.nrofCopies"],
        |s| parse_count(s).and_then(|v| u32::try_from(v).ok()),
        Some((DEFAULT_SPRAY_COPIES, DEFAULT_SPRAY_COPIES.to_string())),
        "a copy count",
    )?;
    let binary = r.value(
        &["SprayAndWaitRouter.binaryMode"],
        parse_bool,
        Some((false, "false".into())),
        "true or false",
    )?;
    let queue_order = r.value(
        &["Router.queueOrder"],
        |s| match s {
            "fifo" => Some(QueueOrder::Fifo),
            "random" => Some(QueueOrder::Random),
            _ => None,
        },
        Some((QueueOrder::Fifo, "fifo".into())),
        "fifo or random",
    )?;

    let mut groups = Vec::with_capacity(groups_n);
    for gi in 1..=groups_n {
        let k = |field: &str| [format!("Group{gi}.{field}"), format!("Group.{field}")];
        macro_rules! keys {
            ($field:expr) => {{
                let [a, b] = k($field);
                [a, b]
            }};
        }
        let ks = keys!("groupID");
        let prefix = r.value(&[&ks[0], &ks[1]], |s| Some(s.to_string()), None, "a node id prefix")?;
        let ks = keys!("nrofHosts");
        let count = r.value(&[&ks[0], &ks[1]], parse_count, None, "a host count")? as usize;
        let ks = keys!("router");
        let router = r.value(
            &[&ks[0], &ks[1]],
            |s| match s {
                "EpidemicRouter" => Some(RouterKind::Epidemic),
                "SprayAndWaitRouter" => Some(RouterKind::SprayAndWait { copies, binary }),
                _ => None,
            },
            Some((RouterKind::Epidemic, "EpidemicRouter".into())),
            "EpidemicRouter or SprayAndWaitRouter",
        )?;
        let ks = keys!("bufferSize");
        let buffer_capacity = r.value(
            &[&ks[0], &ks[1]],
            parse_count,
            Some((DEFAULT_BUFFER, "100M".into())),
            "a byte count",
        )?;
        let ks = keys!("msgTtl");
        let ttl = r.value(&[&ks[0], &ks[1]], parse_real, Some((duration, duration.to_string())), "seconds")?;
        let ks = keys!("movementModel");
        let kind = r.value(
            &[&ks[0], &ks[1]],
            |s| match s {
                "StationaryMovement" => Some(MovementKind::Stationary),
                "ShortestPathMapBasedMovement" => Some(MovementKind::MapShortestPath),
                _ => None,
            },
            Some((MovementKind::MapShortestPath, "ShortestPathMapBasedMovement".into())),
            "StationaryMovement or ShortestPathMapBasedMovement",
        )?;
        let ks = keys!("speed");
        let speed_range = r.value(
            &[&ks[0], &ks[1]],
            |s| parse_pair(s, parse_real),
            Some((DEFAULT_SPEED_RANGE, fmt_pair(DEFAULT_SPEED_RANGE))),
            "min,max m/s",
        )?;
        let ks = keys!("waitTime");
        let wait_range = r.value(
            &[&ks[0], &ks[1]],
            |s| parse_pair(s, parse_real),
            Some((DEFAULT_WAIT_RANGE, fmt_pair(DEFAULT_WAIT_RANGE))),
            "min,max seconds",
        )?;
        let fixed_position = if kind == MovementKind::Stationary {
            let ks = keys!("nodeLocation");
            let (x, y) = r.value(&[&ks[0], &ks[1]], |s| parse_pair(s, parse_real), None, "x,y meters")?;
            Some(Point::new(x, y))
        } else {
            None
        };
        let ks = keys!("interface.transmitSpeed");
        let transmit_speed = r.value(
            &[&ks[0], &ks[1]],
            parse_count,
            Some((InterfaceSpec::BLUETOOTH5.transmit_speed, "250k".into())),
            "bytes per second",
        )?;
        let ks = keys!("interface.transmitRange");
        let range = r.value(
            &[&ks[0], &ks[1]],
            parse_real,
            Some((InterfaceSpec::BLUETOOTH5.range, InterfaceSpec::BLUETOOTH5.range.to_string())),
            "meters",
        )?;
        groups.push(GroupSpec {
            prefix,
            count,
            router,
            buffer_capacity,
            interface: InterfaceSpec {
                transmit_speed,
                range,
            },
            movement: MovementSpec {
                kind,
                fixed_position,
                speed_range,
                wait_range,
            },
            ttl,
        });
    }

    let names: Vec<(String, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| (0..g.count).map(move |i| (format!("{}{}", g.prefix, i), gi)))
        .collect();
    let resolve_hosts = |key: &str, raw: &str| -> Result<Vec<NodeId>> {
        let mut out = BTreeSet::new();
        for tok in parse_list(raw) {
            if let Some(gi) = groups.iter().position(|g| g.prefix == tok) {
                out.extend(
                    names
                        .iter()
                        .enumerate()
                        .filter(|(_, (_, g))| *g == gi)
                        .map(|(i, _)| NodeId(i)),
                );
            } else if let Some(i) = names.iter().position(|(n, _)| *n == tok) {
                out.insert(NodeId(i));
            } else {
                return Err(Error::config(key, format!("unknown host or group {tok:?}")));
            }
        }
        Ok(out.into_iter().collect())
    };

    let mut traffic = Vec::with_capacity(events_n);
    for ei in 1..=events_n {
        let key = |f: &str| format!("Events{ei}.{f}");
        let interval_range = r.value(
            &[&key("interval")],
            |s| parse_pair(s, parse_real),
            Some((DEFAULT_INTERVAL_RANGE, fmt_pair(DEFAULT_INTERVAL_RANGE))),
            "min,max seconds",
        )?;
        let size_range = r.value(&[&key("size")], |s| parse_pair(s, parse_count), None, "min,max bytes")?;
        let hosts_raw = r.value(&[&key("hosts")], |s| Some(s.to_string()), None, "host list")?;
        let sources = resolve_hosts(&key("hosts"), &hosts_raw)?;
        let to_raw = r.value(&[&key("tohosts")], |s| Some(s.to_string()), None, "host list")?;
        let destinations = resolve_hosts(&key("tohosts"), &to_raw)?;
        let default_prefix = if events_n == 1 { "M".to_string() } else { format!("M{ei}_") };
        let id_prefix = r.value(
            &[&key("prefix")],
            |s| Some(s.to_string()),
            Some((default_prefix.clone(), default_prefix)),
            "a message id prefix",
        )?;
        let active_window = r.value(
            &[&key("time")],
            |s| parse_pair(s, parse_real),
            Some(((0.0, duration), fmt_pair((0.0, duration)))),
            "start,end seconds",
        )?;
        traffic.push(TrafficSpec {
            id_prefix,
            interval_range,
            size_range,
            sources,
            destinations,
            active_window,
        });
    }

    let kinds = r.value(
        &["Report.reports"],
        |s| parse_list(s).iter().map(|n| ReportKind::from_name(n)).collect::<Option<Vec<_>>>(),
        Some((
            ReportKind::ALL.to_vec(),
            ReportKind::ALL.map(|k| k.name()).join(", "),
        )),
        "a list of report names",
    )?;
    let sample_interval = r.value(
        &["Report.granularity"],
        parse_real,
        Some((DEFAULT_SAMPLE_INTERVAL, DEFAULT_SAMPLE_INTERVAL.to_string())),
        "seconds",
    )?;
    let include_static = r.value(
        &["Report.bufferIncludeStatic"],
        parse_bool,
        Some((false, "false".into())),
        "true or false",
    )?;
    let spatial_index = r.value(
        &["Connectivity.spatialIndex"],
        |s| match s {
            "auto" => Some(SpatialIndex::Auto),
            "on" => Some(SpatialIndex::Always),
            "off" => Some(SpatialIndex::Never),
            _ => None,
        },
        Some((SpatialIndex::Auto, "auto".into())),
        "auto, on or off",
    )?;

    let scenario = Scenario {
        name,
        seed,
        tick,
        duration,
        groups,
        world: Arc::new(map),
        traffic,
        reports: ReportSettings {
            kinds,
            sample_interval,
            include_static,
        },
        queue_order,
        spatial_index,
    };
    scenario.validate()?;
    Ok((scenario, r.explain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::settings::parse_settings;

    const MINIMAL: &str = "\
Scenario.endTime = 600
Scenario.nrofHostGroups = 2
Group1.groupID = s
Group1.nrofHosts = 1
Group1.movementModel = StationaryMovement
Group1.nodeLocation = 0, 0
Group2.groupID = b
Group2.nrofHosts = 1
Group2.movementModel = StationaryMovement
Group2.nodeLocation = 50, 0
Events.nrof = 1
Events1.size = 600k,700k
Events1.hosts = s
Events1.tohosts = b0
";

    #[test]
    fn defaults_apply() {
        let doc = parse_settings(MINIMAL).unwrap();
        let (s, explain) = build_scenario_explained(&doc, MapGraph::default()).unwrap();
        assert_eq!(s.tick, 0.1);
        assert_eq!(s.groups[0].router, RouterKind::Epidemic);
        assert_eq!(s.groups[0].buffer_capacity, DEFAULT_BUFFER);
        assert_eq!(s.groups[0].ttl, 600.0);
        assert_eq!(s.traffic[0].size_range, (600_000, 700_000));
        assert_eq!(s.traffic[0].interval_range, (25.0, 35.0));
        assert_eq!(s.traffic[0].sources, vec![NodeId(0)]);
        assert_eq!(s.traffic[0].destinations, vec![NodeId(1)]);
        assert!(explain
            .iter()
            .any(|e| e.key == "Scenario.updateInterval" && e.origin == Origin::Default));
        assert!(explain.iter().any(|e| e.key == "Scenario.endTime"
            && e.origin == Origin::Line { line: 1, overrides: vec![] }));
    }

    #[test]
    fn spray_settings() {
        let text = format!(
            "{MINIMAL}Group.router = SprayAndWaitRouter\nSprayAndWaitRouter.nrofCopies = 6\n"
        );
        let s = build_scenario(&parse_settings(&text).unwrap(), MapGraph::default()).unwrap();
        assert_eq!(
            s.groups[1].router,
            RouterKind::SprayAndWait {
                copies: 6,
                binary: false
            }
        );
    }

    #[test]
    fn group_specific_overrides_generic() {
        let text = format!("{MINIMAL}Group.bufferSize = 24M\nGroup2.bufferSize = 7M\n");
        let s = build_scenario(&parse_settings(&text).unwrap(), MapGraph::default()).unwrap();
        assert_eq!(s.groups[0].buffer_capacity, 24_000_000);
        assert_eq!(s.groups[1].buffer_capacity, 7_000_000);
    }

    #[test]
    fn missing_duration_names_key() {
        let text = MINIMAL.replace("Scenario.endTime = 600\n", "");
        let err = build_scenario(&parse_settings(&text).unwrap(), MapGraph::default()).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "Scenario.endTime"), "{err}");
    }

    #[test]
    fn missing_groups_names_key() {
        let err = build_scenario(&parse_settings("Scenario.endTime = 10").unwrap(), MapGraph::default())
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "Scenario.nrofHostGroups"));
    }

    #[test]
    fn unknown_keys_listed_together() {
        let text = format!("{MINIMAL}Group3.router = EpidemicRouter\nFoo.bar = 1\nEvents1.colour = red\n");
        let err = build_scenario(&parse_settings(&text).unwrap(), MapGraph::default()).unwrap_err();
        let Error::Config { key, .. } = err else { panic!() };
        assert_eq!(key, "Group3.router, Foo.bar, Events1.colour");
    }

    #[test]
    fn inverted_range_is_rejected() {
        let text = MINIMAL.replace("600k,700k", "700k,600k");
        let err = build_scenario(&parse_settings(&text).unwrap(), MapGraph::default()).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "Events1.size"));
    }

    #[test]
    fn bad_value_names_key() {
        let text = format!("{MINIMAL}Group.router = MaxPropRouter\n");
        let err = build_scenario(&parse_settings(&text).unwrap(), MapGraph::default()).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "Group.router"));
    }

    #[test]
    fn unknown_host_rejected() {
        let text = MINIMAL.replace("Events1.tohosts = b0", "Events1.tohosts = z9");
        let err = build_scenario(&parse_settings(&text).unwrap(), MapGraph::default()).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "Events1.tohosts"));
    }

    #[test]
    fn grid_map_from_settings() {
        let doc = parse_settings("Map.gridSize = 10,10\nMap.gridSpacing = 100").unwrap();
        let g = load_map(&doc, None, None).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (100, 180));
        assert!(load_map(&SettingsDoc::new(), None, None).unwrap().is_empty());
    }

    #[test]
    fn explain_line_format() {
        let l = ExplainLine {
            key: "a".into(),
            value: "1".into(),
            origin: Origin::Line {
                line: 4,
                overrides: vec![2],
            },
        };
        assert_eq!(l.to_string(), "a = 1  (line 4, overrides line 2)");
    }
}
