#![allow(dead_code)]

use std::sync::Arc;

use driftnet::config::{build_scenario, load_map, parse_settings, preset_settings, PresetRouter};
use driftnet::ids::NodeId;
use driftnet::link::InterfaceSpec;
use driftnet::map::{MapGraph, Point};
use driftnet::mobility::MovementSpec;
use driftnet::routing::RouterKind;
use driftnet::sim::{GroupSpec, Scenario};
use driftnet::traffic::TrafficSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GROUP_LETTERS: &str = "abcdefghijklmnopqrstuvwxyz";

pub fn static_group(prefix: &str, at: Point, router: RouterKind, iface: InterfaceSpec, buffer: u64, ttl: f64) -> GroupSpec {
    GroupSpec {
        prefix: prefix.to_string(),
        count: 1,
        router,
        buffer_capacity: buffer,
        interface: iface,
        movement: MovementSpec::stationary(at),
        ttl,
    }
}

/// A single message created at `at` seconds and never again.
pub fn one_shot(source: NodeId, destination: NodeId, size: u64, at: f64) -> TrafficSpec {
    TrafficSpec {
        id_prefix: "M".into(),
        interval_range: (at, at),
        size_range: (size, size),
        sources: vec![source],
        destinations: vec![destination],
        active_window: (0.0, at),
    }
}

/// Stationary nodes at `points`, one group each, named a0, b0, ...
pub fn static_scenario(
    points: &[Point],
    router: RouterKind,
    iface: InterfaceSpec,
    tick: f64,
    duration: f64,
) -> Scenario {
    let mut sc = Scenario::new("static", 1, tick, duration);
    for (i, p) in points.iter().enumerate() {
        let prefix = &GROUP_LETTERS[i..i + 1];
        sc.groups
            .push(static_group(prefix, *p, router, iface, 100_000_000, duration));
    }
    sc
}

/// Small mobile scenario on a grid: up to 20 nodes, at most 10 messages.
pub fn random_small_scenario(seed: u64, router: RouterKind) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = rng.gen_range(3..=6);
    let world = MapGraph::synthetic_grid(side, side, 100.0);
    let mut sc = Scenario::new("small", seed, 1.0, 400.0);
    sc.world = Arc::new(world);
    let cars = rng.gen_range(2..=18);
    let iface = InterfaceSpec {
        transmit_speed: rng.gen_range(5_000..=40_000),
        range: rng.gen_range(60.0..=250.0),
    };
    let buffer = rng.gen_range(60_000..=400_000);
    sc.groups.push(GroupSpec {
        prefix: "c".into(),
        count: cars,
        router,
        buffer_capacity: buffer,
        interface: iface,
        movement: MovementSpec::vehicle((5.0, 20.0), (0.0, 30.0)),
        ttl: rng.gen_range(100.0..=400.0),
    });
    let statics = rng.gen_range(1..=2);
    for i in 0..statics {
        let at = Point::new(rng.gen_range(0.0..=(side - 1) as f64 * 100.0), rng.gen_range(0.0..=(side - 1) as f64 * 100.0));
        sc.groups.push(static_group(
            &GROUP_LETTERS[i..i + 1],
            at,
            router,
            iface,
            buffer,
            400.0,
        ));
    }
    let n = cars + statics;
    let all: Vec<NodeId> = (0..n).map(NodeId).collect();
    sc.traffic.push(TrafficSpec {
        id_prefix: "M".into(),
        interval_range: (20.0, 40.0),
        size_range: (5_000, 50_000),
        sources: all.clone(),
        destinations: all,
        active_window: (0.0, 200.0),
    });
    sc
}

pub fn preset_scenario(name: &str, router: PresetRouter, seed: u64) -> Scenario {
    let doc = parse_settings(&preset_settings(name, router).expect("known preset")).expect("preset parses");
    let map = load_map(&doc, None, None).expect("preset map");
    let mut sc = build_scenario(&doc, map).expect("preset builds");
    sc.seed = seed;
    sc
}

#[derive(Debug, Default)]
pub struct SprayCheck {
    pub ticks: u64,
    pub copy_violation: Option<String>,
    pub wait_violation: Option<String>,
}

/// Steps `sc` to its horizon checking the Spray-and-Wait copy budget and
/// the wait-phase rule after every tick.
pub fn check_spray_discipline(sc: Scenario, limit: u32) -> SprayCheck {
    use std::collections::HashMap;

    use driftnet::sim::Simulation;

    let mut check = SprayCheck::default();
    let mut sim = Simulation::new(sc).expect("scenario is valid");
    while sim.step() {
        check.ticks += 1;
        let now = sim.now();
        let mut totals: HashMap<&str, u32> = HashMap::new();
        for node in sim.nodes() {
            for e in node.buffer.entries() {
                *totals.entry(e.message.id.as_str()).or_default() += e.message.copies;
            }
        }
        if check.copy_violation.is_none() {
            if let Some((id, total)) = totals.iter().find(|(_, &t)| t > limit) {
                check.copy_violation = Some(format!("t={now}: {id} holds {total} copies > {limit}"));
            }
        }
        if check.wait_violation.is_none() {
            if let Some(s) = sim
                .tick_log()
                .started
                .iter()
                .find(|s| s.sender_copies <= 1 && !s.to_destination)
            {
                check.wait_violation = Some(format!(
                    "t={now}: {} with one copy sent from {} to non-destination {}",
                    s.message_id, s.sender, s.receiver
                ));
            }
        }
    }
    sim.finish().expect("run passes its invariant checks");
    check
}
