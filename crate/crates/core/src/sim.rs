//! The fixed-step simulation engine.
//!
//! Every tick runs the same phases in the same order: traffic generation,
//! movement, connectivity, transfer progress, routing decisions, TTL expiry
//! and report sampling. A run is single threaded and fully determined by the
//! scenario and its seed.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ids::{MessageId, NodeId};
use crate::link::{InterfaceSpec, Links, SpatialIndex};
use crate::map::{MapGraph, Point};
use crate::mobility::{self, time_reached, MovementSpec, MovementState};
use crate::reports::{DeliveredRecord, EventKind, ReportBundle, ReportCollector, ReportSettings};
use crate::rng::{seeded_rng, RandomStream, StreamLabel};
use crate::routing::{
    self, make_room, offer_accept, on_transfer_complete, Buffer, Message, Offer, QueueOrder,
    RouterKind, RouterNode, TransferOutcome,
};
use crate::traffic::{TrafficGenerator, TrafficSpec};

pub const DEFAULT_TICK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    tick: f64,
    end: f64,
    ticks_done: u64,
    tick_count: u64,
}

impl SimClock {
    pub fn new(tick: f64, end: f64) -> Self {
        Self {
            tick,
            end,
            ticks_done: 0,
            tick_count: tick_count(end, tick),
        }
    }

    /// Current time, an exact multiple of the tick.
    pub fn now(&self) -> f64 {
        self.ticks_done as f64 * self.tick
    }

    pub fn tick(&self) -> f64 {
        self.tick
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn ticks_done(&self) -> u64 {
        self.ticks_done
    }

    pub fn tick_count(&self) -> u64 {
        self.tick_count
    }

    pub fn finished(&self) -> bool {
        self.ticks_done >= self.tick_count
    }

    fn advance(&mut self) -> Option<f64> {
        if self.finished() {
            return None;
        }
        self.ticks_done += 1;
        Some(self.now())
    }
}

/// ⌈duration / tick⌉, robust to float noise in the quotient.
pub fn tick_count(duration: f64, tick: f64) -> u64 {
    let q = duration / tick;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.max(1.0) {
        r as u64
    } else {
        q.ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub prefix: String,
    pub count: usize,
    pub router: RouterKind,
    pub buffer_capacity: u64,
    pub interface: InterfaceSpec,
    pub movement: MovementSpec,
    /// Seconds.
    pub ttl: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub tick: f64,
    pub duration: f64,
    pub groups: Vec<GroupSpec>,
    pub world: Arc<MapGraph>,
    pub traffic: Vec<TrafficSpec>,
    pub reports: ReportSettings,
    pub queue_order: QueueOrder,
    pub spatial_index: SpatialIndex,
}

impl Scenario {
    pub fn new(name: impl Into<String>, seed: u64, tick: f64, duration: f64) -> Self {
        Self {
            name: name.into(),
            seed,
            tick,
            duration,
            groups: Vec::new(),
            world: Arc::new(MapGraph::default()),
            traffic: Vec::new(),
            reports: ReportSettings::default(),
            queue_order: QueueOrder::Fifo,
            spatial_index: SpatialIndex::Auto,
        }
    }

    pub fn node_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// Node display names in registry order.
    pub fn node_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| (0..g.count).map(move |i| format!("{}{}", g.prefix, i)))
            .collect()
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.node_names().iter().position(|n| n == name).map(NodeId)
    }

    pub fn tick_count(&self) -> u64 {
        tick_count(self.duration, self.tick)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return Err(Error::config("Scenario.name", "must be a non-empty token"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("Scenario.endTime", "must be positive"));
        }
        if !(self.tick > 0.0 && self.tick <= self.duration) {
            return Err(Error::config(
                "Scenario.updateInterval",
                "must be positive and no longer than the end time",
            ));
        }
        if self.groups.is_empty() {
            return Err(Error::config("Scenario.nrofHostGroups", "at least one group is required"));
        }
        let mut prefixes = HashSet::new();
        for (i, g) in self.groups.iter().enumerate() {
            let key = format!("Group{}", i + 1);
            if g.prefix.is_empty() || g.prefix.contains(char::is_whitespace) {
                return Err(Error::config(format!("{key}.groupID"), "must be a non-empty token"));
            }
            if !prefixes.insert(g.prefix.as_str()) {
                return Err(Error::config(
                    format!("{key}.groupID"),
                    format!("prefix {:?} used by more than one group", g.prefix),
                ));
            }
            if g.count == 0 {
                return Err(Error::config(format!("{key}.nrofHosts"), "must be at least 1"));
            }
            if g.buffer_capacity == 0 {
                return Err(Error::config(format!("{key}.bufferSize"), "must be positive"));
            }
            if !(g.ttl > 0.0) {
                return Err(Error::config(format!("{key}.msgTtl"), "must be positive"));
            }
            if let RouterKind::SprayAndWait { copies: 0, .. } = g.router {
                return Err(Error::config("SprayAndWaitRouter.nrofCopies", "must be at least 1"));
            }
            g.interface.validate(&key)?;
            if (g.interface.transmit_speed as f64 * self.tick) < 1.0 {
                return Err(Error::config(
                    format!("{key}.interface.transmitSpeed"),
                    "moves less than one byte per tick",
                ));
            }
            g.movement.validate(&key)?;
            if !g.movement.is_stationary() && self.world.is_empty() {
                return Err(Error::World(format!(
                    "{key} uses map-based movement but the road map is empty"
                )));
            }
        }
        let names = self.node_names();
        let mut seen = HashSet::new();
        for (idx, name) in names.iter().enumerate() {
            if !seen.insert(name) {
                let group = self.group_of(idx);
                return Err(Error::config(
                    format!("Group{}.groupID", group + 1),
                    format!("node name {name} collides with another group's node"),
                ));
            }
        }
        let mut traffic_prefixes = HashSet::new();
        for (i, t) in self.traffic.iter().enumerate() {
            let key = format!("Events{}", i + 1);
            t.validate(&key)?;
            if !traffic_prefixes.insert(t.id_prefix.as_str()) {
                return Err(Error::config(format!("{key}.prefix"), "duplicate message id prefix"));
            }
            for (field, ids) in [("hosts", &t.sources), ("tohosts", &t.destinations)] {
                if let Some(bad) = ids.iter().find(|id| id.index() >= names.len()) {
                    return Err(Error::config(
                        format!("{key}.{field}"),
                        format!("node {} does not exist", bad.index()),
                    ));
                }
            }
        }
        if !(self.reports.sample_interval > 0.0) {
            return Err(Error::config("Report.granularity", "must be positive"));
        }
        Ok(())
    }

    fn group_of(&self, node: usize) -> usize {
        let mut acc = 0;
        for (i, g) in self.groups.iter().enumerate() {
            acc += g.count;
            if node < acc {
                return i;
            }
        }
        self.groups.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub name: String,
    pub group: usize,
    pub position: Point,
    pub movement: MovementState,
    pub interface: InterfaceSpec,
    pub router: RouterKind,
    pub buffer: Buffer,
    pub delivered_ids: BTreeSet<MessageId>,
    pub ttl: f64,
    pub stationary: bool,
}

impl RouterNode for NodeState {
    fn id(&self) -> NodeId {
        self.id
    }

    fn router(&self) -> RouterKind {
        self.router
    }

    fn buffer(&self) -> &Buffer {
        &self.buffer
    }

    fn buffer_mut(&mut self) -> &mut Buffer {
        &mut self.buffer
    }

    fn delivered_ids(&self) -> &BTreeSet<MessageId> {
        &self.delivered_ids
    }

    fn mark_delivered(&mut self, id: MessageId) {
        self.delivered_ids.insert(id);
    }
}

/// A transfer that began this tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferStart {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub message_id: MessageId,
    /// Copies held by the sender when the transfer began.
    pub sender_copies: u32,
    pub to_destination: bool,
}

/// A transfer that finished this tick, with its routing outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferEnd {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub message_id: MessageId,
    pub outcome: TransferOutcome,
}

#[derive(Debug, Clone, Default)]
pub struct TickLog {
    pub started: Vec<TransferStart>,
    pub finished: Vec<TransferEnd>,
}

fn two_mut<T>(items: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = items.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = items.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

pub struct Simulation {
    scenario: Scenario,
    clock: SimClock,
    nodes: Vec<NodeState>,
    links: Links,
    generators: Vec<TrafficGenerator>,
    movement_rng: RandomStream,
    traffic_rng: RandomStream,
    order_rng: RandomStream,
    reports: ReportCollector,
    next_sample: f64,
    log: TickLog,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let mut movement_rng = seeded_rng(scenario.seed, StreamLabel::Movement);
        let mut traffic_rng = seeded_rng(scenario.seed, StreamLabel::Traffic);
        let order_rng = seeded_rng(scenario.seed, StreamLabel::RoutingOrder);

        let mut nodes = Vec::with_capacity(scenario.node_count());
        for (gi, g) in scenario.groups.iter().enumerate() {
            for ordinal in 0..g.count {
                let (position, movement) =
                    mobility::init_position(&g.movement, &scenario.world, &mut movement_rng, 0.0)?;
                nodes.push(NodeState {
                    id: NodeId(nodes.len()),
                    name: format!("{}{}", g.prefix, ordinal),
                    group: gi,
                    position,
                    movement,
                    interface: g.interface,
                    router: g.router,
                    buffer: Buffer::new(g.buffer_capacity),
                    delivered_ids: BTreeSet::new(),
                    ttl: g.ttl,
                    stationary: g.movement.is_stationary(),
                });
            }
        }
        let generators = scenario
            .traffic
            .iter()
            .map(|t| TrafficGenerator::new(t.clone(), &mut traffic_rng))
            .collect();
        let links = Links::new(nodes.len(), scenario.tick, scenario.spatial_index);
        let clock = SimClock::new(scenario.tick, scenario.duration);

        let mut sim = Self {
            clock,
            nodes,
            links,
            generators,
            movement_rng,
            traffic_rng,
            order_rng,
            reports: ReportCollector::new(),
            next_sample: scenario.reports.sample_interval,
            log: TickLog::default(),
            scenario,
        };
        sim.sample_buffers(0.0);
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn links(&self) -> &Links {
        &self.links
    }

    pub fn collector(&self) -> &ReportCollector {
        &self.reports
    }

    /// Transfers started and finished during the last tick.
    pub fn tick_log(&self) -> &TickLog {
        &self.log
    }

    pub fn is_finished(&self) -> bool {
        self.clock.finished()
    }

    /// Runs one tick. Returns false once the horizon has been reached.
    pub fn step(&mut self) -> bool {
        let Some(now) = self.clock.advance() else {
            return false;
        };
        self.log = TickLog::default();
        self.generate_traffic(now);
        self.move_nodes(now);
        self.update_links(now);
        self.progress_transfers(now);
        self.route(now);
        self.expire(now);
        if time_reached(now, self.next_sample, self.clock.tick()) {
            self.sample_buffers(now);
            self.next_sample += self.scenario.reports.sample_interval;
        }
        true
    }

    pub fn run_to_end(&mut self) {
        while self.step() {}
    }

    pub fn finish(self) -> Result<ReportBundle> {
        let bundle = self.reports.finish(
            &self.scenario.name,
            self.scenario.seed,
            &self.scenario.reports.kinds,
            self.links.in_flight() as u64,
        );
        check_bundle(&bundle, self.nodes.len())?;
        Ok(bundle)
    }

    fn generate_traffic(&mut self, now: f64) {
        let tick = self.clock.tick();
        for gen in &mut self.generators {
            let Some(req) = gen.generate(&mut self.traffic_rng, now, tick) else {
                continue;
            };
            self.reports.record_event(EventKind::Created);
            let node = &mut self.nodes[req.source.index()];
            let msg = Message::new(
                req.id,
                req.source,
                req.destination,
                req.size,
                req.created_at,
                node.ttl,
                node.router.initial_copies(),
            );
            let protected = self.links.outgoing(node.id).map(|t| t.message_id.clone());
            match make_room(&mut node.buffer, msg.size, protected.as_ref()) {
                Ok(dropped) => {
                    for _ in dropped {
                        self.reports.record_event(EventKind::Dropped);
                    }
                    node.buffer
                        .insert(msg, now)
                        .expect("room was made for the new message");
                }
                Err(_) => self.reports.record_event(EventKind::Dropped),
            }
        }
    }

    fn move_nodes(&mut self, now: f64) {
        let dt = self.clock.tick();
        for node in &mut self.nodes {
            let spec = &self.scenario.groups[node.group].movement;
            node.position = mobility::advance(
                &mut node.movement,
                spec,
                now,
                dt,
                &self.scenario.world,
                &mut self.movement_rng,
            );
        }
    }

    fn update_links(&mut self, now: f64) {
        let positions: Vec<Point> = self.nodes.iter().map(|n| n.position).collect();
        let ifaces: Vec<InterfaceSpec> = self.nodes.iter().map(|n| n.interface).collect();
        let changes = self.links.update_connectivity(&positions, &ifaces, now);
        for _ in changes.aborted {
            self.reports.record_event(EventKind::Aborted);
        }
    }

    fn progress_transfers(&mut self, now: f64) {
        for t in self.links.progress_transfers() {
            let receiver_sending = self.links.outgoing(t.receiver).map(|x| x.message_id.clone());
            let (sender, receiver) =
                two_mut(&mut self.nodes, t.sender.index(), t.receiver.index());
            let outcome = on_transfer_complete(
                sender,
                receiver,
                &t.message_id,
                receiver_sending.as_ref(),
                now,
            );
            match &outcome {
                TransferOutcome::Delivered { message } => {
                    let latency = now - message.created_at;
                    self.reports.record_event(EventKind::Delivered(DeliveredRecord {
                        time: now,
                        message_id: message.id.to_string(),
                        size: message.size,
                        hopcount: message.hop_count(),
                        latency,
                        source: self.nodes[message.source.index()].name.clone(),
                        destination: self.nodes[message.destination.index()].name.clone(),
                        remaining_ttl: message.ttl - latency,
                    }));
                }
                TransferOutcome::Relayed { dropped } => {
                    self.reports.record_event(EventKind::Relayed);
                    for _ in dropped {
                        self.reports.record_event(EventKind::Dropped);
                    }
                }
                TransferOutcome::Rejected(_) => self.reports.record_event(EventKind::Aborted),
            }
            self.log.finished.push(TransferEnd {
                sender: t.sender,
                receiver: t.receiver,
                message_id: t.message_id,
                outcome,
            });
        }
    }

    fn route(&mut self, now: f64) {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        self.order_rng.shuffle(&mut order);
        let shuffle_queue = self.scenario.queue_order == QueueOrder::Random;

        for i in order {
            let me = NodeId(i);
            if self.links.is_sending(me) {
                continue;
            }
            let peers = self.links.peers_of(me);
            if peers.is_empty() {
                continue;
            }
            let intents = routing::route_tick(
                self.nodes[i].router,
                &self.nodes[i].buffer,
                false,
                &peers,
                shuffle_queue.then_some(&mut self.order_rng),
            );
            for intent in intents {
                if self
                    .links
                    .connection(me, intent.peer)
                    .is_none_or(|c| c.transfer.is_some())
                {
                    continue;
                }
                let Some(msg) = self.nodes[i].buffer.get(&intent.message_id) else {
                    continue;
                };
                let (size, copies, destination) = (msg.size, msg.copies, msg.destination);
                let peer = &self.nodes[intent.peer.index()];
                if offer_accept(&peer.buffer, &peer.delivered_ids, msg) != Offer::Accept {
                    continue;
                }
                if destination != intent.peer {
                    let protected = self
                        .links
                        .outgoing(intent.peer)
                        .map(|t| t.message_id.clone());
                    let peer = &mut self.nodes[intent.peer.index()];
                    match make_room(&mut peer.buffer, size, protected.as_ref()) {
                        Ok(dropped) => {
                            for _ in dropped {
                                self.reports.record_event(EventKind::Dropped);
                            }
                        }
                        Err(_) => continue,
                    }
                }
                if self
                    .links
                    .begin_transfer(me, intent.peer, intent.message_id.clone(), size, now)
                    .is_ok()
                {
                    self.reports.record_event(EventKind::Started);
                    self.log.started.push(TransferStart {
                        sender: me,
                        receiver: intent.peer,
                        message_id: intent.message_id,
                        sender_copies: copies,
                        to_destination: destination == intent.peer,
                    });
                    break;
                }
            }
        }
    }

    fn expire(&mut self, now: f64) {
        for node in &mut self.nodes {
            for m in routing::expire(&mut node.buffer, now) {
                if self
                    .links
                    .outgoing(node.id)
                    .is_some_and(|t| t.message_id == m.id)
                {
                    self.links.abort_outgoing(node.id);
                    self.reports.record_event(EventKind::Aborted);
                }
                self.reports.record_event(EventKind::Expired);
            }
        }
    }

    fn sample_buffers(&mut self, now: f64) {
        let include_static = self.scenario.reports.include_static;
        let occupancies: Vec<f64> = self
            .nodes
            .iter()
            .filter(|n| include_static || !n.stationary)
            .map(|n| n.buffer.occupancy_pct())
            .collect();
        self.reports.sample_buffers(occupancies, now);
    }
}

/// Cross-checks that must hold for any finished run.
pub fn check_bundle(bundle: &ReportBundle, node_count: usize) -> Result<()> {
    let s = &bundle.message_stats;
    if s.delivered as usize != bundle.delivered.len() || bundle.delays.len() != bundle.delivered.len() {
        return Err(Error::Invariant("delivered counts disagree between reports".into()));
    }
    if s.started != s.relayed + s.aborted + bundle.in_flight {
        return Err(Error::Invariant(format!(
            "started {} != relayed {} + aborted {} + in flight {}",
            s.started, s.relayed, s.aborted, bundle.in_flight
        )));
    }
    let mut ids = HashSet::new();
    for d in &bundle.delivered {
        if !ids.insert(&d.message_id) {
            return Err(Error::Invariant(format!("{} delivered twice", d.message_id)));
        }
        if d.hopcount == 0 || d.hopcount + 1 > node_count {
            return Err(Error::Invariant(format!(
                "{} delivered with hop count {}",
                d.message_id, d.hopcount
            )));
        }
    }
    Ok(())
}

/// Runs a scenario to its horizon.
pub fn run(scenario: Scenario) -> Result<ReportBundle> {
    let mut sim = Simulation::new(scenario)?;
    sim.run_to_end();
    sim.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_counts() {
        assert_eq!(tick_count(1800.0, 0.1), 18_000);
        assert_eq!(tick_count(1800.0, 0.5), 3_600);
        assert_eq!(tick_count(10.0, 3.0), 4);
        assert_eq!(tick_count(0.3, 0.1), 3);
    }

    #[test]
    fn clock_stops_at_end() {
        let mut c = SimClock::new(0.1, 1.0);
        let mut n = 0;
        while let Some(now) = c.advance() {
            n += 1;
            assert!(now <= 1.0 + 1e-9);
            assert!(((now / 0.1) - (now / 0.1).round()).abs() < 1e-9);
        }
        assert_eq!(n, 10);
        assert_eq!(c.advance(), None);
    }

    #[test]
    fn empty_scenario_is_rejected_by_key() {
        let s = Scenario::new("x", 1, 0.1, 10.0);
        assert!(matches!(s.validate(), Err(Error::Config { key, .. }) if key == "Scenario.nrofHostGroups"));
        let s = Scenario::new("x", 1, 0.1, 0.0);
        assert!(matches!(s.validate(), Err(Error::Config { key, .. }) if key == "Scenario.endTime"));
        let s = Scenario::new("x", 1, 20.0, 10.0);
        assert!(matches!(s.validate(), Err(Error::Config { key, .. }) if key == "Scenario.updateInterval"));
    }

    fn static_group(prefix: &str, at: Point) -> GroupSpec {
        GroupSpec {
            prefix: prefix.into(),
            count: 1,
            router: RouterKind::Epidemic,
            buffer_capacity: 1_000_000,
            interface: InterfaceSpec::BLUETOOTH5,
            movement: MovementSpec::stationary(at),
            ttl: 100.0,
        }
    }

    #[test]
    fn duplicate_prefixes_and_name_collisions() {
        let mut s = Scenario::new("x", 1, 0.1, 10.0);
        s.groups = vec![static_group("a", Point::default()), static_group("a", Point::default())];
        assert!(matches!(s.validate(), Err(Error::Config { key, .. }) if key == "Group2.groupID"));

        let mut many = static_group("c", Point::default());
        many.count = 11;
        s.groups = vec![many, static_group("c1", Point::default())];
        assert!(matches!(s.validate(), Err(Error::Config { key, .. }) if key == "Group2.groupID"));
    }

    #[test]
    fn vehicles_need_a_map() {
        let mut s = Scenario::new("x", 1, 0.1, 10.0);
        let mut g = static_group("c", Point::default());
        g.movement = MovementSpec::vehicle((1.0, 2.0), (0.0, 1.0));
        s.groups = vec![g];
        assert!(matches!(s.validate(), Err(Error::World(_))));
    }
}
