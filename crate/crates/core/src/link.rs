//! Unit-disk contacts and byte-level transfers.
//!
//! Two nodes are linked while their distance is at most the smaller of their
//! ranges. A link carries at most one transfer, and a node sends on at most
//! one link at a time; receipt is not serialized.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::ids::{MessageId, NodeId};
use crate::map::Point;

/// Node count above which `SpatialIndex::Auto` switches to the grid index.
pub const SPATIAL_INDEX_THRESHOLD: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSpec {
    /// Bytes per second.
    pub transmit_speed: u64,
    /// Meters.
    pub range: f64,
}

impl InterfaceSpec {
    pub const BLUETOOTH4: InterfaceSpec = InterfaceSpec {
        transmit_speed: 125_000,
        range: 100.0,
    };
    pub const BLUETOOTH5: InterfaceSpec = InterfaceSpec {
        transmit_speed: 250_000,
        range: 200.0,
    };

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if self.transmit_speed == 0 {
            return Err(Error::config(
                format!("{prefix}.interface.transmitSpeed"),
                "must be positive",
            ));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::config(
                format!("{prefix}.interface.transmitRange"),
                "must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialIndex {
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub message_id: MessageId,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub bytes_done: u64,
    pub total: u64,
    pub started_at: f64,
    pub bytes_per_tick: u64,
}

impl Transfer {
    pub fn is_complete(&self) -> bool {
        self.bytes_done >= self.total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    /// Lower id first.
    pub endpoints: (NodeId, NodeId),
    pub up_since: f64,
    /// Bytes per second, the slower endpoint's speed.
    pub speed: u64,
    pub transfer: Option<Transfer>,
}

impl Connection {
    pub fn peer_of(&self, node: NodeId) -> NodeId {
        if self.endpoints.0 == node {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferRefused {
    /// The connection already carries a transfer.
    BusyConnection,
    /// The sender is already transmitting on some connection.
    BusySender,
    NoConnection,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConnectivityChanges {
    pub up: Vec<(NodeId, NodeId)>,
    pub down: Vec<(NodeId, NodeId)>,
    /// In-flight transfers cut by a link going down.
    pub aborted: Vec<Transfer>,
}

pub fn pair_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// All in-range pairs `(i, j)` with `i < j`, sorted.
pub fn connected_pairs(
    positions: &[Point],
    ifaces: &[InterfaceSpec],
    use_grid: bool,
) -> Vec<(usize, usize)> {
    let in_range = |i: usize, j: usize| {
        positions[i].distance(&positions[j]) <= ifaces[i].range.min(ifaces[j].range)
    };
    let n = positions.len();
    let mut pairs = Vec::new();
    if !use_grid {
        for i in 0..n {
            for j in i + 1..n {
                if in_range(i, j) {
                    pairs.push((i, j));
                }
            }
        }
        return pairs;
    }

    let cell = ifaces.iter().map(|f| f.range).fold(0.0, f64::max);
    if cell <= 0.0 {
        return pairs;
    }
    let key = |p: &Point| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    for (i, p) in positions.iter().enumerate() {
        let (cx, cy) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = buckets.get(&(cx + dx, cy + dy)) {
                    for &j in list {
                        if j > i && in_range(i, j) {
                            pairs.push((i, j));
                        }
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Live connections and their transfers.
#[derive(Debug, Clone)]
pub struct Links {
    tick: f64,
    spatial: SpatialIndex,
    conns: BTreeMap<(NodeId, NodeId), Connection>,
    outgoing: Vec<Option<(NodeId, NodeId)>>,
}

impl Links {
    pub fn new(node_count: usize, tick: f64, spatial: SpatialIndex) -> Self {
        Self {
            tick,
            spatial,
            conns: BTreeMap::new(),
            outgoing: vec![None; node_count],
        }
    }

    fn use_grid(&self, n: usize) -> bool {
        match self.spatial {
            SpatialIndex::Always => true,
            SpatialIndex::Never => false,
            SpatialIndex::Auto => n > SPATIAL_INDEX_THRESHOLD,
        }
    }

    pub fn update_connectivity(
        &mut self,
        positions: &[Point],
        ifaces: &[InterfaceSpec],
        now: f64,
    ) -> ConnectivityChanges {
        let pairs = connected_pairs(positions, ifaces, self.use_grid(positions.len()));
        let mut changes = ConnectivityChanges::default();

        let mut next = BTreeMap::new();
        for (i, j) in pairs {
            let key = (NodeId(i), NodeId(j));
            let conn = match self.conns.remove(&key) {
                Some(c) => c,
                None => {
                    changes.up.push(key);
                    Connection {
                        endpoints: key,
                        up_since: now,
                        speed: ifaces[i].transmit_speed.min(ifaces[j].transmit_speed),
                        transfer: None,
                    }
                }
            };
            next.insert(key, conn);
        }
        // whatever is left went out of range
        for (key, conn) in std::mem::replace(&mut self.conns, next) {
            changes.down.push(key);
            if let Some(t) = conn.transfer {
                self.outgoing[t.sender.index()] = None;
                changes.aborted.push(t);
            }
        }
        changes
    }

    pub fn begin_transfer(
        &mut self,
        sender: NodeId,
        receiver: NodeId,
        message_id: MessageId,
        size: u64,
        now: f64,
    ) -> std::result::Result<&Transfer, TransferRefused> {
        let key = pair_key(sender, receiver);
        if self.outgoing[sender.index()].is_some() {
            return Err(TransferRefused::BusySender);
        }
        let tick = self.tick;
        let conn = self.conns.get_mut(&key).ok_or(TransferRefused::NoConnection)?;
        if conn.transfer.is_some() {
            return Err(TransferRefused::BusyConnection);
        }
        let bytes_per_tick = ((conn.speed as f64 * tick) + 1e-9).floor().max(1.0) as u64;
        self.outgoing[sender.index()] = Some(key);
        Ok(conn.transfer.insert(Transfer {
            message_id,
            sender,
            receiver,
            bytes_done: 0,
            total: size,
            started_at: now,
            bytes_per_tick,
        }))
    }

    /// Adds one tick of bytes to every active transfer and removes the ones
    /// that finish.
    pub fn progress_transfers(&mut self) -> Vec<Transfer> {
        let mut done = Vec::new();
        for conn in self.conns.values_mut() {
            let Some(t) = conn.transfer.as_mut() else {
                continue;
            };
            if !t.is_complete() {
                t.bytes_done = (t.bytes_done + t.bytes_per_tick).min(t.total);
            }
            if t.is_complete() {
                let t = conn.transfer.take().expect("checked above");
                self.outgoing[t.sender.index()] = None;
                done.push(t);
            }
        }
        done
    }

    /// Cancels the sender's outgoing transfer, if any.
    pub fn abort_outgoing(&mut self, sender: NodeId) -> Option<Transfer> {
        let key = self.outgoing[sender.index()].take()?;
        self.conns.get_mut(&key)?.transfer.take()
    }

    pub fn outgoing(&self, sender: NodeId) -> Option<&Transfer> {
        let key = self.outgoing[sender.index()]?;
        self.conns.get(&key)?.transfer.as_ref()
    }

    pub fn is_sending(&self, node: NodeId) -> bool {
        self.outgoing[node.index()].is_some()
    }

    pub fn is_connected(&self, a: NodeId, b: NodeId) -> bool {
        self.conns.contains_key(&pair_key(a, b))
    }

    pub fn connection(&self, a: NodeId, b: NodeId) -> Option<&Connection> {
        self.conns.get(&pair_key(a, b))
    }

    pub fn connections(&self) -> impl Iterator<Item = &Connection> {
        self.conns.values()
    }

    /// Peers currently linked to `node`, ascending.
    pub fn peers_of(&self, node: NodeId) -> Vec<NodeId> {
        let mut peers: Vec<NodeId> = self
            .conns
            .keys()
            .filter_map(|&(a, b)| {
                if a == node {
                    Some(b)
                } else if b == node {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        peers.sort_unstable();
        peers
    }

    pub fn in_flight(&self) -> usize {
        self.conns.values().filter(|c| c.transfer.is_some()).count()
    }
}
