//! Store-carry-forward routing: bounded buffers, TTL expiry and the Epidemic
//! and Spray-and-Wait forwarding rules.

use std::collections::BTreeSet;

use crate::ids::{MessageId, NodeId};
use crate::rng::RandomStream;

pub const DEFAULT_SPRAY_COPIES: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: MessageId,
    pub source: NodeId,
    pub destination: NodeId,
    pub size: u64,
    pub created_at: f64,
    pub ttl: f64,
    /// Nodes visited so far, starting with the source.
    pub hops: Vec<NodeId>,
    /// Spray-and-Wait copy budget held by this replica; 1 for Epidemic.
    pub copies: u32,
}

impl Message {
    pub fn new(
        id: MessageId,
        source: NodeId,
        destination: NodeId,
        size: u64,
        created_at: f64,
        ttl: f64,
        copies: u32,
    ) -> Self {
        Self {
            id,
            source,
            destination,
            size,
            created_at,
            ttl,
            hops: vec![source],
            copies: copies.max(1),
        }
    }

    pub fn hop_count(&self) -> usize {
        self.hops.len().saturating_sub(1)
    }

    pub fn is_expired(&self, now: f64) -> bool {
        now - self.created_at > self.ttl
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    pub message: Message,
    pub received_at: f64,
}

/// Byte-bounded message store, kept in arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer {
    capacity: u64,
    used: u64,
    entries: Vec<BufferEntry>,
}

impl Buffer {
    pub fn new(capacity: u64) -> Self {
        Self {
            capacity,
            used: 0,
            entries: Vec::new(),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn free(&self) -> u64 {
        self.capacity - self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn occupancy_pct(&self) -> f64 {
        if self.capacity == 0 {
            0.0
        } else {
            self.used as f64 / self.capacity as f64 * 100.0
        }
    }

    pub fn entries(&self) -> &[BufferEntry] {
        &self.entries
    }

    pub fn contains(&self, id: &MessageId) -> bool {
        self.get(id).is_some()
    }

    pub fn get(&self, id: &MessageId) -> Option<&Message> {
        self.entries
            .iter()
            .find(|e| &e.message.id == id)
            .map(|e| &e.message)
    }

    pub fn get_mut(&mut self, id: &MessageId) -> Option<&mut Message> {
        self.entries
            .iter_mut()
            .find(|e| &e.message.id == id)
            .map(|e| &mut e.message)
    }

    /// Stores a message. Fails, returning it, on a duplicate id or when it
    /// does not fit in the free space.
    pub fn insert(&mut self, message: Message, now: f64) -> Result<(), Message> {
        if self.contains(&message.id) || message.size > self.free() {
            return Err(message);
        }
        self.used += message.size;
        self.entries.push(BufferEntry {
            message,
            received_at: now,
        });
        Ok(())
    }

    pub fn remove(&mut self, id: &MessageId) -> Option<Message> {
        let pos = self.entries.iter().position(|e| &e.message.id == id)?;
        let entry = self.entries.remove(pos);
        self.used -= entry.message.size;
        Some(entry.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouterKind {
    Epidemic,
    SprayAndWait { copies: u32, binary: bool },
}

impl RouterKind {
    pub fn spray(copies: u32) -> Self {
        RouterKind::SprayAndWait {
            copies,
            binary: false,
        }
    }

    /// Copy budget stamped on messages created at a node with this router.
    pub fn initial_copies(&self) -> u32 {
        match *self {
            RouterKind::Epidemic => 1,
            RouterKind::SprayAndWait { copies, .. } => copies.max(1),
        }
    }

    pub fn settings_name(&self) -> &'static str {
        match self {
            RouterKind::Epidemic => "EpidemicRouter",
            RouterKind::SprayAndWait { .. } => "SprayAndWaitRouter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueueOrder {
    /// Oldest received first.
    #[default]
    Fifo,
    /// Seeded shuffle of the queue each tick, for sensitivity runs.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferIntent {
    pub message_id: MessageId,
    pub peer: NodeId,
}

/// Transfer intents for one node this tick, best first. Empty while the node
/// is already sending.
pub fn route_tick(
    router: RouterKind,
    buffer: &Buffer,
    sending: bool,
    peers: &[NodeId],
    shuffle: Option<&mut RandomStream>,
) -> Vec<TransferIntent> {
    if sending || peers.is_empty() || buffer.is_empty() {
        return Vec::new();
    }
    let mut queue: Vec<&Message> = buffer.entries().iter().map(|e| &e.message).collect();
    if let Some(rng) = shuffle {
        rng.shuffle(&mut queue);
    }

    let mut intents: Vec<TransferIntent> = queue
        .iter()
        .filter(|m| peers.contains(&m.destination))
        .map(|m| TransferIntent {
            message_id: m.id.clone(),
            peer: m.destination,
        })
        .collect();

    for m in queue {
        let spreadable = match router {
            RouterKind::Epidemic => true,
            // wait phase: only direct delivery, handled above
            RouterKind::SprayAndWait { .. } => m.copies > 1,
        };
        if !spreadable {
            continue;
        }
        for &peer in peers {
            if peer != m.destination {
                intents.push(TransferIntent {
                    message_id: m.id.clone(),
                    peer,
                });
            }
        }
    }
    intents
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Duplicate,
    AlreadyDelivered,
    TooLarge,
    /// Every droppable entry together would not free enough space.
    NoRoom,
    /// The sender no longer holds the message.
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offer {
    Accept,
    Reject(RejectReason),
}

/// Receiver side admission check.
pub fn offer_accept(
    buffer: &Buffer,
    delivered_ids: &BTreeSet<MessageId>,
    message: &Message,
) -> Offer {
    if buffer.contains(&message.id) {
        Offer::Reject(RejectReason::Duplicate)
    } else if delivered_ids.contains(&message.id) {
        Offer::Reject(RejectReason::AlreadyDelivered)
    } else if message.size > buffer.capacity() {
        Offer::Reject(RejectReason::TooLarge)
    } else {
        Offer::Accept
    }
}

/// Drops oldest entries until `incoming_size` bytes are free. The entry the
/// node is currently transmitting is never dropped; when that leaves too
/// little droppable space nothing is dropped.
pub fn make_room(
    buffer: &mut Buffer,
    incoming_size: u64,
    protected: Option<&MessageId>,
) -> Result<Vec<Message>, RejectReason> {
    if incoming_size > buffer.capacity() {
        return Err(RejectReason::TooLarge);
    }
    if buffer.free() >= incoming_size {
        return Ok(Vec::new());
    }
    let droppable: u64 = buffer
        .entries()
        .iter()
        .filter(|e| Some(&e.message.id) != protected)
        .map(|e| e.message.size)
        .sum();
    if buffer.free() + droppable < incoming_size {
        return Err(RejectReason::NoRoom);
    }

    let mut dropped = Vec::new();
    while buffer.free() < incoming_size {
        let victim = buffer
            .entries()
            .iter()
            .filter(|e| Some(&e.message.id) != protected)
            .min_by(|a, b| a.received_at.total_cmp(&b.received_at))
            .map(|e| e.message.id.clone())
            .expect("droppable space checked above");
        dropped.extend(buffer.remove(&victim));
    }
    Ok(dropped)
}

/// Per-node state the routing rules act on.
pub trait RouterNode {
    fn id(&self) -> NodeId;
    fn router(&self) -> RouterKind;
    fn buffer(&self) -> &Buffer;
    fn buffer_mut(&mut self) -> &mut Buffer;
    fn delivered_ids(&self) -> &BTreeSet<MessageId>;
    fn mark_delivered(&mut self, id: MessageId);
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransferOutcome {
    /// The receiver was the destination. `message` is the delivered replica
    /// with the final hop appended.
    Delivered { message: Message },
    /// Stored at an intermediate node, possibly evicting older entries.
    Relayed { dropped: Vec<Message> },
    Rejected(RejectReason),
}

/// Applies a finished transfer. `receiver_sending` is the message the
/// receiver is itself transmitting, protected from eviction.
pub fn on_transfer_complete<N: RouterNode>(
    sender: &mut N,
    receiver: &mut N,
    message_id: &MessageId,
    receiver_sending: Option<&MessageId>,
    now: f64,
) -> TransferOutcome {
    let Some(original) = sender.buffer().get(message_id) else {
        return TransferOutcome::Rejected(RejectReason::Missing);
    };
    if let Offer::Reject(reason) = offer_accept(receiver.buffer(), receiver.delivered_ids(), original)
    {
        return TransferOutcome::Rejected(reason);
    }

    let mut replica = original.clone();
    replica.hops.push(receiver.id());

    if replica.destination == receiver.id() {
        receiver.mark_delivered(replica.id.clone());
        return TransferOutcome::Delivered { message: replica };
    }

    let dropped = match make_room(receiver.buffer_mut(), replica.size, receiver_sending) {
        Ok(d) => d,
        Err(reason) => return TransferOutcome::Rejected(reason),
    };

    let (kept, handed) = match sender.router() {
        RouterKind::Epidemic => (replica.copies, replica.copies),
        RouterKind::SprayAndWait { binary: false, .. } => (replica.copies.saturating_sub(1), 1),
        RouterKind::SprayAndWait { binary: true, .. } => {
            (replica.copies.div_ceil(2), replica.copies / 2)
        }
    };
    replica.copies = handed.max(1);
    if let Some(m) = sender.buffer_mut().get_mut(message_id) {
        m.copies = kept.max(1);
    }
    receiver
        .buffer_mut()
        .insert(replica, now)
        .expect("room was made for the replica");
    TransferOutcome::Relayed { dropped }
}

/// Removes messages older than their TTL.
pub fn expire(buffer: &mut Buffer, now: f64) -> Vec<Message> {
    let ids: Vec<MessageId> = buffer
        .entries()
        .iter()
        .filter(|e| e.message.is_expired(now))
        .map(|e| e.message.id.clone())
        .collect();
    ids.iter().filter_map(|id| buffer.remove(id)).collect()
}
