//! Message routing between component endpoints.
//!
//! The bus glues the cyber interfaces of the components together so a
//! process controller can run on a different node than the silo it
//! orchestrates. Latency is a whole number of scans, uniform per bus; there
//! is no loss, reordering or partitioning. With latency 0 a message is
//! visible within the sending scan to any endpoint whose priority executes
//! after the sender, and at the next scan otherwise — which makes a
//! zero-latency distributed deployment behave exactly like direct calls
//! under the scan order.
//!
//! Bus state is owned by the scan loop in simulation, but every operation is
//! also safe under concurrent callers (interior locking), matching the
//! monitor stress harness.

use std::fmt;
use std::sync::Mutex;

use crate::plant::SiloId;

/// Operations that cross the process/silo boundary: the command surface a
/// process uses on a silo controller, and the completion notifications the
/// silo publishes back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operation {
    Fill,
    Empty,
    Status,
    MarkFull,
    MarkEmpty,
    Filled(SiloId),
    Emptied(SiloId),
    StatusIs(String),
}

impl Operation {
    pub fn kind(&self) -> MessageKind {
        match self {
            Operation::Fill
            | Operation::Empty
            | Operation::Status
            | Operation::MarkFull
            | Operation::MarkEmpty => MessageKind::Request,
            Operation::Filled(_) | Operation::Emptied(_) | Operation::StatusIs(_) => {
                MessageKind::Notification
            }
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operation::Fill => f.write_str("fill"),
            Operation::Empty => f.write_str("empty"),
            Operation::Status => f.write_str("status"),
            Operation::MarkFull => f.write_str("mark_full"),
            Operation::MarkEmpty => f.write_str("mark_empty"),
            Operation::Filled(s) => write!(f, "filled({s})"),
            Operation::Emptied(s) => write!(f, "emptied({s})"),
            Operation::StatusIs(s) => write!(f, "statusIs({s})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MessageKind {
    Request,
    Notification,
}

/// One message in flight between two endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceMessage {
    pub kind: MessageKind,
    pub sender: String,
    pub target: String,
    pub operation: Operation,
    /// Strictly increasing per sender; stamped by the bus at send time.
    pub correlation_id: u64,
    pub sent_tick: u64,
    pub delivery_tick: u64,
}

impl ServiceMessage {
    /// Detail string of the MSG trace record.
    pub fn trace_detail(&self) -> String {
        format!(
            "{}->{}:{}#{}@{}",
            self.sender, self.target, self.operation, self.correlation_id, self.delivery_tick
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("unknown endpoint `{0}`")]
    UnknownEndpoint(String),
    #[error("endpoint `{0}` already registered")]
    DuplicateEndpoint(String),
}

#[derive(Debug, Default)]
struct BusInner {
    /// (endpoint id, scan priority), insertion-ordered.
    endpoints: Vec<(String, u32)>,
    in_flight: Vec<ServiceMessage>,
    /// Per-sender correlation counters, keyed like `endpoints`.
    next_correlation: Vec<(String, u64)>,
}

/// The message bus. `latency` is in whole scans.
#[derive(Debug)]
pub struct Bus {
    latency: u64,
    inner: Mutex<BusInner>,
}

impl Bus {
    pub fn new(latency: u64) -> Bus {
        Bus {
            latency,
            inner: Mutex::new(BusInner::default()),
        }
    }

    pub fn latency(&self) -> u64 {
        self.latency
    }

    pub fn register(&self, endpoint: &str, priority: u32) -> Result<(), BusError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.endpoints.iter().any(|(e, _)| e == endpoint) {
            return Err(BusError::DuplicateEndpoint(endpoint.to_string()));
        }
        inner.endpoints.push((endpoint.to_string(), priority));
        Ok(())
    }

    pub fn is_registered(&self, endpoint: &str) -> bool {
        let inner = self.inner.lock().unwrap();
        inner.endpoints.iter().any(|(e, _)| e == endpoint)
    }

    fn priority_of(inner: &BusInner, endpoint: &str) -> Result<u32, BusError> {
        inner
            .endpoints
            .iter()
            .find(|(e, _)| e == endpoint)
            .map(|(_, p)| *p)
            .ok_or_else(|| BusError::UnknownEndpoint(endpoint.to_string()))
    }

    /// Sends one operation. The delivery tick is `sent + latency`; with
    /// latency 0 it is the sending tick when the target executes after the
    /// sender in the scan order, and the next tick otherwise. Returns the
    /// stamped message for tracing.
    pub fn send(
        &self,
        sender: &str,
        target: &str,
        operation: Operation,
        sent_tick: u64,
    ) -> Result<ServiceMessage, BusError> {
        let mut inner = self.inner.lock().unwrap();
        let sender_prio = Self::priority_of(&inner, sender)?;
        let target_prio = Self::priority_of(&inner, target)?;

        let delivery_tick = if self.latency == 0 {
            if target_prio > sender_prio {
                sent_tick
            } else {
                sent_tick + 1
            }
        } else {
            sent_tick + self.latency
        };

        let correlation_id = {
            let entry = inner
                .next_correlation
                .iter_mut()
                .find(|(e, _)| e == sender);
            match entry {
                Some((_, c)) => {
                    *c += 1;
                    *c
                }
                None => {
                    inner.next_correlation.push((sender.to_string(), 1));
                    1
                }
            }
        };

        let msg = ServiceMessage {
            kind: operation.kind(),
            sender: sender.to_string(),
            target: target.to_string(),
            operation,
            correlation_id,
            sent_tick,
            delivery_tick,
        };
        inner.in_flight.push(msg.clone());
        Ok(msg)
    }

    /// Returns and removes every message due for `endpoint` at or before
    /// `tick`, FIFO per sender, merged deterministically across senders by
    /// (delivery tick, sender id, correlation id).
    pub fn poll(&self, endpoint: &str, tick: u64) -> Result<Vec<ServiceMessage>, BusError> {
        let mut inner = self.inner.lock().unwrap();
        Self::priority_of(&inner, endpoint)?;

        let mut due = Vec::new();
        let mut rest = Vec::new();
        for msg in inner.in_flight.drain(..) {
            if msg.target == endpoint && msg.delivery_tick <= tick {
                due.push(msg);
            } else {
                rest.push(msg);
            }
        }
        inner.in_flight = rest;
        due.sort_by(|a, b| {
            (a.delivery_tick, &a.sender, a.correlation_id)
                .cmp(&(b.delivery_tick, &b.sender, b.correlation_id))
        });
        Ok(due)
    }

    pub fn in_flight_count(&self) -> usize {
        self.inner.lock().unwrap().in_flight.len()
    }
}

/// Anything that can queue an outgoing operation for a later flush. The
/// proxies stay agnostic of how a component orders its pending effects.
pub trait OpSink {
    fn push_op(&mut self, target: &str, op: Operation);
}

/// Typed sends a component wants to make this scan; the runtime flushes them
/// through the bus at the end of the instance's slot.
#[derive(Debug, Default)]
pub struct Outbox {
    pub pending: Vec<(String, Operation)>,
}

impl Outbox {
    pub fn push(&mut self, target: &str, op: Operation) {
        self.pending.push((target.to_string(), op));
    }
}

impl OpSink for Outbox {
    fn push_op(&mut self, target: &str, op: Operation) {
        self.push(target, op);
    }
}

/// The command surface a process controller has on one silo (fill/empty/
/// status plus the transfer-completion handshake), marshalled into requests.
#[derive(Clone, Debug)]
pub struct CommandProxy {
    target: String,
}

impl CommandProxy {
    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn fill(&self, out: &mut dyn OpSink) {
        out.push_op(&self.target, Operation::Fill);
    }

    pub fn empty(&self, out: &mut dyn OpSink) {
        out.push_op(&self.target, Operation::Empty);
    }

    pub fn status(&self, out: &mut dyn OpSink) {
        out.push_op(&self.target, Operation::Status);
    }

    pub fn mark_full(&self, out: &mut dyn OpSink) {
        out.push_op(&self.target, Operation::MarkFull);
    }

    pub fn mark_empty(&self, out: &mut dyn OpSink) {
        out.push_op(&self.target, Operation::MarkEmpty);
    }
}

/// The notification surface a silo publishes to its process controller,
/// marshalled into notifications.
#[derive(Clone, Debug)]
pub struct NotificationProxy {
    target: String,
}

impl NotificationProxy {
    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn filled(&self, silo: SiloId, out: &mut dyn OpSink) {
        out.push_op(&self.target, Operation::Filled(silo));
    }

    pub fn emptied(&self, silo: SiloId, out: &mut dyn OpSink) {
        out.push_op(&self.target, Operation::Emptied(silo));
    }

    pub fn status_is(&self, state: &str, out: &mut dyn OpSink) {
        out.push_op(&self.target, Operation::StatusIs(state.to_string()));
    }
}

/// Builds the two proxies wiring a silo endpoint to a process endpoint.
/// Component logic cannot tell a co-located pair from a remote one: both
/// sides always talk through messages, and only latency differs.
pub fn make_remote_pair(
    bus: &Bus,
    silo_endpoint: &str,
    process_endpoint: &str,
) -> Result<(CommandProxy, NotificationProxy), BusError> {
    let inner = bus.inner.lock().unwrap();
    Bus::priority_of(&inner, silo_endpoint)?;
    Bus::priority_of(&inner, process_endpoint)?;
    Ok((
        CommandProxy {
            target: silo_endpoint.to_string(),
        },
        NotificationProxy {
            target: process_endpoint.to_string(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus_with(latency: u64) -> Bus {
        let bus = Bus::new(latency);
        bus.register("GenLiqueurA", 1).unwrap();
        bus.register("Silo1", 3).unwrap();
        bus
    }

    #[test]
    fn zero_latency_downstream_delivers_same_scan() {
        let bus = bus_with(0);
        let msg = bus.send("GenLiqueurA", "Silo1", Operation::Fill, 10).unwrap();
        assert_eq!(msg.delivery_tick, 10);
        assert_eq!(bus.poll("Silo1", 10).unwrap().len(), 1);
    }

    #[test]
    fn zero_latency_upstream_delivers_next_scan() {
        let bus = bus_with(0);
        let msg = bus
            .send("Silo1", "GenLiqueurA", Operation::Filled(crate::plant::S1), 10)
            .unwrap();
        assert_eq!(msg.delivery_tick, 11);
        assert!(bus.poll("GenLiqueurA", 10).unwrap().is_empty());
        assert_eq!(bus.poll("GenLiqueurA", 11).unwrap().len(), 1);
    }

    #[test]
    fn latency_adds_to_sent_tick() {
        let bus = bus_with(3);
        let msg = bus.send("GenLiqueurA", "Silo1", Operation::Fill, 10).unwrap();
        assert_eq!(msg.delivery_tick, 13);
        assert!(bus.poll("Silo1", 12).unwrap().is_empty());
        assert_eq!(bus.poll("Silo1", 13).unwrap().len(), 1);
    }

    #[test]
    fn unknown_endpoint_is_rejected() {
        let bus = bus_with(0);
        let err = bus
            .send("GenLiqueurA", "nowhere", Operation::Fill, 0)
            .unwrap_err();
        assert_eq!(err, BusError::UnknownEndpoint("nowhere".into()));
        assert!(bus.poll("nowhere", 0).is_err());
        assert!(make_remote_pair(&bus, "Silo9", "GenLiqueurA").is_err());
    }

    #[test]
    fn poll_merges_senders_deterministically() {
        let bus = Bus::new(2);
        bus.register("a", 1).unwrap();
        bus.register("b", 2).unwrap();
        bus.register("sink", 9).unwrap();
        bus.send("b", "sink", Operation::Fill, 5).unwrap();
        bus.send("a", "sink", Operation::Empty, 5).unwrap();
        bus.send("a", "sink", Operation::Status, 5).unwrap();
        let due = bus.poll("sink", 7).unwrap();
        let order: Vec<(String, u64)> = due
            .iter()
            .map(|m| (m.sender.clone(), m.correlation_id))
            .collect();
        assert_eq!(
            order,
            vec![("a".into(), 1), ("a".into(), 2), ("b".into(), 1)]
        );
    }

    #[test]
    fn correlation_ids_increase_per_sender() {
        let bus = bus_with(1);
        let m1 = bus.send("GenLiqueurA", "Silo1", Operation::Fill, 0).unwrap();
        let m2 = bus.send("GenLiqueurA", "Silo1", Operation::Empty, 4).unwrap();
        assert!(m2.correlation_id > m1.correlation_id);
    }

    #[test]
    fn empty_poll_returns_nothing() {
        let bus = bus_with(0);
        assert!(bus.poll("Silo1", 99).unwrap().is_empty());
    }

    #[test]
    fn msg_trace_detail_format() {
        let bus = bus_with(3);
        let msg = bus.send("GenLiqueurA", "Silo1", Operation::Fill, 10).unwrap();
        assert_eq!(msg.trace_detail(), "GenLiqueurA->Silo1:fill#1@13");
    }

    #[test]
    fn proxies_marshal_operations() {
        let bus = bus_with(0);
        let (cmd, notif) = make_remote_pair(&bus, "Silo1", "GenLiqueurA").unwrap();
        let mut out = Outbox::default();
        cmd.fill(&mut out);
        cmd.mark_full(&mut out);
        notif.emptied(crate::plant::S1, &mut out);
        assert_eq!(
            out.pending,
            vec![
                ("Silo1".to_string(), Operation::Fill),
                ("Silo1".to_string(), Operation::MarkFull),
                ("GenLiqueurA".to_string(), Operation::Emptied(crate::plant::S1)),
            ]
        );
    }
}
