//! Discrete-event queue. Events pop in `(time, sequence)` order; the
//! sequence is a per-push ordinal, so simultaneous events replay in
//! exactly their scheduling order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::olsr::message::OlsrMessage;
use crate::sim::SimTime;
use crate::topo::{IpAddr, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    HelloTimer(NodeId),
    TcTimer(NodeId),
    HnaTimer(NodeId),
    Deliver {
        to: NodeId,
        sender_iface: IpAddr,
        msg: OlsrMessage,
    },
    NegotiationRound,
    FlowStart(usize),
    FlowEnd(usize),
    ConvergenceCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: SimTime,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .cmp(&other.time)
            .then(self.sequence.cmp(&other.sequence))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_sequence: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: SimTime, kind: EventKind) {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Reverse(Event {
            time,
            sequence,
            kind,
        }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}
