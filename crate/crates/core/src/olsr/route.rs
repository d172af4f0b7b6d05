//! Route table, shortest-path calculation helpers and the remapping of
//! finished routes onto the bonded data interface.

use std::collections::BTreeMap;

use crate::metrics::Metric;
use crate::topo::{IfaceId, IpAddr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteKind {
    /// Destination is a participating router.
    Node,
    /// Destination is an external network learned through HNA.
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub destination: IpAddr,
    pub next_hop: IpAddr,
    pub hop_count: u32,
    pub egress_interface: IfaceId,
    /// Summed link ETX of the chosen path.
    pub metric: Metric,
    pub kind: RouteKind,
}

/// Destination-keyed route table, deterministically ordered.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RouteTable {
    entries: BTreeMap<IpAddr, RouteEntry>,
}

impl RouteTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: RouteEntry) {
        self.entries.insert(entry.destination, entry);
    }

    pub fn get(&self, destination: IpAddr) -> Option<&RouteEntry> {
        self.entries.get(&destination)
    }

    pub fn contains(&self, destination: IpAddr) -> bool {
        self.entries.contains_key(&destination)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RouteEntry> {
        self.entries.values()
    }
}

impl FromIterator<RouteEntry> for RouteTable {
    fn from_iter<T: IntoIterator<Item = RouteEntry>>(iter: T) -> Self {
        let mut t = RouteTable::new();
        for e in iter {
            t.insert(e);
        }
        t
    }
}

/// Signaling-to-bond address mapping used by [`remap_routes`].
#[derive(Debug, Clone, PartialEq)]
pub struct AddressRemap {
    /// Signaling address of each participating node to its bond address.
    pub map: BTreeMap<IpAddr, IpAddr>,
    /// Egress written into every remapped entry.
    pub bond_iface: IfaceId,
}

impl AddressRemap {
    /// Maps an address, keeping it when it already is a bond address.
    /// `None` marks a non-participating node.
    fn translate(&self, addr: IpAddr) -> Option<IpAddr> {
        if let Some(&mapped) = self.map.get(&addr) {
            return Some(mapped);
        }
        if self.map.values().any(|&v| v == addr) {
            return Some(addr);
        }
        None
    }
}

/// Rewrites every destination and next hop from signaling to bond
/// addresses and points every entry at the bond interface. Entries
/// whose next hop (or non-external destination) has no bond
/// counterpart model non-participating nodes and are dropped; the
/// count of dropped entries is returned for diagnostics. Idempotent:
/// already-remapped tables pass through unchanged.
pub fn remap_routes(routes: &RouteTable, remap: &AddressRemap) -> (RouteTable, usize) {
    let mut out = RouteTable::new();
    let mut dropped = 0usize;
    for entry in routes.iter() {
        let Some(next_hop) = remap.translate(entry.next_hop) else {
            dropped += 1;
            continue;
        };
        let destination = match entry.kind {
            // External networks keep their own address space.
            RouteKind::External => entry.destination,
            RouteKind::Node => match remap.translate(entry.destination) {
                Some(d) => d,
                None => {
                    dropped += 1;
                    continue;
                }
            },
        };
        out.insert(RouteEntry {
            destination,
            next_hop,
            egress_interface: remap.bond_iface,
            ..entry.clone()
        });
    }
    (out, dropped)
}
