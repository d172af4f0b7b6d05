//! Virtual bond interface: one master per node enslaving the data
//! interfaces behind a single address, with a per-packet transmit rule
//! driven by the freshest negotiation packet for the next hop.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::negotiation::NegotiationPacket;
use crate::topo::{Channel, IfaceId, InterfaceRole, IpAddr, MacAddr, Node, PacketRecord, BOND_IFACE};

#[derive(Debug, Error, PartialEq)]
pub enum BondError {
    #[error("node has no data interfaces to enslave")]
    NoDataInterfaces,
    #[error("interface {0} already enslaved")]
    AlreadyEnslaved(IfaceId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slave {
    pub iface: IfaceId,
    pub channel: Channel,
}

/// Bond state of one node. The slave ring keeps enslave order; the
/// cursor marks the active slave and `active_channel` always mirrors
/// its channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BondState {
    pub master: IfaceId,
    slaves: Vec<Slave>,
    cursor: usize,
    pub unified_mac: MacAddr,
    pub unified_ip: IpAddr,
    packet_store: BTreeMap<IpAddr, NegotiationPacket>,
    /// Cursor rotations performed by transmit selection.
    pub switch_count: u64,
    /// Requests for channels no slave is tuned to.
    pub untuned_fallbacks: u64,
    /// Ring probes performed, for cost accounting.
    pub probe_count: u64,
}

impl BondState {
    /// Enslaves every data interface of `node`, in declaration order.
    /// Identity (MAC and address) comes from the first slave, the way
    /// the real driver copies it from the first enslaved port.
    pub fn enslave(node: &Node) -> Result<BondState, BondError> {
        let mut slaves = Vec::new();
        let mut first_mac = None;
        for iface in &node.interfaces {
            if iface.role != InterfaceRole::Data {
                continue;
            }
            if slaves.iter().any(|s: &Slave| s.iface == iface.id) {
                return Err(BondError::AlreadyEnslaved(iface.id));
            }
            if first_mac.is_none() {
                first_mac = Some(iface.mac_address);
            }
            slaves.push(Slave {
                iface: iface.id,
                channel: iface.channel,
            });
        }
        let Some(unified_mac) = first_mac else {
            return Err(BondError::NoDataInterfaces);
        };
        Ok(BondState {
            master: BOND_IFACE,
            slaves,
            cursor: 0,
            unified_mac,
            unified_ip: IpAddr::for_bond(node.id),
            packet_store: BTreeMap::new(),
            switch_count: 0,
            untuned_fallbacks: 0,
            probe_count: 0,
        })
    }

    pub fn slaves(&self) -> &[Slave] {
        &self.slaves
    }

    pub fn current_slave(&self) -> &Slave {
        &self.slaves[self.cursor]
    }

    /// Channel the bond is transmitting on right now.
    pub fn active_channel(&self) -> Channel {
        self.current_slave().channel
    }

    pub fn stored_packet(&self, neighbor: IpAddr) -> Option<&NegotiationPacket> {
        self.packet_store.get(&neighbor)
    }

    /// Replaces the stored packet for the packet's neighbor. No
    /// interface change happens here; only transmissions move the ring.
    pub fn store_packet(&mut self, packet: NegotiationPacket) {
        self.packet_store.insert(packet.neighbor_addr, packet);
    }

    /// Per-packet transmit rule, executed for every outgoing packet: if
    /// the stored negotiation packet for the next hop names a decided
    /// channel different from the active one, rotate the ring until a
    /// slave tuned to it is active. Unknown neighbors and undecided (0)
    /// channels transmit on the current slave; a channel no slave is
    /// tuned to falls back likewise, counted. The packet itself does
    /// not influence the choice; only its next hop does.
    pub fn xmit_select(&mut self, packet: &PacketRecord, next_hop: IpAddr) -> IfaceId {
        let _ = packet;
        let Some(&NegotiationPacket { channel, .. }) = self.packet_store.get(&next_hop) else {
            return self.current_slave().iface;
        };
        if channel == 0 || channel == self.active_channel().index {
            return self.current_slave().iface;
        }
        let start = self.cursor;
        for _ in 0..self.slaves.len() {
            self.cursor = (self.cursor + 1) % self.slaves.len();
            self.probe_count += 1;
            if self.slaves[self.cursor].channel.index == channel {
                self.switch_count += 1;
                return self.current_slave().iface;
            }
        }
        self.cursor = start;
        self.untuned_fallbacks += 1;
        self.current_slave().iface
    }
}
