//! Domain model: channels, interfaces, nodes and validated topologies.
//!
//! Every other module works against the types defined here. A
//! [`Topology`] is immutable once built; the simulator only layers
//! dynamic state (link quality, negotiated channels, bond cursors) on
//! top of it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2.4 GHz channel indices run 1..=11 on the modeled hardware.
pub const B24_MIN_INDEX: u8 = 1;
pub const B24_MAX_INDEX: u8 = 11;

/// 5 GHz channel indices available on the modeled hardware.
pub const B5_INDICES: [u8; 13] = [36, 40, 44, 48, 52, 56, 60, 64, 149, 153, 157, 161, 165];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("channel index {index} outside the {band:?} channel list")]
    ChannelIndex { band: Band, index: u8 },
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("node {0} has {1} signaling interfaces, exactly one required")]
    SignalingCount(NodeId, usize),
    #[error("node {0} has no data interface")]
    NoDataInterface(NodeId),
    #[error("interface rate must be positive on node {0}")]
    NonPositiveRate(NodeId),
    #[error("adjacency edge references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("adjacency edge {0}-{0} is a self loop")]
    SelfLoop(NodeId),
    #[error("adjacent nodes {0} and {1} are not within interference range")]
    AdjacencyOutsideInterference(NodeId, NodeId),
    #[error("duplicate interface id {1} on node {0}")]
    DuplicateInterface(NodeId, IfaceId),
}

/// Frequency band of an 802.11 channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    /// 2.4 GHz (11 Mbps modulation on the modeled stations).
    B24,
    /// 5 GHz (12 Mbps modulation on the modeled stations).
    B5,
}

impl Band {
    /// All channel indices valid in this band, in ascending order.
    pub fn channel_indices(self) -> Vec<u8> {
        match self {
            Band::B24 => (B24_MIN_INDEX..=B24_MAX_INDEX).collect(),
            Band::B5 => B5_INDICES.to_vec(),
        }
    }

    /// Position of `index` within the band channel list.
    pub fn channel_position(self, index: u8) -> Option<usize> {
        match self {
            Band::B24 => {
                if (B24_MIN_INDEX..=B24_MAX_INDEX).contains(&index) {
                    Some((index - B24_MIN_INDEX) as usize)
                } else {
                    None
                }
            }
            Band::B5 => B5_INDICES.iter().position(|&c| c == index),
        }
    }

    /// Frequency separation below which two channels of this band are
    /// treated as fully orthogonal by default. 25 MHz keeps exactly
    /// channels 1/6/11 mutually orthogonal at 2.4 GHz; 5 GHz needs
    /// 120 MHz on the modeled hardware.
    pub fn default_orthogonality_threshold_mhz(self) -> u32 {
        match self {
            Band::B24 => 25,
            Band::B5 => 120,
        }
    }
}

/// A single 802.11 channel, identified by band and index. The center
/// frequency is derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Channel {
    pub band: Band,
    pub index: u8,
}

impl Channel {
    pub fn new(band: Band, index: u8) -> Result<Self, TopologyError> {
        if band.channel_position(index).is_none() {
            return Err(TopologyError::ChannelIndex { band, index });
        }
        Ok(Channel { band, index })
    }

    /// Center frequency in MHz. 2.4 GHz: 2412 + 5*(i-1); 5 GHz: 5000 + 5*i.
    pub fn center_mhz(self) -> u32 {
        match self.band {
            Band::B24 => 2412 + 5 * (self.index as u32 - 1),
            Band::B5 => 5000 + 5 * self.index as u32,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let band = match self.band {
            Band::B24 => "b24",
            Band::B5 => "b5",
        };
        write!(f, "{band}:{}", self.index)
    }
}

/// Separation between two channels; channels of different bands never
/// interfere and are therefore incomparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSeparation {
    SameBand(u32),
    Incomparable,
}

/// `|center(a) - center(b)|` within a band, `Incomparable` across bands.
pub fn channel_separation_mhz(a: Channel, b: Channel) -> ChannelSeparation {
    if a.band != b.band {
        return ChannelSeparation::Incomparable;
    }
    ChannelSeparation::SameBand(a.center_mhz().abs_diff(b.center_mhz()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfaceRole {
    /// Carries routing and negotiation traffic only.
    Signaling,
    /// Carries user data; enslaved under the node bond.
    Data,
}

/// Node-scoped interface ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IfaceId(pub u8);

/// Ordinal reserved for the virtual bond interface of a node; it never
/// collides with physical interface ids, which are small.
pub const BOND_IFACE: IfaceId = IfaceId(u8::MAX);

impl fmt::Display for IfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == BOND_IFACE {
            write!(f, "bond0")
        } else {
            write!(f, "if{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Opaque 32-bit address. Generated from (node, interface) by
/// [`IpAddr::for_iface`]; the scheme is fixed so runs are reproducible
/// and collision-free without any address parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IpAddr(pub u32);

impl IpAddr {
    /// `0x0A000000 | node << 8 | iface`: one /24-like block per node.
    pub fn for_iface(node: NodeId, iface: IfaceId) -> Self {
        IpAddr(0x0A00_0000 | (node.0 << 8) | iface.0 as u32)
    }

    /// Address presented by the bond of `node` (shared by all its data
    /// interfaces once bonded).
    pub fn for_bond(node: NodeId) -> Self {
        IpAddr::for_iface(node, BOND_IFACE)
    }
}

impl fmt::Display for IpAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}.{}.{}",
            self.0 >> 24,
            (self.0 >> 16) & 0xff,
            (self.0 >> 8) & 0xff,
            self.0 & 0xff
        )
    }
}

/// Opaque 48-bit MAC, same generation scheme as [`IpAddr`]. The
/// locally-administered bit is set so generated addresses can never be
/// mistaken for vendor ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MacAddr(pub u64);

impl MacAddr {
    pub fn for_iface(node: NodeId, iface: IfaceId) -> Self {
        MacAddr(0x0200_0000_0000 | ((node.0 as u64) << 8) | iface.0 as u64)
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub id: IfaceId,
    pub role: InterfaceRole,
    pub channel: Channel,
    pub ip_address: IpAddr,
    pub mac_address: MacAddr,
    /// Nominal modulation rate, Mbps.
    pub rate_mbps: f64,
    /// Scalar position along the node antenna axis, cm. Drives the
    /// intra-node coupling penalty when a relay switches interfaces.
    pub antenna_position_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub interfaces: Vec<Interface>,
    /// 2-D position in meters; informational except for range predicates.
    pub position: (f64, f64),
}

impl Node {
    pub fn signaling(&self) -> &Interface {
        self.interfaces
            .iter()
            .find(|i| i.role == InterfaceRole::Signaling)
            .expect("validated topology node has a signaling interface")
    }

    pub fn data_interfaces(&self) -> impl Iterator<Item = &Interface> {
        self.interfaces
            .iter()
            .filter(|i| i.role == InterfaceRole::Data)
    }

    /// Data interface currently tuned to `channel`, if any.
    pub fn data_iface_on(&self, channel: Channel) -> Option<&Interface> {
        self.data_interfaces().find(|i| i.channel == channel)
    }

    pub fn iface(&self, id: IfaceId) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.id == id)
    }
}

/// Unordered node pair; the canonical key for physical links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link(pub NodeId, pub NodeId);

impl Link {
    /// Normalizes the endpoint order so `Link(a, b) == Link(b, a)`.
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Link(a, b)
        } else {
            Link(b, a)
        }
    }

    pub fn other(&self, n: NodeId) -> NodeId {
        if self.0 == n {
            self.1
        } else {
            self.0
        }
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.0 == n || self.1 == n
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketKind {
    Data,
    Hello,
    Tc,
    Mid,
    Hna,
    NegotiationMsg,
}

/// A data or control packet as seen by counters and the bond selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u32,
    pub flow_id: u32,
    pub kind: PacketKind,
}

/// The immutable world state: stations, their radios and who can hear
/// whom. `adjacency` models the (possibly filtered) communication
/// graph; `interference` the carrier-sense graph, always a superset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub adjacency: BTreeSet<Link>,
    pub interference: BTreeSet<Link>,
}

impl Topology {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        self.adjacency
            .iter()
            .filter(|l| l.touches(id))
            .map(|l| l.other(id))
            .collect()
    }

    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency.contains(&Link::new(a, b))
    }

    /// Carrier-sense predicate; a node always senses itself.
    pub fn in_interference_range(&self, a: NodeId, b: NodeId) -> bool {
        a == b || self.interference.contains(&Link::new(a, b))
    }

    /// True when the endpoints of `a` and `b` are close enough that the
    /// two links cannot transmit independently on a shared channel.
    pub fn links_in_range(&self, a: Link, b: Link) -> bool {
        [a.0, a.1].iter().any(|&u| {
            [b.0, b.1]
                .iter()
                .any(|&v| self.in_interference_range(u, v))
        })
    }
}

/// Declarative interface description used by [`build_topology`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub role: InterfaceRole,
    pub band: Band,
    pub channel: u8,
    #[serde(default = "default_rate")]
    pub rate_mbps: f64,
    /// Position along the node antenna axis, cm.
    #[serde(default)]
    pub antenna_cm: f64,
}

fn default_rate() -> f64 {
    11.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: u32,
    #[serde(default)]
    pub position: (f64, f64),
    pub interfaces: Vec<InterfaceSpec>,
}

/// Declarative topology description (normally parsed from a scenario
/// file). Interference edges default to the full mesh over the node
/// set, matching a bench where every station hears every other.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopologySpec {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub adjacency: Vec<(u32, u32)>,
    /// Explicit carrier-sense pairs; `None` means all pairs.
    #[serde(default)]
    pub interference: Option<Vec<(u32, u32)>>,
}

/// Validates a [`TopologySpec`] and materializes addresses.
///
/// Deterministic: identical specs yield structurally identical
/// topologies, including generated addresses.
pub fn build_topology(spec: &TopologySpec) -> Result<Topology, TopologyError> {
    let mut nodes = Vec::with_capacity(spec.nodes.len());
    let mut seen = BTreeSet::new();
    for ns in &spec.nodes {
        let id = NodeId(ns.id);
        if !seen.insert(id) {
            return Err(TopologyError::DuplicateNode(id));
        }
        let signaling = ns
            .interfaces
            .iter()
            .filter(|i| i.role == InterfaceRole::Signaling)
            .count();
        if signaling != 1 {
            return Err(TopologyError::SignalingCount(id, signaling));
        }
        if !ns.interfaces.iter().any(|i| i.role == InterfaceRole::Data) {
            return Err(TopologyError::NoDataInterface(id));
        }
        let mut interfaces = Vec::with_capacity(ns.interfaces.len());
        for (ord, is) in ns.interfaces.iter().enumerate() {
            if is.rate_mbps <= 0.0 {
                return Err(TopologyError::NonPositiveRate(id));
            }
            let iface_id = IfaceId(ord as u8);
            interfaces.push(Interface {
                id: iface_id,
                role: is.role,
                channel: Channel::new(is.band, is.channel)?,
                ip_address: IpAddr::for_iface(id, iface_id),
                mac_address: MacAddr::for_iface(id, iface_id),
                rate_mbps: is.rate_mbps,
                antenna_position_cm: is.antenna_cm,
            });
        }
        nodes.push(Node {
            id,
            interfaces,
            position: ns.position,
        });
    }

    let known: BTreeSet<NodeId> = nodes.iter().map(|n| n.id).collect();
    let mut adjacency = BTreeSet::new();
    for &(a, b) in &spec.adjacency {
        let (a, b) = (NodeId(a), NodeId(b));
        if a == b {
            return Err(TopologyError::SelfLoop(a));
        }
        for n in [a, b] {
            if !known.contains(&n) {
                return Err(TopologyError::UnknownNode(n));
            }
        }
        adjacency.insert(Link::new(a, b));
    }

    let interference = match &spec.interference {
        None => {
            let ids: Vec<NodeId> = known.iter().copied().collect();
            let mut all = BTreeSet::new();
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    all.insert(Link::new(a, b));
                }
            }
            all
        }
        Some(pairs) => {
            let mut set = BTreeSet::new();
            for &(a, b) in pairs {
                let (a, b) = (NodeId(a), NodeId(b));
                if a == b {
                    return Err(TopologyError::SelfLoop(a));
                }
                for n in [a, b] {
                    if !known.contains(&n) {
                        return Err(TopologyError::UnknownNode(n));
                    }
                }
                set.insert(Link::new(a, b));
            }
            set
        }
    };

    for l in &adjacency {
        if !interference.contains(l) {
            return Err(TopologyError::AdjacencyOutsideInterference(l.0, l.1));
        }
    }

    // Address uniqueness is structural with generated addresses; check
    // anyway so the invariant survives future constructors.
    let mut ips = BTreeSet::new();
    let mut macs = BTreeSet::new();
    for n in &nodes {
        for i in &n.interfaces {
            if !ips.insert(i.ip_address) || !macs.insert(i.mac_address) {
                return Err(TopologyError::DuplicateInterface(n.id, i.id));
            }
        }
    }

    Ok(Topology {
        nodes,
        adjacency,
        interference,
    })
}

/// Builds the spec for a linear chain: every node gets one signaling
/// interface plus one data interface per entry in `data_channels`.
pub fn chain_spec(
    n: usize,
    signaling: (Band, u8),
    data_channels: &[(Band, u8)],
    antenna_spacing_cm: f64,
) -> TopologySpec {
    let nodes = (0..n)
        .map(|i| NodeSpec {
            id: i as u32,
            position: (2.0 * i as f64, 0.0),
            interfaces: std::iter::once(InterfaceSpec {
                role: InterfaceRole::Signaling,
                band: signaling.0,
                channel: signaling.1,
                rate_mbps: 11.0,
                antenna_cm: 0.0,
            })
            .chain(data_channels.iter().enumerate().map(|(k, &(band, ch))| {
                InterfaceSpec {
                    role: InterfaceRole::Data,
                    band,
                    channel: ch,
                    rate_mbps: if band == Band::B5 { 12.0 } else { 11.0 },
                    antenna_cm: k as f64 * antenna_spacing_cm,
                }
            }))
            .collect(),
        })
        .collect();
    TopologySpec {
        nodes,
        adjacency: (0..n.saturating_sub(1))
            .map(|i| (i as u32, i as u32 + 1))
            .collect(),
        interference: None,
    }
}

/// Map from each node's signaling address to its bond address, as used
/// by route remapping.
pub fn signaling_to_bond_map(topo: &Topology) -> BTreeMap<IpAddr, IpAddr> {
    topo.nodes
        .iter()
        .map(|n| (n.signaling().ip_address, IpAddr::for_bond(n.id)))
        .collect()
}
