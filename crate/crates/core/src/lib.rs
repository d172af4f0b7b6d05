//! Deterministic desk-scale simulator of multi-radio, multi-channel
//! 802.11 mesh networks.
//!
//! The crate models a mesh backbone in which every station carries one
//! dedicated signaling radio plus one or more data radios. Routing runs
//! over the signaling channel (a proactive link-state engine with MPR
//! flooding, see [`olsr`]), routes are then remapped onto a bonded
//! virtual data interface ([`bonding`]), and a per-link negotiation
//! protocol picks data channels from interference scans
//! ([`negotiation`]). Throughput is computed analytically from a
//! calibrated capacity model ([`radio`]) instead of simulating frames,
//! which keeps whole-scenario runs well under a second while matching
//! saturation-test measurements at the modeled scale.
//!
//! [`sim`] ties everything together behind a single-threaded
//! discrete-event loop that is bit-reproducible for a fixed
//! (scenario, seed) pair.

pub mod bonding;
pub mod metrics;
pub mod negotiation;
pub mod olsr;
pub mod radio;
pub mod sim;
pub mod topo;

pub use bonding::{BondError, BondState};
pub use metrics::{ett, etx, error_prob, mcr, wcett, LossPair, Metric, MetricError, PathLink, PathSpec};
pub use negotiation::{
    decide_switch, exchange_macs, initial_assignment, merge_quality, ponderate_quality,
    select_channel, window_score, NegotiationError, NegotiationPacket, NegotiationParams,
    Negotiator, QualityList, ScanProvider, SwitchDecision,
};
pub use olsr::{Engine, OlsrConfig, RouteEntry, RouteTable};
pub use radio::{
    classify_overlap, contention_sets, gupta_kumar_bound, path_throughput, tmt_app, tmt_mac,
    ContentionSet, Curve, GkMode, OverlapClass, Protocol, RadioError, RadioParams,
};
pub use sim::{
    run, FinalRoute, Flow, FlowStats, Interferer, InterfererScope, OfferedLoad, RunStats,
    Scenario, SimError, SimTime,
};
pub use topo::{
    build_topology, channel_separation_mhz, Band, Channel, ChannelSeparation, IfaceId, Interface,
    InterfaceRole, IpAddr, Link, MacAddr, Node, NodeId, PacketKind, PacketRecord, Topology,
    TopologyError, TopologySpec,
};
