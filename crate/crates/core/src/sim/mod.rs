//! Deterministic single-threaded event loop tying the protocol engines
//! to the capacity model.
//!
//! Control traffic (hellos, topology floods, negotiation dialogs) is
//! event-simulated on the signaling channel; data throughput is
//! evaluated analytically per configuration epoch: whenever routes,
//! negotiated channels or the set of active flows change, every active
//! flow closes its current segment at the old configuration and starts
//! a new one. Achieved throughput is the time-weighted mean over
//! segments, which matches saturation-style measurements without
//! simulating individual frames.

mod event;
mod time;

pub use event::{Event, EventKind, EventQueue};
pub use time::SimTime;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bonding::BondState;
use crate::negotiation::{
    exchange_macs, initial_assignment, NegotiationParams, Negotiator, QualityList, ScanProvider,
    SwitchDecision,
};
use crate::olsr::{remap_routes, AddressRemap, Engine, OlsrConfig, RouteTable};
use crate::radio::{path_throughput_among, Protocol, RadioParams};
use crate::topo::{
    build_topology, signaling_to_bond_map, Band, Channel, IpAddr, Link, NodeId, PacketKind,
    PacketRecord, Topology, TopologySpec, TopologyError, BOND_IFACE,
};

/// Signal propagation plus receive handling, per delivered message.
const PROP_DELAY_US: u64 = 100;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Radio(#[from] crate::radio::RadioError),
    #[error(transparent)]
    Negotiation(#[from] crate::negotiation::NegotiationError),
    #[error("flow {0} references unknown node {1}")]
    UnknownFlowNode(usize, u32),
    #[error("flow {0} runs past the horizon")]
    FlowPastHorizon(usize),
    #[error("flow {0} duration must be positive")]
    FlowDuration(usize),
    #[error("initial channel override references non-adjacent pair {0}-{1}")]
    UnknownOverrideLink(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfferedLoad {
    /// Offer unbounded load, measuring the path capacity.
    Saturate,
    /// Offer a fixed rate in Mbps.
    Mbps(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub src: u32,
    pub dst: u32,
    pub protocol: Protocol,
    pub start_s: f64,
    pub duration_s: f64,
    #[serde(default = "default_offered")]
    pub offered: OfferedLoad,
}

fn default_offered() -> OfferedLoad {
    OfferedLoad::Saturate
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfererScope {
    #[default]
    All,
    Nodes(Vec<u32>),
}

/// An external interference source on one channel, active over a time
/// window, audible to the scoped nodes (and anyone in carrier-sense
/// range of them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    pub on_s: f64,
    pub off_s: f64,
    pub band: Band,
    pub channel: u8,
    pub level_dbm: f64,
    #[serde(default)]
    pub scope: InterfererScope,
}

/// Everything one run needs. Loadable from a scenario file by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub topology: TopologySpec,
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub olsr: OlsrConfig,
    #[serde(default)]
    pub negotiation: NegotiationParams,
    #[serde(default)]
    pub flows: Vec<Flow>,
    #[serde(default)]
    pub interferers: Vec<Interferer>,
    pub horizon_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// When false, the negotiation protocol and bond selector stay
    /// off: channels freeze at the initial assignment and the
    /// per-packet stack overhead is not charged to latency.
    #[serde(default = "default_true")]
    pub full_stack: bool,
    /// Explicit first channel per link `(a, b, channel)`; links not
    /// listed (or the whole field when absent) take the deterministic
    /// alternating assignment.
    #[serde(default)]
    pub initial_channels: Option<Vec<(u32, u32, u8)>>,
    /// Probability that one signaling delivery is lost.
    #[serde(default)]
    pub signaling_loss: f64,
    #[serde(default)]
    pub trace: bool,
}

fn default_true() -> bool {
    true
}

/// One remapped route entry as it stood at the end of the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalRoute {
    pub destination: IpAddr,
    pub next_hop: IpAddr,
    pub egress: crate::topo::IfaceId,
    pub hop_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowStats {
    pub flow: usize,
    pub src: u32,
    pub dst: u32,
    pub protocol: Protocol,
    pub achieved_mbps: f64,
    pub mean_latency_ms: f64,
    /// False when the flow never had a route.
    pub routed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunStats {
    pub flows: Vec<FlowStats>,
    /// Emissions (and forwards) per control message kind.
    pub message_counts: BTreeMap<PacketKind, u64>,
    pub tc_forwards: u64,
    /// Completed per-link negotiation rounds.
    pub negotiation_rounds: u64,
    /// Rounds aborted because the peer never answered.
    pub negotiation_timeouts: u64,
    /// Cursor rotations of each node's bond selector.
    pub bond_switches: BTreeMap<u32, u64>,
    pub bond_untuned_fallbacks: BTreeMap<u32, u64>,
    /// `(time, link, channel)` including the initial assignment.
    pub channel_history: Vec<(SimTime, Link, u8)>,
    /// First instant each adjacent pair reached mutual symmetric
    /// status, keyed `(low, high)` node ordinals.
    pub mutual_sym_at: BTreeMap<(u32, u32), SimTime>,
    /// First instant at which every node routed to every other.
    pub converged_at: Option<SimTime>,
    /// Remapped route table per node at the end of the run.
    pub final_routes: BTreeMap<u32, Vec<FinalRoute>>,
    /// JSON-lines event trace when enabled.
    pub trace: Vec<String>,
}

/// Scan provider backed by the scenario's interferer schedule. A node
/// hears an interferer when it is in scope (or in carrier-sense range
/// of a scoped node); its own network's signaling never shows up.
pub struct ScheduleScanProvider<'a> {
    interferers: &'a [Interferer],
    topo: &'a Topology,
}

impl ScanProvider for ScheduleScanProvider<'_> {
    fn scan(&self, node: NodeId, band: Band, now: SimTime) -> QualityList {
        let mut q = QualityList::floor(band);
        let t = now.as_secs_f64();
        for i in self.interferers {
            if i.band != band || t < i.on_s || t >= i.off_s {
                continue;
            }
            let audible = match &i.scope {
                InterfererScope::All => true,
                InterfererScope::Nodes(ids) => ids.iter().any(|&id| {
                    id == node.0 || self.topo.in_interference_range(node, NodeId(id))
                }),
            };
            if audible {
                let _ = q.observe(i.channel, i.level_dbm);
            }
        }
        q
    }
}

struct ActiveFlow {
    idx: usize,
    segment_start: SimTime,
    mbps_seconds: f64,
    latency_ms_seconds: f64,
    routed_ever: bool,
}

struct World {
    topo: Topology,
    sig_to_node: BTreeMap<IpAddr, NodeId>,
    scenario: Scenario,
    engines: BTreeMap<NodeId, Engine>,
    /// Remapped (bond-address) route table per node.
    routes: BTreeMap<NodeId, RouteTable>,
    remap: AddressRemap,
    bond_to_node: BTreeMap<IpAddr, NodeId>,
    negotiators: BTreeMap<NodeId, Negotiator>,
    bonds: BTreeMap<NodeId, BondState>,
    link_channels: BTreeMap<Link, u8>,
    active_flows: Vec<ActiveFlow>,
    stats: RunStats,
    rng: ChaCha8Rng,
    converged: bool,
}

impl World {
    fn count(&mut self, kind: PacketKind, n: u64) {
        *self.stats.message_counts.entry(kind).or_insert(0) += n;
    }

    fn trace(&mut self, now: SimTime, kind: &str, detail: String) {
        if self.scenario.trace {
            self.stats
                .trace
                .push(format!("{{\"t\":{},\"ev\":\"{kind}\",{detail}}}", now.as_secs_f64()));
        }
    }

    /// Channel object for a link's negotiated channel index, band taken
    /// from a data interface actually tuned to it (falling back to the
    /// negotiation band).
    fn link_channel(&self, link: Link, index: u8) -> Option<Channel> {
        for end in [link.0, link.1] {
            if let Some(node) = self.topo.node(end) {
                for iface in node.data_interfaces() {
                    if iface.channel.index == index {
                        return Some(iface.channel);
                    }
                }
            }
        }
        Channel::new(self.scenario.negotiation.band, index).ok()
    }

    fn assignment(&self) -> BTreeMap<Link, Channel> {
        self.link_channels
            .iter()
            .filter_map(|(&l, &idx)| self.link_channel(l, idx).map(|c| (l, c)))
            .collect()
    }

    /// Walks the remapped tables hop by hop toward the destination
    /// bond address. `None` when any node on the way has no route.
    fn flow_path(&self, flow_idx: usize) -> Option<Vec<NodeId>> {
        let flow = &self.scenario.flows[flow_idx];
        let dst_bond = IpAddr::for_bond(NodeId(flow.dst));
        let mut path = vec![NodeId(flow.src)];
        let mut seen = BTreeSet::new();
        seen.insert(NodeId(flow.src));
        let mut current = NodeId(flow.src);
        while current != NodeId(flow.dst) {
            let entry = self.routes.get(&current)?.get(dst_bond)?.clone();
            let next = *self.bond_to_node.get(&entry.next_hop)?;
            if !seen.insert(next) {
                return None;
            }
            path.push(next);
            current = next;
        }
        Some(path)
    }

    /// Rate and latency of a flow under the current configuration,
    /// sharing the medium with every other active flow.
    fn flow_rate_and_latency(&self, flow_idx: usize) -> (f64, f64, bool) {
        let flow = &self.scenario.flows[flow_idx];
        let Some(path) = self.flow_path(flow_idx) else {
            return (0.0, 0.0, false);
        };
        let mut active_links: BTreeSet<Link> = BTreeSet::new();
        for af in &self.active_flows {
            if let Some(p) = self.flow_path(af.idx) {
                for w in p.windows(2) {
                    active_links.insert(Link::new(w[0], w[1]));
                }
            }
        }
        for w in path.windows(2) {
            active_links.insert(Link::new(w[0], w[1]));
        }
        let assignment = self.assignment();
        let rate = match path_throughput_among(
            &self.topo,
            &assignment,
            &path,
            &active_links,
            &self.scenario.radio,
            flow.protocol,
        ) {
            Ok(r) => r,
            Err(_) => return (0.0, 0.0, false),
        };
        let rate = match flow.offered {
            OfferedLoad::Saturate => rate,
            OfferedLoad::Mbps(offered) => rate.min(offered),
        };
        let hops = (path.len() - 1) as f64;
        let mut latency = hops * self.scenario.radio.per_hop_latency_ms;
        if self.scenario.full_stack {
            latency += self.scenario.radio.per_packet_overhead_ms;
        }
        (rate, latency, true)
    }

    /// Closes the running segment of every active flow at `now` using
    /// the configuration as it stands, then reopens from `now`. Also
    /// drives one representative transmission per relay through each
    /// bond selector so its counters reflect the traffic pattern.
    fn close_segments(&mut self, now: SimTime) {
        type Measurement = (f64, f64, bool, Option<Vec<NodeId>>);
        let measurements: Vec<Measurement> = self
            .active_flows
            .iter()
            .map(|af| {
                let (rate, latency, routed) = self.flow_rate_and_latency(af.idx);
                (rate, latency, routed, self.flow_path(af.idx))
            })
            .collect();
        for ((rate, latency, routed, path), af) in
            measurements.into_iter().zip(&mut self.active_flows)
        {
            let dt = (now - af.segment_start).as_secs_f64();
            af.mbps_seconds += rate * dt;
            af.latency_ms_seconds += latency * dt;
            af.routed_ever |= routed;
            af.segment_start = now;
            // Drive one representative packet per hop through the
            // bond selectors so their counters track the pattern.
            if let (true, Some(path)) = (self.scenario.full_stack, path) {
                let dst = *path.last().expect("non-empty path");
                for w in path.windows(2) {
                    let (node, next) = (w[0], w[1]);
                    let sample = PacketRecord {
                        src: path[0],
                        dst,
                        size_bytes: 1460,
                        flow_id: af.idx as u32,
                        kind: PacketKind::Data,
                    };
                    if let Some(bond) = self.bonds.get_mut(&node) {
                        bond.xmit_select(&sample, IpAddr::for_bond(next));
                    }
                }
            }
        }
    }

    /// Refreshes the cached remapped route table of one node; reports
    /// whether it changed.
    fn refresh_routes(&mut self, node: NodeId, now: SimTime) -> bool {
        let engine = self.engines.get_mut(&node).expect("engine exists");
        if !engine.routes_dirty() {
            return false;
        }
        engine.compute_routes(now);
        let (remapped, _dropped) = remap_routes(engine.routes(), &self.remap);
        let changed = self.routes.get(&node) != Some(&remapped);
        self.routes.insert(node, remapped);
        changed
    }

    fn all_pairs_routed(&self) -> bool {
        let ids: Vec<NodeId> = self.topo.nodes.iter().map(|n| n.id).collect();
        ids.iter().all(|&a| {
            ids.iter().all(|&b| {
                a == b
                    || self
                        .routes
                        .get(&a)
                        .map(|t| t.contains(IpAddr::for_bond(b)))
                        .unwrap_or(false)
            })
        })
    }
}

/// Runs one scenario to its horizon. Deterministic: a fixed
/// `(scenario, seed)` pair replays the identical event order and
/// produces identical statistics; the seed only feeds explicitly
/// random elements (signaling loss sampling).
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunStats, SimError> {
    scenario.radio.validate()?;
    let topo = build_topology(&scenario.topology)?;
    let horizon = SimTime::from_secs_f64(scenario.horizon_s);

    for (idx, flow) in scenario.flows.iter().enumerate() {
        for end in [flow.src, flow.dst] {
            if topo.node(NodeId(end)).is_none() {
                return Err(SimError::UnknownFlowNode(idx, end));
            }
        }
        if flow.duration_s <= 0.0 {
            return Err(SimError::FlowDuration(idx));
        }
        if flow.start_s + flow.duration_s > scenario.horizon_s {
            return Err(SimError::FlowPastHorizon(idx));
        }
    }

    let engines: BTreeMap<NodeId, Engine> = topo
        .nodes
        .iter()
        .map(|n| (n.id, Engine::new(n, scenario.olsr.clone())))
        .collect();
    let bonds: BTreeMap<NodeId, BondState> = topo
        .nodes
        .iter()
        .map(|n| Ok((n.id, BondState::enslave(n).expect("validated topology"))))
        .collect::<Result<_, SimError>>()?;
    let remap = AddressRemap {
        map: signaling_to_bond_map(&topo),
        bond_iface: BOND_IFACE,
    };
    let bond_to_node: BTreeMap<IpAddr, NodeId> = topo
        .nodes
        .iter()
        .map(|n| (IpAddr::for_bond(n.id), n.id))
        .collect();
    let sig_to_node: BTreeMap<IpAddr, NodeId> = topo
        .nodes
        .iter()
        .map(|n| (n.signaling().ip_address, n.id))
        .collect();

    // First execution: install the deterministic initial channel plan
    // and exchange data MACs over the signaling channel.
    let mut assignment = initial_assignment(&topo, &scenario.negotiation)?;
    if let Some(overrides) = &scenario.initial_channels {
        for &(a, b, ch) in overrides {
            let link = Link::new(NodeId(a), NodeId(b));
            if !topo.adjacency.contains(&link) {
                return Err(SimError::UnknownOverrideLink(a, b));
            }
            assignment.insert(link, ch);
        }
    }
    let mut negotiators: BTreeMap<NodeId, Negotiator> = BTreeMap::new();
    for node in &topo.nodes {
        let mut neg = Negotiator::default();
        neg.seed(node.id, &assignment);
        negotiators.insert(node.id, neg);
    }
    for &link in &topo.adjacency {
        let mut a = negotiators.remove(&link.0).expect("negotiator");
        let mut b = negotiators.remove(&link.1).expect("negotiator");
        exchange_macs(&mut a, link.0, &mut b, link.1, &topo);
        negotiators.insert(link.0, a);
        negotiators.insert(link.1, b);
    }

    let mut world = World {
        scenario: scenario.clone(),
        engines,
        routes: BTreeMap::new(),
        remap,
        bond_to_node,
        negotiators,
        bonds,
        link_channels: assignment.clone(),
        active_flows: Vec::new(),
        stats: RunStats::default(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        converged: false,
        sig_to_node,
        topo,
    };
    for (&link, &ch) in &assignment {
        world.stats.channel_history.push((SimTime::ZERO, link, ch));
    }
    world.count(PacketKind::NegotiationMsg, 2 * assignment.len() as u64);

    let mut queue = EventQueue::new();
    let node_ids: Vec<NodeId> = world.topo.nodes.iter().map(|n| n.id).collect();
    for &id in &node_ids {
        queue.push(SimTime::ZERO, EventKind::HelloTimer(id));
        queue.push(
            SimTime::from_secs_f64(scenario.olsr.tc_interval_s),
            EventKind::TcTimer(id),
        );
        if !scenario.olsr.local_hna.is_empty() {
            queue.push(
                SimTime::from_secs_f64(scenario.olsr.hna_interval_s),
                EventKind::HnaTimer(id),
            );
        }
    }
    if scenario.full_stack && !world.topo.adjacency.is_empty() {
        queue.push(
            SimTime::from_secs_f64(scenario.negotiation.first_round_s),
            EventKind::NegotiationRound,
        );
    }
    for (idx, flow) in scenario.flows.iter().enumerate() {
        queue.push(SimTime::from_secs_f64(flow.start_s), EventKind::FlowStart(idx));
        queue.push(
            SimTime::from_secs_f64(flow.start_s + flow.duration_s),
            EventKind::FlowEnd(idx),
        );
    }
    queue.push(SimTime::from_secs_f64(1.0), EventKind::ConvergenceCheck);

    let mut flow_results: Vec<Option<FlowStats>> = vec![None; scenario.flows.len()];
    // The topology is immutable for the whole run; the scan provider
    // keeps its own copy so rounds can mutate the rest of the world.
    let scan_topo = world.topo.clone();

    let mut last_time = SimTime::ZERO;
    while let Some(event) = queue.pop() {
        let now = event.time;
        // Causality: nothing ever executes before the event that
        // scheduled it; the queue must pop in non-decreasing time.
        debug_assert!(now >= last_time, "event at {now} after {last_time}");
        last_time = now;
        if now > horizon {
            break;
        }
        match event.kind {
            EventKind::HelloTimer(node) => {
                let msg = world
                    .engines
                    .get_mut(&node)
                    .expect("engine exists")
                    .emit_hello(now);
                world.count(PacketKind::Hello, 1);
                world.trace(now, "emit", format!("\"node\":{},\"msg\":\"{}\"", node.0, msg.trace_line()));
                let loss = world.scenario.signaling_loss;
                for nbr in world.topo.neighbors(node) {
                    if loss > 0.0 && world.rng.random_range(0.0..1.0) < loss {
                        continue;
                    }
                    queue.push(
                        SimTime(now.0 + PROP_DELAY_US),
                        EventKind::Deliver {
                            to: nbr,
                            sender_iface: msg.originator,
                            msg: msg.clone(),
                        },
                    );
                }
                let next = now.saturating_add_secs(world.scenario.olsr.hello_interval_s);
                if next <= horizon {
                    queue.push(next, EventKind::HelloTimer(node));
                }
            }
            EventKind::TcTimer(node) => {
                let maybe_tc = world
                    .engines
                    .get_mut(&node)
                    .expect("engine exists")
                    .emit_tc(now);
                if let Some(msg) = maybe_tc {
                    world.count(PacketKind::Tc, 1);
                    world.trace(now, "emit", format!("\"node\":{},\"msg\":\"{}\"", node.0, msg.trace_line()));
                    let loss = world.scenario.signaling_loss;
                    for nbr in world.topo.neighbors(node) {
                        if loss > 0.0 && world.rng.random_range(0.0..1.0) < loss {
                            continue;
                        }
                        queue.push(
                            SimTime(now.0 + PROP_DELAY_US),
                            EventKind::Deliver {
                                to: nbr,
                                sender_iface: msg.originator,
                                msg: msg.clone(),
                            },
                        );
                    }
                }
                let next = now.saturating_add_secs(world.scenario.olsr.tc_interval_s);
                if next <= horizon {
                    queue.push(next, EventKind::TcTimer(node));
                }
            }
            EventKind::HnaTimer(node) => {
                let maybe = world
                    .engines
                    .get_mut(&node)
                    .expect("engine exists")
                    .emit_hna(now);
                if let Some(msg) = maybe {
                    world.count(PacketKind::Hna, 1);
                    for nbr in world.topo.neighbors(node) {
                        queue.push(
                            SimTime(now.0 + PROP_DELAY_US),
                            EventKind::Deliver {
                                to: nbr,
                                sender_iface: msg.originator,
                                msg: msg.clone(),
                            },
                        );
                    }
                }
                let next = now.saturating_add_secs(world.scenario.olsr.hna_interval_s);
                if next <= horizon {
                    queue.push(next, EventKind::HnaTimer(node));
                }
            }
            EventKind::Deliver {
                to,
                sender_iface,
                msg,
            } => {
                let forwards = world
                    .engines
                    .get_mut(&to)
                    .expect("engine exists")
                    .handle_message(&msg, sender_iface, now);
                for fwd in forwards {
                    world.stats.tc_forwards += u64::from(fwd.kind() == PacketKind::Tc);
                    world.count(fwd.kind(), 1);
                    let from_iface = world.topo.node(to).expect("node").signaling().ip_address;
                    let loss = world.scenario.signaling_loss;
                    for nbr in world.topo.neighbors(to) {
                        if loss > 0.0 && world.rng.random_range(0.0..1.0) < loss {
                            continue;
                        }
                        queue.push(
                            SimTime(now.0 + PROP_DELAY_US),
                            EventKind::Deliver {
                                to: nbr,
                                sender_iface: from_iface,
                                msg: fwd.clone(),
                            },
                        );
                    }
                }
                if msg.kind() == PacketKind::Hello {
                    // Record the instant an adjacent pair first became
                    // mutually symmetric.
                    if let Some(&from) = world.sig_to_node.get(&sender_iface) {
                        let key = (to.0.min(from.0), to.0.max(from.0));
                        if !world.stats.mutual_sym_at.contains_key(&key) {
                            let a_sees_b = world.engines[&to]
                                .is_sym_neighbor(sender_iface);
                            let b_sees_a = world.engines[&from].is_sym_neighbor(
                                world.topo.node(to).expect("node").signaling().ip_address,
                            );
                            if a_sees_b && b_sees_a {
                                world.stats.mutual_sym_at.insert(key, now);
                            }
                        }
                    }
                }
                if world.engines[&to].routes_dirty() {
                    // Value running segments at the pre-change tables.
                    world.close_segments(now);
                    if world.refresh_routes(to, now) {
                        world.trace(now, "routes", format!("\"node\":{}", to.0));
                    }
                }
            }
            EventKind::NegotiationRound => {
                world.close_segments(now);
                let links: Vec<Link> = world.topo.adjacency.iter().copied().collect();
                let provider = ScheduleScanProvider {
                    interferers: &scenario.interferers,
                    topo: &scan_topo,
                };
                let params = &scenario.negotiation;
                for link in links {
                    let (a, b) = (link.0, link.1);
                    let out_a = world
                        .negotiators
                        .get_mut(&a)
                        .expect("negotiator")
                        .run_link_round(a, b, true, &provider, params, now)?;
                    let out_b = world
                        .negotiators
                        .get_mut(&b)
                        .expect("negotiator")
                        .run_link_round(b, a, true, &provider, params, now)?;
                    debug_assert_eq!(
                        out_a.packet.channel, out_b.packet.channel,
                        "symmetric dialog must agree"
                    );
                    world.stats.negotiation_rounds += 1;
                    world.count(PacketKind::NegotiationMsg, 2);
                    if let Some(bond) = world.bonds.get_mut(&a) {
                        bond.store_packet(out_a.packet);
                    }
                    if let Some(bond) = world.bonds.get_mut(&b) {
                        bond.store_packet(out_b.packet);
                    }
                    if out_a.decision == SwitchDecision::Switch {
                        world.link_channels.insert(link, out_a.packet.channel);
                        world
                            .stats
                            .channel_history
                            .push((now, link, out_a.packet.channel));
                        world.trace(
                            now,
                            "channel",
                            format!(
                                "\"link\":\"{}\",\"channel\":{}",
                                link, out_a.packet.channel
                            ),
                        );
                    }
                }
                let next = now.saturating_add_secs(params.round_period_s);
                if next <= horizon {
                    queue.push(next, EventKind::NegotiationRound);
                }
            }
            EventKind::FlowStart(idx) => {
                world.close_segments(now);
                world.active_flows.push(ActiveFlow {
                    idx,
                    segment_start: now,
                    mbps_seconds: 0.0,
                    latency_ms_seconds: 0.0,
                    routed_ever: false,
                });
                world.trace(now, "flow_start", format!("\"flow\":{idx}"));
            }
            EventKind::FlowEnd(idx) => {
                world.close_segments(now);
                if let Some(pos) = world.active_flows.iter().position(|af| af.idx == idx) {
                    let af = world.active_flows.remove(pos);
                    let flow = &scenario.flows[idx];
                    let duration = flow.duration_s;
                    flow_results[idx] = Some(FlowStats {
                        flow: idx,
                        src: flow.src,
                        dst: flow.dst,
                        protocol: flow.protocol,
                        achieved_mbps: af.mbps_seconds / duration,
                        mean_latency_ms: af.latency_ms_seconds / duration,
                        routed: af.routed_ever,
                    });
                    world.trace(now, "flow_end", format!("\"flow\":{idx}"));
                }
            }
            EventKind::ConvergenceCheck => {
                if !world.converged {
                    // Route caches refresh lazily; force them here.
                    for &id in &node_ids {
                        world.refresh_routes(id, now);
                    }
                    if world.all_pairs_routed() {
                        world.converged = true;
                        world.stats.converged_at = Some(now);
                        world.trace(now, "converged", String::new());
                    } else {
                        let next = now.saturating_add_secs(1.0);
                        if next <= horizon {
                            queue.push(next, EventKind::ConvergenceCheck);
                        }
                    }
                }
            }
        }
    }

    for &id in &node_ids {
        world.refresh_routes(id, horizon);
    }
    for (node, table) in &world.routes {
        world.stats.final_routes.insert(
            node.0,
            table
                .iter()
                .map(|e| FinalRoute {
                    destination: e.destination,
                    next_hop: e.next_hop,
                    egress: e.egress_interface,
                    hop_count: e.hop_count,
                })
                .collect(),
        );
    }
    for (node, bond) in &world.bonds {
        world.stats.bond_switches.insert(node.0, bond.switch_count);
        world
            .stats
            .bond_untuned_fallbacks
            .insert(node.0, bond.untuned_fallbacks);
    }
    world.stats.negotiation_timeouts = world
        .negotiators
        .values()
        .map(|n| n.timeouts)
        .sum();
    world.stats.flows = flow_results
        .into_iter()
        .enumerate()
        .map(|(idx, r)| {
            r.unwrap_or_else(|| {
                let flow = &scenario.flows[idx];
                FlowStats {
                    flow: idx,
                    src: flow.src,
                    dst: flow.dst,
                    protocol: flow.protocol,
                    achieved_mbps: 0.0,
                    mean_latency_ms: 0.0,
                    routed: false,
                }
            })
        })
        .collect();
    Ok(world.stats)
}
