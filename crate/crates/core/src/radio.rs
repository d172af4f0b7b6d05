//! Analytic capacity and interference model.
//!
//! Throughput is never simulated frame by frame. Instead each path is
//! scored from a calibrated single-hop baseline multiplied by three
//! per-link penalties: co-channel medium sharing (one share per member
//! of the link's contention set), adjacent-channel degradation (a
//! fitted curve over frequency separation) and intra-node antenna
//! coupling at relays that switch data interfaces. The module also
//! carries the closed-form ceiling estimates (header efficiency, MAC
//! delay budget, per-node scaling bounds) used as sanity oracles.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topo::{
    channel_separation_mhz, Band, Channel, ChannelSeparation, Link, NodeId, Topology,
};

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("datagram length must be positive")]
    ZeroBeta,
    #[error("SDU delay must be positive")]
    ZeroDelay,
    #[error("link {0} has no assigned channel")]
    UnassignedLink(Link),
    #[error("path is not connected over the adjacency set")]
    DisconnectedPath,
    #[error("node count must be at least 2")]
    TooFewNodes,
    #[error("arbitrary-placement attenuation must exceed 2")]
    AttenuationOutOfRange,
    #[error("curve must have at least one point, multipliers in [0,1]")]
    InvalidCurve,
}

/// Relation between two channels as seen by the capacity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapClass {
    CoChannel,
    AdjacentOverlap { separation_mhz: u32 },
    Orthogonal,
}

/// Transport flavor of a measured flow. These are calibrated baselines,
/// not simulated transports: the reliable flavor simply starts from a
/// lower single-hop anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "tcp")]
    TcpLike,
    #[serde(rename = "udp")]
    UdpLike,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::TcpLike => write!(f, "tcp"),
            Protocol::UdpLike => write!(f, "udp"),
        }
    }
}

/// Piecewise-linear curve over a scalar argument, clamped at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// `(x, multiplier)` points with strictly increasing x.
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, RadioError> {
        if points.is_empty()
            || points.windows(2).any(|w| w[0].0 >= w[1].0)
            || points.iter().any(|&(_, y)| !(0.0..=1.0).contains(&y))
        {
            return Err(RadioError::InvalidCurve);
        }
        Ok(Curve { points })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        if x >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        unreachable!("x bounded by clamp checks")
    }

    pub fn is_monotone_non_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].1 <= w[1].1)
    }
}

/// Calibrated single-hop saturation baselines, Mbps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseRates {
    pub udp_b5: f64,
    pub udp_b24: f64,
    pub tcp_b5: f64,
    pub tcp_b24: f64,
}

impl Default for BaseRates {
    fn default() -> Self {
        BaseRates {
            udp_b5: 9.93,
            udp_b24: 7.37,
            tcp_b5: 8.82,
            tcp_b24: 6.35,
        }
    }
}

impl BaseRates {
    pub fn get(&self, band: Band, protocol: Protocol) -> f64 {
        match (band, protocol) {
            (Band::B5, Protocol::UdpLike) => self.udp_b5,
            (Band::B24, Protocol::UdpLike) => self.udp_b24,
            (Band::B5, Protocol::TcpLike) => self.tcp_b5,
            (Band::B24, Protocol::TcpLike) => self.tcp_b24,
        }
    }
}

/// All tunables of the capacity model. Defaults reproduce the
/// calibrated reference configuration; scenario files may override any
/// field, including curve points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    /// Header length above the MAC, bits.
    pub alpha_header_bits: u64,
    /// Datagram length, bits.
    pub beta_payload_bits: u64,
    pub t_difs_us: f64,
    pub t_sifs_us: f64,
    /// Aggregate backoff budget charged to one SDU.
    pub t_bo_us: f64,
    pub t_rts_us: f64,
    pub t_cts_us: f64,
    /// Aggregate acknowledgement time charged to one SDU.
    pub t_ack_us: f64,
    /// On-air time of the SDU itself.
    pub t_data_us: f64,
    /// Rate used for acknowledgement frames, Mbps.
    pub ack_rate_mbps: f64,
    /// When true the SDU delay budget also charges the CTS slot. The
    /// reference delay formula omits it; both variants are supported.
    pub include_t_cts: bool,
    pub orthogonality_threshold_mhz_b24: u32,
    pub orthogonality_threshold_mhz_b5: u32,
    /// Throughput multiplier vs. channel separation (MHz), per band,
    /// applied between orthogonality 0 and the band threshold. The 2.4
    /// GHz curve deliberately dips below the 1/2 co-channel share at
    /// small separations: overlapping-but-unequal channels defeat
    /// carrier sensing, which costs more than honest medium sharing.
    pub adjacent_degradation_b24: Curve,
    pub adjacent_degradation_b5: Curve,
    /// Throughput multiplier vs. antenna distance (cm) at a relay whose
    /// ingress and egress use different data interfaces.
    pub coupling_curve: Curve,
    /// Extra per-packet latency charged when the full protocol stack
    /// (negotiation + bond selector) is active. Latency only; never
    /// throughput.
    pub per_packet_overhead_ms: f64,
    /// Forwarding latency per hop, ms.
    pub per_hop_latency_ms: f64,
    pub base_rates: BaseRates,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            alpha_header_bits: 320,
            beta_payload_bits: 11_680,
            t_difs_us: 50.0,
            t_sifs_us: 10.0,
            t_bo_us: 1310.0,
            t_rts_us: 352.0,
            t_cts_us: 304.0,
            t_ack_us: 940.0,
            t_data_us: 6150.0,
            ack_rate_mbps: 1.0,
            include_t_cts: false,
            orthogonality_threshold_mhz_b24: Band::B24.default_orthogonality_threshold_mhz(),
            orthogonality_threshold_mhz_b5: Band::B5.default_orthogonality_threshold_mhz(),
            adjacent_degradation_b24: Curve::new(vec![
                (5.0, 0.50),
                (10.0, 0.48),
                (15.0, 0.49),
                (20.0, 0.73),
                (25.0, 0.97),
                (30.0, 1.0),
            ])
            .expect("static curve"),
            adjacent_degradation_b5: Curve::new(vec![
                (20.0, 0.5092),
                (40.0, 0.6752),
                (60.0, 0.6988),
                (80.0, 0.8371),
                (100.0, 0.9683),
                (120.0, 1.0),
            ])
            .expect("static curve"),
            coupling_curve: Curve::new(vec![
                (0.0, 0.41),
                (5.0, 0.52),
                (10.0, 0.59),
                (15.0, 0.61),
                (20.0, 0.82),
                (25.0, 0.95),
                (30.0, 1.0),
            ])
            .expect("static curve"),
            per_packet_overhead_ms: 1.0,
            per_hop_latency_ms: 0.9,
            base_rates: BaseRates::default(),
        }
    }
}

impl RadioParams {
    pub fn orthogonality_threshold(&self, band: Band) -> u32 {
        match band {
            Band::B24 => self.orthogonality_threshold_mhz_b24,
            Band::B5 => self.orthogonality_threshold_mhz_b5,
        }
    }

    pub fn adjacent_degradation(&self, band: Band, separation_mhz: u32) -> f64 {
        match band {
            Band::B24 => self.adjacent_degradation_b24.eval(separation_mhz as f64),
            Band::B5 => self.adjacent_degradation_b5.eval(separation_mhz as f64),
        }
    }

    /// The coupling curve must be monotone (closer antennas never help);
    /// the degradation curves are calibration data and may dip.
    pub fn validate(&self) -> Result<(), RadioError> {
        if !self.coupling_curve.is_monotone_non_decreasing() {
            return Err(RadioError::InvalidCurve);
        }
        Ok(())
    }
}

/// Application-level ceiling from header efficiency: `beta/(alpha+beta)`
/// of the MAC-level ceiling.
pub fn tmt_app(tmt_mac_bps: f64, alpha_bits: u64, beta_bits: u64) -> Result<f64, RadioError> {
    if beta_bits == 0 {
        return Err(RadioError::ZeroBeta);
    }
    Ok(beta_bits as f64 / (alpha_bits + beta_bits) as f64 * tmt_mac_bps)
}

/// MAC-level ceiling: `msdu_size / delay_sdu`, with the delay budget
/// summed from the configured slot times (microseconds).
pub fn tmt_mac(params: &RadioParams, msdu_size_bits: u64) -> Result<f64, RadioError> {
    let mut delay_us = params.t_difs_us
        + params.t_sifs_us
        + params.t_bo_us
        + params.t_rts_us
        + params.t_ack_us
        + params.t_data_us;
    if params.include_t_cts {
        delay_us += params.t_cts_us;
    }
    if delay_us <= 0.0 {
        return Err(RadioError::ZeroDelay);
    }
    Ok(msdu_size_bits as f64 / (delay_us * 1e-6))
}

/// Relation between the two channels under the configured thresholds.
/// Channels of different bands never interfere.
pub fn classify_overlap(a: Channel, b: Channel, params: &RadioParams) -> OverlapClass {
    match channel_separation_mhz(a, b) {
        ChannelSeparation::Incomparable => OverlapClass::Orthogonal,
        ChannelSeparation::SameBand(0) => OverlapClass::CoChannel,
        ChannelSeparation::SameBand(sep) => {
            if sep >= params.orthogonality_threshold(a.band) {
                OverlapClass::Orthogonal
            } else {
                OverlapClass::AdjacentOverlap { separation_mhz: sep }
            }
        }
    }
}

/// Node-placement flavor for the per-node capacity bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GkMode {
    /// Random placement in three dimensions.
    Random3D,
    /// Random placement in the plane.
    Random2D,
    /// Chosen placement with attenuation `alpha > 2`.
    Arbitrary { alpha: f64 },
}

/// Per-node throughput upper bound for an n-node network of aggregate
/// rate `w_bps`. Shape oracle only: the Theta constants are taken as 1
/// and the logarithm is natural.
pub fn gupta_kumar_bound(n_nodes: u64, w_bps: f64, mode: GkMode) -> Result<f64, RadioError> {
    if n_nodes < 2 {
        return Err(RadioError::TooFewNodes);
    }
    let n = n_nodes as f64;
    Ok(match mode {
        GkMode::Random3D => w_bps / (n * n.ln()).sqrt(),
        GkMode::Random2D => w_bps / n.sqrt(),
        GkMode::Arbitrary { alpha } => {
            if alpha <= 2.0 {
                return Err(RadioError::AttenuationOutOfRange);
            }
            w_bps / (alpha * n.sqrt())
        }
    })
}

/// Maximal group of co-channel links within mutual carrier-sense range;
/// its members share the channel capacity equally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentionSet {
    pub channel: Channel,
    pub links: Vec<Link>,
}

/// Partitions the assigned links into contention sets: two links land
/// in the same set when they share a channel and their endpoints are
/// within carrier-sense range (transitively).
pub fn contention_sets(
    topo: &Topology,
    assignment: &BTreeMap<Link, Channel>,
) -> Vec<ContentionSet> {
    let links: Vec<(&Link, &Channel)> = assignment.iter().collect();
    let mut set_of: Vec<Option<usize>> = vec![None; links.len()];
    let mut sets: Vec<ContentionSet> = Vec::new();
    for i in 0..links.len() {
        if set_of[i].is_some() {
            continue;
        }
        let id = sets.len();
        sets.push(ContentionSet {
            channel: *links[i].1,
            links: Vec::new(),
        });
        let mut stack = vec![i];
        set_of[i] = Some(id);
        while let Some(k) = stack.pop() {
            sets[id].links.push(*links[k].0);
            for j in 0..links.len() {
                if set_of[j].is_none()
                    && links[j].1 == links[k].1
                    && topo.links_in_range(*links[j].0, *links[k].0)
                {
                    set_of[j] = Some(id);
                    stack.push(j);
                }
            }
        }
        sets[id].links.sort();
    }
    sets
}

/// Saturation throughput (Mbps) of a single flow following `path`, all
/// other links idle.
pub fn path_throughput(
    topo: &Topology,
    assignment: &BTreeMap<Link, Channel>,
    path: &[NodeId],
    params: &RadioParams,
    protocol: Protocol,
) -> Result<f64, RadioError> {
    let active: BTreeSet<Link> = path_links(topo, path)?.into_iter().collect();
    path_throughput_among(topo, assignment, path, &active, params, protocol)
}

/// As [`path_throughput`], but contention and adjacent-channel
/// interference are evaluated against an explicit set of concurrently
/// active links (a superset of the path's own links).
pub fn path_throughput_among(
    topo: &Topology,
    assignment: &BTreeMap<Link, Channel>,
    path: &[NodeId],
    active: &BTreeSet<Link>,
    params: &RadioParams,
    protocol: Protocol,
) -> Result<f64, RadioError> {
    let links = path_links(topo, path)?;
    let mut active_assignment = BTreeMap::new();
    for link in active {
        let ch = assignment
            .get(link)
            .ok_or(RadioError::UnassignedLink(*link))?;
        active_assignment.insert(*link, *ch);
    }
    for link in &links {
        if !active_assignment.contains_key(link) {
            return Err(RadioError::UnassignedLink(*link));
        }
    }

    let sets = contention_sets(topo, &active_assignment);
    let set_size = |link: &Link| -> usize {
        sets.iter()
            .find(|s| s.links.contains(link))
            .map(|s| s.links.len())
            .unwrap_or(1)
    };

    let mut rate: f64 = f64::INFINITY;
    for (i, link) in links.iter().enumerate() {
        let channel = active_assignment[link];
        let mut factor = 1.0 / set_size(link) as f64;

        // Worst adjacent-overlap interferer among the other active links.
        let mut adjacent = 1.0f64;
        for (other, other_ch) in &active_assignment {
            if other == link || !topo.links_in_range(*link, *other) {
                continue;
            }
            if let OverlapClass::AdjacentOverlap { separation_mhz } =
                classify_overlap(channel, *other_ch, params)
            {
                adjacent = adjacent.min(params.adjacent_degradation(channel.band, separation_mhz));
            }
        }
        factor *= adjacent;

        // Coupling penalty on the egress link of a relay that switches
        // data interfaces between ingress and egress channels.
        if i > 0 {
            let relay = path[i];
            let ingress_ch = active_assignment[&links[i - 1]];
            if ingress_ch != channel {
                if let Some(node) = topo.node(relay) {
                    if let (Some(a), Some(b)) =
                        (node.data_iface_on(ingress_ch), node.data_iface_on(channel))
                    {
                        let distance = (a.antenna_position_cm - b.antenna_position_cm).abs();
                        factor *= params.coupling_curve.eval(distance);
                    }
                }
            }
        }

        rate = rate.min(params.base_rates.get(channel.band, protocol) * factor);
    }
    Ok(rate)
}

fn path_links(topo: &Topology, path: &[NodeId]) -> Result<Vec<Link>, RadioError> {
    if path.len() < 2 {
        return Err(RadioError::DisconnectedPath);
    }
    let mut links = Vec::with_capacity(path.len() - 1);
    for w in path.windows(2) {
        if !topo.is_adjacent(w[0], w[1]) {
            return Err(RadioError::DisconnectedPath);
        }
        links.push(Link::new(w[0], w[1]));
    }
    Ok(links)
}
