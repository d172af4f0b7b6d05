//! Per-link channel negotiation.
//!
//! Each node runs a client and a server role per neighbor. A round per
//! link: the client scans, ships its interference list to the peer's
//! server, the server scans too, merges both lists pessimistically,
//! picks the quietest allowed channel and returns it; the client then
//! applies a switch threshold and publishes the outcome to the bond
//! selector. Rounds repeat on a fixed period so external interference
//! keeps getting re-evaluated. In the simulator both roles collapse
//! into one deterministic rendezvous executed at the round instant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;
use crate::topo::{Band, IpAddr, Link, MacAddr, NodeId, Topology};

/// Scan floor: channels with no audible interferer report this level.
pub const FLOOR_DBM: f64 = -100.0;

#[derive(Debug, Error, PartialEq)]
pub enum NegotiationError {
    #[error("quality lists cover different bands")]
    BandMismatch,
    #[error("allowed channel set is empty")]
    NoAllowedChannels,
    #[error("channel {0} not in the band channel list")]
    UnknownChannel(u8),
    #[error("level {0} outside [{FLOOR_DBM}, 0]")]
    LevelRange(f64),
    #[error("refresh weight {0} outside [0, 1]")]
    WeightRange(f64),
}

/// Interference level per channel of one band, dBm. Higher means a
/// stronger interferer, i.e. a worse channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityList {
    pub band: Band,
    /// One level per channel of the band list, in list order.
    pub levels: Vec<f64>,
}

impl QualityList {
    /// All channels at the scan floor.
    pub fn floor(band: Band) -> Self {
        QualityList {
            band,
            levels: vec![FLOOR_DBM; band.channel_indices().len()],
        }
    }

    pub fn level(&self, channel: u8) -> Result<f64, NegotiationError> {
        let pos = self
            .band
            .channel_position(channel)
            .ok_or(NegotiationError::UnknownChannel(channel))?;
        Ok(self.levels[pos])
    }

    /// Registers an audible source on `channel`; the strongest one
    /// observed so far wins.
    pub fn observe(&mut self, channel: u8, dbm: f64) -> Result<(), NegotiationError> {
        if !(FLOOR_DBM..=0.0).contains(&dbm) {
            return Err(NegotiationError::LevelRange(dbm));
        }
        let pos = self
            .band
            .channel_position(channel)
            .ok_or(NegotiationError::UnknownChannel(channel))?;
        self.levels[pos] = self.levels[pos].max(dbm);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), NegotiationError> {
        for &l in &self.levels {
            if !(FLOOR_DBM..=0.0).contains(&l) {
                return Err(NegotiationError::LevelRange(l));
            }
        }
        Ok(())
    }
}

/// The record handed to the bond selector after each round. A channel
/// of 0 means "no decision yet" and is a no-op downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegotiationPacket {
    pub neighbor_addr: IpAddr,
    pub neighbor_mac: MacAddr,
    /// Negotiated channel for the link toward `neighbor_addr`; 0 when
    /// the round failed.
    pub channel: u8,
    /// Channel the link was on when the round started.
    pub current_channel: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NegotiationParams {
    /// Channels tuned on the local data interfaces; decisions are
    /// restricted to this set.
    pub allowed_channels: Vec<u8>,
    pub band: Band,
    /// The interference score of a channel is the window maximum over
    /// this many positions on each side.
    pub window_halfwidth: usize,
    /// Candidate stride over the allowed list (1 visits every one).
    pub stride: usize,
    /// Minimum improvement, dB, before a switch is worth it.
    pub switch_threshold_dbm: f64,
    /// Blend weight of fresh scans against remembered ones; 0 disables
    /// the memory (log-domain averaging is deliberately left off).
    pub refresh_weight: f64,
    pub round_period_s: f64,
    /// Offset of the first round into the run.
    pub first_round_s: f64,
}

impl Default for NegotiationParams {
    fn default() -> Self {
        NegotiationParams {
            allowed_channels: vec![1, 11],
            band: Band::B24,
            window_halfwidth: 4,
            stride: 1,
            switch_threshold_dbm: 3.0,
            refresh_weight: 0.0,
            round_period_s: 10.0,
            first_round_s: 1.0,
        }
    }
}

/// Deterministic scan contract: what interference a node hears at an
/// instant. Own-network signaling traffic is invisible to scans by
/// contract; only external sources show up.
pub trait ScanProvider {
    fn scan(&self, node: NodeId, band: Band, now: SimTime) -> QualityList;
}

/// Deterministic first assignment: links in ascending `(min, max)`
/// order each take the allowed channel least used among the already
/// assigned links sharing a node, lowest channel on ties. On a chain
/// this alternates strictly.
pub fn initial_assignment(
    topo: &Topology,
    params: &NegotiationParams,
) -> Result<BTreeMap<Link, u8>, NegotiationError> {
    if params.allowed_channels.is_empty() {
        return Err(NegotiationError::NoAllowedChannels);
    }
    let mut assignment: BTreeMap<Link, u8> = BTreeMap::new();
    for &link in &topo.adjacency {
        let mut usage: BTreeMap<u8, usize> =
            params.allowed_channels.iter().map(|&c| (c, 0)).collect();
        for (&other, &ch) in &assignment {
            if other.touches(link.0) || other.touches(link.1) {
                if let Some(count) = usage.get_mut(&ch) {
                    *count += 1;
                }
            }
        }
        let (&best, _) = usage
            .iter()
            .min_by(|(ca, ua), (cb, ub)| ua.cmp(ub).then(ca.cmp(cb)))
            .expect("non-empty allowed set");
        assignment.insert(link, best);
    }
    Ok(assignment)
}

/// Pessimistic union of two scans: per channel the stronger (worse)
/// interferer wins, so a channel is only as good as its worst end.
pub fn merge_quality(a: &QualityList, b: &QualityList) -> Result<QualityList, NegotiationError> {
    if a.band != b.band || a.levels.len() != b.levels.len() {
        return Err(NegotiationError::BandMismatch);
    }
    Ok(QualityList {
        band: a.band,
        levels: a
            .levels
            .iter()
            .zip(&b.levels)
            .map(|(&x, &y)| x.max(y))
            .collect(),
    })
}

/// Interference score of a channel: the maximum level over the window
/// of neighboring list positions, clamped at the band edges. Channels
/// up to `halfwidth` positions away count because they are generally
/// not orthogonal.
pub fn window_score(q: &QualityList, channel: u8, halfwidth: usize) -> Result<f64, NegotiationError> {
    let pos = q
        .band
        .channel_position(channel)
        .ok_or(NegotiationError::UnknownChannel(channel))?;
    let lo = pos.saturating_sub(halfwidth);
    let hi = (pos + halfwidth).min(q.levels.len() - 1);
    Ok(q.levels[lo..=hi]
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &l| acc.max(l)))
}

/// Picks the allowed channel with the smallest windowed interference
/// score; earlier candidates win ties.
pub fn select_channel(q: &QualityList, params: &NegotiationParams) -> Result<u8, NegotiationError> {
    if params.allowed_channels.is_empty() {
        return Err(NegotiationError::NoAllowedChannels);
    }
    let stride = params.stride.max(1);
    let mut best: Option<(f64, u8)> = None;
    for &candidate in params.allowed_channels.iter().step_by(stride) {
        let score = window_score(q, candidate, params.window_halfwidth)?;
        match best {
            Some((best_score, _)) if best_score <= score => {}
            _ => best = Some((score, candidate)),
        }
    }
    Ok(best.expect("at least one candidate").1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchDecision {
    Keep,
    Switch,
}

/// A switch happens only for a different channel whose score improves
/// on the current one by at least the threshold. Equal-quality
/// channels never flap.
pub fn decide_switch(
    current_channel: u8,
    proposed_channel: u8,
    q_current_dbm: f64,
    q_proposed_dbm: f64,
    params: &NegotiationParams,
) -> SwitchDecision {
    if proposed_channel != current_channel
        && (q_current_dbm - q_proposed_dbm) >= params.switch_threshold_dbm
    {
        SwitchDecision::Switch
    } else {
        SwitchDecision::Keep
    }
}

/// Elementwise blend of a fresh scan against the remembered one,
/// straight in the dBm domain: `new*w + old*(1-w)`.
pub fn ponderate_quality(
    q_new: &QualityList,
    q_old: &QualityList,
    refresh_weight: f64,
) -> Result<QualityList, NegotiationError> {
    if !(0.0..=1.0).contains(&refresh_weight) {
        return Err(NegotiationError::WeightRange(refresh_weight));
    }
    if q_new.band != q_old.band || q_new.levels.len() != q_old.levels.len() {
        return Err(NegotiationError::BandMismatch);
    }
    Ok(QualityList {
        band: q_new.band,
        levels: q_new
            .levels
            .iter()
            .zip(&q_old.levels)
            .map(|(&n, &o)| n * refresh_weight + o * (1.0 - refresh_weight))
            .collect(),
    })
}

/// Negotiation state of one node: per-peer link channel and exchanged
/// MACs, plus the memory used by the optional refresh blend.
#[derive(Debug, Clone, Default)]
pub struct Negotiator {
    /// Current channel per neighbor link, as this node sees it.
    pub link_channel: BTreeMap<IpAddr, u8>,
    /// Peer data MAC per neighbor, filled by the exchange step.
    pub peer_mac: BTreeMap<IpAddr, MacAddr>,
    /// Remembered merged list per neighbor for the refresh blend.
    remembered: BTreeMap<IpAddr, QualityList>,
    pub rounds_completed: u64,
    pub timeouts: u64,
}

/// Outcome of one per-link round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub packet: NegotiationPacket,
    pub decision: SwitchDecision,
    pub merged_score_current: f64,
    pub merged_score_proposed: f64,
}

/// Mutual MAC exchange between the two ends of one link: afterwards
/// each side's packet can carry the peer's data-interface MAC. The
/// bonded identity is the first data interface's address.
pub fn exchange_macs(
    a: &mut Negotiator,
    node_a: NodeId,
    b: &mut Negotiator,
    node_b: NodeId,
    topo: &Topology,
) {
    let mac_of = |n: NodeId| {
        topo.node(n)
            .and_then(|node| node.data_interfaces().next())
            .map(|i| i.mac_address)
    };
    if let Some(mac) = mac_of(node_b) {
        a.peer_mac.insert(IpAddr::for_bond(node_b), mac);
    }
    if let Some(mac) = mac_of(node_a) {
        b.peer_mac.insert(IpAddr::for_bond(node_a), mac);
    }
}

impl Negotiator {
    /// Installs the initial channel map (first execution only).
    pub fn seed(&mut self, node: NodeId, assignment: &BTreeMap<Link, u8>) {
        for (&link, &ch) in assignment {
            if link.touches(node) {
                let peer = link.other(node);
                self.link_channel.insert(IpAddr::for_bond(peer), ch);
            }
        }
    }

    /// Runs the scan/merge/select/decide pipeline for one link. Both
    /// endpoints compute the same merged list, so the outcome matches
    /// on both sides without extra traffic.
    pub fn run_link_round(
        &mut self,
        node: NodeId,
        peer: NodeId,
        reachable: bool,
        provider: &dyn ScanProvider,
        params: &NegotiationParams,
        now: SimTime,
    ) -> Result<RoundOutcome, NegotiationError> {
        let peer_addr = IpAddr::for_bond(peer);
        let mac = self
            .peer_mac
            .get(&peer_addr)
            .copied()
            .unwrap_or(MacAddr(0));
        let current = self.link_channel.get(&peer_addr).copied().unwrap_or(0);
        if !reachable {
            // Peer silent: the round aborts and retries next period.
            self.timeouts += 1;
            return Ok(RoundOutcome {
                packet: NegotiationPacket {
                    neighbor_addr: peer_addr,
                    neighbor_mac: mac,
                    channel: 0,
                    current_channel: current,
                },
                decision: SwitchDecision::Keep,
                merged_score_current: FLOOR_DBM,
                merged_score_proposed: FLOOR_DBM,
            });
        }

        let q_client = provider.scan(node, params.band, now);
        let q_server = provider.scan(peer, params.band, now);
        let mut merged = merge_quality(&q_client, &q_server)?;
        if params.refresh_weight > 0.0 {
            if let Some(old) = self.remembered.get(&peer_addr) {
                merged = ponderate_quality(&merged, old, params.refresh_weight)?;
            }
        }
        self.remembered.insert(peer_addr, merged.clone());

        let proposed = select_channel(&merged, params)?;
        let score_current = if current == 0 {
            0.0
        } else {
            window_score(&merged, current, params.window_halfwidth)?
        };
        let score_proposed = window_score(&merged, proposed, params.window_halfwidth)?;
        let decision = if current == 0 {
            SwitchDecision::Switch
        } else {
            decide_switch(current, proposed, score_current, score_proposed, params)
        };
        let chosen = match decision {
            SwitchDecision::Switch => proposed,
            SwitchDecision::Keep => current,
        };
        self.link_channel.insert(peer_addr, chosen);
        self.rounds_completed += 1;
        Ok(RoundOutcome {
            packet: NegotiationPacket {
                neighbor_addr: peer_addr,
                neighbor_mac: mac,
                channel: chosen,
                current_channel: current,
            },
            decision,
            merged_score_current: score_current,
            merged_score_proposed: score_proposed,
        })
    }
}
