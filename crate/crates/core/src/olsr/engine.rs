//! Per-node link-state engine: link sensing, neighbor and two-hop
//! tracking, MPR selection, topology flooding and route calculation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::metrics::Metric;
use crate::olsr::message::{
    link_code, parse_link_code, HelloEntry, HelloPayload, HnaPayload, MessageBody, MidPayload,
    OlsrMessage, TcAdvertisement, TcPayload, LINK_ASYM, LINK_LOST, LINK_SYM, NEIGH_MPR, NEIGH_NOT,
    NEIGH_SYM,
};
use crate::olsr::{OlsrConfig, RouteEntry, RouteKind, RouteTable};
use crate::sim::SimTime;
use crate::topo::{IfaceId, IpAddr, Node};

/// Sliding window over the last `capacity` hello outcomes of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWindow {
    outcomes: VecDeque<bool>,
    capacity: usize,
}

impl LossWindow {
    fn new(capacity: usize) -> Self {
        LossWindow {
            outcomes: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    fn push(&mut self, received: bool) {
        if self.outcomes.len() == self.capacity {
            self.outcomes.pop_front();
        }
        self.outcomes.push_back(received);
    }

    /// Fraction of hellos received; 1.0 before any sample exists.
    pub fn fraction(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 1.0;
        }
        self.outcomes.iter().filter(|&&r| r).count() as f64 / self.outcomes.len() as f64
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Sensing record for one directed link (our signaling interface to a
/// neighbor interface).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTuple {
    pub local_iface: IpAddr,
    pub neighbor_iface: IpAddr,
    pub sym_until: SimTime,
    pub asym_until: SimTime,
    pub expires: SimTime,
    /// Hysteresis link quality in [0, 1].
    pub quality: f64,
    /// While pending the link is sensed but not yet usable.
    pub pending: bool,
    pub loss_window: LossWindow,
    /// Arrival time and advertised interval of the last hello, used to
    /// infer missed hellos without a dedicated sequence stream.
    last_hello: Option<(SimTime, f64)>,
    /// Our delivery fraction as last reported back by the neighbor.
    pub reported_lq: f64,
}

impl LinkTuple {
    fn new(local: IpAddr, neighbor: IpAddr, win: usize, pending: bool) -> Self {
        LinkTuple {
            local_iface: local,
            neighbor_iface: neighbor,
            sym_until: SimTime::ZERO,
            asym_until: SimTime::ZERO,
            expires: SimTime::ZERO,
            quality: 0.0,
            pending,
            loss_window: LossWindow::new(win),
            last_hello: None,
            reported_lq: 1.0,
        }
    }

    pub fn is_sym(&self, now: SimTime, use_hysteresis: bool) -> bool {
        self.sym_until > now && (!use_hysteresis || !self.pending)
    }

    fn is_asym(&self, now: SimTime) -> bool {
        self.asym_until > now
    }

    /// Link ETX from the local receive fraction and the fraction the
    /// neighbor reports back; infinite when either direction is dead.
    pub fn etx(&self) -> Metric {
        let product = self.loss_window.fraction() * self.reported_lq;
        if product <= 0.0 {
            Metric::INFINITE
        } else {
            Metric::finite(1.0 / product)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborStatus {
    Asym,
    Sym,
}

#[derive(Debug, Clone, PartialEq)]
struct NeighborTuple {
    status: NeighborStatus,
    willingness: u8,
}

#[derive(Debug, Clone, PartialEq)]
struct TopologyTuple {
    ansn: u32,
    expires: SimTime,
    etx: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct TwoHopTuple {
    expires: SimTime,
    /// ETX estimate of the neighbor-to-target link, from the quality
    /// the neighbor advertised for it.
    etx: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct DuplicateTuple {
    forwarded: bool,
    expires: SimTime,
}

/// Hello outcome fed to the hysteresis update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HysteresisEvent {
    Received,
    Lost,
}

/// Stability/instability rules: receptions pull the quality toward 1,
/// losses toward 0; threshold crossings flip the pending flag.
pub fn hysteresis_update(
    link: &mut LinkTuple,
    event: HysteresisEvent,
    scaling: f64,
    thr_high: f64,
    thr_low: f64,
) {
    match event {
        HysteresisEvent::Received => link.quality = (1.0 - scaling) * link.quality + scaling,
        HysteresisEvent::Lost => link.quality *= 1.0 - scaling,
    }
    if link.quality > thr_high {
        link.pending = false;
    } else if link.quality < thr_low {
        link.pending = true;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineDiagnostics {
    pub malformed_dropped: u64,
    pub stale_ansn_dropped: u64,
    pub duplicates_suppressed: u64,
    pub uncoverable_two_hop: u64,
    pub non_neighbor_tc_dropped: u64,
}

/// The routing state machine of one node. Driven exclusively by
/// [`Engine::handle_message`] and the emit methods; owns no timers.
#[derive(Debug, Clone)]
pub struct Engine {
    main_addr: IpAddr,
    signaling_iface: IfaceId,
    config: OlsrConfig,
    msg_seq: u32,
    ansn: u32,
    last_advertised: BTreeSet<IpAddr>,
    links: BTreeMap<IpAddr, LinkTuple>,
    neighbors: BTreeMap<IpAddr, NeighborTuple>,
    two_hop: BTreeMap<(IpAddr, IpAddr), TwoHopTuple>,
    mprs: BTreeSet<IpAddr>,
    mpr_selectors: BTreeMap<IpAddr, SimTime>,
    topology: BTreeMap<(IpAddr, IpAddr), TopologyTuple>,
    topology_ansn: BTreeMap<IpAddr, u32>,
    duplicates: BTreeMap<(IpAddr, u32), DuplicateTuple>,
    /// interface address -> (main address, expiry), learned from MID.
    iface_assoc: BTreeMap<IpAddr, (IpAddr, SimTime)>,
    /// (network, prefix) -> (gateway main address, expiry), from HNA.
    hna_networks: BTreeMap<(IpAddr, u8), (IpAddr, SimTime)>,
    routes: RouteTable,
    routes_dirty: bool,
    pub diagnostics: EngineDiagnostics,
}

impl Engine {
    pub fn new(node: &Node, config: OlsrConfig) -> Self {
        let signaling = node.signaling();
        Engine {
            main_addr: signaling.ip_address,
            signaling_iface: signaling.id,
            config,
            msg_seq: 0,
            ansn: 0,
            last_advertised: BTreeSet::new(),
            links: BTreeMap::new(),
            neighbors: BTreeMap::new(),
            two_hop: BTreeMap::new(),
            mprs: BTreeSet::new(),
            mpr_selectors: BTreeMap::new(),
            topology: BTreeMap::new(),
            topology_ansn: BTreeMap::new(),
            duplicates: BTreeMap::new(),
            iface_assoc: BTreeMap::new(),
            hna_networks: BTreeMap::new(),
            routes: RouteTable::new(),
            routes_dirty: true,
            diagnostics: EngineDiagnostics::default(),
        }
    }

    pub fn main_address(&self) -> IpAddr {
        self.main_addr
    }

    pub fn config(&self) -> &OlsrConfig {
        &self.config
    }

    pub fn neighbor_status(&self, main: IpAddr) -> Option<NeighborStatus> {
        self.neighbors.get(&main).map(|n| n.status)
    }

    pub fn is_sym_neighbor(&self, main: IpAddr) -> bool {
        self.neighbor_status(main) == Some(NeighborStatus::Sym)
    }

    pub fn mpr_set(&self) -> &BTreeSet<IpAddr> {
        &self.mprs
    }

    pub fn mpr_selector_set(&self) -> BTreeSet<IpAddr> {
        self.mpr_selectors.keys().copied().collect()
    }

    pub fn two_hop_targets(&self) -> BTreeSet<IpAddr> {
        self.two_hop.keys().map(|&(_, t)| t).collect()
    }

    /// Symmetric neighbors that cover a given two-hop target.
    pub fn covers_of(&self, target: IpAddr) -> BTreeSet<IpAddr> {
        self.two_hop
            .keys()
            .filter(|&&(_, t)| t == target)
            .map(|&(n, _)| n)
            .collect()
    }

    pub fn link(&self, neighbor_iface: IpAddr) -> Option<&LinkTuple> {
        self.links.get(&neighbor_iface)
    }

    pub fn link_mut(&mut self, neighbor_iface: IpAddr) -> Option<&mut LinkTuple> {
        self.routes_dirty = true;
        self.links.get_mut(&neighbor_iface)
    }

    fn next_seq(&mut self) -> u32 {
        self.msg_seq += 1;
        self.msg_seq
    }

    fn sym_neighbors(&self, now: SimTime) -> BTreeSet<IpAddr> {
        let _ = now;
        self.neighbors
            .iter()
            .filter(|(_, n)| n.status == NeighborStatus::Sym)
            .map(|(&a, _)| a)
            .collect()
    }

    /// Drops every expired record; neighbor status follows the links.
    pub fn expire(&mut self, now: SimTime) {
        let use_hyst = self.config.use_hysteresis;
        let before_links = self.links.len();
        self.links.retain(|_, l| l.expires > now);
        // Neighbor status re-derived from surviving links.
        let mut changed = before_links != self.links.len();
        let links = &self.links;
        let mut statuses: BTreeMap<IpAddr, NeighborStatus> = BTreeMap::new();
        for l in links.values() {
            let status = if l.is_sym(now, use_hyst) {
                NeighborStatus::Sym
            } else {
                NeighborStatus::Asym
            };
            statuses
                .entry(l.neighbor_iface)
                .and_modify(|s| {
                    if status == NeighborStatus::Sym {
                        *s = NeighborStatus::Sym;
                    }
                })
                .or_insert(status);
        }
        let willingness: BTreeMap<IpAddr, u8> = self
            .neighbors
            .iter()
            .map(|(&a, n)| (a, n.willingness))
            .collect();
        let rebuilt: BTreeMap<IpAddr, NeighborTuple> = statuses
            .into_iter()
            .map(|(a, status)| {
                (
                    a,
                    NeighborTuple {
                        status,
                        willingness: willingness.get(&a).copied().unwrap_or(3),
                    },
                )
            })
            .collect();
        if rebuilt != self.neighbors {
            self.neighbors = rebuilt;
            changed = true;
        }

        let th = self.two_hop.len();
        self.two_hop.retain(|_, t| t.expires > now);
        changed |= th != self.two_hop.len();

        let tp = self.topology.len();
        self.topology.retain(|_, t| t.expires > now);
        changed |= tp != self.topology.len();

        self.mpr_selectors.retain(|_, &mut exp| exp > now);
        self.duplicates.retain(|_, d| d.expires > now);
        self.iface_assoc.retain(|_, &mut (_, exp)| exp > now);
        let hn = self.hna_networks.len();
        self.hna_networks.retain(|_, &mut (_, exp)| exp > now);
        changed |= hn != self.hna_networks.len();

        if changed {
            self.recompute_mprs(now);
            self.routes_dirty = true;
        }
    }

    /// Periodic hello advertising every sensed link under its current
    /// code; relays we selected are flagged so they learn about it.
    pub fn emit_hello(&mut self, now: SimTime) -> OlsrMessage {
        self.expire(now);
        let use_hyst = self.config.use_hysteresis;
        let mut entries = Vec::new();
        for link in self.links.values() {
            let neighbor = link.neighbor_iface;
            let link_status = if link.is_sym(now, use_hyst) {
                LINK_SYM
            } else if link.is_asym(now) {
                LINK_ASYM
            } else {
                LINK_LOST
            };
            let neighbor_status = if self.mprs.contains(&neighbor) {
                NEIGH_MPR
            } else if self.is_sym_neighbor(neighbor) {
                NEIGH_SYM
            } else {
                NEIGH_NOT
            };
            entries.push(HelloEntry {
                link_code: link_code(link_status, neighbor_status),
                neighbor,
                link_quality: link.loss_window.fraction(),
            });
        }
        OlsrMessage {
            body: MessageBody::Hello(HelloPayload {
                htime_s: self.config.hello_interval_s,
                willingness: self.config.willingness,
                entries,
            }),
            vtime_s: self.config.hello_validity_s,
            originator: self.main_addr,
            ttl: 1,
            hop_count: 0,
            msg_seq: self.next_seq(),
        }
    }

    /// Topology control emission; `None` while no neighbor selected us
    /// as relay (nothing to flood on anyone's behalf).
    pub fn emit_tc(&mut self, now: SimTime) -> Option<OlsrMessage> {
        self.expire(now);
        if self.mpr_selectors.is_empty() {
            return None;
        }
        let advertised_set: BTreeSet<IpAddr> = match self.config.tc_redundancy {
            0 => self.mpr_selector_set(),
            1 => self
                .mpr_selector_set()
                .union(&self.mprs)
                .copied()
                .collect::<BTreeSet<_>>()
                .intersection(&self.sym_neighbors(now))
                .copied()
                .collect(),
            _ => self.sym_neighbors(now),
        };
        if advertised_set != self.last_advertised {
            self.ansn += 1;
            self.last_advertised = advertised_set.clone();
        }
        let advertised = advertised_set
            .into_iter()
            .map(|neighbor| {
                let etx = self
                    .links
                    .get(&neighbor)
                    .map(|l| l.etx().as_f64())
                    .unwrap_or(1.0);
                TcAdvertisement { neighbor, etx }
            })
            .collect();
        Some(OlsrMessage {
            body: MessageBody::Tc(TcPayload {
                ansn: self.ansn,
                advertised,
            }),
            vtime_s: self.config.tc_validity_s,
            originator: self.main_addr,
            ttl: 255,
            hop_count: 0,
            msg_seq: self.next_seq(),
        })
    }

    /// Multi-interface declaration; emitted only when explicitly
    /// enabled, since bonded nodes present a single data identity.
    pub fn emit_mid(&mut self, now: SimTime, extra_addresses: Vec<IpAddr>) -> Option<OlsrMessage> {
        self.expire(now);
        if !self.config.emit_mid || extra_addresses.is_empty() {
            return None;
        }
        Some(OlsrMessage {
            body: MessageBody::Mid(MidPayload {
                interface_addresses: extra_addresses,
            }),
            vtime_s: self.config.mid_validity_s,
            originator: self.main_addr,
            ttl: 255,
            hop_count: 0,
            msg_seq: self.next_seq(),
        })
    }

    pub fn emit_hna(&mut self, now: SimTime) -> Option<OlsrMessage> {
        self.expire(now);
        if self.config.local_hna.is_empty() {
            return None;
        }
        Some(OlsrMessage {
            body: MessageBody::Hna(HnaPayload {
                networks: self.config.local_hna.clone(),
            }),
            vtime_s: self.config.hna_validity_s,
            originator: self.main_addr,
            ttl: 255,
            hop_count: 0,
            msg_seq: self.next_seq(),
        })
    }

    /// Processes one received message and returns the retransmissions
    /// this node must put back on the signaling channel (flooding
    /// duty). `sender_iface` is the interface address of the one-hop
    /// sender, which differs from the originator on forwarded floods.
    pub fn handle_message(
        &mut self,
        msg: &OlsrMessage,
        sender_iface: IpAddr,
        now: SimTime,
    ) -> Vec<OlsrMessage> {
        self.expire(now);
        if msg.originator == self.main_addr {
            return Vec::new();
        }
        match &msg.body {
            MessageBody::Hello(h) => {
                self.process_hello(msg, h, now);
                Vec::new()
            }
            _ => {
                let dup_key = (msg.originator, msg.msg_seq);
                let already_processed = self.duplicates.contains_key(&dup_key);
                if !already_processed {
                    match &msg.body {
                        MessageBody::Tc(tc) => self.process_tc(msg, tc, sender_iface, now),
                        MessageBody::Mid(mid) => self.process_mid(msg, mid, now),
                        MessageBody::Hna(hna) => self.process_hna(msg, hna, now),
                        MessageBody::Hello(_) => unreachable!(),
                    }
                } else {
                    self.diagnostics.duplicates_suppressed += 1;
                }
                let entry = self
                    .duplicates
                    .entry(dup_key)
                    .or_insert_with(|| DuplicateTuple {
                        forwarded: false,
                        expires: now.saturating_add_secs(30.0),
                    });
                let mut forwards = Vec::new();
                // Default forwarding: retransmit once, only when the
                // sender picked us as its relay.
                if !entry.forwarded && msg.ttl > 1 && self.mpr_selectors.contains_key(&sender_iface)
                {
                    entry.forwarded = true;
                    let mut fwd = msg.clone();
                    fwd.ttl -= 1;
                    fwd.hop_count += 1;
                    forwards.push(fwd);
                }
                forwards
            }
        }
    }

    fn process_hello(&mut self, msg: &OlsrMessage, hello: &HelloPayload, now: SimTime) {
        // Reject the whole message when any block is malformed.
        if hello
            .entries
            .iter()
            .any(|e| parse_link_code(e.link_code).is_none())
        {
            self.diagnostics.malformed_dropped += 1;
            return;
        }
        let sender = msg.originator;
        let win = self.config.link_quality_win_size;
        let use_hyst = self.config.use_hysteresis;
        let (scaling, thr_high, thr_low) = (
            self.config.hyst_scaling,
            self.config.hyst_thr_high,
            self.config.hyst_thr_low,
        );
        let local = self.main_addr;
        let link = self
            .links
            .entry(sender)
            .or_insert_with(|| LinkTuple::new(local, sender, win, use_hyst));

        // Hearing the sender keeps the asymmetric side alive.
        link.asym_until = now.saturating_add_secs(msg.vtime_s);
        link.expires = now.saturating_add_secs(msg.vtime_s);

        // Loss accounting: the advertised emission interval tells how
        // many hellos should have arrived since the previous one.
        if let Some((prev, htime)) = link.last_hello {
            if htime > 0.0 {
                let elapsed = (now - prev).as_secs_f64();
                let missed = ((elapsed / htime).round() as u64).saturating_sub(1);
                for _ in 0..missed.min(win as u64) {
                    link.loss_window.push(false);
                    if use_hyst {
                        hysteresis_update(link, HysteresisEvent::Lost, scaling, thr_high, thr_low);
                    }
                }
            }
        }
        link.last_hello = Some((now, hello.htime_s));
        link.loss_window.push(true);
        if use_hyst {
            hysteresis_update(link, HysteresisEvent::Received, scaling, thr_high, thr_low);
        }

        // Our own address in the sender's hello promotes the link,
        // unless the sender reports it lost.
        if let Some(me) = hello.entries.iter().find(|e| e.neighbor == self.main_addr) {
            let (link_status, _) = parse_link_code(me.link_code).expect("validated above");
            let link = self.links.get_mut(&sender).expect("just inserted");
            if link_status != LINK_LOST {
                link.sym_until = now.saturating_add_secs(msg.vtime_s);
            }
            link.reported_lq = me.link_quality;
        }

        // Neighbor tuple follows link state.
        let status = {
            let link = &self.links[&sender];
            if link.is_sym(now, use_hyst) {
                NeighborStatus::Sym
            } else {
                NeighborStatus::Asym
            }
        };
        self.neighbors.insert(
            sender,
            NeighborTuple {
                status,
                willingness: hello.willingness,
            },
        );

        // Two-hop bookkeeping, only through a symmetric sender.
        if status == NeighborStatus::Sym {
            for e in &hello.entries {
                let (_, neigh) = parse_link_code(e.link_code).expect("validated above");
                if e.neighbor == self.main_addr {
                    continue;
                }
                if neigh == NEIGH_SYM || neigh == NEIGH_MPR {
                    let etx = if e.link_quality > 0.0 {
                        1.0 / e.link_quality
                    } else {
                        f64::INFINITY
                    };
                    self.two_hop.insert(
                        (sender, e.neighbor),
                        TwoHopTuple {
                            expires: now.saturating_add_secs(msg.vtime_s),
                            etx,
                        },
                    );
                } else if neigh == NEIGH_NOT {
                    self.two_hop.remove(&(sender, e.neighbor));
                }
            }
            // The sender selected us as relay.
            let lists_us_as_mpr = hello.entries.iter().any(|e| {
                e.neighbor == self.main_addr
                    && parse_link_code(e.link_code).map(|(_, n)| n) == Some(NEIGH_MPR)
            });
            if lists_us_as_mpr {
                self.mpr_selectors
                    .insert(sender, now.saturating_add_secs(msg.vtime_s));
            } else {
                self.mpr_selectors.remove(&sender);
            }
        }

        self.recompute_mprs(now);
        self.routes_dirty = true;
    }

    fn process_tc(
        &mut self,
        msg: &OlsrMessage,
        tc: &TcPayload,
        sender_iface: IpAddr,
        now: SimTime,
    ) {
        // Floods are only accepted from symmetric neighbors.
        let sender_sym = self
            .links
            .get(&sender_iface)
            .map(|l| l.is_sym(now, self.config.use_hysteresis))
            .unwrap_or(false);
        if !sender_sym {
            self.diagnostics.non_neighbor_tc_dropped += 1;
            return;
        }
        if let Some(&stored) = self.topology_ansn.get(&msg.originator) {
            if tc.ansn < stored {
                self.diagnostics.stale_ansn_dropped += 1;
                return;
            }
        }
        self.topology_ansn.insert(msg.originator, tc.ansn);
        // Drop older advertisements from this originator.
        self.topology
            .retain(|&(_, last), t| last != msg.originator || t.ansn >= tc.ansn);
        for adv in &tc.advertised {
            if adv.neighbor == self.main_addr {
                continue;
            }
            self.topology.insert(
                (adv.neighbor, msg.originator),
                TopologyTuple {
                    ansn: tc.ansn,
                    expires: now.saturating_add_secs(msg.vtime_s),
                    etx: adv.etx,
                },
            );
        }
        self.routes_dirty = true;
    }

    fn process_mid(&mut self, msg: &OlsrMessage, mid: &MidPayload, now: SimTime) {
        for &addr in &mid.interface_addresses {
            self.iface_assoc
                .insert(addr, (msg.originator, now.saturating_add_secs(msg.vtime_s)));
        }
    }

    fn process_hna(&mut self, msg: &OlsrMessage, hna: &HnaPayload, now: SimTime) {
        for &(net, prefix) in &hna.networks {
            self.hna_networks.insert(
                (net, prefix),
                (msg.originator, now.saturating_add_secs(msg.vtime_s)),
            );
        }
        self.routes_dirty = true;
    }

    /// Resolves an interface address to its node main address using
    /// learned MID associations.
    pub fn main_addr_of(&self, iface: IpAddr) -> IpAddr {
        self.iface_assoc
            .get(&iface)
            .map(|&(main, _)| main)
            .unwrap_or(iface)
    }

    /// Greedy cover: pick symmetric neighbors until every two-hop
    /// target is reached through `MprCoverage` relays (or all it has).
    pub fn select_mprs(&mut self, now: SimTime) -> BTreeSet<IpAddr> {
        self.recompute_mprs(now);
        self.mprs.clone()
    }

    fn recompute_mprs(&mut self, now: SimTime) {
        let _ = now;
        let coverage = self.config.mpr_coverage.max(1);
        let candidates: BTreeSet<IpAddr> = self
            .neighbors
            .iter()
            .filter(|(_, n)| n.status == NeighborStatus::Sym && n.willingness > 0)
            .map(|(&a, _)| a)
            .collect();
        // Targets: strict two-hop nodes (not us, not direct neighbors).
        let mut covers: BTreeMap<IpAddr, BTreeSet<IpAddr>> = BTreeMap::new();
        for &(n, t) in self.two_hop.keys() {
            if t == self.main_addr || candidates.contains(&t) {
                continue;
            }
            let entry = covers.entry(t).or_default();
            if candidates.contains(&n) {
                entry.insert(n);
            }
        }

        let mut selected: BTreeSet<IpAddr> = BTreeSet::new();
        let mut need: BTreeMap<IpAddr, usize> = BTreeMap::new();
        for (&t, cs) in &covers {
            if cs.is_empty() {
                self.diagnostics.uncoverable_two_hop += 1;
                continue;
            }
            let want = coverage.min(cs.len());
            // Poorly covered targets take every candidate they have.
            if cs.len() <= coverage {
                selected.extend(cs.iter().copied());
            }
            need.insert(t, want);
        }
        let still_needed = |selected: &BTreeSet<IpAddr>,
                            need: &BTreeMap<IpAddr, usize>|
         -> BTreeMap<IpAddr, usize> {
            need.iter()
                .filter_map(|(&t, &want)| {
                    let have = covers[&t].intersection(selected).count();
                    if have < want {
                        Some((t, want - have))
                    } else {
                        None
                    }
                })
                .collect()
        };
        loop {
            let missing = still_needed(&selected, &need);
            if missing.is_empty() {
                break;
            }
            // Highest willingness, then widest reach, then lowest address.
            let best = candidates
                .iter()
                .filter(|c| !selected.contains(*c))
                .map(|&c| {
                    let reach = missing
                        .keys()
                        .filter(|t| covers[*t].contains(&c))
                        .count();
                    let will = self.neighbors[&c].willingness;
                    (c, will, reach)
                })
                .filter(|&(_, _, reach)| reach > 0)
                .max_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)).then(b.0.cmp(&a.0)));
            match best {
                Some((c, _, _)) => {
                    selected.insert(c);
                }
                None => break,
            }
        }
        self.mprs = selected;
    }

    pub fn routes(&self) -> &RouteTable {
        &self.routes
    }

    pub fn routes_dirty(&self) -> bool {
        self.routes_dirty
    }

    /// Rebuilds the route table. Hop-count mode grows the table layer
    /// by layer (neighbors, two-hop, then topology tuples until the
    /// fixpoint); link-quality mode runs a deterministic Dijkstra over
    /// summed link ETX. Ties always break toward the lowest address.
    pub fn compute_routes(&mut self, now: SimTime) -> &RouteTable {
        self.expire(now);
        let mut table = RouteTable::new();
        if self.config.link_quality_level >= 2 {
            self.compute_routes_etx(&mut table, now);
        } else {
            self.compute_routes_hops(&mut table, now);
        }
        // External networks ride on the route to their gateway.
        for (&(net, _prefix), &(gateway, _)) in &self.hna_networks {
            let gw_main = self.main_addr_of(gateway);
            if let Some(via) = table.get(gw_main) {
                table.insert(RouteEntry {
                    destination: net,
                    next_hop: via.next_hop,
                    hop_count: via.hop_count + 1,
                    egress_interface: self.signaling_iface,
                    metric: via.metric,
                    kind: RouteKind::External,
                });
            }
        }
        self.routes = table;
        self.routes_dirty = false;
        &self.routes
    }

    fn compute_routes_hops(&self, table: &mut RouteTable, now: SimTime) {
        let _ = now;
        // In hop-count mode the metric is the hop count itself.
        for (addr, n) in &self.neighbors {
            if n.status != NeighborStatus::Sym {
                continue;
            }
            table.insert(RouteEntry {
                destination: *addr,
                next_hop: *addr,
                hop_count: 1,
                egress_interface: self.signaling_iface,
                metric: Metric::finite(1.0),
                kind: RouteKind::Node,
            });
        }
        for &(n, t) in self.two_hop.keys() {
            if t == self.main_addr || table.contains(t) {
                continue;
            }
            let Some(via) = table.get(n).cloned() else {
                continue;
            };
            table.insert(RouteEntry {
                destination: t,
                next_hop: via.next_hop,
                hop_count: 2,
                egress_interface: self.signaling_iface,
                metric: via.metric + Metric::finite(1.0),
                kind: RouteKind::Node,
            });
        }
        // Grow outward from the topology set, one hop layer per pass,
        // until the fixpoint.
        let mut h = 1;
        loop {
            for &(dest, last) in self.topology.keys() {
                if dest == self.main_addr || table.contains(dest) {
                    continue;
                }
                let Some(via) = table.get(last).cloned() else {
                    continue;
                };
                if via.hop_count != h {
                    continue;
                }
                table.insert(RouteEntry {
                    destination: dest,
                    next_hop: via.next_hop,
                    hop_count: h + 1,
                    egress_interface: self.signaling_iface,
                    metric: via.metric + Metric::finite(1.0),
                    kind: RouteKind::Node,
                });
            }
            h += 1;
            let max_h = table.iter().map(|e| e.hop_count).max().unwrap_or(0);
            if h > max_h {
                break;
            }
        }
    }

    fn compute_routes_etx(&self, table: &mut RouteTable, now: SimTime) {
        let use_hyst = self.config.use_hysteresis;
        // Edge set: our own sym links plus flooded topology tuples.
        let mut edges: BTreeMap<IpAddr, Vec<(IpAddr, Metric)>> = BTreeMap::new();
        for (addr, link) in &self.links {
            if link.is_sym(now, use_hyst) {
                edges.entry(self.main_addr).or_default().push((*addr, link.etx()));
            }
        }
        let mut remote: BTreeMap<(IpAddr, IpAddr), Metric> = BTreeMap::new();
        let mut consider = |from: IpAddr, to: IpAddr, etx: f64| {
            let metric = if etx.is_finite() && etx >= 1.0 {
                Metric::finite(etx)
            } else {
                Metric::INFINITE
            };
            remote
                .entry((from, to))
                .and_modify(|m| *m = (*m).min(metric))
                .or_insert(metric);
        };
        // Hello-advertised neighbor links cover the two-hop ring before
        // any topology flood arrives; floods then refine the weights.
        for (&(n, t), tuple) in &self.two_hop {
            consider(n, t, tuple.etx);
        }
        for (&(dest, last), t) in &self.topology {
            consider(last, dest, t.etx);
        }
        for ((from, to), metric) in remote {
            edges.entry(from).or_default().push((to, metric));
        }

        // Dijkstra with (cost, hops, address) ordering.
        let mut best: BTreeMap<IpAddr, (Metric, u32, IpAddr)> = BTreeMap::new();
        let mut visited: BTreeSet<IpAddr> = BTreeSet::new();
        best.insert(self.main_addr, (Metric::finite(0.0), 0, self.main_addr));
        while let Some((&node, &(cost, hops, first_hop))) = best
            .iter()
            .filter(|(a, _)| !visited.contains(*a))
            .min_by(|(a, (ca, ha, _)), (b, (cb, hb, _))| {
                ca.cmp(cb).then(ha.cmp(hb)).then(a.cmp(b))
            })
        {
            if cost.is_infinite() {
                break;
            }
            visited.insert(node);
            for &(next, weight) in edges.get(&node).into_iter().flatten() {
                if visited.contains(&next) {
                    continue;
                }
                let cand_cost = cost + weight;
                let cand_hops = hops + 1;
                let cand_first = if node == self.main_addr { next } else { first_hop };
                let cand = (cand_cost, cand_hops, cand_first);
                match best.get(&next) {
                    Some(&cur) if cur <= cand => {}
                    _ => {
                        best.insert(next, cand);
                    }
                }
            }
        }
        for (dest, (cost, hops, first_hop)) in best {
            if dest == self.main_addr || cost.is_infinite() {
                continue;
            }
            table.insert(RouteEntry {
                destination: dest,
                next_hop: first_hop,
                hop_count: hops,
                egress_interface: self.signaling_iface,
                metric: cost,
                kind: RouteKind::Node,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{build_topology, chain_spec, Band, NodeId, Topology, TopologySpec};

    fn chain_topology(n: usize) -> Topology {
        build_topology(&chain_spec(
            n,
            (Band::B24, 6),
            &[(Band::B24, 1), (Band::B24, 11)],
            30.0,
        ))
        .unwrap()
    }

    fn engines(topo: &Topology, config: &OlsrConfig) -> BTreeMap<NodeId, Engine> {
        topo.nodes
            .iter()
            .map(|n| (n.id, Engine::new(n, config.clone())))
            .collect()
    }

    fn addr(node: u32) -> IpAddr {
        IpAddr::for_iface(NodeId(node), IfaceId(0))
    }

    /// One synchronous hello round: everyone emits, neighbors receive.
    fn hello_round(topo: &Topology, engines: &mut BTreeMap<NodeId, Engine>, now: SimTime) {
        let hellos: Vec<(NodeId, OlsrMessage)> = engines
            .iter_mut()
            .map(|(&id, e)| (id, e.emit_hello(now)))
            .collect();
        for (src, msg) in hellos {
            for nbr in topo.neighbors(src) {
                engines
                    .get_mut(&nbr)
                    .unwrap()
                    .handle_message(&msg, msg.originator, now);
            }
        }
    }

    /// Floods every pending TC to quiescence; returns the number of
    /// retransmissions performed.
    fn tc_flood(topo: &Topology, engines: &mut BTreeMap<NodeId, Engine>, now: SimTime) -> usize {
        let mut queue: Vec<(NodeId, OlsrMessage)> = Vec::new();
        let ids: Vec<NodeId> = engines.keys().copied().collect();
        for id in &ids {
            if let Some(tc) = engines.get_mut(id).unwrap().emit_tc(now) {
                queue.push((*id, tc));
            }
        }
        let mut forwards = 0usize;
        while let Some((from, msg)) = queue.pop() {
            let sender_iface = IpAddr::for_iface(from, IfaceId(0));
            for nbr in topo.neighbors(from) {
                let outs = engines
                    .get_mut(&nbr)
                    .unwrap()
                    .handle_message(&msg, sender_iface, now);
                for out in outs {
                    forwards += 1;
                    queue.push((nbr, out));
                }
            }
        }
        forwards
    }

    #[test]
    fn cold_start_hello_is_empty() {
        let topo = chain_topology(2);
        let mut e = Engine::new(topo.node(NodeId(0)).unwrap(), OlsrConfig::default());
        let msg = e.emit_hello(SimTime::ZERO);
        match msg.body {
            MessageBody::Hello(h) => assert!(h.entries.is_empty()),
            _ => panic!("expected hello"),
        }
        assert_eq!(msg.ttl, 1);
    }

    #[test]
    fn three_step_handshake() {
        let topo = chain_topology(2);
        let mut es = engines(&topo, &OlsrConfig::default());
        let t0 = SimTime::ZERO;

        // Step 1: B hears unknown A, records it asymmetric.
        let hello_a = es.get_mut(&NodeId(0)).unwrap().emit_hello(t0);
        es.get_mut(&NodeId(1))
            .unwrap()
            .handle_message(&hello_a, addr(0), t0);
        assert_eq!(
            es[&NodeId(1)].neighbor_status(addr(0)),
            Some(NeighborStatus::Asym)
        );

        // Step 2: B's hello lists A; A sees its own address and
        // declares the link symmetric.
        let t1 = SimTime::from_secs_f64(0.1);
        let hello_b = es.get_mut(&NodeId(1)).unwrap().emit_hello(t1);
        match &hello_b.body {
            MessageBody::Hello(h) => {
                assert_eq!(h.entries.len(), 1);
                let (l, _) = parse_link_code(h.entries[0].link_code).unwrap();
                assert_eq!(l, LINK_ASYM);
            }
            _ => unreachable!(),
        }
        es.get_mut(&NodeId(0))
            .unwrap()
            .handle_message(&hello_b, addr(1), t1);
        assert_eq!(
            es[&NodeId(0)].neighbor_status(addr(1)),
            Some(NeighborStatus::Sym)
        );

        // Step 3: A's next hello lists B; B promotes too.
        let t2 = SimTime::from_secs_f64(0.2);
        let hello_a = es.get_mut(&NodeId(0)).unwrap().emit_hello(t2);
        es.get_mut(&NodeId(1))
            .unwrap()
            .handle_message(&hello_a, addr(0), t2);
        assert_eq!(
            es[&NodeId(1)].neighbor_status(addr(0)),
            Some(NeighborStatus::Sym)
        );
    }

    #[test]
    fn two_hop_population_and_route() {
        let topo = chain_topology(3);
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..3 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(6.0);
        let a = es.get_mut(&NodeId(0)).unwrap();
        assert!(a.two_hop_targets().contains(&addr(2)));
        let routes = a.compute_routes(now);
        let entry = routes.get(addr(2)).unwrap();
        assert_eq!(entry.next_hop, addr(1));
        assert_eq!(entry.hop_count, 2);
    }

    #[test]
    fn star_center_selects_no_mprs() {
        // Center node 0 with three leaves; leaves have no further
        // neighbors, so the center has no two-hop targets.
        let spec = TopologySpec {
            nodes: chain_spec(4, (Band::B24, 6), &[(Band::B24, 1)], 0.0).nodes,
            adjacency: vec![(0, 1), (0, 2), (0, 3)],
            interference: None,
        };
        let topo = build_topology(&spec).unwrap();
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..3 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        assert!(es.get_mut(&NodeId(0))
            .unwrap()
            .select_mprs(SimTime::from_secs_f64(6.0))
            .is_empty());
    }

    #[test]
    fn chain_end_selects_middle_as_mpr() {
        let topo = chain_topology(3);
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..3 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(6.0);
        let mprs = es.get_mut(&NodeId(0)).unwrap().select_mprs(now);
        // Exhaustive check: of the subsets of {B}, only {B} covers C.
        assert_eq!(mprs, [addr(1)].into_iter().collect());
    }

    #[test]
    fn mpr_cover_honors_coverage_parameter() {
        // Diamond: 0 reaches 3 via both 1 and 2.
        let spec = TopologySpec {
            nodes: chain_spec(4, (Band::B24, 6), &[(Band::B24, 1)], 0.0).nodes,
            adjacency: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
            interference: None,
        };
        let topo = build_topology(&spec).unwrap();
        let single = OlsrConfig::default();
        let mut es = engines(&topo, &single);
        for round in 0..3 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(6.0);
        let mprs = es.get_mut(&NodeId(0)).unwrap().select_mprs(now);
        assert_eq!(mprs.len(), 1, "coverage 1 needs a single relay");
        assert_eq!(mprs, [addr(1)].into_iter().collect(), "lowest-address tie break");

        let redundant = OlsrConfig {
            mpr_coverage: 2,
            ..OlsrConfig::default()
        };
        let mut es = engines(&topo, &redundant);
        for round in 0..3 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let mprs = es.get_mut(&NodeId(0)).unwrap().select_mprs(now);
        assert_eq!(mprs.len(), 2, "coverage 2 selects both relays");
    }

    #[test]
    fn hello_marks_selected_relays() {
        let topo = chain_topology(3);
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..4 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        // The end node selected the middle node as its relay; its next
        // hello must carry the relay mark so the middle node learns it.
        let hello = es
            .get_mut(&NodeId(0))
            .unwrap()
            .emit_hello(SimTime::from_secs_f64(8.0));
        let MessageBody::Hello(h) = &hello.body else {
            panic!("expected hello");
        };
        let entry = h.entries.iter().find(|e| e.neighbor == addr(1)).unwrap();
        assert_eq!(parse_link_code(entry.link_code), Some((LINK_SYM, NEIGH_MPR)));
        assert!(es[&NodeId(1)].mpr_selector_set().contains(&addr(0)));
    }

    #[test]
    fn unwilling_neighbor_never_selected_as_relay() {
        let topo = chain_topology(3);
        let mut configs: BTreeMap<NodeId, OlsrConfig> = topo
            .nodes
            .iter()
            .map(|n| (n.id, OlsrConfig::default()))
            .collect();
        configs.get_mut(&NodeId(1)).unwrap().willingness = 0;
        let mut es: BTreeMap<NodeId, Engine> = topo
            .nodes
            .iter()
            .map(|n| (n.id, Engine::new(n, configs[&n.id].clone())))
            .collect();
        for round in 0..4 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(8.0);
        let a = es.get_mut(&NodeId(0)).unwrap();
        assert!(a.select_mprs(now).is_empty(), "unwilling relay must not be picked");
        assert!(a.diagnostics.uncoverable_two_hop > 0);
    }

    #[test]
    fn equal_cost_routes_break_ties_toward_lowest_address() {
        // Diamond 0-{1,2}-3: both two-hop paths cost the same; the
        // route through the lower-addressed relay wins.
        let spec = TopologySpec {
            nodes: chain_spec(4, (Band::B24, 6), &[(Band::B24, 1)], 0.0).nodes,
            adjacency: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
            interference: None,
        };
        let topo = build_topology(&spec).unwrap();
        for lq_level in [0u8, 2u8] {
            let config = OlsrConfig {
                link_quality_level: lq_level,
                ..OlsrConfig::default()
            };
            let mut es: BTreeMap<NodeId, Engine> = topo
                .nodes
                .iter()
                .map(|n| (n.id, Engine::new(n, config.clone())))
                .collect();
            for round in 0..4 {
                hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
            }
            let now = SimTime::from_secs_f64(8.0);
            let routes = es.get_mut(&NodeId(0)).unwrap().compute_routes(now);
            let entry = routes.get(addr(3)).expect("diamond route");
            assert_eq!(entry.next_hop, addr(1), "lq {lq_level}");
        }
    }

    #[test]
    fn tc_flood_reaches_three_hops_and_suppresses_duplicates() {
        let topo = chain_topology(4);
        let mut es = engines(&topo, &OlsrConfig::default());
        // Four rounds: two for the handshake, one to learn two-hop
        // neighborhoods, one for relay selections to reach the relays.
        for round in 0..4 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(8.0);
        let forwards = tc_flood(&topo, &mut es, now);
        // Full flooding would retransmit once per non-originating node
        // (3 per flood); only the two middle relays may forward here.
        assert!(forwards > 0);
        let n_tc = 2; // only the two middle nodes have MPR selectors
        assert!(forwards < n_tc * 3, "forwards {forwards}");

        let far = es.get_mut(&NodeId(0)).unwrap();
        let routes = far.compute_routes(now);
        let entry = routes.get(addr(3)).expect("route across the chain");
        assert_eq!(entry.hop_count, 3);
        assert_eq!(entry.next_hop, addr(1));
    }

    #[test]
    fn stale_ansn_is_discarded() {
        let topo = chain_topology(2);
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..2 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(4.0);
        let fresh = OlsrMessage {
            body: MessageBody::Tc(TcPayload {
                ansn: 5,
                advertised: vec![TcAdvertisement { neighbor: addr(7), etx: 1.0 }],
            }),
            vtime_s: 15.0,
            originator: addr(1),
            ttl: 255,
            hop_count: 0,
            msg_seq: 100,
        };
        let stale = OlsrMessage {
            body: MessageBody::Tc(TcPayload {
                ansn: 4,
                advertised: vec![TcAdvertisement { neighbor: addr(8), etx: 1.0 }],
            }),
            vtime_s: 15.0,
            originator: addr(1),
            ttl: 255,
            hop_count: 0,
            msg_seq: 101,
        };
        let a = es.get_mut(&NodeId(0)).unwrap();
        a.handle_message(&fresh, addr(1), now);
        a.handle_message(&stale, addr(1), now);
        assert_eq!(a.diagnostics.stale_ansn_dropped, 1);
        let routes = a.compute_routes(now);
        assert!(routes.contains(addr(7)));
        assert!(!routes.contains(addr(8)));
    }

    #[test]
    fn duplicate_tc_forwarded_at_most_once() {
        let topo = chain_topology(3);
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..4 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(8.0);
        let tc = es.get_mut(&NodeId(0)).unwrap().emit_tc(now);
        // End nodes are nobody's MPR; craft a TC from node 0 instead.
        let tc = tc.unwrap_or(OlsrMessage {
            body: MessageBody::Tc(TcPayload {
                ansn: 1,
                advertised: vec![TcAdvertisement { neighbor: addr(1), etx: 1.0 }],
            }),
            vtime_s: 15.0,
            originator: addr(0),
            ttl: 255,
            hop_count: 0,
            msg_seq: 50,
        });
        let middle = es.get_mut(&NodeId(1)).unwrap();
        let first = middle.handle_message(&tc, addr(0), now);
        assert_eq!(first.len(), 1, "middle node forwards the flood");
        let second = middle.handle_message(&tc, addr(0), now);
        assert!(second.is_empty(), "duplicate suppressed");
        assert_eq!(middle.diagnostics.duplicates_suppressed, 1);
    }

    #[test]
    fn broken_link_removes_downstream_routes() {
        let topo = chain_topology(3);
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..3 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(6.0);
        let a = es.get_mut(&NodeId(0)).unwrap();
        assert!(a.compute_routes(now).contains(addr(2)));
        // No hello from B for longer than the validity window.
        let much_later = SimTime::from_secs_f64(6.0 + 41.0);
        let routes = a.compute_routes(much_later);
        assert!(!routes.contains(addr(1)));
        assert!(!routes.contains(addr(2)));
    }

    #[test]
    fn hysteresis_arithmetic_and_thresholds() {
        let mut link = LinkTuple::new(addr(0), addr(1), 20, true);
        // Infinite reception stream converges monotonically to 1.
        let mut prev = 0.0;
        for _ in 0..200 {
            hysteresis_update(&mut link, HysteresisEvent::Received, 0.10, 0.80, 0.30);
            assert!(link.quality > prev);
            prev = link.quality;
        }
        assert!((link.quality - 1.0).abs() < 1e-6);

        link.quality = 0.79;
        link.pending = true;
        hysteresis_update(&mut link, HysteresisEvent::Received, 0.10, 0.80, 0.30);
        assert!((link.quality - 0.811).abs() < 1e-12);
        assert!(!link.pending, "promoted above the upper threshold");

        link.quality = 0.31;
        hysteresis_update(&mut link, HysteresisEvent::Lost, 0.10, 0.80, 0.30);
        assert!((link.quality - 0.279).abs() < 1e-12);
        assert!(link.pending, "demoted below the lower threshold");
    }

    #[test]
    fn hysteresis_gates_symmetry_until_quality_builds() {
        // With hysteresis on, a link stays pending until the quality
        // passes the upper threshold: 1 - 0.9^k > 0.8 needs 16 hellos.
        let topo = chain_topology(2);
        let config = OlsrConfig {
            use_hysteresis: true,
            ..OlsrConfig::default()
        };
        let mut a = Engine::new(topo.node(NodeId(0)).unwrap(), config.clone());
        for k in 1..=16u32 {
            let now = SimTime::from_secs_f64(k as f64 * 2.0);
            let hello = OlsrMessage {
                body: MessageBody::Hello(HelloPayload {
                    htime_s: 2.0,
                    willingness: 3,
                    entries: vec![HelloEntry {
                        link_code: link_code(LINK_SYM, NEIGH_SYM),
                        neighbor: addr(0),
                        link_quality: 1.0,
                    }],
                }),
                vtime_s: 40.0,
                originator: addr(1),
                ttl: 1,
                hop_count: 0,
                msg_seq: k,
            };
            a.handle_message(&hello, addr(1), now);
            let status = a.neighbor_status(addr(1));
            if k < 16 {
                assert_eq!(status, Some(NeighborStatus::Asym), "pending at hello {k}");
            } else {
                assert_eq!(status, Some(NeighborStatus::Sym), "promoted at hello {k}");
            }
        }
    }

    #[test]
    fn message_sequence_strictly_increases() {
        let topo = chain_topology(2);
        let mut e = Engine::new(topo.node(NodeId(0)).unwrap(), OlsrConfig::default());
        let mut last = 0;
        for i in 0..50 {
            let t = SimTime::from_secs_f64(i as f64);
            let seq = e.emit_hello(t).msg_seq;
            assert!(seq > last);
            last = seq;
        }
    }

    #[test]
    fn malformed_hello_block_dropped_and_counted() {
        let topo = chain_topology(2);
        let mut e = Engine::new(topo.node(NodeId(0)).unwrap(), OlsrConfig::default());
        let msg = OlsrMessage {
            body: MessageBody::Hello(HelloPayload {
                htime_s: 2.0,
                willingness: 3,
                entries: vec![HelloEntry {
                    link_code: 0xFF,
                    neighbor: addr(1),
                    link_quality: 1.0,
                }],
            }),
            vtime_s: 40.0,
            originator: addr(1),
            ttl: 1,
            hop_count: 0,
            msg_seq: 1,
        };
        e.handle_message(&msg, addr(1), SimTime::ZERO);
        assert_eq!(e.diagnostics.malformed_dropped, 1);
        assert_eq!(e.neighbor_status(addr(1)), None);
    }

    #[test]
    fn mid_declares_interface_association() {
        let topo = chain_topology(2);
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..2 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(4.0);
        let extra = IpAddr::for_iface(NodeId(1), IfaceId(1));
        // Emission is off by default.
        assert!(es
            .get_mut(&NodeId(1))
            .unwrap()
            .emit_mid(now, vec![extra])
            .is_none());
        let mut enabled = Engine::new(
            topo.node(NodeId(1)).unwrap(),
            OlsrConfig {
                emit_mid: true,
                ..OlsrConfig::default()
            },
        );
        let mid = enabled.emit_mid(now, vec![extra]).expect("mid enabled");
        let a = es.get_mut(&NodeId(0)).unwrap();
        a.handle_message(&mid, addr(1), now);
        assert_eq!(a.main_addr_of(extra), addr(1));
    }

    #[test]
    fn hna_injects_external_route() {
        let topo = chain_topology(2);
        let mut es = engines(&topo, &OlsrConfig::default());
        for round in 0..2 {
            hello_round(&topo, &mut es, SimTime::from_secs_f64(round as f64 * 2.0));
        }
        let now = SimTime::from_secs_f64(4.0);
        let net = IpAddr(0xC0A8_1500);
        let hna = OlsrMessage {
            body: MessageBody::Hna(HnaPayload {
                networks: vec![(net, 24)],
            }),
            vtime_s: 15.0,
            originator: addr(1),
            ttl: 255,
            hop_count: 0,
            msg_seq: 9,
        };
        let a = es.get_mut(&NodeId(0)).unwrap();
        a.handle_message(&hna, addr(1), now);
        let routes = a.compute_routes(now);
        let e = routes.get(net).expect("external route");
        assert_eq!(e.kind, RouteKind::External);
        assert_eq!(e.next_hop, addr(1));
    }
}
