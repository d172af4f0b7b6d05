//! Control message types exchanged by the link-state engine.
//!
//! Messages are structured values, not wire bytes. [`OlsrMessage::trace_line`]
//! renders the documented one-line debug dump used by trace-based
//! tests: `HELLO orig=<addr> seq=<n> ttl=<n> hops=<n> <payload>` where
//! the payload lists neighbor blocks (`<addr>/<link>.<neigh>/<lq>`),
//! TC advertisements, interface associations or external networks.

use crate::topo::{IpAddr, PacketKind};

/// Link-status half of a hello link code.
pub const LINK_UNSPEC: u8 = 0;
pub const LINK_ASYM: u8 = 1;
pub const LINK_SYM: u8 = 2;
pub const LINK_LOST: u8 = 3;

/// Neighbor-status half of a hello link code.
pub const NEIGH_NOT: u8 = 0;
pub const NEIGH_SYM: u8 = 1;
pub const NEIGH_MPR: u8 = 2;

/// Packs link and neighbor status into one code byte.
pub fn link_code(link: u8, neighbor: u8) -> u8 {
    (neighbor << 2) | link
}

/// Splits a code byte into `(link, neighbor)`; `None` when the byte
/// encodes no valid combination (the malformed-block case).
pub fn parse_link_code(code: u8) -> Option<(u8, u8)> {
    let link = code & 0b11;
    let neighbor = code >> 2;
    if neighbor <= NEIGH_MPR {
        Some((link, neighbor))
    } else {
        None
    }
}

fn link_code_label(code: u8) -> String {
    match parse_link_code(code) {
        Some((l, n)) => {
            let l = ["unspec", "asym", "sym", "lost"][l as usize];
            let n = ["not", "sym", "mpr"][n as usize];
            format!("{l}.{n}")
        }
        None => format!("bad({code})"),
    }
}

/// One advertised neighbor inside a hello.
#[derive(Debug, Clone, PartialEq)]
pub struct HelloEntry {
    pub link_code: u8,
    pub neighbor: IpAddr,
    /// Fraction of the neighbor's hellos received locally; the peer
    /// reads it back as its forward delivery ratio.
    pub link_quality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelloPayload {
    /// Emission interval advertised to neighbors, seconds.
    pub htime_s: f64,
    pub willingness: u8,
    pub entries: Vec<HelloEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcAdvertisement {
    pub neighbor: IpAddr,
    /// Expected transmission count of the advertised link.
    pub etx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcPayload {
    /// Advertised neighbor sequence number; bumped whenever the
    /// advertised set changes.
    pub ansn: u32,
    pub advertised: Vec<TcAdvertisement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MidPayload {
    /// Additional interface addresses of the originator.
    pub interface_addresses: Vec<IpAddr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnaPayload {
    /// `(network, prefix_len)` pairs reachable through the originator.
    pub networks: Vec<(IpAddr, u8)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    Hello(HelloPayload),
    Tc(TcPayload),
    Mid(MidPayload),
    Hna(HnaPayload),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsrMessage {
    pub body: MessageBody,
    /// Validity of the carried information, seconds.
    pub vtime_s: f64,
    pub originator: IpAddr,
    pub ttl: u8,
    pub hop_count: u8,
    /// Strictly increasing per originator within a run.
    pub msg_seq: u32,
}

impl OlsrMessage {
    pub fn kind(&self) -> PacketKind {
        match self.body {
            MessageBody::Hello(_) => PacketKind::Hello,
            MessageBody::Tc(_) => PacketKind::Tc,
            MessageBody::Mid(_) => PacketKind::Mid,
            MessageBody::Hna(_) => PacketKind::Hna,
        }
    }

    /// Hellos stay on the emitting link; everything else floods.
    pub fn is_flooded(&self) -> bool {
        !matches!(self.body, MessageBody::Hello(_))
    }

    pub fn trace_line(&self) -> String {
        let head = format!(
            "orig={} seq={} ttl={} hops={}",
            self.originator, self.msg_seq, self.ttl, self.hop_count
        );
        match &self.body {
            MessageBody::Hello(h) => {
                let entries: Vec<String> = h
                    .entries
                    .iter()
                    .map(|e| {
                        format!(
                            "{}/{}/{:.2}",
                            e.neighbor,
                            link_code_label(e.link_code),
                            e.link_quality
                        )
                    })
                    .collect();
                format!(
                    "HELLO {head} will={} nbrs=[{}]",
                    h.willingness,
                    entries.join(",")
                )
            }
            MessageBody::Tc(tc) => {
                let adv: Vec<String> = tc
                    .advertised
                    .iter()
                    .map(|a| format!("{}/{:.2}", a.neighbor, a.etx))
                    .collect();
                format!("TC {head} ansn={} adv=[{}]", tc.ansn, adv.join(","))
            }
            MessageBody::Mid(mid) => {
                let addrs: Vec<String> =
                    mid.interface_addresses.iter().map(|a| a.to_string()).collect();
                format!("MID {head} ifaces=[{}]", addrs.join(","))
            }
            MessageBody::Hna(hna) => {
                let nets: Vec<String> = hna
                    .networks
                    .iter()
                    .map(|(n, m)| format!("{n}/{m}"))
                    .collect();
                format!("HNA {head} nets=[{}]", nets.join(","))
            }
        }
    }
}
