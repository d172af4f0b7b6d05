//! Proactive link-state routing over the signaling channel.
//!
//! One [`Engine`] per node. Engines are isolated state machines driven
//! by message delivery and timer events; they never share state — the
//! event loop owns the wiring. The module covers link sensing over
//! hellos (three-step handshake), neighbor and two-hop bookkeeping,
//! multipoint-relay selection, topology flooding with duplicate
//! suppression, optional hysteresis, hop-count and ETX route
//! calculation, and the remapping step that moves finished routes from
//! signaling addresses onto the bonded data interface.

mod engine;
pub mod message;
mod route;

pub use engine::{Engine, EngineDiagnostics, HysteresisEvent, LinkTuple, NeighborStatus};
pub use route::{remap_routes, AddressRemap, RouteEntry, RouteKind, RouteTable};

use serde::{Deserialize, Serialize};

/// Engine tunables. Field names follow the daemon configuration
/// vocabulary so scenario files read like the real thing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OlsrConfig {
    #[serde(rename = "HelloInterval")]
    pub hello_interval_s: f64,
    #[serde(rename = "HelloValidityTime")]
    pub hello_validity_s: f64,
    #[serde(rename = "TcInterval")]
    pub tc_interval_s: f64,
    #[serde(rename = "TcValidityTime")]
    pub tc_validity_s: f64,
    #[serde(rename = "MidInterval")]
    pub mid_interval_s: f64,
    #[serde(rename = "MidValidityTime")]
    pub mid_validity_s: f64,
    #[serde(rename = "HnaInterval")]
    pub hna_interval_s: f64,
    #[serde(rename = "HnaValidityTime")]
    pub hna_validity_s: f64,
    /// 0 advertises MPR selectors, 1 adds the node's own MPRs, 2
    /// advertises all symmetric neighbors.
    #[serde(rename = "TcRedundancy")]
    pub tc_redundancy: u8,
    /// Two-hop targets should be covered by this many relays where the
    /// neighborhood allows it.
    #[serde(rename = "MprCoverage")]
    pub mpr_coverage: usize,
    /// 0 disables link quality, 2 routes on summed link ETX.
    #[serde(rename = "LinkQualityLevel")]
    pub link_quality_level: u8,
    #[serde(rename = "LinkQualityWinSize")]
    pub link_quality_win_size: usize,
    #[serde(rename = "UseHysteresis")]
    pub use_hysteresis: bool,
    #[serde(rename = "HystScaling")]
    pub hyst_scaling: f64,
    #[serde(rename = "HystThrHigh")]
    pub hyst_thr_high: f64,
    #[serde(rename = "HystThrLow")]
    pub hyst_thr_low: f64,
    /// The data interfaces hide behind one bonded identity, so
    /// multi-interface declarations stay off by default.
    #[serde(rename = "EmitMid")]
    pub emit_mid: bool,
    #[serde(rename = "Willingness")]
    pub willingness: u8,
    /// Local external networks announced through HNA messages.
    #[serde(rename = "Hna4", skip)]
    pub local_hna: Vec<(crate::topo::IpAddr, u8)>,
}

impl Default for OlsrConfig {
    fn default() -> Self {
        OlsrConfig {
            hello_interval_s: 2.0,
            hello_validity_s: 40.0,
            tc_interval_s: 3.0,
            tc_validity_s: 15.0,
            mid_interval_s: 5.0,
            mid_validity_s: 15.0,
            hna_interval_s: 5.0,
            hna_validity_s: 15.0,
            tc_redundancy: 2,
            mpr_coverage: 1,
            link_quality_level: 2,
            link_quality_win_size: 20,
            use_hysteresis: false,
            hyst_scaling: 0.10,
            hyst_thr_high: 0.80,
            hyst_thr_low: 0.30,
            emit_mid: false,
            willingness: 3,
            local_hna: Vec::new(),
        }
    }
}
