//! Sweep studies: channel-separation (orthogonality) curves per band
//! and the relay antenna-distance (coupling) curve. Each sweep runs the
//! 3-station two-channel chain once per point and per transport flavor
//! and emits a CSV plus an SVG rendering.

use mcmesh_core::{Band, SimError};

use crate::builtins::{chain_scenario, measure_both};
use crate::plot::line_plot;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Channel separation in MHz, or antenna distance in cm.
    pub x: f64,
    pub fixed_channel: u8,
    pub var_channel: u8,
    pub tcp_mbps: f64,
    pub udp_mbps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub csv: String,
    pub svg: String,
    pub points: Vec<SweepPoint>,
}

/// Channel pairs of the separation sweep per band: one end fixed, the
/// other walking up the band.
fn orthogonality_pairs(band: Band) -> Vec<(u8, u8)> {
    match band {
        Band::B24 => vec![(1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 11)],
        Band::B5 => vec![(36, 40), (36, 44), (36, 48), (36, 52), (36, 56), (36, 60), (36, 64)],
    }
}

pub fn orthogonality_sweep(band: Band) -> Result<SweepOutput, SimError> {
    let mut points = Vec::new();
    for (fixed, var) in orthogonality_pairs(band) {
        let name = format!("ortho_{fixed}_{var}");
        let scenario = chain_scenario(&name, 3, band, &[fixed, var], 30.0);
        let (tcp, udp) = measure_both(&scenario, 0, 2)?;
        let sep = separation_mhz(band, fixed, var);
        points.push(SweepPoint {
            x: sep,
            fixed_channel: fixed,
            var_channel: var,
            tcp_mbps: tcp,
            udp_mbps: udp,
        });
    }
    let mut csv = String::from("band,fixed_channel,var_channel,separation_mhz,tcp_mbps,udp_mbps\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{:.0},{:.4},{:.4}\n",
            band_label(band),
            p.fixed_channel,
            p.var_channel,
            p.x,
            p.tcp_mbps,
            p.udp_mbps
        ));
    }
    let svg = line_plot(
        &format!("Two-channel chain throughput vs channel separation ({})", band_label(band)),
        "separation (MHz)",
        "Mbps",
        &[
            ("tcp", points.iter().map(|p| (p.x, p.tcp_mbps)).collect()),
            ("udp", points.iter().map(|p| (p.x, p.udp_mbps)).collect()),
        ],
    );
    Ok(SweepOutput { csv, svg, points })
}

/// Antenna distances covered by the coupling sweep, cm.
pub const COUPLING_DISTANCES: [f64; 7] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

pub fn coupling_sweep(band: Band) -> Result<SweepOutput, SimError> {
    let (fixed, var) = match band {
        Band::B24 => (1, 11),
        Band::B5 => (36, 64),
    };
    let mut points = Vec::new();
    for d in COUPLING_DISTANCES {
        let name = format!("coupling_{d}");
        let scenario = chain_scenario(&name, 3, band, &[fixed, var], d);
        let (tcp, udp) = measure_both(&scenario, 0, 2)?;
        points.push(SweepPoint {
            x: d,
            fixed_channel: fixed,
            var_channel: var,
            tcp_mbps: tcp,
            udp_mbps: udp,
        });
    }
    let mut csv = String::from("band,channels,distance_cm,tcp_mbps,udp_mbps\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{}/{},{:.0},{:.4},{:.4}\n",
            band_label(band),
            p.fixed_channel,
            p.var_channel,
            p.x,
            p.tcp_mbps,
            p.udp_mbps
        ));
    }
    let svg = line_plot(
        &format!(
            "Relay throughput vs antenna distance, channels {fixed}/{var} ({})",
            band_label(band)
        ),
        "antenna distance (cm)",
        "Mbps",
        &[
            ("tcp", points.iter().map(|p| (p.x, p.tcp_mbps)).collect()),
            ("udp", points.iter().map(|p| (p.x, p.udp_mbps)).collect()),
        ],
    );
    Ok(SweepOutput { csv, svg, points })
}

fn separation_mhz(band: Band, a: u8, b: u8) -> f64 {
    use mcmesh_core::{channel_separation_mhz, Channel, ChannelSeparation};
    let ca = Channel::new(band, a).expect("valid channel");
    let cb = Channel::new(band, b).expect("valid channel");
    match channel_separation_mhz(ca, cb) {
        ChannelSeparation::SameBand(s) => s as f64,
        ChannelSeparation::Incomparable => unreachable!("same band by construction"),
    }
}

fn band_label(band: Band) -> &'static str {
    match band {
        Band::B24 => "b24",
        Band::B5 => "b5",
    }
}
