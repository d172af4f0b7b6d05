//! Built-in reference scenarios and their measured anchors.
//!
//! Each table id names one bench experiment from the reference
//! measurement campaign: linear chains on one or two channels in both
//! bands, square four-node layouts, the channel-separation sweeps and
//! the relay antenna-distance sweeps. `reproduce_table` runs the
//! matching scenario for both transport flavors and compares the model
//! against the recorded means.
//!
//! Tolerances are per table and per protocol. Reliable-transport rows
//! are looser everywhere (the analytic model carries no congestion
//! dynamics), and a few tables are marked with a note where the
//! recorded campaign itself was visibly disturbed by ambient traffic;
//! their tolerances bound the model-to-record gap rather than claim
//! measurement-grade agreement.

use mcmesh_core::{
    run, Band, Flow, NegotiationParams, OfferedLoad, OlsrConfig, Protocol, RadioParams, Scenario,
    SimError, TopologySpec,
};
use mcmesh_core::topo::chain_spec;

/// One compared value inside a table reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproRow {
    pub label: String,
    pub protocol: Protocol,
    pub model_mbps: f64,
    pub reference_mbps: f64,
    /// Relative tolerance, fraction of the reference value.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproResult {
    pub table: String,
    pub description: String,
    pub note: Option<String>,
    pub rows: Vec<ReproRow>,
}

impl ReproResult {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

const FLOW_START_S: f64 = 10.0;
const FLOW_DURATION_S: f64 = 30.0;
const HORIZON_S: f64 = 45.0;

fn base_scenario(name: &str, topology: TopologySpec, band: Band, allowed: Vec<u8>) -> Scenario {
    Scenario {
        name: name.to_string(),
        topology,
        radio: RadioParams::default(),
        olsr: OlsrConfig::default(),
        negotiation: NegotiationParams {
            allowed_channels: allowed,
            band,
            ..NegotiationParams::default()
        },
        flows: Vec::new(),
        interferers: Vec::new(),
        horizon_s: HORIZON_S,
        seed: 0,
        full_stack: true,
        initial_channels: None,
        signaling_loss: 0.0,
        trace: false,
    }
}

/// Linear chain of `n` stations; `link_channels[i]` is the channel of
/// link `i`. Every node carries a data interface per distinct channel,
/// antenna positions spaced by `antenna_cm`.
pub fn chain_scenario(
    name: &str,
    n: usize,
    band: Band,
    link_channels: &[u8],
    antenna_cm: f64,
) -> Scenario {
    assert_eq!(link_channels.len(), n - 1);
    let mut distinct: Vec<u8> = link_channels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let data: Vec<(Band, u8)> = distinct.iter().map(|&c| (band, c)).collect();
    let topology = chain_spec(n, (Band::B24, 6), &data, antenna_cm);
    let mut s = base_scenario(name, topology, band, distinct);
    s.initial_channels = Some(
        link_channels
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u32, i as u32 + 1, c))
            .collect(),
    );
    s
}

/// Four stations on a square; links alternate the two channels around
/// the ring and the measured flow crosses the diagonal via `relay`.
pub fn square_scenario(name: &str, band: Band, channels: (u8, u8)) -> Scenario {
    let data = [(band, channels.0), (band, channels.1)];
    let mut topology = chain_spec(4, (Band::B24, 6), &data, 30.0);
    topology.adjacency = vec![(0, 1), (1, 2), (2, 3), (0, 3)];
    let mut s = base_scenario(name, topology, band, vec![channels.0, channels.1]);
    s.initial_channels = Some(vec![
        (0, 1, channels.0),
        (1, 2, channels.1),
        (2, 3, channels.0),
        (0, 3, channels.1),
    ]);
    s
}

fn with_flow(mut s: Scenario, src: u32, dst: u32, protocol: Protocol) -> Scenario {
    s.flows = vec![Flow {
        src,
        dst,
        protocol,
        start_s: FLOW_START_S,
        duration_s: FLOW_DURATION_S,
        offered: OfferedLoad::Saturate,
    }];
    s
}

/// Runs `scenario` once per transport flavor with a saturating flow
/// `src -> dst` and returns the achieved rates (tcp, udp).
pub fn measure_both(scenario: &Scenario, src: u32, dst: u32) -> Result<(f64, f64), SimError> {
    let tcp = run(&with_flow(scenario.clone(), src, dst, Protocol::TcpLike), scenario.seed)?;
    let udp = run(&with_flow(scenario.clone(), src, dst, Protocol::UdpLike), scenario.seed)?;
    Ok((tcp.flows[0].achieved_mbps, udp.flows[0].achieved_mbps))
}

struct TableSpec {
    id: &'static str,
    description: String,
    /// Reference means `(tcp, udp)` per measured point.
    anchors: Vec<(String, f64, f64)>,
    tol_tcp: f64,
    tol_udp: f64,
    note: Option<&'static str>,
    /// Scenario and flow endpoints per measured point.
    runs: Vec<(Scenario, u32, u32)>,
}

const NOTE_AMBIENT: &str =
    "reference campaign visibly disturbed by ambient 2.4 GHz traffic; tolerance bounds the model-to-record gap";
const NOTE_TCP_SWEEP: &str =
    "reliable-transport sweep rows react nonlinearly to partial interference; the curve is calibrated on datagram rows";
const NOTE_COUPLING_ALT: &str =
    "coupling curve is calibrated on the 1/11 rows; the 1/6 campaign differs in shape";

#[allow(clippy::too_many_arguments)]
fn chain_table(
    id: &'static str,
    n: usize,
    band: Band,
    link_channels: &[u8],
    tcp: f64,
    udp: f64,
    tol_tcp: f64,
    tol_udp: f64,
    note: Option<&'static str>,
) -> TableSpec {
    let name = format!("table_{id}");
    let scenario = chain_scenario(&name, n, band, link_channels, 30.0);
    let distinct = link_channels.iter().collect::<std::collections::BTreeSet<_>>().len();
    TableSpec {
        id,
        description: if distinct == 1 {
            format!("{n} stations, one channel")
        } else {
            format!("{n} stations, two channels")
        },
        anchors: vec![("mean".to_string(), tcp, udp)],
        tol_tcp,
        tol_udp,
        note,
        runs: vec![(scenario, 0, n as u32 - 1)],
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep_table(
    id: &'static str,
    band: Band,
    fixed: u8,
    var: u8,
    tcp: f64,
    udp: f64,
    tol_tcp: f64,
    tol_udp: f64,
    note: Option<&'static str>,
) -> TableSpec {
    let name = format!("table_{id}");
    let scenario = chain_scenario(&name, 3, band, &[fixed, var], 30.0);
    TableSpec {
        id,
        description: format!("3 stations, channels {fixed} and {var}"),
        anchors: vec![(format!("{fixed}/{var}"), tcp, udp)],
        tol_tcp,
        tol_udp,
        note,
        runs: vec![(scenario, 0, 2)],
    }
}

fn coupling_table(
    id: &'static str,
    channels: (u8, u8),
    protocol: Protocol,
    references: [f64; 7],
    tolerance: f64,
    note: Option<&'static str>,
) -> TableSpec {
    let distances = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    let mut runs = Vec::new();
    let mut anchors = Vec::new();
    for (i, &d) in distances.iter().enumerate() {
        let name = format!("table_{id}_d{d}");
        let scenario = chain_scenario(&name, 3, Band::B24, &[channels.0, channels.1], d);
        runs.push((scenario, 0, 2));
        anchors.push((format!("{d} cm"), references[i], references[i]));
    }
    let (tol_tcp, tol_udp) = match protocol {
        Protocol::TcpLike => (tolerance, f64::NAN),
        Protocol::UdpLike => (f64::NAN, tolerance),
    };
    TableSpec {
        id,
        description: format!(
            "3 stations, channels {}/{}, relay antenna distance sweep ({protocol})",
            channels.0, channels.1
        ),
        anchors,
        tol_tcp,
        tol_udp,
        note,
        runs,
    }
}

fn registry() -> Vec<TableSpec> {
    use Band::{B24, B5};
    let mut tables = vec![
        // Single-channel chains, 5 GHz.
        chain_table("6.2", 2, B5, &[36], 8.82, 9.93, 0.08, 0.06, None),
        chain_table("6.3", 3, B5, &[36, 36], 4.39, 5.01, 0.08, 0.06, None),
        chain_table("6.4", 4, B5, &[36, 36, 36], 2.90, 3.25, 0.08, 0.06, None),
        chain_table("6.5", 5, B5, &[36, 36, 36, 36], 2.18, 2.43, 0.08, 0.06, None),
        // Single-channel chains, 2.4 GHz.
        chain_table("6.6", 2, B24, &[1], 6.35, 7.37, 0.08, 0.06, None),
        chain_table("6.7", 3, B24, &[1, 1], 3.22, 3.71, 0.08, 0.06, None),
        chain_table("6.8", 4, B24, &[1, 1, 1], 2.10, 2.56, 0.08, 0.06, None),
        chain_table("6.9", 5, B24, &[1, 1, 1, 1], 1.61, 1.93, 0.08, 0.06, None),
        // Two-channel scenarios, 5 GHz (36/64 fully orthogonal).
        chain_table("6.10", 3, B5, &[36, 64], 8.32, 9.88, 0.08, 0.03, None),
        chain_table("6.11", 4, B5, &[36, 64, 36], 4.37, 4.87, 0.08, 0.06, None),
        chain_table("6.12", 4, B5, &[36, 64, 64], 4.44, 4.81, 0.08, 0.06, None),
        chain_table("6.13", 5, B5, &[36, 64, 36, 64], 4.42, 5.02, 0.08, 0.06, None),
        // Two-channel scenarios, 2.4 GHz (1/11).
        chain_table("6.16", 3, B24, &[1, 11], 5.17, 6.63, 0.25, 0.15, Some(NOTE_AMBIENT)),
        chain_table("6.17", 4, B24, &[1, 11, 1], 3.00, 3.80, 0.10, 0.08, None),
        chain_table("6.18", 4, B24, &[1, 11, 11], 3.05, 3.75, 0.10, 0.08, None),
        chain_table("6.19", 5, B24, &[1, 11, 1, 11], 2.77, 3.37, 0.18, 0.12, Some(NOTE_AMBIENT)),
        // Channel separation sweep, 5 GHz (fixed 36).
        sweep_table("6.22", B5, 36, 40, 4.35, 4.97, 0.08, 0.06, None),
        sweep_table("6.23", B5, 36, 44, 5.67, 6.59, 0.08, 0.06, None),
        sweep_table("6.24", B5, 36, 48, 6.12, 6.82, 0.08, 0.06, None),
        sweep_table("6.25", B5, 36, 52, 6.63, 8.17, 0.15, 0.06, Some(NOTE_TCP_SWEEP)),
        sweep_table("6.26", B5, 36, 56, 7.24, 9.45, 0.22, 0.06, Some(NOTE_TCP_SWEEP)),
        sweep_table("6.27", B5, 36, 60, 8.17, 9.76, 0.12, 0.05, None),
        // Channel separation sweep, 2.4 GHz (fixed 1).
        sweep_table("6.28", B24, 1, 2, 3.03, 3.55, 0.08, 0.06, None),
        sweep_table("6.29", B24, 1, 3, 2.58, 3.42, 0.22, 0.06, Some(NOTE_TCP_SWEEP)),
        sweep_table("6.30", B24, 1, 4, 2.73, 3.47, 0.18, 0.06, Some(NOTE_TCP_SWEEP)),
        sweep_table("6.31", B24, 1, 5, 3.41, 5.18, 0.40, 0.06, Some(NOTE_TCP_SWEEP)),
        sweep_table("6.32", B24, 1, 6, 5.53, 6.85, 0.18, 0.10, Some(NOTE_TCP_SWEEP)),
        // Relay antenna distance sweeps.
        coupling_table(
            "6.33",
            (1, 11),
            Protocol::TcpLike,
            [2.31, 2.95, 3.36, 3.47, 4.60, 5.44, 5.59],
            0.15,
            None,
        ),
        coupling_table(
            "6.34",
            (1, 11),
            Protocol::UdpLike,
            [2.87, 3.54, 4.01, 4.20, 5.74, 6.42, 6.79],
            0.12,
            None,
        ),
        coupling_table(
            "6.35",
            (1, 6),
            Protocol::TcpLike,
            [2.58, 2.63, 3.58, 3.64, 3.84, 5.04, 5.25],
            0.40,
            Some(NOTE_COUPLING_ALT),
        ),
        coupling_table(
            "6.36",
            (1, 6),
            Protocol::UdpLike,
            [3.11, 3.12, 4.06, 4.16, 4.41, 6.89, 6.97],
            0.40,
            Some(NOTE_COUPLING_ALT),
        ),
    ];
    // Square layouts: both diagonal paths measure the same model value;
    // the two recorded campaigns differed only in ambient conditions.
    let mut square = |id: &'static str,
                      band: Band,
                      chs: (u8, u8),
                      tcp: f64,
                      udp: f64,
                      tol_tcp: f64,
                      tol_udp: f64,
                      note: Option<&'static str>| {
        let name = format!("table_{id}");
        let scenario = square_scenario(&name, band, chs);
        tables.push(TableSpec {
            id,
            description: "4 stations on a square, diagonal flow over two channels".to_string(),
            anchors: vec![("mean".to_string(), tcp, udp)],
            tol_tcp,
            tol_udp,
            note,
            runs: vec![(scenario, 0, 2)],
        });
    };
    square("6.14", B5, (36, 64), 8.17, 9.68, 0.10, 0.06, None);
    square("6.15", B5, (36, 64), 8.08, 9.90, 0.12, 0.06, None);
    square("6.20", B24, (1, 11), 3.26, 5.11, 1.00, 0.50, Some(NOTE_AMBIENT));
    square("6.21", B24, (1, 11), 4.02, 5.11, 0.60, 0.50, Some(NOTE_AMBIENT));
    tables.sort_by(|a, b| {
        let num = |t: &TableSpec| t.id[2..].parse::<u32>().unwrap_or(0);
        num(a).cmp(&num(b))
    });
    tables
}

pub fn table_ids() -> Vec<String> {
    registry().into_iter().map(|t| t.id.to_string()).collect()
}

/// The scenario (plus flow endpoints) behind each run of a built-in
/// table, for callers that want to re-run or inspect them directly.
pub fn table_runs(table_id: &str) -> Option<Vec<(Scenario, u32, u32)>> {
    registry()
        .into_iter()
        .find(|t| t.id == table_id)
        .map(|t| t.runs)
}

/// Runs the built-in scenario behind `table_id` and compares against
/// its recorded anchors. `tolerance_override` replaces every per-table
/// tolerance when given (the `--tolerance` flag).
pub fn reproduce_table(
    table_id: &str,
    tolerance_override: Option<f64>,
) -> Result<Option<ReproResult>, SimError> {
    let Some(table) = registry().into_iter().find(|t| t.id == table_id) else {
        return Ok(None);
    };
    let mut rows = Vec::new();
    for ((scenario, src, dst), (label, ref_tcp, ref_udp)) in
        table.runs.iter().zip(table.anchors.iter())
    {
        let (tcp, udp) = measure_both(scenario, *src, *dst)?;
        for (protocol, model, reference, tol) in [
            (Protocol::TcpLike, tcp, *ref_tcp, table.tol_tcp),
            (Protocol::UdpLike, udp, *ref_udp, table.tol_udp),
        ] {
            if tol.is_nan() {
                continue;
            }
            let tol = tolerance_override.unwrap_or(tol);
            let diff = (model - reference).abs() / reference;
            rows.push(ReproRow {
                label: label.clone(),
                protocol,
                model_mbps: model,
                reference_mbps: reference,
                tolerance: tol,
                pass: diff <= tol,
            });
        }
    }
    Ok(Some(ReproResult {
        table: table.id.to_string(),
        description: table.description.clone(),
        note: table.note.map(str::to_string),
        rows,
    }))
}
