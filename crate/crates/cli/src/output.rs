//! CSV emission. The schemas are part of the tool contract and pinned
//! by golden-file tests:
//!
//! `results.csv`: `scenario,rep,flow,protocol,mbps,latency_ms,switches`
//! — one row per repetition per flow; `switches` is the run's total
//! bond cursor rotations.
//!
//! `summary.csv`:
//! `scenario,flow,protocol,mean_mbps,stddev_mbps,mean_latency_ms,stddev_latency_ms`
//! — per flow over the repetitions.

use mcmesh_core::{RunStats, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub scenario: String,
    pub rep: u64,
    pub flow: usize,
    pub protocol: String,
    pub mbps: f64,
    pub latency_ms: f64,
    pub switches: u64,
}

pub fn rows_for(scenario: &Scenario, rep: u64, stats: &RunStats) -> Vec<RunRow> {
    let switches: u64 = stats.bond_switches.values().sum();
    stats
        .flows
        .iter()
        .map(|f| RunRow {
            scenario: scenario.name.clone(),
            rep,
            flow: f.flow,
            protocol: f.protocol.to_string(),
            mbps: f.achieved_mbps,
            latency_ms: f.mean_latency_ms,
            switches,
        })
        .collect()
}

pub fn results_csv(rows: &[RunRow]) -> String {
    let mut out = String::from("scenario,rep,flow,protocol,mbps,latency_ms,switches\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{}\n",
            r.scenario, r.rep, r.flow, r.protocol, r.mbps, r.latency_ms, r.switches
        ));
    }
    out
}

pub fn summary_csv(rows: &[RunRow]) -> String {
    let mut out =
        String::from("scenario,flow,protocol,mean_mbps,stddev_mbps,mean_latency_ms,stddev_latency_ms\n");
    // Group by (scenario, flow, protocol) preserving first-seen order.
    let mut groups: Vec<(String, usize, String, Vec<&RunRow>)> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|(s, f, p, _)| *s == r.scenario && *f == r.flow && *p == r.protocol)
        {
            Some((_, _, _, v)) => v.push(r),
            None => groups.push((r.scenario.clone(), r.flow, r.protocol.clone(), vec![r])),
        }
    }
    for (scenario, flow, protocol, members) in groups {
        let (mean_mbps, sd_mbps) = mean_stddev(members.iter().map(|r| r.mbps));
        let (mean_lat, sd_lat) = mean_stddev(members.iter().map(|r| r.latency_ms));
        out.push_str(&format!(
            "{scenario},{flow},{protocol},{mean_mbps:.4},{sd_mbps:.4},{mean_lat:.4},{sd_lat:.4}\n"
        ));
    }
    out
}

fn mean_stddev(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
