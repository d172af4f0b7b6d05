//! Link and path routing metrics: expected transmission count, expected
//! transmission time and their channel-diversity-aware path aggregates,
//! including a variant that charges a channel-switching cost per hop.
//!
//! All evaluators are pure. Lossy-to-dead links produce the
//! [`Metric::INFINITE`] top value, which orders above every finite
//! metric and saturates under addition, so dead links are never chosen
//! yet never poison arithmetic.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topo::Channel;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityRange(f64),
    #[error("bandwidth must be positive")]
    ZeroBandwidth,
    #[error("packet size must be positive")]
    ZeroSize,
    #[error("beta {0} outside [0, 1]")]
    BetaRange(f64),
    #[error("interface usage fraction {0} outside [0, 1]")]
    UsageRange(f64),
    #[error("path has no links")]
    EmptyPath,
}

/// Totally ordered metric value with a saturating top element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric(f64);

impl Metric {
    pub const INFINITE: Metric = Metric(f64::INFINITY);

    /// Finite, non-negative metric value.
    pub fn finite(v: f64) -> Metric {
        debug_assert!(v.is_finite() && v >= 0.0, "metric out of domain: {v}");
        Metric(v)
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn as_f64(self) -> f64 {
        self.0
    }

    pub fn scale(self, k: f64) -> Metric {
        debug_assert!(k > 0.0);
        Metric(self.0 * k)
    }
}

impl Eq for Metric {}

impl PartialOrd for Metric {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Metric {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for Metric {
    type Output = Metric;
    fn add(self, rhs: Metric) -> Metric {
        Metric(self.0 + rhs.0)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{:.4}", self.0)
        }
    }
}

/// Loss probabilities of the two directions of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPair {
    /// Probability that a data packet is lost.
    pub p_f: f64,
    /// Probability that its acknowledgement is lost.
    pub p_r: f64,
}

/// Probability that one exchange fails: `1 - (1 - p_f)(1 - p_r)`.
pub fn error_prob(lp: LossPair) -> Result<f64, MetricError> {
    for p in [lp.p_f, lp.p_r] {
        if !(0.0..=1.0).contains(&p) {
            return Err(MetricError::ProbabilityRange(p));
        }
    }
    Ok(1.0 - (1.0 - lp.p_f) * (1.0 - lp.p_r))
}

/// Expected number of MAC transmissions until one exchange succeeds:
/// `1/(1-p)`, infinite at `p = 1`.
pub fn etx(p: f64) -> Result<Metric, MetricError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MetricError::ProbabilityRange(p));
    }
    if p == 1.0 {
        return Ok(Metric::INFINITE);
    }
    Ok(Metric::finite(1.0 / (1.0 - p)))
}

/// Expected transmission time in seconds: `ETX * S / B`.
pub fn ett(etx: Metric, size_bits: f64, bandwidth_bps: f64) -> Result<Metric, MetricError> {
    if bandwidth_bps <= 0.0 {
        return Err(MetricError::ZeroBandwidth);
    }
    if size_bits <= 0.0 {
        return Err(MetricError::ZeroSize);
    }
    Ok(etx.scale(size_bits / bandwidth_bps))
}

/// One data-link hop of a candidate path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLink {
    pub etx: Metric,
    pub size_bits: f64,
    pub bandwidth_bps: f64,
    pub channel: Channel,
}

impl PathLink {
    pub fn ett(&self) -> Result<Metric, MetricError> {
        ett(self.etx, self.size_bits, self.bandwidth_bps)
    }
}

/// A candidate path plus the measured busy fraction of each local
/// interface (keyed by the channel it is tuned to). Usage feeds the
/// switching-cost term only; the caller measures it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSpec {
    pub links: Vec<PathLink>,
    pub interface_usage: BTreeMap<Channel, f64>,
}

impl PathSpec {
    pub fn from_links(links: Vec<PathLink>) -> Self {
        PathSpec {
            links,
            interface_usage: BTreeMap::new(),
        }
    }

    fn etts(&self) -> Result<Vec<(Channel, Metric)>, MetricError> {
        if self.links.is_empty() {
            return Err(MetricError::EmptyPath);
        }
        self.links
            .iter()
            .map(|l| Ok((l.channel, l.ett()?)))
            .collect()
    }

    /// Per-channel ETT sums; the largest is the path bottleneck.
    fn channel_sums(etts: &[(Channel, Metric)]) -> BTreeMap<Channel, Metric> {
        let mut sums: BTreeMap<Channel, Metric> = BTreeMap::new();
        for &(ch, e) in etts {
            let entry = sums.entry(ch).or_insert(Metric::finite(0.0));
            *entry = *entry + e;
        }
        sums
    }
}

fn check_beta(beta: f64) -> Result<(), MetricError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(MetricError::BetaRange(beta));
    }
    Ok(())
}

/// Channel-diversity-weighted path metric:
/// `(1-beta) * sum(ETT_i) + beta * max_j X_j`, where `X_j` sums the
/// ETTs of the hops on channel `j`.
pub fn wcett(path: &PathSpec, beta: f64) -> Result<Metric, MetricError> {
    check_beta(beta)?;
    let etts = path.etts()?;
    let total = etts
        .iter()
        .fold(Metric::finite(0.0), |acc, &(_, e)| acc + e);
    let bottleneck = PathSpec::channel_sums(&etts)
        .into_values()
        .max()
        .expect("non-empty path");
    Ok(total.scale_or_zero(1.0 - beta) + bottleneck.scale_or_zero(beta))
}

impl Metric {
    /// `scale` that maps anything (including the top value) to zero at
    /// `k = 0`, so convex combinations drop their zero-weight term.
    fn scale_or_zero(self, k: f64) -> Metric {
        if k == 0.0 {
            Metric::finite(0.0)
        } else {
            Metric(self.0 * k)
        }
    }
}

/// [`wcett`] extended with a per-hop switching cost:
/// `(1-beta) * sum(ETT_i + SC(c_i)) + beta * max_j X_j`, where
/// `SC(j) = p_s(j) * switching_delay` and `p_s(j)` is the total busy
/// fraction of the interfaces other than the one on channel `j`.
pub fn mcr(path: &PathSpec, beta: f64, switching_delay_s: f64) -> Result<Metric, MetricError> {
    check_beta(beta)?;
    for &u in path.interface_usage.values() {
        if !(0.0..=1.0).contains(&u) {
            return Err(MetricError::UsageRange(u));
        }
    }
    let etts = path.etts()?;
    let usage_total: f64 = path.interface_usage.values().sum();
    let mut first_term = Metric::finite(0.0);
    for &(ch, e) in &etts {
        let p_switch = usage_total - path.interface_usage.get(&ch).copied().unwrap_or(0.0);
        first_term = first_term + e + Metric::finite(p_switch * switching_delay_s);
    }
    let bottleneck = PathSpec::channel_sums(&etts)
        .into_values()
        .max()
        .expect("non-empty path");
    Ok(first_term.scale_or_zero(1.0 - beta) + bottleneck.scale_or_zero(beta))
}
