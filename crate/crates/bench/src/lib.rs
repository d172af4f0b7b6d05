//! Shared fixtures for the criterion benches.

use mcmesh_core::olsr::message::OlsrMessage;
use mcmesh_core::olsr::{Engine, OlsrConfig};
use mcmesh_core::topo::chain_spec;
use mcmesh_core::{build_topology, Band, NodeId, SimTime, Topology, TopologySpec};
use std::collections::BTreeMap;

/// Dense random-ish mesh: a chain plus every third chord, which gives
/// every node a rich two-hop neighborhood.
pub fn dense_spec(n: usize) -> TopologySpec {
    let mut spec = chain_spec(n, (Band::B24, 6), &[(Band::B5, 36), (Band::B5, 64)], 30.0);
    for i in 0..n as u32 {
        for j in (i + 2)..n as u32 {
            if (i + j) % 3 == 0 {
                spec.adjacency.push((i, j));
            }
        }
    }
    spec
}

/// Engines after enough loss-free hello rounds and one topology flood
/// to have full knowledge of the mesh.
pub fn converged_engines(topo: &Topology) -> BTreeMap<NodeId, Engine> {
    let mut engines: BTreeMap<NodeId, Engine> = topo
        .nodes
        .iter()
        .map(|n| (n.id, Engine::new(n, OlsrConfig::default())))
        .collect();
    for round in 0..5 {
        let now = SimTime::from_secs_f64(round as f64 * 2.0);
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
    let now = SimTime::from_secs_f64(10.0);
    let ids: Vec<NodeId> = engines.keys().copied().collect();
    let mut queue = Vec::new();
    for id in &ids {
        if let Some(tc) = engines.get_mut(id).unwrap().emit_tc(now) {
            queue.push((*id, tc));
        }
    }
    while let Some((from, msg)) = queue.pop() {
        let sender = topo.node(from).unwrap().signaling().ip_address;
        for nbr in topo.neighbors(from) {
            for fwd in engines
                .get_mut(&nbr)
                .unwrap()
                .handle_message(&msg, sender, now)
            {
                queue.push((nbr, fwd));
            }
        }
    }
    engines
}

pub fn dense_topology(n: usize) -> Topology {
    build_topology(&dense_spec(n)).expect("valid spec")
}
