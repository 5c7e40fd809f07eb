//! Random problem instances for property tests, acceptance checks and benches.

use rand::seq::index::sample;
use rand::Rng;

use crate::field::SensoryField;
use crate::graph::{VertexId, WeightedGraph};
use crate::partition::{Configuration, PartitionState};

/// Random connected graph: a random spanning tree plus up to `extra_edges` chords.
///
/// Positions are uniform in the unit square; weights are uniform in `[0.1, 1.0)`.
pub fn random_connected_graph<R: Rng>(rng: &mut R, n: usize, extra_edges: usize) -> WeightedGraph {
    assert!(n >= 1);
    let positions: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let mut edges = Vec::new();
    let mut present = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        present.insert((u, v));
        edges.push((u, v, rng.random_range(0.1..1.0)));
    }
    if n >= 3 {
        for _ in 0..extra_edges {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let (u, v) = (a.min(b), a.max(b));
            if u != v && present.insert((u, v)) {
                edges.push((u, v, rng.random_range(0.1..1.0)));
            }
        }
    }
    WeightedGraph::new(positions, edges).expect("spanning tree keeps the graph connected")
}

/// Strictly positive field with entries uniform in `[lo, hi)`.
pub fn random_field<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SensoryField {
    SensoryField::new((0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("positive by construction")
}

/// `k` distinct vertices drawn uniformly without replacement.
pub fn random_configuration<R: Rng>(rng: &mut R, n: usize, k: usize) -> Configuration {
    Configuration::new(sample(rng, n, k).into_iter().map(VertexId).collect())
}

/// Connected partition grown from the generators by random frontier expansion.
///
/// Every part contains its generator, so the pair is a valid coverage state.
pub fn random_connected_partition<R: Rng>(rng: &mut R, g: &WeightedGraph, eta: &Configuration) -> PartitionState {
    let n = g.num_vertices();
    let mut owner = vec![usize::MAX; n];
    for (i, v) in eta.iter().enumerate() {
        owner[v.0] = i;
    }
    let mut frontier: Vec<(usize, usize)> = Vec::new();
    let push_frontier = |frontier: &mut Vec<(usize, usize)>, owner: &[usize], v: usize, agent: usize| {
        for &(w, _) in g.neighbors(VertexId(v)) {
            if owner[w] == usize::MAX {
                frontier.push((w, agent));
            }
        }
    };
    for (i, v) in eta.iter().enumerate() {
        push_frontier(&mut frontier, &owner, v.0, i);
    }
    while !frontier.is_empty() {
        let k = rng.random_range(0..frontier.len());
        let (v, agent) = frontier.swap_remove(k);
        if owner[v] != usize::MAX {
            continue;
        }
        owner[v] = agent;
        push_frontier(&mut frontier, &owner, v, agent);
    }
    PartitionState::from_owner(g, owner, eta.len()).expect("frontier growth yields a connected partition")
}
