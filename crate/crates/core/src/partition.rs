//! Graph Voronoi partitions, centroids and the pairwise gossip repartitioning rule.
//!
//! All costs are demand-weighted shortest-path distances measured inside the
//! subgraph induced by the part (or by the union of two parts for the gossip
//! step). Ties are always broken towards the lowest agent or vertex index.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::SensoryField;
use crate::graph::{DistanceTable, LocalSubgraph, VertexId, WeightedGraph};

/// Relative tolerance used when comparing costs for optimality predicates.
pub const COST_TOLERANCE: f64 = 1e-9;

// Tolerance for treating two candidate costs as tied during argmin scans.
const TIE_TOLERANCE: f64 = 1e-12;

fn improves(candidate: f64, best: f64) -> bool {
    if best.is_infinite() {
        return candidate < best;
    }
    candidate < best - TIE_TOLERANCE * best.abs().max(1.0)
}

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Agent positions: entry `i` is the vertex occupied by agent `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration(Vec<VertexId>);

impl Configuration {
    pub fn new(vertices: Vec<VertexId>) -> Self {
        Configuration(vertices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, agent: usize) -> VertexId {
        self.0[agent]
    }

    pub fn set(&mut self, agent: usize, v: VertexId) {
        self.0[agent] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.0
    }

    pub fn has_distinct_entries(&self) -> bool {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.windows(2).all(|w| w[0] != w[1])
    }
}

impl From<Vec<usize>> for Configuration {
    fn from(v: Vec<usize>) -> Self {
        Configuration(v.into_iter().map(VertexId).collect())
    }
}

/// Connected N-partition of the vertex set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionState {
    parts: Vec<Vec<VertexId>>,
    owner: Vec<usize>,
    generation: u64,
}

impl PartitionState {
    /// Builds and validates a partition from a per-vertex owner vector.
    pub fn from_owner(g: &WeightedGraph, owner: Vec<usize>, num_parts: usize) -> Result<Self> {
        if owner.len() != g.num_vertices() {
            return Err(Error::InvalidPartition(format!(
                "owner vector has length {} for {} vertices",
                owner.len(),
                g.num_vertices()
            )));
        }
        let mut parts = vec![Vec::new(); num_parts];
        for (v, &o) in owner.iter().enumerate() {
            if o >= num_parts {
                return Err(Error::InvalidPartition(format!("vertex {v} has owner {o} >= {num_parts}")));
            }
            parts[o].push(VertexId(v));
        }
        let state = PartitionState {
            parts,
            owner,
            generation: 0,
        };
        state.validate(g)?;
        Ok(state)
    }

    pub fn from_parts(g: &WeightedGraph, parts: &[Vec<VertexId>]) -> Result<Self> {
        let mut owner = vec![usize::MAX; g.num_vertices()];
        for (i, part) in parts.iter().enumerate() {
            for &v in part {
                g.check_vertex(v)?;
                if owner[v.0] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("{v} appears in parts {} and {i}", owner[v.0])));
                }
                owner[v.0] = i;
            }
        }
        if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::InvalidPartition(format!("vertex {v} is not covered")));
        }
        PartitionState::from_owner(g, owner, parts.len())
    }

    /// Disjoint, covering, nonempty, connected.
    pub fn validate(&self, g: &WeightedGraph) -> Result<()> {
        for (i, part) in self.parts.iter().enumerate() {
            if part.is_empty() {
                return Err(Error::InvalidPartition(format!("part {i} is empty")));
            }
            if g.components_of(part).len() != 1 {
                return Err(Error::InvalidPartition(format!("part {i} is not connected")));
            }
        }
        Ok(())
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Vec<VertexId>] {
        &self.parts
    }

    /// Vertices of part `i`, ascending.
    pub fn part(&self, i: usize) -> &[VertexId] {
        &self.parts[i]
    }

    pub fn owner_of(&self, v: VertexId) -> usize {
        self.owner[v.0]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    /// Number of repartitioning steps applied since construction.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    fn with_owner(&self, g: &WeightedGraph, owner: Vec<usize>) -> Result<Self> {
        let mut next = PartitionState::from_owner(g, owner, self.num_parts())?;
        next.generation = self.generation + 1;
        Ok(next)
    }

    /// Same vertex sets, ignoring the generation counter.
    pub fn same_parts(&self, other: &PartitionState) -> bool {
        self.owner == other.owner
    }

    /// Writes `vertex,owner,is_generator` rows.
    pub fn write_snapshot_csv(&self, eta: &Configuration, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["vertex", "owner", "is_generator"])?;
        for (v, &o) in self.owner.iter().enumerate() {
            let generator = eta.get(o) == VertexId(v);
            w.write_record(&[v.to_string(), o.to_string(), u8::from(generator).to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Unordered pairs `(i, j)`, `i < j`, of parts joined by at least one edge.
pub fn adjacent_pairs(g: &WeightedGraph, state: &PartitionState) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .filter_map(|&(u, v, _)| {
            let (a, b) = (state.owner[u], state.owner[v]);
            (a != b).then(|| (a.min(b), a.max(b)))
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

pub fn are_adjacent(g: &WeightedGraph, state: &PartitionState, i: usize, j: usize) -> bool {
    g.edges().iter().any(|&(u, v, _)| {
        let (a, b) = (state.owner[u], state.owner[v]);
        (a == i && b == j) || (a == j && b == i)
    })
}

/// Demand-weighted cost of serving `part` from `generator` over induced distances.
pub fn part_cost(g: &WeightedGraph, part: &[VertexId], generator: VertexId, phi: &SensoryField) -> Result<f64> {
    let sub = LocalSubgraph::new(g, part)?;
    let src = sub.local[generator.0];
    if src == usize::MAX {
        return Err(Error::InvalidArgument(format!("{generator} is not in the part")));
    }
    let d = sub.distances_from(src);
    if d.iter().any(|x| x.is_infinite()) {
        return Err(Error::Disconnected);
    }
    Ok(sub.members.iter().zip(&d).map(|(v, dv)| dv * phi.at(*v)).sum())
}

/// Partition assigning each vertex to the nearest agent, ties to the lowest agent index.
///
/// With exact distances the lowest-index rule yields connected cells; a
/// stranded component (possible only through rounding) is handed to the
/// smallest-index neighbouring cell and the result is re-validated.
pub fn voronoi_of(g: &WeightedGraph, dist: &DistanceTable, eta: &Configuration) -> Result<PartitionState> {
    if eta.is_empty() {
        return Err(Error::InvalidArgument("configuration is empty".into()));
    }
    for v in eta.iter() {
        g.check_vertex(v)?;
    }
    if !eta.has_distinct_entries() {
        return Err(Error::InvalidArgument("Voronoi generators must be distinct".into()));
    }
    let rows: Vec<&[f64]> = eta.iter().map(|v| dist.row(v)).collect();
    let owner: Vec<usize> = g
        .vertices()
        .map(|v| {
            let k = dist.local_index(v).expect("distance table covers the graph");
            let mut best = 0;
            for (i, row) in rows.iter().enumerate().skip(1) {
                if row[k] < rows[best][k] {
                    best = i;
                }
            }
            best
        })
        .collect();
    let owner = repair_connectivity(g, owner, eta);
    PartitionState::from_owner(g, owner, eta.len())
}

fn repair_connectivity(g: &WeightedGraph, mut owner: Vec<usize>, eta: &Configuration) -> Vec<usize> {
    let n_agents = eta.len();
    loop {
        let mut rooted = vec![false; g.num_vertices()];
        let mut stranded: Vec<(usize, Vec<VertexId>)> = Vec::new();
        for i in 0..n_agents {
            let part: Vec<VertexId> = g.vertices().filter(|v| owner[v.0] == i).collect();
            for comp in g.components_of(&part) {
                if comp.contains(&eta.get(i)) {
                    for v in &comp {
                        rooted[v.0] = true;
                    }
                } else {
                    stranded.push((i, comp));
                }
            }
        }
        if stranded.is_empty() {
            return owner;
        }
        log::warn!("repairing {} disconnected Voronoi component(s)", stranded.len());
        for (i, comp) in stranded {
            let target = comp
                .iter()
                .flat_map(|v| g.neighbors(*v).iter().map(|&(w, _)| w))
                .filter(|&w| rooted[w] && owner[w] != i)
                .map(|w| owner[w])
                .min();
            if let Some(t) = target {
                for v in &comp {
                    owner[v.0] = t;
                }
            }
        }
    }
}

/// Vertex minimising the demand-weighted induced distance to the rest of the part,
/// together with that minimum cost.
pub fn centroid_with_cost(g: &WeightedGraph, part: &[VertexId], phi: &SensoryField) -> Result<(VertexId, f64)> {
    let table = LocalSubgraph::new(g, part)?.into_table(true);
    centroid_from_table(&table, phi)
}

fn centroid_from_table(table: &DistanceTable, phi: &SensoryField) -> Result<(VertexId, f64)> {
    let weights: Vec<f64> = table.members().iter().map(|&v| phi.at(v)).collect();
    let mut best: Option<(VertexId, f64)> = None;
    for (i, &v) in table.members().iter().enumerate() {
        let row = table.row_local(i);
        if row.iter().any(|d| d.is_infinite()) {
            return Err(Error::Disconnected);
        }
        let cost: f64 = row.iter().zip(&weights).map(|(d, w)| d * w).sum();
        if best.is_none_or(|(_, b)| improves(cost, b)) {
            best = Some((v, cost));
        }
    }
    Ok(best.expect("part is nonempty"))
}

pub fn centroid_of(g: &WeightedGraph, part: &[VertexId], phi: &SensoryField) -> Result<VertexId> {
    Ok(centroid_with_cost(g, part, phi)?.0)
}

/// Centroids of all parts, in agent order.
pub fn centroids(g: &WeightedGraph, state: &PartitionState, phi: &SensoryField) -> Result<Configuration> {
    state
        .parts()
        .iter()
        .map(|p| centroid_of(g, p, phi))
        .collect::<Result<Vec<_>>>()
        .map(Configuration::new)
}

fn best_pair(table: &DistanceTable, phi: &SensoryField) -> Result<(VertexId, VertexId, f64)> {
    let m = table.len();
    if m < 2 {
        return Err(Error::InvalidArgument("pair search needs at least two vertices".into()));
    }
    if table.row_local(0).iter().any(|d| d.is_infinite()) {
        return Err(Error::Disconnected);
    }
    let weights: Vec<f64> = table.members().iter().map(|&v| phi.at(v)).collect();
    let mut best = (0, 1, f64::INFINITY);
    for a in 0..m {
        let ra = table.row_local(a);
        for b in (a + 1)..m {
            let rb = table.row_local(b);
            let cost: f64 = ra
                .iter()
                .zip(rb)
                .zip(&weights)
                .map(|((x, y), w)| x.min(*y) * w)
                .sum();
            if improves(cost, best.2) {
                best = (a, b, cost);
            }
        }
    }
    let members = table.members();
    Ok((members[best.0], members[best.1], best.2))
}

/// Exhaustive optimal two-generator placement inside the union of two parts.
///
/// Returns `(a, b, cost)` with `a < b`; ties go to the lexicographically first pair.
pub fn pairwise_optimal_pair(
    g: &WeightedGraph,
    union: &[VertexId],
    phi: &SensoryField,
) -> Result<(VertexId, VertexId, f64)> {
    let table = LocalSubgraph::new(g, union)?.into_table(true);
    best_pair(&table, phi)
}

/// One gossip step between adjacent agents `i` and `j`.
///
/// The agents move to the optimal pair `(a, b)` of their joint region (`i`
/// takes `a`), and the union is re-split by induced distance, with
/// equidistant vertices going to agent `i`.
pub fn pairwise_step(
    g: &WeightedGraph,
    state: &PartitionState,
    eta: &Configuration,
    i: usize,
    j: usize,
    phi_hat: &SensoryField,
) -> Result<(PartitionState, Configuration)> {
    let n = state.num_parts();
    if i >= n || j >= n || i == j || eta.len() != n {
        return Err(Error::InvalidArgument(format!("invalid agent pair ({i}, {j}) for {n} parts")));
    }
    if !are_adjacent(g, state, i, j) {
        return Err(Error::NotAdjacent(i, j));
    }
    let mut union: Vec<VertexId> = state.part(i).iter().chain(state.part(j)).copied().collect();
    union.sort_unstable();
    let table = LocalSubgraph::new(g, &union)?.into_table(true);
    let (a, b, _) = best_pair(&table, phi_hat)?;
    let (ra, rb) = (table.row(a), table.row(b));
    let mut owner = state.owners().to_vec();
    for (k, &v) in table.members().iter().enumerate() {
        owner[v.0] = if ra[k] <= rb[k] { i } else { j };
    }
    let next = state.with_owner(g, owner)?;
    let mut eta = eta.clone();
    eta.set(i, a);
    eta.set(j, b);
    Ok((next, eta))
}

/// Sum of the two parts' costs served from their current generators.
pub fn pair_cost(
    g: &WeightedGraph,
    state: &PartitionState,
    eta: &Configuration,
    i: usize,
    j: usize,
    phi: &SensoryField,
) -> Result<f64> {
    Ok(part_cost(g, state.part(i), eta.get(i), phi)? + part_cost(g, state.part(j), eta.get(j), phi)?)
}

/// Every adjacent pair is optimally two-partitioned within its union.
pub fn is_pairwise_optimal(g: &WeightedGraph, state: &PartitionState, phi_hat: &SensoryField) -> Result<bool> {
    let centroid_costs: Vec<f64> = state
        .parts()
        .iter()
        .map(|p| centroid_with_cost(g, p, phi_hat).map(|(_, c)| c))
        .collect::<Result<_>>()?;
    for (i, j) in adjacent_pairs(g, state) {
        let current = centroid_costs[i] + centroid_costs[j];
        let mut union: Vec<VertexId> = state.part(i).iter().chain(state.part(j)).copied().collect();
        union.sort_unstable();
        let (_, _, best) = pairwise_optimal_pair(g, &union, phi_hat)?;
        if !approx_eq(current, best) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether `state` is a Voronoi partition of `eta`, up to ties: every vertex is
/// reached from its own generator inside its part no later than from any other
/// generator over the whole graph.
pub fn is_voronoi_for(g: &WeightedGraph, dist: &DistanceTable, state: &PartitionState, eta: &Configuration) -> bool {
    if eta.len() != state.num_parts() || !eta.has_distinct_entries() {
        return false;
    }
    for (i, part) in state.parts().iter().enumerate() {
        let Ok(sub) = LocalSubgraph::new(g, part) else {
            return false;
        };
        let src = sub.local[eta.get(i).0];
        if src == usize::MAX {
            return false;
        }
        let own = sub.distances_from(src);
        for (k, &v) in sub.members.iter().enumerate() {
            let nearest = eta.iter().map(|e| dist.get(e, v)).fold(f64::INFINITY, f64::min);
            if own[k] > nearest + COST_TOLERANCE * nearest.max(1.0) {
                return false;
            }
        }
    }
    true
}

/// Voronoi partition of `eta` whose generators are centroids of their cells (up to ties).
pub fn is_centroidal_voronoi(
    g: &WeightedGraph,
    dist: &DistanceTable,
    state: &PartitionState,
    eta: &Configuration,
    phi_hat: &SensoryField,
) -> Result<bool> {
    if !is_voronoi_for(g, dist, state, eta) {
        return Ok(false);
    }
    for (i, part) in state.parts().iter().enumerate() {
        let (_, best) = centroid_with_cost(g, part, phi_hat)?;
        let here = part_cost(g, part, eta.get(i), phi_hat)?;
        if !approx_eq(here, best) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of one Lloyd iteration.
#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub partition: PartitionState,
    pub configuration: Configuration,
    /// Agents held in place because their centroid coincided with another agent's.
    pub frozen: Vec<usize>,
}

/// Moves every agent to its part's centroid, then recomputes the Voronoi partition.
pub fn lloyd_step(
    g: &WeightedGraph,
    dist: &DistanceTable,
    state: &PartitionState,
    eta: &Configuration,
    phi: &SensoryField,
) -> Result<LloydOutcome> {
    let target = centroids(g, state, phi)?;
    let mut next = target.clone();
    let mut frozen = Vec::new();
    // Centroids of disjoint parts are distinct; this only triggers if `state`
    // and `eta` disagree on agent count or ordering.
    for i in 0..next.len() {
        if target.iter().enumerate().any(|(k, v)| k != i && v == target.get(i)) {
            next.set(i, eta.get(i));
            frozen.push(i);
        }
    }
    if !frozen.is_empty() {
        log::warn!("lloyd step: centroid collision, freezing agents {frozen:?}");
    }
    let partition = voronoi_of(g, dist, &next)?;
    Ok(LloydOutcome {
        partition,
        configuration: next,
        frozen,
    })
}
