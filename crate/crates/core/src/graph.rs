//! Environment graph, vertex geometry and shortest-path distance tables.
//!
//! A [`WeightedGraph`] is undirected, connected and carries a planar
//! embedding for every vertex. Distances come in two flavours: over the whole
//! graph ([`all_pairs_distances`]) and inside the subgraph induced by a vertex
//! subset ([`induced_distances`]). Unreachable pairs are `f64::INFINITY`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vertex index in `[0, |V|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub usize);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl From<usize> for VertexId {
    fn from(i: usize) -> Self {
        VertexId(i)
    }
}

/// Undirected, connected, positively weighted graph with planar positions.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    positions: Vec<[f64; 2]>,
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds a graph from positions and an undirected edge list (each edge once).
    pub fn new(positions: Vec<[f64; 2]>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        if let Some(i) = positions
            .iter()
            .position(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidGraph(format!("vertex {i} has a non-finite position")));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(u, v, w) in &edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) references a missing vertex")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) has non-positive weight {w}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
        }
        let g = WeightedGraph {
            positions,
            edges,
            adjacency,
        };
        let all: Vec<VertexId> = (0..n).map(VertexId).collect();
        if g.components_of(&all).len() != 1 {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn position(&self, v: VertexId) -> [f64; 2] {
        self.positions[v.0]
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Neighbours of `v` with edge weights, sorted by neighbour index.
    pub fn neighbors(&self, v: VertexId) -> &[(usize, f64)] {
        &self.adjacency[v.0]
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.num_vertices()).map(VertexId)
    }

    pub fn euclidean(&self, a: VertexId, b: VertexId) -> f64 {
        let (p, q) = (self.positions[a.0], self.positions[b.0]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    pub(crate) fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.0 < self.num_vertices() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange(v.0))
        }
    }

    /// Connected components of the subgraph induced by `subset`, each sorted.
    pub fn components_of(&self, subset: &[VertexId]) -> Vec<Vec<VertexId>> {
        let n = self.num_vertices();
        let mut member = vec![false; n];
        for v in subset {
            member[v.0] = true;
        }
        let mut visited = vec![false; n];
        let mut sorted: Vec<VertexId> = subset.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut components = Vec::new();
        for &start in &sorted {
            if visited[start.0] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start.0]);
            visited[start.0] = true;
            while let Some(u) = queue.pop_front() {
                comp.push(VertexId(u));
                for &(w, _) in &self.adjacency[u] {
                    if member[w] && !visited[w] {
                        visited[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// Writes the plain-text graph format: vertex count, `index x y` lines, `u v weight` lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.num_vertices())?;
        for (i, p) in self.positions.iter().enumerate() {
            writeln!(out, "{i} {:?} {:?}", p[0], p[1])?;
        }
        for &(u, v, w) in &self.edges {
            writeln!(out, "{u} {v} {w:?}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::InvalidGraph(format!("line {line}: {msg}"));
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| match l {
                Ok(s) => {
                    let t = s.trim();
                    !t.is_empty() && !t.starts_with('#')
                }
                Err(_) => true,
            });
        let (ln, header) = lines
            .next()
            .ok_or_else(|| Error::InvalidGraph("empty graph file".into()))?;
        let header = header.map_err(|e| parse_err(ln, e.to_string()))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| parse_err(ln, format!("expected vertex count, got {header:?}")))?;
        let mut positions = vec![[f64::NAN; 2]; n];
        let mut edges = Vec::new();
        let mut read_vertices = 0;
        for (ln, line) in lines {
            let line = line.map_err(|e| parse_err(ln, e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(ln, format!("expected 3 fields, got {}", fields.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| parse_err(ln, format!("bad index {s:?}")));
            let real = |s: &str| s.parse::<f64>().map_err(|_| parse_err(ln, format!("bad number {s:?}")));
            if read_vertices < n {
                let i = int(fields[0])?;
                if i != read_vertices {
                    return Err(parse_err(ln, format!("expected vertex {read_vertices}, got {i}")));
                }
                positions[i] = [real(fields[1])?, real(fields[2])?];
                read_vertices += 1;
            } else {
                edges.push((int(fields[0])?, int(fields[1])?, real(fields[2])?));
            }
        }
        if read_vertices != n {
            return Err(Error::InvalidGraph(format!("expected {n} vertex lines, found {read_vertices}")));
        }
        WeightedGraph::new(positions, edges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_text(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        WeightedGraph::read_text(std::io::BufReader::new(file))
    }
}

/// 4-connected `rows x cols` lattice with uniform edge weight `spacing`.
///
/// Vertex `r * cols + c` sits at `(c * spacing, r * spacing)`.
pub fn build_grid(rows: usize, cols: usize, spacing: f64) -> Result<WeightedGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidGraph(format!("grid must be non-empty, got {rows}x{cols}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidGraph(format!("grid spacing must be positive, got {spacing}")));
    }
    let mut positions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            positions.push([c as f64 * spacing, r as f64 * spacing]);
        }
    }
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1, spacing));
            }
            if r + 1 < rows {
                edges.push((v, v + cols, spacing));
            }
        }
    }
    WeightedGraph::new(positions, edges)
}

/// Shortest-path distances among a set of vertices.
///
/// Rows and columns follow the ascending order of [`DistanceTable::members`].
#[derive(Debug, Clone)]
pub struct DistanceTable {
    members: Vec<VertexId>,
    local: Vec<usize>,
    data: Vec<f64>,
    induced: bool,
}

const NOT_MEMBER: usize = usize::MAX;

impl DistanceTable {
    pub fn members(&self) -> &[VertexId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Whether the table was computed on an induced subgraph rather than the full graph.
    pub fn is_induced(&self) -> bool {
        self.induced
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.local.get(v.0).is_some_and(|&i| i != NOT_MEMBER)
    }

    pub fn local_index(&self, v: VertexId) -> Option<usize> {
        self.local.get(v.0).copied().filter(|&i| i != NOT_MEMBER)
    }

    pub fn try_get(&self, u: VertexId, v: VertexId) -> Option<f64> {
        let (i, j) = (self.local_index(u)?, self.local_index(v)?);
        Some(self.data[i * self.len() + j])
    }

    /// Distance between two member vertices.
    ///
    /// Panics if either vertex is not covered by the table.
    pub fn get(&self, u: VertexId, v: VertexId) -> f64 {
        self.try_get(u, v)
            .unwrap_or_else(|| panic!("distance table does not contain {u} and {v}"))
    }

    /// Row of distances from `u`, indexed by local position.
    pub fn row(&self, u: VertexId) -> &[f64] {
        let i = self
            .local_index(u)
            .unwrap_or_else(|| panic!("distance table does not contain {u}"));
        &self.data[i * self.len()..(i + 1) * self.len()]
    }

    pub(crate) fn row_local(&self, i: usize) -> &[f64] {
        &self.data[i * self.len()..(i + 1) * self.len()]
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source Dijkstra over a local adjacency list.
pub(crate) fn dijkstra(adj: &[Vec<(usize, f64)>], start: usize, dist: &mut [f64]) {
    dist.fill(f64::INFINITY);
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(HeapEntry { cost: 0.0, node: start });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let c = cost + w;
            if c < dist[next] {
                dist[next] = c;
                heap.push(HeapEntry { cost: c, node: next });
            }
        }
    }
}

/// Sorted, deduplicated subset plus global-to-local index and local adjacency.
pub(crate) struct LocalSubgraph {
    pub members: Vec<VertexId>,
    pub local: Vec<usize>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl LocalSubgraph {
    pub fn new(g: &WeightedGraph, subset: &[VertexId]) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        for &v in subset {
            g.check_vertex(v)?;
        }
        let mut members = subset.to_vec();
        members.sort_unstable();
        members.dedup();
        let mut local = vec![NOT_MEMBER; g.num_vertices()];
        for (i, v) in members.iter().enumerate() {
            local[v.0] = i;
        }
        let adjacency = members
            .iter()
            .map(|v| {
                g.neighbors(*v)
                    .iter()
                    .filter(|(w, _)| local[*w] != NOT_MEMBER)
                    .map(|&(w, wt)| (local[w], wt))
                    .collect()
            })
            .collect();
        Ok(LocalSubgraph {
            members,
            local,
            adjacency,
        })
    }

    /// Distances from one local source.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.members.len()];
        dijkstra(&self.adjacency, source, &mut d);
        d
    }

    pub fn into_table(self, induced: bool) -> DistanceTable {
        let m = self.members.len();
        let mut data = vec![0.0; m * m];
        for (i, row) in data.chunks_mut(m).enumerate() {
            dijkstra(&self.adjacency, i, row);
        }
        // Enforce exact symmetry; both directions are the same path sums but
        // relaxations can accumulate in different orders.
        for i in 0..m {
            for j in (i + 1)..m {
                let d = data[i * m + j].min(data[j * m + i]);
                data[i * m + j] = d;
                data[j * m + i] = d;
            }
        }
        DistanceTable {
            members: self.members,
            local: self.local,
            data,
            induced,
        }
    }
}

/// Exact all-pairs shortest-path distances of the whole graph.
pub fn all_pairs_distances(g: &WeightedGraph) -> DistanceTable {
    let all: Vec<VertexId> = g.vertices().collect();
    LocalSubgraph::new(g, &all)
        .expect("graph has at least one vertex")
        .into_table(false)
}

/// Shortest-path distances inside the subgraph induced by `subset`.
pub fn induced_distances(g: &WeightedGraph, subset: &[VertexId]) -> Result<DistanceTable> {
    Ok(LocalSubgraph::new(g, subset)?.into_table(true))
}

/// True iff `subset` induces a connected subgraph.
pub fn is_connected_subset(g: &WeightedGraph, subset: &[VertexId]) -> Result<bool> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    for &v in subset {
        g.check_vertex(v)?;
    }
    Ok(g.components_of(subset).len() == 1)
}
