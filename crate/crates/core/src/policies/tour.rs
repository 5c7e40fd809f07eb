//! Open sampling tours inside one part: nearest-neighbour construction plus 2-opt.

use crate::graph::{DistanceTable, VertexId};

const IMPROVEMENT_EPS: f64 = 1e-12;

/// Orders `points` into an open path starting from `start`.
///
/// Distances come from `table`, which must contain `start` and every point.
/// Repeated points are visited consecutively.
pub fn plan_tour(table: &DistanceTable, start: VertexId, points: &[VertexId]) -> Vec<VertexId> {
    let mut unique: Vec<(VertexId, usize)> = Vec::new();
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    for v in sorted {
        match unique.last_mut() {
            Some((u, k)) if *u == v => *k += 1,
            _ => unique.push((v, 1)),
        }
    }
    let order = two_opt(table, start, nearest_neighbour(table, start, &unique));
    order
        .into_iter()
        .flat_map(|(v, k)| std::iter::repeat_n(v, k))
        .collect()
}

fn nearest_neighbour(
    table: &DistanceTable,
    start: VertexId,
    points: &[(VertexId, usize)],
) -> Vec<(VertexId, usize)> {
    let mut remaining = points.to_vec();
    let mut order = Vec::with_capacity(points.len());
    let mut here = start;
    while !remaining.is_empty() {
        let mut best = 0;
        for k in 1..remaining.len() {
            if table.get(here, remaining[k].0) < table.get(here, remaining[best].0) {
                best = k;
            }
        }
        let next = remaining.remove(best);
        here = next.0;
        order.push(next);
    }
    order
}

/// Segment-reversal passes on the open path `start, tour[0], ..., tour[k-1]`
/// until no reversal shortens it.
fn two_opt(table: &DistanceTable, start: VertexId, mut tour: Vec<(VertexId, usize)>) -> Vec<(VertexId, usize)> {
    let k = tour.len();
    if k < 2 {
        return tour;
    }
    let d = |a: VertexId, b: VertexId| table.get(a, b);
    loop {
        let mut improved = false;
        for i in 0..k - 1 {
            let prev = if i == 0 { start } else { tour[i - 1].0 };
            for j in i + 1..k {
                let mut delta = d(prev, tour[j].0) - d(prev, tour[i].0);
                if j + 1 < k {
                    delta += d(tour[i].0, tour[j + 1].0) - d(tour[j].0, tour[j + 1].0);
                }
                if delta < -IMPROVEMENT_EPS {
                    tour[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            return tour;
        }
    }
}

/// Length of the open path from `start` through `tour`.
pub fn tour_length(table: &DistanceTable, start: VertexId, tour: &[VertexId]) -> f64 {
    let mut here = start;
    let mut total = 0.0;
    for &v in tour {
        total += table.get(here, v);
        here = v;
    }
    total
}
