//! Coverage cost, coverage regret and per-run metric series.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SensoryField;
use crate::graph::{DistanceTable, WeightedGraph};
use crate::partition::{centroid_with_cost, part_cost, voronoi_of, Configuration, PartitionState};

/// Negative regret down to this value is treated as rounding and clamped to zero.
pub const REGRET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Estimation,
    Propagation,
    Coverage,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Estimation => "estimation",
            Phase::Propagation => "propagation",
            Phase::Coverage => "coverage",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimation" => Ok(Phase::Estimation),
            "propagation" => Ok(Phase::Propagation),
            "coverage" => Ok(Phase::Coverage),
            other => Err(Error::InvalidArgument(format!("unknown phase '{other}'"))),
        }
    }
}

/// Demand-weighted sum of induced distances from each agent to its part.
pub fn coverage_cost(g: &WeightedGraph, state: &PartitionState, eta: &Configuration, phi: &SensoryField) -> Result<f64> {
    check_generators(state, eta)?;
    let mut total = 0.0;
    for (i, part) in state.parts().iter().enumerate() {
        total += part_cost(g, part, eta.get(i), phi)?;
    }
    Ok(total)
}

fn check_generators(state: &PartitionState, eta: &Configuration) -> Result<()> {
    if eta.len() != state.num_parts() {
        return Err(Error::InvalidArgument(format!(
            "{} agents for {} parts",
            eta.len(),
            state.num_parts()
        )));
    }
    for (i, v) in eta.iter().enumerate() {
        if state.owner_of(v) != i {
            return Err(Error::GeneratorOutsidePart { agent: i, vertex: v.0 });
        }
    }
    Ok(())
}

/// Regret split into its two non-negative gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretBreakdown {
    /// H(eta, P)
    pub cost: f64,
    /// H(c(P), P)
    pub centroid_cost: f64,
    /// H(eta, V(eta))
    pub voronoi_cost: f64,
}

impl RegretBreakdown {
    /// How much moving agents to the centroids of their current parts would save.
    pub fn centroid_gap(&self) -> f64 {
        self.cost - self.centroid_cost
    }

    /// How much re-partitioning around the current agents would save.
    pub fn partition_gap(&self) -> f64 {
        self.cost - self.voronoi_cost
    }

    pub fn regret(&self) -> f64 {
        2.0 * self.cost - self.centroid_cost - self.voronoi_cost
    }
}

pub fn regret_breakdown(
    g: &WeightedGraph,
    dist: &DistanceTable,
    state: &PartitionState,
    eta: &Configuration,
    phi: &SensoryField,
) -> Result<RegretBreakdown> {
    let cost = coverage_cost(g, state, eta, phi)?;
    let mut centroid_cost = 0.0;
    for part in state.parts() {
        centroid_cost += centroid_with_cost(g, part, phi)?.1;
    }
    let voronoi = voronoi_of(g, dist, eta)?;
    let voronoi_cost = coverage_cost(g, &voronoi, eta, phi)?;
    Ok(RegretBreakdown {
        cost,
        centroid_cost,
        voronoi_cost,
    })
}

pub fn instantaneous_regret(
    g: &WeightedGraph,
    dist: &DistanceTable,
    state: &PartitionState,
    eta: &Configuration,
    phi: &SensoryField,
) -> Result<f64> {
    Ok(regret_breakdown(g, dist, state, eta, phi)?.regret())
}

/// Regret evaluation of a simulator state.
#[derive(Debug, Clone)]
pub struct StateEvaluation {
    pub breakdown: RegretBreakdown,
    /// Agents standing outside their part; they were scored from the part's
    /// vertex nearest to them.
    pub displaced: Vec<usize>,
}

/// Scores a state, substituting the nearest in-part vertex for any agent that
/// is not inside its own part.
pub fn evaluate_state(
    g: &WeightedGraph,
    dist: &DistanceTable,
    state: &PartitionState,
    eta: &Configuration,
    phi: &SensoryField,
) -> Result<StateEvaluation> {
    let mut effective = eta.clone();
    let mut displaced = Vec::new();
    for (i, v) in eta.iter().enumerate() {
        if i < state.num_parts() && state.owner_of(v) != i {
            let nearest = state
                .part(i)
                .iter()
                .copied()
                .min_by(|a, b| dist.get(v, *a).total_cmp(&dist.get(v, *b)))
                .expect("parts are nonempty");
            effective.set(i, nearest);
            displaced.push(i);
        }
    }
    if !displaced.is_empty() {
        log::warn!("agents {displaced:?} are outside their parts; scoring from nearest part vertices");
    }
    Ok(StateEvaluation {
        breakdown: regret_breakdown(g, dist, state, &effective, phi)?,
        displaced,
    })
}

/// One row of a run's metric series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    pub t: u64,
    pub epoch: u32,
    pub phase: Phase,
    pub cost: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub max_var: f64,
}

pub const CSV_HEADER: [&str; 7] = ["t", "epoch", "phase", "cost", "inst_regret", "cum_regret", "max_var"];

pub(crate) fn fmt_real(x: f64) -> String {
    format!("{x:.15e}")
}

/// Append-only series with a running regret sum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretSeries {
    records: Vec<RegretRecord>,
}

impl RegretSeries {
    pub fn new() -> Self {
        RegretSeries::default()
    }

    /// Appends a record; `t` must exceed the previous record's `t`.
    pub fn append(
        &mut self,
        t: u64,
        epoch: u32,
        phase: Phase,
        cost: f64,
        inst_regret: f64,
        max_var: f64,
    ) -> Result<&RegretRecord> {
        if let Some(last) = self.records.last() {
            if t <= last.t {
                return Err(Error::NonMonotoneTime { t, last: last.t });
            }
        }
        let inst_regret = if inst_regret < 0.0 {
            if inst_regret < -REGRET_SLACK {
                return Err(Error::NegativeRegret(inst_regret));
            }
            0.0
        } else {
            inst_regret
        };
        let cum_regret = self.cum_regret() + inst_regret;
        self.records.push(RegretRecord {
            t,
            epoch,
            phase,
            cost,
            inst_regret,
            cum_regret,
            max_var,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn records(&self) -> &[RegretRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cum_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record(&[
                r.t.to_string(),
                r.epoch.to_string(),
                r.phase.to_string(),
                fmt_real(r.cost),
                fmt_real(r.inst_regret),
                fmt_real(r.cum_regret),
                fmt_real(r.max_var),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a series written by [`RegretSeries::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(Error::Parse {
                path: path.to_owned(),
                message: format!("unexpected header {header:?}"),
            });
        }
        let records = r
            .deserialize::<RegretRecord>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(RegretSeries { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{all_pairs_distances, VertexId};
    use crate::instances::{random_configuration, random_connected_graph, random_connected_partition, random_field};
    use crate::partition::centroids;
    use crate::rng::stream;
    use rand::Rng;

    fn path(n: usize) -> WeightedGraph {
        let pos = (0..n).map(|i| [i as f64, 0.0]).collect();
        WeightedGraph::new(pos, (1..n).map(|i| (i - 1, i, 1.0)).collect()).unwrap()
    }

    fn vs(ids: &[usize]) -> Vec<VertexId> {
        ids.iter().copied().map(VertexId).collect()
    }

    #[test]
    fn cost_examples() {
        let g = path(3);
        let single = PartitionState::from_parts(&g, &[vs(&[0, 1, 2])]).unwrap();
        let phi = SensoryField::new(vec![1.0, 3.0, 1.0]).unwrap();
        assert_eq!(coverage_cost(&g, &single, &Configuration::from(vec![1]), &phi).unwrap(), 2.0);

        let singletons = PartitionState::from_parts(&g, &[vs(&[0]), vs(&[1]), vs(&[2])]).unwrap();
        let eta = Configuration::from(vec![0, 1, 2]);
        assert_eq!(coverage_cost(&g, &singletons, &eta, &phi).unwrap(), 0.0);

        assert!(matches!(
            coverage_cost(&g, &singletons, &Configuration::from(vec![1, 0, 2]), &phi),
            Err(Error::GeneratorOutsidePart { agent: 0, vertex: 1 })
        ));
    }

    #[test]
    fn centroids_minimise_cost_over_in_part_configurations() {
        let mut rng = stream(4, "cost-scan");
        for _ in 0..40 {
            let n = rng.random_range(3..9);
            let g = random_connected_graph(&mut rng, n, 2);
            let eta = random_configuration(&mut rng, n, 2);
            let s = random_connected_partition(&mut rng, &g, &eta);
            let phi = random_field(&mut rng, n, 0.1, 1.0);
            let c = coverage_cost(&g, &s, &centroids(&g, &s, &phi).unwrap(), &phi).unwrap();
            for &a in s.part(0) {
                for &b in s.part(1) {
                    let other = coverage_cost(&g, &s, &Configuration::new(vec![a, b]), &phi).unwrap();
                    assert!(c <= other + 1e-12);
                }
            }
        }
    }

    #[test]
    fn regret_zero_at_centroidal_voronoi() {
        let g = path(4);
        let d = all_pairs_distances(&g);
        let phi = SensoryField::uniform(4, 1.0).unwrap();
        let eta = Configuration::from(vec![0, 2]);
        let s = voronoi_of(&g, &d, &eta).unwrap();
        assert_eq!(instantaneous_regret(&g, &d, &s, &eta, &phi).unwrap(), 0.0);
    }

    #[test]
    fn regret_off_centroid_on_path() {
        // v3 ties with v2 as centroid of {2,3}
        let g = path(4);
        let d = all_pairs_distances(&g);
        let phi = SensoryField::uniform(4, 1.0).unwrap();
        let s = PartitionState::from_parts(&g, &[vs(&[0, 1]), vs(&[2, 3])]).unwrap();
        let eta = Configuration::from(vec![0, 3]);
        let b = regret_breakdown(&g, &d, &s, &eta, &phi).unwrap();
        assert_eq!((b.cost, b.centroid_cost, b.voronoi_cost), (2.0, 2.0, 2.0));
        assert_eq!(b.regret(), 0.0);

        let s2 = PartitionState::from_parts(&g, &[vs(&[0, 1]), vs(&[2, 3])]).unwrap();
        let eta2 = Configuration::from(vec![1, 3]);
        let b2 = regret_breakdown(&g, &d, &s2, &eta2, &phi).unwrap();
        assert_eq!(b2.cost, 2.0);
        assert_eq!(b2.centroid_gap(), 0.0);
        // V({1,3}) = {0,1,2},{3}
        assert_eq!(b2.voronoi_cost, 2.0);

        let s3 = PartitionState::from_parts(&g, &[vs(&[0]), vs(&[1, 2, 3])]).unwrap();
        let eta3 = Configuration::from(vec![0, 3]);
        let b3 = regret_breakdown(&g, &d, &s3, &eta3, &phi).unwrap();
        assert_eq!(b3.cost, 3.0);
        assert_eq!(b3.centroid_cost, 2.0);
        assert_eq!(b3.voronoi_cost, 2.0);
        assert_eq!(b3.regret(), 2.0);
        assert_eq!(b3.regret(), b3.centroid_gap() + b3.partition_gap());
        assert!(b3.regret() > 0.0);
    }

    #[test]
    fn gaps_non_negative_on_random_states() {
        let mut rng = stream(9, "gaps");
        for _ in 0..300 {
            let n = rng.random_range(2..14);
            let g = random_connected_graph(&mut rng, n, n / 2);
            let d = all_pairs_distances(&g);
            let k = rng.random_range(1..=n.min(4));
            let eta = random_configuration(&mut rng, n, k);
            let s = random_connected_partition(&mut rng, &g, &eta);
            let phi = random_field(&mut rng, n, 0.01, 1.0);
            let b = regret_breakdown(&g, &d, &s, &eta, &phi).unwrap();
            assert!(b.centroid_gap() >= -1e-12);
            assert!(b.partition_gap() >= -1e-12);
            assert!((b.regret() - (b.centroid_gap() + b.partition_gap())).abs() < 1e-12);
        }
    }

    #[test]
    fn regret_is_linear_in_field() {
        let mut rng = stream(10, "linear");
        for _ in 0..50 {
            let n = rng.random_range(3..12);
            let g = random_connected_graph(&mut rng, n, n / 2);
            let d = all_pairs_distances(&g);
            let eta = random_configuration(&mut rng, n, 2);
            let s = random_connected_partition(&mut rng, &g, &eta);
            let p1 = random_field(&mut rng, n, 0.1, 1.0);
            let p2 = random_field(&mut rng, n, 0.1, 1.0);
            let sum = SensoryField::new(p1.values().iter().zip(p2.values()).map(|(a, b)| a + b).collect()).unwrap();
            // linearity holds for the regret expression with fixed centroids
            // and fixed Voronoi cells; evaluate each term with those held fixed.
            let c = centroids(&g, &s, &sum).unwrap();
            let vor = voronoi_of(&g, &d, &eta).unwrap();
            let term = |phi: &SensoryField| {
                2.0 * coverage_cost(&g, &s, &eta, phi).unwrap()
                    - coverage_cost(&g, &s, &c, phi).unwrap()
                    - coverage_cost(&g, &vor, &eta, phi).unwrap()
            };
            let lhs = term(&sum);
            assert!((lhs - term(&p1) - term(&p2)).abs() < 1e-9 * lhs.abs().max(1.0));
            let scaled = p1.scaled(3.5).unwrap();
            assert!((term(&scaled) - 3.5 * term(&p1)).abs() < 1e-9 * term(&scaled).abs().max(1.0));
        }
    }

    #[test]
    fn series_accumulates() {
        let mut s = RegretSeries::new();
        assert_eq!(s.append(1, 1, Phase::Coverage, 3.0, 1.0, 0.5).unwrap().cum_regret, 1.0);
        assert_eq!(s.append(2, 1, Phase::Coverage, 3.0, 0.5, 0.5).unwrap().cum_regret, 1.5);
        assert!(matches!(
            s.append(2, 1, Phase::Coverage, 0.0, 0.0, 0.0),
            Err(Error::NonMonotoneTime { t: 2, last: 2 })
        ));
        assert_eq!(s.append(3, 1, Phase::Coverage, 0.0, -1e-12, 0.0).unwrap().inst_regret, 0.0);
        assert!(matches!(
            s.append(4, 1, Phase::Coverage, 0.0, -1e-6, 0.0),
            Err(Error::NegativeRegret(_))
        ));
    }

    #[test]
    fn long_series_sum_matches_independent_summation() {
        let mut rng = stream(3, "series");
        let mut s = RegretSeries::new();
        let values: Vec<f64> = (0..190).map(|_| rng.random_range(0.0..5.0)).collect();
        for (t, &r) in values.iter().enumerate() {
            s.append(t as u64 + 1, 0, Phase::Estimation, 0.0, r, 0.0).unwrap();
        }
        let mut comp = 0.0f64;
        let mut total = 0.0f64;
        // Kahan sum as the reference
        for &r in &values {
            let y = r - comp;
            let t = total + y;
            comp = (t - total) - y;
            total = t;
        }
        assert!((s.cum_regret() - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn csv_round_trip() {
        let mut s = RegretSeries::new();
        s.append(1, 1, Phase::Estimation, 1.25, 0.1, 0.9).unwrap();
        s.append(2, 1, Phase::Propagation, 1.0 / 3.0, 0.0, 0.4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        s.save_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,epoch,phase,cost,inst_regret,cum_regret,max_var\n1,1,estimation,"));
        assert_eq!(RegretSeries::read_csv(&p).unwrap(), s);
    }
}
