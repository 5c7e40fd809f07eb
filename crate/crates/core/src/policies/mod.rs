//! Per-iteration coverage policies: DSLC and the two baselines.

pub mod cortes;
pub mod dslc;
pub mod todescato;
pub mod tour;

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::belief::GaussianBelief;
use crate::error::{Error, Result};
use crate::field::SensoryField;
use crate::graph::{all_pairs_distances, DistanceTable, VertexId, WeightedGraph};
use crate::instances::random_configuration;
use crate::metrics::Phase;
use crate::partition::{voronoi_of, Configuration, PartitionState};
use crate::rng::SimRng;

pub use cortes::CortesPolicy;
pub use dslc::{epoch_coverage_length, plan_estimation, DslcConfig, DslcPolicy, EpochLog, EpochMode, EpochPhase, TeamState};
pub use todescato::TodescatoPolicy;

/// Graph plus its all-pairs distance table, shared read-only by every run.
#[derive(Debug, Clone)]
pub struct Environment {
    graph: WeightedGraph,
    dist: DistanceTable,
}

impl Environment {
    pub fn new(graph: WeightedGraph) -> Self {
        let dist = all_pairs_distances(&graph);
        Environment { graph, dist }
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn dist(&self) -> &DistanceTable {
        &self.dist
    }
}

/// Noisy point sensor over the ground-truth field.
///
/// The field itself is private: learning policies only see it through samples.
pub struct Sensor {
    phi: SensoryField,
    noise: Option<Normal<f64>>,
    rng: SimRng,
    samples_taken: u64,
}

impl Sensor {
    pub fn new(phi: SensoryField, sigma: f64, rng: SimRng) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
        }
        let noise = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?)
        } else {
            None
        };
        Ok(Sensor {
            phi,
            noise,
            rng,
            samples_taken: 0,
        })
    }

    /// `phi(v) + eps`, `eps ~ N(0, sigma^2)`.
    pub fn sample(&mut self, v: VertexId) -> f64 {
        self.samples_taken += 1;
        let eps = self.noise.as_ref().map_or(0.0, |n| n.sample(&mut self.rng));
        self.phi.at(v) + eps
    }

    pub fn samples_taken(&self) -> u64 {
        self.samples_taken
    }
}

/// What a policy reports about the iteration it just executed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickReport {
    pub phase: Phase,
    pub epoch: u32,
    pub max_var: f64,
}

pub trait CoveragePolicy: Send {
    fn kind(&self) -> PolicyKind;

    /// Advances the team by one iteration.
    fn tick(&mut self, env: &Environment, sensor: &mut Sensor) -> Result<TickReport>;

    fn configuration(&self) -> &Configuration;

    fn partition(&self) -> &PartitionState;

    /// Per-epoch phase accounting; empty for policies without epochs.
    fn epoch_log(&self) -> &[EpochLog] {
        &[]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Dslc,
    Cortes,
    Todescato,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Dslc, PolicyKind::Cortes, PolicyKind::Todescato];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Dslc => "dslc",
            PolicyKind::Cortes => "cortes",
            PolicyKind::Todescato => "todescato",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy '{s}' (expected dslc, cortes or todescato)")))
    }
}

/// Agents at distinct uniformly random vertices, cells assigned to the nearest agent.
pub fn initial_placement(
    env: &Environment,
    num_agents: usize,
    rng: &mut SimRng,
) -> Result<(Configuration, PartitionState)> {
    let n = env.graph().num_vertices();
    if num_agents == 0 || num_agents > n {
        return Err(Error::InvalidArgument(format!("cannot place {num_agents} agents on {n} vertices")));
    }
    let eta = random_configuration(rng, n, num_agents);
    let partition = voronoi_of(env.graph(), env.dist(), &eta)?;
    Ok((eta, partition))
}

pub(crate) fn field_estimate(belief: &GaussianBelief, floor: f64) -> SensoryField {
    SensoryField::clamped(belief.mean().as_slice(), floor)
}
