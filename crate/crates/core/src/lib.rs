//! Adaptive multi-agent coverage of an unknown field on a weighted graph.
//!
//! The crate is organised bottom-up:
//! - [`graph`]: weighted graphs, grids and shortest-path tables;
//! - [`belief`]: Gaussian-process belief over per-vertex field values and greedy sampling;
//! - [`partition`]: Voronoi partitions, centroids and the pairwise gossip rule;
//! - [`metrics`]: coverage cost and coverage regret;
//! - [`field`]: synthetic and kernel-density ground-truth fields;
//! - [`policies`]: the DSLC epoch controller and the Lloyd and randomised baselines;
//! - [`sim`]: configuration, seeded batch runs and result files.

pub mod belief;
pub mod error;
pub mod field;
pub mod graph;
pub mod instances;
pub mod metrics;
pub mod partition;
pub mod policies;
pub mod rng;
pub mod sim;

pub use belief::{prior_from_kernel, GaussianBelief, KernelSpec, SamplePlan};
pub use error::{Error, Result};
pub use field::{gmm_field, kde_field, normalize_field, GmmComponent, PointCloud, SensoryField, PHI_FLOOR};
pub use graph::{all_pairs_distances, build_grid, induced_distances, DistanceTable, VertexId, WeightedGraph};
pub use metrics::{coverage_cost, instantaneous_regret, Phase, RegretRecord, RegretSeries};
pub use partition::{
    centroid_of, is_centroidal_voronoi, is_pairwise_optimal, lloyd_step, pairwise_optimal_pair, pairwise_step,
    voronoi_of, Configuration, PartitionState,
};
pub use policies::{CoveragePolicy, DslcConfig, EpochMode, PolicyKind};
pub use sim::{load_config, run_experiment, write_results, RunConfig};
