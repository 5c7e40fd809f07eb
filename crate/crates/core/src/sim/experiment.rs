//! Seeded runs of one policy and their aggregation over seeds.

use rayon::prelude::*;

use super::config::{FieldSource, RunConfig};
use crate::belief::{prior_from_kernel, GaussianBelief};
use crate::error::{Error, Result};
use crate::field::{gmm_field, kde_field, PointCloud, SensoryField};
use crate::graph::build_grid;
use crate::metrics::{evaluate_state, RegretSeries};
use crate::partition::{Configuration, PartitionState};
use crate::policies::{
    initial_placement, CortesPolicy, CoveragePolicy, DslcPolicy, EpochLog, Environment, PolicyKind, Sensor,
    TodescatoPolicy,
};
use crate::rng::{self, stream};

/// Everything shared read-only by the runs of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub env: Environment,
    pub phi: SensoryField,
    pub prior: GaussianBelief,
}

impl ExperimentSetup {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let g = build_grid(cfg.grid.rows, cfg.grid.cols, cfg.grid.spacing)?;
        let phi = load_field(cfg, &g)?;
        let prior = prior_from_kernel(&g, &cfg.kernel, cfg.prior_mean, cfg.belief_noise_variance())?;
        Ok(ExperimentSetup {
            env: Environment::new(g),
            phi,
            prior,
        })
    }
}

/// Ground-truth field for the configured source.
pub fn load_field(cfg: &RunConfig, g: &crate::graph::WeightedGraph) -> Result<SensoryField> {
    let phi = match &cfg.field {
        FieldSource::Gmm { components } => gmm_field(g, components)?,
        FieldSource::Kde { path, bandwidth } => kde_field(g, &PointCloud::read_csv(path)?, *bandwidth)?,
        FieldSource::File { path } => SensoryField::read_csv(path, g.num_vertices())?,
    };
    Ok(SensoryField::clamped(phi.values(), cfg.phi_floor))
}

/// Output of one seeded run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub series: RegretSeries,
    pub final_configuration: Configuration,
    pub final_partition: PartitionState,
    /// DSLC only.
    pub epochs: Vec<EpochLog>,
    /// Iterations at which some agent stood outside its part.
    pub displaced_ticks: Vec<u64>,
}

fn build_policy(
    setup: &ExperimentSetup,
    cfg: &RunConfig,
    policy: PolicyKind,
    seed: u64,
) -> Result<Box<dyn CoveragePolicy>> {
    let mut placement = stream(seed, rng::PLACEMENT);
    let (eta, partition) = initial_placement(&setup.env, cfg.num_agents, &mut placement)?;
    Ok(match policy {
        PolicyKind::Dslc => Box::new(
            DslcPolicy::new(cfg.dslc.clone(), setup.prior.clone(), eta, partition, stream(seed, rng::GOSSIP))?
                .with_phi_floor(cfg.phi_floor),
        ),
        PolicyKind::Cortes => Box::new(CortesPolicy::new(setup.phi.clone(), eta, partition)),
        PolicyKind::Todescato => Box::new(
            TodescatoPolicy::new(setup.prior.clone(), eta, partition, stream(seed, rng::COIN))
                .with_phi_floor(cfg.phi_floor),
        ),
    })
}

/// Runs `policy` for `cfg.horizon` iterations under master seed `seed`.
pub fn run_single(setup: &ExperimentSetup, cfg: &RunConfig, policy: PolicyKind, seed: u64) -> Result<RunOutcome> {
    let mut pol = build_policy(setup, cfg, policy, seed)?;
    let mut sensor = Sensor::new(setup.phi.clone(), cfg.noise_sigma, stream(seed, rng::NOISE))?;
    let g = setup.env.graph();
    let dist = setup.env.dist();
    let mut series = RegretSeries::new();
    let mut displaced_ticks = Vec::new();
    for t in 1..=cfg.horizon {
        let report = pol.tick(&setup.env, &mut sensor)?;
        let eval = evaluate_state(g, dist, pol.partition(), pol.configuration(), &setup.phi)?;
        if !eval.displaced.is_empty() {
            displaced_ticks.push(t);
        }
        series.append(
            t,
            report.epoch,
            report.phase,
            eval.breakdown.cost,
            eval.breakdown.regret(),
            report.max_var,
        )?;
    }
    Ok(RunOutcome {
        seed,
        series,
        final_configuration: pol.configuration().clone(),
        final_partition: pol.partition().clone(),
        epochs: pol.epoch_log().to_vec(),
        displaced_ticks,
    })
}

/// Per-iteration mean over seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub cost: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub max_var: f64,
}

pub fn aggregate(runs: &[RunOutcome]) -> Result<Vec<AggregateRow>> {
    let first = runs.first().ok_or_else(|| Error::InvalidArgument("no runs to aggregate".into()))?;
    let len = first.series.len();
    if runs.iter().any(|r| r.series.len() != len) {
        return Err(Error::InvalidArgument("runs have different lengths".into()));
    }
    let k = runs.len() as f64;
    Ok((0..len)
        .map(|idx| {
            let mut row = AggregateRow {
                t: first.series.records()[idx].t,
                cost: 0.0,
                inst_regret: 0.0,
                cum_regret: 0.0,
                max_var: 0.0,
            };
            for r in runs {
                let rec = &r.series.records()[idx];
                row.cost += rec.cost;
                row.inst_regret += rec.inst_regret;
                row.cum_regret += rec.cum_regret;
                row.max_var += rec.max_var;
            }
            row.cost /= k;
            row.inst_regret /= k;
            row.cum_regret /= k;
            row.max_var /= k;
            row
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub policy: PolicyKind,
    pub runs: Vec<RunOutcome>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs every configured seed in parallel and aggregates in seed order.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let setup = ExperimentSetup::build(cfg)?;
    run_experiment_with(&setup, cfg, cfg.policy)
}

pub fn run_experiment_with(setup: &ExperimentSetup, cfg: &RunConfig, policy: PolicyKind) -> Result<ExperimentResult> {
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_single(setup, cfg, policy, seed))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&runs)?;
    Ok(ExperimentResult {
        policy,
        runs,
        aggregate,
    })
}
