//! Deterministic sequencing of learning and coverage.
//!
//! Each epoch `j` runs three phases:
//! 1. estimation: agents visit a greedy sampling plan that drives every
//!    posterior variance to at most `alpha^j * sigma0^2`;
//! 2. propagation: positions are frozen for `D` iterations, after which the
//!    buffered samples enter the shared belief;
//! 3. coverage: one pairwise gossip step per iteration against the posterior
//!    mean, for a number of iterations set by the epoch schedule.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tour::plan_tour;
use super::{field_estimate, CoveragePolicy, Environment, PolicyKind, Sensor, TickReport};
use crate::belief::{GaussianBelief, SamplePlan};
use crate::error::{Error, Result};
use crate::field::{SensoryField, PHI_FLOOR};
use crate::graph::{induced_distances, VertexId, WeightedGraph};
use crate::metrics::Phase;
use crate::partition::{adjacent_pairs, centroid_of, pairwise_step, Configuration, PartitionState};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpochMode {
    /// Coverage phase of epoch `j` lasts `ceil(beta^j)` iterations.
    Theorem,
    /// Epoch `j` lasts `explicit_lengths[j-1]` iterations in total.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DslcConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epoch_mode: EpochMode,
    pub explicit_lengths: Vec<usize>,
    pub propagation_delay: usize,
    pub max_epochs: usize,
    /// Require `alpha = beta^(-2/3)`.
    pub strict_theorem: bool,
}

pub const DEFAULT_PROPAGATION_DELAY: usize = 1;
pub const DEFAULT_MAX_EPOCHS: usize = 64;

impl DslcConfig {
    /// Theorem-mode schedule with `beta = alpha^(-3/2)`.
    pub fn new(alpha: f64) -> Self {
        DslcConfig {
            alpha,
            beta: default_beta(alpha),
            epoch_mode: EpochMode::Theorem,
            explicit_lengths: Vec::new(),
            propagation_delay: DEFAULT_PROPAGATION_DELAY,
            max_epochs: DEFAULT_MAX_EPOCHS,
            strict_theorem: false,
        }
    }

    pub fn explicit(alpha: f64, lengths: Vec<usize>) -> Self {
        DslcConfig {
            epoch_mode: EpochMode::Explicit,
            max_epochs: lengths.len(),
            explicit_lengths: lengths,
            ..DslcConfig::new(alpha)
        }
    }

    /// Every violated constraint, phrased for a config file reader.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(format!("dslc.alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            out.push(format!("dslc.beta must be > 1, got {}", self.beta));
        }
        if self.max_epochs == 0 {
            out.push("dslc.max_epochs must be >= 1".into());
        }
        match self.epoch_mode {
            EpochMode::Explicit => {
                if self.explicit_lengths.is_empty() {
                    out.push("dslc.explicit_lengths must be nonempty in explicit epoch mode".into());
                }
                if self.explicit_lengths.contains(&0) {
                    out.push("dslc.explicit_lengths entries must be >= 1".into());
                }
            }
            EpochMode::Theorem => {
                if self.strict_theorem && (self.alpha - self.beta.powf(-2.0 / 3.0)).abs() > 1e-9 {
                    out.push(format!(
                        "dslc.strict_theorem requires alpha = beta^(-2/3); got alpha {} and beta^(-2/3) = {}",
                        self.alpha,
                        self.beta.powf(-2.0 / 3.0)
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

pub fn default_beta(alpha: f64) -> f64 {
    alpha.powf(-1.5)
}

// ceil that ignores rounding residue above an integer (2^1.5 squared is 8.000000000000002)
fn ceil_with_slack(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Coverage-phase length of epoch `j >= 1`.
///
/// In explicit mode `used` is the number of estimation plus propagation
/// iterations already spent in the epoch; the coverage phase fills the rest.
pub fn epoch_coverage_length(cfg: &DslcConfig, j: usize, used: usize) -> Result<usize> {
    if j == 0 {
        return Err(Error::InvalidArgument("epochs are numbered from 1".into()));
    }
    match cfg.epoch_mode {
        EpochMode::Theorem => Ok(ceil_with_slack(cfg.beta.powi(j as i32))),
        EpochMode::Explicit => cfg
            .explicit_lengths
            .get(j - 1)
            .map(|total| total.saturating_sub(used))
            .ok_or(Error::EpochScheduleExhausted(j)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochPhase {
    pub tag: Phase,
    pub remaining: usize,
}

/// Phase accounting for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: u32,
    pub threshold: f64,
    pub plan_len: usize,
    pub longest_tour: usize,
    pub estimation_ticks: usize,
    pub propagation_ticks: usize,
    pub coverage_budget: usize,
    pub coverage_ticks: usize,
    /// Max posterior variance right after the epoch's samples were merged.
    pub max_var_after_merge: Option<f64>,
}

/// Team state shared by all DSLC agents.
#[derive(Debug, Clone)]
pub struct TeamState {
    pub eta: Configuration,
    pub partition: PartitionState,
    pub belief: GaussianBelief,
    pub phi_hat: SensoryField,
    pub epoch: u32,
    pub phase: EpochPhase,
    pub pending_plan: Vec<VecDeque<VertexId>>,
}

/// Plans epoch `state.epoch`'s sampling: a greedy plan to `alpha^j * sigma0^2`,
/// split by part ownership and ordered into one tour per agent.
pub fn plan_estimation(state: &mut TeamState, cfg: &DslcConfig, g: &WeightedGraph) -> Result<SamplePlan> {
    let j = state.epoch as i32;
    let threshold = cfg.alpha.powi(j) * state.belief.prior_variance_bound();
    let plan = state.belief.plan_to_threshold(threshold)?;
    let per_agent = plan.per_agent(&state.partition);
    let mut tours = Vec::with_capacity(per_agent.len());
    for (i, points) in per_agent.iter().enumerate() {
        if points.is_empty() {
            tours.push(VecDeque::new());
            continue;
        }
        let table = induced_distances(g, state.partition.part(i))?;
        tours.push(plan_tour(&table, state.eta.get(i), points).into());
    }
    state.pending_plan = tours;
    state.phase = EpochPhase {
        tag: Phase::Estimation,
        remaining: state.pending_plan.iter().map(VecDeque::len).max().unwrap_or(0),
    };
    Ok(plan)
}

pub struct DslcPolicy {
    cfg: DslcConfig,
    phi_floor: f64,
    state: TeamState,
    buffer: Vec<(VertexId, f64)>,
    gossip: SimRng,
    log: Vec<EpochLog>,
    started: bool,
}

impl DslcPolicy {
    pub fn new(
        cfg: DslcConfig,
        belief: GaussianBelief,
        eta: Configuration,
        partition: PartitionState,
        gossip: SimRng,
    ) -> Result<Self> {
        cfg.validate()?;
        if eta.len() != partition.num_parts() {
            return Err(Error::InvalidArgument("configuration and partition sizes differ".into()));
        }
        let phi_floor = PHI_FLOOR;
        let phi_hat = field_estimate(&belief, phi_floor);
        let n = eta.len();
        Ok(DslcPolicy {
            cfg,
            phi_floor,
            state: TeamState {
                eta,
                partition,
                belief,
                phi_hat,
                epoch: 0,
                phase: EpochPhase {
                    tag: Phase::Estimation,
                    remaining: 0,
                },
                pending_plan: vec![VecDeque::new(); n],
            },
            buffer: Vec::new(),
            gossip,
            log: Vec::new(),
            started: false,
        })
    }

    pub fn with_phi_floor(mut self, floor: f64) -> Self {
        self.phi_floor = floor;
        self.state.phi_hat = field_estimate(&self.state.belief, floor);
        self
    }

    pub fn state(&self) -> &TeamState {
        &self.state
    }

    pub fn config(&self) -> &DslcConfig {
        &self.cfg
    }

    fn current_log(&mut self) -> &mut EpochLog {
        self.log.last_mut().expect("an epoch has started")
    }

    fn start_epoch(&mut self, g: &WeightedGraph) -> Result<()> {
        self.state.epoch += 1;
        let plan = plan_estimation(&mut self.state, &self.cfg, g)?;
        let threshold = self.cfg.alpha.powi(self.state.epoch as i32) * self.state.belief.prior_variance_bound();
        log::debug!(
            "epoch {}: {} samples planned for threshold {threshold:.3e}",
            self.state.epoch,
            plan.len()
        );
        self.log.push(EpochLog {
            epoch: self.state.epoch,
            threshold,
            plan_len: plan.len(),
            longest_tour: self.state.phase.remaining,
            estimation_ticks: 0,
            propagation_ticks: 0,
            coverage_budget: 0,
            coverage_ticks: 0,
            max_var_after_merge: None,
        });
        Ok(())
    }

    fn merge(&mut self) -> Result<()> {
        self.state.belief.update_batch(&self.buffer)?;
        self.buffer.clear();
        self.state.phi_hat = field_estimate(&self.state.belief, self.phi_floor);
        let max_var = self.state.belief.max_variance();
        self.current_log().max_var_after_merge = Some(max_var);
        Ok(())
    }

    fn enter_coverage(&mut self) -> Result<()> {
        if self.current_log().max_var_after_merge.is_none() {
            self.merge()?;
        }
        let log = self.current_log();
        let used = log.estimation_ticks + log.propagation_ticks;
        let j = log.epoch as usize;
        let budget = if j >= self.cfg.max_epochs && self.cfg.epoch_mode == EpochMode::Theorem {
            log::info!("epoch cap {} reached; coverage continues indefinitely", self.cfg.max_epochs);
            usize::MAX
        } else {
            epoch_coverage_length(&self.cfg, j, used)?
        };
        self.current_log().coverage_budget = budget;
        self.state.phase = EpochPhase {
            tag: Phase::Coverage,
            remaining: budget,
        };
        Ok(())
    }

    // Resolves finished or zero-length phases until one with work remains.
    fn advance(&mut self, g: &WeightedGraph) -> Result<()> {
        if !self.started {
            self.started = true;
            self.start_epoch(g)?;
        }
        loop {
            let EpochPhase { tag, remaining } = self.state.phase;
            if remaining > 0 {
                return Ok(());
            }
            match tag {
                Phase::Estimation if self.cfg.propagation_delay > 0 => {
                    self.state.phase = EpochPhase {
                        tag: Phase::Propagation,
                        remaining: self.cfg.propagation_delay,
                    };
                }
                Phase::Estimation | Phase::Propagation => self.enter_coverage()?,
                Phase::Coverage => {
                    if self.cfg.epoch_mode == EpochMode::Explicit
                        && self.state.epoch as usize >= self.cfg.explicit_lengths.len()
                    {
                        return Err(Error::EpochScheduleExhausted(self.state.epoch as usize + 1));
                    }
                    self.start_epoch(g)?;
                }
            }
        }
    }

    fn estimation_tick(&mut self, sensor: &mut Sensor) -> Result<()> {
        for (i, tour) in self.state.pending_plan.iter_mut().enumerate() {
            if let Some(v) = tour.pop_front() {
                self.state.eta.set(i, v);
                self.buffer.push((v, sensor.sample(v)));
            }
        }
        self.state.phase.remaining -= 1;
        self.current_log().estimation_ticks += 1;
        if self.state.phase.remaining == 0 && self.cfg.propagation_delay == 0 {
            self.merge()?;
        }
        Ok(())
    }

    fn propagation_tick(&mut self) -> Result<()> {
        self.state.phase.remaining -= 1;
        self.current_log().propagation_ticks += 1;
        if self.state.phase.remaining == 0 {
            self.merge()?;
        }
        Ok(())
    }

    fn coverage_tick(&mut self, g: &WeightedGraph) -> Result<()> {
        let pairs = adjacent_pairs(g, &self.state.partition);
        if pairs.is_empty() {
            // a single agent has no neighbour to gossip with; it moves to its centroid
            let c = centroid_of(g, self.state.partition.part(0), &self.state.phi_hat)?;
            self.state.eta.set(0, c);
        } else {
            let (i, j) = pairs[self.gossip.random_range(0..pairs.len())];
            let (partition, eta) =
                pairwise_step(g, &self.state.partition, &self.state.eta, i, j, &self.state.phi_hat)?;
            self.state.partition = partition;
            self.state.eta = eta;
        }
        if self.state.phase.remaining != usize::MAX {
            self.state.phase.remaining -= 1;
        }
        self.current_log().coverage_ticks += 1;
        Ok(())
    }
}

impl CoveragePolicy for DslcPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Dslc
    }

    fn tick(&mut self, env: &Environment, sensor: &mut Sensor) -> Result<TickReport> {
        let g = env.graph();
        self.advance(g)?;
        let phase = self.state.phase.tag;
        match phase {
            Phase::Estimation => self.estimation_tick(sensor)?,
            Phase::Propagation => self.propagation_tick()?,
            Phase::Coverage => self.coverage_tick(g)?,
        }
        Ok(TickReport {
            phase,
            epoch: self.state.epoch,
            max_var: self.state.belief.max_variance(),
        })
    }

    fn configuration(&self) -> &Configuration {
        &self.state.eta
    }

    fn partition(&self) -> &PartitionState {
        &self.state.partition
    }

    fn epoch_log(&self) -> &[EpochLog] {
        &self.log
    }
}
