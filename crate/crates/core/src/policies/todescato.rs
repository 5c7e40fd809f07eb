//! Randomised explore-or-cover baseline.
//!
//! Each iteration every agent flips a coin with success probability
//! `p = min(1, max_var / sigma0^2)`. Explorers jump to the highest-variance
//! vertex of their cell and sample it; the others move to their cell's
//! centroid under the current estimate. Samples update the belief at once and
//! cells are then recomputed as the Voronoi partition of the new positions.

use rand::Rng;

use super::{field_estimate, CoveragePolicy, Environment, PolicyKind, Sensor, TickReport};
use crate::belief::GaussianBelief;
use crate::error::Result;
use crate::field::{SensoryField, PHI_FLOOR};
use crate::metrics::Phase;
use crate::partition::{centroid_of, voronoi_of, Configuration, PartitionState};
use crate::rng::SimRng;

pub struct TodescatoPolicy {
    belief: GaussianBelief,
    phi_hat: SensoryField,
    phi_floor: f64,
    eta: Configuration,
    partition: PartitionState,
    coin: SimRng,
    last_explorers: usize,
}

impl TodescatoPolicy {
    pub fn new(belief: GaussianBelief, eta: Configuration, partition: PartitionState, coin: SimRng) -> Self {
        let phi_hat = field_estimate(&belief, PHI_FLOOR);
        TodescatoPolicy {
            belief,
            phi_hat,
            phi_floor: PHI_FLOOR,
            eta,
            partition,
            coin,
            last_explorers: 0,
        }
    }

    pub fn with_phi_floor(mut self, floor: f64) -> Self {
        self.phi_floor = floor;
        self.phi_hat = field_estimate(&self.belief, floor);
        self
    }

    pub fn belief(&self) -> &GaussianBelief {
        &self.belief
    }

    /// Agents that explored in the most recent iteration.
    pub fn last_explorers(&self) -> usize {
        self.last_explorers
    }

    pub fn exploration_probability(&self) -> f64 {
        (self.belief.max_variance() / self.belief.prior_variance_bound()).min(1.0)
    }
}

impl CoveragePolicy for TodescatoPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Todescato
    }

    fn tick(&mut self, env: &Environment, sensor: &mut Sensor) -> Result<TickReport> {
        let g = env.graph();
        let p = self.exploration_probability();
        let variances = self.belief.variances();
        let mut next = self.eta.clone();
        let mut samples = Vec::new();
        for i in 0..self.eta.len() {
            let part = self.partition.part(i);
            if self.coin.random::<f64>() < p {
                let mut target = part[0];
                for &v in &part[1..] {
                    if variances[v.0] > variances[target.0] {
                        target = v;
                    }
                }
                next.set(i, target);
                samples.push((target, sensor.sample(target)));
            } else {
                next.set(i, centroid_of(g, part, &self.phi_hat)?);
            }
        }
        self.last_explorers = samples.len();
        for &(v, y) in &samples {
            self.belief.posterior_update(v, y)?;
        }
        if !samples.is_empty() {
            self.phi_hat = field_estimate(&self.belief, self.phi_floor);
        }
        self.partition = voronoi_of(g, env.dist(), &next)?;
        self.eta = next;
        Ok(TickReport {
            phase: if samples.is_empty() { Phase::Coverage } else { Phase::Estimation },
            epoch: 0,
            max_var: self.belief.max_variance(),
        })
    }

    fn configuration(&self) -> &Configuration {
        &self.eta
    }

    fn partition(&self) -> &PartitionState {
        &self.partition
    }
}
