//! Lloyd iterations with perfect knowledge of the field.

use super::{CoveragePolicy, Environment, PolicyKind, Sensor, TickReport};
use crate::error::Result;
use crate::field::SensoryField;
use crate::metrics::Phase;
use crate::partition::{lloyd_step, Configuration, PartitionState};

pub struct CortesPolicy {
    phi: SensoryField,
    eta: Configuration,
    partition: PartitionState,
}

impl CortesPolicy {
    pub fn new(phi: SensoryField, eta: Configuration, partition: PartitionState) -> Self {
        CortesPolicy { phi, eta, partition }
    }
}

impl CoveragePolicy for CortesPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Cortes
    }

    fn tick(&mut self, env: &Environment, _sensor: &mut Sensor) -> Result<TickReport> {
        let out = lloyd_step(env.graph(), env.dist(), &self.partition, &self.eta, &self.phi)?;
        self.partition = out.partition;
        self.eta = out.configuration;
        Ok(TickReport {
            phase: Phase::Coverage,
            epoch: 0,
            max_var: 0.0,
        })
    }

    fn configuration(&self) -> &Configuration {
        &self.eta
    }

    fn partition(&self) -> &PartitionState {
        &self.partition
    }
}
