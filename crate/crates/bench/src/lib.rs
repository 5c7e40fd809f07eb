//! Shared fixtures for the criterion benches.

use dslc_core::field::two_hotspot_components;
use dslc_core::{build_grid, gmm_field, prior_from_kernel, GaussianBelief, KernelSpec, SensoryField, WeightedGraph};

/// Unit-square grid with `side * side` vertices.
pub fn unit_grid(side: usize) -> WeightedGraph {
    build_grid(side, side, 1.0 / (side - 1) as f64).expect("side >= 2")
}

pub fn hotspot_field(g: &WeightedGraph) -> SensoryField {
    gmm_field(g, &two_hotspot_components()).expect("fixed components are valid")
}

pub fn default_prior(g: &WeightedGraph) -> GaussianBelief {
    let kernel = KernelSpec::new(1.0, 0.2).expect("valid kernel");
    prior_from_kernel(g, &kernel, 0.5, 0.01).expect("grid prior is positive definite")
}
