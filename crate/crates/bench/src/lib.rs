//! Shared fixtures for the benchmarks.

use ordfactor::model::OrdinalFactorModel;
use ordfactor::priors::{PriorConfig, ThresholdPriorConfig};
use ordfactor::sampler::LogDensity;
use ordfactor::simgen::{generate_dataset, PopulationParams};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-factor, twelve-item model on `n` simulated respondents.
pub fn model(n: usize, thresholds: ThresholdPriorConfig) -> OrdinalFactorModel {
    let pop = PopulationParams::study1();
    let spec = pop.model_spec().expect("valid population");
    let data = generate_dataset(&pop, n, 1).expect("simulated data");
    let priors = PriorConfig::new(thresholds);
    let resolved = priors.resolve(&spec.items).expect("valid priors");
    OrdinalFactorModel::new(spec, data, resolved, priors.structural).expect("valid model")
}

/// A reproducible unconstrained point near the origin.
pub fn point(model: &OrdinalFactorModel, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..model.dim()).map(|_| rng.random_range(-0.5..0.5)).collect()
}
