//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use nash_spectra::{generate, sample_white_noise, Discriminator, Filter, GameState, Role, SampleBatch, SeedTag};

/// Data from the identity filter plus independent noise.
pub fn batches(n: usize, d: usize) -> (Arc<SampleBatch>, Arc<SampleBatch>) {
    let zbar = sample_white_noise(n, d, SeedTag::simple(1, Role::Data)).expect("valid sizes");
    let x = generate(&Filter::identity(d), &zbar).expect("matching d");
    let z = sample_white_noise(n, d, SeedTag::simple(1, Role::Noise)).expect("valid sizes");
    (Arc::new(x), Arc::new(z))
}

/// A deterministic non-equilibrium state with `m = d` features.
pub fn state(family: &str, n: usize, d: usize) -> GameState {
    let (x, z) = batches(n, d);
    let ramp = |k: usize| (0..d).map(|u| ((u * 7 + k * 3) % 11) as f64 / 11.0 - 0.4).collect::<Vec<_>>();
    let disc = match family {
        "real" => {
            let b = ramp(0);
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            Discriminator::real(b.into_iter().map(|v| v / norm).collect())
        }
        "complex" => Discriminator::complex((0..d).map(ramp).collect(), (0..d).map(|k| ramp(k + d)).collect()),
        _ => Discriminator::convolutional((0..d).map(ramp).collect()),
    }
    .expect("valid discriminator");
    GameState::new(Filter::new(ramp(99)).expect("finite"), disc, x, z).expect("consistent state")
}
