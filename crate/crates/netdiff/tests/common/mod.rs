//! Shared helpers for the integration suites.

use netdiff::{ConcreteInterval, InputRegion, Network};
use rand::Rng;

/// A random fully-connected network with uniform weights scaled by
/// fan-in, so activations stay in a workable range at any depth.
pub fn random_network(rng: &mut impl Rng, sizes: &[usize]) -> Network {
    let mut weights = Vec::with_capacity(sizes.len() - 1);
    let mut biases = Vec::with_capacity(sizes.len() - 1);
    for k in 0..sizes.len() - 1 {
        let a = (3.0 / sizes[k] as f64).sqrt();
        let m: Vec<Vec<f64>> = (0..sizes[k])
            .map(|_| (0..sizes[k + 1]).map(|_| rng.gen_range(-a..a)).collect())
            .collect();
        weights.push(m);
        biases.push((0..sizes[k + 1]).map(|_| rng.gen_range(-0.1..0.1)).collect());
    }
    Network::new(sizes.to_vec(), weights, biases).unwrap()
}

/// A random box with per-dimension widths in `widths`.
pub fn random_region(rng: &mut impl Rng, dim: usize, centers: f64, widths: f64) -> InputRegion {
    InputRegion::new(
        (0..dim)
            .map(|_| {
                let c = rng.gen_range(-centers..centers);
                let w = rng.gen_range(0.0..widths);
                ConcreteInterval::new(c - w / 2.0, c + w / 2.0)
            })
            .collect(),
    )
}

/// A uniform sample from the region.
pub fn sample_point(rng: &mut impl Rng, region: &InputRegion) -> Vec<f64> {
    region
        .bounds
        .iter()
        .map(|b| {
            if b.lo < b.hi {
                rng.gen_range(b.lo..=b.hi)
            } else {
                b.lo
            }
        })
        .collect()
}
