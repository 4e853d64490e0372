//! Seeded randomness and deterministic direction grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

pub const DEFAULT_SEED: u64 = 42;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform direction on the Euclidean unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        // Box-Muller keeps this free of a distribution crate.
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 1e-8 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// `count` nearly uniform unit directions: equally spaced angles in 2D, a
/// Fibonacci lattice in 3D, seeded random directions above that.
pub fn sphere_directions<T: Real>(n: usize, count: usize) -> Vec<Vec<T>> {
    match n {
        1 => vec![vec![T::one()], vec![-T::one()]],
        2 => (0..count)
            .map(|k| {
                let t = T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(count);
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
            (0..count)
                .map(|k| {
                    let z = T::one()
                        - T::lit(2.0) * (T::from_usize_lossy(k) + T::lit(0.5))
                            / T::from_usize_lossy(count);
                    let r = (T::one() - z * z).sqrt();
                    let phi = golden * T::from_usize_lossy(k);
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut g = rng(DEFAULT_SEED);
            (0..count)
                .map(|_| {
                    random_unit_vector(&mut g, n)
                        .into_iter()
                        .map(T::lit)
                        .collect()
                })
                .collect()
        }
    }
}
