#![allow(dead_code)]

use nalgebra::{Matrix4, Vector3};
use qsteer::numerics::C64;
use qsteer::qstate::{random_density, DensityMatrix};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};

pub fn sphere<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::from(UnitSphere.sample(rng))
}

pub fn ball<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    sphere(rng) * rng.random_range(0.0f64..1.0).cbrt()
}

/// Mixture of `n` random product states with mixed local Bloch vectors.
pub fn product_mixture<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityMatrix {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = w.iter().sum();
    let terms: Vec<(f64, DensityMatrix)> = w
        .iter()
        .map(|wi| (wi / total, DensityMatrix::product(&ball(rng), &ball(rng)).expect("product state")))
        .collect();
    DensityMatrix::mixture(&terms).expect("mixture")
}

/// Test ensemble indexed by `k`: Ginibre states of every rank, the same
/// mixed with white noise, and low-rank product mixtures.
pub fn ensemble_state<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DensityMatrix {
    let rank = k % 4 + 1;
    match (k / 4) % 3 {
        0 => random_density(rank, rng),
        1 => {
            let w: f64 = rng.random();
            DensityMatrix::mixture(&[(w, random_density(rank, rng)), (1.0 - w, DensityMatrix::maximally_mixed())]).expect("mixture")
        }
        _ => product_mixture(rank, rng),
    }
}

/// Ginibre state of rank `k % 4 + 1`, mixed with white noise for every
/// other block of four.
pub fn random_state<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DensityMatrix {
    let rho = random_density(k % 4 + 1, rng);
    if (k / 4).is_multiple_of(2) {
        return rho;
    }
    let w: f64 = rng.random();
    DensityMatrix::mixture(&[(w, rho), (1.0 - w, DensityMatrix::maximally_mixed())]).expect("mixture")
}

pub fn random_complex4<R: Rng + ?Sized>(rng: &mut R) -> Matrix4<C64> {
    Matrix4::from_fn(|_, _| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
}

/// Separable state for the decomposition search: either a white-noise
/// mixture that passes PPT or a product mixture of `2..=4` terms.
pub fn separable_state<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DensityMatrix {
    loop {
        let rho = if k.is_multiple_of(2) {
            let w: f64 = rng.random_range(0.0..0.7);
            DensityMatrix::mixture(&[(w, random_density(rng.random_range(1..=4), rng)), (1.0 - w, DensityMatrix::maximally_mixed())])
                .expect("mixture")
        } else {
            product_mixture(k % 3 + 2, rng)
        };
        if !qsteer::separability::is_entangled_ppt(&rho).expect("ppt") {
            return rho;
        }
    }
}
