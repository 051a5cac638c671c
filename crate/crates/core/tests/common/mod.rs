#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zonal_core::{Basis, Geometry, SpectralScalar, VelocityField};

pub fn basis(b: f64, l_max: usize, n_theta: usize, n_phi: usize) -> Basis {
    Basis::new(Geometry::new(b, n_theta, n_phi).unwrap(), l_max).unwrap()
}

/// Real field with O(1) random coefficients on every mode up to `l_cut`.
pub fn random_stream(basis: &Basis, l_cut: usize, seed: u64) -> SpectralScalar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l_max = basis.l_max();
    let mut psi = basis.zeros();
    for m in 0..=l_cut {
        for l in m.max(1)..=l_cut {
            let c = if m == 0 {
                Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
            } else {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            };
            psi.add_assign_scaled(1.0, &SpectralScalar::real_mode(l_max, l, m, c));
        }
    }
    psi
}

/// `grad φ + perp_grad ψ` for independent random `φ`, `ψ`.
pub fn random_velocity(basis: &Basis, l_cut: usize, seed: u64) -> VelocityField {
    let g = zonal_core::calculus::grad(basis, &random_stream(basis, l_cut, 2 * seed)).unwrap();
    let p = zonal_core::calculus::perp_grad(basis, &random_stream(basis, l_cut, 2 * seed + 1)).unwrap();
    g.axpy(1.0, &p)
}

pub fn rel(a: &SpectralScalar, b: &SpectralScalar) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
