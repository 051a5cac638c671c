//! The Coriolis operator `𝓛[u] = ∇⊥Δ⁻¹curl(F u⊥)` with `F = −2 sinθ / m(θ)`,
//! the projection `Π` onto its kernel (zonal flows), and residual checkers for
//! the operator identities the averaging argument relies on.
//!
//! For divergence-free `u = ∇⊥ψ` the forcing reduces to
//! `curl(F u⊥) = ∇F·u = μ(θ) ∂_φψ` with `μ = 2b² / m⁴`, so in stream-function
//! form `𝓛[∇⊥ψ] = ∇⊥Δ⁻¹(μ ∂_φψ)`. On the sphere `μ ≡ 2` and `𝓛` acts on mode
//! `(l, m)` by the factor `−2im / l(l+1)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{Basis, GridScalar, Profile, SpectralScalar};
use crate::calculus::{self, VelocityField};
use crate::error::{Error, Result};

/// Tiny denominator guard for normalized residuals.
const TINY: f64 = 1e-300;

pub struct RotationOps {
    basis: Arc<Basis>,
    /// `μ(θ_j) = 2b² / m(θ_j)⁴`.
    mu: Vec<f64>,
    /// Galerkin matrices `R_m[l, l'] = Σ_j w_j μ_j g_{l,m}(θ_j) g_{l',m}(θ_j)`
    /// for `m ≥ 0`; multiplication by `μ` in coefficient space.
    mu_matrices: Vec<DMatrix<f64>>,
    /// `max_m m·λ_max(Λ^{−1/2} R_m Λ^{−1/2})`.
    frequency_factor: f64,
}

impl RotationOps {
    pub fn new(basis: Arc<Basis>) -> Self {
        let g = basis.geometry();
        let b2 = g.b * g.b;
        let mu: Vec<f64> = g.m_vals.iter().map(|m| 2.0 * b2 / m.powi(4)).collect();
        let nt = g.n_theta;
        let mu_matrices = basis
            .tables()
            .iter()
            .map(|t| {
                let n = t.n_modes();
                DMatrix::from_fn(n, n, |a, c| {
                    (0..nt)
                        .map(|j| g.quad_weights[j] * mu[j] * t.values[j * n + a] * t.values[j * n + c])
                        .sum()
                })
            })
            .collect::<Vec<DMatrix<f64>>>();
        let frequency_factor = basis
            .tables()
            .iter()
            .zip(&mu_matrices)
            .filter(|(t, _)| t.m > 0)
            .map(|(t, r)| {
                let n = t.n_modes();
                let a = DMatrix::from_fn(n, n, |i, k| r[(i, k)] / (t.eigenvalues[i] * t.eigenvalues[k]).sqrt());
                let top = a.symmetric_eigenvalues().iter().fold(0.0_f64, |x, &y| x.max(y.abs()));
                t.m as f64 * top
            })
            .fold(0.0, f64::max);
        Self { basis, mu, mu_matrices, frequency_factor }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_matrix(&self, m: usize) -> &DMatrix<f64> {
        &self.mu_matrices[m]
    }

    /// Largest frequency of the discrete linear dynamics `ζ_t = ω μ ∂_φψ`,
    /// per unit `ω`.
    pub fn linear_frequency_factor(&self) -> f64 {
        self.frequency_factor
    }

    /// `𝓛[u]` for any tangent field, by the defining formula on the grid.
    pub fn l_apply(&self, u: &VelocityField) -> Result<VelocityField> {
        let f = &self.basis.geometry().f_vals;
        let ju = u.perp();
        let forced = VelocityField { u_phi: ju.u_phi.scale_rows(f), u_theta: ju.u_theta.scale_rows(f) };
        let chi = self.basis.invert_laplacian(&calculus::curl(&self.basis, &forced)?);
        calculus::perp_grad(&self.basis, &chi)
    }

    /// Stream function `χ` of `𝓛[∇⊥ψ]`, i.e. `Δ⁻¹(μ ∂_φψ)`, via the grid.
    pub fn l_apply_streamform(&self, psi: &SpectralScalar) -> Result<SpectralScalar> {
        self.basis.check_spectral(psi)?;
        let dphi = self
            .basis
            .synthesize(psi, Profile::Value, Some(&self.mu), |m| Complex64::new(0.0, m as f64));
        Ok(self.basis.invert_laplacian(&self.basis.analysis(&dphi)?))
    }

    /// Coefficients of `μ ∂_φψ` from the Galerkin matrices. Equal to the grid
    /// route up to rounding, and much cheaper inside time stepping.
    pub fn coriolis_forcing(&self, psi: &SpectralScalar) -> SpectralScalar {
        let big = self.basis.l_max() as i64;
        let mut out = self.basis.zeros();
        for m in -big..=big {
            if m == 0 {
                continue;
            }
            let r = &self.mu_matrices[m.unsigned_abs() as usize];
            let src = psi.block(m);
            let dst = out.block_mut(m);
            let n = src.len();
            let f = Complex64::new(0.0, m as f64);
            for a in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..n {
                    acc += src[c] * r[(a, c)];
                }
                dst[a] = acc * f;
            }
        }
        out
    }

    /// `Π u`: the zonal mean of `u_φ` along each parallel, as a pure `ê_φ`
    /// field. This is the L²-orthogonal projection onto zonal flows.
    pub fn null_projection(&self, u: &VelocityField) -> Result<VelocityField> {
        self.basis.check_grid(&u.u_phi)?;
        self.basis.check_grid(&u.u_theta)?;
        let np = u.u_phi.n_phi;
        let mut u_phi = self.basis.grid_zeros();
        for (src, dst) in u.u_phi.values.chunks_exact(np).zip(u_phi.values.chunks_exact_mut(np)) {
            let mean = src.iter().sum::<f64>() / np as f64;
            dst.iter_mut().for_each(|v| *v = mean);
        }
        Ok(VelocityField { u_phi, u_theta: self.basis.grid_zeros() })
    }

    /// `Π` on stream functions of divergence-free fields: the `m = 0` part.
    pub fn null_projection_stream(&self, psi: &SpectralScalar) -> SpectralScalar {
        psi.zonal_part()
    }

    /// `(‖(id − Π)u‖_{Hᵏ}, ‖𝓛[u]‖_{H^{k+2}})` for `u = ∇⊥ψ`.
    pub fn key_estimate_gap(&self, psi: &SpectralScalar, k: i32) -> Result<(f64, f64)> {
        let lhs = calculus::hk_norm_velocity(&self.basis, &psi.non_zonal_part(), k)?;
        let chi = self.l_apply_streamform(psi)?;
        let rhs = calculus::hk_norm_velocity(&self.basis, &chi, k + 2)?;
        Ok((lhs, rhs))
    }

    /// `|⟨Δʲu, Δʲ𝓛[u]⟩| / (‖Δʲu‖ ‖Δʲ𝓛[u]‖)` for `u = ∇⊥ψ`, with
    /// `Δʲ∇⊥ψ := ∇⊥Δʲψ`.
    pub fn commutation_residual(&self, psi: &SpectralScalar, j: i32) -> Result<f64> {
        if j < 0 {
            return Err(Error::InvalidParameter(format!("power j must be non-negative, got {j}")));
        }
        let chi = self.l_apply_streamform(psi)?;
        Ok(normalized_velocity_inner(&self.basis, psi, &chi, j))
    }

    /// `(num, den)` with `num = ‖Δʲcurl(∇_u u) − ∇_u(Δʲ curl u)‖_{L²}` and
    /// `den = ‖u‖²_{H^{2j+1}}`, using `curl(∇_u u) = u·∇ζ`.
    pub fn advection_commutator_residual(&self, psi: &SpectralScalar, j: i32) -> Result<(f64, f64)> {
        if j < 1 {
            return Err(Error::InvalidParameter(format!("power j must be at least 1, got {j}")));
        }
        let basis = &self.basis;
        let zeta = basis.apply_laplacian(psi);
        let mut lap_zeta = zeta.clone();
        let mut lap_adv = calculus::jacobian(basis, psi, &zeta)?;
        for _ in 0..j {
            lap_zeta = basis.apply_laplacian(&lap_zeta);
            lap_adv = basis.apply_laplacian(&lap_adv);
        }
        let adv_lap = calculus::jacobian(basis, psi, &lap_zeta)?;
        let num = (&lap_adv - &adv_lap).norm();
        let den = calculus::hk_norm_velocity(basis, psi, 2 * j + 1)?.powi(2);
        Ok((num, den))
    }

    /// Grid `F(θ)` as a field, mostly for diagnostics.
    pub fn coriolis_field(&self) -> GridScalar {
        let g = self.basis.geometry();
        GridScalar::from_fn(g, |t, _| g.coriolis_profile(t))
    }
}

/// `|Σ Λ^{2j+1} Re(conj a · b)| / √(Σ Λ^{2j+1}|a|² · Σ Λ^{2j+1}|b|²)`.
pub(crate) fn normalized_velocity_inner(basis: &Basis, a: &SpectralScalar, b: &SpectralScalar, j: i32) -> f64 {
    let p = 2 * j + 1;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (((l, m), x), y) in basis.layout().modes().zip(a.coeffs()).zip(b.coeffs()) {
        let w = basis.eigenvalue(l, m).powi(p);
        ab += w * (x.conj() * y).re;
        aa += w * x.norm_sqr();
        bb += w * y.norm_sqr();
    }
    ab.abs() / ((aa * bb).sqrt() + TINY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    #[test]
    fn mu_is_two_on_the_sphere_and_positive_otherwise() {
        let ops = RotationOps::new(Arc::new(Basis::new(Geometry::new(1.0, 16, 32).unwrap(), 6).unwrap()));
        assert!(ops.mu().iter().all(|m| (m - 2.0).abs() < 1e-14));
        let ops = RotationOps::new(Arc::new(Basis::new(Geometry::new(0.7, 16, 32).unwrap(), 6).unwrap()));
        assert!(ops.mu().iter().all(|&m| m > 0.0 && (2.0 * 0.49 - 1e-12..=2.0 / 0.49 + 1e-12).contains(&m)));
    }

    #[test]
    fn zonal_stream_function_is_annihilated() {
        let ops = RotationOps::new(Arc::new(Basis::new(Geometry::new(0.8, 24, 48).unwrap(), 8).unwrap()));
        let psi = SpectralScalar::real_mode(8, 3, 0, Complex64::new(1.0, 0.0));
        assert!(ops.l_apply_streamform(&psi).unwrap().max_abs() < 1e-14);
        assert_eq!(ops.key_estimate_gap(&psi, 0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn sphere_single_mode_factor() {
        let ops = RotationOps::new(Arc::new(Basis::new(Geometry::new(1.0, 24, 48).unwrap(), 8).unwrap()));
        // Fastest sphere mode is (1, 1): 2·1 / 2.
        assert!((ops.linear_frequency_factor() - 1.0).abs() < 1e-12);
        let psi = SpectralScalar::real_mode(8, 2, 1, Complex64::new(1.0, 0.0));
        let chi = ops.l_apply_streamform(&psi).unwrap();
        let want = Complex64::new(0.0, -2.0 / 6.0);
        assert!((chi.get(2, 1) - want).norm() < 1e-13);
        let (lhs, rhs) = ops.key_estimate_gap(&psi, 0).unwrap();
        assert!((lhs / rhs - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_powers_rejected() {
        let ops = RotationOps::new(Arc::new(Basis::new(Geometry::new(1.0, 16, 32).unwrap(), 6).unwrap()));
        let psi = SpectralScalar::real_mode(6, 2, 1, Complex64::new(1.0, 0.0));
        assert!(ops.commutation_residual(&psi, -1).is_err());
        assert!(ops.advection_commutator_residual(&psi, 0).is_err());
    }
}
