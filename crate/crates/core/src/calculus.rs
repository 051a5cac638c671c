//! Vector calculus on the ellipsoid.
//!
//! Orientation: `perp_grad ψ = (∂_θψ / m, −∂_φψ / cosθ)` in `(φ, θ)` physical
//! components, which is the rotation `J(a_φ, a_θ) = (a_θ, −a_φ)` applied to
//! `grad ψ`. With this choice `curl ∘ perp_grad = Δ` and
//! `div u = curl(J u)`.
//!
//! `curl` and `div` are evaluated in weak form against the basis,
//!
//! ```text
//! ⟨curl u, Y⟩ =  ∫ (u_θ ∂_φȲ / cosθ − u_φ ∂_θȲ / m) dA
//! ⟨div u,  Y⟩ = −∫ (u_φ ∂_φȲ / cosθ + u_θ ∂_θȲ / m) dA
//! ```
//!
//! so they need only grid values of `u` and the stored mode tables. Both
//! integrate to zero over the closed surface, so the discarded `l = 0`
//! coefficient vanishes identically. There is no harmonic part in the
//! Hodge split because the ellipsoid has genus zero.

use num_complex::Complex64;

use crate::basis::{Basis, GridScalar, Profile, SpectralScalar};
use crate::error::{Error, Result};

/// A tangent vector field in physical components on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub u_phi: GridScalar,
    pub u_theta: GridScalar,
}

impl VelocityField {
    pub fn zeros(basis: &Basis) -> Self {
        Self { u_phi: basis.grid_zeros(), u_theta: basis.grid_zeros() }
    }

    pub fn max_abs(&self) -> f64 {
        self.u_phi.max_abs().max(self.u_theta.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.u_phi.is_finite() && self.u_theta.is_finite()
    }

    /// Pointwise `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self {
            u_phi: self.u_phi.zip_map(&other.u_phi, |x, y| x + a * y),
            u_theta: self.u_theta.zip_map(&other.u_theta, |x, y| x + a * y),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { u_phi: self.u_phi.map(|x| a * x), u_theta: self.u_theta.map(|x| a * x) }
    }

    /// `J u = (u_θ, −u_φ)`.
    pub fn perp(&self) -> Self {
        Self { u_phi: self.u_theta.clone(), u_theta: self.u_phi.map(|x| -x) }
    }
}

fn check_field(basis: &Basis, u: &VelocityField) -> Result<()> {
    basis.check_grid(&u.u_phi)?;
    basis.check_grid(&u.u_theta)
}

fn im(m: i64) -> Complex64 {
    Complex64::new(0.0, m as f64)
}

fn one(_: i64) -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn inv(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| 1.0 / x).collect()
}

/// Grid values of `(∂_φψ / cosθ, ∂_θψ / m)`.
fn gradient_grids(basis: &Basis, psi: &SpectralScalar) -> (GridScalar, GridScalar) {
    let g = basis.geometry();
    let dphi = basis.profile_sums(psi, Profile::OverCos, im);
    let dtheta = basis.profile_sums(psi, Profile::DTheta, one);
    let mut grids = basis.grids_from_sums(&[&dphi, &dtheta]);
    let u_theta = grids.pop().expect("two grids").scale_rows(&inv(&g.m_vals));
    let u_phi = grids.pop().expect("two grids");
    (u_phi, u_theta)
}

/// `grad ψ = (∂_φψ / cosθ) ê_φ + (∂_θψ / m) ê_θ`.
pub fn grad(basis: &Basis, psi: &SpectralScalar) -> Result<VelocityField> {
    basis.check_spectral(psi)?;
    let (u_phi, u_theta) = gradient_grids(basis, psi);
    Ok(VelocityField { u_phi, u_theta })
}

/// `∇⊥ψ = (∂_θψ / m) ê_φ − (∂_φψ / cosθ) ê_θ`.
pub fn perp_grad(basis: &Basis, psi: &SpectralScalar) -> Result<VelocityField> {
    basis.check_spectral(psi)?;
    let (gp, gt) = gradient_grids(basis, psi);
    Ok(VelocityField { u_phi: gt, u_theta: gp.map(|x| -x) })
}

/// Scalar curl `−(1/cosθ) ∂_φu_θ + (1/(cosθ m)) ∂_θ(cosθ u_φ)`.
pub fn curl(basis: &Basis, u: &VelocityField) -> Result<SpectralScalar> {
    check_field(basis, u)?;
    let g = basis.geometry();
    let spectra = basis.row_spectra(&[&u.u_phi.values, &u.u_theta.values]);
    let mut out = basis.zeros();
    basis.project(&spectra[1], Profile::OverCos, &g.quad_weights, |m| -im(m), &mut out);
    basis.project(&spectra[0], Profile::DTheta, &g.gauss_weights, |_| Complex64::new(-1.0, 0.0), &mut out);
    Ok(out)
}

/// `div u = (1/(cosθ m)) [m ∂_φu_φ + ∂_θ(cosθ u_θ)]`.
pub fn div(basis: &Basis, u: &VelocityField) -> Result<SpectralScalar> {
    check_field(basis, u)?;
    let g = basis.geometry();
    let spectra = basis.row_spectra(&[&u.u_phi.values, &u.u_theta.values]);
    let mut out = basis.zeros();
    basis.project(&spectra[0], Profile::OverCos, &g.quad_weights, im, &mut out);
    basis.project(&spectra[1], Profile::DTheta, &g.gauss_weights, |_| Complex64::new(-1.0, 0.0), &mut out);
    Ok(out)
}

/// Hodge potentials `(Φ, Ψ)` with `u = grad Φ + perp_grad Ψ`.
pub fn hodge_decompose(basis: &Basis, u: &VelocityField) -> Result<(SpectralScalar, SpectralScalar)> {
    let phi = basis.invert_laplacian(&div(basis, u)?);
    let psi = basis.invert_laplacian(&curl(basis, u)?);
    Ok((phi, psi))
}

/// Covariant advection `∇_u u`, computed through the embedding.
///
/// Each Cartesian component `v_i` of `u` is a scalar on the surface; it is
/// differentiated along `u` pseudospectrally and the resulting ambient
/// vector `Σ (u·∇v_i) e_i` is projected back onto the tangent plane. This is
/// a slow, independent path used to cross-check the vorticity form.
pub fn advect(basis: &Basis, u: &VelocityField) -> Result<VelocityField> {
    check_field(basis, u)?;
    let geom = basis.geometry();
    let (nt, np) = (geom.n_theta, geom.n_phi);
    let mut cart = [basis.grid_zeros(), basis.grid_zeros(), basis.grid_zeros()];
    for j in 0..nt {
        for i in 0..np {
            let v = geom.components_to_cartesian(
                u.u_phi.at(j, i),
                u.u_theta.at(j, i),
                geom.theta_nodes[j],
                geom.phi_nodes[i],
            );
            for (c, x) in cart.iter_mut().zip(v) {
                c.values[j * np + i] = x;
            }
        }
    }
    let mut deriv = Vec::with_capacity(3);
    for c in &cart {
        let gv = grad(basis, &basis.analysis(c)?)?;
        let d: Vec<f64> = (0..nt * np)
            .map(|k| u.u_phi.values[k] * gv.u_phi.values[k] + u.u_theta.values[k] * gv.u_theta.values[k])
            .collect();
        deriv.push(d);
    }
    let mut out = VelocityField::zeros(basis);
    for j in 0..nt {
        for i in 0..np {
            let k = j * np + i;
            let a = [deriv[0][k], deriv[1][k], deriv[2][k]];
            let (ap, at) = geom.cartesian_to_components(a, geom.theta_nodes[j], geom.phi_nodes[i]);
            out.u_phi.values[k] = ap;
            out.u_theta.values[k] = at;
        }
    }
    Ok(out)
}

/// Checks the product-dealiasing contract: `n_phi > 3 m_max` and
/// `2 n_theta ≥ 3 l_max`.
pub fn check_product_resolution(basis: &Basis) -> Result<()> {
    let g = basis.geometry();
    if g.n_phi <= 3 * basis.m_max() {
        return Err(Error::Resolution(format!(
            "n_phi = {} must exceed 3·m_max = {} for dealiased products",
            g.n_phi,
            3 * basis.m_max()
        )));
    }
    if 2 * g.n_theta < 3 * basis.l_max() {
        return Err(Error::Resolution(format!(
            "n_theta = {} must be at least 1.5·l_max = {}",
            g.n_theta,
            1.5 * basis.l_max() as f64
        )));
    }
    Ok(())
}

/// Grid values of `u·∇q` with `u = ∇⊥ψ`, i.e.
/// `(1/(cosθ m)) (∂_θψ ∂_φq − ∂_φψ ∂_θq)`.
pub fn jacobian_grid(basis: &Basis, psi: &SpectralScalar, q: &SpectralScalar) -> Result<GridScalar> {
    basis.check_spectral(psi)?;
    basis.check_spectral(q)?;
    check_product_resolution(basis)?;
    let g = basis.geometry();
    let sums = [
        basis.profile_sums(psi, Profile::OverCos, im),
        basis.profile_sums(psi, Profile::DTheta, one),
        basis.profile_sums(q, Profile::OverCos, im),
        basis.profile_sums(q, Profile::DTheta, one),
    ];
    let grids = basis.grids_from_sums(&[&sums[0], &sums[1], &sums[2], &sums[3]]);
    let np = g.n_phi;
    let mut out = basis.grid_zeros();
    let [psi_phi, psi_theta, q_phi, q_theta] = [0, 1, 2, 3].map(|i| grids[i].values.chunks_exact(np));
    let rows = out.values.chunks_exact_mut(np).zip(psi_phi.zip(psi_theta)).zip(q_phi.zip(q_theta));
    for (j, ((dst, (pp, pt)), (qp, qt))) in rows.enumerate() {
        let inv_m = 1.0 / g.m_vals[j];
        for i in 0..np {
            // (∂_θψ/m)(∂_φq/cosθ) − (∂_φψ/cosθ)(∂_θq/m)
            dst[i] = (pt[i] * qp[i] - pp[i] * qt[i]) * inv_m;
        }
    }
    Ok(out)
}

/// Dealiased coefficients of `u·∇q` for `u = ∇⊥ψ`.
pub fn jacobian(basis: &Basis, psi: &SpectralScalar, q: &SpectralScalar) -> Result<SpectralScalar> {
    basis.analysis(&jacobian_grid(basis, psi, q)?)
}

/// Quadrature `∫ a b dA` of two grid scalars.
pub fn l2_inner_grid(basis: &Basis, a: &GridScalar, b: &GridScalar) -> Result<f64> {
    basis.check_grid(a)?;
    basis.check_grid(b)?;
    let prod: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
    Ok(basis.geometry().integrate(&prod))
}

/// Quadrature `∫ u·v dA` of two tangent fields.
pub fn l2_inner_velocity(basis: &Basis, u: &VelocityField, v: &VelocityField) -> Result<f64> {
    Ok(l2_inner_grid(basis, &u.u_phi, &v.u_phi)? + l2_inner_grid(basis, &u.u_theta, &v.u_theta)?)
}

pub fn l2_norm_velocity(basis: &Basis, u: &VelocityField) -> Result<f64> {
    Ok(l2_inner_velocity(basis, u, u)?.max(0.0).sqrt())
}

/// `‖ψ‖_{Hᵏ} = √(Σ Λᵏ |ψ_{l,m}|²)`.
pub fn hk_norm_scalar(basis: &Basis, psi: &SpectralScalar, k: i32) -> Result<f64> {
    spectral_sum(basis, psi, k, 0)
}

/// `‖∇⊥ψ‖_{Hᵏ} = √(Σ Λ^{k+1} |ψ_{l,m}|²)`.
pub fn hk_norm_velocity(basis: &Basis, psi: &SpectralScalar, k: i32) -> Result<f64> {
    spectral_sum(basis, psi, k, 1)
}

fn spectral_sum(basis: &Basis, psi: &SpectralScalar, k: i32, shift: i32) -> Result<f64> {
    if k < 0 {
        return Err(Error::InvalidParameter(format!("Sobolev order must be non-negative, got {k}")));
    }
    basis.check_spectral(psi)?;
    let p = k + shift;
    let total: f64 = basis
        .layout()
        .modes()
        .zip(psi.coeffs())
        .map(|((l, m), c)| basis.eigenvalue(l, m).powi(p) * c.norm_sqr())
        .sum();
    Ok(total.sqrt())
}

/// Pointwise dot product of a tangent field with itself, `|u|²`.
pub fn speed_squared(u: &VelocityField) -> GridScalar {
    u.u_phi.zip_map(&u.u_theta, |a, b| a * a + b * b)
}
