//! The biaxial ellipsoid `x² + y² + z²/b² = 1` parameterized by latitude
//! `θ ∈ (−π/2, π/2)` and longitude `φ`:
//!
//! ```text
//! X(θ, φ) = (cosθ cosφ, cosθ sinφ, b sinθ)
//! ```
//!
//! Scale factors are `h_φ = cosθ` and `h_θ = m(θ) = √(sin²θ + b²cos²θ)`, so
//! the area element is `dA = cosθ m(θ) dθ dφ`. All public vector quantities
//! use physical (unit-frame) components `(u_φ, u_θ)`.
//!
//! The latitude grid is Gauss–Legendre in `s = sinθ`; since `ds = cosθ dθ`
//! the area weight of node `j` is the Gauss weight times `m(θ_j)`. With
//! `n` nodes the bare Gauss weights integrate polynomials in `s` of degree
//! `≤ 2n − 1` exactly; at `b = 1` the area weights coincide with them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MIN_N_THETA: usize = 8;
pub const MIN_N_PHI: usize = 8;

/// `m(θ) = √(sin²θ + b²cos²θ)`.
pub fn metric_m(b: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    (s * s + b * b * c * c).sqrt()
}

/// Coriolis profile `F(θ) = −2 sinθ / m(θ)`.
pub fn coriolis_profile(b: f64, theta: f64) -> f64 {
    -2.0 * theta.sin() / metric_m(b, theta)
}

/// `∂_θ F = −2 b² cosθ / m(θ)³`.
pub fn coriolis_gradient(b: f64, theta: f64) -> f64 {
    let m = metric_m(b, theta);
    -2.0 * b * b * theta.cos() / (m * m * m)
}

/// Gauss–Legendre nodes (ascending) and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // i counts from the largest root downwards.
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Grid, quadrature and cached metric arrays for one ellipsoid.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub b: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Ascending latitudes, strictly inside `(−π/2, π/2)`.
    pub theta_nodes: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    /// `sinθ_j`, the Gauss–Legendre nodes.
    pub sin_vals: Vec<f64>,
    pub cos_vals: Vec<f64>,
    /// Bare Gauss–Legendre weights in `s = sinθ`.
    pub gauss_weights: Vec<f64>,
    /// Area weights: `∫ f dA ≈ Σ_j quad_weights[j] Σ_i f(θ_j, φ_i) · 2π/n_phi`.
    pub quad_weights: Vec<f64>,
    pub m_vals: Vec<f64>,
    pub f_vals: Vec<f64>,
    pub df_vals: Vec<f64>,
}

impl Geometry {
    pub fn new(b: f64, n_theta: usize, n_phi: usize) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "flattening b must lie in (0, 1], got {b}"
            )));
        }
        if n_theta < MIN_N_THETA {
            return Err(Error::InvalidParameter(format!(
                "n_theta must be at least {MIN_N_THETA}, got {n_theta}"
            )));
        }
        if n_phi < MIN_N_PHI || !n_phi.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "n_phi must be even and at least {MIN_N_PHI}, got {n_phi}"
            )));
        }

        let (sin_vals, gauss_weights) = gauss_legendre(n_theta);
        let theta_nodes: Vec<f64> = sin_vals.iter().map(|s| s.asin()).collect();
        let cos_vals: Vec<f64> = sin_vals.iter().map(|s| (1.0 - s * s).sqrt()).collect();
        let m_vals: Vec<f64> = sin_vals
            .iter()
            .zip(&cos_vals)
            .map(|(s, c)| (s * s + b * b * c * c).sqrt())
            .collect();
        let quad_weights = gauss_weights.iter().zip(&m_vals).map(|(w, m)| w * m).collect();
        let f_vals = sin_vals.iter().zip(&m_vals).map(|(s, m)| -2.0 * s / m).collect();
        let df_vals = cos_vals
            .iter()
            .zip(&m_vals)
            .map(|(c, m)| -2.0 * b * b * c / (m * m * m))
            .collect();
        let phi_nodes = (0..n_phi).map(|i| 2.0 * PI * i as f64 / n_phi as f64).collect();

        Ok(Self {
            b,
            n_theta,
            n_phi,
            theta_nodes,
            phi_nodes,
            sin_vals,
            cos_vals,
            gauss_weights,
            quad_weights,
            m_vals,
            f_vals,
            df_vals,
        })
    }

    pub fn dphi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    pub fn n_points(&self) -> usize {
        self.n_theta * self.n_phi
    }

    /// Quadrature surface area.
    pub fn area(&self) -> f64 {
        2.0 * PI * self.quad_weights.iter().sum::<f64>()
    }

    /// Closed-form area of the oblate spheroid with semi-axes (1, 1, b).
    pub fn exact_area(&self) -> f64 {
        let b = self.b;
        if b == 1.0 {
            return 4.0 * PI;
        }
        let e = (1.0 - b * b).sqrt();
        2.0 * PI * (1.0 + b * b / e * e.atanh())
    }

    /// Quadrature of a grid function stored row-major `[j * n_phi + i]`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let dphi = self.dphi();
        self.quad_weights
            .iter()
            .zip(values.chunks_exact(self.n_phi))
            .map(|(w, row)| w * row.iter().sum::<f64>())
            .sum::<f64>()
            * dphi
    }

    pub fn metric_m(&self, theta: f64) -> f64 {
        metric_m(self.b, theta)
    }

    pub fn coriolis_profile(&self, theta: f64) -> f64 {
        coriolis_profile(self.b, theta)
    }

    pub fn coriolis_gradient(&self, theta: f64) -> f64 {
        coriolis_gradient(self.b, theta)
    }

    pub fn embed(&self, theta: f64, phi: f64) -> Embedding {
        embed(self.b, theta, phi)
    }

    pub fn components_to_cartesian(&self, v_phi: f64, v_theta: f64, theta: f64, phi: f64) -> [f64; 3] {
        components_to_cartesian(self.b, v_phi, v_theta, theta, phi)
    }

    pub fn cartesian_to_components(&self, v: [f64; 3], theta: f64, phi: f64) -> (f64, f64) {
        cartesian_to_components(self.b, v, theta, phi)
    }
}

/// A surface point with its unnormalized coordinate frame and unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Embedding {
    pub point: [f64; 3],
    /// `∂X/∂φ / cosθ`; already unit length.
    pub e_phi: [f64; 3],
    /// `∂X/∂θ`, of length `m(θ)`.
    pub e_theta: [f64; 3],
    /// Outward unit normal; `(ê_φ, ê_θ, normal)` is right-handed.
    pub normal: [f64; 3],
}

pub fn embed(b: f64, theta: f64, phi: f64) -> Embedding {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let m = metric_m(b, theta);
    Embedding {
        point: [ct * cp, ct * sp, b * st],
        e_phi: [-sp, cp, 0.0],
        e_theta: [-st * cp, -st * sp, b * ct],
        normal: [b * ct * cp / m, b * ct * sp / m, st / m],
    }
}

fn unit_frame(b: f64, theta: f64, phi: f64) -> ([f64; 3], [f64; 3]) {
    let e = embed(b, theta, phi);
    let m = metric_m(b, theta);
    let et = e.e_theta;
    (e.e_phi, [et[0] / m, et[1] / m, et[2] / m])
}

/// Physical tangent components to a Cartesian vector.
pub fn components_to_cartesian(b: f64, v_phi: f64, v_theta: f64, theta: f64, phi: f64) -> [f64; 3] {
    let (ep, et) = unit_frame(b, theta, phi);
    [
        v_phi * ep[0] + v_theta * et[0],
        v_phi * ep[1] + v_theta * et[1],
        v_phi * ep[2] + v_theta * et[2],
    ]
}

/// Tangential projection of a Cartesian vector, returned as `(v_φ, v_θ)`.
pub fn cartesian_to_components(b: f64, v: [f64; 3], theta: f64, phi: f64) -> (f64, f64) {
    let (ep, et) = unit_frame(b, theta, phi);
    (dot(v, ep), dot(v, et))
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
