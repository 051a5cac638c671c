//! Laplace–Beltrami eigenbasis of the ellipsoid and the spectral transforms.
//!
//! At fixed zonal wavenumber `m` the θ-profile of an eigenfunction solves
//!
//! ```text
//! (1/(cosθ m(θ))) d/dθ[(cosθ/m(θ)) dY/dθ] − (m²/cos²θ) Y = −Λ Y
//! ```
//!
//! which is solved here by a Ritz–Galerkin method: the trial space at wavenumber
//! `m` is spanned by the normalized associated Legendre functions
//! `P̄_n^m(sinθ)`, `n = m, …, n_theta − 1`, and the stiffness and mass forms are
//! assembled with the grid's own area quadrature. This yields a
//! symmetric-definite generalized eigenproblem whose eigenvectors are exactly
//! orthonormal under the discrete inner product. At `b = 1` the trial functions
//! are the spherical harmonics themselves and the spectrum is `l(l+1)`.
//!
//! Full harmonics are `Y_{l,m}(θ, φ) = g_{l,|m|}(θ) e^{imφ} / √(2π)`, each of
//! unit `L²(𝔼²)` norm. The `l = 0` constant is excluded from every
//! coefficient array; field means are reported separately.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::Geometry;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Coefficient layout for degree truncation `l_max` with `m_max = l_max`.
///
/// Blocks are ordered by `m = −l_max, …, l_max`; inside a block `l` runs from
/// `max(|m|, 1)` to `l_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub l_max: usize,
}

impl Layout {
    pub fn new(l_max: usize) -> Self {
        Self { l_max }
    }

    pub fn m_max(&self) -> usize {
        self.l_max
    }

    pub fn len(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1) - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn l_min(m: i64) -> usize {
        (m.unsigned_abs() as usize).max(1)
    }

    pub fn block_len(&self, m: i64) -> usize {
        let lo = Self::l_min(m);
        if lo > self.l_max {
            0
        } else {
            self.l_max - lo + 1
        }
    }

    pub fn offset(&self, m: i64) -> usize {
        let big = self.l_max;
        if m < 0 {
            let a = m.unsigned_abs() as usize;
            (big - a) * (big - a + 1) / 2
        } else {
            let m = m as usize;
            let base = big * (big + 1) / 2;
            if m == 0 {
                base
            } else {
                // m = 0 contributes l_max entries, then m' = 1..m−1.
                base + big + (m - 1) * (big + 1) - (m - 1) * m / 2
            }
        }
    }

    /// Flat index of `(l, m)`; `None` outside the truncation.
    pub fn index(&self, l: usize, m: i64) -> Option<usize> {
        let lo = Self::l_min(m);
        if l < lo || l > self.l_max {
            return None;
        }
        Some(self.offset(m) + l - lo)
    }

    /// Every stored `(l, m)` in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        let big = self.l_max as i64;
        (-big..=big).flat_map(move |m| (Self::l_min(m)..=self.l_max).map(move |l| (l, m)))
    }
}

/// A zero-mean scalar field in coefficient space.
///
/// Coefficients are kept for both signs of `m`. A real field satisfies
/// `ψ_{l,−m} = conj(ψ_{l,m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScalar {
    layout: Layout,
    coeffs: Vec<Complex64>,
}

impl SpectralScalar {
    pub fn zeros(l_max: usize) -> Self {
        let layout = Layout::new(l_max);
        Self { layout, coeffs: vec![Complex64::new(0.0, 0.0); layout.len()] }
    }

    pub fn from_coeffs(l_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let layout = Layout::new(l_max);
        if coeffs.len() != layout.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coefficients", layout.len()),
                got: format!("{}", coeffs.len()),
            });
        }
        Ok(Self { layout, coeffs })
    }

    /// Real field made of one harmonic pair: `c·Y_{l,m} + conj(c)·Y_{l,−m}`
    /// (just `Re(c)·Y_{l,0}` for `m = 0`).
    pub fn real_mode(l_max: usize, l: usize, m: usize, c: Complex64) -> Self {
        let mut s = Self::zeros(l_max);
        if m == 0 {
            s.set(l, 0, Complex64::new(c.re, 0.0));
        } else {
            s.set(l, m as i64, c);
            s.set(l, -(m as i64), c.conj());
        }
        s
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn l_max(&self) -> usize {
        self.layout.l_max
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        self.layout
            .index(l, m)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Panics if `(l, m)` is outside the truncation.
    pub fn set(&mut self, l: usize, m: i64, v: Complex64) {
        let i = self
            .layout
            .index(l, m)
            .unwrap_or_else(|| panic!("mode ({l}, {m}) outside l_max = {}", self.layout.l_max));
        self.coeffs[i] = v;
    }

    pub fn block(&self, m: i64) -> &[Complex64] {
        let o = self.layout.offset(m);
        &self.coeffs[o..o + self.layout.block_len(m)]
    }

    pub fn block_mut(&mut self, m: i64) -> &mut [Complex64] {
        let o = self.layout.offset(m);
        let n = self.layout.block_len(m);
        &mut self.coeffs[o..o + n]
    }

    /// `√(Σ |ψ|²)` over all stored coefficients (the L² norm of the field).
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Re Σ conj(a) b`, the L² inner product of the two real fields.
    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Largest `|ψ_{l,−m} − conj(ψ_{l,m})|`.
    pub fn reality_defect(&self) -> f64 {
        let big = self.layout.l_max as i64;
        let mut worst: f64 = 0.0;
        for m in 0..=big {
            for (p, n) in self.block(m).iter().zip(self.block(-m)) {
                worst = worst.max((n - p.conj()).norm());
            }
        }
        worst
    }

    /// Projects onto real fields by symmetrizing the `±m` pairs.
    pub fn enforce_reality(&mut self) {
        let big = self.layout.l_max as i64;
        for m in 0..=big {
            let pos: Vec<Complex64> = self.block(m).to_vec();
            let neg: Vec<Complex64> = self.block(-m).to_vec();
            let sym: Vec<Complex64> = pos.iter().zip(&neg).map(|(p, n)| (p + n.conj()) * 0.5).collect();
            self.block_mut(m).copy_from_slice(&sym);
            let conj: Vec<Complex64> = sym.iter().map(|c| c.conj()).collect();
            self.block_mut(-m).copy_from_slice(&conj);
        }
    }

    /// The `m = 0` part.
    pub fn zonal_part(&self) -> Self {
        let mut out = Self::zeros(self.layout.l_max);
        out.block_mut(0).copy_from_slice(self.block(0));
        out
    }

    /// Everything except the `m = 0` part.
    pub fn non_zonal_part(&self) -> Self {
        let mut out = self.clone();
        out.block_mut(0).iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        out
    }

    pub fn map_modes(&self, mut f: impl FnMut(usize, i64, Complex64) -> Complex64) -> Self {
        let coeffs = self
            .layout
            .modes()
            .zip(&self.coeffs)
            .map(|((l, m), c)| f(l, m, *c))
            .collect();
        Self { layout: self.layout, coeffs }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { layout: self.layout, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        assert_eq!(self.layout, other.layout, "layout mismatch");
        Self {
            layout: self.layout,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + y * a).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, a: f64, other: &Self) {
        assert_eq!(self.layout, other.layout, "layout mismatch");
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    /// Exact check of `ψ_{l,−m} = conj(ψ_{l,m})`.
    pub fn is_conj_symmetric(&self) -> bool {
        let big = self.layout.l_max as i64;
        (0..=big).all(|m| {
            let (pos, neg) = (self.block(m), self.block(-m));
            if m == 0 {
                pos.iter().all(|c| c.im == 0.0)
            } else {
                pos.iter().zip(neg).all(|(p, n)| *p == n.conj())
            }
        })
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl std::ops::Add for &SpectralScalar {
    type Output = SpectralScalar;
    fn add(self, rhs: Self) -> SpectralScalar {
        self.axpy(1.0, rhs)
    }
}

impl std::ops::Sub for &SpectralScalar {
    type Output = SpectralScalar;
    fn sub(self, rhs: Self) -> SpectralScalar {
        self.axpy(-1.0, rhs)
    }
}

/// Real values on the `(θ_j, φ_i)` grid, row-major `[j * n_phi + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScalar {
    pub n_theta: usize,
    pub n_phi: usize,
    pub values: Vec<f64>,
}

impl GridScalar {
    pub fn zeros(n_theta: usize, n_phi: usize) -> Self {
        Self { n_theta, n_phi, values: vec![0.0; n_theta * n_phi] }
    }

    pub fn from_fn(geom: &Geometry, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(geom.n_points());
        for &t in &geom.theta_nodes {
            for &p in &geom.phi_nodes {
                values.push(f(t, p));
            }
        }
        Self { n_theta: geom.n_theta, n_phi: geom.n_phi, values }
    }

    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.n_phi + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_phi..(j + 1) * self.n_phi]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.n_theta, self.n_phi), (other.n_theta, other.n_phi));
        Self {
            n_theta: self.n_theta,
            n_phi: self.n_phi,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { n_theta: self.n_theta, n_phi: self.n_phi, values: self.values.iter().map(|v| f(*v)).collect() }
    }

    /// Multiplies row `j` by `factors[j]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Self {
        let mut out = self.clone();
        for (row, f) in out.values.chunks_exact_mut(self.n_phi).zip(factors) {
            row.iter_mut().for_each(|v| *v *= f);
        }
        out
    }
}

/// Which per-mode latitude table a transform uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Profile {
    /// `g(θ_j)`
    Value,
    /// `g'(θ_j)`
    DTheta,
    /// `g(θ_j) / cosθ_j`
    OverCos,
}

/// Eigenpairs at one non-negative zonal wavenumber.
#[derive(Debug, Clone)]
pub struct ModeTable {
    pub m: usize,
    /// `Λ_{l,m}` for `l = max(m,1), …, l_max`.
    pub eigenvalues: Vec<f64>,
    /// `g_{l,m}(θ_j)`, row-major `[j * n_modes + k]`.
    pub values: Vec<f64>,
    /// `g'_{l,m}(θ_j)`, same layout.
    pub dtheta: Vec<f64>,
    /// `g_{l,m}(θ_j) / cosθ_j`.
    pub over_cos: Vec<f64>,
}

impl ModeTable {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    fn table(&self, p: Profile) -> &[f64] {
        match p {
            Profile::Value => &self.values,
            Profile::DTheta => &self.dtheta,
            Profile::OverCos => &self.over_cos,
        }
    }
}

/// The eigenbasis plus everything needed for transforms.
pub struct Basis {
    geometry: Geometry,
    l_max: usize,
    tables: Vec<ModeTable>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Basis")
            .field("b", &self.geometry.b)
            .field("l_max", &self.l_max)
            .field("n_theta", &self.geometry.n_theta)
            .field("n_phi", &self.geometry.n_phi)
            .finish()
    }
}

impl Basis {
    /// Solves the latitude eigenproblems for `m = 0, …, l_max`.
    ///
    /// Requires `l_max ≥ 2`, `n_theta ≥ 2·l_max` and `n_phi > 2·l_max` (the
    /// latter so that every stored wavenumber is resolved by the φ grid).
    pub fn new(geometry: Geometry, l_max: usize) -> Result<Self> {
        if l_max < 2 {
            return Err(Error::InvalidParameter(format!("l_max must be at least 2, got {l_max}")));
        }
        if geometry.n_theta < 2 * l_max {
            return Err(Error::InvalidParameter(format!(
                "n_theta = {} is below the resolution rule 2·l_max = {}",
                geometry.n_theta,
                2 * l_max
            )));
        }
        if geometry.n_phi <= 2 * l_max {
            return Err(Error::InvalidParameter(format!(
                "n_phi = {} cannot resolve zonal wavenumber {l_max}",
                geometry.n_phi
            )));
        }
        let tables = (0..=l_max)
            .into_par_iter()
            .map(|m| solve_wavenumber(&geometry, l_max, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(geometry, l_max, tables))
    }

    /// Rebuilds a basis from precomputed tables (used by deserialization).
    pub(crate) fn from_tables(geometry: Geometry, l_max: usize, tables: Vec<ModeTable>) -> Self {
        Self::assemble(geometry, l_max, tables)
    }

    fn assemble(geometry: Geometry, l_max: usize, tables: Vec<ModeTable>) -> Self {
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(geometry.n_phi);
        let fft_inverse = planner.plan_fft_inverse(geometry.n_phi);
        Self { geometry, l_max, tables, fft_forward, fft_inverse }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn m_max(&self) -> usize {
        self.l_max
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.l_max)
    }

    pub fn tables(&self) -> &[ModeTable] {
        &self.tables
    }

    pub fn table(&self, m: i64) -> &ModeTable {
        &self.tables[m.unsigned_abs() as usize]
    }

    pub fn eigenvalue(&self, l: usize, m: i64) -> f64 {
        let t = self.table(m);
        t.eigenvalues[l - Layout::l_min(m)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.tables.iter().flat_map(|t| t.eigenvalues.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    pub fn zeros(&self) -> SpectralScalar {
        SpectralScalar::zeros(self.l_max)
    }

    pub fn grid_zeros(&self) -> GridScalar {
        GridScalar::zeros(self.geometry.n_theta, self.geometry.n_phi)
    }

    pub(crate) fn check_spectral(&self, s: &SpectralScalar) -> Result<()> {
        if s.l_max() != self.l_max {
            return Err(Error::ShapeMismatch {
                expected: format!("l_max = {}", self.l_max),
                got: format!("l_max = {}", s.l_max()),
            });
        }
        Ok(())
    }

    pub(crate) fn check_grid(&self, g: &GridScalar) -> Result<()> {
        let want = (self.geometry.n_theta, self.geometry.n_phi);
        if (g.n_theta, g.n_phi) != want || g.values.len() != want.0 * want.1 {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} grid", want.0, want.1),
                got: format!("{}x{} grid ({} values)", g.n_theta, g.n_phi, g.values.len()),
            });
        }
        Ok(())
    }

    /// Coefficients `ψ_{l,m} = ⟨f, Y_{l,m}⟩` by quadrature; the mean is dropped.
    pub fn analysis(&self, field: &GridScalar) -> Result<SpectralScalar> {
        Ok(self.analysis_with_mean(field)?.0)
    }

    /// Like [`Basis::analysis`] but also returns the area mean of the field.
    pub fn analysis_with_mean(&self, field: &GridScalar) -> Result<(SpectralScalar, f64)> {
        self.check_grid(field)?;
        let spectra = self.row_spectra(&[&field.values]);
        let mut out = self.zeros();
        self.project(&spectra[0], Profile::Value, &self.geometry.quad_weights, |_| Complex64::new(1.0, 0.0), &mut out);
        let mean = self.geometry.integrate(&field.values) / self.geometry.area();
        Ok((out, mean))
    }

    /// Pointwise `Σ ψ_{l,m} Y_{l,m}` (real part).
    pub fn synthesis(&self, coeffs: &SpectralScalar) -> GridScalar {
        self.synthesize(coeffs, Profile::Value, None, |_| Complex64::new(1.0, 0.0))
    }

    /// Multiplies every coefficient by `−Λ_{l,m}`.
    pub fn apply_laplacian(&self, coeffs: &SpectralScalar) -> SpectralScalar {
        coeffs.map_modes(|l, m, c| c * (-self.eigenvalue(l, m)))
    }

    /// Divides every coefficient by `−Λ_{l,m}`.
    pub fn invert_laplacian(&self, coeffs: &SpectralScalar) -> SpectralScalar {
        coeffs.map_modes(|l, m, c| c / (-self.eigenvalue(l, m)))
    }

    /// `coeffs · Λ^p`, mode by mode.
    pub fn scale_by_eigenvalue_power(&self, coeffs: &SpectralScalar, p: f64) -> SpectralScalar {
        coeffs.map_modes(|l, m, c| c * self.eigenvalue(l, m).powf(p))
    }

    /// FFT bins `(k(m), k(−m))` for `m = −m_max..=m_max`.
    fn fft_bins(&self) -> Vec<(usize, usize)> {
        let np = self.geometry.n_phi as i64;
        let mm = self.l_max as i64;
        (-mm..=mm).map(|m| (m.rem_euclid(np) as usize, (-m).rem_euclid(np) as usize)).collect()
    }

    /// Per-row Fourier coefficients `∫ f e^{−imφ} dφ / √(2π)` for
    /// `m = −m_max..=m_max`, flattened `[j * (2 m_max + 1) + (m + m_max)]`.
    ///
    /// Fields are processed in pairs, packed into one complex FFT.
    pub(crate) fn row_spectra(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let nt = self.geometry.n_theta;
        let np = self.geometry.n_phi;
        let width = 2 * self.l_max + 1;
        let scale = self.geometry.dphi() * INV_SQRT_2PI;
        let mut out = vec![vec![Complex64::new(0.0, 0.0); nt * width]; fields.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); np];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft_forward.get_inplace_scratch_len()];
        let bins = self.fft_bins();
        for pair in (0..fields.len()).step_by(2) {
            let second = pair + 1 < fields.len();
            for j in 0..nt {
                let a = &fields[pair][j * np..(j + 1) * np];
                if second {
                    let b = &fields[pair + 1][j * np..(j + 1) * np];
                    for i in 0..np {
                        buf[i] = Complex64::new(a[i], b[i]);
                    }
                } else {
                    for i in 0..np {
                        buf[i] = Complex64::new(a[i], 0.0);
                    }
                }
                self.fft_forward.process_with_scratch(&mut buf, &mut scratch);
                let row = j * width;
                for (col, &(k, kn)) in bins.iter().enumerate() {
                    let z = buf[k];
                    let zc = buf[kn].conj();
                    if second {
                        out[pair][row + col] = (z + zc) * 0.5 * scale;
                        out[pair + 1][row + col] = (z - zc) * Complex64::new(0.0, -0.5) * scale;
                    } else {
                        out[pair][row + col] = z * scale;
                    }
                }
            }
        }
        out
    }

    /// Accumulates `Σ_j weights[j] · spectra[j, m] · mult(m) · table_{l,m}(θ_j)`
    /// into `out`.
    ///
    /// `spectra` must come from real fields and `mult(−m) = conj(mult(m))`, so
    /// only `m ≥ 0` is summed and the negative blocks are mirrored.
    pub(crate) fn project(
        &self,
        spectra: &[Complex64],
        profile: Profile,
        weights: &[f64],
        mult: impl Fn(i64) -> Complex64,
        out: &mut SpectralScalar,
    ) {
        let nt = self.geometry.n_theta;
        let mm = self.l_max as i64;
        let width = 2 * self.l_max + 1;
        for m in 0..=mm {
            let table = self.table(m);
            let n = table.n_modes();
            let tab = table.table(profile);
            let f = mult(m);
            debug_assert!((mult(-m) - f.conj()).norm() <= 1e-15 * f.norm());
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..nt {
                let a = spectra[j * width + (m + mm) as usize] * weights[j] * f;
                let row = &tab[j * n..(j + 1) * n];
                for (c, g) in acc.iter_mut().zip(row) {
                    *c += a * g;
                }
            }
            for (c, a) in out.block_mut(m).iter_mut().zip(&acc) {
                *c += a;
            }
            if m > 0 {
                for (c, a) in out.block_mut(-m).iter_mut().zip(&acc) {
                    *c += a.conj();
                }
            }
        }
    }

    /// Latitude sums `F_m(θ_j) = mult(m) Σ_l ψ_{l,m} table_{l,m}(θ_j) / √(2π)`,
    /// laid out like [`Basis::row_spectra`]. Requires `mult(−m) = conj(mult(m))`.
    pub(crate) fn profile_sums(
        &self,
        coeffs: &SpectralScalar,
        profile: Profile,
        mult: impl Fn(i64) -> Complex64,
    ) -> Vec<Complex64> {
        let nt = self.geometry.n_theta;
        let mm = self.l_max as i64;
        let width = 2 * self.l_max + 1;
        let mut out = vec![Complex64::new(0.0, 0.0); nt * width];
        // Coefficients of real fields give F_{−m} = conj(F_m).
        let real = coeffs.is_conj_symmetric();
        let m_lo = if real { 0 } else { -mm };
        for m in m_lo..=mm {
            let table = self.table(m);
            let n = table.n_modes();
            let tab = table.table(profile);
            let f = mult(m) * INV_SQRT_2PI;
            let block = coeffs.block(m);
            for j in 0..nt {
                let row = &tab[j * n..(j + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, g) in block.iter().zip(row) {
                    acc += c * g;
                }
                let v = acc * f;
                out[j * width + (m + mm) as usize] = v;
                if real && m > 0 {
                    out[j * width + (mm - m) as usize] = v.conj();
                }
            }
        }
        out
    }

    /// Real grid fields from latitude sums; processed in pairs like
    /// [`Basis::row_spectra`].
    pub(crate) fn grids_from_sums(&self, sums: &[&[Complex64]]) -> Vec<GridScalar> {
        let nt = self.geometry.n_theta;
        let np = self.geometry.n_phi;
        let width = 2 * self.l_max + 1;
        let mut out: Vec<GridScalar> = sums.iter().map(|_| self.grid_zeros()).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); np];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft_inverse.get_inplace_scratch_len()];
        let bins = self.fft_bins();
        let i_unit = Complex64::new(0.0, 1.0);
        for pair in (0..sums.len()).step_by(2) {
            let second = pair + 1 < sums.len();
            for j in 0..nt {
                buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                let row = j * width;
                // Re Σ_m F_m e^{imφ} has the Hermitian spectrum (F_k + conj F_{−k}) / 2.
                for (col, &(k, kn)) in bins.iter().enumerate() {
                    let fa = sums[pair][row + col] * 0.5;
                    let (mut ha_k, mut ha_kn) = (fa, fa.conj());
                    if second {
                        let fb = sums[pair + 1][row + col] * 0.5;
                        ha_k += i_unit * fb;
                        ha_kn += i_unit * fb.conj();
                    }
                    buf[k] += ha_k;
                    buf[kn] += ha_kn;
                }
                self.fft_inverse.process_with_scratch(&mut buf, &mut scratch);
                let ra = &mut out[pair].values[j * np..(j + 1) * np];
                for i in 0..np {
                    ra[i] = buf[i].re;
                }
                if second {
                    let rb = &mut out[pair + 1].values[j * np..(j + 1) * np];
                    for i in 0..np {
                        rb[i] = buf[i].im;
                    }
                }
            }
        }
        out
    }

    pub(crate) fn synthesize(
        &self,
        coeffs: &SpectralScalar,
        profile: Profile,
        row_scale: Option<&[f64]>,
        mult: impl Fn(i64) -> Complex64,
    ) -> GridScalar {
        let sums = self.profile_sums(coeffs, profile, mult);
        let g = self.grids_from_sums(&[&sums]).pop().expect("one grid");
        match row_scale {
            Some(f) => g.scale_rows(f),
            None => g,
        }
    }
}

/// Normalized associated Legendre functions `P̄_n^m(s)` for `n = m..=n_top`
/// (unit `L²[−1, 1]` norm, no Condon–Shortley phase) together with
/// `dP̄_n^m/dθ` where `s = sinθ`, `c = cosθ > 0`.
fn legendre_column(m: usize, n_top: usize, s: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let count = n_top + 1 - m;
    let mut p = vec![0.0; count];
    let mut dp = vec![0.0; count];
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=m {
        let kf = k as f64;
        pmm *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * c;
    }
    p[0] = pmm;
    if count > 1 {
        p[1] = (2.0 * m as f64 + 3.0).sqrt() * s * pmm;
    }
    let mf = m as f64;
    for idx in 2..count {
        let n = (m + idx) as f64;
        let a = ((4.0 * n * n - 1.0) / (n * n - mf * mf)).sqrt();
        let bcoef = (((n - 1.0) * (n - 1.0) - mf * mf) / (4.0 * (n - 1.0) * (n - 1.0) - 1.0)).sqrt();
        p[idx] = a * (s * p[idx - 1] - bcoef * p[idx - 2]);
    }
    // (1 − s²) dP̄_n/ds = −n s P̄_n + √((2n+1)(n²−m²)/(2n−1)) P̄_{n−1}, and d/dθ = c d/ds.
    for idx in 0..count {
        let n = (m + idx) as f64;
        let prev = if idx > 0 {
            ((2.0 * n + 1.0) * (n * n - mf * mf) / (2.0 * n - 1.0)).sqrt() * p[idx - 1]
        } else {
            0.0
        };
        dp[idx] = (-n * s * p[idx] + prev) / c;
    }
    (p, dp)
}

fn solve_wavenumber(geom: &Geometry, l_max: usize, m: usize) -> Result<ModeTable> {
    let nt = geom.n_theta;
    let n_top = nt - 1;
    let n_trial = n_top + 1 - m;
    let l_lo = m.max(1);
    let n_keep = l_max + 1 - l_lo;
    // The constant (Λ = 0) is the first m = 0 eigenpair; it is dropped.
    let skip = usize::from(m == 0);
    if n_trial < n_keep + skip {
        return Err(Error::EigenSolver { m, reason: "trial space smaller than requested modes".into() });
    }

    let mut tv = DMatrix::<f64>::zeros(nt, n_trial);
    let mut td = DMatrix::<f64>::zeros(nt, n_trial);
    for j in 0..nt {
        let (p, dp) = legendre_column(m, n_top, geom.sin_vals[j], geom.cos_vals[j]);
        for k in 0..n_trial {
            tv[(j, k)] = p[k];
            td[(j, k)] = dp[k];
        }
    }

    let mf = m as f64;
    let w = &geom.quad_weights;
    let mass_w = DVector::from_iterator(nt, w.iter().copied());
    let pot_w = DVector::from_iterator(
        nt,
        (0..nt).map(|j| mf * mf * w[j] / (geom.cos_vals[j] * geom.cos_vals[j])),
    );
    let grad_w = DVector::from_iterator(nt, (0..nt).map(|j| w[j] / (geom.m_vals[j] * geom.m_vals[j])));

    let weighted = |t: &DMatrix<f64>, d: &DVector<f64>| {
        let mut x = t.clone();
        for (j, mut row) in x.row_iter_mut().enumerate() {
            row *= d[j];
        }
        x
    };
    let mass = tv.transpose() * weighted(&tv, &mass_w);
    let stiff = tv.transpose() * weighted(&tv, &pot_w) + td.transpose() * weighted(&td, &grad_w);

    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::EigenSolver { m, reason: "mass matrix is not positive definite".into() })?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&stiff)
        .ok_or_else(|| Error::EigenSolver { m, reason: "singular Cholesky factor".into() })?;
    let reduced = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::EigenSolver { m, reason: "singular Cholesky factor".into() })?;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(reduced, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenSolver { m, reason: "symmetric eigensolver did not converge".into() })?;

    let mut order: Vec<usize> = (0..n_trial).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    if m == 0 {
        let lam0 = eig.eigenvalues[order[0]];
        if lam0.abs() > 1e-8 {
            return Err(Error::EigenSolver { m, reason: format!("constant mode has eigenvalue {lam0}") });
        }
    }

    let lt = l.transpose();
    let mut eigenvalues = Vec::with_capacity(n_keep);
    let mut values = vec![0.0; nt * n_keep];
    let mut dtheta = vec![0.0; nt * n_keep];
    for (k, &idx) in order.iter().skip(skip).take(n_keep).enumerate() {
        let lam = eig.eigenvalues[idx];
        if !lam.is_finite() || lam <= 0.0 {
            return Err(Error::EigenSolver { m, reason: format!("non-positive eigenvalue {lam}") });
        }
        let y = eig.eigenvectors.column(idx).into_owned();
        let c = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::EigenSolver { m, reason: "singular Cholesky factor".into() })?;
        let g = &tv * &c;
        let dg = &td * &c;
        let sign = if g[0] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..nt {
            values[j * n_keep + k] = sign * g[j];
            dtheta[j * n_keep + k] = sign * dg[j];
        }
        eigenvalues.push(lam);
    }
    if eigenvalues.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::EigenSolver { m, reason: "eigenvalue table is not strictly increasing".into() });
    }
    Ok(make_table(geom, m, eigenvalues, values, dtheta))
}

pub(crate) fn make_table(
    geom: &Geometry,
    m: usize,
    eigenvalues: Vec<f64>,
    values: Vec<f64>,
    dtheta: Vec<f64>,
) -> ModeTable {
    let n = eigenvalues.len();
    let over_cos = values
        .chunks_exact(n.max(1))
        .zip(&geom.cos_vals)
        .flat_map(|(row, c)| row.iter().map(move |g| g / c))
        .collect();
    ModeTable { m, eigenvalues, values, dtheta, over_cos }
}
