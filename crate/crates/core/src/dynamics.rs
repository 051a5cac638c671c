//! Rotating Euler flow in vorticity–stream form,
//!
//! ```text
//! ∂_t ζ = −u·∇ζ + ω μ(θ) ∂_φψ,   ζ = Δψ,   u = ∇⊥ψ,
//! ```
//!
//! which is the curl of `∂_t u + ∇_u u + ∇p = ω 𝓛-forcing`. Pressure drops
//! out. The state also carries the trapezoidal integral of `ψ` in time, so
//! the time-averaged velocity is `∇⊥(∫ψ dt / t)`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{Basis, SpectralScalar};
use crate::calculus::{self, VelocityField};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::rotation::RotationOps;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Seeded coefficients with `|ψ_{l,m}| ∝ Λ^{−(k+1)/2} / l` and random
    /// phases, for `l ≤ l_cut` (default `l_max`).
    RandomBandLimited { l_cut: Option<usize> },
    /// One real harmonic pair `(l, ±m)`.
    SingleMode { l: usize, m: usize },
    /// Random `m = 0` coefficients with the same spectral slope.
    Zonal { l_cut: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub b: f64,
    pub omega: f64,
    pub l_max: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub dt: TimeStep,
    pub t_final: f64,
    pub initial_condition: InitialCondition,
    /// Target `M₀ = ‖u₀‖_{Hᵏ}`.
    pub m0: f64,
    /// Sobolev order `k` of the initial-data norm and the monitored norm.
    pub k: i32,
    pub seed: u64,
    /// Record diagnostics every this many steps (the final step is always
    /// recorded).
    pub diag_every: usize,
    /// Allowed relative energy drift per unit time; steers the automatic step.
    pub energy_tol: f64,
    pub cfl: f64,
    /// Exponential spectral filter applied after each step. Off by default.
    pub filter: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            b: 0.9,
            omega: 0.0,
            l_max: 21,
            n_theta: 64,
            n_phi: 128,
            dt: TimeStep::Auto,
            t_final: 1.0,
            initial_condition: InitialCondition::RandomBandLimited { l_cut: None },
            m0: 1.0,
            k: 3,
            seed: 1,
            diag_every: 10,
            energy_tol: 1e-6,
            cfl: 0.5,
            filter: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Config(s));
        if !(self.b > 0.0 && self.b <= 1.0) {
            return bad(format!("b must lie in (0, 1], got {}", self.b));
        }
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return bad(format!("omega must be finite and non-negative, got {}", self.omega));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if !(self.m0 > 0.0) {
            return bad(format!("M0 must be positive, got {}", self.m0));
        }
        if self.k < 0 {
            return bad(format!("k must be non-negative, got {}", self.k));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.energy_tol > 0.0) || !(self.cfl > 0.0) {
            return bad("energy_tol and cfl must be positive".into());
        }
        if self.diag_every == 0 {
            return bad("diag_every must be at least 1".into());
        }
        match self.initial_condition {
            InitialCondition::SingleMode { l, m } => {
                if l == 0 || m > l || l > self.l_max {
                    return bad(format!("single mode ({l}, {m}) outside 1 ≤ l ≤ l_max, m ≤ l"));
                }
            }
            InitialCondition::RandomBandLimited { l_cut: Some(c) } | InitialCondition::Zonal { l_cut: Some(c) }
                if c == 0 || c > self.l_max =>
            {
                return bad(format!("l_cut = {c} outside 1..=l_max"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn build_basis(&self) -> Result<Basis> {
        Basis::new(Geometry::new(self.b, self.n_theta, self.n_phi)?, self.l_max)
    }
}

/// Integration state; owned by one integrator at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub zeta: SpectralScalar,
    pub t: f64,
    /// Trapezoidal `∫₀ᵗ ψ dt`.
    pub psi_integral: SpectralScalar,
    pub step_count: u64,
}

impl SolverState {
    pub fn new(zeta: SpectralScalar) -> Self {
        let psi_integral = SpectralScalar::zeros(zeta.l_max());
        Self { zeta, t: 0.0, psi_integral, step_count: 0 }
    }

    pub fn stream(&self, basis: &Basis) -> SpectralScalar {
        basis.invert_laplacian(&self.zeta)
    }
}

/// `dζ/dt = −J(ψ, ζ) + ω μ ∂_φψ`.
pub fn tendency(rot: &RotationOps, zeta: &SpectralScalar, omega: f64) -> Result<SpectralScalar> {
    let basis = rot.basis();
    let psi = basis.invert_laplacian(zeta);
    let mut out = calculus::jacobian(basis, &psi, zeta)?.scale(-1.0);
    if omega != 0.0 {
        out.add_assign_scaled(omega, &rot.coriolis_forcing(&psi));
    }
    Ok(out)
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_rk4(rot: &RotationOps, state: &SolverState, omega: f64, dt: f64) -> Result<SolverState> {
    let z = &state.zeta;
    let k1 = tendency(rot, z, omega)?;
    let k2 = tendency(rot, &z.axpy(0.5 * dt, &k1), omega)?;
    let k3 = tendency(rot, &z.axpy(0.5 * dt, &k2), omega)?;
    let k4 = tendency(rot, &z.axpy(dt, &k3), omega)?;
    let mut zeta = z.clone();
    zeta.add_assign_scaled(dt / 6.0, &k1);
    zeta.add_assign_scaled(dt / 3.0, &k2);
    zeta.add_assign_scaled(dt / 3.0, &k3);
    zeta.add_assign_scaled(dt / 6.0, &k4);
    let step = state.step_count + 1;
    let t = state.t + dt;
    if !zeta.is_finite() {
        return Err(Error::NonFinite { t, step });
    }
    let basis = rot.basis();
    let mut psi_integral = state.psi_integral.clone();
    psi_integral.add_assign_scaled(0.5 * dt, &basis.invert_laplacian(z));
    psi_integral.add_assign_scaled(0.5 * dt, &basis.invert_laplacian(&zeta));
    Ok(SolverState { zeta, t, psi_integral, step_count: step })
}

/// `‖u‖²_{L²} = Σ Λ |ψ|²`.
pub fn energy(basis: &Basis, state: &SolverState) -> f64 {
    spectral_moment(basis, &state.zeta, -1)
}

/// `‖ζ‖²_{L²} = Σ Λ² |ψ|²`.
pub fn enstrophy(basis: &Basis, state: &SolverState) -> f64 {
    spectral_moment(basis, &state.zeta, 0)
}

/// `Σ Λ^p |ζ|²`.
fn spectral_moment(basis: &Basis, zeta: &SpectralScalar, p: i32) -> f64 {
    basis
        .layout()
        .modes()
        .zip(zeta.coeffs())
        .map(|((l, m), c)| basis.eigenvalue(l, m).powi(p) * c.norm_sqr())
        .sum()
}

/// `∫ζ² − 2ω∫ζF`, which is `∫(ζ − ωF)²` less the constant `ω²∫F²`.
///
/// Away from the sphere this, not `∫ζ²`, is the invariant of the rotating
/// flow: `ζ − ωF` is carried by `u`, while `∫ζ²` exchanges with `∫ζF`.
pub fn absolute_enstrophy(rot: &RotationOps, state: &SolverState, omega: f64) -> Result<f64> {
    let basis = rot.basis();
    let f_hat = basis.analysis(&rot.coriolis_field())?;
    Ok(enstrophy(basis, state) - 2.0 * omega * state.zeta.dot(&f_hat))
}

/// `‖Π u‖² / ‖u‖²` for the current flow.
pub fn zonal_fraction(basis: &Basis, state: &SolverState) -> f64 {
    let total = energy(basis, state);
    if total == 0.0 {
        return 1.0;
    }
    let z = state.zeta.zonal_part();
    spectral_moment(basis, &z, -1) / total
}

/// Stream function of `ū(t) = (1/t) ∫₀ᵗ u dt`.
pub fn time_average_stream(state: &SolverState) -> Result<SpectralScalar> {
    if !(state.t > 0.0) {
        return Err(Error::InvalidParameter("time average needs t > 0".into()));
    }
    Ok(state.psi_integral.scale(1.0 / state.t))
}

/// `ū(t) = ∇⊥(∫₀ᵗ ψ dt / t)`.
pub fn time_average(basis: &Basis, state: &SolverState) -> Result<VelocityField> {
    calculus::perp_grad(basis, &time_average_stream(state)?)
}

/// Initial stream function normalized to `‖∇⊥ψ₀‖_{Hᵏ} = M₀`.
pub fn initial_stream(basis: &Basis, config: &RunConfig) -> Result<SpectralScalar> {
    let l_max = basis.l_max();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let slope = |l: usize, m: i64| basis.eigenvalue(l, m).powf(-(config.k as f64 + 1.0) / 2.0) / l as f64;
    let mut psi = basis.zeros();
    match config.initial_condition {
        InitialCondition::RandomBandLimited { l_cut } => {
            let cut = l_cut.unwrap_or(l_max);
            for m in 0..=cut {
                for l in m.max(1)..=cut {
                    let a = slope(l, m as i64);
                    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let c = if m == 0 {
                        Complex64::new(a * phase.cos().signum(), 0.0)
                    } else {
                        Complex64::from_polar(a, phase)
                    };
                    psi.add_assign_scaled(1.0, &SpectralScalar::real_mode(l_max, l, m, c));
                }
            }
        }
        InitialCondition::Zonal { l_cut } => {
            let cut = l_cut.unwrap_or(l_max);
            for l in 1..=cut {
                let a = slope(l, 0);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                psi.set(l, 0, Complex64::new(sign * a, 0.0));
            }
        }
        InitialCondition::SingleMode { l, m } => {
            psi = SpectralScalar::real_mode(l_max, l, m, Complex64::new(1.0, 0.0));
        }
    }
    let norm = calculus::hk_norm_velocity(basis, &psi, config.k)?;
    if norm == 0.0 {
        return Err(Error::Config("initial condition is identically zero".into()));
    }
    Ok(psi.scale(config.m0 / norm))
}

/// Automatic step: the smallest of an advective CFL limit and accuracy
/// limits for the fastest linear and nonlinear rates.
///
/// RK4 damps an oscillation of frequency `ν` by `(νΔt)⁶/72` in energy per
/// step, so holding the energy loss per unit time below `tol / 2` needs
/// `νΔt ≤ (36 tol / ν)^{1/5}`; this is capped at 0.5.
pub fn auto_dt(rot: &RotationOps, zeta: &SpectralScalar, config: &RunConfig) -> Result<f64> {
    let basis = rot.basis();
    let geom = basis.geometry();
    let psi = basis.invert_laplacian(zeta);
    let u = calculus::perp_grad(basis, &psi)?;
    let dphi = geom.dphi();
    let dtheta = std::f64::consts::PI / geom.n_theta as f64;
    let np = geom.n_phi;
    let mut rate: f64 = 0.0;
    for j in 0..geom.n_theta {
        let (c, m) = (geom.cos_vals[j], geom.m_vals[j]);
        for i in 0..np {
            let k = j * np + i;
            rate = rate.max(u.u_phi.values[k].abs() / (c * dphi) + u.u_theta.values[k].abs() / (m * dtheta));
        }
    }
    let mut dt = f64::INFINITY;
    if rate > 0.0 {
        dt = dt.min(config.cfl / rate);
    }
    let accuracy = |nu: f64| -> f64 {
        let y = (36.0 * config.energy_tol / nu).powf(0.2).min(0.5);
        y / nu
    };
    let vort = basis.synthesis(zeta).max_abs();
    if vort > 0.0 {
        dt = dt.min(accuracy(vort));
    }
    let nu_lin = config.omega * rot.linear_frequency_factor();
    if nu_lin > 0.0 {
        dt = dt.min(accuracy(nu_lin));
    }
    if !dt.is_finite() {
        // Zero flow: anything works; take a coarse step.
        dt = config.t_final.min(0.1);
    }
    Ok(dt)
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub hk_norm: f64,
    pub zonal_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsTable {
    pub k: i32,
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsTable {
    pub fn max_relative_drift(&self, f: impl Fn(&DiagnosticsRow) -> f64) -> f64 {
        let Some(first) = self.rows.first() else { return 0.0 };
        let f0 = f(first);
        self.rows.iter().map(|r| ((f(r) - f0) / f0).abs()).fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        self.max_relative_drift(|r| r.energy)
    }

    pub fn enstrophy_drift(&self) -> f64 {
        self.max_relative_drift(|r| r.enstrophy)
    }

    pub fn max_hk_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.hk_norm).fold(0.0, f64::max)
    }
}

pub fn diagnostics_row(basis: &Basis, state: &SolverState, k: i32) -> Result<DiagnosticsRow> {
    let psi = state.stream(basis);
    Ok(DiagnosticsRow {
        t: state.t,
        energy: energy(basis, state),
        enstrophy: enstrophy(basis, state),
        hk_norm: calculus::hk_norm_velocity(basis, &psi, k)?,
        zonal_fraction: zonal_fraction(basis, state),
    })
}

/// A configured integration: basis, operators, step size and current state.
pub struct Simulation {
    pub config: RunConfig,
    pub rot: Arc<RotationOps>,
    pub dt: f64,
    pub n_steps: u64,
    pub state: SolverState,
    pub diagnostics: DiagnosticsTable,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let basis = Arc::new(config.build_basis()?);
        Self::with_basis(config, basis)
    }

    /// Uses a prebuilt basis, which must match the config's resolution.
    pub fn with_basis(config: RunConfig, basis: Arc<Basis>) -> Result<Self> {
        config.validate()?;
        check_basis(&config, &basis)?;
        calculus::check_product_resolution(&basis)?;
        let rot = Arc::new(RotationOps::new(basis));
        let psi0 = initial_stream(rot.basis(), &config)?;
        let zeta0 = rot.basis().apply_laplacian(&psi0);
        let state = SolverState::new(zeta0);
        Self::from_state(config, rot, state, None)
    }

    /// Continues from a saved state. `dt` should be the step of the original
    /// run so that the continuation reproduces it.
    pub fn resume(config: RunConfig, state: SolverState, dt: f64) -> Result<Self> {
        config.validate()?;
        let basis = Arc::new(config.build_basis()?);
        let rot = Arc::new(RotationOps::new(basis));
        Self::from_state(config, rot, state, Some(dt))
    }

    fn from_state(config: RunConfig, rot: Arc<RotationOps>, state: SolverState, dt: Option<f64>) -> Result<Self> {
        if state.zeta.l_max() != config.l_max {
            return Err(Error::ShapeMismatch {
                expected: format!("l_max = {}", config.l_max),
                got: format!("l_max = {}", state.zeta.l_max()),
            });
        }
        let dt_max = match (dt, config.dt) {
            (Some(dt), _) => dt,
            (None, TimeStep::Fixed(dt)) => dt,
            (None, TimeStep::Auto) => auto_dt(&rot, &state.zeta, &config)?,
        };
        // Land exactly on t_final.
        let n_steps = (config.t_final / dt_max - 1e-9).ceil().max(1.0) as u64;
        let dt = if dt.is_some() { dt_max } else { config.t_final / n_steps as f64 };
        let stab = dt * config.omega * rot.linear_frequency_factor();
        if stab > 2.8 {
            return Err(Error::Stability(format!(
                "dt·ω·(linear frequency factor) = {stab:.3} exceeds the RK4 stability limit 2.8"
            )));
        }
        let diagnostics = DiagnosticsTable { k: config.k, rows: Vec::new() };
        Ok(Self { config, rot, dt, n_steps, state, diagnostics })
    }

    pub fn basis(&self) -> &Basis {
        self.rot.basis()
    }

    pub fn step(&mut self) -> Result<()> {
        self.state = step_rk4(&self.rot, &self.state, self.config.omega, self.dt)?;
        if self.config.filter {
            apply_filter(self.rot.basis(), &mut self.state.zeta);
        }
        Ok(())
    }

    fn record(&mut self) -> Result<()> {
        let row = diagnostics_row(self.rot.basis(), &self.state, self.config.k)?;
        self.diagnostics.rows.push(row);
        Ok(())
    }

    /// Integrates until `t_final`, calling `observer` after every step.
    pub fn run_with(&mut self, mut observer: impl FnMut(&Simulation) -> Result<()>) -> Result<()> {
        if self.state.step_count == 0 && self.diagnostics.rows.is_empty() {
            self.record()?;
        }
        let t_end = self.config.t_final;
        while self.state.t < t_end * (1.0 - 1e-12) {
            self.step()?;
            let last = self.state.t >= t_end * (1.0 - 1e-12);
            if self.state.step_count.is_multiple_of(self.config.diag_every as u64) || last {
                self.record()?;
            }
            observer(self)?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_with(|_| Ok(()))
    }
}

fn check_basis(config: &RunConfig, basis: &Basis) -> Result<()> {
    let g = basis.geometry();
    if basis.l_max() != config.l_max || g.n_theta != config.n_theta || g.n_phi != config.n_phi || g.b != config.b {
        return Err(Error::ShapeMismatch {
            expected: format!("b={} l_max={} {}x{}", config.b, config.l_max, config.n_theta, config.n_phi),
            got: format!("b={} l_max={} {}x{}", g.b, basis.l_max(), g.n_theta, g.n_phi),
        });
    }
    Ok(())
}

/// `exp(−36 (l / l_max)^36)` damping of the top of the spectrum.
fn apply_filter(basis: &Basis, zeta: &mut SpectralScalar) {
    let lm = basis.l_max() as f64;
    *zeta = zeta.map_modes(|l, _, c| c * (-36.0 * (l as f64 / lm).powi(36)).exp());
}

/// Runs a configuration to completion.
pub fn run(config: RunConfig) -> Result<(SolverState, DiagnosticsTable)> {
    let mut sim = Simulation::new(config)?;
    sim.run()?;
    Ok((sim.state, sim.diagnostics))
}
