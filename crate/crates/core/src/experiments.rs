//! Zonalization-rate sweeps, continuation in the flattening `b`, and the
//! least-squares fit used to read off decay rates.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::basis::{Basis, SpectralScalar};
use crate::calculus::{self, VelocityField};
use crate::dynamics::{self, InitialCondition, RunConfig, Simulation};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::rotation::RotationOps;

/// `‖(id − Π)ū‖` in the velocity `H^{k−3}` norm.
///
/// `Π` keeps only the zonal mean of `u_φ`, so it removes the whole gradient
/// part of `ū` together with the `m ≠ 0` part of its stream function.
pub fn zonalization_error(basis: &Basis, ubar: &VelocityField, k: i32) -> Result<f64> {
    check_order(k)?;
    let (phi, psi) = calculus::hodge_decompose(basis, ubar)?;
    let grad = calculus::hk_norm_velocity(basis, &phi, k - 3)?;
    let rot = calculus::hk_norm_velocity(basis, &psi.non_zonal_part(), k - 3)?;
    Ok(grad.hypot(rot))
}

/// Same quantity straight from the stream function of a divergence-free `ū`.
pub fn zonalization_error_stream(basis: &Basis, psi_bar: &SpectralScalar, k: i32) -> Result<f64> {
    check_order(k)?;
    calculus::hk_norm_velocity(basis, &psi_bar.non_zonal_part(), k - 3)
}

fn check_order(k: i32) -> Result<()> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("k must be at least 3, got {k}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% two-sided Student-t half-width of the slope; infinite with two
    /// points.
    pub slope_half_width: f64,
    pub n: usize,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_half_width = if n > 2 {
        let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).ok()?.inverse_cdf(0.975);
        t * se
    } else {
        f64::INFINITY
    };
    Some(LinearFit { slope, intercept, slope_half_width, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub omega: f64,
    pub t_final: f64,
    pub b: f64,
    pub m0: f64,
    /// `‖(id − Π)ū(T)‖_{H^{k−3}}`.
    pub error: f64,
    pub energy_drift: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub k: i32,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    /// Fit of `ln error` against `ln ω`.
    pub fit: LinearFit,
}

impl SweepResult {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }
}

/// Failed sweep: the rows that completed plus the first failure.
#[derive(Debug, thiserror::Error)]
#[error("sweep aborted at ω = {omega}: {source}")]
pub struct SweepError {
    pub omega: f64,
    pub completed: Vec<SweepRow>,
    #[source]
    pub source: Error,
}

impl From<SweepError> for Error {
    fn from(e: SweepError) -> Self {
        e.source
    }
}

fn check_omegas(omegas: &[f64]) -> Result<()> {
    if omegas.len() < 2 {
        return Err(Error::InvalidParameter("a sweep needs at least two ω values".into()));
    }
    if omegas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("ω values must be strictly increasing".into()));
    }
    if !(omegas[0] >= 10.0) {
        return Err(Error::InvalidParameter(format!("smallest ω must be at least 10, got {}", omegas[0])));
    }
    Ok(())
}

/// One run per `ω` on a shared basis; rows come back in `ω` order.
pub fn omega_sweep(base: &RunConfig, omegas: &[f64]) -> Result<SweepResult, SweepError> {
    let fail = |omega: f64, source: Error| SweepError { omega, completed: Vec::new(), source };
    check_omegas(omegas).map_err(|e| fail(f64::NAN, e))?;
    base.validate().map_err(|e| fail(f64::NAN, e))?;
    check_order(base.k).map_err(|e| fail(f64::NAN, e))?;
    let basis = Arc::new(base.build_basis().map_err(|e| fail(f64::NAN, e))?);
    let outcomes: Vec<Result<SweepRow>> = omegas
        .par_iter()
        .map(|&omega| sweep_row(base, omega, Arc::clone(&basis)))
        .collect();
    let mut rows = Vec::with_capacity(omegas.len());
    for (omega, outcome) in omegas.iter().zip(outcomes) {
        match outcome {
            Ok(row) => rows.push(row),
            Err(source) => return Err(SweepError { omega: *omega, completed: rows, source }),
        }
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.omega.ln(), r.error.ln())).collect();
    let fit = linear_fit(&points).ok_or_else(|| SweepError {
        omega: f64::NAN,
        completed: rows.clone(),
        source: Error::Integration("slope fit is degenerate".into()),
    })?;
    if !fit.slope.is_finite() {
        return Err(SweepError {
            omega: f64::NAN,
            completed: rows,
            source: Error::Integration("non-finite slope (zero zonalization error?)".into()),
        });
    }
    Ok(SweepResult { k: base.k, seed: base.seed, rows, fit })
}

fn sweep_row(base: &RunConfig, omega: f64, basis: Arc<Basis>) -> Result<SweepRow> {
    let start = Instant::now();
    let config = RunConfig { omega, ..base.clone() };
    let mut sim = Simulation::with_basis(config, basis)?;
    sim.run()?;
    let ubar = dynamics::time_average(sim.basis(), &sim.state)?;
    let error = zonalization_error(sim.basis(), &ubar, base.k)?;
    Ok(SweepRow {
        omega,
        t_final: base.t_final,
        b: base.b,
        m0: base.m0,
        error,
        energy_drift: sim.diagnostics.energy_drift(),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationRow {
    pub b: f64,
    /// Ten smallest `Λ_{l,m}`, counting `±m` separately.
    pub lowest_eigenvalues: Vec<f64>,
    /// Largest relative gap to the sphere values `l(l+1)` in the same order.
    pub eigen_deviation: f64,
    /// Largest `‖(id − Π)u‖_{Hᵏ} / ‖𝓛u‖_{H^{k+2}}` over the probe ensemble.
    pub gap_ratio: f64,
    /// Largest commutation residual at `j = 1` over the ensemble.
    pub commutation_residual: f64,
}

pub const CONTINUATION_EIGENVALUES: usize = 10;

/// For each `b`: lowest eigenvalues and the operator diagnostics over
/// `samples` seeded fields (seeds `probe.seed + i`) at the probe resolution.
pub fn b_continuation(bs: &[f64], probe: &RunConfig, samples: usize) -> Result<Vec<ContinuationRow>> {
    if bs.is_empty() || samples == 0 {
        return Err(Error::InvalidParameter("need at least one b and one sample".into()));
    }
    let sphere: Vec<f64> = lowest_sphere_eigenvalues(CONTINUATION_EIGENVALUES);
    bs.par_iter()
        .map(|&b| {
            let basis = Arc::new(Basis::new(Geometry::new(b, probe.n_theta, probe.n_phi)?, probe.l_max)?);
            let mut eig: Vec<f64> = basis.layout().modes().map(|(l, m)| basis.eigenvalue(l, m)).collect();
            eig.sort_by(f64::total_cmp);
            eig.truncate(CONTINUATION_EIGENVALUES);
            let eigen_deviation =
                eig.iter().zip(&sphere).map(|(a, s)| ((a - s) / s).abs()).fold(0.0, f64::max);
            let rot = RotationOps::new(Arc::clone(&basis));
            let mut gap_ratio: f64 = 0.0;
            let mut commutation_residual: f64 = 0.0;
            for i in 0..samples {
                let cfg = RunConfig {
                    b,
                    seed: probe.seed + i as u64,
                    initial_condition: InitialCondition::RandomBandLimited { l_cut: None },
                    ..probe.clone()
                };
                let psi = dynamics::initial_stream(&basis, &cfg)?;
                let (lhs, rhs) = rot.key_estimate_gap(&psi, probe.k)?;
                if rhs > 0.0 {
                    gap_ratio = gap_ratio.max(lhs / rhs);
                }
                commutation_residual = commutation_residual.max(rot.commutation_residual(&psi, 1)?);
            }
            Ok(ContinuationRow { b, lowest_eigenvalues: eig, eigen_deviation, gap_ratio, commutation_residual })
        })
        .collect()
}

/// Sphere eigenvalues `l(l+1)` with multiplicity `2l+1`, `l ≥ 1`.
fn lowest_sphere_eigenvalues(count: usize) -> Vec<f64> {
    (1..)
        .flat_map(|l: usize| std::iter::repeat_n((l * (l + 1)) as f64, 2 * l + 1))
        .take(count)
        .collect()
}
