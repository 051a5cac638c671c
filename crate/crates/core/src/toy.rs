//! Finite-dimensional check of the time-averaging estimate for
//! `u' = ω L u + f` with `L` real skew-symmetric:
//!
//! ```text
//! ‖(1/T)∫(u − Πu)‖ ≤ (C/ω)(2M/T + M'),
//! ```
//!
//! where `Π` projects onto `ker L`, `C` is the constant in
//! `‖u − Πu‖ ≤ C‖Lu‖` (here `1/σ_min` of `L` off its kernel),
//! `M = max‖u‖` and `M' = max‖f‖` over the trajectory.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;

/// `L = Q diag(λ_i J, …, 0) Qᵀ` with `J = [[0, 1], [−1, 0]]`.
#[derive(Debug, Clone)]
pub struct SkewOperator {
    pub matrix: DMatrix<f64>,
    /// Orthonormal basis of `ker L`, one column per vector.
    pub kernel: DMatrix<f64>,
    /// Rotation rates `λ_i > 0` of the 2×2 blocks.
    pub rates: Vec<f64>,
}

impl SkewOperator {
    /// Random operator with a kernel of dimension `n / 4`; `n` must be a
    /// multiple of 8 in `8..=64`.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        if !(8..=MAX_DIM).contains(&n) || !n.is_multiple_of(8) {
            return Err(Error::InvalidParameter(format!(
                "dimension must be a multiple of 8 in 8..={MAX_DIM}, got {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gauss = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gauss.qr().q();
        let kdim = n / 4;
        let pairs = (n - kdim) / 2;
        let rates: Vec<f64> = (0..pairs).map(|_| rng.gen_range(0.5..3.0)).collect();
        let mut core = DMatrix::zeros(n, n);
        for (i, &r) in rates.iter().enumerate() {
            core[(2 * i, 2 * i + 1)] = r;
            core[(2 * i + 1, 2 * i)] = -r;
        }
        let matrix = &q * core * q.transpose();
        let kernel = q.columns(n - kdim, kdim).into_owned();
        Ok(Self { matrix, kernel, rates })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `C = 1 / min λ_i`, the sharp constant for `‖u − Πu‖ ≤ C‖Lu‖`.
    pub fn constant(&self) -> f64 {
        1.0 / self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn project_kernel(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.kernel * (self.kernel.transpose() * v)
    }
}

/// Smooth bounded forcing `f(t) = a + sin(νt) b`.
#[derive(Debug, Clone)]
pub enum Forcing {
    Zero,
    Smooth { steady: DVector<f64>, wave: DVector<f64>, freq: f64 },
}

impl Forcing {
    pub fn eval(&self, t: f64, n: usize) -> DVector<f64> {
        match self {
            Forcing::Zero => DVector::zeros(n),
            Forcing::Smooth { steady, wave, freq } => steady + wave * (freq * t).sin(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub op: SkewOperator,
    pub u0: DVector<f64>,
    pub forcing: Forcing,
}

impl ToyProblem {
    /// Operator, unit-norm `u₀` and forcing all drawn from `seed`.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let op = SkewOperator::random(n, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut unit = || {
            let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let nv = v.norm();
            v / nv
        };
        let u0 = unit();
        let forcing = Forcing::Smooth { steady: unit(), wave: unit(), freq: 2.0 };
        Ok(Self { op, u0, forcing })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 5_000_000 }
    }
}

/// What the estimate needs from one trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub u_final: DVector<f64>,
    /// `∫₀ᵀ u dt`.
    pub integral: DVector<f64>,
    /// `max ‖u‖` over accepted steps.
    pub max_u: f64,
    /// `max ‖f‖` over accepted steps.
    pub max_f: f64,
    pub steps: usize,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `u' = ωLu + f`, `I' = u` from `(u₀, 0)` to `t_final` with
/// adaptive Dormand–Prince 5(4).
pub fn integrate(problem: &ToyProblem, omega: f64, t_final: f64, tol: Tolerances) -> Result<Trajectory> {
    if !(t_final > 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!("need ω > 0 and T > 0, got ω = {omega}, T = {t_final}")));
    }
    let n = problem.op.dim();
    let wl = &problem.op.matrix * omega;
    let rhs = |t: f64, y: &DVector<f64>| -> DVector<f64> {
        let u = y.rows(0, n);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&(&wl * u + problem.forcing.eval(t, n)));
        out.rows_mut(n, n).copy_from(&u);
        out
    };
    let mut y = DVector::zeros(2 * n);
    y.rows_mut(0, n).copy_from(&problem.u0);
    let mut t = 0.0;
    let mut max_u = problem.u0.norm();
    let mut max_f = problem.forcing.eval(0.0, n).norm();
    let rate = omega * problem.op.rates.iter().cloned().fold(0.0, f64::max) + 1.0;
    let mut h = (0.1 / rate).min(t_final);
    let mut k: Vec<DVector<f64>> = vec![rhs(0.0, &y); 7];
    let mut steps = 0;
    while t < t_final {
        if steps >= tol.max_steps {
            return Err(Error::Integration(format!("step limit {} reached at t = {t}", tol.max_steps)));
        }
        h = h.min(t_final - t);
        if h < 1e-14 * t_final.max(1.0) {
            return Err(Error::Integration(format!("step size underflow at t = {t}")));
        }
        for s in 1..7 {
            let mut ys = y.clone();
            for (r, a) in A[s].iter().enumerate().take(s) {
                if *a != 0.0 {
                    ys.axpy(h * a, &k[r], 1.0);
                }
            }
            k[s] = rhs(t + C[s] * h, &ys);
        }
        let mut y5 = y.clone();
        let mut err = DVector::zeros(2 * n);
        for s in 0..7 {
            y5.axpy(h * B5[s], &k[s], 1.0);
            err.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
        }
        let scale = y.abs().sup(&y5.abs()) * tol.rtol + DVector::repeat(2 * n, tol.atol);
        let e = (err.component_div(&scale).norm_squared() / (2 * n) as f64).sqrt();
        if e <= 1.0 {
            t += h;
            y = y5;
            // FSAL: the last stage is f at the new point.
            k[0] = k[6].clone();
            steps += 1;
            max_u = max_u.max(y.rows(0, n).norm());
            max_f = max_f.max(problem.forcing.eval(t, n).norm());
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(Trajectory {
        u_final: y.rows(0, n).into_owned(),
        integral: y.rows(n, n).into_owned(),
        max_u,
        max_f,
        steps,
    })
}

/// `(u(T), ∫₀ᵀ u)` for `f = 0` from one matrix exponential of
/// `[[ωL, 0], [I, 0]] T`.
pub fn exact_unforced(op: &SkewOperator, u0: &DVector<f64>, omega: f64, t_final: f64) -> (DVector<f64>, DVector<f64>) {
    let n = op.dim();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(&op.matrix * (omega * t_final)));
    big.view_mut((n, 0), (n, n)).copy_from(&(DMatrix::identity(n, n) * t_final));
    let e = big.exp();
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from(u0);
    let y = e * y0;
    (y.rows(0, n).into_owned(), y.rows(n, n).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyRow {
    pub seed: u64,
    pub omega: f64,
    pub t_final: f64,
    /// `‖(1/T)∫(u − Πu)‖`.
    pub lhs: f64,
    /// `(C/ω)(2M/T + M')`.
    pub rhs: f64,
    pub max_u: f64,
    pub max_f: f64,
}

impl ToyRow {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Evaluates both sides of the estimate for one `ω`.
pub fn evaluate(problem: &ToyProblem, seed: u64, omega: f64, t_final: f64, tol: Tolerances) -> Result<ToyRow> {
    let traj = integrate(problem, omega, t_final, tol)?;
    let off_kernel = &traj.integral - problem.op.project_kernel(&traj.integral);
    let lhs = off_kernel.norm() / t_final;
    let c = problem.op.constant();
    let rhs = c / omega * (2.0 * traj.max_u / t_final + traj.max_f);
    Ok(ToyRow { seed, omega, t_final, lhs, rhs, max_u: traj.max_u, max_f: traj.max_f })
}

#[derive(Debug, Clone)]
pub struct ToyAveragingReport {
    pub n: usize,
    pub t_final: f64,
    /// `(seed, C, rates)` per operator.
    pub operators: Vec<(u64, f64, Vec<f64>)>,
    pub rows: Vec<ToyRow>,
    /// Least-squares slope of `log lhs` against `log ω` over all rows.
    pub slope: f64,
}

impl ToyAveragingReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(ToyRow::holds)
    }
}

/// Runs every `(seed, ω)` pair; rows are ordered by seed, then `ω`.
pub fn verify(n: usize, seeds: &[u64], omegas: &[f64], t_final: f64) -> Result<ToyAveragingReport> {
    use rayon::prelude::*;
    if omegas.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed and one ω".into()));
    }
    let problems = seeds.iter().map(|&s| ToyProblem::random(n, s).map(|p| (s, p))).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..problems.len()).flat_map(|i| omegas.iter().map(move |&w| (i, w))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, w)| evaluate(&problems[i].1, problems[i].0, w, t_final, Tolerances::default()))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = rows.iter().filter(|r| r.lhs > 0.0).map(|r| (r.omega.ln(), r.lhs.ln())).collect();
    let slope = crate::experiments::linear_fit(&points).map(|f| f.slope).unwrap_or(f64::NAN);
    let operators = problems.iter().map(|(s, p)| (*s, p.op.constant(), p.op.rates.clone())).collect();
    Ok(ToyAveragingReport { n, t_final, operators, rows, slope })
}
