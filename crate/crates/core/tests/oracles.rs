//! Checks against values computed independently of the library: adaptive
//! quadrature for the area, a finite-volume Sturm–Liouville solve with
//! Richardson extrapolation for the eigenvalues.

mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use zonal_core::calculus::l2_inner_grid;
use zonal_core::experiments::linear_fit;
use zonal_core::{Geometry, SpectralScalar};

// Frozen oracle outputs for b = 0.8 (see the functions below).
const AREA_B08: f64 = 10.928_702_299_827_27;
const LAMBDA_1_0_B08: f64 = 2.558879861280;
const LAMBDA_2_2_B08: f64 = 6.400007728975;

fn metric(b: f64, t: f64) -> f64 {
    (t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// Second-order finite-volume eigenvalues of
/// `−(1/(c m)) (c/m f′)′ + k²/c² f = Λ f` on `(−π/2, π/2)`, sorted.
fn fv_eigenvalues(b: f64, k: f64, n: usize) -> Vec<f64> {
    let h = PI / n as f64;
    let node = |s: f64| -PI / 2.0 + s * h;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut w = vec![0.0; n];
    for i in 0..n {
        let t = node(i as f64 + 0.5);
        w[i] = t.cos() * metric(b, t) * h;
        a[(i, i)] += k * k * metric(b, t) * h / t.cos();
        if i + 1 < n {
            let tf = node(i as f64 + 1.0);
            let c = tf.cos() / metric(b, tf) / h;
            a[(i, i)] += c;
            a[(i + 1, i + 1)] += c;
            a[(i, i + 1)] -= c;
            a[(i + 1, i)] -= c;
        }
    }
    let s = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (w[i] * w[j]).sqrt());
    let mut e: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn richardson(b: f64, k: f64, index: usize) -> f64 {
    let coarse = fv_eigenvalues(b, k, 300)[index];
    let fine = fv_eigenvalues(b, k, 600)[index];
    (4.0 * fine - coarse) / 3.0
}

#[test]
fn area_matches_adaptive_quadrature() {
    let b = 0.8;
    let direct = 2.0 * PI * simpson(&|t| t.cos() * metric(b, t), -PI / 2.0, PI / 2.0, 1e-12);
    assert!((direct - AREA_B08).abs() < 1e-8);
    let g = Geometry::new(b, 32, 16).unwrap();
    assert!((g.area() - AREA_B08).abs() < 1e-8);
    assert!((g.exact_area() - AREA_B08).abs() < 1e-8);
}

#[test]
fn eigenvalues_match_finite_volume_oracle() {
    let b = 0.8;
    // index 0 of the axisymmetric problem is the constant.
    let l10 = richardson(b, 0.0, 1);
    let l22 = richardson(b, 2.0, 0);
    assert!((l10 - LAMBDA_1_0_B08).abs() < 1e-7, "{l10}");
    assert!((l22 - LAMBDA_2_2_B08).abs() < 1e-7, "{l22}");
    let basis = common::basis(b, 21, 64, 128);
    assert!((basis.eigenvalue(1, 0) - LAMBDA_1_0_B08).abs() < 1e-6 * LAMBDA_1_0_B08);
    assert!((basis.eigenvalue(2, 2) - LAMBDA_2_2_B08).abs() < 1e-6 * LAMBDA_2_2_B08);
    assert!((basis.eigenvalue(2, -2) - LAMBDA_2_2_B08).abs() < 1e-6 * LAMBDA_2_2_B08);
}

#[test]
fn distinct_zonal_harmonics_are_orthogonal() {
    let basis = common::basis(0.9, 12, 32, 48);
    let one = Complex64::new(1.0, 0.0);
    let y2 = basis.synthesis(&SpectralScalar::real_mode(12, 2, 0, one));
    let y3 = basis.synthesis(&SpectralScalar::real_mode(12, 3, 0, one));
    assert!(l2_inner_grid(&basis, &y2, &y3).unwrap().abs() < 1e-12);
    assert!((l2_inner_grid(&basis, &y2, &y2).unwrap() - 1.0).abs() < 1e-12);
    assert!((l2_inner_grid(&basis, &y3, &y3).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn harmonics_have_parity_l_minus_m() {
    let basis = common::basis(0.7, 10, 32, 32);
    let nt = basis.geometry().n_theta;
    for (l, m) in [(1, 0), (2, 0), (3, 1), (4, 1), (5, 3), (6, 3)] {
        let y = basis.synthesis(&SpectralScalar::real_mode(10, l, m, Complex64::new(1.0, 0.0)));
        let sign = if (l - m) % 2 == 0 { 1.0 } else { -1.0 };
        for j in 0..nt {
            let (a, b) = (y.at(j, 0), y.at(nt - 1 - j, 0));
            assert!((a - sign * b).abs() < 1e-12, "l {l} m {m} row {j}: {a} vs {b}");
        }
    }
}

#[test]
fn eigenvalues_grow_quadratically_in_l() {
    let basis = common::basis(0.8, 24, 64, 64);
    let pts: Vec<(f64, f64)> = (8..=24).map(|l| ((l as f64).ln(), basis.eigenvalue(l, 0).ln())).collect();
    let slope = linear_fit(&pts).unwrap().slope;
    assert!((1.8..=2.2).contains(&slope), "{slope}");
}

#[test]
fn spectrum_depends_continuously_on_b() {
    let near = common::basis(1.0 - 1e-6, 10, 32, 32);
    for l in 1..=10 {
        let s = (l * (l + 1)) as f64;
        assert!((near.eigenvalue(l, 0) - s).abs() < 1e-4 * s);
    }
    let (a, b) = (common::basis(0.85, 10, 32, 32), common::basis(0.85 + 1e-5, 10, 32, 32));
    for (l, m) in a.layout().modes() {
        let (x, y) = (a.eigenvalue(l, m), b.eigenvalue(l, m));
        assert!((x - y).abs() < 1e-3 * x, "({l},{m}): {x} {y}");
        // flattening raises the spectrum
        assert!(x > y);
    }
}
