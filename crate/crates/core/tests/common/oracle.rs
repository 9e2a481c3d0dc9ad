//! Independent references for the estimator and the hypothesis test.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Dense textbook Kalman update with covariance `P- - K S K'`.
pub fn kalman_step(x: &DVector<f64>, p: &DMatrix<f64>, h: &DMatrix<f64>, z: &DVector<f64>, q: f64, r: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let m = z.len();
    let prior = p + DMatrix::identity(n, n) * q;
    let s = h * &prior * h.transpose() + DMatrix::identity(m, m) * r;
    let s_inv = s.clone().try_inverse().expect("innovation covariance invertible");
    let k = &prior * h.transpose() * s_inv;
    let x_new = x + &k * (z - h * x);
    let p_new = &prior - &k * s * k.transpose();
    (x_new, p_new)
}

pub fn to_dmatrix<const R: usize, const C: usize>(m: &[[f64; C]; R]) -> DMatrix<f64> {
    DMatrix::from_fn(R, C, |i, j| m[i][j])
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Symmetric to 1e-12 relative and no eigenvalue below `-1e-12 * max|P|`.
pub fn is_symmetric_psd(p: &DMatrix<f64>) -> bool {
    let scale = p.amax().max(1e-300);
    let symmetric = (p - p.transpose()).amax() <= 1e-12 * scale;
    let eig = SymmetricEigen::new(p.clone()).eigenvalues;
    symmetric && eig.iter().all(|&l| l >= -1e-12 * scale)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// P(K < threshold) for K ~ N(mean, variance), by integrating the density.
pub fn gaussian_lower_tail(mean: f64, variance: f64, threshold: f64) -> f64 {
    let sd = variance.sqrt();
    let density = |k: f64| {
        let u = (k - mean) / sd;
        (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let lower = mean - 40.0 * sd;
    if threshold <= lower {
        return 0.0;
    }
    // split at the mean so the peak is never straddled by a coarse panel
    if threshold <= mean {
        adaptive_simpson(&density, lower, threshold, 1e-14)
    } else {
        adaptive_simpson(&density, lower, mean, 1e-14) + adaptive_simpson(&density, mean, threshold, 1e-14)
    }
}
