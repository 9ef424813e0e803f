//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hierbayes::{Hypermodel, InverseProblem};

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// The one-dimensional λ objective `ξ²/(2λ) + λ^r - (rβ - 3/2) log λ`.
pub fn lambda_objective(xi: f64, lambda: f64, hm: &Hypermodel) -> f64 {
    xi * xi / (2.0 * lambda) + lambda.powf(hm.r()) - (hm.r() * hm.beta() - 1.5) * lambda.ln()
}

/// Global minimizer of [`lambda_objective`] by a log-spaced grid over
/// `[1e-10, 1e6]` refined with golden-section search.
pub fn grid_min_lambda(xi: f64, hm: &Hypermodel) -> f64 {
    let f = |l: f64| lambda_objective(xi, l, hm);
    let (lo, hi, pts) = (-10.0f64, 6.0f64, 20_000usize);
    let at = |i: usize| 10f64.powf(lo + (hi - lo) * i as f64 / pts as f64);
    let best = (0..=pts)
        .min_by(|&a, &b| f(at(a)).total_cmp(&f(at(b))))
        .unwrap();
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(pts)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while (b - a) > 1e-15 * b {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

/// Trapezoid rule for `∫_0^∞ g(θ) dθ` after the substitution θ = s·e^u,
/// on u ∈ [-80, 80]. Exponentially decaying tails in u make this spectrally
/// accurate.
pub fn integrate_positive_axis(g: impl Fn(f64) -> f64, scale: f64) -> f64 {
    let (lo, hi, du) = (-80.0, 80.0, 2e-3);
    let steps = ((hi - lo) / du) as usize;
    let mut sum = 0.0;
    for i in 0..=steps {
        let u = lo + du * i as f64;
        let theta = scale * u.exp();
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let val = g(theta) * theta;
        if val.is_finite() {
            sum += w * val;
        }
    }
    sum * du
}

/// Minimizer of `½‖b - Mξ‖² + w‖ξ‖₁` by ISTA with step 1/‖M‖², iterated until
/// successive iterates differ by less than `tol` in norm.
pub fn ista_l1(m: &DMatrix<f64>, b: &DVector<f64>, w: f64, tol: f64) -> DVector<f64> {
    let lip = m.clone().svd(false, false).singular_values.max().powi(2);
    let step = 1.0 / lip;
    let mut x = DVector::zeros(m.ncols());
    for _ in 0..10_000_000 {
        let grad = m.transpose() * (m * &x - b);
        let y = &x - step * grad;
        let next = y.map(|v| v.signum() * (v.abs() - step * w).max(0.0));
        let diff = (&next - &x).norm();
        x = next;
        if diff < tol {
            break;
        }
    }
    x
}

/// Kolmogorov distribution tail `P(K > t)`.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov p-value against the continuous cdf `cdf`.
pub fn ks_pvalue(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random dense problem with i.i.d. standard normal matrix entries and data
/// from a sparse vector plus small noise.
pub fn random_problem(m: usize, n: usize, seed: u64) -> (InverseProblem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_vec(m, n, normals(&mut rng, m * n));
    let mut truth = vec![0.0; n];
    truth[2] = 4.0;
    truth[7] = -3.0;
    truth[n - 3] = 2.5;
    let noise = normals(&mut rng, m);
    let b = &a * DVector::from_column_slice(&truth)
        + DVector::from_iterator(m, noise.iter().map(|e| 0.1 * e));
    (InverseProblem::new(a, b, 1.0).unwrap(), truth)
}
