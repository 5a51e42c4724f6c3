//! Small numeric helpers shared across the crate: order-stable summation,
//! Gauss-Legendre quadrature and a fixed-step RK4 integrator.

use std::cmp::Ordering;

use nalgebra::DVector;

/// Pairwise (cascade) summation. Deterministic for a fixed slice regardless
/// of how the slice was produced, and much better conditioned than a naive
/// left fold for long Monte-Carlo vectors.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Sample mean and standard error (sample stdev / sqrt(n)) with pairwise sums.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0, "mean of empty sample");
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Lexicographic comparison of two vectors of equal length.
pub fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// `(e^{k Δ} - 1) / k`, the exact integral of `e^{k s}` over `[0, Δ]`,
/// stable near `k = 0`.
pub fn exp_integral(k: f64, delta: f64) -> f64 {
    let kd = k * delta;
    if kd.abs() < 1e-10 {
        delta * (1.0 + 0.5 * kd + kd * kd / 6.0)
    } else {
        (kd.exp() - 1.0) / k
    }
}

/// `(1 - rho^beta) / beta` for `rho > 0`, the exact integral
/// `∫_rho^1 s^(beta-1) ds`, stable near `beta = 0` (limit `-ln rho`).
pub fn power_integral(beta: f64, rho: f64) -> f64 {
    let l = rho.ln();
    let bl = beta * l;
    if bl.abs() < 1e-10 {
        -l * (1.0 + 0.5 * bl + bl * bl / 6.0)
    } else {
        (1.0 - rho.powf(beta)) / beta
    }
}

// Abscissae/weights of the 8-point Gauss-Legendre rule on [-1, 1]
// (exact for polynomials up to degree 15).
const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_25,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_25,
];

/// 8-point Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL8_X.iter().zip(GL8_W.iter()) {
        acc += w * f(mid + half * x);
    }
    half * acc
}

/// Classical fixed-step RK4 integration of `dy/dt = f(t, y)` backward in time
/// from `(t_end, y_end)` to `t_start`. Returns `(t, y)` samples at every step
/// boundary in decreasing-t order, starting with the terminal point.
///
/// `accept` gates intermediate states; returning `false` aborts integration
/// (the caller maps this to a step-rejection error).
pub fn rk4_backward(
    t_start: f64,
    t_end: f64,
    y_end: f64,
    n_steps: usize,
    mut f: impl FnMut(f64, f64) -> f64,
    mut accept: impl FnMut(f64) -> bool,
) -> Option<Vec<(f64, f64)>> {
    assert!(t_end > t_start && n_steps > 0);
    let h = (t_end - t_start) / n_steps as f64;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut t = t_end;
    let mut y = y_end;
    out.push((t, y));
    for i in 1..=n_steps {
        let k1 = f(t, y);
        let k2 = f(t - 0.5 * h, y - 0.5 * h * k1);
        let k3 = f(t - 0.5 * h, y - 0.5 * h * k2);
        let k4 = f(t - h, y - h * k3);
        y -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = t_end - i as f64 * h;
        if !accept(y) {
            return None;
        }
        out.push((t, y));
    }
    Some(out)
}
