//! Local kernels for CRRA and CARA utilities, their gradients and Hessians,
//! global kernels over piecewise-constant paths, and the kernel partial
//! order.
//!
//! All time integrals assume the policy/triplet paths are constant on grid
//! cells; inner integrals are then exact sums and the outer integral of
//! `exp(linear) * affine` has a closed form per cell, so no quadrature error
//! enters these evaluations.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::market::{ConfidenceSet, LevyTriplet, TimeGrid};
use crate::numeric::{exp_integral, power_integral};
use crate::policy::q_schedule;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("local kernel outside CRRA domain: 1 + x^T z = {value} <= 0")]
    Domain { value: f64 },
    #[error("path length {got} does not match grid cell count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("triplet path cell {cell} is not the stated hull mixture (gap {gap})")]
    MixtureMismatch { cell: usize, gap: f64 },
    #[error(transparent)]
    Market(#[from] crate::market::MarketError),
}

/// CRRA utility `U(x)` with exponent `p` (`p = 0` is the log family).
pub fn crra_utility(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        x.ln()
    } else {
        x.powf(p) / p
    }
}

/// CARA utility `-e^{-a x} / a`.
pub fn cara_utility(x: f64, a: f64) -> f64 {
    -(-a * x).exp() / a
}

/// CRRA local kernel
/// `x^T b - (1-p)/2 x^T Σ x + Σ_atoms w (U(1 + x^T z) - U(1) - x^T z)`.
pub fn local_kernel_crra(x: &DVector<f64>, theta: &LevyTriplet, p: f64) -> Result<f64, KernelError> {
    let mut value = x.dot(theta.drift()) - 0.5 * (1.0 - p) * quadratic_form(theta.covariance(), x);
    for atom in theta.jumps().atoms() {
        let u = x.dot(&atom.location);
        let y = 1.0 + u;
        if y <= 0.0 {
            return Err(KernelError::Domain { value: y });
        }
        let term = if p == 0.0 {
            y.ln() - u
        } else {
            (p * y.ln()).exp_m1() / p - u
        };
        value += atom.intensity * term;
    }
    Ok(value)
}

pub fn local_kernel_crra_gradient(
    x: &DVector<f64>,
    theta: &LevyTriplet,
    p: f64,
) -> Result<DVector<f64>, KernelError> {
    let mut grad = theta.drift() - (theta.covariance() * x) * (1.0 - p);
    for atom in theta.jumps().atoms() {
        let y = 1.0 + x.dot(&atom.location);
        if y <= 0.0 {
            return Err(KernelError::Domain { value: y });
        }
        // U'(y) - 1 with U' = y^(p-1) (log: 1/y)
        let marginal = if p == 0.0 { 1.0 / y } else { y.powf(p - 1.0) };
        grad += &atom.location * (atom.intensity * (marginal - 1.0));
    }
    Ok(grad)
}

pub fn local_kernel_crra_hessian(
    x: &DVector<f64>,
    theta: &LevyTriplet,
    p: f64,
) -> Result<DMatrix<f64>, KernelError> {
    let mut hess = theta.covariance() * -(1.0 - p);
    for atom in theta.jumps().atoms() {
        let y = 1.0 + x.dot(&atom.location);
        if y <= 0.0 {
            return Err(KernelError::Domain { value: y });
        }
        let second = if p == 0.0 {
            -1.0 / (y * y)
        } else {
            (p - 1.0) * y.powf(p - 2.0)
        };
        hess += (&atom.location * atom.location.transpose()) * (atom.intensity * second);
    }
    Ok(hess)
}

/// CARA local kernel at consumption ratio `q`:
/// `x^T b - a q / 2 x^T Σ x + Σ_atoms w (e^{-a q x^T z}/(-a q) + 1/(a q) - x^T z)`.
pub fn local_kernel_cara(x: &DVector<f64>, theta: &LevyTriplet, q: f64, a: f64) -> f64 {
    let aq = a * q;
    let mut value = x.dot(theta.drift()) - 0.5 * aq * quadratic_form(theta.covariance(), x);
    for atom in theta.jumps().atoms() {
        let u = x.dot(&atom.location);
        value += atom.intensity * ((1.0 - (-aq * u).exp()) / aq - u);
    }
    value
}

pub fn local_kernel_cara_gradient(
    x: &DVector<f64>,
    theta: &LevyTriplet,
    q: f64,
    a: f64,
) -> DVector<f64> {
    let aq = a * q;
    let mut grad = theta.drift() - (theta.covariance() * x) * aq;
    for atom in theta.jumps().atoms() {
        let u = x.dot(&atom.location);
        grad += &atom.location * (atom.intensity * ((-aq * u).exp() - 1.0));
    }
    grad
}

pub fn local_kernel_cara_hessian(x: &DVector<f64>, theta: &LevyTriplet, q: f64, a: f64) -> DMatrix<f64> {
    let aq = a * q;
    let mut hess = theta.covariance() * -aq;
    for atom in theta.jumps().atoms() {
        let u = x.dot(&atom.location);
        hess += (&atom.location * atom.location.transpose())
            * (-aq * atom.intensity * (-aq * u).exp());
    }
    hess
}

fn quadratic_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (x.transpose() * m * x)[(0, 0)]
}

/// Piecewise-constant CRRA policy: investment ratio and consumption ratio per
/// grid cell.
#[derive(Debug, Clone)]
pub struct CrraPolicy {
    pub invest: Vec<DVector<f64>>,
    pub consume: Vec<f64>,
}

/// Piecewise-constant CARA policy: investment amount and excess consumption
/// per grid cell.
#[derive(Debug, Clone)]
pub struct CaraPolicy {
    pub invest: Vec<DVector<f64>>,
    pub excess: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum PolicyPath {
    Crra(CrraPolicy),
    Cara(CaraPolicy),
}

/// A measurable triplet selector: one triplet per grid cell together with the
/// hull weights certifying membership in the segment's confidence set.
#[derive(Debug, Clone)]
pub struct SelectedTriplet {
    pub triplet: LevyTriplet,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TripletPath {
    cells: Vec<SelectedTriplet>,
}

impl TripletPath {
    /// Builds the path from per-cell hull weights, materializing each mixture.
    pub fn from_weights(
        sets: &[ConfidenceSet],
        grid: &TimeGrid,
        weights: &[Vec<f64>],
    ) -> Result<Self, KernelError> {
        if weights.len() != grid.num_cells() {
            return Err(KernelError::LengthMismatch {
                expected: grid.num_cells(),
                got: weights.len(),
            });
        }
        let mut cells = Vec::with_capacity(weights.len());
        for (cell, w) in grid.cells().iter().zip(weights.iter()) {
            let triplet = sets[cell.segment].mixture(w)?;
            cells.push(SelectedTriplet { triplet, weights: w.clone() });
        }
        Ok(Self { cells })
    }

    /// Path selecting the same vertex index in every cell.
    pub fn constant_vertex(
        sets: &[ConfidenceSet],
        grid: &TimeGrid,
        vertex: usize,
    ) -> Result<Self, KernelError> {
        let weights: Vec<Vec<f64>> = grid
            .cells()
            .iter()
            .map(|c| {
                let m = sets[c.segment].vertices().len();
                let mut w = vec![0.0; m];
                w[vertex.min(m - 1)] = 1.0;
                w
            })
            .collect();
        Self::from_weights(sets, grid, &weights)
    }

    /// Assembles a path from already-materialized cells (solver output).
    pub fn from_cells(cells: Vec<SelectedTriplet>, grid: &TimeGrid) -> Result<Self, KernelError> {
        if cells.len() != grid.num_cells() {
            return Err(KernelError::LengthMismatch {
                expected: grid.num_cells(),
                got: cells.len(),
            });
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> &[SelectedTriplet] {
        &self.cells
    }

    pub fn triplet(&self, cell: usize) -> &LevyTriplet {
        &self.cells[cell].triplet
    }
}

/// Per-cell CRRA kernel values `g^{θ_i}(π_i)` (time-invariant within cells).
pub fn kernel_path_crra(
    invest: &[DVector<f64>],
    theta: &TripletPath,
    grid: &TimeGrid,
    p: f64,
) -> Result<Vec<f64>, KernelError> {
    check_len(invest.len(), grid)?;
    check_len(theta.cells.len(), grid)?;
    invest
        .iter()
        .zip(theta.cells.iter())
        .map(|(x, sel)| local_kernel_crra(x, &sel.triplet, p))
        .collect()
}

/// Per-cell CARA kernel values `h_i = h^{θ_i}(Π_i)` frozen at the cell
/// midpoint's consumption ratio `q`.
pub fn kernel_path_cara(
    invest: &[DVector<f64>],
    theta: &TripletPath,
    grid: &TimeGrid,
    a: f64,
) -> Result<Vec<f64>, KernelError> {
    check_len(invest.len(), grid)?;
    check_len(theta.cells.len(), grid)?;
    let horizon = grid.horizon();
    Ok(invest
        .iter()
        .zip(theta.cells.iter())
        .zip(grid.cells().iter())
        .map(|((x, sel), cell)| {
            local_kernel_cara(x, &sel.triplet, q_schedule(cell.mid(), horizon), a)
        })
        .collect())
}

fn check_len(got: usize, grid: &TimeGrid) -> Result<(), KernelError> {
    if got != grid.num_cells() {
        return Err(KernelError::LengthMismatch { expected: grid.num_cells(), got });
    }
    Ok(())
}

/// CRRA global kernel over piecewise-constant `(π, c, θ)`:
///
/// * log: `∫_0^T ( ∫_0^t (g - c) ds + g_t - c_t + U(c_t) ) dt`
/// * power: `∫_0^T exp( ∫_0^t p (g - c) ds ) (g_t - c_t + U(c_t)) dt`
pub fn global_kernel_crra(
    policy: &CrraPolicy,
    theta: &TripletPath,
    grid: &TimeGrid,
    p: f64,
) -> Result<f64, KernelError> {
    check_len(policy.consume.len(), grid)?;
    let g = kernel_path_crra(&policy.invest, theta, grid, p)?;
    Ok(global_kernel_crra_from_path(&g, &policy.consume, grid, p))
}

/// Same as [`global_kernel_crra`] but starting from a precomputed kernel path.
pub fn global_kernel_crra_from_path(
    kernel: &[f64],
    consume: &[f64],
    grid: &TimeGrid,
    p: f64,
) -> f64 {
    debug_assert_eq!(kernel.len(), grid.num_cells());
    debug_assert_eq!(consume.len(), grid.num_cells());
    let mut total = 0.0;
    if p == 0.0 {
        let mut inner = 0.0; // ∫_0^{t_i} (g - c) ds
        for (cell, (gi, ci)) in grid.cells().iter().zip(kernel.iter().zip(consume.iter())) {
            let psi = gi - ci;
            let w = cell.width();
            total += inner * w + 0.5 * psi * w * w + (psi + crra_utility(*ci, 0.0)) * w;
            inner += psi * w;
        }
    } else {
        let mut exponent = 0.0f64; // ∫_0^{t_i} p (g - c) ds
        for (cell, (gi, ci)) in grid.cells().iter().zip(kernel.iter().zip(consume.iter())) {
            let psi = gi - ci;
            let w = cell.width();
            total += exponent.exp() * (psi + crra_utility(*ci, p)) * exp_integral(p * psi, w);
            exponent += p * psi * w;
        }
    }
    total
}

/// CARA global kernel over piecewise-constant `(Π, D, θ)` with the kernel
/// path frozen per cell and the consumption ratio `q_s = (T-s+1)^{-1}` kept
/// exact inside both integrals:
///
/// `∫_0^T exp( ∫_0^t -a q_s (h - D) ds ) ( q_t (h_t - D_t) + U(D_t) ) dt`.
pub fn global_kernel_cara(
    policy: &CaraPolicy,
    theta: &TripletPath,
    grid: &TimeGrid,
    a: f64,
) -> Result<f64, KernelError> {
    check_len(policy.excess.len(), grid)?;
    let h = kernel_path_cara(&policy.invest, theta, grid, a)?;
    Ok(global_kernel_cara_from_path(&h, &policy.excess, grid, a))
}

/// Same as [`global_kernel_cara`] but starting from a precomputed kernel path.
pub fn global_kernel_cara_from_path(kernel: &[f64], excess: &[f64], grid: &TimeGrid, a: f64) -> f64 {
    debug_assert_eq!(kernel.len(), grid.num_cells());
    debug_assert_eq!(excess.len(), grid.num_cells());
    let horizon = grid.horizon();
    let mut total = 0.0;
    let mut weight = 1.0; // exp(∫_0^{t_i} -a q (h - D) ds)
    for (cell, (hi, di)) in grid.cells().iter().zip(kernel.iter().zip(excess.iter())) {
        let phi = hi - di;
        let r_start = horizon - cell.start + 1.0;
        let r_end = horizon - cell.end + 1.0;
        let rho = r_end / r_start;
        // ∫_cell (r(s)/r(u))^{aφ} q_s φ ds and U(D) ∫_cell (r(s)/r(u))^{aφ} ds
        let term_kernel = phi * power_integral(a * phi, rho);
        let term_utility = cara_utility(*di, a) * r_start * power_integral(a * phi + 1.0, rho);
        total += weight * (term_kernel + term_utility);
        weight *= rho.powf(a * phi);
    }
    total
}

/// Pointwise kernel order on precomputed per-cell kernel paths: true iff
/// `a` dominates `b` in every cell.
pub fn kernel_dominates(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x >= y)
}

/// Kernel order for CRRA pairs `(π, θ)`.
pub fn kernel_dominates_crra(
    invest_a: &[DVector<f64>],
    theta_a: &TripletPath,
    invest_b: &[DVector<f64>],
    theta_b: &TripletPath,
    grid: &TimeGrid,
    p: f64,
) -> Result<bool, KernelError> {
    let a = kernel_path_crra(invest_a, theta_a, grid, p)?;
    let b = kernel_path_crra(invest_b, theta_b, grid, p)?;
    Ok(kernel_dominates(&a, &b))
}

/// Kernel order for CARA pairs `(Π, θ)`.
pub fn kernel_dominates_cara(
    invest_a: &[DVector<f64>],
    theta_a: &TripletPath,
    invest_b: &[DVector<f64>],
    theta_b: &TripletPath,
    grid: &TimeGrid,
    a: f64,
) -> Result<bool, KernelError> {
    let pa = kernel_path_cara(invest_a, theta_a, grid, a)?;
    let pb = kernel_path_cara(invest_b, theta_b, grid, a)?;
    Ok(kernel_dominates(&pa, &pb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{DiscreteLevyMeasure, JumpAtom};

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    fn triplet_1d(b: f64, sigma2: f64, atoms: &[(f64, f64)]) -> LevyTriplet {
        let measure = DiscreteLevyMeasure::new(
            1,
            atoms
                .iter()
                .map(|(z, w)| JumpAtom { location: vec1(*z), intensity: *w })
                .collect(),
        )
        .unwrap();
        LevyTriplet::new(vec1(b), DMatrix::from_vec(1, 1, vec![sigma2]), measure).unwrap()
    }

    #[test]
    fn crra_kernel_examples() {
        let theta = triplet_1d(0.08, 0.04, &[]);
        assert_eq!(local_kernel_crra(&vec1(0.0), &theta, 0.0).unwrap(), 0.0);
        assert_eq!(local_kernel_crra(&vec1(0.0), &theta, -1.0).unwrap(), 0.0);
        let g = local_kernel_crra(&vec1(1.0), &theta, 0.0).unwrap();
        assert!((g - 0.06).abs() < 1e-15);

        let with_jump = triplet_1d(0.08, 0.04, &[(-0.1, 0.5)]);
        let g = local_kernel_crra(&vec1(1.0), &with_jump, 0.0).unwrap();
        let expected = 0.06 + 0.5 * ((0.9f64).ln() + 0.1);
        assert!((g - expected).abs() < 1e-12);
        assert!((g - 0.0573197).abs() < 1e-7);

        // domain violation
        assert!(local_kernel_crra(&vec1(10.0), &with_jump, 0.0).is_err());
    }

    #[test]
    fn cara_kernel_examples() {
        let theta = triplet_1d(0.05, 0.04, &[]);
        assert_eq!(local_kernel_cara(&vec1(0.0), &theta, 0.5, 1.0), 0.0);
        let h = local_kernel_cara(&vec1(1.0), &theta, 0.5, 1.0);
        assert!((h - 0.04).abs() < 1e-15);

        let with_jump = triplet_1d(0.05, 0.04, &[(0.2, 1.0)]);
        assert_eq!(local_kernel_cara(&vec1(0.0), &with_jump, 0.5, 1.0), 0.0);
        let h = local_kernel_cara(&vec1(1.0), &with_jump, 0.5, 1.0);
        let expected = 0.04 + ((-0.1f64).exp() / -0.5 + 2.0 - 0.2);
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 0.0303252).abs() < 1e-7);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let theta = triplet_1d(0.08, 0.04, &[(-0.1, 0.5), (0.2, 1.0)]);
        let x = vec1(0.7);
        let eps = 1e-6;
        for p in [0.0, -1.0, 0.5] {
            let grad = local_kernel_crra_gradient(&x, &theta, p).unwrap()[0];
            let up = local_kernel_crra(&vec1(0.7 + eps), &theta, p).unwrap();
            let dn = local_kernel_crra(&vec1(0.7 - eps), &theta, p).unwrap();
            assert!((grad - (up - dn) / (2.0 * eps)).abs() < 1e-6, "p={p}");
            let hess = local_kernel_crra_hessian(&x, &theta, p).unwrap()[(0, 0)];
            let g_up = local_kernel_crra_gradient(&vec1(0.7 + eps), &theta, p).unwrap()[0];
            let g_dn = local_kernel_crra_gradient(&vec1(0.7 - eps), &theta, p).unwrap()[0];
            assert!((hess - (g_up - g_dn) / (2.0 * eps)).abs() < 1e-5, "p={p}");
            assert!(hess < 0.0);
        }
        let grad = local_kernel_cara_gradient(&x, &theta, 0.4, 2.0)[0];
        let up = local_kernel_cara(&vec1(0.7 + eps), &theta, 0.4, 2.0);
        let dn = local_kernel_cara(&vec1(0.7 - eps), &theta, 0.4, 2.0);
        assert!((grad - (up - dn) / (2.0 * eps)).abs() < 1e-6);
        assert!(local_kernel_cara_hessian(&x, &theta, 0.4, 2.0)[(0, 0)] < 0.0);
    }

    #[test]
    fn kernel_is_affine_in_the_triplet() {
        let v1 = triplet_1d(0.05, 0.04, &[(-0.1, 0.5)]);
        let v2 = triplet_1d(0.10, 0.09, &[(0.2, 1.0)]);
        let set = ConfidenceSet::new(vec![v1.clone(), v2.clone()], 2.0).unwrap();
        let x = vec1(0.8);
        for lam in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let mix = set.mixture(&[1.0 - lam, lam]).unwrap();
            for p in [0.0, -1.0, 0.3] {
                let mixed = local_kernel_crra(&x, &mix, p).unwrap();
                let combo = (1.0 - lam) * local_kernel_crra(&x, &v1, p).unwrap()
                    + lam * local_kernel_crra(&x, &v2, p).unwrap();
                assert!((mixed - combo).abs() < 1e-12, "p={p} lam={lam}");
            }
            let mixed = local_kernel_cara(&x, &mix, 0.5, 1.5);
            let combo = (1.0 - lam) * local_kernel_cara(&x, &v1, 0.5, 1.5)
                + lam * local_kernel_cara(&x, &v2, 0.5, 1.5);
            assert!((mixed - combo).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_concavity_of_local_kernels() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let theta = triplet_1d(0.06, 0.05, &[(-0.2, 0.4), (0.3, 0.8)]);
        for _ in 0..200 {
            let a = rng.random_range(-2.0..3.0);
            let b = rng.random_range(-2.0..3.0);
            let mid = 0.5 * (a + b);
            for p in [0.0, -1.5, 0.6] {
                let fa = local_kernel_crra(&vec1(a), &theta, p);
                let fb = local_kernel_crra(&vec1(b), &theta, p);
                let fm = local_kernel_crra(&vec1(mid), &theta, p);
                if let (Ok(fa), Ok(fb), Ok(fm)) = (fa, fb, fm) {
                    assert!(fm >= 0.5 * (fa + fb) - 1e-12, "p={p}");
                }
            }
            let fa = local_kernel_cara(&vec1(a), &theta, 0.7, 1.0);
            let fb = local_kernel_cara(&vec1(b), &theta, 0.7, 1.0);
            let fm = local_kernel_cara(&vec1(mid), &theta, 0.7, 1.0);
            assert!(fm >= 0.5 * (fa + fb) - 1e-12);
        }
    }

    fn constant_fixture(g: f64, horizon: f64, cells: usize) -> (Vec<f64>, TimeGrid) {
        let grid = TimeGrid::uniform(horizon, horizon / cells as f64).unwrap();
        (vec![g; grid.num_cells()], grid)
    }

    #[test]
    fn global_crra_against_riemann_quadrature() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for p in [0.0, -1.0, 0.4] {
            let grid = TimeGrid::uniform(1.5, 0.25).unwrap();
            let n = grid.num_cells();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.2)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.2)).collect();
            let exact = global_kernel_crra_from_path(&g, &c, &grid, p);

            // brute-force fine-step Riemann oracle (midpoint rule, fine
            // steps aligned with the cells)
            let fine = 48_000usize;
            let dt = grid.horizon() / fine as f64;
            let cell_of = |t: f64| ((t / 0.25).floor() as usize).min(n - 1);
            let mut inner = 0.0;
            let mut total = 0.0;
            for k in 0..fine {
                let t = (k as f64 + 0.5) * dt;
                let i = cell_of(t);
                let psi = g[i] - c[i];
                let inner_mid = inner + 0.5 * psi * dt;
                let integrand = if p == 0.0 {
                    inner_mid + psi + crra_utility(c[i], 0.0)
                } else {
                    (p * inner_mid).exp() * (psi + crra_utility(c[i], p))
                };
                total += integrand * dt;
                inner += psi * dt;
            }
            let rel = (exact - total).abs() / exact.abs().max(1.0);
            assert!(rel < 1e-6, "p={p}: closed {exact} vs riemann {total}");
        }
    }

    #[test]
    fn global_cara_against_riemann_quadrature() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let a = 1.3;
        let grid = TimeGrid::uniform(2.0, 0.25).unwrap();
        let n = grid.num_cells();
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(-0.05..0.15)).collect();
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.2)).collect();
        let exact = global_kernel_cara_from_path(&h, &d, &grid, a);

        let fine = 80_000usize;
        let dt = grid.horizon() / fine as f64;
        let cell_of = |t: f64| ((t / 0.25).floor() as usize).min(n - 1);
        let mut inner = 0.0f64; // ∫ -a q (h - D) ds
        let mut total = 0.0;
        for k in 0..fine {
            let t = (k as f64 + 0.5) * dt;
            let i = cell_of(t);
            let q = q_schedule(t, grid.horizon());
            let phi = h[i] - d[i];
            let inner_mid = inner + 0.5 * (-a * q * phi * dt);
            total += inner_mid.exp() * (q * phi + cara_utility(d[i], a)) * dt;
            inner += -a * q * phi * dt;
        }
        let rel = (exact - total).abs() / exact.abs().max(1.0);
        assert!(rel < 1e-6, "closed {exact} vs riemann {total}");
    }

    #[test]
    fn zero_kernel_cara_gives_pure_consumption_value() {
        // h ≡ 0, D ≡ 0 collapses to ∫ U(0) dt = -T/a
        let (h, grid) = constant_fixture(0.0, 2.0, 8);
        let d = vec![0.0; h.len()];
        for a in [0.5, 1.0, 2.0] {
            let v = global_kernel_cara_from_path(&h, &d, &grid, a);
            assert!((v - -grid.horizon() / a).abs() < 1e-12, "a={a}");
        }
    }

    #[test]
    fn zero_kernel_crra_collapses_to_consumption_integral() {
        let (g, grid) = constant_fixture(0.0, 1.0, 4);
        let c = vec![0.3; g.len()];
        for p in [0.0, -1.0, 0.5] {
            let got = global_kernel_crra_from_path(&g, &c, &grid, p);
            // direct evaluation of the pure-consumption integral
            let fine = 200_000usize;
            let dt = 1.0 / fine as f64;
            let mut total = 0.0;
            let mut inner = 0.0;
            for _ in 0..fine {
                let integrand = if p == 0.0 {
                    inner - 0.3 + crra_utility(0.3, 0.0)
                } else {
                    (p * inner).exp() * (-0.3 + crra_utility(0.3, p))
                };
                total += integrand * dt;
                inner += -0.3 * dt;
            }
            assert!((got - total).abs() < 1e-4, "p={p}: {got} vs {total}");
        }
    }

    #[test]
    fn dominance_is_reflexive_and_detects_incomparable_pairs() {
        let a = vec![0.06, 0.02];
        assert!(kernel_dominates(&a, &a));
        let higher = vec![0.08, 0.03];
        assert!(kernel_dominates(&higher, &a));
        let crossed = vec![0.08, 0.01];
        assert!(!kernel_dominates(&crossed, &a) && !kernel_dominates(&a, &crossed));
    }

    #[test]
    fn dominance_merton_example() {
        let set = ConfidenceSet::new(vec![triplet_1d(0.08, 0.04, &[])], 2.0).unwrap();
        let grid = TimeGrid::uniform(1.0, 0.5).unwrap();
        let sets = vec![set];
        let theta = TripletPath::constant_vertex(&sets, &grid, 0).unwrap();
        let star = vec![vec1(2.0); grid.num_cells()];
        let zero = vec![vec1(0.0); grid.num_cells()];
        assert!(kernel_dominates_crra(&star, &theta, &zero, &theta, &grid, 0.0).unwrap());
        assert!(!kernel_dominates_crra(&zero, &theta, &star, &theta, &grid, 0.0).unwrap());
    }
}
