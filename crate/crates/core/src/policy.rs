//! Optimal consumption, closed-form global values, value functions, and the
//! ODE/HJB verification machinery.
//!
//! The kernel paths coming out of the solver are piecewise-constant on grid
//! cells; every closed form below integrates them exactly. The backward ODE
//! solvers exist as *independent* oracles for those closed forms and step
//! inside cells only (the right-hand sides are smooth there).

use nalgebra::DVector;
use thiserror::Error;

use crate::kernels::{cara_utility, crra_utility, KernelError, TripletPath};
use crate::market::{GridCell, MarketSpec, TimeGrid, Utility};
use crate::numeric::{exp_integral, gauss_legendre};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("consumption {value} at t={t} outside [{lo}, {hi}]")]
    RangeViolation { t: f64, value: f64, lo: f64, hi: f64 },
    #[error("closed form {closed} and direct quadrature {direct} disagree beyond 1e-8")]
    Mismatch { closed: f64, direct: f64 },
    #[error("value path leaves [{lo}, {hi}] at t={t}: V={value}")]
    BoundsViolation { t: f64, value: f64, lo: f64, hi: f64 },
    #[error("ODE step rejected at t={t}: state {value} left the admissible range")]
    StepRejection { t: f64, value: f64 },
    #[error("HJB bounds are defined for power-CRRA and CARA utilities only")]
    UnsupportedUtility,
    #[error("initial wealth {0} outside the CRRA domain")]
    WealthDomain(f64),
    #[error("kernel path length {got} does not match grid cell count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Solver(#[from] crate::saddle::SolverError),
}

/// The logarithmic investor's optimal consumption ratio `q_t = (T-t+1)^{-1}`.
pub fn q_schedule(t: f64, horizon: f64) -> f64 {
    1.0 / (horizon - t + 1.0)
}

fn check_len(got: usize, grid: &TimeGrid) -> Result<(), PolicyError> {
    if got != grid.num_cells() {
        return Err(PolicyError::LengthMismatch { expected: grid.num_cells(), got });
    }
    Ok(())
}

fn cell_index_at(cells: &[GridCell], t: f64) -> usize {
    match cells.binary_search_by(|c| c.start.total_cmp(&t)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) => (i - 1).min(cells.len() - 1),
    }
}

/// Exact optimal CRRA consumption for a piecewise-constant kernel path.
///
/// For the log family `c*(t) = q_t`. For power utilities `c*(t) = 1/B(t)`
/// where `B` solves `B' = -k_t B - 1`, `B(T) = 1`, `k_t = p g_t / (1-p)`;
/// per cell the solution is `B(t) = B(end) e^{k τ} + (e^{k τ} - 1)/k` with
/// `τ = end - t`, so the schedule is evaluable exactly at any time.
#[derive(Debug, Clone)]
pub struct ConsumptionSchedule {
    horizon: f64,
    cells: Vec<GridCell>,
    /// per-cell `k_i = p g_i / (1-p)` (empty for the log family)
    slopes: Vec<f64>,
    /// `B` at each cell end (empty for the log family)
    b_end: Vec<f64>,
    power: Option<f64>,
}

impl ConsumptionSchedule {
    pub fn at(&self, t: f64) -> f64 {
        match self.power {
            None => q_schedule(t, self.horizon),
            Some(_) => 1.0 / self.b_at(t),
        }
    }

    fn b_at(&self, t: f64) -> f64 {
        let i = cell_index_at(&self.cells, t);
        let tau = self.cells[i].end - t;
        self.b_end[i] * (self.slopes[i] * tau).exp() + exp_integral(self.slopes[i], tau)
    }

    /// `∫_0^t c*(s) ds`, exact. For power utilities this uses
    /// `∫ c = ln(B(u)/B(t)) - k (t - u)` per cell.
    pub fn integral_to(&self, t: f64) -> f64 {
        match self.power {
            None => ((self.horizon + 1.0) / (self.horizon - t + 1.0)).ln(),
            Some(_) => {
                let i = cell_index_at(&self.cells, t);
                let mut acc = 0.0;
                for j in 0..i {
                    let b_start = self.b_at(self.cells[j].start);
                    acc += (b_start / self.b_end[j]).ln() - self.slopes[j] * self.cells[j].width();
                }
                let b_start = self.b_at(self.cells[i].start);
                acc += (b_start / self.b_at(t)).ln() - self.slopes[i] * (t - self.cells[i].start);
                acc
            }
        }
    }

    /// Schedule sampled at cell midpoints (the piecewise representation used
    /// by report tables and the generic global-kernel evaluator).
    pub fn cell_values(&self) -> Vec<f64> {
        self.cells.iter().map(|c| self.at(c.mid())).collect()
    }

    pub fn grid_values(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.cells.iter().map(|c| (c.start, self.at(c.start))).collect();
        out.push((self.horizon, self.at(self.horizon)));
        out
    }
}

/// Optimal CRRA consumption for a kernel path (log branch `q_t`, power branch
/// the exact product formula).
pub fn optimal_consumption_crra(
    kernel: &[f64],
    p: f64,
    grid: &TimeGrid,
) -> Result<ConsumptionSchedule, PolicyError> {
    check_len(kernel.len(), grid)?;
    let cells = grid.cells().to_vec();
    if p == 0.0 {
        return Ok(ConsumptionSchedule {
            horizon: grid.horizon(),
            cells,
            slopes: Vec::new(),
            b_end: Vec::new(),
            power: None,
        });
    }
    let slopes: Vec<f64> = kernel.iter().map(|g| p * g / (1.0 - p)).collect();
    let mut b_end = vec![0.0; cells.len()];
    let mut b = 1.0; // B(T) = 1
    for i in (0..cells.len()).rev() {
        b_end[i] = b;
        let tau = cells[i].width();
        b = b * (slopes[i] * tau).exp() + exp_integral(slopes[i], tau);
    }
    Ok(ConsumptionSchedule {
        horizon: grid.horizon(),
        cells,
        slopes,
        b_end,
        power: Some(p),
    })
}

/// Exact optimal CARA excess consumption `D*(t) = q_t ∫_t^T h_s ds` for a
/// piecewise-constant kernel path.
#[derive(Debug, Clone)]
pub struct ExcessSchedule {
    horizon: f64,
    cells: Vec<GridCell>,
    kernel: Vec<f64>,
    /// `∫_{cell end}^T h ds` per cell
    tail_end: Vec<f64>,
}

impl ExcessSchedule {
    pub fn at(&self, t: f64) -> f64 {
        q_schedule(t, self.horizon) * self.tail_at(t)
    }

    /// `∫_t^T h_s ds`.
    pub fn tail_at(&self, t: f64) -> f64 {
        let i = cell_index_at(&self.cells, t);
        self.tail_end[i] + self.kernel[i] * (self.cells[i].end - t)
    }

    pub fn cell_values(&self) -> Vec<f64> {
        self.cells.iter().map(|c| self.at(c.mid())).collect()
    }

    /// `∫_0^t q_s D*(s) ds = ∫_0^t q_s^2 (∫_s^T h) ds`, exact per cell.
    pub fn weighted_integral_to(&self, t: f64) -> f64 {
        let i = cell_index_at(&self.cells, t);
        let mut acc = 0.0;
        for j in 0..=i {
            let cell = &self.cells[j];
            let upto = if j == i { t } else { cell.end };
            let r_start = self.horizon - cell.start + 1.0;
            let r_end = self.horizon - cell.end + 1.0;
            let q_gap = q_schedule(upto, self.horizon) - q_schedule(cell.start, self.horizon);
            let log_gap = (r_start / (self.horizon - upto + 1.0)).ln();
            acc += self.tail_end[j] * q_gap + self.kernel[j] * (log_gap - r_end * q_gap);
        }
        acc
    }
}

pub fn optimal_excess_consumption_cara(
    kernel: &[f64],
    grid: &TimeGrid,
) -> Result<ExcessSchedule, PolicyError> {
    check_len(kernel.len(), grid)?;
    let cells = grid.cells().to_vec();
    let mut tail_end = vec![0.0; cells.len()];
    let mut tail = 0.0;
    for i in (0..cells.len()).rev() {
        tail_end[i] = tail;
        tail += kernel[i] * cells[i].width();
    }
    Ok(ExcessSchedule {
        horizon: grid.horizon(),
        cells,
        kernel: kernel.to_vec(),
        tail_end,
    })
}

/// Checks a consumption path against the admissible range of the maximizer:
/// for `p > 0` the bracket `[(-p g_max/(1-p) ∨ 0) ∧ 1, -p g_min/(1-p) ∨ 1]`,
/// for `p <= 0` the same with min/max swapped. At a saddle additionally
/// requires `c <= 1`.
pub fn consumption_range_check(
    values: &[(f64, f64)],
    kernel: &[f64],
    p: f64,
    at_saddle: bool,
) -> Result<(), PolicyError> {
    let g_max = kernel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let g_min = kernel.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = |g: f64| -p * g / (1.0 - p);
    let (lo, mut hi) = if p > 0.0 {
        ((ratio(g_max).max(0.0)).min(1.0), ratio(g_min).max(1.0))
    } else {
        ((ratio(g_min).max(0.0)).min(1.0), ratio(g_max).max(1.0))
    };
    if at_saddle {
        hi = hi.min(1.0);
    }
    let tol = 1e-9;
    for &(t, c) in values {
        if c < lo - tol || c > hi + tol {
            return Err(PolicyError::RangeViolation { t, value: c, lo, hi });
        }
    }
    Ok(())
}

/// Closed-form value of the global kernel at the optimal consumption for a
/// given kernel path:
///
/// * log: `∫_0^T (∫_0^t g ds + g_t) dt - (T+1) ln(T+1)`
/// * power: `(A^{1-p} - 1)/p` with
///   `A = exp(∫_0^T p g/(1-p)) + ∫_0^T exp(∫_0^s p g/(1-p)) ds`
/// * CARA: `(1 - (T+1) exp(-a ∫_0^T h / (T+1))) / a`
///
/// The result is re-derived by composite Gauss quadrature of the defining
/// time integral with the exact optimal consumption; a gap above 1e-8 is an
/// error.
pub fn global_value(kernel: &[f64], utility: &Utility, grid: &TimeGrid) -> Result<f64, PolicyError> {
    check_len(kernel.len(), grid)?;
    let closed = global_value_closed_form(kernel, utility, grid)?;
    let direct = global_value_quadrature(kernel, utility, grid)?;
    if (closed - direct).abs() > 1e-8 * closed.abs().max(1.0) {
        return Err(PolicyError::Mismatch { closed, direct });
    }
    Ok(closed)
}

fn global_value_closed_form(
    kernel: &[f64],
    utility: &Utility,
    grid: &TimeGrid,
) -> Result<f64, PolicyError> {
    let horizon = grid.horizon();
    match utility {
        Utility::LogCrra => {
            let mut prefix = 0.0;
            let mut total = 0.0;
            for (cell, g) in grid.cells().iter().zip(kernel.iter()) {
                let w = cell.width();
                total += prefix * w + 0.5 * g * w * w + g * w;
                prefix += g * w;
            }
            Ok(total - (horizon + 1.0) * (horizon + 1.0).ln())
        }
        Utility::PowerCrra { exponent: p } => {
            let mut exponent_acc = 0.0f64;
            let mut integral = 0.0;
            for (cell, g) in grid.cells().iter().zip(kernel.iter()) {
                let k = p * g / (1.0 - p);
                integral += exponent_acc.exp() * exp_integral(k, cell.width());
                exponent_acc += k * cell.width();
            }
            let a = exponent_acc.exp() + integral;
            Ok((a.powf(1.0 - p) - 1.0) / p)
        }
        Utility::Cara { risk_aversion: a } => {
            let total: f64 = grid
                .cells()
                .iter()
                .zip(kernel.iter())
                .map(|(c, h)| h * c.width())
                .sum();
            Ok((1.0 - (horizon + 1.0) * (-a * total / (horizon + 1.0)).exp()) / a)
        }
    }
}

fn global_value_quadrature(
    kernel: &[f64],
    utility: &Utility,
    grid: &TimeGrid,
) -> Result<f64, PolicyError> {
    let horizon = grid.horizon();
    let panels = |w: f64| ((w / 0.05).ceil() as usize).max(1);
    match utility {
        Utility::LogCrra => {
            let mut prefix_g = 0.0;
            let mut total = 0.0;
            for (cell, g) in grid.cells().iter().zip(kernel.iter()) {
                let f = |t: f64| {
                    let inner_g = prefix_g + g * (t - cell.start);
                    let inner_q = ((horizon + 1.0) / (horizon - t + 1.0)).ln();
                    let q = q_schedule(t, horizon);
                    inner_g - inner_q + g - q + q.ln()
                };
                total += composite_gauss(cell.start, cell.end, panels(cell.width()), f);
                prefix_g += g * cell.width();
            }
            Ok(total)
        }
        Utility::PowerCrra { exponent } => {
            let p = *exponent;
            let schedule = optimal_consumption_crra(kernel, p, grid)?;
            let mut prefix_g = 0.0;
            let mut total = 0.0;
            for (cell, g) in grid.cells().iter().zip(kernel.iter()) {
                let f = |t: f64| {
                    let inner = prefix_g + g * (t - cell.start) - schedule.integral_to(t);
                    let c = schedule.at(t);
                    (p * inner).exp() * (g - c + crra_utility(c, p))
                };
                total += composite_gauss(cell.start, cell.end, panels(cell.width()), f);
                prefix_g += g * cell.width();
            }
            Ok(total)
        }
        Utility::Cara { risk_aversion } => {
            let a = *risk_aversion;
            let schedule = optimal_excess_consumption_cara(kernel, grid)?;
            let mut prefix_qh = 0.0; // ∫ q h ds over completed cells
            let mut total = 0.0;
            for (cell, h) in grid.cells().iter().zip(kernel.iter()) {
                let r_start = horizon - cell.start + 1.0;
                let f = |t: f64| {
                    let qh = prefix_qh + h * (r_start / (horizon - t + 1.0)).ln();
                    let qd = schedule.weighted_integral_to(t);
                    let d = schedule.at(t);
                    let q = q_schedule(t, horizon);
                    (-a * (qh - qd)).exp() * (q * (h - d) + cara_utility(d, a))
                };
                total += composite_gauss(cell.start, cell.end, panels(cell.width()), f);
                prefix_qh += h * (r_start / (horizon - cell.end + 1.0)).ln();
            }
            Ok(total)
        }
    }
}

fn composite_gauss(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| gauss_legendre(a + i as f64 * w, a + (i + 1) as f64 * w, &f))
        .sum()
}

/// Value function at the initial wealth:
/// log `(T+1) ln w0 + G*`, power `w0^p/p + w0^p G*`,
/// CARA `e^{-a w0/(T+1)} (-1/a + H*)`.
pub fn value_function(
    initial_wealth: f64,
    global_value: f64,
    utility: &Utility,
    horizon: f64,
) -> Result<f64, PolicyError> {
    match utility {
        Utility::LogCrra => {
            if initial_wealth <= 0.0 {
                return Err(PolicyError::WealthDomain(initial_wealth));
            }
            Ok((horizon + 1.0) * initial_wealth.ln() + global_value)
        }
        Utility::PowerCrra { exponent: p } => {
            if initial_wealth <= 0.0 {
                return Err(PolicyError::WealthDomain(initial_wealth));
            }
            let wp = initial_wealth.powf(*p);
            Ok(wp / p + wp * global_value)
        }
        Utility::Cara { risk_aversion: a } => {
            Ok((-a * initial_wealth / (horizon + 1.0)).exp() * (-1.0 / a + global_value))
        }
    }
}

/// A backward ODE trajectory, sampled at step boundaries in decreasing time.
#[derive(Debug, Clone)]
pub struct OdePath {
    pub samples: Vec<(f64, f64)>,
}

impl OdePath {
    pub fn value_at_start(&self) -> f64 {
        self.samples.last().expect("nonempty path").1
    }
}

/// Backward Riccati integration of `dc/dt = (p g_t/(1-p)) c + c^2`, `c(T)=1`
/// with classical RK4 at roughly the requested step (aligned to cell
/// boundaries, where the right-hand side jumps). Rejects steps that leave
/// `(0, +inf)`.
pub fn solve_riccati_crra(
    kernel: &[f64],
    p: f64,
    grid: &TimeGrid,
    step: f64,
) -> Result<OdePath, PolicyError> {
    check_len(kernel.len(), grid)?;
    let mut samples: Vec<(f64, f64)> = vec![(grid.horizon(), 1.0)];
    for (cell, g) in grid.cells().iter().zip(kernel.iter()).rev() {
        let k = p * g / (1.0 - p);
        let n = ((cell.width() / step).ceil() as usize).max(1);
        let y_end = samples.last().unwrap().1;
        let path = crate::numeric::rk4_backward(
            cell.start,
            cell.end,
            y_end,
            n,
            |_, c| k * c + c * c,
            |c| c.is_finite() && c > 0.0,
        )
        .ok_or(PolicyError::StepRejection { t: cell.start, value: f64::NAN })?;
        samples.extend(path.into_iter().skip(1));
    }
    Ok(OdePath { samples })
}

/// Backward integration of `dD/dt = q_t (D - h_t)`, `D(T) = 0`.
pub fn solve_ode_cara(kernel: &[f64], grid: &TimeGrid, step: f64) -> Result<OdePath, PolicyError> {
    check_len(kernel.len(), grid)?;
    let horizon = grid.horizon();
    let mut samples: Vec<(f64, f64)> = vec![(horizon, 0.0)];
    for (cell, h) in grid.cells().iter().zip(kernel.iter()).rev() {
        let n = ((cell.width() / step).ceil() as usize).max(1);
        let y_end = samples.last().unwrap().1;
        let path = crate::numeric::rk4_backward(
            cell.start,
            cell.end,
            y_end,
            n,
            |t, d| q_schedule(t, horizon) * (d - h),
            |d| d.is_finite(),
        )
        .ok_or(PolicyError::StepRejection { t: cell.start, value: f64::NAN })?;
        samples.extend(path.into_iter().skip(1));
    }
    Ok(OdePath { samples })
}

/// Range `[V_min, V_max]` of the HJB value path (power CRRA and CARA).
#[derive(Debug, Clone, Copy)]
pub struct HjbBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub min_branch: &'static str,
    pub max_branch: &'static str,
}

/// Case-split bounds on the HJB solution from the extreme kernel values.
pub fn hjb_bounds(
    kernel_min: f64,
    kernel_max: f64,
    utility: &Utility,
    horizon: f64,
) -> Result<HjbBounds, PolicyError> {
    match utility {
        Utility::LogCrra => Err(PolicyError::UnsupportedUtility),
        Utility::PowerCrra { exponent } => {
            let p = *exponent;
            let threshold = (1.0 - p) / (-p);
            let formula = |g: f64| ((-p * g / (1.0 - p)).powf(p - 1.0) - 1.0) / p;
            let (v_min, min_branch) = if kernel_min >= threshold {
                (0.0, "zero")
            } else if p < 0.0 && kernel_min <= 0.0 {
                (f64::NEG_INFINITY, "unbounded")
            } else {
                (formula(kernel_min), "interior")
            };
            let (v_max, max_branch) = if kernel_max <= threshold {
                (0.0, "zero")
            } else if p > 0.0 && kernel_max >= 0.0 {
                (f64::INFINITY, "unbounded")
            } else {
                (formula(kernel_max), "interior")
            };
            Ok(HjbBounds { v_min, v_max, min_branch, max_branch })
        }
        Utility::Cara { risk_aversion } => {
            let a = *risk_aversion;
            let (v_min, min_branch) = if kernel_min >= (1.0 + (horizon + 1.0).ln()) / a {
                (0.0, "zero")
            } else {
                (
                    (1.0 - (horizon + 1.0) * (1.0 - a * kernel_min).exp()) / a,
                    "interior",
                )
            };
            let (v_max, max_branch) = if kernel_max >= 1.0 / a {
                ((1.0 - (1.0 - a * kernel_max).exp()) / a, "interior")
            } else {
                (0.0, "zero")
            };
            Ok(HjbBounds { v_min, v_max, min_branch, max_branch })
        }
    }
}

/// HJB value path reconstructed from the CRRA consumption schedule,
/// `V(t) = (c(t)^{p-1} - 1)/p`.
pub fn crra_value_path(schedule: &ConsumptionSchedule, p: f64, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|t| (schedule.at(*t).powf(p - 1.0) - 1.0) / p)
        .collect()
}

/// HJB value path reconstructed from the CARA excess-consumption schedule,
/// `V(t) = (1 - q_t^{-1} e^{-a D(t)}) / a`.
pub fn cara_value_path(schedule: &ExcessSchedule, a: f64, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|t| {
            let q = q_schedule(*t, schedule.horizon);
            (1.0 - (-a * schedule.at(*t)).exp() / q) / a
        })
        .collect()
}

/// Asserts every value stays inside the bounds, and that the transformed
/// state `1 + pV` (resp. `1 - aV`) keeps the sign the verification argument
/// requires.
pub fn check_hjb_containment(
    values: &[(f64, f64)],
    bounds: &HjbBounds,
    utility: &Utility,
) -> Result<(), PolicyError> {
    let tol = 1e-9;
    for &(t, v) in values {
        if v < bounds.v_min - tol || v > bounds.v_max + tol {
            return Err(PolicyError::BoundsViolation {
                t,
                value: v,
                lo: bounds.v_min,
                hi: bounds.v_max,
            });
        }
        let positive = match utility {
            Utility::PowerCrra { exponent } => 1.0 + exponent * v,
            Utility::Cara { risk_aversion } => 1.0 - risk_aversion * v,
            Utility::LogCrra => 1.0,
        };
        if positive <= 0.0 {
            return Err(PolicyError::BoundsViolation {
                t,
                value: v,
                lo: bounds.v_min,
                hi: bounds.v_max,
            });
        }
    }
    Ok(())
}

/// Consumption plan attached to a solved market: the exact schedule plus its
/// piecewise (mid-cell) sampling.
#[derive(Debug, Clone)]
pub enum ConsumptionPlan {
    Crra(ConsumptionSchedule),
    Cara(ExcessSchedule),
}

impl ConsumptionPlan {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ConsumptionPlan::Crra(s) => s.at(t),
            ConsumptionPlan::Cara(s) => s.at(t),
        }
    }

    pub fn cell_values(&self) -> Vec<f64> {
        match self {
            ConsumptionPlan::Crra(s) => s.cell_values(),
            ConsumptionPlan::Cara(s) => s.cell_values(),
        }
    }
}

/// A fully assembled saddle solution: per-cell investment, worst-case
/// triplet path, kernel path, optimal consumption, certificates and the
/// scalar values.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub investment: Vec<DVector<f64>>,
    pub triplets: TripletPath,
    pub kernel: Vec<f64>,
    pub certificates: Vec<f64>,
    pub consumption: ConsumptionPlan,
    pub global_value: f64,
    pub value_at_w0: f64,
}

/// Solves the market and assembles policy, worst case, consumption and
/// values.
pub fn solve_market(
    spec: &MarketSpec,
    cfg: &crate::saddle::SolverConfig,
) -> Result<SaddleSolution, PolicyError> {
    let skeleton = crate::saddle::solve_policy_measure(spec, cfg)?;
    assemble_solution(spec, skeleton)
}

/// Builds the consumption plan and values on top of a solved skeleton.
pub fn assemble_solution(
    spec: &MarketSpec,
    skeleton: crate::saddle::SaddleSkeleton,
) -> Result<SaddleSolution, PolicyError> {
    let grid = &spec.grid;
    let kernel = skeleton.kernel_path();
    let consumption = match spec.utility {
        Utility::Cara { .. } => {
            ConsumptionPlan::Cara(optimal_excess_consumption_cara(&kernel, grid)?)
        }
        _ => {
            let p = spec.utility.crra_exponent().unwrap();
            let schedule = optimal_consumption_crra(&kernel, p, grid)?;
            let sampled: Vec<(f64, f64)> = grid
                .cells()
                .iter()
                .map(|c| (c.mid(), schedule.at(c.mid())))
                .collect();
            consumption_range_check(&sampled, &kernel, p, true)?;
            ConsumptionPlan::Crra(schedule)
        }
    };
    let gv = global_value(&kernel, &spec.utility, grid)?;
    let value = value_function(spec.initial_wealth, gv, &spec.utility, grid.horizon())?;
    let (investment, certificates) = skeleton.investment_and_certificates();
    let triplets = skeleton.into_triplet_path(grid)?;
    Ok(SaddleSolution {
        investment,
        triplets,
        kernel,
        certificates,
        consumption,
        global_value: gv,
        value_at_w0: value,
    })
}
