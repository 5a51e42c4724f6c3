//! Seeded Monte-Carlo simulation of wealth under a chosen triplet path,
//! objective estimation, and the two statistical verifiers: the
//! martingale-equality check (closed-form value vs. simulated objective) and
//! the objective-level saddle check under policy/measure perturbations.
//!
//! CRRA wealth is simulated in log space, which makes the diffusion and jump
//! dynamics exact per step for piecewise-constant coefficients; only the
//! consumption-utility time integral is discretized (left-point rule). CARA
//! wealth follows Euler-Maruyama with exact jump application. Jumps are
//! drawn per atom from independent Poisson clocks. Paths are reproducible:
//! every path owns counter-derived RNG streams, and accumulation uses
//! pairwise summation, so results do not depend on thread scheduling.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{cara_utility, CaraPolicy, CrraPolicy, PolicyPath, TripletPath};
use crate::market::{MarketSpec, Utility};
use crate::numeric::mean_and_std_error;
use crate::policy::{q_schedule, ConsumptionPlan, SaddleSolution};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("bankruptcy on path {path} at t={t}: jump drove 1 + π^T z to {factor} <= 0")]
    Bankruptcy { path: usize, t: f64, factor: f64 },
    #[error("policy family does not match the market utility")]
    PolicyMismatch,
    #[error("path length {got} does not match grid cell count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("martingale equality violated: z-score {z}")]
    EqualityViolation { z: f64 },
    #[error("objective saddle violated by perturbation `{label}`: gap {gap} beyond 3 SE")]
    SaddleViolation { label: String, gap: f64 },
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),
}

/// Path-generation contract: seed, path count and the antithetic flag. The
/// time step is the grid's cell width. Identical bundles give bit-identical
/// results.
#[derive(Debug, Clone, Copy)]
pub struct PathBundle {
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl PathBundle {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self { paths, seed, antithetic: false }
    }

    pub fn antithetic(paths: usize, seed: u64) -> Self {
        Self { paths, seed, antithetic: true }
    }

    /// Number of independent units (pairs under antithetic sampling).
    fn units(&self) -> usize {
        if self.antithetic {
            self.paths.div_ceil(2)
        } else {
            self.paths
        }
    }

    fn effective_paths(&self) -> usize {
        if self.antithetic {
            2 * self.units()
        } else {
            self.paths
        }
    }
}

/// Monte-Carlo estimate of the objective for one `(policy, measure)` pair.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
}

/// Simulation output: per-unit objectives, their estimate, per-path terminal
/// (log-)wealth and total jump counts per atom slot.
#[derive(Debug, Clone)]
pub struct SimBatch {
    pub estimate: ObjectiveEstimate,
    pub unit_objectives: Vec<f64>,
    pub terminal: Vec<f64>,
    pub jump_counts: Vec<u64>,
}

// per-cell coefficients shared by every path
struct CrraCell {
    width: f64,
    sqrt_width: f64,
    log_drift: f64,
    vol: f64,
    log_consume: f64,
    jumps: Vec<JumpClock>,
}

struct CaraCell {
    width: f64,
    sqrt_width: f64,
    q_start: f64,
    drift_const: f64,
    vol: f64,
    excess: f64,
    jumps: Vec<JumpClock>,
}

struct JumpClock {
    atom: usize,
    lambda: f64,
    exp_neg_lambda: f64,
    /// effect of one jump: `ln(1 + π^T z)` (CRRA) or `Π^T z` (CARA)
    effect: f64,
    /// CRRA only: `1 + π^T z`, to detect bankruptcy
    factor: f64,
}

fn gaussian_stream(seed: u64, unit: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * unit as u64);
    rng
}

fn jump_stream(seed: u64, unit: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * unit as u64 + 1);
    rng
}

/// Knuth Poisson sampling; exact, fast for the small per-step means here.
fn poisson_draw(rng: &mut ChaCha8Rng, exp_neg_lambda: f64) -> u32 {
    let mut k = 0u32;
    let mut prod: f64 = rng.random();
    while prod > exp_neg_lambda {
        k += 1;
        prod *= rng.random::<f64>();
    }
    k
}

fn vol_of(invest: &DVector<f64>, triplet: &crate::market::LevyTriplet) -> f64 {
    let y = triplet.cholesky_factor().transpose() * invest;
    y.norm()
}

/// Simulates log-wealth per Itô's formula for the CRRA wealth SDE: between
/// jumps `d ln W = (π^T (b - Σ_atoms w z) - c - π^T Σ π / 2) dt + π^T σ dB`,
/// at a jump `ln W += ln(1 + π^T z)`. Returns per-path objectives
/// `∫ U(c_t W_t) dt + U(W_T)` with the utility integral discretized by the
/// left-point rule on grid cells.
pub fn simulate_wealth_crra(
    policy: &CrraPolicy,
    theta: &TripletPath,
    spec: &MarketSpec,
    bundle: &PathBundle,
) -> Result<SimBatch, SimError> {
    let Some(p) = spec.utility.crra_exponent() else {
        return Err(SimError::PolicyMismatch);
    };
    let grid = &spec.grid;
    let n = grid.num_cells();
    if policy.invest.len() != n || policy.consume.len() != n || theta.cells().len() != n {
        return Err(SimError::LengthMismatch { expected: n, got: policy.invest.len() });
    }
    let mut max_atoms = 0usize;
    let cells: Vec<CrraCell> = grid
        .cells()
        .iter()
        .map(|cell| {
            let invest = &policy.invest[cell.index];
            let consume = policy.consume[cell.index];
            let triplet = theta.triplet(cell.index);
            let mut drift = invest.dot(triplet.drift())
                - 0.5 * vol_of(invest, triplet).powi(2)
                - consume;
            let mut jumps = Vec::with_capacity(triplet.jumps().atoms().len());
            for (ai, atom) in triplet.jumps().atoms().iter().enumerate() {
                let size = invest.dot(&atom.location);
                drift -= atom.intensity * size; // compensator folded into drift
                let lambda = atom.intensity * cell.width();
                jumps.push(JumpClock {
                    atom: ai,
                    lambda,
                    exp_neg_lambda: (-lambda).exp(),
                    effect: (1.0 + size).ln(),
                    factor: 1.0 + size,
                });
                max_atoms = max_atoms.max(ai + 1);
            }
            CrraCell {
                width: cell.width(),
                sqrt_width: cell.width().sqrt(),
                log_drift: drift,
                vol: vol_of(invest, triplet),
                log_consume: consume.ln(),
                jumps,
            }
        })
        .collect();

    let log_w0 = spec.initial_wealth.ln();
    let utility = move |log_value: f64| -> f64 {
        if p == 0.0 {
            log_value
        } else {
            (p * log_value).exp() / p
        }
    };

    run_paths(bundle, max_atoms, move |sign, grng, jrng| {
        let mut log_w = log_w0;
        let mut objective = 0.0;
        let mut counts = vec![0u64; max_atoms];
        for cell in &cells {
            objective += utility(cell.log_consume + log_w) * cell.width;
            let z: f64 = grng.sample(StandardNormal);
            log_w += cell.log_drift * cell.width + cell.vol * cell.sqrt_width * sign * z;
            for clock in &cell.jumps {
                if clock.lambda == 0.0 {
                    continue;
                }
                let k = poisson_draw(jrng, clock.exp_neg_lambda);
                if k > 0 {
                    if clock.factor <= 0.0 {
                        return Err((clock.factor, 0.0));
                    }
                    log_w += k as f64 * clock.effect;
                    counts[clock.atom] += k as u64;
                }
            }
        }
        objective += utility(log_w);
        Ok((objective, log_w, counts))
    })
}

/// Simulates CARA wealth by Euler-Maruyama on
/// `dW = Π^T dX - (D + q_t W) dt` with exact jump application `Π^T z`.
pub fn simulate_wealth_cara(
    policy: &CaraPolicy,
    theta: &TripletPath,
    spec: &MarketSpec,
    bundle: &PathBundle,
) -> Result<SimBatch, SimError> {
    let Utility::Cara { risk_aversion: a } = spec.utility else {
        return Err(SimError::PolicyMismatch);
    };
    let grid = &spec.grid;
    let n = grid.num_cells();
    if policy.invest.len() != n || policy.excess.len() != n || theta.cells().len() != n {
        return Err(SimError::LengthMismatch { expected: n, got: policy.invest.len() });
    }
    let horizon = grid.horizon();
    let mut max_atoms = 0usize;
    let cells: Vec<CaraCell> = grid
        .cells()
        .iter()
        .map(|cell| {
            let invest = &policy.invest[cell.index];
            let excess = policy.excess[cell.index];
            let triplet = theta.triplet(cell.index);
            let mut drift = invest.dot(triplet.drift()) - excess;
            let mut jumps = Vec::with_capacity(triplet.jumps().atoms().len());
            for (ai, atom) in triplet.jumps().atoms().iter().enumerate() {
                let size = invest.dot(&atom.location);
                drift -= atom.intensity * size;
                let lambda = atom.intensity * cell.width();
                jumps.push(JumpClock {
                    atom: ai,
                    lambda,
                    exp_neg_lambda: (-lambda).exp(),
                    effect: size,
                    factor: 1.0,
                });
                max_atoms = max_atoms.max(ai + 1);
            }
            CaraCell {
                width: cell.width(),
                sqrt_width: cell.width().sqrt(),
                q_start: q_schedule(cell.start, horizon),
                drift_const: drift,
                vol: vol_of(invest, triplet),
                excess,
                jumps,
            }
        })
        .collect();

    let w0 = spec.initial_wealth;
    run_paths(bundle, max_atoms, move |sign, grng, jrng| {
        let mut w = w0;
        let mut objective = 0.0;
        let mut counts = vec![0u64; max_atoms];
        for cell in &cells {
            let consumption = cell.excess + cell.q_start * w;
            objective += cara_utility(consumption, a) * cell.width;
            w += (cell.drift_const - cell.q_start * w) * cell.width
                + cell.vol * cell.sqrt_width * sign * grng.sample::<f64, _>(StandardNormal);
            for clock in &cell.jumps {
                if clock.lambda == 0.0 {
                    continue;
                }
                let k = poisson_draw(jrng, clock.exp_neg_lambda);
                if k > 0 {
                    w += k as f64 * clock.effect;
                    counts[clock.atom] += k as u64;
                }
            }
        }
        objective += cara_utility(w, a);
        Ok((objective, w, counts))
    })
}

/// Drives the per-path closure over all units in parallel; deterministic for
/// a fixed bundle.
fn run_paths<F>(bundle: &PathBundle, max_atoms: usize, body: F) -> Result<SimBatch, SimError>
where
    F: Fn(f64, &mut ChaCha8Rng, &mut ChaCha8Rng) -> Result<(f64, f64, Vec<u64>), (f64, f64)>
        + Sync,
{
    let units = bundle.units();
    let results: Vec<Result<(f64, Vec<f64>, Vec<u64>), SimError>> = (0..units)
        .into_par_iter()
        .map(|unit| {
            let signs: &[f64] = if bundle.antithetic { &[1.0, -1.0] } else { &[1.0] };
            let mut terminals = Vec::with_capacity(signs.len());
            let mut counts = vec![0u64; max_atoms];
            let mut value = 0.0;
            for (h, sign) in signs.iter().enumerate() {
                let mut grng = gaussian_stream(bundle.seed, unit);
                let mut jrng = jump_stream(bundle.seed, unit);
                match body(*sign, &mut grng, &mut jrng) {
                    Ok((objective, terminal, c)) => {
                        value += objective;
                        terminals.push(terminal);
                        for (total, k) in counts.iter_mut().zip(c.iter()) {
                            *total += k;
                        }
                    }
                    Err((factor, _)) => {
                        return Err(SimError::Bankruptcy {
                            path: if bundle.antithetic { 2 * unit + h } else { unit },
                            t: f64::NAN,
                            factor,
                        });
                    }
                }
            }
            Ok((value / signs.len() as f64, terminals, counts))
        })
        .collect();

    let mut unit_objectives = Vec::with_capacity(units);
    let mut terminal = Vec::with_capacity(bundle.effective_paths());
    let mut jump_counts = vec![0u64; max_atoms];
    for r in results {
        let (value, terminals, counts) = r?;
        unit_objectives.push(value);
        terminal.extend(terminals);
        for (total, k) in jump_counts.iter_mut().zip(counts.iter()) {
            *total += k;
        }
    }
    let (mean, std_error) = mean_and_std_error(&unit_objectives);
    Ok(SimBatch {
        estimate: ObjectiveEstimate {
            mean,
            std_error,
            paths: bundle.effective_paths(),
            seed: bundle.seed,
        },
        unit_objectives,
        terminal,
        jump_counts,
    })
}

/// Runs the simulator matching the policy family and returns the objective
/// estimate.
pub fn estimate_objective(
    policy: &PolicyPath,
    theta: &TripletPath,
    spec: &MarketSpec,
    bundle: &PathBundle,
) -> Result<ObjectiveEstimate, SimError> {
    let batch = match policy {
        PolicyPath::Crra(p) => simulate_wealth_crra(p, theta, spec, bundle)?,
        PolicyPath::Cara(p) => simulate_wealth_cara(p, theta, spec, bundle)?,
    };
    Ok(batch.estimate)
}

/// Builds the simulatable piecewise policy from a solved market: investment
/// per cell, consumption sampled at cell starts (matching the left-point
/// integration rule).
pub fn solution_policy(solution: &SaddleSolution, spec: &MarketSpec) -> PolicyPath {
    let starts: Vec<f64> = spec.grid.cells().iter().map(|c| c.start).collect();
    match &solution.consumption {
        ConsumptionPlan::Crra(schedule) => PolicyPath::Crra(CrraPolicy {
            invest: solution.investment.clone(),
            consume: starts.iter().map(|t| schedule.at(*t)).collect(),
        }),
        ConsumptionPlan::Cara(schedule) => PolicyPath::Cara(CaraPolicy {
            invest: solution.investment.clone(),
            excess: starts.iter().map(|t| schedule.at(*t)).collect(),
        }),
    }
}

/// Outcome of the martingale-equality check: the simulated objective at the
/// solved `(policy, worst case)` must sit within three standard errors of
/// the closed-form value function.
#[derive(Debug, Clone)]
pub struct MartingaleReport {
    pub estimate: ObjectiveEstimate,
    pub target: f64,
    pub z_score: f64,
    pub pass: bool,
}

pub fn verify_martingale_equality(
    solution: &SaddleSolution,
    spec: &MarketSpec,
    bundle: &PathBundle,
) -> Result<MartingaleReport, SimError> {
    let policy = solution_policy(solution, spec);
    let estimate = estimate_objective(&policy, &solution.triplets, spec, bundle)?;
    let target = solution.value_at_w0;
    let diff = estimate.mean - target;
    let z_score = if estimate.std_error > 0.0 {
        diff / estimate.std_error
    } else if diff.abs() < 1e-9 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MartingaleReport { estimate, target, z_score, pass: z_score.abs() <= 3.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationSide {
    /// perturbed policy must not beat the optimum: `J <= J* + 3 SE`
    Policy,
    /// perturbed measure must not undercut the worst case: `J >= J* - 3 SE`
    Measure,
    /// no perturbation: equality within noise
    Identity,
}

#[derive(Debug, Clone)]
pub struct PerturbationRow {
    pub label: String,
    pub side: PerturbationSide,
    pub mean: f64,
    pub std_error: f64,
    /// signed slack of the saddle inequality (negative = violation size)
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ObjectiveSaddleReport {
    pub baseline: ObjectiveEstimate,
    pub rows: Vec<PerturbationRow>,
    pub pass: bool,
}

/// Objective-level saddle verification: scaled investments and shifted
/// consumption must not beat the optimum under the worst case; vertex
/// measures must not push the objective below the worst-case value. All
/// runs share the seed (common random numbers).
pub fn verify_objective_saddle(
    solution: &SaddleSolution,
    spec: &MarketSpec,
    bundle: &PathBundle,
) -> Result<ObjectiveSaddleReport, SimError> {
    let policy = solution_policy(solution, spec);
    let baseline = estimate_objective(&policy, &solution.triplets, spec, bundle)?;
    let mut rows = Vec::new();

    let combined_se = |se: f64| 3.0 * (se * se + baseline.std_error * baseline.std_error).sqrt();

    // identity row: same policy, same measure, same seed
    {
        let again = estimate_objective(&policy, &solution.triplets, spec, bundle)?;
        let margin = (again.mean - baseline.mean).abs();
        rows.push(PerturbationRow {
            label: "identity".into(),
            side: PerturbationSide::Identity,
            mean: again.mean,
            std_error: again.std_error,
            margin,
            pass: margin == 0.0,
        });
    }

    // policy side
    for (label, perturbed) in policy_perturbations(&policy) {
        match estimate_objective(&perturbed, &solution.triplets, spec, bundle) {
            Ok(est) => {
                let slack = baseline.mean + combined_se(est.std_error) - est.mean;
                rows.push(PerturbationRow {
                    label,
                    side: PerturbationSide::Policy,
                    mean: est.mean,
                    std_error: est.std_error,
                    margin: slack,
                    pass: slack >= 0.0,
                });
            }
            Err(SimError::Bankruptcy { .. }) => {
                // inadmissible perturbation: objective is -inf, inequality holds
                rows.push(PerturbationRow {
                    label: format!("{label} (inadmissible: bankruptcy)"),
                    side: PerturbationSide::Policy,
                    mean: f64::NEG_INFINITY,
                    std_error: 0.0,
                    margin: f64::INFINITY,
                    pass: true,
                });
            }
            Err(e) => return Err(e),
        }
    }

    // measure side: every vertex selector
    let vertex_count = spec
        .segments
        .iter()
        .map(|s| s.vertices().len())
        .min()
        .unwrap_or(0);
    for v in 0..vertex_count {
        let theta = TripletPath::constant_vertex(&spec.segments, &spec.grid, v)?;
        let est = estimate_objective(&policy, &theta, spec, bundle)?;
        let slack = est.mean - (baseline.mean - combined_se(est.std_error));
        rows.push(PerturbationRow {
            label: format!("vertex measure {v}"),
            side: PerturbationSide::Measure,
            mean: est.mean,
            std_error: est.std_error,
            margin: slack,
            pass: slack >= 0.0,
        });
    }

    let pass = rows.iter().all(|r| r.pass);
    Ok(ObjectiveSaddleReport { baseline, rows, pass })
}

fn policy_perturbations(policy: &PolicyPath) -> Vec<(String, PolicyPath)> {
    let mut out = Vec::new();
    match policy {
        PolicyPath::Crra(p) => {
            for scale in [0.5, 1.5] {
                let scaled = CrraPolicy {
                    invest: p.invest.iter().map(|x| x * scale).collect(),
                    consume: p.consume.clone(),
                };
                out.push((format!("investment × {scale}"), PolicyPath::Crra(scaled)));
            }
            for shift in [0.1, -0.1] {
                let shifted = CrraPolicy {
                    invest: p.invest.clone(),
                    consume: p.consume.iter().map(|c| (c + shift).max(0.0)).collect(),
                };
                out.push((format!("consumption {shift:+}"), PolicyPath::Crra(shifted)));
            }
        }
        PolicyPath::Cara(p) => {
            for scale in [0.5, 1.5] {
                let scaled = CaraPolicy {
                    invest: p.invest.iter().map(|x| x * scale).collect(),
                    excess: p.excess.clone(),
                };
                out.push((format!("investment × {scale}"), PolicyPath::Cara(scaled)));
            }
            for shift in [0.1, -0.1] {
                let shifted = CaraPolicy {
                    invest: p.invest.clone(),
                    excess: p.excess.iter().map(|d| d + shift).collect(),
                };
                out.push((format!("excess consumption {shift:+}"), PolicyPath::Cara(shifted)));
            }
        }
    }
    out
}
