//! Per-cell saddle points of the local kernels over `region × hull`.
//!
//! The inner minimization over the confidence set is exact vertex
//! enumeration (the kernels are affine in the triplet). The outer
//! maximization of the concave piecewise-smooth `φ(x) = min_v kernel_v(x)`
//! runs a cutting-plane loop on the polyhedral admissible region (with an
//! auto-expanded box when the region is unbounded), then polishes with
//! damped Newton steps on the active vertex. The saddle measure is the hull
//! mixture of active vertices whose combined gradient has least norm; the
//! saddle property is certified on sampled points.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{
    local_kernel_cara, local_kernel_cara_gradient, local_kernel_cara_hessian, local_kernel_crra,
    local_kernel_crra_gradient, local_kernel_crra_hessian, KernelError, SelectedTriplet,
    TripletPath,
};
use crate::market::{
    admissible_region, check_nondegeneracy, check_sharpe_cara, check_sharpe_crra,
    jump_support_union, AdmissibleRegion, ConfidenceSet, MarketError, MarketSpec, RegionMargin,
    Utility,
};
use crate::policy::q_schedule;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("outer maximization did not converge within {iterations} cuts (gap {gap})")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("saddle certificate failed at cell {cell}: violation {violation} > {tol}")]
    CertificateFailure { cell: usize, violation: f64, tol: f64 },
    #[error("master LP failed: {0}")]
    Lp(String),
    #[error("assumption check failed on segment {segment}: {detail}")]
    AssumptionFailed { segment: usize, detail: String },
    #[error("{} cell(s) failed, first: cell {} ({})", .0.len(), .0[0].0, .0[0].1)]
    Cells(Vec<(usize, String)>),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Solver tuning knobs. Deterministic output is guaranteed for a fixed
/// config, independent of thread scheduling.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Margin index `n` of the closed inner region `x^T z >= -1 + 1/n`.
    pub margin_n: u64,
    /// Convergence tolerance of the outer cutting-plane loop.
    pub outer_tol: f64,
    /// Maximum number of cutting planes.
    pub max_cuts: usize,
    /// Random points per cell for the saddle-inequality certificate.
    pub cert_samples: usize,
    /// Certificate tolerance (max allowed sampled violation).
    pub cert_tol: f64,
    /// Points per edge in hull-mixture lattices.
    pub mixture_lattice: usize,
    /// Seed for certificate sampling.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            margin_n: 1_000_000,
            outer_tol: 1e-8,
            max_cuts: 600,
            cert_samples: 1000,
            cert_tol: 1e-6,
            mixture_lattice: 11,
            seed: 0x5add1e,
        }
    }
}

/// Which local kernel a solve runs on: CRRA at exponent `p` over an
/// admissible region, or CARA at risk aversion `a` and consumption ratio `q`
/// over all of R^d.
#[derive(Clone)]
pub enum UtilityContext<'a> {
    Crra { p: f64, region: &'a AdmissibleRegion },
    Cara { a: f64, q: f64 },
}

impl UtilityContext<'_> {
    fn kernel(&self, x: &DVector<f64>, theta: &crate::market::LevyTriplet) -> Result<f64, SolverError> {
        match self {
            UtilityContext::Crra { p, .. } => Ok(local_kernel_crra(x, theta, *p)?),
            UtilityContext::Cara { a, q } => Ok(local_kernel_cara(x, theta, *q, *a)),
        }
    }

    fn gradient(
        &self,
        x: &DVector<f64>,
        theta: &crate::market::LevyTriplet,
    ) -> Result<DVector<f64>, SolverError> {
        match self {
            UtilityContext::Crra { p, .. } => Ok(local_kernel_crra_gradient(x, theta, *p)?),
            UtilityContext::Cara { a, q } => Ok(local_kernel_cara_gradient(x, theta, *q, *a)),
        }
    }

    fn hessian(
        &self,
        x: &DVector<f64>,
        theta: &crate::market::LevyTriplet,
    ) -> Result<DMatrix<f64>, SolverError> {
        match self {
            UtilityContext::Crra { p, .. } => Ok(local_kernel_crra_hessian(x, theta, *p)?),
            UtilityContext::Cara { a, q } => Ok(local_kernel_cara_hessian(x, theta, *q, *a)),
        }
    }

    fn region(&self) -> Option<&AdmissibleRegion> {
        match self {
            UtilityContext::Crra { region, .. } => Some(region),
            UtilityContext::Cara { .. } => None,
        }
    }
}

/// Minimizes the local kernel over the hull. The kernel is affine in the
/// triplet, so the minimum sits at a vertex; ties resolve to the lowest
/// index.
pub fn inner_min(
    x: &DVector<f64>,
    set: &ConfidenceSet,
    ctx: &UtilityContext,
) -> Result<(f64, usize), SolverError> {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for (i, v) in set.vertices().iter().enumerate() {
        let val = ctx.kernel(x, v)?;
        if val < best {
            best = val;
            arg = i;
        }
    }
    Ok((best, arg))
}

struct Cut {
    point: DVector<f64>,
    value: f64,
    gradient: DVector<f64>,
}

/// Maximizes `φ(x) = min over vertices of kernel(x, vertex)` over the
/// admissible region (CRRA) or an auto-expanded box (CARA / jump-free).
/// Returns the maximizer and value within `outer_tol` of the supremum.
pub fn outer_max(
    set: &ConfidenceSet,
    ctx: &UtilityContext,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, f64), SolverError> {
    let region = ctx.region();
    let bounded = region.map(|r| !r.unbounded()).unwrap_or(false);
    let mut box_r = match region.and_then(|r| r.ball_radius()) {
        Some(r) => r,
        None => 1.0,
    };
    loop {
        let (x, value, hit_boundary) = kelley_loop(set, ctx, cfg, box_r)?;
        if !bounded && hit_boundary {
            box_r *= 2.0;
            if box_r > 1e9 {
                return Err(SolverError::NoConvergence { iterations: cfg.max_cuts, gap: f64::NAN });
            }
            continue;
        }
        let (x, value) = newton_polish(set, ctx, x, value, box_r)?;
        return Ok((x, value));
    }
}

fn kelley_loop(
    set: &ConfidenceSet,
    ctx: &UtilityContext,
    cfg: &SolverConfig,
    box_r: f64,
) -> Result<(DVector<f64>, f64, bool), SolverError> {
    let dim = set.dim();
    let mut cuts: Vec<Cut> = Vec::new();
    let mut x_cur = DVector::zeros(dim);
    let mut best_x = x_cur.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut gap = f64::INFINITY;

    for _ in 0..cfg.max_cuts {
        let (val, vtx) = inner_min(&x_cur, set, ctx)?;
        let grad = ctx.gradient(&x_cur, &set.vertices()[vtx])?;
        if val > best_val {
            best_val = val;
            best_x = x_cur.clone();
        }
        cuts.push(Cut { point: x_cur.clone(), value: val, gradient: grad });

        let (x_lp, upper) = solve_master_lp(&cuts, ctx.region(), box_r, dim)?;
        gap = upper - best_val;
        if gap <= cfg.outer_tol {
            // box expansion keys off the incumbent: a flat master objective
            // can park the LP argmax on the box even when the max is interior
            let hit = best_x.amax() >= 0.999 * box_r;
            return Ok((best_x, best_val, hit));
        }
        // Kelley step to the LP argmax, plus a midpoint cut toward the
        // incumbent to damp the zigzag on smooth kernels.
        let mid = (&x_lp + &best_x) * 0.5;
        if mid != x_lp {
            if let Ok((mval, mvtx)) = inner_min(&mid, set, ctx) {
                let mgrad = ctx.gradient(&mid, &set.vertices()[mvtx])?;
                if mval > best_val {
                    best_val = mval;
                    best_x = mid.clone();
                }
                cuts.push(Cut { point: mid, value: mval, gradient: mgrad });
            }
        }
        x_cur = x_lp;
    }
    Err(SolverError::NoConvergence { iterations: cfg.max_cuts, gap })
}

fn solve_master_lp(
    cuts: &[Cut],
    region: Option<&AdmissibleRegion>,
    box_r: f64,
    dim: usize,
) -> Result<(DVector<f64>, f64), SolverError> {
    let mut problem = minilp::Problem::new(minilp::OptimizationDirection::Maximize);
    let xs: Vec<minilp::Variable> =
        (0..dim).map(|_| problem.add_var(0.0, (-box_r, box_r))).collect();
    let t = problem.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for cut in cuts {
        // t <= value + grad^T (x - point)
        let mut expr = minilp::LinearExpr::empty();
        expr.add(t, 1.0);
        for (i, xi) in xs.iter().enumerate() {
            expr.add(*xi, -cut.gradient[i]);
        }
        problem.add_constraint(
            expr,
            minilp::ComparisonOp::Le,
            cut.value - cut.gradient.dot(&cut.point),
        );
    }
    if let Some(region) = region {
        for (z, rhs) in region.halfspaces() {
            let mut expr = minilp::LinearExpr::empty();
            for (i, xi) in xs.iter().enumerate() {
                expr.add(*xi, z[i]);
            }
            problem.add_constraint(expr, minilp::ComparisonOp::Ge, *rhs);
        }
    }
    let solution = problem.solve().map_err(|e| SolverError::Lp(e.to_string()))?;
    let x = DVector::from_iterator(dim, xs.iter().map(|v| solution[*v]));
    Ok((x, solution.objective()))
}

/// Damped Newton refinement on the active vertex's kernel. Steps are only
/// accepted when the full `φ` (inner min) improves, so this can only tighten
/// the cutting-plane result.
fn newton_polish(
    set: &ConfidenceSet,
    ctx: &UtilityContext,
    mut x: DVector<f64>,
    mut value: f64,
    box_r: f64,
) -> Result<(DVector<f64>, f64), SolverError> {
    for _ in 0..60 {
        let (val, vtx) = inner_min(&x, set, ctx)?;
        debug_assert!(val >= value - 1e-12);
        value = val;
        let grad = ctx.gradient(&x, &set.vertices()[vtx])?;
        if grad.norm() < 1e-14 * (1.0 + value.abs()) {
            break;
        }
        let hess = ctx.hessian(&x, &set.vertices()[vtx])?;
        let step = match hess.lu().solve(&grad) {
            Some(s) => -s,
            None => break,
        };
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let cand = &x + &step * alpha;
            let feasible = ctx.region().map(|r| r.contains(&cand)).unwrap_or(true)
                && cand.amax() <= box_r * 4.0;
            if feasible {
                if let Ok((cand_val, _)) = inner_min(&cand, set, ctx) {
                    if cand_val > value {
                        x = cand;
                        value = cand_val;
                        improved = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((x, value))
}

/// One solved grid cell: maximizer, worst-case hull mixture, kernel value and
/// the sampled saddle-inequality certificate.
#[derive(Debug, Clone)]
pub struct SaddleCell {
    pub cell: usize,
    pub x_star: DVector<f64>,
    pub weights: Vec<f64>,
    pub triplet: crate::market::LevyTriplet,
    pub value: f64,
    pub certificate: f64,
}

/// Finds a saddle point of the local kernel on a single cell: outer max,
/// least-gradient-norm mixture over the active vertices, then a sampled
/// certificate of both saddle inequalities.
pub fn local_saddle(
    set: &ConfidenceSet,
    ctx: &UtilityContext,
    cfg: &SolverConfig,
    cell: usize,
) -> Result<SaddleCell, SolverError> {
    let (mut x_star, value) = outer_max(set, ctx, cfg)?;
    let mut weights = active_mixture_weights(set, ctx, &x_star, value, cfg)?;
    let mut triplet = set.mixture(&weights)?;

    // When several vertices are active the cutting-plane iterate carries
    // the full outer tolerance. The saddle-measure kernel is smooth, so a
    // few rounds of Newton refinement on it (re-deriving the mixture after
    // each move) sharpen the maximizer; keep the better-certified iterate.
    let box_guard = 1.0 + 2.0 * x_star.norm();
    for _ in 0..3 {
        let smooth = ConfidenceSet::new(vec![triplet.clone()], 2.0)?;
        let anchor = ctx.kernel(&x_star, &triplet)?;
        let (x_new, _) = newton_polish(&smooth, ctx, x_star.clone(), anchor, box_guard)?;
        if (&x_new - &x_star).norm() <= 1e-14 * (1.0 + x_star.norm()) {
            break;
        }
        let (phi_new, _) = inner_min(&x_new, set, ctx)?;
        let weights_new = active_mixture_weights(set, ctx, &x_new, phi_new, cfg)?;
        let triplet_new = set.mixture(&weights_new)?;
        x_star = x_new;
        weights = weights_new;
        triplet = triplet_new;
    }

    let value = ctx.kernel(&x_star, &triplet)?;
    let certificate = certify(set, ctx, &x_star, &triplet, value, cfg, cell)?;
    if certificate > cfg.cert_tol {
        return Err(SolverError::CertificateFailure {
            cell,
            violation: certificate,
            tol: cfg.cert_tol,
        });
    }
    Ok(SaddleCell { cell, x_star, weights, triplet, value, certificate })
}

/// Weights of the hull mixture whose kernel gradient at `x_star` has least
/// norm among convex combinations of the active (minimizing) vertices: the
/// saddle measure must make `x_star` a maximizer, which for an interior
/// point means a vanishing combined gradient.
fn active_mixture_weights(
    set: &ConfidenceSet,
    ctx: &UtilityContext,
    x_star: &DVector<f64>,
    value: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>, SolverError> {
    let m = set.vertices().len();
    let tol_active = (10.0 * cfg.outer_tol).max(1e-9 * (1.0 + value.abs()));
    let mut active: Vec<usize> = Vec::new();
    for (i, v) in set.vertices().iter().enumerate() {
        if ctx.kernel(x_star, v)? <= value + tol_active {
            active.push(i);
        }
    }
    if active.is_empty() {
        active.push(inner_min(x_star, set, ctx)?.1);
    }
    let mut weights = vec![0.0; m];
    if active.len() == 1 {
        weights[active[0]] = 1.0;
        return Ok(weights);
    }
    let grads: Vec<DVector<f64>> = active
        .iter()
        .map(|&i| ctx.gradient(x_star, &set.vertices()[i]))
        .collect::<Result<_, _>>()?;
    let lambda = least_norm_simplex_combination(&grads);
    for (k, &i) in active.iter().enumerate() {
        weights[i] = lambda[k];
    }
    Ok(weights)
}

/// Minimizes `|Σ λ_i g_i|^2` over the probability simplex by enumerating
/// support subsets and solving the equality-constrained least-squares
/// problem on each (exact for the small active sets that occur here).
fn least_norm_simplex_combination(grads: &[DVector<f64>]) -> Vec<f64> {
    let m = grads.len();
    if m == 1 {
        return vec![1.0];
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let subsets: u32 = 1u32 << m.min(12);
    for mask in 1..subsets {
        let support: Vec<usize> = (0..m.min(12)).filter(|i| mask & (1 << i) != 0).collect();
        let k = support.len();
        // KKT system for min |G λ|^2 s.t. Σ λ = 1 on the support
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        for a in 0..k {
            for b in 0..k {
                kkt[(a, b)] = 2.0 * grads[support[a]].dot(&grads[support[b]]);
            }
            kkt[(a, k)] = 1.0;
            kkt[(k, a)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let lambda: Vec<f64> = (0..k).map(|i| sol[i]).collect();
        if lambda.iter().any(|l| *l < -1e-10) {
            continue;
        }
        let mut combined = DVector::zeros(grads[0].len());
        for (l, &i) in lambda.iter().zip(support.iter()) {
            combined += &grads[i] * *l;
        }
        let norm = combined.norm_squared();
        if best.as_ref().map(|(b, _)| norm < *b).unwrap_or(true) {
            let mut full = vec![0.0; m];
            for (l, &i) in lambda.iter().zip(support.iter()) {
                full[i] = l.max(0.0);
            }
            let total: f64 = full.iter().sum();
            for w in full.iter_mut() {
                *w /= total;
            }
            best = Some((norm, full));
        }
    }
    match best {
        Some((_, w)) => w,
        None => {
            let mut w = vec![0.0; m];
            w[0] = 1.0;
            w
        }
    }
}

/// Re-runs the sampled saddle certificate for a stored cell: the measure is
/// rebuilt from its hull weights, the stored kernel value is checked against
/// the mixture kernel, and both saddle inequalities are re-sampled.
pub fn recertify(
    set: &ConfidenceSet,
    ctx: &UtilityContext,
    x_star: &DVector<f64>,
    weights: &[f64],
    value: f64,
    cfg: &SolverConfig,
    cell: usize,
) -> Result<f64, SolverError> {
    let triplet = set.mixture(weights)?;
    let recomputed = ctx.kernel(x_star, &triplet)?;
    let sampled = certify(set, ctx, x_star, &triplet, value, cfg, cell)?;
    Ok(sampled.max((recomputed - value).abs()))
}

/// Max sampled violation of the two saddle inequalities
/// `kernel(x, θ*) <= value` and `kernel(x*, θ) >= value`.
fn certify(
    set: &ConfidenceSet,
    ctx: &UtilityContext,
    x_star: &DVector<f64>,
    saddle_triplet: &crate::market::LevyTriplet,
    value: f64,
    cfg: &SolverConfig,
    cell: usize,
) -> Result<f64, SolverError> {
    let dim = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut violation = 0.0f64;

    // deterministic probes along the ray through x*, plus the origin
    let mut probes: Vec<DVector<f64>> = [0.0, 0.25, 0.5, 0.75, 0.9, 1.1, 1.25, 1.5]
        .iter()
        .map(|s| x_star * *s)
        .collect();
    probes.push(DVector::zeros(dim));

    let region = ctx.region();
    let in_region = |x: &DVector<f64>| region.map(|r| r.contains(x)).unwrap_or(true);
    let (center, radius) = sample_box(region, x_star);
    let mut tries = 0usize;
    while probes.len() < cfg.cert_samples + 9 && tries < cfg.cert_samples * 60 {
        tries += 1;
        let cand = DVector::from_fn(dim, |i, _| {
            center[i] + radius * (rng.random::<f64>() * 2.0 - 1.0)
        });
        if in_region(&cand) {
            probes.push(cand);
        }
    }
    for x in probes.iter().filter(|x| in_region(x)) {
        if let Ok(v) = ctx.kernel(x, saddle_triplet) {
            violation = violation.max(v - value);
        }
    }

    // adversary side: all vertices plus random hull mixtures
    let m = set.vertices().len();
    for v in set.vertices() {
        violation = violation.max(value - ctx.kernel(x_star, v)?);
    }
    for _ in 0..cfg.cert_samples.min(200) {
        let mut w: Vec<f64> = (0..m).map(|_| -(rng.random::<f64>().max(1e-12)).ln()).collect();
        let total: f64 = w.iter().sum();
        for wi in w.iter_mut() {
            *wi /= total;
        }
        let mix = set.mixture(&w)?;
        violation = violation.max(value - ctx.kernel(x_star, &mix)?);
    }
    Ok(violation.max(0.0))
}

fn sample_box(region: Option<&AdmissibleRegion>, x_star: &DVector<f64>) -> (DVector<f64>, f64) {
    match region.and_then(|r| r.ball_radius()) {
        Some(r) if region.map(|r| !r.unbounded()).unwrap_or(false) => {
            (DVector::zeros(x_star.len()), r)
        }
        _ => (x_star.clone(), 1.0 + 2.0 * x_star.norm()),
    }
}

/// The solved per-cell saddle points of a market.
#[derive(Debug, Clone)]
pub struct SaddleSkeleton {
    pub cells: Vec<SaddleCell>,
}

impl SaddleSkeleton {
    pub fn kernel_path(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.value).collect()
    }

    pub fn investment_and_certificates(&self) -> (Vec<DVector<f64>>, Vec<f64>) {
        (
            self.cells.iter().map(|c| c.x_star.clone()).collect(),
            self.cells.iter().map(|c| c.certificate).collect(),
        )
    }

    pub fn into_triplet_path(
        self,
        grid: &crate::market::TimeGrid,
    ) -> Result<TripletPath, KernelError> {
        let cells = self
            .cells
            .into_iter()
            .map(|c| SelectedTriplet { triplet: c.triplet, weights: c.weights })
            .collect();
        TripletPath::from_cells(cells, grid)
    }
}

/// Runs the assumption checks and solves every grid cell. CRRA solutions are
/// time-invariant per segment, so cells reuse their segment's solve (and
/// segments with identical confidence sets share one solve). CARA kernels
/// depend on the cell's consumption ratio, so every cell is solved.
pub fn solve_policy_measure(
    spec: &MarketSpec,
    cfg: &SolverConfig,
) -> Result<SaddleSkeleton, SolverError> {
    validate_assumptions(spec, cfg)?;
    let grid = &spec.grid;
    match spec.utility {
        Utility::Cara { risk_aversion } => {
            let results: Vec<Result<SaddleCell, SolverError>> = grid
                .cells()
                .par_iter()
                .map(|cell| {
                    let set = spec.segment_set(cell.segment);
                    let ctx = UtilityContext::Cara {
                        a: risk_aversion,
                        q: q_schedule(cell.mid(), grid.horizon()),
                    };
                    local_saddle(set, &ctx, cfg, cell.index)
                })
                .collect();
            collect_cells(results)
        }
        _ => {
            let p = spec.utility.crra_exponent().unwrap();
            // one solve per distinct segment
            let mut per_segment: Vec<Option<SaddleCell>> = vec![None; spec.segments.len()];
            for seg in 0..spec.segments.len() {
                let reuse = (0..seg).find(|&e| spec.segments[e] == spec.segments[seg]);
                if let Some(e) = reuse {
                    per_segment[seg] = per_segment[e].clone();
                    continue;
                }
                let set = spec.segment_set(seg);
                let support = jump_support_union(set);
                let region =
                    admissible_region(&support, RegionMargin::N(cfg.margin_n), spec.dim())?;
                let ctx = UtilityContext::Crra { p, region: &region };
                per_segment[seg] = Some(local_saddle(set, &ctx, cfg, seg)?);
            }
            let cells = grid
                .cells()
                .iter()
                .map(|cell| {
                    let mut solved = per_segment[cell.segment].clone().expect("segment solved");
                    solved.cell = cell.index;
                    solved
                })
                .collect();
            Ok(SaddleSkeleton { cells })
        }
    }
}

fn collect_cells(results: Vec<Result<SaddleCell, SolverError>>) -> Result<SaddleSkeleton, SolverError> {
    let mut cells = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => cells.push(c),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if failures.is_empty() {
        Ok(SaddleSkeleton { cells })
    } else {
        Err(SolverError::Cells(failures))
    }
}

/// Pre-solve validation: support non-degeneracy (when jumps exist) and the
/// per-utility Sharpe bound on every segment.
pub fn validate_assumptions(spec: &MarketSpec, cfg: &SolverConfig) -> Result<(), SolverError> {
    for (seg, set) in spec.segments.iter().enumerate() {
        let support = jump_support_union(set);
        if !support.is_empty() {
            check_nondegeneracy(&support).map_err(|e| SolverError::AssumptionFailed {
                segment: seg,
                detail: e.to_string(),
            })?;
        }
        let check = match spec.utility {
            Utility::PowerCrra { exponent } if exponent < 0.0 => {
                Some(check_sharpe_crra(set, exponent, cfg.mixture_lattice))
            }
            Utility::Cara { .. } => {
                // the bound tightens as t decreases, so the segment start binds
                let t = spec.grid.breakpoints()[seg];
                Some(check_sharpe_cara(set, t, spec.grid.horizon(), cfg.mixture_lattice))
            }
            _ => None,
        };
        if let Some(check) = check {
            if !check.pass {
                return Err(SolverError::AssumptionFailed {
                    segment: seg,
                    detail: format!(
                        "squared Sharpe {} exceeds bound {} at {}",
                        check.worst_sq, check.bound_sq, check.worst_at
                    ),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{DiscreteLevyMeasure, JumpAtom, LevyTriplet, TimeGrid};
    use nalgebra::DMatrix;

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

    fn free_region() -> AdmissibleRegion {
        AdmissibleRegion::all(1)
    }

    #[test]
    fn inner_min_examples() {
        let set = ConfidenceSet::new(
            vec![triplet_1d(0.05, 0.04, &[]), triplet_1d(0.10, 0.09, &[])],
            2.0,
        )
        .unwrap();
        let region = free_region();
        let ctx = UtilityContext::Crra { p: 0.0, region: &region };
        let (v, arg) = inner_min(&vec1(0.0), &set, &ctx).unwrap();
        assert_eq!((v, arg), (0.0, 0));
        let (v, arg) = inner_min(&vec1(1.0), &set, &ctx).unwrap();
        assert!((v - 0.03).abs() < 1e-15);
        assert_eq!(arg, 0);
        let (v, arg) = inner_min(&vec1(-1.0), &set, &ctx).unwrap();
        assert!((v - -0.145).abs() < 1e-15);
        assert_eq!(arg, 1);
    }

    #[test]
    fn outer_max_merton_singleton() {
        let cfg = SolverConfig::default();
        for (p, want_x, want_v) in [(0.0, 2.0, 0.08), (0.5, 4.0, 0.16), (-1.0, 1.0, 0.04)] {
            let set = ConfidenceSet::new(vec![triplet_1d(0.08, 0.04, &[])], 2.0).unwrap();
            let region = free_region();
            let ctx = UtilityContext::Crra { p, region: &region };
            let (x, v) = outer_max(&set, &ctx, &cfg).unwrap();
            assert!((x[0] - want_x).abs() < 1e-7, "p={p}: x={}", x[0]);
            assert!((v - want_v).abs() < 1e-9, "p={p}: v={v}");
        }
    }

    #[test]
    fn outer_max_drift_hull() {
        let cfg = SolverConfig::default();
        let set = ConfidenceSet::new(
            vec![triplet_1d(0.05, 0.04, &[]), triplet_1d(0.10, 0.04, &[])],
            2.0,
        )
        .unwrap();
        let region = free_region();
        let ctx = UtilityContext::Crra { p: 0.0, region: &region };
        let (x, v) = outer_max(&set, &ctx, &cfg).unwrap();
        assert!((x[0] - 1.25).abs() < 1e-7, "x={}", x[0]);
        assert!((v - 0.03125).abs() < 1e-9, "v={v}");
    }

    #[test]
    fn saddle_volatility_hull() {
        let cfg = SolverConfig::default();
        let set = ConfidenceSet::new(
            vec![triplet_1d(0.08, 0.04, &[]), triplet_1d(0.08, 0.09, &[])],
            2.0,
        )
        .unwrap();
        let region = free_region();
        let ctx = UtilityContext::Crra { p: 0.0, region: &region };
        let cell = local_saddle(&set, &ctx, &cfg, 0).unwrap();
        assert!((cell.x_star[0] - 8.0 / 9.0).abs() < 1e-7);
        assert!((cell.value - 0.08 * 0.08 / (2.0 * 0.09)).abs() < 1e-9);
        // worst case is the high-variance vertex
        assert!((cell.weights[1] - 1.0).abs() < 1e-9, "{:?}", cell.weights);
        assert!(cell.certificate <= cfg.cert_tol);
    }

    #[test]
    fn saddle_cara_singleton() {
        let cfg = SolverConfig::default();
        let set = ConfidenceSet::new(vec![triplet_1d(0.05, 0.04, &[])], 2.0).unwrap();
        let ctx = UtilityContext::Cara { a: 1.0, q: 0.5 };
        let cell = local_saddle(&set, &ctx, &cfg, 0).unwrap();
        assert!((cell.x_star[0] - 2.5).abs() < 1e-7);
        assert!((cell.value - 0.0625).abs() < 1e-9);
        assert!(cell.certificate <= 1e-9);
    }

    #[test]
    fn saddle_symmetric_drift_hull_needs_interior_mixture() {
        // worst case mixes the vertices: at x* = 0 the minimizing measure
        // must have zero drift, the 50/50 mixture
        let cfg = SolverConfig::default();
        let set = ConfidenceSet::new(
            vec![triplet_1d(-0.05, 0.04, &[]), triplet_1d(0.05, 0.04, &[])],
            2.0,
        )
        .unwrap();
        let region = free_region();
        let ctx = UtilityContext::Crra { p: 0.0, region: &region };
        let cell = local_saddle(&set, &ctx, &cfg, 0).unwrap();
        assert!(cell.x_star[0].abs() < 1e-6, "x={}", cell.x_star[0]);
        assert!(cell.value.abs() < 1e-9);
        assert!((cell.weights[0] - 0.5).abs() < 1e-6, "{:?}", cell.weights);
        assert!(cell.certificate <= cfg.cert_tol);
    }

    #[test]
    fn saddle_with_jumps_respects_region() {
        let cfg = SolverConfig::default();
        let set = ConfidenceSet::new(
            vec![triplet_1d(0.08, 0.04, &[(-0.1, 0.5), (0.2, 0.3)])],
            2.0,
        )
        .unwrap();
        let support = jump_support_union(&set);
        let region = admissible_region(&support, RegionMargin::N(1_000_000), 1).unwrap();
        let ctx = UtilityContext::Crra { p: -1.0, region: &region };
        let cell = local_saddle(&set, &ctx, &cfg, 0).unwrap();
        assert!(region.contains(&cell.x_star));
        // interior stationarity of the active vertex
        let grad = local_kernel_crra_gradient(&cell.x_star, &cell.triplet, -1.0).unwrap();
        assert!(grad.norm() < 1e-7, "gradient {}", grad.norm());
    }

    #[test]
    fn doubling_drift_scales_merton_solution() {
        let cfg = SolverConfig::default();
        let region = free_region();
        let ctx = UtilityContext::Crra { p: 0.0, region: &region };
        let set1 = ConfidenceSet::new(vec![triplet_1d(0.04, 0.04, &[])], 2.0).unwrap();
        let set2 = ConfidenceSet::new(vec![triplet_1d(0.08, 0.04, &[])], 2.0).unwrap();
        let (x1, v1) = outer_max(&set1, &ctx, &cfg).unwrap();
        let (x2, v2) = outer_max(&set2, &ctx, &cfg).unwrap();
        assert!((x2[0] - 2.0 * x1[0]).abs() < 1e-6);
        assert!((v2 - 4.0 * v1).abs() < 1e-8);
    }

    #[test]
    fn minimax_equals_maximin_through_saddle_measure() {
        let cfg = SolverConfig::default();
        let set = ConfidenceSet::new(
            vec![
                triplet_1d(0.05, 0.04, &[(-0.1, 0.4)]),
                triplet_1d(0.10, 0.09, &[(0.2, 0.8)]),
            ],
            2.0,
        )
        .unwrap();
        let support = jump_support_union(&set);
        let region = admissible_region(&support, RegionMargin::N(1_000_000), 1).unwrap();
        let ctx = UtilityContext::Crra { p: -1.0, region: &region };
        let cell = local_saddle(&set, &ctx, &cfg, 0).unwrap();

        // sup over x of the kernel at the saddle measure equals the maximin
        let singleton = ConfidenceSet::new(vec![cell.triplet.clone()], 2.0).unwrap();
        let (_x, sup_at_star) = outer_max(&singleton, &ctx, &cfg).unwrap();
        assert!(
            (sup_at_star - cell.value).abs() <= 2.0 * cfg.cert_tol,
            "minimax {sup_at_star} vs maximin {}",
            cell.value
        );
        // min over vertices of the per-vertex max upper-bounds the saddle value
        let mut vertex_minimax = f64::INFINITY;
        for v in set.vertices() {
            let single = ConfidenceSet::new(vec![v.clone()], 2.0).unwrap();
            let (_x, val) = outer_max(&single, &ctx, &cfg).unwrap();
            vertex_minimax = vertex_minimax.min(val);
        }
        assert!(vertex_minimax >= cell.value - 1e-9);
    }

    #[test]
    fn solve_constant_market_reuses_segment_solution() {
        let set = ConfidenceSet::new(vec![triplet_1d(0.08, 0.04, &[])], 2.0).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.0], 0.25).unwrap();
        let spec = MarketSpec::new(
            grid,
            vec![set.clone(), set],
            Utility::LogCrra,
            1.0,
            2.0,
        )
        .unwrap();
        let skeleton = solve_policy_measure(&spec, &SolverConfig::default()).unwrap();
        assert_eq!(skeleton.cells.len(), 4);
        for c in &skeleton.cells {
            assert!((c.x_star[0] - 2.0).abs() < 1e-7);
            assert!((c.value - 0.08).abs() < 1e-9);
        }
    }

    #[test]
    fn solve_two_segment_market_steps_down() {
        let seg1 = ConfidenceSet::new(
            vec![triplet_1d(0.05, 0.04, &[]), triplet_1d(0.10, 0.04, &[])],
            2.0,
        )
        .unwrap();
        let seg2 = ConfidenceSet::new(
            vec![triplet_1d(0.02, 0.04, &[]), triplet_1d(0.04, 0.04, &[])],
            2.0,
        )
        .unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.0], 0.5).unwrap();
        let spec = MarketSpec::new(grid, vec![seg1, seg2], Utility::LogCrra, 1.0, 2.0).unwrap();
        let skeleton = solve_policy_measure(&spec, &SolverConfig::default()).unwrap();
        let kernel = skeleton.kernel_path();
        assert!((kernel[0] - 0.03125).abs() < 1e-9);
        assert!((kernel[1] - 0.005).abs() < 1e-9);
    }

    #[test]
    fn solve_cara_investment_grows_with_time() {
        let set = ConfidenceSet::new(vec![triplet_1d(0.05, 0.04, &[])], 2.0).unwrap();
        let grid = TimeGrid::uniform(2.0, 0.5).unwrap();
        let spec = MarketSpec::new(
            grid.clone(),
            vec![set],
            Utility::Cara { risk_aversion: 1.0 },
            1.0,
            2.0,
        )
        .unwrap();
        let skeleton = solve_policy_measure(&spec, &SolverConfig::default()).unwrap();
        // x*_t = b / (a q_t Σ) falls as q_t rises toward the horizon
        for w in skeleton.cells.windows(2) {
            assert!(w[1].x_star[0] < w[0].x_star[0]);
        }
        let q0 = q_schedule(grid.cells()[0].mid(), 2.0);
        assert!((skeleton.cells[0].x_star[0] - 0.05 / (q0 * 0.04)).abs() < 1e-6);
    }

    #[test]
    fn two_asset_merton_recovers_matrix_solution() {
        // x* = Σ^{-1} b / (1-p), value = b^T Σ^{-1} b / (2(1-p))
        let drift = DVector::from_vec(vec![0.06, 0.03]);
        let cov = DMatrix::from_vec(2, 2, vec![0.05, 0.02, 0.02, 0.08]);
        let triplet = LevyTriplet::new(
            drift.clone(),
            cov.clone(),
            DiscreteLevyMeasure::empty(2),
        )
        .unwrap();
        let set = ConfidenceSet::new(vec![triplet], 2.0).unwrap();
        let cfg = SolverConfig::default();
        for p in [0.0, -1.0, 0.5] {
            let region = AdmissibleRegion::all(2);
            let ctx = UtilityContext::Crra { p, region: &region };
            let cell = local_saddle(&set, &ctx, &cfg, 0).unwrap();
            let sigma_inv_b = cov.clone().lu().solve(&drift).unwrap();
            let want_x = &sigma_inv_b / (1.0 - p);
            let want_v = drift.dot(&sigma_inv_b) / (2.0 * (1.0 - p));
            assert!((&cell.x_star - &want_x).norm() < 1e-6, "p={p}: {:?}", cell.x_star);
            assert!((cell.value - want_v).abs() < 1e-9, "p={p}: {}", cell.value);
            assert!(cell.certificate <= cfg.cert_tol);
        }
        // CARA at q = 0.4: x* = Σ^{-1} b / (a q)
        let triplet = LevyTriplet::new(
            drift.clone(),
            cov.clone(),
            DiscreteLevyMeasure::empty(2),
        )
        .unwrap();
        let set = ConfidenceSet::new(vec![triplet], 2.0).unwrap();
        let ctx = UtilityContext::Cara { a: 2.0, q: 0.4 };
        let cell = local_saddle(&set, &ctx, &cfg, 0).unwrap();
        let sigma_inv_b = cov.clone().lu().solve(&drift).unwrap();
        let want_x = &sigma_inv_b / (2.0 * 0.4);
        assert!((&cell.x_star - &want_x).norm() < 1e-6);
    }

    #[test]
    fn two_asset_drift_hull_saddle_certifies() {
        let cov = DMatrix::from_vec(2, 2, vec![0.05, 0.01, 0.01, 0.07]);
        let make = |b1: f64, b2: f64| {
            LevyTriplet::new(
                DVector::from_vec(vec![b1, b2]),
                cov.clone(),
                DiscreteLevyMeasure::empty(2),
            )
            .unwrap()
        };
        let set = ConfidenceSet::new(
            vec![make(0.05, 0.02), make(0.08, -0.01), make(0.03, 0.05)],
            2.0,
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let region = AdmissibleRegion::all(2);
        let ctx = UtilityContext::Crra { p: -1.0, region: &region };
        let cell = local_saddle(&set, &ctx, &cfg, 0).unwrap();
        assert!(cell.certificate <= cfg.cert_tol, "certificate {}", cell.certificate);
        // saddle measure must make x* stationary
        let grad = local_kernel_crra_gradient(&cell.x_star, &cell.triplet, -1.0).unwrap();
        assert!(grad.norm() < 1e-6, "gradient norm {}", grad.norm());
    }

    #[test]
    fn sharpe_violation_blocks_solving() {
        let set = ConfidenceSet::new(vec![triplet_1d(0.6, 0.04, &[])], 2.0).unwrap();
        let grid = TimeGrid::uniform(1.0, 0.5).unwrap();
        let spec = MarketSpec::new(
            grid,
            vec![set],
            Utility::PowerCrra { exponent: -1.0 },
            1.0,
            2.0,
        )
        .unwrap();
        let err = solve_policy_measure(&spec, &SolverConfig::default());
        assert!(matches!(err, Err(SolverError::AssumptionFailed { .. })));
    }
}
