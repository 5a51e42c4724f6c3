//! Market domain types: discrete jump measures, Lévy triplets, confidence
//! sets (convex hulls of triplet vertices), time grids and the standing
//! assumption validators (support non-degeneracy, Sharpe-ratio bounds,
//! admissible investment regions).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::numeric::lex_cmp;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("jump atom {index} has non-positive intensity {value}")]
    NonPositiveIntensity { index: usize, value: f64 },
    #[error("jump atom {index} sits at the origin")]
    OriginAtom { index: usize },
    #[error("duplicate jump atom location at indices {first} and {second}")]
    DuplicateAtom { first: usize, second: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is not symmetric positive-definite")]
    NotPositiveDefinite,
    #[error("confidence set needs at least one vertex")]
    EmptyVertices,
    #[error("jump support is degenerate: convex hull has no interior around the origin")]
    DegenerateSupport,
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid utility: {0}")]
    InvalidUtility(String),
    #[error("invalid market spec: {0}")]
    InvalidSpec(String),
    #[error("invalid hull mixture: {0}")]
    InvalidMixture(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// One atom of a discrete jump measure: `intensity` jumps per unit time,
/// each of size `location`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpAtom {
    pub location: DVector<f64>,
    pub intensity: f64,
}

/// Finite-activity jump measure given by finitely many atoms. Atoms are kept
/// in lexicographic location order so two measures with the same content
/// compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLevyMeasure {
    dim: usize,
    atoms: Vec<JumpAtom>,
}

impl DiscreteLevyMeasure {
    pub fn new(dim: usize, mut atoms: Vec<JumpAtom>) -> Result<Self, MarketError> {
        for (i, atom) in atoms.iter().enumerate() {
            if atom.location.len() != dim {
                return Err(MarketError::DimensionMismatch {
                    expected: dim,
                    got: atom.location.len(),
                });
            }
            if !atom.intensity.is_finite() || !atom.location.iter().all(|v| v.is_finite()) {
                return Err(MarketError::NonFinite("jump atom"));
            }
            if atom.intensity <= 0.0 {
                return Err(MarketError::NonPositiveIntensity {
                    index: i,
                    value: atom.intensity,
                });
            }
            if atom.location.norm() == 0.0 {
                return Err(MarketError::OriginAtom { index: i });
            }
        }
        atoms.sort_by(|a, b| lex_cmp(&a.location, &b.location));
        for i in 1..atoms.len() {
            if atoms[i - 1].location == atoms[i].location {
                return Err(MarketError::DuplicateAtom {
                    first: i - 1,
                    second: i,
                });
            }
        }
        Ok(Self { dim, atoms })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, atoms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[JumpAtom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_intensity(&self) -> f64 {
        self.atoms.iter().map(|a| a.intensity).sum()
    }

    /// Total mass after the `|z|^(2-eps) ∧ 1` reweighting; this equals the
    /// bounded-Hölder distance of the measure to the zero measure.
    pub fn weighted_total_mass(&self, eps: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.intensity * a.location.norm().powf(2.0 - eps).min(1.0))
            .sum()
    }
}

/// One candidate differential characteristic: drift per unit time, covariance
/// per unit time and a finite-activity jump measure. The covariance must be
/// symmetric positive-definite; the lower-triangular Cholesky factor is
/// computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriplet {
    drift: DVector<f64>,
    covariance: DMatrix<f64>,
    jumps: DiscreteLevyMeasure,
    chol: DMatrix<f64>,
}

impl LevyTriplet {
    pub fn new(
        drift: DVector<f64>,
        covariance: DMatrix<f64>,
        jumps: DiscreteLevyMeasure,
    ) -> Result<Self, MarketError> {
        let dim = drift.len();
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(MarketError::DimensionMismatch {
                expected: dim,
                got: covariance.nrows(),
            });
        }
        if jumps.dim() != dim {
            return Err(MarketError::DimensionMismatch {
                expected: dim,
                got: jumps.dim(),
            });
        }
        if !drift.iter().all(|v| v.is_finite()) || !covariance.iter().all(|v| v.is_finite()) {
            return Err(MarketError::NonFinite("levy triplet"));
        }
        let scale = covariance.amax().max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(MarketError::NotPositiveDefinite);
                }
            }
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or(MarketError::NotPositiveDefinite)?
            .l();
        Ok(Self { drift, covariance, jumps, chol })
    }

    /// Diffusion-only triplet, convenient in tests and fixtures.
    pub fn diffusion(drift: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, MarketError> {
        let dim = drift.len();
        Self::new(drift, covariance, DiscreteLevyMeasure::empty(dim))
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &DVector<f64> {
        &self.drift
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn jumps(&self) -> &DiscreteLevyMeasure {
        &self.jumps
    }

    /// Lower-triangular factor with positive diagonal, `chol * chol^T = Σ`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Squared Sharpe ratio of the diffusion part, `b^T Σ^{-1} b`.
    pub fn squared_sharpe(&self) -> f64 {
        // Solve L y = b, then b^T Σ^{-1} b = |y|^2.
        let y = self
            .chol
            .clone()
            .solve_lower_triangular(&self.drift)
            .expect("cholesky factor is nonsingular");
        y.norm_squared()
    }

    /// Spectral norm of the covariance.
    pub fn covariance_norm(&self) -> f64 {
        self.covariance
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// The confidence set of one time segment: the convex hull of finitely many
/// triplet vertices, together with the smallest bound `kappa` covering every
/// vertex's drift norm, covariance norm and weighted jump mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    vertices: Vec<LevyTriplet>,
    kappa: f64,
}

impl ConfidenceSet {
    pub fn new(vertices: Vec<LevyTriplet>, metric_exponent: f64) -> Result<Self, MarketError> {
        if vertices.is_empty() {
            return Err(MarketError::EmptyVertices);
        }
        let dim = vertices[0].dim();
        for v in &vertices {
            if v.dim() != dim {
                return Err(MarketError::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
        }
        let kappa = vertices
            .iter()
            .map(|v| {
                v.drift()
                    .norm()
                    .max(v.covariance_norm())
                    .max(v.jumps().weighted_total_mass(metric_exponent))
            })
            .fold(0.0f64, f64::max);
        Ok(Self { vertices, kappa })
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn vertices(&self) -> &[LevyTriplet] {
        &self.vertices
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Convex combination of the vertices: drift and covariance mix linearly,
    /// jump measures mix as weighted atom unions (intensities of coinciding
    /// locations add).
    pub fn mixture(&self, weights: &[f64]) -> Result<LevyTriplet, MarketError> {
        if weights.len() != self.vertices.len() {
            return Err(MarketError::InvalidMixture(format!(
                "{} weights for {} vertices",
                weights.len(),
                self.vertices.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < -1e-12) || (sum - 1.0).abs() > 1e-9 {
            return Err(MarketError::InvalidMixture(
                "weights must be nonnegative and sum to one".into(),
            ));
        }
        let dim = self.dim();
        let mut drift = DVector::zeros(dim);
        let mut covariance = DMatrix::zeros(dim, dim);
        let mut atoms: Vec<JumpAtom> = Vec::new();
        for (w, v) in weights.iter().zip(self.vertices.iter()) {
            if *w <= 0.0 {
                continue;
            }
            drift += v.drift() * *w;
            covariance += v.covariance() * *w;
            for atom in v.jumps().atoms() {
                match atoms.iter_mut().find(|a| a.location == atom.location) {
                    Some(existing) => existing.intensity += w * atom.intensity,
                    None => atoms.push(JumpAtom {
                        location: atom.location.clone(),
                        intensity: w * atom.intensity,
                    }),
                }
            }
        }
        LevyTriplet::new(drift, covariance, DiscreteLevyMeasure::new(dim, atoms)?)
    }
}

/// One cell of the uniform refinement of a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub segment: usize,
    pub start: f64,
    pub end: f64,
}

impl GridCell {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// Time grid: segment breakpoints `0 = t_0 < … < t_K = T` plus a uniform
/// refinement step used by the solver cells, the ODE oracles and the
/// simulation engine.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    breakpoints: Vec<f64>,
    step: f64,
    cells: Vec<GridCell>,
}

impl TimeGrid {
    pub fn new(breakpoints: Vec<f64>, step: f64) -> Result<Self, MarketError> {
        if breakpoints.len() < 2 {
            return Err(MarketError::InvalidGrid("need at least two breakpoints".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(MarketError::InvalidGrid("grid must start at 0".into()));
        }
        if !breakpoints.windows(2).all(|w| w[1] > w[0]) {
            return Err(MarketError::InvalidGrid("breakpoints must strictly increase".into()));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(MarketError::InvalidGrid("step must be positive".into()));
        }
        let horizon = *breakpoints.last().unwrap();
        let mut cells = Vec::new();
        for (seg, w) in breakpoints.windows(2).enumerate() {
            let len = w[1] - w[0];
            let n = (len / step).round().max(1.0) as usize;
            let width = len / n as f64;
            for k in 0..n {
                let start = w[0] + k as f64 * width;
                let end = if k + 1 == n { w[1] } else { w[0] + (k + 1) as f64 * width };
                cells.push(GridCell { index: cells.len(), segment: seg, start, end });
            }
        }
        Ok(Self { horizon, breakpoints, step, cells })
    }

    /// Single segment `[0, horizon]` refined by `step`.
    pub fn uniform(horizon: f64, step: f64) -> Result<Self, MarketError> {
        Self::new(vec![0.0, horizon], step)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn num_segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
}

/// Utility family of the investor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    /// CRRA with logarithmic utility (`p = 0`).
    LogCrra,
    /// CRRA power utility `x^p / p`, `p` in `(-inf, 0) ∪ (0, 1)`.
    PowerCrra { exponent: f64 },
    /// CARA exponential utility `-e^{-a x} / a`, `a > 0`.
    Cara { risk_aversion: f64 },
}

impl Utility {
    pub fn validate(&self) -> Result<(), MarketError> {
        match self {
            Utility::LogCrra => Ok(()),
            Utility::PowerCrra { exponent } => {
                if !exponent.is_finite() || *exponent == 0.0 || *exponent >= 1.0 {
                    Err(MarketError::InvalidUtility(format!(
                        "power exponent must lie in (-inf,0)∪(0,1), got {exponent}"
                    )))
                } else {
                    Ok(())
                }
            }
            Utility::Cara { risk_aversion } => {
                if !risk_aversion.is_finite() || *risk_aversion <= 0.0 {
                    Err(MarketError::InvalidUtility(format!(
                        "risk aversion must be positive, got {risk_aversion}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn is_crra(&self) -> bool {
        !matches!(self, Utility::Cara { .. })
    }

    /// CRRA exponent (0 for the log family), if this is a CRRA utility.
    pub fn crra_exponent(&self) -> Option<f64> {
        match self {
            Utility::LogCrra => Some(0.0),
            Utility::PowerCrra { exponent } => Some(*exponent),
            Utility::Cara { .. } => None,
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Utility::LogCrra => x.ln(),
            Utility::PowerCrra { exponent } => x.powf(*exponent) / exponent,
            Utility::Cara { risk_aversion } => -(-risk_aversion * x).exp() / risk_aversion,
        }
    }
}

/// Full problem description: grid, one confidence set per segment
/// (piecewise-constant correspondence), utility, initial wealth and the
/// metric exponent.
#[derive(Debug, Clone)]
pub struct MarketSpec {
    pub grid: TimeGrid,
    pub segments: Vec<ConfidenceSet>,
    pub utility: Utility,
    pub initial_wealth: f64,
    pub metric_exponent: f64,
}

impl MarketSpec {
    pub fn new(
        grid: TimeGrid,
        segments: Vec<ConfidenceSet>,
        utility: Utility,
        initial_wealth: f64,
        metric_exponent: f64,
    ) -> Result<Self, MarketError> {
        utility.validate()?;
        if segments.len() != grid.num_segments() {
            return Err(MarketError::InvalidSpec(format!(
                "{} confidence sets for {} grid segments",
                segments.len(),
                grid.num_segments()
            )));
        }
        let dim = segments[0].dim();
        for s in &segments {
            if s.dim() != dim {
                return Err(MarketError::DimensionMismatch { expected: dim, got: s.dim() });
            }
        }
        if utility.is_crra() && !(initial_wealth > 0.0) {
            return Err(MarketError::InvalidSpec(
                "CRRA utilities require positive initial wealth".into(),
            ));
        }
        if !initial_wealth.is_finite() {
            return Err(MarketError::NonFinite("initial wealth"));
        }
        if !(metric_exponent > 0.0 && metric_exponent <= 2.0) {
            return Err(MarketError::InvalidSpec(format!(
                "metric exponent must lie in (0,2], got {metric_exponent}"
            )));
        }
        Ok(Self { grid, segments, utility, initial_wealth, metric_exponent })
    }

    pub fn dim(&self) -> usize {
        self.segments[0].dim()
    }

    pub fn segment_set(&self, segment: usize) -> &ConfidenceSet {
        &self.segments[segment]
    }
}

/// Deduplicated union of atom locations over all vertex jump measures,
/// in lexicographic order. Empty output flags the jump-free case.
pub fn jump_support_union(set: &ConfidenceSet) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in set.vertices() {
        for atom in v.jumps().atoms() {
            if !out.contains(&atom.location) {
                out.push(atom.location.clone());
            }
        }
    }
    out.sort_by(|a, b| lex_cmp(a, b));
    out
}

/// Support report: `kappa_bound` is the radius of the smallest origin-centred
/// ball containing `Conv(support ∪ {0})`, `kappa_nd` the reciprocal of the
/// radius of the largest origin-centred ball inside it.
#[derive(Debug, Clone)]
pub struct JumpSupportReport {
    pub support: Vec<DVector<f64>>,
    pub kappa_nd: f64,
    pub kappa_bound: f64,
}

/// Checks Conv(support ∪ {0}) for non-degeneracy around the origin.
pub fn check_nondegeneracy(support: &[DVector<f64>]) -> Result<JumpSupportReport, MarketError> {
    if support.is_empty() {
        return Err(MarketError::DegenerateSupport);
    }
    let dim = support[0].len();
    let kappa_bound = support.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let radius = if dim == 1 {
        let max = support.iter().map(|z| z[0]).fold(f64::NEG_INFINITY, f64::max);
        let min = support.iter().map(|z| z[0]).fold(f64::INFINITY, f64::min);
        if min < 0.0 && max > 0.0 {
            (-min).min(max)
        } else {
            0.0
        }
    } else {
        inscribed_radius(support, dim)
    };
    if radius <= 0.0 {
        return Err(MarketError::DegenerateSupport);
    }
    Ok(JumpSupportReport {
        support: support.to_vec(),
        kappa_nd: 1.0 / radius,
        kappa_bound,
    })
}

/// Radius of the largest origin-centred ball inside Conv(points ∪ {0}) for
/// dimension >= 2. Exact facet enumeration over d-point subsets for small
/// supports, direction sampling beyond that.
fn inscribed_radius(points: &[DVector<f64>], dim: usize) -> f64 {
    let mut pts: Vec<DVector<f64>> = points.to_vec();
    pts.push(DVector::zeros(dim));
    let n = pts.len();
    let scale = pts.iter().map(|p| p.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let n_subsets = binomial(n, dim);
    if n_subsets <= 200_000 {
        exact_inscribed_radius(&pts, dim, scale)
    } else {
        sampled_inscribed_radius(&pts, dim)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let mut acc: usize = 1;
    for i in 0..k.min(n) {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > 1_000_000 {
            return acc;
        }
    }
    acc
}

fn exact_inscribed_radius(pts: &[DVector<f64>], dim: usize, scale: f64) -> f64 {
    let tol = 1e-12 * scale;
    let mut best = f64::INFINITY;
    let mut found_facet = false;
    let mut idx = vec![0usize; dim];
    enumerate_subsets(pts.len(), dim, 0, 0, &mut idx, &mut |subset| {
        if let Some((_normal, offset)) = supporting_hyperplane(pts, subset, tol) {
            found_facet = true;
            best = best.min(offset);
        }
    });
    if found_facet && best.is_finite() {
        best.max(0.0)
    } else {
        0.0
    }
}

fn enumerate_subsets(
    n: usize,
    k: usize,
    depth: usize,
    start: usize,
    idx: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(idx);
        return;
    }
    for i in start..n {
        if n - i < k - depth {
            break;
        }
        idx[depth] = i;
        enumerate_subsets(n, k, depth + 1, i + 1, idx, visit);
    }
}

/// If the `subset` points span a hyperplane supporting the whole point set,
/// returns its unit normal and the (nonnegative) distance from the origin.
fn supporting_hyperplane(
    pts: &[DVector<f64>],
    subset: &[usize],
    tol: f64,
) -> Option<(DVector<f64>, f64)> {
    let dim = pts[0].len();
    let base = &pts[subset[0]];
    let mut diffs = DMatrix::zeros(subset.len() - 1, dim);
    for (r, &i) in subset[1..].iter().enumerate() {
        diffs.set_row(r, &(&pts[i] - base).transpose());
    }
    let normal = if dim == 2 {
        let d = diffs.row(0);
        DVector::from_vec(vec![-d[1], d[0]])
    } else {
        let svd = diffs.clone().svd(false, true);
        let v_t = svd.v_t.as_ref()?;
        // The singular values are returned in decreasing order; the last row
        // of V^T spans the (approximate) null space.
        let row = v_t.row(v_t.nrows() - 1);
        let min_sv = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if svd.singular_values.len() == dim && min_sv > tol {
            return None; // points affinely independent in full dimension: no null direction
        }
        DVector::from_iterator(dim, row.iter().cloned())
    };
    let norm = normal.norm();
    if norm <= tol {
        return None;
    }
    let normal = normal / norm;
    let c = normal.dot(base);
    // supporting if every point lies (weakly) on one side
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pts {
        let v = normal.dot(p);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= c + tol {
        Some((normal, c.abs()))
    } else if lo >= c - tol {
        Some((normal, c.abs()))
    } else {
        None
    }
}

/// Direction-sampled lower bound on the inscribed radius (fallback for very
/// large supports): min over sampled unit directions of the support function.
fn sampled_inscribed_radius(pts: &[DVector<f64>], dim: usize) -> f64 {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_D1_8);
    let mut best = f64::INFINITY;
    for _ in 0..20_000 {
        let mut u = DVector::from_fn(dim, |_, _| {
            rand_distr::StandardNormal.sample(&mut rng)
        });
        let n = u.norm();
        if n == 0.0 {
            continue;
        }
        u /= n;
        let h = pts.iter().map(|p| p.dot(&u)).fold(f64::NEG_INFINITY, f64::max);
        best = best.min(h);
    }
    best.max(0.0)
}

/// Squared Sharpe-ratio bound for CRRA utilities with negative exponent.
pub fn crra_sharpe_bound_sq(p: f64) -> f64 {
    debug_assert!(p < 0.0);
    2.0 * (1.0 - p) * (1.0 - p) / (-p)
}

/// Squared Sharpe-ratio bound for CARA utilities at consumption ratio `q`.
pub fn cara_sharpe_bound_sq(q: f64) -> f64 {
    debug_assert!(q > 0.0 && q <= 1.0);
    2.0 * q * (1.0 - q.ln())
}

/// Result of a Sharpe-bound certification over a confidence set.
#[derive(Debug, Clone)]
pub struct SharpeCheck {
    pub pass: bool,
    /// Squared-Sharpe bound being enforced (`inf` when vacuous).
    pub bound_sq: f64,
    /// Largest squared Sharpe ratio found.
    pub worst_sq: f64,
    /// Where the worst value occurred ("vertex 3", "edge 0-2 λ=0.4", ...).
    pub worst_at: String,
}

fn sharpe_over_hull(set: &ConfidenceSet, lattice: usize) -> (f64, String) {
    let mut worst = f64::NEG_INFINITY;
    let mut at = String::new();
    for (i, v) in set.vertices().iter().enumerate() {
        let s = v.squared_sharpe();
        if s > worst {
            worst = s;
            at = format!("vertex {i}");
        }
    }
    let m = set.vertices().len();
    // b^T Σ^{-1} b is not convex in (b, Σ) jointly, so vertices alone do not
    // certify the hull; probe a lattice of pairwise mixtures as well.
    if lattice >= 2 {
        for i in 0..m {
            for j in (i + 1)..m {
                for k in 1..lattice.saturating_sub(1) {
                    let lam = k as f64 / (lattice - 1) as f64;
                    let mut weights = vec![0.0; m];
                    weights[i] = 1.0 - lam;
                    weights[j] = lam;
                    if let Ok(mix) = set.mixture(&weights) {
                        let s = mix.squared_sharpe();
                        if s > worst {
                            worst = s;
                            at = format!("edge {i}-{j} λ={lam:.3}");
                        }
                    }
                }
            }
        }
    }
    (worst, at)
}

/// Certifies `b^T Σ^{-1} b <= 2(1-p)^2/(-p)` over vertices and lattice
/// mixtures. Vacuous (always passing) for `p >= 0`.
pub fn check_sharpe_crra(set: &ConfidenceSet, p: f64, lattice: usize) -> SharpeCheck {
    if p >= 0.0 {
        return SharpeCheck {
            pass: true,
            bound_sq: f64::INFINITY,
            worst_sq: 0.0,
            worst_at: "vacuous for p >= 0".into(),
        };
    }
    let bound = crra_sharpe_bound_sq(p);
    let (worst, at) = sharpe_over_hull(set, lattice);
    SharpeCheck { pass: worst <= bound, bound_sq: bound, worst_sq: worst, worst_at: at }
}

/// Certifies `b^T Σ^{-1} b <= 2 q_t (1 - log q_t)` with `q_t = (T-t+1)^{-1}`.
pub fn check_sharpe_cara(set: &ConfidenceSet, t: f64, horizon: f64, lattice: usize) -> SharpeCheck {
    let q = 1.0 / (horizon - t + 1.0);
    let bound = cara_sharpe_bound_sq(q);
    let (worst, at) = sharpe_over_hull(set, lattice);
    SharpeCheck { pass: worst <= bound, bound_sq: bound, worst_sq: worst, worst_at: at }
}

/// Margin for the closed inner approximations of the admissible region:
/// `x^T z >= -1 + 1/n` for every support point, or the open limit `x^T z > -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionMargin {
    Open,
    N(u64),
}

impl RegionMargin {
    fn rhs(&self) -> f64 {
        match self {
            RegionMargin::Open => -1.0,
            RegionMargin::N(n) => -1.0 + 1.0 / *n as f64,
        }
    }

    fn strict(&self) -> bool {
        matches!(self, RegionMargin::Open)
    }
}

/// Admissible investment region for CRRA policies: the polyhedron
/// `{x : x^T z >= -1 + 1/n for all support z}` intersected with the ball
/// `|x| < kappa` certified by the support's non-degeneracy. With no jump
/// support the region is all of R^d.
#[derive(Debug, Clone)]
pub struct AdmissibleRegion {
    dim: usize,
    halfspaces: Vec<(DVector<f64>, f64)>,
    strict: bool,
    ball_radius: Option<f64>,
}

impl AdmissibleRegion {
    /// Region with no constraints (jump-free segments, CARA policies).
    pub fn all(dim: usize) -> Self {
        Self { dim, halfspaces: Vec::new(), strict: false, ball_radius: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unbounded(&self) -> bool {
        self.halfspaces.is_empty() && self.ball_radius.is_none()
    }

    pub fn halfspaces(&self) -> &[(DVector<f64>, f64)] {
        &self.halfspaces
    }

    pub fn ball_radius(&self) -> Option<f64> {
        self.ball_radius
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        for (z, rhs) in &self.halfspaces {
            let v = z.dot(x);
            if self.strict {
                if v <= *rhs {
                    return false;
                }
            } else if v < *rhs {
                return false;
            }
        }
        if let Some(r) = self.ball_radius {
            if x.norm() >= r {
                return false;
            }
        }
        true
    }

    /// For one-dimensional regions, the interval `[lo, hi]` (possibly
    /// infinite) described by the constraints.
    pub fn interval(&self) -> Option<(f64, f64)> {
        if self.dim != 1 {
            return None;
        }
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (z, rhs) in &self.halfspaces {
            let a = z[0];
            if a > 0.0 {
                lo = lo.max(rhs / a);
            } else if a < 0.0 {
                hi = hi.min(rhs / a);
            }
        }
        if let Some(r) = self.ball_radius {
            lo = lo.max(-r);
            hi = hi.min(r);
        }
        Some((lo, hi))
    }
}

/// Builds the admissible region for a jump support. Empty support yields the
/// unconstrained region (all of R^`dim`); a non-degenerate support
/// additionally bounds the region by the ball `|x| < kappa_nd`.
pub fn admissible_region(
    support: &[DVector<f64>],
    margin: RegionMargin,
    dim: usize,
) -> Result<AdmissibleRegion, MarketError> {
    if support.is_empty() {
        return Ok(AdmissibleRegion::all(dim));
    }
    let report = check_nondegeneracy(support)?;
    let rhs = margin.rhs();
    let halfspaces = support.iter().map(|z| (z.clone(), rhs)).collect();
    Ok(AdmissibleRegion {
        dim,
        halfspaces,
        strict: margin.strict(),
        ball_radius: Some(report.kappa_nd),
    })
}
