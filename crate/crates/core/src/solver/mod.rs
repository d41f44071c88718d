//! Projection of a query onto the convex hull of a set of training rows.
//!
//! All algorithms minimize `1/2 |alpha D - x|^2` over the simplex. On large
//! row sets they run inside a working-set loop: solve over a pool seeded with
//! the query's nearest rows, price every row against the pool optimum, grow
//! the pool with the violators and repeat until the full gap closes.

pub(crate) mod affine;
mod batch;
mod dual;
mod frank_wolfe;
pub(crate) mod gradient_projection;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::EncodedDataset;
use crate::matrix::{axpy, dot, sq_dist, Matrix};
use crate::schema::EncodingLayout;

pub use batch::{batch_project, BatchConfig, BatchOutcome, IntegerRepair, RowOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Dual for large row sets, gradient projection otherwise.
    #[default]
    Auto,
    GradientProjection,
    FrankWolfe,
    Dual,
}

impl Algorithm {
    /// Algorithm actually run on `n` rows in dimension `d`.
    pub fn resolve(self, n: usize, d: usize) -> Algorithm {
        match self {
            Algorithm::Auto if n > 8 * (d + 1) => Algorithm::Dual,
            Algorithm::Auto => Algorithm::GradientProjection,
            other => other,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Auto => "auto",
            Algorithm::GradientProjection => "gradient_projection",
            Algorithm::FrankWolfe => "frank_wolfe",
            Algorithm::Dual => "dual",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "auto" => Ok(Algorithm::Auto),
            "gp" | "gradient_projection" => Ok(Algorithm::GradientProjection),
            "fw" | "frank_wolfe" => Ok(Algorithm::FrankWolfe),
            "dual" => Ok(Algorithm::Dual),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Bound on the variational-inequality residual.
    pub tol_opt: f64,
    /// Bound on `|sum(alpha) - 1|`.
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Scaled-space distance under which a query counts as inside.
    pub membership_eps: f64,
    /// Row count above which the working-set loop is used.
    pub pool_threshold: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Auto,
            tol_opt: 1e-8,
            tol_feas: 1e-10,
            max_iter: 10_000,
            membership_eps: 1e-6,
            pool_threshold: 2000,
        }
    }
}

impl SolverConfig {
    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    /// Stopping test: the gap is within `tol_opt` and fixes membership.
    /// Every hull point lies at squared distance at least
    /// `dist_sq - 2 * gap` from the query, so near the boundary the gap must
    /// shrink until the status cannot flip.
    pub(crate) fn settled(&self, gap: f64, dist_sq: f64) -> bool {
        let eps_sq = self.membership_eps * self.membership_eps;
        gap <= self.tol_opt && (dist_sq <= eps_sq || dist_sq - 2.0 * gap > eps_sq)
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let ok = self.tol_opt > 0.0 && self.tol_feas > 0.0 && self.membership_eps > 0.0 && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(SolveError::InvalidConfig("tolerances and max_iter must be positive".into()))
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("iteration budget exhausted after {} iterations (certificate {:.3e})", best.iterations, best.certificate)]
    MaxIterExceeded { best: Box<ProjectionResult> },
    #[error("numeric breakdown: {0}")]
    NumericBreakdown(String),
    #[error("no training row is admissible for this query under the domain")]
    InfeasibleDomain,
    #[error("query has {got} coordinates, the training set {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty training subset")]
    EmptyHull,
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
}

impl SolveError {
    /// Best iterate carried by a budget failure.
    pub fn best(&self) -> Option<&ProjectionResult> {
        match self {
            SolveError::MaxIterExceeded { best } => Some(best),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Outside,
}

/// Closest point of the hull (possibly intersected with the domain) to a
/// query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    /// `(training row index, weight)`, positive weights only, descending.
    pub weights: Vec<(usize, f64)>,
    pub distance: f64,
    pub raw_distance: f64,
    pub status: Membership,
    pub iterations: usize,
    /// `max_i (x - x_h) . (D_i - x_h)` over the rows the projection ranged
    /// over.
    pub certificate: f64,
    pub certified: bool,
    /// Set when the support is affinely dependent, so other weightings give
    /// the same point.
    pub non_unique_weights: bool,
    pub algorithm: Algorithm,
}

impl ProjectionResult {
    pub fn is_inside(&self) -> bool {
        self.status == Membership::Inside
    }
}

/// Rows of a matrix the hull ranges over.
#[derive(Debug, Clone, Copy)]
pub struct HullView<'a> {
    pub matrix: &'a Matrix,
    pub rows: Option<&'a [usize]>,
}

impl<'a> HullView<'a> {
    pub fn all(matrix: &'a Matrix) -> Self {
        Self { matrix, rows: None }
    }

    pub fn subset(matrix: &'a Matrix, rows: &'a [usize]) -> Self {
        Self { matrix, rows: Some(rows) }
    }

    pub fn len(&self) -> usize {
        self.rows.map_or(self.matrix.nrows(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Matrix row index of local row `k`.
    pub fn global(&self, k: usize) -> usize {
        self.rows.map_or(k, |r| r[k])
    }

    pub fn point(&self, k: usize) -> &'a [f64] {
        self.matrix.row(self.global(k))
    }
}

/// Sparse iterate returned by the inner algorithms, indexed like the view.
#[derive(Debug, Clone)]
pub(crate) struct IterState {
    pub alpha: Vec<(usize, f64)>,
    pub iterations: usize,
    pub converged: bool,
}

impl IterState {
    pub(crate) fn from_dense(alpha: &[f64], iterations: usize, converged: bool) -> Self {
        let alpha = alpha.iter().copied().enumerate().filter(|&(_, a)| a > 0.0).collect();
        Self { alpha, iterations, converged }
    }
}

/// `g_k = D_k . r` for every row of the view.
pub(crate) fn gradient(view: &HullView<'_>, r: &[f64], g: &mut [f64]) {
    for (k, gk) in g.iter_mut().enumerate() {
        *gk = dot(view.point(k), r);
    }
}

/// Local index of the row closest to the query.
pub fn nearest_row(view: &HullView<'_>, query: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for k in 0..view.len() {
        let d = sq_dist(view.point(k), query);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

fn run_inner(
    algorithm: Algorithm,
    view: &HullView<'_>,
    query: &[f64],
    config: &SolverConfig,
    init: &[(usize, f64)],
) -> Result<IterState, SolveError> {
    match algorithm {
        Algorithm::FrankWolfe => frank_wolfe::solve(view, query, config, init),
        Algorithm::Dual => dual::solve(view, query, config, init),
        _ => gradient_projection::solve(view, query, config, init),
    }
}

/// Solves over the whole view, through the working-set loop when the view
/// is large. Weights are returned in view-local indices.
fn solve_view(
    view: &HullView<'_>,
    query: &[f64],
    config: &SolverConfig,
    algorithm: Algorithm,
) -> Result<IterState, SolveError> {
    let n = view.len();
    let d = view.dim();
    let mut dist: Vec<(f64, usize)> = (0..n).map(|k| (sq_dist(view.point(k), query), k)).collect();
    let nearest = dist
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|p| p.1)
        .ok_or(SolveError::EmptyHull)?;
    if n <= config.pool_threshold.max(1) {
        return run_inner(algorithm, view, query, config, &[(nearest, 1.0)]);
    }

    let initial = (4 * (d + 1)).clamp(64, n);
    let grow = (d + 1).max(32);
    dist.select_nth_unstable_by(initial - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut pool: Vec<usize> = dist[..initial].iter().map(|p| p.1).collect();
    pool.sort_unstable();
    drop(dist);
    let mut in_pool = vec![false; n];
    pool.iter().for_each(|&k| in_pool[k] = true);

    // Weights in local view indices.
    let mut weights: Vec<(usize, f64)> = vec![(nearest, 1.0)];
    let mut iterations = 0;
    let mut g = vec![0.0; n];
    let mut r = vec![0.0; d];
    loop {
        let globals: Vec<usize> = pool.iter().map(|&k| view.global(k)).collect();
        let sub = HullView::subset(view.matrix, &globals);
        let position = |k: usize| pool.binary_search(&k).expect("support row in pool");
        let init: Vec<(usize, f64)> = weights.iter().map(|&(k, a)| (position(k), a)).collect();
        let mut budget = config.clone();
        budget.max_iter = config.max_iter.saturating_sub(iterations).max(1);
        let state = run_inner(algorithm, &sub, query, &budget, &init)?;
        iterations += state.iterations;
        weights = state.alpha.iter().map(|&(i, a)| (pool[i], a)).collect();
        if !state.converged || iterations >= config.max_iter {
            return Ok(IterState { alpha: weights, iterations, converged: false });
        }

        r.iter_mut().zip(query).for_each(|(v, q)| *v = -q);
        for &(k, a) in &weights {
            axpy(a, view.point(k), &mut r);
        }
        gradient(view, &r, &mut g);
        let along: f64 = weights.iter().map(|&(k, a)| a * g[k]).sum();
        let min = g.iter().copied().fold(f64::INFINITY, f64::min);
        if config.settled(along - min, dot(&r, &r)) {
            return Ok(IterState { alpha: weights, iterations, converged: true });
        }
        let mut violators: Vec<usize> = (0..n).filter(|&k| !in_pool[k] && g[k] < along - config.tol_opt).collect();
        if violators.is_empty() {
            return Ok(IterState { alpha: weights, iterations, converged: false });
        }
        if violators.len() > grow {
            violators.select_nth_unstable_by(grow - 1, |&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));
            violators.truncate(grow);
        }
        for k in violators {
            in_pool[k] = true;
            pool.push(k);
        }
        pool.sort_unstable();
    }
}

/// One projection problem: a query against (a subset of) a dataset.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionProblem<'a> {
    pub query: &'a [f64],
    pub dataset: &'a EncodedDataset,
    /// Restrict the hull to these dataset rows.
    pub rows: Option<&'a [usize]>,
    pub config: &'a SolverConfig,
}

impl<'a> ProjectionProblem<'a> {
    pub fn new(query: &'a [f64], dataset: &'a EncodedDataset, config: &'a SolverConfig) -> Self {
        Self { query, dataset, rows: None, config }
    }

    pub fn with_rows(mut self, rows: &'a [usize]) -> Self {
        self.rows = Some(rows);
        self
    }

    fn view(&self) -> HullView<'a> {
        HullView { matrix: &self.dataset.matrix, rows: self.rows }
    }
}

/// Projects the query onto the hull of the problem's rows.
pub fn project_continuous(problem: &ProjectionProblem<'_>) -> Result<ProjectionResult, SolveError> {
    project_view(&problem.view(), problem.query, problem.config, &problem.dataset.layout)
}

/// Projection onto the hull of arbitrary matrix rows; `layout` supplies the
/// raw-unit scales.
pub fn project_view(
    view: &HullView<'_>,
    query: &[f64],
    config: &SolverConfig,
    layout: &EncodingLayout,
) -> Result<ProjectionResult, SolveError> {
    config.validate()?;
    if view.is_empty() {
        return Err(SolveError::EmptyHull);
    }
    if query.len() != view.dim() {
        return Err(SolveError::DimensionMismatch { expected: view.dim(), got: query.len() });
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NumericBreakdown("query has non-finite coordinates".into()));
    }
    let algorithm = config.algorithm.resolve(view.len(), view.dim());
    let state = solve_view(view, query, config, algorithm)?;
    let converged = state.converged;
    let result = finalize(view, query, state, config, algorithm, &layout.raw_scale_vector());
    if converged || result.certified {
        Ok(result)
    } else {
        Err(SolveError::MaxIterExceeded { best: Box::new(result) })
    }
}

/// Cleans the weights, rebuilds the point and computes the certificate from
/// scratch over the whole view.
fn finalize(
    view: &HullView<'_>,
    query: &[f64],
    state: IterState,
    config: &SolverConfig,
    algorithm: Algorithm,
    raw_scales: &[f64],
) -> ProjectionResult {
    let d = view.dim();
    let mut members: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &(k, a) in &state.alpha {
        if a > 0.0 && a.is_finite() {
            members.push(k);
            weights.push(a);
        }
    }
    if members.is_empty() {
        members.push(nearest_row(view, query));
        weights.push(1.0);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    if members.len() > d + 1 && members.len() <= 8 * (d + 1) {
        affine::caratheodory_reduce(view, &mut members, &mut weights);
    }
    let non_unique = members.len() > 1 && affine::affine_rank(view, &members) < members.len() - 1;

    let mut point = vec![0.0; d];
    for (&k, &w) in members.iter().zip(&weights) {
        axpy(w, view.point(k), &mut point);
    }
    let certificate = certificate(view, query, &point);
    let distance = sq_dist(query, &point).sqrt();
    let raw_distance = query
        .iter()
        .zip(&point)
        .zip(raw_scales)
        .map(|((a, b), s)| ((a - b) * s).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut pairs: Vec<(usize, f64)> = members.iter().map(|&k| view.global(k)).zip(weights).collect();
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ProjectionResult {
        point,
        weights: pairs,
        distance,
        raw_distance,
        status: if distance <= config.membership_eps { Membership::Inside } else { Membership::Outside },
        iterations: state.iterations,
        certificate,
        certified: certificate <= config.tol_opt,
        non_unique_weights: non_unique,
        algorithm,
    }
}

/// `max_i (x - x_h) . (D_i - x_h)`.
pub fn certificate(view: &HullView<'_>, query: &[f64], point: &[f64]) -> f64 {
    let u: Vec<f64> = query.iter().zip(point).map(|(a, b)| a - b).collect();
    let base = dot(&u, point);
    (0..view.len()).map(|k| dot(&u, view.point(k)) - base).fold(f64::NEG_INFINITY, f64::max)
}

/// Outcome of [`verify_kkt`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub passed: bool,
    pub certificate: f64,
    pub weight_sum_residual: f64,
    pub min_weight: f64,
    pub reconstruction_error: f64,
    pub violations: Vec<String>,
}

/// Re-checks a result against its problem from scratch.
pub fn verify_kkt(result: &ProjectionResult, problem: &ProjectionProblem<'_>) -> KktReport {
    let config = problem.config;
    let matrix = &problem.dataset.matrix;
    let view = problem.view();
    let mut violations = Vec::new();

    let sum: f64 = result.weights.iter().map(|p| p.1).sum();
    let min_weight = result.weights.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut rebuilt = vec![0.0; matrix.ncols()];
    for &(i, w) in &result.weights {
        if i >= matrix.nrows() {
            violations.push(format!("weight on unknown row {i}"));
            continue;
        }
        if let Some(rows) = problem.rows {
            if !rows.contains(&i) {
                violations.push(format!("weight on row {i} outside the admissible subset"));
            }
        }
        if w < 0.0 {
            violations.push(format!("alpha[{i}] = {w:e} < 0"));
        }
        axpy(w, matrix.row(i), &mut rebuilt);
    }
    let residual = (sum - 1.0).abs();
    if !(residual <= config.tol_feas) {
        violations.push(format!("|sum(alpha) - 1| = {residual:e} > {:e}", config.tol_feas));
    }
    let reconstruction_error = if result.point.len() == rebuilt.len() {
        sq_dist(&rebuilt, &result.point).sqrt()
    } else {
        f64::INFINITY
    };
    if !(reconstruction_error <= 1e-10) {
        violations.push(format!("|alpha D - x_h| = {reconstruction_error:e} > 1e-10"));
    }
    let cert = if result.point.len() == view.dim() {
        certificate(&view, problem.query, &result.point)
    } else {
        f64::INFINITY
    };
    if !(cert <= config.tol_opt) {
        violations.push(format!("certificate {cert:e} > tol_opt {:e}", config.tol_opt));
    }
    KktReport {
        passed: violations.is_empty(),
        certificate: cert,
        weight_sum_residual: residual,
        min_weight: if min_weight.is_finite() { min_weight } else { 0.0 },
        reconstruction_error,
        violations,
    }
}
