//! Projection of every test row, in parallel, with per-row error capture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{project_continuous, ProjectionProblem, ProjectionResult, SolveError, SolverConfig};
use crate::discrete::{project_with_discrete, DiscreteMethod, DiscreteSolveTrace, PathIndex};
use crate::ingest::{EncodedDataset, IngestError};
use crate::matrix::sq_dist;
use crate::schema::{DecodedValue, DomainSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub solver: SolverConfig,
    pub method: DiscreteMethod,
    /// Worker count; `None` uses every core.
    pub threads: Option<usize>,
    /// Round integer features of each projection and re-project the result.
    pub round_integers: bool,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), method: DiscreteMethod::Exact, threads: None, round_integers: false }
    }
}

/// Integer-rounded projection and how far it sits from the hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerRepair {
    pub point: Vec<f64>,
    pub distance: f64,
    /// Distance from the rounded point back to the hull.
    pub hull_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOutcome {
    /// Index of the test row in its dataset.
    pub index: usize,
    pub result: Option<ProjectionResult>,
    pub has_continuous_path: bool,
    /// The domain was infeasible and the projection fell back to a domain
    /// with the fixed groups released.
    pub released_fixed: bool,
    pub trace: Option<DiscreteSolveTrace>,
    pub integer_repair: Option<IntegerRepair>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub rows: Vec<RowOutcome>,
    pub failures: usize,
}

/// Projects every test row onto the training hull intersected with the
/// domain. Output order follows the test set; scheduling never changes a
/// result.
pub fn batch_project(
    train: &EncodedDataset,
    test: &EncodedDataset,
    domain: &DomainSpec,
    config: &BatchConfig,
) -> Result<BatchOutcome, SolveError> {
    if train.layout != test.layout {
        return Err(SolveError::Ingest(IngestError::LayoutRequired));
    }
    if train.is_empty() {
        return Err(SolveError::EmptyHull);
    }
    config.solver.validate()?;
    let mut path_groups: Vec<&str> = domain.path_groups.iter().map(String::as_str).collect();
    for g in domain.fixed_groups() {
        if !path_groups.contains(&g) {
            path_groups.push(g);
        }
    }
    let paths = PathIndex::new(train, &path_groups)?;

    let work = || -> Vec<RowOutcome> {
        (0..test.len()).into_par_iter().map(|i| project_row(train, test, i, domain, config, &paths)).collect()
    };
    let rows = match config.threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SolveError::InvalidConfig(e.to_string()))?
            .install(work),
        _ => work(),
    };
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(BatchOutcome { rows, failures })
}

fn project_row(
    train: &EncodedDataset,
    test: &EncodedDataset,
    index: usize,
    domain: &DomainSpec,
    config: &BatchConfig,
    paths: &PathIndex,
) -> RowOutcome {
    let query = test.point(index);
    let mut out = RowOutcome {
        index,
        result: None,
        has_continuous_path: true,
        released_fixed: false,
        trace: None,
        integer_repair: None,
        error: None,
    };
    match paths.check(query) {
        Ok(p) => out.has_continuous_path = p,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    }

    let solved = if domain.has_discrete() {
        match project_with_discrete(query, train, domain, &config.solver, config.method) {
            Err(SolveError::InfeasibleDomain) => {
                out.released_fixed = true;
                project_with_discrete(query, train, &domain.release_fixed(), &config.solver, config.method)
            }
            other => other,
        }
        .map(|(r, t)| (r, Some(t)))
    } else {
        project_continuous(&ProjectionProblem::new(query, train, &config.solver)).map(|r| (r, None))
    };
    match solved {
        Ok((result, trace)) => {
            out.result = Some(result);
            out.trace = trace;
        }
        Err(e) => {
            out.error = Some(e.to_string());
            out.result = e.best().cloned();
        }
    }
    if config.round_integers {
        if let Some(result) = &out.result {
            out.integer_repair = repair_integers(train, query, result, &config.solver);
        }
    }
    out
}

/// Rounds integer features of the projection in raw units, clamps them to
/// their declared bounds and measures the rounded point against the
/// training hull.
fn repair_integers(
    train: &EncodedDataset,
    query: &[f64],
    result: &ProjectionResult,
    solver: &SolverConfig,
) -> Option<IntegerRepair> {
    let layout = &train.layout;
    if !layout.numeric.iter().any(|c| c.integer) {
        return None;
    }
    let decoded = layout.decode_point(&result.point).ok()?;
    let mut point = result.point.clone();
    for col in layout.numeric.iter().filter(|c| c.integer) {
        if let Some(DecodedValue::Number(v)) = decoded.get(&col.feature) {
            let (lo, hi) = layout.schema.features[col.feature_index].kind.bounds();
            let mut r = v.round();
            if let Some(lo) = lo {
                r = r.max(lo);
            }
            if let Some(hi) = hi {
                r = r.min(hi);
            }
            point[col.column] = col.scale.encode(r);
        }
    }
    let hull_gap = project_continuous(&ProjectionProblem::new(&point, train, solver))
        .or_else(|e| e.best().cloned().ok_or(e))
        .ok()?
        .distance;
    Some(IntegerRepair { distance: sq_dist(query, &point).sqrt(), point, hull_gap })
}
