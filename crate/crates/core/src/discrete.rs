//! Projection onto the hull intersected with a domain whose categorical
//! groups are (partly) discrete.
//!
//! A pure one-hot block of `x_h = alpha D` forces every row with positive
//! weight to carry that level, so the mixed problem splits into one
//! continuous projection per training-present profile of the constrained
//! groups.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::ingest::{EncodedDataset, IngestError};
use crate::matrix::{axpy, dot, sq_dist};
use crate::profile::{CategoricalProfile, LevelSlot};
use crate::schema::{DomainSpec, EncodingLayout, GroupMode};
use crate::solver::{
    project_continuous, project_view, HullView, ProjectionProblem, ProjectionResult, SolveError, SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteMethod {
    #[default]
    Exact,
    Homotopy,
}

impl std::str::FromStr for DiscreteMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "exact_enumeration" => Ok(DiscreteMethod::Exact),
            "homotopy" => Ok(DiscreteMethod::Homotopy),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

impl std::fmt::Display for DiscreteMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiscreteMethod::Exact => "exact",
            DiscreteMethod::Homotopy => "homotopy",
        })
    }
}

/// Default penalty weights for the homotopy stages.
pub const DEFAULT_SCHEDULE: [f64; 5] = [0.0, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolveTrace {
    pub profiles_considered: usize,
    pub profiles_pruned: usize,
    pub winning_profile: Option<CategoricalProfile>,
    /// Distance reached by every profile actually solved.
    pub profile_distances: Vec<(CategoricalProfile, f64)>,
    pub homotopy: Option<HomotopyTrace>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HomotopyTrace {
    pub schedule: Vec<f64>,
    pub stage_converged: Vec<bool>,
    /// Distance of the fully relaxed problem, a lower bound on the optimum.
    pub relaxed_distance: f64,
    /// `distance - relaxed_distance`; positive when rounding cost something.
    pub gap: f64,
    pub rounded_profile: Option<CategoricalProfile>,
    /// The rounded profile had no training rows; the nearest present one
    /// was used instead.
    pub fallback_used: bool,
}

/// Groups whose levels are pinned by the domain, with their modes.
struct Constrained<'a> {
    layout: &'a EncodingLayout,
    modes: Vec<GroupMode>,
    keep: Vec<bool>,
}

impl<'a> Constrained<'a> {
    fn new(layout: &'a EncodingLayout, domain: &DomainSpec) -> Self {
        let modes: Vec<GroupMode> = layout.groups.iter().map(|g| domain.mode(&g.feature)).collect();
        let keep = modes.iter().map(GroupMode::is_discrete).collect();
        Self { layout, modes, keep }
    }

    fn any(&self) -> bool {
        self.keep.iter().any(|&k| k)
    }

    /// Query levels on the fixed groups; every fixed block must be pure.
    fn fixed_slots(&self, query: &[f64]) -> Result<Vec<Option<LevelSlot>>, IngestError> {
        let mut out = Vec::with_capacity(self.modes.len());
        for (g, mode) in self.layout.groups.iter().zip(&self.modes) {
            if matches!(mode, GroupMode::FixedToQuery) {
                out.push(Some(pure_slot(g.optional, &query[g.range()]).ok_or_else(|| IngestError::NonPureProfile(g.feature.clone()))?));
            } else {
                out.push(None);
            }
        }
        Ok(out)
    }

    /// Training-present keys admitted by the domain, with their rows.
    fn admissible(
        &self,
        dataset: &EncodedDataset,
        fixed: &[Option<LevelSlot>],
    ) -> BTreeMap<CategoricalProfile, Vec<usize>> {
        let mut keys: BTreeMap<CategoricalProfile, Vec<usize>> = BTreeMap::new();
        'profiles: for (profile, rows) in &dataset.profile_index {
            let key = profile.restrict(&self.keep);
            for (i, slot) in key.slots.iter().enumerate() {
                if let Some(f) = fixed[i] {
                    if *slot != f {
                        continue 'profiles;
                    }
                }
                let complete = matches!(self.modes[i], GroupMode::DiscreteExclusive { complete: true });
                if complete && *slot == LevelSlot::Empty {
                    continue 'profiles;
                }
            }
            keys.entry(key).or_default().extend_from_slice(rows);
        }
        for rows in keys.values_mut() {
            rows.sort_unstable();
        }
        keys
    }

    /// Squared distance between the query's constrained blocks and the
    /// one-hot blocks of `key`: a lower bound on the key's distance.
    fn mismatch(&self, query: &[f64], key: &CategoricalProfile) -> f64 {
        let mut total = 0.0;
        for ((g, slot), &keep) in self.layout.groups.iter().zip(&key.slots).zip(&self.keep) {
            if !keep {
                continue;
            }
            for (i, &v) in query[g.range()].iter().enumerate() {
                let target = if *slot == LevelSlot::Level(i as u32) { 1.0 } else { 0.0 };
                total += (v - target) * (v - target);
            }
        }
        total
    }
}

fn pure_slot(optional: bool, block: &[f64]) -> Option<LevelSlot> {
    let mut hot = None;
    for (i, &v) in block.iter().enumerate() {
        if v == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if v != 0.0 {
            return None;
        }
    }
    match hot {
        Some(i) => Some(LevelSlot::Level(i as u32)),
        None if optional => Some(LevelSlot::Empty),
        None => None,
    }
}

/// Projection onto hull intersected with the domain.
pub fn project_with_discrete(
    query: &[f64],
    dataset: &EncodedDataset,
    domain: &DomainSpec,
    config: &SolverConfig,
    method: DiscreteMethod,
) -> Result<(ProjectionResult, DiscreteSolveTrace), SolveError> {
    match method {
        DiscreteMethod::Exact => exact_enumeration(query, dataset, domain, config, true),
        DiscreteMethod::Homotopy => homotopy_project(query, dataset, domain, config, &DEFAULT_SCHEDULE),
    }
}

/// Exact solve by enumerating training-present profiles in ascending
/// mismatch order. With `prune` off every profile is solved.
pub fn exact_enumeration(
    query: &[f64],
    dataset: &EncodedDataset,
    domain: &DomainSpec,
    config: &SolverConfig,
    prune: bool,
) -> Result<(ProjectionResult, DiscreteSolveTrace), SolveError> {
    check_query(query, dataset)?;
    let layout = &dataset.layout;
    let constrained = Constrained::new(layout, domain);
    if !constrained.any() {
        let result = project_continuous(&ProjectionProblem::new(query, dataset, config))?;
        return Ok((result, DiscreteSolveTrace::default()));
    }
    let fixed = constrained.fixed_slots(query)?;
    let keys = constrained.admissible(dataset, &fixed);
    if keys.is_empty() {
        return Err(SolveError::InfeasibleDomain);
    }
    let mut order: Vec<(f64, &CategoricalProfile, &Vec<usize>)> =
        keys.iter().map(|(k, rows)| (constrained.mismatch(query, k), k, rows)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let mut trace = DiscreteSolveTrace::default();
    let mut best: Option<(ProjectionResult, CategoricalProfile)> = None;
    let mut failure: Option<SolveError> = None;
    for (i, (bound, key, rows)) in order.iter().enumerate() {
        if prune {
            if let Some((inc, _)) = &best {
                if *bound > inc.distance * inc.distance {
                    trace.profiles_pruned = order.len() - i;
                    break;
                }
            }
        }
        let view = HullView::subset(&dataset.matrix, rows);
        let result = match project_view(&view, query, config, layout) {
            Ok(r) => r,
            Err(SolveError::MaxIterExceeded { best }) => {
                failure = Some(SolveError::MaxIterExceeded { best: best.clone() });
                *best
            }
            Err(e) => return Err(e),
        };
        trace.profiles_considered += 1;
        trace.profile_distances.push(((*key).clone(), result.distance));
        let better = best.as_ref().is_none_or(|(inc, _)| result.distance < inc.distance);
        if better {
            best = Some((result, (*key).clone()));
        }
    }
    let (result, key) = best.expect("at least one admissible profile");
    trace.winning_profile = Some(key);
    match failure {
        Some(_) if !result.certified => Err(SolveError::MaxIterExceeded { best: Box::new(result) }),
        _ => Ok((result, trace)),
    }
}

fn check_query(query: &[f64], dataset: &EncodedDataset) -> Result<(), SolveError> {
    if dataset.is_empty() {
        return Err(SolveError::EmptyHull);
    }
    if query.len() != dataset.width() {
        return Err(SolveError::DimensionMismatch { expected: dataset.width(), got: query.len() });
    }
    Ok(())
}

/// Homotopy heuristic: relaxed solve, then increasing integrality penalties
/// `lambda * sum x(1-x)` over the discrete coordinates, then rounding to the
/// heaviest level per group and a certified fixed-profile solve.
pub fn homotopy_project(
    query: &[f64],
    dataset: &EncodedDataset,
    domain: &DomainSpec,
    config: &SolverConfig,
    schedule: &[f64],
) -> Result<(ProjectionResult, DiscreteSolveTrace), SolveError> {
    check_query(query, dataset)?;
    if schedule.windows(2).any(|w| !(w[0] < w[1])) || schedule.iter().any(|l| !(*l >= 0.0)) {
        return Err(SolveError::InvalidConfig("homotopy schedule must be increasing and non-negative".into()));
    }
    let layout = &dataset.layout;
    let constrained = Constrained::new(layout, domain);
    if !constrained.any() {
        let result = project_continuous(&ProjectionProblem::new(query, dataset, config))?;
        return Ok((result, DiscreteSolveTrace::default()));
    }
    let fixed = constrained.fixed_slots(query)?;
    let keys = constrained.admissible(dataset, &fixed);
    if keys.is_empty() {
        return Err(SolveError::InfeasibleDomain);
    }
    let mut feasible: Vec<usize> = keys.values().flatten().copied().collect();
    feasible.sort_unstable();
    let view = HullView::subset(&dataset.matrix, &feasible);

    let relaxed = match project_view(&view, query, config, layout) {
        Ok(r) => r,
        Err(SolveError::MaxIterExceeded { best }) => *best,
        Err(e) => return Err(e),
    };
    let mask: Vec<bool> = {
        let mut m = vec![false; layout.width()];
        for (g, &keep) in layout.groups.iter().zip(&constrained.keep) {
            if keep {
                m[g.range()].iter_mut().for_each(|v| *v = true);
            }
        }
        m
    };

    // Dense weights over the feasible rows, seeded by the relaxed optimum.
    let position: BTreeMap<usize, usize> = feasible.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let mut alpha = vec![0.0; feasible.len()];
    for &(row, w) in &relaxed.weights {
        alpha[position[&row]] = w;
    }
    let mut stage_converged = Vec::new();
    for &lambda in schedule.iter().filter(|&&l| l > 0.0) {
        stage_converged.push(penalized_descent(&view, query, &mask, lambda, &mut alpha, config.max_iter.min(2000)));
    }

    // Round each constrained group to its heaviest level.
    let mut xh = vec![0.0; layout.width()];
    for (k, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            axpy(a, view.point(k), &mut xh);
        }
    }
    let mut slots = Vec::with_capacity(layout.groups.len());
    for (i, g) in layout.groups.iter().enumerate() {
        if !constrained.keep[i] {
            slots.push(LevelSlot::Any);
            continue;
        }
        if let Some(f) = fixed[i] {
            slots.push(f);
            continue;
        }
        let block = &xh[g.range()];
        let (arg, _) = block.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
        let mass: f64 = block.iter().sum();
        let complete = matches!(constrained.modes[i], GroupMode::DiscreteExclusive { complete: true });
        slots.push(if !complete && mass < 0.5 { LevelSlot::Empty } else { LevelSlot::Level(arg as u32) });
    }
    let rounded = CategoricalProfile::new(slots);
    let (key, fallback_used) = if keys.contains_key(&rounded) {
        (rounded.clone(), false)
    } else {
        // Nearest training-present profile to the penalized point.
        let nearest = keys
            .keys()
            .min_by(|a, b| constrained.mismatch(&xh, a).total_cmp(&constrained.mismatch(&xh, b)).then_with(|| a.cmp(b)))
            .expect("non-empty")
            .clone();
        (nearest, true)
    };
    let rows = &keys[&key];
    let final_view = HullView::subset(&dataset.matrix, rows);
    let result = match project_view(&final_view, query, config, layout) {
        Ok(r) => r,
        Err(e) => return Err(e),
    };
    let trace = DiscreteSolveTrace {
        profiles_considered: 1,
        profiles_pruned: 0,
        winning_profile: Some(key.clone()),
        profile_distances: vec![(key, result.distance)],
        homotopy: Some(HomotopyTrace {
            schedule: schedule.to_vec(),
            stage_converged,
            relaxed_distance: relaxed.distance,
            gap: result.distance - relaxed.distance,
            rounded_profile: Some(rounded),
            fallback_used,
        }),
    };
    Ok((result, trace))
}

/// Projected gradient with backtracking on
/// `1/2 |alpha D - x|^2 + lambda * sum_{masked j} x_j (1 - x_j)`.
/// Returns whether the stage reached a stationary point.
fn penalized_descent(
    view: &HullView<'_>,
    query: &[f64],
    mask: &[bool],
    lambda: f64,
    alpha: &mut Vec<f64>,
    max_iter: usize,
) -> bool {
    let d = query.len();
    let objective = |alpha: &[f64], xh: &mut Vec<f64>| -> f64 {
        xh.iter_mut().for_each(|v| *v = 0.0);
        for (k, &a) in alpha.iter().enumerate() {
            if a > 0.0 {
                axpy(a, view.point(k), xh);
            }
        }
        let fit = 0.5 * sq_dist(xh, query);
        let penalty: f64 = xh.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v * (1.0 - v)).sum();
        fit + lambda * penalty
    };
    let mut xh = vec![0.0; d];
    let mut trial_xh = vec![0.0; d];
    let mut f = objective(alpha, &mut xh);
    let mut step = 1.0;
    let mut grad = vec![0.0; alpha.len()];
    let mut u = vec![0.0; d];
    for _ in 0..max_iter {
        for j in 0..d {
            u[j] = xh[j] - query[j] + if mask[j] { lambda * (1.0 - 2.0 * xh[j]) } else { 0.0 };
        }
        for (k, gk) in grad.iter_mut().enumerate() {
            *gk = dot(view.point(k), &u);
        }
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let trial = project_simplex(&trial);
            let decrease: f64 = grad.iter().zip(trial.iter().zip(alpha.iter())).map(|(g, (t, a))| g * (t - a)).sum();
            let ft = objective(&trial, &mut trial_xh);
            if ft <= f + 1e-4 * decrease {
                let moved = trial.iter().zip(alpha.iter()).map(|(t, a)| (t - a).abs()).sum::<f64>();
                *alpha = trial;
                std::mem::swap(&mut xh, &mut trial_xh);
                f = ft;
                step *= 2.0;
                accepted = true;
                if moved <= 1e-12 {
                    return true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return true;
        }
    }
    false
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Whether some training row shares the query's levels on every group in
/// `path_groups`. Numeric columns play no role.
pub fn has_continuous_path<S: AsRef<str>>(
    query: &[f64],
    dataset: &EncodedDataset,
    path_groups: &[S],
) -> Result<bool, IngestError> {
    PathIndex::new(dataset, path_groups)?.check(query)
}

/// Training profiles restricted to a set of groups, for repeated path
/// checks.
#[derive(Debug, Clone)]
pub struct PathIndex {
    layout_groups: Vec<(usize, usize, bool)>,
    names: Vec<String>,
    keep: Vec<bool>,
    present: HashSet<CategoricalProfile>,
}

impl PathIndex {
    pub fn new<S: AsRef<str>>(dataset: &EncodedDataset, path_groups: &[S]) -> Result<Self, IngestError> {
        let layout = &dataset.layout;
        let mut keep = vec![false; layout.groups.len()];
        for name in path_groups {
            let name = name.as_ref();
            let i = layout.group_index(name).ok_or_else(|| {
                IngestError::Schema(crate::schema::SchemaError::NotCategorical(name.to_owned()))
            })?;
            keep[i] = true;
        }
        let present = dataset.profile_index.keys().map(|p| p.restrict(&keep)).collect();
        let layout_groups = layout.groups.iter().map(|g| (g.start, g.len(), g.optional)).collect();
        let names = layout.groups.iter().map(|g| g.feature.clone()).collect();
        Ok(Self { layout_groups, names, keep, present })
    }

    pub fn groups_selected(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn check(&self, query: &[f64]) -> Result<bool, IngestError> {
        if self.groups_selected() == 0 {
            return Ok(true);
        }
        Ok(self.present.contains(&self.query_key(query)?))
    }

    fn query_key(&self, query: &[f64]) -> Result<CategoricalProfile, IngestError> {
        let mut slots = Vec::with_capacity(self.keep.len());
        for (i, &keep) in self.keep.iter().enumerate() {
            if !keep {
                slots.push(LevelSlot::Any);
                continue;
            }
            let (start, len, optional) = self.layout_groups[i];
            let slot = pure_slot(optional, &query[start..start + len])
                .ok_or_else(|| IngestError::NonPureProfile(self.names[i].clone()))?;
            slots.push(slot);
        }
        Ok(CategoricalProfile::new(slots))
    }
}
