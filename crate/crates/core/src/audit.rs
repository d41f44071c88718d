//! The full audit: load, project every test row, analyze directions, and
//! assemble records and the summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::directions::{
    build_directions, spectrum, ClusterConfig, DirectionsError, DirectionsMatrix, SpectrumConfig, SpectrumReport,
};
use crate::discrete::{DiscreteMethod, PathIndex, DEFAULT_SCHEDULE};
use crate::ingest::{load_dataset, read_raw_rows, EncodedDataset, IngestError, IngestStats, LoadOptions, Role};
use crate::report::{
    build_record, summarize, write_csv, write_json, write_jsonl, AuditSummary, DirectionsDigest, SampleRecord,
    SampleStatus, DEFAULT_BINS, EPS_REL,
};
use crate::schema::{build_layout, DomainSpec, RawRow, FeatureKind, FeatureSchema, GroupMode, MissingPolicy, ScalerKind, SchemaError, SchemaFile};
use crate::solver::{batch_project, BatchConfig, BatchOutcome, SolveError, SolverConfig};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Directions(#[from] DirectionsError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl AuditError {
    /// Process exit code: 2 infeasible domain, 3 configuration or schema,
    /// 4 parse, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::Solve(SolveError::InfeasibleDomain) => 2,
            AuditError::Schema(_) | AuditError::Config(_) => 3,
            AuditError::Solve(SolveError::InvalidConfig(_)) => 3,
            AuditError::Solve(SolveError::Ingest(e)) | AuditError::Ingest(e) => match e {
                IngestError::Parse { .. } | IngestError::NonPureProfile(_) | IngestError::Cache(_) => 4,
                IngestError::Io { .. } => 1,
                _ => 3,
            },
            AuditError::Directions(DirectionsError::InvalidConfig(_) | DirectionsError::UnknownColumn(_)) => 3,
            AuditError::Parse(_) => 4,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "infeasible_domain",
            3 => "config_error",
            4 => "parse_error",
            _ => "error",
        }
    }
}

/// Missing-value policy applied to every categorical feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingOverride {
    Drop,
    AsLevel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub scaler: ScalerKind,
    pub solver: SolverConfig,
    pub method: DiscreteMethod,
    pub threads: Option<usize>,
    pub redact: bool,
    pub seed: u64,
    /// Support entries kept per record.
    pub support_top_k: usize,
    pub round_integers: bool,
    /// Mode applied to every categorical group before `group_modes`.
    pub default_mode: Option<GroupMode>,
    pub group_modes: BTreeMap<String, GroupMode>,
    pub path_groups: Option<Vec<String>>,
    pub missing: Option<MissingOverride>,
    /// Audit a seeded random subsample of this many test rows.
    pub test_sample: Option<usize>,
    pub directions: bool,
    pub energy_threshold: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub normalize_clusters: bool,
    pub drop_columns: Vec<String>,
    pub redundant_k: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            scaler: ScalerKind::ZScore,
            solver: SolverConfig::default(),
            method: DiscreteMethod::Exact,
            threads: None,
            redact: false,
            seed: 42,
            support_top_k: 5,
            round_integers: false,
            default_mode: None,
            group_modes: BTreeMap::new(),
            path_groups: None,
            missing: None,
            test_sample: None,
            directions: true,
            energy_threshold: 0.95,
            k_min: 2,
            k_max: 8,
            normalize_clusters: true,
            drop_columns: Vec::new(),
            redundant_k: 5,
        }
    }
}

impl AuditConfig {
    /// Domain of the schema file with this config's overrides applied.
    pub fn domain(&self, file: &SchemaFile) -> Result<DomainSpec, SchemaError> {
        let mut domain = match self.default_mode {
            Some(mode) => {
                let mut d = DomainSpec::uniform(&file.schema, mode);
                d.path_groups = file.domain.path_groups.clone();
                d.enforce_bounds = file.domain.enforce_bounds.clone();
                d
            }
            None => file.domain.clone(),
        };
        for (g, m) in &self.group_modes {
            domain.modes.insert(g.clone(), *m);
        }
        if let Some(p) = &self.path_groups {
            domain.path_groups = p.clone();
        }
        domain.validate(&file.schema)?;
        Ok(domain)
    }

    /// Schema with the missing-value override applied.
    pub fn schema(&self, schema: &FeatureSchema) -> FeatureSchema {
        let mut out = schema.clone();
        if let Some(ov) = &self.missing {
            for f in &mut out.features {
                if let FeatureKind::Categorical { .. } = f.kind {
                    f.missing_policy = match ov {
                        MissingOverride::Drop => MissingPolicy::DropRow,
                        MissingOverride::AsLevel(l) => MissingPolicy::AsLevel(l.clone()),
                    };
                }
            }
        }
        out
    }

    pub fn spectrum_config(&self) -> SpectrumConfig {
        SpectrumConfig {
            energy_threshold: self.energy_threshold,
            drop_columns: self.drop_columns.clone(),
            redundant_k: self.redundant_k,
            clustering: Some(ClusterConfig {
                k_min: self.k_min,
                k_max: self.k_max,
                seed: self.seed,
                normalize: self.normalize_clusters,
                ..ClusterConfig::default()
            }),
            ..SpectrumConfig::default()
        }
    }

    pub fn batch_config(&self) -> BatchConfig {
        BatchConfig {
            solver: self.solver.clone(),
            method: self.method,
            threads: self.threads,
            round_integers: self.round_integers,
        }
    }
}

/// Everything an audit produces.
#[derive(Debug, Clone)]
pub struct AuditOutput {
    pub records: Vec<SampleRecord>,
    pub summary: AuditSummary,
    pub spectrum: Option<SpectrumReport>,
    pub directions: Option<DirectionsMatrix>,
    pub batch: BatchOutcome,
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    pub domain: DomainSpec,
}

/// Loads training and test data per the schema file and the config.
pub fn load_pair(
    file: &SchemaFile,
    train_path: &Path,
    test_path: &Path,
    config: &AuditConfig,
) -> Result<(EncodedDataset, EncodedDataset, BTreeMap<String, IngestStats>), AuditError> {
    let schema = config.schema(&file.schema);
    let domain = config.domain(file)?;
    let opts = LoadOptions { csv: file.csv.clone(), scaler: config.scaler, enforce_bounds: domain.enforce_bounds.clone() };
    let (train, train_stats) = load_dataset(&schema, None, train_path, Role::Train, &opts)?;
    let (test, test_stats) = load_dataset(&schema, Some(train.layout.clone()), test_path, Role::Test, &opts)?;
    let stats = BTreeMap::from([("train".to_owned(), train_stats), ("test".to_owned(), test_stats)]);
    Ok((train, test, stats))
}

/// Splits a single file into training and test rows: a seeded shuffle puts
/// `test_fraction` of the kept rows in the test set. The layout is fitted on
/// the training part only.
pub fn load_holdout(
    file: &SchemaFile,
    path: &Path,
    test_fraction: f64,
    config: &AuditConfig,
) -> Result<(EncodedDataset, EncodedDataset, BTreeMap<String, IngestStats>), AuditError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(AuditError::Config(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    let schema = config.schema(&file.schema);
    let domain = config.domain(file)?;
    let opts = LoadOptions { csv: file.csv.clone(), scaler: config.scaler, enforce_bounds: domain.enforce_bounds.clone() };
    let reader = std::fs::File::open(path).map_err(|source| AuditError::Io { path: path.to_owned(), source })?;
    let table = read_raw_rows(&schema, std::io::BufReader::new(reader), Role::Train, &opts)?;
    let mut idx: Vec<usize> = (0..table.rows.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let n_test = ((table.rows.len() as f64) * test_fraction).round() as usize;
    let (test_idx, train_idx) = idx.split_at(n_test);
    let (mut train_idx, mut test_idx) = (train_idx.to_vec(), test_idx.to_vec());
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |ix: &[usize]| -> (Vec<RawRow>, Vec<usize>) {
        (ix.iter().map(|&i| table.rows[i].clone()).collect(), ix.iter().map(|&i| table.row_ids[i]).collect())
    };
    let (train_rows, train_ids) = pick(&train_idx);
    let (test_rows, test_ids) = pick(&test_idx);
    let layout = Arc::new(build_layout(&schema, config.scaler, &train_rows)?);
    let train = EncodedDataset::from_raw_rows(layout.clone(), &train_rows, train_ids)?;
    let test = EncodedDataset::from_raw_rows(layout, &test_rows, test_ids)?;
    let mut stats = BTreeMap::from([("source".to_owned(), table.stats)]);
    for (name, ds) in [("train", &train), ("test", &test)] {
        let src = &stats["source"];
        let s = IngestStats {
            rows_read: ds.len(),
            rows_kept: ds.len(),
            na_token: src.na_token.clone(),
            missing_policy: src.missing_policy.clone(),
            special_codes: src.special_codes.clone(),
            special_codes_as_missing: src.special_codes_as_missing,
            ..IngestStats::default()
        };
        stats.insert(name.to_owned(), s);
    }
    Ok((train, test, stats))
}

/// Seeded subsample of `n` test rows, in original order.
pub fn sample_rows(test: &EncodedDataset, n: usize, seed: u64) -> Result<EncodedDataset, IngestError> {
    if n >= test.len() {
        return Ok(test.clone());
    }
    let mut idx: Vec<usize> = (0..test.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(n);
    idx.sort_unstable();
    test.subset(&idx)
}

/// Reads the files and runs the audit.
pub fn run_audit(
    file: &SchemaFile,
    train_path: &Path,
    test_path: &Path,
    config: &AuditConfig,
) -> Result<AuditOutput, AuditError> {
    let (train, test, stats) = load_pair(file, train_path, test_path, config)?;
    let domain = config.domain(file)?;
    audit_datasets(train, test, domain, config, stats)
}

/// Runs the audit on encoded datasets.
pub fn audit_datasets(
    train: EncodedDataset,
    test: EncodedDataset,
    domain: DomainSpec,
    config: &AuditConfig,
    ingest: BTreeMap<String, IngestStats>,
) -> Result<AuditOutput, AuditError> {
    if Arc::as_ptr(&train.layout) != Arc::as_ptr(&test.layout) && train.layout != test.layout {
        return Err(IngestError::LayoutRequired.into());
    }
    domain.validate(&train.layout.schema)?;
    let test = match config.test_sample {
        Some(n) => sample_rows(&test, n, config.seed)?,
        None => test,
    };
    let batch = batch_project(&train, &test, &domain, &config.batch_config())?;
    let records: Vec<SampleRecord> = batch
        .rows
        .iter()
        .map(|o| build_record(o, &train, &test, config.support_top_k, config.redact))
        .collect();

    let (directions, spectrum_report) = if config.directions {
        let with_path = batch.rows.iter().zip(&records).filter(|(_, r)| r.status == SampleStatus::OutsidePath);
        let results = with_path.filter_map(|(o, _)| o.result.as_ref().map(|r| (o.index, r)));
        match build_directions(&test, results) {
            Ok(dirs) => {
                let report = spectrum(&dirs, &config.spectrum_config())?;
                (Some(dirs), Some(report))
            }
            Err(DirectionsError::NoOutsideSamples) => (None, None),
            Err(e) => return Err(e.into()),
        }
    } else {
        (None, None)
    };
    let digest = spectrum_report.as_ref().map(|s| DirectionsDigest {
        rows: s.rows,
        rank: s.rank,
        full_rank: s.full_rank,
        condition_number: s.condition_number,
        dominant_patterns: s.dominant_patterns,
        clusters: s.clusters.as_ref().map(|c| c.k),
        top_redundant: s.redundant.iter().take(2).map(|r| r.label.clone()).collect(),
    });
    let summary = summarize(&records, config_echo(config, &domain, &train), ingest, digest);
    Ok(AuditOutput { records, summary, spectrum: spectrum_report, directions, batch, train, test, domain })
}

/// Every setting that affects the numbers, as JSON.
pub fn config_echo(config: &AuditConfig, domain: &DomainSpec, train: &EncodedDataset) -> serde_json::Value {
    let threads = config.threads.unwrap_or_else(rayon::current_num_threads);
    let missing: BTreeMap<&str, String> = train
        .layout
        .schema
        .features
        .iter()
        .map(|f| (f.name.as_str(), f.missing_policy.to_string()))
        .collect();
    serde_json::json!({
        "scaler": config.scaler.to_string(),
        "solver": config.solver,
        "method": config.method.to_string(),
        "homotopy_schedule": DEFAULT_SCHEDULE,
        "threads": threads,
        "seed": config.seed,
        "redact": config.redact,
        "support_top_k": config.support_top_k,
        "round_integers": config.round_integers,
        "test_sample": config.test_sample,
        "domain": domain,
        "missing_policy": missing,
        "relative_change_eps": EPS_REL,
        "histogram_bins": DEFAULT_BINS,
        "directions": config.directions,
        "spectrum": config.spectrum_config(),
        "training_rows": train.len(),
        "encoded_width": train.width(),
    })
}

impl AuditOutput {
    /// Writes `records.jsonl`, `summary.json`, `directions.json` and, with
    /// `csv`, `records.csv` into `dir`.
    pub fn write(&self, dir: &Path, csv: bool) -> Result<(), AuditError> {
        let io = |path: PathBuf| move |source| AuditError::Io { path: path.clone(), source };
        std::fs::create_dir_all(dir).map_err(io(dir.to_owned()))?;
        let p = dir.join("records.jsonl");
        write_jsonl(&self.records, &p).map_err(io(p.clone()))?;
        let p = dir.join("summary.json");
        write_json(&self.summary, &p).map_err(io(p.clone()))?;
        let p = dir.join("directions.json");
        let body = match &self.spectrum {
            Some(s) => serde_json::json!({ "schema_version": crate::report::SCHEMA_VERSION, "status": "ok", "spectrum": s }),
            None => serde_json::json!({ "schema_version": crate::report::SCHEMA_VERSION, "status": "no_outside_samples" }),
        };
        write_json(&body, &p).map_err(io(p.clone()))?;
        if csv {
            let p = dir.join("records.csv");
            write_csv(&self.records, &p).map_err(|e| AuditError::Io {
                path: p.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCheckReport {
    pub schema_version: String,
    pub groups: Vec<String>,
    pub total: usize,
    pub with_path: usize,
    pub fraction_with_path: f64,
    pub fraction_without_path: f64,
    /// `(row_id, has_path)` per test row.
    pub rows: Vec<(usize, bool)>,
}

/// Scaling-independent path check of every test row.
pub fn path_check<S: AsRef<str>>(
    train: &EncodedDataset,
    test: &EncodedDataset,
    groups: &[S],
) -> Result<PathCheckReport, IngestError> {
    let index = PathIndex::new(train, groups)?;
    let mut rows = Vec::with_capacity(test.len());
    for i in 0..test.len() {
        rows.push((test.row_ids[i], index.check(test.point(i))?));
    }
    let with_path = rows.iter().filter(|r| r.1).count();
    let total = rows.len();
    let fraction_with_path = if total == 0 { 1.0 } else { with_path as f64 / total as f64 };
    Ok(PathCheckReport {
        schema_version: crate::report::SCHEMA_VERSION.to_owned(),
        groups: groups.iter().map(|g| g.as_ref().to_owned()).collect(),
        total,
        with_path,
        fraction_with_path,
        fraction_without_path: 1.0 - fraction_with_path,
        rows,
    })
}
