//! Command-line driver: `audit`, `project`, `directions` and `path-check`.
//!
//! Settings resolve as flags > `HULLAUDIT_THREADS` > `--config` file >
//! defaults. Failures print one JSON object on stderr and exit with 2
//! (infeasible domain), 3 (configuration or schema), 4 (parse) or 1.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::audit::{load_pair, path_check, run_audit, AuditConfig, AuditError, MissingOverride};
use crate::directions::{spectrum, DirectionsMatrix};
use crate::discrete::{project_with_discrete, DiscreteMethod, PathIndex};
use crate::ingest::{load_dataset, LoadOptions, Role};
use crate::presets;
use crate::report::{build_record, directions_from_records, explain_sample, read_jsonl, SCHEMA_VERSION};
use crate::schema::{FeatureSchema, GroupMode, MissingPolicy, RawValue, ScalerKind, SchemaError, SchemaFile};
use crate::solver::{project_continuous, Algorithm, ProjectionProblem, RowOutcome, SolveError};

pub const THREADS_ENV: &str = "HULLAUDIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hullaudit", version, about = "Interpolation/extrapolation audits against the training convex hull")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project every test row and write records.jsonl, summary.json and directions.json.
    Audit(AuditArgs),
    /// Project a single query and explain the result.
    Project(ProjectArgs),
    /// Spectrum and clusters of the directions stored in a records file.
    Directions(DirectionsArgs),
    /// Which test rows share their levels on the given groups with some training row.
    PathCheck(PathCheckArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Schema file (TOML), or `preset:<name>` for a bundled one.
    #[arg(long)]
    pub schema: String,
    /// Training CSV.
    #[arg(long)]
    pub train: PathBuf,
    /// TOML file with audit settings (overridden by flags and environment).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Group mode override, `group=mode` or `default=mode`; modes: fixed, discrete, discrete_optional, relaxed.
    #[arg(long = "domain-mode", value_name = "GROUP=MODE")]
    pub domain_mode: Vec<String>,
    /// Comma-separated groups that define a continuous path.
    #[arg(long = "path-groups", value_delimiter = ',')]
    pub path_groups: Option<Vec<String>>,
    #[arg(long)]
    pub method: Option<DiscreteMethod>,
    #[arg(long)]
    pub scaler: Option<ScalerKind>,
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    /// Scaled-space distance under which a query counts as inside.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Omit training row ids and weights from every output.
    #[arg(long)]
    pub redact: bool,
    /// Missing categorical values: `drop` or `as-level:<name>`.
    #[arg(long)]
    pub missing: Option<String>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "audit-out")]
    pub out: PathBuf,
    /// Audit a seeded random subsample of this many test rows.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Also write records.csv.
    #[arg(long)]
    pub csv: bool,
    /// Skip the directions analysis.
    #[arg(long)]
    pub no_directions: bool,
    /// Columns dropped before recomputing the directions condition number.
    #[arg(long = "drop-column")]
    pub drop_column: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub common: Common,
    /// JSON object keyed by feature, JSON array or CSV row in schema order.
    #[arg(long)]
    pub query: String,
    /// Print the record as JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DirectionsArgs {
    #[arg(long)]
    pub schema: String,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub records: PathBuf,
    /// Range of cluster counts, `min..max` or `min-max`.
    #[arg(long = "k-range", default_value = "2..8")]
    pub k_range: String,
    #[arg(long, default_value_t = 0.95)]
    pub energy: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub scaler: Option<ScalerKind>,
    /// Cluster raw direction vectors instead of unit directions.
    #[arg(long)]
    pub magnitude: bool,
    #[arg(long = "drop-column")]
    pub drop_column: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PathCheckArgs {
    #[arg(long)]
    pub schema: String,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated categorical groups; empty means every row has a path.
    #[arg(long, value_delimiter = ',', default_value = "")]
    pub groups: Vec<String>,
    #[arg(long)]
    pub missing: Option<String>,
    /// Print only the fraction summary, not every row.
    #[arg(long)]
    pub summary_only: bool,
}

/// Parses arguments, runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            emit_error("config_error", &e.to_string(), 3);
            return 3;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            emit_error(e.kind(), &e.to_string(), code);
            code
        }
    }
}

fn emit_error(kind: &str, message: &str, code: i32) {
    let body = serde_json::json!({ "error": kind, "message": message.trim(), "exit_code": code });
    let _ = writeln!(std::io::stderr(), "{body}");
}

pub fn run(cli: Cli) -> Result<(), AuditError> {
    match cli.command {
        Command::Audit(a) => cmd_audit(a),
        Command::Project(a) => cmd_project(a),
        Command::Directions(a) => cmd_directions(a),
        Command::PathCheck(a) => cmd_path_check(a),
    }
}

/// Schema path or `preset:<name>`.
pub fn load_schema(spec: &str) -> Result<SchemaFile, SchemaError> {
    match spec.strip_prefix("preset:") {
        Some(name) => presets::preset(name),
        None => SchemaFile::load(Path::new(spec)),
    }
}

fn parse_missing(s: &str) -> Result<MissingOverride, AuditError> {
    match s {
        "drop" => Ok(MissingOverride::Drop),
        _ => match s.strip_prefix("as-level:").or_else(|| s.strip_prefix("as_level:")) {
            Some(l) if !l.is_empty() => Ok(MissingOverride::AsLevel(l.to_owned())),
            _ => Err(AuditError::Config(format!("--missing expects `drop` or `as-level:<name>`, got `{s}`"))),
        },
    }
}

/// Effective config: defaults, then the config file, then the environment,
/// then flags.
pub fn resolve_config(common: &Common) -> Result<AuditConfig, AuditError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| AuditError::Config(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| AuditError::Config(format!("{}: {e}", path.display())))?
        }
        None => AuditConfig::default(),
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| AuditError::Config(format!("{THREADS_ENV}={v} is not a count")))?;
        config.threads = Some(n);
    }
    if let Some(t) = common.threads {
        config.threads = Some(t);
    }
    if let Some(m) = common.method {
        config.method = m;
    }
    if let Some(s) = common.scaler {
        config.scaler = s;
    }
    if let Some(a) = common.algorithm {
        config.solver.algorithm = a;
    }
    if let Some(e) = common.eps {
        config.solver.membership_eps = e;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    config.redact |= common.redact;
    if let Some(m) = &common.missing {
        config.missing = Some(parse_missing(m)?);
    }
    if let Some(p) = &common.path_groups {
        config.path_groups = Some(p.iter().filter(|g| !g.is_empty()).cloned().collect());
    }
    for item in &common.domain_mode {
        let (group, mode) = item
            .split_once('=')
            .ok_or_else(|| AuditError::Config(format!("--domain-mode expects GROUP=MODE, got `{item}`")))?;
        let mode: GroupMode = mode.parse().map_err(AuditError::Config)?;
        if group == "default" || group == "*" {
            config.default_mode = Some(mode);
        } else {
            config.group_modes.insert(group.to_owned(), mode);
        }
    }
    config.solver.validate()?;
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), AuditError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| AuditError::Parse(e.to_string()))?;
    print_text(&(text + "\n"))
}

fn print_text(text: &str) -> Result<(), AuditError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(AuditError::Io { path: PathBuf::from("<stdout>"), source: e })
        }
        _ => Ok(()),
    }
}

fn cmd_audit(a: AuditArgs) -> Result<(), AuditError> {
    let file = load_schema(&a.common.schema)?;
    let mut config = resolve_config(&a.common)?;
    if a.sample.is_some() {
        config.test_sample = a.sample;
    }
    if a.no_directions {
        config.directions = false;
    }
    if !a.drop_column.is_empty() {
        config.drop_columns = a.drop_column.clone();
    }
    let out = run_audit(&file, &a.common.train, &a.test, &config)?;
    out.write(&a.out, a.csv)?;
    let s = &out.summary;
    print_json(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "out": a.out,
        "total": s.total,
        "fractions": s.fractions,
        "failures": s.failures,
        "config": s.config,
    }))
}

/// Parses a query given as JSON object, JSON array or CSV row. Cells are
/// typed by the schema; missing categorical cells take the feature's
/// `as_level` substitute when it has one.
pub fn parse_query(text: &str, schema: &FeatureSchema, na_token: &str) -> Result<Vec<RawValue>, AuditError> {
    let cell = |v: &serde_json::Value| -> Result<Option<String>, AuditError> {
        Ok(match v {
            serde_json::Value::Null => None,
            serde_json::Value::Number(n) => Some(n.to_string()),
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Bool(b) => Some(b.to_string()),
            other => return Err(AuditError::Parse(format!("unsupported query value {other}"))),
        })
    };
    let trimmed = text.trim();
    let cells: Vec<Option<String>> = if trimmed.starts_with('{') {
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(trimmed).map_err(|e| AuditError::Parse(e.to_string()))?;
        if let Some(k) = obj.keys().find(|k| schema.feature_index(k).is_none()) {
            return Err(AuditError::Config(format!("query names unknown feature `{k}`")));
        }
        schema
            .features
            .iter()
            .map(|f| obj.get(&f.name).map_or(Ok(None), cell))
            .collect::<Result<_, _>>()?
    } else if trimmed.starts_with('[') {
        let arr: Vec<serde_json::Value> = serde_json::from_str(trimmed).map_err(|e| AuditError::Parse(e.to_string()))?;
        arr.iter().map(cell).collect::<Result<_, _>>()?
    } else {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(trimmed.as_bytes());
        let rec = rdr
            .records()
            .next()
            .ok_or_else(|| AuditError::Parse("empty query".into()))?
            .map_err(|e| AuditError::Parse(e.to_string()))?;
        rec.iter().map(|s| Some(s.to_owned())).collect()
    };
    if cells.len() != schema.features.len() {
        return Err(SchemaError::DimensionMismatch { expected: schema.features.len(), got: cells.len() }.into());
    }
    let mut out = Vec::with_capacity(cells.len());
    for (f, c) in schema.features.iter().zip(cells) {
        let c = c.filter(|s| !s.is_empty() && s != na_token);
        out.push(match (c, f.kind.is_categorical()) {
            (None, true) => match &f.missing_policy {
                MissingPolicy::AsLevel(l) => RawValue::Level(l.clone()),
                _ => RawValue::Missing,
            },
            (None, false) => RawValue::Missing,
            (Some(s), true) => RawValue::Level(s),
            (Some(s), false) => RawValue::Number(
                s.trim().parse().map_err(|_| AuditError::Parse(format!("feature `{}`: `{s}` is not a number", f.name)))?,
            ),
        });
    }
    Ok(out)
}

fn cmd_project(a: ProjectArgs) -> Result<(), AuditError> {
    let file = load_schema(&a.common.schema)?;
    let config = resolve_config(&a.common)?;
    let schema = config.schema(&file.schema);
    let domain = config.domain(&file)?;
    let opts = LoadOptions { csv: file.csv.clone(), scaler: config.scaler, enforce_bounds: domain.enforce_bounds.clone() };
    let (train, _) = load_dataset(&schema, None, &a.common.train, Role::Train, &opts)?;
    let raw = parse_query(&a.query, &schema, &file.csv.na_token)?;
    let point = train.layout.encode_row(&raw)?;

    let mut path_groups = domain.path_groups.clone();
    path_groups.extend(domain.fixed_groups().into_iter().map(str::to_owned));
    let has_path = PathIndex::new(&train, &path_groups)?.check(&point)?;
    let (result, trace) = if domain.has_discrete() {
        let (r, t) = project_with_discrete(&point, &train, &domain, &config.solver, config.method)?;
        (r, Some(t))
    } else {
        match project_continuous(&ProjectionProblem::new(&point, &train, &config.solver)) {
            Ok(r) => (r, None),
            Err(SolveError::MaxIterExceeded { best }) => (*best, None),
            Err(e) => return Err(e.into()),
        }
    };
    // A one-row dataset carrying the query, so the record builder can
    // decode it like a test row.
    let query_ds = crate::ingest::EncodedDataset::from_matrix(
        Arc::clone(&train.layout),
        crate::matrix::Matrix::from_rows(&[point.clone()]),
        vec![0],
    )?;
    let outcome = RowOutcome {
        index: 0,
        result: Some(result),
        has_continuous_path: has_path,
        released_fixed: false,
        trace,
        integer_repair: None,
        error: None,
    };
    let record = build_record(&outcome, &train, &query_ds, config.support_top_k, config.redact);
    if a.json {
        print_json(&record)
    } else {
        print_text(&explain_sample(&record, config.redact))
    }
}

fn parse_k_range(s: &str) -> Result<(usize, usize), AuditError> {
    let bad = || AuditError::Config(format!("--k-range expects `min..max`, got `{s}`"));
    let (a, b) = s.split_once("..").or_else(|| s.split_once('-')).ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
    if a < 2 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn cmd_directions(a: DirectionsArgs) -> Result<(), AuditError> {
    let file = load_schema(&a.schema)?;
    let mut config = AuditConfig::default();
    if let Some(s) = a.scaler {
        config.scaler = s;
    }
    let (k_min, k_max) = parse_k_range(&a.k_range)?;
    config.k_min = k_min;
    config.k_max = k_max;
    config.energy_threshold = a.energy;
    config.seed = a.seed;
    config.normalize_clusters = !a.magnitude;
    config.drop_columns = a.drop_column.clone();
    let opts = LoadOptions { csv: file.csv.clone(), scaler: config.scaler, enforce_bounds: config.domain(&file)?.enforce_bounds };
    let (train, _) = load_dataset(&file.schema, None, &a.train, Role::Train, &opts)?;
    let records = read_jsonl(&a.records).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => AuditError::Parse(format!("{}: {e}", a.records.display())),
        _ => AuditError::Io { path: a.records.clone(), source: e },
    })?;
    let (v, ids) = directions_from_records(&records, &train.layout);
    if ids.is_empty() {
        return print_json(&serde_json::json!({ "schema_version": SCHEMA_VERSION, "status": "no_outside_samples" }));
    }
    let dirs = DirectionsMatrix::from_rows(v, ids, train.layout.column_labels());
    let report = spectrum(&dirs, &config.spectrum_config())?;
    print_json(&serde_json::json!({ "schema_version": SCHEMA_VERSION, "status": "ok", "row_ids": dirs.rows, "spectrum": report }))
}

fn cmd_path_check(a: PathCheckArgs) -> Result<(), AuditError> {
    let file = load_schema(&a.schema)?;
    let mut config = AuditConfig::default();
    if let Some(m) = &a.missing {
        config.missing = Some(parse_missing(m)?);
    }
    let groups: Vec<String> = a.groups.iter().map(|g| g.trim().to_owned()).filter(|g| !g.is_empty()).collect();
    let (train, test, stats) = load_pair(&file, &a.train, &a.test, &config)?;
    let report = path_check(&train, &test, &groups)?;
    let mut report = report;
    if a.summary_only {
        report.rows.clear();
    }
    print_json(&serde_json::json!({ "report": report, "ingest": stats }))
}
