//! CSV loading, missing-value handling and the encoded training/test matrices.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::profile::{CategoricalProfile, LevelSlot};
use crate::schema::{
    build_layout, CsvOptions, EncodingLayout, FeatureKind, FeatureSchema, MissingPolicy, RawRow,
    RawValue, ScalerKind, SchemaError,
};

/// Magic bytes opening a cached matrix blob.
pub const CACHE_MAGIC: &[u8; 5] = b"HAUD1";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("column `{0}` required by the schema is missing from the file")]
    SchemaMismatch(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("a test set must be encoded with the training layout")]
    LayoutRequired,
    #[error("point has fractional categorical mass in group `{0}`")]
    NonPureProfile(String),
    #[error("invalid cache file: {0}")]
    Cache(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Test,
}

/// Everything that controls how a file becomes a matrix.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub csv: CsvOptions,
    pub scaler: ScalerKind,
    /// Numeric features whose declared bounds are enforced. Training rows
    /// outside the bounds are dropped; test rows are kept and counted.
    pub enforce_bounds: BTreeMap<String, bool>,
}

/// Row accounting for one load.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped_missing: usize,
    pub rows_dropped_unknown_level: usize,
    pub rows_out_of_bounds: usize,
    pub rows_dropped_out_of_bounds: usize,
    pub na_token: String,
    /// Effective missing-value policy per feature.
    pub missing_policy: BTreeMap<String, String>,
    pub special_codes: Vec<f64>,
    pub special_codes_as_missing: bool,
}

/// Encoded rows plus the layout and categorical profile index.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    pub matrix: Matrix,
    /// Original data-record index of each row (0-based, header excluded).
    pub row_ids: Vec<usize>,
    pub layout: Arc<EncodingLayout>,
    pub profiles: Vec<CategoricalProfile>,
    pub profile_index: BTreeMap<CategoricalProfile, Vec<usize>>,
}

impl EncodedDataset {
    /// Encodes raw rows that already passed the missing-value policy.
    pub fn from_raw_rows(
        layout: Arc<EncodingLayout>,
        rows: &[RawRow],
        row_ids: Vec<usize>,
    ) -> Result<Self, IngestError> {
        assert_eq!(rows.len(), row_ids.len());
        let d = layout.width();
        let mut matrix = Matrix::zeros(rows.len(), d);
        for (i, row) in rows.iter().enumerate() {
            layout.encode_into(row, matrix.row_mut(i))?;
        }
        Self::from_matrix(layout, matrix, row_ids)
    }

    pub fn from_matrix(layout: Arc<EncodingLayout>, matrix: Matrix, row_ids: Vec<usize>) -> Result<Self, IngestError> {
        if matrix.ncols() != layout.width() {
            return Err(SchemaError::DimensionMismatch { expected: layout.width(), got: matrix.ncols() }.into());
        }
        let mut profiles = Vec::with_capacity(matrix.nrows());
        let mut profile_index: BTreeMap<CategoricalProfile, Vec<usize>> = BTreeMap::new();
        for i in 0..matrix.nrows() {
            let p = profile_of(&layout, matrix.row(i))?;
            profile_index.entry(p.clone()).or_default().push(i);
            profiles.push(p);
        }
        Ok(Self { matrix, row_ids, layout, profiles, profile_index })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    /// Subset of rows, keeping ids and layout.
    pub fn subset(&self, idx: &[usize]) -> Result<Self, IngestError> {
        let matrix = self.matrix.select_rows(idx);
        let ids = idx.iter().map(|&i| self.row_ids[i]).collect();
        Self::from_matrix(self.layout.clone(), matrix, ids)
    }

    /// Writes the matrix blob (`HAUD1`, n and d as u64 LE, row-major f64 LE)
    /// and a JSON sidecar holding the layout and row ids.
    pub fn write_cache(&self, path: &Path) -> Result<(), IngestError> {
        let io = |source| IngestError::Io { path: path.to_owned(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(CACHE_MAGIC).map_err(io)?;
        w.write_all(&(self.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.width() as u64).to_le_bytes()).map_err(io)?;
        for v in self.matrix.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)?;

        let sidecar = sidecar_path(path);
        let doc = CacheSidecar {
            schema_version: "1".into(),
            layout: (*self.layout).clone(),
            row_ids: self.row_ids.clone(),
        };
        let text = serde_json::to_string_pretty(&doc).map_err(|e| IngestError::Cache(e.to_string()))?;
        std::fs::write(&sidecar, text).map_err(|source| IngestError::Io { path: sidecar, source })
    }

    pub fn read_cache(path: &Path) -> Result<Self, IngestError> {
        let io = |source| IngestError::Io { path: path.to_owned(), source };
        let mut r = BufReader::new(File::open(path).map_err(io)?);
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CACHE_MAGIC {
            return Err(IngestError::Cache("bad magic bytes".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(io)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word).map_err(io)?;
        let d = u64::from_le_bytes(word) as usize;
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            r.read_exact(&mut word).map_err(|_| IngestError::Cache("truncated matrix".into()))?;
            data.push(f64::from_le_bytes(word));
        }
        if r.read(&mut word).map_err(io)? != 0 {
            return Err(IngestError::Cache("trailing bytes after matrix".into()));
        }
        let sidecar = sidecar_path(path);
        let text = std::fs::read_to_string(&sidecar).map_err(|source| IngestError::Io { path: sidecar, source })?;
        let doc: CacheSidecar = serde_json::from_str(&text).map_err(|e| IngestError::Cache(e.to_string()))?;
        if doc.row_ids.len() != n {
            return Err(IngestError::Cache("row id count does not match matrix".into()));
        }
        Self::from_matrix(Arc::new(doc.layout), Matrix::from_vec(n, d, data), doc.row_ids)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheSidecar {
    schema_version: String,
    layout: EncodingLayout,
    row_ids: Vec<usize>,
}

/// `data.bin` -> `data.bin.layout.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".layout.json");
    PathBuf::from(s)
}

/// Categorical profile of an encoded point; fails unless every block is a
/// pure one-hot vector (or empty, for optional groups).
pub fn profile_of(layout: &EncodingLayout, point: &[f64]) -> Result<CategoricalProfile, IngestError> {
    if point.len() != layout.width() {
        return Err(SchemaError::DimensionMismatch { expected: layout.width(), got: point.len() }.into());
    }
    let mut slots = Vec::with_capacity(layout.groups.len());
    for g in &layout.groups {
        let block = &point[g.range()];
        let mut hot = None;
        for (i, &v) in block.iter().enumerate() {
            if v == 1.0 {
                if hot.is_some() {
                    return Err(IngestError::NonPureProfile(g.feature.clone()));
                }
                hot = Some(i);
            } else if v != 0.0 {
                return Err(IngestError::NonPureProfile(g.feature.clone()));
            }
        }
        slots.push(match hot {
            Some(i) => LevelSlot::Level(i as u32),
            None if g.optional => LevelSlot::Empty,
            None => return Err(IngestError::NonPureProfile(g.feature.clone())),
        });
    }
    Ok(CategoricalProfile::new(slots))
}

/// Outcome of reading raw rows before encoding.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub rows: Vec<RawRow>,
    pub row_ids: Vec<usize>,
    pub stats: IngestStats,
}

/// Reads and filters raw rows from CSV text.
pub fn read_raw_rows<R: Read>(
    schema: &FeatureSchema,
    reader: R,
    role: Role,
    opts: &LoadOptions,
) -> Result<RawTable, IngestError> {
    let csv_opts = &opts.csv;
    let mut builder = csv::ReaderBuilder::new();
    builder
        .has_headers(csv_opts.has_header)
        .trim(csv::Trim::All)
        .flexible(false);
    if let Some(c) = csv_opts.comment {
        builder.comment(Some(c as u8));
    }
    let mut rdr = builder.from_reader(reader);

    let header: Vec<String> = if csv_opts.has_header {
        rdr.headers()
            .map_err(|e| csv_error(&e))?
            .iter()
            .map(|s| s.trim().to_owned())
            .collect()
    } else {
        csv_opts
            .column_names
            .clone()
            .ok_or_else(|| IngestError::SchemaMismatch("column_names (file has no header)".into()))?
    };
    let positions: Vec<usize> = schema
        .features
        .iter()
        .map(|f| {
            header
                .iter()
                .position(|h| h == &f.name)
                .ok_or_else(|| IngestError::SchemaMismatch(f.name.clone()))
        })
        .collect::<Result<_, _>>()?;

    let levels: Vec<Option<Vec<String>>> = schema.features.iter().map(|f| f.effective_levels()).collect();
    let mut stats = IngestStats {
        na_token: csv_opts.na_token.clone(),
        special_codes: csv_opts.special_codes.clone(),
        special_codes_as_missing: csv_opts.special_codes_as_missing,
        missing_policy: schema
            .features
            .iter()
            .map(|f| {
                let policy = match (&f.kind, &f.missing_policy) {
                    (FeatureKind::Categorical { optional: true, .. }, MissingPolicy::DropRow) => "empty_group".to_owned(),
                    (_, p) => p.to_string(),
                };
                (f.name.clone(), policy)
            })
            .collect(),
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut row_ids = Vec::new();

    let mut record = csv::StringRecord::new();
    let mut record_index = 0usize;
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(&e)),
        }
        // Blank lines in some distributions parse as a single empty field.
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        let id = record_index;
        record_index += 1;
        stats.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < header.len() {
            return Err(IngestError::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }

        let mut row = Vec::with_capacity(schema.features.len());
        let mut drop_missing = false;
        let mut drop_unknown = false;
        let mut out_of_bounds = false;
        for (fi, feat) in schema.features.iter().enumerate() {
            let mut cell = record.get(positions[fi]).unwrap_or("").trim();
            if csv_opts.strip_trailing_period {
                cell = cell.strip_suffix('.').unwrap_or(cell);
            }
            let is_na = cell.is_empty() || cell == csv_opts.na_token;
            match &feat.kind {
                FeatureKind::Categorical { optional, .. } => {
                    if is_na {
                        match &feat.missing_policy {
                            MissingPolicy::AsLevel(level) => row.push(RawValue::Level(level.clone())),
                            MissingPolicy::DropRow if *optional => row.push(RawValue::Missing),
                            MissingPolicy::DropRow => {
                                drop_missing = true;
                                row.push(RawValue::Missing);
                            }
                        }
                    } else if levels[fi].as_ref().is_some_and(|l| l.iter().any(|x| x == cell)) {
                        row.push(RawValue::Level(cell.to_owned()));
                    } else {
                        drop_unknown = true;
                        row.push(RawValue::Missing);
                    }
                }
                kind => {
                    if is_na {
                        drop_missing = true;
                        row.push(RawValue::Missing);
                        continue;
                    }
                    let v: f64 = cell.parse().map_err(|_| IngestError::Parse {
                        line,
                        message: format!("`{cell}` is not a number (column `{}`)", feat.name),
                    })?;
                    if csv_opts.special_codes_as_missing && csv_opts.special_codes.contains(&v) {
                        drop_missing = true;
                        row.push(RawValue::Missing);
                        continue;
                    }
                    if opts.enforce_bounds.get(&feat.name).copied().unwrap_or(false) {
                        let (lo, hi) = kind.bounds();
                        if lo.is_some_and(|l| v < l) || hi.is_some_and(|h| v > h) {
                            out_of_bounds = true;
                        }
                    }
                    row.push(RawValue::Number(v));
                }
            }
        }
        if drop_missing {
            stats.rows_dropped_missing += 1;
            continue;
        }
        if drop_unknown {
            stats.rows_dropped_unknown_level += 1;
            continue;
        }
        if out_of_bounds {
            stats.rows_out_of_bounds += 1;
            if role == Role::Train {
                stats.rows_dropped_out_of_bounds += 1;
                continue;
            }
        }
        rows.push(row);
        row_ids.push(id);
    }
    stats.rows_kept = rows.len();
    Ok(RawTable { rows, row_ids, stats })
}

fn csv_error(e: &csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Parse { line, message: e.to_string() }
}

/// Loads a CSV file into an encoded dataset. Training loads fit the layout
/// unless one is supplied; test loads require the training layout.
pub fn load_dataset(
    schema: &FeatureSchema,
    layout: Option<Arc<EncodingLayout>>,
    path: &Path,
    role: Role,
    opts: &LoadOptions,
) -> Result<(EncodedDataset, IngestStats), IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
    load_from_reader(schema, layout, BufReader::new(file), role, opts)
}

pub fn load_from_reader<R: Read>(
    schema: &FeatureSchema,
    layout: Option<Arc<EncodingLayout>>,
    reader: R,
    role: Role,
    opts: &LoadOptions,
) -> Result<(EncodedDataset, IngestStats), IngestError> {
    if role == Role::Test && layout.is_none() {
        return Err(IngestError::LayoutRequired);
    }
    let table = read_raw_rows(schema, reader, role, opts)?;
    if table.rows.is_empty() {
        return Err(match role {
            Role::Train => IngestError::EmptyTrainingSet,
            Role::Test => IngestError::EmptyTestSet,
        });
    }
    let layout = match layout {
        Some(l) => l,
        None => Arc::new(build_layout(schema, opts.scaler, &table.rows)?),
    };
    let ds = EncodedDataset::from_raw_rows(layout, &table.rows, table.row_ids)?;
    Ok((ds, table.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureDecl;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureDecl::continuous("age"),
            FeatureDecl::categorical("sex", &["F", "M"]),
            FeatureDecl::categorical("race", &["White", "Black"]),
        ])
        .unwrap()
        .with_target("y")
    }

    fn load(text: &str) -> Result<(EncodedDataset, IngestStats), IngestError> {
        load_from_reader(&schema(), None, text.as_bytes(), Role::Train, &LoadOptions::default())
    }

    #[test]
    fn header_only_file_is_an_empty_training_set() {
        assert!(matches!(load("age,sex,race,y\n"), Err(IngestError::EmptyTrainingSet)));
    }

    #[test]
    fn missing_and_unknown_rows_are_counted_not_fatal() {
        let (ds, stats) = load("age,sex,race,y\n30,F,White,0\n?,M,Black,1\n40,X,White,0\n50,M,?,1\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(stats.rows_read, 4);
        assert_eq!(stats.rows_dropped_missing, 2);
        assert_eq!(stats.rows_dropped_unknown_level, 1);
        assert_eq!(ds.row_ids, vec![0]);
        assert!(matches!(load("age,sex,race,y\n40,X,White,0\n"), Err(IngestError::EmptyTrainingSet)));
    }

    #[test]
    fn missing_column_and_bad_number_are_errors() {
        assert!(matches!(load("age,sex,y\n1,F,0\n"), Err(IngestError::SchemaMismatch(c)) if c == "race"));
        match load("age,sex,race,y\n30,F,White,0\nabc,F,White,0\n") {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn test_role_needs_a_layout() {
        let r = load_from_reader(&schema(), None, "age,sex,race\n1,F,White\n".as_bytes(), Role::Test, &LoadOptions::default());
        assert!(matches!(r, Err(IngestError::LayoutRequired)));
    }

    #[test]
    fn profiles_ignore_numeric_columns() {
        let (ds, _) = load("age,sex,race,y\n30,F,White,0\n70,F,White,1\n30,M,White,0\n").unwrap();
        assert_eq!(ds.profiles[0], ds.profiles[1]);
        assert_ne!(ds.profiles[0], ds.profiles[2]);
        assert_eq!(ds.profiles[0].slots, vec![LevelSlot::Level(0), LevelSlot::Level(0)]);
        assert_eq!(ds.profile_index.len(), 2);
    }

    #[test]
    fn fractional_block_is_not_a_profile() {
        let (ds, _) = load("age,sex,race,y\n30,F,White,0\n").unwrap();
        let err = profile_of(&ds.layout, &[0.0, 0.5, 0.5, 1.0, 0.0]).unwrap_err();
        assert!(matches!(err, IngestError::NonPureProfile(g) if g == "sex"));
    }

    #[test]
    fn special_codes_can_be_treated_as_missing() {
        let schema = FeatureSchema::new(vec![FeatureDecl::continuous("a"), FeatureDecl::continuous("b")]).unwrap();
        let text = "a,b\n1,-8\n2,3\n";
        let mut opts = LoadOptions::default();
        opts.csv.special_codes = vec![-7.0, -8.0, -9.0];
        let (raw, _) = load_from_reader(&schema, None, text.as_bytes(), Role::Train, &opts).unwrap();
        assert_eq!(raw.len(), 2);
        opts.csv.special_codes_as_missing = true;
        let (ds, stats) = load_from_reader(&schema, None, text.as_bytes(), Role::Train, &opts).unwrap();
        assert_eq!(ds.len(), 1);
        assert!(stats.special_codes_as_missing);
    }

    #[test]
    fn enforced_bounds_drop_training_rows_only() {
        let schema = FeatureSchema::new(vec![FeatureDecl::continuous("age").with_bounds(Some(0.0), Some(120.0))]).unwrap();
        let mut opts = LoadOptions::default();
        opts.enforce_bounds.insert("age".into(), true);
        let text = "age\n10\n130\n";
        let (train, stats) = load_from_reader(&schema, None, text.as_bytes(), Role::Train, &opts).unwrap();
        assert_eq!((train.len(), stats.rows_dropped_out_of_bounds), (1, 1));
        let (test, stats) =
            load_from_reader(&schema, Some(train.layout.clone()), text.as_bytes(), Role::Test, &opts).unwrap();
        assert_eq!((test.len(), stats.rows_out_of_bounds, stats.rows_dropped_out_of_bounds), (2, 1, 0));
    }

    #[test]
    fn cache_round_trip_is_bit_identical() {
        let (ds, _) = load("age,sex,race,y\n30.25,F,White,0\n70,M,Black,1\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.bin");
        ds.write_cache(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"HAUD1");
        assert_eq!(u64::from_le_bytes(bytes[5..13].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[13..21].try_into().unwrap()), 5);
        assert_eq!(bytes.len(), 21 + 2 * 5 * 8);
        let back = EncodedDataset::read_cache(&path).unwrap();
        assert_eq!(back.matrix, ds.matrix);
        assert_eq!(back.row_ids, ds.row_ids);
        assert_eq!(*back.layout, *ds.layout);
        std::fs::write(&path, b"HAUD0").unwrap();
        assert!(matches!(EncodedDataset::read_cache(&path), Err(IngestError::Cache(_))));
    }
}
