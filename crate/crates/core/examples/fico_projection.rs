//! FICO HELOC: audits a seeded 80/20 split of `heloc_dataset_v1.csv` and
//! explains the projection of the trader below, a typical outside query.
//!
//! The file is not bundled; place it at
//! `$HULLAUDIT_DATA_DIR/fico/heloc_dataset_v1.csv` (default `data/fico/`).
//!
//! ```text
//! cargo run --release --example fico_projection
//! ```

use std::path::PathBuf;

use hullaudit::audit::{audit_datasets, load_holdout, AuditConfig};
use hullaudit::prelude::*;
use hullaudit::report::{build_record, explain_sample};
use hullaudit::solver::RowOutcome;

const TRADER: [f64; 23] =
    [63., 54., 25., 40., 2., 0., 0., 50., 22., 6., 6., 2., 0., 100., -7., 4., 4., -8., -8., -8., 1., -8., 100.];

fn main() {
    let path = std::env::var_os("HULLAUDIT_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| "data".into())
        .join("fico/heloc_dataset_v1.csv");
    if !path.exists() {
        eprintln!("{} not found; see the example header for where to get it", path.display());
        return;
    }
    let file = hullaudit::presets::preset("fico").unwrap();
    let config = AuditConfig { directions: false, ..AuditConfig::default() };
    let (train, test, stats) = load_holdout(&file, &path, 0.2, &config).unwrap();
    let domain = config.domain(&file).unwrap();

    let query = train.layout.encode_row(&TRADER.map(RawValue::Number)).unwrap();
    let result = project_continuous(&ProjectionProblem::new(&query, &train, &config.solver)).unwrap();
    let probe = EncodedDataset::from_matrix(train.layout.clone(), Matrix::from_rows(&[query]), vec![0]).unwrap();
    let outcome = RowOutcome {
        index: 0,
        result: Some(result),
        has_continuous_path: true,
        released_fixed: false,
        trace: None,
        integer_repair: None,
        error: None,
    };
    print!("{}", explain_sample(&build_record(&outcome, &train, &probe, 5, false), false));

    let audit = audit_datasets(train, test, domain, &config, stats).unwrap();
    let s = &audit.summary;
    println!("test rows {}: {:.1}% outside, {} uncertified", s.total, 100.0 * s.fractions.outside(), s.uncertified);
}
