//! Which test rows share their levels on a set of categorical groups with at
//! least one training row. Rows without such a match cannot reach the hull
//! by moving numeric features alone.
//!
//! ```text
//! cargo run --example path_check -- [schema.toml train.csv test.csv group...]
//! ```

use std::path::PathBuf;

use hullaudit::audit::{load_pair, path_check, AuditConfig};
use hullaudit::schema::SchemaFile;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let (schema, train, test, groups) = if args.len() >= 3 {
        (PathBuf::from(&args[0]), PathBuf::from(&args[1]), PathBuf::from(&args[2]), args[3..].to_vec())
    } else {
        (fixture.join("schema.toml"), fixture.join("train.csv"), fixture.join("test.csv"), vec!["color".to_owned()])
    };
    let file = SchemaFile::load(&schema).unwrap();
    let (train, test, _) = load_pair(&file, &train, &test, &AuditConfig::default()).unwrap();
    let report = path_check(&train, &test, &groups).unwrap();
    println!(
        "groups {:?}: {} of {} test rows have a path ({:.1}% without)",
        report.groups,
        report.with_path,
        report.total,
        100.0 * report.fraction_without_path
    );
    for (row, _) in report.rows.iter().filter(|r| !r.1).take(10) {
        println!("  row {row}: no training row shares its levels");
    }
}
