//! Audits the bundled fixture with redaction on: records and explanations
//! keep per-feature deltas but never name training rows.
//!
//! ```text
//! cargo run --example redacted_report -- [out-dir]
//! ```

use std::path::PathBuf;

use hullaudit::audit::{run_audit, AuditConfig};
use hullaudit::report::{explain_sample, SampleStatus};
use hullaudit::schema::SchemaFile;

fn main() {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hullaudit-redacted"));
    let file = SchemaFile::load(&fixture.join("schema.toml")).unwrap();
    let config = AuditConfig { redact: true, ..AuditConfig::default() };
    let audit = run_audit(&file, &fixture.join("train.csv"), &fixture.join("test.csv"), &config).unwrap();
    audit.write(&out_dir, true).unwrap();

    for r in audit.records.iter().filter(|r| r.status != SampleStatus::Inside).take(2) {
        print!("{}", explain_sample(r, config.redact));
        println!();
    }
    let text = std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap();
    println!("records.jsonl mentions training rows: {}", text.contains("train_row"));
    println!("outputs written to {}", out_dir.display());
}
