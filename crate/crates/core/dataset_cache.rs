//! Encodes a CSV once, stores the matrix in the binary cache format with its
//! layout sidecar, and reloads it.
//!
//! ```text
//! cargo run --example dataset_cache -- [cache-path]
//! ```

use std::path::PathBuf;

use hullaudit::ingest::sidecar_path;
use hullaudit::prelude::*;

fn main() {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let cache = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hullaudit-train.bin"));
    let file = SchemaFile::load(&fixture.join("schema.toml")).unwrap();
    let opts = LoadOptions { csv: file.csv.clone(), ..LoadOptions::default() };
    let (train, stats) = load_dataset(&file.schema, None, &fixture.join("train.csv"), Role::Train, &opts).unwrap();
    println!("encoded {} of {} rows into {} columns", stats.rows_kept, stats.rows_read, train.width());

    train.write_cache(&cache).unwrap();
    let bytes = std::fs::metadata(&cache).unwrap().len();
    println!("wrote {} ({bytes} bytes) and {}", cache.display(), sidecar_path(&cache).display());

    let back = EncodedDataset::read_cache(&cache).unwrap();
    let same = back.matrix == train.matrix && back.row_ids == train.row_ids && back.layout == train.layout;
    println!("reloaded {} x {}; identical to the original: {same}", back.len(), back.width());
    println!("{} distinct categorical profiles", back.profile_index.len());
}
