//! Audits the Adult census test split against its training split.
//!
//! Data is not bundled. Download `adult.data` and `adult.test` from the UCI
//! repository into `$HULLAUDIT_DATA_DIR/adult/` (default `data/adult/`), then:
//!
//! ```text
//! cargo run --release --example adult_audit -- [--sample N] [--keep-missing]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use hullaudit::audit::{run_audit, AuditConfig, MissingOverride};
use hullaudit::presets;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config = AuditConfig::default();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "--sample" => config.test_sample = it.next().and_then(|s| s.parse().ok()),
            "--keep-missing" => config.missing = Some(MissingOverride::AsLevel("?".into())),
            "--no-directions" => config.directions = false,
            other => panic!("unknown argument {other}"),
        }
    }
    let dir = std::env::var_os("HULLAUDIT_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| "data".into()).join("adult");
    let file = presets::preset("adult").unwrap();

    let start = Instant::now();
    let out = run_audit(&file, &dir.join("adult.data"), &dir.join("adult.test"), &config).unwrap();
    let s = &out.summary;
    println!("train rows {} / test rows {}", out.train.len(), out.test.len());
    println!(
        "inside {:.1}%  outside (path) {:.1}%  outside (no path) {:.1}%",
        100.0 * s.fractions.inside,
        100.0 * s.fractions.outside_path,
        100.0 * s.fractions.outside_no_path
    );
    println!("uncertified {}  failures {}", s.uncertified, s.failures);
    for f in ["education-num", "hours-per-week"] {
        if let Some(c) = s.mean_relative_change.get(f) {
            println!("mean relative change {f}: {:.1}%", 100.0 * c);
        }
    }
    if let Some(sp) = &out.spectrum {
        println!(
            "directions: {} x {}, rank {}, condition number {:.3e}, {} dominant patterns",
            sp.rows, sp.cols, sp.rank, sp.condition_number, sp.dominant_patterns
        );
        for r in sp.redundant.iter().take(3) {
            println!("  redundant {:<40} kappa after drop {:.3e}", r.label, r.condition_number_after_drop);
        }
        if let Some(c) = &sp.clusters {
            println!("clusters: k = {} (silhouette {:.3})", c.k, c.silhouette);
        }
    }
    println!("elapsed {:.1?}", start.elapsed());
}
