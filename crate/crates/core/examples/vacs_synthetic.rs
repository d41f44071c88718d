//! End-to-end run on synthetic rows shaped like the bundled clinical cohort
//! schema (`vacs_synthetic` preset). The test cohort is sicker than the
//! training cohort, so a share of test patients falls outside the hull.
//!
//! ```text
//! cargo run --release --example vacs_synthetic -- [n_train] [n_test]
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use hullaudit::audit::{audit_datasets, AuditConfig};
use hullaudit::prelude::*;
use hullaudit::schema::FeatureKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Numeric features load on two latent factors (frailty and metabolism);
/// `sick` shifts frailty.
fn synth(schema: &FeatureSchema, n: usize, sick: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<RawValue>> {
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let frailty: f64 = noise.sample(rng) + sick;
            let metabolism: f64 = noise.sample(rng);
            schema
                .features
                .iter()
                .enumerate()
                .map(|(j, f)| match &f.kind {
                    FeatureKind::Categorical { levels, .. } => {
                        RawValue::Level(levels[rng.random_range(0..levels.len())].clone())
                    }
                    kind => {
                        let theta = 0.4 * j as f64;
                        let mut v = 40.0 + 8.0 * (theta.cos() * frailty + theta.sin() * metabolism);
                        if matches!(kind, FeatureKind::Integer { .. }) {
                            v = v.round();
                        }
                        let (lo, hi) = kind.bounds();
                        RawValue::Number(v.clamp(lo.unwrap_or(f64::MIN), hi.unwrap_or(f64::MAX)))
                    }
                })
                .collect()
        })
        .collect()
}

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let n_train = args.next().unwrap_or(1500);
    let n_test = args.next().unwrap_or(300);
    let file = hullaudit::presets::preset("vacs_synthetic").unwrap();
    let schema = &file.schema;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let train_rows = synth(schema, n_train, 0.0, &mut rng);
    let test_rows = synth(schema, n_test, 0.6, &mut rng);

    let layout = Arc::new(build_layout(schema, ScalerKind::ZScore, &train_rows).unwrap());
    let train = EncodedDataset::from_raw_rows(layout.clone(), &train_rows, (0..n_train).collect()).unwrap();
    let test = EncodedDataset::from_raw_rows(layout, &test_rows, (0..n_test).collect()).unwrap();
    let config = AuditConfig::default();
    let audit = audit_datasets(train, test, config.domain(&file).unwrap(), &config, BTreeMap::new()).unwrap();
    let s = &audit.summary;
    println!(
        "{} test patients: {:.1}% outside ({:.1}% without a path), {} uncertified",
        s.total,
        100.0 * s.fractions.outside(),
        100.0 * s.fractions.outside_no_path,
        s.uncertified
    );
    let mut changes: Vec<(&String, &f64)> = s.mean_relative_change.iter().collect();
    changes.sort_by(|a, b| b.1.total_cmp(a.1));
    for (f, c) in changes.iter().take(5) {
        println!("  {f:<28} mean relative change {:.1}%", 100.0 * *c);
    }
}
