//! Spectrum of a directions matrix: numerical rank, condition number,
//! dominant patterns, redundant columns found by pivoted QR, and clusters.
//!
//! Uses synthetic directions with two underlying patterns and one column
//! that nearly duplicates another.
//!
//! ```text
//! cargo run --example directions_spectrum
//! ```

use hullaudit::directions::{spectrum, DirectionsMatrix, SpectrumConfig};
use hullaudit::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let labels: Vec<String> = ["age", "hours", "education", "income", "hours_copy"].iter().map(|s| s.to_string()).collect();
    let patterns = [[1.0, 0.5, 0.0, 0.2], [0.0, -0.3, 1.0, 0.1]];
    let mut rows = Vec::new();
    for i in 0..200 {
        let p = &patterns[i % 2];
        let a = rng.random_range(0.5..2.0);
        let mut row: Vec<f64> = p.iter().map(|v| a * v + 0.01 * rng.random_range(-1.0..1.0)).collect();
        row.push(row[1] + 1e-6 * rng.random_range(-1.0..1.0));
        rows.push(row);
    }
    let dirs = DirectionsMatrix::from_rows(Matrix::from_rows(&rows), (0..rows.len()).collect(), labels);
    let config = SpectrumConfig { drop_columns: vec!["hours_copy".into()], ..SpectrumConfig::default() };
    let report = spectrum(&dirs, &config).unwrap();

    println!("{} x {}, rank {}, condition number {:.3e}", report.rows, report.cols, report.rank, report.condition_number);
    let sv: Vec<String> = report.singular_values.iter().map(|s| format!("{s:.3e}")).collect();
    println!("singular values: {}", sv.join(" "));
    println!("{} patterns carry {:.0}% of the energy", report.dominant_patterns, 100.0 * report.energy_threshold);
    for (i, p) in report.patterns.iter().enumerate() {
        let top: Vec<String> = p.loadings.iter().take(3).map(|(l, v)| format!("{l} {v:+.2}")).collect();
        println!("  pattern {i}: {:.1}% energy, {}", 100.0 * p.energy_fraction, top.join(", "));
    }
    for r in &report.redundant {
        println!("  redundant candidate {:<12} |R_kk| {:.2e}, condition number after drop {:.3e}", r.label, r.pivot_magnitude, r.condition_number_after_drop);
    }
    if let Some(d) = &report.dropped {
        println!("without {:?}: rank {}, condition number {:.3e}", d.columns, d.rank, d.condition_number);
    }
    if let Some(c) = &report.clusters {
        println!("k-means picked k = {} (silhouette {:.3}), sizes {:?}", c.k, c.silhouette, c.sizes);
    }
}
