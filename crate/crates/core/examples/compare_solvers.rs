//! Runs the three projection algorithms on the same random hull and shows
//! that they agree on the distance.
//!
//! ```text
//! cargo run --release --example compare_solvers -- [n] [d]
//! ```

use std::sync::Arc;
use std::time::Instant;

use hullaudit::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let n = args.next().unwrap_or(500);
    let d = args.next().unwrap_or(8);
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let schema = FeatureSchema::new((0..d).map(|j| FeatureDecl::continuous(&format!("x{j}"))).collect()).unwrap();
    let rows: Vec<Vec<RawValue>> =
        (0..n).map(|_| (0..d).map(|_| RawValue::Number(rng.random_range(-1.0..1.0))).collect()).collect();
    let layout = Arc::new(build_layout(&schema, ScalerKind::None, &rows).unwrap());
    let train = EncodedDataset::from_raw_rows(layout, &rows, (0..n).collect()).unwrap();

    let queries: Vec<Vec<f64>> = (0..5).map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    println!("n = {n}, d = {d}");
    println!("{:>5}  {:>22}  {:>14}  {:>14}  {:>9}", "query", "algorithm", "distance", "certificate", "time");
    for (q, x) in queries.iter().enumerate() {
        for algorithm in [Algorithm::GradientProjection, Algorithm::FrankWolfe, Algorithm::Dual] {
            let config = SolverConfig::default().with_algorithm(algorithm);
            let start = Instant::now();
            let outcome = project_continuous(&ProjectionProblem::new(x, &train, &config));
            let elapsed = start.elapsed();
            match outcome {
                Ok(r) => println!(
                    "{q:>5}  {:>22}  {:>14.9}  {:>14.2e}  {:>9.2?}",
                    algorithm.to_string(),
                    r.distance,
                    r.certificate,
                    elapsed
                ),
                Err(e) => println!("{q:>5}  {:>22}  failed: {e}", algorithm.to_string()),
            }
        }
    }
}
