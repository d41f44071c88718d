//! Interpolation/extrapolation audits for tabular models.
//!
//! A query is *inside* when it lies in the convex hull of the training rows
//! intersected with the declared feature domain; otherwise the model must
//! extrapolate to answer it. The crate projects queries onto that set,
//! reports distances and per-feature deltas, and analyzes the directions of
//! extrapolation.
//!
//! ```no_run
//! use hullaudit::prelude::*;
//!
//! let file = SchemaFile::load("schema.toml".as_ref()).unwrap();
//! let config = AuditConfig::default();
//! let audit = run_audit(&file, "train.csv".as_ref(), "test.csv".as_ref(), &config).unwrap();
//! println!("{:.1}% outside", 100.0 * audit.summary.fractions.outside());
//! ```

pub mod audit;
pub mod cli;
pub mod directions;
pub mod discrete;
pub mod ingest;
mod linalg;
pub mod matrix;
pub mod presets;
pub mod profile;
pub mod report;
pub mod schema;
pub mod solver;

pub mod prelude {
    pub use crate::audit::{run_audit, AuditConfig, AuditOutput};
    pub use crate::discrete::{has_continuous_path, project_with_discrete, DiscreteMethod, PathIndex};
    pub use crate::ingest::{load_dataset, EncodedDataset, IngestStats, LoadOptions, Role};
    pub use crate::matrix::Matrix;
    pub use crate::schema::{
        build_layout, DomainSpec, EncodingLayout, FeatureDecl, FeatureSchema, GroupMode, RawValue, ScalerKind,
        SchemaFile,
    };
    pub use crate::solver::{
        batch_project, project_continuous, verify_kkt, Algorithm, BatchConfig, ProjectionProblem, ProjectionResult,
        SolverConfig,
    };
}
