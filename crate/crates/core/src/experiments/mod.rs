//! Monte Carlo convergence harness: error norms, studies in time and space,
//! rate fits and result files.

pub mod fit;
pub mod norms;
pub mod output;
pub mod report;
pub mod studies;

pub use fit::fit_rate;
pub use norms::{compute_errors, CrossMeshNorm, ErrorSample, NORM_NAMES, N_NORMS};
pub use output::{emit_results, errors_csv, rates_csv, ERRORS_HEADER};
pub use report::{rms_estimate, ErrorReport, LevelErrors, SampleOutcome, StudyDiagnostics, StudyMode};
pub use studies::{check_refinement, monte_carlo, study_spatial, study_temporal, StudyConfig};
