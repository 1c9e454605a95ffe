//! Checks on trained (or constructed) models and on the data assumptions.

mod alignment;
mod features;
mod gradcheck;
mod monotone;
mod probe;
mod separability;

pub use alignment::{alignment_gap, AlignmentGap};
pub use features::{feature_learned, feature_learning_report, ClassFeatures, FeatureLearningReport};
pub use gradcheck::{finite_difference_check, GradCheckReport, DEFAULT_FD_STEP};
pub use monotone::{verify_assumption_monotone, MonotonicityReport};
pub use probe::{
    linear_gradient_probe, probe_series, probe_weights, symmetry_check, ProbeMeasurement, ProbeResult, SymmetryReport,
};
pub use separability::{count_violations, separability_probe, SeparabilityOutcome, SEPARABILITY_BUDGET};

/// Default fresh-sample count for the feature-learned test.
pub const DEFAULT_SAMPLES: usize = 100;
/// Default pass threshold for the feature-learned test.
pub const DEFAULT_THETA: f64 = 0.95;
