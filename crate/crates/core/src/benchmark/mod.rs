//! Synthetic benchmark cases, method evaluation and composite scoring.

mod case;
mod methods;
mod score;
mod suite;
mod surrogate;

pub use case::{generate_test_case, shared_support, CaseParams, TestCase, MAX_TRANSLATION, OVERLAP_TOLERANCE, TARGET_POINTS};
pub use methods::{Builtin, BuiltinKind, FnMethod, RegistrationMethod};
pub use score::{
    case_rmse, composite_score, evaluate_method, lower_median, BenchmarkRecord, ScoreRow, ScoreTable, DEFAULT_SUCCESS_THRESHOLD,
};
pub use suite::{run_suite, run_suite_config, SuiteConfig, SuiteReport};
pub use surrogate::{normalize_to_diagonal, Surrogate, NORMALIZED_DIAGONAL};
