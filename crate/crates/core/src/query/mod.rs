//! Two-stage query selection: a precision-controlled high-purity candidate
//! pool, then informativeness ranking inside it.

mod gmm;
mod pool;
mod round;

pub use gmm::{
    fit_gmm_1d, high_posterior, Gmm1d, EM_TOLERANCE, HIGH, MAX_EM_ITERATIONS,
    VARIANCE_FLOOR_FRACTION,
};
pub use pool::{
    build_candidate_pool, select_queries, top_by_score, CandidatePool, PrecisionController,
};
pub use round::{run_round, Oracle, RoundContext, RoundOutcome};
