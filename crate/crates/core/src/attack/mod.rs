//! Membership-inference attacks.

pub mod distance;
pub mod montecarlo;
pub mod whitebox;

pub use distance::{feature_distance, tonal_centroid, DistanceMetric, Features};
pub use montecarlo::{
    build_stash, epsilon_from_heuristic, mc_score, run_mc, sample_seeds, set_mi, single_mi, EpsilonHeuristic,
    McConfig, McResult, McTrial, Stash,
};
pub use whitebox::{rank_and_label, rank_order, run_whitebox, ScoredCandidate, WbAttackResult};
