//! Hyperplane-arrangement patterns, convexified support sets and the width and
//! regularization thresholds built on them.

pub mod heuristics;
pub mod patterns;
pub mod regime;
pub mod supports;

pub use heuristics::{
    inter_overlap, inter_overlap_with, lambda2_star, lambda_fit_star, lambda_fit_star_with, FitStar, Lambda2Star,
    OverlapVerdict, SearchOptions,
};
pub use patterns::{enum_patterns, enumeration_bound, pattern_of, Pattern, PatternSet};
pub use regime::{lambda_c_star, regime_check, Guarantee, RegimeInput, RegimeReport};
pub use supports::{
    critical_width, equalized_from_witness, minimal_supports, pts_feasible, select_support, support_of,
    MinimalSupports, PtsOutcome, PtsWitness, SupportVector,
};
