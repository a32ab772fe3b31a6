//! Pixel-level precision-recall, one-sided rank tests and Spearman
//! correlation.

mod pr;
mod rank;

pub use pr::{pr_curve, threshold_grid, PrAccumulator, PrCurve, N_THRESHOLDS};
pub use rank::{
    mann_whitney_u, mann_whitney_u_with, rank_average, spearman_rho, wilcoxon_signed_rank,
    wilcoxon_signed_rank_with, Alternative, TestMethod, TestResult, EXACT_ENUMERATION_LIMIT,
    WILCOXON_EXACT_MAX_N,
};
