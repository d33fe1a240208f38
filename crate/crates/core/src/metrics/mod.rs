//! Agreement between two annotation sources: box-level matching and
//! continuous-time confusion, rates and pseudo-kappa.

pub mod confusion;
pub mod intervals;
pub mod kappa;
pub mod method1;
pub mod report;

pub use confusion::{confusion, confusion_with, ConfusionMeasure, RoleConvention, ScreeningRates};
pub use intervals::{jaccard, IntervalSet};
pub use kappa::{bootstrap_ci, kappa_with_ci, pseudo_kappa, BootstrapCi, Interpretation, KappaResult};
pub use method1::{match_boxes, MatchCounts, Method1Result};
pub use report::{evaluate_corpus, evaluate_sources, AgreementReport, ClassSel, ComparisonReport, EvalConfig, KappaOutcome};
