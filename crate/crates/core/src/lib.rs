//! ROC curves with confidence bands for binary voting ensembles.
//!
//! A trained ensemble is summarized by a vote matrix: for every test point,
//! the number of member classifiers voting positive. Treating each member as
//! an independent draw with the point's observed vote rate turns every
//! threshold of the ensemble's ROC curve into a sum of binomial survival
//! probabilities. That gives closed-form means and variances for the false
//! and true positive rates, for the observed ensemble size or any other.
//!
//! The pipeline is
//!
//! 1. [`VoteMatrix`] from a forest ([`forest`]) or a CSV file ([`load_votes`]),
//! 2. [`threshold_profile`] for the survival probabilities at the chosen size,
//! 3. [`estimate_roc`] for per-threshold means and variances,
//! 4. [`build_bands`] or [`simultaneous_bands`] for confidence bands, and
//!    [`compare_curves`] to overlay two estimates.
//!
//! Variances come in two flavours ([`VarianceMode`]): `classifier` covers
//! resampling the ensemble only, `full` adds Poisson resampling of the test
//! set. The Monte Carlo [`oracle`] checks both independently.

pub mod bands;
pub mod binomial;
pub mod cli;
pub mod error;
pub mod forest;
pub mod oracle;
pub mod roc;
pub mod vote_model;

pub use bands::{build_bands, simultaneous_bands, BandPoint, BandedCurve};
pub use binomial::{binomial_survival, survival_row, threshold_profile, ThresholdProfile};
pub use error::{Error, Result};
pub use forest::{predict_votes, synth_dataset, train_forest, ForestConfig, ForestModel, SynthSpec};
pub use oracle::{compare_with_analytic, run_oracle, ClassifierMode, OracleConfig, OracleSummary};
pub use roc::{auc, compare_curves, estimate_roc, estimate_votes, CurveComparison, RocEstimate, VarianceMode};
pub use vote_model::{load_dataset, load_votes, ClassCounts, LabelColumn, LabeledDataset, VoteFormat, VoteMatrix};
