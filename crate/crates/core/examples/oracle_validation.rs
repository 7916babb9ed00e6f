//! Checks the closed-form means and variances against Monte Carlo replicates.
//!
//! Run with `cargo run --release --example oracle_validation`.

use ensemble_roc::oracle::OracleTolerance;
use ensemble_roc::{compare_with_analytic, estimate_votes, run_oracle, OracleConfig, VoteMatrix};

fn main() -> ensemble_roc::Result<()> {
    let m = 16;
    let counts: Vec<u32> = (0..200u32).map(|j| (j * 5 + (j % 2) * 6) % (m + 1)).collect();
    let labels: Vec<u8> = (0..200).map(|j| (j % 2) as u8).collect();
    let votes = VoteMatrix::new(counts, m, labels)?;

    for poisson in [false, true] {
        let mut config = OracleConfig::new(20_000, 11, 24);
        config.poisson_resampling = poisson;
        let summary = run_oracle(&votes, &config)?;
        let est = estimate_votes(&votes, Some(config.m_eval))?;
        let report = compare_with_analytic(&summary, &est, &OracleTolerance::default())?;
        let mc = summary.auc_moments();
        println!(
            "poisson={poisson}: means {:.1}% ok, variances {:.1}% ok of {} checked, passed={}",
            100.0 * report.mean_pass_fraction,
            100.0 * report.var_pass_fraction,
            report.var_checked,
            report.passed
        );
        let mode = if poisson {
            ensemble_roc::VarianceMode::Full
        } else {
            ensemble_roc::VarianceMode::Classifier
        };
        println!(
            "  AUC variance analytic {:.3e} vs replicates {:.3e}",
            est.auc_var(mode),
            mc.variance()
        );
    }
    Ok(())
}
