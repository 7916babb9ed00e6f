//! Survival probabilities behind every ROC threshold.
//!
//! Run with `cargo run --example binomial_profile`.

use ensemble_roc::{binomial_survival, survival_row, threshold_profile, VoteMatrix};

fn main() -> ensemble_roc::Result<()> {
    // P[Binomial(25, 0.3) >= t] for t = 0..=26
    let row = survival_row(25, 0.3);
    for (t, q) in row.iter().enumerate().step_by(5) {
        println!("P[K >= {t:2}] = {q:.6e}");
    }
    println!("single entry t = 12: {:.6e}", binomial_survival(25, 0.3, 12)?);

    // far tails stay accurate in relative terms
    println!(
        "P[Binomial(8192, 0.01) >= 200] = {:.6e}",
        binomial_survival(8192, 0.01, 200)?
    );

    // a profile evaluates one row per distinct vote count
    let votes = VoteMatrix::new(vec![0, 3, 3, 7, 10, 10, 10], 10, vec![0, 0, 1, 0, 1, 1, 1])?;
    let profile = threshold_profile(&votes, 40)?;
    println!(
        "{} points, {} distinct counts, {} thresholds at m_eval = {}",
        profile.n_points(),
        profile.distinct_counts().len(),
        profile.n_thresholds(),
        profile.m_eval()
    );
    for j in 0..profile.n_points() {
        println!(
            "point {j}: k = {:2}, q(t = 20) = {:.4}",
            votes.counts()[j],
            profile.q(j, 20)
        );
    }
    Ok(())
}
