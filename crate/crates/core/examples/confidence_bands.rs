//! Pointwise and simultaneous bands, plus the log-FPR view.
//!
//! Run with `cargo run --example confidence_bands`.

use ensemble_roc::bands::{default_log_floor, to_log_axis};
use ensemble_roc::{build_bands, estimate_votes, simultaneous_bands, VarianceMode, VoteMatrix};

fn main() -> ensemble_roc::Result<()> {
    let m = 20;
    let counts: Vec<u32> = (0..300u32).map(|j| (j * 7) % 13 + (j % 2) * 8).collect();
    let labels: Vec<u8> = (0..300).map(|j| (j % 2) as u8).collect();
    let votes = VoteMatrix::new(counts, m, labels)?;
    let est = estimate_votes(&votes, None)?;

    let pointwise = build_bands(&est, 0.95, VarianceMode::Full)?;
    let family = simultaneous_bands(&est, 0.95, VarianceMode::Full)?;
    println!("pointwise z = {:.3}, simultaneous z = {:.3}", pointwise.z, family.z);
    for (p, s) in pointwise.points.iter().zip(&family.points).step_by(3) {
        println!(
            "t={:2} fpr {:.3} [{:.3}, {:.3}] / [{:.3}, {:.3}]  tpr {:.3} [{:.3}, {:.3}] / [{:.3}, {:.3}]",
            p.t, p.mean_fpr, p.fpr_lo, p.fpr_hi, s.fpr_lo, s.fpr_hi, p.mean_tpr, p.tpr_lo, p.tpr_hi, s.tpr_lo, s.tpr_hi
        );
    }

    let floor = default_log_floor(est.class_counts.n_neg);
    for p in to_log_axis(&pointwise, floor)?.iter().rev().take(5) {
        println!(
            "t={:2} log10 fpr {:.2} [{:.2}, {:.2}] tpr {:.3}",
            p.t, p.log10_fpr, p.log10_fpr_lo, p.log10_fpr_hi, p.mean_tpr
        );
    }
    pointwise.write_csv(std::io::stdout().lock(), floor)?;
    Ok(())
}
