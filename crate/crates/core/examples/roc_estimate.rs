//! Mean ROC curve, per-threshold variances and AUC from a vote matrix.
//!
//! Run with `cargo run --example roc_estimate`.

use ensemble_roc::{auc, estimate_votes, VarianceMode, VoteMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

fn main() -> ensemble_roc::Result<()> {
    let m = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = Vec::new();
    let mut labels = Vec::new();
    for j in 0..400 {
        let y = (j % 2) as u8;
        let rate = 0.3 * y as f64 + 0.7 * rng.random::<f64>();
        counts.push(Binomial::new(m as u64, rate).unwrap().sample(&mut rng) as u32);
        labels.push(y);
    }
    let votes = VoteMatrix::new(counts, m, labels)?;
    let est = estimate_votes(&votes, None)?;

    println!("   t    fpr    sd_cls  sd_full    tpr    sd_cls  sd_full");
    for t in (0..est.n_thresholds()).step_by(4) {
        println!(
            "{t:4}  {:.4}  {:.4}  {:.4}   {:.4}  {:.4}  {:.4}",
            est.mean_fpr[t],
            est.var_fpr_classifier[t].sqrt(),
            est.var_fpr_full[t].sqrt(),
            est.mean_tpr[t],
            est.var_tpr_classifier[t].sqrt(),
            est.var_tpr_full[t].sqrt(),
        );
    }
    for mode in [VarianceMode::Classifier, VarianceMode::Full] {
        println!("AUC {:.4} +/- {:.4} ({mode})", auc(&est), est.auc_var(mode).sqrt());
    }

    let mut csv = Vec::new();
    est.write_csv(&mut csv)?;
    println!("estimate CSV is {} bytes", csv.len());
    Ok(())
}
