//! Predicts the ROC curve of a smaller or larger ensemble from one set of votes.
//!
//! Run with `cargo run --release --example ensemble_size_whatif`.

use ensemble_roc::{
    auc, estimate_votes, predict_votes, synth_dataset, train_forest, ForestConfig, SynthSpec, VarianceMode,
};

fn main() -> ensemble_roc::Result<()> {
    let spec = SynthSpec::XorBlobs { separation: 3.0 };
    let train = synth_dataset(&spec, 2000, 4, 10)?;
    let test = synth_dataset(&spec, 800, 4, 11)?;
    let model = train_forest(
        &train,
        &ForestConfig {
            n_trees: 32,
            seed: 1,
            ..Default::default()
        },
    )?;
    let votes = predict_votes(&model, &test)?;

    println!("observed ensemble: {} trees", votes.m_observed());
    for m_eval in [4, 8, 32, 128, 512] {
        let est = estimate_votes(&votes, Some(m_eval))?;
        println!(
            "m_eval = {m_eval:3}: AUC {:.4} (sd classifier {:.4}, full {:.4})",
            auc(&est),
            est.auc_var(VarianceMode::Classifier).sqrt(),
            est.auc_var(VarianceMode::Full).sqrt()
        );
    }

    // a real 128-tree forest for comparison
    let big = train_forest(
        &train,
        &ForestConfig {
            n_trees: 128,
            seed: 2,
            ..Default::default()
        },
    )?;
    println!(
        "trained 128 trees: AUC {:.4}",
        auc(&estimate_votes(&predict_votes(&big, &test)?, None)?)
    );
    Ok(())
}
