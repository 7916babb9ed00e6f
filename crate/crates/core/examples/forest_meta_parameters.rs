//! How tree count, depth and training size move a forest's ROC curve.
//!
//! Run with `cargo run --release --example forest_meta_parameters`.

use ensemble_roc::forest::Resampling;
use ensemble_roc::{
    auc, compare_curves, estimate_votes, predict_votes, synth_dataset, train_forest, ForestConfig, LabeledDataset,
    RocEstimate, SynthSpec, VarianceMode,
};

fn fit(train: &LabeledDataset, test: &LabeledDataset, config: &ForestConfig) -> ensemble_roc::Result<RocEstimate> {
    let model = train_forest(train, config)?;
    estimate_votes(&predict_votes(&model, test)?, None)
}

fn main() -> ensemble_roc::Result<()> {
    let spec = SynthSpec::TwoGaussians { separation: 2.0 };
    let train = synth_dataset(&spec, 3000, 8, 1)?;
    let test = synth_dataset(&spec, 1000, 8, 2)?;
    let base = ForestConfig {
        n_trees: 64,
        seed: 5,
        ..Default::default()
    };

    let variants = [
        ("base (64 trees, bootstrap)", base, 3000),
        ("8 trees", ForestConfig { n_trees: 8, ..base }, 3000),
        (
            "depth 3",
            ForestConfig {
                max_depth: Some(3),
                ..base
            },
            3000,
        ),
        (
            "half subsample",
            ForestConfig {
                resampling: Resampling::Subsample(0.5),
                ..base
            },
            3000,
        ),
        ("300 training points", base, 300),
    ];
    let reference = fit(&train, &test, &base)?;
    for (name, config, n) in variants {
        let est = fit(&train.head(n)?, &test, &config)?;
        let cmp = compare_curves(&reference, &est, VarianceMode::Classifier)?;
        println!(
            "{name:28} AUC {:.4} +/- {:.4}  delta vs base {:+.4} +/- {:.4}",
            auc(&est),
            est.auc_var(VarianceMode::Full).sqrt(),
            cmp.auc_delta,
            cmp.auc_se_delta
        );
    }
    Ok(())
}
