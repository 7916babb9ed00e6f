use ensemble_roc::forest::{
    predict_votes, synth_dataset, train_forest, ForestConfig, ForestModel, MaxFeatures, Resampling, SynthSpec,
};
use ensemble_roc::roc::{auc, estimate_votes};

fn gaussians(n: usize, d: usize, separation: f64, seed: u64) -> ensemble_roc::LabeledDataset {
    synth_dataset(&SynthSpec::TwoGaussians { separation }, n, d, seed).unwrap()
}

#[test]
fn depth_and_leaf_bounds_hold() {
    let data = gaussians(600, 5, 1.0, 1);
    for (max_depth, leaf) in [(Some(1), 1), (Some(4), 5), (None, 1), (None, 12)] {
        for resampling in [Resampling::Bootstrap, Resampling::None, Resampling::Subsample(0.5)] {
            let cfg = ForestConfig {
                n_trees: 8,
                max_depth,
                min_samples_leaf: leaf,
                resampling,
                seed: 3,
                ..Default::default()
            };
            let model = train_forest(&data, &cfg).unwrap();
            for tree in &model.trees {
                if let Some(d) = max_depth {
                    assert!(tree.depth() <= d);
                }
                assert!(tree.leaves().all(|(_, n)| n >= leaf));
                let total: u32 = tree.leaves().map(|(_, n)| n).sum();
                let expected = match resampling {
                    Resampling::Subsample(f) => (f * 600.0).ceil() as u32,
                    _ => 600,
                };
                assert_eq!(total, expected);
            }
        }
    }
}

#[test]
fn unresampled_all_feature_trees_are_identical() {
    let data = gaussians(300, 4, 1.5, 2);
    let cfg = ForestConfig {
        n_trees: 6,
        max_features: MaxFeatures::All,
        resampling: Resampling::None,
        seed: 9,
        ..Default::default()
    };
    let model = train_forest(&data, &cfg).unwrap();
    assert!(model.trees.windows(2).all(|w| w[0] == w[1]));
    let votes = predict_votes(&model, &gaussians(200, 4, 1.5, 3)).unwrap();
    assert!(votes.counts().iter().all(|&k| k == 0 || k == 6));
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let data = gaussians(500, 6, 1.0, 4);
    let cfg = ForestConfig {
        n_trees: 12,
        seed: 21,
        ..Default::default()
    };
    let a = train_forest(&data, &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let b = pool.install(|| train_forest(&data, &cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let other = train_forest(&data, &ForestConfig { seed: 22, ..cfg }).unwrap();
    assert_ne!(a.trees, other.trees);
}

#[test]
fn model_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forest.json");
    let model = train_forest(
        &gaussians(200, 3, 1.0, 5),
        &ForestConfig {
            n_trees: 4,
            ..Default::default()
        },
    )
    .unwrap();
    model.save(&path).unwrap();
    assert_eq!(ForestModel::load(&path).unwrap(), model);
}

#[test]
fn sqrt_features_on_wide_data() {
    let data = gaussians(40, 4096, 1.0, 6);
    let cfg = ForestConfig {
        n_trees: 1,
        max_depth: Some(2),
        ..Default::default()
    };
    assert_eq!(train_forest(&data, &cfg).unwrap().features_per_split, 64);
}

fn forest_auc(separation: f64, seed: u64) -> f64 {
    let train = gaussians(1000, 4, separation, seed);
    let test = gaussians(1000, 4, separation, seed + 100);
    let cfg = ForestConfig {
        n_trees: 64,
        seed,
        ..Default::default()
    };
    let votes = predict_votes(&train_forest(&train, &cfg).unwrap(), &test).unwrap();
    auc(&estimate_votes(&votes, None).unwrap())
}

#[test]
fn no_signal_gives_chance_auc() {
    let a = forest_auc(0.0, 1);
    assert!((a - 0.5).abs() <= 0.05, "{a}");
}

#[test]
fn huge_separation_gives_perfect_auc() {
    let a = forest_auc(20.0, 2);
    assert!(a >= 0.99, "{a}");
}

#[test]
fn xor_needs_depth() {
    let train = synth_dataset(&SynthSpec::XorBlobs { separation: 6.0 }, 800, 2, 1).unwrap();
    let test = synth_dataset(&SynthSpec::XorBlobs { separation: 6.0 }, 800, 2, 2).unwrap();
    let fit = |depth| {
        let cfg = ForestConfig {
            n_trees: 32,
            max_depth: Some(depth),
            max_features: MaxFeatures::All,
            seed: 1,
            ..Default::default()
        };
        auc(&estimate_votes(
            &predict_votes(&train_forest(&train, &cfg).unwrap(), &test).unwrap(),
            None,
        )
        .unwrap())
    };
    let (shallow, deep) = (fit(1), fit(4));
    assert!(shallow < 0.75, "{shallow}");
    assert!(deep > 0.95, "{deep}");
}
