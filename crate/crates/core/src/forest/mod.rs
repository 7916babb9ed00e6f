//! Random-forest trainer producing vote matrices.
//!
//! Trees are CART classifiers split on weighted Gini impurity at midpoints of
//! adjacent distinct values. Every meta-parameter that matters for the
//! experiments is exposed: tree count, depth bound, minimum leaf size,
//! features per split, and how each tree's training multiset is drawn.

mod synth;
mod tree;

pub use synth::{synth_dataset, SynthSpec};
pub use tree::{Node, Tree};

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vote_model::{LabeledDataset, VoteMatrix};
use tree::{grow_tree, Columns, TreeParams};

/// Number of features drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    /// All `d` features.
    All,
    Count(u32),
}

impl MaxFeatures {
    pub fn resolve(&self, d: usize) -> Result<usize> {
        let k = match *self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor().max(1.0) as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k as usize,
        };
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!(
                "max_features {k} must be between 1 and the feature count {d}"
            )));
        }
        Ok(k)
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(Self::Sqrt),
            "all" => Ok(Self::All),
            _ => s
                .parse::<u32>()
                .ok()
                .filter(|&k| k > 0)
                .map(Self::Count)
                .ok_or_else(|| Error::InvalidArgument(format!("invalid max_features {s:?}"))),
        }
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sqrt => f.write_str("sqrt"),
            Self::All => f.write_str("all"),
            Self::Count(k) => write!(f, "{k}"),
        }
    }
}

impl TryFrom<String> for MaxFeatures {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MaxFeatures> for String {
    fn from(m: MaxFeatures) -> Self {
        m.to_string()
    }
}

/// How each tree's training multiset is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Resampling {
    /// `n` draws with replacement.
    Bootstrap,
    /// Every tree sees the full training set.
    None,
    /// `ceil(fraction * n)` draws without replacement.
    Subsample(f64),
}

impl FromStr for Resampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(Self::Bootstrap),
            "none" => Ok(Self::None),
            _ => {
                let frac = s
                    .strip_prefix("subsample:")
                    .and_then(|f| f.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "invalid resampling {s:?} (expected bootstrap, none or subsample:<fraction>)"
                        ))
                    })?;
                if !(frac > 0.0 && frac <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "subsample fraction {frac} outside (0, 1]"
                    )));
                }
                Ok(Self::Subsample(frac))
            }
        }
    }
}

impl fmt::Display for Resampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bootstrap => f.write_str("bootstrap"),
            Self::None => f.write_str("none"),
            Self::Subsample(frac) => write!(f, "subsample:{frac}"),
        }
    }
}

impl TryFrom<String> for Resampling {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Resampling> for String {
    fn from(r: Resampling) -> Self {
        r.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: u32,
    /// `None` grows trees until the other stopping rules apply.
    pub max_depth: Option<u32>,
    pub min_samples_leaf: u32,
    pub max_features: MaxFeatures,
    pub resampling: Resampling,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            resampling: Resampling::Bootstrap,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("min_samples_leaf must be at least 1".into()));
        }
        if let Resampling::Subsample(f) = self.resampling {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidArgument(format!("subsample fraction {f} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

pub const MODEL_FORMAT: &str = "ensemble-roc-forest";
pub const MODEL_VERSION: u32 = 1;

/// A trained forest with its configuration and training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format: String,
    pub version: u32,
    pub config: ForestConfig,
    /// `max_features` after resolving against the feature count.
    pub features_per_split: u32,
    pub n_train: usize,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ForestModel = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "not a forest model file: {:?}",
                model.format
            )));
        }
        if model.version != MODEL_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Trains `config.n_trees` trees. Tree `i` draws from a ChaCha8 stream seeded
/// with `config.seed` and stream id `i`, so the result does not depend on the
/// thread count.
pub fn train_forest(data: &LabeledDataset, config: &ForestConfig) -> Result<ForestModel> {
    config.validate()?;
    data.class_counts()?;
    let n = data.len();
    let d = data.n_features();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two training points".into()));
    }
    let k = config.max_features.resolve(d)?;
    let columns: Vec<Vec<f64>> = (0..d).map(|f| (0..n).map(|j| data.row(j)[f]).collect()).collect();
    let view = Columns {
        values: &columns,
        labels: data.labels(),
    };
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        max_features: k,
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let samples: Vec<u32> = match config.resampling {
                Resampling::None => (0..n as u32).collect(),
                Resampling::Bootstrap => {
                    let u = Uniform::new(0, n as u32).expect("n >= 2");
                    (0..n).map(|_| u.sample(&mut rng)).collect()
                }
                Resampling::Subsample(f) => {
                    let amount = ((f * n as f64).ceil() as usize).clamp(1, n);
                    let mut s: Vec<u32> = index::sample(&mut rng, n, amount)
                        .into_iter()
                        .map(|i| i as u32)
                        .collect();
                    s.sort_unstable();
                    s
                }
            };
            grow_tree(&view, samples, &params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: *config,
        features_per_split: k as u32,
        n_train: n,
        n_features: d,
        trees,
    })
}

/// Collects every tree's vote on every test point.
pub fn predict_votes(model: &ForestModel, test: &LabeledDataset) -> Result<VoteMatrix> {
    if test.n_features() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            found: test.n_features(),
        });
    }
    let m = model.trees.len();
    let mut votes = vec![0u8; test.len() * m];
    votes.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
        let x = test.row(j);
        for (v, tree) in row.iter_mut().zip(&model.trees) {
            *v = tree.predict(x);
        }
    });
    VoteMatrix::from_full(votes, m, test.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> LabeledDataset {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<u8> = (0..20).map(|i| (i >= 9) as u8).collect();
        LabeledDataset::new(xs, 1, ys, None).unwrap()
    }

    fn xor() -> LabeledDataset {
        LabeledDataset::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0], 2, vec![0, 1, 1, 0], None).unwrap()
    }

    fn accuracy(model: &ForestModel, data: &LabeledDataset, tree: usize) -> f64 {
        let hits = (0..data.len())
            .filter(|&j| model.trees[tree].predict(data.row(j)) == data.labels()[j])
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn separable_single_tree_is_exact() {
        let data = separable();
        let cfg = ForestConfig {
            n_trees: 1,
            max_features: MaxFeatures::Count(1),
            resampling: Resampling::None,
            ..Default::default()
        };
        let model = train_forest(&data, &cfg).unwrap();
        assert_eq!(accuracy(&model, &data, 0), 1.0);
        assert_eq!(model.trees[0].nodes.len(), 3);
        match &model.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 4.25),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn xor_stump_accuracy_is_bounded() {
        // every depth-1 split of the four XOR points misclassifies at least one
        let data = xor();
        for seed in 0..20 {
            let cfg = ForestConfig {
                n_trees: 5,
                max_depth: Some(1),
                max_features: MaxFeatures::All,
                seed,
                ..Default::default()
            };
            let model = train_forest(&data, &cfg).unwrap();
            for t in 0..5 {
                assert!(accuracy(&model, &data, t) <= 0.75);
                assert!(model.trees[t].depth() <= 1);
            }
        }
    }

    #[test]
    fn sqrt_sentinel_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(4096).unwrap(), 64);
        assert_eq!(MaxFeatures::Sqrt.resolve(10).unwrap(), 3);
        assert_eq!(MaxFeatures::Sqrt.resolve(1).unwrap(), 1);
        assert!(MaxFeatures::Count(5).resolve(4).is_err());
    }

    #[test]
    fn config_validation() {
        let data = separable();
        for bad in [
            ForestConfig {
                n_trees: 0,
                ..Default::default()
            },
            ForestConfig {
                max_depth: Some(0),
                ..Default::default()
            },
            ForestConfig {
                min_samples_leaf: 0,
                ..Default::default()
            },
            ForestConfig {
                resampling: Resampling::Subsample(1.5),
                ..Default::default()
            },
        ] {
            assert!(train_forest(&data, &bad).is_err());
        }
        let one_class = LabeledDataset::new(vec![1.0, 2.0], 1, vec![1, 1], None).unwrap();
        assert!(matches!(
            train_forest(&one_class, &ForestConfig::default()),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn parse_meta_parameters() {
        assert_eq!("sqrt".parse::<MaxFeatures>().unwrap(), MaxFeatures::Sqrt);
        assert_eq!("12".parse::<MaxFeatures>().unwrap(), MaxFeatures::Count(12));
        assert!("0".parse::<MaxFeatures>().is_err());
        assert_eq!(
            "subsample:0.5".parse::<Resampling>().unwrap(),
            Resampling::Subsample(0.5)
        );
        assert!("subsample:0".parse::<Resampling>().is_err());
        assert!("jackknife".parse::<Resampling>().is_err());
    }

    #[test]
    fn single_tree_votes_are_binary() {
        let data = separable();
        let cfg = ForestConfig {
            n_trees: 1,
            seed: 3,
            ..Default::default()
        };
        let model = train_forest(&data, &cfg).unwrap();
        let votes = predict_votes(&model, &data).unwrap();
        assert_eq!(votes.m_observed(), 1);
        assert!(votes.counts().iter().all(|&k| k <= 1));
    }

    #[test]
    fn dimension_mismatch() {
        let model = train_forest(
            &separable(),
            &ForestConfig {
                n_trees: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            predict_votes(&model, &xor()),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let model = train_forest(
            &xor(),
            &ForestConfig {
                n_trees: 3,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let back = ForestModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        let bad = model.to_json().unwrap().replace("\"version\":1", "\"version\":9");
        assert!(ForestModel::from_json(&bad).is_err());
    }
}
