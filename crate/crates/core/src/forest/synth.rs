use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vote_model::LabeledDataset;

/// Synthetic binary classification generators. Labels alternate `0, 1, 0, ...`
/// so both classes are present whenever `n >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum SynthSpec {
    /// Unit-variance Gaussians whose means are `separation` apart along the
    /// diagonal. Bayes accuracy is `Phi(separation / 2)`.
    TwoGaussians { separation: f64 },
    /// Four unit-variance blobs centred at `(+-separation/2, +-separation/2)`
    /// in the first two features, labelled by XOR of the signs. Remaining
    /// features are noise.
    XorBlobs { separation: f64 },
}

impl SynthSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TwoGaussians { .. } => "two-gaussians",
            Self::XorBlobs { .. } => "xor-blobs",
        }
    }

    pub fn separation(&self) -> f64 {
        match *self {
            Self::TwoGaussians { separation } | Self::XorBlobs { separation } => separation,
        }
    }

    pub fn from_name(name: &str, separation: f64) -> Result<Self> {
        if !separation.is_finite() || separation < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "separation {separation} must be finite and non-negative"
            )));
        }
        match name {
            "two-gaussians" => Ok(Self::TwoGaussians { separation }),
            "xor-blobs" => Ok(Self::XorBlobs { separation }),
            _ => Err(Error::InvalidArgument(format!(
                "unknown generator {name:?} (expected two-gaussians or xor-blobs)"
            ))),
        }
    }
}

impl FromStr for SynthSpec {
    type Err = Error;

    /// Parses `name` or `name:separation`; separation defaults to 2.
    fn from_str(s: &str) -> Result<Self> {
        let (name, sep) = match s.split_once(':') {
            Some((name, sep)) => (
                name,
                sep.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("invalid separation {sep:?}")))?,
            ),
            None => (s, 2.0),
        };
        Self::from_name(name, sep)
    }
}

impl fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name(), self.separation())
    }
}

pub fn synth_dataset(spec: &SynthSpec, n: usize, d: usize, seed: u64) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two rows".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    if matches!(spec, SynthSpec::XorBlobs { .. }) && d < 2 {
        return Err(Error::InvalidArgument("xor-blobs needs at least two features".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let y = (j % 2) as u8;
        labels.push(y);
        match *spec {
            SynthSpec::TwoGaussians { separation } => {
                let shift = separation / (2.0 * (d as f64).sqrt());
                let mean = if y == 1 { shift } else { -shift };
                for _ in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    features.push(mean + z);
                }
            }
            SynthSpec::XorBlobs { separation } => {
                let a = rng.random::<bool>();
                let b = a ^ (y == 1);
                let c = separation / 2.0;
                for sign in [a, b] {
                    let z: f64 = rng.sample(StandardNormal);
                    features.push(if sign { c } else { -c } + z);
                }
                for _ in 2..d {
                    features.push(rng.sample(StandardNormal));
                }
            }
        }
    }
    let names = (0..d).map(|i| format!("f{i}")).collect();
    LabeledDataset::new(features, d, labels, Some(names))
}
