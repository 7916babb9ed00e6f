//! Empirical coverage of the bands against known vote probabilities.
//!
//! Every trial synthesizes an observed vote matrix from the true per-point
//! probabilities, builds bands for an ensemble of size `m_eval`, and checks
//! them against the curve realized by a fresh ensemble of that size drawn from
//! the same probabilities (with Poisson test-set weights in full mode). The
//! curve expected under the truth is checked as well; the bands describe the
//! spread of realized curves, so that coverage sits well above nominal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PoissonOne;
use crate::bands::{build_bands, simultaneous_bands, BandedCurve};
use crate::binomial::{survival_row, threshold_profile};
use crate::error::{Error, Result};
use crate::roc::{estimate_roc, VarianceMode};
use crate::vote_model::{ClassCounts, VoteMatrix};

/// Known per-point positive-vote probabilities with labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTruth {
    pub probabilities: Vec<f64>,
    pub labels: Vec<u8>,
}

impl CoverageTruth {
    pub fn new(probabilities: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if probabilities.len() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: probabilities.len(),
                found: labels.len(),
            });
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
        ClassCounts::from_labels(&labels)?;
        Ok(Self { probabilities, labels })
    }

    /// Expected FPR and TPR of an `m`-classifier ensemble at every threshold.
    pub fn expected_curve(&self, m: u32) -> (Vec<f64>, Vec<f64>) {
        let cc = ClassCounts::from_labels(&self.labels).expect("validated");
        let nt = m as usize + 2;
        let mut sums = [vec![0.0; nt], vec![0.0; nt]];
        for (&p, &y) in self.probabilities.iter().zip(&self.labels) {
            for (s, q) in sums[y as usize].iter_mut().zip(survival_row(m, p)) {
                *s += q;
            }
        }
        let [neg, pos] = sums;
        (
            neg.into_iter().map(|s| s / cc.n_neg as f64).collect(),
            pos.into_iter().map(|s| s / cc.n_pos as f64).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub trials: usize,
    /// Size of the synthesized observed ensemble.
    pub m_observed: u32,
    /// Size of the ensemble the bands describe.
    pub m_eval: u32,
    pub confidence: f64,
    pub mode: VarianceMode,
    /// Use Bonferroni-simultaneous bands instead of pointwise ones.
    pub simultaneous: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub trials: usize,
    /// Fraction of trials whose FPR band held the fresh realized FPR.
    pub fpr_coverage: Vec<f64>,
    pub tpr_coverage: Vec<f64>,
    /// Fraction of trials whose band held the expected curve.
    pub expected_fpr_coverage: Vec<f64>,
    pub expected_tpr_coverage: Vec<f64>,
    pub expected_fpr: Vec<f64>,
    pub expected_tpr: Vec<f64>,
    /// Fraction of trials whose band held the realized curve at every
    /// threshold simultaneously (both coordinates).
    pub family_coverage: f64,
}

impl CoverageReport {
    /// Thresholds whose expected FPR lies in `[lo, hi]`.
    pub fn interior_fpr(&self, lo: f64, hi: f64) -> Vec<usize> {
        interior(&self.expected_fpr, lo, hi)
    }

    /// Thresholds whose expected TPR lies in `[lo, hi]`.
    pub fn interior_tpr(&self, lo: f64, hi: f64) -> Vec<usize> {
        interior(&self.expected_tpr, lo, hi)
    }
}

fn interior(rates: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    (0..rates.len()).filter(|&t| lo <= rates[t] && rates[t] <= hi).collect()
}

/// Runs `config.trials` synthesize-estimate-band trials and tallies coverage
/// per threshold.
pub fn coverage_experiment(truth: &CoverageTruth, config: &CoverageConfig) -> Result<CoverageReport> {
    if config.trials == 0 || config.m_observed == 0 || config.m_eval == 0 {
        return Err(Error::InvalidArgument(
            "trials, m_observed and m_eval must all be positive".into(),
        ));
    }
    if !(config.confidence > 0.0 && config.confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence {} outside (0, 1)",
            config.confidence
        )));
    }
    let nt = config.m_eval as usize + 2;
    let (exp_fpr, exp_tpr) = truth.expected_curve(config.m_eval);
    let cc = ClassCounts::from_labels(&truth.labels)?;
    let poisson = PoissonOne::new();
    let obs_dists: Vec<Binomial> = truth
        .probabilities
        .iter()
        .map(|&p| Binomial::new(config.m_observed as u64, p).expect("validated probability"))
        .collect();
    let fresh_dists: Vec<Binomial> = truth
        .probabilities
        .iter()
        .map(|&p| Binomial::new(config.m_eval as u64, p).expect("validated probability"))
        .collect();

    let tallies: Vec<Result<[Vec<u32>; 4]>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(trial as u64);
            let counts: Vec<u32> = obs_dists.iter().map(|d| d.sample(&mut rng) as u32).collect();
            let votes = VoteMatrix::new(counts, config.m_observed, truth.labels.clone())?;
            let est = estimate_roc(&threshold_profile(&votes, config.m_eval)?, votes.labels())?;
            let bands: BandedCurve = if config.simultaneous {
                simultaneous_bands(&est, config.confidence, config.mode)?
            } else {
                build_bands(&est, config.confidence, config.mode)?
            };

            let mut hist = [vec![0.0; nt], vec![0.0; nt]];
            for (d, &y) in fresh_dists.iter().zip(&truth.labels) {
                let k = d.sample(&mut rng) as usize;
                let w = match config.mode {
                    VarianceMode::Full => poisson.sample(&mut rng) as f64,
                    VarianceMode::Classifier => 1.0,
                };
                hist[y as usize][k] += w;
            }
            let mut realized = [vec![0.0; nt], vec![0.0; nt]];
            for c in 0..2 {
                let mut acc = 0.0;
                for t in (0..nt - 1).rev() {
                    acc += hist[c][t];
                    realized[c][t] = acc / cc.of(c as u8) as f64;
                }
            }

            let mut hits = [vec![0u32; nt], vec![0u32; nt], vec![0u32; nt], vec![0u32; nt]];
            for (t, p) in bands.points.iter().enumerate() {
                let inside = |v: f64, lo: f64, hi: f64| (lo <= v && v <= hi) as u32;
                hits[0][t] = inside(realized[0][t], p.fpr_lo, p.fpr_hi);
                hits[1][t] = inside(realized[1][t], p.tpr_lo, p.tpr_hi);
                hits[2][t] = inside(exp_fpr[t], p.fpr_lo, p.fpr_hi);
                hits[3][t] = inside(exp_tpr[t], p.tpr_lo, p.tpr_hi);
            }
            Ok(hits)
        })
        .collect();

    let mut totals = [vec![0u64; nt], vec![0u64; nt], vec![0u64; nt], vec![0u64; nt]];
    let mut family = 0u64;
    for hits in tallies {
        let hits = hits?;
        for (tot, h) in totals.iter_mut().zip(&hits) {
            for (a, &b) in tot.iter_mut().zip(h) {
                *a += b as u64;
            }
        }
        family += (hits[0].iter().all(|&h| h == 1) && hits[1].iter().all(|&h| h == 1)) as u64;
    }
    let n = config.trials as f64;
    let frac = |v: &Vec<u64>| v.iter().map(|&c| c as f64 / n).collect::<Vec<_>>();
    Ok(CoverageReport {
        trials: config.trials,
        fpr_coverage: frac(&totals[0]),
        tpr_coverage: frac(&totals[1]),
        expected_fpr_coverage: frac(&totals[2]),
        expected_tpr_coverage: frac(&totals[3]),
        expected_fpr: exp_fpr,
        expected_tpr: exp_tpr,
        family_coverage: family as f64 / n,
    })
}
