//! Empirical coverage of the bands when the true vote probabilities are known.
//!
//! Run with `cargo run --release --example coverage`.

use ensemble_roc::oracle::{coverage_experiment, CoverageConfig, CoverageTruth};
use ensemble_roc::VarianceMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

fn main() -> ensemble_roc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (neg, pos) = (Beta::new(2.0, 5.0).unwrap(), Beta::new(5.0, 2.0).unwrap());
    let labels: Vec<u8> = (0..400).map(|j| (j % 2) as u8).collect();
    let probabilities = labels
        .iter()
        .map(|&y| {
            if y == 0 {
                neg.sample(&mut rng)
            } else {
                pos.sample(&mut rng)
            }
        })
        .collect();
    let truth = CoverageTruth::new(probabilities, labels)?;

    for (mode, simultaneous) in [
        (VarianceMode::Classifier, false),
        (VarianceMode::Full, false),
        (VarianceMode::Classifier, true),
    ] {
        let config = CoverageConfig {
            trials: 300,
            m_observed: 1024,
            m_eval: 32,
            confidence: 0.95,
            mode,
            simultaneous,
            seed: 1,
        };
        let report = coverage_experiment(&truth, &config)?;
        let cells: Vec<f64> = report
            .interior_fpr(0.05, 0.95)
            .into_iter()
            .map(|t| report.fpr_coverage[t])
            .chain(
                report
                    .interior_tpr(0.05, 0.95)
                    .into_iter()
                    .map(|t| report.tpr_coverage[t]),
            )
            .collect();
        let mean = cells.iter().sum::<f64>() / cells.len() as f64;
        let min = cells.iter().copied().fold(1.0, f64::min);
        println!(
            "{mode:10} simultaneous={simultaneous:5}: pointwise mean {mean:.3} min {min:.3}, whole-curve {:.3}",
            report.family_coverage
        );
    }
    Ok(())
}
