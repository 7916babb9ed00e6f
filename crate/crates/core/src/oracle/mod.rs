//! Brute-force Monte Carlo check of the analytic estimators.
//!
//! Each replicate redraws the ensemble votes (independently per point, or by
//! resampling whole classifier columns) and optionally gives every test point
//! a Poisson(1) multiplicity, then evaluates the realized FPR/TPR at every
//! threshold with the original class-count denominators.
//!
//! Replicate `r` uses a ChaCha8 stream seeded from `seed` with stream id `r`,
//! and replicates are reduced in fixed-size chunks combined in index order, so
//! results do not depend on the thread count.

mod coverage;
mod poisson;

pub use coverage::{coverage_experiment, CoverageConfig, CoverageReport, CoverageTruth};
pub use poisson::PoissonOne;

use std::fmt::Write as _;
use std::io::Write;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::normal_quantile;
use crate::error::{Error, Result};
use crate::roc::{trapezoid_auc, RocEstimate};
use crate::vote_model::VoteMatrix;

const CHUNK: usize = 512;

/// How ensemble votes are redrawn in each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierMode {
    /// Each point draws `m_eval` votes, positive with probability `k_j / m`.
    IndependentBinomial,
    /// `m_eval` observed classifiers are drawn with replacement and shared
    /// by every point.
    SharedColumnBootstrap,
}

impl std::str::FromStr for ClassifierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" | "independent-binomial" => Ok(Self::IndependentBinomial),
            "shared" | "shared-column-bootstrap" => Ok(Self::SharedColumnBootstrap),
            _ => Err(Error::InvalidArgument(format!(
                "unknown classifier mode {s:?} (expected independent-binomial or shared-column-bootstrap)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub replicates: usize,
    pub seed: u64,
    pub classifier_mode: ClassifierMode,
    pub poisson_resampling: bool,
    pub m_eval: u32,
    /// Also track rates normalized by the realized (Poisson-weighted) class
    /// sizes.
    pub realized_normalization: bool,
}

impl OracleConfig {
    pub fn new(replicates: usize, seed: u64, m_eval: u32) -> Self {
        Self {
            replicates,
            seed,
            classifier_mode: ClassifierMode::IndependentBinomial,
            poisson_resampling: false,
            m_eval,
            realized_normalization: false,
        }
    }

    pub fn validate(&self, votes: &VoteMatrix) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.m_eval == 0 {
            return Err(Error::InvalidArgument("m_eval must be at least 1".into()));
        }
        if self.classifier_mode == ClassifierMode::SharedColumnBootstrap && votes.full_votes().is_none() {
            return Err(Error::InvalidArgument(
                "shared-column-bootstrap mode requires the full vote matrix".into(),
            ));
        }
        Ok(())
    }
}

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two partial results (Chan et al.).
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Empirical statistics of the realized rates at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    pub t: u32,
    pub mean_fpr: f64,
    pub var_fpr: f64,
    pub se_fpr: f64,
    pub mean_tpr: f64,
    pub var_tpr: f64,
    pub se_tpr: f64,
}

fn stats_from(t: usize, fpr: &Moments, tpr: &Moments) -> ThresholdStats {
    let n = fpr.n.max(1) as f64;
    ThresholdStats {
        t: t as u32,
        mean_fpr: fpr.mean,
        var_fpr: fpr.variance(),
        se_fpr: (fpr.variance() / n).sqrt(),
        mean_tpr: tpr.mean,
        var_tpr: tpr.variance(),
        se_tpr: (tpr.variance() / tpr.n.max(1) as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub config: OracleConfig,
    pub thresholds: Vec<ThresholdStats>,
    /// Trapezoidal AUC of every replicate's realized curve, in replicate order.
    pub auc_samples: Vec<f64>,
    /// Rates normalized by realized class sizes, when requested. Replicates
    /// whose Poisson draw empties a class are skipped.
    pub realized_norm: Option<Vec<ThresholdStats>>,
}

impl OracleSummary {
    pub fn auc_moments(&self) -> Moments {
        let mut m = Moments::default();
        for &a in &self.auc_samples {
            m.push(a);
        }
        m
    }

    /// Writes per-threshold rows preceded by a `# {json}` config line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "# {}", serde_json::to_string(&self.config)?).unwrap();
        buf.push_str("t,mean_fpr,var_fpr,se_fpr,mean_tpr,var_tpr,se_tpr");
        if self.realized_norm.is_some() {
            buf.push_str(",realized_mean_fpr,realized_var_fpr,realized_mean_tpr,realized_var_tpr");
        }
        buf.push('\n');
        for (i, s) in self.thresholds.iter().enumerate() {
            write!(
                buf,
                "{},{},{},{},{},{},{}",
                s.t, s.mean_fpr, s.var_fpr, s.se_fpr, s.mean_tpr, s.var_tpr, s.se_tpr
            )
            .unwrap();
            if let Some(r) = &self.realized_norm {
                let r = &r[i];
                write!(buf, ",{},{},{},{}", r.mean_fpr, r.var_fpr, r.mean_tpr, r.var_tpr).unwrap();
            }
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}

struct ChunkResult {
    fpr: Vec<Moments>,
    tpr: Vec<Moments>,
    realized_fpr: Vec<Moments>,
    realized_tpr: Vec<Moments>,
    aucs: Vec<f64>,
}

/// Simulates the resampling procedures literally and summarizes the realized
/// rates per threshold.
pub fn run_oracle(votes: &VoteMatrix, config: &OracleConfig) -> Result<OracleSummary> {
    config.validate(votes)?;
    let nt = config.m_eval as usize + 2;
    let n_chunks = config.replicates.div_ceil(CHUNK);
    let poisson = PoissonOne::new();
    let chunks: Vec<ChunkResult> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(config.replicates);
            let mut res = ChunkResult {
                fpr: vec![Moments::default(); nt],
                tpr: vec![Moments::default(); nt],
                realized_fpr: vec![Moments::default(); nt],
                realized_tpr: vec![Moments::default(); nt],
                aucs: Vec::with_capacity(end - start),
            };
            let mut sim = Replicate::new(votes, config);
            for r in start..end {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(r as u64);
                sim.draw(votes, config, &poisson, &mut rng);
                for t in 0..nt {
                    res.fpr[t].push(sim.fpr[t]);
                    res.tpr[t].push(sim.tpr[t]);
                }
                res.aucs.push(trapezoid_auc(&sim.fpr, &sim.tpr));
                if config.realized_normalization && sim.weight[0] > 0.0 && sim.weight[1] > 0.0 {
                    for t in 0..nt {
                        res.realized_fpr[t].push(sim.fpr_raw[t] / sim.weight[0]);
                        res.realized_tpr[t].push(sim.tpr_raw[t] / sim.weight[1]);
                    }
                }
            }
            res
        })
        .collect();

    let mut fpr = vec![Moments::default(); nt];
    let mut tpr = vec![Moments::default(); nt];
    let mut rfpr = vec![Moments::default(); nt];
    let mut rtpr = vec![Moments::default(); nt];
    let mut auc_samples = Vec::with_capacity(config.replicates);
    for ch in &chunks {
        for t in 0..nt {
            fpr[t].merge(&ch.fpr[t]);
            tpr[t].merge(&ch.tpr[t]);
            rfpr[t].merge(&ch.realized_fpr[t]);
            rtpr[t].merge(&ch.realized_tpr[t]);
        }
        auc_samples.extend_from_slice(&ch.aucs);
    }
    let thresholds = (0..nt).map(|t| stats_from(t, &fpr[t], &tpr[t])).collect();
    let realized_norm = config
        .realized_normalization
        .then(|| (0..nt).map(|t| stats_from(t, &rfpr[t], &rtpr[t])).collect());
    Ok(OracleSummary {
        config: *config,
        thresholds,
        auc_samples,
        realized_norm,
    })
}

/// Scratch buffers for one replicate.
struct Replicate {
    uniform: Uniform<u32>,
    columns: Vec<usize>,
    hist: [Vec<f64>; 2],
    fpr: Vec<f64>,
    tpr: Vec<f64>,
    fpr_raw: Vec<f64>,
    tpr_raw: Vec<f64>,
    weight: [f64; 2],
}

impl Replicate {
    fn new(votes: &VoteMatrix, config: &OracleConfig) -> Self {
        let nt = config.m_eval as usize + 2;
        let m_obs = votes.m_observed();
        Self {
            uniform: Uniform::new(0, m_obs).expect("m_observed >= 1"),
            columns: vec![0; config.m_eval as usize],
            hist: [vec![0.0; nt], vec![0.0; nt]],
            fpr: vec![0.0; nt],
            tpr: vec![0.0; nt],
            fpr_raw: vec![0.0; nt],
            tpr_raw: vec![0.0; nt],
            weight: [0.0; 2],
        }
    }

    fn draw<R: Rng>(&mut self, votes: &VoteMatrix, config: &OracleConfig, poisson: &PoissonOne, rng: &mut R) {
        let m_obs = votes.m_observed();
        let m_eval = config.m_eval;
        let uniform = self.uniform;
        for h in &mut self.hist {
            h.fill(0.0);
        }
        self.weight = [0.0; 2];

        if config.classifier_mode == ClassifierMode::SharedColumnBootstrap {
            for c in self.columns.iter_mut() {
                *c = uniform.sample(rng) as usize;
            }
        }
        for (j, (&k, &y)) in votes.counts().iter().zip(votes.labels()).enumerate() {
            let drawn = match config.classifier_mode {
                ClassifierMode::IndependentBinomial => {
                    if k == 0 {
                        0
                    } else if k == m_obs {
                        m_eval
                    } else {
                        (0..m_eval).filter(|_| uniform.sample(rng) < k).count() as u32
                    }
                }
                ClassifierMode::SharedColumnBootstrap => {
                    let row = votes.full_row(j).expect("validated");
                    self.columns.iter().map(|&c| row[c] as u32).sum()
                }
            };
            let w = if config.poisson_resampling {
                poisson.sample(rng) as f64
            } else {
                1.0
            };
            self.hist[y as usize][drawn as usize] += w;
            self.weight[y as usize] += w;
        }

        let cc = votes.class_counts();
        let (nn, np) = (cc.n_neg as f64, cc.n_pos as f64);
        let nt = m_eval as usize + 2;
        let (mut sn, mut sp) = (0.0, 0.0);
        self.fpr_raw[nt - 1] = 0.0;
        self.tpr_raw[nt - 1] = 0.0;
        for t in (0..nt - 1).rev() {
            sn += self.hist[0][t];
            sp += self.hist[1][t];
            self.fpr_raw[t] = sn;
            self.tpr_raw[t] = sp;
        }
        for t in 0..nt {
            self.fpr[t] = self.fpr_raw[t] / nn;
            self.tpr[t] = self.tpr_raw[t] / np;
        }
    }
}

/// Upper quantile of the chi-square distribution (Wilson-Hilferty; accurate
/// to a few parts in 1e4 already at 30 degrees of freedom).
pub fn chi_square_quantile(p: f64, df: f64) -> f64 {
    let z = normal_quantile(p);
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Acceptance thresholds for comparing the oracle with the analytic estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleTolerance {
    /// Analytic mean must lie within this many empirical standard errors.
    pub mean_se: f64,
    /// Relative variance error accepted outright.
    pub var_rel: f64,
    /// Two-sided level of the chi-square interval for the sample variance.
    pub var_chi2_level: f64,
    /// Thresholds with analytic variance at or below this are not checked.
    pub var_floor: f64,
    /// Fraction of thresholds that must pass the mean check.
    pub min_mean_pass: f64,
    /// Fraction of checked thresholds that must pass the variance check.
    pub min_var_pass: f64,
}

impl Default for OracleTolerance {
    fn default() -> Self {
        Self {
            mean_se: 4.0,
            var_rel: 0.10,
            var_chi2_level: 0.99,
            var_floor: 1e-8,
            min_mean_pass: 0.99,
            min_var_pass: 0.95,
        }
    }
}

/// Absolute slack on mean comparisons at thresholds where the replicates are
/// all identical.
const MEAN_ABS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdVerdict {
    pub t: u32,
    pub analytic_fpr: f64,
    pub empirical_fpr: f64,
    pub analytic_tpr: f64,
    pub empirical_tpr: f64,
    pub mean_pass: bool,
    pub analytic_var_fpr: f64,
    pub empirical_var_fpr: f64,
    pub analytic_var_tpr: f64,
    pub empirical_var_tpr: f64,
    /// `None` when neither coordinate's variance was checked.
    pub var_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub verdicts: Vec<ThresholdVerdict>,
    pub mean_pass_fraction: f64,
    /// Thresholds where a coordinate was identical in every replicate yet
    /// differed from the analytic mean, so the zero-count rule decided it.
    pub zero_count_thresholds: usize,
    pub var_checked: usize,
    pub var_pass_fraction: f64,
    pub passed: bool,
}

/// Two-sided standard-normal tail probability `Pr[|Z| > k]`.
fn two_sided_tail(k: f64) -> f64 {
    let (mut lo, mut hi) = (-745.0f64, 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_quantile(1.0 - 0.5 * mid.exp()) > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.exp()
}

struct MeanCheck {
    pass: bool,
    zero_count: bool,
}

/// Compares an analytic mean with the oracle mean of a rate over `events`
/// point-replicates. With a positive empirical standard error this is a
/// `mean_se`-sigma test. When every replicate gave the same rate the standard
/// error is zero, and the constant is accepted if observing no deviating
/// point-event is at least as likely as a `mean_se`-sigma deviation:
/// `exp(-|a - e| * events) >= Pr[|Z| > mean_se]`.
fn mean_consistent(analytic: f64, empirical: f64, se: f64, events: f64, tol: &OracleTolerance) -> MeanCheck {
    let diff = (analytic - empirical).abs();
    if diff <= MEAN_ABS_SLACK || se > 0.0 {
        return MeanCheck {
            pass: diff <= tol.mean_se * se + MEAN_ABS_SLACK,
            zero_count: false,
        };
    }
    MeanCheck {
        pass: diff * events <= -two_sided_tail(tol.mean_se).ln(),
        zero_count: true,
    }
}

/// Whether a sample variance from `n` replicates is consistent with
/// `analytic`: within `rel` relative error or inside the chi-square interval.
pub fn variance_consistent(analytic: f64, empirical: f64, n: usize, tol: &OracleTolerance) -> bool {
    if (empirical - analytic).abs() <= tol.var_rel * analytic {
        return true;
    }
    let df = (n.max(2) - 1) as f64;
    let alpha = 1.0 - tol.var_chi2_level;
    let lo = empirical * df / chi_square_quantile(1.0 - alpha / 2.0, df);
    let hi = empirical * df / chi_square_quantile(alpha / 2.0, df);
    lo <= analytic && analytic <= hi
}

/// Compares oracle output against the analytic estimate for the same
/// `m_eval`. Variances are checked only in independent-binomial mode, where
/// the analytic independence assumption holds by construction.
pub fn compare_with_analytic(
    summary: &OracleSummary,
    estimate: &RocEstimate,
    tol: &OracleTolerance,
) -> Result<OracleReport> {
    if estimate.n_thresholds() != summary.thresholds.len() {
        return Err(Error::LengthMismatch {
            what: "oracle thresholds",
            expected: estimate.n_thresholds(),
            found: summary.thresholds.len(),
        });
    }
    let mode = if summary.config.poisson_resampling {
        crate::roc::VarianceMode::Full
    } else {
        crate::roc::VarianceMode::Classifier
    };
    let check_var = summary.config.classifier_mode == ClassifierMode::IndependentBinomial;
    let n = summary.config.replicates;
    let (avf, avt) = (estimate.var_fpr(mode), estimate.var_tpr(mode));
    let mut verdicts = Vec::with_capacity(estimate.n_thresholds());
    let (mut mean_ok, mut var_ok, mut var_checked, mut zero_count) = (0usize, 0usize, 0usize, 0usize);
    let nn = estimate.class_counts.n_neg as f64;
    let np = estimate.class_counts.n_pos as f64;
    for (t, s) in summary.thresholds.iter().enumerate() {
        let (af, at) = (estimate.mean_fpr[t], estimate.mean_tpr[t]);
        let fpr_check = mean_consistent(af, s.mean_fpr, s.se_fpr, n as f64 * nn, tol);
        let tpr_check = mean_consistent(at, s.mean_tpr, s.se_tpr, n as f64 * np, tol);
        let mean_pass = fpr_check.pass && tpr_check.pass;
        mean_ok += mean_pass as usize;
        zero_count += (fpr_check.zero_count || tpr_check.zero_count) as usize;
        let mut var_pass = None;
        if check_var {
            for (a, e) in [(avf[t], s.var_fpr), (avt[t], s.var_tpr)] {
                if a > tol.var_floor {
                    var_checked += 1;
                    let ok = variance_consistent(a, e, n, tol);
                    var_ok += ok as usize;
                    var_pass = Some(var_pass.unwrap_or(true) && ok);
                }
            }
        }
        verdicts.push(ThresholdVerdict {
            t: t as u32,
            analytic_fpr: af,
            empirical_fpr: s.mean_fpr,
            analytic_tpr: at,
            empirical_tpr: s.mean_tpr,
            mean_pass,
            analytic_var_fpr: avf[t],
            empirical_var_fpr: s.var_fpr,
            analytic_var_tpr: avt[t],
            empirical_var_tpr: s.var_tpr,
            var_pass,
        });
    }
    let mean_pass_fraction = mean_ok as f64 / verdicts.len() as f64;
    let var_pass_fraction = if var_checked == 0 {
        1.0
    } else {
        var_ok as f64 / var_checked as f64
    };
    Ok(OracleReport {
        passed: mean_pass_fraction >= tol.min_mean_pass && var_pass_fraction >= tol.min_var_pass,
        verdicts,
        mean_pass_fraction,
        zero_count_thresholds: zero_count,
        var_checked,
        var_pass_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binomial::threshold_profile;
    use crate::roc::estimate_roc;

    #[test]
    fn degenerate_votes_reproduce_analytic_curve() {
        let vm = VoteMatrix::new(vec![0, 5, 5, 0, 5, 0], 5, vec![0, 0, 1, 1, 1, 0]).unwrap();
        let est = estimate_roc(&threshold_profile(&vm, 5).unwrap(), vm.labels()).unwrap();
        let sum = run_oracle(&vm, &OracleConfig::new(1, 3, 5)).unwrap();
        for (t, s) in sum.thresholds.iter().enumerate() {
            assert_eq!(s.mean_fpr, est.mean_fpr[t]);
            assert_eq!(s.mean_tpr, est.mean_tpr[t]);
        }
    }

    #[test]
    fn zero_count_rule() {
        let tol = OracleTolerance::default();
        let alpha = two_sided_tail(4.0);
        assert!((alpha - 6.334e-5).abs() < 1e-7, "{alpha}");
        // analytic 1e-7 over 1e6 point-events: expect 0.1 events, saw none
        assert!(mean_consistent(1e-7, 0.0, 0.0, 1e6, &tol).pass);
        assert!(mean_consistent(1e-7, 0.0, 0.0, 1e6, &tol).zero_count);
        // expect 20 events, saw none
        assert!(!mean_consistent(2e-5, 0.0, 0.0, 1e6, &tol).pass);
        assert!(!mean_consistent(0.5, 0.4, 0.01, 1e6, &tol).zero_count);
    }

    #[test]
    fn seed_determinism() {
        let vm = VoteMatrix::new(vec![0, 1, 2, 3, 4, 2, 1], 4, vec![0, 0, 1, 1, 1, 0, 1]).unwrap();
        let mut cfg = OracleConfig::new(1500, 42, 6);
        cfg.poisson_resampling = true;
        cfg.realized_normalization = true;
        let a = run_oracle(&vm, &cfg).unwrap();
        let b = run_oracle(&vm, &cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 43;
        let c = run_oracle(&vm, &cfg).unwrap();
        assert_ne!(a.auc_samples, c.auc_samples);
    }

    #[test]
    fn shared_mode_requires_full_votes() {
        let vm = VoteMatrix::new(vec![0, 1], 2, vec![0, 1]).unwrap();
        let mut cfg = OracleConfig::new(10, 1, 2);
        cfg.classifier_mode = ClassifierMode::SharedColumnBootstrap;
        assert!(run_oracle(&vm, &cfg).is_err());
        cfg.classifier_mode = ClassifierMode::IndependentBinomial;
        cfg.replicates = 0;
        assert!(run_oracle(&vm, &cfg).is_err());
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.n, all.n);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-9);
    }

    #[test]
    fn chi_square_quantile_is_close() {
        // reference values: chi2(0.995, 100) = 140.169, chi2(0.005, 100) = 67.328
        assert!((chi_square_quantile(0.995, 100.0) - 140.169).abs() < 0.05);
        assert!((chi_square_quantile(0.005, 100.0) - 67.328).abs() < 0.05);
    }
}
