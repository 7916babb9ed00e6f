//! Mean ROC curves and their variances under classifier and Poisson
//! test-set resampling.
//!
//! For threshold `t` the mean false positive rate is `sum q_j(t) / n_neg` over
//! negatives. Redrawing the ensemble contributes `q(1 - q)` per point; also
//! redrawing the test set with Poisson(1) multiplicities contributes
//! `q + q(1 - q)`. Contributions are summed over points as independent and
//! normalized by the original class counts.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bands::normal_quantile;
use crate::binomial::{threshold_profile, ThresholdProfile};
use crate::error::{Error, Result};
use crate::vote_model::{ClassCounts, VoteMatrix};

/// Which resampling the variance accounts for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    /// Redraw the weak classifiers only.
    Classifier,
    /// Redraw the weak classifiers and Poisson-resample the test set.
    Full,
}

impl std::str::FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classifier" => Ok(Self::Classifier),
            "full" => Ok(Self::Full),
            _ => Err(Error::InvalidArgument(format!(
                "unknown variance mode {s:?} (expected classifier or full)"
            ))),
        }
    }
}

impl std::fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Classifier => "classifier",
            Self::Full => "full",
        })
    }
}

/// Per-point variance contributions for a point with `Pr[positive] = q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTerm {
    pub q: f64,
    pub classifier_only: f64,
    pub with_poisson: f64,
}

/// Variance contributions of one Bernoulli(`q`) vote indicator `b`, alone and
/// multiplied by an independent Poisson(1) count `c`:
/// `Var(c b) = E(c)^2 Var(b) + E(b)^2 Var(c) + Var(b) Var(c) = q + q(1 - q)`.
pub fn variance_term(q: f64) -> Result<VarianceTerm> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("probability {q} outside [0, 1]")));
    }
    let classifier_only = q * (1.0 - q);
    Ok(VarianceTerm {
        q,
        classifier_only,
        with_poisson: q + classifier_only,
    })
}

/// Mean FPR/TPR and their variances at every threshold `t = 0..=m_eval+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocEstimate {
    pub m_eval: u32,
    pub class_counts: ClassCounts,
    pub mean_fpr: Vec<f64>,
    pub mean_tpr: Vec<f64>,
    pub var_fpr_classifier: Vec<f64>,
    pub var_tpr_classifier: Vec<f64>,
    pub var_fpr_full: Vec<f64>,
    pub var_tpr_full: Vec<f64>,
    /// First-order variance of the AUC under classifier resampling.
    pub auc_var_classifier: f64,
    /// First-order variance of the AUC under classifier and test-set resampling.
    pub auc_var_full: f64,
}

impl RocEstimate {
    pub fn n_thresholds(&self) -> usize {
        self.mean_fpr.len()
    }

    pub fn thresholds(&self) -> impl Iterator<Item = u32> {
        0..self.n_thresholds() as u32
    }

    pub fn var_fpr(&self, mode: VarianceMode) -> &[f64] {
        match mode {
            VarianceMode::Classifier => &self.var_fpr_classifier,
            VarianceMode::Full => &self.var_fpr_full,
        }
    }

    pub fn var_tpr(&self, mode: VarianceMode) -> &[f64] {
        match mode {
            VarianceMode::Classifier => &self.var_tpr_classifier,
            VarianceMode::Full => &self.var_tpr_full,
        }
    }

    pub fn auc_var(&self, mode: VarianceMode) -> f64 {
        match mode {
            VarianceMode::Classifier => self.auc_var_classifier,
            VarianceMode::Full => self.auc_var_full,
        }
    }

    /// Writes the estimate as CSV, one row per threshold, with a `#` line
    /// carrying the class counts and AUC variances.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(
            buf,
            "# n_neg={},n_pos={},m_eval={},auc_var_classifier={},auc_var_full={}",
            self.class_counts.n_neg, self.class_counts.n_pos, self.m_eval, self.auc_var_classifier, self.auc_var_full
        )
        .unwrap();
        buf.push_str(ESTIMATE_HEADER);
        buf.push('\n');
        for t in 0..self.n_thresholds() {
            writeln!(
                buf,
                "{t},{},{},{},{},{},{}",
                self.mean_fpr[t],
                self.mean_tpr[t],
                self.var_fpr_classifier[t],
                self.var_tpr_classifier[t],
                self.var_fpr_full[t],
                self.var_tpr_full[t]
            )
            .unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    /// Parses the output of [`write_csv`](Self::write_csv).
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, meta) = lines
            .next()
            .ok_or_else(|| Error::Empty("ROC estimate file is empty".into()))?;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| Error::MissingHeader("expected `# n_neg=...` metadata line".into()))?;
        let mut n_neg = None;
        let mut n_pos = None;
        let mut m_eval = None;
        let mut auc_c = None;
        let mut auc_f = None;
        for kv in meta.split(',') {
            let (k, v) = kv.trim().split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("bad metadata {kv:?}"),
            })?;
            let bad = |_| Error::Parse {
                line: 1,
                msg: format!("bad value for {k}"),
            };
            match k {
                "n_neg" => n_neg = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "n_pos" => n_pos = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "m_eval" => m_eval = Some(v.parse::<u32>().map_err(|e| bad(e.to_string()))?),
                "auc_var_classifier" => auc_c = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "auc_var_full" => auc_f = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                _ => {}
            }
        }
        let missing = |k: &str| Error::MissingHeader(format!("metadata lacks {k}"));
        let class_counts = ClassCounts {
            n_neg: n_neg.ok_or_else(|| missing("n_neg"))?,
            n_pos: n_pos.ok_or_else(|| missing("n_pos"))?,
        };
        let m_eval = m_eval.ok_or_else(|| missing("m_eval"))?;
        match lines.next() {
            Some((_, h)) if h.trim() == ESTIMATE_HEADER => {}
            _ => return Err(Error::MissingHeader(format!("expected `{ESTIMATE_HEADER}`"))),
        }
        let n = m_eval as usize + 2;
        let mut cols: [Vec<f64>; 6] = Default::default();
        for (i, l) in lines {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != 7 {
                return Err(Error::RaggedRow {
                    line: i + 1,
                    expected: 7,
                    found: fields.len(),
                });
            }
            for (c, f) in cols.iter_mut().zip(&fields[1..]) {
                c.push(f.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("invalid number {f:?}"),
                })?);
            }
        }
        if cols[0].len() != n {
            return Err(Error::LengthMismatch {
                what: "threshold rows",
                expected: n,
                found: cols[0].len(),
            });
        }
        let [mean_fpr, mean_tpr, vfc, vtc, vff, vtf] = cols;
        Ok(Self {
            m_eval,
            class_counts,
            mean_fpr,
            mean_tpr,
            var_fpr_classifier: vfc,
            var_tpr_classifier: vtc,
            var_fpr_full: vff,
            var_tpr_full: vtf,
            auc_var_classifier: auc_c.unwrap_or(f64::NAN),
            auc_var_full: auc_f.unwrap_or(f64::NAN),
        })
    }
}

/// Column header of the ROC estimate CSV.
pub const ESTIMATE_HEADER: &str = "t,mean_fpr,mean_tpr,var_fpr_classifier,var_tpr_classifier,var_fpr_full,var_tpr_full";

/// Computes the mean ROC curve and both variance families from a profile.
pub fn estimate_roc(profile: &ThresholdProfile, labels: &[u8]) -> Result<RocEstimate> {
    if labels.len() != profile.n_points() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: profile.n_points(),
            found: labels.len(),
        });
    }
    let class_counts = ClassCounts::from_labels(labels)?;
    let n_rows = profile.distinct_counts().len();
    let mut per_row = vec![[0usize; 2]; n_rows];
    for (j, &y) in labels.iter().enumerate() {
        per_row[profile.row_index(j)][y as usize] += 1;
    }

    let nt = profile.n_thresholds();
    let nn = class_counts.n_neg as f64;
    let np = class_counts.n_pos as f64;
    let mut est = RocEstimate {
        m_eval: profile.m_eval(),
        class_counts,
        mean_fpr: vec![0.0; nt],
        mean_tpr: vec![0.0; nt],
        var_fpr_classifier: vec![0.0; nt],
        var_tpr_classifier: vec![0.0; nt],
        var_fpr_full: vec![0.0; nt],
        var_tpr_full: vec![0.0; nt],
        auc_var_classifier: 0.0,
        auc_var_full: 0.0,
    };
    for t in 0..nt {
        let mut sum_q = [0.0; 2];
        let mut sum_v = [0.0; 2];
        for (r, counts) in per_row.iter().enumerate() {
            let q = profile.distinct_row(r)[t];
            let v = q * (1.0 - q);
            for c in 0..2 {
                if counts[c] > 0 {
                    let w = counts[c] as f64;
                    sum_q[c] += w * q;
                    sum_v[c] += w * v;
                }
            }
        }
        est.mean_fpr[t] = sum_q[0] / nn;
        est.mean_tpr[t] = sum_q[1] / np;
        est.var_fpr_classifier[t] = sum_v[0] / (nn * nn);
        est.var_tpr_classifier[t] = sum_v[1] / (np * np);
        est.var_fpr_full[t] = (sum_q[0] + sum_v[0]) / (nn * nn);
        est.var_tpr_full[t] = (sum_q[1] + sum_v[1]) / (np * np);
    }

    // AUC = sum over (neg, pos) pairs of Pr[K_pos > K_neg] + Pr[K_pos = K_neg] / 2.
    // Linearizing in each point's own vote count gives a per-point function of
    // its count; its variance under the point's count distribution (and times a
    // Poisson(1) multiplicity) is summed over points.
    let m = profile.m_eval() as usize;
    let mut auc_var_c = 0.0;
    let mut auc_var_f = 0.0;
    for (r, counts) in per_row.iter().enumerate() {
        let row = profile.distinct_row(r);
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let contrib = |k: usize| {
                if c == 0 {
                    0.5 * (est.mean_tpr[k] + est.mean_tpr[k + 1]) / nn
                } else {
                    (1.0 - 0.5 * (est.mean_fpr[k] + est.mean_fpr[k + 1])) / np
                }
            };
            let mut mean = 0.0;
            for k in 0..=m {
                mean += (row[k] - row[k + 1]) * contrib(k);
            }
            let mut var = 0.0;
            for k in 0..=m {
                let d = contrib(k) - mean;
                var += (row[k] - row[k + 1]) * d * d;
            }
            auc_var_c += count as f64 * var;
            auc_var_f += count as f64 * (2.0 * var + mean * mean);
        }
    }
    est.auc_var_classifier = auc_var_c;
    est.auc_var_full = auc_var_f;
    Ok(est)
}

/// Estimates directly from a vote matrix; `m_eval` defaults to the observed
/// ensemble size.
pub fn estimate_votes(votes: &VoteMatrix, m_eval: Option<u32>) -> Result<RocEstimate> {
    let m = m_eval.unwrap_or(votes.m_observed());
    estimate_roc(&threshold_profile(votes, m)?, votes.labels())
}

/// Trapezoidal area under the mean curve, swept from `t = m_eval+1` to `t = 0`.
pub fn auc(estimate: &RocEstimate) -> f64 {
    trapezoid_auc(&estimate.mean_fpr, &estimate.mean_tpr)
}

/// Trapezoidal area for curves indexed by threshold (rates non-increasing in
/// the index).
pub fn trapezoid_auc(fpr: &[f64], tpr: &[f64]) -> f64 {
    let mut area = 0.0;
    for t in (1..fpr.len()).rev() {
        area += (fpr[t - 1] - fpr[t]) * (tpr[t - 1] + tpr[t]) * 0.5;
    }
    area
}

/// Mean TPR and its standard deviation at FPR `x`, linearly interpolated
/// along the curve. On vertical segments the upper end is used.
pub fn interpolate_at(estimate: &RocEstimate, mode: VarianceMode, x: f64) -> Option<(f64, f64)> {
    let fpr = &estimate.mean_fpr;
    let tpr = &estimate.mean_tpr;
    let var = estimate.var_tpr(mode);
    let mut found = None;
    for t in (1..fpr.len()).rev() {
        let (f0, f1) = (fpr[t], fpr[t - 1]);
        if f0 <= x && x <= f1 {
            let (s0, s1) = (var[t].sqrt(), var[t - 1].sqrt());
            found = Some(if f1 > f0 {
                let w = (x - f0) / (f1 - f0);
                (tpr[t] + w * (tpr[t - 1] - tpr[t]), s0 + w * (s1 - s0))
            } else {
                (tpr[t - 1], s1)
            });
        }
    }
    found
}

/// One grid point of a curve comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparePoint {
    pub fpr: f64,
    pub tpr_a: f64,
    pub tpr_b: f64,
    /// `tpr_b - tpr_a`.
    pub delta: f64,
    pub se_a: f64,
    pub se_b: f64,
    /// `sqrt(se_a^2 + se_b^2)`, treating the curves as independent.
    pub se_delta: f64,
}

/// Two curves aligned on a common FPR grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveComparison {
    pub mode: VarianceMode,
    pub points: Vec<ComparePoint>,
    pub auc_a: f64,
    pub auc_b: f64,
    pub auc_delta: f64,
    pub auc_se_delta: f64,
}

/// Aligns two curves on the union of their FPR values and reports TPR deltas
/// with root-sum-square standard errors.
///
/// Standard deviations are interpolated linearly between thresholds, which
/// bounds the interpolated variance from above for correlated neighbours.
pub fn compare_curves(a: &RocEstimate, b: &RocEstimate, mode: VarianceMode) -> Result<CurveComparison> {
    if a.class_counts != b.class_counts {
        return Err(Error::Incompatible(format!(
            "class counts differ: {:?} vs {:?}",
            a.class_counts, b.class_counts
        )));
    }
    let range = |e: &RocEstimate| {
        e.mean_fpr
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (lo_a, hi_a) = range(a);
    let (lo_b, hi_b) = range(b);
    let (lo, hi) = (lo_a.max(lo_b), hi_a.min(hi_b));
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::Incompatible("FPR ranges do not overlap".into()));
    }
    let mut grid: Vec<f64> = a
        .mean_fpr
        .iter()
        .chain(&b.mean_fpr)
        .copied()
        .filter(|&x| lo <= x && x <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut points = Vec::with_capacity(grid.len());
    for x in grid {
        let (Some((tpr_a, se_a)), Some((tpr_b, se_b))) = (interpolate_at(a, mode, x), interpolate_at(b, mode, x))
        else {
            continue;
        };
        points.push(ComparePoint {
            fpr: x,
            tpr_a,
            tpr_b,
            delta: tpr_b - tpr_a,
            se_a,
            se_b,
            se_delta: (se_a * se_a + se_b * se_b).sqrt(),
        });
    }
    let auc_a = auc(a);
    let auc_b = auc(b);
    Ok(CurveComparison {
        mode,
        points,
        auc_a,
        auc_b,
        auc_delta: auc_b - auc_a,
        auc_se_delta: (a.auc_var(mode) + b.auc_var(mode)).sqrt(),
    })
}

impl CurveComparison {
    /// Writes the overlay CSV with per-curve bands at the given confidence.
    pub fn write_csv<W: Write>(&self, mut out: W, confidence: f64, log_floor: f64) -> Result<()> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence {confidence} outside (0, 1)"
            )));
        }
        let z = normal_quantile(0.5 + confidence / 2.0);
        let mut buf = String::new();
        buf.push_str("fpr,log10_fpr,tpr_a,tpr_a_lo,tpr_a_hi,tpr_b,tpr_b_lo,tpr_b_hi,delta,se_a,se_b,se_delta\n");
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        for p in &self.points {
            writeln!(
                buf,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                p.fpr,
                p.fpr.max(log_floor).log10(),
                p.tpr_a,
                clamp(p.tpr_a - z * p.se_a),
                clamp(p.tpr_a + z * p.se_a),
                p.tpr_b,
                clamp(p.tpr_b - z * p.se_b),
                clamp(p.tpr_b + z * p.se_b),
                p.delta,
                p.se_a,
                p.se_b,
                p.se_delta
            )
            .unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binomial::threshold_profile;
    use crate::vote_model::VoteMatrix;

    fn estimate(counts: Vec<u32>, m: u32, labels: Vec<u8>, m_eval: u32) -> RocEstimate {
        let vm = VoteMatrix::new(counts, m, labels).unwrap();
        estimate_roc(&threshold_profile(&vm, m_eval).unwrap(), vm.labels()).unwrap()
    }

    #[test]
    fn variance_term_examples() {
        let v = variance_term(0.0).unwrap();
        assert_eq!((v.classifier_only, v.with_poisson), (0.0, 0.0));
        let v = variance_term(1.0).unwrap();
        assert_eq!((v.classifier_only, v.with_poisson), (0.0, 1.0));
        let v = variance_term(0.5).unwrap();
        assert_eq!((v.classifier_only, v.with_poisson), (0.25, 0.75));
        assert!(variance_term(1.01).is_err());
        assert!(variance_term(-0.01).is_err());
    }

    #[test]
    fn two_negatives_one_positive() {
        let est = estimate(vec![0, 4, 4], 4, vec![0, 0, 1], 4);
        assert_eq!(est.mean_fpr[2], 0.5);
        assert_eq!(est.mean_tpr[2], 1.0);
        assert_eq!(est.var_fpr_classifier[2], 0.0);
        assert_eq!(est.var_fpr_full[2], 0.25);
    }

    #[test]
    fn threshold_zero_keeps_only_poisson_variance() {
        let est = estimate(vec![1, 2, 3, 0, 4], 4, vec![0, 0, 1, 1, 0], 4);
        assert_eq!(est.mean_fpr[0], 1.0);
        assert_eq!(est.mean_tpr[0], 1.0);
        assert_eq!(est.var_fpr_classifier[0], 0.0);
        assert_eq!(est.var_tpr_classifier[0], 0.0);
        assert!((est.var_fpr_full[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((est.var_tpr_full[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_zero_votes() {
        let est = estimate(vec![0, 0, 0], 5, vec![0, 1, 1], 5);
        for t in 1..est.n_thresholds() {
            assert_eq!(est.mean_fpr[t], 0.0);
            assert_eq!(est.mean_tpr[t], 0.0);
            assert_eq!(est.var_fpr_full[t], 0.0);
            assert_eq!(est.var_tpr_full[t], 0.0);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let vm = VoteMatrix::new(vec![0, 1], 1, vec![0, 1]).unwrap();
        let prof = threshold_profile(&vm, 1).unwrap();
        assert!(matches!(
            estimate_roc(&prof, &[0, 1, 1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn auc_perfect_and_diagonal() {
        let est = estimate(vec![0, 0, 6, 6], 6, vec![0, 0, 1, 1], 6);
        assert_eq!(auc(&est), 1.0);
        let est = estimate(vec![3, 3, 3, 3], 6, vec![0, 1, 0, 1], 6);
        assert!((auc(&est) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auc_two_negative_example_by_hand() {
        // points (t=5..0): (0,0) (0.5,1) (0.5,1) (0.5,1) (0.5,1) (1,1)
        // trapezoids: 0.5 * (0 + 1) / 2 + 0.5 * (1 + 1) / 2 = 0.75
        let est = estimate(vec![0, 4, 4], 4, vec![0, 0, 1], 4);
        assert_eq!(auc(&est), 0.75);
    }

    #[test]
    fn self_comparison_is_zero() {
        let est = estimate(vec![0, 1, 2, 3, 4, 2], 4, vec![0, 0, 1, 1, 1, 0], 4);
        let cmp = compare_curves(&est, &est, VarianceMode::Full).unwrap();
        assert!(!cmp.points.is_empty());
        assert!(cmp.points.iter().all(|p| p.delta == 0.0));
        assert_eq!(cmp.auc_delta, 0.0);
    }

    #[test]
    fn dominating_positives_give_nonnegative_delta() {
        let a = estimate(vec![0, 1, 2, 1, 2, 2], 4, vec![0, 0, 0, 1, 1, 1], 4);
        let b = estimate(vec![0, 1, 2, 2, 3, 4], 4, vec![0, 0, 0, 1, 1, 1], 4);
        let cmp = compare_curves(&a, &b, VarianceMode::Classifier).unwrap();
        assert!(cmp.points.iter().all(|p| p.delta >= 0.0));
        assert!(cmp.auc_delta > 0.0);
    }

    #[test]
    fn class_count_mismatch_is_incompatible() {
        let a = estimate(vec![0, 1, 2], 4, vec![0, 0, 1], 4);
        let b = estimate(vec![0, 1, 2], 4, vec![0, 1, 1], 4);
        assert!(matches!(
            compare_curves(&a, &b, VarianceMode::Full),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn estimate_csv_round_trip() {
        let est = estimate(vec![0, 1, 2, 3, 7, 5], 7, vec![0, 0, 1, 1, 1, 0], 9);
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let back = RocEstimate::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, est);
    }
}
