//! Pointwise and Bonferroni-simultaneous confidence bands around the mean ROC
//! curve, in raw and log10-FPR coordinates.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roc::{RocEstimate, VarianceMode};

/// Standard normal quantile `Phi^{-1}(p)` (Wichura's AS241, about 1e-16
/// relative accuracy).
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r + 67265.770_927_008_700) * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_545_4 + 28729.085_735_721_943) * r + 39307.895_800_092_710) * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414_1e-4 + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_61) * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_344_9e-4) * r + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_05)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4) * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_445_9e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_81)
                * r
                + 0.599_832_206_555_887_94)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Two-sided standard-normal critical value for a confidence level.
pub fn two_sided_z(confidence: f64) -> f64 {
    normal_quantile(0.5 + confidence / 2.0)
}

/// One threshold of a banded curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub t: u32,
    pub mean_fpr: f64,
    pub mean_tpr: f64,
    pub fpr_lo: f64,
    pub fpr_hi: f64,
    pub tpr_lo: f64,
    pub tpr_hi: f64,
}

/// Mean ROC curve with lower/upper band polylines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandedCurve {
    pub points: Vec<BandPoint>,
    pub confidence: f64,
    pub mode: VarianceMode,
    /// Normal quantile used for the half-widths.
    pub z: f64,
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "confidence {confidence} outside (0, 1)"
        )))
    }
}

fn band_with_z(estimate: &RocEstimate, confidence: f64, mode: VarianceMode, z: f64) -> BandedCurve {
    let vf = estimate.var_fpr(mode);
    let vt = estimate.var_tpr(mode);
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let points = (0..estimate.n_thresholds())
        .map(|t| {
            let (f, r) = (estimate.mean_fpr[t], estimate.mean_tpr[t]);
            let (hf, hr) = (z * vf[t].sqrt(), z * vt[t].sqrt());
            BandPoint {
                t: t as u32,
                mean_fpr: f,
                mean_tpr: r,
                fpr_lo: clamp(f - hf),
                fpr_hi: clamp(f + hf),
                tpr_lo: clamp(r - hr),
                tpr_hi: clamp(r + hr),
            }
        })
        .collect();
    BandedCurve {
        points,
        confidence,
        mode,
        z,
    }
}

/// Pointwise normal-approximation bands `mean +/- z sd` for both coordinates,
/// clamped to `[0, 1]`.
pub fn build_bands(estimate: &RocEstimate, confidence: f64, mode: VarianceMode) -> Result<BandedCurve> {
    check_confidence(confidence)?;
    Ok(band_with_z(estimate, confidence, mode, two_sided_z(confidence)))
}

/// Number of thresholds whose FPR or TPR variance is nonzero.
pub fn nondegenerate_thresholds(estimate: &RocEstimate, mode: VarianceMode) -> usize {
    let (vf, vt) = (estimate.var_fpr(mode), estimate.var_tpr(mode));
    (0..estimate.n_thresholds())
        .filter(|&t| vf[t] > 0.0 || vt[t] > 0.0)
        .count()
}

/// Per-point level `1 - (1 - confidence) / T` for `T` simultaneous intervals.
pub fn bonferroni_level(confidence: f64, n_intervals: usize) -> f64 {
    1.0 - (1.0 - confidence) / n_intervals.max(1) as f64
}

/// Bands with a Bonferroni correction over the thresholds that carry
/// variance, so the whole family covers at the nominal level under the normal
/// approximation.
pub fn simultaneous_bands(estimate: &RocEstimate, confidence: f64, mode: VarianceMode) -> Result<BandedCurve> {
    check_confidence(confidence)?;
    let level = bonferroni_level(confidence, nondegenerate_thresholds(estimate, mode));
    Ok(band_with_z(estimate, confidence, mode, two_sided_z(level)))
}

/// Default FPR floor for log axes: one decade below `1 / n_neg`.
pub fn default_log_floor(n_neg: usize) -> f64 {
    1.0 / (10.0 * n_neg as f64)
}

/// A banded point with log10 FPR coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBandPoint {
    pub t: u32,
    pub log10_fpr: f64,
    pub log10_fpr_lo: f64,
    pub log10_fpr_hi: f64,
    pub mean_tpr: f64,
    pub tpr_lo: f64,
    pub tpr_hi: f64,
}

/// Applies `log10(max(fpr, floor))` to the mean and band FPR values.
pub fn to_log_axis(curve: &BandedCurve, floor: f64) -> Result<Vec<LogBandPoint>> {
    if floor.is_nan() || floor <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "log floor must be positive, got {floor}"
        )));
    }
    let lg = |v: f64| v.max(floor).log10();
    Ok(curve
        .points
        .iter()
        .map(|p| LogBandPoint {
            t: p.t,
            log10_fpr: lg(p.mean_fpr),
            log10_fpr_lo: lg(p.fpr_lo),
            log10_fpr_hi: lg(p.fpr_hi),
            mean_tpr: p.mean_tpr,
            tpr_lo: p.tpr_lo,
            tpr_hi: p.tpr_hi,
        })
        .collect())
}

/// Column header of the band CSV.
pub const BAND_HEADER: &str = "t,mean_fpr,fpr_lo,fpr_hi,mean_tpr,tpr_lo,tpr_hi,log10_fpr,log10_fpr_lo,log10_fpr_hi";

impl BandedCurve {
    /// Writes the band CSV, one row per threshold.
    pub fn write_csv<W: Write>(&self, mut out: W, log_floor: f64) -> Result<()> {
        let logs = to_log_axis(self, log_floor)?;
        let mut buf = String::with_capacity(96 * self.points.len() + 96);
        buf.push_str(BAND_HEADER);
        buf.push('\n');
        for (p, l) in self.points.iter().zip(&logs) {
            writeln!(
                buf,
                "{},{},{},{},{},{},{},{},{},{}",
                p.t,
                p.mean_fpr,
                p.fpr_lo,
                p.fpr_hi,
                p.mean_tpr,
                p.tpr_lo,
                p.tpr_hi,
                l.log10_fpr,
                l.log10_fpr_lo,
                l.log10_fpr_hi
            )
            .unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}
