//! Binomial survival probabilities `Pr[Bin(m, p) >= t]`.
//!
//! The probability that an ensemble of `m` classifiers, each voting positive
//! independently with probability `p`, clears threshold `t`. Point masses come
//! from Loader's saddle-point expansion, which keeps full relative precision
//! for `m` in the thousands. Tail sums are accumulated from the small end with
//! ratio recurrences: the upper tail above the mode directly, the lower tail
//! below it as a complement.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vote_model::VoteMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)` for `n = 0..=15`; index 0 is unused.
#[allow(clippy::excessive_precision)]
const STIRLING_ERR: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_09,
    0.027_677_925_684_998_339_15,
    0.020_790_672_103_765_093_11,
    0.016_644_691_189_821_192_16,
    0.013_876_128_823_070_747_99,
    0.011_896_709_945_891_770_10,
    0.010_411_265_261_972_096_50,
    0.009_255_462_182_712_732_918,
    0.008_330_563_433_362_871_256,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_866,
    0.006_408_994_188_004_207_068,
    0.005_951_370_112_758_847_736,
    0.005_554_733_551_962_801_371,
];

fn stirling_err(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return STIRLING_ERR[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np - x`, evaluated by series near `x = np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        if s.abs() < f64::MIN_POSITIVE {
            return s;
        }
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
    }
    x * (x / np).ln() + np - x
}

/// Natural log of `Pr[Bin(m, p) = k]` for `0 < p < 1`, `0 <= k <= m`.
pub(crate) fn ln_pmf(m: u32, k: u32, p: f64, q: f64) -> f64 {
    let n = m as f64;
    let x = k as f64;
    if k == 0 {
        return if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
    }
    if k == m {
        return if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
    }
    let lc = stirling_err(n) - stirling_err(x) - stirling_err(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = LN_2PI + x.ln() + (-x / n).ln_1p();
    lc - 0.5 * lf
}

/// `Pr[Bin(m, p) = k]`.
pub fn binomial_pmf(m: u32, p: f64, k: u32) -> f64 {
    if k > m {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == m { 1.0 } else { 0.0 };
    }
    ln_pmf(m, k, p, 1.0 - p).exp()
}

/// Survival probabilities for every threshold `t = 0..=m+1`.
///
/// Entry `t` is `Pr[Bin(m, p) >= t]`; entry 0 is exactly 1 and entry `m + 1`
/// exactly 0. The row is non-increasing and lies in `[0, 1]`.
pub fn survival_row(m: u32, p: f64) -> Vec<f64> {
    assert!(m >= 1, "ensemble size must be at least 1");
    assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    let mu = m as usize;
    let mut row = vec![0.0; mu + 2];
    row[0] = 1.0;
    if p == 0.0 {
        return row;
    }
    if p == 1.0 {
        row[1..=mu].fill(1.0);
        return row;
    }
    let q = 1.0 - p;
    let odds = p / q;
    let mode = (((m as f64 + 1.0) * p).floor() as u32).min(m);

    // Upper tail: Pr[X >= t] = pmf(t) * S_t with S_t = 1 + rho_t * S_{t+1}.
    let mut s = 1.0;
    for t in (mode + 1..=m).rev() {
        if t < m {
            let rho = (m - t) as f64 / (t + 1) as f64 * odds;
            s = 1.0 + rho * s;
        }
        row[t as usize] = (ln_pmf(m, t, p, q).exp() * s).min(1.0);
    }

    // Lower tail: Pr[X <= u] = pmf(u) * U_u with U_u = 1 + sigma_u * U_{u-1}.
    let mut u_acc = 1.0;
    for u in 0..mode {
        if u > 0 {
            let sigma = u as f64 / (m - u + 1) as f64 / odds;
            u_acc = 1.0 + sigma * u_acc;
        }
        let lower = ln_pmf(m, u, p, q).exp() * u_acc;
        row[u as usize + 1] = (1.0 - lower).clamp(0.0, 1.0);
    }

    for t in 1..row.len() {
        if row[t] > row[t - 1] {
            row[t] = row[t - 1];
        }
    }
    row
}

/// `Pr[Bin(m, p) >= t]`, the probability that at least `t` of `m` votes are
/// positive.
///
/// Thresholds at or below zero give 1 and thresholds above `m` give 0.
pub fn binomial_survival(m: u32, p: f64, t: i64) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidArgument("ensemble size m must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    if t <= 0 {
        return Ok(1.0);
    }
    if t > m as i64 {
        return Ok(0.0);
    }
    Ok(survival_row(m, p)[t as usize])
}

/// Per-point survival probabilities `q_j(t)` for an evaluation ensemble of
/// size `m_eval`, with `p_j = k_j / m_observed`.
///
/// Rows are stored once per distinct vote count.
#[derive(Debug, Clone)]
pub struct ThresholdProfile {
    m_eval: u32,
    m_observed: u32,
    distinct: Vec<u32>,
    rows: Vec<Vec<f64>>,
    row_of: Vec<usize>,
}

impl ThresholdProfile {
    pub fn m_eval(&self) -> u32 {
        self.m_eval
    }

    pub fn m_observed(&self) -> u32 {
        self.m_observed
    }

    /// Number of thresholds, `m_eval + 2`.
    pub fn n_thresholds(&self) -> usize {
        self.m_eval as usize + 2
    }

    pub fn n_points(&self) -> usize {
        self.row_of.len()
    }

    /// The sorted distinct vote counts that have a row.
    pub fn distinct_counts(&self) -> &[u32] {
        &self.distinct
    }

    /// Row for the `r`-th distinct count.
    pub fn distinct_row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }

    /// Index into [`distinct_counts`](Self::distinct_counts) for point `j`.
    pub fn row_index(&self, j: usize) -> usize {
        self.row_of[j]
    }

    /// `q_j(t)` for every threshold.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[self.row_of[j]]
    }

    pub fn q(&self, j: usize, t: usize) -> f64 {
        self.rows[self.row_of[j]][t]
    }
}

/// Evaluates `q_j(t)` for every test point and threshold `t = 0..=m_eval+1`.
///
/// `m_eval` may differ from the observed ensemble size: vote rates are always
/// estimated as `k_j / m_observed`.
pub fn threshold_profile(votes: &VoteMatrix, m_eval: u32) -> Result<ThresholdProfile> {
    if m_eval < 1 {
        return Err(Error::InvalidArgument("m_eval must be at least 1".into()));
    }
    let m_obs = votes.m_observed();
    let mut slot = vec![usize::MAX; m_obs as usize + 1];
    for &k in votes.counts() {
        slot[k as usize] = 0;
    }
    let mut distinct = Vec::new();
    for (k, s) in slot.iter_mut().enumerate() {
        if *s == 0 {
            *s = distinct.len();
            distinct.push(k as u32);
        }
    }
    let rows: Vec<Vec<f64>> = distinct
        .par_iter()
        .map(|&k| survival_row(m_eval, k as f64 / m_obs as f64))
        .collect();
    let row_of = votes.counts().iter().map(|&k| slot[k as usize]).collect();
    Ok(ThresholdProfile {
        m_eval,
        m_observed: m_obs,
        distinct,
        rows,
        row_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fair_classifier() {
        assert_eq!(binomial_survival(1, 0.5, 1).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(binomial_survival(4, 0.0, 1).unwrap(), 0.0);
        assert_eq!(binomial_survival(4, 1.0, 4).unwrap(), 1.0);
        assert_eq!(binomial_survival(4, 0.3, 0).unwrap(), 1.0);
        assert_eq!(binomial_survival(4, 0.3, -3).unwrap(), 1.0);
        assert_eq!(binomial_survival(4, 0.3, 5).unwrap(), 0.0);
    }

    #[test]
    fn four_fair_votes_at_least_two() {
        // (6 + 4 + 1) / 16
        let v = binomial_survival(4, 0.5, 2).unwrap();
        assert!((v - 0.6875).abs() < 1e-15, "{v}");
    }

    #[test]
    fn invalid_arguments() {
        assert!(binomial_survival(0, 0.5, 1).is_err());
        assert!(binomial_survival(3, 1.5, 1).is_err());
        assert!(binomial_survival(3, -0.1, 1).is_err());
        assert!(binomial_survival(3, f64::NAN, 1).is_err());
    }

    #[test]
    fn stirling_table_matches_series_at_boundary() {
        // the series branch continues the table smoothly past n = 15
        let table = STIRLING_ERR[15];
        let series = {
            let n: f64 = 15.0;
            let nn = n * n;
            (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / 1188.0 / nn) / nn) / nn) / nn) / n
        };
        assert!((table - series).abs() < 1e-10);
    }

    #[test]
    fn profile_step_rows() {
        let vm = VoteMatrix::new(vec![0, 4, 3, 0], 4, vec![0, 1, 1, 0]).unwrap();
        let prof = threshold_profile(&vm, 4).unwrap();
        assert_eq!(prof.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(prof.row(1), &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        assert!((prof.q(2, 4) - 0.316_406_25).abs() < 1e-15);
        assert_eq!(prof.distinct_counts(), &[0, 3, 4]);
        assert_eq!(prof.row_index(3), prof.row_index(0));
    }

    #[test]
    fn profile_matches_scalar_survival() {
        let vm = VoteMatrix::new(vec![1, 5, 9, 2], 11, vec![0, 1, 1, 0]).unwrap();
        for m_eval in [1, 7, 11, 44] {
            let prof = threshold_profile(&vm, m_eval).unwrap();
            assert_eq!(prof.n_thresholds(), m_eval as usize + 2);
            for j in 0..vm.len() {
                for t in 0..prof.n_thresholds() {
                    let s = binomial_survival(m_eval, vm.vote_rate(j), t as i64).unwrap();
                    assert_eq!(prof.q(j, t), s);
                }
            }
        }
    }

    #[test]
    fn large_ensemble_row_is_sane() {
        let row = survival_row(8192, 0.37);
        assert_eq!(row.len(), 8194);
        assert_eq!(row[0], 1.0);
        assert_eq!(row[8193], 0.0);
        assert!(row.windows(2).all(|w| w[0] >= w[1]));
        // median of Bin(8192, 0.37) sits near 3031
        assert!(row[3000] > 0.5 && row[3100] < 0.5);
    }
}
