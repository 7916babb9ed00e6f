#![allow(dead_code)]

use ensemble_roc::VoteMatrix;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Pr[Bin(m, num/den) >= t]` for `t = 0..=m+1` as exact rationals, summing
/// the integer terms `C(m,k) num^k (den-num)^(m-k)` over `den^m`.
pub fn exact_survival(m: u32, num: u64, den: u64) -> Vec<BigRational> {
    assert!(num <= den && den > 0);
    let m = m as usize;
    let a = BigUint::from(num);
    let b = BigUint::from(den - num);
    let total = BigInt::from(BigUint::from(den).pow(m as u32));
    let mut pow_a = vec![BigUint::one(); m + 1];
    let mut pow_b = vec![BigUint::one(); m + 1];
    for k in 1..=m {
        pow_a[k] = &pow_a[k - 1] * &a;
        pow_b[k] = &pow_b[k - 1] * &b;
    }
    let mut binom = BigUint::one();
    let mut terms = Vec::with_capacity(m + 1);
    for k in 0..=m {
        if k > 0 {
            binom = binom * BigUint::from(m - k + 1) / BigUint::from(k);
        }
        terms.push(&binom * &pow_a[k] * &pow_b[m - k]);
    }
    let mut out = vec![BigRational::zero(); m + 2];
    let mut acc = BigUint::zero();
    for t in (0..=m).rev() {
        acc += &terms[t];
        out[t] = BigRational::new_raw(BigInt::from(acc.clone()), total.clone());
    }
    out
}

/// `f64` value of a non-negative rational, good to about 1e-18 relative in
/// the normal range.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (num, den) = (r.numer(), r.denom());
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let scaled = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let mantissa = scaled.to_f64().unwrap();
    let e = -shift as i32;
    mantissa * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
}

/// Vote matrix whose per-point rates spread over `[0, 1]`: negatives draw a
/// latent rate in `[0, 0.75]`, positives in `[0.25, 1]`, and counts are
/// binomial around it. Labels alternate.
pub fn spread_votes(n: usize, m: u32, seed: u64) -> VoteMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let y = (j % 2) as u8;
        let p: f64 = 0.25 * y as f64 + 0.75 * rng.random::<f64>();
        let k = (0..m).filter(|_| rng.random::<f64>() < p).count() as u32;
        counts.push(k);
        labels.push(y);
    }
    VoteMatrix::new(counts, m, labels).unwrap()
}

/// Full 0/1 votes with per-point rates spread over `[0, 1]`.
pub fn spread_full_votes(n: usize, m: usize, seed: u64) -> VoteMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut votes = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let y = (j % 2) as u8;
        let p: f64 = 0.25 * y as f64 + 0.75 * rng.random::<f64>();
        votes.extend((0..m).map(|_| (rng.random::<f64>() < p) as u8));
        labels.push(y);
    }
    VoteMatrix::from_full(votes, m, labels).unwrap()
}
