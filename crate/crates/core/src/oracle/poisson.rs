use rand::Rng;

const TABLE_LEN: usize = 17;

/// Poisson(1) sampler by CDF inversion.
///
/// The cumulative table covers `k <= 16`; beyond it (probability about 4e-15)
/// the inversion continues term by term.
#[derive(Debug, Clone)]
pub struct PoissonOne {
    cdf: [f64; TABLE_LEN],
}

impl Default for PoissonOne {
    fn default() -> Self {
        Self::new()
    }
}

impl PoissonOne {
    pub fn new() -> Self {
        let mut cdf = [0.0; TABLE_LEN];
        let mut term = (-1.0f64).exp();
        let mut acc = 0.0;
        for (k, c) in cdf.iter_mut().enumerate() {
            if k > 0 {
                term /= k as f64;
            }
            acc += term;
            *c = acc;
        }
        Self { cdf }
    }

    /// `Pr[c <= k]` for `k <= 16`.
    pub fn cdf(&self, k: usize) -> f64 {
        self.cdf[k]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        if let Some(k) = self.cdf.iter().position(|&c| u < c) {
            return k as u32;
        }
        let mut k = TABLE_LEN - 1;
        let mut term = self.cdf[k] - self.cdf[k - 1];
        let mut acc = self.cdf[k];
        while u >= acc {
            k += 1;
            term /= k as f64;
            if term == 0.0 {
                break;
            }
            acc += term;
        }
        k as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_fraction_is_one_over_e() {
        let p = PoissonOne::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let zeros = (0..n).filter(|_| p.sample(&mut rng) == 0).count();
        let frac = zeros as f64 / n as f64;
        let e1 = (-1.0f64).exp();
        let se = (e1 * (1.0 - e1) / n as f64).sqrt();
        assert!((frac - e1).abs() < 3.0 * se, "{frac} vs {e1}");
    }

    #[test]
    fn mean_and_variance_are_one() {
        let p = PoissonOne::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| p.sample(&mut rng) as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn table_matches_closed_form() {
        let p = PoissonOne::new();
        let e1 = (-1.0f64).exp();
        assert!((p.cdf(0) - e1).abs() < 1e-16);
        assert!((p.cdf(1) - 2.0 * e1).abs() < 1e-16);
        assert!((p.cdf(2) - 2.5 * e1).abs() < 1e-15);
        assert!(p.cdf(16) < 1.0 && p.cdf(16) > 1.0 - 1e-14);
    }
}
