//! Small statistics helpers: mergeable moment accumulators and the
//! one-sample Kolmogorov–Smirnov test.

/// Count, mean and sum of squared deviations (Welford), mergeable with
/// Chan's update. Merging in a fixed order gives bit-identical results.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / n;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsOutcome {
    pub fn accepted_at(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// One-sample KS test given the hypothesised CDF evaluated at the sorted
/// sample points.
pub fn ks_test_sorted(cdf_at_sorted: &[f64]) -> KsOutcome {
    let n = cdf_at_sorted.len();
    let nf = n as f64;
    let statistic = cdf_at_sorted
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let above = (i + 1) as f64 / nf - f;
            let below = f - i as f64 / nf;
            above.max(below)
        })
        .fold(0.0, f64::max);
    let sq = nf.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * statistic;
    KsOutcome {
        statistic,
        p_value: kolmogorov_sf(lambda),
        n,
    }
}

/// `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} exp(-2 j² λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 2.0;
    let mut prev_term = 0.0;
    for j in 1..=100 {
        let term = sign * (a2 * (j * j) as f64).exp();
        sum += term;
        if term.abs() <= 1e-10 * prev_term || term.abs() <= 1e-16 * sum {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev_term = term.abs();
    }
    1.0
}

/// KS test of samples against a CDF evaluated point by point.
pub fn ks_test<F: Fn(&[f64]) -> Vec<f64>>(samples: &mut [f64], cdf_sorted: F) -> KsOutcome {
    samples.sort_by(f64::total_cmp);
    ks_test_sorted(&cdf_sorted(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monte_carlo::stream_rng;
    use rand::Rng;

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let whole: Moments = xs.iter().copied().collect();
        let mut left: Moments = xs[..333].iter().copied().collect();
        let right: Moments = xs[333..].iter().copied().collect();
        left.merge(&right);
        assert_eq!(left.count, 1000);
        assert!((left.mean - whole.mean).abs() < 1e-12);
        assert!((left.variance() - whole.variance()).abs() < 1e-10);
        let mut empty = Moments::default();
        empty.merge(&whole);
        assert_eq!(empty, whole);
    }

    #[test]
    fn kolmogorov_known_values() {
        // Q(1.36) ≈ 0.0494, Q(1.63) ≈ 0.0098
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.628) - 0.0100).abs() < 3e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(4.0) < 1e-12);
    }

    #[test]
    fn uniform_samples_accepted_and_shifted_rejected() {
        let mut rng = stream_rng(3, 0);
        let mut u: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let ok = ks_test(&mut u, |s| s.to_vec());
        assert!(ok.accepted_at(0.01), "{ok:?}");
        let bad = ks_test(&mut u, |s| s.iter().map(|x| x.powf(1.1)).collect());
        assert!(!bad.accepted_at(0.01), "{bad:?}");
    }
}
