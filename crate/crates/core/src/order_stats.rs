//! Order statistics of `K` i.i.d. squared intensities `h = I²`, sorted
//! descending so that rank 1 is the strongest user (decoded first).

use rand::Rng;

use crate::channel::GammaGammaDist;
use crate::error::{Error, Result};
use crate::quadrature::Tolerance;
use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedChannelSet {
    count: usize,
    base: GammaGammaDist,
}

impl OrderedChannelSet {
    pub fn new(count: usize, base: GammaGammaDist) -> Result<Self> {
        if count == 0 {
            return Err(Error::domain("count", 0.0, ">= 1"));
        }
        Ok(OrderedChannelSet { count, base })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn base(&self) -> &GammaGammaDist {
        &self.base
    }

    fn check_rank(&self, rank: usize) -> Result<()> {
        if rank == 0 || rank > self.count {
            return Err(Error::RankOutOfRange {
                rank,
                count: self.count,
            });
        }
        Ok(())
    }

    /// `ln(K! / ((k-1)! (K-k)!))`.
    fn ln_rank_coefficient(&self, rank: usize) -> f64 {
        let big_k = self.count as f64;
        let k = rank as f64;
        ln_gamma(big_k + 1.0) - ln_gamma(k) - ln_gamma(big_k - k + 1.0)
    }

    /// Density of the rank-`k` variable:
    /// `K!/((k-1)!(K-k)!) · F(h)^(K-k) · (1-F(h))^(k-1) · f(h)`.
    pub fn ordered_marginal_pdf(&self, rank: usize, h: f64) -> Result<f64> {
        self.check_rank(rank)?;
        if !(h > 0.0) {
            return Err(Error::domain("h", h, "> 0"));
        }
        let (cdf, sf) = self.base.intensity_cdf_sf(h.sqrt(), Tolerance::CDF)?;
        Ok(self.marginal_from_parts(rank, cdf, sf, self.base.h_density(h)))
    }

    pub(crate) fn marginal_from_parts(&self, rank: usize, cdf: f64, sf: f64, density: f64) -> f64 {
        if density == 0.0 {
            return 0.0;
        }
        let below = (self.count - rank) as i32;
        let above = (rank - 1) as i32;
        self.ln_rank_coefficient(rank).exp() * cdf.powi(below) * sf.powi(above) * density
    }

    /// Joint density `K! ∏ f(h_i)` of the full ordered vector. Returns 0 when
    /// the input is not non-increasing, so integrals over unrestricted
    /// domains stay correct.
    pub fn ordered_joint_pdf(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.count {
            return Err(Error::domain(
                "values.len()",
                values.len() as f64,
                "equal to the user count",
            ));
        }
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::domain("h", values.iter().copied().fold(f64::INFINITY, f64::min), "> 0"));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Ok(0.0);
        }
        let ln_fact = ln_gamma(self.count as f64 + 1.0);
        let ln_prod: f64 = values
            .iter()
            .map(|&h| self.base.h_density(h).ln())
            .sum();
        Ok((ln_fact + ln_prod).exp())
    }

    /// One realization `h₁ ≥ … ≥ h_K`.
    pub fn sample_ordered<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sampler = self.base.sampler();
        let mut intensities: Vec<f64> = (0..self.count).map(|_| sampler.sample(rng)).collect();
        // stable sort: equal values keep ascending original index
        intensities.sort_by(|a, b| b.total_cmp(a));
        intensities.into_iter().map(|i| i * i).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monte_carlo::stream_rng;
    use crate::quadrature::{self, integrate_to_infinity};

    fn moderate(k: usize) -> OrderedChannelSet {
        OrderedChannelSet::new(k, GammaGammaDist::new(4.39, 2.56).unwrap()).unwrap()
    }

    #[test]
    fn single_user_marginal_is_base_density() {
        let set = moderate(1);
        for &h in &[0.01, 0.3, 1.0, 4.0] {
            let a = set.ordered_marginal_pdf(1, h).unwrap();
            let b = set.base().h_pdf(h).unwrap();
            assert!((a - b).abs() <= 1e-15 * b);
        }
    }

    #[test]
    fn decomposition_identity() {
        for k in [2, 3, 5] {
            let set = moderate(k);
            for i in 1..=50 {
                let h = 0.02 * i as f64 * i as f64 / 10.0;
                let total: f64 = (1..=k).map(|r| set.ordered_marginal_pdf(r, h).unwrap()).sum();
                let want = k as f64 * set.base().h_density(h);
                assert!((total - want).abs() <= 1e-10 * want, "K={k} h={h}");
            }
        }
    }

    #[test]
    fn marginals_integrate_to_one() {
        let set = moderate(2);
        let tol = Tolerance {
            abs: 1e-10,
            rel: 1e-9,
        };
        for rank in 1..=2 {
            let mass = integrate_to_infinity(|h| set.ordered_marginal_pdf(rank, h).unwrap(), 0.0, tol)
                .unwrap()
                .value;
            assert!((mass - 1.0).abs() < 1e-6, "rank {rank}: {mass}");
        }
    }

    #[test]
    fn rank_out_of_range() {
        let set = moderate(2);
        assert_eq!(
            set.ordered_marginal_pdf(3, 1.0),
            Err(Error::RankOutOfRange { rank: 3, count: 2 })
        );
        assert!(set.ordered_marginal_pdf(0, 1.0).is_err());
        assert!(OrderedChannelSet::new(0, *set.base()).is_err());
    }

    #[test]
    fn joint_density_support() {
        let set1 = moderate(1);
        let f = set1.base().h_density(0.7);
        assert!((set1.ordered_joint_pdf(&[0.7]).unwrap() - f).abs() < 1e-15 * f);
        let set = moderate(2);
        assert_eq!(set.ordered_joint_pdf(&[0.5, 0.9]).unwrap(), 0.0);
        assert!(set.ordered_joint_pdf(&[0.9, 0.5]).unwrap() > 0.0);
        assert!(set.ordered_joint_pdf(&[0.9]).is_err());
    }

    #[test]
    fn joint_density_integrates_to_one() {
        let set = moderate(2);
        let tol = Tolerance {
            abs: 1e-10,
            rel: 1e-9,
        };
        let inner = |h2: f64| {
            integrate_to_infinity(|h1| set.ordered_joint_pdf(&[h1.max(h2), h2]).unwrap(), h2, tol)
                .unwrap()
                .value
        };
        let total = quadrature::integrate_to_infinity(inner, 0.0, tol).unwrap().value;
        assert!((total - 1.0).abs() < 1e-7, "{total}");
    }

    #[test]
    fn samples_are_non_increasing() {
        let set = moderate(4);
        let mut rng = stream_rng(1, 0);
        for _ in 0..1000 {
            let v = set.sample_ordered(&mut rng);
            assert!(v.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn straddle_probability_matches_cdf() {
        // P(h₁ ≥ t ≥ h₂) = 2 F(t) (1 - F(t)) for K = 2
        let set = moderate(2);
        let d = set.base();
        let mut lo = 0.0;
        let mut hi = 10.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if d.h_cdf(mid).unwrap() < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let f = d.h_cdf(t).unwrap();
        let want = 2.0 * f * (1.0 - f);
        let n = 200_000;
        let mut rng = stream_rng(11, 0);
        let hits = (0..n)
            .filter(|_| {
                let v = set.sample_ordered(&mut rng);
                v[0] >= t && t >= v[1]
            })
            .count();
        let p = hits as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((p - want).abs() < 3.0 * se, "p={p} want={want}");
    }
}
