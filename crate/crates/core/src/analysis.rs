//! Quadrature evaluation of outage, coverage and ergodic sum rate.
//!
//! Decoding rank `k < K` succeeds when `h_k > ν`, where
//!
//! ```text
//! ν = φ_k (A + Σ_{i>k} w_i h_i) / w_k,   w_i = ρ μ_i² (L_i a_i)²,
//! φ_k = e^{2(R̃_k + ε_φ)} - 1.
//! ```
//!
//! Integrating the ordered joint density over `h_1..h_k` leaves
//!
//! ```text
//! P(E_k) = K!/k! ∫_{y_{k+1} ≥ … ≥ y_K} ∏ f(y_i) [S(y_{k+1})^k - S(max(ν, y_{k+1}))^k] dy
//! ```
//!
//! with `S = 1 - F`. The bracket vanishes once `ν <= y_{k+1}`, which bounds
//! the integration region. Failure probabilities are integrated directly
//! with relative tolerances, so outages far below 1e-9 keep their leading
//! digits. Success is reported as `1 - failure`.
//!
//! One or two lower-ranked variables use nested adaptive quadrature in the
//! intensity domain (`y = x²`). Three or more use randomized Halton points
//! pushed through a tabulated quantile function.
//!
//! Rank `K` has no interference and `P(E_K^c) = [1 - F(ψ_K)]^K` with
//! `ψ_K = A φ_K / w_K`. Per-user outage follows the product form
//! `P_k^out = 1 - ∏_{i<=k} P(E_i^c)`. It treats the events as independent
//! although they share channel variables; [`crate::monte_carlo`] measures
//! the exact intersection.

use std::cell::RefCell;

use rand::Rng;

use crate::channel::{GammaGammaDist, IntensityTable};
use crate::error::{Error, Result};
use crate::link::{SystemConfig, Scheme};
use crate::monte_carlo::{simulate_sum_rate, stream_rng, McSettings};
use crate::order_stats::OrderedChannelSet;
use crate::quadrature::{self, Tolerance};
use crate::special::ln_gamma;

const INNER_TOL: Tolerance = Tolerance::relative(1e-11);
const OUTER_TOL: Tolerance = Tolerance::relative(1e-9);
const SURVIVAL_TOL: Tolerance = Tolerance {
    abs: 1e-15,
    rel: 1e-11,
};
const QMC_POINTS: usize = 1 << 12;
const QMC_REPLICAS: usize = 16;
const QMC_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Rate thresholds of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageThresholds {
    /// `φ_k` per rank.
    pub phi: Vec<f64>,
    /// `ψ_K` of the weakest rank.
    pub psi_weakest: f64,
    weights: Vec<f64>,
    noise: f64,
}

impl OutageThresholds {
    pub fn new(cfg: &SystemConfig) -> Self {
        let k = cfg.user_count();
        let phi: Vec<f64> = cfg
            .users
            .iter()
            .map(|u| cfg.constants.sinr_threshold(u.target_rate))
            .collect();
        let weights: Vec<f64> = (1..=k).map(|r| cfg.snr_weight(r)).collect();
        let noise = cfg.constants.noise_factor();
        let psi_weakest = ratio(noise * phi[k - 1], weights[k - 1]);
        OutageThresholds {
            phi,
            psi_weakest,
            weights,
            noise,
        }
    }

    /// `ν` for 1-based `rank`, given `h` of the ranks below it.
    pub fn nu(&self, rank: usize, lower: &[f64]) -> f64 {
        let interference: f64 = lower
            .iter()
            .zip(&self.weights[rank..])
            .map(|(h, w)| h * w)
            .sum();
        ratio(self.phi[rank - 1] * (self.noise + interference), self.weights[rank - 1])
    }

    /// `ν = intercept + Σ slope_j y_{k+j}` for 1-based `rank`.
    fn nu_linear(&self, rank: usize) -> (f64, Vec<f64>) {
        let phi = self.phi[rank - 1];
        let w = self.weights[rank - 1];
        let intercept = phi * self.noise / w;
        let slopes = self.weights[rank..].iter().map(|wi| phi * wi / w).collect();
        (intercept, slopes)
    }
}

/// `num / den` with `0/0 = 0` and `x/0 = ∞`.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Probability of a decoding event and of its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventProbability {
    /// `P(E_k)`: the rate target is missed.
    pub failure: f64,
    /// Error estimate of the numerical integration.
    pub abs_error: f64,
}

impl EventProbability {
    fn exact(failure: f64) -> Self {
        EventProbability {
            failure,
            abs_error: 0.0,
        }
    }

    /// `P(E_k^c)`.
    pub fn success(&self) -> f64 {
        1.0 - self.failure
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageResult {
    /// `P_k^out` per rank.
    pub per_user_outage: Vec<f64>,
    /// `P(E_k^c)` per rank.
    pub per_event_success: Vec<f64>,
    /// `P(E_k)` per rank, at full relative precision.
    pub per_event_failure: Vec<f64>,
    /// `∏_k (1 - P_k^out)`.
    pub coverage: f64,
}

/// Collects the first error raised inside an integrand.
struct ErrorSlot(RefCell<Option<Error>>);

impl ErrorSlot {
    fn new() -> Self {
        ErrorSlot(RefCell::new(None))
    }

    fn value(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn finish<T>(self, r: Result<T>) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => r,
        }
    }
}

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `S(y)^k - S(max(ν, y))^k` with `y = x²`; the difference of survival
/// functions is integrated directly.
fn failure_kernel(dist: &GammaGammaDist, k: usize, x: f64, nu: f64) -> Result<f64> {
    let upper = nu.sqrt();
    if !(upper > x) {
        return Ok(0.0);
    }
    let gap = dist.intensity_mass(x, upper, INNER_TOL)?;
    if k == 1 {
        return Ok(gap);
    }
    let s_lo = dist.intensity_cdf_sf(x, SURVIVAL_TOL)?.1;
    let s_hi = (s_lo - gap).max(0.0);
    // a^k - b^k = (a - b) Σ a^j b^{k-1-j}
    let series: f64 = (0..k)
        .map(|j| s_lo.powi(j as i32) * s_hi.powi((k - 1 - j) as i32))
        .sum();
    Ok(gap * series)
}

fn integrate_x<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<quadrature::Integral> {
    if hi.is_infinite() {
        quadrature::integrate_to_infinity(f, lo, tol)
    } else {
        quadrature::integrate(f, lo, hi, tol)
    }
}

/// Upper end of `y` where `ν(y, rest) > y`, for `ν = c + s y`.
fn crossover(intercept: f64, slope: f64) -> f64 {
    if slope >= 1.0 {
        f64::INFINITY
    } else {
        intercept / (1.0 - slope)
    }
}

/// `P(E_k^c)` for a rank that sees interference (`1 <= k < K`).
pub fn success_prob_rank_k(cfg: &SystemConfig, rank: usize) -> Result<EventProbability> {
    let count = cfg.user_count();
    if rank == 0 || rank >= count {
        return Err(Error::RankOutOfRange {
            rank,
            count: count.saturating_sub(1),
        });
    }
    let th = OutageThresholds::new(cfg);
    if th.phi[rank - 1] == 0.0 {
        return Ok(EventProbability::exact(0.0));
    }
    if th.weights[rank - 1] == 0.0 {
        return Ok(EventProbability::exact(1.0));
    }
    let dist = &cfg.fading;
    let (intercept, slopes) = th.nu_linear(rank);
    let lower = count - rank;
    let prefactor = (ln_factorial(count) - ln_factorial(rank)).exp();

    let (value, err) = match lower {
        1 => {
            let slot = ErrorSlot::new();
            let upper = crossover(intercept, slopes[0]).sqrt();
            let r = integrate_x(
                |x| {
                    let f = dist.intensity_density(x);
                    if f == 0.0 {
                        return 0.0;
                    }
                    let nu = intercept + slopes[0] * x * x;
                    f * slot.value(failure_kernel(dist, rank, x, nu))
                },
                0.0,
                upper,
                OUTER_TOL,
            );
            let r = slot.finish(r)?;
            (r.value, r.abs_error)
        }
        2 => {
            let slot = ErrorSlot::new();
            let (s1, s2) = (slopes[0], slopes[1]);
            let outer_upper = crossover(intercept, s1 + s2).sqrt();
            let r = integrate_x(
                |x2| {
                    let f2 = dist.intensity_density(x2);
                    if f2 == 0.0 {
                        return 0.0;
                    }
                    let y2 = x2 * x2;
                    let inner_upper = crossover(intercept + s2 * y2, s1).sqrt();
                    if !(inner_upper > x2) {
                        return 0.0;
                    }
                    let inner = integrate_x(
                        |x1| {
                            let f1 = dist.intensity_density(x1);
                            if f1 == 0.0 {
                                return 0.0;
                            }
                            let nu = intercept + s1 * x1 * x1 + s2 * y2;
                            f1 * slot.value(failure_kernel(dist, rank, x1, nu))
                        },
                        x2,
                        inner_upper,
                        INNER_TOL,
                    )
                    .map(|i| i.value);
                    f2 * slot.value(inner)
                },
                0.0,
                outer_upper,
                OUTER_TOL,
            );
            let r = slot.finish(r)?;
            (r.value, r.abs_error)
        }
        _ => qmc_failure(dist, rank, count, &th)?,
    };
    let failure = (prefactor * value).clamp(0.0, 1.0);
    Ok(EventProbability {
        failure,
        abs_error: prefactor * err,
    })
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// `P(E_k) = C(K, k) E[S(Y₁)^k - S(max(ν, Y₁))^k]` over `K - k` i.i.d. draws
/// sorted descending, by randomly shifted Halton points. Returns the mean
/// of the replicate estimates (without the binomial factor's `(K-k)!`
/// already folded into the caller's prefactor) and its standard error.
fn qmc_failure(
    dist: &GammaGammaDist,
    rank: usize,
    count: usize,
    th: &OutageThresholds,
) -> Result<(f64, f64)> {
    let dims = count - rank;
    if dims > PRIMES.len() {
        return Err(Error::Config(format!(
            "quasi-Monte Carlo outage supports at most {} interfering ranks",
            PRIMES.len()
        )));
    }
    let table = IntensityTable::new(*dist, 8192)?;
    let mut rng = stream_rng(QMC_SEED, rank as u64);
    let mut replicas = Vec::with_capacity(QMC_REPLICAS);
    let mut y = vec![0.0; dims];
    for _ in 0..QMC_REPLICAS {
        let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        let mut acc = 0.0;
        for i in 1..=QMC_POINTS {
            for (d, slot) in y.iter_mut().enumerate() {
                let u = (radical_inverse(i as u64, PRIMES[d]) + shift[d]).fract();
                let x = table.quantile(u.clamp(1e-300, 1.0 - 1e-16));
                *slot = x * x;
            }
            y.sort_by(|a, b| b.total_cmp(a));
            let nu = th.nu(rank, &y);
            let x = y[0].sqrt();
            let upper = nu.sqrt();
            if upper > x {
                let s_lo = 1.0 - table.cdf(x);
                let s_hi = 1.0 - table.cdf(upper);
                acc += s_lo.powi(rank as i32) - s_hi.powi(rank as i32);
            }
        }
        replicas.push(acc / QMC_POINTS as f64);
    }
    let m: crate::stats::Moments = replicas.iter().copied().collect();
    // prefactor K!/k! = C(K,k) (K-k)!; the sorted-sample expectation
    // already carries the (K-k)! of the ordered region
    let scale = (-ln_factorial(dims)).exp();
    Ok((m.mean * scale, m.std_error() * scale))
}

/// `P(E_K^c) = [1 - F(ψ_K)]^K` for the weakest rank.
pub fn success_prob_weakest(cfg: &SystemConfig) -> Result<EventProbability> {
    let th = OutageThresholds::new(cfg);
    let psi = th.psi_weakest;
    let k = cfg.user_count() as f64;
    if psi == 0.0 {
        return Ok(EventProbability::exact(0.0));
    }
    if psi.is_infinite() {
        return Ok(EventProbability::exact(1.0));
    }
    let (cdf, sf) = cfg
        .fading
        .intensity_cdf_sf(psi.sqrt(), Tolerance::relative(1e-11))?;
    // 1 - (1 - F)^K, accurate for small F
    let failure = if cdf < 0.5 {
        -(k * (-cdf).ln_1p()).exp_m1()
    } else {
        1.0 - sf.powf(k)
    };
    Ok(EventProbability {
        failure: failure.clamp(0.0, 1.0),
        abs_error: k * Tolerance::CDF.abs,
    })
}

/// Per-rank outage (product form) and coverage.
pub fn outage_per_user(cfg: &SystemConfig) -> Result<OutageResult> {
    let count = cfg.user_count();
    let mut failures = Vec::with_capacity(count);
    for rank in 1..count {
        failures.push(success_prob_rank_k(cfg, rank)?.failure);
    }
    failures.push(success_prob_weakest(cfg)?.failure);

    let mut log_success = 0.0;
    let per_user_outage: Vec<f64> = failures
        .iter()
        .map(|&f| {
            log_success += (-f).ln_1p();
            -log_success.exp_m1()
        })
        .collect();
    let coverage = per_user_outage.iter().map(|p| 1.0 - p).product();
    Ok(OutageResult {
        per_event_success: failures.iter().map(|f| 1.0 - f).collect(),
        per_event_failure: failures,
        per_user_outage,
        coverage,
    })
}

/// How an ergodic rate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateMethod {
    Quadrature,
    MonteCarlo(McSettings),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodUsed {
    Quadrature,
    /// Monte Carlo, requested or as the fallback for NOMA with `K > 2`.
    MonteCarlo,
}

impl MethodUsed {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodUsed::Quadrature => "quadrature",
            MethodUsed::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicRate {
    /// NOMA: `E[½ log(1 + Σ w_k h_k / A)] - K ε_φ`, unclamped. OMA: the
    /// TDMA rate.
    pub literal: f64,
    /// Expected sum of the clamped per-user rates.
    pub clamped: f64,
    /// Monte Carlo standard error of `literal`, when sampled.
    pub std_error: Option<f64>,
    pub method: MethodUsed,
}

const RATE_INNER: Tolerance = Tolerance {
    abs: 1e-13,
    rel: 1e-11,
};
const RATE_OUTER: Tolerance = Tolerance {
    abs: 1e-11,
    rel: 1e-9,
};

fn by_monte_carlo(cfg: &SystemConfig, scheme: Scheme, settings: &McSettings) -> Result<ErgodicRate> {
    let est = simulate_sum_rate(cfg, scheme, settings)?;
    Ok(ErgodicRate {
        literal: est.headline.mean,
        clamped: est.clamped.mean,
        std_error: Some(est.headline.std_error),
        method: MethodUsed::MonteCarlo,
    })
}

/// Intensity at which `½ log(1 + w x² / A') - ε_φ` crosses zero.
fn clamp_knee(cfg: &SystemConfig, weight: f64, noise: f64) -> f64 {
    let gate = cfg.constants.sinr_threshold(0.0);
    if weight == 0.0 {
        f64::INFINITY
    } else {
        (gate * noise / weight).sqrt()
    }
}

/// Ergodic NOMA sum rate. Quadrature integrates against the ordered joint
/// density for `K <= 2` and falls back to Monte Carlo with default settings
/// beyond that.
pub fn ergodic_sum_rate_noma(cfg: &SystemConfig, method: RateMethod) -> Result<ErgodicRate> {
    let settings = match method {
        RateMethod::MonteCarlo(s) => return by_monte_carlo(cfg, Scheme::Noma, &s),
        RateMethod::Quadrature if cfg.user_count() > 2 => {
            return by_monte_carlo(cfg, Scheme::Noma, &McSettings::default())
        }
        RateMethod::Quadrature => (),
    };
    let _ = settings;
    let dist = &cfg.fading;
    let a = cfg.constants.noise_factor();
    let eps = cfg.constants.eps_phi;
    let base = cfg.constants.log_base;
    let k = cfg.user_count();
    let w1 = cfg.snr_weight(1);

    if k == 1 {
        let knee = clamp_knee(cfg, w1, a);
        let raw = |x: f64| 0.5 * base.log1p(w1 * x * x / a) - eps;
        let literal = quadrature::integrate_to_infinity(
            |x| dist.intensity_density(x) * 0.5 * base.log1p(w1 * x * x / a),
            0.0,
            RATE_OUTER,
        )?
        .value
            - eps;
        let clamped = quadrature::integrate_to_infinity_with_breaks(
            |x| dist.intensity_density(x) * raw(x).max(0.0),
            0.0,
            &[knee],
            RATE_OUTER,
        )?
        .value;
        return Ok(ErgodicRate {
            literal,
            clamped,
            std_error: None,
            method: MethodUsed::Quadrature,
        });
    }

    let w2 = cfg.snr_weight(2);
    let slot = ErrorSlot::new();
    let literal = quadrature::integrate_to_infinity(
        |x2| {
            let f2 = dist.intensity_density(x2);
            if f2 == 0.0 {
                return 0.0;
            }
            let s2 = w2 * x2 * x2;
            let inner = quadrature::integrate_to_infinity(
                |x1| dist.intensity_density(x1) * 0.5 * base.log1p((w1 * x1 * x1 + s2) / a),
                x2,
                RATE_INNER,
            )
            .map(|r| r.value);
            2.0 * f2 * slot.value(inner)
        },
        0.0,
        RATE_OUTER,
    );
    let literal = slot.finish(literal)?.value - 2.0 * eps;

    let slot = ErrorSlot::new();
    let knee2 = clamp_knee(cfg, w2, a);
    let clamped = quadrature::integrate_to_infinity_with_breaks(
        |x2| {
            let f2 = dist.intensity_density(x2);
            if f2 == 0.0 {
                return 0.0;
            }
            let s2 = w2 * x2 * x2;
            let r2 = (0.5 * base.log1p(s2 / a) - eps).max(0.0);
            let knee1 = clamp_knee(cfg, w1, s2 + a);
            let inner = quadrature::integrate_to_infinity_with_breaks(
                |x1| {
                    let r1 = 0.5 * base.log1p(w1 * x1 * x1 / (s2 + a)) - eps;
                    dist.intensity_density(x1) * (r1.max(0.0) + r2)
                },
                x2,
                &[knee1],
                RATE_INNER,
            )
            .map(|r| r.value);
            2.0 * f2 * slot.value(inner)
        },
        0.0,
        &[knee2],
        RATE_OUTER,
    );
    let clamped = slot.finish(clamped)?.value;
    Ok(ErgodicRate {
        literal,
        clamped,
        std_error: None,
        method: MethodUsed::Quadrature,
    })
}

/// Ergodic TDMA sum rate; quadrature sums one-dimensional integrals against
/// the ordered marginals.
pub fn ergodic_sum_rate_oma(cfg: &SystemConfig, method: RateMethod) -> Result<ErgodicRate> {
    if let RateMethod::MonteCarlo(s) = method {
        return by_monte_carlo(cfg, Scheme::Oma, &s);
    }
    let dist = &cfg.fading;
    let count = cfg.user_count();
    let set = OrderedChannelSet::new(count, *dist)?;
    let a = cfg.constants.noise_factor();
    let eps = cfg.constants.eps_phi;
    let base = cfg.constants.log_base;
    let share = 1.0 / count as f64;
    let mut total = 0.0;
    for rank in 1..=count {
        let mu = cfg.users[rank - 1].mu;
        let w = cfg.rho * mu * mu;
        if w == 0.0 {
            continue;
        }
        let knee = clamp_knee(cfg, w, a);
        let slot = ErrorSlot::new();
        let r = quadrature::integrate_to_infinity_with_breaks(
            |x| {
                let rate = 0.5 * base.log1p(w * x * x / a) - eps;
                if rate <= 0.0 {
                    return 0.0;
                }
                let f = dist.intensity_density(x);
                if f == 0.0 {
                    return 0.0;
                }
                let weight = if count == 1 {
                    1.0
                } else {
                    match dist.intensity_cdf_sf(x, SURVIVAL_TOL) {
                        // f'_k(x²)·2x = (marginal weight)·f_I(x)
                        Ok((cdf, sf)) => set.marginal_from_parts(rank, cdf, sf, 1.0),
                        Err(e) => slot.value(Err(e)),
                    }
                };
                weight * f * rate
            },
            0.0,
            &[knee],
            RATE_OUTER,
        );
        total += share * slot.finish(r)?.value;
    }
    Ok(ErgodicRate {
        literal: total,
        clamped: total,
        std_error: None,
        method: MethodUsed::Quadrature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{AtmosphericConfig, TurbulenceSpec};
    use crate::link::{make_power_plan, RateConstants, UserLink};
    use crate::monte_carlo::RngPolicy;

    fn config(k: usize, rytov: f64, zeta: f64, rho_db: f64, rate: f64) -> SystemConfig {
        let phi = AtmosphericConfig::new(16.0, 1550.0)
            .unwrap()
            .attenuation_coefficient()
            .unwrap();
        let users: Vec<UserLink> = (0..k)
            .map(|i| UserLink::new(1.0 + 2.0 * i as f64, rate, 0.5).unwrap())
            .collect();
        let plan = make_power_plan(&users, phi, 1.0, zeta).unwrap();
        let dist = TurbulenceSpec::from_rytov(rytov).unwrap().distribution();
        SystemConfig::new(users, plan, 10f64.powf(rho_db / 10.0), dist).unwrap()
    }

    #[test]
    fn thresholds() {
        let cfg = config(2, 1.0, 5.0, 30.0, 0.5);
        let th = OutageThresholds::new(&cfg);
        assert!((th.phi[0] - ((2.0 * 0.516f64).exp() - 1.0)).abs() < 1e-14);
        let a = cfg.constants.noise_factor();
        let want = a * th.phi[1] * 10f64.powf(2.0 * 5.0 / 10.0) / (1e3 * 0.25);
        assert!((th.psi_weakest - want).abs() < 1e-12 * want);
        let nu = th.nu(1, &[0.4]);
        let (c, s) = th.nu_linear(1);
        assert!((nu - (c + s[0] * 0.4)).abs() < 1e-14);

        let mut zero = cfg.clone();
        zero.users[0].target_rate = 0.0;
        let th = OutageThresholds::new(&zero);
        assert!((th.phi[0] - ((2.0 * 0.016f64).exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_target_without_margin_always_succeeds() {
        let mut cfg = config(2, 1.0, 5.0, 20.0, 0.0);
        cfg.constants = RateConstants {
            eps_phi: 0.0,
            ..cfg.constants
        };
        assert_eq!(success_prob_rank_k(&cfg, 1).unwrap().success(), 1.0);
        assert_eq!(success_prob_weakest(&cfg).unwrap().success(), 1.0);
        let out = outage_per_user(&cfg).unwrap();
        assert_eq!(out.per_user_outage, vec![0.0, 0.0]);
        assert_eq!(out.coverage, 1.0);
    }

    #[test]
    fn weakest_limits() {
        let cfg = config(2, 0.1, 5.0, -100.0, 0.5);
        assert!(success_prob_weakest(&cfg).unwrap().success() < 1e-12);
        let mut mute = config(2, 0.1, 5.0, 20.0, 0.5);
        mute.users[1].mu = 0.0;
        assert_eq!(success_prob_weakest(&mute).unwrap().success(), 0.0);
    }

    #[test]
    fn weakest_matches_direct_arithmetic() {
        let cfg = config(2, 0.1, 5.0, 40.0, 0.5);
        let a = 9.0 * 1.0015f64.powi(2);
        let phi = (2.0 * 0.516f64).exp() - 1.0;
        let psi = a * phi * 10.0 / (1e4 * 0.25);
        let f = cfg.fading.h_cdf(psi).unwrap();
        let want = (1.0 - f).powi(2);
        let got = success_prob_weakest(&cfg).unwrap().success();
        assert!((got - want).abs() < 1e-12, "{got} {want}");
    }

    #[test]
    fn rank_range() {
        let cfg = config(2, 1.0, 5.0, 20.0, 0.5);
        assert!(matches!(success_prob_rank_k(&cfg, 2), Err(Error::RankOutOfRange { .. })));
        assert!(success_prob_rank_k(&cfg, 0).is_err());
    }

    #[test]
    fn single_user_outage_is_cdf() {
        let cfg = config(1, 1.0, 5.0, 20.0, 0.5);
        let th = OutageThresholds::new(&cfg);
        let out = outage_per_user(&cfg).unwrap();
        let f = cfg.fading.h_cdf(th.psi_weakest).unwrap();
        assert!((out.per_user_outage[0] - f).abs() < 1e-9);
        assert!((out.coverage - (1.0 - f)).abs() < 1e-9);
    }

    #[test]
    fn two_user_closed_form_tail() {
        // K = 2, k = 1: P(E₁^c) = 2∫₀^{y*} f(y) S(ν(y)) dy + S(y*)²
        let cfg = config(2, 1.0, 2.0, 20.0, 0.5);
        let th = OutageThresholds::new(&cfg);
        let (c, s) = th.nu_linear(1);
        let y_star = c / (1.0 - s[0]);
        let d = cfg.fading;
        let tol = Tolerance {
            abs: 1e-13,
            rel: 1e-11,
        };
        let head = quadrature::integrate(
            |x| 2.0 * d.intensity_density(x) * d.h_sf(c + s[0] * x * x).unwrap(),
            0.0,
            y_star.sqrt(),
            tol,
        )
        .unwrap()
        .value;
        let tail = d.h_sf(y_star).unwrap().powi(2);
        let got = success_prob_rank_k(&cfg, 1).unwrap().success();
        assert!((got - (head + tail)).abs() < 1e-8, "{got} {}", head + tail);
    }

    #[test]
    fn outage_monotone_in_rho_and_rate() {
        let rho_grid: Vec<f64> = (0..13).map(|i| 5.0 * i as f64).collect();
        for rytov in [0.1, 1.0] {
            let mut prev = vec![1.0, 1.0];
            for &rho in &rho_grid {
                let out = outage_per_user(&config(2, rytov, 3.0, rho, 0.5)).unwrap();
                for (p, q) in out.per_user_outage.iter().zip(&prev) {
                    assert!(*p <= *q + 1e-9, "rho={rho}");
                    assert!((0.0..=1.0).contains(p));
                }
                assert!(out.per_user_outage[0] <= out.per_user_outage[1]);
                let product: f64 = out.per_user_outage.iter().map(|p| 1.0 - p).product();
                assert_eq!(out.coverage, product);
                prev = out.per_user_outage;
            }
        }
        let lo = outage_per_user(&config(2, 1.0, 3.0, 20.0, 0.3)).unwrap();
        let hi = outage_per_user(&config(2, 1.0, 3.0, 20.0, 0.8)).unwrap();
        for (a, b) in lo.per_user_outage.iter().zip(&hi.per_user_outage) {
            assert!(a <= b);
        }
    }

    #[test]
    fn three_user_nested_and_qmc_agree() {
        // rank 1 of K = 4 uses QMC over three variables; compare with the
        // equivalent physical Monte Carlo frequency of the same event.
        let cfg = config(4, 1.0, 2.0, 25.0, 0.3);
        let q = success_prob_rank_k(&cfg, 1).unwrap();
        let th = OutageThresholds::new(&cfg);
        let set = OrderedChannelSet::new(4, cfg.fading).unwrap();
        let mut rng = stream_rng(17, 0);
        let n = 200_000;
        let fails = (0..n)
            .filter(|_| {
                let h = set.sample_ordered(&mut rng);
                h[0] <= th.nu(1, &h[1..])
            })
            .count();
        let p = fails as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((q.failure - p).abs() < 4.0 * se + 3.0 * q.abs_error, "{q:?} mc={p}");

        // rank 2 of K = 4 is nested over two variables
        let q2 = success_prob_rank_k(&cfg, 2).unwrap();
        let mut rng = stream_rng(18, 0);
        let fails = (0..n)
            .filter(|_| {
                let h = set.sample_ordered(&mut rng);
                h[1] <= th.nu(2, &h[2..])
            })
            .count();
        let p = fails as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((q2.failure - p).abs() < 4.0 * se, "{q2:?} mc={p}");
    }

    #[test]
    fn ergodic_zero_signal() {
        let mut cfg = config(2, 1.0, 5.0, 20.0, 0.5);
        for u in &mut cfg.users {
            u.mu = 0.0;
        }
        let r = ergodic_sum_rate_noma(&cfg, RateMethod::Quadrature).unwrap();
        assert!((r.literal + 2.0 * 0.016).abs() < 1e-15);
        assert_eq!(r.clamped, 0.0);
        assert_eq!(ergodic_sum_rate_oma(&cfg, RateMethod::Quadrature).unwrap().literal, 0.0);
    }

    #[test]
    fn ergodic_single_user_schemes_agree() {
        let cfg = config(1, 1.0, 5.0, 20.0, 0.5);
        let noma = ergodic_sum_rate_noma(&cfg, RateMethod::Quadrature).unwrap();
        let oma = ergodic_sum_rate_oma(&cfg, RateMethod::Quadrature).unwrap();
        assert!((noma.clamped - oma.literal).abs() < 1e-9);
        assert!(noma.literal <= noma.clamped);
    }

    #[test]
    fn ergodic_quadrature_matches_monte_carlo() {
        let settings = McSettings::new(200_000, RngPolicy::new(3, 10_000).unwrap());
        for rytov in [0.1, 1.0] {
            let cfg = config(2, rytov, 5.0, 20.0, 0.5);
            let q = ergodic_sum_rate_noma(&cfg, RateMethod::Quadrature).unwrap();
            let mc = ergodic_sum_rate_noma(&cfg, RateMethod::MonteCarlo(settings)).unwrap();
            let se = mc.std_error.unwrap();
            assert!((q.literal - mc.literal).abs() < 3.0 * se, "{q:?} {mc:?}");
            assert!((q.clamped - mc.clamped).abs() < 3.0 * se.max(1e-4), "{q:?} {mc:?}");
            let q = ergodic_sum_rate_oma(&cfg, RateMethod::Quadrature).unwrap();
            let mc = ergodic_sum_rate_oma(&cfg, RateMethod::MonteCarlo(settings)).unwrap();
            assert!((q.literal - mc.literal).abs() < 3.0 * mc.std_error.unwrap(), "{q:?} {mc:?}");
        }
    }

    #[test]
    fn ergodic_falls_back_for_many_users() {
        let cfg = config(3, 1.0, 3.0, 20.0, 0.5);
        let r = ergodic_sum_rate_noma(&cfg, RateMethod::Quadrature).unwrap();
        assert_eq!(r.method, MethodUsed::MonteCarlo);
        assert!(r.std_error.unwrap() > 0.0);
    }
}
