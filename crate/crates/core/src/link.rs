//! Power back-off plan, SIC decode order and per-user achievable rates.
//!
//! With the back-off plan `a_k = 1 / (L_k 10^((k-1)ζ/10))` the path loss
//! cancels: `L_k a_k = 10^(-(k-1)ζ/10)`. The received SNR term of rank `k`
//! is then `ρ μ_k² h_k 10^(-2(k-1)ζ/10)` with `ρ = P_aim² / (N₀B)`, and
//! every rate below is written in those terms.
//!
//! Per-rank attributes (`μ_k`, target rate) belong to the decode position,
//! not to a physical transmitter.

use crate::channel::{path_loss, GammaGammaDist};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLink {
    pub distance_km: f64,
    /// Targeted rate `R̃_k` in the units of [`LogBase`].
    pub target_rate: f64,
    /// Ratio of mean to peak received optical power, in `[0, 0.5]`.
    pub mu: f64,
}

impl UserLink {
    pub const DEFAULT_MU: f64 = 0.5;

    pub fn new(distance_km: f64, target_rate: f64, mu: f64) -> Result<Self> {
        if !(distance_km > 0.0 && distance_km.is_finite()) {
            return Err(Error::domain("distance_km", distance_km, "> 0"));
        }
        if !(target_rate >= 0.0 && target_rate.is_finite()) {
            return Err(Error::domain("target_rate", target_rate, ">= 0"));
        }
        if !(0.0..=0.5).contains(&mu) {
            return Err(Error::domain("mu", mu, "in [0, 0.5]"));
        }
        Ok(UserLink {
            distance_km,
            target_rate,
            mu,
        })
    }
}

/// Transmit-power coefficients per decode rank.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPlan {
    pub p_aim: f64,
    pub zeta_db: f64,
    pub path_losses: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl PowerPlan {
    /// `L_k a_k = 10^(-(k-1)ζ/10)` for the 1-based `rank`.
    pub fn arrived_fraction(&self, rank: usize) -> f64 {
        backoff_fraction(self.zeta_db, rank)
    }

    /// Transmitted power `P_k = a_k P_aim`.
    pub fn transmit_power(&self, rank: usize) -> f64 {
        self.coefficients[rank - 1] * self.p_aim
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

fn backoff_fraction(zeta_db: f64, rank: usize) -> f64 {
    10f64.powf(-((rank - 1) as f64) * zeta_db / 10.0)
}

/// Path-loss inversion with a ζ dB back-off per rank.
pub fn make_power_plan(
    links: &[UserLink],
    attenuation_per_km: f64,
    p_aim: f64,
    zeta_db: f64,
) -> Result<PowerPlan> {
    if !(zeta_db >= 0.0 && zeta_db.is_finite()) {
        return Err(Error::domain("zeta_db", zeta_db, ">= 0"));
    }
    if !(p_aim > 0.0 && p_aim.is_finite()) {
        return Err(Error::domain("p_aim", p_aim, "> 0"));
    }
    let path_losses = links
        .iter()
        .map(|l| path_loss(attenuation_per_km, l.distance_km))
        .collect::<Result<Vec<_>>>()?;
    let coefficients = path_losses
        .iter()
        .enumerate()
        .map(|(i, &l)| 1.0 / (l * 10f64.powf(i as f64 * zeta_db / 10.0)))
        .collect();
    Ok(PowerPlan {
        p_aim,
        zeta_db,
        path_losses,
        coefficients,
    })
}

/// Multiple-access scheme whose sum rate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Noma,
    Oma,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Noma => "NOMA",
            Scheme::Oma => "OMA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    /// Rates in nats.
    #[default]
    Natural,
    /// Rates in bits.
    Binary,
}

impl LogBase {
    pub fn log(&self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Binary => x.log2(),
        }
    }

    /// `log(1 + x)`, accurate for small `x`.
    pub fn log1p(&self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln_1p(),
            LogBase::Binary => x.ln_1p() / std::f64::consts::LN_2,
        }
    }

    /// `base^x - 1`.
    pub fn exp_m1(&self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.exp_m1(),
            LogBase::Binary => (x * std::f64::consts::LN_2).exp_m1(),
        }
    }
}

/// Constants of the IM/DD capacity bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    pub eps_phi: f64,
    pub eps_mu: f64,
    pub log_base: LogBase,
}

impl Default for RateConstants {
    fn default() -> Self {
        RateConstants {
            eps_phi: 0.016,
            eps_mu: 0.0015,
            log_base: LogBase::Natural,
        }
    }
}

impl RateConstants {
    /// `A = 9 (1 + ε_μ)²`.
    pub fn noise_factor(&self) -> f64 {
        9.0 * (1.0 + self.eps_mu).powi(2)
    }

    /// SINR threshold `φ = base^(2(R̃ + ε_φ)) - 1` for a target rate.
    pub fn sinr_threshold(&self, target_rate: f64) -> f64 {
        self.log_base.exp_m1(2.0 * (target_rate + self.eps_phi))
    }

    /// `[½ log(1 + sinr) - ε_φ]` without the clamp.
    pub fn raw_rate(&self, sinr: f64) -> f64 {
        0.5 * self.log_base.log1p(sinr) - self.eps_phi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub psd: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Indexed by decode rank: `users[0]` is rank 1.
    pub users: Vec<UserLink>,
    pub plan: PowerPlan,
    /// `ρ = P_aim² / (N₀ B)`.
    pub rho: f64,
    pub fading: GammaGammaDist,
    pub constants: RateConstants,
    pub noise: Option<NoiseSpec>,
}

impl SystemConfig {
    pub fn new(
        users: Vec<UserLink>,
        plan: PowerPlan,
        rho: f64,
        fading: GammaGammaDist,
    ) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::Config("at least one user is required".into()));
        }
        if plan.len() != users.len() {
            return Err(Error::Config(format!(
                "power plan has {} coefficients for {} users",
                plan.len(),
                users.len()
            )));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::domain("rho", rho, "> 0"));
        }
        Ok(SystemConfig {
            users,
            plan,
            rho,
            fading,
            constants: RateConstants::default(),
            noise: None,
        })
    }

    /// Attaches the physical noise parameters; `ρ` must equal
    /// `P_aim² / (N₀ B)`.
    pub fn with_noise(mut self, psd: f64, bandwidth: f64) -> Result<Self> {
        if !(psd > 0.0 && bandwidth > 0.0) {
            return Err(Error::Config("noise psd and bandwidth must be positive".into()));
        }
        let implied = self.plan.p_aim.powi(2) / (psd * bandwidth);
        if (implied - self.rho).abs() > 1e-9 * self.rho {
            return Err(Error::Config(format!(
                "rho = {} is inconsistent with p_aim²/(N₀B) = {implied}",
                self.rho
            )));
        }
        self.noise = Some(NoiseSpec { psd, bandwidth });
        Ok(self)
    }

    pub fn with_constants(mut self, constants: RateConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        let mut next = self.clone();
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::domain("rho", rho, "> 0"));
        }
        next.rho = rho;
        next.noise = None;
        Ok(next)
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// `ρ μ_k² (L_k a_k)²`: multiplies `h_k` to give the received SNR term.
    pub fn snr_weight(&self, rank: usize) -> f64 {
        let mu = self.users[rank - 1].mu;
        let c = self.plan.arrived_fraction(rank);
        self.rho * mu * mu * c * c
    }
}

/// Permutation listing physical user indices in decode order: descending
/// intensity, ties by ascending index.
pub fn decode_order(intensities: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..intensities.len()).collect();
    idx.sort_by(|&a, &b| intensities[b].total_cmp(&intensities[a]).then(a.cmp(&b)));
    idx
}

/// One channel realization, ordered for SIC.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    /// Intensities per physical user.
    pub intensities: Vec<f64>,
    /// `by_rank[k]` is the physical user decoded at (0-based) rank `k`.
    pub by_rank: Vec<usize>,
    /// `rank_of[u]` is the (0-based) decode rank of physical user `u`.
    pub rank_of: Vec<usize>,
    /// `h = I²` per rank, non-increasing.
    pub h: Vec<f64>,
    /// `g = L·I` per rank, with the path loss of the physical user.
    pub gains: Vec<f64>,
}

impl ChannelDraw {
    pub fn from_intensities(intensities: &[f64], path_losses: &[f64]) -> Result<Self> {
        if intensities.len() != path_losses.len() {
            return Err(Error::Config(
                "intensities and path losses differ in length".into(),
            ));
        }
        if let Some(&bad) = intensities.iter().find(|&&i| !(i > 0.0)) {
            return Err(Error::domain("intensity", bad, "> 0"));
        }
        let by_rank = decode_order(intensities);
        let mut rank_of = vec![0; by_rank.len()];
        for (rank, &u) in by_rank.iter().enumerate() {
            rank_of[u] = rank;
        }
        let h = by_rank.iter().map(|&u| intensities[u] * intensities[u]).collect();
        let gains = by_rank
            .iter()
            .map(|&u| path_losses[u] * intensities[u])
            .collect();
        Ok(ChannelDraw {
            intensities: intensities.to_vec(),
            by_rank,
            rank_of,
            h,
            gains,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub per_user: Vec<f64>,
    pub sum_rate: f64,
}

impl RateResult {
    fn from_rates(per_user: Vec<f64>) -> Self {
        let sum_rate = per_user.iter().sum();
        RateResult { per_user, sum_rate }
    }
}

fn check_draw(cfg: &SystemConfig, h: &[f64]) -> Result<()> {
    if h.len() != cfg.user_count() {
        return Err(Error::Config(format!(
            "draw has {} users, configuration has {}",
            h.len(),
            cfg.user_count()
        )));
    }
    Ok(())
}

/// Unclamped SIC rates `½ log(1 + S_k / (Σ_{i>k} S_i + A)) - ε_φ` per rank,
/// from ranked `h`.
pub(crate) fn sic_raw_rates_into(cfg: &SystemConfig, h: &[f64], out: &mut [f64]) {
    let a = cfg.constants.noise_factor();
    let mut interference = 0.0;
    for k in (0..h.len()).rev() {
        let signal = cfg.snr_weight(k + 1) * h[k];
        out[k] = cfg.constants.raw_rate(signal / (interference + a));
        interference += signal;
    }
}

pub fn sic_rates_unclamped(cfg: &SystemConfig, draw: &ChannelDraw) -> Result<Vec<f64>> {
    check_draw(cfg, &draw.h)?;
    let mut out = vec![0.0; draw.h.len()];
    sic_raw_rates_into(cfg, &draw.h, &mut out);
    Ok(out)
}

/// Achievable NOMA rates with perfect SIC, clamped at zero.
pub fn sic_rates(cfg: &SystemConfig, draw: &ChannelDraw) -> Result<RateResult> {
    let raw = sic_rates_unclamped(cfg, draw)?;
    Ok(RateResult::from_rates(raw.into_iter().map(|r| r.max(0.0)).collect()))
}

/// `½ log(1 + Σ_k S_k / A) - K ε_φ`: the unclamped sum of the SIC rates in
/// closed form.
pub fn telescoped_sum_rate(cfg: &SystemConfig, h: &[f64]) -> f64 {
    let a = cfg.constants.noise_factor();
    let total: f64 = h
        .iter()
        .enumerate()
        .map(|(k, &hk)| cfg.snr_weight(k + 1) * hk)
        .sum();
    0.5 * cfg.constants.log_base.log1p(total / a) - h.len() as f64 * cfg.constants.eps_phi
}

/// Interference-free single-user rate of rank `k` without back-off,
/// clamped, before the `1/K` time share.
pub(crate) fn oma_slot_rate(cfg: &SystemConfig, rank: usize, h: f64) -> f64 {
    let mu = cfg.users[rank - 1].mu;
    let snr = cfg.rho * mu * mu * h / cfg.constants.noise_factor();
    cfg.constants.raw_rate(snr).max(0.0)
}

/// Equal-time TDMA baseline: each rank gets `1/K` of the time at its
/// path-loss-compensated arrived power, with no back-off and no
/// interference.
pub fn oma_rates(cfg: &SystemConfig, draw: &ChannelDraw) -> Result<RateResult> {
    check_draw(cfg, &draw.h)?;
    let share = 1.0 / cfg.user_count() as f64;
    Ok(RateResult::from_rates(
        draw.h
            .iter()
            .enumerate()
            .map(|(k, &h)| share * oma_slot_rate(cfg, k + 1, h))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::AtmosphericConfig;
    use crate::monte_carlo::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn phi() -> f64 {
        AtmosphericConfig::new(16.0, 1550.0)
            .unwrap()
            .attenuation_coefficient()
            .unwrap()
    }

    fn two_users(zeta: f64, rho: f64, mu: f64) -> SystemConfig {
        let users = vec![
            UserLink::new(1.0, 0.5, mu).unwrap(),
            UserLink::new(3.0, 0.5, mu).unwrap(),
        ];
        let plan = make_power_plan(&users, phi(), 1.0, zeta).unwrap();
        SystemConfig::new(users, plan, rho, GammaGammaDist::new(4.39, 2.56).unwrap()).unwrap()
    }

    fn draw(h: &[f64]) -> ChannelDraw {
        let i: Vec<f64> = h.iter().map(|x| x.sqrt()).collect();
        ChannelDraw::from_intensities(&i, &vec![1.0; h.len()]).unwrap()
    }

    #[test]
    fn user_link_validation() {
        assert!(UserLink::new(1.0, 0.5, 0.6).is_err());
        assert!(UserLink::new(1.0, -0.1, 0.5).is_err());
        assert!(UserLink::new(0.0, 0.1, 0.5).is_err());
        assert!(UserLink::new(1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn power_plan_examples() {
        let users = two_users(0.0, 1.0, 0.5).users;
        let plan = make_power_plan(&users, phi(), 2.0, 0.0).unwrap();
        for (a, l) in plan.coefficients.iter().zip(&plan.path_losses) {
            assert!((a * l - 1.0).abs() < 1e-15);
        }
        let plan = make_power_plan(&users, phi(), 2.0, 5.0).unwrap();
        assert!((plan.coefficients[1] - 0.382_643_832_454_682_2).abs() < 1e-12);
        assert!((plan.coefficients[0] - 1.0 / plan.path_losses[0]).abs() < 1e-15);
        assert!((plan.transmit_power(2) - 2.0 * plan.coefficients[1]).abs() < 1e-15);
        assert!((plan.path_losses[1] * plan.coefficients[1] - plan.arrived_fraction(2)).abs() < 1e-15);
        assert!(make_power_plan(&users, phi(), 2.0, -1.0).is_err());
    }

    #[test]
    fn noise_consistency() {
        let cfg = two_users(5.0, 100.0, 0.5);
        assert!(cfg.clone().with_noise(0.01, 1.0).is_ok());
        assert!(cfg.with_noise(0.02, 1.0).is_err());
    }

    #[test]
    fn decode_order_examples() {
        assert_eq!(decode_order(&[2.0, 1.0]), vec![0, 1]);
        assert_eq!(decode_order(&[1.0, 2.0]), vec![1, 0]);
        assert_eq!(decode_order(&[1.0, 3.0, 1.0, 3.0]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn draw_keeps_gain_and_rank_bookkeeping() {
        let d = ChannelDraw::from_intensities(&[0.5, 2.0], &[0.9, 0.8]).unwrap();
        assert_eq!(d.by_rank, vec![1, 0]);
        assert_eq!(d.rank_of, vec![1, 0]);
        assert_eq!(d.h, vec![4.0, 0.25]);
        assert_eq!(d.gains, vec![1.6, 0.45]);
        assert!(ChannelDraw::from_intensities(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_mu_gives_zero_rates() {
        let cfg = two_users(5.0, 1e4, 0.0);
        let r = sic_rates(&cfg, &draw(&[2.0, 1.0])).unwrap();
        assert_eq!(r.per_user, vec![0.0, 0.0]);
        assert_eq!(oma_rates(&cfg, &draw(&[2.0, 1.0])).unwrap().sum_rate, 0.0);
    }

    #[test]
    fn single_user_reduction() {
        let users = vec![UserLink::new(1.0, 0.5, 0.4).unwrap()];
        let plan = make_power_plan(&users, phi(), 1.0, 3.0).unwrap();
        let cfg = SystemConfig::new(users, plan, 250.0, GammaGammaDist::new(4.39, 2.56).unwrap())
            .unwrap();
        let a = cfg.constants.noise_factor();
        let want = (0.5 * (1.0 + 250.0 * 0.16 * 0.7 / a).ln() - 0.016).max(0.0);
        let d = draw(&[0.7]);
        let noma = sic_rates(&cfg, &d).unwrap();
        assert!((noma.per_user[0] - want).abs() < 1e-15);
        assert_eq!(noma, oma_rates(&cfg, &d).unwrap());
    }

    #[test]
    fn oma_hand_evaluation() {
        let cfg = two_users(5.0, 1e3, 0.5);
        let a = 9.0 * 1.0015f64 * 1.0015;
        let single = 0.5 * (1.0 + 1e3 * 0.25 / a).ln() - 0.016;
        let r = oma_rates(&cfg, &draw(&[1.0, 1.0])).unwrap();
        assert!((r.sum_rate - 0.5 * (single + single)).abs() < 1e-14);
    }

    #[test]
    fn telescoping_on_random_draws() {
        let mut rng = stream_rng(5, 0);
        for k in 1..=4 {
            let users: Vec<UserLink> = (0..k)
                .map(|i| UserLink::new(1.0 + i as f64, 0.3, rng.random_range(0.05..0.5)).unwrap())
                .collect();
            let plan = make_power_plan(&users, phi(), 1.0, rng.random_range(0.0..6.0)).unwrap();
            let cfg = SystemConfig::new(users, plan, 10f64.powf(rng.random_range(0.0..6.0)),
                GammaGammaDist::new(4.39, 2.56).unwrap()).unwrap();
            for _ in 0..2500 {
                let mut h: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..4.0)).collect();
                h.sort_by(|a, b| b.total_cmp(a));
                let raw: f64 = sic_rates_unclamped(&cfg, &draw(&h)).unwrap().iter().sum();
                let closed = telescoped_sum_rate(&cfg, &h);
                assert!((raw - closed).abs() <= 1e-12 * closed.abs().max(1e-300), "{raw} {closed}");
            }
        }
    }

    #[test]
    fn backoff_reduces_rank2_snr_and_rank1_interference() {
        let low = two_users(2.0, 1e3, 0.5);
        let high = two_users(5.0, 1e3, 0.5);
        assert!(high.snr_weight(2) < low.snr_weight(2));
        assert_eq!(high.snr_weight(1), low.snr_weight(1));
        let d = draw(&[1.0, 0.8]);
        let r_low = sic_rates(&low, &d).unwrap();
        let r_high = sic_rates(&high, &d).unwrap();
        assert!(r_high.per_user[0] > r_low.per_user[0]);
        assert!(r_high.per_user[1] < r_low.per_user[1]);
    }

    #[test]
    fn log_base_switch() {
        let mut c = RateConstants::default();
        let nats = c.raw_rate(3.0) + c.eps_phi;
        c.log_base = LogBase::Binary;
        let bits = c.raw_rate(3.0) + c.eps_phi;
        assert!((bits - nats / std::f64::consts::LN_2).abs() < 1e-15);
        assert!((c.sinr_threshold(0.5) - (2f64.powf(2.0 * 0.516) - 1.0)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn clamp_and_monotonicity(h1 in 1e-3f64..10.0, h2 in 1e-3f64..10.0, bump in 1.0f64..3.0,
                                   rho_db in -10.0f64..60.0, zeta in 0.0f64..8.0) {
            let (hi, lo) = if h1 >= h2 { (h1, h2) } else { (h2, h1) };
            let cfg = two_users(zeta, 10f64.powf(rho_db / 10.0), 0.5);
            let d = draw(&[hi, lo]);
            let raw = sic_rates_unclamped(&cfg, &d).unwrap();
            let r = sic_rates(&cfg, &d).unwrap();
            for (c, u) in r.per_user.iter().zip(&raw) {
                prop_assert!(*c >= 0.0);
                let expect = if *u >= 0.0 { *u } else { 0.0 };
                prop_assert_eq!(*c, expect);
            }
            prop_assert!((r.sum_rate - r.per_user.iter().sum::<f64>()).abs() < 1e-15);
            // R_1 with fixed interference is nondecreasing in h_1 and in rho
            let up = sic_rates(&cfg, &draw(&[hi * bump, lo])).unwrap();
            prop_assert!(up.per_user[0] >= r.per_user[0]);
            let louder = two_users(zeta, 10f64.powf(rho_db / 10.0) * bump, 0.5);
            let r_louder = sic_rates(&louder, &d).unwrap();
            prop_assert!(r_louder.per_user[0] >= r.per_user[0]);
            prop_assert!(r_louder.per_user[1] >= r.per_user[1]);
        }
    }
}
