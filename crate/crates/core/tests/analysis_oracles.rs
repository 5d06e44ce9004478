use fso_noma::analysis::{
    ergodic_sum_rate_noma, ergodic_sum_rate_oma, success_prob_rank_k, success_prob_weakest,
    OutageThresholds, RateMethod,
};
use fso_noma::channel::{AtmosphericConfig, TurbulenceSpec};
use fso_noma::link::{make_power_plan, SystemConfig, UserLink};
use fso_noma::monte_carlo::{stream_rng, McSettings, RngPolicy};
use fso_noma::order_stats::OrderedChannelSet;

fn system(rytov: f64, zeta: f64, rho: f64) -> SystemConfig {
    with_rate(rytov, zeta, rho, 0.5)
}

fn with_rate(rytov: f64, zeta: f64, rho: f64, rate: f64) -> SystemConfig {
    let phi = AtmosphericConfig::new(16.0, 1550.0)
        .unwrap()
        .attenuation_coefficient()
        .unwrap();
    let users = vec![
        UserLink::new(1.0, rate, 0.5).unwrap(),
        UserLink::new(3.0, 0.5, 0.5).unwrap(),
    ];
    let plan = make_power_plan(&users, phi, 1.0, zeta).unwrap();
    let fading = TurbulenceSpec::from_rytov(rytov).unwrap().distribution();
    SystemConfig::new(users, plan, rho, fading).unwrap()
}

#[test]
fn ergodic_quadrature_agrees_with_million_draws() {
    let settings = McSettings::new(1_000_000, RngPolicy::new(77, 10_000).unwrap());
    for rytov in [0.1, 1.0] {
        for rho_db in [10.0, 30.0] {
            let cfg = system(rytov, 5.0, 10f64.powf(rho_db / 10.0));
            let q = ergodic_sum_rate_noma(&cfg, RateMethod::Quadrature).unwrap();
            let mc = ergodic_sum_rate_noma(&cfg, RateMethod::MonteCarlo(settings)).unwrap();
            let se = mc.std_error.unwrap();
            assert!((q.literal - mc.literal).abs() < 3.0 * se, "NOMA {rytov} {rho_db}: {q:?} {mc:?}");
            let q = ergodic_sum_rate_oma(&cfg, RateMethod::Quadrature).unwrap();
            let mc = ergodic_sum_rate_oma(&cfg, RateMethod::MonteCarlo(settings)).unwrap();
            let se = mc.std_error.unwrap();
            assert!((q.literal - mc.literal).abs() < 3.0 * se, "OMA {rytov} {rho_db}: {q:?} {mc:?}");
        }
    }
}

#[test]
fn interference_limited_success_at_huge_rho() {
    // ν → φ (w₂/w₁) h₂: success is the probability that h₁/h₂ beats that
    // ratio, which only binds once φ w₂/w₁ > 1
    let cfg = with_rate(1.0, 2.0, 1e12, 1.0);
    let p = success_prob_rank_k(&cfg, 1).unwrap().success();
    let th = OutageThresholds::new(&cfg);
    let set = OrderedChannelSet::new(2, cfg.fading).unwrap();
    let mut rng = stream_rng(4, 0);
    let n = 400_000;
    let hits = (0..n)
        .filter(|_| {
            let h = set.sample_ordered(&mut rng);
            h[0] > th.nu(1, &h[1..])
        })
        .count();
    let f = hits as f64 / n as f64;
    let se = (f * (1.0 - f) / n as f64).sqrt();
    assert!(p > 0.0 && p < 1.0);
    assert!((p - f).abs() < 4.0 * se, "{p} vs {f}");
    assert!(success_prob_weakest(&cfg).unwrap().success() > 1.0 - 1e-9);
}
