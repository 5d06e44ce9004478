//! Fixture and oracle checks behind `fso-noma validate`.

use std::path::{Path, PathBuf};

use fso_noma::channel::{AtmosphericConfig, GammaGammaDist, TurbulenceSpec};
use fso_noma::link::{
    make_power_plan, sic_rates_unclamped, telescoped_sum_rate, ChannelDraw, SystemConfig, UserLink,
};
use fso_noma::monte_carlo::stream_rng;
use fso_noma::order_stats::OrderedChannelSet;
use fso_noma::quadrature::{integrate_to_infinity, Tolerance};
use fso_noma::special::ln_bessel_k;
use fso_noma::stats::{ks_test_sorted, KsOutcome};
use rand::Rng;

pub const H_CDF: &str = "h_cdf.csv";
pub const INTENSITY_PDF: &str = "intensity_pdf.csv";
pub const BESSEL_K: &str = "bessel_k.csv";

const EMBEDDED: [(&str, &str); 3] = [
    (H_CDF, include_str!("../../../fixtures/h_cdf.csv")),
    (INTENSITY_PDF, include_str!("../../../fixtures/intensity_pdf.csv")),
    (BESSEL_K, include_str!("../../../fixtures/bessel_k.csv")),
];

/// Weak (0.1) and moderate (1) turbulence.
pub const REFERENCE_RYTOV: [f64; 2] = [0.1, 1.0];
const KS_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn failed(name: &str, detail: String) -> Self {
        Check::new(name, false, detail)
    }
}

/// Where fixture tables are read from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum FixtureSource {
    /// Tables compiled into the binary.
    #[default]
    Embedded,
    Dir(PathBuf),
}

impl FixtureSource {
    fn read(&self, name: &str) -> Result<String, String> {
        match self {
            FixtureSource::Embedded => Ok(EMBEDDED
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_string())
                .expect("known fixture")),
            FixtureSource::Dir(dir) => {
                let path = dir.join(name);
                std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }
}

/// Parses a numeric CSV with the given header.
fn parse_table(name: &str, text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head: Vec<&str> = lines
        .next()
        .ok_or_else(|| format!("fixture {name} is empty"))?
        .split(',')
        .map(str::trim)
        .collect();
    if head != header {
        return Err(format!("fixture {name}: header {head:?}, expected {header:?}"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            match row {
                Ok(r) if r.len() == header.len() && r.iter().all(|v| v.is_finite()) => Ok(r),
                _ => Err(format!("fixture {name}: malformed row {}: {line:?}", i + 2)),
            }
        })
        .collect()
}

fn reference_distribution(rytov: f64) -> GammaGammaDist {
    TurbulenceSpec::from_rytov(rytov)
        .expect("positive Rytov variance")
        .distribution()
}

/// The intensity density integrates to one.
pub fn pdf_normalization() -> Check {
    let name = "pdf_normalization";
    let tol = Tolerance {
        abs: 1e-12,
        rel: 1e-10,
    };
    let mut worst = 0.0f64;
    for s in REFERENCE_RYTOV {
        let d = reference_distribution(s);
        match integrate_to_infinity(|x| d.intensity_density(x), 0.0, tol) {
            Ok(r) => worst = worst.max((r.value - 1.0).abs()),
            Err(e) => return Check::failed(name, format!("rytov {s}: {e}")),
        }
    }
    Check::new(name, worst <= 1e-6, format!("max |∫f - 1| = {worst:.3e}"))
}

/// `h_cdf` against the high-precision table; 20 rows, 1e-6 absolute.
pub fn h_cdf_fixture(src: &FixtureSource) -> Check {
    let name = "h_cdf_fixture";
    let rows = match src
        .read(H_CDF)
        .and_then(|t| parse_table(H_CDF, &t, &["alpha", "beta", "y", "cdf"]))
    {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e),
    };
    if rows.len() != 20 {
        return Check::failed(name, format!("fixture {H_CDF}: {} rows, expected 20", rows.len()));
    }
    let mut worst = 0.0f64;
    for r in &rows {
        let got = GammaGammaDist::new(r[0], r[1]).and_then(|d| d.h_cdf(r[2]));
        match got {
            Ok(v) => worst = worst.max((v - r[3]).abs()),
            Err(e) => return Check::failed(name, format!("fixture {H_CDF}: {e}")),
        }
    }
    let passed = worst <= 1e-6;
    let mut detail = format!("max abs error {worst:.3e} over {} rows", rows.len());
    if !passed {
        detail = format!("fixture {H_CDF}: {detail}");
    }
    Check::new(name, passed, detail)
}

/// Intensity density against the high-precision table, 1e-8 relative.
pub fn intensity_pdf_fixture(src: &FixtureSource) -> Check {
    let name = "intensity_pdf_fixture";
    let rows = match src
        .read(INTENSITY_PDF)
        .and_then(|t| parse_table(INTENSITY_PDF, &t, &["alpha", "beta", "intensity", "pdf"]))
    {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e),
    };
    if rows.is_empty() {
        return Check::failed(name, format!("fixture {INTENSITY_PDF} has no rows"));
    }
    let mut worst = 0.0f64;
    for r in &rows {
        match GammaGammaDist::new(r[0], r[1]).and_then(|d| d.intensity_pdf(r[2])) {
            Ok(v) => worst = worst.max((v - r[3]).abs() / r[3].abs()),
            Err(e) => return Check::failed(name, format!("fixture {INTENSITY_PDF}: {e}")),
        }
    }
    let passed = worst <= 1e-8;
    let mut detail = format!("max rel error {worst:.3e} over {} rows", rows.len());
    if !passed {
        detail = format!("fixture {INTENSITY_PDF}: {detail}");
    }
    Check::new(name, passed, detail)
}

/// `ln K_ν(x)` against the high-precision table, 1e-10 relative on `K`.
pub fn bessel_fixture(src: &FixtureSource) -> Check {
    let name = "bessel_k_fixture";
    let rows = match src
        .read(BESSEL_K)
        .and_then(|t| parse_table(BESSEL_K, &t, &["order", "x", "value"]))
    {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e),
    };
    if rows.is_empty() {
        return Check::failed(name, format!("fixture {BESSEL_K} has no rows"));
    }
    let worst = rows
        .iter()
        .map(|r| {
            if r[2] > 0.0 {
                (ln_bessel_k(r[0], r[1]) - r[2].ln()).abs()
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0f64, f64::max);
    let passed = worst <= 1e-10;
    let mut detail = format!("max |Δ ln K| {worst:.3e} over {} rows", rows.len());
    if !passed {
        detail = format!("fixture {BESSEL_K}: {detail}");
    }
    Check::new(name, passed, detail)
}

/// Mean, variance and KS test of `n` sampler draws per Rytov setting.
pub fn sampler_fidelity(n: usize, seed: u64) -> Check {
    let name = "sampler_fidelity";
    let mut details = Vec::new();
    let mut passed = true;
    for (i, s) in REFERENCE_RYTOV.into_iter().enumerate() {
        let d = reference_distribution(s);
        let sampler = d.sampler();
        let mut rng = stream_rng(seed, i as u64);
        let mut xs: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        let se_mean = (var / nf).sqrt();
        let se_var = ((m4 - var * var) / nf).sqrt();
        let (a, b) = (d.alpha(), d.beta());
        let want_var = 1.0 / a + 1.0 / b + 1.0 / (a * b);
        let mean_ok = (mean - 1.0).abs() <= 3.0 * se_mean;
        let var_ok = (var - want_var).abs() <= 3.0 * se_var;
        xs.sort_by(f64::total_cmp);
        let ks = match d.intensity_cdf_sorted(&xs) {
            Ok(cdf) => ks_test_sorted(&cdf),
            Err(e) => return Check::failed(name, format!("rytov {s}: {e}")),
        };
        let ks_ok = ks.accepted_at(KS_LEVEL);
        passed &= mean_ok && var_ok && ks_ok;
        details.push(format!(
            "rytov {s}: mean {mean:.5} (±{se_mean:.1e}), var {var:.5} vs {want_var:.5} (±{se_var:.1e}), KS p={:.3}",
            ks.p_value
        ));
    }
    Check::new(name, passed, details.join("; "))
}

/// KS tests of both ranks of `K = 2` against the ordered marginal CDFs
/// `F(y)²` (rank 1) and `1 - (1 - F(y))²` (rank 2), which are the integrals
/// of the ordered marginal densities.
pub fn order_statistic_ks(n: usize, seed: u64) -> (Check, [KsOutcome; 2]) {
    let name = "order_statistic_ks";
    let d = reference_distribution(1.0);
    let set = OrderedChannelSet::new(2, d).expect("two users");
    let mut rng = stream_rng(seed, 7);
    let mut ranks = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for _ in 0..n {
        let h = set.sample_ordered(&mut rng);
        ranks[0].push(h[0].sqrt());
        ranks[1].push(h[1].sqrt());
    }
    let mut out = Vec::new();
    for (k, xs) in ranks.iter_mut().enumerate() {
        xs.sort_by(f64::total_cmp);
        let cdf = match d.intensity_cdf_sorted(xs) {
            Ok(c) => c,
            Err(e) => {
                let dummy = KsOutcome {
                    statistic: f64::NAN,
                    p_value: 0.0,
                    n,
                };
                return (Check::failed(name, e.to_string()), [dummy, dummy]);
            }
        };
        let marginal: Vec<f64> = cdf
            .iter()
            .map(|&f| if k == 0 { f * f } else { 1.0 - (1.0 - f).powi(2) })
            .collect();
        out.push(ks_test_sorted(&marginal));
    }
    let ks = [out[0], out[1]];
    let passed = ks.iter().all(|o| o.accepted_at(KS_LEVEL));
    let detail = format!(
        "n={n}: rank 1 D={:.2e} p={:.3}, rank 2 D={:.2e} p={:.3}",
        ks[0].statistic, ks[0].p_value, ks[1].statistic, ks[1].p_value
    );
    (Check::new(name, passed, detail), ks)
}

/// `Σ_k f'_k(h) = K f(h)` at 50 points for `K = 2`, 1e-10 relative.
pub fn marginal_decomposition() -> Check {
    let name = "marginal_decomposition";
    let mut worst = 0.0f64;
    for s in REFERENCE_RYTOV {
        let d = reference_distribution(s);
        let set = OrderedChannelSet::new(2, d).expect("two users");
        for i in 1..=50 {
            let h = 0.05 * i as f64;
            let sum: Result<f64, _> = (1..=2).map(|k| set.ordered_marginal_pdf(k, h)).sum();
            match sum {
                Ok(v) => {
                    let want = 2.0 * d.h_density(h);
                    worst = worst.max((v - want).abs() / want);
                }
                Err(e) => return Check::failed(name, e.to_string()),
            }
        }
    }
    Check::new(name, worst <= 1e-10, format!("max rel error {worst:.3e} at 100 points"))
}

/// Two users at 1 km and 3 km, 1550 nm, 16 km visibility, at `ρ` (dB), `ζ` (dB) and Rytov variance.
pub fn reference_system(rytov: f64, zeta_db: f64, rho_db: f64, rates: [f64; 2]) -> SystemConfig {
    let phi = AtmosphericConfig::new(16.0, 1550.0)
        .and_then(|a| a.attenuation_coefficient())
        .expect("reference atmosphere");
    let users = vec![
        UserLink::new(1.0, rates[0], UserLink::DEFAULT_MU).expect("user 1"),
        UserLink::new(3.0, rates[1], UserLink::DEFAULT_MU).expect("user 2"),
    ];
    let plan = make_power_plan(&users, phi, 1.0, zeta_db).expect("power plan");
    SystemConfig::new(users, plan, 10f64.powf(rho_db / 10.0), reference_distribution(rytov))
        .expect("system")
}

/// Unclamped SIC rates sum to the telescoped closed form, 1e-12 relative,
/// on `n` random draws.
pub fn telescoping(n: usize, seed: u64) -> Check {
    let name = "telescoping_identity";
    let mut rng = stream_rng(seed, 11);
    let mut worst = 0.0f64;
    for i in 0..n {
        let rytov = REFERENCE_RYTOV[i % 2];
        let sys = reference_system(rytov, rng.random_range(0.0..8.0), rng.random_range(0.0..60.0), [0.5, 0.5]);
        let sampler = sys.fading.sampler();
        let intensities = [sampler.sample(&mut rng), sampler.sample(&mut rng)];
        let draw = match ChannelDraw::from_intensities(&intensities, &sys.plan.path_losses) {
            Ok(d) => d,
            Err(e) => return Check::failed(name, e.to_string()),
        };
        let sum: f64 = match sic_rates_unclamped(&sys, &draw) {
            Ok(r) => r.iter().sum(),
            Err(e) => return Check::failed(name, e.to_string()),
        };
        let closed = telescoped_sum_rate(&sys, &draw.h);
        worst = worst.max((sum - closed).abs() / closed.abs().max(f64::MIN_POSITIVE));
    }
    Check::new(name, worst <= 1e-12, format!("max rel error {worst:.3e} over {n} draws"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    pub quick: bool,
    pub fixtures: FixtureSource,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            quick: false,
            fixtures: FixtureSource::Embedded,
            seed: 0x5eed,
        }
    }
}

/// Runs the suite. `quick` shrinks the sampler check to 10⁵ draws. Each KS
/// check rejects a correct sampler with probability 0.01 for a given seed.
pub fn run_validation(opts: &ValidateOptions) -> Vec<Check> {
    let draws = if opts.quick { 100_000 } else { 1_000_000 };
    let ks_draws = 100_000;
    vec![
        pdf_normalization(),
        h_cdf_fixture(&opts.fixtures),
        intensity_pdf_fixture(&opts.fixtures),
        bessel_fixture(&opts.fixtures),
        sampler_fidelity(draws, opts.seed),
        order_statistic_ks(ks_draws, opts.seed).0,
        marginal_decomposition(),
        telescoping(10_000, opts.seed),
    ]
}

/// The directory holding the repository's fixture tables.
pub fn repo_fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_parser_rejects_damage() {
        let ok = parse_table("t", "a,b\n1,2\n3,4\n", &["a", "b"]).unwrap();
        assert_eq!(ok, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(parse_table("t", "a,b\n1,x\n", &["a", "b"]).unwrap_err().contains("row 2"));
        assert!(parse_table("t", "a,c\n1,2\n", &["a", "b"]).is_err());
        assert!(parse_table("t", "", &["a"]).is_err());
    }

    #[test]
    fn embedded_fixtures_pass() {
        let src = FixtureSource::Embedded;
        for c in [h_cdf_fixture(&src), intensity_pdf_fixture(&src), bessel_fixture(&src)] {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn damaged_value_names_fixture() {
        let dir = std::env::temp_dir().join(format!("fso-noma-fixture-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for (name, text) in EMBEDDED {
            std::fs::write(dir.join(name), text).unwrap();
        }
        let text = EMBEDDED[0].1.replace("0.013193965901359396", "0.0132");
        std::fs::write(dir.join(H_CDF), text).unwrap();
        let c = h_cdf_fixture(&FixtureSource::Dir(dir.clone()));
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(!c.passed);
        assert!(c.detail.contains(H_CDF), "{c:?}");
    }
}
