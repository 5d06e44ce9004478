//! Theory + Monte Carlo sweeps over an experiment grid.

use fso_noma::analysis::{
    ergodic_sum_rate_noma, ergodic_sum_rate_oma, outage_per_user, MethodUsed, RateMethod,
};
use fso_noma::link::Scheme;
use fso_noma::monte_carlo::{
    simulate_outage, simulate_sum_rate, McSettings, RngPolicy, DEFAULT_OUTAGE_TRIALS,
    DEFAULT_SUM_RATE_TRIALS,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::csv::{Cell, CsvTable};
use crate::CliError;

pub const OUTAGE_COLUMNS: [&str; 9] = [
    "rho_dB",
    "user_rank",
    "zeta_dB",
    "rytov_var",
    "target_rate",
    "outage_theory",
    "outage_mc",
    "mc_stderr",
    "n_trials",
];

pub const SUMRATE_COLUMNS: [&str; 7] = [
    "rho_dB",
    "scheme",
    "rytov_var",
    "zeta_dB",
    "sum_rate",
    "stderr_or_blank",
    "method",
];

/// Command-line overrides of the config's Monte Carlo settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
}

fn mc_settings(cfg: &ExperimentConfig, ov: Overrides, default_trials: u64) -> Result<McSettings, CliError> {
    let n = ov.trials.or(cfg.mc.n_trials).unwrap_or(default_trials);
    let seed = ov.seed.unwrap_or(cfg.mc.seed);
    let policy = RngPolicy::new(seed, cfg.mc.chunk_size).map_err(|e| CliError::from_core(e, "mc"))?;
    Ok(McSettings::new(n, policy))
}

fn context(rytov: f64, zeta: f64, rho_db: f64) -> String {
    format!("rytov_var={rytov} zeta_dB={zeta} rho_dB={rho_db}")
}

/// One row per (ρ, user, ζ, σ_R², rate set).
pub fn cmd_outage(cfg: &ExperimentConfig, ov: Overrides) -> Result<CsvTable, CliError> {
    let settings = mc_settings(cfg, ov, DEFAULT_OUTAGE_TRIALS)?;
    let mut points = Vec::new();
    for &rytov in &cfg.rytov_variances {
        for rates in cfg.rate_sets() {
            for &zeta in &cfg.zeta_db {
                for rho_db in cfg.rho_sweep.points_db() {
                    points.push((rytov, rates.clone(), zeta, rho_db));
                }
            }
        }
    }
    let blocks = points
        .par_iter()
        .map(|(rytov, rates, zeta, rho_db)| -> Result<Vec<Vec<Cell>>, CliError> {
            let ctx = context(*rytov, *zeta, *rho_db);
            let sys = cfg
                .system(*rytov, *zeta, rates, *rho_db)
                .map_err(|e| CliError::from_core(e, &ctx))?;
            let theory = outage_per_user(&sys).map_err(|e| CliError::from_core(e, &ctx))?;
            let mc = simulate_outage(&sys, &settings).map_err(|e| CliError::from_core(e, &ctx))?;
            Ok((0..sys.user_count())
                .map(|k| {
                    vec![
                        (*rho_db).into(),
                        (k + 1).into(),
                        (*zeta).into(),
                        (*rytov).into(),
                        rates[k].into(),
                        theory.per_user_outage[k].into(),
                        mc.per_user[k].mean.into(),
                        mc.per_user[k].std_error.into(),
                        settings.n_trials.into(),
                    ]
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = CsvTable::new(&OUTAGE_COLUMNS);
    for row in blocks.into_iter().flatten() {
        table.push(row);
    }
    Ok(table)
}

fn method_label(m: MethodUsed) -> &'static str {
    match m {
        MethodUsed::Quadrature => "theory_quadrature",
        MethodUsed::MonteCarlo => "theory_mc",
    }
}

/// Per (σ_R², ζ, ρ, scheme): a theory row and a Monte Carlo row. NOMA reports
/// the unclamped telescoped sum rate.
pub fn cmd_sumrate(cfg: &ExperimentConfig, ov: Overrides) -> Result<CsvTable, CliError> {
    let settings = mc_settings(cfg, ov, DEFAULT_SUM_RATE_TRIALS)?;
    let rates: Vec<f64> = cfg.users.iter().map(|u| u.target_rate).collect();
    let mut points = Vec::new();
    for &rytov in &cfg.rytov_variances {
        for &zeta in &cfg.zeta_db {
            for rho_db in cfg.rho_sweep.points_db() {
                for &scheme in &cfg.schemes {
                    points.push((rytov, zeta, rho_db, Scheme::from(scheme)));
                }
            }
        }
    }
    let blocks = points
        .par_iter()
        .map(|&(rytov, zeta, rho_db, scheme)| -> Result<[Vec<Cell>; 2], CliError> {
            let ctx = context(rytov, zeta, rho_db);
            let err = |e| CliError::from_core(e, &ctx);
            let sys = cfg.system(rytov, zeta, &rates, rho_db).map_err(err)?;
            let theory = match scheme {
                Scheme::Noma => {
                    let method = if sys.user_count() <= 2 {
                        RateMethod::Quadrature
                    } else {
                        RateMethod::MonteCarlo(settings)
                    };
                    ergodic_sum_rate_noma(&sys, method)
                }
                Scheme::Oma => ergodic_sum_rate_oma(&sys, RateMethod::Quadrature),
            }
            .map_err(err)?;
            let mc = simulate_sum_rate(&sys, scheme, &settings).map_err(err)?;
            let head = |v: f64, se: Option<f64>, method: &str| -> Vec<Cell> {
                vec![
                    rho_db.into(),
                    scheme.as_str().into(),
                    rytov.into(),
                    zeta.into(),
                    v.into(),
                    se.into(),
                    method.into(),
                ]
            };
            Ok([
                head(theory.literal, theory.std_error, method_label(theory.method)),
                head(mc.headline.mean, Some(mc.headline.std_error), "mc"),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = CsvTable::new(&SUMRATE_COLUMNS);
    for row in blocks.into_iter().flatten() {
        table.push(row);
    }
    Ok(table)
}
