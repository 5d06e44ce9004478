//! Experiment configuration files (JSON) and their validation.

use std::path::{Path, PathBuf};

use fso_noma::channel::{AtmosphericConfig, TurbulenceSpec};
use fso_noma::link::{make_power_plan, Scheme, SystemConfig, UserLink};
use fso_noma::monte_carlo::RngPolicy;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub atmospheric: Atmospheric,
    pub rytov_variances: Vec<f64>,
    pub users: Vec<UserSpec>,
    /// Alternative target-rate vectors swept in place of the users' own.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target_rate_sets: Vec<Vec<f64>>,
    pub zeta_db: Vec<f64>,
    pub rho_sweep: RhoSweep,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<SchemeName>,
    #[serde(default = "unit_power")]
    pub p_aim: f64,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atmospheric {
    pub visibility_km: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub distance_km: f64,
    pub target_rate: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

/// `ρ` grid in dB, `ρ = 10^(dB/10)`, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSweep {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeName {
    #[serde(rename = "NOMA")]
    Noma,
    #[serde(rename = "OMA")]
    Oma,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Noma => Scheme::Noma,
            SchemeName::Oma => Scheme::Oma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    /// Defaults to 10⁵ for outage and 10⁶ for sum rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trials: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_chunk")]
    pub chunk_size: u64,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec {
            n_trials: None,
            seed: default_seed(),
            chunk_size: default_chunk(),
        }
    }
}

fn all_schemes() -> Vec<SchemeName> {
    vec![SchemeName::Noma, SchemeName::Oma]
}

fn unit_power() -> f64 {
    1.0
}

fn default_mu() -> f64 {
    UserLink::DEFAULT_MU
}

fn default_seed() -> u64 {
    RngPolicy::default().master_seed
}

fn default_chunk() -> u64 {
    RngPolicy::default().chunk_size
}

const MAX_RHO_POINTS: usize = 10_000;

impl RhoSweep {
    pub fn points_db(&self) -> Vec<f64> {
        let span = (self.stop_db - self.start_db) / self.step_db;
        let n = (span + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start_db + i as f64 * self.step_db).collect()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// 1-based line of the `nth` occurrence (0-based) of `"key"` in `src`.
fn locate(src: &str, key: &str, nth: usize) -> usize {
    let needle = format!("\"{key}\"");
    src.match_indices(&needle)
        .nth(nth)
        .map(|(at, _)| src[..at].matches('\n').count() + 1)
        .unwrap_or(1)
}

struct Checker<'a> {
    path: &'a Path,
    src: &'a str,
}

impl Checker<'_> {
    fn fail(&self, key: &str, nth: usize, message: impl Into<String>) -> CliError {
        CliError::Config {
            path: self.path.display().to_string(),
            line: Some(locate(self.src, key, nth)),
            message: message.into(),
        }
    }
}

impl ExperimentConfig {
    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&src, path)
    }

    pub fn parse(src: &str, path: &Path) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(src).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            line: Some(e.line().max(1)),
            message: format!("{e}"),
        })?;
        cfg.validate(&Checker { path, src })?;
        Ok(cfg)
    }

    fn validate(&self, c: &Checker<'_>) -> Result<(), CliError> {
        if self.scenario.trim().is_empty() {
            return Err(c.fail("scenario", 0, "scenario name is empty"));
        }
        let atm = AtmosphericConfig::new(self.atmospheric.visibility_km, self.atmospheric.wavelength_nm)
            .and_then(|a| a.attenuation_coefficient())
            .map_err(|e| c.fail("visibility_km", 0, e.to_string()))?;
        if self.rytov_variances.is_empty() {
            return Err(c.fail("rytov_variances", 0, "rytov_variances is empty"));
        }
        for &s in &self.rytov_variances {
            TurbulenceSpec::from_rytov(s).map_err(|e| c.fail("rytov_variances", 0, e.to_string()))?;
        }
        if self.users.is_empty() {
            return Err(c.fail("users", 0, "at least one user is required"));
        }
        let mut links = Vec::with_capacity(self.users.len());
        for (i, u) in self.users.iter().enumerate() {
            let link = UserLink::new(u.distance_km, u.target_rate, u.mu)
                .map_err(|e| c.fail("distance_km", i, format!("user {}: {e}", i + 1)))?;
            links.push(link);
        }
        for (i, set) in self.target_rate_sets.iter().enumerate() {
            if set.len() != self.users.len() {
                return Err(c.fail(
                    "target_rate_sets",
                    0,
                    format!(
                        "target_rate_sets[{i}] has {} rates for {} users",
                        set.len(),
                        self.users.len()
                    ),
                ));
            }
            if set.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                return Err(c.fail(
                    "target_rate_sets",
                    0,
                    format!("target_rate_sets[{i}] contains a negative or non-finite rate"),
                ));
            }
        }
        if self.zeta_db.is_empty() {
            return Err(c.fail("zeta_db", 0, "zeta_db is empty"));
        }
        for &z in &self.zeta_db {
            make_power_plan(&links, atm, self.p_aim, z).map_err(|e| {
                let key = if self.p_aim > 0.0 && self.p_aim.is_finite() { "zeta_db" } else { "p_aim" };
                c.fail(key, 0, e.to_string())
            })?;
        }
        let r = &self.rho_sweep;
        if ![r.start_db, r.stop_db, r.step_db].iter().all(|v| v.is_finite()) {
            return Err(c.fail("rho_sweep", 0, "rho_sweep bounds must be finite"));
        }
        if !(r.step_db > 0.0) {
            return Err(c.fail("step_db", 0, "rho sweep must be strictly increasing (step_db > 0)"));
        }
        if r.stop_db < r.start_db {
            return Err(c.fail("rho_sweep", 0, "rho sweep is empty (stop_db < start_db)"));
        }
        if (r.stop_db - r.start_db) / r.step_db > MAX_RHO_POINTS as f64 {
            return Err(c.fail("step_db", 0, format!("rho sweep exceeds {MAX_RHO_POINTS} points")));
        }
        if self.schemes.is_empty() {
            return Err(c.fail("schemes", 0, "schemes is empty"));
        }
        if self.mc.chunk_size == 0 {
            return Err(c.fail("chunk_size", 0, "chunk_size must be >= 1"));
        }
        if let Some(n) = self.mc.n_trials {
            if n < fso_noma::monte_carlo::MIN_TRIALS {
                return Err(c.fail(
                    "n_trials",
                    0,
                    format!("n_trials must be at least {}", fso_noma::monte_carlo::MIN_TRIALS),
                ));
            }
        }
        Ok(())
    }

    /// Target-rate vectors to sweep; the users' own rates when no sets are given.
    pub fn rate_sets(&self) -> Vec<Vec<f64>> {
        if self.target_rate_sets.is_empty() {
            vec![self.users.iter().map(|u| u.target_rate).collect()]
        } else {
            self.target_rate_sets.clone()
        }
    }

    /// The system at one sweep point.
    pub fn system(
        &self,
        rytov: f64,
        zeta_db: f64,
        rates: &[f64],
        rho_db: f64,
    ) -> fso_noma::Result<SystemConfig> {
        let phi = AtmosphericConfig::new(self.atmospheric.visibility_km, self.atmospheric.wavelength_nm)?
            .attenuation_coefficient()?;
        let links = self
            .users
            .iter()
            .zip(rates)
            .map(|(u, &r)| UserLink::new(u.distance_km, r, u.mu))
            .collect::<fso_noma::Result<Vec<_>>>()?;
        let plan = make_power_plan(&links, phi, self.p_aim, zeta_db)?;
        let fading = TurbulenceSpec::from_rytov(rytov)?.distribution();
        SystemConfig::new(links, plan, db_to_linear(rho_db), fading)
    }
}
