//! Reproducible Monte Carlo estimation from physical channel draws.
//!
//! Trials are split into fixed-size chunks. Chunk `c` draws from a ChaCha8
//! stream keyed by `(master_seed, c)` alone, chunks run in parallel, and the
//! partial results are merged in ascending chunk order. The output is
//! therefore a pure function of `(config, n_trials, master_seed, chunk_size)`
//! and does not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::link::{oma_slot_rate, sic_raw_rates_into, telescoped_sum_rate, Scheme, SystemConfig};
use crate::stats::Moments;

pub const MIN_TRIALS: u64 = 1_000;
pub const DEFAULT_OUTAGE_TRIALS: u64 = 100_000;
pub const DEFAULT_SUM_RATE_TRIALS: u64 = 1_000_000;

/// Independent random stream `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngPolicy {
    pub master_seed: u64,
    pub chunk_size: u64,
}

impl Default for RngPolicy {
    fn default() -> Self {
        RngPolicy {
            master_seed: 0x5eed,
            chunk_size: 10_000,
        }
    }
}

impl RngPolicy {
    pub fn new(master_seed: u64, chunk_size: u64) -> Result<Self> {
        if chunk_size == 0 {
            return Err(Error::domain("chunk_size", 0.0, ">= 1"));
        }
        Ok(RngPolicy {
            master_seed,
            chunk_size,
        })
    }

    pub fn chunk_of(&self, trial: u64) -> u64 {
        trial / self.chunk_size
    }

    fn chunk_count(&self, n_trials: u64) -> u64 {
        n_trials.div_ceil(self.chunk_size)
    }

    fn chunk_len(&self, chunk: u64, n_trials: u64) -> u64 {
        let start = chunk * self.chunk_size;
        (n_trials - start).min(self.chunk_size)
    }
}

/// Trial count, seeding and worker threads for one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub n_trials: u64,
    pub policy: RngPolicy,
    /// 0 uses the global rayon pool.
    pub workers: usize,
}

impl McSettings {
    pub fn new(n_trials: u64, policy: RngPolicy) -> Self {
        McSettings {
            n_trials,
            policy,
            workers: 0,
        }
    }
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings::new(DEFAULT_SUM_RATE_TRIALS, RngPolicy::default())
    }
}

/// Work that can be split into independent chunks of trials.
pub trait ChunkJob: Sync {
    type Output: Send;

    fn run_chunk(&self, rng: &mut ChaCha8Rng, trials: u64) -> Self::Output;

    fn merge(&self, acc: &mut Self::Output, next: Self::Output);
}

/// Runs `job` over `n_trials` trials and merges chunk outputs in ascending
/// chunk order. `workers == 0` uses the global rayon pool.
pub fn run_chunked<J: ChunkJob>(
    job: &J,
    n_trials: u64,
    policy: &RngPolicy,
    workers: usize,
) -> Result<J::Output> {
    if n_trials == 0 {
        return Err(Error::TooFewTrials { got: 0, min: 1 });
    }
    if policy.chunk_size == 0 {
        return Err(Error::domain("chunk_size", 0.0, ">= 1"));
    }
    let chunks = policy.chunk_count(n_trials);
    let compute = || -> Vec<J::Output> {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(policy.master_seed, c);
                job.run_chunk(&mut rng, policy.chunk_len(c, n_trials))
            })
            .collect()
    };
    let parts = if workers == 0 {
        compute()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?
            .install(compute)
    };
    let mut iter = parts.into_iter();
    let mut acc = iter.next().expect("at least one chunk");
    for part in iter {
        job.merge(&mut acc, part);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_trials: u64,
    pub ci95_halfwidth: f64,
}

impl MCEstimate {
    pub fn from_moments(m: &Moments) -> Self {
        let std_error = m.std_error();
        MCEstimate {
            mean: m.mean,
            std_error,
            n_trials: m.count,
            ci95_halfwidth: 1.96 * std_error,
        }
    }

    /// Bernoulli estimate from `hits` successes in `n` trials.
    pub fn from_count(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        let variance = if n > 1 {
            p * (1.0 - p) * n as f64 / (n - 1) as f64
        } else {
            0.0
        };
        let std_error = (variance / n as f64).sqrt();
        MCEstimate {
            mean: p,
            std_error,
            n_trials: n,
            ci95_halfwidth: 1.96 * std_error,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.ci95_halfwidth
    }
}

fn check_trials(n_trials: u64) -> Result<()> {
    if n_trials < MIN_TRIALS {
        return Err(Error::TooFewTrials {
            got: n_trials,
            min: MIN_TRIALS,
        });
    }
    Ok(())
}

/// Draws `K` physical intensities and writes the decode-ordered `h` into
/// `h` (descending, ties by physical index).
fn draw_ranked_h(
    sampler: &crate::channel::IntensitySampler,
    rng: &mut ChaCha8Rng,
    intensities: &mut [f64],
    h: &mut [f64],
) {
    for i in intensities.iter_mut() {
        *i = sampler.sample(rng);
    }
    let order = crate::link::decode_order(intensities);
    for (slot, &u) in h.iter_mut().zip(&order) {
        *slot = intensities[u] * intensities[u];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageEstimate {
    /// Indexed by decode rank.
    pub per_user: Vec<MCEstimate>,
    pub coverage: MCEstimate,
}

struct OutageJob<'a> {
    cfg: &'a SystemConfig,
}

#[derive(Debug, Clone)]
struct OutageCounts {
    trials: u64,
    outages: Vec<u64>,
    covered: u64,
}

impl ChunkJob for OutageJob<'_> {
    type Output = OutageCounts;

    fn run_chunk(&self, rng: &mut ChaCha8Rng, trials: u64) -> OutageCounts {
        let k = self.cfg.user_count();
        let sampler = self.cfg.fading.sampler();
        let mut intensities = vec![0.0; k];
        let mut h = vec![0.0; k];
        let mut rates = vec![0.0; k];
        let mut counts = OutageCounts {
            trials,
            outages: vec![0; k],
            covered: 0,
        };
        for _ in 0..trials {
            draw_ranked_h(&sampler, rng, &mut intensities, &mut h);
            sic_raw_rates_into(self.cfg, &h, &mut rates);
            let mut failed = false;
            for (rank, &raw) in rates.iter().enumerate() {
                // an undecoded earlier rank stays as interference, so every
                // later rank fails too
                failed = failed || raw.max(0.0) < self.cfg.users[rank].target_rate;
                if failed {
                    counts.outages[rank] += 1;
                }
            }
            if !failed {
                counts.covered += 1;
            }
        }
        counts
    }

    fn merge(&self, acc: &mut OutageCounts, next: OutageCounts) {
        acc.trials += next.trials;
        acc.covered += next.covered;
        for (a, b) in acc.outages.iter_mut().zip(next.outages) {
            *a += b;
        }
    }
}

/// Per-rank outage and coverage from the exact rate events.
pub fn simulate_outage(cfg: &SystemConfig, settings: &McSettings) -> Result<OutageEstimate> {
    check_trials(settings.n_trials)?;
    let counts = run_chunked(
        &OutageJob { cfg },
        settings.n_trials,
        &settings.policy,
        settings.workers,
    )?;
    Ok(OutageEstimate {
        per_user: counts
            .outages
            .iter()
            .map(|&c| MCEstimate::from_count(c, counts.trials))
            .collect(),
        coverage: MCEstimate::from_count(counts.covered, counts.trials),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRateEstimate {
    /// NOMA: the telescoped closed form (may be negative). OMA: the TDMA
    /// sum rate.
    pub headline: MCEstimate,
    /// Sum of the per-user rates after the `[·]⁺` clamp.
    pub clamped: MCEstimate,
}

struct SumRateJob<'a> {
    cfg: &'a SystemConfig,
    scheme: Scheme,
}

impl ChunkJob for SumRateJob<'_> {
    type Output = (Moments, Moments);

    fn run_chunk(&self, rng: &mut ChaCha8Rng, trials: u64) -> (Moments, Moments) {
        let k = self.cfg.user_count();
        let sampler = self.cfg.fading.sampler();
        let mut intensities = vec![0.0; k];
        let mut h = vec![0.0; k];
        let mut rates = vec![0.0; k];
        let mut headline = Moments::default();
        let mut clamped = Moments::default();
        let share = 1.0 / k as f64;
        for _ in 0..trials {
            draw_ranked_h(&sampler, rng, &mut intensities, &mut h);
            match self.scheme {
                Scheme::Noma => {
                    sic_raw_rates_into(self.cfg, &h, &mut rates);
                    headline.push(telescoped_sum_rate(self.cfg, &h));
                    clamped.push(rates.iter().map(|r| r.max(0.0)).sum());
                }
                Scheme::Oma => {
                    let total: f64 = h
                        .iter()
                        .enumerate()
                        .map(|(rank, &hk)| share * oma_slot_rate(self.cfg, rank + 1, hk))
                        .sum();
                    headline.push(total);
                    clamped.push(total);
                }
            }
        }
        (headline, clamped)
    }

    fn merge(&self, acc: &mut (Moments, Moments), next: (Moments, Moments)) {
        acc.0.merge(&next.0);
        acc.1.merge(&next.1);
    }
}

/// Ergodic sum rate of `scheme` by sampling.
pub fn simulate_sum_rate(
    cfg: &SystemConfig,
    scheme: Scheme,
    settings: &McSettings,
) -> Result<SumRateEstimate> {
    check_trials(settings.n_trials)?;
    let (headline, clamped) = run_chunked(
        &SumRateJob { cfg, scheme },
        settings.n_trials,
        &settings.policy,
        settings.workers,
    )?;
    Ok(SumRateEstimate {
        headline: MCEstimate::from_moments(&headline),
        clamped: MCEstimate::from_moments(&clamped),
    })
}
