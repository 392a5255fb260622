//! Finite-sample click-counting experiments.
//!
//! Counts are drawn by inverse-CDF sampling, one uniform variate per shot,
//! from a ChaCha8 stream seeded with [`SeedableRng::seed_from_u64`].
//! Uniform variates are rand's standard 53-bit `f64` in `[0, 1)`. This
//! combination is [`SAMPLER_VERSION`] 1; changing any part of it must bump
//! the version, since published seeds are expected to reproduce exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{click_distribution, ClickDistribution, DetectorArray};
use crate::error::{ClickError, Result};
use crate::phasespace::{map_indexed, significance, truncation_for, OrderingParam, QuasiprobEstimate};
use crate::special::compensated_alternating_sum;
use crate::states::{PhasePoint, StateSpec};

pub const SAMPLER_VERSION: u32 = 1;

/// Minimum number of replications for a variance study.
pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub nu: u64,
    pub seed: u64,
    pub replications: usize,
}

impl ExperimentConfig {
    pub fn new(nu: u64, seed: u64, replications: usize) -> Result<Self> {
        if nu == 0 {
            return Err(ClickError::domain("nu must be at least 1"));
        }
        if replications == 0 {
            return Err(ClickError::domain("at least one replication is required"));
        }
        Ok(ExperimentConfig { nu, seed, replications })
    }

    /// Seed of replication `index`, independent of execution order.
    pub fn replication_seed(&self, index: usize) -> u64 {
        splitmix64(
            self.seed
                .wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        )
    }

    fn for_replication(&self, index: usize) -> ExperimentConfig {
        ExperimentConfig {
            seed: self.replication_seed(index),
            ..*self
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Observed number of shots with exactly `k` clicks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickCounts {
    counts: Vec<u64>,
}

impl ClickCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(ClickError::domain("empty click counts"));
        }
        Ok(ClickCounts { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Draws `nu` shots from the click distribution.
pub fn sample_clicks(clicks: &ClickDistribution, config: &ExperimentConfig) -> ClickCounts {
    let probs = clicks.probs();
    let mut cdf = Vec::with_capacity(probs.len());
    let (mut acc, mut comp) = (0.0f64, 0.0f64);
    for &p in probs {
        let (s, e) = crate::special::two_sum(acc, p);
        acc = s;
        comp += e;
        cdf.push(acc + comp);
    }
    // Close the CDF at the last outcome with nonzero probability so that
    // trailing impossible outcomes are never drawn.
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for c in &mut cdf[last..] {
        *c = 1.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..config.nu {
        let u: f64 = rng.random();
        let k = cdf.partition_point(|&c| c <= u);
        counts[k] += 1;
    }
    ClickCounts { counts }
}

/// Plug-in estimate of `P_N` from observed counts.
pub fn estimate(counts: &ClickCounts, s: OrderingParam, detector: DetectorArray) -> Result<QuasiprobEstimate> {
    let nu = counts.total();
    if nu == 0 {
        return Err(ClickError::domain("cannot estimate from zero shots"));
    }
    if counts.counts.len() != detector.n_detectors() + 1 {
        return Err(ClickError::domain(format!(
            "{} count bins do not match {} detectors",
            counts.counts.len(),
            detector.n_detectors()
        )));
    }
    let freqs: Vec<f64> = counts.counts.iter().map(|&n| n as f64 / nu as f64).collect();
    let clicks = ClickDistribution::new(freqs, detector)?;
    QuasiprobEstimate::from_clicks(&clicks, s, nu)
}

/// Outcome of a replication study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStudy {
    /// Noise-free `P_N` from the exact click distribution.
    pub exact_value: f64,
    pub mean_estimate: f64,
    /// Sample standard deviation of the per-replication estimates.
    pub empirical_std: f64,
    /// Average of the plug-in paper-formula errors.
    pub stderr_paper_mean: f64,
    /// Multinomial standard error from the exact click distribution.
    pub stderr_exact_analytic: f64,
    pub replications: Vec<QuasiprobEstimate>,
}

impl ReplicationStudy {
    /// Standard error of `mean_estimate`.
    pub fn mean_stderr(&self) -> f64 {
        self.stderr_exact_analytic / (self.replications.len() as f64).sqrt()
    }

    pub fn mean_significance(&self) -> Option<f64> {
        significance(self.mean_estimate, self.stderr_paper_mean)
    }
}

/// Repeats a `nu`-shot experiment `R` times and compares the observed
/// scatter of the estimates with both analytic error models.
pub fn replication_study(
    state: &StateSpec,
    detector: DetectorArray,
    alpha: PhasePoint,
    s: OrderingParam,
    config: &ExperimentConfig,
    tail_eps: f64,
) -> Result<ReplicationStudy> {
    if config.replications < MIN_REPLICATIONS {
        return Err(ClickError::domain(format!(
            "a replication study needs at least {MIN_REPLICATIONS} replications, got {}",
            config.replications
        )));
    }
    let tail = truncation_for(detector, s, tail_eps)?;
    let clicks = click_distribution(&state.distribution(alpha, tail)?, detector)?;
    let exact = QuasiprobEstimate::from_clicks(&clicks, s, config.nu)?;

    let replications = map_indexed(config.replications, |i| {
        let counts = sample_clicks(&clicks, &config.for_replication(i));
        estimate(&counts, s, detector)
    })?;

    let r = replications.len() as f64;
    let values: Vec<f64> = replications.iter().map(|e| e.value).collect();
    let mean = compensated_alternating_sum(&values).0 / r;
    let squares: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let empirical_std = (compensated_alternating_sum(&squares).0 / (r - 1.0)).sqrt();
    let paper: Vec<f64> = replications.iter().map(|e| e.stderr_paper).collect();

    Ok(ReplicationStudy {
        exact_value: exact.value,
        mean_estimate: mean,
        empirical_std,
        stderr_paper_mean: compensated_alternating_sum(&paper).0 / r,
        stderr_exact_analytic: exact.stderr_exact,
        replications,
    })
}
