//! Marginal posterior of a constant-rate Poisson block.
//!
//! A block holding `N` points in a volume of `V` quanta has, with the rate
//! marginalized under a flat prior,
//!
//! ```text
//! Φ(N, V) = Γ(N + 1) Γ(V − N + 1) / Γ(V + 2) = N! (V − N)! / (V + 1)!
//! ```
//!
//! Everything here works with `ln Φ`; the factorial form overflows for any
//! realistic block.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack on the `V > N − 1` domain of `Γ(V − N + 1)`.
pub const DOMAIN_EPS: f64 = 1e-12;

/// Summary statistics of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub n_points: u64,
    pub volume_quanta: f64,
    /// Constant log-prior added once per block. Negative values favor fewer blocks.
    #[serde(default)]
    pub log_prior_penalty: f64,
}

impl BlockStats {
    pub fn new(n_points: u64, volume_quanta: f64) -> Self {
        Self {
            n_points,
            volume_quanta,
            log_prior_penalty: 0.0,
        }
    }

    pub fn with_penalty(mut self, log_prior_penalty: f64) -> Self {
        self.log_prior_penalty = log_prior_penalty;
        self
    }

    /// Statistics of the union of two disjoint blocks.
    pub fn merged(&self, other: &BlockStats) -> BlockStats {
        BlockStats {
            n_points: self.n_points + other.n_points,
            volume_quanta: self.volume_quanta + other.volume_quanta,
            log_prior_penalty: merged_penalty(self, other),
        }
    }

    pub fn log_phi(&self) -> Result<f64> {
        log_phi(self.n_points, self.volume_quanta)
    }
}

fn merged_penalty(a: &BlockStats, b: &BlockStats) -> f64 {
    0.5 * (a.log_prior_penalty + b.log_prior_penalty)
}

/// `ln Φ(n, v)`.
pub fn log_phi(n: u64, v: f64) -> Result<f64> {
    let nf = n as f64;
    if !v.is_finite() || v < nf - 1.0 + DOMAIN_EPS {
        return Err(Error::Domain { n, volume: v });
    }
    let a = v - nf + 1.0;
    if a < STIRLING_MIN {
        return Ok(libm::lgamma(nf + 1.0) + libm::lgamma(a) - libm::lgamma(v + 2.0));
    }
    Ok(libm::lgamma(nf + 1.0) - ln_gamma_ratio(a, nf + 1.0))
}

/// Above this argument `lnΓ(a + m) − lnΓ(a)` is taken from the Stirling
/// series rather than as a difference of two large `lgamma` values, which
/// loses every digit once `a` reaches ~1e16.
const STIRLING_MIN: f64 = 1e4;

/// `lnΓ(a + m) − lnΓ(a)` for `a ≥ STIRLING_MIN`.
fn ln_gamma_ratio(a: f64, m: f64) -> f64 {
    fn tail(z: f64) -> f64 {
        let r = 1.0 / (z * z);
        (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / z
    }
    let b = a + m;
    (b - 0.5) * (m / a).ln_1p() + m * (a.ln() - 1.0) + (tail(b) - tail(a))
}

/// Log of the Bayes factor for merging `a` and `b` versus keeping them apart.
///
/// Positive values favor the merge. The per-block log-prior is removed once,
/// since a merge leaves one block fewer. The expression is symmetric in its
/// arguments bit for bit.
pub fn log_merge_factor(a: &BlockStats, b: &BlockStats) -> Result<f64> {
    let la = a.log_phi()?;
    let lb = b.log_phi()?;
    merge_factor_from_parts(a, b, la, lb)
}

/// Same as [`log_merge_factor`] with the two single-block terms supplied by the
/// caller (the coalescence engine caches them).
pub(crate) fn merge_factor_from_parts(a: &BlockStats, b: &BlockStats, la: f64, lb: f64) -> Result<f64> {
    let merged = a.merged(b);
    Ok(merged.log_phi()? - (la + lb) - merged_penalty(a, b))
}

/// `ln Π Φ(N_n, V_n)` plus the per-block log-priors. The empty product is 1.
pub fn total_log_posterior(blocks: &[BlockStats]) -> Result<f64> {
    blocks
        .iter()
        .try_fold(0.0, |acc, b| Ok(acc + b.log_phi()? + b.log_prior_penalty))
}
