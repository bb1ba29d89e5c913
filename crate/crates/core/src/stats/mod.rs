//! Permutation testing over the alignment cost and cross-video aggregation.

pub mod special;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{AlignError, BandedDtw};
use crate::cell::Cell;
use crate::rng::stream_rng;

pub use special::{chi_square_sf, gamma_p, gamma_q, ln_gamma};

pub const DEFAULT_N_PERM: usize = 5_000;
pub const DEFAULT_N_BOOT: usize = 10_000;
pub const ALPHA: f64 = 0.05;
pub const CI_LEVEL: f64 = 0.95;

/// Null distributions with a smaller spread are treated as degenerate.
pub const DEGENERATE_NULL_STD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("p-value {0} is outside (0, 1]")]
    InvalidP(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("replicate count must be positive")]
    NoReplicates,
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error(transparent)]
    Align(#[from] AlignError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub video_id: String,
    pub cost: f64,
    pub null_mean: f64,
    pub null_std: f64,
    pub p: f64,
    pub pes: f64,
    pub n_perm: usize,
    pub seed: u64,
    /// Set when the null distribution had no spread; `pes` is then 0.
    pub degenerate_null: bool,
}

/// Mean with the first element as pivot, exact for constant input.
fn pivot_mean(values: &[f64]) -> f64 {
    let pivot = values[0];
    pivot + values.iter().map(|v| v - pivot).sum::<f64>() / values.len() as f64
}

/// Costs of `n_perm` alignments of shuffled copies of `viscom` against
/// `userint`. Replicate `k` draws from stream `k` of `seed`, so the result
/// does not depend on how the work is split across threads.
pub fn permutation_null(
    viscom: &[f64],
    userint: &[f64],
    n_perm: usize,
    window: usize,
    seed: u64,
) -> Result<Vec<f64>, StatsError> {
    if viscom.len() != userint.len() {
        return Err(StatsError::LengthMismatch(viscom.len(), userint.len()));
    }
    if n_perm == 0 {
        return Err(StatsError::NoReplicates);
    }
    (0..n_perm as u64)
        .into_par_iter()
        .map_init(
            || (BandedDtw::new(window), viscom.to_vec()),
            |(dtw, buf), k| {
                buf.copy_from_slice(viscom);
                buf.shuffle(&mut stream_rng(seed, k));
                dtw.align(buf, userint).map(|(cost, _, _)| cost)
            },
        )
        .collect::<Result<Vec<_>, _>>()
        .map_err(StatsError::from)
}

/// Two-sided permutation test of the alignment cost between a stimulus
/// series (`viscom`) and a response series (`userint`).
pub fn permutation_test(
    video_id: &str,
    viscom: &[f64],
    userint: &[f64],
    n_perm: usize,
    window: usize,
    seed: u64,
) -> Result<TestResult, StatsError> {
    let null = permutation_null(viscom, userint, n_perm, window, seed)?;
    let (cost, _, _) = BandedDtw::new(window).align(viscom, userint)?;
    Ok(summarize_null(video_id, cost, &null, seed))
}

/// Turns an observed cost and its null sample into a [`TestResult`].
pub fn summarize_null(video_id: &str, cost: f64, null: &[f64], seed: u64) -> TestResult {
    let n = null.len();
    let null_mean = pivot_mean(null);
    let null_std = (null.iter().map(|c| (c - null_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let observed = (cost - null_mean).abs();
    let extreme = null.iter().filter(|&&c| (c - null_mean).abs() >= observed).count();
    let p = (extreme + 1) as f64 / (n + 1) as f64;
    let degenerate_null = null_std < DEGENERATE_NULL_STD;
    let pes = if degenerate_null {
        0.0
    } else {
        -(cost - null_mean) / null_std
    };
    TestResult {
        video_id: video_id.to_string(),
        cost,
        null_mean,
        null_std,
        p,
        pes,
        n_perm: n,
        seed,
        degenerate_null,
    }
}

/// Fisher's combined p-value: the chi-square (2k d.o.f.) upper tail at
/// `-2 * sum(ln p)`.
pub fn fisher_aggregate(p_values: &[f64]) -> Result<f64, StatsError> {
    if p_values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if let Some(&bad) = p_values.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(StatsError::InvalidP(bad));
    }
    let statistic = -2.0 * p_values.iter().map(|p| p.ln()).sum::<f64>();
    Ok(chi_square_sf(statistic, 2.0 * p_values.len() as f64))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(
    values: &[f64],
    level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<(f64, f64), StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if n_boot == 0 {
        return Err(StatsError::NoReplicates);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    let k = values.len();
    let mut rng = stream_rng(seed, 0);
    let mut sample = vec![0.0; k];
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| {
            for slot in sample.iter_mut() {
                *slot = values[rng.random_range(0..k)];
            }
            pivot_mean(&sample)
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, tail), quantile_sorted(&means, 1.0 - tail)))
}

/// Both conditions must hold: combined p below alpha and a confidence
/// interval that excludes zero.
pub fn jointly_significant(fisher_p: f64, ci: (f64, f64)) -> bool {
    fisher_p < ALPHA && !(ci.0 <= 0.0 && 0.0 <= ci.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    #[serde(flatten)]
    pub cell: Cell,
    pub fisher_p: f64,
    pub mean_pes: f64,
    pub ci: (f64, f64),
    pub significant: bool,
    pub per_video: Vec<TestResult>,
}

pub fn aggregate(
    cell: Cell,
    per_video: Vec<TestResult>,
    n_boot: usize,
    seed: u64,
) -> Result<AggregateResult, StatsError> {
    if per_video.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let ps: Vec<f64> = per_video.iter().map(|r| r.p).collect();
    let pes: Vec<f64> = per_video.iter().map(|r| r.pes).collect();
    let fisher_p = fisher_aggregate(&ps)?;
    let ci = bootstrap_ci(&pes, CI_LEVEL, n_boot, seed)?;
    Ok(AggregateResult {
        cell,
        fisher_p,
        mean_pes: pivot_mean(&pes),
        ci,
        significant: jointly_significant(fisher_p, ci),
        per_video,
    })
}
