//! Bootstrap engine shared by all index estimators.
//!
//! Statistics are *resample-index-aware*: a replicate hands the statistic
//! a list of observation indices (a multiset when drawing with
//! replacement, a subset when subsampling) and the statistic recomputes
//! everything from scratch on it. Rank-based estimators therefore re-rank
//! inside every replicate, which is what makes without-replacement
//! subsampling meaningful for them.

use crate::error::{Error, Result};
use crate::rng::derived_rng;
use rand::Rng;

/// Resampling flavor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResampleMode {
    /// Classical bootstrap: n draws with replacement, percentile interval.
    WithReplacement,
    /// Draw `round(fraction * n)` indices without replacement; the
    /// percentile interval of the replicate deviations is re-centered on
    /// the full-sample estimate and, when `correction` is set, shrunk by
    /// sqrt(fraction) to account for the smaller replicate size.
    Subsample { fraction: f64, correction: bool },
}

/// Bootstrap configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSpec {
    pub b: usize,
    pub mode: ResampleMode,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapSpec {
    /// With-replacement percentile bootstrap, B = 100, 95% level.
    pub fn with_replacement(seed: u64) -> Self {
        BootstrapSpec {
            b: 100,
            mode: ResampleMode::WithReplacement,
            level: 0.95,
            seed,
        }
    }

    /// Corrected subsampling bootstrap, B = 100, 95% level.
    pub fn subsample(seed: u64, fraction: f64) -> Self {
        BootstrapSpec {
            b: 100,
            mode: ResampleMode::Subsample {
                fraction,
                correction: true,
            },
            level: 0.95,
            seed,
        }
    }

    pub fn with_b(mut self, b: usize) -> Self {
        self.b = b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(Error::param("bootstrap needs B >= 2"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::param(format!("bad CI level {}", self.level)));
        }
        if let ResampleMode::Subsample { fraction, .. } = self.mode {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::param(format!("bad subsample fraction {fraction}")));
            }
        }
        Ok(())
    }
}

/// Percentile confidence interval plus the surviving replicate values.
#[derive(Debug, Clone)]
pub struct CiResult {
    pub lo: f64,
    pub hi: f64,
    pub replicates: Vec<f64>,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let k = h.floor() as usize;
    if k + 1 < sorted.len() {
        sorted[k] + (h - k as f64) * (sorted[k + 1] - sorted[k])
    } else {
        sorted[sorted.len() - 1]
    }
}

/// Percentile bootstrap interval for a statistic of `n` observations.
///
/// Failing replicates are dropped; more than 10% failures is an error.
pub fn bootstrap_ci<F>(n: usize, spec: &BootstrapSpec, statistic: F) -> Result<CiResult>
where
    F: Fn(&[usize]) -> Result<f64>,
{
    spec.validate()?;
    if n == 0 {
        return Err(Error::param("bootstrap over an empty sample"));
    }

    let full = match spec.mode {
        ResampleMode::Subsample { .. } => {
            let all: Vec<usize> = (0..n).collect();
            Some(statistic(&all)?)
        }
        ResampleMode::WithReplacement => None,
    };

    let mut replicates = Vec::with_capacity(spec.b);
    let mut dropped = 0usize;
    for r in 0..spec.b {
        let mut rng = derived_rng(spec.seed, &[0xb007, r as u64]);
        let idx: Vec<usize> = match spec.mode {
            ResampleMode::WithReplacement => (0..n).map(|_| rng.random_range(0..n)).collect(),
            ResampleMode::Subsample { fraction, .. } => {
                let m = ((fraction * n as f64).round() as usize).clamp(1, n);
                let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
                idx.sort_unstable();
                idx
            }
        };
        match statistic(&idx) {
            Ok(v) if v.is_finite() => replicates.push(v),
            _ => dropped += 1,
        }
    }
    if dropped * 10 > spec.b {
        return Err(Error::degenerate(format!(
            "{dropped} of {} bootstrap replicates failed",
            spec.b
        )));
    }
    if replicates.len() < 2 {
        return Err(Error::degenerate("too few bootstrap replicates survived"));
    }

    let alpha = 1.0 - spec.level;
    let mut sorted = replicates.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (lo, hi) = match spec.mode {
        ResampleMode::WithReplacement => (
            percentile(&sorted, alpha / 2.0),
            percentile(&sorted, 1.0 - alpha / 2.0),
        ),
        ResampleMode::Subsample {
            fraction,
            correction,
        } => {
            let center = full.expect("computed above");
            let scale = if correction { fraction.sqrt() } else { 1.0 };
            for v in &mut sorted {
                *v -= center;
            }
            (
                center + scale * percentile(&sorted, alpha / 2.0),
                center + scale * percentile(&sorted, 1.0 - alpha / 2.0),
            )
        }
    };
    Ok(CiResult { lo, hi, replicates })
}
