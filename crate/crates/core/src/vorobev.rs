//! Vorob'ev-median-deviation sensitivity indices via the double-loop
//! estimator.
//!
//! The index of input `i` compares the expected deviation of the random
//! set from its Vorob'ev median with the expected deviation from the
//! median conditional on `U_i`:
//!
//! `S_i = 1 - sum_j d(G_j, Qc_i(U_i_j)) / sum_j d(G_j, Q_half)`
//!
//! where `d` is the symmetric-difference volume, `Qc_i` the conditional
//! median estimated from an inner loop, and `Q_half` the median of the
//! pooled outer sets. Each outer set reuses its inner loop's first
//! evaluation, so the whole estimate costs `n_outer * n_inner` model runs.

use crate::error::{Error, Result};
use crate::model::SetModel;
use crate::resample::{bootstrap_ci, BootstrapSpec};
use crate::rng::derived_rng;
use crate::setgrid::{coverage, vorobev_quantile, SetSample};
use rand::Rng;
use rayon::prelude::*;

const OUTER_TAG: u64 = 0x766f;
const INNER_TAG: u64 = 0x7669;
const MEDIAN_TAG: u64 = 0x766d;

/// Double-loop estimate of one input's Vorob'ev index.
#[derive(Debug, Clone)]
pub struct VorobevEstimate {
    pub input: usize,
    pub estimate: f64,
    /// Estimated global Vorob'ev median deviation, `sum_j d_j / n_outer`.
    pub vmd: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    /// Model evaluations actually spent.
    pub evaluations: usize,
    pub ci: Option<(f64, f64)>,
}

fn draw_conditioned(
    model: &SetModel,
    dists: &[crate::sampling::Dist],
    i: usize,
    u_i: f64,
    n_inner: usize,
    rng: &mut impl Rng,
) -> Result<Vec<SetSample>> {
    let p = dists.len();
    let mut u = vec![0.0; p];
    let mut sets = Vec::with_capacity(n_inner);
    for _ in 0..n_inner {
        for (k, dist) in dists.iter().enumerate() {
            if k != i {
                u[k] = dist.inverse_cdf(rng.random())?;
            }
        }
        u[i] = u_i;
        sets.push(model.realize(&u)?);
    }
    Ok(sets)
}

/// Empirical conditional Vorob'ev median at `U_i = u_i`, from `n_inner`
/// i.i.d. draws of the remaining inputs.
pub fn conditional_median(
    model: &SetModel,
    i: usize,
    u_i: f64,
    n_inner: usize,
    seed: u64,
) -> Result<SetSample> {
    let space = model.space();
    if i >= space.p() {
        return Err(Error::param(format!("input index {i} out of range")));
    }
    let (lo, hi) = space.bounds(i);
    if !(u_i >= lo && u_i <= hi) {
        return Err(Error::domain(format!(
            "conditioning value {u_i} outside [{lo}, {hi}]"
        )));
    }
    if n_inner < 2 {
        return Err(Error::param("conditional median needs n_inner >= 2"));
    }
    let dists = space.compile()?;
    let mut rng = derived_rng(seed, &[MEDIAN_TAG, i as u64]);
    let sets = draw_conditioned(model, &dists, i, u_i, n_inner, &mut rng)?;
    Ok(vorobev_quantile(&coverage(&sets)?, 0.5))
}

/// Double-loop Vorob'ev index of input `i`, optionally with a bootstrap
/// interval over the outer loop.
pub fn vorobev_index(
    model: &SetModel,
    i: usize,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
    bootstrap: Option<&BootstrapSpec>,
) -> Result<VorobevEstimate> {
    let space = model.space();
    if i >= space.p() {
        return Err(Error::param(format!("input index {i} out of range")));
    }
    if n_outer < 2 || n_inner < 2 {
        return Err(Error::param("double loop needs n_outer, n_inner >= 2"));
    }
    let dists = space.compile()?;

    let mut outer_rng = derived_rng(seed, &[OUTER_TAG, i as u64]);
    let outer_values: Vec<f64> = (0..n_outer)
        .map(|_| dists[i].inverse_cdf(outer_rng.random()))
        .collect::<Result<_>>()?;

    // Inner loops are independent across j; each derives its own stream
    // from (seed, i, j), so the parallel schedule cannot change results.
    let per_outer: Vec<(SetSample, f64)> = (0..n_outer)
        .into_par_iter()
        .map(|j| -> Result<(SetSample, f64)> {
            let mut rng = derived_rng(seed, &[INNER_TAG, i as u64, j as u64]);
            let mut inner = draw_conditioned(model, &dists, i, outer_values[j], n_inner, &mut rng)?;
            let conditional = vorobev_quantile(&coverage(&inner)?, 0.5);
            // The outer set is the inner loop's first realization.
            let gamma = inner.swap_remove(0);
            let d_conditional = gamma.symdiff_volume(&conditional)?;
            Ok((gamma, d_conditional))
        })
        .collect::<Result<_>>()?;

    let gammas: Vec<SetSample> = per_outer.iter().map(|(g, _)| g.clone()).collect();
    let d_num: Vec<f64> = per_outer.into_iter().map(|(_, d)| d).collect();

    let index_of = |idx: &[usize]| -> Result<f64> {
        let median = vorobev_quantile(&coverage(idx.iter().map(|&j| &gammas[j]))?, 0.5);
        let mut num = 0.0;
        let mut den = 0.0;
        for &j in idx {
            num += d_num[j];
            den += gammas[j].symdiff_volume(&median)?;
        }
        if den == 0.0 {
            return Err(Error::degenerate(
                "set realizations never deviate from their median",
            ));
        }
        Ok(1.0 - num / den)
    };

    let all: Vec<usize> = (0..n_outer).collect();
    let estimate = index_of(&all)?;
    let median = vorobev_quantile(&coverage(&gammas)?, 0.5);
    let vmd = gammas
        .iter()
        .map(|g| g.symdiff_volume(&median))
        .sum::<Result<f64>>()?
        / n_outer as f64;

    let ci = match bootstrap {
        Some(spec) => {
            let r = bootstrap_ci(n_outer, spec, index_of)?;
            Some((r.lo, r.hi))
        }
        None => None,
    };

    Ok(VorobevEstimate {
        input: i,
        estimate,
        vmd,
        n_outer,
        n_inner,
        evaluations: n_outer * n_inner,
        ci,
    })
}
