//! Experimental designs: Halton sequences, Latin hypercube sampling and
//! pick-and-freeze matrix pairs.

use super::InputSpace;
use crate::error::{Error, Result};
use crate::rng::derived_rng;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Radical inverse of `index` in the given base.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    r
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().all(|&p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Halton points in `[0,1]^dim` using the first `dim` prime bases.
///
/// Row `k` is the radical-inverse point of index `skip + k + 1`; the
/// sequence starts at index 1, so every coordinate is strictly inside
/// `(0, 1)`. No scrambling.
pub fn halton(dim: usize, n: usize, skip: usize) -> Array2<f64> {
    assert!(dim >= 1, "halton needs dim >= 1");
    let bases = first_primes(dim);
    let mut out = Array2::zeros((n, dim));
    for k in 0..n {
        let index = (skip + k + 1) as u64;
        for (j, &b) in bases.iter().enumerate() {
            out[[k, j]] = radical_inverse(b, index);
        }
    }
    out
}

/// Latin hypercube sample of the input space.
///
/// Each column places exactly one point in each of the `n` equiprobable
/// strata of its distribution: stratum boundaries are quantiles, so the
/// jittered uniform layer `(perm[k] + delta) / n` maps onto them through
/// the quantile function. Column streams are derived from `(seed, column)`.
pub fn lhs(space: &InputSpace, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::param("lhs needs n >= 1"));
    }
    let dists = space.compile()?;
    let mut out = Array2::zeros((n, space.p()));
    for (j, dist) in dists.iter().enumerate() {
        let mut rng = derived_rng(seed, &[j as u64]);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        for k in 0..n {
            let u = (perm[k] as f64 + rng.random::<f64>()) / n as f64;
            out[[k, j]] = dist.inverse_cdf(u)?;
        }
    }
    Ok(out)
}

/// How pick-and-freeze base matrices are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignGenerator {
    /// Seeded i.i.d. Monte Carlo.
    Mc,
    /// Halton sequence in dimension 2p: the first p coordinates feed U and
    /// the last p feed U'.
    Halton,
}

/// The paired input matrices of the pick-and-freeze scheme.
///
/// `substituted(i)` equals `U` with column `i` replaced by that column of
/// `U'`; evaluating the model on U, U' and the p substituted matrices costs
/// `n (p + 2)` runs.
#[derive(Debug, Clone)]
pub struct PickFreezeDesign {
    u: Array2<f64>,
    uprime: Array2<f64>,
}

impl PickFreezeDesign {
    pub fn from_matrices(space: &InputSpace, u: Array2<f64>, uprime: Array2<f64>) -> Result<Self> {
        if u.dim() != uprime.dim() || u.ncols() != space.p() {
            return Err(Error::param(format!(
                "design shape mismatch: U {:?}, U' {:?}, p={}",
                u.dim(),
                uprime.dim(),
                space.p()
            )));
        }
        for j in 0..space.p() {
            let (lo, hi) = space.bounds(j);
            for m in [&u, &uprime] {
                if m.column(j).iter().any(|&v| v < lo || v > hi) {
                    return Err(Error::domain(format!(
                        "design column {j} leaves bounds [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(PickFreezeDesign { u, uprime })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn uprime(&self) -> &Array2<f64> {
        &self.uprime
    }

    /// U with column `i` taken from U'.
    pub fn substituted(&self, i: usize) -> Array2<f64> {
        let mut m = self.u.clone();
        m.column_mut(i).assign(&self.uprime.column(i));
        m
    }

    /// Model runs consumed by the full first-order estimate.
    pub fn evaluation_budget(&self) -> usize {
        self.n() * (self.p() + 2)
    }
}

/// Builds the pick-and-freeze pair from a generator.
pub fn pick_freeze(
    space: &InputSpace,
    n: usize,
    seed: u64,
    generator: DesignGenerator,
) -> Result<PickFreezeDesign> {
    if n == 0 {
        return Err(Error::param("pick_freeze needs n >= 1"));
    }
    let dists = space.compile()?;
    let p = space.p();
    let (u, uprime) = match generator {
        DesignGenerator::Halton => {
            let pts = halton(2 * p, n, 0);
            let mut u = Array2::zeros((n, p));
            let mut uprime = Array2::zeros((n, p));
            for k in 0..n {
                for j in 0..p {
                    u[[k, j]] = dists[j].inverse_cdf(pts[[k, j]])?;
                    uprime[[k, j]] = dists[j].inverse_cdf(pts[[k, p + j]])?;
                }
            }
            (u, uprime)
        }
        DesignGenerator::Mc => {
            let sample_matrix = |tag: u64| -> Result<Array2<f64>> {
                let mut m = Array2::zeros((n, p));
                for j in 0..p {
                    let mut rng = derived_rng(seed, &[tag, j as u64]);
                    for k in 0..n {
                        m[[k, j]] = dists[j].inverse_cdf(rng.random::<f64>())?;
                    }
                }
                Ok(m)
            };
            (sample_matrix(0)?, sample_matrix(1)?)
        }
    };
    PickFreezeDesign::from_matrices(space, u, uprime)
}
