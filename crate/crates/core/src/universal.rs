//! Universal sensitivity indices over parameterized test-set families.
//!
//! The output set is probed through scalar transformations `a ->
//! volume(Gamma symdiff gamma_a)` for a family of test sets `gamma_a`
//! with `a` drawn from a law Q. The index of input `i` is the ratio of
//! `int Var E[lambda(Gamma symdiff gamma_a) | U_i] dQ(a)` to
//! `int Var lambda(Gamma symdiff gamma_a) dQ(a)`, estimated by the
//! Chatterjee rank trick: the conditional expectation is approximated by
//! pairing each observation with its successor in the `U_i` ordering.

use crate::error::{Error, Result};
use crate::resample::{bootstrap_ci, BootstrapSpec};
use crate::rng::derived_rng;
use crate::sampling::{Dist, DistributionSpec};
use crate::setgrid::{vorobev_quantile, CoverageField, GridDims, SetSample};
use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

const PARAM_TAG: u64 = 0x756c;

/// The four test-set families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Euclidean balls around the domain center (1/2, 1/2, 1/2).
    CenteredBalls,
    /// Sup-norm balls (cubes) around the domain center.
    CenteredSquares,
    /// Half-spaces `x_axis <= a`; axis is 1-based, 3 = level direction.
    Slides { axis: usize },
    /// Vorob'ev quantiles of an empirical coverage function.
    VorobevQuantiles,
}

impl FamilyKind {
    pub fn label(&self) -> String {
        match self {
            FamilyKind::CenteredBalls => "centered-balls".into(),
            FamilyKind::CenteredSquares => "centered-squares".into(),
            FamilyKind::Slides { axis } => format!("slides-{axis}"),
            FamilyKind::VorobevQuantiles => "vorobev-quantiles".into(),
        }
    }
}

/// Law of the test-set parameter `a` on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawQ {
    Uniform { lo: f64, hi: f64 },
    /// Normal truncated to [0, 1].
    Normal { mean: f64, sd: f64 },
}

impl LawQ {
    /// The default parameter law of each family: U[0, 1/2] for balls and
    /// squares, U[0, 1] for slides, N(1/2, 0.15^2) for quantiles.
    pub fn default_for(kind: FamilyKind) -> LawQ {
        match kind {
            FamilyKind::CenteredBalls | FamilyKind::CenteredSquares => {
                LawQ::Uniform { lo: 0.0, hi: 0.5 }
            }
            FamilyKind::Slides { .. } => LawQ::Uniform { lo: 0.0, hi: 1.0 },
            FamilyKind::VorobevQuantiles => LawQ::Normal {
                mean: 0.5,
                sd: 0.15,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LawQ::Uniform { lo, hi } => {
                if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                    return Err(Error::param(format!("bad parameter law U[{lo}, {hi}]")));
                }
            }
            LawQ::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd > 0.0) {
                    return Err(Error::param(format!("bad parameter law N({mean}, {sd}^2)")));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, n_a: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = derived_rng(seed, &[PARAM_TAG]);
        match *self {
            LawQ::Uniform { lo, hi } => {
                Ok((0..n_a).map(|_| lo + rng.random::<f64>() * (hi - lo)).collect())
            }
            LawQ::Normal { mean, sd } => {
                let dist = Dist::new(&DistributionSpec::truncated_normal(mean, sd, 0.0, 1.0))?;
                (0..n_a).map(|_| dist.inverse_cdf(rng.random())).collect()
            }
        }
    }
}

/// A realizable family `a -> gamma_a` with its parameter law.
pub struct TestSetFamily {
    kind: FamilyKind,
    law: LawQ,
    coverage: Option<CoverageField>,
}

/// Builds a family; the Vorob'ev-quantile family needs the coverage
/// function the quantiles are taken from.
pub fn make_family(
    kind: FamilyKind,
    law: LawQ,
    coverage: Option<CoverageField>,
) -> Result<TestSetFamily> {
    law.validate()?;
    if let FamilyKind::Slides { axis } = kind {
        if !(1..=3).contains(&axis) {
            return Err(Error::param(format!("slide axis must be 1..3, got {axis}")));
        }
    }
    if kind == FamilyKind::VorobevQuantiles && coverage.is_none() {
        return Err(Error::param(
            "vorobev-quantiles family needs a coverage function",
        ));
    }
    Ok(TestSetFamily {
        kind,
        law,
        coverage,
    })
}

impl TestSetFamily {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn label(&self) -> String {
        self.kind.label()
    }

    /// Draws the shared parameter sample (a_l).
    pub fn draw_params(&self, n_a: usize, seed: u64) -> Result<Vec<f64>> {
        if n_a == 0 {
            return Err(Error::param("need at least one test set"));
        }
        self.law.sample(n_a, seed)
    }

    /// Test set at parameter `a`, discretized by cell centers on the
    /// unit-rescaled grid.
    pub fn realize(&self, dims: GridDims, a: f64) -> Result<SetSample> {
        let center = |idx: usize, count: usize| (idx as f64 + 0.5) / count as f64;
        match self.kind {
            FamilyKind::CenteredBalls => Ok(SetSample::from_predicate(dims, |i1, i2, k| {
                let d1 = center(i1, dims.n1) - 0.5;
                let d2 = center(i2, dims.n2) - 0.5;
                let d3 = center(k, dims.nc) - 0.5;
                (d1 * d1 + d2 * d2 + d3 * d3).sqrt() <= a
            })),
            FamilyKind::CenteredSquares => Ok(SetSample::from_predicate(dims, |i1, i2, k| {
                let d1 = (center(i1, dims.n1) - 0.5).abs();
                let d2 = (center(i2, dims.n2) - 0.5).abs();
                let d3 = (center(k, dims.nc) - 0.5).abs();
                d1.max(d2).max(d3) <= a
            })),
            FamilyKind::Slides { axis } => {
                let level_count =
                    |count: usize| (0..count).take_while(|&k| center(k, count) <= a).count() as u32;
                let levels = match axis {
                    1 => (0..dims.base_cells())
                        .map(|c| {
                            if center(c / dims.n2, dims.n1) <= a {
                                dims.nc as u32
                            } else {
                                0
                            }
                        })
                        .collect(),
                    2 => (0..dims.base_cells())
                        .map(|c| {
                            if center(c % dims.n2, dims.n2) <= a {
                                dims.nc as u32
                            } else {
                                0
                            }
                        })
                        .collect(),
                    _ => vec![level_count(dims.nc); dims.base_cells()],
                };
                SetSample::from_levels(dims, levels)
            }
            FamilyKind::VorobevQuantiles => {
                let cov = self.coverage.as_ref().expect("enforced by make_family");
                if cov.dims() != dims {
                    return Err(Error::GridMismatch(format!(
                        "coverage on {:?}, sets on {:?}",
                        cov.dims(),
                        dims
                    )));
                }
                Ok(vorobev_quantile(cov, a))
            }
        }
    }
}

/// Successor map of the ascending order: `N(j)` is the index holding the
/// next-larger value, the maximum wrapping around to the minimum. Ties
/// resolve by original index (stable sort).
pub fn rank_successor(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut succ = vec![0; n];
    for pos in 0..n {
        succ[order[pos]] = order[(pos + 1) % n];
    }
    succ
}

/// The rank-based estimate from precomputed symmetric-difference volumes.
///
/// `d[(j, l)]` is the volume of `Gamma_j symdiff gamma_{a_l}`; `u_col` the
/// input values paired with rows of `d`. This is the whole estimator in
/// one place — the public entry points deal only with producing `d`.
pub fn universal_from_volumes(u_col: &[f64], d: &Array2<f64>) -> Result<f64> {
    if u_col.len() != d.nrows() {
        return Err(Error::param(format!(
            "{} input values for {} volume rows",
            u_col.len(),
            d.nrows()
        )));
    }
    let idx: Vec<usize> = (0..u_col.len()).collect();
    estimate_on(u_col, d, &idx)
}

fn estimate_on(u_col: &[f64], d: &Array2<f64>, idx: &[usize]) -> Result<f64> {
    let m = idx.len();
    if m < 3 {
        return Err(Error::param("rank estimator needs at least 3 observations"));
    }
    let n_a = d.ncols();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| u_col[idx[a]].partial_cmp(&u_col[idx[b]]).unwrap());

    let mut cross = vec![0.0; n_a];
    let mut sum = vec![0.0; n_a];
    let mut sum_sq = vec![0.0; n_a];
    for pos in 0..m {
        let j = idx[order[pos]];
        let nj = idx[order[(pos + 1) % m]];
        let row = d.row(j);
        let row_succ = d.row(nj);
        for l in 0..n_a {
            cross[l] += row[l] * row_succ[l];
            sum[l] += row[l];
            sum_sq[l] += row[l] * row[l];
        }
    }
    let mf = m as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for l in 0..n_a {
        let mean = sum[l] / mf;
        num += cross[l] / mf - mean * mean;
        den += sum_sq[l] / mf - mean * mean;
    }
    num /= n_a as f64;
    den /= n_a as f64;
    if den <= 0.0 {
        return Err(Error::degenerate(
            "output sets are invariant under every test transformation",
        ));
    }
    Ok(num / den)
}

/// Symmetric-difference volumes of every (output set, test set) pair.
fn volume_profiles(sets: &[SetSample], gammas: &[SetSample]) -> Result<Array2<f64>> {
    let dims = sets[0].dims();
    // Avoid re-packing hypographs inside every mixed-representation pair:
    // when any test set is a mask, convert the outputs to masks once.
    let packed: Vec<SetSample>;
    let lhs: &[SetSample] = if gammas.iter().any(|g| !g.is_hypograph()) {
        packed = sets
            .iter()
            .map(|s| SetSample::from_mask_words(dims, s.mask_words().into_owned()))
            .collect::<Result<_>>()?;
        &packed
    } else {
        sets
    };
    let rows: Vec<Vec<f64>> = lhs
        .par_iter()
        .map(|s| gammas.iter().map(|g| s.symdiff_volume(g)).collect())
        .collect::<Result<_>>()?;
    let mut d = Array2::zeros((sets.len(), gammas.len()));
    for (j, row) in rows.into_iter().enumerate() {
        for (l, v) in row.into_iter().enumerate() {
            d[[j, l]] = v;
        }
    }
    Ok(d)
}

/// A universal index estimate for one input.
#[derive(Debug, Clone)]
pub struct UniversalEstimate {
    pub input: usize,
    pub estimate: f64,
    pub ci: Option<(f64, f64)>,
    pub family: String,
    pub n_a: usize,
    pub n: usize,
}

fn universal_core(
    inputs: &Array2<f64>,
    sets: &[SetSample],
    family: &TestSetFamily,
    n_a: usize,
    seed_q: u64,
    bootstrap: Option<&BootstrapSpec>,
    which: &[usize],
) -> Result<Vec<UniversalEstimate>> {
    let n = sets.len();
    if inputs.nrows() != n {
        return Err(Error::param(format!(
            "{} input rows for {} output sets",
            inputs.nrows(),
            n
        )));
    }
    if n < 3 {
        return Err(Error::param("universal index needs n >= 3"));
    }
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("input matrix contains non-finite values"));
    }
    let dims = sets[0].dims();
    let params = family.draw_params(n_a, seed_q)?;
    let gammas: Vec<SetSample> = params
        .iter()
        .map(|&a| family.realize(dims, a))
        .collect::<Result<_>>()?;
    let d = volume_profiles(sets, &gammas)?;

    let mut out = Vec::with_capacity(which.len());
    for &i in which {
        if i >= inputs.ncols() {
            return Err(Error::param(format!("input index {i} out of range")));
        }
        let u_col: Vec<f64> = inputs.column(i).to_vec();
        let idx: Vec<usize> = (0..n).collect();
        let estimate = estimate_on(&u_col, &d, &idx)?;
        let ci = match bootstrap {
            Some(spec) => {
                let r = bootstrap_ci(n, spec, |idx| estimate_on(&u_col, &d, idx))?;
                Some((r.lo, r.hi))
            }
            None => None,
        };
        out.push(UniversalEstimate {
            input: i,
            estimate,
            ci,
            family: family.label(),
            n_a,
            n,
        });
    }
    Ok(out)
}

/// Universal index of input `i` from paired (inputs, output sets) data.
///
/// The parameter draws depend only on `seed_q`, so calls for different
/// inputs share the same test sets.
pub fn universal_index(
    i: usize,
    inputs: &Array2<f64>,
    sets: &[SetSample],
    family: &TestSetFamily,
    n_a: usize,
    seed_q: u64,
    bootstrap: Option<&BootstrapSpec>,
) -> Result<UniversalEstimate> {
    let mut v = universal_core(inputs, sets, family, n_a, seed_q, bootstrap, &[i])?;
    Ok(v.pop().expect("one requested input"))
}

/// Universal indices of all inputs, sharing the test sets and the volume
/// profile computation.
pub fn universal_indices(
    inputs: &Array2<f64>,
    sets: &[SetSample],
    family: &TestSetFamily,
    n_a: usize,
    seed_q: u64,
    bootstrap: Option<&BootstrapSpec>,
) -> Result<Vec<UniversalEstimate>> {
    let which: Vec<usize> = (0..inputs.ncols()).collect();
    universal_core(inputs, sets, family, n_a, seed_q, bootstrap, &which)
}
