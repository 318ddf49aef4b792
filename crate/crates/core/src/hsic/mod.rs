//! HSIC dependence indices between scalar inputs and set outputs.
//!
//! The output side uses the exponential set kernel
//! `k_set(a, b) = exp(-vol(a symdiff b) / (2 sigma^2))`, which is
//! characteristic on measurable subsets of the unit domain; the input
//! side uses ANOVA kernels so that `K - 1` spans zero-mean functions and
//! the index admits a variance-decomposition reading. Estimation is by
//! the order-two U-statistic; independence tests come from permutation
//! resampling of the input column, optionally summarized by a
//! moment-matched gamma tail.

mod kernels;

pub use kernels::{AnovaKernel, InputKernel, DEFAULT_QUADRATURE_ORDER};

use crate::error::{Error, Result};
use crate::resample::{bootstrap_ci, BootstrapSpec};
use crate::rng::derived_rng;
use crate::sampling::InputSpace;
use crate::setgrid::SetSample;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Gamma};

const PERM_TAG: u64 = 0x7065;

/// `exp(-symdiff / (2 sigma^2))`; volumes are fractions of the unit
/// domain, so values land in (0, 1].
pub fn set_kernel(a: &SetSample, b: &SetSample, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::param(format!("set-kernel bandwidth {sigma2} must be > 0")));
    }
    Ok((-a.symdiff_volume(b)? / (2.0 * sigma2)).exp())
}

fn pairwise_volumes(sets: &[SetSample]) -> Result<Array2<f64>> {
    let n = sets.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (j + 1..n)
                .map(|l| sets[j].symdiff_volume(&sets[l]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = Array2::zeros((n, n));
    for (j, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let l = j + 1 + off;
            d[[j, l]] = v;
            d[[l, j]] = v;
        }
    }
    Ok(d)
}

fn lower_median(sorted: &[f64]) -> f64 {
    // Order statistic at ceil(N/2), 1-based; the lower of the two middle
    // values when N is even.
    sorted[sorted.len().div_ceil(2) - 1]
}

/// Bandwidth heuristic: sigma^2 is the lower median of the pairwise
/// symmetric-difference volumes.
pub fn median_bandwidth(sets: &[SetSample]) -> Result<f64> {
    if sets.len() < 2 {
        return Err(Error::param("median bandwidth needs at least 2 sets"));
    }
    let d = pairwise_volumes(sets)?;
    let mut upper: Vec<f64> = (0..sets.len())
        .flat_map(|j| (j + 1..sets.len()).map(move |l| (j, l)))
        .map(|(j, l)| d[[j, l]])
        .collect();
    upper.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = lower_median(&upper);
    if med <= 0.0 {
        return Err(Error::degenerate(
            "median pairwise symmetric difference is zero; output sets are (mostly) identical",
        ));
    }
    Ok(med)
}

/// The order-two U-statistic from precomputed Gram matrices: the input
/// Gram `k` (an ANOVA kernel, so the centered factor is `k - 1`) against
/// the set Gram `s`.
pub fn hsic_from_grams(k: &Array2<f64>, s: &Array2<f64>) -> Result<f64> {
    let n = k.nrows();
    if k.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(Error::param("gram matrices must be square and same size"));
    }
    if n < 2 {
        return Err(Error::param("HSIC U-statistic needs n >= 2"));
    }
    let mut acc = 0.0;
    for j in 0..n {
        for l in j + 1..n {
            acc += (k[[j, l]] - 1.0) * s[[j, l]];
        }
    }
    Ok(2.0 * acc / (n as f64 * (n as f64 - 1.0)))
}

/// Same U-statistic restricted to a resampled index multiset.
fn hsic_on_subset(k: &Array2<f64>, s: &Array2<f64>, idx: &[usize]) -> f64 {
    let m = idx.len();
    let mut acc = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            acc += (k[[idx[a], idx[b]]] - 1.0) * s[[idx[a], idx[b]]];
        }
    }
    2.0 * acc / (m as f64 * (m as f64 - 1.0))
}

/// One input's HSIC results.
#[derive(Debug, Clone)]
pub struct HsicEstimate {
    pub input: usize,
    /// Raw dependence value H_set(U_i, Gamma).
    pub hsic: f64,
    /// Normalized index: hsic / H_set(U, Gamma).
    pub estimate: f64,
    pub ci: Option<(f64, f64)>,
    pub pvalue: Option<f64>,
    pub sigma2: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvalueMethod {
    /// Exact finite-sample permutation p-value.
    Permutation,
    /// Gamma tail fitted to the permutation null by moment matching.
    Gamma,
}

/// How raw input values are mapped to the kernel domain [0, 1].
///
/// The kernels are ANOVA with respect to the *uniform* law on [0, 1], so
/// with the plain bounds map a skewed input picks up a systematic positive
/// HSIC offset even when it is independent of the output (the permutation
/// test stays exact either way, since it only relies on exchangeability).
/// The CDF map removes that offset by making every rescaled input exactly
/// uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputRescale {
    /// Affine map by the declared bounds.
    #[default]
    Bounds,
    /// Probability integral transform by each input's own CDF.
    Cdf,
}

/// Precomputed Gram matrices for one dataset, shared by the index,
/// bootstrap and test routines.
pub struct HsicAnalysis {
    input_grams: Vec<Array2<f64>>,
    product_gram: Array2<f64>,
    set_gram: Array2<f64>,
    sigma2: f64,
    n: usize,
}

impl HsicAnalysis {
    /// Builds Grams from paired data. Inputs are affinely rescaled to
    /// [0, 1] with the bounds of `space`; the set bandwidth is the median
    /// heuristic.
    pub fn new(
        space: &InputSpace,
        inputs: &Array2<f64>,
        sets: &[SetSample],
        kernels: &[InputKernel],
    ) -> Result<Self> {
        Self::with_rescale(space, inputs, sets, kernels, InputRescale::Bounds)
    }

    /// Same, with an explicit input rescaling map.
    pub fn with_rescale(
        space: &InputSpace,
        inputs: &Array2<f64>,
        sets: &[SetSample],
        kernels: &[InputKernel],
        rescale: InputRescale,
    ) -> Result<Self> {
        let sigma2 = median_bandwidth(sets)?;
        Self::build(space, inputs, sets, kernels, sigma2, rescale)
    }

    /// Same as [`HsicAnalysis::new`], with one kernel family for every input.
    pub fn uniform_kernel(
        space: &InputSpace,
        inputs: &Array2<f64>,
        sets: &[SetSample],
        kernel: InputKernel,
    ) -> Result<Self> {
        Self::new(space, inputs, sets, &vec![kernel; space.p()])
    }

    pub fn with_bandwidth(
        space: &InputSpace,
        inputs: &Array2<f64>,
        sets: &[SetSample],
        kernels: &[InputKernel],
        sigma2: f64,
    ) -> Result<Self> {
        Self::build(space, inputs, sets, kernels, sigma2, InputRescale::Bounds)
    }

    fn build(
        space: &InputSpace,
        inputs: &Array2<f64>,
        sets: &[SetSample],
        kernels: &[InputKernel],
        sigma2: f64,
        rescale: InputRescale,
    ) -> Result<Self> {
        let n = sets.len();
        let p = space.p();
        if inputs.nrows() != n {
            return Err(Error::param(format!(
                "{} input rows for {} output sets",
                inputs.nrows(),
                n
            )));
        }
        if inputs.ncols() != p || kernels.len() != p {
            return Err(Error::param(format!(
                "expected {p} input columns and kernels, got {} and {}",
                inputs.ncols(),
                kernels.len()
            )));
        }
        if n < 2 {
            return Err(Error::param("HSIC needs at least 2 observations"));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::param(format!("set-kernel bandwidth {sigma2} must be > 0")));
        }

        let volumes = pairwise_volumes(sets)?;
        let set_gram = volumes.mapv(|v| (-v / (2.0 * sigma2)).exp());

        let dists = match rescale {
            InputRescale::Cdf => Some(space.compile()?),
            InputRescale::Bounds => None,
        };
        let mut input_grams = Vec::with_capacity(p);
        for i in 0..p {
            let (lo, hi) = space.bounds(i);
            let width = hi - lo;
            let col: Vec<f64> = inputs
                .column(i)
                .iter()
                .map(|&v| {
                    let t = (v - lo) / width;
                    if !(-1e-9..=1.0 + 1e-9).contains(&t) {
                        return Err(Error::domain(format!(
                            "input {i} value {v} outside its bounds [{lo}, {hi}]"
                        )));
                    }
                    Ok(match &dists {
                        Some(d) => d[i].cdf(v),
                        None => t.clamp(0.0, 1.0),
                    })
                })
                .collect::<Result<_>>()?;
            let kernel = AnovaKernel::new(kernels[i])?;
            input_grams.push(kernel.gram(&col)?);
        }

        let mut product_gram = Array2::ones((n, n));
        for g in &input_grams {
            product_gram *= g;
        }

        Ok(HsicAnalysis {
            input_grams,
            product_gram,
            set_gram,
            sigma2,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.input_grams.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// H_set(U_i, Gamma).
    pub fn hsic_set(&self, i: usize) -> Result<f64> {
        let g = self
            .input_grams
            .get(i)
            .ok_or_else(|| Error::param(format!("input index {i} out of range")))?;
        hsic_from_grams(g, &self.set_gram)
    }

    /// H_set(U, Gamma) with the tensor-product input kernel.
    pub fn hsic_total(&self) -> Result<f64> {
        hsic_from_grams(&self.product_gram, &self.set_gram)
    }

    /// Normalized index with optional bootstrap CI; both U-statistics are
    /// recomputed on every resample.
    pub fn s_hsic(&self, i: usize, bootstrap: Option<&BootstrapSpec>) -> Result<HsicEstimate> {
        let num = self.hsic_set(i)?;
        let den = self.hsic_total()?;
        if !(den > 0.0) {
            return Err(Error::degenerate(format!(
                "total HSIC {den} is not positive; the normalized index is undefined"
            )));
        }
        let g = &self.input_grams[i];
        let ci = match bootstrap {
            Some(spec) => {
                let r = bootstrap_ci(self.n, spec, |idx| {
                    let d = hsic_on_subset(&self.product_gram, &self.set_gram, idx);
                    if !(d > 0.0) {
                        return Err(Error::degenerate("non-positive total HSIC in resample"));
                    }
                    Ok(hsic_on_subset(g, &self.set_gram, idx) / d)
                })?;
                Some((r.lo, r.hi))
            }
            None => None,
        };
        Ok(HsicEstimate {
            input: i,
            hsic: num,
            estimate: num / den,
            ci,
            pvalue: None,
            sigma2: self.sigma2,
            n: self.n,
        })
    }

    /// Permutation-null sample of H_set(U_i, Gamma): replicate b permutes
    /// the input column (equivalently the rows/columns of its Gram).
    fn permutation_null(&self, i: usize, b_perm: usize, seed: u64) -> Result<Vec<f64>> {
        let g = self
            .input_grams
            .get(i)
            .ok_or_else(|| Error::param(format!("input index {i} out of range")))?;
        let n = self.n;
        Ok((0..b_perm)
            .into_par_iter()
            .map(|b| {
                let mut rng = derived_rng(seed, &[PERM_TAG, i as u64, b as u64]);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let mut acc = 0.0;
                for j in 0..n {
                    for l in j + 1..n {
                        acc += (g[[perm[j], perm[l]]] - 1.0) * self.set_gram[[j, l]];
                    }
                }
                2.0 * acc / (n as f64 * (n as f64 - 1.0))
            })
            .collect())
    }

    /// Independence-test p-value for input `i`.
    ///
    /// `Permutation` returns `(1 + #{H_b >= H_obs}) / (1 + B)`. `Gamma`
    /// fits a gamma distribution to the null sample of n*HSIC by moment
    /// matching and returns its upper tail at the observed value; when the
    /// null moments do not admit a gamma (non-positive mean), it falls
    /// back to the permutation count.
    pub fn pvalue(
        &self,
        i: usize,
        method: PvalueMethod,
        b_perm: usize,
        seed: u64,
    ) -> Result<f64> {
        if self.n < 10 {
            return Err(Error::param("independence test needs n >= 10"));
        }
        if b_perm < 1 {
            return Err(Error::param("need at least one permutation"));
        }
        if method == PvalueMethod::Gamma && b_perm < 20 {
            return Err(Error::param(
                "gamma moment fit needs at least 20 permutations",
            ));
        }
        let observed = self.hsic_set(i)?;
        let null = self.permutation_null(i, b_perm, seed)?;
        let exceed = null.iter().filter(|&&h| h >= observed).count();
        let perm_p = (1 + exceed) as f64 / (1 + b_perm) as f64;
        if method == PvalueMethod::Permutation {
            return Ok(perm_p);
        }
        let nf = self.n as f64;
        let scaled: Vec<f64> = null.iter().map(|&h| nf * h).collect();
        let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
        let var = scaled.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>()
            / (scaled.len() as f64 - 1.0);
        if !(mean > 0.0) || !(var > 0.0) {
            return Ok(perm_p);
        }
        let shape = mean * mean / var;
        let rate = mean / var;
        let obs = nf * observed;
        if obs <= 0.0 {
            return Ok(1.0);
        }
        let gamma = Gamma::new(shape, rate)
            .map_err(|e| Error::param(format!("gamma fit failed: {e}")))?;
        Ok(1.0 - gamma.cdf(obs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Basis, DomainGrid, LevelGrid, Link, SetModel, SyntheticSeparable};
    use crate::sampling::{halton, DistributionSpec};
    use crate::setgrid::GridDims;

    const ALL: [InputKernel; 5] = [
        InputKernel::Sobolev1,
        InputKernel::Gaussian { h: 0.2 },
        InputKernel::Laplace { h: 0.2 },
        InputKernel::Matern32 { h: 0.2 },
        InputKernel::Matern52 { h: 0.2 },
    ];

    fn unit_space(p: usize) -> InputSpace {
        InputSpace::from_specs(
            (0..p)
                .map(|i| (format!("u{}", i + 1), DistributionSpec::uniform(0.0, 1.0)))
                .collect(),
        )
        .unwrap()
    }

    /// Additive model a1*u1 + a2*u2 (+ 0*u3 when p = 3).
    fn additive_dataset(
        n: usize,
        p: usize,
        a1: f64,
        a2: f64,
    ) -> (InputSpace, Array2<f64>, Vec<SetSample>) {
        let space = unit_space(p);
        let coefs = [a1, a2];
        let mut terms: Vec<(Basis, Link)> = coefs
            .iter()
            .take(p)
            .map(|&a| (Basis::Constant(a), Link::Identity))
            .collect();
        for _ in 2..p {
            terms.push((Basis::Zero, Link::Identity));
        }
        let model = SyntheticSeparable::new(
            space.clone(),
            DomainGrid::unit(6, 6).unwrap(),
            Basis::Constant(0.0),
            terms,
        )
        .unwrap();
        let set_model = SetModel::new(
            Box::new(model),
            LevelGrid::new(-0.1, a1 + a2 + 0.1, 12).unwrap(),
        );
        let inputs = halton(p, n, 0);
        let sets = (0..n)
            .map(|j| set_model.realize(inputs.row(j).as_slice().unwrap()).unwrap())
            .collect();
        (space, inputs, sets)
    }

    #[test]
    fn set_kernel_basics() {
        let dims = GridDims::new(4, 4, 4).unwrap();
        let empty = SetSample::empty(dims);
        let full = SetSample::full(dims);
        assert_eq!(set_kernel(&full, &full, 0.3).unwrap(), 1.0);
        let v = set_kernel(&empty, &full, 0.5).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((set_kernel(&empty, &full, 0.5).unwrap()
            - set_kernel(&full, &empty, 0.5).unwrap())
        .abs()
            < 1e-18);
        assert!(set_kernel(&empty, &full, 0.0).is_err());
    }

    #[test]
    fn median_bandwidth_matches_sort_oracle() {
        let (_, _, sets) = additive_dataset(10, 2, 1.0, 1.0);
        let mut vols = Vec::new();
        for j in 0..sets.len() {
            for l in j + 1..sets.len() {
                vols.push(sets[j].symdiff_volume(&sets[l]).unwrap());
            }
        }
        assert_eq!(vols.len(), 45);
        vols.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = vols[22]; // ceil(45/2) = 23rd smallest
        assert_eq!(median_bandwidth(&sets).unwrap(), want);

        let two = vec![sets[0].clone(), sets[1].clone()];
        let v = two[0].symdiff_volume(&two[1]).unwrap();
        assert_eq!(median_bandwidth(&two).unwrap(), v);

        let same = vec![sets[0].clone(), sets[0].clone(), sets[0].clone()];
        assert!(median_bandwidth(&same).is_err());
    }

    #[test]
    fn micro_dataset_matches_hand_transcription() {
        let k = Array2::from_shape_vec(
            (3, 3),
            vec![1.2, 0.9, 1.1, 0.9, 1.3, 0.8, 1.1, 0.8, 1.25],
        )
        .unwrap();
        let s = Array2::from_shape_vec(
            (3, 3),
            vec![1.0, 0.6, 0.4, 0.6, 1.0, 0.7, 0.4, 0.7, 1.0],
        )
        .unwrap();
        // (2/6) * ((0.9-1)*0.6 + (1.1-1)*0.4 + (0.8-1)*0.7) = -0.16/3
        let h = hsic_from_grams(&k, &s).unwrap();
        assert!((h - (-0.16 / 3.0)).abs() < 1e-12, "got {h}");
    }

    #[test]
    fn cdf_rescaling_removes_the_skewed_null_input_offset() {
        // An inert, heavily skewed input. With the affine bounds map the
        // Sobolev gram is not centered under the input's law, so the raw
        // HSIC carries a stable positive offset even under independence;
        // the CDF map makes the rescaled input exactly uniform and the
        // offset vanishes.
        let space = InputSpace::from_specs(vec![
            ("u1", DistributionSpec::uniform(0.0, 1.0)),
            ("skewed", DistributionSpec::truncated_skew_normal(0.95, 0.25, -4.0, 0.0, 1.0)),
        ])
        .unwrap();
        let model = SyntheticSeparable::new(
            space.clone(),
            DomainGrid::unit(6, 6).unwrap(),
            Basis::Constant(0.0),
            vec![
                (Basis::Constant(1.0), Link::Identity),
                (Basis::Zero, Link::Identity),
            ],
        )
        .unwrap();
        let set_model = SetModel::new(Box::new(model), LevelGrid::new(-0.1, 1.1, 12).unwrap());
        let dists = space.compile().unwrap();
        let n = 400;
        let mut inputs = Array2::zeros((n, 2));
        for j in 0..2 {
            let col = dists[j].sample(n, 7 + j as u64).unwrap();
            for (k, v) in col.into_iter().enumerate() {
                inputs[[k, j]] = v;
            }
        }
        let sets: Vec<SetSample> = (0..n)
            .map(|j| set_model.realize(inputs.row(j).as_slice().unwrap()).unwrap())
            .collect();

        let kernels = vec![InputKernel::Sobolev1; 2];
        let affine = HsicAnalysis::new(&space, &inputs, &sets, &kernels).unwrap();
        let cdf =
            HsicAnalysis::with_rescale(&space, &inputs, &sets, &kernels, InputRescale::Cdf)
                .unwrap();
        let h_affine = affine.hsic_set(1).unwrap();
        let h_cdf = cdf.hsic_set(1).unwrap();
        assert!(h_affine > 0.005, "expected a visible offset, got {h_affine}");
        assert!(h_cdf.abs() < 0.02, "CDF-rescaled null HSIC {h_cdf}");
        assert!(h_cdf.abs() < h_affine / 3.0, "{h_cdf} vs {h_affine}");
        // The influential input keeps a clearly positive value either way.
        assert!(cdf.hsic_set(0).unwrap() > 5.0 * h_cdf.abs());
    }

    #[test]
    fn joint_permutation_of_pairs_is_invisible() {
        let (space, inputs, sets) = additive_dataset(40, 2, 1.0, 2.0);
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        // Reverse the observation order on both sides.
        let mut rev_inputs = Array2::zeros(inputs.dim());
        for j in 0..inputs.nrows() {
            rev_inputs
                .row_mut(j)
                .assign(&inputs.row(inputs.nrows() - 1 - j));
        }
        let rev_sets: Vec<SetSample> = sets.iter().rev().cloned().collect();
        let b =
            HsicAnalysis::uniform_kernel(&space, &rev_inputs, &rev_sets, InputKernel::Sobolev1)
                .unwrap();
        for i in 0..2 {
            let (x, y) = (a.hsic_set(i).unwrap(), b.hsic_set(i).unwrap());
            assert!((x - y).abs() < 1e-12 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn cell_relabeling_is_invisible() {
        let (space, inputs, sets) = additive_dataset(30, 2, 1.0, 2.0);
        // Bijectively relabel grid cells by reversing the linear bit order.
        let dims = sets[0].dims();
        let total = dims.cells();
        let relabeled: Vec<SetSample> = sets
            .iter()
            .map(|s| {
                let words = s.mask_words();
                SetSample::from_predicate(dims, |i1, i2, k| {
                    let bit = total - 1 - ((i1 * dims.n2 + i2) * dims.nc + k);
                    words[bit / 64] >> (bit % 64) & 1 == 1
                })
            })
            .collect();
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        let b = HsicAnalysis::uniform_kernel(&space, &inputs, &relabeled, InputKernel::Sobolev1)
            .unwrap();
        assert_eq!(a.sigma2(), b.sigma2());
        for i in 0..2 {
            assert_eq!(
                a.hsic_set(i).unwrap().to_bits(),
                b.hsic_set(i).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn single_input_index_is_one_and_total_matches() {
        let (space, inputs, sets) = additive_dataset(50, 1, 1.0, 0.0);
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        assert_eq!(
            a.hsic_total().unwrap().to_bits(),
            a.hsic_set(0).unwrap().to_bits()
        );
        let est = a.s_hsic(0, None).unwrap();
        assert_eq!(est.estimate, 1.0);
    }

    #[test]
    fn identical_sets_with_anova_kernel_average_out() {
        // All outputs equal: the set Gram is constant 1 and the statistic
        // reduces to the mean of K-1 over pairs, which an ANOVA kernel
        // sends to ~0 for an even input design.
        let space = unit_space(1);
        let inputs = halton(1, 1000, 0);
        let dims = GridDims::new(4, 4, 4).unwrap();
        let sets: Vec<SetSample> = (0..1000)
            .map(|_| SetSample::from_levels(dims, vec![2; 16]).unwrap())
            .collect();
        let a = HsicAnalysis::with_bandwidth(
            &space,
            &inputs,
            &sets,
            &[InputKernel::Sobolev1],
            0.5,
        )
        .unwrap();
        let h = a.hsic_set(0).unwrap();
        assert!(h.abs() <= 0.05, "got {h}");
    }

    #[test]
    fn independent_input_stays_within_null_scale() {
        let (space, inputs, sets) = additive_dataset(150, 3, 1.0, 2.0);
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        let h = a.hsic_set(2).unwrap();
        let null = a.permutation_null(2, 200, 99).unwrap();
        let mean = null.iter().sum::<f64>() / null.len() as f64;
        let sd = (null.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (null.len() as f64 - 1.0))
            .sqrt();
        assert!(
            (h - mean).abs() <= 3.0 * sd,
            "h {h} vs null ({mean}, sd {sd})"
        );
    }

    #[test]
    fn additive_model_total_dominates_components() {
        let (space, inputs, sets) = additive_dataset(1000, 2, 1.0, 2.0);
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        let total = a.hsic_total().unwrap();
        let h0 = a.hsic_set(0).unwrap();
        let h1 = a.hsic_set(1).unwrap();
        assert!(total >= h0.max(h1), "total {total} vs ({h0}, {h1})");
    }

    #[test]
    fn inert_input_index_is_near_zero() {
        let (space, inputs, sets) = additive_dataset(1000, 3, 1.0, 2.0);
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        let est = a.s_hsic(2, None).unwrap();
        assert!(est.estimate.abs() <= 0.05, "got {}", est.estimate);
    }

    #[test]
    fn rankings_agree_across_kernels() {
        let (space, inputs, sets) = additive_dataset(300, 2, 1.0, 2.0);
        for kernel in ALL {
            let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, kernel).unwrap();
            let s0 = a.s_hsic(0, None).unwrap().estimate;
            let s1 = a.s_hsic(1, None).unwrap().estimate;
            assert!(s1 > s0, "{}: {s1} !> {s0}", kernel.label());
        }
    }

    #[test]
    fn screening_separates_null_input() {
        let (space, inputs, sets) = additive_dataset(400, 3, 1.0, 2.0);
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        let p0 = a.pvalue(0, PvalueMethod::Permutation, 99, 7).unwrap();
        let p1 = a.pvalue(1, PvalueMethod::Permutation, 99, 7).unwrap();
        let p2 = a.pvalue(2, PvalueMethod::Permutation, 99, 7).unwrap();
        assert!(p0 <= 0.05 && p1 <= 0.05, "influential: {p0}, {p1}");
        assert!(p2 > 0.05, "null input p {p2}");

        let g2 = a.pvalue(2, PvalueMethod::Gamma, 99, 7).unwrap();
        assert!(g2 > 0.05, "gamma null input p {g2}");
        // The gamma fit falls back to the permutation count when the null
        // moments are unusable, so 1/(B+1) is the strongest claim here.
        let g0 = a.pvalue(0, PvalueMethod::Gamma, 99, 7).unwrap();
        assert!(g0 <= 0.05, "gamma influential p {g0}");
    }

    #[test]
    fn permutation_pvalues_live_on_the_discrete_grid() {
        let (space, inputs, sets) = additive_dataset(60, 2, 1.0, 2.0);
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        for i in 0..2 {
            let p = a.pvalue(i, PvalueMethod::Permutation, 199, 3).unwrap();
            let scaled = p * 200.0;
            assert!((scaled - scaled.round()).abs() < 1e-9, "p {p}");
            assert!((1.0 / 200.0..=1.0).contains(&p));
        }
        assert!(a.pvalue(0, PvalueMethod::Gamma, 19, 3).is_err());
    }

    #[test]
    fn bootstrap_ci_is_deterministic_and_brackets() {
        let (space, inputs, sets) = additive_dataset(120, 2, 1.0, 2.0);
        let a = HsicAnalysis::uniform_kernel(&space, &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
        let spec = BootstrapSpec::with_replacement(17);
        let e1 = a.s_hsic(1, Some(&spec)).unwrap();
        let e2 = a.s_hsic(1, Some(&spec)).unwrap();
        assert_eq!(e1.ci, e2.ci);
        let (lo, hi) = e1.ci.unwrap();
        assert!(lo <= hi);
        assert!(hi - lo < 0.6, "ci ({lo}, {hi})");
    }
}
