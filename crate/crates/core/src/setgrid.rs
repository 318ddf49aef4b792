//! Discretized random-set machinery on a regular 3-D lattice.
//!
//! A set sample lives on an `n1 x n2 x nc` grid of equal cells. Model
//! outputs arrive as hypographs, fully described by one integer level per
//! `(x1, x2)` column: the cells `0..level` along the third axis are inside
//! the set. Arbitrary test sets (balls, cubes) use a packed bit mask over
//! all `n1*n2*nc` cells instead. Volumes are reported as fractions of the
//! rescaled unit domain, so the full grid has volume 1.
//!
//! All arithmetic reduces to integer counting, which keeps the fast
//! hypograph paths bit-identical to brute-force mask operations.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;

/// Lattice dimensions: `n1 x n2` columns, `nc` cells along the level axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub n1: usize,
    pub n2: usize,
    pub nc: usize,
}

impl GridDims {
    pub fn new(n1: usize, n2: usize, nc: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 || nc == 0 {
            return Err(Error::param("grid dimensions must be positive"));
        }
        Ok(GridDims { n1, n2, nc })
    }

    /// Number of `(x1, x2)` columns.
    pub fn base_cells(&self) -> usize {
        self.n1 * self.n2
    }

    /// Total number of 3-D cells.
    pub fn cells(&self) -> usize {
        self.n1 * self.n2 * self.nc
    }

    fn column(&self, i1: usize, i2: usize) -> usize {
        debug_assert!(i1 < self.n1 && i2 < self.n2);
        i1 * self.n2 + i2
    }

    fn words(&self) -> usize {
        self.cells().div_ceil(64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Repr {
    /// One level per column; cells `0..level` along the third axis are in.
    Hypograph(Vec<u32>),
    /// Packed bits, cell `(i1,i2,k)` at bit `column(i1,i2)*nc + k`.
    Mask(Vec<u64>),
}

/// A measurable subset of the discretized domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SetSample {
    dims: GridDims,
    repr: Repr,
}

fn set_bit_range(words: &mut [u64], start: usize, len: usize) {
    if len == 0 {
        return;
    }
    let end = start + len;
    let (w0, b0) = (start / 64, start % 64);
    let (w1, b1) = (end / 64, end % 64);
    if w0 == w1 {
        words[w0] |= (!0u64 >> (64 - len)) << b0;
    } else {
        words[w0] |= !0u64 << b0;
        for w in words.iter_mut().take(w1).skip(w0 + 1) {
            *w = !0;
        }
        if b1 > 0 {
            words[w1] |= !0u64 >> (64 - b1);
        }
    }
}

fn get_bit(words: &[u64], idx: usize) -> bool {
    words[idx / 64] >> (idx % 64) & 1 == 1
}

impl SetSample {
    /// Hypograph form from per-column levels.
    pub fn from_levels(dims: GridDims, levels: Vec<u32>) -> Result<Self> {
        if levels.len() != dims.base_cells() {
            return Err(Error::param(format!(
                "expected {} levels, got {}",
                dims.base_cells(),
                levels.len()
            )));
        }
        if levels.iter().any(|&l| l as usize > dims.nc) {
            return Err(Error::param(format!(
                "hypograph level exceeds nc = {}",
                dims.nc
            )));
        }
        Ok(SetSample {
            dims,
            repr: Repr::Hypograph(levels),
        })
    }

    /// Mask form from packed words. Stray bits past the last cell are cleared.
    pub fn from_mask_words(dims: GridDims, mut words: Vec<u64>) -> Result<Self> {
        if words.len() != dims.words() {
            return Err(Error::param(format!(
                "expected {} mask words, got {}",
                dims.words(),
                words.len()
            )));
        }
        let tail = dims.cells() % 64;
        if tail > 0 {
            *words.last_mut().unwrap() &= !0u64 >> (64 - tail);
        }
        Ok(SetSample {
            dims,
            repr: Repr::Mask(words),
        })
    }

    /// Mask built cell-by-cell from a membership predicate over indices.
    pub fn from_predicate(dims: GridDims, mut pred: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut words = vec![0u64; dims.words()];
        for i1 in 0..dims.n1 {
            for i2 in 0..dims.n2 {
                let base = dims.column(i1, i2) * dims.nc;
                for k in 0..dims.nc {
                    if pred(i1, i2, k) {
                        words[(base + k) / 64] |= 1 << ((base + k) % 64);
                    }
                }
            }
        }
        SetSample {
            dims,
            repr: Repr::Mask(words),
        }
    }

    pub fn empty(dims: GridDims) -> Self {
        SetSample {
            dims,
            repr: Repr::Hypograph(vec![0; dims.base_cells()]),
        }
    }

    pub fn full(dims: GridDims) -> Self {
        SetSample {
            dims,
            repr: Repr::Hypograph(vec![dims.nc as u32; dims.base_cells()]),
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn is_hypograph(&self) -> bool {
        matches!(self.repr, Repr::Hypograph(_))
    }

    /// Per-column levels, or `None` when the mask is not a hypograph
    /// (some column has a gap along the level axis).
    pub fn levels(&self) -> Option<Cow<'_, [u32]>> {
        match &self.repr {
            Repr::Hypograph(l) => Some(Cow::Borrowed(l)),
            Repr::Mask(words) => {
                let mut levels = Vec::with_capacity(self.dims.base_cells());
                for c in 0..self.dims.base_cells() {
                    let base = c * self.dims.nc;
                    let mut level = 0;
                    while level < self.dims.nc && get_bit(words, base + level) {
                        level += 1;
                    }
                    for k in level..self.dims.nc {
                        if get_bit(words, base + k) {
                            return None;
                        }
                    }
                    levels.push(level as u32);
                }
                Some(Cow::Owned(levels))
            }
        }
    }

    /// Packed-word view, materializing the hypograph form on demand.
    pub fn mask_words(&self) -> Cow<'_, [u64]> {
        match &self.repr {
            Repr::Mask(w) => Cow::Borrowed(w),
            Repr::Hypograph(levels) => {
                let mut words = vec![0u64; self.dims.words()];
                for (c, &l) in levels.iter().enumerate() {
                    set_bit_range(&mut words, c * self.dims.nc, l as usize);
                }
                Cow::Owned(words)
            }
        }
    }

    pub fn contains(&self, i1: usize, i2: usize, k: usize) -> bool {
        debug_assert!(k < self.dims.nc);
        let c = self.dims.column(i1, i2);
        match &self.repr {
            Repr::Hypograph(l) => (k as u32) < l[c],
            Repr::Mask(w) => get_bit(w, c * self.dims.nc + k),
        }
    }

    /// Fraction of grid cells inside the set (the volume estimator on the
    /// unit-rescaled domain).
    pub fn volume(&self) -> f64 {
        let count: u64 = match &self.repr {
            Repr::Hypograph(l) => l.iter().map(|&v| v as u64).sum(),
            Repr::Mask(w) => w.iter().map(|v| v.count_ones() as u64).sum(),
        };
        count as f64 / self.dims.cells() as f64
    }

    /// Volume of the symmetric difference. Two hypographs reduce to a sum
    /// of absolute level differences; any mask operand falls back to an
    /// XOR popcount. Both paths count the same cells, so they agree
    /// exactly.
    pub fn symdiff_volume(&self, other: &SetSample) -> Result<f64> {
        self.check_dims(other)?;
        let count: u64 = match (&self.repr, &other.repr) {
            (Repr::Hypograph(a), Repr::Hypograph(b)) => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x.max(y) - x.min(y)) as u64)
                .sum(),
            _ => {
                let a = self.mask_words();
                let b = other.mask_words();
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x ^ y).count_ones() as u64)
                    .sum()
            }
        };
        Ok(count as f64 / self.dims.cells() as f64)
    }

    /// Volume of the intersection.
    pub fn intersection_volume(&self, other: &SetSample) -> Result<f64> {
        self.check_dims(other)?;
        let count: u64 = match (&self.repr, &other.repr) {
            (Repr::Hypograph(a), Repr::Hypograph(b)) => {
                a.iter().zip(b).map(|(&x, &y)| x.min(y) as u64).sum()
            }
            _ => {
                let a = self.mask_words();
                let b = other.mask_words();
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x & y).count_ones() as u64)
                    .sum()
            }
        };
        Ok(count as f64 / self.dims.cells() as f64)
    }

    pub fn is_subset_of(&self, other: &SetSample) -> Result<bool> {
        self.check_dims(other)?;
        let a = self.mask_words();
        let b = other.mask_words();
        Ok(a.iter().zip(b.iter()).all(|(x, y)| x & !y == 0))
    }

    fn check_dims(&self, other: &SetSample) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Run-length-encoded dump of the packed mask, for debugging:
    /// `"<bit>x<run> ..."` in linear cell order.
    pub fn rle_dump(&self) -> String {
        let words = self.mask_words();
        let mut out = String::new();
        let mut run_bit = get_bit(&words, 0);
        let mut run_len = 0usize;
        for idx in 0..self.dims.cells() {
            let bit = get_bit(&words, idx);
            if bit == run_bit {
                run_len += 1;
            } else {
                out.push_str(&format!("{}x{} ", u8::from(run_bit), run_len));
                run_bit = bit;
                run_len = 1;
            }
        }
        out.push_str(&format!("{}x{}", u8::from(run_bit), run_len));
        out
    }
}

/// Empirical coverage function of a collection of set samples.
#[derive(Debug, Clone)]
pub struct CoverageField {
    dims: GridDims,
    counts: Vec<u32>,
    n: u32,
}

impl CoverageField {
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Empirical probability that cell `(i1, i2, k)` belongs to the random set.
    pub fn value(&self, i1: usize, i2: usize, k: usize) -> f64 {
        debug_assert!(k < self.dims.nc);
        self.counts[self.dims.column(i1, i2) * self.dims.nc + k] as f64 / self.n as f64
    }
}

/// Pointwise mean of membership indicators over the samples. Accepts any
/// iterator of borrowed sets, so bootstrap replicates can pass index
/// multisets without cloning.
pub fn coverage<'a, I>(samples: I) -> Result<CoverageField>
where
    I: IntoIterator<Item = &'a SetSample>,
{
    let mut iter = samples.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::param("coverage of an empty sample list"))?;
    let dims = first.dims;
    let mut counts = vec![0u32; dims.cells()];
    let mut n = 0u32;
    for s in std::iter::once(first).chain(iter) {
        first.check_dims(s)?;
        match &s.repr {
            Repr::Hypograph(levels) => {
                for (c, &l) in levels.iter().enumerate() {
                    for slot in &mut counts[c * dims.nc..c * dims.nc + l as usize] {
                        *slot += 1;
                    }
                }
            }
            Repr::Mask(words) => {
                for (idx, slot) in counts.iter_mut().enumerate() {
                    *slot += u32::from(get_bit(words, idx));
                }
            }
        }
        n += 1;
    }
    Ok(CoverageField { dims, counts, n })
}

/// Vorob'ev quantile: the cells whose coverage is at least `a` (inclusive,
/// so tie cells are in). `a = 0.5` gives the Vorob'ev median.
///
/// Coverage built from hypograph samples is non-increasing along the level
/// axis, making every quantile a hypograph again; the result then uses the
/// level form, otherwise it stays a mask.
pub fn vorobev_quantile(cov: &CoverageField, a: f64) -> SetSample {
    assert!((0.0..=1.0).contains(&a), "quantile level must be in [0,1]");
    let dims = cov.dims;
    let n = cov.n as f64;
    let hit = |idx: usize| cov.counts[idx] as f64 / n >= a;
    let mut levels = Vec::with_capacity(dims.base_cells());
    let mut monotone = true;
    'columns: for c in 0..dims.base_cells() {
        let base = c * dims.nc;
        let mut level = 0;
        while level < dims.nc && hit(base + level) {
            level += 1;
        }
        for k in level..dims.nc {
            if hit(base + k) {
                monotone = false;
                break 'columns;
            }
        }
        levels.push(level as u32);
    }
    if monotone {
        SetSample {
            dims,
            repr: Repr::Hypograph(levels),
        }
    } else {
        SetSample::from_predicate(dims, |i1, i2, k| hit(dims.column(i1, i2) * dims.nc + k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derived_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_hypograph(dims: GridDims, seed: u64) -> SetSample {
        let mut rng = derived_rng(seed, &[0x5e7]);
        let levels = (0..dims.base_cells())
            .map(|_| rng.random_range(0..=dims.nc as u32))
            .collect();
        SetSample::from_levels(dims, levels).unwrap()
    }

    fn random_mask(dims: GridDims, seed: u64) -> SetSample {
        let mut rng = derived_rng(seed, &[0xa5b]);
        SetSample::from_predicate(dims, |_, _, _| rng.random::<f64>() < 0.5)
    }

    #[test]
    fn volume_of_extremes() {
        let dims = GridDims::new(4, 5, 6).unwrap();
        assert_eq!(SetSample::empty(dims).volume(), 0.0);
        assert_eq!(SetSample::full(dims).volume(), 1.0);
        let half = SetSample::from_levels(dims, vec![3; 20]).unwrap();
        assert_eq!(half.volume(), 0.5);
    }

    #[test]
    fn symdiff_with_self_and_empty() {
        let dims = GridDims::new(3, 3, 4).unwrap();
        let a = random_hypograph(dims, 1);
        assert_eq!(a.symdiff_volume(&a).unwrap(), 0.0);
        let empty = SetSample::empty(dims);
        assert_eq!(a.symdiff_volume(&empty).unwrap(), a.volume());
    }

    #[test]
    fn symdiff_fast_path_matches_cell_enumeration() {
        let dims = GridDims::new(8, 8, 8).unwrap();
        let a = random_hypograph(dims, 2);
        let b = random_hypograph(dims, 3);
        // Independent brute force: test every cell's membership on both sides.
        let la = a.levels().unwrap().into_owned();
        let lb = b.levels().unwrap().into_owned();
        let mut mismatches = 0u64;
        for i1 in 0..8 {
            for i2 in 0..8 {
                for k in 0..8u32 {
                    let ina = k < la[i1 * 8 + i2];
                    let inb = k < lb[i1 * 8 + i2];
                    mismatches += u64::from(ina != inb);
                }
            }
        }
        assert_eq!(
            a.symdiff_volume(&b).unwrap(),
            mismatches as f64 / 512.0,
            "fast path must equal the brute-force XOR count"
        );
    }

    #[test]
    fn symdiff_mixed_representations_agree() {
        let dims = GridDims::new(5, 4, 7).unwrap();
        let hypo = random_hypograph(dims, 4);
        let as_mask = SetSample::from_mask_words(dims, hypo.mask_words().into_owned()).unwrap();
        let other = random_mask(dims, 5);
        assert_eq!(
            hypo.symdiff_volume(&other).unwrap(),
            as_mask.symdiff_volume(&other).unwrap()
        );
        assert_eq!(hypo.symdiff_volume(&as_mask).unwrap(), 0.0);
    }

    #[test]
    fn symdiff_rejects_grid_mismatch() {
        let a = SetSample::empty(GridDims::new(2, 2, 2).unwrap());
        let b = SetSample::empty(GridDims::new(2, 2, 3).unwrap());
        assert!(a.symdiff_volume(&b).is_err());
    }

    #[test]
    fn coverage_of_single_sample_is_indicator() {
        let dims = GridDims::new(3, 2, 5).unwrap();
        let s = random_mask(dims, 6);
        let cov = coverage(std::slice::from_ref(&s)).unwrap();
        for i1 in 0..3 {
            for i2 in 0..2 {
                for k in 0..5 {
                    let want = if s.contains(i1, i2, k) { 1.0 } else { 0.0 };
                    assert_eq!(cov.value(i1, i2, k), want);
                }
            }
        }
    }

    #[test]
    fn coverage_of_complementary_pair_is_half() {
        let dims = GridDims::new(2, 3, 4).unwrap();
        let a = random_mask(dims, 7);
        let b = SetSample::from_predicate(dims, |i1, i2, k| !a.contains(i1, i2, k));
        let cov = coverage(&[a, b]).unwrap();
        for i1 in 0..2 {
            for i2 in 0..3 {
                for k in 0..4 {
                    assert_eq!(cov.value(i1, i2, k), 0.5);
                }
            }
        }
    }

    #[test]
    fn coverage_matches_direct_recount() {
        let dims = GridDims::new(6, 5, 7).unwrap();
        let samples: Vec<_> = (0..100).map(|s| random_hypograph(dims, 100 + s)).collect();
        let cov = coverage(&samples).unwrap();
        for i1 in 0..6 {
            for i2 in 0..5 {
                for k in 0..7 {
                    let count = samples.iter().filter(|s| s.contains(i1, i2, k)).count();
                    assert_eq!(cov.value(i1, i2, k), count as f64 / 100.0);
                }
            }
        }
    }

    #[test]
    fn quantile_zero_is_full_set() {
        let dims = GridDims::new(3, 3, 3).unwrap();
        let samples: Vec<_> = (0..5).map(|s| random_hypograph(dims, 200 + s)).collect();
        let cov = coverage(&samples).unwrap();
        let q = vorobev_quantile(&cov, 0.0);
        assert_eq!(q.volume(), 1.0);
    }

    #[test]
    fn quantiles_are_nested() {
        let dims = GridDims::new(4, 4, 5).unwrap();
        for seed in 0..20 {
            let samples: Vec<_> = (0..9).map(|s| random_mask(dims, 300 + 10 * seed + s)).collect();
            let cov = coverage(&samples).unwrap();
            let mut prev = vorobev_quantile(&cov, 0.0);
            for step in 1..=10 {
                let q = vorobev_quantile(&cov, step as f64 / 10.0);
                assert!(q.is_subset_of(&prev).unwrap());
                prev = q;
            }
        }
    }

    #[test]
    fn quantile_of_hypograph_coverage_is_hypograph() {
        let dims = GridDims::new(5, 3, 6).unwrap();
        for seed in 0..100 {
            let samples: Vec<_> = (0..7).map(|s| random_hypograph(dims, 400 + 10 * seed + s)).collect();
            let cov = coverage(&samples).unwrap();
            let q = vorobev_quantile(&cov, 0.4);
            assert!(q.is_hypograph());
            let levels = q.levels().unwrap();
            // Coverage is non-increasing along the level axis, so thresholding
            // it must fill each column from the bottom.
            for (c, &l) in levels.iter().enumerate() {
                let i1 = c / 3;
                let i2 = c % 3;
                for k in 0..6 {
                    assert_eq!(q.contains(i1, i2, k), k < l as usize);
                }
            }
        }
    }

    #[test]
    fn median_minimizes_mean_symdiff() {
        let dims = GridDims::new(6, 5, 7).unwrap();
        let samples: Vec<_> = (0..40).map(|s| random_hypograph(dims, 500 + s)).collect();
        let cov = coverage(&samples).unwrap();
        let median = vorobev_quantile(&cov, 0.5);
        let mean_to = |q: &SetSample| -> f64 {
            samples.iter().map(|s| s.symdiff_volume(q).unwrap()).sum::<f64>() / 40.0
        };
        let at_median = mean_to(&median);
        for seed in 0..50 {
            let candidate = if seed % 2 == 0 {
                random_hypograph(dims, 600 + seed)
            } else {
                random_mask(dims, 600 + seed)
            };
            assert!(
                at_median <= mean_to(&candidate) + 1e-12,
                "median deviation {} beaten by candidate {}",
                at_median,
                mean_to(&candidate)
            );
        }
    }

    #[test]
    fn level_roundtrip_through_mask() {
        let dims = GridDims::new(4, 3, 9).unwrap();
        let a = random_hypograph(dims, 8);
        let mask = SetSample::from_mask_words(dims, a.mask_words().into_owned()).unwrap();
        assert!(!mask.is_hypograph());
        assert_eq!(
            mask.levels().unwrap().as_ref(),
            a.levels().unwrap().as_ref()
        );
    }

    #[test]
    fn gapped_mask_has_no_levels() {
        let dims = GridDims::new(1, 1, 4).unwrap();
        let s = SetSample::from_predicate(dims, |_, _, k| k == 2);
        assert!(s.levels().is_none());
    }

    #[test]
    fn rle_dump_reports_runs() {
        let dims = GridDims::new(1, 2, 4).unwrap();
        let s = SetSample::from_levels(dims, vec![2, 4]).unwrap();
        assert_eq!(s.rle_dump(), "1x2 0x2 1x4");
    }

    fn dims_strategy() -> impl Strategy<Value = GridDims> {
        (1usize..5, 1usize..5, 1usize..8)
            .prop_map(|(n1, n2, nc)| GridDims { n1, n2, nc })
    }

    fn hypograph_triple() -> impl Strategy<Value = (GridDims, Vec<u32>, Vec<u32>, Vec<u32>)> {
        dims_strategy().prop_flat_map(|d| {
            let lv = || proptest::collection::vec(0u32..=d.nc as u32, d.base_cells());
            (Just(d), lv(), lv(), lv())
        })
    }

    fn mask_triple() -> impl Strategy<Value = (GridDims, Vec<bool>, Vec<bool>, Vec<bool>)> {
        dims_strategy().prop_flat_map(|d| {
            let bits = || proptest::collection::vec(any::<bool>(), d.cells());
            (Just(d), bits(), bits(), bits())
        })
    }

    fn mask_from_bits(dims: GridDims, bits: &[bool]) -> SetSample {
        SetSample::from_predicate(dims, |i1, i2, k| bits[(i1 * dims.n2 + i2) * dims.nc + k])
    }

    proptest! {
        #[test]
        fn triangle_inequality_hypograph((d, la, lb, lc) in hypograph_triple()) {
            let a = SetSample::from_levels(d, la).unwrap();
            let b = SetSample::from_levels(d, lb).unwrap();
            let c = SetSample::from_levels(d, lc).unwrap();
            let ab = a.symdiff_volume(&b).unwrap();
            let bc = b.symdiff_volume(&c).unwrap();
            let ac = a.symdiff_volume(&c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-15);
        }

        #[test]
        fn triangle_inequality_mask((d, ba, bb, bc) in mask_triple()) {
            let a = mask_from_bits(d, &ba);
            let b = mask_from_bits(d, &bb);
            let c = mask_from_bits(d, &bc);
            let ab = a.symdiff_volume(&b).unwrap();
            let bc_v = b.symdiff_volume(&c).unwrap();
            let ac = a.symdiff_volume(&c).unwrap();
            prop_assert!(ac <= ab + bc_v + 1e-15);
        }

        #[test]
        fn symdiff_inclusion_exclusion((d, ba, bb, _bc) in mask_triple()) {
            let a = mask_from_bits(d, &ba);
            let b = mask_from_bits(d, &bb);
            let lhs = a.symdiff_volume(&b).unwrap();
            let rhs = a.volume() + b.volume() - 2.0 * a.intersection_volume(&b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-14);
        }

        #[test]
        fn hypograph_mask_roundtrip((d, la, _lb, _lc) in hypograph_triple()) {
            let a = SetSample::from_levels(d, la.clone()).unwrap();
            let mask = SetSample::from_mask_words(d, a.mask_words().into_owned()).unwrap();
            let recovered = mask.levels().unwrap();
            prop_assert_eq!(recovered.as_ref(), la.as_slice());
            prop_assert_eq!(mask.volume(), a.volume());
        }
    }
}
