//! Pointwise first-order Sobol' index maps and their variance-weighted
//! aggregation into generalized indices.
//!
//! The estimator is the classical pick-and-freeze form: with paired
//! samples `U, U'` and the substituted sample `U^i` (column `i` of `U`
//! replaced by `U'`), the numerator at cell `x` is
//! `(1/n) sum_j B_j(x) (C_ij(x) - A_j(x))` and the denominator is the
//! unbiased sample variance of `A_j(x)`, where `A`, `B`, `C_i` are the
//! model fields at `U`, `U'`, `U^i`.

use crate::error::{Error, Result};
use crate::model::{DomainGrid, MapField, MapModel};
use crate::resample::{bootstrap_ci, BootstrapSpec};
use crate::sampling::PickFreezeDesign;
use ndarray::Array2;

const DEGENERATE_REL: f64 = 1e-12;

/// Index maps, variance map and generalized indices from one design.
pub struct SobolMapResult {
    index_maps: Vec<MapField>,
    variance_map: MapField,
    degenerate: Array2<bool>,
    s_gen: Vec<f64>,
    s_gen_ci: Option<Vec<(f64, f64)>>,
    n: usize,
}

impl SobolMapResult {
    pub fn p(&self) -> usize {
        self.index_maps.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &DomainGrid {
        self.variance_map.grid()
    }

    /// Pointwise first-order index map of input `i`.
    pub fn index_map(&self, i: usize) -> &MapField {
        &self.index_maps[i]
    }

    /// Per-cell unbiased variance of the output over the `U` sample.
    pub fn variance_map(&self) -> &MapField {
        &self.variance_map
    }

    /// Cells whose variance fell below the degeneracy threshold; they
    /// report index 0 and carry zero aggregation weight.
    pub fn is_degenerate(&self, i: usize, j: usize) -> bool {
        self.degenerate[[i, j]]
    }

    pub fn degenerate_cells(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    /// Normalized variance weights over non-degenerate cells; sums to 1.
    pub fn weights(&self) -> Array2<f64> {
        let total: f64 = self
            .variance_map
            .values()
            .iter()
            .zip(&self.degenerate)
            .filter(|(_, &d)| !d)
            .map(|(&v, _)| v)
            .sum();
        let mut w = self.variance_map.values().clone();
        w.zip_mut_with(&self.degenerate, |v, &d| {
            *v = if d { 0.0 } else { *v / total };
        });
        w
    }

    /// Variance-weighted generalized index of input `i`.
    pub fn generalized_index(&self, i: usize) -> f64 {
        self.s_gen[i]
    }

    pub fn generalized(&self) -> &[f64] {
        &self.s_gen
    }

    /// Per-input bootstrap interval for the generalized index, when requested.
    pub fn generalized_ci(&self) -> Option<&[(f64, f64)]> {
        self.s_gen_ci.as_deref()
    }
}

struct Accumulated {
    grid: DomainGrid,
    sum_a: Vec<f64>,
    sum_a2: Vec<f64>,
    /// Per input, per cell: `sum_j B_j(x) (C_ij(x) - A_j(x))`.
    num: Vec<Vec<f64>>,
    /// Per (j, i): the numerator contribution summed over all cells.
    t: Array2<f64>,
    /// `A` fields row per j, kept only when a bootstrap needs them.
    a_rows: Option<Array2<f64>>,
}

fn accumulate(
    model: &dyn MapModel,
    design: &PickFreezeDesign,
    keep_fields: bool,
) -> Result<Accumulated> {
    let space = model.space();
    if design.p() != space.p() {
        return Err(Error::param(format!(
            "design has {} inputs, model expects {}",
            design.p(),
            space.p()
        )));
    }
    let n = design.n();
    if n < 2 {
        return Err(Error::param("pick-and-freeze estimation needs n >= 2"));
    }
    let p = design.p();
    let grid = model.grid().clone();
    let cells = grid.n1() * grid.n2();

    let mut sum_a = vec![0.0; cells];
    let mut sum_a2 = vec![0.0; cells];
    let mut num = vec![vec![0.0; cells]; p];
    let mut t = Array2::zeros((n, p));
    let mut a_rows = if keep_fields {
        Some(Array2::zeros((n, cells)))
    } else {
        None
    };

    let mut base = vec![0.0; p];
    for j in 0..n {
        for (slot, &v) in base.iter_mut().zip(design.u().row(j)) {
            *slot = v;
        }
        let a = model.evaluate(&base)?;
        let af = a.values().as_slice().expect("row-major field");
        let b = model.evaluate(design.uprime().row(j).as_slice().expect("row-major design"))?;
        let bf = b.values().as_slice().expect("row-major field");
        for x in 0..cells {
            sum_a[x] += af[x];
            sum_a2[x] += af[x] * af[x];
        }
        if let Some(rows) = &mut a_rows {
            rows.row_mut(j)
                .as_slice_mut()
                .expect("row-major store")
                .copy_from_slice(af);
        }
        for i in 0..p {
            let saved = base[i];
            base[i] = design.uprime()[[j, i]];
            let c = model.evaluate(&base)?;
            base[i] = saved;
            let cf = c.values().as_slice().expect("row-major field");
            let mut tij = 0.0;
            let num_i = &mut num[i];
            for x in 0..cells {
                let d = bf[x] * (cf[x] - af[x]);
                num_i[x] += d;
                tij += d;
            }
            t[[j, i]] = tij;
        }
    }
    Ok(Accumulated {
        grid,
        sum_a,
        sum_a2,
        num,
        t,
        a_rows,
    })
}

fn finalize(acc: &Accumulated, n: usize) -> Result<SobolMapResult> {
    let (n1, n2) = (acc.grid.n1(), acc.grid.n2());
    let cells = n1 * n2;
    let nf = n as f64;
    let p = acc.num.len();

    let mut var = vec![0.0; cells];
    for x in 0..cells {
        var[x] = ((acc.sum_a2[x] - acc.sum_a[x] * acc.sum_a[x] / nf) / (nf - 1.0)).max(0.0);
    }
    let scale = var.iter().cloned().fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(Error::degenerate(
            "model output has zero variance at every cell",
        ));
    }
    let threshold = DEGENERATE_REL * scale;
    let degenerate = Array2::from_shape_fn((n1, n2), |(i, j)| var[i * n2 + j] < threshold);

    let mut var_kept_sum = 0.0;
    for x in 0..cells {
        if var[x] >= threshold {
            var_kept_sum += var[x];
        }
    }

    let mut index_maps = Vec::with_capacity(p);
    let mut s_gen = Vec::with_capacity(p);
    for num_i in &acc.num {
        let mut map = vec![0.0; cells];
        let mut num_kept_sum = 0.0;
        for x in 0..cells {
            if var[x] >= threshold {
                map[x] = num_i[x] / nf / var[x];
                num_kept_sum += num_i[x] / nf;
            }
        }
        s_gen.push(num_kept_sum / var_kept_sum);
        index_maps.push(MapField::new(
            acc.grid.clone(),
            Array2::from_shape_vec((n1, n2), map).expect("sized above"),
        )?);
    }

    let variance_map = MapField::new(
        acc.grid.clone(),
        Array2::from_shape_vec((n1, n2), var).expect("sized above"),
    )?;
    Ok(SobolMapResult {
        index_maps,
        variance_map,
        degenerate,
        s_gen,
        s_gen_ci: None,
        n,
    })
}

/// Pointwise index maps and generalized indices for every input.
pub fn sobol_maps(model: &dyn MapModel, design: &PickFreezeDesign) -> Result<SobolMapResult> {
    let acc = accumulate(model, design, false)?;
    finalize(&acc, design.n())
}

/// Same as [`sobol_maps`], plus a bootstrap interval per generalized index.
///
/// Replicates resample the design rows; the per-cell variances and the
/// numerator sums are rebuilt on each replicate from stored per-row
/// contributions, so no model re-evaluation happens.
pub fn sobol_maps_bootstrap(
    model: &dyn MapModel,
    design: &PickFreezeDesign,
    spec: &BootstrapSpec,
) -> Result<SobolMapResult> {
    let acc = accumulate(model, design, true)?;
    let mut result = finalize(&acc, design.n())?;
    let a_rows = acc.a_rows.as_ref().expect("kept for bootstrap");
    let cells = a_rows.ncols();
    // Per-row sum of squared field values, reused by every replicate.
    let q: Vec<f64> = (0..design.n())
        .map(|j| {
            a_rows
                .row(j)
                .as_slice()
                .expect("row-major store")
                .iter()
                .map(|v| v * v)
                .sum()
        })
        .collect();

    let mut cis = Vec::with_capacity(design.p());
    for i in 0..design.p() {
        let statistic = |idx: &[usize]| -> Result<f64> {
            if idx.len() < 2 {
                return Err(Error::degenerate("replicate too small"));
            }
            let m = idx.len() as f64;
            let mut num_sum = 0.0;
            let mut q_sum = 0.0;
            let mut s = vec![0.0; cells];
            for &j in idx {
                num_sum += acc.t[[j, i]];
                q_sum += q[j];
                let row = a_rows.row(j);
                let rf = row.as_slice().expect("row-major store");
                for (acc_x, &v) in s.iter_mut().zip(rf) {
                    *acc_x += v;
                }
            }
            let sq: f64 = s.iter().map(|v| v * v).sum();
            let var_sum = (q_sum - sq / m) / (m - 1.0);
            if !(var_sum > 0.0) {
                return Err(Error::degenerate("replicate variance collapsed"));
            }
            Ok(num_sum / m / var_sum)
        };
        let ci = bootstrap_ci(design.n(), spec, statistic)?;
        cis.push((ci.lo, ci.hi));
    }
    result.s_gen_ci = Some(cis);
    Ok(result)
}
