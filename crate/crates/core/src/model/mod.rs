//! Map-valued models and their lift to set-valued outputs.
//!
//! A model sends an input vector `u` to a scalar field over a fixed 2-D
//! grid. For set-valued analyses the field is lifted to its hypograph,
//! the region below the graph inside a bounded level range `[c_min,
//! c_max]`, discretized on the grid of [`crate::setgrid`].

mod synthetic;
mod table;

pub use synthetic::{Basis, Link, SyntheticPlume, SyntheticSeparable};
pub use table::ExternalTable;

use crate::error::{Error, Result};
use crate::sampling::InputSpace;
use crate::setgrid::{GridDims, SetSample};
use ndarray::Array2;

/// Regular 2-D lattice of cell centers over a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    x1_bounds: (f64, f64),
    x2_bounds: (f64, f64),
    n1: usize,
    n2: usize,
}

impl DomainGrid {
    pub fn new(x1_bounds: (f64, f64), x2_bounds: (f64, f64), n1: usize, n2: usize) -> Result<Self> {
        for (lo, hi) in [x1_bounds, x2_bounds] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::param(format!("bad domain bounds ({lo}, {hi})")));
            }
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::param("domain grid needs n1, n2 >= 1"));
        }
        Ok(DomainGrid {
            x1_bounds,
            x2_bounds,
            n1,
            n2,
        })
    }

    /// Unit square `[0,1]^2`.
    pub fn unit(n1: usize, n2: usize) -> Result<Self> {
        DomainGrid::new((0.0, 1.0), (0.0, 1.0), n1, n2)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn x1_bounds(&self) -> (f64, f64) {
        self.x1_bounds
    }

    pub fn x2_bounds(&self) -> (f64, f64) {
        self.x2_bounds
    }

    pub fn center1(&self, i: usize) -> f64 {
        let (lo, hi) = self.x1_bounds;
        lo + (i as f64 + 0.5) * (hi - lo) / self.n1 as f64
    }

    pub fn center2(&self, j: usize) -> f64 {
        let (lo, hi) = self.x2_bounds;
        lo + (j as f64 + 0.5) * (hi - lo) / self.n2 as f64
    }

    /// Cell center mapped to the unit square.
    pub fn normalized_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) / self.n1 as f64,
            (j as f64 + 0.5) / self.n2 as f64,
        )
    }
}

/// A scalar field over a domain grid; one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MapField {
    grid: DomainGrid,
    values: Array2<f64>,
}

impl MapField {
    pub fn new(grid: DomainGrid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n1, grid.n2) {
            return Err(Error::param(format!(
                "field shape {:?} does not match grid {}x{}",
                values.dim(),
                grid.n1,
                grid.n2
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("field contains non-finite values"));
        }
        Ok(MapField { grid, values })
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }
}

/// Uniform cell-centered lattice over the level range `[c_min, c_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelGrid {
    c_min: f64,
    c_max: f64,
    nc: usize,
}

impl LevelGrid {
    pub fn new(c_min: f64, c_max: f64, nc: usize) -> Result<Self> {
        if !(c_min.is_finite() && c_max.is_finite() && c_min < c_max) {
            return Err(Error::param(format!("bad level bounds ({c_min}, {c_max})")));
        }
        if nc == 0 {
            return Err(Error::param("level grid needs nc >= 1"));
        }
        Ok(LevelGrid { c_min, c_max, nc })
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn nc(&self) -> usize {
        self.nc
    }

    /// Center of level cell `k`.
    pub fn value(&self, k: usize) -> f64 {
        self.c_min + (k as f64 + 0.5) * (self.c_max - self.c_min) / self.nc as f64
    }
}

/// A deterministic map-valued model.
pub trait MapModel {
    fn space(&self) -> &InputSpace;
    fn grid(&self) -> &DomainGrid;
    /// Field at input `u`; `u` must lie inside the declared bounds.
    fn evaluate(&self, u: &[f64]) -> Result<MapField>;
}

pub(crate) fn check_input(space: &InputSpace, u: &[f64]) -> Result<()> {
    if u.len() != space.p() {
        return Err(Error::domain(format!(
            "input has {} coordinates, model expects {}",
            u.len(),
            space.p()
        )));
    }
    if !space.contains(u) {
        return Err(Error::domain(format!("input {u:?} outside declared bounds")));
    }
    Ok(())
}

/// Hypograph of the field on the discretized level range.
///
/// Each column gets level `l` = number of lattice values `c_k <= field
/// value` (inclusive, matching the non-strict inequality of the set
/// definition). Values below the range give 0, above give `nc`.
pub fn lift_hypograph(field: &MapField, levels: &LevelGrid) -> SetSample {
    let grid = field.grid();
    let dims = GridDims {
        n1: grid.n1,
        n2: grid.n2,
        nc: levels.nc,
    };
    let delta = (levels.c_max - levels.c_min) / levels.nc as f64;
    let mut out = Vec::with_capacity(dims.base_cells());
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let v = field.value(i, j);
            // Float candidate, then nudge against the exact lattice values so
            // that ties (v equal to a lattice value) are always included.
            let mut l = (((v - levels.c_min) / delta + 0.5).floor() as i64).clamp(0, levels.nc as i64);
            while l > 0 && levels.value(l as usize - 1) > v {
                l -= 1;
            }
            while (l as usize) < levels.nc && levels.value(l as usize) <= v {
                l += 1;
            }
            out.push(l as u32);
        }
    }
    SetSample::from_levels(dims, out).expect("levels clamped to [0, nc]")
}

/// Wraps a model and counts its evaluations. The counter is shared, so it
/// stays readable after the wrapper is boxed into a [`SetModel`].
pub struct CountingModel<M> {
    inner: M,
    count: std::sync::Arc<std::sync::atomic::AtomicUsize>,
}

impl<M: MapModel> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        CountingModel {
            inner,
            count: std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0)),
        }
    }

    pub fn counter(&self) -> std::sync::Arc<std::sync::atomic::AtomicUsize> {
        self.count.clone()
    }
}

impl<M: MapModel> MapModel for CountingModel<M> {
    fn space(&self) -> &InputSpace {
        self.inner.space()
    }

    fn grid(&self) -> &DomainGrid {
        self.inner.grid()
    }

    fn evaluate(&self, u: &[f64]) -> Result<MapField> {
        self.count
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.inner.evaluate(u)
    }
}

/// A map model together with a level discretization: a random-set model.
pub struct SetModel {
    model: Box<dyn MapModel + Sync + Send>,
    levels: LevelGrid,
}

impl SetModel {
    pub fn new(model: Box<dyn MapModel + Sync + Send>, levels: LevelGrid) -> Self {
        SetModel { model, levels }
    }

    /// Picks the level range from a pilot sample: min/max field value over
    /// 64 low-discrepancy input points, widened by 5% of the range on each
    /// side. A constant pilot response falls back to a unit interval around
    /// the constant.
    pub fn with_auto_levels(model: Box<dyn MapModel + Sync + Send>, nc: usize) -> Result<Self> {
        let space = model.space();
        let dists = space.compile()?;
        let pts = crate::sampling::halton(space.p(), 64, 0);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..64 {
            let u: Vec<f64> = (0..space.p())
                .map(|j| dists[j].inverse_cdf(pts[[k, j]]))
                .collect::<Result<_>>()?;
            let field = model.evaluate(&u)?;
            for &v in field.values() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let range = hi - lo;
        let levels = if range > 0.0 {
            LevelGrid::new(lo - 0.05 * range, hi + 0.05 * range, nc)?
        } else {
            LevelGrid::new(lo - 0.5, hi + 0.5, nc)?
        };
        Ok(SetModel { model, levels })
    }

    pub fn space(&self) -> &InputSpace {
        self.model.space()
    }

    pub fn levels(&self) -> &LevelGrid {
        &self.levels
    }

    pub fn map_model(&self) -> &dyn MapModel {
        self.model.as_ref()
    }

    pub fn dims(&self) -> GridDims {
        GridDims {
            n1: self.model.grid().n1,
            n2: self.model.grid().n2,
            nc: self.levels.nc,
        }
    }

    /// One realization of the random set: evaluate, then lift.
    pub fn realize(&self, u: &[f64]) -> Result<SetSample> {
        Ok(lift_hypograph(&self.model.evaluate(u)?, &self.levels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::DistributionSpec;
    use proptest::prelude::*;

    fn const_field(grid: &DomainGrid, v: f64) -> MapField {
        MapField::new(grid.clone(), Array2::from_elem((grid.n1, grid.n2), v)).unwrap()
    }

    #[test]
    fn lift_below_range_is_empty() {
        let grid = DomainGrid::unit(3, 4).unwrap();
        let levels = LevelGrid::new(2.0, 6.0, 8).unwrap();
        let s = lift_hypograph(&const_field(&grid, 1.0), &levels);
        assert_eq!(s.volume(), 0.0);
    }

    #[test]
    fn lift_above_range_is_full() {
        let grid = DomainGrid::unit(3, 4).unwrap();
        let levels = LevelGrid::new(2.0, 6.0, 8).unwrap();
        let s = lift_hypograph(&const_field(&grid, 7.0), &levels);
        assert_eq!(s.volume(), 1.0);
    }

    #[test]
    fn lift_tie_is_inclusive() {
        let grid = DomainGrid::unit(2, 2).unwrap();
        let levels = LevelGrid::new(0.0, 1.0, 10).unwrap();
        // Field exactly at the third lattice value (k = 2).
        let s = lift_hypograph(&const_field(&grid, levels.value(2)), &levels);
        let lv = s.levels().unwrap();
        assert!(lv.iter().all(|&l| l == 3), "levels {lv:?}");
    }

    #[test]
    fn lift_interior_value_counts_lattice_points() {
        let grid = DomainGrid::unit(1, 1).unwrap();
        let levels = LevelGrid::new(0.0, 1.0, 4).unwrap();
        // Lattice at 0.125, 0.375, 0.625, 0.875.
        for (v, want) in [(0.1, 0), (0.2, 1), (0.5, 2), (0.875, 4), (0.99, 4)] {
            let s = lift_hypograph(&const_field(&grid, v), &levels);
            assert_eq!(s.levels().unwrap()[0], want, "field {v}");
        }
    }

    proptest! {
        #[test]
        fn lift_is_monotone(
            va in proptest::collection::vec(-2.0f64..2.0, 12),
            bump in proptest::collection::vec(0.0f64..2.0, 12),
        ) {
            let grid = DomainGrid::unit(3, 4).unwrap();
            let levels = LevelGrid::new(-1.5, 1.5, 7).unwrap();
            let a = Array2::from_shape_vec((3, 4), va.clone()).unwrap();
            let b = &a + &Array2::from_shape_vec((3, 4), bump).unwrap();
            let sa = lift_hypograph(&MapField::new(grid.clone(), a).unwrap(), &levels);
            let sb = lift_hypograph(&MapField::new(grid, b).unwrap(), &levels);
            let (la, lb) = (sa.levels().unwrap().into_owned(), sb.levels().unwrap().into_owned());
            for (x, y) in la.iter().zip(&lb) {
                prop_assert!(x <= y);
            }
        }
    }

    #[test]
    fn auto_levels_cover_pilot_range() {
        let space = InputSpace::from_specs(vec![
            ("u1", DistributionSpec::uniform(0.0, 1.0)),
            ("u2", DistributionSpec::uniform(0.0, 1.0)),
        ])
        .unwrap();
        let grid = DomainGrid::unit(8, 8).unwrap();
        let model = SyntheticSeparable::new(
            space,
            grid,
            Basis::Constant(0.0),
            vec![
                (Basis::SineX1(1.0), Link::Identity),
                (Basis::Constant(1.0), Link::Identity),
            ],
        )
        .unwrap();
        let set = SetModel::with_auto_levels(Box::new(model), 16).unwrap();
        // Response range is within [-1, 2]; widened bounds must bracket it.
        assert!(set.levels().c_min() > -1.3 && set.levels().c_min() < 0.0);
        assert!(set.levels().c_max() < 2.3 && set.levels().c_max() > 1.0);
        let u = [0.5, 0.5];
        let s = set.realize(&u).unwrap();
        assert!(s.volume() > 0.0 && s.volume() < 1.0);
    }

    #[test]
    fn counting_model_tracks_evaluations_through_a_set_model() {
        let space = InputSpace::from_specs(vec![("u1", DistributionSpec::uniform(0.0, 1.0))]).unwrap();
        let model = SyntheticSeparable::new(
            space,
            DomainGrid::unit(2, 2).unwrap(),
            Basis::Constant(0.0),
            vec![(Basis::Constant(1.0), Link::Identity)],
        )
        .unwrap();
        let wrapped = CountingModel::new(model);
        let counter = wrapped.counter();
        let set = SetModel::new(Box::new(wrapped), LevelGrid::new(0.0, 1.0, 4).unwrap());
        for k in 0..5 {
            set.realize(&[k as f64 / 5.0]).unwrap();
        }
        assert_eq!(counter.load(std::sync::atomic::Ordering::Relaxed), 5);
    }

    #[test]
    fn out_of_bounds_input_is_rejected() {
        let space = InputSpace::from_specs(vec![("u1", DistributionSpec::uniform(0.0, 1.0))]).unwrap();
        let grid = DomainGrid::unit(4, 4).unwrap();
        let model = SyntheticSeparable::new(
            space,
            grid,
            Basis::Constant(0.0),
            vec![(Basis::Constant(1.0), Link::Identity)],
        )
        .unwrap();
        assert!(model.evaluate(&[1.5]).is_err());
        assert!(model.evaluate(&[0.5, 0.5]).is_err());
    }
}
