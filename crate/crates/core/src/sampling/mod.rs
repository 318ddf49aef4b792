//! Input distributions and experimental designs.
//!
//! Inputs are mutually independent; each is described by a
//! [`DistributionSpec`] on a bounded interval. Designs cover plain
//! Monte Carlo, Latin hypercube and Halton quasi-Monte Carlo sampling,
//! plus the paired pick-and-freeze matrices used by the Sobol' estimator.

mod design;
mod dist;

pub use design::{halton, lhs, pick_freeze, radical_inverse, DesignGenerator, PickFreezeDesign};
pub use dist::{Dist, DistributionSpec};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One named input dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDim {
    pub name: String,
    pub dist: DistributionSpec,
}

/// An ordered list of independent inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputSpace {
    dims: Vec<InputDim>,
}

impl InputSpace {
    pub fn new(dims: Vec<InputDim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::param("input space needs at least one dimension"));
        }
        for (k, d) in dims.iter().enumerate() {
            if dims[..k].iter().any(|o| o.name == d.name) {
                return Err(Error::param(format!("duplicate input name `{}`", d.name)));
            }
            d.dist.validate()?;
        }
        Ok(InputSpace { dims })
    }

    /// Shorthand for unnamed uniform/test spaces.
    pub fn from_specs<S: Into<String>>(specs: Vec<(S, DistributionSpec)>) -> Result<Self> {
        Self::new(
            specs
                .into_iter()
                .map(|(name, dist)| InputDim {
                    name: name.into(),
                    dist,
                })
                .collect(),
        )
    }

    pub fn p(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[InputDim] {
        &self.dims
    }

    pub fn names(&self) -> Vec<&str> {
        self.dims.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        self.dims[i].dist.bounds()
    }

    /// Compiles every dimension's sampler once.
    pub fn compile(&self) -> Result<Vec<Dist>> {
        self.dims.iter().map(|d| Dist::new(&d.dist)).collect()
    }

    /// Checks that `u` has length p and every coordinate is within bounds.
    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.p()
            && u.iter().zip(&self.dims).all(|(&v, d)| {
                let (lo, hi) = d.dist.bounds();
                v >= lo && v <= hi
            })
    }
}
