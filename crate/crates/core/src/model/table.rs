//! Map models backed by precomputed (input, field) tables.

use super::{check_input, DomainGrid, MapField, MapModel};
use crate::error::{Error, Result};
use crate::sampling::InputSpace;
use ndarray::Array2;
use std::path::Path;

/// A model defined by stored evaluations, replayed by exact input lookup.
///
/// File format: a header line `n1 n2`, then one record per stored run — a
/// line with the p input coordinates, followed by `n1*n2` whitespace-
/// separated field values in row-major order (line breaks inside the
/// value block are free).
pub struct ExternalTable {
    space: InputSpace,
    grid: DomainGrid,
    records: Vec<(Vec<f64>, Array2<f64>)>,
}

fn parse_number(tok: &str, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite {what} `{tok}`")));
    }
    Ok(v)
}

impl ExternalTable {
    pub fn from_str(
        text: &str,
        space: InputSpace,
        x1_bounds: (f64, f64),
        x2_bounds: (f64, f64),
    ) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty table".into()))?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(Error::Parse(format!("header must be `n1 n2`, got `{header}`")));
        }
        let n1: usize = dims[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid count `{}`", dims[0])))?;
        let n2: usize = dims[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid count `{}`", dims[1])))?;
        let grid = DomainGrid::new(x1_bounds, x2_bounds, n1, n2)?;

        let mut records = Vec::new();
        while let Some(line) = lines.next() {
            let u: Vec<f64> = line
                .split_whitespace()
                .map(|t| parse_number(t, "input coordinate"))
                .collect::<Result<_>>()?;
            if u.len() != space.p() {
                return Err(Error::Parse(format!(
                    "record {} has {} input coordinates, expected {}",
                    records.len(),
                    u.len(),
                    space.p()
                )));
            }
            if !space.contains(&u) {
                return Err(Error::Parse(format!(
                    "record {} input {u:?} outside declared bounds",
                    records.len()
                )));
            }
            let mut vals = Vec::with_capacity(n1 * n2);
            while vals.len() < n1 * n2 {
                let block = lines.next().ok_or_else(|| {
                    Error::Parse(format!(
                        "record {}: field block ended after {} of {} values",
                        records.len(),
                        vals.len(),
                        n1 * n2
                    ))
                })?;
                for tok in block.split_whitespace() {
                    vals.push(parse_number(tok, "field value")?);
                }
            }
            if vals.len() != n1 * n2 {
                return Err(Error::Parse(format!(
                    "record {} has {} field values, expected {}",
                    records.len(),
                    vals.len(),
                    n1 * n2
                )));
            }
            let field = Array2::from_shape_vec((n1, n2), vals)
                .expect("length checked above");
            records.push((u, field));
        }
        if records.is_empty() {
            return Err(Error::Parse("table has no records".into()));
        }
        Ok(ExternalTable {
            space,
            grid,
            records,
        })
    }

    pub fn from_path(
        path: impl AsRef<Path>,
        space: InputSpace,
        x1_bounds: (f64, f64),
        x2_bounds: (f64, f64),
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text, space, x1_bounds, x2_bounds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Stored inputs, in file order.
    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|(u, _)| u.as_slice())
    }
}

impl MapModel for ExternalTable {
    fn space(&self) -> &InputSpace {
        &self.space
    }

    fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    fn evaluate(&self, u: &[f64]) -> Result<MapField> {
        check_input(&self.space, u)?;
        for (stored, field) in &self.records {
            if stored.as_slice() == u {
                return MapField::new(self.grid.clone(), field.clone());
            }
        }
        Err(Error::domain(format!("no stored field for input {u:?}")))
    }
}
