//! Regularly sampled scalar fields on a box anchored at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Vec3;

/// Samples at cell centres `((i+½)hx, (j+½)hy, (k+½)hz)`, stored with `k`
/// varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarGrid {
    pub dims: [usize; 3],
    pub spacing: Vec3,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(dims: [usize; 3], spacing: Vec3, values: Vec<f64>) -> Result<Self> {
        let g = Self { dims, spacing, values };
        g.validate()?;
        Ok(g)
    }

    pub fn from_fn(dims: [usize; 3], spacing: Vec3, f: impl Fn(Vec3) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(dims.iter().product());
        for ix in 0..dims[0] {
            for iy in 0..dims[1] {
                for iz in 0..dims[2] {
                    values.push(f(cell_centre([ix, iy, iz], &spacing)));
                }
            }
        }
        Self::new(dims, spacing, values)
    }

    pub fn constant(dims: [usize; 3], spacing: Vec3, value: f64) -> Result<Self> {
        Self::new(dims, spacing, vec![value; dims.iter().product()])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::invalid(format!("grid dims must be positive, got {:?}", self.dims)));
        }
        if self.spacing.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {:?}", self.spacing)));
        }
        let n: usize = self.dims.iter().product();
        if self.values.len() != n {
            return Err(Error::invalid(format!(
                "grid has {} values, dims {:?} require {n}",
                self.values.len(),
                self.dims
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    pub fn get(&self, i: [usize; 3]) -> f64 {
        self.values[self.index(i)]
    }

    pub fn centre(&self, i: [usize; 3]) -> Vec3 {
        cell_centre(i, &self.spacing)
    }

    pub fn extent(&self) -> Vec3 {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn same_shape(&self, other: &ScalarGrid) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }
}

fn cell_centre(i: [usize; 3], h: &Vec3) -> Vec3 {
    [
        (i[0] as f64 + 0.5) * h[0],
        (i[1] as f64 + 0.5) * h[1],
        (i[2] as f64 + 0.5) * h[2],
    ]
}
