//! Dense real vectors, the iterate/argument type of every oracle.

use crate::error::{Error, Result};

/// A point in R^n. All entries are finite; the dimension is fixed per
/// problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Builds a point, rejecting NaN/Inf entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        for (i, &v) in coords.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    index: i,
                    value: v,
                    context: "Point::new",
                });
            }
        }
        Ok(Point { coords })
    }

    pub fn zeros(dim: usize) -> Self {
        Point {
            coords: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }

    pub fn add(&self, other: &Point) -> Point {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.add_scaled(-1.0, other)
    }

    /// self + t * other
    pub fn add_scaled(&self, t: f64, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + t * b)
                .collect(),
        }
    }

    pub fn scale(&self, t: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|a| a * t).collect(),
        }
    }

    /// Validates finiteness of every entry; `context` names the oracle boundary.
    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        for (i, &v) in self.coords.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    index: i,
                    value: v,
                    context,
                });
            }
        }
        Ok(())
    }

    pub fn check_dim(&self, expected: usize, context: &'static str) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Point {
    /// Infallible construction for internally computed vectors. External
    /// inputs go through `Point::new`.
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}
