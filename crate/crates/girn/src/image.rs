//! Flat image vectors with grid metadata.
//!
//! Everything in this crate operates on flattened images: a pixel at
//! `(row, col)` of an `h x w` grid lives at index `row * w + col`.

use crate::error::{Error, Result};

/// Grid shape of an image, `(height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
}

impl Grid {
    pub fn new(height: usize, width: usize) -> Self {
        Grid { height, width }
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }
}

/// A flattened image vector `x` in `R^d` together with its grid shape.
///
/// Dataset pixels are intensities in `[0, 1]`; reconstruction candidates are
/// unconstrained real vectors of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub data: Vec<f64>,
    pub grid: Grid,
}

impl ImageTensor {
    pub fn new(data: Vec<f64>, grid: Grid) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        Ok(ImageTensor { data, grid })
    }

    pub fn zeros(grid: Grid) -> Self {
        ImageTensor {
            data: vec![0.0; grid.len()],
            grid,
        }
    }

    /// Build from row-major nested rows; rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(height * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        ImageTensor::new(data, Grid::new(height, width))
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.grid.index(row, col)]
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean distance to another image of the same shape.
    pub fn distance(&self, other: &ImageTensor) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Max-norm distance to another image of the same shape.
    pub fn distance_inf(&self, other: &ImageTensor) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_grid(&self, grid: Grid) -> Result<()> {
        if self.grid != grid {
            return Err(Error::GridMismatch {
                expected_h: grid.height,
                expected_w: grid.width,
                got_h: self.grid.height,
                got_w: self.grid.width,
            });
        }
        Ok(())
    }
}
