//! Parallel-beam acquisition geometry.
//!
//! Axis convention, used everywhere in the crate: x increases with column
//! index, y increases with row index, and projection angles are measured
//! from the +x axis. The grid and the detector are both centered on the
//! origin; pixel pitch and detector pitch are one length unit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel pitch in length units. All lengths in the crate are in pixels.
pub const PIXEL_PITCH: f64 = 1.0;

/// Rays whose intersection with the sample is shorter than this are
/// treated as missing the sample.
pub const MIN_PATH_LENGTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    grid_rows: usize,
    grid_cols: usize,
    num_detector_cols: usize,
    angles: Vec<f64>,
}

impl Geometry {
    pub fn new(grid_rows: usize, grid_cols: usize, num_detector_cols: usize, angles: Vec<f64>) -> Result<Self> {
        if grid_rows == 0 || grid_cols == 0 {
            return Err(Error::invalid("grid", "grid must be non-empty"));
        }
        if num_detector_cols == 0 {
            return Err(Error::invalid("num_detector_cols", "must be at least 1"));
        }
        if angles.is_empty() {
            return Err(Error::invalid("angles", "at least one view is required"));
        }
        for (i, &a) in angles.iter().enumerate() {
            if !a.is_finite() || !(0.0..PI).contains(&a) {
                return Err(Error::invalid("angles", format!("angle {i} = {a} is outside [0, pi)")));
            }
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("angles", "angles must be strictly increasing"));
        }
        Ok(Self {
            grid_rows,
            grid_cols,
            num_detector_cols,
            angles,
        })
    }

    /// `num_views` angles evenly spanning [0, pi).
    pub fn uniform(grid_rows: usize, grid_cols: usize, num_detector_cols: usize, num_views: usize) -> Result<Self> {
        let angles = (0..num_views).map(|v| v as f64 * PI / num_views as f64).collect();
        Self::new(grid_rows, grid_cols, num_detector_cols, angles)
    }

    /// 128x128 grid, 50 views over [0, 180) degrees, 128 detector columns.
    pub fn reference() -> Self {
        Self::uniform(128, 128, 128, 50).expect("reference geometry is valid")
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    pub fn num_pixels(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn num_views(&self) -> usize {
        self.angles.len()
    }

    pub fn num_detector_cols(&self) -> usize {
        self.num_detector_cols
    }

    /// (views, detector columns)
    pub fn sinogram_shape(&self) -> (usize, usize) {
        (self.angles.len(), self.num_detector_cols)
    }

    pub fn num_rays(&self) -> usize {
        self.angles.len() * self.num_detector_cols
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn pixel_pitch(&self) -> f64 {
        PIXEL_PITCH
    }

    /// Center of pixel (row, col) in grid coordinates.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            col as f64 + 0.5 - self.grid_cols as f64 / 2.0,
            row as f64 + 0.5 - self.grid_rows as f64 / 2.0,
        )
    }

    /// Signed offset of a detector column from the rotation center.
    pub fn detector_offset(&self, col: usize) -> f64 {
        col as f64 + 0.5 - self.num_detector_cols as f64 / 2.0
    }

    /// Same grid and detector, restricted to the listed views.
    pub fn select_views(&self, views: &[usize]) -> Result<Self> {
        let angles = views
            .iter()
            .map(|&v| {
                self.angles
                    .get(v)
                    .copied()
                    .ok_or_else(|| Error::invalid("views", format!("view {v} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid_rows, self.grid_cols, self.num_detector_cols, angles)
    }

    pub(crate) fn check_grid(&self, shape: (usize, usize)) -> Result<()> {
        if shape != self.grid_shape() {
            return Err(Error::shape_mismatch(self.grid_shape(), shape));
        }
        Ok(())
    }

    pub(crate) fn check_sinogram(&self, shape: (usize, usize)) -> Result<()> {
        if shape != self.sinogram_shape() {
            return Err(Error::shape_mismatch(self.sinogram_shape(), shape));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_geometry() {
        let g = Geometry::reference();
        assert_eq!(g.grid_shape(), (128, 128));
        assert_eq!(g.sinogram_shape(), (50, 128));
        assert_eq!(g.angles()[0], 0.0);
        assert!(g.angles().iter().all(|&a| a < PI));
        assert!((g.angles()[25] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_angles() {
        assert!(Geometry::new(4, 4, 4, vec![0.0, 0.0]).is_err());
        assert!(Geometry::new(4, 4, 4, vec![0.5, 0.2]).is_err());
        assert!(Geometry::new(4, 4, 4, vec![PI]).is_err());
        assert!(Geometry::new(4, 4, 4, vec![-0.1]).is_err());
        assert!(Geometry::new(4, 4, 4, vec![]).is_err());
    }

    #[test]
    fn centers_are_symmetric() {
        let g = Geometry::reference();
        let (x0, y0) = g.pixel_center(0, 0);
        let (x1, y1) = g.pixel_center(127, 127);
        assert_eq!(x0, -x1);
        assert_eq!(y0, -y1);
        assert_eq!(g.detector_offset(0), -g.detector_offset(127));
    }

    #[test]
    fn select_views_keeps_grid() {
        let g = Geometry::reference();
        let s = g.select_views(&[0, 5, 10]).unwrap();
        assert_eq!(s.num_views(), 3);
        assert_eq!(s.angles()[1], g.angles()[5]);
        assert!(g.select_views(&[50]).is_err());
    }
}
