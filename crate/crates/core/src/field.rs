//! Pixel-grid containers: scalar fields, 2D symmetric tensor fields, and
//! binary shape masks.

use std::fmt;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three independent entries of a 2D symmetric tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Xx,
    Yy,
    Xy,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Xx, Component::Yy, Component::Xy];

    pub fn index(self) -> usize {
        match self {
            Component::Xx => 0,
            Component::Yy => 1,
            Component::Xy => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Xx => "xx",
            Component::Yy => "yy",
            Component::Xy => "xy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "xx" => Some(Component::Xx),
            "yy" => Some(Component::Yy),
            "xy" => Some(Component::Xy),
            _ => None,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn check_finite(values: &Array2<f64>, context: &str) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&value) => Err(Error::NonFinite {
            context: context.to_string(),
            value,
        }),
        None => Ok(()),
    }
}

/// A finite real-valued field on the pixel grid (rows = y, cols = x).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Array2<f64>,
}

impl ScalarField {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        check_finite(&values, "scalar field")?;
        Ok(Self { values })
    }

    pub fn zeros(shape: (usize, usize)) -> Self {
        Self {
            values: Array2::zeros(shape),
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Three co-registered component fields `[xx, yy, xy]` of a strain or
/// stress tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField2D {
    pub xx: Array2<f64>,
    pub yy: Array2<f64>,
    pub xy: Array2<f64>,
}

impl TensorField2D {
    pub fn new(xx: Array2<f64>, yy: Array2<f64>, xy: Array2<f64>) -> Result<Self> {
        if xx.dim() != yy.dim() || xx.dim() != xy.dim() {
            return Err(Error::DimensionMismatch(format!(
                "tensor components have shapes {:?}, {:?}, {:?}",
                xx.dim(),
                yy.dim(),
                xy.dim()
            )));
        }
        Ok(Self { xx, yy, xy })
    }

    pub fn zeros(shape: (usize, usize)) -> Self {
        Self {
            xx: Array2::zeros(shape),
            yy: Array2::zeros(shape),
            xy: Array2::zeros(shape),
        }
    }

    pub fn from_components(c: [Array2<f64>; 3]) -> Result<Self> {
        let [xx, yy, xy] = c;
        Self::new(xx, yy, xy)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.xx.dim()
    }

    pub fn get(&self, c: Component) -> &Array2<f64> {
        match c {
            Component::Xx => &self.xx,
            Component::Yy => &self.yy,
            Component::Xy => &self.xy,
        }
    }

    pub fn get_mut(&mut self, c: Component) -> &mut Array2<f64> {
        match c {
            Component::Xx => &mut self.xx,
            Component::Yy => &mut self.yy,
            Component::Xy => &mut self.xy,
        }
    }

    pub fn components(&self) -> [&Array2<f64>; 3] {
        [&self.xx, &self.yy, &self.xy]
    }

    pub fn into_components(self) -> [Array2<f64>; 3] {
        [self.xx, self.yy, self.xy]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn check_finite(&self) -> Result<()> {
        for c in Component::ALL {
            check_finite(self.get(c), &format!("tensor component {c}"))?;
        }
        Ok(())
    }

    /// Applies a 3x3 matrix to the per-pixel vector `[xx, yy, xy]`.
    pub fn map_pixels(&self, m: &[[f64; 3]; 3]) -> TensorField2D {
        let mut out = TensorField2D::zeros(self.shape());
        Zip::from(&mut out.xx)
            .and(&mut out.yy)
            .and(&mut out.xy)
            .and(&self.xx)
            .and(&self.yy)
            .and(&self.xy)
            .for_each(|ox, oy, oxy, &a, &b, &c| {
                *ox = m[0][0] * a + m[0][1] * b + m[0][2] * c;
                *oy = m[1][0] * a + m[1][1] * b + m[1][2] * c;
                *oxy = m[2][0] * a + m[2][1] * b + m[2][2] * c;
            });
        out
    }

    pub fn scaled(&self, s: f64) -> TensorField2D {
        TensorField2D {
            xx: &self.xx * s,
            yy: &self.yy * s,
            xy: &self.xy * s,
        }
    }

    pub fn sum_squares(&self) -> f64 {
        self.components()
            .iter()
            .map(|a| a.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// Binary sample support on the pixel grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeMask {
    values: Array2<bool>,
}

impl ShapeMask {
    pub fn new(values: Array2<bool>) -> Self {
        Self { values }
    }

    pub fn empty(shape: (usize, usize)) -> Self {
        Self {
            values: Array2::from_elem(shape, false),
        }
    }

    pub fn full(shape: (usize, usize)) -> Self {
        Self {
            values: Array2::from_elem(shape, true),
        }
    }

    /// Axis-aligned rectangle of `height` rows by `width` columns whose
    /// top-left pixel is `(row0, col0)`.
    pub fn rectangle(shape: (usize, usize), row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > shape.0 || col0 + width > shape.1 {
            return Err(Error::invalid(
                "rectangle",
                format!(
                    "{height}x{width} rectangle at ({row0}, {col0}) exceeds grid {}x{}",
                    shape.0, shape.1
                ),
            ));
        }
        let values = Array2::from_shape_fn(shape, |(r, c)| {
            (row0..row0 + height).contains(&r) && (col0..col0 + width).contains(&c)
        });
        Ok(Self { values })
    }

    /// Interprets exactly-0 and exactly-1 values; anything else is an error.
    pub fn from_f64(values: &Array2<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(
                "mask",
                format!("mask values must be 0 or 1, found {bad}"),
            ));
        }
        Ok(Self {
            values: values.mapv(|v| v == 1.0),
        })
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.values.mapv(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn values(&self) -> &Array2<bool> {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.values[[row, col]]
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    /// Zeroes every entry of `a` outside the mask.
    pub fn apply(&self, a: &Array2<f64>) -> Array2<f64> {
        let mut out = a.clone();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, a: &mut Array2<f64>) {
        Zip::from(a).and(&self.values).for_each(|v, &m| {
            if !m {
                *v = 0.0;
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn scalar_rejects_nan() {
        assert!(ScalarField::new(array![[1.0, f64::NAN]]).is_err());
        assert!(ScalarField::new(array![[1.0, f64::INFINITY]]).is_err());
        assert!(ScalarField::new(array![[1.0, 2.0]]).is_ok());
    }

    #[test]
    fn tensor_shapes_must_agree() {
        let a = Array2::<f64>::zeros((2, 2));
        let b = Array2::<f64>::zeros((2, 3));
        assert!(TensorField2D::new(a.clone(), a.clone(), b).is_err());
        assert!(TensorField2D::new(a.clone(), a.clone(), a).is_ok());
    }

    #[test]
    fn rectangle_mask() {
        let m = ShapeMask::rectangle((10, 12), 2, 3, 4, 5).unwrap();
        assert_eq!(m.count(), 20);
        assert!(m.contains(2, 3));
        assert!(m.contains(5, 7));
        assert!(!m.contains(6, 7));
        assert!(!m.contains(5, 8));
        assert!(ShapeMask::rectangle((10, 12), 8, 0, 4, 5).is_err());
    }

    #[test]
    fn mask_from_f64_requires_binary() {
        assert!(ShapeMask::from_f64(&array![[0.0, 1.0]]).is_ok());
        assert!(ShapeMask::from_f64(&array![[0.0, 0.5]]).is_err());
    }

    #[test]
    fn map_pixels_identity() {
        let t = TensorField2D::new(array![[1.0]], array![[2.0]], array![[3.0]]).unwrap();
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(t.map_pixels(&id), t);
    }
}
