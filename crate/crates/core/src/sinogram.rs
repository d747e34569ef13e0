//! Sinogram-domain containers.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::field::{check_finite, Component};
use crate::geometry::{Geometry, MIN_PATH_LENGTH};

/// Measured strain sinogram, stored path-length scaled: `y = <eps> * L`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainSinogram {
    geometry: Geometry,
    y: Array2<f64>,
    path_lengths: Array2<f64>,
    valid: Array2<bool>,
}

impl StrainSinogram {
    /// Builds a sinogram from scaled measurements and path lengths. Rays
    /// with `L <= MIN_PATH_LENGTH` are marked invalid and their
    /// measurement is zeroed.
    pub fn new(geometry: Geometry, mut y: Array2<f64>, path_lengths: Array2<f64>) -> Result<Self> {
        geometry.check_sinogram(y.dim())?;
        geometry.check_sinogram(path_lengths.dim())?;
        check_finite(&y, "sinogram measurements")?;
        check_finite(&path_lengths, "sinogram path lengths")?;
        if let Some(&l) = path_lengths.iter().find(|&&l| l < 0.0) {
            return Err(Error::invalid("path_lengths", format!("negative path length {l}")));
        }
        let valid = path_lengths.mapv(|l| l > MIN_PATH_LENGTH);
        Zip::from(&mut y).and(&valid).for_each(|v, &ok| {
            if !ok {
                *v = 0.0;
            }
        });
        Ok(Self {
            geometry,
            y,
            path_lengths,
            valid,
        })
    }

    /// Builds a sinogram from per-ray average strain `<eps>`; entries on
    /// invalid rays are ignored.
    pub fn from_mean_strain(geometry: Geometry, mean_strain: &Array2<f64>, path_lengths: Array2<f64>) -> Result<Self> {
        geometry.check_sinogram(mean_strain.dim())?;
        let y = Zip::from(mean_strain)
            .and(&path_lengths)
            .map_collect(|&e, &l| if l > MIN_PATH_LENGTH { e * l } else { 0.0 });
        Self::new(geometry, y, path_lengths)
    }

    /// Reassembles a sinogram from stored parts, checking that the stored
    /// validity mask agrees with the path lengths.
    pub fn from_parts(
        geometry: Geometry,
        y: Array2<f64>,
        path_lengths: Array2<f64>,
        valid: Array2<bool>,
    ) -> Result<Self> {
        let s = Self::new(geometry, y.clone(), path_lengths)?;
        if s.valid != valid {
            return Err(Error::invalid("valid", "validity mask disagrees with path lengths"));
        }
        if s.y != y {
            return Err(Error::invalid(
                "y",
                "nonzero measurement on a ray that misses the sample",
            ));
        }
        Ok(s)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Path-length-scaled measurements.
    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn path_lengths(&self) -> &Array2<f64> {
        &self.path_lengths
    }

    pub fn valid(&self) -> &Array2<bool> {
        &self.valid
    }

    pub fn valid_f64(&self) -> Array2<f64> {
        self.valid.mapv(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    /// `<eps> = y / L` on valid rays, 0 elsewhere.
    pub fn mean_strain(&self) -> Array2<f64> {
        Zip::from(&self.y)
            .and(&self.path_lengths)
            .and(&self.valid)
            .map_collect(|&y, &l, &ok| if ok { y / l } else { 0.0 })
    }
}

/// One sinogram per tensor component.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSinogramTensor {
    pub xx: Array2<f64>,
    pub yy: Array2<f64>,
    pub xy: Array2<f64>,
}

impl VirtualSinogramTensor {
    pub fn zeros(shape: (usize, usize)) -> Self {
        Self {
            xx: Array2::zeros(shape),
            yy: Array2::zeros(shape),
            xy: Array2::zeros(shape),
        }
    }

    pub fn from_components(c: [Array2<f64>; 3]) -> Result<Self> {
        let [xx, yy, xy] = c;
        if xx.dim() != yy.dim() || xx.dim() != xy.dim() {
            return Err(Error::DimensionMismatch(
                "virtual sinogram components differ in shape".into(),
            ));
        }
        Ok(Self { xx, yy, xy })
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

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Element-wise `a*self + b*other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            xx: &self.xx * a + &other.xx * b,
            yy: &self.yy * a + &other.yy * b,
            xy: &self.xy * a + &other.xy * b,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn geom() -> Geometry {
        Geometry::uniform(4, 4, 2, 2).unwrap()
    }

    #[test]
    fn invalid_rays_zeroed() {
        let y = array![[1.0, 2.0], [3.0, 4.0]];
        let l = array![[1.0, 0.0], [1e-7, 2.0]];
        let s = StrainSinogram::new(geom(), y, l).unwrap();
        assert_eq!(s.y(), &array![[1.0, 0.0], [0.0, 4.0]]);
        assert_eq!(s.valid(), &array![[true, false], [false, true]]);
        assert_eq!(s.num_valid(), 2);
        assert_eq!(s.mean_strain(), array![[1.0, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn rejects_negative_length() {
        let y = Array2::zeros((2, 2));
        let l = array![[1.0, -1.0], [0.0, 0.0]];
        assert!(StrainSinogram::new(geom(), y, l).is_err());
    }

    #[test]
    fn rejects_wrong_shape() {
        let y = Array2::zeros((3, 2));
        let l = Array2::zeros((3, 2));
        assert!(matches!(
            StrainSinogram::new(geom(), y, l),
            Err(Error::GeometryMismatch { .. })
        ));
    }

    #[test]
    fn from_parts_checks_mask() {
        let y = array![[1.0, 0.0], [0.0, 4.0]];
        let l = array![[1.0, 0.0], [0.0, 2.0]];
        let good = array![[true, false], [false, true]];
        assert!(StrainSinogram::from_parts(geom(), y.clone(), l.clone(), good).is_ok());
        let bad = array![[true, true], [false, true]];
        assert!(StrainSinogram::from_parts(geom(), y, l, bad).is_err());
    }
}
