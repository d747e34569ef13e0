//! Plane-stress Hooke's law.
//!
//! The shear entry of the stiffness matrix is `1 - nu` acting on the tensor
//! shear strain, and it is used consistently in both directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::TensorField2D;

pub type Matrix3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticityModel {
    youngs_modulus: f64,
    poisson_ratio: f64,
    stiffness: Matrix3,
    compliance: Matrix3,
}

/// `C = E/(1-nu^2) [[1, nu, 0], [nu, 1, 0], [0, 0, 1-nu]]`.
pub fn stiffness_matrix(youngs_modulus: f64, poisson_ratio: f64) -> Result<Matrix3> {
    validate(youngs_modulus, poisson_ratio)?;
    let k = youngs_modulus / (1.0 - poisson_ratio * poisson_ratio);
    Ok([
        [k, k * poisson_ratio, 0.0],
        [k * poisson_ratio, k, 0.0],
        [0.0, 0.0, k * (1.0 - poisson_ratio)],
    ])
}

/// Closed-form inverse of [`stiffness_matrix`]:
/// `C^-1 = 1/E [[1, -nu, 0], [-nu, 1, 0], [0, 0, 1+nu]]`.
pub fn compliance_matrix(youngs_modulus: f64, poisson_ratio: f64) -> Result<Matrix3> {
    validate(youngs_modulus, poisson_ratio)?;
    let k = 1.0 / youngs_modulus;
    Ok([
        [k, -k * poisson_ratio, 0.0],
        [-k * poisson_ratio, k, 0.0],
        [0.0, 0.0, k * (1.0 + poisson_ratio)],
    ])
}

fn validate(e: f64, nu: f64) -> Result<()> {
    if !(e.is_finite() && e > 0.0) {
        return Err(Error::invalid("youngs_modulus", format!("must be > 0, got {e}")));
    }
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::invalid(
            "poisson_ratio",
            format!("must lie in (-1, 0.5), got {nu}"),
        ));
    }
    Ok(())
}

impl ElasticityModel {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            stiffness: stiffness_matrix(youngs_modulus, poisson_ratio)?,
            compliance: compliance_matrix(youngs_modulus, poisson_ratio)?,
        })
    }

    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson_ratio
    }

    pub fn stiffness(&self) -> &Matrix3 {
        &self.stiffness
    }

    pub fn compliance(&self) -> &Matrix3 {
        &self.compliance
    }

    pub fn strain_to_stress(&self, strain: &TensorField2D) -> TensorField2D {
        strain.map_pixels(&self.stiffness)
    }

    pub fn stress_to_strain(&self, stress: &TensorField2D) -> TensorField2D {
        stress.map_pixels(&self.compliance)
    }
}

impl Default for ElasticityModel {
    /// `E = 1`, `nu = 0.3`.
    fn default() -> Self {
        Self::new(1.0, 0.3).expect("default elasticity is valid")
    }
}

pub fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Row vector times matrix.
pub fn row_times(v: &[f64; 3], m: &Matrix3) -> [f64; 3] {
    [
        v[0] * m[0][0] + v[1] * m[1][0] + v[2] * m[2][0],
        v[0] * m[0][1] + v[1] * m[1][1] + v[2] * m[2][1],
        v[0] * m[0][2] + v[1] * m[1][2] + v[2] * m[2][2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ShapeMask;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn close(a: &Matrix3, b: &Matrix3, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).abs() <= tol))
    }

    const I3: Matrix3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn unit_modulus_zero_poisson_is_identity() {
        assert_eq!(stiffness_matrix(1.0, 0.0).unwrap(), I3);
        assert_eq!(compliance_matrix(1.0, 0.0).unwrap(), I3);
    }

    #[test]
    fn typical_metal() {
        let c = stiffness_matrix(1.0, 0.3).unwrap();
        let k = 1.0 / 0.91;
        let want = [[k, 0.3 * k, 0.0], [0.3 * k, k, 0.0], [0.0, 0.0, 0.7 * k]];
        assert!(close(&c, &want, 1e-15));
        let c2 = stiffness_matrix(2.0, 0.3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c2[i][j], 2.0 * c[i][j]);
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(stiffness_matrix(1.0, 0.5).is_err());
        assert!(stiffness_matrix(1.0, -1.0).is_err());
        assert!(stiffness_matrix(0.0, 0.3).is_err());
        assert!(ElasticityModel::new(-2.0, 0.3).is_err());
    }

    #[test]
    fn zero_strain_zero_stress() {
        let m = ElasticityModel::default();
        let z = TensorField2D::zeros((3, 4));
        assert_eq!(m.strain_to_stress(&z), z);
        assert_eq!(m.stress_to_strain(&z), z);
    }

    #[test]
    fn identity_model_passes_through() {
        let m = ElasticityModel::new(1.0, 0.0).unwrap();
        let t = TensorField2D::new(
            Array2::from_elem((2, 2), 1.5),
            Array2::from_elem((2, 2), -2.0),
            Array2::from_elem((2, 2), 0.25),
        )
        .unwrap();
        assert_eq!(m.strain_to_stress(&t), t);
        assert_eq!(m.stress_to_strain(&t), t);
    }

    proptest! {
        #[test]
        fn inverse_is_exact(e in 0.01f64..100.0, nu in -0.99f64..0.499) {
            let c = stiffness_matrix(e, nu).unwrap();
            let ci = compliance_matrix(e, nu).unwrap();
            let p = mat_mul(&c, &ci);
            prop_assert!(close(&p, &I3, 1e-12 * (1.0 + e + 1.0 / e)));
        }

        #[test]
        fn stiffness_is_spd(e in 0.01f64..100.0, nu in -0.99f64..0.499) {
            let c = stiffness_matrix(e, nu).unwrap();
            // Block diagonal: eigenvalues of the 2x2 block and the shear entry.
            let k = c[0][0];
            let eigs = [k + c[0][1], k - c[0][1], c[2][2]];
            prop_assert!(eigs.iter().all(|&l| l > 0.0));
            prop_assert_eq!(c[0][1], c[1][0]);
        }

        #[test]
        fn round_trip(vals in proptest::collection::vec(-1e-3f64..1e-3, 12), nu in -0.5f64..0.45) {
            let m = ElasticityModel::new(1.0, nu).unwrap();
            let t = TensorField2D::new(
                Array2::from_shape_vec((2, 2), vals[0..4].to_vec()).unwrap(),
                Array2::from_shape_vec((2, 2), vals[4..8].to_vec()).unwrap(),
                Array2::from_shape_vec((2, 2), vals[8..12].to_vec()).unwrap(),
            ).unwrap();
            let back = m.stress_to_strain(&m.strain_to_stress(&t));
            let scale = t.sum_squares().sqrt().max(1e-300);
            let err = back.xx.iter().chain(back.yy.iter()).chain(back.xy.iter())
                .zip(t.xx.iter().chain(t.yy.iter()).chain(t.xy.iter()))
                .map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-12 * scale);

            let mask = ShapeMask::from_f64(&ndarray::array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
            let masked = TensorField2D::new(mask.apply(&t.xx), mask.apply(&t.yy), mask.apply(&t.xy)).unwrap();
            let s1 = m.strain_to_stress(&masked);
            let s2 = m.strain_to_stress(&t);
            let s2m = TensorField2D::new(mask.apply(&s2.xx), mask.apply(&s2.yy), mask.apply(&s2.xy)).unwrap();
            prop_assert_eq!(s1, s2m);
        }
    }
}
