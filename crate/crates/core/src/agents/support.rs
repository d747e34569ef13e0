use crate::error::{Error, Result};
use crate::field::{ShapeMask, TensorField2D};

/// Zeroes every component outside the sample support.
pub fn support_agent(sigma: &TensorField2D, mask: &ShapeMask) -> Result<TensorField2D> {
    if sigma.shape() != mask.shape() {
        return Err(Error::shape_mismatch(mask.shape(), sigma.shape()));
    }
    Ok(TensorField2D {
        xx: mask.apply(&sigma.xx),
        yy: mask.apply(&sigma.yy),
        xy: mask.apply(&sigma.xy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn sample() -> TensorField2D {
        TensorField2D::new(
            Array2::from_shape_fn((4, 5), |(r, c)| (r * 5 + c) as f64),
            Array2::from_elem((4, 5), -1.0),
            Array2::from_shape_fn((4, 5), |(r, c)| r as f64 - c as f64),
        )
        .unwrap()
    }

    #[test]
    fn full_and_empty_masks() {
        let s = sample();
        assert_eq!(support_agent(&s, &ShapeMask::full((4, 5))).unwrap(), s);
        assert_eq!(
            support_agent(&s, &ShapeMask::empty((4, 5))).unwrap(),
            TensorField2D::zeros((4, 5))
        );
    }

    #[test]
    fn idempotent() {
        let m = ShapeMask::rectangle((4, 5), 1, 1, 2, 3).unwrap();
        let once = support_agent(&sample(), &m).unwrap();
        assert_eq!(support_agent(&once, &m).unwrap(), once);
        assert_eq!(once.xx[[0, 0]], 0.0);
        assert_eq!(once.xx[[1, 1]], 6.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(support_agent(&sample(), &ShapeMask::full((5, 4))).is_err());
    }
}
