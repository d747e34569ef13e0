//! Normalized RMS error against ground truth.

use std::fmt;

use ndarray::{Array2, Zip};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Component, ShapeMask, TensorField2D};

/// Per-component and total NRMSE of a tensor estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NrmseReport {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
    pub total: f64,
}

impl NrmseReport {
    pub fn component(&self, c: Component) -> f64 {
        match c {
            Component::Xx => self.xx,
            Component::Yy => self.yy,
            Component::Xy => self.xy,
        }
    }
}

/// Masked squared error and squared truth norm.
fn masked_sums(estimate: &Array2<f64>, truth: &Array2<f64>, mask: &ShapeMask) -> (f64, f64) {
    Zip::from(estimate)
        .and(truth)
        .and(mask.values())
        .fold(
            (0.0, 0.0),
            |(e, t), &a, &b, &m| {
                if m {
                    (e + (a - b) * (a - b), t + b * b)
                } else {
                    (e, t)
                }
            },
        )
}

fn check_shapes(a: (usize, usize), b: (usize, usize), m: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::shape_mismatch(b, a));
    }
    if m != b {
        return Err(Error::shape_mismatch(b, m));
    }
    Ok(())
}

fn ratio(err: f64, norm: f64, what: &str) -> Result<f64> {
    if norm > 0.0 {
        Ok((err / norm).sqrt())
    } else {
        Err(Error::invalid("truth", format!("{what} has zero norm inside the mask")))
    }
}

/// `|(estimate - truth) m| / |truth m|` for one scalar field.
pub fn nrmse(estimate: &Array2<f64>, truth: &Array2<f64>, mask: &ShapeMask) -> Result<f64> {
    check_shapes(estimate.dim(), truth.dim(), mask.shape())?;
    let (e, t) = masked_sums(estimate, truth, mask);
    ratio(e, t, "field")
}

/// Per-component NRMSE plus the total over all three stacked components.
pub fn tensor_nrmse(estimate: &TensorField2D, truth: &TensorField2D, mask: &ShapeMask) -> Result<NrmseReport> {
    check_shapes(estimate.shape(), truth.shape(), mask.shape())?;
    let sums = Component::ALL.map(|c| masked_sums(estimate.get(c), truth.get(c), mask));
    let err: f64 = sums.iter().map(|s| s.0).sum();
    let norm: f64 = sums.iter().map(|s| s.1).sum();
    let total = ratio(err, norm, "tensor")?;
    // A component that is identically zero in the truth has no relative error.
    let per = |i: usize| {
        if sums[i].1 > 0.0 {
            (sums[i].0 / sums[i].1).sqrt()
        } else {
            f64::NAN
        }
    };
    Ok(NrmseReport {
        xx: per(0),
        yy: per(1),
        xy: per(2),
        total,
    })
}

/// `scale (estimate - truth)`, for rendering error images.
pub fn error_field(estimate: &TensorField2D, truth: &TensorField2D, scale: f64) -> Result<TensorField2D> {
    if estimate.shape() != truth.shape() {
        return Err(Error::shape_mismatch(truth.shape(), estimate.shape()));
    }
    let diff = |c| (estimate.get(c) - truth.get(c)) * scale;
    TensorField2D::new(diff(Component::Xx), diff(Component::Yy), diff(Component::Xy))
}

/// Rows of a results table, one per named run.
#[derive(Debug, Clone, Default)]
pub struct NrmseTable {
    pub rows: Vec<(String, NrmseReport)>,
}

impl NrmseTable {
    pub fn push(&mut self, name: impl Into<String>, r: NrmseReport) {
        self.rows.push((name.into(), r));
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("run,eps_xx,eps_yy,eps_xy,eps\n");
        for (name, r) in &self.rows {
            s.push_str(&format!("{name},{},{},{},{}\n", r.xx, r.yy, r.xy, r.total));
        }
        s
    }
}

impl fmt::Display for NrmseTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(3).max(3);
        writeln!(
            f,
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}",
            "run", "eps_xx", "eps_yy", "eps_xy", "eps"
        )?;
        for (name, r) in &self.rows {
            writeln!(
                f,
                "{name:<width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}",
                r.xx, r.yy, r.xy, r.total
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn truth() -> (TensorField2D, ShapeMask) {
        let f = |k: f64| Array2::from_shape_fn((6, 7), |(r, c)| (r as f64 + k) * (c as f64 - 2.5));
        let m = ShapeMask::rectangle((6, 7), 1, 1, 4, 5).unwrap();
        (TensorField2D::new(f(0.3), f(-1.1), f(2.0)).unwrap(), m)
    }

    #[test]
    fn trivial_cases() {
        let (t, m) = truth();
        let r = tensor_nrmse(&t, &t, &m).unwrap();
        assert_eq!((r.xx, r.yy, r.xy, r.total), (0.0, 0.0, 0.0, 0.0));
        let r = tensor_nrmse(&t.scaled(2.0), &t, &m).unwrap();
        assert!((r.total - 1.0).abs() < 1e-15 && (r.xy - 1.0).abs() < 1e-15);
        let r = tensor_nrmse(&TensorField2D::zeros((6, 7)), &t, &m).unwrap();
        assert!((r.total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_truth_is_error() {
        let z = Array2::zeros((3, 3));
        assert!(nrmse(&z, &z, &ShapeMask::full((3, 3))).is_err());
        assert!(nrmse(&z, &Array2::ones((3, 3)), &ShapeMask::empty((3, 3))).is_err());
        assert!(nrmse(&z, &Array2::ones((3, 4)), &ShapeMask::full((3, 3))).is_err());
    }

    #[test]
    fn error_field_cases() {
        let (t, _) = truth();
        let mut e = t.clone();
        e.xx[[2, 3]] += 1.0;
        let d = error_field(&e, &t, 10.0).unwrap();
        assert!((d.xx[[2, 3]] - 10.0).abs() < 1e-12);
        assert_eq!(d.xx.iter().filter(|v| v.abs() > 1e-12).count(), 1);
        assert!(error_field(&e, &t, 0.0).unwrap().sum_squares() == 0.0);
    }

    #[test]
    fn table_layout() {
        let mut t = NrmseTable::default();
        t.push(
            "monstr-50",
            NrmseReport {
                xx: 0.1,
                yy: 0.2,
                xy: 0.3,
                total: 0.25,
            },
        );
        assert!(t.to_csv().contains("monstr-50,0.1,0.2,0.3,0.25"));
        assert!(t.to_string().lines().next().unwrap().contains("eps_xy"));
    }

    proptest! {
        #[test]
        fn scale_invariant_and_masked(s in 0.1f64..10.0, noise in -1.0f64..1.0, outside in -100.0f64..100.0) {
            let (t, m) = truth();
            let e = t.map_pixels(&[[1.0, noise * 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0 + noise]]);
            let a = tensor_nrmse(&e, &t, &m).unwrap();
            let b = tensor_nrmse(&e.scaled(s), &t.scaled(s), &m).unwrap();
            prop_assert!((a.total - b.total).abs() <= 1e-12 * (1.0 + a.total));
            let mut e2 = e.clone();
            e2.xx[[0, 0]] = outside;
            let c = tensor_nrmse(&e2, &t, &m).unwrap();
            prop_assert_eq!(a.total, c.total);
        }
    }
}
