//! Soft stress-equilibrium proximal map.
//!
//! The discrete equilibrium operator is
//!
//! ```text
//! D(s) = [ Dx s_xx + Dy s_xy ]
//!        [ Dy s_yy + Dx s_xy ]
//! ```
//!
//! with forward differences `(Dx f)[r, c] = f[r, c+1] - f[r, c]` (zero in the
//! last column) and likewise `Dy` over rows. The agent minimizes
//! `(1/(2 a^2)) |M D(s)|^2 + |s - s0|^2` by block coordinate descent, where
//! `M` selects which equations are enforced. With `lambda = 1/(2 a^2)` the
//! three block updates are
//!
//! - `(I + lambda Dx^T M Dx) s_xx = s0_xx - lambda Dx^T M Dy s_xy`, one
//!   tridiagonal system per row;
//! - `(I + lambda Dy^T M Dy) s_yy = s0_yy - lambda Dy^T M Dx s_xy`, one per
//!   column;
//! - `(I + lambda (Dx^T M Dx + Dy^T M Dy)) s_xy = s0_xy
//!   - lambda (Dy^T M Dx s_xx + Dx^T M Dy s_yy)`, by conjugate gradient.

use ndarray::{Array2, Axis, Zip};
use rayon::prelude::*;

use super::tridiagonal::solve_tridiagonal;
use crate::error::{Error, Result};
use crate::field::{ShapeMask, TensorField2D};

const CG_MAX_ITERS: usize = 5000;

pub fn dx(f: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = f.dim();
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            out[[r, c]] = f[[r, c + 1]] - f[[r, c]];
        }
    }
    out
}

pub fn dy(f: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = f.dim();
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols {
            out[[r, c]] = f[[r + 1, c]] - f[[r, c]];
        }
    }
    out
}

pub fn dx_t(g: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = g.dim();
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            out[[r, c]] -= g[[r, c]];
            out[[r, c + 1]] += g[[r, c]];
        }
    }
    out
}

pub fn dy_t(g: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = g.dim();
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols {
            out[[r, c]] -= g[[r, c]];
            out[[r + 1, c]] += g[[r, c]];
        }
    }
    out
}

/// Which discrete equilibrium equations are penalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumOperator {
    /// 1 where the pair of equations anchored at `(r, c)` is enforced.
    weights: Array2<f64>,
}

impl EquilibriumOperator {
    /// Every equation on the grid, with the zero-padded forward differences.
    pub fn full_grid(shape: (usize, usize)) -> Self {
        Self {
            weights: Array2::ones(shape),
        }
    }

    /// Only equations whose stencil `(r, c), (r, c+1), (r+1, c)` lies inside
    /// the support. Jumps across the sample boundary are not penalized.
    pub fn within_support(mask: &ShapeMask) -> Self {
        let (rows, cols) = mask.shape();
        let weights = Array2::from_shape_fn((rows, cols), |(r, c)| {
            let inside = r + 1 < rows
                && c + 1 < cols
                && mask.contains(r, c)
                && mask.contains(r, c + 1)
                && mask.contains(r + 1, c);
            if inside {
                1.0
            } else {
                0.0
            }
        });
        Self { weights }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weights.dim()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// `M D(s)` as the two residual fields.
    pub fn apply(&self, s: &TensorField2D) -> (Array2<f64>, Array2<f64>) {
        let e1 = (dx(&s.xx) + dy(&s.xy)) * &self.weights;
        let e2 = (dy(&s.yy) + dx(&s.xy)) * &self.weights;
        (e1, e2)
    }

    /// `|M D(s)|_2`.
    pub fn residual_norm(&self, s: &TensorField2D) -> f64 {
        let (e1, e2) = self.apply(s);
        (e1.iter().chain(e2.iter()).map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `(I + lambda (Dx^T M Dx + Dy^T M Dy)) f`.
    fn xy_operator(&self, f: &Array2<f64>, lambda: f64) -> Array2<f64> {
        let a = dx_t(&(dx(f) * &self.weights));
        let b = dy_t(&(dy(f) * &self.weights));
        f + &((a + b) * lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSettings {
    pub alpha_e: f64,
    pub sweeps: usize,
    pub cg_tol: f64,
}

/// Objective `(1/(2 a^2)) |M D(s)|^2 + |s - s0|^2`.
pub fn equilibrium_objective(op: &EquilibriumOperator, s: &TensorField2D, s0: &TensorField2D, alpha_e: f64) -> f64 {
    let r = op.residual_norm(s);
    let d: f64 = s
        .components()
        .iter()
        .zip(s0.components())
        .map(|(a, b)| (*a - b).iter().map(|v| v * v).sum::<f64>())
        .sum();
    r * r / (2.0 * alpha_e * alpha_e) + d
}

/// Approximate minimizer of the equilibrium objective after
/// `settings.sweeps` block-coordinate passes starting at `s0`.
pub fn equilibrium_agent(
    s0: &TensorField2D,
    op: &EquilibriumOperator,
    settings: EquilibriumSettings,
) -> Result<TensorField2D> {
    let EquilibriumSettings {
        alpha_e,
        sweeps,
        cg_tol,
    } = settings;
    if !(alpha_e > 0.0 && alpha_e.is_finite()) {
        return Err(Error::invalid("alpha_e", format!("must be > 0, got {alpha_e}")));
    }
    if cg_tol.is_nan() || cg_tol <= 0.0 {
        return Err(Error::invalid("cg_tol", format!("must be > 0, got {cg_tol}")));
    }
    if s0.shape() != op.shape() {
        return Err(Error::shape_mismatch(op.shape(), s0.shape()));
    }
    let lambda = 1.0 / (2.0 * alpha_e * alpha_e);
    let s0_norm = s0.sum_squares().sqrt();
    let mut s = s0.clone();
    for _ in 0..sweeps {
        let rhs = &s0.xx - &(dx_t(&(dy(&s.xy) * &op.weights)) * lambda);
        s.xx = solve_rows(&rhs, &op.weights, lambda);

        let rhs = &s0.yy - &(dy_t(&(dx(&s.xy) * &op.weights)) * lambda);
        s.yy = solve_rows(&rhs.t().to_owned(), &op.weights.t().to_owned(), lambda)
            .t()
            .as_standard_layout()
            .into_owned();

        let rhs = &s0.xy - &((dy_t(&(dx(&s.xx) * &op.weights)) + dx_t(&(dy(&s.yy) * &op.weights))) * lambda);
        s.xy = conjugate_gradient(
            |f| op.xy_operator(f, lambda),
            &rhs,
            &s.xy,
            cg_tol * (1.0 + s0_norm) / 2.0,
        );
    }
    Ok(s)
}

/// Row-wise solve of `(I + lambda Dx^T M Dx) x = rhs`. Row `r` couples
/// neighbors `c, c+1` with weight `lambda * M[r, c]`.
fn solve_rows(rhs: &Array2<f64>, weights: &Array2<f64>, lambda: f64) -> Array2<f64> {
    let (rows, cols) = rhs.dim();
    let mut out = rhs.as_standard_layout().into_owned();
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(r, mut row)| {
            let mut lower = vec![0.0; cols];
            let mut diag = vec![1.0; cols];
            let mut upper = vec![0.0; cols];
            for c in 0..cols.saturating_sub(1) {
                let k = lambda * weights[[r, c]];
                diag[c] += k;
                diag[c + 1] += k;
                upper[c] = -k;
                lower[c + 1] = -k;
            }
            let mut scratch = vec![0.0; cols];
            let x = row.as_slice_mut().expect("standard layout row");
            solve_tridiagonal(&lower, &diag, &upper, x, &mut scratch);
        });
    debug_assert_eq!(out.dim(), (rows, cols));
    out
}

/// Conjugate gradient for an SPD operator, warm-started at `x0`, stopping
/// when the residual norm drops below `abs_tol`.
pub(crate) fn conjugate_gradient<F>(op: F, rhs: &Array2<f64>, x0: &Array2<f64>, abs_tol: f64) -> Array2<f64>
where
    F: Fn(&Array2<f64>) -> Array2<f64>,
{
    let mut x = x0.clone();
    let mut r = rhs - &op(&x);
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    for _ in 0..CG_MAX_ITERS {
        if rs.sqrt() <= abs_tol {
            break;
        }
        let ap = op(&p);
        let alpha = rs / dot(&p, &ap);
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        Zip::from(&mut p).and(&r).for_each(|p, &r| *p = r + beta * *p);
        rs = rs_new;
    }
    x
}

pub(crate) fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + x * y)
}
