//! Per-component tomographic MAP reconstruction with a qGGMRF prior.
//!
//! Each component solves
//! `min_x (1/(2 a^2)) |W^(1/2) (b - A x)|^2 + sum_{pairs} w_ij rho(x_i - x_j)`
//! where `W` zeroes invalid rays. The solver is majorize-minimize: every outer
//! step replaces `rho` by the quadratic `rho'(d0)/(2 d0) d^2` touching it at
//! the current differences, then takes a few conjugate-gradient steps on that
//! surrogate starting from the current iterate. CG from the current point
//! never increases the surrogate, so the true objective is non-increasing.

use ndarray::{Array2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::equilibrium::dot;
use crate::error::{Error, Result};
use crate::field::{ShapeMask, TensorField2D};
use crate::projector::Projector;
use crate::sinogram::VirtualSinogramTensor;

/// Neighbor offsets, each unordered pair counted once: right, down, and the
/// two diagonals below.
const OFFSETS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

/// Smallest |d| relative to sigma_x used in the surrogate curvature.
const TINY_DIFF: f64 = 1e-30;

/// qGGMRF potential `rho(d) = |d|^p / (p s^p) / (1 + |d/(T s)|^(p-q))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QggmrfPrior {
    pub p: f64,
    pub q: f64,
    pub t: f64,
    /// Scale `s`, in the same units as the reconstructed field.
    pub sigma_x: f64,
}

impl QggmrfPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0 && self.q <= self.p && self.p <= 2.0) {
            return Err(Error::invalid(
                "qggmrf",
                format!("need 1 < q <= p <= 2, got q={} p={}", self.q, self.p),
            ));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid("qggmrf.t", format!("must be > 0, got {}", self.t)));
        }
        if !(self.sigma_x > 0.0 && self.sigma_x.is_finite()) {
            return Err(Error::invalid(
                "qggmrf.sigma_x",
                format!("must be > 0, got {}", self.sigma_x),
            ));
        }
        Ok(())
    }

    pub fn rho(&self, d: f64) -> f64 {
        let a = d.abs();
        if a == 0.0 {
            return 0.0;
        }
        let v = (a / (self.t * self.sigma_x)).powf(self.p - self.q);
        a.powf(self.p) / (self.p * self.sigma_x.powf(self.p)) / (1.0 + v)
    }

    /// `rho'(d) / d`, the curvature of the symmetric quadratic majorizer.
    pub fn surrogate_curvature(&self, d: f64) -> f64 {
        let a = d.abs().max(TINY_DIFF * self.sigma_x);
        let v = (a / (self.t * self.sigma_x)).powf(self.p - self.q);
        a.powf(self.p - 2.0) / self.sigma_x.powf(self.p) * (1.0 + self.q / self.p * v) / ((1.0 + v) * (1.0 + v))
    }
}

/// Weights for the 8-neighborhood: 1 for edge neighbors and 1/sqrt(2) for
/// diagonal ones, normalized so the eight weights around a pixel sum to one.
pub fn neighbor_weights() -> [f64; 4] {
    let d = std::f64::consts::FRAC_1_SQRT_2;
    let total = 2.0 * (2.0 + 2.0 * d);
    [1.0 / total, 1.0 / total, d / total, d / total]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconSettings {
    pub alpha_v: f64,
    pub prior: QggmrfPrior,
    /// Majorize-minimize steps per call.
    pub inner_iters: usize,
    /// Conjugate-gradient steps per surrogate.
    pub cg_steps: usize,
}

impl ReconSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_v > 0.0 && self.alpha_v.is_finite()) {
            return Err(Error::invalid("alpha_v", format!("must be > 0, got {}", self.alpha_v)));
        }
        self.prior.validate()
    }
}

/// Pixel pairs entering the prior, with their weights.
#[derive(Debug, Clone)]
struct PairWeights {
    /// `w[k][r, c]` weights the pair `(r, c)`, `(r, c) + OFFSETS[k]`; zero if
    /// the pair leaves the grid or the support.
    w: [Array2<f64>; 4],
}

impl PairWeights {
    fn new(shape: (usize, usize), support: Option<&ShapeMask>) -> Self {
        let base = neighbor_weights();
        let (rows, cols) = shape;
        let w = std::array::from_fn(|k| {
            let (dr, dc) = OFFSETS[k];
            Array2::from_shape_fn(shape, |(r, c)| {
                let (r2, c2) = (r as isize + dr, c as isize + dc);
                if r2 < 0 || c2 < 0 || r2 >= rows as isize || c2 >= cols as isize {
                    return 0.0;
                }
                let inside = support.is_none_or(|m| m.contains(r, c) && m.contains(r2 as usize, c2 as usize));
                if inside {
                    base[k]
                } else {
                    0.0
                }
            })
        });
        Self { w }
    }

    fn for_each_pair(&self, k: usize, mut f: impl FnMut(usize, usize, usize, usize, f64)) {
        let (dr, dc) = OFFSETS[k];
        for ((r, c), &w) in self.w[k].indexed_iter() {
            if w != 0.0 {
                f(r, c, (r as isize + dr) as usize, (c as isize + dc) as usize, w);
            }
        }
    }

    fn value(&self, x: &Array2<f64>, prior: &QggmrfPrior) -> f64 {
        let mut total = 0.0;
        for k in 0..4 {
            self.for_each_pair(k, |r, c, r2, c2, w| total += w * prior.rho(x[[r, c]] - x[[r2, c2]]));
        }
        total
    }

    /// Per-pair surrogate curvatures `w_ij rho'(d)/d` at `x`.
    fn curvatures(&self, x: &Array2<f64>, prior: &QggmrfPrior) -> [Array2<f64>; 4] {
        std::array::from_fn(|k| {
            let mut a = Array2::zeros(x.dim());
            self.for_each_pair(k, |r, c, r2, c2, w| {
                a[[r, c]] = w * prior.surrogate_curvature(x[[r, c]] - x[[r2, c2]]);
            });
            a
        })
    }
}

/// Hessian of the quadratic surrogate of the prior applied to `v`.
fn prior_hessian(curv: &[Array2<f64>; 4], v: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(v.dim());
    for (k, a) in curv.iter().enumerate() {
        let (dr, dc) = OFFSETS[k];
        for ((r, c), &ak) in a.indexed_iter() {
            if ak != 0.0 {
                let (r2, c2) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
                let g = ak * (v[[r, c]] - v[[r2, c2]]);
                out[[r, c]] += g;
                out[[r2, c2]] -= g;
            }
        }
    }
    out
}

/// One scalar reconstruction problem.
pub struct ComponentProblem<'a> {
    pub projector: &'a Projector,
    /// Path-length-scaled virtual sinogram `b`.
    pub sinogram: &'a Array2<f64>,
    /// Per-ray data weight, 0 on rays excluded from the fit.
    pub data_weight: &'a Array2<f64>,
    /// Restricts the unknowns and the prior pairs when present.
    pub support: Option<&'a ShapeMask>,
}

impl ComponentProblem<'_> {
    fn restrict(&self, v: &mut Array2<f64>) {
        if let Some(m) = self.support {
            m.apply_in_place(v);
        }
    }

    /// The objective the solver decreases.
    pub fn objective(&self, x: &Array2<f64>, settings: &ReconSettings) -> f64 {
        let pairs = PairWeights::new(x.dim(), self.support);
        let r = self.sinogram - &self.projector.project_unchecked(x);
        let data = Zip::from(&r)
            .and(self.data_weight)
            .fold(0.0, |acc, &r, &w| acc + w * r * r);
        data / (2.0 * settings.alpha_v * settings.alpha_v) + pairs.value(x, &settings.prior)
    }

    /// Runs the majorize-minimize iterations from `warm`.
    pub fn solve(&self, warm: &Array2<f64>, settings: &ReconSettings) -> Array2<f64> {
        let pairs = PairWeights::new(warm.dim(), self.support);
        let inv_var = 1.0 / (settings.alpha_v * settings.alpha_v);
        let mut rhs = self
            .projector
            .backproject_unchecked(&(self.sinogram * self.data_weight))
            * inv_var;
        self.restrict(&mut rhs);
        let mut x = warm.clone();
        self.restrict(&mut x);

        for _ in 0..settings.inner_iters {
            let curv = pairs.curvatures(&x, &settings.prior);
            let hess = |v: &Array2<f64>| {
                let av = self.projector.project_unchecked(v) * self.data_weight;
                let mut out = self.projector.backproject_unchecked(&av) * inv_var + prior_hessian(&curv, v);
                self.restrict(&mut out);
                out
            };
            let mut r = &rhs - &hess(&x);
            let mut dir = r.clone();
            let mut rs = dot(&r, &r);
            for _ in 0..settings.cg_steps {
                if rs == 0.0 {
                    break;
                }
                let hd = hess(&dir);
                let curvature = dot(&dir, &hd);
                if curvature.is_nan() || curvature <= 0.0 {
                    break;
                }
                let step = rs / curvature;
                x.scaled_add(step, &dir);
                r.scaled_add(-step, &hd);
                let rs_new = dot(&r, &r);
                let beta = rs_new / rs;
                Zip::from(&mut dir).and(&r).for_each(|d, &r| *d = r + beta * *d);
                rs = rs_new;
            }
        }
        x
    }
}

/// Reconstructs the three components independently, each warm-started from
/// the matching component of `warm`.
pub fn reconstruction_agent(
    sinograms: &VirtualSinogramTensor,
    warm: &TensorField2D,
    projector: &Projector,
    data_weight: &Array2<f64>,
    support: Option<&ShapeMask>,
    settings: &ReconSettings,
) -> Result<TensorField2D> {
    settings.validate()?;
    let g = projector.geometry();
    g.check_sinogram(sinograms.shape())?;
    g.check_sinogram(data_weight.dim())?;
    g.check_grid(warm.shape())?;
    if let Some(m) = support {
        g.check_grid(m.shape())?;
    }
    let b = sinograms.components();
    let w = warm.components();
    let out: Vec<Array2<f64>> = (0..3)
        .into_par_iter()
        .map(|k| {
            ComponentProblem {
                projector,
                sinogram: b[k],
                data_weight,
                support,
            }
            .solve(w[k], settings)
        })
        .collect();
    let [xx, yy, xy]: [Array2<f64>; 3] = out.try_into().expect("three components");
    TensorField2D::new(xx, yy, xy)
}
