//! Per-ray data-fit proximal map.
//!
//! For each valid ray the agent minimizes
//! `(1/(2 a^2)) (y - w~ . p)^2 + |p - p0|^2` over the 3-vector `p`. Setting
//! the gradient to zero gives `p = p0 + k w~ (y - w~ . p)`, with
//! `k = 1/(2 a^2)`. Dotting with `w~` solves the scalar residual and yields
//! `p = p0 + k (y - w~ . p0) / (1 + k |w~|^2) w~`.

use ndarray::Zip;

use crate::error::{Error, Result};
use crate::forward_model::RayWeights;
use crate::sinogram::{StrainSinogram, VirtualSinogramTensor};

/// Closed-form minimizer for one ray.
pub fn detector_prox_ray(p0: [f64; 3], y: f64, w: [f64; 3], alpha_y: f64) -> [f64; 3] {
    let k = 1.0 / (2.0 * alpha_y * alpha_y);
    let r = y - (w[0] * p0[0] + w[1] * p0[1] + w[2] * p0[2]);
    let ww = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let g = k * r / (1.0 + k * ww);
    [p0[0] + g * w[0], p0[1] + g * w[1], p0[2] + g * w[2]]
}

/// The per-ray objective minimized by [`detector_prox_ray`].
pub fn detector_objective(p: [f64; 3], p0: [f64; 3], y: f64, w: [f64; 3], alpha_y: f64) -> f64 {
    let r = y - (w[0] * p[0] + w[1] * p[1] + w[2] * p[2]);
    let d2: f64 = (0..3).map(|k| (p[k] - p0[k]).powi(2)).sum();
    r * r / (2.0 * alpha_y * alpha_y) + d2
}

/// Applies the data-fit map to every valid ray; invalid rays pass through.
pub fn detector_agent(
    p0: &VirtualSinogramTensor,
    measured: &StrainSinogram,
    weights: &RayWeights,
    alpha_y: f64,
) -> Result<VirtualSinogramTensor> {
    if !(alpha_y > 0.0 && alpha_y.is_finite()) {
        return Err(Error::invalid("alpha_y", format!("must be > 0, got {alpha_y}")));
    }
    let geometry = measured.geometry();
    geometry.check_sinogram(p0.shape())?;
    if weights.w_tilde.len() != geometry.num_rays() {
        return Err(Error::DimensionMismatch(format!(
            "{} ray weights for {} rays",
            weights.w_tilde.len(),
            geometry.num_rays()
        )));
    }
    let ndet = geometry.num_detector_cols();
    let mut out = p0.clone();
    let VirtualSinogramTensor { xx, yy, xy } = &mut out;
    Zip::indexed(xx)
        .and(yy)
        .and(xy)
        .and(measured.y())
        .and(measured.valid())
        .par_for_each(|(v, d), a, b, c, &y, &ok| {
            if ok {
                let p = detector_prox_ray([*a, *b, *c], y, weights.w_tilde[v * ndet + d], alpha_y);
                *a = p[0];
                *b = p[1];
                *c = p[2];
            }
        });
    Ok(out)
}
