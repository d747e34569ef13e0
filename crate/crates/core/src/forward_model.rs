//! Longitudinal-ray-transform measurement model.
//!
//! Each ray at angle theta measures the tensor contracted twice with the
//! ray direction, i.e. `w . [p_xx, p_yy, p_xy]` with
//! `w = [cos^2, sin^2, sin 2theta]` and `p_k` the line integral of
//! component `k`. Measurements are kept path-length scaled.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::elasticity::{row_times, ElasticityModel};
use crate::error::{Error, Result};
use crate::field::{ShapeMask, TensorField2D};
use crate::geometry::Geometry;
use crate::projector::Projector;
use crate::sinogram::StrainSinogram;

/// Strain-domain weights `w` and stress-domain weights `w~ = w C^-1`,
/// one row per ray in (view, column) order.
#[derive(Debug, Clone, PartialEq)]
pub struct RayWeights {
    pub w: Vec<[f64; 3]>,
    pub w_tilde: Vec<[f64; 3]>,
}

/// `[cos^2 theta, sin^2 theta, sin 2theta]`.
pub fn direction_weights(theta: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [c * c, s * s, (2.0 * theta).sin()]
}

pub fn compute_weights(geometry: &Geometry, model: &ElasticityModel) -> RayWeights {
    let ndet = geometry.num_detector_cols();
    let mut w = Vec::with_capacity(geometry.num_rays());
    let mut w_tilde = Vec::with_capacity(geometry.num_rays());
    for &theta in geometry.angles() {
        let wv = direction_weights(theta);
        let wt = row_times(&wv, model.compliance());
        for _ in 0..ndet {
            w.push(wv);
            w_tilde.push(wt);
        }
    }
    RayWeights { w, w_tilde }
}

/// Simulates the path-length-scaled strain sinogram of a strain field
/// supported on `mask`.
pub fn synthesize_strain_sinogram(
    strain: &TensorField2D,
    mask: &ShapeMask,
    projector: &Projector,
) -> Result<StrainSinogram> {
    let geometry = projector.geometry();
    geometry.check_grid(strain.shape())?;
    geometry.check_grid(mask.shape())?;
    let p: Vec<Array2<f64>> = strain
        .components()
        .iter()
        .map(|c| projector.project_unchecked(&mask.apply(c)))
        .collect();
    let mut y = Array2::zeros(geometry.sinogram_shape());
    for (v, &theta) in geometry.angles().iter().enumerate() {
        let w = direction_weights(theta);
        let mut row = y.index_axis_mut(Axis(0), v);
        for d in 0..row.len() {
            row[d] = w[0] * p[0][[v, d]] + w[1] * p[1][[v, d]] + w[2] * p[2][[v, d]];
        }
    }
    let lengths = projector.path_lengths(mask)?;
    StrainSinogram::new(geometry.clone(), y, lengths)
}

/// Adds i.i.d. Gaussian noise of `sigma_microstrain` (in 1e-6 strain) to
/// the mean strain of every valid ray. Rays are visited in (view, column)
/// order with one draw per valid ray, so the result depends only on the
/// seed.
pub fn add_noise(s: &StrainSinogram, sigma_microstrain: f64, seed: u64) -> Result<StrainSinogram> {
    if !(sigma_microstrain >= 0.0 && sigma_microstrain.is_finite()) {
        return Err(Error::invalid(
            "sigma_microstrain",
            format!("must be >= 0, got {sigma_microstrain}"),
        ));
    }
    if sigma_microstrain == 0.0 {
        return Ok(s.clone());
    }
    let sigma = sigma_microstrain * 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = s.y().clone();
    for ((yv, &l), &ok) in y.iter_mut().zip(s.path_lengths()).zip(s.valid()) {
        if ok {
            let n: f64 = StandardNormal.sample(&mut rng);
            *yv += sigma * l * n;
        }
    }
    StrainSinogram::new(s.geometry().clone(), y, s.path_lengths().clone())
}

/// View indices kept when reducing `num_views` to `keep` by uniform stride.
pub fn subsample_indices(num_views: usize, keep: usize) -> Result<Vec<usize>> {
    if keep == 0 || keep > num_views {
        return Err(Error::invalid(
            "keep",
            format!("must lie in 1..={num_views}, got {keep}"),
        ));
    }
    Ok((0..keep).map(|k| k * num_views / keep).collect())
}

pub fn subsample_views(s: &StrainSinogram, keep: usize) -> Result<StrainSinogram> {
    let idx = subsample_indices(s.geometry().num_views(), keep)?;
    let geometry = s.geometry().select_views(&idx)?;
    let y = s.y().select(Axis(0), &idx);
    let lengths = s.path_lengths().select(Axis(0), &idx);
    StrainSinogram::new(geometry, y, lengths)
}
