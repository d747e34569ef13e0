//! Parallel-beam projection `A` and its matched adjoint `A^T`.
//!
//! Rays are traced once per geometry with an exact ray/pixel intersection
//! traversal (Siddon), so every system-matrix entry is a geometric chord
//! length in pixel units. The matrix is stored twice, ray-major for
//! projection and pixel-major for backprojection. Both products compute
//! each output entry as a sequential sum in a fixed order, so results do
//! not depend on the number of worker threads.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ShapeMask;
use crate::geometry::Geometry;

/// Directions closer than this to an axis are snapped onto it.
const AXIS_SNAP: f64 = 1e-12;
/// Chord pieces shorter than this come from coincident plane crossings and
/// are dropped.
const MIN_SEGMENT: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Projector {
    geometry: Geometry,
    ray_ptr: Vec<usize>,
    ray_pixels: Vec<u32>,
    ray_lengths: Vec<f64>,
    pixel_ptr: Vec<usize>,
    pixel_rays: Vec<u32>,
    pixel_lengths: Vec<f64>,
}

/// Unit direction of a ray at angle `theta`, snapped onto the axes.
pub(crate) fn ray_direction(theta: f64) -> (f64, f64) {
    let (mut s, mut c) = theta.sin_cos();
    if s.abs() < AXIS_SNAP {
        s = 0.0;
        c = c.signum();
    }
    if c.abs() < AXIS_SNAP {
        c = 0.0;
        s = s.signum();
    }
    (c, s)
}

/// Intersections of one ray with the pixel grid, in traversal order, as
/// `(row * cols + col, length)`.
pub fn trace_ray(geometry: &Geometry, theta: f64, offset: f64) -> Vec<(usize, f64)> {
    let rows = geometry.grid_rows();
    let cols = geometry.grid_cols();
    let half_w = cols as f64 / 2.0;
    let half_h = rows as f64 / 2.0;
    let (dx, dy) = ray_direction(theta);
    // The detector axis is the ray direction rotated by +90 degrees.
    let ox = -dy * offset;
    let oy = dx * offset;

    let mut a_min = f64::NEG_INFINITY;
    let mut a_max = f64::INFINITY;
    for (o, d, half) in [(ox, dx, half_w), (oy, dy, half_h)] {
        if d == 0.0 {
            if o <= -half || o >= half {
                return Vec::new();
            }
        } else {
            let a1 = (-half - o) / d;
            let a2 = (half - o) / d;
            a_min = a_min.max(a1.min(a2));
            a_max = a_max.min(a1.max(a2));
        }
    }
    if a_max - a_min <= MIN_SEGMENT {
        return Vec::new();
    }

    let mut alphas = Vec::with_capacity(rows + cols + 2);
    alphas.push(a_min);
    alphas.push(a_max);
    for (o, d, n, half) in [(ox, dx, cols, half_w), (oy, dy, rows, half_h)] {
        if d == 0.0 {
            continue;
        }
        for k in 0..=n {
            let a = (k as f64 - half - o) / d;
            if a > a_min && a < a_max {
                alphas.push(a);
            }
        }
    }
    alphas.sort_by(|a, b| a.partial_cmp(b).expect("finite crossing parameters"));

    let mut hits: Vec<(usize, f64)> = Vec::with_capacity(alphas.len());
    for w in alphas.windows(2) {
        let len = w[1] - w[0];
        if len <= MIN_SEGMENT {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let col = ((ox + mid * dx + half_w).floor() as isize).clamp(0, cols as isize - 1) as usize;
        let row = ((oy + mid * dy + half_h).floor() as isize).clamp(0, rows as isize - 1) as usize;
        let pixel = row * cols + col;
        match hits.last_mut() {
            Some((p, l)) if *p == pixel => *l += len,
            _ => hits.push((pixel, len)),
        }
    }
    hits
}

impl Projector {
    pub fn new(geometry: &Geometry) -> Self {
        let ndet = geometry.num_detector_cols();
        let traced: Vec<Vec<(usize, f64)>> = (0..geometry.num_rays())
            .into_par_iter()
            .map(|ray| {
                let theta = geometry.angles()[ray / ndet];
                trace_ray(geometry, theta, geometry.detector_offset(ray % ndet))
            })
            .collect();

        let nnz: usize = traced.iter().map(Vec::len).sum();
        let mut ray_ptr = Vec::with_capacity(traced.len() + 1);
        let mut ray_pixels = Vec::with_capacity(nnz);
        let mut ray_lengths = Vec::with_capacity(nnz);
        ray_ptr.push(0);
        for hits in &traced {
            for &(p, l) in hits {
                ray_pixels.push(p as u32);
                ray_lengths.push(l);
            }
            ray_ptr.push(ray_pixels.len());
        }

        // Transpose by counting sort; rays stay in increasing order per pixel.
        let npix = geometry.num_pixels();
        let mut pixel_ptr = vec![0usize; npix + 1];
        for &p in &ray_pixels {
            pixel_ptr[p as usize + 1] += 1;
        }
        for i in 0..npix {
            pixel_ptr[i + 1] += pixel_ptr[i];
        }
        let mut fill = pixel_ptr.clone();
        let mut pixel_rays = vec![0u32; nnz];
        let mut pixel_lengths = vec![0f64; nnz];
        for ray in 0..traced.len() {
            for k in ray_ptr[ray]..ray_ptr[ray + 1] {
                let p = ray_pixels[k] as usize;
                pixel_rays[fill[p]] = ray as u32;
                pixel_lengths[fill[p]] = ray_lengths[k];
                fill[p] += 1;
            }
        }

        Self {
            geometry: geometry.clone(),
            ray_ptr,
            ray_pixels,
            ray_lengths,
            pixel_ptr,
            pixel_rays,
            pixel_lengths,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn nnz(&self) -> usize {
        self.ray_pixels.len()
    }

    /// Pixels crossed by ray `(view, col)` and their chord lengths.
    pub fn ray(&self, view: usize, col: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let ray = view * self.geometry.num_detector_cols() + col;
        let span = self.ray_ptr[ray]..self.ray_ptr[ray + 1];
        self.ray_pixels[span.clone()]
            .iter()
            .zip(&self.ray_lengths[span])
            .map(|(&p, &l)| (p as usize, l))
    }

    /// Line integrals of `f` along every ray, as a (views x columns) array.
    pub fn project(&self, f: &Array2<f64>) -> Result<Array2<f64>> {
        self.geometry.check_grid(f.dim())?;
        Ok(self.project_unchecked(f))
    }

    /// Exact adjoint of [`Projector::project`].
    pub fn backproject(&self, s: &Array2<f64>) -> Result<Array2<f64>> {
        self.geometry.check_sinogram(s.dim())?;
        Ok(self.backproject_unchecked(s))
    }

    /// Per-ray sample thickness: the projection of the mask indicator.
    pub fn path_lengths(&self, mask: &ShapeMask) -> Result<Array2<f64>> {
        self.project(&mask.to_f64())
    }

    pub(crate) fn project_unchecked(&self, f: &Array2<f64>) -> Array2<f64> {
        let f = f.as_standard_layout();
        let x = f.as_slice().expect("standard layout");
        let mut out = Array2::zeros(self.geometry.sinogram_shape());
        out.as_slice_mut()
            .expect("fresh array is contiguous")
            .par_iter_mut()
            .enumerate()
            .for_each(|(ray, o)| {
                let span = self.ray_ptr[ray]..self.ray_ptr[ray + 1];
                *o = self.ray_pixels[span.clone()]
                    .iter()
                    .zip(&self.ray_lengths[span])
                    .map(|(&p, &l)| l * x[p as usize])
                    .sum();
            });
        out
    }

    pub(crate) fn backproject_unchecked(&self, s: &Array2<f64>) -> Array2<f64> {
        let s = s.as_standard_layout();
        let y = s.as_slice().expect("standard layout");
        let mut out = Array2::zeros(self.geometry.grid_shape());
        out.as_slice_mut()
            .expect("fresh array is contiguous")
            .par_iter_mut()
            .enumerate()
            .for_each(|(pix, o)| {
                let span = self.pixel_ptr[pix]..self.pixel_ptr[pix + 1];
                *o = self.pixel_rays[span.clone()]
                    .iter()
                    .zip(&self.pixel_lengths[span])
                    .map(|(&r, &l)| l * y[r as usize])
                    .sum();
            });
        out
    }

    pub(crate) fn check_same_geometry(&self, other: &Geometry) -> Result<()> {
        if &self.geometry != other {
            return Err(Error::GeometryMismatch {
                expected: describe(&self.geometry),
                found: describe(other),
            });
        }
        Ok(())
    }
}

pub(crate) fn describe(g: &Geometry) -> String {
    format!(
        "grid {}x{}, {} views x {} columns",
        g.grid_rows(),
        g.grid_cols(),
        g.num_views(),
        g.num_detector_cols()
    )
}
