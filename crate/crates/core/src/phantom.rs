//! Saint-Venant cantilever strain phantom and the reference experiments.
//!
//! The beam occupies a `width x length` rectangle with its long axis along x.
//! Beam-local coordinates put the clamped end at `x = 0`, the free end at
//! `x = l`, and the neutral axis at `y = 0`. Samples are taken on a lattice
//! that includes both ends of each axis, so the boundary zeros of the field
//! are hit exactly.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ShapeMask, TensorField2D};
use crate::geometry::Geometry;
use crate::mace::AgentOverrides;

/// How the bending, transverse, and shear terms are assigned to components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomLayout {
    /// `eps_yy = -nu eps_xx` and a parabolic shear profile. This is the
    /// textbook end-loaded beam; its plane-stress stress field satisfies
    /// equilibrium and is traction free on the long faces.
    Equilibrated,
    /// Transverse and shear rows swapped: the parabola sits in `eps_yy` and
    /// `eps_xy = -nu eps_xx`. The resulting stress does not satisfy
    /// equilibrium.
    Swapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamPhantomParams {
    /// Beam length along x, pixels.
    pub length: usize,
    /// Beam width along y, pixels.
    pub width: usize,
    /// Largest `|eps_xx|`, microstrain. Fixes the load.
    pub peak_strain_microstrain: f64,
    pub layout: PhantomLayout,
}

impl Default for BeamPhantomParams {
    fn default() -> Self {
        Self {
            length: 91,
            width: 45,
            peak_strain_microstrain: 300.0,
            layout: PhantomLayout::Equilibrated,
        }
    }
}

/// Derived beam constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConstants {
    pub second_moment: f64,
    pub load: f64,
    /// Top-left pixel of the beam rectangle.
    pub origin: (usize, usize),
}

impl BeamPhantomParams {
    pub fn validate(&self, grid: (usize, usize)) -> Result<()> {
        if self.length < 2 || self.width < 2 {
            return Err(Error::invalid("phantom", "beam needs at least 2x2 pixels"));
        }
        if self.width > grid.0 || self.length > grid.1 {
            return Err(Error::invalid(
                "phantom",
                format!("beam {}x{} exceeds grid {}x{}", self.width, self.length, grid.0, grid.1),
            ));
        }
        if !(self.peak_strain_microstrain.is_finite() && self.peak_strain_microstrain >= 0.0) {
            return Err(Error::invalid(
                "phantom.peak_strain_microstrain",
                format!("must be finite and >= 0, got {}", self.peak_strain_microstrain),
            ));
        }
        Ok(())
    }

    pub fn constants(&self, grid: (usize, usize), youngs_modulus: f64) -> BeamConstants {
        let l = self.length as f64;
        let h = self.width as f64;
        let second_moment = h * h * h / 12.0;
        let load = self.peak_strain_microstrain * 1e-6 * youngs_modulus * second_moment / (l * h / 2.0);
        BeamConstants {
            second_moment,
            load,
            origin: ((grid.0 - self.width) / 2, (grid.1 - self.length) / 2),
        }
    }
}

/// Beam-local coordinates of pixel `(row, col)` relative to `origin`.
fn local_coords(p: &BeamPhantomParams, origin: (usize, usize), row: usize, col: usize) -> (f64, f64) {
    let l = p.length as f64;
    let h = p.width as f64;
    let x = (col - origin.1) as f64 * (l / (l - 1.0));
    let half = (p.width - 1) as f64 / 2.0;
    let y = ((row - origin.0) as f64 - half) * (h / (h - 1.0));
    (x, y)
}

/// Ground-truth strain and the beam mask on the geometry's grid.
pub fn cantilever_strain(
    params: &BeamPhantomParams,
    youngs_modulus: f64,
    poisson_ratio: f64,
    geometry: &Geometry,
) -> Result<(TensorField2D, ShapeMask)> {
    let grid = geometry.grid_shape();
    params.validate(grid)?;
    let k = params.constants(grid, youngs_modulus);
    let mask = ShapeMask::rectangle(grid, k.origin.0, k.origin.1, params.width, params.length)?;
    let ei = youngs_modulus * k.second_moment;
    let bend = k.load / ei;
    let shear = -(1.0 + poisson_ratio) * k.load / (2.0 * ei);
    let l = params.length as f64;
    let half_h = params.width as f64 / 2.0;

    let mut axial = Array2::zeros(grid);
    let mut lateral = Array2::zeros(grid);
    let mut parabolic = Array2::zeros(grid);
    for ((r, c), _) in mask.values().indexed_iter().filter(|(_, &m)| m) {
        let (x, y) = local_coords(params, k.origin, r, c);
        let base = bend * (l - x) * y;
        axial[[r, c]] = base;
        lateral[[r, c]] = -poisson_ratio * base;
        parabolic[[r, c]] = shear * (half_h * half_h - y * y);
    }
    let field = match params.layout {
        PhantomLayout::Equilibrated => TensorField2D::new(axial, lateral, parabolic)?,
        PhantomLayout::Swapped => TensorField2D::new(axial, parabolic, lateral)?,
    };
    Ok((field, mask))
}

/// One canonical simulation-and-reconstruction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Views kept from the full sinogram by uniform index stride.
    pub views: usize,
    pub noise_microstrain: f64,
    pub seed: u64,
    pub equilibrium: bool,
    /// Replaces the shared agent strengths for this run.
    #[serde(default, skip_serializing_if = "AgentOverrides::is_empty")]
    pub agents: AgentOverrides,
}

/// Seed shared by the reference runs.
pub const REFERENCE_SEED: u64 = 20_240_311;

/// The four reference runs.
pub fn reference_experiments() -> Vec<ExperimentConfig> {
    let run = |name: &str, views, noise, equilibrium| ExperimentConfig {
        name: name.to_string(),
        views,
        noise_microstrain: noise,
        seed: REFERENCE_SEED,
        equilibrium,
        agents: AgentOverrides::default(),
    };
    vec![
        run("baseline-50", 50, 0.0, false),
        run("monstr-50", 50, 0.0, true),
        run("monstr-10", 10, 0.0, true),
        run("monstr-50-noisy", 50, 10.0, true),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generate(layout: PhantomLayout) -> (TensorField2D, ShapeMask, BeamConstants) {
        let g = Geometry::reference();
        let p = BeamPhantomParams {
            layout,
            ..Default::default()
        };
        let (e, m) = cantilever_strain(&p, 1.0, 0.3, &g).unwrap();
        (e, m, p.constants(g.grid_shape(), 1.0))
    }

    #[test]
    fn placement_and_peak() {
        let (e, m, k) = generate(PhantomLayout::Equilibrated);
        assert_eq!(k.origin, (41, 18));
        assert_eq!(m.count(), 45 * 91);
        let peak = e.xx.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!((peak - 300e-6).abs() < 1e-18);
        assert!(e.xx.iter().zip(m.values()).all(|(&v, &i)| i || v == 0.0));
    }

    #[test]
    fn free_end_and_faces() {
        for layout in [PhantomLayout::Equilibrated, PhantomLayout::Swapped] {
            let (e, _, _) = generate(layout);
            let (transverse, shear) = match layout {
                PhantomLayout::Equilibrated => (&e.yy, &e.xy),
                PhantomLayout::Swapped => (&e.xy, &e.yy),
            };
            for r in 41..86 {
                assert_eq!(e.xx[[r, 108]], 0.0);
                assert_eq!(transverse[[r, 108]], 0.0);
            }
            for c in 18..109 {
                assert_eq!(shear[[41, c]], 0.0);
                assert_eq!(shear[[85, c]], 0.0);
                assert_eq!(e.xx[[63, c]], 0.0);
                let col_max = (41..86).map(|r| shear[[r, c]].abs()).fold(0.0, f64::max);
                assert_eq!(shear[[63, c]].abs(), col_max);
            }
        }
    }

    #[test]
    fn symmetries() {
        let (e, _, _) = generate(PhantomLayout::Swapped);
        for r in 41..86 {
            let m = 41 + 85 - r;
            for c in 18..109 {
                assert_eq!(e.xx[[r, c]], -e.xx[[m, c]]);
                assert_eq!(e.yy[[r, c]], e.yy[[m, c]]);
                assert_eq!(e.xy[[r, c]], -e.xy[[m, c]]);
                assert_eq!(e.xy[[r, c]], -0.3 * e.xx[[r, c]]);
            }
        }
    }

    #[test]
    fn too_large() {
        let g = Geometry::uniform(40, 128, 128, 4).unwrap();
        assert!(cantilever_strain(&BeamPhantomParams::default(), 1.0, 0.3, &g).is_err());
    }

    #[test]
    fn reference_list() {
        let e = reference_experiments();
        let names: Vec<_> = e.iter().map(|x| x.name.as_str()).collect();
        assert_eq!(names, ["baseline-50", "monstr-50", "monstr-10", "monstr-50-noisy"]);
        assert_eq!(e[2].views, 10);
        assert_eq!(e[3].noise_microstrain, 10.0);
        assert!(!e[0].equilibrium && e[1].equilibrium);
    }
}
