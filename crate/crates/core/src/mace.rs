//! The consensus loop tying the four agents together.
//!
//! Each iteration runs
//!
//! ```text
//! p~ <- F_d(Proj(s) - u)
//! s  <- F_s(F_e(F_r(p~ + u)))
//! u  <- u + p~ - Proj(s)
//! ```
//!
//! starting from `s = 0`, `u = 0`, and returns the strain `C^-1 s`.
//!
//! The reconstruction prior is scale dependent while the data are not, so
//! `alpha_v` and `sigma_x` are given relative to the stress scale of the
//! measurement, `E * rms(<eps>)` over valid rays. The other two strengths are
//! already scale free.

use std::time::Instant;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::agents::{
    detector_agent, equilibrium_agent, reconstruction_agent, support_agent, EquilibriumOperator, EquilibriumSettings,
    QggmrfPrior, ReconSettings,
};
use crate::elasticity::ElasticityModel;
use crate::error::{Error, Result};
use crate::field::{ShapeMask, TensorField2D};
use crate::forward_model::compute_weights;
use crate::projector::Projector;
use crate::sinogram::{StrainSinogram, VirtualSinogramTensor};

/// Prior scale: a fixed multiple of the stress scale, or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaX {
    Auto(AutoTag),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

/// Multiple of the stress scale used when `sigma_x` is `"auto"`.
pub const AUTO_SIGMA_X: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QggmrfParams {
    pub p: f64,
    pub q: f64,
    pub t: f64,
    pub sigma_x: SigmaX,
}

/// Which equilibrium equations the equilibrium agent enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumRegion {
    /// Only equations whose stencil lies inside the sample.
    Support,
    /// Every equation on the grid.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    pub alpha_y: f64,
    /// Relative to the stress scale.
    pub alpha_v: f64,
    pub alpha_e: f64,
    pub qggmrf: QggmrfParams,
    pub recon_inner_iters: usize,
    pub recon_cg_steps: usize,
    pub equil_sweeps: usize,
    pub equilibrium_region: EquilibriumRegion,
    pub cg_tol: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            alpha_y: 0.2,
            alpha_v: 70.0,
            alpha_e: 0.1,
            qggmrf: QggmrfParams {
                p: 2.0,
                q: 1.2,
                t: 1.0,
                sigma_x: SigmaX::Auto(AutoTag::Auto),
            },
            recon_inner_iters: 10,
            recon_cg_steps: 3,
            equil_sweeps: 3,
            equilibrium_region: EquilibriumRegion::Support,
            cg_tol: 1e-10,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be > 0, got {v}")))
            }
        };
        positive("alpha_y", self.alpha_y)?;
        positive("alpha_v", self.alpha_v)?;
        positive("alpha_e", self.alpha_e)?;
        positive("cg_tol", self.cg_tol)?;
        if let SigmaX::Fixed(s) = self.qggmrf.sigma_x {
            positive("qggmrf.sigma_x", s)?;
        }
        self.prior(1.0).validate()?;
        if self.recon_inner_iters == 0 {
            return Err(Error::invalid("recon_inner_iters", "must be >= 1"));
        }
        Ok(())
    }

    /// The prior at a given stress scale.
    pub fn prior(&self, scale: f64) -> QggmrfPrior {
        let rel = match self.qggmrf.sigma_x {
            SigmaX::Auto(_) => AUTO_SIGMA_X,
            SigmaX::Fixed(s) => s,
        };
        QggmrfPrior {
            p: self.qggmrf.p,
            q: self.qggmrf.q,
            t: self.qggmrf.t,
            sigma_x: rel * scale,
        }
    }

    pub fn recon_settings(&self, scale: f64) -> ReconSettings {
        ReconSettings {
            alpha_v: self.alpha_v * scale,
            prior: self.prior(scale),
            inner_iters: self.recon_inner_iters,
            cg_steps: self.recon_cg_steps,
        }
    }

    pub fn equilibrium_settings(&self) -> EquilibriumSettings {
        EquilibriumSettings {
            alpha_e: self.alpha_e,
            sweeps: self.equil_sweeps,
            cg_tol: self.cg_tol,
        }
    }
}

/// Per-run replacements for the strength parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_e: Option<f64>,
}

impl AgentOverrides {
    pub fn is_empty(&self) -> bool {
        self.alpha_y.is_none() && self.alpha_v.is_none() && self.alpha_e.is_none()
    }

    pub fn apply(&self, base: &AgentParams) -> AgentParams {
        AgentParams {
            alpha_y: self.alpha_y.unwrap_or(base.alpha_y),
            alpha_v: self.alpha_v.unwrap_or(base.alpha_v),
            alpha_e: self.alpha_e.unwrap_or(base.alpha_e),
            ..*base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaceParams {
    pub max_iters: usize,
}

impl Default for MaceParams {
    fn default() -> Self {
        Self { max_iters: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// `None` when `p~` vanished on every valid ray.
    pub consensus_nrmse: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MaceState {
    pub sigma: TensorField2D,
    pub u: VirtualSinogramTensor,
    pub iteration: usize,
    pub trace: Vec<TraceEntry>,
    /// Stress scale the relative parameters were resolved against.
    pub stress_scale: f64,
}

impl MaceState {
    /// Trace as CSV with a header row.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,consensus_nrmse,wall_seconds\n");
        for e in &self.trace {
            let v = e
                .consensus_nrmse
                .map_or_else(|| "nan".to_string(), |v| format!("{v:e}"));
            s.push_str(&format!("{},{},{:.6}\n", e.iteration, v, e.wall_seconds));
        }
        s
    }
}

/// `|p - q| / |p|` over all components, restricted to `valid` rays if given.
/// Returns `None` when the denominator vanishes.
pub fn consensus_nrmse(
    p: &VirtualSinogramTensor,
    proj_sigma: &VirtualSinogramTensor,
    valid: Option<&Array2<bool>>,
) -> Result<Option<f64>> {
    if p.shape() != proj_sigma.shape() {
        return Err(Error::shape_mismatch(p.shape(), proj_sigma.shape()));
    }
    if let Some(v) = valid {
        if v.dim() != p.shape() {
            return Err(Error::shape_mismatch(p.shape(), v.dim()));
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in p.components().into_iter().zip(proj_sigma.components()) {
        for ((idx, &x), &y) in a.indexed_iter().zip(b.iter()) {
            if valid.is_none_or(|v| v[idx]) {
                num += (x - y) * (x - y);
                den += x * x;
            }
        }
    }
    Ok((den > 0.0).then(|| (num / den).sqrt()))
}

/// `E * rms(<eps>)` over valid rays; falls back to `E` when the data vanish.
pub fn stress_scale(sinogram: &StrainSinogram, model: &ElasticityModel) -> f64 {
    let mean = sinogram.mean_strain();
    let (mut sum, mut n) = (0.0, 0usize);
    Zip::from(&mean).and(sinogram.valid()).for_each(|&e, &ok| {
        if ok {
            sum += e * e;
            n += 1;
        }
    });
    let rms = if n > 0 { (sum / n as f64).sqrt() } else { 0.0 };
    if rms > 0.0 {
        model.youngs_modulus() * rms
    } else {
        model.youngs_modulus()
    }
}

fn project_tensor(projector: &Projector, s: &TensorField2D) -> VirtualSinogramTensor {
    let [a, b, c] = s.components().map(|f| projector.project_unchecked(f));
    VirtualSinogramTensor { xx: a, yy: b, xy: c }
}

/// Runs the consensus loop and returns the strain estimate with the final
/// state. Disabling the equilibrium agent gives the baseline method.
pub fn run_monstr(
    sinogram: &StrainSinogram,
    mask: &ShapeMask,
    model: &ElasticityModel,
    params: &AgentParams,
    max_iters: usize,
    enable_equilibrium: bool,
    projector: &Projector,
) -> Result<(TensorField2D, MaceState)> {
    params.validate()?;
    if max_iters == 0 {
        return Err(Error::invalid("max_iters", "must be >= 1"));
    }
    let geometry = sinogram.geometry();
    projector.check_same_geometry(geometry)?;
    geometry.check_grid(mask.shape())?;

    let weights = compute_weights(geometry, model);
    let scale = stress_scale(sinogram, model);
    let recon = params.recon_settings(scale);
    let equil = params.equilibrium_settings();
    let equil_op = match params.equilibrium_region {
        EquilibriumRegion::Support => EquilibriumOperator::within_support(mask),
        EquilibriumRegion::Grid => EquilibriumOperator::full_grid(mask.shape()),
    };
    let valid = sinogram.valid();
    let data_weight = sinogram.valid_f64();

    let mut state = MaceState {
        sigma: TensorField2D::zeros(geometry.grid_shape()),
        u: VirtualSinogramTensor::zeros(geometry.sinogram_shape()),
        iteration: 0,
        trace: Vec::with_capacity(max_iters),
        stress_scale: scale,
    };
    let mut proj_sigma = VirtualSinogramTensor::zeros(geometry.sinogram_shape());
    let start = Instant::now();
    for it in 0..max_iters {
        let p0 = proj_sigma.combine(1.0, &state.u, -1.0);
        let p_tilde = detector_agent(&p0, sinogram, &weights, params.alpha_y)?;
        let target = p_tilde.combine(1.0, &state.u, 1.0);
        let mut sigma = reconstruction_agent(&target, &state.sigma, projector, &data_weight, Some(mask), &recon)?;
        if enable_equilibrium {
            sigma = equilibrium_agent(&sigma, &equil_op, equil)?;
        }
        sigma = support_agent(&sigma, mask)?;
        proj_sigma = project_tensor(projector, &sigma);

        let mut u = state.u.combine(1.0, &p_tilde, 1.0).combine(1.0, &proj_sigma, -1.0);
        for comp in [&mut u.xx, &mut u.yy, &mut u.xy] {
            Zip::from(comp).and(valid).for_each(|x, &ok| {
                if !ok {
                    *x = 0.0;
                }
            });
        }
        if !sigma.is_finite() || !u.is_finite() {
            return Err(Error::Divergence { iteration: it + 1 });
        }
        let c = consensus_nrmse(&p_tilde, &proj_sigma, Some(valid))?;
        state.sigma = sigma;
        state.u = u;
        state.iteration = it + 1;
        state.trace.push(TraceEntry {
            iteration: it + 1,
            consensus_nrmse: c,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        log::debug!("iteration {}: consensus nrmse {:?}", it + 1, c);
    }
    let strain = model.stress_to_strain(&state.sigma);
    Ok((strain, state))
}
