//! End-to-end pipeline: simulate inputs, reconstruct, and evaluate.
//!
//! On-disk layout for one experiment directory:
//!
//! ```text
//! <name>/truth.mfld  mask.mfld  sinogram.mfld  manifest.json
//! <name>/monstr/ or <name>/baseline/
//!     strain.mfld  trace.csv  manifest.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::elasticity::ElasticityModel;
use crate::error::Result;
use crate::field::{ShapeMask, TensorField2D};
use crate::forward_model::{add_noise, subsample_views, synthesize_strain_sinogram};
use crate::io;
use crate::mace::{run_monstr, AgentParams, MaceState};
use crate::metrics::{tensor_nrmse, NrmseReport, NrmseTable};
use crate::phantom::{cantilever_strain, ExperimentConfig};
use crate::projector::Projector;
use crate::sinogram::StrainSinogram;

pub const TRUTH_FILE: &str = "truth.mfld";
pub const MASK_FILE: &str = "mask.mfld";
pub const SINOGRAM_FILE: &str = "sinogram.mfld";
pub const STRAIN_FILE: &str = "strain.mfld";
pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Inputs of one experiment.
#[derive(Debug, Clone)]
pub struct SimulatedRun {
    pub experiment: ExperimentConfig,
    pub truth: TensorField2D,
    pub mask: ShapeMask,
    pub sinogram: StrainSinogram,
}

/// Everything generated from one config.
#[derive(Debug, Clone)]
pub struct Simulation {
    /// Noiseless sinogram at the full configured view count.
    pub clean: StrainSinogram,
    pub runs: Vec<SimulatedRun>,
}

/// Generates the phantom once and derives every experiment's sinogram from
/// the same clean data: noise first, then view subsampling.
pub fn simulate(cfg: &Config) -> Result<Simulation> {
    let geometry = cfg.geometry()?;
    let model = cfg.elasticity()?;
    let (truth, mask) = cantilever_strain(&cfg.phantom, model.youngs_modulus(), model.poisson_ratio(), &geometry)?;
    let projector = Projector::new(&geometry);
    let clean = synthesize_strain_sinogram(&truth, &mask, &projector)?;
    let runs = cfg
        .experiments
        .iter()
        .map(|e| {
            let noisy = add_noise(&clean, e.noise_microstrain, e.seed)?;
            let sinogram = subsample_views(&noisy, e.views)?;
            Ok(SimulatedRun {
                experiment: e.clone(),
                truth: truth.clone(),
                mask: mask.clone(),
                sinogram,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation { clean, runs })
}

pub fn write_manifest(dir: &Path, manifest: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

/// Writes one experiment's inputs into `dir`.
pub fn write_inputs(dir: &Path, run: &SimulatedRun, cfg: &Config) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_tensor(&dir.join(TRUTH_FILE), &run.truth)?;
    io::write_mask(&dir.join(MASK_FILE), &run.mask)?;
    io::write_sinogram(&dir.join(SINOGRAM_FILE), &run.sinogram)?;
    write_manifest(
        dir,
        &json!({
            "command": "simulate",
            "experiment": run.experiment,
            "seed": run.experiment.seed,
            "files": {"truth": TRUTH_FILE, "mask": MASK_FILE, "sinogram": SINOGRAM_FILE},
            "config": cfg,
        }),
    )
}

/// Label of the output directory for a reconstruction.
pub fn method_label(enable_equilibrium: bool) -> &'static str {
    if enable_equilibrium {
        "monstr"
    } else {
        "baseline"
    }
}

/// Runs the consensus loop on one sinogram.
pub fn reconstruct(
    sinogram: &StrainSinogram,
    mask: &ShapeMask,
    model: &ElasticityModel,
    params: &AgentParams,
    max_iters: usize,
    enable_equilibrium: bool,
) -> Result<(TensorField2D, MaceState)> {
    let projector = Projector::new(sinogram.geometry());
    run_monstr(sinogram, mask, model, params, max_iters, enable_equilibrium, &projector)
}

pub fn write_reconstruction(dir: &Path, strain: &TensorField2D, state: &MaceState, manifest: &Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_tensor(&dir.join(STRAIN_FILE), strain)?;
    fs::write(dir.join(TRACE_FILE), state.trace_csv())?;
    write_manifest(dir, manifest)
}

/// Summary of one suite run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub equilibrium: bool,
    pub views: usize,
    pub noise_microstrain: f64,
    pub nrmse: NrmseReport,
    /// Consensus values per iteration; `None` where undefined.
    pub trace: Vec<Option<f64>>,
    pub seconds: f64,
    pub directory: PathBuf,
}

impl RunSummary {
    pub fn trace_first(&self) -> Option<f64> {
        self.trace.first().copied().flatten()
    }

    pub fn trace_last(&self) -> Option<f64> {
        self.trace.last().copied().flatten()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub runs: Vec<RunSummary>,
}

impl SuiteReport {
    pub fn table(&self) -> NrmseTable {
        let mut t = NrmseTable::default();
        for r in &self.runs {
            t.push(r.name.clone(), r.nrmse);
        }
        t
    }

    pub fn run(&self, name: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.name == name)
    }
}

/// Simulates, reconstructs, and evaluates every configured experiment,
/// writing all artifacts below `out_dir`.
pub fn run_suite(cfg: &Config, out_dir: &Path) -> Result<SuiteReport> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config.json"), cfg.to_json() + "\n")?;
    let model = cfg.elasticity()?;
    let mut runs = Vec::new();
    for sim in simulate(cfg)?.runs {
        let e = &sim.experiment;
        let dir = out_dir.join(&e.name);
        write_inputs(&dir, &sim, cfg)?;
        let params = cfg.agents_for(e);
        log::info!("running {}", e.name);
        let start = std::time::Instant::now();
        let (strain, state) = reconstruct(
            &sim.sinogram,
            &sim.mask,
            &model,
            &params,
            cfg.mace.max_iters,
            e.equilibrium,
        )?;
        let seconds = start.elapsed().as_secs_f64();
        let nrmse = tensor_nrmse(&strain, &sim.truth, &sim.mask)?;
        let rdir = dir.join(method_label(e.equilibrium));
        write_reconstruction(
            &rdir,
            &strain,
            &state,
            &json!({
                "command": "reconstruct",
                "inputs": {"sinogram": format!("../{SINOGRAM_FILE}"), "mask": format!("../{MASK_FILE}")},
                "equilibrium": e.equilibrium,
                "agents": params,
                "mace": cfg.mace,
                "elasticity": cfg.elasticity,
                "stress_scale": state.stress_scale,
                "nrmse": nrmse,
            }),
        )?;
        runs.push(RunSummary {
            name: e.name.clone(),
            equilibrium: e.equilibrium,
            views: e.views,
            noise_microstrain: e.noise_microstrain,
            nrmse,
            trace: state.trace.iter().map(|t| t.consensus_nrmse).collect(),
            seconds,
            directory: dir,
        });
    }
    let report = SuiteReport { runs };
    let table = report.table();
    fs::write(out_dir.join("report.txt"), table.to_string())?;
    fs::write(out_dir.join("report.csv"), table.to_csv())?;
    Ok(report)
}
