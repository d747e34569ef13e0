//! `monstr` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or file-format error, 2 config or schema
//! error, 3 geometry or shape mismatch, 4 numerical divergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use monstr::config::Config;
use monstr::io::{self, Kind};
use monstr::metrics::{tensor_nrmse, NrmseTable};
use monstr::render::{render, symmetric_range, Palette};
use monstr::suite::{self, method_label};
use monstr::Error;

#[derive(Parser)]
#[command(
    name = "monstr",
    version,
    about = "Strain tensor tomography with a multi-agent consensus solver"
)]
struct Cli {
    /// Worker threads for internal parallelism (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate phantom, mask and sinograms for every configured experiment.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a strain tensor field from a sinogram.
    Reconstruct {
        #[arg(long)]
        sinogram: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Apply this experiment's agent overrides from the config.
        #[arg(long)]
        experiment: Option<String>,
        /// Output directory; results go into a `monstr` or `baseline` subdirectory.
        #[arg(long)]
        out: PathBuf,
        /// Run the baseline without the equilibrium agent.
        #[arg(long)]
        no_equilibrium: bool,
        /// Override the configured iteration count.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Compare a reconstruction against ground truth.
    Evaluate {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Row label in the table.
        #[arg(long, default_value = "run")]
        name: String,
        /// CSV destination. Defaults to `nrmse.csv` beside the reconstruction.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one component of a field as PGM or PPM.
    Render {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Component name: xx, yy, xy for tensors, value for scalars.
        #[arg(long, default_value = "xx")]
        component: String,
        /// Multiply values before mapping.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Value range `LO,HI` mapped to 0..255. Defaults to symmetric about zero.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: Option<(f64, f64)>,
        #[arg(long, value_enum, default_value_t = PaletteArg::Gray)]
        palette: PaletteArg,
    },
    /// Run every experiment end to end and write a combined report.
    Suite {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the reference configuration as JSON.
    Config,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON config. The reference configuration is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> monstr::Result<Config> {
        let cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::reference(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PaletteArg {
    Gray,
    Diverging,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((lo, hi))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::InvalidParameter { .. }) => 2,
        Some(Error::GeometryMismatch { .. } | Error::DimensionMismatch(_)) => 3,
        Some(Error::Divergence { .. } | Error::NonFinite { .. }) => 4,
        _ => 1,
    }
}

fn simulate(cfg: &Config, out: &Path) -> anyhow::Result<()> {
    let sim = suite::simulate(cfg)?;
    fs::create_dir_all(out)?;
    io::write_sinogram(&out.join("clean_sinogram.mfld"), &sim.clean)?;
    fs::write(out.join("config.json"), cfg.to_json() + "\n")?;
    suite::write_manifest(
        out,
        &json!({
            "command": "simulate",
            "files": {"clean_sinogram": "clean_sinogram.mfld", "config": "config.json"},
            "experiments": cfg.experiments.iter().map(|e| &e.name).collect::<Vec<_>>(),
            "config": cfg,
        }),
    )?;
    for run in &sim.runs {
        let dir = out.join(&run.experiment.name);
        suite::write_inputs(&dir, run, cfg)?;
        println!("{}", dir.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn reconstruct(
    sinogram_path: &Path,
    mask_path: &Path,
    config: &ConfigArg,
    experiment: Option<&str>,
    out: &Path,
    no_equilibrium: bool,
    iterations: Option<usize>,
) -> anyhow::Result<()> {
    let cfg = config.load()?;
    let sinogram = io::read_sinogram(sinogram_path).with_context(|| format!("reading {}", sinogram_path.display()))?;
    let mask = io::read_mask(mask_path).with_context(|| format!("reading {}", mask_path.display()))?;
    let params = match experiment {
        Some(name) => match cfg.experiment(name) {
            Some(e) => cfg.agents_for(e),
            None => {
                return Err(Error::Config {
                    path: "experiments".into(),
                    message: format!("no experiment named `{name}`"),
                }
                .into())
            }
        },
        None => cfg.agents,
    };
    let max_iters = iterations.unwrap_or(cfg.mace.max_iters);
    let model = cfg.elasticity()?;
    let enable = !no_equilibrium;
    let (strain, state) = suite::reconstruct(&sinogram, &mask, &model, &params, max_iters, enable)?;
    let dir = out.join(method_label(enable));
    let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let mut rerun = vec![
        "monstr".to_string(),
        "reconstruct".into(),
        format!("--sinogram={}", abs(sinogram_path).display()),
        format!("--mask={}", abs(mask_path).display()),
        format!("--out={}", out.display()),
        format!("--iterations={max_iters}"),
    ];
    if let Some(p) = &config.config {
        rerun.push(format!("--config={}", abs(p).display()));
    }
    if let Some(e) = experiment {
        rerun.push(format!("--experiment={e}"));
    }
    if no_equilibrium {
        rerun.push("--no-equilibrium".into());
    }
    suite::write_reconstruction(
        &dir,
        &strain,
        &state,
        &json!({
            "command": "reconstruct",
            "argv": rerun,
            "equilibrium": enable,
            "iterations": max_iters,
            "agents": params,
            "elasticity": cfg.elasticity,
            "stress_scale": state.stress_scale,
        }),
    )?;
    if let (Some(first), Some(last)) = (
        state.trace.first().and_then(|t| t.consensus_nrmse),
        state.trace.last().and_then(|t| t.consensus_nrmse),
    ) {
        log::info!("consensus nrmse {first:.3e} -> {last:.3e}");
    }
    println!("{}", dir.display());
    Ok(())
}

fn evaluate(recon: &Path, truth: &Path, mask: &Path, name: &str, out: Option<&Path>) -> anyhow::Result<()> {
    let est = io::read_tensor(recon).with_context(|| format!("reading {}", recon.display()))?;
    let gt = io::read_tensor(truth).with_context(|| format!("reading {}", truth.display()))?;
    let mask = io::read_mask(mask).with_context(|| format!("reading {}", mask.display()))?;
    let report = tensor_nrmse(&est, &gt, &mask)?;
    let mut table = NrmseTable::default();
    table.push(name, report);
    print!("{table}");
    let dest = match out {
        Some(p) => p.to_path_buf(),
        None => recon.parent().unwrap_or(Path::new(".")).join("nrmse.csv"),
    };
    fs::write(&dest, table.to_csv())?;
    Ok(())
}

fn render_cmd(
    field: &Path,
    out: &Path,
    component: &str,
    scale: f64,
    range: Option<(f64, f64)>,
    palette: PaletteArg,
) -> anyhow::Result<()> {
    let file = io::read_file(field).with_context(|| format!("reading {}", field.display()))?;
    if file.header.kind == Kind::Sinogram {
        bail!(Error::Config {
            path: "component".into(),
            message: "sinogram files cannot be rendered; use a tensor or scalar field".into(),
        });
    }
    let idx = file
        .header
        .components
        .iter()
        .position(|c| c == component)
        .ok_or_else(|| Error::Config {
            path: "component".into(),
            message: format!(
                "unknown component `{component}`, expected one of {:?}",
                file.header.components
            ),
        })?;
    let values = &file.data[idx];
    let range = range.unwrap_or_else(|| symmetric_range(&values.mapv(|v| scale * v)));
    let palette = match palette {
        PaletteArg::Gray => Palette::Gray,
        PaletteArg::Diverging => Palette::Diverging,
    };
    let bytes = render(values, scale, range, palette)?;
    fs::write(out, bytes)?;
    Ok(())
}

fn run_suite(cfg: &Config, out: &Path) -> anyhow::Result<()> {
    let report = suite::run_suite(cfg, out)?;
    print!("{}", report.table());
    for r in &report.runs {
        let fmt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.3e}"));
        println!(
            "{:<18} consensus {} -> {}  ({:.1} s)",
            r.name,
            fmt(r.trace_first()),
            fmt(r.trace_last()),
            r.seconds
        );
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Simulate { config, out } => simulate(&config.load()?, &out),
        Command::Reconstruct {
            sinogram,
            mask,
            config,
            experiment,
            out,
            no_equilibrium,
            iterations,
        } => reconstruct(
            &sinogram,
            &mask,
            &config,
            experiment.as_deref(),
            &out,
            no_equilibrium,
            iterations,
        ),
        Command::Evaluate {
            recon,
            truth,
            mask,
            name,
            out,
        } => evaluate(&recon, &truth, &mask, &name, out.as_deref()),
        Command::Render {
            field,
            out,
            component,
            scale,
            range,
            palette,
        } => render_cmd(&field, &out, &component, scale, range, palette),
        Command::Suite { config, out } => run_suite(&config.load()?, &out),
        Command::Config => {
            println!("{}", Config::reference().to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
