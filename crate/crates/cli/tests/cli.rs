use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use monstr::config::Config;
use monstr::mace::MaceParams;
use monstr::phantom::BeamPhantomParams;
use monstr::TensorField2D;
use ndarray::Array2;

fn monstr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monstr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn small_config() -> Config {
    let mut c = Config::reference();
    c.geometry.grid_rows = 32;
    c.geometry.grid_cols = 32;
    c.geometry.num_detector_cols = 32;
    c.geometry.num_views = 20;
    c.phantom = BeamPhantomParams {
        length: 23,
        width: 11,
        ..Default::default()
    };
    c.mace = MaceParams { max_iters: 4 };
    for e in &mut c.experiments {
        e.views = e.views.min(20);
    }
    c
}

fn write_config(dir: &Path, cfg: &Config) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, cfg.to_json()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path) -> (PathBuf, PathBuf) {
    let cfg = write_config(dir, &small_config());
    let out = dir.join("sim");
    ok(&monstr(&["simulate", "--config", s(&cfg), "--out", s(&out)]));
    (cfg, out)
}

#[test]
fn config_command_prints_reference() {
    let out = monstr(&["config"]);
    ok(&out);
    let cfg = Config::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.experiments.len(), 4);
}

#[test]
fn simulate_writes_four_experiments_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = simulate(dir.path());
    let names = ["baseline-50", "monstr-50", "monstr-10", "monstr-50-noisy"];
    for n in names {
        for f in ["truth.mfld", "mask.mfld", "sinogram.mfld", "manifest.json"] {
            assert!(out.join(n).join(f).exists(), "{n}/{f}");
        }
    }
    assert!(out.join("clean_sinogram.mfld").exists());
    let again = dir.path().join("sim2");
    ok(&monstr(&["simulate", "--config", s(&cfg), "--out", s(&again)]));
    for n in names {
        for f in ["truth.mfld", "mask.mfld", "sinogram.mfld", "manifest.json"] {
            assert_eq!(
                fs::read(out.join(n).join(f)).unwrap(),
                fs::read(again.join(n).join(f)).unwrap()
            );
        }
    }
}

#[test]
fn missing_key_is_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&small_config().to_json()).unwrap();
    v["elasticity"].as_object_mut().unwrap().remove("poisson_ratio");
    let p = dir.path().join("bad.json");
    fs::write(&p, v.to_string()).unwrap();
    let out = monstr(&["simulate", "--config", s(&p), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("elasticity.poisson_ratio"));

    v["elasticity"]["poisson_ratio"] = 0.3.into();
    v["agents"]["alpha_z"] = 1.0.into();
    fs::write(&p, v.to_string()).unwrap();
    let out = monstr(&["simulate", "--config", s(&p), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha_z"));
}

#[test]
fn reconstruct_evaluate_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, sim) = simulate(dir.path());
    let exp = sim.join("monstr-50");
    let out = dir.path().join("recon");
    let args = |extra: &[&str]| {
        let mut a = vec![
            "reconstruct".to_string(),
            "--sinogram".into(),
            s(&exp.join("sinogram.mfld")).into(),
            "--mask".into(),
            s(&exp.join("mask.mfld")).into(),
            "--config".into(),
            s(&cfg).into(),
            "--out".into(),
            s(&out).into(),
        ];
        a.extend(extra.iter().map(|x| x.to_string()));
        a
    };
    let run = |extra: &[&str]| {
        let a = args(extra);
        monstr(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    ok(&run(&[]));
    ok(&run(&["--no-equilibrium"]));
    for label in ["monstr", "baseline"] {
        let d = out.join(label);
        assert!(d.join("strain.mfld").exists() && d.join("manifest.json").exists());
        let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
        let lines: Vec<&str> = trace.lines().collect();
        assert_eq!(lines[0], "iteration,consensus_nrmse,wall_seconds");
        assert_eq!(lines.len(), 5);
        let col = |l: &str| l.split(',').nth(1).unwrap().parse::<f64>().unwrap();
        assert!(col(lines[4]) < col(lines[1]));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("baseline/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["equilibrium"], false);
    assert!(manifest["argv"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a == "--no-equilibrium"));

    let csv = dir.path().join("table.csv");
    let ev = monstr(&[
        "evaluate",
        "--recon",
        s(&exp.join("truth.mfld")),
        "--truth",
        s(&exp.join("truth.mfld")),
        "--mask",
        s(&exp.join("mask.mfld")),
        "--out",
        s(&csv),
    ]);
    ok(&ev);
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().nth(1).unwrap(), "run,0,0,0,0");

    let ev = monstr(&[
        "evaluate",
        "--recon",
        s(&out.join("monstr/strain.mfld")),
        "--truth",
        s(&exp.join("truth.mfld")),
        "--mask",
        s(&exp.join("mask.mfld")),
    ]);
    ok(&ev);
    assert!(out.join("monstr/nrmse.csv").exists());
}

#[test]
fn shape_mismatches_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, sim) = simulate(dir.path());
    let other = dir.path().join("other.mfld");
    monstr::io::write_mask(&other, &monstr::ShapeMask::full((16, 16))).unwrap();
    let exp = sim.join("monstr-50");
    let out = monstr(&[
        "reconstruct",
        "--sinogram",
        s(&exp.join("sinogram.mfld")),
        "--mask",
        s(&other),
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let small = dir.path().join("small.mfld");
    monstr::io::write_tensor(&small, &TensorField2D::zeros((16, 16))).unwrap();
    let out = monstr(&[
        "evaluate",
        "--recon",
        s(&small),
        "--truth",
        s(&exp.join("truth.mfld")),
        "--mask",
        s(&exp.join("mask.mfld")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("32x32") && err.contains("16x16"), "{err}");
}

#[test]
fn render_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.mfld");
    monstr::io::write_tensor(&zero, &TensorField2D::zeros((6, 5))).unwrap();
    let img = dir.path().join("zero.pgm");
    ok(&monstr(&[
        "render",
        "--field",
        s(&zero),
        "--out",
        s(&img),
        "--range=-1,1",
    ]));
    let bytes = fs::read(&img).unwrap();
    let header = b"P5\n5 6\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert!(bytes[header.len()..].iter().all(|&b| b == 128));

    let field = Array2::from_shape_fn((6, 5), |(r, c)| (r as f64 - 2.5) * 1e-4 + c as f64 * 3e-5);
    let base = TensorField2D::new(field.clone(), field.clone(), field.clone()).unwrap();
    let f1 = dir.path().join("f1.mfld");
    let f10 = dir.path().join("f10.mfld");
    monstr::io::write_tensor(&f1, &base).unwrap();
    monstr::io::write_tensor(&f10, &base.scaled(10.0)).unwrap();
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    let c = dir.path().join("c.ppm");
    let common = ["--component", "xy", "--range=-0.004,0.004", "--palette", "diverging"];
    let render = |field: &Path, out: &Path, extra: &[&str]| {
        let mut args = vec!["render", "--field", s(field), "--out", s(out)];
        args.extend(common);
        args.extend(extra);
        ok(&monstr(&args));
    };
    render(&f1, &a, &["--scale", "10"]);
    render(&f10, &b, &[]);
    render(&f10, &c, &[]);
    let (a, b, c) = (fs::read(a).unwrap(), fs::read(b).unwrap(), fs::read(c).unwrap());
    assert!(a.starts_with(b"P6\n5 6\n255\n"));
    assert_eq!(a, b);
    assert_eq!(b, c);

    let out = monstr(&[
        "render",
        "--field",
        s(&f1),
        "--out",
        s(&dir.path().join("x.pgm")),
        "--component",
        "zz",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, sim) = simulate(dir.path());
    let exp = sim.join("monstr-10");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        ok(&monstr(&[
            "--threads",
            threads,
            "reconstruct",
            "--sinogram",
            s(&exp.join("sinogram.mfld")),
            "--mask",
            s(&exp.join("mask.mfld")),
            "--config",
            s(&cfg),
            "--out",
            s(&out),
        ]));
        outputs.push(fs::read(out.join("monstr/strain.mfld")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
