use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};

use aerofd_core::fd::{self, FdCurve, FdSample};
use aerofd_core::io::{
    export_outputs, load_config, load_scenario, read_detections, read_frame_stats, read_tracks, write_detections,
    DetectionFile, DetectionRow, ExportInput, RunConfig,
};
use aerofd_core::model::{Detection, TrackRecord};
use aerofd_core::sim::{evaluate, generate, EvalOptions, EvalReport, ScenarioConfig};
use aerofd_core::stats::{compute_frame_stats, FrameStats};
use aerofd_core::tracker::{track_detections, Tracker};

use crate::{input, internal, EvalArgs, Failure, FdArgs, RunArgs, SimulateArgs, TrackArgs, Ui};

type CmdResult = Result<(), Failure>;

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir)
        .and_then(|_| File::create(dir.join(name)))
        .map(BufWriter::new)
        .with_context(|| format!("cannot write {}", dir.join(name).display()))
        .map_err(input)
}

struct Pipeline {
    records: Vec<TrackRecord>,
    stats: Vec<FrameStats>,
}

fn track_and_count(cfg: &RunConfig, detections: &[Detection], range: Option<(u64, u64)>) -> Result<Pipeline, Failure> {
    let mut tracker = Tracker::for_camera(cfg.tracker, &cfg.camera);
    let records = track_detections(&mut tracker, detections, range).map_err(internal)?;
    let stats = compute_frame_stats(&records, cfg.segment_length_km(), &cfg.lines, cfg.camera.fps, range).map_err(input)?;
    Ok(Pipeline { records, stats })
}

fn fit(cfg: &RunConfig, stats: &[FrameStats]) -> (Vec<FdSample>, Result<FdCurve, fd::FdError>) {
    let samples = fd::samples_from_stats(stats, cfg.fd.axis_mode);
    let curve = fd::build_curve(&samples, &cfg.fd);
    (samples, curve)
}

fn describe_curve(c: &FdCurve) -> String {
    let unbounded = if c.interior_maximum { "" } else { " (no interior maximum)" };
    format!(
        "fit {} coefficients {:?}; critical density {:.3} {}{unbounded}, max flux {:.1} {}",
        c.fit.model.kind().as_str(),
        c.fit.model.coefficients(),
        c.critical_density,
        c.axis_mode.density_unit(),
        c.max_flux,
        c.flux_unit()
    )
}

pub fn track(a: &TrackArgs, ui: Ui) -> CmdResult {
    let cfg = load_config(&a.config).map_err(input)?;
    let file = read_detections(&a.detections)
        .with_context(|| format!("reading {}", a.detections.display()))
        .map_err(input)?;
    ui.progress(format!("{} detections", file.rows.len()));
    let p = track_and_count(&cfg, &file.detections(), file.frame_range())?;
    export_outputs(
        &a.out,
        &ExportInput {
            records: Some(&p.records),
            stats: Some(&p.stats),
            ..ExportInput::default()
        },
        config_json(&cfg),
        Vec::new(),
    )
    .map_err(input)?;
    ui.summary(format!("{} track records over {} frames", p.records.len(), p.stats.len()));
    Ok(())
}

pub fn fd(a: &FdArgs, ui: Ui) -> CmdResult {
    let cfg = load_config(&a.config).map_err(input)?;
    let stats = match (&a.stats, &a.tracks) {
        (Some(path), _) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display())).map_err(input)?;
            read_frame_stats(f).with_context(|| format!("reading {}", path.display())).map_err(input)?
        }
        (None, Some(path)) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display())).map_err(input)?;
            let records = read_tracks(f).with_context(|| format!("reading {}", path.display())).map_err(input)?;
            compute_frame_stats(&records, cfg.segment_length_km(), &cfg.lines, cfg.camera.fps, None).map_err(input)?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let (samples, curve) = fit(&cfg, &stats);
    let curve = curve
        .map_err(|e| anyhow!("cannot fit the fundamental diagram from {} usable frame(s): {e}", samples.len()))
        .map_err(input)?;
    export_outputs(
        &a.out,
        &ExportInput {
            samples: Some(&samples),
            curve: Some(&curve),
            axis_mode: cfg.fd.axis_mode,
            bin_width: cfg.fd.effective_bin_width(),
            ..ExportInput::default()
        },
        config_json(&cfg),
        Vec::new(),
    )
    .map_err(input)?;
    ui.summary(describe_curve(&curve));
    Ok(())
}

fn write_sim_files(out: &Path, sc: &ScenarioConfig) -> Result<(aerofd_core::sim::SimOutput, Vec<String>), Failure> {
    let sim = generate(sc).map_err(input)?;
    let rows: Vec<DetectionRow> = sim.detections.iter().map(|d| DetectionRow::from_detection(d, -1)).collect();
    let mut w = create(out, "detections.csv")?;
    write_detections(&rows, &mut w).map_err(input)?;
    w.flush().map_err(input)?;
    let mut w = create(out, "truth.csv")?;
    write_detections(&DetectionFile::from_ground_truth(&sim.truth).rows, &mut w).map_err(input)?;
    w.flush().map_err(input)?;
    Ok((sim, vec!["detections.csv".into(), "truth.csv".into()]))
}

fn scenario_with_seed(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut sc = load_scenario(path).map_err(input)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    Ok(sc)
}

pub fn simulate(a: &SimulateArgs, ui: Ui) -> CmdResult {
    let sc = scenario_with_seed(&a.scenario, a.seed)?;
    let (sim, files) = write_sim_files(&a.out, &sc)?;
    export_outputs(
        &a.out,
        &ExportInput {
            extra_files: &files,
            ..ExportInput::default()
        },
        serde_json::to_value(&sc).map_err(internal)?,
        Vec::new(),
    )
    .map_err(input)?;
    ui.summary(format!(
        "{} detections, {} truth rows, {} vehicles",
        sim.detections.len(),
        sim.truth.rows.len(),
        sim.truth.vehicle_ids().len()
    ));
    Ok(())
}

fn print_report(ui: Ui, r: &EvalReport) {
    let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    ui.summary(format!("vehicles: {}", r.vehicles));
    ui.summary(format!("vehicle_frames: {}", r.vehicle_frames));
    ui.summary(format!("matched_frames: {}", r.matched_frames));
    ui.summary(format!("id_switches: {}", r.id_switches));
    ui.summary(format!("track_purity: {:.6}", r.track_purity));
    ui.summary(format!("velocity_rmse_kmh: {}", opt(r.velocity_rmse_kmh)));
    ui.summary(format!("density_mae: {:.6}", r.density_mae));
    ui.summary(format!("fd_vf_rel_error: {}", opt(r.fd_vf_rel_error)));
    ui.summary(format!("fd_critical_density_rel_error: {}", opt(r.fd_critical_density_rel_error)));
}

fn write_report(out: &Path, r: &EvalReport) -> CmdResult {
    let mut w = create(out, "eval.json")?;
    serde_json::to_writer_pretty(&mut w, r).map_err(internal)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(input)?;
    Ok(())
}

/// Tracker output, or any detection-layout file with ids.
fn read_output(path: &Path, gsd: f64, fps: f64) -> Result<Vec<TrackRecord>, Failure> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display())).map_err(input)?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first).map_err(input)?;
    let f = File::open(path).map_err(input)?;
    let ctx = || format!("reading {}", path.display());
    if first.trim_start().starts_with("track_id") {
        read_tracks(f).with_context(ctx).map_err(input)
    } else {
        let file = aerofd_core::io::parse_detections(f).with_context(ctx).map_err(input)?;
        Ok(file.to_ground_truth(gsd, fps).as_records(fps))
    }
}

pub fn eval(a: &EvalArgs, ui: Ui) -> CmdResult {
    let (opts, range) = match (&a.scenario, &a.config) {
        (Some(path), _) => {
            let sc = load_scenario(path).map_err(input)?;
            (EvalOptions::for_scenario(&sc), Some((0, sc.duration_frames.saturating_sub(1))))
        }
        (None, Some(path)) => {
            let cfg = load_config(path).map_err(input)?;
            let opts = EvalOptions {
                gsd_km_per_px: cfg.gsd_km_per_px(),
                fps: cfg.camera.fps,
                segment_length_km: cfg.segment_length_km(),
                law: None,
                fd: cfg.fd,
            };
            (opts, None)
        }
        (None, None) => unreachable!("clap requires a scale source"),
    };
    let truth_file = read_detections(&a.truth)
        .with_context(|| format!("reading {}", a.truth.display()))
        .map_err(input)?;
    let mut truth = truth_file.to_ground_truth(opts.gsd_km_per_px, opts.fps);
    if let Some((first, last)) = range {
        truth.first_frame = first;
        truth.last_frame = last;
    }
    let output = read_output(&a.tracks, opts.gsd_km_per_px, opts.fps)?;
    let report = evaluate(&truth, &output, &opts).map_err(input)?;
    print_report(ui, &report);
    if let Some(out) = &a.out {
        write_report(out, &report)?;
    }
    Ok(())
}

pub fn run(a: &RunArgs, ui: Ui) -> CmdResult {
    let cfg = a.config.as_deref().map(load_config).transpose().map_err(input)?;
    let mut notes = Vec::new();
    let mut extra = Vec::new();
    let (cfg, pipeline, truth) = match (&a.detections, &a.scenario) {
        (Some(path), _) => {
            let cfg = cfg.expect("clap requires --config with --detections");
            let file = read_detections(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(input)?;
            let p = track_and_count(&cfg, &file.detections(), file.frame_range())?;
            (cfg, p, None)
        }
        (None, Some(path)) => {
            let sc = scenario_with_seed(path, a.seed)?;
            let cfg = match cfg {
                Some(c) if c.camera != sc.camera => {
                    return Err(input(anyhow!("the config's camera block differs from the scenario's camera")))
                }
                Some(c) => c,
                None => RunConfig::with_camera(sc.camera),
            };
            let (sim, files) = write_sim_files(&a.out, &sc)?;
            extra = files;
            let range = Some((0, sc.duration_frames.saturating_sub(1)));
            let p = track_and_count(&cfg, &sim.detections, range)?;
            ui.progress(format!("simulated {} detections", sim.detections.len()));
            (cfg, p, Some((sim.truth, EvalOptions::for_scenario(&sc))))
        }
        (None, None) => unreachable!("clap requires a source"),
    };

    let (samples, curve) = fit(&cfg, &pipeline.stats);
    let curve = match curve {
        Ok(c) => Some(c),
        Err(e) => {
            notes.push(format!("fundamental diagram fit failed: {e}"));
            None
        }
    };
    if let Some((truth, opts)) = &truth {
        let report = evaluate(truth, &pipeline.records, opts).map_err(input)?;
        write_report(&a.out, &report)?;
        extra.push("eval.json".into());
        print_report(ui, &report);
    }
    let manifest = export_outputs(
        &a.out,
        &ExportInput {
            records: Some(&pipeline.records),
            stats: Some(&pipeline.stats),
            samples: Some(&samples),
            curve: curve.as_ref(),
            axis_mode: cfg.fd.axis_mode,
            bin_width: cfg.fd.effective_bin_width(),
            extra_files: &extra,
        },
        config_json(&cfg),
        notes,
    )
    .map_err(input)?;
    ui.summary(format!(
        "{} track records over {} frames; wrote {}",
        pipeline.records.len(),
        pipeline.stats.len(),
        manifest.files.join(", ")
    ));
    match &curve {
        Some(c) => ui.summary(describe_curve(c)),
        None => ui.summary("no fundamental diagram fitted (see manifest notes)"),
    }
    Ok(())
}
