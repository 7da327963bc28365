//! Writes the full output set and its manifest into one directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::svg::{Mark, Plot, Series};
use super::{tables, IoError};
use crate::fd::{flux_grid, AxisMode, FdCurve, FdSample};
use crate::model::TrackRecord;
use crate::stats::FrameStats;

pub const OUTPUT_FILES: [&str; 6] = [
    "tracks.csv",
    "frame_stats.csv",
    "fd_bins.csv",
    "fd_fit.csv",
    "speed_density.svg",
    "fundamental_diagram.svg",
];

/// Everything a run can export. `None` parts are skipped.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExportInput<'a> {
    pub records: Option<&'a [TrackRecord]>,
    pub stats: Option<&'a [FrameStats]>,
    /// Samples and curve for the FD outputs; the FD files are written when
    /// `samples` is set, with the fitted series left out if `curve` is not.
    pub samples: Option<&'a [FdSample]>,
    pub curve: Option<&'a FdCurve>,
    pub axis_mode: AxisMode,
    pub bin_width: f64,
    /// Files the caller already wrote into the directory, listed first in
    /// the manifest.
    pub extra_files: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub files: Vec<String>,
    pub notes: Vec<String>,
    pub config: serde_json::Value,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, IoError> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| IoError::file(path, e))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), IoError> {
    let mut w = create(dir, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Writes the requested outputs plus `manifest.json` and returns the
/// manifest. `notes` are carried into the manifest verbatim.
pub fn export_outputs(
    out_dir: &Path,
    input: &ExportInput<'_>,
    config: serde_json::Value,
    mut notes: Vec<String>,
) -> Result<Manifest, IoError> {
    fs::create_dir_all(out_dir).map_err(|e| IoError::file(out_dir, e))?;
    let mut files = input.extra_files.to_vec();
    if let Some(records) = input.records {
        tables::write_tracks(records, create(out_dir, "tracks.csv")?)?;
        files.push("tracks.csv".to_string());
    }
    if let Some(stats) = input.stats {
        tables::write_frame_stats(stats, create(out_dir, "frame_stats.csv")?)?;
        files.push("frame_stats.csv".to_string());
    }
    if let Some(samples) = input.samples {
        tables::write_fd_bins(input.curve, create(out_dir, "fd_bins.csv")?)?;
        tables::write_fd_fit(input.curve, create(out_dir, "fd_fit.csv")?)?;
        let (speed, flux) = plots(samples, input.curve, input.axis_mode, input.bin_width);
        write_text(out_dir, "speed_density.svg", &speed.render())?;
        write_text(out_dir, "fundamental_diagram.svg", &flux.render())?;
        files.extend(["fd_bins.csv", "fd_fit.csv", "speed_density.svg", "fundamental_diagram.svg"].map(String::from));
        if input.curve.is_none() {
            notes.push("no fundamental diagram could be fitted; fd tables are header-only and plots show samples only".into());
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        files,
        notes,
        config,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_text(out_dir, "manifest.json", &text)?;
    Ok(manifest)
}

/// Speed-density and flux-density plots: raw per-frame samples, bin means
/// and the fitted curve.
pub fn plots(samples: &[FdSample], curve: Option<&FdCurve>, mode: AxisMode, bin_width: f64) -> (Plot, Plot) {
    let x_label = match mode {
        AxisMode::Density => "density (veh/km)".to_string(),
        AxisMode::Count => "vehicles in view".to_string(),
    };
    let flux_label = format!("flux ({})", mode.flux_unit());
    let raw = |f: fn(&FdSample) -> (f64, f64)| Series {
        label: "per-frame samples".into(),
        color: "#9e9e9e",
        mark: Mark::Dots { radius: 1.5 },
        points: samples.iter().map(f).collect(),
    };
    let mut speed = Plot {
        title: "Speed-density relationship".into(),
        x_label: x_label.clone(),
        y_label: "mean speed (km/h)".into(),
        series: vec![raw(|s| (s.density, s.speed))],
        markers: Vec::new(),
    };
    let mut flux = Plot {
        title: "Fundamental diagram".into(),
        x_label,
        y_label: flux_label,
        series: vec![raw(|s| (s.density, s.density * s.speed))],
        markers: Vec::new(),
    };
    if let Some(c) = curve {
        let bins = |f: fn(&crate::fd::FdBin) -> (f64, f64), label: &str| Series {
            label: label.into(),
            color: "#1f5fbf",
            mark: Mark::Dots { radius: 4.0 },
            points: c.bins.iter().map(f).collect(),
        };
        speed.series.push(bins(|b| (b.density, b.mean_speed), "mean speed per bin"));
        flux.series.push(bins(|b| (b.density, b.flux), "flux per bin"));
        let grid = flux_grid(&c.bins, bin_width);
        speed.series.push(Series {
            label: format!("{} fit", c.fit.model.kind().as_str()),
            color: "#c62828",
            mark: Mark::Line,
            points: grid.iter().map(|&k| (k, c.fit.model.speed(k))).collect(),
        });
        flux.series.push(Series {
            label: format!("{} fit", c.fit.model.kind().as_str()),
            color: "#c62828",
            mark: Mark::Line,
            points: grid.iter().map(|&k| (k, c.fit.model.flux(k))).collect(),
        });
        flux.markers.push((
            c.critical_density,
            format!("critical {}", super::fmt_num(c.critical_density)),
        ));
    }
    (speed, flux)
}
