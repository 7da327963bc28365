//! File formats: detection CSV, run configuration, result tables, SVG plots
//! and the output manifest.

mod config;
mod detections;
mod export;
pub mod svg;
mod tables;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use config::{load_config, load_scenario, scenario_to_toml, parse_config, ConfigError, KeySpec, RunConfig, Segment, CONFIG_KEYS};
pub use detections::{parse_detections, read_detections, write_detections, DetectionFile, DetectionRow};
pub use export::{export_outputs, plots, ExportInput, Manifest, OUTPUT_FILES};
pub use tables::{
    read_fd_bins, read_frame_stats, read_tracks, write_fd_bins, write_fd_fit, write_frame_stats, write_tracks,
    FD_BINS_HEADER, FRAME_STATS_HEADER, TRACKS_HEADER,
};

/// Where in a text input a problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    /// 1-based line number.
    pub line: u64,
    pub column: Option<&'static str>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.column {
            Some(c) => write!(f, "line {}, column `{}`", self.line, c),
            None => write!(f, "line {}", self.line),
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{at}: {message}")]
    Parse { at: Location, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl IoError {
    pub(crate) fn at(line: u64, column: Option<&'static str>, message: impl Into<String>) -> Self {
        IoError::Parse {
            at: Location { line, column },
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::File {
            path: path.into(),
            source,
        }
    }
}

/// Six significant digits with a `.` decimal point. Values that need an
/// exponent outside `[1e-5, 1e15)` use Rust's `e` notation, which parses
/// back through `str::parse::<f64>`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let mag = rounded.abs();
    if (1e-5..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub(crate) fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_num(1234.56789), "1234.57");
        assert_eq!(fmt_num(0.000123456789), "0.000123457");
        assert_eq!(fmt_num(4e-5), "0.00004");
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.5e20), "1.5e20");
        assert_eq!(fmt_num(2.5e-9), "2.5e-9");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        assert_eq!(fmt_num(999999.5), "1000000");
    }

    proptest! {
        #[test]
        fn formatting_is_a_fixed_point(x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            let once = fmt_num(x);
            let back: f64 = once.parse().unwrap();
            prop_assert_eq!(fmt_num(back), once.clone());
            let rel = if x == 0.0 { back.abs() } else { ((back - x) / x).abs() };
            prop_assert!(rel <= 5e-6, "{x} -> {once}");
        }
    }
}
