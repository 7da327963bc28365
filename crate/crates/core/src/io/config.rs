//! Run configuration: a TOML file whose dotted keys are checked against one
//! reference table.
//!
//! ```toml
//! [camera]
//! focal_length_mm = 10
//! sensor_height_mm = 8.64
//! sensor_width_mm = 15.36
//! altitude_m = 100
//! image_width_px = 3840
//! image_height_px = 2160
//! fps = 25
//!
//! [tracker]
//! iou_threshold = 0.3
//!
//! [lines.west]
//! x1 = 200
//! y1 = 0
//! x2 = 200
//! y2 = 2160
//! positive_side = "right"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use super::IoError;
use crate::fd::{AxisMode, FdSettings, FitModel};
use crate::geo::compute_gsd;
use crate::model::{validate_config, CameraModel, MatchingMode, TrackerConfig, Violation};
use crate::sim::ScenarioConfig;
use crate::stats::{CountingLine, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Float,
    Int,
    Bool,
    Choice(&'static [&'static str]),
}

impl KeyKind {
    fn describe(&self) -> String {
        match self {
            KeyKind::Float => "a number".into(),
            KeyKind::Int => "a non-negative integer".into(),
            KeyKind::Bool => "true or false".into(),
            KeyKind::Choice(c) => format!("one of {}", c.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub key: &'static str,
    pub kind: KeyKind,
    /// `None` marks a mandatory key.
    pub default: Option<&'static str>,
    pub doc: &'static str,
}

const fn key(key: &'static str, kind: KeyKind, default: Option<&'static str>, doc: &'static str) -> KeySpec {
    KeySpec { key, kind, default, doc }
}

use KeyKind::*;

/// Every accepted key. `lines.<name>.*` entries are templates: `<name>` is
/// any TOML key and each named line needs all five fields.
pub const CONFIG_KEYS: &[KeySpec] = &[
    key("camera.focal_length_mm", Float, None, "lens focal length (mm)"),
    key("camera.sensor_height_mm", Float, None, "sensor height (mm)"),
    key("camera.sensor_width_mm", Float, None, "sensor width (mm)"),
    key("camera.altitude_m", Float, None, "flight altitude above the road (m)"),
    key("camera.image_width_px", Float, None, "image width (px)"),
    key("camera.image_height_px", Float, None, "image height (px)"),
    key("camera.fps", Float, None, "frame rate (frames/s)"),
    key("tracker.iou_threshold", Float, Some("0.3"), "minimum IoU to accept a match"),
    key("tracker.max_miss_frames", Int, Some("25"), "frames a confirmed track may coast"),
    key("tracker.velocity_window", Int, Some("25"), "frame steps used for speed and direction"),
    key("tracker.min_hits_to_confirm", Int, Some("3"), "observations before a track counts"),
    key("tracker.motion_model_window", Int, Some("10"), "observed frames behind the coasting displacement"),
    key("tracker.matching", Choice(&["hungarian", "greedy"]), Some("hungarian"), "assignment solver"),
    key("tracker.remove_on_exit", Bool, Some("true"), "drop coasting tracks that leave the image"),
    key("kalman.process_position_var", Float, Some("1"), "process noise on position (px²)"),
    key("kalman.process_velocity_var", Float, Some("0.25"), "process noise on velocity (px²/frame²)"),
    key("kalman.measurement_var", Float, Some("1"), "detection center noise (px²)"),
    key("kalman.initial_velocity_var", Float, Some("1000"), "velocity variance of a new track"),
    key("fd.bin_width", Float, Some("5 (density) / 1 (count)"), "density bin width"),
    key("fd.min_bin_count", Int, Some("5"), "samples needed to keep a bin"),
    key("fd.model", Choice(&["quadratic", "greenshields"]), Some("quadratic"), "speed-density fit"),
    key("fd.axis_mode", Choice(&["density", "count"]), Some("density"), "veh/km or raw vehicle count"),
    key("segment.length_km", Float, Some("image width × gsd"), "monitored road length (km)"),
    key("segment.extent_px", Float, Some("image width"), "monitored road length (px)"),
    key("lines.<name>.x1", Float, None, "first endpoint x (px)"),
    key("lines.<name>.y1", Float, None, "first endpoint y (px)"),
    key("lines.<name>.x2", Float, None, "second endpoint x (px)"),
    key("lines.<name>.y2", Float, None, "second endpoint y (px)"),
    key("lines.<name>.positive_side", Choice(&["left", "right"]), None, "side whose entry is an inflow"),
];

const LINE_FIELDS: [&str; 5] = ["x1", "y1", "x2", "y2", "positive_side"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    ImageWidth,
    LengthKm(f64),
    ExtentPx(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub camera: CameraModel,
    pub tracker: TrackerConfig,
    pub fd: FdSettings,
    pub segment: Segment,
    pub lines: Vec<CountingLine>,
}

impl RunConfig {
    pub fn with_camera(camera: CameraModel) -> Self {
        Self {
            camera,
            tracker: TrackerConfig::default(),
            fd: FdSettings::default(),
            segment: Segment::ImageWidth,
            lines: Vec::new(),
        }
    }

    pub fn gsd_km_per_px(&self) -> f64 {
        compute_gsd(&self.camera).gsd_final
    }

    pub fn segment_length_km(&self) -> f64 {
        match self.segment {
            Segment::LengthKm(km) => km,
            Segment::ExtentPx(px) => px * self.gsd_km_per_px(),
            Segment::ImageWidth => self.camera.image_width_px * self.gsd_km_per_px(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("`{key}` must be {expected}, found {found}")]
    Type { key: String, expected: String, found: String },
    #[error("missing mandatory key(s): {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{}", Invalid(.0))]
    Invalid(Vec<Violation>),
}

struct Invalid<'a>(&'a [Violation]);

impl fmt::Display for Invalid<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for v in self.0 {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&path, t, out),
            other => out.push((path, other.clone())),
        }
    }
}

fn suggest(key: &str) -> Option<String> {
    let line_keys = LINE_FIELDS.iter().map(|f| format!("lines.<name>.{f}"));
    let candidates: Vec<String> = CONFIG_KEYS
        .iter()
        .filter(|k| !k.key.starts_with("lines."))
        .map(|k| k.key.to_string())
        .chain(line_keys)
        .collect();
    let last = key.rsplit('.').next().unwrap_or(key);
    candidates
        .into_iter()
        .map(|c| {
            let tail = c.rsplit('.').next().unwrap_or(&c).to_string();
            let d = strsim::levenshtein(key, &c).min(strsim::levenshtein(last, &tail));
            (d, c)
        })
        .filter(|(d, _)| *d <= 3)
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .map(|(_, c)| c)
}

fn type_error(key: &str, kind: KeyKind, v: &toml::Value) -> ConfigError {
    ConfigError::Type {
        key: key.to_string(),
        expected: kind.describe(),
        found: v.to_string(),
    }
}

fn as_float(key: &str, v: &toml::Value) -> Result<f64, ConfigError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(type_error(key, Float, v)),
    }
}

fn as_u32(key: &str, v: &toml::Value) -> Result<u32, ConfigError> {
    match v {
        toml::Value::Integer(i) => u32::try_from(*i).map_err(|_| type_error(key, Int, v)),
        _ => Err(type_error(key, Int, v)),
    }
}

fn as_bool(key: &str, v: &toml::Value) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| type_error(key, Bool, v))
}

fn as_choice<'a>(key: &str, v: &'a toml::Value, choices: &'static [&'static str]) -> Result<&'a str, ConfigError> {
    match v.as_str() {
        Some(s) if choices.contains(&s) => Ok(s),
        _ => Err(type_error(key, Choice(choices), v)),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut flat = Vec::new();
    flatten("", &table, &mut flat);

    let mut camera: BTreeMap<&str, f64> = BTreeMap::new();
    let mut tracker = TrackerConfig::default();
    let mut fd = FdSettings::default();
    let mut length_km = None;
    let mut extent_px = None;
    let mut lines: BTreeMap<String, BTreeMap<&'static str, toml::Value>> = BTreeMap::new();

    for (k, v) in &flat {
        if let Some(rest) = k.strip_prefix("lines.") {
            let (name, field) = rest.rsplit_once('.').unwrap_or(("", rest));
            match LINE_FIELDS.iter().find(|f| **f == field) {
                Some(f) if !name.is_empty() => {
                    lines.entry(name.to_string()).or_default().insert(f, v.clone());
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        key: k.clone(),
                        suggestion: suggest(k).map(|s| s.replace("<name>", if name.is_empty() { "<name>" } else { name })),
                    })
                }
            }
            continue;
        }
        let Some(spec) = CONFIG_KEYS.iter().find(|s| s.key == k) else {
            return Err(ConfigError::UnknownKey {
                key: k.clone(),
                suggestion: suggest(k),
            });
        };
        let n = &mut tracker.noise;
        match spec.key {
            c if c.starts_with("camera.") => {
                camera.insert(spec.key, as_float(k, v)?);
            }
            "tracker.iou_threshold" => tracker.iou_threshold = as_float(k, v)?,
            "tracker.max_miss_frames" => tracker.max_miss_frames = as_u32(k, v)?,
            "tracker.velocity_window" => tracker.velocity_window = as_u32(k, v)?,
            "tracker.min_hits_to_confirm" => tracker.min_hits_to_confirm = as_u32(k, v)?,
            "tracker.motion_model_window" => tracker.motion_model_window = as_u32(k, v)?,
            "tracker.matching" => {
                tracker.matching = match as_choice(k, v, &["hungarian", "greedy"])? {
                    "greedy" => MatchingMode::Greedy,
                    _ => MatchingMode::Hungarian,
                }
            }
            "tracker.remove_on_exit" => tracker.remove_on_exit = as_bool(k, v)?,
            "kalman.process_position_var" => n.process_position_var = as_float(k, v)?,
            "kalman.process_velocity_var" => n.process_velocity_var = as_float(k, v)?,
            "kalman.measurement_var" => n.measurement_var = as_float(k, v)?,
            "kalman.initial_velocity_var" => n.initial_velocity_var = as_float(k, v)?,
            "fd.bin_width" => fd.bin_width = Some(as_float(k, v)?),
            "fd.min_bin_count" => fd.min_bin_count = as_u32(k, v)? as usize,
            "fd.model" => {
                fd.model = match as_choice(k, v, &["quadratic", "greenshields"])? {
                    "greenshields" => FitModel::Greenshields,
                    _ => FitModel::Quadratic,
                }
            }
            "fd.axis_mode" => {
                fd.axis_mode = match as_choice(k, v, &["density", "count"])? {
                    "count" => AxisMode::Count,
                    _ => AxisMode::Density,
                }
            }
            "segment.length_km" => length_km = Some(as_float(k, v)?),
            "segment.extent_px" => extent_px = Some(as_float(k, v)?),
            other => unreachable!("key table entry {other} has no handler"),
        }
    }

    let missing: Vec<String> = CONFIG_KEYS
        .iter()
        .filter(|s| s.key.starts_with("camera.") && !camera.contains_key(s.key))
        .map(|s| s.key.to_string())
        .chain(lines.iter().flat_map(|(name, fields)| {
            LINE_FIELDS
                .iter()
                .filter(|f| !fields.contains_key(*f))
                .map(move |f| format!("lines.{name}.{f}"))
        }))
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }
    let cam = CameraModel {
        focal_length_mm: camera["camera.focal_length_mm"],
        sensor_height_mm: camera["camera.sensor_height_mm"],
        sensor_width_mm: camera["camera.sensor_width_mm"],
        altitude_m: camera["camera.altitude_m"],
        image_width_px: camera["camera.image_width_px"],
        image_height_px: camera["camera.image_height_px"],
        fps: camera["camera.fps"],
    };

    let mut counting = Vec::new();
    for (name, fields) in &lines {
        let coord = |f: &str| as_float(&format!("lines.{name}.{f}"), &fields[f]);
        let side_key = format!("lines.{name}.positive_side");
        let side = match as_choice(&side_key, &fields["positive_side"], &["left", "right"])? {
            "left" => Side::Left,
            _ => Side::Right,
        };
        let line = CountingLine::new(name.clone(), (coord("x1")?, coord("y1")?), (coord("x2")?, coord("y2")?), side);
        match line {
            Ok(l) => counting.push(l),
            Err(e) => {
                return Err(ConfigError::Invalid(vec![Violation {
                    field: format!("lines.{name}"),
                    rule: e.to_string(),
                }]))
            }
        }
    }

    let mut violations = validate_config(&tracker, &cam);
    let mut push = |field: &str, rule: &str| {
        violations.push(Violation {
            field: field.into(),
            rule: rule.into(),
        })
    };
    if fd.bin_width.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
        push("fd.bin_width", "must be strictly positive");
    }
    if fd.min_bin_count < 1 {
        push("fd.min_bin_count", "must be at least 1");
    }
    let segment = match (length_km, extent_px) {
        (Some(_), Some(_)) => {
            push("segment", "set either length_km or extent_px, not both");
            Segment::ImageWidth
        }
        (Some(km), None) => {
            if !(km > 0.0 && km.is_finite()) {
                push("segment.length_km", "must be strictly positive");
            }
            Segment::LengthKm(km)
        }
        (None, Some(px)) => {
            if !(px > 0.0 && px.is_finite()) {
                push("segment.extent_px", "must be strictly positive");
            }
            Segment::ExtentPx(px)
        }
        (None, None) => Segment::ImageWidth,
    };
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations));
    }
    Ok(RunConfig {
        camera: cam,
        tracker,
        fd,
        segment,
        lines: counting,
    })
}

/// Reads a simulator scenario (TOML mirroring [`ScenarioConfig`]).
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    toml::from_str(&text).map_err(|e| ConfigError::Syntax(e.to_string()))
}

/// Scenario as TOML text that [`load_scenario`] reads back unchanged.
pub fn scenario_to_toml(sc: &ScenarioConfig) -> String {
    toml::to_string(sc).expect("scenario fields are all representable in TOML")
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_config(&text)
}
