//! Shared domain types: boxes, detections, camera and tracker configuration,
//! tracks and the per-frame record rows exported from the tracker.
//!
//! Image coordinates are used throughout: x grows rightward, y grows downward.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kalman::{KalmanState, NoiseConfig};

/// Axis-aligned box in pixel coordinates, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Box of size `(w, h)` centered on `(cx, cy)`.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }

    pub fn center(&self) -> (f64, f64) {
        box_center(self)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// True when the whole box lies inside a `width × height` image.
    pub fn inside_image(&self, width: f64, height: f64) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= width && self.bottom() <= height
    }
}

/// Center point of a box.
pub fn box_center(b: &BoundingBox) -> (f64, f64) {
    (b.x + b.w / 2.0, b.y + b.h / 2.0)
}

/// One box observed in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u64,
    pub bbox: BoundingBox,
    pub confidence: f64,
    #[serde(default)]
    pub class_id: i64,
}

impl Detection {
    pub fn new(frame: u64, bbox: BoundingBox, confidence: f64) -> Self {
        Self {
            frame,
            bbox,
            confidence,
            class_id: 0,
        }
    }
}

/// Flight and camera parameters that determine the ground sample distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_length_mm: f64,
    pub sensor_height_mm: f64,
    pub sensor_width_mm: f64,
    pub altitude_m: f64,
    pub image_height_px: f64,
    pub image_width_px: f64,
    pub fps: f64,
}

impl CameraModel {
    /// A 4K nadir camera at 100 m whose ground sample distance is 4 cm/px on
    /// both axes, at 25 fps.
    pub fn four_cm_per_px() -> Self {
        Self {
            focal_length_mm: 10.0,
            sensor_height_mm: 8.64,
            sensor_width_mm: 15.36,
            altitude_m: 100.0,
            image_height_px: 2160.0,
            image_width_px: 3840.0,
            fps: 25.0,
        }
    }
}

/// How track-to-detection assignment is solved each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingMode {
    /// Globally optimal assignment (Kuhn-Munkres).
    #[default]
    Hungarian,
    /// Best-score-first greedy matching.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Minimum IoU for a track/detection pair to be accepted.
    pub iou_threshold: f64,
    /// Consecutive missed frames a confirmed track may coast before removal.
    pub max_miss_frames: u32,
    /// Number of trailing frame steps used for velocity and direction.
    pub velocity_window: u32,
    /// Observations required before a tentative track is confirmed.
    pub min_hits_to_confirm: u32,
    /// Trailing observed frames feeding the occlusion displacement estimate.
    pub motion_model_window: u32,
    pub matching: MatchingMode,
    /// Drop coasting tracks whose predicted box leaves the image.
    pub remove_on_exit: bool,
    pub noise: NoiseConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.3,
            max_miss_frames: 25,
            velocity_window: 25,
            min_hits_to_confirm: 3,
            motion_model_window: 10,
            matching: MatchingMode::Hungarian,
            remove_on_exit: true,
            noise: NoiseConfig::default(),
        }
    }
}

/// A single broken rule found by [`validate_config`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every configuration invariant and reports all violations at once.
pub fn validate_config(cfg: &TrackerConfig, cam: &CameraModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, rule: &str| {
        out.push(Violation {
            field: field.to_string(),
            rule: rule.to_string(),
        })
    };

    if !(cfg.iou_threshold > 0.0 && cfg.iou_threshold < 1.0) {
        push("tracker.iou_threshold", "must lie strictly between 0 and 1");
    }
    if cfg.velocity_window < 2 {
        push("tracker.velocity_window", "must be at least 2");
    }
    if cfg.min_hits_to_confirm < 1 {
        push("tracker.min_hits_to_confirm", "must be at least 1");
    }
    if cfg.motion_model_window < 2 {
        push("tracker.motion_model_window", "must be at least 2");
    }
    let noise = [
        ("kalman.process_position_var", cfg.noise.process_position_var),
        ("kalman.process_velocity_var", cfg.noise.process_velocity_var),
        ("kalman.measurement_var", cfg.noise.measurement_var),
        ("kalman.initial_velocity_var", cfg.noise.initial_velocity_var),
    ];
    for (field, value) in noise {
        if !(value.is_finite() && value >= 0.0) {
            push(field, "must be finite and non-negative");
        }
    }

    let camera = [
        ("camera.focal_length_mm", cam.focal_length_mm),
        ("camera.sensor_height_mm", cam.sensor_height_mm),
        ("camera.sensor_width_mm", cam.sensor_width_mm),
        ("camera.altitude_m", cam.altitude_m),
        ("camera.image_height_px", cam.image_height_px),
        ("camera.image_width_px", cam.image_width_px),
        ("camera.fps", cam.fps),
    ];
    for (field, value) in camera {
        if !(value.is_finite() && value > 0.0) {
            push(field, "must be strictly positive");
        }
    }
    out
}

/// Lifecycle of a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Active,
    Coasting,
    Removed,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Active => "active",
            TrackStatus::Coasting => "coasting",
            TrackStatus::Removed => "removed",
        }
    }

    /// Active and coasting tracks represent vehicles physically present.
    pub fn counts_as_vehicle(&self) -> bool {
        matches!(self, TrackStatus::Active | TrackStatus::Coasting)
    }
}

impl std::str::FromStr for TrackStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tentative" => Ok(TrackStatus::Tentative),
            "active" => Ok(TrackStatus::Active),
            "coasting" => Ok(TrackStatus::Coasting),
            "removed" => Ok(TrackStatus::Removed),
            other => Err(format!("unknown track status `{other}`")),
        }
    }
}

/// Eight-way compass label. "Top" is decreasing image y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Right,
    TopRight,
    Top,
    TopLeft,
    Left,
    BottomLeft,
    Bottom,
    BottomRight,
}

impl Direction {
    /// Counter-clockwise from "right" in 45° steps (y up).
    pub const SECTORS: [Direction; 8] = [
        Direction::Right,
        Direction::TopRight,
        Direction::Top,
        Direction::TopLeft,
        Direction::Left,
        Direction::BottomLeft,
        Direction::Bottom,
        Direction::BottomRight,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Direction::Right => "right",
            Direction::TopRight => "top-right",
            Direction::Top => "top",
            Direction::TopLeft => "top-left",
            Direction::Left => "left",
            Direction::BottomLeft => "bottom-left",
            Direction::Bottom => "bottom",
            Direction::BottomRight => "bottom-right",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Direction::SECTORS
            .iter()
            .copied()
            .find(|d| d.label() == s)
            .ok_or_else(|| format!("unknown direction `{s}`"))
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub frame: u64,
    pub bbox: BoundingBox,
    /// False for entries synthesized while coasting through an occlusion.
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub status: TrackStatus,
    pub history: Vec<HistoryEntry>,
    pub kalman: KalmanState,
    pub velocity_kmh: Option<f64>,
    pub direction: Option<Direction>,
    pub miss_count: u32,
    pub hits: u32,
}

impl Track {
    pub(crate) fn new(id: u64, frame: u64, bbox: BoundingBox, kalman: KalmanState) -> Self {
        Self {
            id,
            status: TrackStatus::Tentative,
            history: vec![HistoryEntry {
                frame,
                bbox,
                observed: true,
            }],
            kalman,
            velocity_kmh: None,
            direction: None,
            miss_count: 0,
            hits: 1,
        }
    }

    pub fn last_entry(&self) -> &HistoryEntry {
        self.history.last().expect("track history is never empty")
    }

    pub fn last_observed(&self) -> Option<&HistoryEntry> {
        self.history.iter().rev().find(|e| e.observed)
    }

    pub fn observed_count(&self) -> usize {
        self.history.iter().filter(|e| e.observed).count()
    }

    /// Appends a history entry, keeping frame indices strictly increasing.
    ///
    /// Returns false (and leaves the track untouched) on an out-of-order or
    /// repeated frame, or when the track is already removed.
    pub(crate) fn push_entry(&mut self, entry: HistoryEntry) -> bool {
        if self.status == TrackStatus::Removed || entry.frame <= self.last_entry().frame {
            return false;
        }
        self.history.push(entry);
        true
    }

    /// Checks the frame-monotonicity and miss-count invariants.
    pub fn invariants_hold(&self) -> bool {
        let monotone = self.history.windows(2).all(|w| w[0].frame < w[1].frame);
        let miss_ok = !self.last_entry().observed || self.miss_count == 0;
        monotone && miss_ok && !self.history.is_empty()
    }
}

/// One exported row: a live track at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub track_id: u64,
    pub frame: u64,
    pub timestamp_s: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
    pub velocity_kmh: Option<f64>,
    pub direction: Option<Direction>,
    pub observed: bool,
    pub status: TrackStatus,
}

impl TrackRecord {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_center(self.center_x, self.center_y, self.width, self.height)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.center_x, self.center_y)
    }
}
