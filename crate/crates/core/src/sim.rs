//! Synthetic aerial scenes and tracker scoring.
//!
//! Vehicles are boxes travelling along straight horizontal lanes. Every
//! vehicle moves at the speed the configured law gives for the number of
//! vehicles currently visible, so the generated traffic has a known
//! speed-density relation. Detections are rendered from the truth boxes
//! through a simple detector model.
//!
//! Random draws come from one ChaCha8 stream seeded by `seed`, in this order:
//!
//! 1. box sizes of the initial vehicles (width then height, in list order);
//! 2. per frame, for each lane in order, one uniform for the arrival test and,
//!    if a vehicle is spawned, its width and height;
//! 3. per frame, for each visible vehicle not inside an occlusion zone, one
//!    uniform for dropout and, if detected, x then y position noise;
//! 4. per frame, the false-positive count, then x and y for each of them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::iou;
use crate::fd::{self, AxisMode, FdSettings, FitModel, SpeedModel};
use crate::geo::{compute_gsd, kmh_to_px_per_frame};
use crate::model::{BoundingBox, CameraModel, Detection, TrackRecord, TrackStatus};
use crate::stats::compute_frame_stats;
use crate::tracker::direction_of;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("lane {lane} at y = {y_px} px does not fit boxes inside the {height} px image")]
    LaneOutsideImage { lane: usize, y_px: f64, height: f64 },
    #[error("lane {lane} direction must be 1 or -1, got {direction}")]
    BadDirection { lane: usize, direction: i8 },
    #[error("initial vehicle {index} refers to missing lane {lane}")]
    MissingLane { index: usize, lane: usize },
    #[error("{field} must be in [0, 1], got {value}")]
    Probability { field: &'static str, value: f64 },
    #[error("{field} must be non-negative and finite, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("box size jitter must be smaller than the mean size")]
    BoxJitter,
    #[error("arrival rate {rate} veh/s over {lanes} lane(s) exceeds one vehicle per lane per frame")]
    ArrivalTooHigh { rate: f64, lanes: usize },
    #[error("demand profile frames must be strictly increasing")]
    DemandOrder,
    #[error("scenario has no lanes")]
    NoLanes,
    #[error("camera model is invalid: {0}")]
    Camera(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("ground truth is empty")]
    EmptyTruth,
    #[error("pipeline output has frame {frame} outside the ground-truth range {first}..={last}")]
    FrameOutOfRange { frame: u64, first: u64, last: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub y_px: f64,
    /// +1 travels toward larger x, −1 toward smaller x.
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpeedLaw {
    Constant { v0_kmh: f64 },
    Greenshields { vf_kmh: f64, kj_veh_per_km: f64 },
}

impl SpeedLaw {
    pub fn speed_kmh(&self, density: f64) -> f64 {
        match *self {
            SpeedLaw::Constant { v0_kmh } => v0_kmh,
            SpeedLaw::Greenshields {
                vf_kmh,
                kj_veh_per_km,
            } => (vf_kmh * (1.0 - density / kj_veh_per_km)).max(0.0),
        }
    }

    /// Free-flow speed and the density of maximum flux, when the law has one.
    pub fn fd_parameters(&self) -> Option<(f64, f64)> {
        match *self {
            SpeedLaw::Constant { .. } => None,
            SpeedLaw::Greenshields {
                vf_kmh,
                kj_veh_per_km,
            } => Some((vf_kmh, kj_veh_per_km / 2.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSize {
    pub mean_w: f64,
    pub mean_h: f64,
    /// Half-width of the uniform spread applied to each dimension.
    pub jitter: f64,
}

impl Default for BoxSize {
    fn default() -> Self {
        // A 4.5 m × 1.8 m car at 4 cm/px.
        Self {
            mean_w: 112.0,
            mean_h: 45.0,
            jitter: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorModel {
    pub position_sigma_px: f64,
    pub dropout: f64,
    pub false_positive_rate: f64,
}

impl DetectorModel {
    pub fn perfect() -> Self {
        Self::default()
    }

    pub fn is_noiseless(&self) -> bool {
        self.position_sigma_px == 0.0 && self.dropout == 0.0 && self.false_positive_rate == 0.0
    }
}

/// Arrival rate breakpoint; rates are interpolated linearly between points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandPoint {
    pub frame: u64,
    pub rate_veh_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialVehicle {
    pub lane: usize,
    /// Box center x at frame 0.
    pub x_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub duration_frames: u64,
    pub camera: CameraModel,
    pub lanes: Vec<Lane>,
    /// Total over all lanes; ignored when `demand` is non-empty.
    #[serde(default)]
    pub arrival_rate_veh_s: f64,
    #[serde(default)]
    pub demand: Vec<DemandPoint>,
    pub speed_law: SpeedLaw,
    #[serde(default)]
    pub box_size: BoxSize,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default)]
    pub occlusion_zones: Vec<BoundingBox>,
    #[serde(default)]
    pub initial_vehicles: Vec<InitialVehicle>,
    /// Arrivals are refused while density is at or above this fraction of
    /// the jam density.
    #[serde(default = "default_entry_cap")]
    pub entry_cap_fraction: f64,
    /// Smallest gap, in px, kept between a new vehicle and the one ahead.
    #[serde(default = "default_min_gap")]
    pub min_gap_px: f64,
}

/// Seed used when neither the scenario nor the command line sets one.
pub const DEFAULT_SEED: u64 = 0;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_entry_cap() -> f64 {
    0.9
}

fn default_min_gap() -> f64 {
    56.0
}

impl ScenarioConfig {
    pub fn gsd_km_per_px(&self) -> f64 {
        compute_gsd(&self.camera).gsd_final
    }

    /// The speed law reads density over the full image width.
    pub fn segment_length_km(&self) -> f64 {
        self.camera.image_width_px * self.gsd_km_per_px()
    }

    pub fn arrival_rate_at(&self, frame: u64) -> f64 {
        let d = &self.demand;
        match d.len() {
            0 => self.arrival_rate_veh_s,
            _ if frame <= d[0].frame => d[0].rate_veh_s,
            _ => {
                for w in d.windows(2) {
                    if frame <= w[1].frame {
                        let t = (frame - w[0].frame) as f64 / (w[1].frame - w[0].frame) as f64;
                        return w[0].rate_veh_s + t * (w[1].rate_veh_s - w[0].rate_veh_s);
                    }
                }
                d[d.len() - 1].rate_veh_s
            }
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let cam = &self.camera;
        let cam_ok = [
            cam.focal_length_mm,
            cam.sensor_height_mm,
            cam.sensor_width_mm,
            cam.altitude_m,
            cam.image_height_px,
            cam.image_width_px,
            cam.fps,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !cam_ok {
            return Err(SimError::Camera("all camera parameters must be positive".into()));
        }
        if self.lanes.is_empty() {
            return Err(SimError::NoLanes);
        }
        let b = &self.box_size;
        if !(b.jitter >= 0.0 && b.jitter < b.mean_w && b.jitter < b.mean_h) {
            return Err(SimError::BoxJitter);
        }
        let half_h = (b.mean_h + b.jitter) / 2.0;
        for (i, lane) in self.lanes.iter().enumerate() {
            if lane.direction != 1 && lane.direction != -1 {
                return Err(SimError::BadDirection {
                    lane: i,
                    direction: lane.direction,
                });
            }
            if !(lane.y_px - half_h >= 0.0 && lane.y_px + half_h <= cam.image_height_px) {
                return Err(SimError::LaneOutsideImage {
                    lane: i,
                    y_px: lane.y_px,
                    height: cam.image_height_px,
                });
            }
        }
        for (index, v) in self.initial_vehicles.iter().enumerate() {
            if v.lane >= self.lanes.len() {
                return Err(SimError::MissingLane { index, lane: v.lane });
            }
        }
        let det = &self.detector;
        for (field, value) in [("detector.dropout", det.dropout), ("entry_cap_fraction", self.entry_cap_fraction)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::Probability { field, value });
            }
        }
        for (field, value) in [
            ("detector.position_sigma_px", det.position_sigma_px),
            ("detector.false_positive_rate", det.false_positive_rate),
            ("arrival_rate_veh_s", self.arrival_rate_veh_s),
            ("min_gap_px", self.min_gap_px),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(SimError::Negative { field, value });
            }
        }
        if self.demand.windows(2).any(|w| w[1].frame <= w[0].frame) {
            return Err(SimError::DemandOrder);
        }
        let peak = self
            .demand
            .iter()
            .map(|d| d.rate_veh_s)
            .fold(self.arrival_rate_veh_s, f64::max);
        for d in &self.demand {
            if !(d.rate_veh_s >= 0.0 && d.rate_veh_s.is_finite()) {
                return Err(SimError::Negative {
                    field: "demand.rate_veh_s",
                    value: d.rate_veh_s,
                });
            }
        }
        if peak / self.lanes.len() as f64 > cam.fps {
            return Err(SimError::ArrivalTooHigh {
                rate: peak,
                lanes: self.lanes.len(),
            });
        }
        match self.speed_law {
            SpeedLaw::Constant { v0_kmh } if !(v0_kmh >= 0.0 && v0_kmh.is_finite()) => {
                return Err(SimError::Negative {
                    field: "speed_law.v0_kmh",
                    value: v0_kmh,
                })
            }
            SpeedLaw::Greenshields {
                vf_kmh,
                kj_veh_per_km,
            } => {
                for (field, value) in [("speed_law.vf_kmh", vf_kmh), ("speed_law.kj_veh_per_km", kj_veh_per_km)] {
                    if !(value > 0.0 && value.is_finite()) {
                        return Err(SimError::Negative { field, value });
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// One ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub frame: u64,
    pub id: u64,
    pub bbox: BoundingBox,
    /// From the displacement to the vehicle's next frame (or from the
    /// previous one on its last frame); `None` for a single-frame vehicle.
    pub speed_kmh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Sorted by frame, then id.
    pub rows: Vec<TruthRow>,
    pub first_frame: u64,
    pub last_frame: u64,
}

impl GroundTruth {
    /// Builds truth from `(frame, id, box)` rows, deriving each row's speed
    /// from consecutive-frame center displacements. The frame range defaults
    /// to the row extent.
    pub fn from_boxes(
        boxes: &[(u64, u64, BoundingBox)],
        gsd_km_per_px: f64,
        fps: f64,
        frame_range: Option<(u64, u64)>,
    ) -> Self {
        let mut by_id: BTreeMap<u64, Vec<(u64, BoundingBox)>> = BTreeMap::new();
        for &(frame, id, bbox) in boxes {
            by_id.entry(id).or_default().push((frame, bbox));
        }
        let to_kmh = |d_px: f64, frames: u64| d_px * gsd_km_per_px * fps / frames as f64 * 3600.0;
        let mut rows = Vec::with_capacity(boxes.len());
        for (&id, seq) in by_id.iter_mut() {
            seq.sort_by_key(|(f, _)| *f);
            for i in 0..seq.len() {
                let pair = if i + 1 < seq.len() {
                    Some((seq[i], seq[i + 1]))
                } else if i > 0 {
                    Some((seq[i - 1], seq[i]))
                } else {
                    None
                };
                let speed_kmh = pair.map(|((f0, b0), (f1, b1))| {
                    let (x0, y0) = b0.center();
                    let (x1, y1) = b1.center();
                    to_kmh((x1 - x0).hypot(y1 - y0), f1 - f0)
                });
                rows.push(TruthRow {
                    frame: seq[i].0,
                    id,
                    bbox: seq[i].1,
                    speed_kmh,
                });
            }
        }
        rows.sort_by_key(|r| (r.frame, r.id));
        let (first_frame, last_frame) = frame_range.unwrap_or_else(|| {
            (
                rows.first().map_or(0, |r| r.frame),
                rows.last().map_or(0, |r| r.frame),
            )
        });
        Self {
            rows,
            first_frame,
            last_frame,
        }
    }

    pub fn vehicle_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.rows.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Truth rendered as active track records, for scoring truth against
    /// itself or feeding it to the statistics.
    pub fn as_records(&self, fps: f64) -> Vec<TrackRecord> {
        let mut prev: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        let mut next_center: BTreeMap<(u64, u64), (f64, f64)> = BTreeMap::new();
        let mut last_seen: BTreeMap<u64, (u64, (f64, f64))> = BTreeMap::new();
        for r in self.rows.iter().rev() {
            if let Some(&(_, c)) = last_seen.get(&r.id) {
                next_center.insert((r.id, r.frame), c);
            }
            last_seen.insert(r.id, (r.frame, r.bbox.center()));
        }
        self.rows
            .iter()
            .map(|r| {
                let c = r.bbox.center();
                let direction = next_center
                    .get(&(r.id, r.frame))
                    .map(|n| (c, *n))
                    .or_else(|| prev.get(&r.id).map(|p| (*p, c)))
                    .and_then(|(a, b)| direction_of(b.0 - a.0, b.1 - a.1));
                prev.insert(r.id, c);
                TrackRecord {
                    track_id: r.id,
                    frame: r.frame,
                    timestamp_s: r.frame as f64 / fps,
                    center_x: c.0,
                    center_y: c.1,
                    width: r.bbox.w,
                    height: r.bbox.h,
                    velocity_kmh: r.speed_kmh,
                    direction,
                    observed: true,
                    status: TrackStatus::Active,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub truth: GroundTruth,
    /// Sorted by frame.
    pub detections: Vec<Detection>,
}

struct Vehicle {
    id: u64,
    lane: usize,
    cx: f64,
    w: f64,
    h: f64,
}

fn draw_size(rng: &mut ChaCha8Rng, b: &BoxSize) -> (f64, f64) {
    let mut jitter = |mean: f64| {
        if b.jitter > 0.0 {
            mean + rng.gen_range(-b.jitter..=b.jitter)
        } else {
            mean
        }
    };
    let w = jitter(b.mean_w);
    let h = jitter(b.mean_h);
    (w, h)
}

/// Runs a scenario. Identical configs give identical output.
pub fn generate(sc: &ScenarioConfig) -> Result<SimOutput, SimError> {
    sc.validate()?;
    let cam = &sc.camera;
    let (width, height) = (cam.image_width_px, cam.image_height_px);
    let gsd = sc.gsd_km_per_px();
    let segment_km = sc.segment_length_km();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let noise = Normal::new(0.0, sc.detector.position_sigma_px)
        .map_err(|_| SimError::Negative {
            field: "detector.position_sigma_px",
            value: sc.detector.position_sigma_px,
        })?;
    let fp_dist = (sc.detector.false_positive_rate > 0.0)
        .then(|| Poisson::new(sc.detector.false_positive_rate).expect("positive rate"));
    let cap = match sc.speed_law {
        SpeedLaw::Greenshields { kj_veh_per_km, .. } => sc.entry_cap_fraction * kj_veh_per_km,
        SpeedLaw::Constant { .. } => f64::INFINITY,
    };

    let mut vehicles: Vec<Vehicle> = Vec::new();
    let mut next_id = 1u64;
    for v in &sc.initial_vehicles {
        let (w, h) = draw_size(&mut rng, &sc.box_size);
        vehicles.push(Vehicle {
            id: next_id,
            lane: v.lane,
            cx: v.x_px,
            w,
            h,
        });
        next_id += 1;
    }

    let bbox_of = |v: &Vehicle| BoundingBox::from_center(v.cx, sc.lanes[v.lane].y_px, v.w, v.h);
    let visible = |v: &Vehicle| bbox_of(v).inside_image(width, height);

    let mut truth_boxes = Vec::new();
    let mut detections = Vec::new();
    for frame in 0..sc.duration_frames {
        let p_arrival = sc.arrival_rate_at(frame) / sc.lanes.len() as f64 / cam.fps;
        let density_before = vehicles.iter().filter(|v| visible(v)).count() as f64 / segment_km;
        for (li, lane) in sc.lanes.iter().enumerate() {
            let u: f64 = rng.gen();
            if u >= p_arrival || density_before >= cap {
                continue;
            }
            // The newest vehicle in the lane is the one closest to the entry.
            let entry_edge = if lane.direction > 0 { 0.0 } else { width };
            let blocked = vehicles.iter().rev().find(|v| v.lane == li).is_some_and(|v| {
                let near_edge = if lane.direction > 0 { v.cx - v.w / 2.0 } else { v.cx + v.w / 2.0 };
                (near_edge - entry_edge) * f64::from(lane.direction) < sc.min_gap_px
            });
            if blocked {
                continue;
            }
            let (w, h) = draw_size(&mut rng, &sc.box_size);
            let cx = entry_edge - f64::from(lane.direction) * w / 2.0;
            vehicles.push(Vehicle {
                id: next_id,
                lane: li,
                cx,
                w,
                h,
            });
            next_id += 1;
        }

        let shown: Vec<&Vehicle> = vehicles.iter().filter(|v| visible(v)).collect();
        let speed = sc.speed_law.speed_kmh(shown.len() as f64 / segment_km);
        for v in &shown {
            truth_boxes.push((frame, v.id, bbox_of(v)));
        }

        for v in &shown {
            let b = bbox_of(v);
            let (cx, cy) = b.center();
            if sc
                .occlusion_zones
                .iter()
                .any(|z| cx >= z.x && cx < z.right() && cy >= z.y && cy < z.bottom())
            {
                continue;
            }
            let u: f64 = rng.gen();
            if u < sc.detector.dropout {
                continue;
            }
            let dx = noise.sample(&mut rng);
            let dy = noise.sample(&mut rng);
            detections.push(Detection::new(frame, b.translated(dx, dy), 0.9));
        }
        if let Some(dist) = &fp_dist {
            let n = dist.sample(&mut rng) as u64;
            let (w, h) = (sc.box_size.mean_w, sc.box_size.mean_h);
            for _ in 0..n {
                let cx = rng.gen_range(w / 2.0..=width - w / 2.0);
                let cy = rng.gen_range(h / 2.0..=height - h / 2.0);
                detections.push(Detection::new(frame, BoundingBox::from_center(cx, cy, w, h), 0.5));
            }
        }

        let step = kmh_to_px_per_frame(speed, gsd, cam.fps);
        for v in &mut vehicles {
            v.cx += f64::from(sc.lanes[v.lane].direction) * step;
        }
        vehicles.retain(|v| {
            let dir = sc.lanes[v.lane].direction;
            if dir > 0 {
                v.cx - v.w / 2.0 <= width
            } else {
                v.cx + v.w / 2.0 >= 0.0
            }
        });
    }

    let last = sc.duration_frames.saturating_sub(1);
    Ok(SimOutput {
        truth: GroundTruth::from_boxes(&truth_boxes, gsd, cam.fps, Some((0, last))),
        detections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub gsd_km_per_px: f64,
    pub fps: f64,
    pub segment_length_km: f64,
    /// Law the truth was generated under; enables the FD error terms.
    pub law: Option<SpeedLaw>,
    pub fd: FdSettings,
}

impl EvalOptions {
    pub fn for_scenario(sc: &ScenarioConfig) -> Self {
        Self {
            gsd_km_per_px: sc.gsd_km_per_px(),
            fps: sc.camera.fps,
            segment_length_km: sc.segment_length_km(),
            law: Some(sc.speed_law),
            fd: FdSettings {
                model: FitModel::Greenshields,
                ..FdSettings::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub id_switches: u64,
    pub track_purity: f64,
    /// `None` when no matched frame carries both speeds.
    pub velocity_rmse_kmh: Option<f64>,
    pub density_mae: f64,
    pub fd_vf_rel_error: Option<f64>,
    pub fd_critical_density_rel_error: Option<f64>,
    pub vehicles: usize,
    pub vehicle_frames: usize,
    pub matched_frames: usize,
}

/// Scores tracker output against ground truth.
///
/// A vehicle's claimant in a frame is the emitted record with the highest
/// IoU against its truth box (IoU > 0, lower id on ties). Switches count
/// claimant changes between consecutive claimed frames; purity is the share
/// of vehicle-frames held by each vehicle's most frequent claimant.
pub fn evaluate(truth: &GroundTruth, output: &[TrackRecord], opts: &EvalOptions) -> Result<EvalReport, EvalError> {
    if truth.rows.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    let (first, last) = (truth.first_frame, truth.last_frame);
    let mut by_frame: BTreeMap<u64, Vec<&TrackRecord>> = BTreeMap::new();
    for r in output {
        if r.frame < first || r.frame > last {
            return Err(EvalError::FrameOutOfRange {
                frame: r.frame,
                first,
                last,
            });
        }
        by_frame.entry(r.frame).or_default().push(r);
    }

    let mut by_vehicle: BTreeMap<u64, Vec<&TruthRow>> = BTreeMap::new();
    for row in &truth.rows {
        by_vehicle.entry(row.id).or_default().push(row);
    }

    let mut switches = 0u64;
    let mut majority_frames = 0usize;
    let mut matched = 0usize;
    let mut sq_err = 0.0;
    let mut speed_pairs = 0usize;
    for rows in by_vehicle.values() {
        let mut prev: Option<u64> = None;
        let mut claims: BTreeMap<u64, usize> = BTreeMap::new();
        for row in rows {
            let Some(best) = best_overlap(&row.bbox, by_frame.get(&row.frame).map_or(&[][..], |v| v)) else {
                continue;
            };
            matched += 1;
            *claims.entry(best.track_id).or_default() += 1;
            if prev.is_some_and(|p| p != best.track_id) {
                switches += 1;
            }
            prev = Some(best.track_id);
            if let (Some(est), Some(actual)) = (best.velocity_kmh, row.speed_kmh) {
                sq_err += (est - actual).powi(2);
                speed_pairs += 1;
            }
        }
        majority_frames += claims.values().copied().max().unwrap_or(0);
    }

    let mut truth_count: BTreeMap<u64, usize> = BTreeMap::new();
    for row in &truth.rows {
        *truth_count.entry(row.frame).or_default() += 1;
    }
    let frames = last - first + 1;
    let abs_err: f64 = (first..=last)
        .map(|f| {
            let emitted = by_frame
                .get(&f)
                .map_or(0, |v| v.iter().filter(|r| r.status.counts_as_vehicle()).count());
            let actual = truth_count.get(&f).copied().unwrap_or(0);
            (emitted as f64 - actual as f64).abs()
        })
        .sum();

    let (fd_vf_rel_error, fd_critical_density_rel_error) = fd_errors(output, opts, (first, last))
        .map_or((None, None), |(a, b)| (Some(a), Some(b)));

    Ok(EvalReport {
        id_switches: switches,
        track_purity: majority_frames as f64 / truth.rows.len() as f64,
        velocity_rmse_kmh: (speed_pairs > 0).then(|| (sq_err / speed_pairs as f64).sqrt()),
        density_mae: abs_err / frames as f64,
        fd_vf_rel_error,
        fd_critical_density_rel_error,
        vehicles: by_vehicle.len(),
        vehicle_frames: truth.rows.len(),
        matched_frames: matched,
    })
}

fn best_overlap<'a>(truth: &BoundingBox, candidates: &[&'a TrackRecord]) -> Option<&'a TrackRecord> {
    let mut best: Option<(&TrackRecord, f64)> = None;
    for &r in candidates {
        let score = iou(truth, &r.bbox());
        if score <= 0.0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, s)) => score > s || (score == s && r.track_id < b.track_id),
        };
        if better {
            best = Some((r, score));
        }
    }
    best.map(|(r, _)| r)
}

fn fd_errors(output: &[TrackRecord], opts: &EvalOptions, range: (u64, u64)) -> Option<(f64, f64)> {
    let (vf, kc) = opts.law?.fd_parameters()?;
    let stats = compute_frame_stats(output, opts.segment_length_km, &[], opts.fps, Some(range)).ok()?;
    let samples = fd::samples_from_stats(&stats, AxisMode::Density);
    let settings = FdSettings {
        axis_mode: AxisMode::Density,
        ..opts.fd
    };
    let curve = fd::build_curve(&samples, &settings).ok()?;
    let vf_fit = match curve.fit.model {
        SpeedModel::Greenshields { vf, .. } => vf,
        m @ SpeedModel::Quadratic { .. } => m.free_flow_speed(),
    };
    Some(((vf_fit - vf).abs() / vf, (curve.critical_density - kc).abs() / kc))
}

/// Ready-made scenarios on the 4 cm/px reference camera.
pub mod scenarios {
    use super::*;

    fn base(seed: u64, duration_frames: u64, lanes: Vec<Lane>, speed_law: SpeedLaw) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            duration_frames,
            camera: CameraModel::four_cm_per_px(),
            lanes,
            arrival_rate_veh_s: 0.0,
            demand: Vec::new(),
            speed_law,
            box_size: BoxSize::default(),
            detector: DetectorModel::perfect(),
            occlusion_zones: Vec::new(),
            initial_vehicles: Vec::new(),
            entry_cap_fraction: default_entry_cap(),
            min_gap_px: default_min_gap(),
        }
    }

    fn two_lanes() -> Vec<Lane> {
        vec![
            Lane {
                y_px: 1000.0,
                direction: 1,
            },
            Lane {
                y_px: 1200.0,
                direction: -1,
            },
        ]
    }

    /// Two opposing lanes at 50 km/h with steady arrivals and a realistic
    /// detector: 1 px jitter, 5 % dropout, 0.5 false positives per frame.
    pub fn standard_two_lane(seed: u64) -> ScenarioConfig {
        let mut sc = base(seed, 1000, two_lanes(), SpeedLaw::Constant { v0_kmh: 50.0 });
        sc.arrival_rate_veh_s = 0.6;
        sc.detector = DetectorModel {
            position_sigma_px: 1.0,
            dropout: 0.05,
            false_positive_rate: 0.5,
        };
        sc.initial_vehicles = [(0, 600.0), (0, 1800.0), (0, 3000.0), (1, 900.0), (1, 2100.0), (1, 3300.0)]
            .into_iter()
            .map(|(lane, x_px)| InitialVehicle { lane, x_px })
            .collect();
        sc
    }

    /// One vehicle crossing the image at a constant speed, entering at
    /// x = 200 px. `duration_frames` must keep it inside the image.
    pub fn single_vehicle(seed: u64, speed_kmh: f64, sigma_px: f64, duration_frames: u64) -> ScenarioConfig {
        let mut sc = base(
            seed,
            duration_frames,
            vec![Lane {
                y_px: 1080.0,
                direction: 1,
            }],
            SpeedLaw::Constant { v0_kmh: speed_kmh },
        );
        sc.initial_vehicles = vec![InitialVehicle { lane: 0, x_px: 200.0 }];
        sc.detector.position_sigma_px = sigma_px;
        sc
    }

    /// Three vehicles at 36 km/h (10 px/frame) passing an occlusion zone
    /// that hides each of them for exactly `occluded_frames` frames.
    pub fn occlusion(seed: u64, occluded_frames: u64) -> ScenarioConfig {
        let mut sc = base(
            seed,
            350,
            vec![Lane {
                y_px: 1080.0,
                direction: 1,
            }],
            SpeedLaw::Constant { v0_kmh: 36.0 },
        );
        sc.initial_vehicles = [300.0, 900.0, 1500.0]
            .into_iter()
            .map(|x_px| InitialVehicle { lane: 0, x_px })
            .collect();
        // Centers sit on multiples of 10 px, so a zone 10·n px wide starting
        // on one of them hides exactly n frames.
        sc.occlusion_zones = vec![BoundingBox::new(1900.0, 980.0, 10.0 * occluded_frames as f64, 200.0)];
        sc.detector.position_sigma_px = 0.5;
        sc
    }

    /// Greenshields traffic (vf = 100 km/h, kj = 100 veh/km) whose demand
    /// rises past capacity into congestion and then drains.
    pub fn fd_ramp(seed: u64) -> ScenarioConfig {
        let mut sc = base(
            seed,
            12_000,
            two_lanes(),
            SpeedLaw::Greenshields {
                vf_kmh: 100.0,
                kj_veh_per_km: 100.0,
            },
        );
        sc.demand = [(0, 0.05), (4000, 1.2), (6000, 1.2), (9000, 0.0)]
            .into_iter()
            .map(|(frame, rate_veh_s)| DemandPoint { frame, rate_veh_s })
            .collect();
        sc.detector.position_sigma_px = 0.5;
        sc
    }

    /// The same scenario with a perfect detector.
    pub fn noiseless(mut sc: ScenarioConfig) -> ScenarioConfig {
        sc.detector = DetectorModel::perfect();
        sc
    }
}
