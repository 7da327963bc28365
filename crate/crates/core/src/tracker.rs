//! Frame-by-frame multi-vehicle tracking.
//!
//! Each step predicts every live track, associates the predicted boxes with
//! the frame's detections, corrects matched tracks, spawns tentative tracks
//! for leftovers and lets unmatched tracks coast through occlusions on a
//! linear motion model until their miss budget runs out.

use thiserror::Error;

use crate::assoc::{score_matrix, solve_assignment, solve_greedy, AssocError};
use crate::geo::{compute_gsd, track_velocity_kmh};
use crate::kalman::{ConstantVelocityFilter, KalmanError};
use crate::model::{
    BoundingBox, CameraModel, Detection, Direction, HistoryEntry, MatchingMode, Track,
    TrackRecord, TrackStatus, TrackerConfig,
};

#[derive(Debug, Error, PartialEq)]
pub enum TrackerError {
    #[error("frame {frame} is not after the last processed frame {current}")]
    OutOfOrder { frame: u64, current: u64 },
    #[error("detection for frame {found} passed to step for frame {expected}")]
    MixedFrames { expected: u64, found: u64 },
    #[error("detection {index} in frame {frame} has an invalid box")]
    InvalidBox { frame: u64, index: usize },
    #[error(transparent)]
    Assoc(#[from] AssocError),
    #[error(transparent)]
    Kalman(#[from] KalmanError),
}

/// Everything needed to turn pixel displacements into km/h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityScale {
    pub gsd_km_per_px: f64,
    pub fps: f64,
}

impl VelocityScale {
    pub fn from_camera(cam: &CameraModel) -> Self {
        Self {
            gsd_km_per_px: compute_gsd(cam).gsd_final,
            fps: cam.fps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    filter: ConstantVelocityFilter,
    scale: VelocityScale,
    image_size: Option<(f64, f64)>,
    tracks: Vec<Track>,
    next_id: u64,
    current_frame: Option<u64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig, scale: VelocityScale) -> Self {
        Self {
            filter: ConstantVelocityFilter::new(config.noise),
            config,
            scale,
            image_size: None,
            tracks: Vec::new(),
            next_id: 0,
            current_frame: None,
        }
    }

    /// Tracker for footage from `cam`; also enables the image-exit rule.
    pub fn for_camera(config: TrackerConfig, cam: &CameraModel) -> Self {
        let mut t = Self::new(config, VelocityScale::from_camera(cam));
        t.image_size = Some((cam.image_width_px, cam.image_height_px));
        t
    }

    pub fn with_image_size(mut self, width: f64, height: f64) -> Self {
        self.image_size = Some((width, height));
        self
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live (non-removed) tracks in creation order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn current_frame(&self) -> Option<u64> {
        self.current_frame
    }

    /// Processes one frame. Skipped frame indices are stepped through with no
    /// detections first, so the returned rows may span several frames.
    pub fn step(
        &mut self,
        frame: u64,
        detections: &[Detection],
    ) -> Result<Vec<TrackRecord>, TrackerError> {
        if let Some(current) = self.current_frame {
            if frame <= current {
                return Err(TrackerError::OutOfOrder { frame, current });
            }
        }
        for (index, d) in detections.iter().enumerate() {
            if d.frame != frame {
                return Err(TrackerError::MixedFrames {
                    expected: frame,
                    found: d.frame,
                });
            }
            if !d.bbox.is_valid() {
                return Err(TrackerError::InvalidBox { frame, index });
            }
        }

        let mut records = Vec::new();
        if let Some(current) = self.current_frame {
            for gap in current + 1..frame {
                records.extend(self.advance(gap, &[])?);
            }
        }
        records.extend(self.advance(frame, detections)?);
        Ok(records)
    }

    fn advance(
        &mut self,
        frame: u64,
        detections: &[Detection],
    ) -> Result<Vec<TrackRecord>, TrackerError> {
        self.current_frame = Some(frame);

        let predicted: Vec<_> = self
            .tracks
            .iter()
            .map(|t| self.filter.predict(&t.kalman))
            .collect();
        let predicted_boxes: Vec<BoundingBox> = predicted.iter().map(|s| s.bbox()).collect();
        let detection_boxes: Vec<BoundingBox> = detections.iter().map(|d| d.bbox).collect();
        let scores = score_matrix(&predicted_boxes, &detection_boxes);
        let assignment = match self.config.matching {
            MatchingMode::Hungarian => solve_assignment(&scores, self.config.iou_threshold)?,
            MatchingMode::Greedy => solve_greedy(&scores, self.config.iou_threshold)?,
        };

        for &(ti, di) in &assignment.pairs {
            let det = &detections[di];
            let track = &mut self.tracks[ti];
            let mut state = self.filter.correct(&predicted[ti], det.bbox.center())?;
            state.last_box_size = (det.bbox.w, det.bbox.h);
            track.kalman = state;
            track.push_entry(HistoryEntry {
                frame,
                bbox: det.bbox,
                observed: true,
            });
            track.miss_count = 0;
            track.hits += 1;
            match track.status {
                TrackStatus::Tentative if track.hits >= self.config.min_hits_to_confirm => {
                    track.status = TrackStatus::Active
                }
                TrackStatus::Coasting => track.status = TrackStatus::Active,
                _ => {}
            }
        }

        for &ti in &assignment.unmatched_tracks {
            let track = &mut self.tracks[ti];
            handle_occlusion(track, frame, &self.config, &self.filter);
            if let (TrackStatus::Coasting, true, Some((w, h))) =
                (track.status, self.config.remove_on_exit, self.image_size)
            {
                if !track.last_entry().bbox.inside_image(w, h) {
                    track.status = TrackStatus::Removed;
                }
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Removed);

        for &di in &assignment.unmatched_detections {
            let det = &detections[di];
            let mut track = Track::new(self.next_id, frame, det.bbox, self.filter.init(&det.bbox));
            if self.config.min_hits_to_confirm <= 1 {
                track.status = TrackStatus::Active;
            }
            self.next_id += 1;
            self.tracks.push(track);
        }

        let window = self.config.velocity_window as usize;
        for track in &mut self.tracks {
            track.velocity_kmh = window_velocity_kmh(track, window, self.scale);
            track.direction = compute_direction(track, window);
        }

        Ok(self
            .tracks
            .iter()
            .map(|t| record_for(t, self.scale.fps))
            .collect())
    }
}

fn record_for(track: &Track, fps: f64) -> TrackRecord {
    let last = track.last_entry();
    let (cx, cy) = last.bbox.center();
    TrackRecord {
        track_id: track.id,
        frame: last.frame,
        timestamp_s: last.frame as f64 / fps,
        center_x: cx,
        center_y: cy,
        width: last.bbox.w,
        height: last.bbox.h,
        velocity_kmh: track.velocity_kmh,
        direction: track.direction,
        observed: last.observed,
        status: track.status,
    }
}

/// Occlusion handling for a track that found no detection in `frame`.
///
/// Tentative tracks are dropped outright. Confirmed tracks coast: the filter
/// is predicted one frame and corrected with a pseudo-measurement taken from
/// the last observed center plus the mean per-frame displacement over the
/// trailing observed frames. Once the miss budget is exhausted the track is
/// removed.
pub fn handle_occlusion(
    track: &mut Track,
    frame: u64,
    config: &TrackerConfig,
    filter: &ConstantVelocityFilter,
) {
    if track.status == TrackStatus::Removed {
        return;
    }
    if track.status == TrackStatus::Tentative || track.miss_count + 1 > config.max_miss_frames {
        track.status = TrackStatus::Removed;
        return;
    }

    let steps = f64::from(track.miss_count + 1);
    let (dx, dy) = mean_observed_displacement(track, config.motion_model_window as usize);
    let (lx, ly) = track
        .last_observed()
        .map(|e| e.bbox.center())
        .unwrap_or_else(|| track.last_entry().bbox.center());
    let pseudo = (lx + steps * dx, ly + steps * dy);

    let predicted = filter.predict(&track.kalman);
    let corrected = filter.correct(&predicted, pseudo).unwrap_or(predicted);
    track.kalman = corrected;
    let (w, h) = corrected.last_box_size;
    let (cx, cy) = corrected.center();
    track.push_entry(HistoryEntry {
        frame,
        bbox: BoundingBox::from_center(cx, cy, w, h),
        observed: false,
    });
    track.miss_count += 1;
    track.status = TrackStatus::Coasting;
}

/// Mean per-frame center displacement across the last `window` observed
/// entries; zero with fewer than two observations.
pub fn mean_observed_displacement(track: &Track, window: usize) -> (f64, f64) {
    let observed: Vec<&HistoryEntry> = track.history.iter().filter(|e| e.observed).collect();
    let tail = &observed[observed.len().saturating_sub(window.max(2))..];
    match (tail.first(), tail.last()) {
        (Some(first), Some(last)) if last.frame > first.frame => {
            let span = (last.frame - first.frame) as f64;
            let (x0, y0) = first.bbox.center();
            let (x1, y1) = last.bbox.center();
            ((x1 - x0) / span, (y1 - y0) / span)
        }
        _ => (0.0, 0.0),
    }
}

/// The trailing slice of history used for velocity and direction: up to
/// `window` consecutive steps, i.e. `window + 1` entries.
fn window_entries(track: &Track, window: usize) -> &[HistoryEntry] {
    let n = track.history.len();
    &track.history[n.saturating_sub(window + 1)..]
}

/// Center-to-center pixel distances between consecutive history entries in
/// the trailing window. Coasted entries are included.
pub fn velocity_window_displacements(track: &Track, window: usize) -> Vec<f64> {
    window_entries(track, window)
        .windows(2)
        .map(|w| {
            let (x0, y0) = w[0].bbox.center();
            let (x1, y1) = w[1].bbox.center();
            (x1 - x0).hypot(y1 - y0)
        })
        .collect()
}

fn window_velocity_kmh(track: &Track, window: usize, scale: VelocityScale) -> Option<f64> {
    let entries = window_entries(track, window);
    let (first, last) = (entries.first()?, entries.last()?);
    let displacements = velocity_window_displacements(track, window);
    track_velocity_kmh(
        &displacements,
        scale.gsd_km_per_px,
        scale.fps,
        last.frame - first.frame,
    )
}

/// Eight-way heading of the displacement across the velocity window.
pub fn compute_direction(track: &Track, window: usize) -> Option<Direction> {
    if track.observed_count() < 2 {
        return None;
    }
    let entries = window_entries(track, window);
    let (x0, y0) = entries.first()?.bbox.center();
    let (x1, y1) = entries.last()?.bbox.center();
    direction_of(x1 - x0, y1 - y0)
}

/// Quantizes an image-space displacement into 45° sectors centered on the
/// axes. Displacements shorter than half a pixel have no direction.
pub fn direction_of(dx: f64, dy: f64) -> Option<Direction> {
    if dx.hypot(dy) < 0.5 {
        return None;
    }
    // Flip y so angles run counter-clockwise with "top" at +90°.
    let angle = (-dy).atan2(dx).to_degrees();
    let sector = (angle / 45.0).round().rem_euclid(8.0) as usize;
    Some(Direction::SECTORS[sector])
}

/// Runs a fresh tracker over a detection list, stepping every frame from
/// `first_frame` to `last_frame` (defaulting to the detection extent).
pub fn track_detections(
    tracker: &mut Tracker,
    detections: &[Detection],
    frame_range: Option<(u64, u64)>,
) -> Result<Vec<TrackRecord>, TrackerError> {
    let mut sorted: Vec<Detection> = detections.to_vec();
    sorted.sort_by_key(|d| d.frame);
    let (first, last) = match frame_range {
        Some(r) => r,
        None => match (sorted.first(), sorted.last()) {
            (Some(a), Some(b)) => (a.frame, b.frame),
            _ => return Ok(Vec::new()),
        },
    };

    let mut records = Vec::new();
    let mut idx = 0;
    // Detections before the range are ignored.
    while idx < sorted.len() && sorted[idx].frame < first {
        idx += 1;
    }
    for frame in first..=last {
        let start = idx;
        while idx < sorted.len() && sorted[idx].frame == frame {
            idx += 1;
        }
        records.extend(tracker.step(frame, &sorted[start..idx])?);
    }
    Ok(records)
}
