//! Ground sample distance and pixel-to-metric speed conversion.

use serde::{Deserialize, Serialize};

use crate::model::CameraModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsdResult {
    /// Metres per pixel along the image height.
    pub gsd_h: f64,
    /// Metres per pixel along the image width.
    pub gsd_w: f64,
    /// Coarser of the two, in kilometres per pixel.
    pub gsd_final: f64,
}

/// Ground footprint of one pixel for a nadir camera.
///
/// `gsd_h = altitude · sensor_height / (focal · image_height)` and likewise
/// for width; the larger (coarser) value is kept and converted to km/px.
pub fn compute_gsd(cam: &CameraModel) -> GsdResult {
    let gsd_h = cam.altitude_m * cam.sensor_height_mm / (cam.focal_length_mm * cam.image_height_px);
    let gsd_w = cam.altitude_m * cam.sensor_width_mm / (cam.focal_length_mm * cam.image_width_px);
    GsdResult {
        gsd_h,
        gsd_w,
        gsd_final: gsd_h.max(gsd_w) / 1000.0,
    }
}

/// Distance in km between two pixel points.
pub fn px_point_distance_km(p1: (f64, f64), p2: (f64, f64), gsd_final: f64) -> f64 {
    let dx = (p2.0 - p1.0).abs() * gsd_final;
    let dy = (p2.1 - p1.1).abs() * gsd_final;
    (dx * dx + dy * dy).sqrt()
}

/// Speed in km/h from per-step pixel displacements.
///
/// The summed ground distance (km) is covered in `frame_difference` frames,
/// i.e. `frame_difference / fps` seconds; ×3600 turns km/s into km/h.
/// Returns `None` for an empty window or a zero frame difference.
pub fn track_velocity_kmh(
    displacements_px: &[f64],
    gsd_final: f64,
    fps: f64,
    frame_difference: u64,
) -> Option<f64> {
    if displacements_px.is_empty() || frame_difference == 0 {
        return None;
    }
    let distance_km: f64 = displacements_px.iter().map(|d| d * gsd_final).sum();
    Some(distance_km * fps / frame_difference as f64 * 3600.0)
}

/// Converts a ground speed into pixels per frame.
pub fn kmh_to_px_per_frame(speed_kmh: f64, gsd_final: f64, fps: f64) -> f64 {
    speed_kmh / 3600.0 / fps / gsd_final
}
