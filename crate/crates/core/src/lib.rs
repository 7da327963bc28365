//! Vehicle tracking and fundamental-diagram extraction from aerial detections.
//!
//! Detections per frame go through [`tracker::Tracker`], which associates
//! them by IoU and smooths them with a constant-velocity Kalman filter.
//! [`stats`] turns tracks into per-frame density, speed and flow, and [`fd`]
//! fits the speed-density relation and locates the critical density.

pub mod assoc;
pub mod fd;
pub mod geo;
pub mod io;
pub mod kalman;
pub mod model;
pub mod sim;
pub mod stats;
pub mod tracker;

pub use geo::{compute_gsd, GsdResult};
pub use model::{BoundingBox, CameraModel, Detection, Direction, TrackRecord, TrackStatus, TrackerConfig};
pub use tracker::Tracker;
