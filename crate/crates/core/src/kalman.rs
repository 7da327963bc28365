//! Constant-velocity Kalman filter over box centers.
//!
//! State is `(cx, cy, vx, vy)` in pixels and pixels/frame with a fixed step of
//! one frame. Box size rides along outside the filter.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BoundingBox;

#[derive(Debug, Error, PartialEq)]
pub enum KalmanError {
    #[error("measurement ({0}, {1}) is not finite")]
    NonFiniteMeasurement(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub process_position_var: f64,
    pub process_velocity_var: f64,
    pub measurement_var: f64,
    pub initial_velocity_var: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            process_position_var: 1.0,
            process_velocity_var: 0.25,
            measurement_var: 1.0,
            initial_velocity_var: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    /// `(w, h)` of the most recent box, used to rebuild a box from the mean.
    pub last_box_size: (f64, f64),
}

impl KalmanState {
    pub fn center(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[2], self.mean[3])
    }

    pub fn bbox(&self) -> BoundingBox {
        let (w, h) = self.last_box_size;
        BoundingBox::from_center(self.mean[0], self.mean[1], w, h)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.covariance - self.covariance.transpose()).abs().max() <= tol
    }

    /// Symmetric with non-negative eigenvalues (up to `tol`).
    pub fn is_psd(&self, tol: f64) -> bool {
        let sym = (self.covariance + self.covariance.transpose()) * 0.5;
        let scale = sym.abs().max().max(1.0);
        sym.symmetric_eigenvalues().iter().all(|&l| l >= -tol * scale)
    }
}

/// Transition and noise model shared by every track of one tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocityFilter {
    pub noise: NoiseConfig,
}

impl ConstantVelocityFilter {
    pub fn new(noise: NoiseConfig) -> Self {
        Self { noise }
    }

    fn transition() -> Matrix4<f64> {
        Matrix4::new(
            1.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        )
    }

    fn observation() -> Matrix2x4<f64> {
        Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0,
        )
    }

    pub fn process_noise(&self) -> Matrix4<f64> {
        let p = self.noise.process_position_var;
        let v = self.noise.process_velocity_var;
        Matrix4::from_diagonal(&Vector4::new(p, p, v, v))
    }

    /// Starts a track at the box center with zero velocity.
    pub fn init(&self, bbox: &BoundingBox) -> KalmanState {
        let (cx, cy) = bbox.center();
        let pos_var = self.noise.measurement_var + self.noise.process_position_var;
        let vel_var = self.noise.initial_velocity_var;
        KalmanState {
            mean: Vector4::new(cx, cy, 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::new(pos_var, pos_var, vel_var, vel_var)),
            last_box_size: (bbox.w, bbox.h),
        }
    }

    pub fn predict(&self, s: &KalmanState) -> KalmanState {
        let f = Self::transition();
        let mut covariance = f * s.covariance * f.transpose() + self.process_noise();
        symmetrize(&mut covariance);
        KalmanState {
            mean: f * s.mean,
            covariance,
            last_box_size: s.last_box_size,
        }
    }

    /// Measurement update with a measured center, Joseph-form covariance.
    pub fn correct(
        &self,
        s: &KalmanState,
        measured_center: (f64, f64),
    ) -> Result<KalmanState, KalmanError> {
        let (mx, my) = measured_center;
        if !(mx.is_finite() && my.is_finite()) {
            return Err(KalmanError::NonFiniteMeasurement(mx, my));
        }
        let h = Self::observation();
        let r = Matrix2::identity() * self.noise.measurement_var;
        let innovation = Vector2::new(mx, my) - h * s.mean;
        let s_mat = h * s.covariance * h.transpose() + r;
        let Some(s_inv) = s_mat.try_inverse() else {
            // Prior and measurement both exact; nothing to blend.
            return Ok(*s);
        };
        let gain: Matrix4x2<f64> = s.covariance * h.transpose() * s_inv;
        let i_kh = Matrix4::identity() - gain * h;
        let mut covariance =
            i_kh * s.covariance * i_kh.transpose() + gain * r * gain.transpose();
        symmetrize(&mut covariance);
        Ok(KalmanState {
            mean: s.mean + gain * innovation,
            covariance,
            last_box_size: s.last_box_size,
        })
    }
}

fn symmetrize(m: &mut Matrix4<f64>) {
    *m = (*m + m.transpose()) * 0.5;
}
