//! Bounding-box state estimation.
//!
//! State is `(cx, cy, w, h, vx, vy)` in pixels and pixels/frame; measurements
//! are `(cx, cy, w, h)`. Prediction goes through a [`MotionModel`], which
//! supplies the transition and its jacobian so a nonlinear model can be
//! linearised in the usual extended-filter way. The default model is linear
//! constant velocity with `dt = 1`.

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::formats::BoundingBox;

pub type StateVector = SVector<f64, 6>;
pub type StateMatrix = SMatrix<f64, 6, 6>;
pub type MeasurementVector = SVector<f64, 4>;
pub type MeasurementMatrix = SMatrix<f64, 4, 4>;
pub type ObservationMatrix = SMatrix<f64, 4, 6>;

pub const DEFAULT_PROCESS_NOISE: f64 = 1.0;
pub const DEFAULT_MEASUREMENT_NOISE: f64 = 10.0;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FilterError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub mean: StateVector,
    pub cov: StateMatrix,
}

impl TrackState {
    pub fn new(mean: StateVector, cov: StateMatrix) -> Self {
        Self { mean, cov }
    }

    /// Zero velocity, tight box prior, wide velocity prior.
    pub fn from_measurement(m: &Measurement) -> Self {
        let z = m.z;
        let mean = StateVector::from_column_slice(&[z[0], z[1], z[2], z[3], 0.0, 0.0]);
        let cov = StateMatrix::from_diagonal(&StateVector::from_column_slice(&[
            10.0, 10.0, 10.0, 10.0, 100.0, 100.0,
        ]));
        Self { mean, cov }
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_center(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub z: MeasurementVector,
}

impl Measurement {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { z: MeasurementVector::new(cx, cy, w, h) }
    }

    pub fn from_bbox(b: &BoundingBox) -> Self {
        let (cx, cy) = b.center();
        Self::new(cx, cy, b.width, b.height)
    }
}

pub trait MotionModel {
    fn transition(&self, mean: &StateVector) -> StateVector;
    /// Jacobian of [`MotionModel::transition`] at `mean`.
    fn jacobian(&self, mean: &StateVector) -> StateMatrix;
    fn process_noise(&self) -> StateMatrix;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocity {
    pub q: f64,
}

impl ConstantVelocity {
    pub fn new(q: f64) -> Self {
        Self { q }
    }

    pub fn matrix() -> StateMatrix {
        let mut f = StateMatrix::identity();
        f[(0, 4)] = 1.0;
        f[(1, 5)] = 1.0;
        f
    }
}

impl MotionModel for ConstantVelocity {
    fn transition(&self, mean: &StateVector) -> StateVector {
        Self::matrix() * mean
    }

    fn jacobian(&self, _mean: &StateVector) -> StateMatrix {
        Self::matrix()
    }

    fn process_noise(&self) -> StateMatrix {
        StateMatrix::from_diagonal(&StateVector::from_column_slice(&[0.25, 0.25, 0.25, 0.25, 1.0, 1.0])) * self.q
    }
}

pub fn observation_matrix() -> ObservationMatrix {
    ObservationMatrix::identity()
}

pub fn measurement_noise(r: f64) -> MeasurementMatrix {
    MeasurementMatrix::identity() * r
}

fn symmetrize(m: &StateMatrix) -> StateMatrix {
    (m + m.transpose()) * 0.5
}

pub fn predict_with<M: MotionModel>(s: &TrackState, model: &M) -> TrackState {
    let jac = model.jacobian(&s.mean);
    TrackState {
        mean: model.transition(&s.mean),
        cov: symmetrize(&(jac * s.cov * jac.transpose() + model.process_noise())),
    }
}

/// One constant-velocity step with process noise scale `q`.
pub fn predict(s: &TrackState, q: f64) -> TrackState {
    predict_with(s, &ConstantVelocity::new(q))
}

struct Innovation {
    residual: MeasurementVector,
    chol: nalgebra::Cholesky<f64, nalgebra::Const<4>>,
}

fn innovation(s: &TrackState, m: &Measurement, r: f64) -> Result<Innovation, FilterError> {
    let h = observation_matrix();
    let cov = h * s.cov * h.transpose() + measurement_noise(r);
    let cov = (cov + cov.transpose()) * 0.5;
    let chol = cov.cholesky().ok_or(FilterError::SingularInnovation)?;
    Ok(Innovation { residual: m.z - h * s.mean, chol })
}

/// Kalman correction with measurement noise `r * I`. The covariance uses the
/// Joseph form so it stays symmetric positive semi-definite.
pub fn update(s: &TrackState, m: &Measurement, r: f64) -> Result<TrackState, FilterError> {
    let h = observation_matrix();
    let inn = innovation(s, m, r)?;
    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ since S and P are symmetric.
    let gain = inn.chol.solve(&(h * s.cov)).transpose();
    let mean = s.mean + gain * inn.residual;
    let i_kh = StateMatrix::identity() - gain * h;
    let cov = i_kh * s.cov * i_kh.transpose() + gain * measurement_noise(r) * gain.transpose();
    Ok(TrackState { mean, cov: symmetrize(&cov) })
}

/// Squared Mahalanobis distance of the measurement from the predicted one.
pub fn mahalanobis_squared(s: &TrackState, m: &Measurement, r: f64) -> Result<f64, FilterError> {
    let inn = innovation(s, m, r)?;
    let solved = inn.chol.solve(&inn.residual);
    Ok(inn.residual.dot(&solved).max(0.0))
}

pub fn mahalanobis(s: &TrackState, m: &Measurement, r: f64) -> Result<f64, FilterError> {
    mahalanobis_squared(s, m, r).map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(mean: [f64; 6], diag: [f64; 6]) -> TrackState {
        TrackState::new(
            StateVector::from_column_slice(&mean),
            StateMatrix::from_diagonal(&StateVector::from_column_slice(&diag)),
        )
    }

    #[test]
    fn predict_moves_center_by_velocity() {
        let s = state([0.0, 0.0, 10.0, 20.0, 1.0, 2.0], [1.0; 6]);
        let p = predict(&s, 0.0);
        assert_eq!(p.mean.as_slice(), &[1.0, 2.0, 10.0, 20.0, 1.0, 2.0]);
        let f = ConstantVelocity::matrix();
        assert_eq!(p.cov, f * s.cov * f.transpose());
    }

    #[test]
    fn stationary_predict_keeps_mean() {
        let s = state([5.0, 6.0, 10.0, 20.0, 0.0, 0.0], [2.0; 6]);
        assert_eq!(predict(&s, 3.0).mean, s.mean);
    }

    #[test]
    fn two_steps_equal_double_dt() {
        let s = state([3.0, -1.0, 10.0, 20.0, 0.5, -2.0], [1.0; 6]);
        let twice = predict(&predict(&s, 0.0), 0.0);
        let mut f2 = StateMatrix::identity();
        f2[(0, 4)] = 2.0;
        f2[(1, 5)] = 2.0;
        assert_eq!(twice.mean, f2 * s.mean);
    }

    #[test]
    fn perfect_measurement_limit() {
        let s = state([0.0, 0.0, 10.0, 20.0, 1.0, 1.0], [10.0, 10.0, 10.0, 10.0, 100.0, 100.0]);
        let m = Measurement::new(4.0, -3.0, 12.0, 18.0);
        let u = update(&s, &m, 1e-12).unwrap();
        for i in 0..4 {
            assert!((u.mean[i] - m.z[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn perfect_prior_limit() {
        let s = state([0.0, 0.0, 10.0, 20.0, 1.0, 1.0], [1e-12; 6]);
        let m = Measurement::new(40.0, -30.0, 12.0, 18.0);
        let u = update(&s, &m, 10.0).unwrap();
        for i in 0..6 {
            assert!((u.mean[i] - s.mean[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_innovation_is_reported() {
        let s = state([0.0; 6], [0.0; 6]);
        let m = Measurement::new(1.0, 1.0, 1.0, 1.0);
        assert_eq!(update(&s, &m, 0.0), Err(FilterError::SingularInnovation));
        assert_eq!(mahalanobis(&s, &m, 0.0), Err(FilterError::SingularInnovation));
    }

    #[test]
    fn mahalanobis_zero_and_identity() {
        let s = state([1.0, 2.0, 3.0, 4.0, 0.0, 0.0], [0.0; 6]);
        assert_eq!(mahalanobis(&s, &Measurement::new(1.0, 2.0, 3.0, 4.0), 1.0).unwrap(), 0.0);
        // zero position covariance and r = 1 gives S = I
        let m = Measurement::new(4.0, 6.0, 3.0, 4.0);
        assert!((mahalanobis(&s, &m, 1.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn from_measurement_initial_state() {
        let s = TrackState::from_measurement(&Measurement::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(s.mean.as_slice(), &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
        assert_eq!(s.cov[(4, 4)], 100.0);
        assert_eq!(s.cov[(0, 0)], 10.0);
        let b = s.bbox();
        assert_eq!((b.left, b.top, b.width, b.height), (-0.5, 0.0, 3.0, 4.0));
    }
}
