//! Constant-velocity Kalman filtering of the model anchor point and
//! dead-reckoning of grasp and model during feedback loss.

use nalgebra::{Matrix3, Matrix6, Matrix6x3, Vector3, Vector6};

use crate::geom::PointCloud;
use crate::grasp::Grasp;
use crate::scalar::Real;

/// Kalman filter noise configuration.
#[derive(Debug, Clone, Copy)]
pub struct KalmanConfig<T: Real> {
    /// Process noise on position per predict, m^2.
    pub q_pos: T,
    /// Process noise on velocity per predict, (m/s)^2.
    pub q_vel: T,
    /// Measurement noise, m^2.
    pub r_meas: T,
    /// Initial covariance diagonal.
    pub p0: T,
}

impl<T: Real> Default for KalmanConfig<T> {
    fn default() -> Self {
        Self { q_pos: T::c(1e-6), q_vel: T::c(1e-5), r_meas: T::c(4e-6), p0: T::c(1e-2) }
    }
}

/// State `[position; velocity]` with 6x6 covariance.
#[derive(Debug, Clone, Copy)]
pub struct KalmanState<T: Real> {
    pub state: Vector6<T>,
    pub covariance: Matrix6<T>,
}

impl<T: Real> KalmanState<T> {
    pub fn new(position: Vector3<T>, cfg: &KalmanConfig<T>) -> Self {
        let mut state = Vector6::zeros();
        state.fixed_rows_mut::<3>(0).copy_from(&position);
        Self { state, covariance: Matrix6::identity() * cfg.p0 }
    }

    pub fn position(&self) -> Vector3<T> {
        self.state.fixed_rows::<3>(0).into()
    }

    pub fn velocity(&self) -> Vector3<T> {
        self.state.fixed_rows::<3>(3).into()
    }

    /// Constant-velocity predict: position advances by velocity, covariance
    /// picks up process noise.
    pub fn predict(&mut self, dt: T, cfg: &KalmanConfig<T>) {
        let mut f = Matrix6::identity();
        for i in 0..3 {
            f[(i, i + 3)] = dt;
        }
        self.state = f * self.state;
        let mut q = Matrix6::zeros();
        for i in 0..3 {
            q[(i, i)] = cfg.q_pos;
            q[(i + 3, i + 3)] = cfg.q_vel;
        }
        self.covariance = f * self.covariance * f.transpose() + q;
        self.symmetrize();
    }

    /// Position-only measurement update (Joseph form).
    pub fn update(&mut self, measurement: Vector3<T>, cfg: &KalmanConfig<T>) {
        let p_pp: Matrix3<T> = self.covariance.fixed_view::<3, 3>(0, 0).into();
        let r = Matrix3::identity() * cfg.r_meas;
        let s = p_pp + r;
        let s_inv = s.try_inverse().expect("innovation covariance invertible");
        let p_cols: Matrix6x3<T> = self.covariance.fixed_view::<6, 3>(0, 0).into();
        let gain = p_cols * s_inv;
        let innovation = measurement - self.position();
        self.state += gain * innovation;
        // Joseph form: (I - K H) P (I - K H)^T + K R K^T
        let mut kh = Matrix6::zeros();
        kh.fixed_view_mut::<6, 3>(0, 0).copy_from(&gain);
        let i_kh = Matrix6::identity() - kh;
        self.covariance =
            i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        self.symmetrize();
    }

    fn symmetrize(&mut self) {
        self.covariance = (self.covariance + self.covariance.transpose()) * T::c(0.5);
    }

    /// Symmetric positive-semidefiniteness check used by tests.
    pub fn covariance_is_psd(&self, tol: T) -> bool {
        let sym_err = (self.covariance - self.covariance.transpose()).norm();
        if sym_err > tol {
            return false;
        }
        self.covariance
            .symmetric_eigenvalues()
            .iter()
            .all(|&e| e >= -tol)
    }
}

/// Shift grasp and model cloud by the estimated velocity; orientations are
/// left untouched (no rotational-velocity estimate).
pub fn dead_reckon(
    grasp: &Grasp,
    cloud: &PointCloud<f64>,
    velocity: Vector3<f64>,
    dt: f64,
) -> (Grasp, PointCloud<f64>) {
    let shift = velocity * dt;
    let mut g = grasp.clone();
    g.translation += shift;
    let moved = PointCloud::new(
        cloud.points.iter().map(|p| p + shift).collect(),
        cloud.frame,
    );
    (g, moved)
}
