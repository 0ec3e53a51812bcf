//! The full system parameter record with defaults and validation.

use serde::{Deserialize, Serialize};

use crate::control::ControlGains;
use crate::estimation::KalmanConfig;
use crate::fusion::FusionConfig;
use crate::grasp::MetricWeights;
use crate::icp::IcpConfig;

/// Every tuning constant of the pipeline in one validated record.
/// Field names follow the symbol names used throughout the modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Maximal deviation from median depth, m.
    pub c_z: f64,
    /// Minimal ICP alignment fitness score.
    pub c_a_f: f64,
    /// Linear velocity limit for a valid alignment, m/s.
    pub c_a_v: f64,
    /// Rotational velocity limit for a valid alignment, rad/s.
    pub c_a_w: f64,
    /// Number of previous observations considered for filtering.
    pub n_s: usize,
    /// Correspondence radius for two points, m.
    pub epsilon: f64,
    /// Metric weight for success score.
    pub c_m_s: f64,
    /// Metric weight for translational distance (used by magnitude).
    pub c_m_t: f64,
    /// Metric weight for rotational distance (used by magnitude).
    pub c_m_r: f64,
    /// Distance threshold for camera orientation towards object, m.
    pub c_o: f64,
    /// Distance threshold for grasp pose alignment, m.
    pub c_g: f64,
    /// Proportional control constant (translation).
    pub c_p_v: f64,
    /// Derivative control constant (translation).
    pub c_d_v: f64,
    /// Proportional control constant (rotation).
    pub c_p_w: f64,
    /// Derivative control constant (rotation).
    pub c_d_w: f64,
    /// Grasp execution threshold.
    pub c_e: f64,

    // --- simulator / implementation constants ---
    /// Model point-cloud cap after downsampling.
    pub n_max: usize,
    /// Basis point count of the BPS encoding.
    pub n_bps: usize,
    /// BPS ball center in the camera frame, m.
    pub bps_center: [f64; 3],
    /// BPS ball radius, m.
    pub bps_radius: f64,
    /// ICP correspondence radius, m.
    pub icp_radius: f64,
    pub icp_max_iterations: usize,
    pub icp_eps: f64,
    /// Kalman process noise (position), m^2 per step.
    pub q_pos: f64,
    /// Kalman process noise (velocity), (m/s)^2 per step.
    pub q_vel: f64,
    /// Kalman measurement noise, m^2.
    pub r_meas: f64,
    /// Kalman initial covariance diagonal.
    pub p0: f64,
    /// Commanded linear velocity cap, m/s.
    pub v_cap: f64,
    /// Commanded angular velocity cap, rad/s.
    pub w_cap: f64,
    /// First-order actuator lag time constant, s (0 = ideal plant).
    pub lag_tau: f64,
    /// Workspace ball radius around the robot base, m.
    pub workspace_radius: f64,
    /// Grasp proposals generated per control tick.
    pub proposal_count: usize,
    /// Metric margin a challenger must clear to replace the current grasp.
    pub hysteresis: f64,
    /// Palm clearance beyond the object surface in proposed grasps, m.
    pub palm_offset: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            c_z: 0.1,
            c_a_f: 0.8,
            c_a_v: 4.0,
            c_a_w: 4.0,
            n_s: 5,
            epsilon: 0.01,
            c_m_s: 1.0,
            c_m_t: -0.1,
            c_m_r: -0.2,
            c_o: 0.2,
            c_g: 0.05,
            c_p_v: 1.0,
            c_d_v: 2.0,
            c_p_w: 2.5,
            c_d_w: 5.0,
            c_e: 0.7,
            n_max: 2048,
            n_bps: 4096,
            bps_center: [0.0, 0.0, 0.45],
            bps_radius: 0.6,
            icp_radius: 0.02,
            icp_max_iterations: 30,
            icp_eps: 1e-6,
            q_pos: 1e-6,
            q_vel: 1e-5,
            r_meas: 4e-6,
            p0: 1e-2,
            v_cap: 0.5,
            w_cap: 1.5,
            lag_tau: 0.0,
            workspace_radius: 0.9,
            proposal_count: 32,
            hysteresis: 0.02,
            palm_offset: 0.05,
        }
    }
}

impl SystemParams {
    /// Check all invariants; returns every offending key.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut bad = Vec::new();
        let mut req = |ok: bool, key: &str, why: &str| {
            if !ok {
                bad.push(format!("{key}: {why}"));
            }
        };
        req(self.c_o > self.c_g, "c_o", "must exceed c_g");
        req(self.c_g > 0.0, "c_g", "must be positive");
        req(self.c_e > 0.0 && self.c_e < 1.0, "c_e", "must lie in (0, 1)");
        req(self.c_z > 0.0, "c_z", "must be positive");
        req((0.0..=1.0).contains(&self.c_a_f), "c_a_f", "must lie in [0, 1]");
        req(self.c_a_v > 0.0, "c_a_v", "must be positive");
        req(self.c_a_w > 0.0, "c_a_w", "must be positive");
        req(self.n_s > 0, "n_s", "must be positive");
        req(self.epsilon > 0.0, "epsilon", "must be positive");
        req(self.n_max > 0, "n_max", "must be positive");
        req(self.n_bps > 0, "n_bps", "must be positive");
        req(self.bps_radius > 0.0, "bps_radius", "must be positive");
        req(self.icp_radius > 0.0, "icp_radius", "must be positive");
        req(self.icp_max_iterations > 0, "icp_max_iterations", "must be positive");
        req(self.icp_eps > 0.0, "icp_eps", "must be positive");
        req(self.q_pos > 0.0, "q_pos", "must be positive");
        req(self.q_vel > 0.0, "q_vel", "must be positive");
        req(self.r_meas > 0.0, "r_meas", "must be positive");
        req(self.p0 > 0.0, "p0", "must be positive");
        req(self.v_cap > 0.0, "v_cap", "must be positive");
        req(self.w_cap > 0.0, "w_cap", "must be positive");
        req(self.lag_tau >= 0.0, "lag_tau", "must be non-negative");
        req(self.workspace_radius > 0.0, "workspace_radius", "must be positive");
        req(self.proposal_count > 0, "proposal_count", "must be positive");
        req(self.hysteresis >= 0.0, "hysteresis", "must be non-negative");
        req(self.palm_offset > 0.0, "palm_offset", "must be positive");
        if bad.is_empty() {
            if self.c_m_t < 0.0 || self.c_m_r < 0.0 {
                eprintln!(
                    "note: negative metric distance weights (c_m_t={}, c_m_r={}) \
                     are applied by magnitude so distance always penalizes",
                    self.c_m_t, self.c_m_r
                );
            }
            Ok(())
        } else {
            Err(bad)
        }
    }

    pub fn icp_config(&self) -> IcpConfig<f64> {
        IcpConfig {
            correspondence_radius: self.icp_radius,
            max_iterations: self.icp_max_iterations,
            convergence_eps: self.icp_eps,
            fitness_threshold: self.c_a_f,
            max_linear_speed: self.c_a_v,
            max_angular_speed: self.c_a_w,
        }
    }

    pub fn fusion_config(&self) -> FusionConfig<f64> {
        FusionConfig {
            c_z: self.c_z,
            epsilon: self.epsilon,
            n_s: self.n_s,
            n_max: self.n_max,
            icp: self.icp_config(),
        }
    }

    pub fn kalman_config(&self) -> KalmanConfig<f64> {
        KalmanConfig { q_pos: self.q_pos, q_vel: self.q_vel, r_meas: self.r_meas, p0: self.p0 }
    }

    pub fn gains(&self) -> ControlGains {
        ControlGains {
            c_p_v: self.c_p_v,
            c_d_v: self.c_d_v,
            c_p_w: self.c_p_w,
            c_d_w: self.c_d_w,
            c_o: self.c_o,
            c_g: self.c_g,
            c_e: self.c_e,
            v_cap: self.v_cap,
            w_cap: self.w_cap,
        }
    }

    pub fn metric_weights(&self) -> MetricWeights {
        MetricWeights { c_m_s: self.c_m_s, c_m_t: self.c_m_t, c_m_r: self.c_m_r }
    }
}
