//! Scenario configuration: TOML with section headers, full defaults for
//! every key, unknown keys rejected.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{AxisAngle, Pose};
use crate::params::SystemParams;
use crate::scene::{
    CameraModel, FailureInterval, FailureKind, FailureSchedule, ObjectModel, Shape, Trajectory,
    TrajectoryKind,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {}", .0.join("; "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Conveyor,
    Handover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectConfig {
    /// `box`, `cylinder` or `sphere`.
    pub kind: String,
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub radius: f64,
    pub surface_samples: usize,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        Self {
            kind: "box".into(),
            width: 0.06,
            depth: 0.06,
            height: 0.1,
            radius: 0.03,
            surface_samples: 800,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaypointConfig {
    pub t: f64,
    pub position: [f64; 3],
    pub orientation: [f64; 3],
}

impl Default for WaypointConfig {
    fn default() -> Self {
        Self { t: 0.0, position: [0.0; 3], orientation: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub start_position: [f64; 3],
    pub start_orientation: [f64; 3],
    /// Constant object velocity, used when `waypoints` is empty.
    pub velocity: [f64; 3],
    /// Direction along which sweep speeds are applied.
    pub conveyor_direction: [f64; 3],
    pub waypoints: Vec<WaypointConfig>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            start_position: [0.45, -0.15, 0.05],
            start_orientation: [0.0; 3],
            velocity: [0.0; 3],
            conveyor_direction: [0.0, 1.0, 0.0],
            waypoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub hfov: f64,
    pub vfov: f64,
    pub min_depth: f64,
    pub max_depth: f64,
    pub noise_sigma: f64,
    pub sample_rate: f64,
    pub min_points: usize,
    pub clutter_points: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            hfov: 0.5,
            vfov: 0.4,
            min_depth: 0.15,
            max_depth: 2.0,
            noise_sigma: 0.002,
            sample_rate: 30.0,
            min_points: 20,
            clutter_points: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    pub base: [f64; 3],
    pub start_position: [f64; 3],
    pub start_orientation: [f64; 3],
    pub cam_extrinsic_position: [f64; 3],
    pub cam_extrinsic_orientation: [f64; 3],
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            base: [0.0; 3],
            start_position: [0.45, 0.0, 0.5],
            // palm z (optical axis) pointing straight down
            start_orientation: [std::f64::consts::PI, 0.0, 0.0],
            cam_extrinsic_position: [0.0; 3],
            cam_extrinsic_orientation: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureConfig {
    pub start: f64,
    pub end: f64,
    /// `tracking_loss` or `icp_corruption`.
    pub kind: String,
}

impl Default for FailureConfig {
    fn default() -> Self {
        Self { start: 0.0, end: 0.0, kind: "tracking_loss".into() }
    }
}

/// Full run description; an empty file parses to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Simulated run length, s.
    pub duration: f64,
    /// Control loop rate, Hz.
    pub tick_rate: f64,
    pub object: ObjectConfig,
    pub trajectory: TrajectoryConfig,
    pub camera: CameraConfig,
    pub robot: RobotConfig,
    pub failures: Vec<FailureConfig>,
    pub params: SystemParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Conveyor,
            seed: 0,
            duration: 30.0,
            tick_rate: 30.0,
            object: ObjectConfig::default(),
            trajectory: TrajectoryConfig::default(),
            camera: CameraConfig::default(),
            robot: RobotConfig::default(),
            failures: Vec::new(),
            params: SystemParams::default(),
        }
    }
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl ScenarioConfig {
    pub fn from_str_validated(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str_validated(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut bad = Vec::new();
        if let Err(keys) = self.params.validate() {
            bad.extend(keys.into_iter().map(|k| format!("params.{k}")));
        }
        match self.object.kind.as_str() {
            "box" => {
                if self.object.width <= 0.0 || self.object.depth <= 0.0 || self.object.height <= 0.0
                {
                    bad.push("object: box dimensions must be positive".into());
                }
            }
            "cylinder" => {
                if self.object.radius <= 0.0 || self.object.height <= 0.0 {
                    bad.push("object: cylinder dimensions must be positive".into());
                }
            }
            "sphere" => {
                if self.object.radius <= 0.0 {
                    bad.push("object: sphere radius must be positive".into());
                }
            }
            other => bad.push(format!("object.kind: unknown shape '{other}'")),
        }
        if self.object.surface_samples == 0 {
            bad.push("object.surface_samples: must be positive".into());
        }
        if self.duration <= 0.0 {
            bad.push("duration: must be positive".into());
        }
        if self.tick_rate <= 0.0 {
            bad.push("tick_rate: must be positive".into());
        }
        if let Err(e) = self.camera_model().validate() {
            bad.push(e);
        }
        for (i, f) in self.failures.iter().enumerate() {
            if !matches!(f.kind.as_str(), "tracking_loss" | "icp_corruption") {
                bad.push(format!("failures[{i}].kind: unknown kind '{}'", f.kind));
            }
            if f.end < f.start {
                bad.push(format!("failures[{i}]: end before start"));
            }
        }
        if bad.is_empty() {
            if let Err(e) = self.failure_schedule().validate() {
                bad.push(e);
            }
        }
        let mut times = self.trajectory.waypoints.iter().map(|w| w.t);
        if let Some(first) = times.next() {
            let mut prev = first;
            if first <= 0.0 {
                bad.push("trajectory.waypoints: times must be positive".into());
            }
            for t in times {
                if t <= prev {
                    bad.push("trajectory.waypoints: times must be strictly increasing".into());
                    break;
                }
                prev = t;
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(bad))
        }
    }

    pub fn object_model(&self) -> ObjectModel {
        let shape = match self.object.kind.as_str() {
            "cylinder" => Shape::Cylinder { r: self.object.radius, h: self.object.height },
            "sphere" => Shape::Sphere { r: self.object.radius },
            _ => Shape::Box {
                w: self.object.width,
                d: self.object.depth,
                h: self.object.height,
            },
        };
        ObjectModel::new(shape, self.object.surface_samples)
    }

    pub fn scene_trajectory(&self) -> Trajectory {
        let start = Pose::new(
            vec3(self.trajectory.start_position),
            AxisAngle::new(vec3(self.trajectory.start_orientation)),
        );
        let kind = if self.trajectory.waypoints.is_empty() {
            TrajectoryKind::Linear(vec3(self.trajectory.velocity))
        } else {
            TrajectoryKind::Waypoints(
                self.trajectory
                    .waypoints
                    .iter()
                    .map(|w| {
                        (
                            w.t,
                            Pose::new(vec3(w.position), AxisAngle::new(vec3(w.orientation))),
                        )
                    })
                    .collect(),
            )
        };
        Trajectory { start, kind }
    }

    pub fn camera_model(&self) -> CameraModel {
        CameraModel {
            hfov: self.camera.hfov,
            vfov: self.camera.vfov,
            min_depth: self.camera.min_depth,
            max_depth: self.camera.max_depth,
            noise_sigma: self.camera.noise_sigma,
            sample_rate: self.camera.sample_rate,
            min_points: self.camera.min_points,
            clutter_points: self.camera.clutter_points,
        }
    }

    pub fn failure_schedule(&self) -> FailureSchedule {
        FailureSchedule {
            intervals: self
                .failures
                .iter()
                .map(|f| FailureInterval {
                    start: f.start,
                    end: f.end,
                    kind: if f.kind == "icp_corruption" {
                        FailureKind::IcpCorruption
                    } else {
                        FailureKind::TrackingLoss
                    },
                })
                .collect(),
        }
    }

    pub fn robot_start(&self) -> Pose<f64> {
        Pose::new(
            vec3(self.robot.start_position),
            AxisAngle::new(vec3(self.robot.start_orientation)),
        )
    }

    pub fn cam_extrinsic(&self) -> Pose<f64> {
        Pose::new(
            vec3(self.robot.cam_extrinsic_position),
            AxisAngle::new(vec3(self.robot.cam_extrinsic_orientation)),
        )
    }

    pub fn robot_base(&self) -> Vector3<f64> {
        vec3(self.robot.base)
    }

    /// Sweep helper: constant conveyor motion at `speed` along the configured
    /// direction.
    pub fn with_conveyor_speed(&self, speed: f64) -> Self {
        let mut out = self.clone();
        let dir = vec3(self.trajectory.conveyor_direction);
        let dir = if dir.norm() > 0.0 { dir.normalize() } else { Vector3::y() };
        let v = dir * speed;
        out.trajectory.velocity = [v.x, v.y, v.z];
        out.trajectory.waypoints.clear();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_full_defaults() {
        let cfg = ScenarioConfig::from_str_validated("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.params.c_z, 0.1);
        assert_eq!(cfg.params.c_a_f, 0.8);
        assert_eq!(cfg.params.n_s, 5);
        assert_eq!(cfg.params.epsilon, 0.01);
        assert_eq!(cfg.params.c_e, 0.7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_str_validated("definitely_not_a_key = 1").is_err());
        assert!(ScenarioConfig::from_str_validated("[params]\nbogus = 2").is_err());
    }

    #[test]
    fn ordering_violation_is_a_validation_error() {
        let text = "[params]\nc_o = 0.04\nc_g = 0.05\n";
        match ScenarioConfig::from_str_validated(text) {
            Err(ConfigError::Validation(keys)) => {
                assert!(keys.iter().any(|k| k.contains("c_o")), "{keys:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_stable() {
        let mut cfg = ScenarioConfig::default();
        cfg.seed = 42;
        cfg.mode = Mode::Handover;
        cfg.failures.push(FailureConfig { start: 2.4, end: 10.0, kind: "tracking_loss".into() });
        cfg.params.c_e = 0.65;
        let text = toml::to_string(&cfg).unwrap();
        let again = ScenarioConfig::from_str_validated(&text).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn sweep_speed_override_points_along_conveyor() {
        let cfg = ScenarioConfig::default().with_conveyor_speed(0.2);
        assert_eq!(cfg.trajectory.velocity, [0.0, 0.2, 0.0]);
    }

    #[test]
    fn bad_failure_kind_rejected() {
        let text = "[[failures]]\nstart = 1.0\nend = 2.0\nkind = \"gremlins\"\n";
        assert!(ScenarioConfig::from_str_validated(text).is_err());
    }
}
