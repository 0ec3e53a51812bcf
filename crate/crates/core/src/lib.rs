//! Deterministic desk-scale dynamic-grasping pipeline: synthetic partial-view
//! perception of a moving object, fused target-model reconstruction, grasp
//! proposal and ranking, velocity estimation with dead-reckoning, and a
//! visual-servo control loop deciding when to close the fingers.
//!
//! The math core is generic over the scalar type (`f32`/`f64` via
//! [`scalar::Real`]); the simulation layers fix `f64`. Concrete aliases for
//! the common types live at the crate root.

pub mod bps;
pub mod config;
pub mod control;
pub mod estimation;
pub mod fusion;
pub mod geom;
pub mod grasp;
pub mod harness;
pub mod icp;
pub mod kdtree;
pub mod params;
pub mod scalar;
pub mod scene;

pub use config::{ConfigError, Mode, ScenarioConfig};
pub use control::{ControlGains, LoopTelemetry, LossPolicy, RobotState};
pub use geom::Frame;
pub use grasp::{Grasp, GraspProposer, HeuristicProposer, MetricWeights, Reachability};
pub use harness::{run_scenario, run_sweep, simulate, Outcome, RunSummary};
pub use params::SystemParams;
pub use scalar::Real;

/// Default-precision concrete aliases.
pub type PointCloud = geom::PointCloud<f64>;
pub type RigidTransform = geom::RigidTransform<f64>;
pub type AxisAngle = geom::AxisAngle<f64>;
pub type Pose = geom::Pose<f64>;
pub type IcpConfig = icp::IcpConfig<f64>;
pub type RegistrationResult = icp::RegistrationResult<f64>;
pub type BasisPointSet = bps::BasisPointSet<f64>;
pub type KalmanConfig = estimation::KalmanConfig<f64>;
pub type KalmanState = estimation::KalmanState<f64>;
pub type FusionConfig = fusion::FusionConfig<f64>;

/// Single-precision aliases for the math core.
pub type PointCloudF32 = geom::PointCloud<f32>;
pub type RigidTransformF32 = geom::RigidTransform<f32>;
pub type AxisAngleF32 = geom::AxisAngle<f32>;
