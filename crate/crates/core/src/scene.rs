//! Ground-truth world: parametric objects on configurable trajectories and a
//! virtual depth camera with noise and failure injection. Stands in for the
//! real camera and neural tracker.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{AxisAngle, Frame, PointCloud, Pose};

/// Parametric object primitive; dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Width, depth, height.
    Box { w: f64, d: f64, h: f64 },
    Cylinder { r: f64, h: f64 },
    Sphere { r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectModel {
    pub shape: Shape,
    pub surface_samples: usize,
}

impl ObjectModel {
    pub fn new(shape: Shape, surface_samples: usize) -> Self {
        match shape {
            Shape::Box { w, d, h } => assert!(w > 0.0 && d > 0.0 && h > 0.0),
            Shape::Cylinder { r, h } => assert!(r > 0.0 && h > 0.0),
            Shape::Sphere { r } => assert!(r > 0.0),
        }
        assert!(surface_samples > 0);
        Self { shape, surface_samples }
    }

    pub fn bounding_radius(&self) -> f64 {
        match self.shape {
            Shape::Box { w, d, h } => 0.5 * (w * w + d * d + h * h).sqrt(),
            Shape::Cylinder { r, h } => (r * r + 0.25 * h * h).sqrt(),
            Shape::Sphere { r } => r,
        }
    }

    /// Seeded surface samples with outward normals, in the object frame.
    /// The same seed yields the same physical surface points every call.
    pub fn sample_surface(&self, seed: u64) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.surface_samples;
        let mut out = Vec::with_capacity(n);
        match self.shape {
            Shape::Box { w, d, h } => {
                let half = [w / 2.0, d / 2.0, h / 2.0];
                let areas = [d * h, d * h, w * h, w * h, w * d, w * d];
                let total: f64 = areas.iter().sum();
                for _ in 0..n {
                    let mut pick = rng.gen_range(0.0..total);
                    let mut face = 0;
                    for (i, a) in areas.iter().enumerate() {
                        if pick < *a {
                            face = i;
                            break;
                        }
                        pick -= a;
                    }
                    let axis = face / 2;
                    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                    let mut p = Vector3::zeros();
                    let mut normal = Vector3::zeros();
                    for k in 0..3 {
                        if k == axis {
                            p[k] = sign * half[k];
                            normal[k] = sign;
                        } else {
                            p[k] = rng.gen_range(-half[k]..half[k]);
                        }
                    }
                    out.push((p, normal));
                }
            }
            Shape::Cylinder { r, h } => {
                let side = 2.0 * std::f64::consts::PI * r * h;
                let cap = std::f64::consts::PI * r * r;
                let total = side + 2.0 * cap;
                for _ in 0..n {
                    let pick = rng.gen_range(0.0..total);
                    if pick < side {
                        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
                        let z = rng.gen_range(-h / 2.0..h / 2.0);
                        let normal = Vector3::new(ang.cos(), ang.sin(), 0.0);
                        out.push((Vector3::new(r * ang.cos(), r * ang.sin(), z), normal));
                    } else {
                        let top = pick < side + cap;
                        let z = if top { h / 2.0 } else { -h / 2.0 };
                        let nz = if top { 1.0 } else { -1.0 };
                        let rad = r * rng.gen_range(0.0f64..1.0).sqrt();
                        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
                        out.push((
                            Vector3::new(rad * ang.cos(), rad * ang.sin(), z),
                            Vector3::new(0.0, 0.0, nz),
                        ));
                    }
                }
            }
            Shape::Sphere { r } => {
                for _ in 0..n {
                    // Box-Muller pairs give an isotropic direction
                    let mut v = Vector3::zeros();
                    loop {
                        for k in 0..3 {
                            let u1: f64 = rng.gen_range(1e-12..1.0);
                            let u2: f64 = rng.gen_range(0.0..1.0);
                            v[k] = (-2.0 * u1.ln()).sqrt()
                                * (2.0 * std::f64::consts::PI * u2).cos();
                        }
                        if v.norm() > 1e-9 {
                            break;
                        }
                    }
                    let dir = v.normalize();
                    out.push((dir * r, dir));
                }
            }
        }
        out
    }
}

/// Object motion over time.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryKind {
    /// Constant velocity, m/s.
    Linear(Vector3<f64>),
    /// Piecewise pose waypoints with strictly increasing times.
    Waypoints(Vec<(f64, Pose<f64>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Pose<f64>,
    pub kind: TrajectoryKind,
}

/// Ground-truth object pose at time `t`. Beyond the last waypoint the pose is
/// held.
pub fn object_pose_at(traj: &Trajectory, t: f64) -> Pose<f64> {
    assert!(t >= 0.0);
    match &traj.kind {
        TrajectoryKind::Linear(v) => Pose::new(
            traj.start.translation + v * t,
            traj.start.orientation,
        ),
        TrajectoryKind::Waypoints(points) => {
            let mut prev = (0.0, traj.start);
            for wp in points {
                if t <= wp.0 {
                    let span = wp.0 - prev.0;
                    if span <= 0.0 {
                        return wp.1;
                    }
                    let alpha = (t - prev.0) / span;
                    return interpolate_pose(&prev.1, &wp.1, alpha);
                }
                prev = *wp;
            }
            prev.1
        }
    }
}

/// Linear translation, constant-axis rotation interpolation.
fn interpolate_pose(a: &Pose<f64>, b: &Pose<f64>, alpha: f64) -> Pose<f64> {
    let translation = a.translation + (b.translation - a.translation) * alpha;
    let ra = a.orientation.to_matrix();
    let rel = AxisAngle::from_matrix(&(b.orientation.to_matrix() * ra.transpose()));
    let step = AxisAngle::new(rel.vector() * alpha).to_matrix();
    Pose::new(translation, AxisAngle::from_matrix(&(step * ra)))
}

/// Pinhole-style depth camera with symmetric field-of-view half-angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Horizontal / vertical field-of-view half-angles, radians.
    pub hfov: f64,
    pub vfov: f64,
    pub min_depth: f64,
    pub max_depth: f64,
    /// Additive Gaussian noise per point coordinate, meters.
    pub noise_sigma: f64,
    pub sample_rate: f64,
    /// Below this many visible points the tracker is considered lost.
    pub min_points: usize,
    /// Uniform background outliers injected per frame.
    pub clutter_points: usize,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.min_depth > 0.0 && self.min_depth < self.max_depth) {
            return Err("camera: need 0 < min_depth < max_depth".into());
        }
        if self.noise_sigma < 0.0 {
            return Err("camera: noise_sigma must be >= 0".into());
        }
        Ok(())
    }
}

/// Scripted perception failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    TrackingLoss,
    IcpCorruption,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureInterval {
    pub start: f64,
    pub end: f64,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FailureSchedule {
    pub intervals: Vec<FailureInterval>,
}

impl FailureSchedule {
    pub fn validate(&self) -> Result<(), String> {
        for kind in [FailureKind::TrackingLoss, FailureKind::IcpCorruption] {
            let mut spans: Vec<(f64, f64)> = self
                .intervals
                .iter()
                .filter(|i| i.kind == kind)
                .map(|i| (i.start, i.end))
                .collect();
            spans.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for w in spans.windows(2) {
                if w[0].1 > w[1].0 {
                    return Err(format!("failures: overlapping {kind:?} intervals"));
                }
            }
        }
        Ok(())
    }

    fn active(&self, kind: FailureKind, t: f64) -> bool {
        self.intervals
            .iter()
            .any(|i| i.kind == kind && t >= i.start && t < i.end)
    }

    pub fn tracking_lost(&self, t: f64) -> bool {
        self.active(FailureKind::TrackingLoss, t)
    }

    pub fn icp_corrupted(&self, t: f64) -> bool {
        self.active(FailureKind::IcpCorruption, t)
    }
}

/// One synthetic depth observation of the object, in the camera frame.
///
/// Visibility is a frustum test plus an outward-normal hemisphere test; the
/// primitives are convex, so that captures self-occlusion exactly. Returns
/// `None` (tracking loss) during scripted loss intervals or when fewer than
/// `min_points` surface points are visible.
pub fn observe(
    camera: &CameraModel,
    cam_pose: &Pose<f64>,
    object: &ObjectModel,
    samples: &[(Vector3<f64>, Vector3<f64>)],
    obj_pose: &Pose<f64>,
    t: f64,
    schedule: &FailureSchedule,
    seed: u64,
) -> Option<PointCloud<f64>> {
    debug_assert_eq!(samples.len(), object.surface_samples);
    if schedule.tracking_lost(t) {
        return None;
    }
    let world_from_obj = obj_pose.to_transform();
    let cam_from_world = cam_pose.to_transform().inverse();
    let tan_h = camera.hfov.tan();
    let tan_v = camera.vfov.tan();

    let mut visible = Vec::new();
    for (p_obj, n_obj) in samples {
        let p_world = world_from_obj.apply(p_obj);
        let p_cam = cam_from_world.apply(&p_world);
        if p_cam.z < camera.min_depth || p_cam.z > camera.max_depth {
            continue;
        }
        if p_cam.x.abs() > p_cam.z * tan_h || p_cam.y.abs() > p_cam.z * tan_v {
            continue;
        }
        let n_cam = cam_from_world.rotation * (world_from_obj.rotation * n_obj);
        if n_cam.dot(&p_cam) >= 0.0 {
            continue; // back-facing
        }
        visible.push(p_cam);
    }
    if visible.len() < camera.min_points {
        return None;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if camera.noise_sigma > 0.0 {
        for p in &mut visible {
            for k in 0..3 {
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                p[k] += camera.noise_sigma * g;
            }
        }
    }
    for _ in 0..camera.clutter_points {
        let z = rng.gen_range(camera.min_depth..camera.max_depth);
        let x = rng.gen_range(-z * tan_h..z * tan_h);
        let y = rng.gen_range(-z * tan_v..z * tan_v);
        visible.push(Vector3::new(x, y, z));
    }
    Some(PointCloud::new(visible, Frame::Camera))
}
