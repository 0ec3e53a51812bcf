//! Target model generation: per-observation filtering, ICP registration with
//! validity gating, temporal correspondence filtering, merging and
//! downsampling of the accumulated model point cloud.

use std::collections::VecDeque;
use std::sync::{Arc, RwLock};

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;

use crate::bps::BpsEncoding;
use crate::geom::{apply_transform, PointCloud, Pose, RigidTransform};
use crate::icp::{register_icp, IcpConfig, RegistrationResult};
use crate::kdtree::KdTree;
use crate::scalar::Real;

/// Ring buffer of the most recent registered observation clouds, newest
/// first, kept in the current camera frame.
#[derive(Debug, Clone)]
pub struct ObservationBuffer<T: Real> {
    clouds: VecDeque<PointCloud<T>>,
    capacity: usize,
}

impl<T: Real> ObservationBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        Self { clouds: VecDeque::with_capacity(capacity + 1), capacity }
    }

    pub fn push(&mut self, cloud: PointCloud<T>) {
        self.clouds.push_front(cloud);
        while self.clouds.len() > self.capacity {
            self.clouds.pop_back();
        }
    }

    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.clouds.len() >= self.capacity
    }

    pub fn newest(&self) -> Option<&PointCloud<T>> {
        self.clouds.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PointCloud<T>> {
        self.clouds.iter()
    }

    fn transform_all(&mut self, t: &RigidTransform<T>) {
        for c in &mut self.clouds {
            *c = apply_transform(t, c);
        }
    }
}

/// Accumulated multi-view model of the target.
#[derive(Debug, Clone)]
pub struct ModelPointCloud<T: Real> {
    pub cloud: PointCloud<T>,
    /// Fixed surface feature tracked for velocity estimation, moved by every
    /// accepted registration transform.
    pub anchor: Vector3<T>,
    pub tick: u64,
}

/// Keep the points whose depth stays within `c_z` of the median depth.
///
/// Returns `None` when nothing survives (degenerate observation).
pub fn median_depth_filter<T: Real>(cloud: &PointCloud<T>, c_z: T) -> Option<PointCloud<T>> {
    assert!(!cloud.is_empty(), "median filter on empty cloud");
    let mut depths: Vec<T> = cloud.points.iter().map(|p| p.z).collect();
    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = depths.len();
    let median = if n % 2 == 1 {
        depths[n / 2]
    } else {
        (depths[n / 2 - 1] + depths[n / 2]) / T::c(2.0)
    };
    let kept: Vec<Vector3<T>> = cloud
        .points
        .iter()
        .filter(|p| (p.z - median).abs() <= c_z)
        .copied()
        .collect();
    if kept.is_empty() {
        None
    } else {
        Some(PointCloud::new(kept, cloud.frame))
    }
}

/// Temporal smoothing: keep a point only when every buffered cloud has a
/// neighbor strictly within `epsilon` of it. Passes through while the buffer
/// is still warming up.
pub fn epsilon_ball_filter<T: Real>(
    current: &PointCloud<T>,
    buffer: &ObservationBuffer<T>,
    epsilon: T,
) -> PointCloud<T> {
    if !buffer.is_full() {
        return current.clone();
    }
    let trees: Vec<KdTree<T>> = buffer.iter().map(|c| KdTree::build(&c.points)).collect();
    let kept: Vec<Vector3<T>> = current
        .points
        .iter()
        .filter(|p| trees.iter().all(|t| t.any_within(p, epsilon)))
        .copied()
        .collect();
    PointCloud::new(kept, current.frame)
}

/// Union of model and observation, randomly downsampled to at most `n_max`
/// points. The anchor is carried over untouched.
pub fn merge_and_downsample<T: Real>(
    model: &ModelPointCloud<T>,
    observation: &PointCloud<T>,
    n_max: usize,
    rng: &mut ChaCha8Rng,
) -> ModelPointCloud<T> {
    let mut points = model.cloud.points.clone();
    points.extend_from_slice(&observation.points);
    if points.len() > n_max {
        let mut keep = rand::seq::index::sample(rng, points.len(), n_max).into_vec();
        keep.sort_unstable();
        points = keep.into_iter().map(|i| points[i]).collect();
    }
    ModelPointCloud {
        cloud: PointCloud::new(points, model.cloud.frame),
        anchor: model.anchor,
        tick: model.tick,
    }
}

/// Fusion pipeline parameters (a view into the system parameter set).
#[derive(Debug, Clone, Copy)]
pub struct FusionConfig<T: Real> {
    /// Maximal deviation from median depth (`c_z`), meters.
    pub c_z: T,
    /// Correspondence radius of the temporal filter, meters.
    pub epsilon: T,
    /// Number of previous observations considered for filtering (`n_s`).
    pub n_s: usize,
    /// Model point-cloud cap after downsampling.
    pub n_max: usize,
    pub icp: IcpConfig<T>,
}

impl<T: Real> Default for FusionConfig<T> {
    fn default() -> Self {
        Self {
            c_z: T::c(0.1),
            epsilon: T::c(0.01),
            n_s: 5,
            n_max: 2048,
            icp: IcpConfig::default(),
        }
    }
}

/// Outcome of one target-model tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// Model merged with the new observation.
    Updated,
    /// Registration failed validity gating; the observation was discarded.
    Discarded,
    /// No usable observation this tick.
    Loss,
}

/// State owned by the target-model generation process.
#[derive(Debug, Clone)]
pub struct TargetModelState<T: Real> {
    pub model: Option<ModelPointCloud<T>>,
    pub buffer: ObservationBuffer<T>,
    pub last_registration: Option<RegistrationResult<T>>,
    prev_transform: RigidTransform<T>,
    tick: u64,
}

impl<T: Real> TargetModelState<T> {
    pub fn new(cfg: &FusionConfig<T>) -> Self {
        Self {
            model: None,
            buffer: ObservationBuffer::new(cfg.n_s),
            last_registration: None,
            prev_transform: RigidTransform::identity(),
            tick: 0,
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Run the full per-tick pipeline on one observation (`None` signals
    /// tracking loss). `corrupt_registration` forces the validity gate to
    /// reject, modeling an ICP failure. On `Discarded` or `Loss` the state is
    /// left unchanged.
    pub fn step(
        &mut self,
        observation: Option<&PointCloud<T>>,
        dt: T,
        corrupt_registration: bool,
        cfg: &FusionConfig<T>,
        rng: &mut ChaCha8Rng,
    ) -> StepStatus {
        self.tick += 1;
        let Some(raw) = observation else {
            return StepStatus::Loss;
        };
        if raw.is_empty() {
            return StepStatus::Loss;
        }
        let Some(filtered) = median_depth_filter(raw, cfg.c_z) else {
            return StepStatus::Loss;
        };
        if filtered.len() < 3 {
            // degenerate observation, treated as tracking loss
            return StepStatus::Loss;
        }

        let Some(model) = self.model.as_mut() else {
            // first usable observation seeds the model
            let anchor = filtered.centroid();
            self.model = Some(ModelPointCloud {
                cloud: filtered.clone(),
                anchor,
                tick: self.tick,
            });
            self.buffer.push(filtered);
            return StepStatus::Updated;
        };

        let previous = self.buffer.newest().expect("model implies a buffered observation");
        let mut registration = register_icp(previous, &filtered, dt, &self.prev_transform, &cfg.icp);
        if corrupt_registration {
            registration.accepted = false;
        }
        let accepted = registration.accepted;
        self.last_registration = Some(registration);
        if !accepted {
            return StepStatus::Discarded;
        }

        // bring the model, anchor and buffered observations into the current
        // camera frame
        let t = registration.transform;
        model.cloud = apply_transform(&t, &model.cloud);
        model.anchor = t.apply(&model.anchor);
        self.buffer.transform_all(&t);

        let smoothed = epsilon_ball_filter(&filtered, &self.buffer, cfg.epsilon);
        let merged = merge_and_downsample(model, &smoothed, cfg.n_max, rng);
        *model = ModelPointCloud { tick: self.tick, ..merged };
        self.buffer.push(filtered);
        self.prev_transform = t;
        StepStatus::Updated
    }
}

/// Immutable per-tick publication of the target-model process.
#[derive(Debug, Clone)]
pub struct ModelSnapshot {
    pub tick: u64,
    pub time: f64,
    pub status: StepStatus,
    /// Model cloud in the camera frame of `cam_pose`.
    pub cloud: PointCloud<f64>,
    pub anchor: Vector3<f64>,
    pub bps: BpsEncoding<f64>,
    /// Camera pose in the world frame at publication time.
    pub cam_pose: Pose<f64>,
}

/// Single-writer, latest-value snapshot slot. Readers always get the newest
/// published snapshot without blocking the writer.
#[derive(Debug, Clone, Default)]
pub struct SnapshotSlot {
    inner: Arc<RwLock<Option<Arc<ModelSnapshot>>>>,
}

impl SnapshotSlot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, snapshot: ModelSnapshot) {
        *self.inner.write().unwrap() = Some(Arc::new(snapshot));
    }

    pub fn latest(&self) -> Option<Arc<ModelSnapshot>> {
        self.inner.read().unwrap().clone()
    }
}
