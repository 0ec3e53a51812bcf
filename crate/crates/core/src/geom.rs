//! Frames, rigid transforms and axis-angle rotation arithmetic.
//!
//! Rotations cross module boundaries as axis-angle vectors (direction = axis,
//! norm = angle in `[0, pi]`); matrices are used internally for composition.

use nalgebra::{Matrix3, Vector3};

use crate::scalar::Real;

/// Coordinate frame a point cloud is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    World,
    Camera,
    Object,
}

impl Frame {
    pub fn name(&self) -> &'static str {
        match self {
            Frame::World => "world",
            Frame::Camera => "camera",
            Frame::Object => "object",
        }
    }
}

/// Ordered set of 3D points in a named frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T: Real> {
    pub points: Vec<Vector3<T>>,
    pub frame: Frame,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Vector3<T>>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn empty(frame: Frame) -> Self {
        Self { points: Vec::new(), frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vector3<T> {
        assert!(!self.is_empty(), "centroid of empty cloud");
        let mut sum = Vector3::zeros();
        for p in &self.points {
            sum += p;
        }
        sum / T::from_usize(self.len()).unwrap()
    }

    /// Largest distance from `center` to any point.
    pub fn bounding_radius(&self, center: &Vector3<T>) -> T {
        let mut r = T::zero();
        for p in &self.points {
            r = r.max((p - center).norm());
        }
        r
    }
}

/// Rotation + translation mapping between frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    /// `self ∘ rhs`: apply `rhs` first, then `self`.
    pub fn compose(&self, rhs: &Self) -> Self {
        Self {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> T {
        let tr = self.rotation.trace();
        let c = ((tr - T::one()) / T::c(2.0)).clamp(-T::one(), T::one());
        c.acos()
    }

    /// Orthonormality and determinant check used by invariants and tests.
    pub fn is_valid(&self, tol: T) -> bool {
        let should_be_identity = self.rotation * self.rotation.transpose();
        let err = (should_be_identity - Matrix3::identity()).norm();
        err <= tol && (self.rotation.determinant() - T::one()).abs() <= tol
    }
}

/// Map every point of a cloud through a rigid transform.
pub fn apply_transform<T: Real>(t: &RigidTransform<T>, cloud: &PointCloud<T>) -> PointCloud<T> {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply(p)).collect(),
        frame: cloud.frame,
    }
}

/// Axis-angle rotation vector: direction = axis, norm = angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle<T: Real>(pub Vector3<T>);

impl<T: Real> AxisAngle<T> {
    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn new(v: Vector3<T>) -> Self {
        Self(v)
    }

    pub fn angle(&self) -> T {
        self.0.norm()
    }

    pub fn vector(&self) -> Vector3<T> {
        self.0
    }

    /// Wrap the angle into `[0, pi]` without changing the represented
    /// rotation. At exactly pi the axis sign is ambiguous; the axis whose
    /// first nonzero component is positive is chosen.
    pub fn canonicalize(&self) -> Self {
        let theta = self.0.norm();
        let tiny = T::c(1e-15);
        if theta < tiny {
            return Self::zero();
        }
        let axis = self.0 / theta;
        let two_pi = T::two_pi();
        // theta mod 2*pi
        let mut wrapped = theta - (theta / two_pi).floor() * two_pi;
        let mut axis = axis;
        if wrapped > T::pi() {
            wrapped = two_pi - wrapped;
            axis = -axis;
        }
        if wrapped < tiny {
            return Self::zero();
        }
        if (wrapped - T::pi()).abs() < T::c(1e-12) {
            axis = pi_tie_break(axis);
        }
        Self(axis * wrapped)
    }

    /// Rodrigues formula.
    pub fn to_matrix(&self) -> Matrix3<T> {
        let theta = self.0.norm();
        if theta < T::c(1e-12) {
            // first-order expansion is exact enough below the threshold
            return Matrix3::identity() + skew(&self.0);
        }
        let axis = self.0 / theta;
        let k = skew(&axis);
        Matrix3::identity() + k * theta.sin() + (k * k) * (T::one() - theta.cos())
    }

    /// Matrix logarithm, canonicalized.
    pub fn from_matrix(r: &Matrix3<T>) -> Self {
        let tr = r.trace();
        let cos_theta = ((tr - T::one()) / T::c(2.0)).clamp(-T::one(), T::one());
        let theta = cos_theta.acos();
        let eps = T::c(1e-9);
        if theta < eps {
            // skew part / 2 approximates the rotation vector near identity
            let v = Vector3::new(
                r[(2, 1)] - r[(1, 2)],
                r[(0, 2)] - r[(2, 0)],
                r[(1, 0)] - r[(0, 1)],
            ) / T::c(2.0);
            return Self(v);
        }
        if (T::pi() - theta) < T::c(1e-6) {
            // near pi the skew part vanishes; recover the axis from the
            // symmetric part B = (R + I)/2 = aa^T
            let half = T::c(0.5);
            let ax = ((r[(0, 0)] + T::one()) * half).max(T::zero()).sqrt();
            let ay = ((r[(1, 1)] + T::one()) * half).max(T::zero()).sqrt();
            let az = ((r[(2, 2)] + T::one()) * half).max(T::zero()).sqrt();
            let mut axis = Vector3::new(ax, ay, az);
            // fix relative signs from the off-diagonal products
            if axis.x >= axis.y && axis.x >= axis.z {
                axis.y = if r[(0, 1)] < T::zero() { -axis.y } else { axis.y };
                axis.z = if r[(0, 2)] < T::zero() { -axis.z } else { axis.z };
            } else if axis.y >= axis.z {
                axis.x = if r[(0, 1)] < T::zero() { -axis.x } else { axis.x };
                axis.z = if r[(1, 2)] < T::zero() { -axis.z } else { axis.z };
            } else {
                axis.x = if r[(0, 2)] < T::zero() { -axis.x } else { axis.x };
                axis.y = if r[(1, 2)] < T::zero() { -axis.y } else { axis.y };
            }
            let axis = pi_tie_break(axis.normalize());
            return Self(axis * theta).canonicalize();
        }
        let v = Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        ) * (theta / (T::c(2.0) * theta.sin()));
        Self(v).canonicalize()
    }
}

fn pi_tie_break<T: Real>(axis: Vector3<T>) -> Vector3<T> {
    let eps = T::c(1e-12);
    for i in 0..3 {
        if axis[i].abs() > eps {
            return if axis[i] > T::zero() { axis } else { -axis };
        }
    }
    axis
}

pub fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(
        T::zero(), -v.z, v.y,
        v.z, T::zero(), -v.x,
        -v.y, v.x, T::zero(),
    )
}

/// Axis-angle of the relative rotation `Rb^-1 * Ra`, canonicalized.
pub fn rotation_error<T: Real>(a: &AxisAngle<T>, b: &AxisAngle<T>) -> AxisAngle<T> {
    let ra = a.to_matrix();
    let rb = b.to_matrix();
    AxisAngle::from_matrix(&(rb.transpose() * ra))
}

/// Translation + orientation of a body in some frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub translation: Vector3<T>,
    pub orientation: AxisAngle<T>,
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self { translation: Vector3::zeros(), orientation: AxisAngle::zero() }
    }

    pub fn new(translation: Vector3<T>, orientation: AxisAngle<T>) -> Self {
        Self { translation, orientation }
    }

    pub fn to_transform(&self) -> RigidTransform<T> {
        RigidTransform::new(self.orientation.to_matrix(), self.translation)
    }

    pub fn from_transform(t: &RigidTransform<T>) -> Self {
        Self {
            translation: t.translation,
            orientation: AxisAngle::from_matrix(&t.rotation),
        }
    }
}
