//! Basis-point-set encoding: a cloud becomes a fixed-length vector of
//! minimum distances to a frozen set of basis points.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::PointCloud;
use crate::kdtree::KdTree;
use crate::scalar::Real;

pub type BpsEncoding<T> = Vec<T>;

/// Fixed basis points, drawn once at startup.
#[derive(Debug, Clone)]
pub struct BasisPointSet<T: Real> {
    pub points: Vec<Vector3<T>>,
}

impl<T: Real> BasisPointSet<T> {
    /// Seeded uniform draw in the ball of `radius` around `center`.
    pub fn new_in_ball(count: usize, center: Vector3<T>, radius: T, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(count);
        while points.len() < count {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            let z: f64 = rng.gen_range(-1.0..1.0);
            if x * x + y * y + z * z > 1.0 {
                continue;
            }
            let offset = Vector3::new(T::c(x), T::c(y), T::c(z)) * radius;
            points.push(center + offset);
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Entry `k` is the distance from basis point `k` to the closest cloud
    /// point.
    pub fn encode(&self, cloud: &PointCloud<T>) -> BpsEncoding<T> {
        assert!(!cloud.is_empty(), "bps encoding of empty cloud");
        let tree = KdTree::build(&cloud.points);
        self.points
            .iter()
            .map(|b| tree.nearest(b).expect("non-empty tree").1)
            .collect()
    }
}
