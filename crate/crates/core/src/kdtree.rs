//! Minimal 3D kd-tree for nearest-neighbor and radius queries.

use nalgebra::Vector3;

use crate::scalar::Real;

struct Node<T: Real> {
    point: Vector3<T>,
    index: u32,
    axis: u8,
    left: i32,
    right: i32,
}

pub struct KdTree<T: Real> {
    nodes: Vec<Node<T>>,
    root: i32,
}

impl<T: Real> KdTree<T> {
    pub fn build(points: &[Vector3<T>]) -> Self {
        let mut items: Vec<(Vector3<T>, u32)> =
            points.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(&mut items, 0, &mut nodes);
        Self { nodes, root }
    }

    fn build_rec(items: &mut [(Vector3<T>, u32)], depth: usize, nodes: &mut Vec<Node<T>>) -> i32 {
        if items.is_empty() {
            return -1;
        }
        let axis = (depth % 3) as u8;
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |a, b| {
            a.0[axis as usize].partial_cmp(&b.0[axis as usize]).unwrap()
        });
        let (point, index) = items[mid];
        let id = nodes.len() as i32;
        nodes.push(Node { point, index, axis, left: -1, right: -1 });
        let (lo, rest) = items.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(lo, depth + 1, nodes);
        let right = Self::build_rec(hi, depth + 1, nodes);
        nodes[id as usize].left = left;
        nodes[id as usize].right = right;
        id
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index and distance of the closest point.
    pub fn nearest(&self, query: &Vector3<T>) -> Option<(usize, T)> {
        if self.root < 0 {
            return None;
        }
        let mut best = (usize::MAX, T::max_value().unwrap());
        self.nearest_rec(self.root, query, &mut best);
        if best.0 == usize::MAX {
            None
        } else {
            Some((best.0, best.1.sqrt()))
        }
    }

    /// Closest point within `radius`, if any.
    pub fn nearest_within(&self, query: &Vector3<T>, radius: T) -> Option<(usize, T)> {
        if self.root < 0 {
            return None;
        }
        let mut best = (usize::MAX, radius * radius);
        self.nearest_rec(self.root, query, &mut best);
        if best.0 == usize::MAX {
            None
        } else {
            Some((best.0, best.1.sqrt()))
        }
    }

    /// Whether any point lies strictly within `radius` of the query.
    pub fn any_within(&self, query: &Vector3<T>, radius: T) -> bool {
        if self.root < 0 {
            return false;
        }
        self.any_within_rec(self.root, query, radius * radius)
    }

    fn nearest_rec(&self, id: i32, query: &Vector3<T>, best: &mut (usize, T)) {
        let node = &self.nodes[id as usize];
        let d2 = (node.point - query).norm_squared();
        if d2 <= best.1 {
            *best = (node.index as usize, d2);
        }
        let axis = node.axis as usize;
        let delta = query[axis] - node.point[axis];
        let (near, far) = if delta < T::zero() {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if near >= 0 {
            self.nearest_rec(near, query, best);
        }
        if far >= 0 && delta * delta <= best.1 {
            self.nearest_rec(far, query, best);
        }
    }

    fn any_within_rec(&self, id: i32, query: &Vector3<T>, r2: T) -> bool {
        let node = &self.nodes[id as usize];
        if (node.point - query).norm_squared() < r2 {
            return true;
        }
        let axis = node.axis as usize;
        let delta = query[axis] - node.point[axis];
        let (near, far) = if delta < T::zero() {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if near >= 0 && self.any_within_rec(near, query, r2) {
            return true;
        }
        far >= 0 && delta * delta < r2 && self.any_within_rec(far, query, r2)
    }
}
