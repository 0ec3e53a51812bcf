//! Point-to-point ICP registration with validity gating.

use nalgebra::{Matrix3, Vector3};

use crate::geom::{PointCloud, RigidTransform};
use crate::kdtree::KdTree;
use crate::scalar::Real;

/// Registration tuning knobs.
#[derive(Debug, Clone, Copy)]
pub struct IcpConfig<T: Real> {
    /// Maximum distance for a source-target correspondence (meters).
    pub correspondence_radius: T,
    pub max_iterations: usize,
    /// Incremental transform magnitude below which iteration stops.
    pub convergence_eps: T,
    /// Minimal fitness for an accepted alignment (`c_{a,f}`).
    pub fitness_threshold: T,
    /// Linear velocity limit between camera and target (`c_{a,v}`), m/s.
    pub max_linear_speed: T,
    /// Rotational velocity limit (`c_{a,w}`), rad/s.
    pub max_angular_speed: T,
}

impl<T: Real> Default for IcpConfig<T> {
    fn default() -> Self {
        Self {
            correspondence_radius: T::c(0.02),
            max_iterations: 30,
            convergence_eps: T::c(1e-6),
            fitness_threshold: T::c(0.8),
            max_linear_speed: T::c(4.0),
            max_angular_speed: T::c(4.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RegistrationResult<T: Real> {
    pub transform: RigidTransform<T>,
    /// Fraction of source points with a target correspondence within the
    /// correspondence radius; in `[0, 1]`.
    pub fitness: T,
    pub inlier_rmse: T,
    pub converged: bool,
    pub iterations: usize,
    pub accepted: bool,
}

/// Velocity-based validity criterion on a registration transform.
///
/// The transform is decomposed around the source centroid: the centroid
/// displacement bounds the implied linear velocity, the rotation angle the
/// implied angular velocity. Symmetric under inversion: `T` evaluated at `c`
/// and `T^-1` evaluated at `T(c)` give the same answer.
pub fn velocity_gate<T: Real>(
    transform: &RigidTransform<T>,
    source_centroid: &Vector3<T>,
    dt: T,
    max_linear_speed: T,
    max_angular_speed: T,
) -> bool {
    let lin = (transform.apply(source_centroid) - source_centroid).norm() / dt;
    let ang = transform.angle() / dt;
    lin <= max_linear_speed && ang <= max_angular_speed
}

/// Best-fit rigid transform mapping `src` onto `dst` (Kabsch / SVD).
fn best_fit<T: Real>(src: &[Vector3<T>], dst: &[Vector3<T>]) -> RigidTransform<T> {
    let n = T::from_usize(src.len()).unwrap();
    let mut mu_s = Vector3::zeros();
    let mut mu_d = Vector3::zeros();
    for (s, d) in src.iter().zip(dst) {
        mu_s += s;
        mu_d += d;
    }
    mu_s /= n;
    mu_d /= n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (d - mu_d) * (s - mu_s).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut rotation = u * v_t;
    if rotation.determinant() < T::zero() {
        let mut u = u;
        u.column_mut(2).neg_mut();
        rotation = u * v_t;
    }
    let translation = mu_d - rotation * mu_s;
    RigidTransform::new(rotation, translation)
}

/// Point-to-point ICP from `source` to `target`.
///
/// `dt` is the time separating the two clouds; it converts the recovered
/// motion into velocities for the validity gate. The result is accepted only
/// if the iteration converged, the fitness clears its threshold and the
/// implied velocities stay under their limits.
pub fn register_icp<T: Real>(
    source: &PointCloud<T>,
    target: &PointCloud<T>,
    dt: T,
    init: &RigidTransform<T>,
    cfg: &IcpConfig<T>,
) -> RegistrationResult<T> {
    assert!(source.len() >= 3 && target.len() >= 3, "icp needs >= 3 points per cloud");
    assert!(dt > T::zero());

    let tree = KdTree::build(&target.points);
    let mut current = *init;
    let mut converged = false;
    let mut iterations = 0;

    let mut moved: Vec<Vector3<T>> = source.points.iter().map(|p| current.apply(p)).collect();
    let mut src_pairs: Vec<Vector3<T>> = Vec::with_capacity(source.len());
    let mut dst_pairs: Vec<Vector3<T>> = Vec::with_capacity(source.len());

    for iter in 0..cfg.max_iterations {
        iterations = iter + 1;
        src_pairs.clear();
        dst_pairs.clear();
        for p in &moved {
            if let Some((j, _)) = tree.nearest_within(p, cfg.correspondence_radius) {
                src_pairs.push(*p);
                dst_pairs.push(target.points[j]);
            }
        }
        if src_pairs.len() < 3 {
            break;
        }
        let delta = best_fit(&src_pairs, &dst_pairs);
        current = delta.compose(&current);
        for (m, p) in moved.iter_mut().zip(&source.points) {
            *m = current.apply(p);
        }
        if delta.translation.norm() + delta.angle() < cfg.convergence_eps {
            converged = true;
            break;
        }
    }

    // final correspondence pass for fitness and RMSE
    let mut inliers = 0usize;
    let mut sq_sum = T::zero();
    for p in &moved {
        if let Some((_, d)) = tree.nearest_within(p, cfg.correspondence_radius) {
            inliers += 1;
            sq_sum += d * d;
        }
    }
    let fitness = T::from_usize(inliers).unwrap() / T::from_usize(source.len()).unwrap();
    let inlier_rmse = if inliers > 0 {
        (sq_sum / T::from_usize(inliers).unwrap()).sqrt()
    } else {
        T::zero()
    };

    let centroid = source.centroid();
    let accepted = converged
        && fitness >= cfg.fitness_threshold
        && velocity_gate(&current, &centroid, dt, cfg.max_linear_speed, cfg.max_angular_speed);

    RegistrationResult { transform: current, fitness, inlier_rmse, converged, iterations, accepted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{apply_transform, AxisAngle, Frame};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box_cloud(n: usize, seed: u64) -> PointCloud<f64> {
        // points on the surface of a 6x6x10 cm box
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = [0.03, 0.03, 0.05];
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let face = rng.gen_range(0..6usize);
            let axis = face / 2;
            let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
            let mut p = [0.0f64; 3];
            for k in 0..3 {
                p[k] = if k == axis {
                    sign * half[k]
                } else {
                    rng.gen_range(-half[k]..half[k])
                };
            }
            pts.push(Vector3::new(p[0], p[1], p[2]));
        }
        PointCloud::new(pts, Frame::Camera)
    }

    #[test]
    fn identical_clouds_give_identity() {
        let c = box_cloud(300, 1);
        let r = register_icp(&c, &c, 0.033, &RigidTransform::identity(), &IcpConfig::default());
        assert!(r.accepted);
        assert!((r.fitness - 1.0).abs() < 1e-12);
        assert!(r.transform.translation.norm() < 1e-9);
        // acos near the identity is ill-conditioned; 1e-6 rad resolves 1e-15
        // of trace noise
        assert!(r.transform.angle() < 1e-6);
    }

    #[test]
    fn small_translation_recovered_and_accepted() {
        let src = box_cloud(400, 2);
        let t = RigidTransform::from_translation(Vector3::new(0.01, 0.0, 0.0));
        let dst = apply_transform(&t, &src);
        let r = register_icp(&src, &dst, 0.033, &RigidTransform::identity(), &IcpConfig::default());
        assert!(r.accepted, "fitness {} converged {}", r.fitness, r.converged);
        assert!((r.transform.translation - t.translation).norm() < 1e-3);
        // implied speed 0.01/0.033 = 0.3 m/s, under the 4.0 m/s limit
    }

    #[test]
    fn excessive_velocity_is_rejected() {
        // 0.2 m in 33 ms implies 6.06 m/s > 4.0 m/s
        let c = box_cloud(200, 3);
        let t = RigidTransform::from_translation(Vector3::new(0.2, 0.0, 0.0));
        assert!(!velocity_gate(&t, &c.centroid(), 0.033, 4.0, 4.0));
    }

    #[test]
    fn gate_is_symmetric_under_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let t = RigidTransform::new(
                AxisAngle::new(Vector3::new(
                    rng.gen_range(-0.3..0.3),
                    rng.gen_range(-0.3..0.3),
                    rng.gen_range(-0.3..0.3),
                ))
                .to_matrix(),
                Vector3::new(
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                ),
            );
            let c = Vector3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.4);
            let dt = 0.033;
            let fwd = velocity_gate(&t, &c, dt, 4.0, 4.0);
            let bwd = velocity_gate(&t.inverse(), &t.apply(&c), dt, 4.0, 4.0);
            assert_eq!(fwd, bwd);
        }
    }

    #[test]
    fn recovers_small_rigid_motion_with_noise() {
        // 2 cm / 10 degree transforms with 1 mm noise: recovery within
        // 2 mm / 1 degree against the generating transform
        let mut ok = 0;
        let trials = 40;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let src = box_cloud(500, 200 + seed);
            let gen = RigidTransform::new(
                AxisAngle::new(
                    Vector3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                    .normalize()
                        * rng.gen_range(0.0..(10.0f64).to_radians()),
                )
                .to_matrix(),
                Vector3::new(
                    rng.gen_range(-0.02..0.02),
                    rng.gen_range(-0.02..0.02),
                    rng.gen_range(-0.02..0.02),
                ),
            );
            let mut dst = apply_transform(&gen, &src);
            for p in &mut dst.points {
                for k in 0..3 {
                    p[k] += rng.gen_range(-1.0..1.0) * 0.001;
                }
            }
            let r = register_icp(&src, &dst, 0.033, &RigidTransform::identity(), &IcpConfig::default());
            let t_err = (r.transform.translation - gen.translation).norm();
            let r_err = r.transform.compose(&gen.inverse()).angle();
            if t_err < 2e-3 && r_err < 1.0f64.to_radians() {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.95 * trials as f64, "only {ok}/{trials} recovered");
    }
}
