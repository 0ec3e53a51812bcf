//! Grasp proposal, evaluation, and ranking.
//!
//! The proposer/evaluator sits behind an interface so a learned backend can
//! replace the geometric heuristic without touching the control loop.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bps::BpsEncoding;
use crate::geom::{AxisAngle, PointCloud, Pose};

/// Finger joint count of the simulated 15-DoF hand.
pub const FINGER_DOF: usize = 15;

/// Half the finger span along the closing axis, meters.
pub const FINGER_HALF_SPAN: f64 = 0.05;
/// Finger reach in front of the palm, meters.
pub const FINGER_REACH: f64 = 0.12;
/// Palm collision box: `|x| <= 0.05, |y| <= 0.05, z in [-0.03, 0]` in the
/// palm frame (z points out of the palm toward the object).
pub const PALM_HALF_XY: f64 = 0.05;
pub const PALM_THICKNESS: f64 = 0.03;

/// One grasp candidate: palm pose, finger pre-shape and predicted success.
#[derive(Debug, Clone, PartialEq)]
pub struct Grasp {
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub fingers: [f64; FINGER_DOF],
    /// Predicted success score in `[0, 1]`.
    pub score: f64,
}

impl Grasp {
    /// Identity-oriented grasp at a position; convenience for tests and
    /// pipeline plumbing.
    pub fn at(translation: Vector3<f64>) -> Self {
        Self {
            translation,
            rotation: Matrix3::identity(),
            fingers: [0.0; FINGER_DOF],
            score: 0.0,
        }
    }

    pub fn orientation(&self) -> AxisAngle<f64> {
        AxisAngle::from_matrix(&self.rotation)
    }

    pub fn pose(&self) -> Pose<f64> {
        Pose::new(self.translation, self.orientation())
    }

    pub fn is_valid(&self) -> bool {
        let rot_ok = (self.rotation * self.rotation.transpose() - Matrix3::identity()).norm()
            < 1e-9
            && (self.rotation.determinant() - 1.0).abs() < 1e-9;
        rot_ok
            && (0.0..=1.0).contains(&self.score)
            && self.fingers.iter().all(|f| f.is_finite())
            && self.translation.iter().all(|c| c.is_finite())
    }
}

/// Proposal + evaluation backend.
pub trait GraspProposer {
    /// Up to `count` grasp candidates for the model cloud, scored.
    fn propose(
        &self,
        encoding: &BpsEncoding<f64>,
        cloud: &PointCloud<f64>,
        count: usize,
        seed: u64,
    ) -> Vec<Grasp>;

    /// Success prediction in `[0, 1]` for a hand at `pose` with finger
    /// pre-shape `fingers` against the model cloud. Deterministic.
    fn evaluate(&self, pose: &Pose<f64>, fingers: &[f64; FINGER_DOF], cloud: &PointCloud<f64>)
        -> f64;
}

/// Geometric stand-in for a learned grasp network.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicProposer {
    /// Palm clearance added beyond the object surface along the approach
    /// direction, meters.
    pub palm_offset: f64,
    /// Maximal approach tilt from vertical, radians.
    pub max_tilt: f64,
}

impl Default for HeuristicProposer {
    fn default() -> Self {
        Self { palm_offset: 0.05, max_tilt: 70.0f64.to_radians() }
    }
}

/// Largest projection of any cloud point onto `dir`, relative to `center`.
fn support(cloud: &PointCloud<f64>, center: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
    cloud
        .points
        .iter()
        .map(|p| (p - center).dot(dir))
        .fold(0.0, f64::max)
}

/// Covariance eigenpairs of the cloud, ascending by eigenvalue.
fn principal_axes(cloud: &PointCloud<f64>) -> (Vector3<f64>, [(f64, Vector3<f64>); 3]) {
    let c = cloud.centroid();
    let mut cov = Matrix3::zeros();
    for p in &cloud.points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= cloud.len() as f64;
    let eig = cov.symmetric_eigen();
    let mut pairs: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into()))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (c, [pairs[0], pairs[1], pairs[2]])
}

fn any_perpendicular(v: &Vector3<f64>) -> Vector3<f64> {
    let candidate = if v.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    (candidate - v * candidate.dot(v)).normalize()
}

impl HeuristicProposer {
    /// Build a grasp approaching along `-approach_up` (palm z points from the
    /// palm toward the centroid), closing roughly along `closing_hint`.
    fn make_grasp(
        &self,
        cloud: &PointCloud<f64>,
        centroid: &Vector3<f64>,
        approach_up: Vector3<f64>,
        closing_hint: Vector3<f64>,
        roll: f64,
    ) -> Grasp {
        let z_axis = -approach_up; // toward the object
        let mut x_axis = closing_hint - z_axis * closing_hint.dot(&z_axis);
        if x_axis.norm() < 1e-9 {
            x_axis = any_perpendicular(&z_axis);
        } else {
            x_axis = x_axis.normalize();
        }
        // roll jitter about the approach axis
        let roll_rot = AxisAngle::new(z_axis * roll).to_matrix();
        let x_axis = roll_rot * x_axis;
        let y_axis = z_axis.cross(&x_axis);
        let rotation = Matrix3::from_columns(&[x_axis, y_axis, z_axis]);

        let standoff = support(cloud, centroid, &approach_up) + self.palm_offset;
        let translation = centroid + approach_up * standoff;

        let width =
            (support(cloud, centroid, &x_axis) + support(cloud, centroid, &(-x_axis)))
                .clamp(0.01, 2.0 * FINGER_HALF_SPAN);
        let mut fingers = [0.0; FINGER_DOF];
        // nominal pre-grasp curl, opened proportionally to the object width
        let open = width / (2.0 * FINGER_HALF_SPAN);
        for (j, f) in fingers.iter_mut().enumerate() {
            let nominal = match j % 3 {
                0 => 0.2,
                1 => 0.6,
                _ => 0.4,
            };
            *f = nominal * (1.0 - 0.5 * open);
        }

        Grasp { translation, rotation, fingers, score: 0.0 }
    }
}

impl GraspProposer for HeuristicProposer {
    fn propose(
        &self,
        _encoding: &BpsEncoding<f64>,
        cloud: &PointCloud<f64>,
        count: usize,
        seed: u64,
    ) -> Vec<Grasp> {
        if cloud.len() < 3 || count == 0 {
            return Vec::new();
        }
        let (centroid, axes) = principal_axes(cloud);
        // rank-deficient clouds (line/plane degeneracies) only get top-down
        // approaches
        let degenerate = axes[1].0 < 1e-10;
        let closing_hint = if axes[0].1.norm() > 1e-9 { axes[0].1 } else { Vector3::x() };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let up = if degenerate || i == 0 {
                // always include the straight top-down approach
                Vector3::z()
            } else {
                let cos_min = self.max_tilt.cos();
                let cos_t = rng.gen_range(cos_min..1.0);
                let sin_t = (1.0 - cos_t * cos_t).sqrt();
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                Vector3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
            };
            let roll = if i == 0 { 0.0 } else { rng.gen_range(-0.5..0.5) };
            let mut g = self.make_grasp(cloud, &centroid, up, closing_hint, roll);
            g.score = self.evaluate(&g.pose(), &g.fingers, cloud);
            out.push(g);
        }
        out
    }

    fn evaluate(
        &self,
        pose: &Pose<f64>,
        _fingers: &[f64; FINGER_DOF],
        cloud: &PointCloud<f64>,
    ) -> f64 {
        if cloud.is_empty() {
            return 0.0;
        }
        let rot = pose.orientation.to_matrix();
        let inv_rot = rot.transpose();
        // cloud in the palm frame
        let local: Vec<Vector3<f64>> =
            cloud.points.iter().map(|p| inv_rot * (p - pose.translation)).collect();

        // (a) standoff: nearest surface distance, plateau 1 on [0.02, 0.10],
        // linear to 0 at contact and at 0.15
        let nearest = local.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
        let standoff_factor = if nearest <= 0.02 {
            (nearest / 0.02).max(0.0)
        } else if nearest <= 0.10 {
            1.0
        } else if nearest < 0.15 {
            (0.15 - nearest) / 0.05
        } else {
            0.0
        };
        if standoff_factor <= 0.0 {
            return 0.0;
        }

        // (c) collision: any point inside the palm box kills the grasp
        let collides = local.iter().any(|p| {
            p.x.abs() <= PALM_HALF_XY
                && p.y.abs() <= PALM_HALF_XY
                && p.z >= -PALM_THICKNESS
                && p.z <= 0.0
        });
        if collides {
            return 0.0;
        }

        // (b) enclosure: mean over a fixed cone of closing directions of the
        // soft evidence that surface points sit on both sides of the palm
        // axis inside the finger region. Margins are clamped, keeping the
        // factor continuous in the palm pose.
        let margin = 0.01;
        let directions = 7;
        let mut sum = 0.0;
        for k in 0..directions {
            let ang = -0.5236 + 1.0472 * k as f64 / (directions - 1) as f64; // +-30 deg
            let dir = Vector3::new(ang.cos(), ang.sin(), 0.0);
            let mut pos: f64 = 0.0;
            let mut neg: f64 = 0.0;
            for p in &local {
                // soft window over the finger reach in front of the palm
                let w = if p.z <= 0.0 || p.z >= FINGER_REACH {
                    0.0
                } else {
                    (p.z / 0.01).min(1.0).min(((FINGER_REACH - p.z) / 0.01).min(1.0))
                };
                if w <= 0.0 {
                    continue;
                }
                let lateral = Vector3::new(p.x, p.y, 0.0);
                if lateral.norm() > FINGER_HALF_SPAN + margin {
                    continue;
                }
                let s = lateral.dot(&dir);
                pos = pos.max(w * (s / margin).clamp(0.0, 1.0));
                neg = neg.max(w * (-s / margin).clamp(0.0, 1.0));
            }
            sum += pos * neg;
        }
        let enclosure_factor = sum / directions as f64;

        (standoff_factor * enclosure_factor).clamp(0.0, 1.0)
    }
}

/// Weights of the grasp-selection metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricWeights {
    /// Success-score weight.
    pub c_m_s: f64,
    /// Translation-distance weight, per meter. Used as `|c_m_t|` penalty.
    pub c_m_t: f64,
    /// Rotation-distance weight, per radian. Used as `|c_m_r|` penalty.
    pub c_m_r: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self { c_m_s: 1.0, c_m_t: -0.1, c_m_r: -0.2 }
    }
}

/// Selection metric: weighted success score minus pose-distance penalties.
/// Distance weights enter by magnitude so larger distances always penalize,
/// whatever sign the configuration uses.
pub fn grasp_metric(grasp: &Grasp, robot: &Pose<f64>, weights: &MetricWeights) -> f64 {
    let t_dist = (grasp.translation - robot.translation).norm();
    let r_dist = (grasp.orientation().vector() - robot.orientation.vector()).norm();
    weights.c_m_s * grasp.score - (weights.c_m_t.abs() * t_dist + weights.c_m_r.abs() * r_dist)
}

/// Workspace reachability proxy: ball around the robot base plus a floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reachability {
    pub base: Vector3<f64>,
    pub radius: f64,
}

impl Reachability {
    pub fn reachable(&self, translation: &Vector3<f64>) -> bool {
        (translation - self.base).norm() <= self.radius && translation.z >= 0.0
    }
}

/// Highest-metric reachable grasp, or `None` when nothing passes.
///
/// Candidates are ranked by the metric with a total tie-break order (score,
/// then robot distance, then raw pose bytes), so the result is independent of
/// the input permutation.
pub fn select_grasp(
    grasps: &[Grasp],
    robot: &Pose<f64>,
    weights: &MetricWeights,
    reach: &Reachability,
) -> Option<Grasp> {
    let mut ranked: Vec<(f64, &Grasp)> =
        grasps.iter().map(|g| (grasp_metric(g, robot, weights), g)).collect();
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| b.1.score.partial_cmp(&a.1.score).unwrap())
            .then_with(|| {
                let da = (a.1.translation - robot.translation).norm();
                let db = (b.1.translation - robot.translation).norm();
                da.partial_cmp(&db).unwrap()
            })
            .then_with(|| total_order_key(a.1).cmp(&total_order_key(b.1)))
    });
    ranked
        .into_iter()
        .find(|(_, g)| reach.reachable(&g.translation))
        .map(|(_, g)| g.clone())
}

fn total_order_key(g: &Grasp) -> Vec<u64> {
    let mut key = Vec::with_capacity(3 + 9 + FINGER_DOF);
    key.extend(g.translation.iter().map(|c| c.to_bits()));
    key.extend(g.rotation.iter().map(|c| c.to_bits()));
    key.extend(g.fingers.iter().map(|c| c.to_bits()));
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Frame;
    use proptest::prelude::*;

    fn box_cloud(w: f64, d: f64, h: f64, n: usize, seed: u64) -> PointCloud<f64> {
        let obj = crate::scene::ObjectModel::new(crate::scene::Shape::Box { w, d, h }, n);
        PointCloud::new(obj.sample_surface(seed).into_iter().map(|(p, _)| p).collect(), Frame::World)
    }

    fn sphere_cloud(r: f64, n: usize, seed: u64) -> PointCloud<f64> {
        let obj = crate::scene::ObjectModel::new(crate::scene::Shape::Sphere { r }, n);
        PointCloud::new(obj.sample_surface(seed).into_iter().map(|(p, _)| p).collect(), Frame::World)
    }

    fn shifted(cloud: &PointCloud<f64>, offset: Vector3<f64>) -> PointCloud<f64> {
        PointCloud::new(cloud.points.iter().map(|p| p + offset).collect(), cloud.frame)
    }

    #[test]
    fn proposer_respects_count_and_invariants() {
        let cloud = box_cloud(0.06, 0.06, 0.1, 400, 1);
        let p = HeuristicProposer::default();
        let grasps = p.propose(&Vec::new(), &cloud, 100, 7);
        assert!(grasps.len() <= 100);
        assert!(!grasps.is_empty());
        for g in &grasps {
            assert!(g.is_valid(), "invalid grasp {g:?}");
        }
    }

    #[test]
    fn sphere_palm_axes_pass_near_centroid() {
        let cloud = shifted(&sphere_cloud(0.04, 500, 2), Vector3::new(0.3, -0.2, 0.1));
        let centroid = cloud.centroid();
        let p = HeuristicProposer::default();
        for g in p.propose(&Vec::new(), &cloud, 50, 3) {
            // distance from the centroid to the palm z-axis line
            let z = g.rotation.column(2).into_owned();
            let to_c = centroid - g.translation;
            let off_axis = (to_c - z * to_c.dot(&z)).norm();
            assert!(off_axis < 0.01, "axis misses centroid by {off_axis}");
        }
    }

    #[test]
    fn evaluate_top_grasp_on_box_scores_high() {
        let cloud = box_cloud(0.06, 0.06, 0.1, 600, 4);
        let p = HeuristicProposer::default();
        let grasps = p.propose(&Vec::new(), &cloud, 1, 0);
        assert!(grasps[0].score >= 0.8, "score {}", grasps[0].score);
    }

    #[test]
    fn evaluate_zero_when_far_or_colliding() {
        let cloud = box_cloud(0.06, 0.06, 0.1, 400, 5);
        let p = HeuristicProposer::default();
        let fingers = [0.0; FINGER_DOF];
        let far = Pose::new(Vector3::new(1.0, 0.0, 0.0), AxisAngle::zero());
        assert_eq!(p.evaluate(&far, &fingers, &cloud), 0.0);
        // palm frame z points down onto the box top: centered inside
        let inside = Pose::new(
            Vector3::zeros(),
            AxisAngle::new(Vector3::new(std::f64::consts::PI, 0.0, 0.0)),
        );
        assert_eq!(p.evaluate(&inside, &fingers, &cloud), 0.0);
    }

    #[test]
    fn evaluate_is_continuous_away_from_collision() {
        let cloud = box_cloud(0.06, 0.06, 0.1, 600, 6);
        let p = HeuristicProposer::default();
        let g = &p.propose(&Vec::new(), &cloud, 1, 0)[0];
        let fingers = g.fingers;
        let base = p.evaluate(&g.pose(), &fingers, &cloud);
        for k in 0..3 {
            let mut t = g.translation;
            t[k] += 1e-6;
            let perturbed = p.evaluate(&Pose::new(t, g.orientation()), &fingers, &cloud);
            assert!((perturbed - base).abs() < 1e-3);
        }
    }

    #[test]
    fn degenerate_cloud_gets_top_down_proposals() {
        // collinear points: covariance rank 1
        let pts: Vec<Vector3<f64>> =
            (0..50).map(|i| Vector3::new(i as f64 * 0.002, 0.0, 0.0)).collect();
        let cloud = PointCloud::new(pts, Frame::World);
        let p = HeuristicProposer::default();
        for g in p.propose(&Vec::new(), &cloud, 20, 9) {
            let z = g.rotation.column(2).into_owned();
            assert!((z - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        }
    }

    fn random_grasp(rng: &mut impl rand::Rng) -> Grasp {
        let mut g = Grasp::at(Vector3::new(
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.0..0.8),
        ));
        g.rotation = AxisAngle::new(Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ))
        .to_matrix();
        g.score = rng.gen_range(0.0..1.0);
        g
    }

    fn everywhere() -> Reachability {
        Reachability { base: Vector3::zeros(), radius: 1e6 }
    }

    #[test]
    fn selection_matches_brute_force() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let robot = Pose::new(Vector3::new(0.1, 0.0, 0.3), AxisAngle::zero());
        let weights = MetricWeights::default();
        for _ in 0..50 {
            let grasps: Vec<Grasp> = (0..10).map(|_| random_grasp(&mut rng)).collect();
            let picked = select_grasp(&grasps, &robot, &weights, &everywhere()).unwrap();
            let best = grasps
                .iter()
                .map(|g| grasp_metric(g, &robot, &weights))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(grasp_metric(&picked, &robot, &weights), best);
        }
    }

    #[test]
    fn zero_distance_weights_pick_max_score() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let robot = Pose::identity();
        let weights = MetricWeights { c_m_s: 1.0, c_m_t: 0.0, c_m_r: 0.0 };
        let grasps: Vec<Grasp> = (0..20).map(|_| random_grasp(&mut rng)).collect();
        let picked = select_grasp(&grasps, &robot, &weights, &everywhere()).unwrap();
        let max_score = grasps.iter().map(|g| g.score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(picked.score, max_score);
    }

    #[test]
    fn equal_scores_prefer_coincident_grasp() {
        let robot = Pose::new(Vector3::new(0.2, 0.1, 0.4), AxisAngle::zero());
        let mut near = Grasp::at(robot.translation);
        near.score = 0.5;
        let mut far = Grasp::at(robot.translation + Vector3::new(0.3, 0.0, 0.0));
        far.score = 0.5;
        let picked = select_grasp(
            &[far.clone(), near.clone()],
            &robot,
            &MetricWeights::default(),
            &everywhere(),
        )
        .unwrap();
        assert_eq!(picked, near);
    }

    #[test]
    fn selection_is_permutation_invariant() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let robot = Pose::new(Vector3::new(0.0, 0.0, 0.3), AxisAngle::zero());
        let weights = MetricWeights::default();
        let mut grasps: Vec<Grasp> = (0..15).map(|_| random_grasp(&mut rng)).collect();
        let first = select_grasp(&grasps, &robot, &weights, &everywhere()).unwrap();
        for _ in 0..10 {
            use rand::seq::SliceRandom;
            grasps.shuffle(&mut rng);
            let again = select_grasp(&grasps, &robot, &weights, &everywhere()).unwrap();
            assert_eq!(first, again);
        }
    }

    #[test]
    fn raising_winner_score_never_deselects_it() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let robot = Pose::identity();
        let weights = MetricWeights::default();
        for _ in 0..20 {
            let mut grasps: Vec<Grasp> = (0..10).map(|_| random_grasp(&mut rng)).collect();
            let picked = select_grasp(&grasps, &robot, &weights, &everywhere()).unwrap();
            let idx = grasps.iter().position(|g| *g == picked).unwrap();
            grasps[idx].score = (grasps[idx].score + 0.3).min(1.0);
            let again = select_grasp(&grasps, &robot, &weights, &everywhere()).unwrap();
            assert_eq!(again.translation, picked.translation);
            assert_eq!(again.rotation, picked.rotation);
        }
    }

    #[test]
    fn unreachable_best_falls_through_to_next() {
        let robot = Pose::identity();
        let reach = Reachability { base: Vector3::zeros(), radius: 0.9 };
        let mut best = Grasp::at(Vector3::new(2.0, 0.0, 0.5)); // outside the ball
        best.score = 1.0;
        let mut below_floor = Grasp::at(Vector3::new(0.3, 0.0, -0.1));
        below_floor.score = 0.9;
        let mut ok = Grasp::at(Vector3::new(0.3, 0.0, 0.2));
        ok.score = 0.2;
        let picked = select_grasp(
            &[best, below_floor, ok.clone()],
            &robot,
            &MetricWeights::default(),
            &reach,
        )
        .unwrap();
        assert_eq!(picked, ok);
        assert!(select_grasp(&[], &robot, &MetricWeights::default(), &reach).is_none());
    }

    proptest! {
        #[test]
        fn proposals_valid_over_random_boxes(
            w in 0.03f64..0.12, d in 0.03f64..0.12, h in 0.03f64..0.15,
            seed in 0u64..50,
        ) {
            let cloud = box_cloud(w, d, h, 300, seed);
            let p = HeuristicProposer::default();
            for g in p.propose(&Vec::new(), &cloud, 20, seed) {
                prop_assert!(g.is_valid());
            }
        }

        #[test]
        fn metric_penalizes_distance(
            dist in 0.01f64..1.0, score in 0.0f64..1.0,
        ) {
            let robot = Pose::identity();
            let weights = MetricWeights::default();
            let mut near = Grasp::at(Vector3::zeros());
            near.score = score;
            let mut far = near.clone();
            far.translation = Vector3::new(dist, 0.0, 0.0);
            prop_assert!(
                grasp_metric(&near, &robot, &weights) > grasp_metric(&far, &robot, &weights)
            );
        }
    }
}
