//! Visual-servo grasp control: orientation blending, Cartesian velocity
//! commands, simulated end-effector integration, execution trigger and
//! grasp-outcome adjudication.

use nalgebra::Vector3;

use crate::estimation::{dead_reckon, KalmanConfig, KalmanState};
use crate::fusion::{ModelSnapshot, StepStatus};
use crate::geom::{apply_transform, AxisAngle, Frame, PointCloud, Pose};
use crate::grasp::{
    grasp_metric, select_grasp, Grasp, GraspProposer, MetricWeights, Reachability, FINGER_DOF,
    FINGER_HALF_SPAN, FINGER_REACH, PALM_HALF_XY, PALM_THICKNESS,
};

/// PD gains, blending thresholds, execution threshold and command caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    pub c_p_v: f64,
    pub c_d_v: f64,
    pub c_p_w: f64,
    pub c_d_w: f64,
    /// Above this grasp distance the camera is oriented at the object, m.
    pub c_o: f64,
    /// Below this grasp distance the hand aligns with the grasp, m.
    pub c_g: f64,
    /// Execution threshold on the success prediction.
    pub c_e: f64,
    pub v_cap: f64,
    pub w_cap: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        Self {
            c_p_v: 1.0,
            c_d_v: 2.0,
            c_p_w: 2.5,
            c_d_w: 5.0,
            c_o: 0.2,
            c_g: 0.05,
            c_e: 0.7,
            v_cap: 0.5,
            w_cap: 1.5,
        }
    }
}

/// Simulated end-effector state. The palm frame is the end-effector frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose<f64>,
    /// Actual Cartesian velocity (follows the command through the optional
    /// first-order lag).
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub fingers_closed: bool,
    pub fingers: [f64; FINGER_DOF],
}

impl RobotState {
    pub fn new(pose: Pose<f64>) -> Self {
        Self {
            pose,
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            fingers_closed: false,
            fingers: [0.0; FINGER_DOF],
        }
    }
}

/// One telemetry record per control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopTelemetry {
    pub t: f64,
    pub lin_err: f64,
    pub rot_err: f64,
    pub est_speed: f64,
    pub success_pred: f64,
    pub feedback_ok: bool,
    pub executed: bool,
}

/// Blended orientation error: full camera-at-object alignment far away, full
/// grasp alignment close in, linear interpolation between.
pub fn blend_orientation(
    t_err: &Vector3<f64>,
    r_grasp: &AxisAngle<f64>,
    r_object: &AxisAngle<f64>,
    gains: &ControlGains,
) -> AxisAngle<f64> {
    assert!(gains.c_o > gains.c_g);
    let dist = t_err.norm();
    if dist >= gains.c_o {
        return *r_object;
    }
    if dist <= gains.c_g {
        return *r_grasp;
    }
    let dg = (dist - gains.c_g) / (gains.c_o - gains.c_g);
    AxisAngle::new(r_object.vector() * dg + r_grasp.vector() * (1.0 - dg))
}

fn clamp_norm(v: Vector3<f64>, cap: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > cap {
        v * (cap / n)
    } else {
        v
    }
}

/// PD command with target-velocity feedforward, clamped to the caps.
///
/// The derivative inputs are per-tick first differences of the errors; the
/// caller owns the one-tick memory.
pub fn velocity_command(
    t_err: &Vector3<f64>,
    dt_err: &Vector3<f64>,
    r_blend: &AxisAngle<f64>,
    dr_blend: &Vector3<f64>,
    v_bar: &Vector3<f64>,
    gains: &ControlGains,
) -> (Vector3<f64>, Vector3<f64>) {
    let v_d = t_err * gains.c_p_v + dt_err * gains.c_d_v + v_bar;
    let w_d = r_blend.vector() * gains.c_p_w + dr_blend * gains.c_d_w;
    (clamp_norm(v_d, gains.v_cap), clamp_norm(w_d, gains.w_cap))
}

/// Euler step of the simulated plant. With `lag_tau > 0` the actual velocity
/// follows the command through a first-order lag.
pub fn integrate_robot(
    state: &RobotState,
    v_d: &Vector3<f64>,
    w_d: &Vector3<f64>,
    dt: f64,
    lag_tau: f64,
) -> RobotState {
    assert!(dt > 0.0);
    let mut next = state.clone();
    if lag_tau > 0.0 {
        let alpha = (dt / lag_tau).min(1.0);
        next.velocity += (v_d - next.velocity) * alpha;
        next.angular_velocity += (w_d - next.angular_velocity) * alpha;
    } else {
        next.velocity = *v_d;
        next.angular_velocity = *w_d;
    }
    next.pose.translation += next.velocity * dt;
    let step = AxisAngle::new(next.angular_velocity * dt).to_matrix();
    next.pose.orientation =
        AxisAngle::from_matrix(&(step * state.pose.orientation.to_matrix()));
    next
}

/// Fingers close when the evaluator predicts success strictly above `c_e`.
/// Returns the score alongside the decision.
pub fn execution_trigger(
    hand: &Pose<f64>,
    grasp: &Grasp,
    cloud: &PointCloud<f64>,
    evaluator: &dyn GraspProposer,
    c_e: f64,
) -> (f64, bool) {
    let score = evaluator.evaluate(hand, &grasp.fingers, cloud);
    (score, score > c_e)
}

/// Does any of the points intersect the palm box of a hand at `pose`?
pub fn palm_box_intersects(pose: &Pose<f64>, points: &[Vector3<f64>]) -> bool {
    let inv_rot = pose.orientation.to_matrix().transpose();
    points.iter().any(|p| {
        let q = inv_rot * (p - pose.translation);
        q.x.abs() <= PALM_HALF_XY
            && q.y.abs() <= PALM_HALF_XY
            && q.z >= -PALM_THICKNESS
            && q.z <= 0.0
    })
}

/// Ground-truth outcome of closing the fingers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraspAdjudication {
    Success,
    Miss,
    Collision,
}

/// Geometric adjudication against the true object surface (world frame).
///
/// Collision when the palm box touched the surface during the approach or
/// does so now. Success when, at closing, surface points sit on both sides of
/// the closing axis within the finger span and reach, and the palm standoff
/// lies in `[0.01, 0.12]` m. Miss otherwise.
pub fn adjudicate_grasp(
    hand: &Pose<f64>,
    true_surface: &[Vector3<f64>],
    palm_collided_during_approach: bool,
) -> GraspAdjudication {
    if palm_collided_during_approach || palm_box_intersects(hand, true_surface) {
        return GraspAdjudication::Collision;
    }
    let inv_rot = hand.orientation.to_matrix().transpose();
    let mut left = false;
    let mut right = false;
    let mut standoff = f64::INFINITY;
    for p in true_surface {
        let q = inv_rot * (p - hand.translation);
        standoff = standoff.min(q.norm());
        if q.z >= 0.0
            && q.z <= FINGER_REACH
            && q.x.abs() <= FINGER_HALF_SPAN
            && q.y.abs() <= FINGER_HALF_SPAN
        {
            if q.x >= 0.0 {
                right = true;
            }
            if q.x <= 0.0 {
                left = true;
            }
        }
    }
    if left && right && (0.01..=0.12).contains(&standoff) {
        GraspAdjudication::Success
    } else {
        GraspAdjudication::Miss
    }
}

/// What to assume about the target during feedback loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossPolicy {
    /// Conveyor: hold the last velocity estimate.
    HoldVelocity,
    /// Handover: assume a static target.
    AssumeStatic,
}

/// Everything the control step needs besides its mutable state.
#[derive(Debug, Clone)]
pub struct ControlConfig {
    pub gains: ControlGains,
    pub weights: MetricWeights,
    pub reach: Reachability,
    pub loss_policy: LossPolicy,
    pub kalman: KalmanConfig<f64>,
    pub proposal_count: usize,
    /// Metric margin a challenger must clear to replace the current grasp.
    pub hysteresis: f64,
    pub lag_tau: f64,
    /// Camera pose relative to the end-effector (eye-in-hand extrinsic).
    pub cam_extrinsic: Pose<f64>,
}

/// Mutable state owned by the grasp-control process.
#[derive(Debug, Clone)]
pub struct ControlState {
    pub robot: RobotState,
    pub kalman: Option<KalmanState<f64>>,
    /// Currently selected grasp, world frame.
    pub grasp: Option<Grasp>,
    /// Latest model cloud brought into the world frame (dead-reckoned during
    /// loss).
    pub model_world: Option<PointCloud<f64>>,
    pub executed: bool,
    last_snapshot_tick: Option<u64>,
    prev_t_err: Option<Vector3<f64>>,
    prev_r_blend: Option<Vector3<f64>>,
}

impl ControlState {
    pub fn new(robot: RobotState) -> Self {
        Self {
            robot,
            kalman: None,
            grasp: None,
            model_world: None,
            executed: false,
            last_snapshot_tick: None,
            prev_t_err: None,
            prev_r_blend: None,
        }
    }
}

/// Axis-angle rotating the camera optical axis onto the ray to the target
/// centroid (the camera-at-object alignment error).
fn camera_alignment_error(
    robot_pose: &Pose<f64>,
    cam_extrinsic: &Pose<f64>,
    target: &Vector3<f64>,
) -> AxisAngle<f64> {
    let cam = robot_pose.to_transform().compose(&cam_extrinsic.to_transform());
    let optical: Vector3<f64> = cam.rotation.column(2).into();
    let to_target = target - cam.translation;
    let n = to_target.norm();
    if n < 1e-9 {
        return AxisAngle::zero();
    }
    let dir = to_target / n;
    let cos = optical.dot(&dir).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let axis = optical.cross(&dir);
    if axis.norm() < 1e-12 {
        if angle < 1e-9 {
            return AxisAngle::zero();
        }
        // antiparallel: any perpendicular axis works
        let perp = if optical.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let axis = (perp - optical * perp.dot(&optical)).normalize();
        return AxisAngle::new(axis * angle);
    }
    AxisAngle::new(axis.normalize() * angle)
}

/// One control tick: consume the latest snapshot (possibly stale or
/// loss-flagged), maintain the velocity estimate, keep or reselect the grasp,
/// command and integrate the robot, and check the execution trigger.
#[allow(clippy::too_many_arguments)]
pub fn grasp_control_step(
    state: &mut ControlState,
    snapshot: Option<&ModelSnapshot>,
    proposer: &dyn GraspProposer,
    cfg: &ControlConfig,
    t: f64,
    dt: f64,
    proposal_seed: u64,
) -> LoopTelemetry {
    let fresh = match (snapshot, state.last_snapshot_tick) {
        (Some(s), Some(last)) => s.tick != last,
        (Some(_), None) => true,
        (None, _) => false,
    };
    let feedback_ok =
        snapshot.map(|s| s.status == StepStatus::Updated).unwrap_or(false);

    let mut v_bar = Vector3::zeros();
    if fresh && feedback_ok {
        let s = snapshot.unwrap();
        state.last_snapshot_tick = Some(s.tick);
        let world_from_cam = s.cam_pose.to_transform();
        let cloud_world = PointCloud::new(
            apply_transform(&world_from_cam, &s.cloud).points,
            Frame::World,
        );
        let anchor_world = world_from_cam.apply(&s.anchor);

        match state.kalman.as_mut() {
            None => state.kalman = Some(KalmanState::new(anchor_world, &cfg.kalman)),
            Some(k) => {
                k.predict(dt, &cfg.kalman);
                k.update(anchor_world, &cfg.kalman);
            }
        }
        v_bar = state.kalman.as_ref().unwrap().velocity();

        // the kept grasp rides on the moving target
        if let Some(g) = state.grasp.as_mut() {
            g.translation += v_bar * dt;
        }

        // reselect from fresh proposals, with hysteresis against churn
        let proposals =
            proposer.propose(&s.bps, &cloud_world, cfg.proposal_count, proposal_seed);
        let challenger =
            select_grasp(&proposals, &state.robot.pose, &cfg.weights, &cfg.reach);
        let keep_current = match (&mut state.grasp, &challenger) {
            (Some(cur), Some(best)) => {
                cur.score = proposer.evaluate(&cur.pose(), &cur.fingers, &cloud_world);
                let cur_metric = grasp_metric(cur, &state.robot.pose, &cfg.weights);
                let best_metric = grasp_metric(best, &state.robot.pose, &cfg.weights);
                cfg.reach.reachable(&cur.translation)
                    && best_metric <= cur_metric + cfg.hysteresis
            }
            (Some(cur), None) => cfg.reach.reachable(&cur.translation),
            (None, _) => false,
        };
        if !keep_current {
            if state.grasp.as_ref().map(|g| g.translation)
                != challenger.as_ref().map(|g| g.translation)
            {
                // derivative memory is meaningless across a reselection
                state.prev_t_err = None;
                state.prev_r_blend = None;
            }
            state.grasp = challenger;
        }
        state.model_world = Some(cloud_world);
    } else {
        // stale or loss-flagged feedback: dead-reckon per the loss policy
        match cfg.loss_policy {
            LossPolicy::HoldVelocity => {
                if let Some(k) = state.kalman.as_mut() {
                    v_bar = k.velocity();
                    k.predict(dt, &cfg.kalman);
                }
            }
            LossPolicy::AssumeStatic => v_bar = Vector3::zeros(),
        }
        if v_bar.norm() > 0.0 {
            if let (Some(g), Some(m)) = (&state.grasp, &state.model_world) {
                let (g2, m2) = dead_reckon(g, m, v_bar, dt);
                state.grasp = Some(g2);
                state.model_world = Some(m2);
            }
        }
    }

    // command from the current grasp; hold position when there is none
    let (mut lin_err, mut rot_err) = (0.0, 0.0);
    let (v_d, w_d) = if let Some(g) = &state.grasp {
        let t_err = g.translation - state.robot.pose.translation;
        let r_grasp = AxisAngle::from_matrix(
            &(g.rotation * state.robot.pose.orientation.to_matrix().transpose()),
        );
        let r_object = state
            .model_world
            .as_ref()
            .filter(|m| !m.is_empty())
            .map(|m| {
                camera_alignment_error(&state.robot.pose, &cfg.cam_extrinsic, &m.centroid())
            })
            .unwrap_or(AxisAngle::zero());
        let r_blend = blend_orientation(&t_err, &r_grasp, &r_object, &cfg.gains);

        let dt_err = state.prev_t_err.map(|p| t_err - p).unwrap_or_else(Vector3::zeros);
        let dr_blend = state
            .prev_r_blend
            .map(|p| r_blend.vector() - p)
            .unwrap_or_else(Vector3::zeros);
        state.prev_t_err = Some(t_err);
        state.prev_r_blend = Some(r_blend.vector());

        lin_err = t_err.norm();
        rot_err = r_grasp.angle();
        velocity_command(&t_err, &dt_err, &r_blend, &dr_blend, &v_bar, &cfg.gains)
    } else {
        state.prev_t_err = None;
        state.prev_r_blend = None;
        (Vector3::zeros(), Vector3::zeros())
    };

    state.robot = integrate_robot(&state.robot, &v_d, &w_d, dt, cfg.lag_tau);

    // success prediction and execution trigger at the new hand pose
    let mut success_pred = 0.0;
    if !state.executed {
        if let (Some(g), Some(m)) = (&state.grasp, &state.model_world) {
            if !m.is_empty() {
                let (score, execute) =
                    execution_trigger(&state.robot.pose, g, m, proposer, cfg.gains.c_e);
                success_pred = score;
                if execute {
                    state.executed = true;
                    state.robot.fingers_closed = true;
                    state.robot.fingers = g.fingers;
                }
            }
        }
    }

    LoopTelemetry {
        t,
        lin_err,
        rot_err,
        est_speed: v_bar.norm(),
        success_pred,
        feedback_ok,
        executed: state.executed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gains() -> ControlGains {
        ControlGains::default()
    }

    #[test]
    fn blending_far_returns_object_alignment() {
        let r_g = AxisAngle::new(Vector3::new(0.1, 0.0, 0.0));
        let r_o = AxisAngle::new(Vector3::new(0.0, 0.0, 0.4));
        let out = blend_orientation(&Vector3::new(0.30, 0.0, 0.0), &r_g, &r_o, &gains());
        assert_eq!(out, r_o);
    }

    #[test]
    fn blending_midpoint_is_average() {
        let r_g = AxisAngle::new(Vector3::new(0.2, 0.0, 0.0));
        let r_o = AxisAngle::new(Vector3::new(0.0, 0.4, 0.0));
        // 0.125 m with c_o=0.2, c_g=0.05: dg = 0.5
        let out = blend_orientation(&Vector3::new(0.125, 0.0, 0.0), &r_g, &r_o, &gains());
        assert_relative_eq!(out.vector(), Vector3::new(0.1, 0.2, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn blending_branches_agree_at_boundaries() {
        let r_g = AxisAngle::new(Vector3::new(0.3, -0.2, 0.1));
        let r_o = AxisAngle::new(Vector3::new(-0.1, 0.5, 0.2));
        let g = gains();
        for dist in [g.c_g, g.c_o] {
            let t = Vector3::new(dist, 0.0, 0.0);
            let branch = blend_orientation(&t, &r_g, &r_o, &g);
            // interpolated branch evaluated at the boundary distance
            let dg = (dist - g.c_g) / (g.c_o - g.c_g);
            let interp = r_o.vector() * dg + r_g.vector() * (1.0 - dg);
            assert!((branch.vector() - interp).norm() < 1e-12);
        }
    }

    #[test]
    fn command_examples() {
        let g = gains();
        let zero = Vector3::zeros();
        let (v, w) = velocity_command(
            &zero, &zero, &AxisAngle::zero(), &zero, &zero, &g,
        );
        assert_eq!(v, Vector3::zeros());
        assert_eq!(w, Vector3::zeros());

        let v_bar = Vector3::new(0.2, 0.0, 0.0);
        let (v, _) = velocity_command(&zero, &zero, &AxisAngle::zero(), &zero, &v_bar, &g);
        assert_eq!(v, v_bar); // pure feedforward

        let (v, _) = velocity_command(
            &Vector3::new(0.1, 0.0, 0.0), &zero, &AxisAngle::zero(), &zero, &zero, &g,
        );
        assert_relative_eq!(v, Vector3::new(0.1, 0.0, 0.0)); // c_p_v = 1.0
    }

    #[test]
    fn command_is_linear_in_errors() {
        let g = gains();
        let zero = Vector3::zeros();
        let e = Vector3::new(0.02, -0.01, 0.03);
        let (v1, _) = velocity_command(&e, &zero, &AxisAngle::zero(), &zero, &zero, &g);
        let (v2, _) = velocity_command(&(e * 2.0), &zero, &AxisAngle::zero(), &zero, &zero, &g);
        assert_relative_eq!(v2, v1 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn commands_are_capped() {
        let g = gains();
        let (v, w) = velocity_command(
            &Vector3::new(5.0, 0.0, 0.0),
            &Vector3::zeros(),
            &AxisAngle::new(Vector3::new(0.0, 0.0, 3.0)),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &g,
        );
        assert_relative_eq!(v.norm(), g.v_cap);
        assert_relative_eq!(w.norm(), g.w_cap);
    }

    #[test]
    fn integrate_zero_command_holds() {
        let s = RobotState::new(Pose::identity());
        let out = integrate_robot(&s, &Vector3::zeros(), &Vector3::zeros(), 0.1, 0.0);
        assert_eq!(out.pose, s.pose);
    }

    #[test]
    fn integrate_euler_step() {
        let s = RobotState::new(Pose::identity());
        let out = integrate_robot(&s, &Vector3::new(0.1, 0.0, 0.0), &Vector3::zeros(), 0.1, 0.0);
        assert_relative_eq!(out.pose.translation, Vector3::new(0.01, 0.0, 0.0));
    }

    #[test]
    fn integrate_full_turn_returns_to_start() {
        let w: Vector3<f64> = Vector3::new(0.0, 0.0, 1.2);
        // step count chosen so steps * |w| * dt is exactly one revolution
        let steps = 6000usize;
        let dt = std::f64::consts::TAU / (w.norm() * steps as f64);
        assert!(dt <= 1e-3);
        let mut s = RobotState::new(Pose::new(
            Vector3::zeros(),
            AxisAngle::new(Vector3::new(0.3, 0.1, -0.2)),
        ));
        let start = s.pose.orientation.to_matrix();
        for _ in 0..steps {
            s = integrate_robot(&s, &Vector3::zeros(), &w, dt, 0.0);
        }
        assert!((s.pose.orientation.to_matrix() - start).norm() < 1e-6);
    }

    #[test]
    fn trigger_is_strict() {
        struct Fixed(f64);
        impl GraspProposer for Fixed {
            fn propose(
                &self,
                _: &crate::bps::BpsEncoding<f64>,
                _: &PointCloud<f64>,
                _: usize,
                _: u64,
            ) -> Vec<Grasp> {
                Vec::new()
            }
            fn evaluate(&self, _: &Pose<f64>, _: &[f64; FINGER_DOF], _: &PointCloud<f64>) -> f64 {
                self.0
            }
        }
        let cloud = PointCloud::new(vec![Vector3::zeros()], Frame::World);
        let g = Grasp::at(Vector3::zeros());
        let (s, fire) = execution_trigger(&Pose::identity(), &g, &cloud, &Fixed(0.71), 0.7);
        assert!(fire && s == 0.71);
        let (_, fire) = execution_trigger(&Pose::identity(), &g, &cloud, &Fixed(0.70), 0.7);
        assert!(!fire);
    }

    fn box_surface(w: f64, d: f64, h: f64, center: Vector3<f64>) -> Vec<Vector3<f64>> {
        let obj = crate::scene::ObjectModel::new(crate::scene::Shape::Box { w, d, h }, 800);
        obj.sample_surface(5).into_iter().map(|(p, _)| p + center).collect()
    }

    fn top_down_at(t: Vector3<f64>) -> Pose<f64> {
        // palm z pointing straight down
        Pose::new(t, AxisAngle::new(Vector3::new(std::f64::consts::PI, 0.0, 0.0)))
    }

    #[test]
    fn adjudicate_centered_grasp_succeeds() {
        let surface = box_surface(0.06, 0.06, 0.1, Vector3::new(0.4, 0.0, 0.05));
        // palm 0.05 m above the box top (z = 0.1), closing axis across x
        let hand = top_down_at(Vector3::new(0.4, 0.0, 0.15));
        assert_eq!(adjudicate_grasp(&hand, &surface, false), GraspAdjudication::Success);
    }

    #[test]
    fn adjudicate_far_hand_misses() {
        let surface = box_surface(0.06, 0.06, 0.1, Vector3::new(0.4, 0.0, 0.05));
        let hand = top_down_at(Vector3::new(0.7, 0.0, 0.15));
        assert_eq!(adjudicate_grasp(&hand, &surface, false), GraspAdjudication::Miss);
    }

    #[test]
    fn adjudicate_penetration_collides() {
        let surface = box_surface(0.06, 0.06, 0.1, Vector3::new(0.4, 0.0, 0.05));
        let hand = top_down_at(Vector3::new(0.4, 0.0, 0.05));
        assert_eq!(adjudicate_grasp(&hand, &surface, false), GraspAdjudication::Collision);
        // and a clean pose still collides if the approach touched earlier
        let clean = top_down_at(Vector3::new(0.4, 0.0, 0.15));
        assert_eq!(adjudicate_grasp(&clean, &surface, true), GraspAdjudication::Collision);
    }

    #[test]
    fn static_servo_converges_below_a_millimeter() {
        // PD loop against a fixed grasp: < 1 mm and < 0.01 rad within 5 s
        let g = gains();
        let dt = 1.0 / 30.0;
        // ~0.1 m initial offset: the default translation gain closes roughly
        // 3% of the error per tick, so 5 s buys a factor of ~100
        let target_t = Vector3::new(0.06, -0.05, 0.05);
        let target_r = AxisAngle::new(Vector3::new(0.0, 0.6, 0.2));
        let mut robot = RobotState::new(Pose::identity());
        let mut prev_t: Option<Vector3<f64>> = None;
        let mut prev_r: Option<Vector3<f64>> = None;
        for _ in 0..150 {
            let t_err = target_t - robot.pose.translation;
            let r_err = AxisAngle::from_matrix(
                &(target_r.to_matrix() * robot.pose.orientation.to_matrix().transpose()),
            );
            let r_blend = blend_orientation(&t_err, &r_err, &r_err, &g);
            let dt_err = prev_t.map(|p| t_err - p).unwrap_or_else(Vector3::zeros);
            let dr = prev_r.map(|p| r_blend.vector() - p).unwrap_or_else(Vector3::zeros);
            prev_t = Some(t_err);
            prev_r = Some(r_blend.vector());
            let (v, w) = velocity_command(&t_err, &dt_err, &r_blend, &dr, &Vector3::zeros(), &g);
            robot = integrate_robot(&robot, &v, &w, dt, 0.0);
        }
        let final_t = (target_t - robot.pose.translation).norm();
        let final_r = AxisAngle::from_matrix(
            &(target_r.to_matrix() * robot.pose.orientation.to_matrix().transpose()),
        )
        .angle();
        assert!(final_t < 1e-3, "linear error {final_t}");
        assert!(final_r < 0.01, "rotational error {final_r}");
    }

    #[test]
    fn camera_alignment_error_points_camera_at_target() {
        let robot = Pose::identity();
        let target = Vector3::new(1.0, 0.0, 1.0);
        let r_o = camera_alignment_error(&robot, &Pose::identity(), &target);
        // rotating the optical axis by r_o lands it on the target direction
        let rotated = r_o.to_matrix() * Vector3::z();
        assert_relative_eq!(rotated, target.normalize(), epsilon = 1e-9);
    }
}
