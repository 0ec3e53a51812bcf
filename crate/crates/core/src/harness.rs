//! Experiment orchestration: the simulated clock driving the target-model and
//! grasp-control processes, outcome adjudication, telemetry and sweeps.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bps::{BasisPointSet, BpsEncoding};
use crate::config::{Mode, ScenarioConfig};
use crate::control::{
    adjudicate_grasp, grasp_control_step, palm_box_intersects, ControlConfig, ControlState,
    GraspAdjudication, LoopTelemetry, LossPolicy, RobotState,
};
use crate::fusion::{ModelSnapshot, SnapshotSlot, StepStatus, TargetModelState};
use crate::geom::Pose;
use crate::grasp::{HeuristicProposer, Reachability};
use crate::scene::{object_pose_at, observe};

/// Stable seed derivation (splitmix64 finalizer over a keyed mix), so every
/// random stream in a run is reproducible from the scenario seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let x = base
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Miss,
    Collision,
    Timeout,
    Unreachable,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Miss => "miss",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
            Outcome::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub time_to_execute: Option<f64>,
    pub peak_lin_err: f64,
    pub final_lin_err: f64,
    pub peak_rot_err: f64,
    pub final_rot_err: f64,
    /// Total control time without usable visual feedback, s.
    pub loss_duration: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub summary: RunSummary,
    pub telemetry: Vec<LoopTelemetry>,
    /// Per-tick model cloud dump, when requested.
    pub cloud_dump: Option<String>,
}

/// Run one scenario to completion (execution, timeout, or workspace exit).
///
/// Deterministic for a fixed config: both processes advance on a simulated
/// event clock, perception first on ties. `lockstep` forces the camera to the
/// control rate so the interleaving is strictly alternating.
pub fn simulate(cfg: &ScenarioConfig, lockstep: bool, dump_clouds: bool) -> SimOutput {
    let seed = cfg.seed;
    let object = cfg.object_model();
    let samples = object.sample_surface(derive_seed(seed, 0, 0));
    let traj = cfg.scene_trajectory();
    let mut camera = cfg.camera_model();
    if lockstep {
        camera.sample_rate = cfg.tick_rate;
    }
    let schedule = cfg.failure_schedule();
    let params = &cfg.params;
    let extrinsic = cfg.cam_extrinsic();
    let base = cfg.robot_base();

    // target-model process state
    let fusion_cfg = params.fusion_config();
    let mut fusion_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 1));
    let basis = BasisPointSet::new_in_ball(
        params.n_bps,
        Vector3::new(params.bps_center[0], params.bps_center[1], params.bps_center[2]),
        params.bps_radius,
        derive_seed(seed, 0, 2),
    );
    let mut target = TargetModelState::new(&fusion_cfg);
    let slot = SnapshotSlot::new();
    let mut last_bps: BpsEncoding<f64> = Vec::new();
    let mut last_cam_pose = Pose::from_transform(
        &cfg.robot_start().to_transform().compose(&extrinsic.to_transform()),
    );

    // grasp-control process state
    let mut cstate = ControlState::new(RobotState::new(cfg.robot_start()));
    let ccfg = ControlConfig {
        gains: params.gains(),
        weights: params.metric_weights(),
        reach: Reachability { base, radius: params.workspace_radius },
        loss_policy: match cfg.mode {
            Mode::Conveyor => LossPolicy::HoldVelocity,
            Mode::Handover => LossPolicy::AssumeStatic,
        },
        kalman: params.kalman_config(),
        proposal_count: params.proposal_count,
        hysteresis: params.hysteresis,
        lag_tau: params.lag_tau,
        cam_extrinsic: extrinsic,
    };
    let proposer = HeuristicProposer { palm_offset: params.palm_offset, ..Default::default() };

    let cam_dt = 1.0 / camera.sample_rate;
    let ctrl_dt = 1.0 / cfg.tick_rate;
    let mut telemetry = Vec::new();
    let mut dump = dump_clouds.then(String::new);
    let mut palm_collided = false;
    let mut ever_selected = false;
    let mut loss_duration = 0.0;
    let mut outcome = None;
    let mut time_to_execute = None;

    let mut k: u64 = 0; // perception events
    let mut j: u64 = 0; // control events
    loop {
        let tp = k as f64 * cam_dt;
        let tc = j as f64 * ctrl_dt;
        if tp > cfg.duration && tc > cfg.duration {
            break;
        }
        if tp <= tc && tp <= cfg.duration {
            // --- perception event ---
            let obj_pose = object_pose_at(&traj, tp);
            let cam_pose = Pose::from_transform(
                &cstate.robot.pose.to_transform().compose(&extrinsic.to_transform()),
            );
            let obs = observe(
                &camera,
                &cam_pose,
                &object,
                &samples,
                &obj_pose,
                tp,
                &schedule,
                derive_seed(seed, 1, k),
            );
            let status = target.step(
                obs.as_ref(),
                cam_dt,
                schedule.icp_corrupted(tp),
                &fusion_cfg,
                &mut fusion_rng,
            );
            if let Some(model) = &target.model {
                if status == StepStatus::Updated {
                    last_cam_pose = cam_pose;
                    last_bps = basis.encode(&model.cloud);
                }
                slot.publish(ModelSnapshot {
                    tick: target.tick(),
                    time: tp,
                    status,
                    cloud: model.cloud.clone(),
                    anchor: model.anchor,
                    bps: last_bps.clone(),
                    cam_pose: last_cam_pose,
                });
                if let Some(d) = dump.as_mut() {
                    let _ = writeln!(
                        d,
                        "# tick {} frame {} t {:.6}",
                        target.tick(),
                        model.cloud.frame.name(),
                        tp
                    );
                    for p in &model.cloud.points {
                        let _ = writeln!(d, "{:.6} {:.6} {:.6}", p.x, p.y, p.z);
                    }
                }
            }
            k += 1;
        } else if tc <= cfg.duration {
            // --- control event ---
            let snap = slot.latest();
            let row = grasp_control_step(
                &mut cstate,
                snap.as_deref(),
                &proposer,
                &ccfg,
                tc,
                ctrl_dt,
                derive_seed(seed, 2, j),
            );
            if !row.feedback_ok {
                loss_duration += ctrl_dt;
            }
            if cstate.grasp.is_some() {
                ever_selected = true;
            }
            let obj_pose = object_pose_at(&traj, tc);
            let world_from_obj = obj_pose.to_transform();
            let surface: Vec<Vector3<f64>> =
                samples.iter().map(|(p, _)| world_from_obj.apply(p)).collect();
            if !cstate.executed && palm_box_intersects(&cstate.robot.pose, &surface) {
                palm_collided = true;
            }
            telemetry.push(row);
            if row.executed {
                time_to_execute = Some(tc);
                outcome = Some(match adjudicate_grasp(
                    &cstate.robot.pose,
                    &surface,
                    palm_collided,
                ) {
                    GraspAdjudication::Success => Outcome::Success,
                    GraspAdjudication::Miss => Outcome::Miss,
                    GraspAdjudication::Collision => Outcome::Collision,
                });
                break;
            }
            // robot left its workspace: attempt failed
            if (cstate.robot.pose.translation - base).norm() > params.workspace_radius + 0.2 {
                outcome = Some(Outcome::Unreachable);
                break;
            }
            // object left the workspace moving away: nothing left to grasp
            let rel = obj_pose.translation - base;
            if rel.norm() > params.workspace_radius + 0.05 {
                let prev = object_pose_at(&traj, (tc - ctrl_dt).max(0.0)).translation;
                if (obj_pose.translation - prev).dot(&rel) >= 0.0 {
                    outcome = Some(Outcome::Timeout);
                    break;
                }
            }
            j += 1;
        } else {
            break;
        }
    }

    let outcome = outcome.unwrap_or(if ever_selected {
        Outcome::Timeout
    } else {
        Outcome::Unreachable
    });

    let rows_with_grasp: Vec<&LoopTelemetry> =
        telemetry.iter().filter(|r| r.lin_err > 0.0 || r.rot_err > 0.0).collect();
    let peak_lin_err = rows_with_grasp.iter().map(|r| r.lin_err).fold(0.0, f64::max);
    let peak_rot_err = rows_with_grasp.iter().map(|r| r.rot_err).fold(0.0, f64::max);
    let (final_lin_err, final_rot_err) = rows_with_grasp
        .last()
        .map(|r| (r.lin_err, r.rot_err))
        .unwrap_or((0.0, 0.0));

    SimOutput {
        summary: RunSummary {
            outcome,
            time_to_execute,
            peak_lin_err,
            final_lin_err,
            peak_rot_err,
            final_rot_err,
            loss_duration,
        },
        telemetry,
        cloud_dump: dump,
    }
}

pub fn telemetry_csv(rows: &[LoopTelemetry]) -> String {
    let mut out = String::from("t_s,lin_err_m,rot_err_rad,est_speed_mps,success_pred,feedback_ok,executed\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.t,
            r.lin_err,
            r.rot_err,
            r.est_speed,
            r.success_pred,
            r.feedback_ok as u8,
            r.executed as u8
        );
    }
    out
}

/// Run a scenario and persist its telemetry (and optional cloud dump).
pub fn run_scenario(
    cfg: &ScenarioConfig,
    lockstep: bool,
    telemetry_path: &Path,
    dump_path: Option<&Path>,
) -> io::Result<RunSummary> {
    let out = simulate(cfg, lockstep, dump_path.is_some());
    std::fs::write(telemetry_path, telemetry_csv(&out.telemetry))?;
    if let (Some(path), Some(dump)) = (dump_path, out.cloud_dump) {
        std::fs::write(path, dump)?;
    }
    Ok(out.summary)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub speed: f64,
    pub rep: usize,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `(speed, success_rate)` per swept speed, in input order.
    pub rates: Vec<(f64, f64)>,
}

/// Speed × repetition grid with per-run seeds derived from the speed value
/// (not its list position), so rates are invariant under reordering the
/// speed list.
pub fn sweep(cfg: &ScenarioConfig, speeds: &[f64], reps: usize, lockstep: bool) -> SweepResult {
    let mut result = SweepResult::default();
    for &speed in speeds {
        let mut successes = 0usize;
        for rep in 0..reps {
            let mut run_cfg = cfg.with_conveyor_speed(speed);
            run_cfg.seed = derive_seed(cfg.seed, speed.to_bits(), rep as u64);
            let out = simulate(&run_cfg, lockstep, false);
            if out.summary.outcome == Outcome::Success {
                successes += 1;
            }
            result.rows.push(SweepRow { speed, rep, summary: out.summary });
        }
        let rate = if reps > 0 { successes as f64 / reps as f64 } else { 0.0 };
        result.rates.push((speed, rate));
    }
    result
}

pub fn summary_csv(result: &SweepResult) -> String {
    let mut out = String::from("speed_mps,rep,outcome,time_to_execute_s\n");
    for r in &result.rows {
        let tte = r
            .summary
            .time_to_execute
            .map(|t| format!("{t:.6}"))
            .unwrap_or_else(|| "nan".into());
        let _ = writeln!(out, "{:.3},{},{},{}", r.speed, r.rep, r.summary.outcome.as_str(), tte);
    }
    out
}

/// Text rate table, at most six speed columns per block.
pub fn rate_table(result: &SweepResult) -> String {
    let mut out = String::new();
    for chunk in result.rates.chunks(6) {
        let _ = write!(out, "{:<14}", "speed_mps");
        for (s, _) in chunk {
            let _ = write!(out, "{s:>8.3}");
        }
        out.push('\n');
        let _ = write!(out, "{:<14}", "success_rate");
        for (_, r) in chunk {
            let _ = write!(out, "{r:>8.3}");
        }
        out.push_str("\n\n");
    }
    if let Some(total) = mean_rate(result) {
        let _ = writeln!(out, "mean_success_rate {total:.3}");
    }
    out
}

pub fn mean_rate(result: &SweepResult) -> Option<f64> {
    if result.rows.is_empty() {
        return None;
    }
    let succ = result
        .rows
        .iter()
        .filter(|r| r.summary.outcome == Outcome::Success)
        .count();
    Some(succ as f64 / result.rows.len() as f64)
}

/// Run a sweep and persist summary, rate table and per-run telemetry files.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    speeds: &[f64],
    reps: usize,
    lockstep: bool,
    out_dir: &Path,
) -> io::Result<SweepResult> {
    std::fs::create_dir_all(out_dir)?;
    let mut result = SweepResult::default();
    for &speed in speeds {
        let mut successes = 0usize;
        for rep in 0..reps {
            let mut run_cfg = cfg.with_conveyor_speed(speed);
            run_cfg.seed = derive_seed(cfg.seed, speed.to_bits(), rep as u64);
            let out = simulate(&run_cfg, lockstep, false);
            let name = format!("telemetry_{:.3}_{rep}.csv", speed);
            std::fs::write(out_dir.join(name), telemetry_csv(&out.telemetry))?;
            if out.summary.outcome == Outcome::Success {
                successes += 1;
            }
            result.rows.push(SweepRow { speed, rep, summary: out.summary });
        }
        let rate = if reps > 0 { successes as f64 / reps as f64 } else { 0.0 };
        result.rates.push((speed, rate));
    }
    std::fs::write(out_dir.join("summary.csv"), summary_csv(&result))?;
    std::fs::write(out_dir.join("rates.txt"), rate_table(&result))?;
    Ok(result)
}
