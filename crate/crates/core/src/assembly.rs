//! Pedal-driven assembly state machine, insertion planning and the trial runner.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmp::{fit_pose_dmp, rollout, DmpConfig, DmpError, PoseDmp};
use crate::ktc::{plant_step, PlantState, TeachingScenario};
use crate::metrics::{trajectory_report, TrajectoryReport};
use crate::se3::{Pose, UnitQuaternion, Vec3};
use crate::synthetic::{min_jerk, reference_waypoints};
use crate::trajectory::{fmt_sig9, Sample, Trajectory};
use crate::vision::{cell_seed, localize, BarScene, HoleEstimate, MaskParams, SceneDescription};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error("file={file} line={line} field={field}: {message}")]
    EventParse {
        file: String,
        line: usize,
        field: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason")]
pub enum TaskState {
    AwaitingBar,
    BarPlaced,
    PegGrasped,
    InsertionPlanned,
    Inserting,
    AwaitingHuman,
    Done,
    Failed(String),
}

impl TaskState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, TaskState::Done | TaskState::Failed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    PedalPress,
    VisionReady,
    MotionDone,
    Abort,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::PedalPress,
        EventKind::VisionReady,
        EventKind::MotionDone,
        EventKind::Abort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::PedalPress => "pedal-press",
            EventKind::VisionReady => "vision-ready",
            EventKind::MotionDone => "motion-done",
            EventKind::Abort => "abort",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub kind: EventKind,
    /// s
    pub t: f64,
}

impl StepEvent {
    pub fn new(kind: EventKind, t: f64) -> Self {
        Self { kind, t }
    }
}

pub const UNEXPECTED: &str = "unexpected event";

/// The transition table. Total over all pairs.
pub fn advance(state: &TaskState, event: &StepEvent) -> TaskState {
    use EventKind::*;
    use TaskState::*;
    match (state, event.kind) {
        (Failed(r), _) => Failed(r.clone()),
        (_, Abort) => Failed("aborted".into()),
        (AwaitingBar, PedalPress) => BarPlaced,
        (BarPlaced, MotionDone) => PegGrasped,
        (PegGrasped, VisionReady) => InsertionPlanned,
        (InsertionPlanned, PedalPress) => Inserting,
        (Inserting, MotionDone) => AwaitingHuman,
        (AwaitingHuman, PedalPress) => Done,
        _ => Failed(UNEXPECTED.into()),
    }
}

/// The nominal event sequence, robot events included.
pub fn nominal_sequence() -> Vec<EventKind> {
    use EventKind::*;
    vec![PedalPress, MotionDone, VisionReady, PedalPress, MotionDone, PedalPress]
}

/// Parses an event script: one `t kind` per line, `#` comments and blank lines ignored.
pub fn parse_events(text: &str, source: &str) -> Result<Vec<StepEvent>, AssemblyError> {
    let err = |line: usize, field: &'static str, message: String| AssemblyError::EventParse {
        file: source.to_string(),
        line,
        field,
        message,
    };
    let mut out: Vec<StepEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let t_str = parts.next().unwrap_or("");
        let t: f64 = t_str
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| err(i + 1, "t", format!("not a finite number: {t_str:?}")))?;
        let kind: EventKind = parts
            .next()
            .ok_or_else(|| err(i + 1, "kind", "missing".into()))?
            .parse()
            .map_err(|m| err(i + 1, "kind", m))?;
        if parts.next().is_some() {
            return Err(err(i + 1, "kind", "trailing fields".into()));
        }
        if out.last().is_some_and(|p| t < p.t) {
            return Err(err(i + 1, "t", "timestamps must be non-decreasing".into()));
        }
        out.push(StepEvent::new(kind, t));
    }
    Ok(out)
}

pub fn events_to_string(events: &[StepEvent]) -> String {
    events.iter().map(|e| format!("{} {}\n", fmt_sig9(e.t), e.kind)).collect()
}

/// Human side of a nominal trial: place bar, start insertion, finish.
pub fn default_script() -> Vec<StepEvent> {
    vec![
        StepEvent::new(EventKind::PedalPress, 0.0),
        StepEvent::new(EventKind::PedalPress, 0.0),
        StepEvent::new(EventKind::PedalPress, 0.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Hole radius minus peg radius, m. Also the lateral tolerance.
    pub clearance: f64,
    /// rad
    pub max_tilt: f64,
    /// m
    pub min_depth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            clearance: 0.5e-3,
            max_tilt: 2f64.to_radians(),
            min_depth: 0.010,
        }
    }
}

/// Success predicate on the final-state record.
pub fn is_success(lateral: f64, tilt: f64, depth: f64, tol: &Tolerances) -> bool {
    lateral <= tol.clearance && tilt <= tol.max_tilt && depth >= tol.min_depth
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanParams {
    /// m above the hole along its axis where the DMP ends.
    pub standoff: f64,
    /// m below the hole mouth.
    pub depth: f64,
    /// m/s
    pub descent_speed: f64,
    /// s
    pub dt: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            standoff: 0.030,
            depth: 0.015,
            descent_speed: 0.01,
            dt: 1e-3,
        }
    }
}

/// Tool orientation with its `z` axis along `-axis`, keeping the tool-down yaw.
pub fn aligned_orientation(axis: &Vec3) -> UnitQuaternion {
    let down = UnitQuaternion::from_axis_angle(&Vec3::x(), std::f64::consts::PI);
    UnitQuaternion::rotation_between(&-Vec3::z(), &-axis).mul(&down)
}

/// Insertion goal: `depth` below the hole center along `-axis`.
pub fn insertion_goal(hole: &HoleEstimate, depth: f64) -> Pose {
    Pose::new(hole.center - hole.axis * depth, aligned_orientation(&hole.axis))
}

/// DMP approach to the standoff pose, then a straight minimum-jerk descent
/// along the estimated axis to the insertion goal.
pub fn plan_insertion(current: &Pose, hole: &HoleEstimate, dmp: &PoseDmp, params: &PlanParams) -> Result<Trajectory, AssemblyError> {
    if !(params.standoff > 0.0) {
        return Err(AssemblyError::InvalidParameter("standoff must be positive".into()));
    }
    if !(params.depth >= 0.0) || !(params.descent_speed > 0.0) || !(params.dt > 0.0) {
        return Err(AssemblyError::InvalidParameter("depth, descent speed and dt must be valid".into()));
    }
    if (hole.axis.norm() - 1.0).abs() > 1e-6 {
        return Err(AssemblyError::InvalidParameter("hole axis must be unit length".into()));
    }
    let q = aligned_orientation(&hole.axis);
    let approach = Pose::new(hole.center + hole.axis * params.standoff, q);
    let goal = insertion_goal(hole, params.depth);
    let approach_traj = rollout(dmp, current, &approach, dmp.tau, params.dt)?;
    let t0 = approach_traj.duration();
    let reached = approach_traj.last().pose;
    let descent_time = (params.standoff + params.depth) / params.descent_speed;
    let descent = min_jerk(&reached, &goal, descent_time, params.dt);
    let mut samples = approach_traj.into_samples();
    samples.extend(descent.samples().iter().skip(1).map(|s| Sample::new(t0 + s.t, s.pose)));
    Ok(Trajectory::new(samples).expect("descent follows the approach in time"))
}

/// Peg tip state against the true hole.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HoleFrame {
    center: Vec3,
    axis: Vec3,
}

impl HoleFrame {
    /// `(height above the mouth, lateral offset vector)`.
    fn split(&self, p: &Vec3) -> (f64, Vec3) {
        let d = p - self.center;
        let h = d.dot(&self.axis);
        (h, d - self.axis * h)
    }
}

/// Contact reaction of the bar on the peg tip. Outside the hole the top face
/// stops the tip; inside, the wall pushes the tip back within the clearance.
fn contact(scene: &BarScene, hole: &HoleFrame, clearance: f64, inside: bool, tip: Vec3) -> (Vec3, bool) {
    let (h, lat) = hole.split(&tip);
    if h >= 0.0 {
        return (tip, false);
    }
    let local = scene.bar_pose.inverse().transform_point(&tip);
    let [l, w, ht] = scene.bar_dims;
    let over_bar = local.x.abs() <= l / 2.0 && local.y.abs() <= w / 2.0 && local.z >= -ht / 2.0;
    if !over_bar && !inside {
        return (tip, false);
    }
    let r = lat.norm();
    if inside || r <= clearance {
        let lat = if r > clearance { lat * (clearance / r) } else { lat };
        return (hole.center + hole.axis * h + lat, true);
    }
    (hole.center + lat, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoleSelection {
    Random,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssemblyConfig {
    pub scene: SceneDescription,
    pub hole: HoleSelection,
    /// rad, bar yaw for single trials.
    pub bar_yaw: f64,
    /// rad, bar yaw range sampled by batches.
    pub yaw_range: [f64; 2],
    /// World point the bar yaws about.
    #[serde(with = "crate::se3::vec3_array")]
    pub pivot: Vec3,
    pub initial_pose: Pose,
    pub mask: MaskParams,
    pub tolerances: Tolerances,
    pub plan: PlanParams,
    pub rate_hz: f64,
    pub plant_time_constant: f64,
    /// s held at the goal after the plan ends.
    pub settle_time: f64,
    /// s for the robot to pick up the peg.
    pub grasp_time: f64,
    /// s for localization.
    pub vision_time: f64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            scene: SceneDescription::default(),
            hole: HoleSelection::Random,
            bar_yaw: 0.0,
            yaw_range: [-45f64.to_radians(), 45f64.to_radians()],
            pivot: crate::vision::SweepConfig::default().pivot,
            initial_pose: reference_waypoints()[0],
            mask: MaskParams {
                noise_sigma: 0.5e-3,
                ..MaskParams::default()
            },
            tolerances: Tolerances::default(),
            plan: PlanParams::default(),
            rate_hz: 100.0,
            plant_time_constant: 0.05,
            settle_time: 1.0,
            grasp_time: 2.0,
            vision_time: 0.5,
        }
    }
}

impl AssemblyConfig {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        let bad = |m: &str| Err(AssemblyError::InvalidParameter(m.into()));
        self.scene
            .scene()
            .validate()
            .map_err(|e| AssemblyError::InvalidParameter(e.to_string()))?;
        if let HoleSelection::Fixed(id) = self.hole {
            if id >= self.scene.holes.len() {
                return bad("selected hole does not exist");
            }
        }
        if !(self.yaw_range[1] >= self.yaw_range[0]) {
            return bad("yaw_range must be [min, max]");
        }
        if !(self.rate_hz > 0.0) || !(self.plant_time_constant >= 0.0) || !(self.settle_time >= 0.0) {
            return bad("rate, plant time constant and settle time must be valid");
        }
        if !(self.tolerances.clearance > 0.0) {
            return bad("clearance must be positive");
        }
        Ok(())
    }
}

/// One fully specified trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyScenario {
    pub scene: BarScene,
    pub hole_id: usize,
    pub bar_yaw: f64,
    pub seed: u64,
}

impl AssemblyScenario {
    pub fn from_config(cfg: &AssemblyConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hole_id = match cfg.hole {
            HoleSelection::Fixed(id) => id,
            HoleSelection::Random => rng.random_range(0..cfg.scene.holes.len()),
        };
        Self {
            scene: cfg.scene.scene().yawed(cfg.bar_yaw, &cfg.pivot),
            hole_id,
            bar_yaw: cfg.bar_yaw,
            seed,
        }
    }

    /// Random yaw within the configured range, then a random hole among those in view.
    pub fn sample(cfg: &AssemblyConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [lo, hi] = cfg.yaw_range;
        let yaw = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let scene = cfg.scene.scene().yawed(yaw, &cfg.pivot);
        let hole_id = match cfg.hole {
            HoleSelection::Fixed(id) => id,
            HoleSelection::Random => {
                let cam = &cfg.scene.camera;
                let visible: Vec<usize> = (0..scene.holes.len())
                    .filter(|&h| {
                        let (c, a, _) = scene.hole_world(h).expect("id in range");
                        a.dot(&(cam.pose.position - c)) > 0.0 && cam.in_image(&cam.to_camera(&c))
                    })
                    .collect();
                if visible.is_empty() {
                    rng.random_range(0..scene.holes.len())
                } else {
                    visible[rng.random_range(0..visible.len())]
                }
            }
        };
        Self {
            scene,
            hole_id,
            bar_yaw: yaw,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub hole_id: usize,
    pub bar_yaw: f64,
    pub success: bool,
    /// m, NaN when the trial stopped before insertion.
    pub lateral_error: f64,
    /// rad
    pub tilt: f64,
    /// m
    pub depth: f64,
    pub final_state: TaskState,
    pub estimate: Option<HoleEstimate>,
    pub metrics: Option<TrajectoryReport>,
    pub events: Vec<StepEvent>,
}

impl TrialResult {
    /// Re-evaluates the success predicate on the stored record.
    pub fn rescore(&self, tol: &Tolerances) -> bool {
        self.final_state == TaskState::Done && is_success(self.lateral_error, self.tilt, self.depth, tol)
    }
}

/// Final record of an executed insertion.
#[derive(Debug, Clone)]
pub struct Execution {
    pub executed: Trajectory,
    pub lateral_error: f64,
    pub tilt: f64,
    pub depth: f64,
}

/// Tracks `plan` on the lagged plant at `cfg.rate_hz`, with bar contact against the true hole.
pub fn execute_plan(cfg: &AssemblyConfig, scene: &BarScene, hole_id: usize, plan: &Trajectory) -> Execution {
    let (center, axis, _) = scene.hole_world(hole_id).expect("hole id validated");
    let hole = HoleFrame { center, axis };
    let dt = 1.0 / cfg.rate_hz;
    let t_end = plan.last().t + cfg.settle_time;
    let steps = (t_end / dt).ceil() as usize;
    let start = plan.first().pose;
    let mut state = PlantState::at_rest(start, cfg.plant_time_constant);
    let mut inside = false;
    let mut samples = vec![Sample::new(plan.first().t, start)];
    for k in 1..=steps {
        let t = plan.first().t + k as f64 * dt;
        state.x_c = plan.pose_at(t);
        state = plant_step(&state, dt);
        let (tip, now_inside) = contact(scene, &hole, cfg.tolerances.clearance, inside, state.x_r.position);
        inside = now_inside;
        state.x_r.position = tip;
        samples.push(Sample::new(t, state.x_r));
    }
    let last = state.x_r;
    let (h, lat) = hole.split(&last.position);
    let tool_z = last.orientation.rotate(&Vec3::z());
    Execution {
        executed: Trajectory::new(samples).expect("uniform ticks"),
        lateral_error: lat.norm(),
        tilt: tool_z.dot(&-axis).clamp(-1.0, 1.0).acos(),
        depth: (-h).max(0.0),
    }
}

/// Runs the state machine over `script` (the human's events). Robot-side
/// events are emitted by the runner when its actions finish.
pub fn execute_trial(cfg: &AssemblyConfig, scenario: &AssemblyScenario, dmp: &PoseDmp, script: &[StepEvent]) -> TrialResult {
    let mut state = TaskState::AwaitingBar;
    let mut log: Vec<StepEvent> = Vec::new();
    let mut clock = 0.0f64;
    let mut script = script.iter();
    let mut estimate = None;
    let mut plan = None;
    let mut execution: Option<Execution> = None;

    let fire = |state: &mut TaskState, kind: EventKind, t: f64, log: &mut Vec<StepEvent>| {
        let ev = StepEvent::new(kind, t);
        log.push(ev);
        *state = advance(state, &ev);
    };

    while !state.is_terminal() {
        match state {
            TaskState::BarPlaced => {
                clock += cfg.grasp_time;
                fire(&mut state, EventKind::MotionDone, clock, &mut log);
            }
            TaskState::PegGrasped => {
                clock += cfg.vision_time;
                let cam = &cfg.scene.camera;
                match localize(&scenario.scene, cam, scenario.hole_id, &cfg.mask, scenario.seed) {
                    Ok(est) => match plan_insertion(&cfg.initial_pose, &est, dmp, &cfg.plan) {
                        Ok(p) => {
                            estimate = Some(est);
                            plan = Some(p);
                            fire(&mut state, EventKind::VisionReady, clock, &mut log);
                        }
                        Err(e) => state = TaskState::Failed(format!("planning failed: {e}")),
                    },
                    Err(crate::vision::VisionError::NotDetectable { .. }) => {
                        state = TaskState::Failed("hole not detectable".into())
                    }
                    Err(e) => state = TaskState::Failed(format!("localization failed: {e}")),
                }
            }
            TaskState::Inserting => {
                let p = plan.as_ref().expect("planned before inserting");
                let ex = execute_plan(cfg, &scenario.scene, scenario.hole_id, p);
                clock += ex.executed.duration();
                execution = Some(ex);
                fire(&mut state, EventKind::MotionDone, clock, &mut log);
            }
            _ => match script.next() {
                Some(ev) => {
                    clock = clock.max(ev.t);
                    fire(&mut state, ev.kind, clock, &mut log);
                }
                None => state = TaskState::Failed("event stream ended".into()),
            },
        }
    }

    let (lateral_error, tilt, depth, metrics) = match &execution {
        Some(ex) => (ex.lateral_error, ex.tilt, ex.depth, trajectory_report(&ex.executed).ok()),
        None => (f64::NAN, f64::NAN, f64::NAN, None),
    };
    let mut result = TrialResult {
        seed: scenario.seed,
        hole_id: scenario.hole_id,
        bar_yaw: scenario.bar_yaw,
        success: false,
        lateral_error,
        tilt,
        depth,
        final_state: state,
        estimate,
        metrics,
        events: log,
    };
    result.success = result.rescore(&cfg.tolerances);
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub max: f64,
}

fn spread(values: impl Iterator<Item = f64>) -> Option<Spread> {
    let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    (!v.is_empty()).then(|| Spread {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        max: v.iter().copied().fold(f64::MIN, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub n: usize,
    pub seed: u64,
    pub successes: usize,
    pub success_rate: f64,
    pub lateral_error: Option<Spread>,
    pub tilt: Option<Spread>,
    pub depth: Option<Spread>,
    pub trials: Vec<TrialResult>,
}

/// Seed of trial `i` in a batch.
pub fn trial_seed(seed: u64, i: usize) -> u64 {
    cell_seed(seed, i, 0x7472)
}

pub fn run_batch(cfg: &AssemblyConfig, dmp: &PoseDmp, n: usize, seed: u64) -> Result<BatchReport, AssemblyError> {
    if n == 0 {
        return Err(AssemblyError::InvalidParameter("n must be at least 1".into()));
    }
    cfg.validate()?;
    let one = |i: usize| {
        let scenario = AssemblyScenario::sample(cfg, trial_seed(seed, i));
        execute_trial(cfg, &scenario, dmp, &default_script())
    };
    #[cfg(feature = "parallel")]
    let trials: Vec<TrialResult> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trials: Vec<TrialResult> = (0..n).map(one).collect();
    let successes = trials.iter().filter(|t| t.success).count();
    Ok(BatchReport {
        n,
        seed,
        successes,
        success_rate: successes as f64 / n as f64,
        lateral_error: spread(trials.iter().map(|t| t.lateral_error)),
        tilt: spread(trials.iter().map(|t| t.tilt)),
        depth: spread(trials.iter().map(|t| t.depth)),
        trials,
    })
}

pub const TRIAL_HEADER: &str = "trial,seed,hole_id,success,lat_err_m,tilt_rad,depth_m";

pub fn trials_csv(trials: &[TrialResult]) -> String {
    let mut s = String::from(TRIAL_HEADER);
    s.push('\n');
    for (i, t) in trials.iter().enumerate() {
        s.push_str(&format!(
            "{i},{},{},{},{},{},{}\n",
            t.seed,
            t.hole_id,
            t.success,
            fmt_sig9(t.lateral_error),
            fmt_sig9(t.tilt),
            fmt_sig9(t.depth)
        ));
    }
    s
}

/// Fits a DMP to a simulated admittance-mode teaching run along `path`.
pub fn teach_dmp(scenario: &TeachingScenario, path: &[Pose], config: &DmpConfig, seed: u64) -> Result<PoseDmp, AssemblyError> {
    let demo = scenario
        .run_proposed(path, seed)
        .map_err(|e| AssemblyError::InvalidParameter(format!("teaching simulation failed: {e}")))?;
    Ok(fit_pose_dmp(&demo, config)?.0)
}

/// The insertion DMP taught on the reference path with default settings.
pub fn default_dmp() -> Result<PoseDmp, AssemblyError> {
    teach_dmp(&TeachingScenario::default(), &reference_waypoints(), &DmpConfig::default(), 0)
}
